"""
Sparsity-aware law with a shared exponent gamma in the c and d terms, as published:

    L = a / N^alpha + b / N^beta + c / (1-S)^gamma + d / ((1-S)^delta N^gamma) + tau
"""
import numpy as np

NAMES = ("a", "b", "c", "d", "alpha", "beta", "gamma", "delta", "tau")
LOG_PARAMS = ("a", "b", "c", "d", "tau")
EXPONENTS = ("alpha", "beta", "gamma", "delta")
REQUIRED_AXES = ("N", "S")


def evaluate(theta, X, r_term_mode="r", jacobian=False):
    a, b, c, d, alpha, beta, gamma, delta, tau = theta
    log_n = np.log(X["N"])
    log_active = np.log1p(-X["S"])
    u_a = np.exp(-alpha * log_n)
    u_b = np.exp(-beta * log_n)
    u_c = np.exp(-gamma * log_active)
    u_d = np.exp(-delta * log_active - gamma * log_n)
    pred = a * u_a + b * u_b + c * u_c + d * u_d + tau
    if not jacobian:
        return pred

    jac = np.column_stack([
        u_a,
        u_b,
        u_c,
        u_d,
        -log_n * a * u_a,
        -log_n * b * u_b,
        -log_active * c * u_c - log_n * d * u_d,
        -log_active * d * u_d,
        np.ones_like(pred),
    ])
    return pred, jac
