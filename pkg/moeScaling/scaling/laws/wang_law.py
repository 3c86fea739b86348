"""
Dense Chinchilla form extended with the total expert count E:

    L = a / (N^alpha E^gamma) + b / D^beta + tau
"""
import numpy as np

NAMES = ("a", "b", "alpha", "beta", "gamma", "tau")
LOG_PARAMS = ("a", "b", "tau")
EXPONENTS = ("alpha", "beta", "gamma")
REQUIRED_AXES = ("N", "D")


def evaluate(theta, X, r_term_mode="r", jacobian=False):
    a, b, alpha, beta, gamma, tau = theta
    log_n = np.log(X["N"])
    log_d = np.log(X["D"])
    log_e = np.log(X["E"])
    u_a = np.exp(-alpha * log_n - gamma * log_e)
    u_b = np.exp(-beta * log_d)
    pred = a * u_a + b * u_b + tau
    if not jacobian:
        return pred

    jac = np.column_stack([
        u_a,
        u_b,
        -log_n * a * u_a,
        -log_d * b * u_b,
        -log_e * a * u_a,
        np.ones_like(pred),
    ])
    return pred, jac
