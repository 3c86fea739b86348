"""
The extended MoE scaling law:

    L = a / N^alpha + b / D^beta + c * e^R (1-S)^gamma / N^lambda + d * r / (r+1) + tau

R is not defined alongside the formula; it is taken as the FLOPs ratio r ("r" mode) or as r/(1+r) ("r_over_1plus_r").
"""
import numpy as np

NAMES = ("a", "b", "c", "d", "alpha", "beta", "lambda", "gamma", "tau")
LOG_PARAMS = ("a", "b", "c", "d", "tau")
EXPONENTS = ("alpha", "beta", "lambda", "gamma")
REQUIRED_AXES = ("N", "D", "S", "r")
TERM_NAMES = ("params", "data", "allocation", "efficiency", "irreducible")


def r_term(r, r_term_mode="r"):
    r = np.asarray(r, dtype=np.float64)
    if r_term_mode == "r_over_1plus_r":
        return r / (1.0 + r)
    return r


def terms(theta, X, r_term_mode="r"):
    """Five additive terms, each an array over records, in TERM_NAMES order."""
    a, b, c, d, alpha, beta, lam, gamma, tau = theta
    log_n = np.log(X["N"])
    log_d = np.log(X["D"])
    log_active = np.log1p(-X["S"])
    r = X["r"]
    # power terms evaluated in log space
    u_a = np.exp(-alpha * log_n)
    u_b = np.exp(-beta * log_d)
    u_c = np.exp(r_term(r, r_term_mode) + gamma * log_active - lam * log_n)
    u_d = r / (r + 1.0)
    return a * u_a, b * u_b, c * u_c, d * u_d, np.full_like(log_n, tau)


def evaluate(theta, X, r_term_mode="r", jacobian=False):
    """
    Predicted loss for every record; with jacobian=True also d(pred)/d(theta) in natural parameters, shape (n, 9).
    """
    a, b, c, d, alpha, beta, lam, gamma, tau = theta
    log_n = np.log(X["N"])
    log_d = np.log(X["D"])
    log_active = np.log1p(-X["S"])
    r = X["r"]
    u_a = np.exp(-alpha * log_n)
    u_b = np.exp(-beta * log_d)
    u_c = np.exp(r_term(r, r_term_mode) + gamma * log_active - lam * log_n)
    u_d = r / (r + 1.0)
    pred = a * u_a + b * u_b + c * u_c + d * u_d + tau
    if not jacobian:
        return pred

    jac = np.column_stack([
        u_a,
        u_b,
        u_c,
        u_d,
        -log_n * a * u_a,
        -log_d * b * u_b,
        -log_n * c * u_c,
        log_active * c * u_c,
        np.ones_like(pred),
    ])
    return pred, jac
