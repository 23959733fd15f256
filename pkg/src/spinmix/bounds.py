"""Closed-form constants and bounds used by the decomposition pipeline.

Collected in one place so the checking code and the reports quote the same
expressions.
"""

from __future__ import annotations

import numpy as np


def f_gamma(gamma: float, D: float) -> float:
    """f(gamma) = exp(2 gamma / sqrt(D)) / (1 - gamma)^2."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    return float(np.exp(2.0 * gamma / np.sqrt(D)) / (1.0 - gamma) ** 2)


def beta_threshold(d: float, epsilon: float) -> float:
    """Closed-form inverse-temperature threshold for the signed sparse model:
    min{1, (1 + 2 e^{2/sqrt d} - sqrt(4 e^{4/sqrt d} + 4 e^{2/sqrt d})) / (1+epsilon)}."""
    e1 = np.exp(2.0 / np.sqrt(d))
    val = (1.0 + 2.0 * e1 - np.sqrt(4.0 * e1 * e1 + 4.0 * e1)) / (1.0 + epsilon)
    return float(min(1.0, val))


def forest_cov_bounds(gamma: float, D: float, Delta: float) -> dict:
    """Near-forest covariance bounds at coupling radius gamma/sqrt(D):
    restricted |Cov_S| <= f(gamma), full |Cov| <= f(gamma) Delta / D."""
    f = f_gamma(gamma, D)
    return {"restricted": f, "full": f * Delta / D}


def tree_cov_bounds(gamma: float, D: float, Delta: float) -> dict:
    """Nonnegative-coupling tree bounds: |Cov_S| <= 1/(1-gamma)^2,
    |Cov| <= Delta/(D (1-gamma)^2), |Cov A| <= 2 Delta/(sqrt(D) (1-gamma)^2)."""
    base = 1.0 / (1.0 - gamma) ** 2
    return {"restricted": base, "full": base * Delta / D,
            "product": base * 2.0 * Delta / np.sqrt(D)}


def mixing_time_bound(mlsi: float, mu_min: float, eps: float) -> float:
    """t_mix(eps) <= (1/MLSI) (log log(1/mu_min) + log(1/eps))."""
    if mlsi <= 0:
        return float("inf")
    return float((np.log(np.log(1.0 / mu_min)) + np.log(1.0 / eps)) / mlsi)


def holley_stroock_mlsi(mlsi_mu: float, c: float) -> float:
    """Density ratio in [1/c, c] degrades the MLSI constant by at most c^2."""
    if c < 1:
        raise ValueError("density ratio bound c must be >= 1")
    return mlsi_mu / (c * c)


def ball_tail_bound(d: float, epsilon: float, r: int) -> float:
    """Pr[|B_r| >= (d(1+epsilon))^r] <= exp(-eta d (1+epsilon/4)^r) with
    eta = min{epsilon^2/54, 1/18}."""
    eta = min(epsilon * epsilon / 54.0, 1.0 / 18.0)
    return float(np.exp(-eta * d * (1.0 + epsilon / 4.0) ** r))
