"""Chi-square distribution, seeded random streams and the AR(1) generator."""

from __future__ import annotations

import numpy as np
from scipy import special

from .errors import DomainError


def chi2_cdf(df: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(df/2, x/2)``."""
    if df <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    if np.isnan(x) or x < 0:
        raise DomainError(f"chi-square argument must be >= 0, got {x}")
    if np.isinf(x):
        return 1.0
    return float(special.gammainc(df / 2.0, x / 2.0))


def chi2_sf(df: float, x: float) -> float:
    """Upper tail ``1 - chi2_cdf(df, x)`` without cancellation."""
    if df <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    if np.isnan(x) or x < 0:
        raise DomainError(f"chi-square argument must be >= 0, got {x}")
    if np.isinf(x):
        return 0.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def chi2_quantile(df: float, p: float) -> float:
    """Inverse of :func:`chi2_cdf`, polished by Newton steps on the CDF."""
    if df <= 0:
        raise DomainError(f"degrees of freedom must be positive, got {df}")
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    k = df / 2.0
    x = 2.0 * float(special.gammaincinv(k, p))
    for _ in range(3):
        err = special.gammainc(k, x / 2.0) - p
        if abs(err) <= 1e-15:
            break
        # chi-square density
        logpdf = (k - 1.0) * np.log(x / 2.0) - x / 2.0 - special.gammaln(k) - np.log(2.0)
        x -= err / np.exp(logpdf)
    return float(x)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and a substream path.

    ``make_rng(seed, r)`` is the stream of replication ``r``; nested paths
    such as ``make_rng(seed, r, b)`` give independent child streams.
    """
    path = [int(seed), *(int(s) for s in stream)]
    if min(path) < 0:
        raise DomainError(f"seed and stream indices must be non-negative, got {path}")
    ss = np.random.SeedSequence(path)
    return np.random.Generator(np.random.Philox(ss))


def ar1_simulate(n: int, d: int, rho, rng: np.random.Generator) -> np.ndarray:
    """Stationary ``x[t+1] = diag(rho) x[t] + e[t+1]`` with standard normal noise.

    ``rho`` is a scalar (replicated across components) or a length-``d``
    vector.  The first row is drawn from the stationary law
    ``N(0, 1 / (1 - rho**2))``.
    """
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (d,))
    if np.any(np.abs(rho) >= 1.0):
        raise DomainError(f"AR coefficient must satisfy |rho| < 1, got {rho}")
    e = rng.standard_normal((n, d))
    x = np.empty((n, d))
    x[0] = e[0] / np.sqrt(1.0 - rho**2)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + e[t]
    return x
