"""Estimating functions, constrained maximum BEL estimation, tests and intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import optimize

from .adjusted import AdjustmentSpec, statistic
from .blocking import BlockScheme, block_means
from .el_core import check_second_moment, log_el_ratio
from .errors import BracketFailure, NumericalError, OptimFailure
from .stats import chi2_quantile, chi2_sf

NM_XATOL = 1e-8
NM_MAXITER = 500


@dataclass(frozen=True)
class EstimatingFunction:
    """``evaluate(data, theta)`` returns the ``(n, q)`` matrix of g(x_t; theta).

    ``start(data, fixed)`` supplies an explicit starting value (method of
    moments or least squares) honouring the fixed components.
    """

    p: int
    q: int
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    start: Callable[[np.ndarray, Mapping[int, float]], np.ndarray] | None = None
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.q < self.p:
            raise ValueError(f"need q >= p, got p={self.p}, q={self.q}")

    def __call__(self, data, theta) -> np.ndarray:
        g = np.asarray(self.evaluate(np.asarray(data, dtype=float), np.asarray(theta, dtype=float)), dtype=float)
        return g.reshape(g.shape[0], self.q)

    def initial(self, data, fixed: Mapping[int, float]) -> np.ndarray:
        if self.start is not None:
            theta = np.array(self.start(np.asarray(data, dtype=float), fixed), dtype=float)
        else:
            theta = np.zeros(self.p)
        for j, v in fixed.items():
            theta[j] = v
        return theta


def mean_ef(dim: int) -> EstimatingFunction:
    """``g(x, mu) = x - mu`` for the mean of a ``dim``-variate series."""

    def evaluate(x, mu):
        return x[:, :dim] - mu

    def start(x, fixed):
        return x[:, :dim].mean(axis=0)

    return EstimatingFunction(dim, dim, evaluate, start)


def linreg_ef(dim: int, intercept: bool = False) -> EstimatingFunction:
    """``g = X_t (Y_t - beta' X_t)`` for data laid out as ``[Y, X_1, ..., X_dim]``.

    With ``intercept=True`` a leading column of ones is added to ``X`` and
    ``beta[0]`` is the intercept.
    """
    p = dim + 1 if intercept else dim

    def design(data):
        X = data[:, 1 : 1 + dim]
        if intercept:
            X = np.hstack([np.ones((X.shape[0], 1)), X])
        return data[:, 0], X

    def evaluate(data, beta):
        y, X = design(data)
        resid = y - X @ beta
        # residuals at rounding level are exact zeros; EL is scale free and would amplify them
        tol = 64 * np.finfo(float).eps * (np.abs(y) + np.abs(X) @ np.abs(beta))
        resid[np.abs(resid) <= tol] = 0.0
        return X * resid[:, None]

    def start(data, fixed):
        y, X = design(data)
        beta = np.zeros(p)
        idx_fixed = sorted(fixed)
        free = [j for j in range(p) if j not in fixed]
        resid = y.copy()
        for j in idx_fixed:
            beta[j] = fixed[j]
            resid = resid - X[:, j] * fixed[j]
        if free:
            beta[free] = np.linalg.lstsq(X[:, free], resid, rcond=None)[0]
        return beta

    return EstimatingFunction(p, p, evaluate, start)


@dataclass
class TestResult:
    statistic: float
    df: int
    p_value: float
    reject_at: dict[float, bool]
    mbele: np.ndarray
    null: dict[int, float] = field(default_factory=dict)
    tuning: float | None = None
    bel_statistic: float | None = None

    def __post_init__(self):
        if self.df < 1:
            raise ValueError(f"degrees of freedom must be >= 1, got {self.df}")


@dataclass
class ConfidenceInterval:
    lower: float
    estimate: float
    upper: float
    level: float
    component: int
    threshold: float
    tuning: float | None = None


def _neg_log_bel(data, ef: EstimatingFunction, theta, scheme: BlockScheme) -> float:
    try:
        return -log_el_ratio(block_means(ef(data, theta), scheme))
    except (NumericalError, np.linalg.LinAlgError):
        return math.inf


def statistic_at(data, ef: EstimatingFunction, theta, scheme: BlockScheme, adj=None) -> float:
    """BEL statistic at ``theta`` (``inf`` outside the hull), or ABEL when ``adj`` is given."""
    return statistic(ef(data, theta), scheme, adj)


def _nelder_mead(fun, x0: np.ndarray) -> tuple[np.ndarray, float]:
    k = x0.size
    steps = np.maximum(0.1 * np.abs(x0), 1e-2)
    simplex = np.vstack([x0] + [x0 + steps[j] * np.eye(k)[j] for j in range(k)])
    res = optimize.minimize(
        fun,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": NM_XATOL,
            "fatol": math.inf,
            "maxiter": NM_MAXITER,
        },
    )
    return np.asarray(res.x, dtype=float), float(res.fun)


def mbele(
    data,
    ef: EstimatingFunction,
    fixed: Mapping[int, float] | None = None,
    scheme: BlockScheme | None = None,
    fallback: AdjustmentSpec | float | None = None,
) -> np.ndarray:
    """Maximum blockwise empirical likelihood estimate with some components fixed.

    The unadjusted blockwise likelihood is maximised over the free components
    by Nelder-Mead from ``ef.initial`` with one restart.  If no point with a
    finite likelihood is found and ``fallback`` gives an adjustment, the
    adjusted statistic is minimised instead; otherwise :class:`OptimFailure`
    is raised.
    """
    if scheme is None:
        raise ValueError("a block scheme is required")
    data = np.asarray(data, dtype=float)
    fixed = {int(k): float(v) for k, v in (fixed or {}).items()}
    theta0 = ef.initial(data, fixed)
    free = [j for j in range(ef.p) if j not in fixed]
    if not free:
        return theta0

    def full(xf):
        th = theta0.copy()
        th[free] = xf
        return th

    def bel_obj(xf):
        return _neg_log_bel(data, ef, full(xf), scheme)

    x0 = theta0[free]
    best_x, best_f = x0, bel_obj(x0)
    if not math.isfinite(best_f) and fallback is not None:
        # move into the region where the hull contains the origin, if it exists
        if isinstance(fallback, AdjustmentSpec):
            adj = fallback.resolve(scheme, ef(data, full(x0)), data=data, g_producer=lambda d: ef(d, full(x0)))
        else:
            adj = float(fallback)

        def abel_obj(xf):
            try:
                return statistic(ef(data, full(xf)), scheme, adj)
            except (NumericalError, np.linalg.LinAlgError):
                return math.inf

        xa, fa = _nelder_mead(abel_obj, x0)
        xa, fa = _nelder_mead(abel_obj, xa)
        fb = bel_obj(xa)
        if not math.isfinite(fb):
            if not math.isfinite(fa):
                raise OptimFailure("adjusted objective is not finite anywhere visited")
            return full(xa)
        best_x, best_f = xa, fb
    if not math.isfinite(best_f):
        raise OptimFailure("blockwise likelihood is zero at the starting value")
    x1, f1 = _nelder_mead(bel_obj, best_x)
    if f1 <= best_f:
        best_x, best_f = x1, f1
    # restart from the optimum with a fresh simplex
    x2, f2 = _nelder_mead(bel_obj, best_x)
    if f2 <= best_f:
        best_x, best_f = x2, f2
    return full(best_x)


def _levels(levels) -> tuple[float, ...]:
    if levels is None:
        return (0.10, 0.05, 0.01)
    if isinstance(levels, (int, float)):
        return (float(levels),)
    return tuple(float(v) for v in levels)


def _resolve_at(adj, data, ef, theta, scheme):
    if adj is None or not isinstance(adj, AdjustmentSpec) or adj.is_bel:
        return adj
    th = np.array(theta, dtype=float)
    return adj.resolve(scheme, ef(data, th), data=data, g_producer=lambda d: ef(d, th))


def test_subset(
    data,
    ef: EstimatingFunction,
    null: Mapping[int, float],
    scheme: BlockScheme,
    adj: AdjustmentSpec | float | None = None,
    levels=None,
    with_bel: bool = False,
) -> TestResult:
    """Test ``theta[j] = v`` for every ``(j, v)`` in ``null``.

    The statistic is evaluated at the constrained estimate and referred to a
    chi-square law with ``q - p + r`` degrees of freedom.
    """
    r = len(null)
    if r < 1:
        raise ValueError("the null hypothesis must fix at least one component")
    data = np.asarray(data, dtype=float)
    null = {int(k): float(v) for k, v in null.items()}
    theta = mbele(data, ef, null, scheme, fallback=adj)
    adj_r = _resolve_at(adj, data, ef, theta, scheme)
    g = ef(data, theta)
    stat = statistic(g, scheme, adj_r)
    df = ef.q - ef.p + r
    reject = {lv: bool(stat > chi2_quantile(df, 1.0 - lv)) for lv in _levels(levels)}
    tuning = None
    if isinstance(adj_r, AdjustmentSpec):
        tuning = adj_r.resolved_a
    elif adj_r is not None:
        tuning = float(adj_r)
    bel = statistic(g, scheme, None) if with_bel else None
    return TestResult(stat, df, chi2_sf(df, stat), reject, theta, null, tuning, bel)


def bonferroni_tests(
    data,
    ef: EstimatingFunction,
    components: Mapping[int, float] | Sequence[int],
    familywise: float,
    scheme: BlockScheme,
    adj: AdjustmentSpec | float | None = None,
    with_bel: bool = False,
) -> list[TestResult]:
    """One single-component test per entry at level ``familywise / len(components)``.

    A sequence of indices tests each against zero.
    """
    if not isinstance(components, Mapping):
        components = {int(j): 0.0 for j in components}
    if not components:
        return []
    level = familywise / len(components)
    return [
        test_subset(data, ef, {j: v}, scheme, adj, levels=(level,), with_bel=with_bel)
        for j, v in components.items()
    ]


def _check_spread(data, ef, theta, scheme):
    T = block_means(ef(data, theta), scheme)
    Tc = T - T.mean(axis=0)
    check_second_moment(Tc if np.any(Tc) else T)


def confidence_interval(
    data,
    ef: EstimatingFunction,
    component: int = 0,
    level: float = 0.95,
    scheme: BlockScheme | None = None,
    adj: AdjustmentSpec | float | None = None,
    max_doublings: int = 60,
) -> ConfidenceInterval:
    """Likelihood-ratio interval for one component.

    Other components are profiled out (re-estimated at every candidate
    value).  Endpoints solve ``statistic = chi2_quantile(1, level)``.
    """
    if scheme is None:
        raise ValueError("a block scheme is required")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    data = np.asarray(data, dtype=float)
    theta_hat = mbele(data, ef, {}, scheme, fallback=adj)
    _check_spread(data, ef, theta_hat, scheme)
    adj_r = _resolve_at(adj, data, ef, theta_hat, scheme)
    crit = chi2_quantile(1, level)
    centre = float(theta_hat[component])

    def excess(v):
        if ef.p == 1:
            th = np.array([v])
        else:
            th = mbele(data, ef, {component: v}, scheme, fallback=adj_r)
        try:
            s = statistic_at(data, ef, th, scheme, adj_r)
        except NumericalError:
            s = math.inf
        return s - crit

    T = block_means(ef(data, theta_hat), scheme)
    step0 = max(float(np.sqrt(np.mean(T[:, min(component, T.shape[1] - 1)] ** 2))), 1e-6 * (1 + abs(centre)))
    if excess(centre) >= 0:
        raise BracketFailure("statistic at the point estimate already exceeds the critical value")

    def endpoint(sign):
        inner, h = centre, step0
        for _ in range(max_doublings):
            outer = centre + sign * h
            fo = excess(outer)
            if fo > 0:
                return _root(excess, inner, outer)
            inner = outer
            h *= 2.0
        raise BracketFailure(f"statistic stays below {crit:.4g} on the {'upper' if sign > 0 else 'lower'} side")

    lo, hi = endpoint(-1.0), endpoint(1.0)
    tuning = adj_r.resolved_a if isinstance(adj_r, AdjustmentSpec) else adj_r
    return ConfidenceInterval(lo, centre, hi, level, component, crit, tuning)


def _root(f, inside: float, outside: float, tol: float = 1e-6) -> float:
    """Crossing of ``f`` between a point with ``f < 0`` and one with ``f > 0``."""
    a, b = inside, outside
    fb = f(b)
    # shrink until the outer value is finite (BEL can jump to +inf at the hull boundary)
    for _ in range(200):
        if math.isfinite(fb):
            break
        m = 0.5 * (a + b)
        fm = f(m)
        if fm <= 0:
            a = m
        else:
            b, fb = m, fm
    if math.isfinite(fb):
        x = optimize.brentq(f, a, b, xtol=1e-14 * (1.0 + abs(a)), rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        x = a
    if abs(f(x)) > tol:
        # steep or discontinuous crossing: fall back to bisection on the sign
        lo, hi = a, b
        for _ in range(200):
            m = 0.5 * (lo + hi)
            if f(m) <= 0:
                lo = m
            else:
                hi = m
            if abs(hi - lo) <= 1e-15 * (1.0 + abs(m)):
                break
        x = lo
    return float(x)
