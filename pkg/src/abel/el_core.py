"""Empirical likelihood for a fixed set of estimating-equation vectors.

Given rows ``T_1, ..., T_n`` (each a q-vector), the profile empirical
likelihood maximises ``prod(n * p_i)`` over probability weights with
``sum(p_i * T_i) = 0``.  The solution is ``p_i = 1 / (n * (1 + lam' T_i))``
where ``lam`` minimises the convex dual

    F(lam) = -sum(log(1 + lam' T_i)).

The dual is minimised by damped Newton iterations on Owen's pseudo-logarithm
``log*``, which coincides with ``log`` above ``1/n`` and continues it by a
quadratic below, so the objective is finite everywhere.  Because every
optimal weight satisfies ``p_i <= 1``, the true optimum always lies inside
the region where ``log*`` and ``log`` agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateSecondMoment, NonConvergence

MAX_ITER = 200
RTOL = 1e-10
RANK_TOL = 1e-12
_DIVERGENCE_LEVEL = 50.0


@dataclass(frozen=True)
class ELSolution:
    """Result of :func:`solve_lambda`.

    ``log_ratio`` is ``sum(log(n * p_i))``; it is ``-inf`` when the origin is
    not interior to the convex hull of the rows.
    """

    lam: np.ndarray
    weights: np.ndarray
    log_ratio: float
    converged: bool
    iterations: int
    residual_norm: float


def as_values(T) -> np.ndarray:
    """Coerce to a finite 2-D float array (rows = estimating values)."""
    arr = np.asarray(T, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"estimating values must be a non-empty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("estimating values must be finite")
    return arr


def _logstar(z: np.ndarray, eps: float):
    """Pseudo-log and its first two derivatives."""
    z = np.asarray(z, dtype=float)
    inside = z >= eps
    zs = np.where(inside, z, 1.0)
    r = z / eps
    f = np.where(inside, np.log(zs), np.log(eps) - 1.5 + 2.0 * r - 0.5 * r * r)
    d1 = np.where(inside, 1.0 / zs, (2.0 - r) / eps)
    d2 = np.where(inside, -1.0 / (zs * zs), -1.0 / (eps * eps))
    return f, d1, d2


def check_second_moment(T: np.ndarray) -> None:
    """Raise :class:`DegenerateSecondMoment` if ``sum(T_i T_i')`` is rank deficient."""
    n = T.shape[0]
    S = T.T @ T / n
    ev = np.linalg.eigvalsh(S)
    if ev[-1] <= 0.0 or ev[0] < RANK_TOL * ev[-1]:
        raise DegenerateSecondMoment(
            f"second moment of estimating values is rank deficient "
            f"(eigenvalues {ev[0]:.3g} .. {ev[-1]:.3g})"
        )


def _hull_lp(T: np.ndarray, strict: bool) -> bool:
    n, q = T.shape
    # variables: p_1..p_n, t ; maximise t subject to p_i >= t, sum p = 1, sum p_i T_i = 0
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((q + 1, n + 1))
    A_eq[:q, :n] = T.T
    A_eq[q, :n] = 1.0
    b_eq = np.zeros(q + 1)
    b_eq[q] = 1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    b_ub = np.zeros(n)
    bounds = [(0.0, None)] * n + [(0.0, 1.0 / n)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        return False
    if not strict:
        return True
    return bool(-res.fun > 1e-9 / n)


def hull_contains_origin(T, strict: bool = False) -> bool:
    """Whether the origin lies in the convex hull of the rows of ``T``.

    With ``strict=True`` the origin must admit a representation with every
    weight strictly positive, which is the condition for a finite
    empirical likelihood.
    """
    T = as_values(T)
    if T.shape[1] == 1:
        t = T[:, 0]
        if strict:
            return bool((t.min() < 0 < t.max()) or np.all(t == 0))
        return bool(t.min() <= 0 <= t.max())
    if np.all(T == 0):
        return True
    return _hull_lp(T, strict)


def _finish(T, lam, n, it, resid, converged):
    z = 1.0 + T @ lam
    w = 1.0 / (n * z)
    log_ratio = -float(np.sum(np.log(z)))
    return ELSolution(lam, w, min(log_ratio, 0.0), converged, it, resid)


def solve_lambda(T, *, max_iter: int = MAX_ITER, raise_on_failure: bool = True) -> ELSolution:
    """Solve for the Lagrange multiplier of the empirical likelihood program.

    Parameters
    ----------
    T : array_like, shape (n, q)
        Estimating-equation values, one per row.
    max_iter : int
        Newton iteration cap.
    raise_on_failure : bool
        If False, a non-converged :class:`ELSolution` (``log_ratio = -inf``)
        is returned instead of raising :class:`NonConvergence`.

    Raises
    ------
    DegenerateSecondMoment
        If ``sum(T_i T_i')`` is (numerically) singular.
    NonConvergence
        If the iteration cap is hit; typically the origin is on or outside
        the boundary of the convex hull of the rows.
    """
    T = as_values(T)
    n, q = T.shape
    if np.all(T == 0):
        return ELSolution(np.zeros(q), np.full(n, 1.0 / n), 0.0, True, 0, 0.0)
    check_second_moment(T)

    eps = 1.0 / n
    tol = RTOL * (1.0 + np.linalg.norm(T.mean(axis=0)))
    lam = np.zeros(q)
    f, d1, d2 = _logstar(np.ones(n), eps)
    obj = -f.sum()
    resid = np.inf
    hull_checked = False
    it = 0
    for it in range(1, max_iter + 1):
        z = 1.0 + T @ lam
        grad = -(T.T @ d1)
        resid = float(np.linalg.norm(grad)) / n
        # at a genuine stationary point the implied weights also sum to one
        at_optimum = resid <= tol and z.min() >= eps and abs(np.sum(1.0 / z) / n - 1.0) <= 1e-9
        H = (T * (-d2)[:, None]).T @ T
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
        decrement = float(-grad @ step)
        t = 1.0
        accepted = False
        if 0.0 <= decrement < 1e-8:
            # quadratic-convergence region: the objective change is at rounding level
            cand = lam + step
            fc, d1c, d2c = _logstar(1.0 + T @ cand, eps)
            oc = -fc.sum()
            accepted = True
        while not accepted and t > 1e-12:
            cand = lam + t * step
            fc, d1c, d2c = _logstar(1.0 + T @ cand, eps)
            oc = -fc.sum()
            if oc <= obj - 1e-4 * t * decrement:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # floating-point floor reached
            if at_optimum or (z.min() >= eps and decrement <= 1e-20 * n):
                return _finish(T, lam, n, it, resid, True)
            break
        lam, obj, d1, d2 = cand, oc, d1c, d2c
        if at_optimum:
            # the step just taken is a polishing step past the tolerance
            new_resid = float(np.linalg.norm(T.T @ d1)) / n
            if (1.0 + T @ lam).min() >= eps:
                return _finish(T, lam, n, it, new_resid, True)
        if not np.all(np.isfinite(lam)):
            break
        wsum = float(np.sum(d1)) / n
        if not hull_checked and (obj < -_DIVERGENCE_LEVEL * n or wsum < 0.05):
            # the dual is unbounded below exactly when the origin is not interior to the hull
            hull_checked = True
            if not hull_contains_origin(T, strict=True):
                break

    if raise_on_failure:
        raise NonConvergence(
            f"empirical likelihood dual did not converge after {it} iterations "
            f"(residual {resid:.3g})"
        )
    return ELSolution(lam, np.full(n, np.nan), -np.inf, False, it, float(resid))


def log_el_ratio(T) -> float:
    """Log empirical likelihood ratio ``sum(log(n p_i))``.

    Returns ``-inf`` when the origin is not interior to the convex hull of
    the rows, following the convention that the likelihood of an empty
    constraint set is zero.
    """
    T = as_values(T)
    sol = solve_lambda(T, raise_on_failure=False)
    if sol.converged:
        return sol.log_ratio
    if not hull_contains_origin(T, strict=True):
        return -np.inf
    raise NonConvergence(
        f"empirical likelihood dual did not converge after {sol.iterations} iterations "
        f"although the origin is interior to the hull (residual {sol.residual_norm:.3g})"
    )
