"""High-precision tuning parameter for the adjusted blockwise likelihood.

The plug-in estimate proceeds in four steps:

1. block means are whitened so that ``(M/Q) sum(T_i T_i') = I``;
2. single-block moment tensors ``alpha`` (orders 3 and 4) and cross-block
   tensors ``alpha~`` are estimated from the whitened means;
3. the ``t`` contractions are assembled into the q x q matrix ``a_ri``;
4. ``a = (1/(2q)) (Q/n) trace(a_ri)``.

Because the estimate is a full contraction of tensors built from whitened
data it does not depend on which whitening root is used, and it is
invariant to nonsingular linear maps of the estimating values.

The estimate is then bias corrected by the non-overlapping block bootstrap,
with the correction applied only when the estimated bias exceeds its
bootstrap standard error.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .blocking import OVERLAPPING, BlockScheme, block_means
from .errors import (
    BootstrapDegenerate,
    DegenerateSecondMoment,
    InvalidBlockSpec,
    MissingMoments,
    NumericalError,
    UnsupportedGrouping,
)
from .stats import make_rng

EIG_FLOOR = 1e-12

# cross-block groupings entering a_ri
GROUPINGS = ("j|k|l", "jk|l", "jk|lm", "jkl|m")


@dataclass(frozen=True)
class BootstrapSettings:
    replications: int = 100
    block_length: int | None = None  # None: use the analysis block length
    seed: int = 0

    def __post_init__(self):
        if self.replications < 50:
            raise ValueError(f"bootstrap needs at least 50 replications, got {self.replications}")
        if self.block_length is not None and self.block_length < 1:
            raise ValueError(f"bootstrap block length must be >= 1, got {self.block_length}")


@dataclass
class MomentSet:
    q: int
    M: float
    Q: int
    alpha3: np.ndarray
    alpha4: np.ndarray
    atilde: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class BiasDiagnostics:
    plugin: float
    bias: float
    se: float
    replications: int
    failures: int
    corrected: bool


def whiten(T, M: float) -> tuple[np.ndarray, np.ndarray]:
    """Whiten block means so that ``(M/Q) sum(Tw_i Tw_i') = I``.

    Returns the whitened rows and the symmetric transform ``W = S^{-1/2}``
    (``Tw_i = W T_i``).
    """
    T = np.asarray(T, dtype=float)
    if T.ndim == 1:
        T = T[:, None]
    Q = T.shape[0]
    S = (M / Q) * (T.T @ T)
    ev, V = np.linalg.eigh(S)
    if ev[-1] <= 0.0 or ev[0] < EIG_FLOOR * ev[-1]:
        raise DegenerateSecondMoment(
            f"blockwise second moment is singular (eigenvalues {ev[0]:.3g} .. {ev[-1]:.3g})"
        )
    W = (V / np.sqrt(ev)) @ V.T
    return T @ W, W


def _outer_rows(T: np.ndarray, order: int) -> np.ndarray:
    """Per-row outer powers, shape (Q, q, ..., q)."""
    P = T
    for _ in range(order - 1):
        P = P[..., None] * T.reshape((T.shape[0],) + (1,) * (P.ndim - 1) + (T.shape[1],))
    return P


def alpha_hat(Tw, M: float, v: int) -> np.ndarray:
    """``M^(v-1) * mean_i(T_i^{j1} ... T_i^{jv})`` as a fully symmetric tensor."""
    Tw = np.asarray(Tw, dtype=float)
    if v < 1:
        raise ValueError(f"order must be positive, got {v}")
    return M ** (v - 1) * _outer_rows(Tw, v).mean(axis=0)


def parse_grouping(grouping: str) -> tuple[int, ...]:
    """``"jk|l"`` -> ``(2, 1)``.  Commas are accepted as separators too."""
    parts = grouping.replace(",", "|").split("|")
    sizes = tuple(len(p.strip()) for p in parts)
    if any(s == 0 for s in sizes):
        raise UnsupportedGrouping(f"empty group in {grouping!r}")
    k, d = sum(sizes), len(sizes)
    if k not in (3, 4) or d not in (2, 3):
        raise UnsupportedGrouping(f"grouping {grouping!r} has order {k} and {d} groups")
    return sizes


def _offsets(d: int, width: int):
    """Offset vectors ``(0, s_2, ..., s_d)`` with every pairwise gap <= width."""
    rng = range(-width, width + 1)
    for rest in itertools.product(rng, repeat=d - 1):
        pts = (0,) + rest
        if max(pts) - min(pts) <= width:
            yield pts


def alpha_tilde_hat(Tw, M: float, grouping: str) -> np.ndarray:
    """Cross-block moment tensor for a grouping such as ``"jk|l"``.

    Sums, over index tuples ``(i(1), ..., i(d))`` of blocks whose pairwise
    distances are at most ``k - 2``, the product of within-group powers of
    the whitened means, scaled by ``M^(k-1) / Q``.  Edge tuples are included
    whenever every index is a valid block.
    """
    Tw = np.asarray(Tw, dtype=float)
    sizes = parse_grouping(grouping)
    Q, q = Tw.shape
    k, d = sum(sizes), len(sizes)
    P = [_outer_rows(Tw, s).reshape(Q, -1) for s in sizes]
    out = np.zeros([q ** s for s in sizes])
    for offs in _offsets(d, k - 2):
        lo = -min(offs)
        hi = Q - max(offs)
        if hi <= lo:
            continue
        views = [P[g][lo + offs[g] : hi + offs[g]] for g in range(d)]
        if d == 2:
            out += views[0].T @ views[1]
        else:
            out += np.einsum("ia,ib,ic->abc", *views)
    return (M ** (k - 1) / Q) * out.reshape((q,) * k)


def moment_set(Tw, M: float) -> MomentSet:
    Tw = np.asarray(Tw, dtype=float)
    Q, q = Tw.shape
    return MomentSet(
        q=q,
        M=M,
        Q=Q,
        alpha3=alpha_hat(Tw, M, 3),
        alpha4=alpha_hat(Tw, M, 4),
        atilde={g: alpha_tilde_hat(Tw, M, g) for g in GROUPINGS},
    )


def t_terms(m: MomentSet) -> dict[str, np.ndarray]:
    """The q x q matrices ``t_1a ... t_3c`` indexed ``[r, i]``, plus primed variants.

    A primed term exchanges the roles of ``r`` and ``i``, i.e. it is the
    transpose of the unprimed matrix.
    """
    try:
        A3, A4 = m.alpha3, m.alpha4
        B3 = m.atilde["j|k|l"]
        B21 = m.atilde["jk|l"]
        B22 = m.atilde["jk|lm"]
        B31 = m.atilde["jkl|m"]
    except KeyError as exc:
        raise MissingMoments(f"moment set lacks {exc.args[0]!r}") from None
    if A3 is None or A4 is None:
        raise MissingMoments("moment set lacks single-block moments")

    ein = np.einsum
    A3A3 = ein("rkl,ikl->ri", A3, A3)
    # contractions over a repeated pair
    A3_tr = ein("rkk->r", A3)            # alpha^{rkk}
    B21_tr = ein("rkk->r", B21)          # alpha~^{rk,k}
    t = {}
    t["t1a"] = ein("rkl,ikl->ri", A3, B3)
    t["t1b"] = (
        3 / 8 * ein("rkl,lki->ri", B21, B21)
        - 5 / 6 * ein("rkl,ikl->ri", A3, B21)
        - 5 / 6 * ein("rkl,kli->ri", A3, B21)
        + 8 / 9 * A3A3
    )
    t["t1c"] = (
        1 / 4 * ein("rkl,ilk->ri", A3, B21)
        - 2 / 3 * ein("rkl,ikl->ri", A3, B21)
        + 2 / 9 * A3A3
    )
    t["t2a"] = (
        3 / 8 * np.outer(B21_tr, B21_tr)
        - 5 / 12 * ein("irk,k->ri", A3, B21_tr)
        + 4 / 9 * ein("ril,l->ri", A3, A3_tr)
        - 5 / 12 * ein("k,ikr->ri", A3_tr, B21)
    )
    t["t2b"] = (
        1 / 4 * np.outer(B21_tr, B21_tr)
        - 1 / 3 * np.outer(A3_tr, B21_tr)
        + 1 / 9 * np.outer(A3_tr, A3_tr)
    )
    t["t3a"] = -1 / 2 * ein("rkki->ri", B22)
    t["t3b"] = (
        3 / 8 * ein("rkik->ri", B22)
        + ein("irll->ri", B31)
        - 3 / 4 * ein("rikk->ri", A4)
    )
    t["t3c"] = 1 / 4 * ein("rkik->ri", B22)
    for name in ("t1a", "t1b", "t2a", "t2b", "t3a", "t3b"):
        t[name + "'"] = t[name].T.copy()
    return t


def a_matrix(m: MomentSet) -> np.ndarray:
    """``a_ri``: symmetrised sum of the t terms divided by q."""
    t = t_terms(m)

    def two(name):
        return t[name] + t[name + "'"]

    total = (
        two("t1a") + two("t1b") + t["t1c"]
        + two("t2a") + t["t2b"]
        + two("t3a") + two("t3b") + t["t3c"]
    )
    return total / m.q


def a_from_moments(m: MomentSet, n: int) -> float:
    """``(1/(2q)) (Q/n) sum_i a_ii``."""
    return float(np.trace(a_matrix(m)) * m.Q / (2.0 * m.q * n))


def a_plugin(g, scheme: BlockScheme) -> float:
    """Plug-in high-precision tuning parameter from row-level estimating values.

    The derivation assumes non-overlapping blocks; an overlapping scheme is
    accepted with a warning.  For progressive schemes the mean block length
    plays the role of ``M``.
    """
    if scheme.kind == OVERLAPPING:
        warnings.warn(
            "high-precision tuning assumes non-overlapping blocks; got an overlapping scheme",
            stacklevel=2,
        )
    T = block_means(g, scheme)
    M = scheme.block_length
    Tw, _ = whiten(T, M)
    return a_from_moments(moment_set(Tw, M), scheme.n)


def nbb_resample(series, block_length: int, rng: np.random.Generator) -> np.ndarray:
    """Non-overlapping block bootstrap resample of the rows of ``series``.

    Blocks are drawn with replacement from the partition into
    ``n // block_length`` consecutive full blocks; ``ceil(n / block_length)``
    draws are concatenated and truncated to ``n`` rows.
    """
    x = np.asarray(series)
    n = x.shape[0]
    b = int(block_length)
    if b < 1 or b > n:
        raise InvalidBlockSpec(f"bootstrap block length must lie in [1, {n}], got {block_length}")
    K = n // b
    draws = rng.integers(0, K, size=-(-n // b))
    idx = (draws[:, None] * b + np.arange(b)[None, :]).ravel()[:n]
    return x[idx]


def a_bias_corrected(
    data,
    scheme: BlockScheme,
    settings: BootstrapSettings,
    g_producer: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[float, BiasDiagnostics]:
    """Plug-in tuning parameter with NBB bias correction.

    ``g_producer`` maps a (resampled) data matrix to row-level estimating
    values; by default ``data`` already holds the estimating values.  The
    bias-corrected value ``a - bias`` is used only when ``|bias| >= se``.
    """
    produce = g_producer if g_producer is not None else (lambda x: x)
    data = np.asarray(data, dtype=float)
    a0 = a_plugin(produce(data), scheme)
    b_len = settings.block_length or max(1, int(round(scheme.block_length)))
    boot = []
    failures = 0
    for b in range(settings.replications):
        rng = make_rng(settings.seed, b)
        xb = nbb_resample(data, b_len, rng)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                boot.append(a_plugin(produce(xb), scheme))
        except (NumericalError, np.linalg.LinAlgError):
            failures += 1
    if failures > 0.2 * settings.replications:
        raise BootstrapDegenerate(
            f"{failures} of {settings.replications} bootstrap resamples failed"
        )
    boot = np.asarray(boot)
    bias = float(boot.mean() - a0)
    se = float(boot.std(ddof=1)) if boot.size > 1 else 0.0
    corrected = abs(bias) >= se
    a = a0 - bias if corrected else a0
    return a, BiasDiagnostics(a0, bias, se, settings.replications, failures, corrected)
