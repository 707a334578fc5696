"""Block schemes and blockwise means of estimating values.

Block starts are 0-based.  A fixed-length scheme with block length ``M`` and
gap ``L`` has ``Q = (n - M) // L + 1`` blocks starting at ``0, L, 2L, ...``;
trailing observations that do not fill a block are dropped.  The statistic's
scale factor ``n / (Q * M)`` accounts for the overlap between blocks and is 1
for a non-overlapping scheme covering the sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidBlockSpec, ShapeMismatch

OVERLAPPING = "overlapping"
NONOVERLAPPING = "nonoverlapping"
PROGRESSIVE = "progressive"


@dataclass(frozen=True)
class BlockScheme:
    kind: str
    n: int
    M: int | None
    L: int | None
    starts: tuple[int, ...]
    lengths: tuple[int, ...]
    note: str = ""

    @property
    def Q(self) -> int:
        return len(self.starts)

    @property
    def blocks(self) -> list[tuple[int, int]]:
        return list(zip(self.starts, self.lengths))

    @property
    def mean_length(self) -> float:
        return float(np.mean(self.lengths))

    @property
    def block_length(self) -> float:
        """``M`` for fixed-length schemes, the mean block length otherwise."""
        return float(self.M) if self.M is not None else self.mean_length

    @property
    def scale(self) -> float:
        return self.n / (self.Q * self.block_length)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "M": self.M,
            "L": self.L,
            "Q": self.Q,
            "scale": self.scale,
            "lengths": list(self.lengths) if self.kind == PROGRESSIVE else None,
            "note": self.note or None,
        }


def make_blocks(n: int, M: int, L: int | None = None) -> BlockScheme:
    """Fixed-length blocks of length ``M`` whose starts are ``L`` apart.

    ``L`` defaults to ``M`` (non-overlapping blocks).
    """
    if L is None:
        L = M
    for name, v in (("n", n), ("M", M), ("L", L)):
        if int(v) != v or v < 1:
            raise InvalidBlockSpec(f"{name} must be a positive integer, got {v!r}")
    n, M, L = int(n), int(M), int(L)
    if M > n:
        raise InvalidBlockSpec(f"block length M={M} exceeds sample size n={n}")
    if L > M:
        raise InvalidBlockSpec(f"gap L={L} exceeds block length M={M}")
    Q = (n - M) // L + 1
    starts = tuple(range(0, Q * L, L))
    kind = NONOVERLAPPING if L == M else OVERLAPPING
    return BlockScheme(kind, n, M, L, starts, (M,) * Q)


def triangular_lengths(n: int) -> tuple[int, ...]:
    """Lengths ``1, 2, ..., k`` with ``k(k+1)/2 <= n``; leftovers join the last block."""
    k = int((np.sqrt(8 * n + 1) - 1) // 2)
    while k * (k + 1) // 2 > n:
        k -= 1
    while (k + 1) * (k + 2) // 2 <= n:
        k += 1
    lengths = list(range(1, k + 1))
    lengths[-1] += n - k * (k + 1) // 2
    return tuple(lengths)


def progressive_blocks(
    n: int, lengths_rule: Callable[[int], tuple[int, ...]] = triangular_lengths
) -> BlockScheme:
    """Consecutive non-overlapping blocks of progressively increasing length.

    The default rule is triangular (lengths ``1, 2, ..., k``).  Any rule
    returning positive lengths summing to at most ``n`` may be supplied.
    The scale factor is ``n / (Q * mean length)``.
    """
    if int(n) != n or n < 3:
        raise InvalidBlockSpec(f"progressive blocking needs n >= 3, got {n!r}")
    n = int(n)
    lengths = tuple(int(m) for m in lengths_rule(n))
    if not lengths or min(lengths) < 1 or sum(lengths) > n:
        raise InvalidBlockSpec(f"block length rule produced invalid lengths {lengths}")
    starts = tuple(int(s) for s in np.concatenate([[0], np.cumsum(lengths)[:-1]]))
    note = "triangular stand-in for Kim et al. (2013)" if lengths_rule is triangular_lengths else ""
    return BlockScheme(PROGRESSIVE, n, None, None, starts, lengths, note)


def scheme_from_spec(n: int, spec, L: int | None = None) -> BlockScheme:
    """Build a scheme from ``"pro"``/``"progressive"`` or an integer block length."""
    if isinstance(spec, BlockScheme):
        return spec
    if isinstance(spec, str):
        s = spec.strip().lower()
        if s in ("pro", "progressive"):
            return progressive_blocks(n)
        try:
            spec = int(s)
        except ValueError:
            raise InvalidBlockSpec(f"unrecognised block specification {spec!r}") from None
    return make_blocks(n, int(spec), L)


def block_means(g, scheme: BlockScheme) -> np.ndarray:
    """Row ``i`` of the result is the average of ``g`` over block ``i``."""
    g = np.asarray(g, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    if g.shape[0] != scheme.n:
        raise ShapeMismatch(f"estimating values have {g.shape[0]} rows, scheme expects n={scheme.n}")
    if scheme.M is not None:
        M, L, Q = scheme.M, scheme.L, scheme.Q
        if L == M:
            return g[: Q * M].reshape(Q, M, -1).mean(axis=1)
        csum = np.vstack([np.zeros((1, g.shape[1])), np.cumsum(g, axis=0)])
        starts = np.asarray(scheme.starts)
        return (csum[starts + M] - csum[starts]) / M
    csum = np.vstack([np.zeros((1, g.shape[1])), np.cumsum(g, axis=0)])
    starts = np.asarray(scheme.starts)
    lens = np.asarray(scheme.lengths)
    return (csum[starts + lens] - csum[starts]) / lens[:, None]
