"""Blockwise (BEL) and adjusted blockwise (ABEL) likelihood-ratio statistics.

ABEL appends the pseudo block mean ``-a * mean(T)`` to the block means, which
puts the origin inside the convex hull for every parameter value, so the
statistic is always finite.  A negative tuning value (possible for the
high-precision rule) is realised by two pseudo points ``-2a * mean(T)`` and
``a * mean(T)`` whose tuning values sum to ``a``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .blocking import BlockScheme, block_means
from .el_core import as_values, log_el_ratio
from .errors import InvalidTuning
from .tuning import BiasDiagnostics, BootstrapSettings, a_bias_corrected

NONE = "none"
FIXED = "fixed"
LOG = "log"
HIGH_PRECISION = "hp"
RULES = (NONE, FIXED, LOG, HIGH_PRECISION)


@dataclass(frozen=True)
class AdjustmentSpec:
    """How the tuning parameter ``a`` is chosen.

    ``rule`` is one of ``"none"`` (plain BEL), ``"fixed"``, ``"log"``
    (``a = log(n)/2``) or ``"hp"`` (high-precision plug-in with bootstrap bias
    correction).  :meth:`resolve` returns a copy with ``resolved_a`` set.
    """

    rule: str = LOG
    a: float | None = None
    bootstrap: BootstrapSettings | None = None
    resolved_a: float | None = None
    diagnostics: BiasDiagnostics | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise InvalidTuning(f"unknown adjustment rule {self.rule!r}")
        if self.rule == FIXED and (self.a is None or not self.a > 0):
            raise InvalidTuning(f"fixed adjustment requires a > 0, got {self.a!r}")

    @classmethod
    def none(cls) -> AdjustmentSpec:
        return cls(NONE)

    @classmethod
    def fixed(cls, a: float) -> AdjustmentSpec:
        return cls(FIXED, a=float(a))

    @classmethod
    def log_rule(cls) -> AdjustmentSpec:
        return cls(LOG)

    @classmethod
    def high_precision(cls, bootstrap: BootstrapSettings | None = None) -> AdjustmentSpec:
        return cls(HIGH_PRECISION, bootstrap=bootstrap or BootstrapSettings())

    @property
    def is_bel(self) -> bool:
        return self.rule == NONE

    def resolve(
        self,
        scheme: BlockScheme,
        g=None,
        *,
        data=None,
        g_producer: Callable[[np.ndarray], np.ndarray] | None = None,
    ) -> AdjustmentSpec:
        """Fix the numeric tuning value.

        ``"hp"`` needs either row-level estimating values ``g`` or ``data``
        together with ``g_producer``; the bootstrap then resamples whichever
        was given.
        """
        if self.resolved_a is not None or self.rule == NONE:
            return self
        if self.rule == FIXED:
            return replace(self, resolved_a=float(self.a))
        if self.rule == LOG:
            return replace(self, resolved_a=math.log(scheme.n) / 2.0)
        settings = self.bootstrap or BootstrapSettings()
        if data is not None and g_producer is not None:
            a, diag = a_bias_corrected(data, scheme, settings, g_producer)
        elif g is not None:
            a, diag = a_bias_corrected(g, scheme, settings)
        else:
            raise InvalidTuning("high-precision tuning needs estimating values or data to resolve")
        return replace(self, resolved_a=a, diagnostics=diag)


def augment(T, a: float) -> np.ndarray:
    """Append the pseudo point ``-a * mean(T)``."""
    if not a > 0:
        raise InvalidTuning(f"tuning parameter must be positive, got {a}")
    T = as_values(T)
    return np.vstack([T, -a * T.mean(axis=0)])


def augment_two_point(T, a: float) -> np.ndarray:
    """Append ``-2a * mean(T)`` and ``a * mean(T)`` for a negative tuning value."""
    if not a < 0:
        raise InvalidTuning(f"two-point adjustment needs a < 0, got {a}")
    T = as_values(T)
    tbar = T.mean(axis=0)
    return np.vstack([T, -(2.0 * a) * tbar, a * tbar])


def bel_from_means(T, scale: float = 1.0) -> float:
    """``-2 * scale * log ELR`` of block means; ``inf`` if the hull misses the origin."""
    return -2.0 * scale * log_el_ratio(T)


def abel_from_means(T, a: float, scale: float = 1.0) -> float:
    """``-2 * scale * log ABELR`` of block means for a numeric tuning value."""
    if a > 0:
        aug = augment(T, a)
    elif a < 0:
        aug = augment_two_point(T, a)
    else:
        raise InvalidTuning("tuning parameter must be nonzero")
    return -2.0 * scale * log_el_ratio(aug)


def bel_statistic(g, scheme: BlockScheme) -> float:
    return bel_from_means(block_means(g, scheme), scheme.scale)


def _tuning_value(adj, scheme: BlockScheme, g) -> float:
    if isinstance(adj, AdjustmentSpec):
        if adj.is_bel:
            raise InvalidTuning("adjustment rule 'none' has no tuning value")
        return float(adj.resolve(scheme, g).resolved_a)
    return float(adj)


def abel_statistic(g, scheme: BlockScheme, adj) -> float:
    """Adjusted statistic ``-2 (n/(QM)) ABELR_Q``.

    ``adj`` is an :class:`AdjustmentSpec` or a plain number.  An unresolved
    high-precision spec is resolved on ``g`` (bootstrap included), so callers
    evaluating many parameter values should resolve once beforehand.
    """
    a = _tuning_value(adj, scheme, g)
    if a >= scheme.n / scheme.block_length:
        warnings.warn(
            f"tuning parameter a={a:.4g} is not small relative to n/M={scheme.n / scheme.block_length:.4g}",
            stacklevel=2,
        )
    return abel_from_means(block_means(g, scheme), a, scheme.scale)


def statistic(g, scheme: BlockScheme, adj=None) -> float:
    """BEL statistic when ``adj`` is None or rule ``"none"``, ABEL otherwise."""
    if adj is None or (isinstance(adj, AdjustmentSpec) and adj.is_bel):
        return bel_statistic(g, scheme)
    return abel_statistic(g, scheme, adj)
