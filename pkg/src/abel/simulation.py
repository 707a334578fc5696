"""Monte Carlo coverage study for BEL and ABEL confidence regions of a mean.

Each replication simulates a series from the data-generating process
(stationary AR(1) by default), forms block means of ``x - mu`` at the true
mean for every block specification, evaluates every method's statistic and
records whether it falls strictly below the chi-square quantile of each
nominal level.  Infinite BEL statistics count as non-coverage.  Numerical
failures other than a convex-hull failure are excluded from the denominator
and counted separately.
"""

from __future__ import annotations

import logging
import math
import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np

from .adjusted import AdjustmentSpec, statistic
from .blocking import block_means, scheme_from_spec
from .errors import ConfigError, NumericalError
from .stats import ar1_simulate, chi2_quantile, make_rng
from .tuning import BootstrapSettings

log = logging.getLogger(__name__)

MethodRule = Union[AdjustmentSpec, Callable[[np.ndarray, object], float]]

STANDARD_METHODS = ("BEL", "ABEL_log", "ABEL_0.5", "ABEL_0.8", "ABEL_1", "ABEL_hp")


def method_from_label(label: str, bootstrap: BootstrapSettings | None = None) -> AdjustmentSpec:
    """``BEL``, ``ABEL_log``, ``ABEL_hp`` or ``ABEL_<number>``."""
    if label == "BEL":
        return AdjustmentSpec.none()
    if label == "ABEL_log":
        return AdjustmentSpec.log_rule()
    if label == "ABEL_hp":
        return AdjustmentSpec.high_precision(bootstrap or BootstrapSettings())
    m = re.fullmatch(r"ABEL_([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)", label)
    if m:
        return AdjustmentSpec.fixed(float(m.group(1)))
    raise ConfigError(f"unknown method label {label!r}", key="methods")


@dataclass
class SimConfig:
    n: int
    d: int
    rho: float
    methods: list[tuple[str, MethodRule]]
    block_lengths: list[int | str]
    levels: list[float] = field(default_factory=lambda: [0.90, 0.95, 0.99])
    replications: int = 1000
    seed: int = 0
    gap: int | None = None
    workers: int = 1
    generator: Callable[[int, int, float, np.random.Generator], np.ndarray] = ar1_simulate

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ConfigError(f"rho must satisfy |rho| < 1, got {self.rho}", key="rho")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1", key="replications")
        if not self.levels or any(not 0 < lv < 1 for lv in self.levels):
            raise ConfigError(f"levels must lie in (0, 1), got {self.levels}", key="levels")
        if self.n < 3 or self.d < 1:
            raise ConfigError(f"need n >= 3 and d >= 1, got n={self.n}, d={self.d}", key="n")
        if not self.methods:
            raise ConfigError("at least one method is required", key="methods")
        if not self.block_lengths:
            raise ConfigError("at least one block length is required", key="block_lengths")

    def describe(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "rho": self.rho,
            "methods": [_describe_method(lbl, m) for lbl, m in self.methods],
            "block_lengths": [str(b) for b in self.block_lengths],
            "levels": list(self.levels),
            "replications": self.replications,
            "seed": self.seed,
            "gap": self.gap,
        }


def _describe_method(label, rule) -> dict:
    if isinstance(rule, AdjustmentSpec):
        out = {"label": label, "rule": rule.rule}
        if rule.a is not None:
            out["a"] = rule.a
        if rule.bootstrap is not None:
            out["bootstrap_replications"] = rule.bootstrap.replications
            out["bootstrap_block_length"] = rule.bootstrap.block_length
        return out
    return {"label": label, "rule": "custom"}


@dataclass(frozen=True)
class CoverageCell:
    method: str
    M: str
    level: float
    coverage: float
    se: float
    replications: int
    failures: int
    infinite: int


@dataclass
class CoverageReport:
    config: dict
    cells: list[CoverageCell]

    def cell(self, method: str, M, level: float) -> CoverageCell:
        for c in self.cells:
            if c.method == method and c.M == str(M) and math.isclose(c.level, level):
                return c
        raise KeyError((method, M, level))

    def rows(self) -> list[dict]:
        return [
            {
                "rho": self.config["rho"],
                "d": self.config["d"],
                "method": c.method,
                "M": c.M,
                "level": c.level,
                "coverage": c.coverage,
                "se": c.se,
                "n": self.config["n"],
                "replications": c.replications,
                "failures": c.failures,
                "hull_failures": c.infinite,
            }
            for c in self.cells
        ]

    def to_dict(self) -> dict:
        return {"config": self.config, "rows": self.rows()}


def _hp_seed(seed: int, rep: int, j: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(rep), int(j), 7]).generate_state(1)[0])


def _one_replication(config: SimConfig, rep: int, quantiles: np.ndarray):
    """Outcome codes per (block spec, method): covered-level flags, or None on failure."""
    rng = make_rng(config.seed, rep)
    x = config.generator(config.n, config.d, config.rho, rng)
    g = x  # true mean is zero
    out = []
    for j, spec in enumerate(config.block_lengths):
        scheme = scheme_from_spec(config.n, spec, config.gap)
        per_method = []
        for label, rule in config.methods:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    if isinstance(rule, AdjustmentSpec):
                        if rule.rule == "hp" and rule.resolved_a is None:
                            settings = replace(rule.bootstrap or BootstrapSettings(), seed=_hp_seed(config.seed, rep, j))
                            rule = replace(rule, bootstrap=settings)
                        s = statistic(g, scheme, rule)
                    else:
                        s = float(rule(g, scheme))
            except (NumericalError, np.linalg.LinAlgError) as exc:
                log.info("replication %d, M=%s, %s failed: %s", rep, spec, label, exc)
                per_method.append(None)
                continue
            per_method.append((math.isinf(s), s < quantiles))
        out.append(per_method)
    return out


def _run_chunk(args):
    config, reps, quantiles = args
    return [_one_replication(config, r, quantiles) for r in reps]


def coverage_experiment(config: SimConfig) -> CoverageReport:
    """Empirical coverage for every (method, block specification, level)."""
    levels = np.asarray(config.levels, dtype=float)
    quantiles = np.array([chi2_quantile(config.d, lv) for lv in levels])
    reps = list(range(config.replications))
    if config.workers > 1:
        chunks = [reps[i :: config.workers] for i in range(config.workers)]
        with ProcessPoolExecutor(config.workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c, quantiles) for c in chunks]))
        by_rep = {}
        for c, part in zip(chunks, parts):
            by_rep.update(zip(c, part))
        outcomes = [by_rep[r] for r in reps]
    else:
        outcomes = _run_chunk((config, reps, quantiles))

    nb, nm, nl = len(config.block_lengths), len(config.methods), len(levels)
    covered = np.zeros((nb, nm, nl), dtype=int)
    valid = np.zeros((nb, nm), dtype=int)
    infinite = np.zeros((nb, nm), dtype=int)
    for rep_out in outcomes:
        for j in range(nb):
            for k in range(nm):
                o = rep_out[j][k]
                if o is None:
                    continue
                valid[j, k] += 1
                infinite[j, k] += int(o[0])
                covered[j, k] += o[1].astype(int)

    cells = []
    for k, (label, _) in enumerate(config.methods):
        for j, spec in enumerate(config.block_lengths):
            for li, lv in enumerate(levels):
                v = int(valid[j, k])
                c = covered[j, k, li] / v if v else math.nan
                se = math.sqrt(c * (1.0 - c) / v) if v else math.nan
                cells.append(
                    CoverageCell(label, str(spec), float(lv), float(c), float(se), v,
                                 config.replications - v, int(infinite[j, k]))
                )
    return CoverageReport(config.describe(), cells)
