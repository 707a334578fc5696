from __future__ import annotations

import math

import numpy as np
import pytest

from abel.adjusted import AdjustmentSpec
from abel.errors import ConfigError, NonConvergence
from abel.simulation import SimConfig, coverage_experiment, method_from_label
from abel.tuning import BootstrapSettings


def small_config(**kw):
    base = dict(
        n=60,
        d=2,
        rho=0.5,
        methods=[("BEL", AdjustmentSpec.none()), ("ABEL_log", AdjustmentSpec.log_rule())],
        block_lengths=[3, "pro"],
        replications=40,
        seed=7,
    )
    base.update(kw)
    return SimConfig(**base)


def test_method_labels():
    assert method_from_label("BEL").is_bel
    assert method_from_label("ABEL_log").rule == "log"
    assert method_from_label("ABEL_0.8").a == 0.8
    hp = method_from_label("ABEL_hp", BootstrapSettings(60))
    assert hp.rule == "hp" and hp.bootstrap.replications == 60
    with pytest.raises(ConfigError):
        method_from_label("ABEL_x")


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(rho=1.0)
    with pytest.raises(ConfigError):
        small_config(levels=[0.9, 1.2])
    with pytest.raises(ConfigError):
        small_config(replications=0)


def test_zero_statistic_always_covers():
    cfg = small_config(methods=[("zero", lambda g, s: 0.0)])
    rep = coverage_experiment(cfg)
    assert all(c.coverage == 1.0 and c.se == 0.0 for c in rep.cells)


def test_report_invariants():
    rep = coverage_experiment(small_config())
    for c in rep.cells:
        assert 0 <= c.coverage <= 1
        count = c.coverage * c.replications
        assert abs(count - round(count)) < 1e-9
        assert c.se == pytest.approx(math.sqrt(c.coverage * (1 - c.coverage) / c.replications))
    for method in ("BEL", "ABEL_log"):
        for M in ("3", "pro"):
            cov = [rep.cell(method, M, lv).coverage for lv in (0.90, 0.95, 0.99)]
            assert cov[0] <= cov[1] <= cov[2]
            assert rep.cell("ABEL_log", M, 0.95).coverage >= rep.cell("BEL", M, 0.95).coverage
    assert rep.cell("ABEL_log", "3", 0.9).infinite == 0


def test_single_replication():
    rep = coverage_experiment(small_config(replications=1))
    assert all(c.coverage in (0.0, 1.0) for c in rep.cells)


def test_determinism():
    cfg = small_config(methods=[("BEL", AdjustmentSpec.none()),
                                ("ABEL_hp", AdjustmentSpec.high_precision(BootstrapSettings(50)))],
                       replications=6)
    assert coverage_experiment(cfg).to_dict() == coverage_experiment(cfg).to_dict()


def test_failures_are_excluded():
    calls = {"n": 0}

    def flaky(g, scheme):
        calls["n"] += 1
        if calls["n"] % 4 == 0:
            raise NonConvergence("synthetic")
        return 0.0

    rep = coverage_experiment(small_config(methods=[("flaky", flaky)], block_lengths=[3], replications=20))
    c = rep.cell("flaky", 3, 0.9)
    assert c.failures == 5 and c.replications == 15 and c.coverage == 1.0


def test_custom_generator_hook():
    def iid(n, d, rho, rng):
        return rng.standard_normal((n, d))

    rep = coverage_experiment(small_config(generator=iid, replications=5))
    assert len(rep.rows()) == 2 * 2 * 3
    assert set(rep.rows()[0]) >= {"rho", "d", "method", "M", "level", "coverage", "se"}
