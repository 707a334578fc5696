from __future__ import annotations

import itertools

import numpy as np
import pytest

from abel.blocking import block_means, make_blocks, progressive_blocks
from abel.errors import BootstrapDegenerate, MissingMoments, UnsupportedGrouping
from abel.tuning import (
    GROUPINGS,
    BootstrapSettings,
    MomentSet,
    a_bias_corrected,
    a_from_moments,
    a_matrix,
    a_plugin,
    alpha_hat,
    alpha_tilde_hat,
    moment_set,
    nbb_resample,
    parse_grouping,
    t_terms,
    whiten,
)

from oracles import a_plugin_loops


def direct_atilde(T, M, sizes, js):
    Q = T.shape[0]
    k, d = sum(sizes), len(sizes)
    groups, pos = [], 0
    for s in sizes:
        groups.append(js[pos : pos + s])
        pos += s
    total = 0.0
    for idx in itertools.product(range(Q), repeat=d):
        if max(idx) - min(idx) > k - 2:
            continue
        p = 1.0
        for i, gr in zip(idx, groups):
            for j in gr:
                p *= T[i, j]
        total += p
    return M ** (k - 1) * total / Q


def test_whiten_identity_and_scalar():
    T = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    # (M/Q) sum T T' = (2/4) * 2 I = I
    Tw, W = whiten(T, 2)
    assert np.allclose(W, np.eye(2)) and np.allclose(Tw, T)
    Tw, W = whiten([[2.0], [-2.0]], 1)
    assert np.allclose(Tw, [[1.0], [-1.0]]) and np.allclose(W, [[0.5]])


def test_whitening_contract():
    rng = np.random.default_rng(0)
    for M in (1, 3, 7):
        T = rng.standard_normal((20, 3)) @ rng.standard_normal((3, 3))
        Tw, _ = whiten(T, M)
        assert np.allclose((M / 20) * Tw.T @ Tw, np.eye(3), atol=1e-10)
        assert np.allclose(alpha_hat(Tw, M, 2), np.eye(3), atol=1e-10)


def test_alpha_scalar_examples():
    Tw = np.array([[1.0], [-1.0]])
    assert alpha_hat(Tw, 1, 3)[0, 0, 0] == 0.0
    assert alpha_hat(Tw, 1, 4)[0, 0, 0, 0] == 1.0


def test_alpha_tilde_single_block():
    T = np.array([[0.5, -2.0]])
    out = alpha_tilde_hat(T, 3, "j|k|l")
    assert np.allclose(out, 9 * np.einsum("j,k,l->jkl", T[0], T[0], T[0]))


def test_alpha_tilde_against_direct_sum():
    rng = np.random.default_rng(1)
    Tw = np.array([[1.0], [-1.0]])
    assert alpha_tilde_hat(Tw, 1, "jk|l")[0, 0, 0] == pytest.approx(direct_atilde(Tw, 1, (2, 1), (0, 0, 0)))
    for grouping in GROUPINGS:
        sizes = parse_grouping(grouping)
        T = rng.standard_normal((6, 2))
        out = alpha_tilde_hat(T, 2, grouping)
        for js in itertools.product(range(2), repeat=sum(sizes)):
            assert out[js] == pytest.approx(direct_atilde(T, 2, sizes, js), abs=1e-12)


def test_alpha_tilde_constant_rows():
    c, Q, M = 0.7, 5, 2
    T = np.full((Q, 1), c)
    # ordered pairs of blocks within distance 2 among 5 blocks
    pairs = sum(1 for i in range(Q) for j in range(Q) if abs(i - j) <= 2)
    assert pairs == 19
    assert alpha_tilde_hat(T, M, "jk|lm")[0, 0, 0, 0] == pytest.approx(M**3 * pairs * c**4 / Q)


def test_grouping_parser():
    assert parse_grouping("jk|l") == (2, 1)
    assert parse_grouping("j,k,l") == (1, 1, 1)
    for bad in ("jk", "jklmn|o", "j|k|l|m", "|jk"):
        with pytest.raises(UnsupportedGrouping):
            parse_grouping(bad)


def test_tensor_symmetry():
    rng = np.random.default_rng(2)
    T = rng.standard_normal((9, 3))
    a4 = alpha_hat(T, 2, 4)
    for perm in itertools.permutations(range(4)):
        assert np.allclose(a4, a4.transpose(perm))
    b = alpha_tilde_hat(T, 2, "jk|l")
    assert np.allclose(b, b.transpose(1, 0, 2))
    b = alpha_tilde_hat(T, 2, "jkl|m")
    for perm in itertools.permutations(range(3)):
        assert np.allclose(b, b.transpose(perm + (3,)))
    b = alpha_tilde_hat(T, 2, "jk|lm")
    assert np.allclose(b, b.transpose(1, 0, 2, 3)) and np.allclose(b, b.transpose(0, 1, 3, 2))
    b = alpha_tilde_hat(T, 2, "j|k|l")
    for perm in itertools.permutations(range(3)):
        assert np.allclose(b, b.transpose(perm))


def _zero_moments(q, Q=10, M=2):
    return MomentSet(q, M, Q, np.zeros((q,) * 3), np.zeros((q,) * 4),
                     {g: np.zeros((q,) * sum(parse_grouping(g))) for g in GROUPINGS})


def test_t_terms_zero_and_hand_set():
    m = _zero_moments(2)
    m.alpha4 = np.random.default_rng(3).standard_normal((2,) * 4)
    t = t_terms(m)
    for name in ("t1a", "t1b", "t1c", "t2a", "t2b"):
        assert np.all(t[name] == 0)
    m = _zero_moments(1)
    m.alpha3[0, 0, 0] = 1.0
    m.atilde["j|k|l"][0, 0, 0] = 2.0
    assert t_terms(m)["t1a"][0, 0] == 2.0
    assert a_from_moments(_zero_moments(3), 100) == 0.0


def test_missing_moments():
    m = _zero_moments(2)
    del m.atilde["jk|lm"]
    with pytest.raises(MissingMoments):
        t_terms(m)


def loop_t_terms(m):
    q = m.q
    A3, A4 = m.alpha3, m.alpha4
    B3, B21, B22, B31 = (m.atilde[g] for g in GROUPINGS)
    R = range(q)
    out = {k: np.zeros((q, q)) for k in ("t1a", "t1b", "t1c", "t2a", "t2b", "t3a", "t3b", "t3c")}
    for r in R:
        for i in R:
            for k in R:
                out["t3a"][r, i] += -0.5 * B22[r, k, k, i]
                out["t3b"][r, i] += 3 / 8 * B22[r, k, i, k] + B31[i, r, k, k] - 3 / 4 * A4[r, i, k, k]
                out["t3c"][r, i] += 1 / 4 * B22[r, k, i, k]
                for l in R:
                    out["t1a"][r, i] += A3[r, k, l] * B3[i, k, l]
                    out["t1b"][r, i] += (3 / 8 * B21[r, k, l] * B21[l, k, i] - 5 / 6 * A3[r, k, l] * B21[i, k, l]
                                         - 5 / 6 * A3[r, k, l] * B21[k, l, i] + 8 / 9 * A3[r, k, l] * A3[i, k, l])
                    out["t1c"][r, i] += (1 / 4 * A3[r, k, l] * B21[i, l, k] - 2 / 3 * A3[r, k, l] * B21[i, k, l]
                                         + 2 / 9 * A3[r, k, l] * A3[i, k, l])
                    out["t2a"][r, i] += (3 / 8 * B21[r, l, l] * B21[i, k, k] - 5 / 12 * A3[i, r, k] * B21[k, l, l]
                                         + 4 / 9 * A3[r, i, l] * A3[l, k, k] - 5 / 12 * A3[k, l, l] * B21[i, k, r])
                    out["t2b"][r, i] += (1 / 4 * B21[r, k, k] * B21[i, l, l] - 1 / 3 * A3[r, k, k] * B21[i, l, l]
                                         + 1 / 9 * A3[r, k, k] * A3[i, l, l])
    return out


def test_t_terms_match_loops():
    rng = np.random.default_rng(4)
    m = moment_set(rng.standard_normal((7, 2)) ** 2 - 0.5, 2)
    t, ref = t_terms(m), loop_t_terms(m)
    for name, val in ref.items():
        assert np.allclose(t[name], val, atol=1e-12)
        if name + "'" in t:
            assert np.allclose(t[name + "'"], val.T, atol=1e-12)


def test_scale_with_block_count():
    m = moment_set(np.random.default_rng(5).standard_normal((8, 2)), 1)
    a1 = a_from_moments(m, 200)
    m.Q *= 2
    assert a_from_moments(m, 200) == pytest.approx(2 * a1)


def test_plugin_matches_naive_loops():
    rng = np.random.default_rng(6)
    for _ in range(40):
        q = int(rng.integers(1, 3))
        M = int(rng.integers(1, 4))
        Q = int(rng.integers(q + 2, 7))
        g = rng.standard_normal((Q * M, q)) ** 2 - 0.8
        assert a_plugin(g, make_blocks(Q * M, M)) == pytest.approx(a_plugin_loops(g, M), rel=1e-10, abs=1e-10)


def test_scalar_hand_computed_pipeline():
    g = np.array([[1.0], [3.0], [-2.0], [0.5], [-1.5], [2.0]])
    assert a_plugin(g, make_blocks(6, 1)) == pytest.approx(a_plugin_loops(g, 1), rel=1e-12)


def test_affine_invariance_of_plugin():
    rng = np.random.default_rng(7)
    g = rng.standard_normal((120, 2)) ** 2 - 1.0
    A = np.array([[2.0, 0.5], [-1.0, 3.0]])
    s = make_blocks(120, 4)
    assert a_plugin(g @ A.T, s) == pytest.approx(a_plugin(g, s), rel=1e-10)


def test_gaussian_independent_blocks():
    # whitened Gaussian block means with independent blocks: a = (q + 2) / (4q)
    for q, M in ((1, 1), (2, 1), (2, 5)):
        vals = [a_plugin(np.random.default_rng(s).standard_normal((20000, q)), make_blocks(20000, M))
                for s in range(6)]
        assert np.mean(vals) == pytest.approx((q + 2) / (4 * q), abs=0.06)


def test_progressive_uses_mean_length():
    g = np.random.default_rng(8).standard_normal((100, 2))
    s = progressive_blocks(100)
    T = block_means(g, s)
    Tw, _ = whiten(T, s.mean_length)
    assert a_plugin(g, s) == pytest.approx(a_from_moments(moment_set(Tw, s.mean_length), 100))


def test_nbb_structure():
    x = np.arange(6.0)[:, None]
    out = nbb_resample(x, 3, np.random.default_rng(0))
    blocks = [tuple(out[:3, 0]), tuple(out[3:, 0])]
    assert all(b in {(0.0, 1.0, 2.0), (3.0, 4.0, 5.0)} for b in blocks)
    assert np.array_equal(nbb_resample(x, 6, np.random.default_rng(1)), x)
    a = nbb_resample(x, 2, np.random.default_rng(9))
    b = nbb_resample(x, 2, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_bias_gate():
    rng = np.random.default_rng(10)
    seen = set()
    for seed in range(12):
        g = rng.standard_normal((80, 1)) ** 2 - 1.0
        a, d = a_bias_corrected(g, make_blocks(80, 4), BootstrapSettings(50, seed=seed))
        if d.corrected:
            assert abs(d.bias) >= d.se
            assert a == d.plugin - d.bias
        else:
            assert abs(d.bias) < d.se
            assert a == d.plugin
            assert a == a_plugin(g, make_blocks(80, 4))
        seen.add(d.corrected)
    assert seen == {True, False}


def test_bootstrap_reproducible():
    g = np.random.default_rng(11).standard_normal((60, 2))
    r1 = a_bias_corrected(g, make_blocks(60, 3), BootstrapSettings(50, seed=4))
    r2 = a_bias_corrected(g, make_blocks(60, 3), BootstrapSettings(50, seed=4))
    assert r1 == r2


def test_bootstrap_settings_validation():
    with pytest.raises(ValueError):
        BootstrapSettings(10)


def test_degenerate_bootstrap():
    # most resamples of a nearly constant series are singular
    g = np.zeros((40, 1))
    g[:4] = 1.0
    with pytest.raises(BootstrapDegenerate):
        a_bias_corrected(g, make_blocks(40, 4), BootstrapSettings(50, seed=0))
