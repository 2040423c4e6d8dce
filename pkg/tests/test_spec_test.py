import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panelfactor import BandwidthSpec, DgpSpec, PanelDataset, ZeroVariance, fit, generate
from panelfactor.spec_test import PairKernel, SpecTestResult, compute_vnt, run_test

from oracles import quadruple_loop


def test_two_coincident_points():
    v, s = compute_vnt([1.0, 1.0], [[0.3], [0.3]], [1.0], 2, 1)
    assert v == pytest.approx(0.375, rel=1e-15)
    assert s == pytest.approx(0.5625, rel=1e-15)


def test_zero_residuals_have_zero_variance():
    chi = np.random.default_rng(0).normal(size=(12, 2))
    assert PairKernel(chi, [1.0, 1.0], 4, 3).sums(np.zeros(12)) == (0.0, 0.0)
    with pytest.raises(ZeroVariance):
        compute_vnt(np.zeros(12), chi, [1.0, 1.0], 4, 3)


def test_same_unit_pairs_are_excluded():
    # one unit: every pair is a within-unit pair, so nothing is summed
    v, s = PairKernel(np.zeros((4, 1)), [1.0], 1, 4).sums(np.ones(4))
    assert v == 0.0 and s == 0.0


def test_seeded_instance_matches_loop():
    rng = np.random.default_rng(2024)
    e, chi = rng.normal(size=24), rng.normal(size=(24, 3))
    h = np.array([1.2, 0.9, 1.5])
    v, s = compute_vnt(e, chi, h, 6, 4)
    v0, s0 = quadruple_loop(e, chi, h, 6, 4)
    assert v == pytest.approx(v0, rel=1e-12)
    assert s == pytest.approx(s0, rel=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_blocked_sums_match_loop(seed):
    rng = np.random.default_rng([7, seed])
    n, t, d = rng.integers(2, 9), rng.integers(1, 6), rng.integers(1, 5)
    e, chi = rng.normal(size=n * t), rng.normal(size=(n * t, d))
    h = rng.uniform(0.5, 2.5, size=d)
    v, s = PairKernel(chi, h, n, t).sums(e)
    v0, s0 = quadruple_loop(e, chi, h, n, t)
    assert v == pytest.approx(v0, rel=1e-12, abs=1e-300)
    assert s == pytest.approx(s0, rel=1e-12, abs=1e-300)


def test_many_blocks_match_loop():
    # more rows than one block, so cross-block pairs are exercised
    rng = np.random.default_rng(11)
    n, t = 60, 10
    e, chi = rng.normal(size=n * t), rng.normal(size=(n * t, 2))
    h = [0.4, 0.7]
    v, s = PairKernel(chi, h, n, t).sums(e)
    v0, s0 = quadruple_loop(e, chi, h, n, t)
    assert v == pytest.approx(v0, rel=1e-12)
    assert s == pytest.approx(s0, rel=1e-12)


def test_matrix_columns_match_vector_calls():
    rng = np.random.default_rng(3)
    chi, E = rng.normal(size=(30, 2)), rng.normal(size=(30, 4))
    pk = PairKernel(chi, [1.0, 1.0], 6, 5)
    v, s = pk.sums(E)
    for c in range(4):
        vc, sc = pk.sums(E[:, c])
        assert v[c] == pytest.approx(vc, rel=1e-13)
        assert s[c] == pytest.approx(sc, rel=1e-13)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(2, 7), t=st.integers(1, 4))
def test_unit_relabelling_leaves_statistic_unchanged(seed, n, t):
    rng = np.random.default_rng(seed)
    e, chi = rng.normal(size=n * t), rng.normal(size=(n * t, 2))
    perm = rng.permutation(n)
    rows = (perm[:, None] * t + np.arange(t)).ravel()
    a = PairKernel(chi, [1.0, 0.8], n, t).sums(e)
    b = PairKernel(chi[rows], [1.0, 0.8], n, t).sums(e[rows])
    assert a[0] == pytest.approx(b[0], rel=1e-13, abs=1e-15)
    assert a[1] == pytest.approx(b[1], rel=1e-13, abs=1e-15)
    assert a[1] >= 0


def test_worker_count_does_not_change_sums():
    rng = np.random.default_rng(5)
    chi, e = rng.normal(size=(900, 2)), rng.normal(size=900)
    ref = PairKernel(chi, [0.5, 0.5], 30, 30, workers=1).sums(e)
    for w in (2, 4, 8):
        assert PairKernel(chi, [0.5, 0.5], 30, 30, workers=w).sums(e) == ref


@pytest.mark.parametrize("z, p", [(1.645, 0.05), (0.0, 0.5)])
def test_upper_tail_p_value(z, p):
    from scipy import stats

    assert float(stats.norm.sf(z)) == pytest.approx(p, abs=1e-4)


def test_run_test_standardization():
    ds, _ = generate(DgpSpec(15, 8, seed=4))
    bw = BandwidthSpec.rule_of_thumb(ds)
    res = fit(ds, bw)
    out = run_test(ds, bw, res)
    v, s = compute_vnt(res.residuals, ds.chi, bw.h_test, 15, 8)
    assert out.v_nt == v
    assert out.upsilon0_hat == pytest.approx(math.sqrt(s), rel=1e-15)
    assert out.standardized == pytest.approx(120 * math.sqrt(np.prod(bw.h_test)) * v / math.sqrt(s), rel=1e-14)
    assert 0 <= out.p_asymptotic <= 1
    assert out.n_pairs == 15 * 14 * 64
    assert out.p_bootstrap is None


def test_negative_statistic_gives_large_p():
    res = SpecTestResult(-0.1, 1.0, -2.0, 0.97725, np.array([1.0]), 2)
    assert res.summary_line() == "Test statistic for our model is -2.000 with p-value 0.977"


def test_degenerate_bandwidth_warns():
    rng = np.random.default_rng(1)
    x, w = rng.normal(size=(20, 1)), rng.normal(size=20)
    ds = PanelDataset(4, 5, x[:, 0] + np.sin(w) + rng.normal(size=20), x, w)
    bw = BandwidthSpec.rule_of_thumb(ds, h_test=[1e-3, 1e-3])
    res = fit(ds, bw)
    with pytest.warns(RuntimeWarning, match="degenerate"), pytest.raises(ZeroVariance):
        run_test(ds, bw, res)


def test_alternative_pushes_statistic_up():
    z0 = z1 = 0.0
    for r in range(5):
        for delta in (0.0, 1.0):
            ds, _ = generate(DgpSpec(20, 20, delta=delta, seed=r))
            bw = BandwidthSpec.rule_of_thumb(ds)
            z = run_test(ds, bw, fit(ds, bw)).standardized
            if delta:
                z1 += z
            else:
                z0 += z
    assert z1 > z0 + 10
