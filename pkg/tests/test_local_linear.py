import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panelfactor import InsufficientLocalData, LocalLinearSmoother, PanelDataset, fit_at_point, residualize

from oracles import dense_smoother


def test_constant_target_is_reproduced(rng):
    w = rng.normal(size=(50, 1))
    fit = fit_at_point([0.3], w, np.full(50, 3.0), [0.8])
    assert fit.a == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(fit.b, 0.0, atol=1e-12)
    assert fit.effective_n > 0


def test_linear_target_is_reproduced(rng):
    w = rng.normal(size=(50, 1))
    fit = fit_at_point([0.3], w, 2 + 5 * w[:, 0], [0.8])
    assert fit.a == pytest.approx(2 + 5 * 0.3, abs=1e-12)
    assert fit.b[0] == pytest.approx(5.0, abs=1e-11)


def test_point_fit_matches_explicit_formula():
    rng = np.random.default_rng(7)
    w = rng.normal(size=(6, 1))
    target = rng.normal(size=6)
    h = np.array([2.5])
    S = dense_smoother(w, h)
    for r in range(6):
        assert fit_at_point(w[r], w, target, h).a == pytest.approx(S[r] @ target, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("d_w", [1, 2])
def test_residualize_matches_dense_smoother(d_w):
    rng = np.random.default_rng(40 + d_w)
    w = rng.normal(size=(6, d_w))
    ds = PanelDataset(3, 2, rng.normal(size=6), rng.normal(size=(6, 2)), w)
    h = np.full(d_w, 3.0)
    S = dense_smoother(w, h)
    res = residualize(ds, h)
    np.testing.assert_allclose(res.y_tilde, ds.y - S @ ds.y, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(res.x_tilde, ds.x - S @ ds.x, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(LocalLinearSmoother(w, h).matrix(), S, rtol=1e-10, atol=1e-12)


def test_residualize_annihilates_constants_and_linear_g(rng):
    w = rng.normal(size=(60, 1))
    ds = PanelDataset(12, 5, 1.5 - 2 * w[:, 0], np.column_stack([np.full(60, 4.0)]), w)
    res = residualize(ds, [0.6])
    np.testing.assert_allclose(res.y_tilde, 0.0, atol=1e-10)
    np.testing.assert_allclose(res.x_tilde, 0.0, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d_w=st.integers(1, 3), h=st.floats(0.3, 3.0))
def test_affine_reproduction_property(seed, d_w, h):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(80, d_w))
    alpha, gamma = rng.normal(), rng.normal(size=d_w)
    target = alpha + w @ gamma
    fitted = LocalLinearSmoother(w, np.full(d_w, h)).apply(target)
    np.testing.assert_allclose(fitted, target, atol=1e-9 * max(1.0, np.abs(target).max()))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), c=st.floats(-100, 100, allow_subnormal=False))
def test_scaling_equivariance(seed, c):
    # subnormal factors lose relative precision in any arithmetic, so are excluded
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(40, 1))
    t = rng.normal(size=40)
    sm = LocalLinearSmoother(w, [0.7])
    np.testing.assert_allclose(sm.apply(c * t), c * sm.apply(t), rtol=1e-12, atol=1e-12 * abs(c))


def test_isolated_point_falls_back_without_error():
    w = np.array([[0.0], [0.1], [0.2], [0.3], [5.0]])
    target = np.array([1.0, 2.0, 3.0, 4.0, 9.0])
    fitted = LocalLinearSmoother(w, [0.5]).apply(target)
    assert fitted[-1] == pytest.approx(9.0, abs=1e-12)


def test_empty_window_raises():
    w = np.array([[0.0], [0.1], [0.2]])
    with pytest.raises(InsufficientLocalData) as err:
        LocalLinearSmoother(w, [0.05]).at([[3.0]], np.ones(3))
    assert err.value.row == 0


def test_worker_count_does_not_change_output(rng):
    w = rng.normal(size=(3000, 2))
    t = rng.normal(size=(3000, 3))
    ref = LocalLinearSmoother(w, [0.4, 0.5], workers=1).apply(t)
    for k in (2, 4, 8):
        assert np.array_equal(LocalLinearSmoother(w, [0.4, 0.5], workers=k).apply(t), ref)
