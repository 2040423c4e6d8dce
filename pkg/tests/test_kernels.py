import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from panelfactor import (
    BandwidthSpec,
    DataError,
    DegenerateScale,
    DimensionMismatch,
    PanelDataset,
    default_test_bandwidth,
    epanechnikov,
    product_kernel,
    silverman_bandwidth,
)
from panelfactor.kernels import MU2, NU0, kernel_integral


@pytest.mark.parametrize("u, expected", [(0.0, 0.75), (1.0, 0.0), (-1.0, 0.0), (0.5, 0.5625), (2.0, 0.0)])
def test_epanechnikov_values(u, expected):
    assert epanechnikov(u) == pytest.approx(expected, abs=1e-15)


def test_product_kernel_examples():
    assert product_kernel([0, 0], [1, 1]) == pytest.approx(0.5625)
    assert product_kernel([2, 0], [1, 1]) == 0.0
    assert product_kernel([0.3, -0.3], [1, 1]) == pytest.approx(epanechnikov(0.3) ** 2, rel=1e-15)
    with pytest.raises(DimensionMismatch):
        product_kernel([0, 0], [1])


def test_silverman_examples():
    assert silverman_bandwidth(1.0, 100_000) == pytest.approx(0.2345, rel=1e-12)
    assert silverman_bandwidth(2.0, 32) == pytest.approx(2.345, rel=1e-12)
    with pytest.raises(DegenerateScale):
        silverman_bandwidth(0.0, 100)


def test_default_test_bandwidth_examples():
    # 1024^(-1/3) = 2^(-10/3)
    assert default_test_bandwidth(1.0, 1024, 2) == pytest.approx(2.345 * 2 ** (-10 / 3), rel=1e-12)
    assert default_test_bandwidth(1.0, 1024, 2) == pytest.approx(0.2326, abs=1e-4)
    assert default_test_bandwidth(1.0, 100_000, 1) == pytest.approx(0.02345, rel=1e-12)
    with pytest.raises(DataError):
        default_test_bandwidth(1.0, 100, 0)


def test_kernel_is_a_density_and_constants_match_quadrature():
    assert kernel_integral() == pytest.approx(1.0, abs=1e-6)
    assert kernel_integral(power=2) == pytest.approx(NU0, abs=1e-8)
    assert kernel_integral(moment=2) == pytest.approx(MU2, abs=1e-8)
    assert kernel_integral(moment=1) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(-5, 5))
def test_kernel_symmetric_nonnegative(u):
    assert epanechnikov(u) == epanechnikov(-u) >= 0


@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.1, 3)), min_size=1, max_size=5), st.randoms())
def test_product_kernel_permutation(pairs, rnd):
    v, h = zip(*pairs)
    perm = list(range(len(v)))
    rnd.shuffle(perm)
    assert product_kernel([v[k] for k in perm], [h[k] for k in perm]) == pytest.approx(product_kernel(v, h),
                                                                                      rel=1e-12)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.integers(2, 10 ** 6))
def test_silverman_homogeneous(sd, c, n):
    assert silverman_bandwidth(c * sd, n) == pytest.approx(c * silverman_bandwidth(sd, n), rel=1e-12)


def test_bandwidth_spec_rule_of_thumb_and_overrides(small_panel):
    bw = BandwidthSpec.rule_of_thumb(small_panel)
    n = small_panel.n_obs
    sd_w = np.std(small_panel.w[:, 0], ddof=1)
    assert bw.h_est[0] == pytest.approx(2.345 * sd_w * n ** -0.2)
    assert bw.h_test.size == small_panel.d_x + small_panel.d_w
    assert bw.source.value == "RuleOfThumb"
    user = BandwidthSpec.rule_of_thumb(small_panel, h_est=0.7, h_test=[1.0])
    np.testing.assert_array_equal(user.h_test, [1.0, 1.0, 1.0])
    assert user.source.value == "UserSupplied"
    with pytest.raises(DataError):
        BandwidthSpec([0.0], [1.0])
    with pytest.raises(DimensionMismatch):
        BandwidthSpec.rule_of_thumb(small_panel, h_test=[1.0, 2.0])


def test_constant_covariate_has_no_bandwidth():
    ds = PanelDataset(2, 2, [1.0, 2, 3, 4], [1.0, 0, 1, 0], [5.0, 5, 5, 5])
    with pytest.raises(DegenerateScale):
        BandwidthSpec.rule_of_thumb(ds)
    assert math.isfinite(BandwidthSpec.rule_of_thumb(ds, h_est=1.0, h_test=[1.0, 1.0]).h_est[0])
