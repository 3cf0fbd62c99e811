import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sklearn.exceptions import NotFittedError

from hardylab.exceptions import ConfigError, QuadratureError
from hardylab.kernel import (KernelSpec, StableKernel, check_two_sided_bound,
                             default_table, export_table, kernel_at,
                             kernel_at_radius, kernel_moment, shifted_moment,
                             synthesize_kernel)


def gaussian_1d(r, t=1.0):
    return (4.0 * math.pi * t) ** -0.5 * np.exp(-np.asarray(r) ** 2 / (4.0 * t))


def gaussian_2d(r, t=1.0):
    return (4.0 * math.pi * t) ** -1.0 * np.exp(-np.asarray(r) ** 2 / (4.0 * t))


def poisson(r, dim, t=1.0):
    c = math.gamma((dim + 1) / 2.0) / math.pi ** ((dim + 1) / 2.0)
    return c * t / (t**2 + np.asarray(r) ** 2) ** ((dim + 1) / 2.0)


@pytest.mark.parametrize("dim,theta", [(1, 2.0), (2, 2.0), (1, 1.0), (2, 1.0)])
def test_closed_form_match(dim, theta):
    # accuracy is promised at the table's own nodes over the inner half of
    # the tabulated range; beyond that the fitted power tail takes over
    table = default_table(dim, theta)
    inner = table.radii[table.radii <= table.radii[-1] / 2.0]
    r = inner[np.linspace(0, inner.size - 1, 100).astype(int)]
    got = kernel_at_radius(table, r, 1.0)
    if theta == 2.0:
        want = gaussian_1d(r) if dim == 1 else gaussian_2d(r)
    else:
        want = poisson(r, dim)
    np.testing.assert_allclose(got, want, rtol=1e-6)


@pytest.mark.parametrize("dim", [1, 2])
@pytest.mark.parametrize("theta", [0.5, 1.0, 1.5, 2.0])
def test_unit_mass(dim, theta):
    table = default_table(dim, theta)
    assert abs(table.total_mass - 1.0) <= 1e-3


def test_scaling_is_bit_exact():
    table = default_table(1, 1.5)
    r = np.linspace(0.0, 30.0, 57)
    for t in (0.07, 0.5, 3.0):
        direct = kernel_at_radius(table, r, t)
        rescaled = t ** (-1 / 1.5) * kernel_at_radius(table, r * t ** (-1 / 1.5), 1.0)
        assert np.array_equal(direct, rescaled)


def test_kernel_at_point_matches_radius():
    table = default_table(2, 2.0)
    v = kernel_at(table, (0.3, -0.4), 0.7)
    assert math.isclose(v, float(kernel_at_radius(table, 0.5, 0.7)), rel_tol=1e-15)
    assert math.isclose(v, gaussian_2d(0.5, 0.7), rel_tol=1e-6)


def test_monotone_decreasing_profile_tables():
    for dim, theta in [(1, 0.5), (1, 1.5), (2, 1.0)]:
        table = default_table(dim, theta)
        assert np.all(np.diff(table.values) < 0)
        assert np.all(table.values > 0)


@given(pair=st.tuples(st.floats(0.0, 80.0), st.floats(0.0, 80.0)))
@settings(max_examples=60, deadline=None)
def test_profile_monotone_everywhere(pair):
    # includes radii beyond the tabulated range (tail model region)
    table = default_table(1, 1.0)
    lo, hi = sorted(pair)
    assert table.profile(lo) >= table.profile(hi)


def test_two_sided_band_poisson():
    # theta=1 the band is exactly (1/pi, 2/pi): g(r)(1+r)^2 spans it on [0, inf)
    m_low, m_high = check_two_sided_bound(default_table(1, 1.0))
    assert abs(m_low - 1.0 / math.pi) <= 1e-4
    assert abs(m_high - 2.0 / math.pi) <= 1e-4


def test_two_sided_band_finite_ratio():
    for theta in (0.5, 1.5):
        m_low, m_high = check_two_sided_bound(default_table(1, theta), r_cap=15.0)
        assert 0.0 < m_low <= m_high
        assert m_high / m_low < 50.0


def test_two_sided_band_rejects_gaussian():
    with pytest.raises(ConfigError):
        check_two_sided_bound(default_table(1, 2.0))


def test_moment_against_quadrature():
    table = default_table(1, 2.0)
    assert math.isclose(kernel_moment(table, 1.0, 1.0),
                        2.0 / math.sqrt(math.pi), rel_tol=1e-5)
    # fitted power tail vs the true kernel beyond the table costs ~4e-4 here
    assert math.isclose(kernel_moment(default_table(1, 1.0), 0.5, 1.0),
                        math.sqrt(2.0), rel_tol=5e-4)
    # scaling law M_a(t) = t^{a/theta} M_a(1)
    m1 = kernel_moment(table, 0.25, 1.0)
    for t in (0.04, 0.3, 2.0):
        assert math.isclose(kernel_moment(table, 0.25, t),
                            t ** (0.25 / 2.0) * m1, rel_tol=1e-12)


def test_moment_divergence_guard():
    with pytest.raises(ConfigError):
        kernel_moment(default_table(1, 1.0), 1.0, 1.0)
    with pytest.raises(ConfigError):
        kernel_moment(default_table(1, 0.5), 0.5, 1.0)


def test_shifted_moment_matches_center_and_quadrature():
    table = default_table(1, 2.0)
    center = shifted_moment(table, 0.25, (0.0,), 1.0)
    assert math.isclose(center, kernel_moment(table, 0.25, 1.0), rel_tol=1e-4)
    want = quad(lambda y: abs(y + 1.3) ** 0.25 * gaussian_1d(y), -40, 40,
                points=[-1.3])[0]
    got = shifted_moment(table, 0.25, (1.3,), 1.0)
    assert math.isclose(got, want, rel_tol=1e-6)


def test_shifted_moment_2d_far_field():
    # for |z| >> t^(1/theta) the moment approaches |z|^a
    table = default_table(2, 2.0)
    got = shifted_moment(table, 0.5, (30.0, 0.0), 0.01)
    assert math.isclose(got, 30.0**0.5, rel_tol=1e-3)


def test_synthesize_small_table_and_csv_round_trip(tmp_path):
    table = synthesize_kernel(KernelSpec(1, 1.0), r_max=60.0, n_points=400)
    path = tmp_path / "table.csv"
    export_table(table, path)
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_allclose(raw[:, 0], table.radii, rtol=1e-11)
    np.testing.assert_allclose(raw[:, 1], table.values, rtol=1e-11)


def test_synthesis_rejects_bad_resolution():
    with pytest.raises(QuadratureError):
        synthesize_kernel(KernelSpec(1, 0.5), r_max=60.0, n_points=200,
                          panel_tol=1e-13, max_levels=0)


def test_default_table_is_cached():
    assert default_table(1, 2.0) is default_table(1, 2.0)


def test_table_immutable():
    table = default_table(1, 2.0)
    with pytest.raises(ValueError):
        table.values[0] = 7.0


def test_spec_validation():
    with pytest.raises(ConfigError):
        KernelSpec(3, 1.0)
    with pytest.raises(ConfigError):
        KernelSpec(1, 2.5)
    with pytest.raises(ConfigError):
        KernelSpec(1, 0.0)


def test_estimator_api():
    est = StableKernel(dim=1, theta=1.0, r_max=60.0, n_points=400)
    params = est.get_params()
    assert params["dim"] == 1 and params["theta"] == 1.0
    with pytest.raises(NotFittedError):
        est.density((0.0,), 1.0)
    est.fit()
    assert est.mass_defect() <= 1e-3
    m_low, m_high = est.two_sided_band()
    assert 0.0 < m_low <= m_high
    # coarse 400-node table: interpolation off-node costs ~1e-5
    assert math.isclose(est.density((0.5,), 1.0), poisson(0.5, 1), rel_tol=1e-4)
    clone = StableKernel(**params)
    assert clone.get_params() == params
