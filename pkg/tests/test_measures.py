import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import dblquad, quad

from hardylab.exceptions import ConfigError
from hardylab.fields import GridSpec
from hardylab.measures import (MeasureData, RadialLaw, ball_average_power,
                               ball_measure, disk_rect_overlap,
                               render_measure, translate)


def test_law_integrability_guards():
    with pytest.raises(ConfigError):
        RadialLaw(1, 1.0, decay=1.2, truncation=1.0)
    # borderline decay needs a log correction stronger than the first power
    with pytest.raises(ConfigError):
        RadialLaw(1, 1.0, decay=1.0, log_exponent=1.0, truncation=1.0)
    RadialLaw(1, 1.0, decay=1.0, log_exponent=2.0, truncation=1.0)
    with pytest.raises(ConfigError):
        RadialLaw(1, 1.0, decay=0.5, truncation=-1.0)
    # untruncated bounded law has infinite mass
    with pytest.raises(ConfigError):
        RadialLaw(1, 1.0, decay=0.0)


def test_law_density_values():
    law = RadialLaw(1, 2.0, decay=0.5, truncation=1.0)
    assert law.density_at_radius(2.0) == 0.0
    assert law.density_at_radius(0.0) == np.inf
    assert math.isclose(float(law.density_at_radius(0.25)), 2.0 * 0.25**-0.5)
    flat = RadialLaw(1, 3.0, decay=0.0, truncation=1.0)
    assert flat.density_at_radius(0.0) == 3.0


def test_radial_primitive_closed_form():
    law = RadialLaw(1, 1.5, decay=0.75, truncation=2.0)
    # q=0: exact power-law antiderivative
    assert math.isclose(law.radial_primitive(0.5), 1.5 * 0.5**0.25 / 0.25,
                        rel_tol=1e-14)
    assert law.radial_primitive(0.3, 0.4) == 0.0
    # clamps at the truncation radius
    assert math.isclose(law.radial_primitive(5.0), law.radial_primitive(2.0),
                        rel_tol=1e-14)


def test_radial_primitive_log_borderline():
    law = RadialLaw(1, 1.0, decay=1.0, log_exponent=2.0, truncation=1.0)
    # mpmath oracle for int_0^0.5 s^-1 log(e+1/s)^-2 ds; the log tail decays
    # like u^-2 in u = -log s, so naive truncated quadrature undershoots
    assert math.isclose(law.radial_primitive(0.5), 0.8453710657672358,
                        rel_tol=1e-12)


def test_powered_parameters():
    law = RadialLaw(1, 2.0, decay=0.25, log_exponent=1.0, truncation=3.0)
    cubed = law.powered(3.0)
    assert cubed.amplitude == 8.0
    assert cubed.decay == 0.75
    assert cubed.log_exponent == 3.0
    assert cubed.truncation == 3.0
    s = 0.37
    assert math.isclose(float(cubed.density_at_radius(s)),
                        float(law.density_at_radius(s)) ** 3, rel_tol=1e-13)


def test_scaled_is_exact():
    law = RadialLaw(1, 0.3, decay=0.5, truncation=2.0)
    mu = MeasureData(1, atoms=(((1.0,), 0.7),), law=law)
    lam = 1.7
    nu = mu.scaled(lam)
    assert nu.atoms[0][1] == 0.7 * lam
    assert nu.law.amplitude == 0.3 * lam
    assert math.isclose(nu.total_mass(), lam * mu.total_mass(), rel_tol=1e-14)


def test_ball_measure_borderline_power_oracle():
    # c|x|^{-0.75} in one dimension: mu(B(0, s)) = 8 c s^{1/4}
    mu = MeasureData(1, law=RadialLaw(1, 1.0, decay=0.75, truncation=5.0))
    got = ball_measure(mu, (0.0,), 0.5)
    assert math.isclose(got, 8.0 * 0.5**0.25, rel_tol=1e-12)


def test_ball_measure_atoms_open_ball():
    mu = MeasureData(1, atoms=(((0.0,), 2.0), ((1.0,), 3.0)))
    assert ball_measure(mu, (0.0,), 0.5) == 2.0
    # atom at distance exactly sigma is excluded
    assert ball_measure(mu, (0.0,), 1.0) == 2.0
    assert ball_measure(mu, (0.0,), 1.0 + 1e-12) == 5.0


def test_ball_measure_additivity_for_atoms():
    mu = MeasureData(1, atoms=(((-2.0,), 1.0), ((2.0,), 4.0)))
    left = ball_measure(mu, (-2.0,), 1.0)
    right = ball_measure(mu, (2.0,), 1.0)
    assert left + right == ball_measure(mu, (0.0,), 4.0)


def test_ball_measure_offcenter_law_dim1():
    law = RadialLaw(1, 1.0, decay=0.5, truncation=4.0)
    mu = MeasureData(1, law=law)
    want = quad(lambda x: abs(x) ** -0.5, 0.7, 1.3)[0]
    assert math.isclose(ball_measure(mu, (1.0,), 0.3), want, rel_tol=1e-12)
    # ball straddling the origin: both signs contribute
    want = quad(lambda x: abs(x) ** -0.5, -0.1, 0.5, points=[0.0])[0]
    assert math.isclose(ball_measure(mu, (0.2,), 0.3), want, rel_tol=1e-9)


def test_ball_measure_offcenter_law_dim2():
    law = RadialLaw(2, 1.0, decay=0.8, truncation=6.0)
    mu = MeasureData(2, law=law)
    want = dblquad(lambda y, x: (x * x + y * y) ** -0.4,
                   0.6, 1.4, lambda x: -np.sqrt(np.clip(0.16 - (x - 1.0) ** 2, 0, None)),
                   lambda x: np.sqrt(np.clip(0.16 - (x - 1.0) ** 2, 0, None)))[0]
    assert math.isclose(ball_measure(mu, (1.0, 0.0), 0.4), want, rel_tol=1e-6)


def test_disk_rect_overlap_exact_cases():
    # rectangle swallows the disk
    assert math.isclose(disk_rect_overlap((0.0, 0.0), 1.0, -2, 2, -2, 2),
                        math.pi, rel_tol=1e-12)
    # disk swallows the rectangle
    assert math.isclose(disk_rect_overlap((0.0, 0.0), 5.0, -1, 1, -1, 1),
                        4.0, rel_tol=1e-12)
    # half plane and quadrant cuts
    assert math.isclose(disk_rect_overlap((0.0, 0.0), 1.0, 0, 3, -3, 3),
                        math.pi / 2, rel_tol=1e-12)
    assert math.isclose(disk_rect_overlap((0.0, 0.0), 1.0, 0, 3, 0, 3),
                        math.pi / 4, rel_tol=1e-12)
    assert disk_rect_overlap((0.0, 0.0), 1.0, 2, 3, 2, 3) == 0.0


def test_ball_average_power_at_origin():
    assert math.isclose(ball_average_power((0.0,), 0.5, 1.0, 1), 0.25)
    assert math.isclose(ball_average_power((0.0, 0.0), 1.0, 1.0, 2), 2.0 / 3.0)
    with pytest.raises(ConfigError):
        ball_average_power((0.0,), 0.5, -1.0, 1)


def test_ball_average_power_far_field():
    for dim, z in ((1, (50.0,)), (2, (50.0, 0.0))):
        got = ball_average_power(z, 0.5, 0.7, dim)
        assert math.isclose(got, 50.0**0.7, rel_tol=1e-3)


def test_ball_average_power_dim2_offcenter_quadrature():
    z, sigma, a = (1.0, 0.3), 0.7, 0.6
    lo = lambda x: z[1] - np.sqrt(np.clip(sigma**2 - (x - z[0]) ** 2, 0, None))
    hi = lambda x: z[1] + np.sqrt(np.clip(sigma**2 - (x - z[0]) ** 2, 0, None))
    want = dblquad(lambda y, x: (x * x + y * y) ** (a / 2.0),
                   z[0] - sigma, z[0] + sigma, lo, hi)[0] / (math.pi * sigma**2)
    assert math.isclose(ball_average_power(z, sigma, a, 2), want, rel_tol=1e-6)


@pytest.mark.parametrize("dim,n", [(1, 1024), (2, 256)])
def test_render_power_law_mass(dim, n):
    grid = GridSpec(dim, 20.0, n)
    law = RadialLaw(dim, 1.0, decay=0.75, truncation=5.0)
    mu = MeasureData(dim, law=law)
    f = render_measure(mu, grid)
    assert abs(f.mass() - law.total_mass()) <= 1e-3 * law.total_mass()


def test_render_critical_log_mass():
    grid = GridSpec(1, 20.0, 1024)
    law = RadialLaw(1, 1.0, decay=1.0, log_exponent=5.0 / 3.0 + 1.0,
                    truncation=5.0)
    mu = MeasureData(1, law=law)
    f = render_measure(mu, grid)
    assert abs(f.mass() - law.total_mass()) <= 1e-3 * law.total_mass()


def test_render_rejects_atoms():
    mu = MeasureData(1, atoms=(((0.0,), 1.0),))
    with pytest.raises(ConfigError):
        render_measure(mu, GridSpec(1, 20.0, 64))


def test_translate_atoms_and_law_exact():
    mu = MeasureData(1, atoms=(((0.0,), 1.0),),
                     law=RadialLaw(1, 1.0, decay=0.5, truncation=2.0))
    nu = translate(mu, (1.5,))
    assert nu.atoms[0][0] == (1.5,)
    assert nu.law.center == (1.5,)
    assert math.isclose(nu.total_mass(), mu.total_mass(), rel_tol=1e-14)


def test_translate_density_round_trip():
    grid = GridSpec(1, 20.0, 1024)
    law = RadialLaw(1, 1.0, decay=0.75, truncation=5.0)
    rendered = render_measure(MeasureData(1, law=law), grid)
    mu = MeasureData(1, density=rendered)
    z, w, sigma = (0.37,), (0.1,), 0.8
    nu = translate(mu, z)
    before = ball_measure(mu, w, sigma)
    after = ball_measure(nu, (z[0] + w[0],), sigma)
    assert abs(after - before) <= 1e-3 * before


def test_translate_support_escape():
    grid = GridSpec(1, 20.0, 1024)
    law = RadialLaw(1, 1.0, decay=0.75, truncation=5.0)
    mu = MeasureData(1, density=render_measure(MeasureData(1, law=law), grid))
    with pytest.raises(ConfigError):
        translate(mu, (9.5,))


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1e3),
       st.floats(min_value=0.05, max_value=0.95))
def test_ball_measure_scales_linearly(lam, sigma):
    mu = MeasureData(1, atoms=(((0.3,), 0.5),),
                     law=RadialLaw(1, 1.0, decay=0.75, truncation=5.0))
    base = ball_measure(mu, (0.0,), sigma)
    scaled = ball_measure(mu.scaled(lam), (0.0,), sigma)
    assert math.isclose(scaled, lam * base, rel_tol=1e-12)
