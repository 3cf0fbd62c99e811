import math

import numpy as np
import pytest

from hardylab.exceptions import ConfigError, NumericalError
from hardylab.fields import Field, GridSpec
from hardylab.kernel import default_table, kernel_at_radius
from hardylab.measures import MeasureData, render_measure
from hardylab.profiles import make_dirac, make_power
from hardylab.semigroup import (Problem, apply_semigroup, apply_to_measure,
                                sup_bound_statistic)

GRID = GridSpec(1, 20.0, 512)


def bump(grid, width=0.5):
    r = grid.radii()
    return Field(grid, np.exp(-((r / width) ** 2)))


def test_problem_parameter_guards():
    with pytest.raises(ConfigError):
        Problem(dim=1, theta=2.0, gamma=1.0, p=3.0, horizon=1.0)  # gamma = min
    with pytest.raises(ConfigError):
        Problem(dim=1, theta=2.0, gamma=-0.1, p=3.0, horizon=1.0)
    with pytest.raises(ConfigError):
        Problem(dim=1, theta=2.0, gamma=0.5, p=1.0, horizon=1.0)
    with pytest.raises(ConfigError):
        Problem(dim=1, theta=2.0, gamma=0.5, p=3.0, horizon=0.0)
    # moment finiteness: theta < 2 requires gamma < theta (p - 1)
    with pytest.raises(ConfigError):
        Problem(dim=1, theta=0.6, gamma=0.5, p=1.5, horizon=1.0)
    Problem(dim=1, theta=0.6, gamma=0.5, p=2.0, horizon=1.0)


def test_critical_powers():
    prob = Problem(dim=1, theta=2.0, gamma=0.5, p=3.0, horizon=1.0)
    assert prob.p_fujita == 3.0
    assert prob.p_hardy == 2.5
    prob2 = Problem(dim=2, theta=1.0, gamma=0.5, p=2.0, horizon=1.0)
    assert prob2.p_fujita == 1.5
    assert prob2.p_hardy == 1.25


def test_semigroup_t0_is_identity():
    f = bump(GRID)
    assert apply_semigroup(f, Problem(1, 2.0, 0.5, 3.0, 1.0).kernel_spec, 0.0) is f


def test_semigroup_preserves_constants():
    spec = Problem(1, 2.0, 0.5, 3.0, 1.0).kernel_spec
    f = Field(GRID, np.full(512, 1.7))
    out = apply_semigroup(f, spec, 0.8)
    np.testing.assert_allclose(out.values, 1.7, rtol=1e-12)


def test_semigroup_composition():
    spec = Problem(1, 1.5, 0.5, 3.0, 1.0).kernel_spec
    f = bump(GRID)
    two_step = apply_semigroup(apply_semigroup(f, spec, 0.3), spec, 0.45)
    one_step = apply_semigroup(f, spec, 0.75)
    assert np.max(np.abs(two_step.values - one_step.values)) <= 1e-10 * f.sup()


def test_semigroup_mass_conservation():
    spec = Problem(1, 1.0, 0.5, 3.0, 1.0).kernel_spec
    f = bump(GRID)
    out = apply_semigroup(f, spec, 0.6)
    assert math.isclose(out.mass(), f.mass(), rel_tol=1e-10)


def test_semigroup_comparison_monotone():
    spec = Problem(1, 2.0, 0.5, 3.0, 1.0).kernel_spec
    f = bump(GRID, width=0.5)
    g = f.with_values(f.values + 0.2)
    sf = apply_semigroup(f, spec, 0.4)
    sg = apply_semigroup(g, spec, 0.4)
    assert np.all(sf.values <= sg.values + 1e-12)


def test_semigroup_matches_riemann_convolution():
    # narrow bump against a direct real-space Gaussian convolution
    spec = Problem(1, 2.0, 0.5, 3.0, 1.0).kernel_spec
    f = bump(GRID, width=0.4)
    t = 0.5
    out = apply_semigroup(f, spec, t)
    x = GRID.axis()
    h = GRID.spacing
    gauss = lambda r: (4 * math.pi * t) ** -0.5 * np.exp(-(r**2) / (4 * t))
    direct = np.array([h * np.sum(gauss(np.abs(xi - x)) * f.values) for xi in x])
    assert np.max(np.abs(out.values - direct)) <= 1e-6


def test_apply_to_measure_dirac_closed_form():
    table = default_table(1, 2.0)
    mu = make_dirac(2.0, (0.0,), 1)
    out = apply_to_measure(mu, table, 1.0, GRID)
    want = 2.0 * kernel_at_radius(table, np.abs(GRID.axis()), 1.0)
    np.testing.assert_allclose(out.values, want, rtol=1e-12)
    assert math.isclose(out.at((0.0,)), 2.0 * 0.2820948, rel_tol=1e-5)


def test_apply_to_measure_two_atoms_linear():
    table = default_table(1, 2.0)
    one = apply_to_measure(make_dirac(1.0, (-1.0,), 1), table, 0.5, GRID)
    two = apply_to_measure(make_dirac(1.5, (2.0,), 1), table, 0.5, GRID)
    both = MeasureData(1, atoms=(((-1.0,), 1.0), ((2.0,), 1.5)))
    out = apply_to_measure(both, table, 0.5, GRID)
    np.testing.assert_allclose(out.values, one.values + two.values, rtol=1e-12)


def test_apply_to_measure_atom_t0_rejected():
    with pytest.raises(ConfigError):
        apply_to_measure(make_dirac(1.0, (0.0,), 1), default_table(1, 2.0),
                         0.0, GRID)


def test_ringing_guard_on_singular_profile():
    # a rendered power-law spike evolved at a barely-dissipated time rings
    # below -1e-12 relative; the default guard raises, the widened one clamps
    grid = GridSpec(1, 20.0, 1024)
    spec = Problem(1, 2.0, 0.5, 3.0, 1.0).kernel_spec
    f = render_measure(make_power(1.0, 0.75, 5.0, 1), grid)
    t = 10.0 / float(np.max(grid.wavenumbers()) ** 2)
    with pytest.raises(NumericalError):
        apply_semigroup(f, spec, t)
    out = apply_semigroup(f, spec, t, ringing_tol=1e-7)
    assert out.values.min() == 0.0


def test_sup_bound_statistic_atom():
    table = default_table(1, 2.0)
    mu = make_dirac(3.0, (0.0,), 1)
    got = sup_bound_statistic(mu, table, 1.0, GRID)
    # atom: sup S(t)mu = m G(0,1), ball holds the whole mass m
    assert math.isclose(got, 0.2820948, rel_tol=1e-5)


def test_sup_bound_statistic_constant_density():
    table = default_table(1, 2.0)
    f = Field(GRID, np.full(512, 0.9))
    mu = MeasureData(1, density=f)
    got = sup_bound_statistic(mu, table, 0.25, GRID)
    assert math.isclose(got, 0.5, rel_tol=1e-6)  # 1/|B(0,1)| in one dimension
    table2 = default_table(2, 2.0)
    grid2 = GridSpec(2, 10.0, 128)
    mu2 = MeasureData(2, density=Field(grid2, np.full((128, 128), 0.9)))
    got2 = sup_bound_statistic(mu2, table2, 0.25, grid2)
    assert math.isclose(got2, 1.0 / math.pi, rel_tol=1e-6)


def test_sup_bound_statistic_bounded_sweep():
    table = default_table(1, 2.0)
    mu = make_power(1.0, 0.75, 5.0, 1)
    vals = [sup_bound_statistic(mu, table, t, GRID) for t in (0.01, 0.1, 0.5, 1.0)]
    assert all(0.0 < v < 10.0 for v in vals)


def test_sup_bound_statistic_zero_measure():
    with pytest.raises(ConfigError):
        sup_bound_statistic(MeasureData(1), default_table(1, 2.0), 1.0, GRID)
