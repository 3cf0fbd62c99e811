"""Initial-datum catalog: the singularity profiles the solvability theory pins down.

Each constructor returns a :class:`~hardylab.measures.MeasureData` backed by an
analytic radial law (or atoms), so ball measures and criterion statistics are
computed exactly rather than from grid sums.  Amplitude scaling is exact:
``make_power(lam * c, a) == make_power(c, a).scaled(lam)``.
"""

from __future__ import annotations

import math

from .exceptions import ConfigError
from .measures import MeasureData, RadialLaw, translate
from .validation import as_point, check_dim, check_nonnegative, check_positive

__all__ = ["make_power", "make_critical_log", "make_fujita_psi", "make_dirac",
           "translate", "profile_from_spec"]


def make_power(c: float, a: float, truncation: float, dim: int) -> MeasureData:
    """Density ``c |x|^{-a}`` on the ball of radius ``truncation``.

    ``a = (θ-γ)/(p-1)`` is the borderline order: the subcritical necessary
    statistic is σ-flat on it, strictly divergent on anything steeper.
    """
    dim = check_dim(dim)
    check_nonnegative(c, "c")
    if not 0.0 <= a < dim:
        raise ConfigError(f"power exponent must lie in [0, {dim})")
    return MeasureData(dim, law=RadialLaw(dim, c, a, 0.0, truncation))


def make_critical_log(c: float, dim: int, theta: float, gamma: float,
                      truncation: float) -> MeasureData:
    """The strongest admissible singularity at the critical power ``p = p_γ``:
    ``c |x|^{-N} [log(e + 1/|x|)]^{-N/(θ-γ) - 1}``."""
    dim = check_dim(dim)
    q = dim / (theta - gamma) + 1.0
    return MeasureData(dim, law=RadialLaw(dim, c, float(dim), q, truncation))


def make_fujita_psi(problem, case: str, amplitude: float = 1.0,
                    truncation: float | None = None) -> MeasureData:
    """Optimal profile of the unweighted (γ-free) threshold theory.

    ``case="critical"`` (requires ``p = p0 = 1 + θ/N``):
    ``|x|^{-N} [log(e + 1/|x|)]^{-N/θ - 1}``; ``case="supercritical"``
    (requires ``p > p0``): ``|x|^{-θ/(p-1)}``.
    """
    dim, theta, p = problem.dim, problem.theta, problem.p
    p0 = 1.0 + theta / dim
    if truncation is None:
        truncation = 5.0
    check_nonnegative(amplitude, "amplitude")
    if case == "critical":
        if abs(p - p0) > 1e-12:
            raise ConfigError(f"critical profile requires p = {p0}, got {p}")
        law = RadialLaw(dim, amplitude, float(dim), dim / theta + 1.0, truncation)
    elif case == "supercritical":
        if p <= p0:
            raise ConfigError(f"supercritical profile requires p > {p0}, got {p}")
        law = RadialLaw(dim, amplitude, theta / (p - 1.0), 0.0, truncation)
    else:
        raise ConfigError(f"unknown case {case!r}; use 'critical' or 'supercritical'")
    return MeasureData(dim, law=law)


def make_dirac(mass: float, location, dim: int) -> MeasureData:
    """A single atom; the datum no necessary condition tolerates."""
    dim = check_dim(dim)
    loc = tuple(as_point(location, dim))
    return MeasureData(dim, atoms=((loc, check_nonnegative(mass, "mass")),))


def profile_from_spec(spec: dict, problem=None,
                      default_truncation: float = 5.0) -> MeasureData:
    """Build a measure from a JSON profile spec.

    Kinds: ``{"kind": "power", "c": .., "a": .., "trunc": ..}``,
    ``{"kind": "critical-log", "c": .., "trunc": ..}``,
    ``{"kind": "fujita-psi", "case": .., "amplitude": .., "trunc": ..}``,
    ``{"kind": "dirac", "mass": .., "location": [..]}``, and
    ``{"kind": "translated", "base": {..}, "z": [..]}``.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("profile spec must be an object with a 'kind' field")
    kind = spec["kind"]
    trunc = float(spec.get("trunc", default_truncation))
    if kind == "power":
        if problem is None:
            raise ConfigError("power profile needs problem context for the dimension")
        return make_power(float(spec["c"]), float(spec["a"]), trunc, problem.dim)
    if kind == "critical-log":
        if problem is None:
            raise ConfigError("critical-log profile needs problem context")
        return make_critical_log(float(spec["c"]), problem.dim, problem.theta,
                                 problem.gamma, trunc)
    if kind == "fujita-psi":
        if problem is None:
            raise ConfigError("fujita-psi profile needs problem context")
        return make_fujita_psi(problem, spec.get("case", "supercritical"),
                               float(spec.get("amplitude", 1.0)), trunc)
    if kind == "dirac":
        if problem is None:
            raise ConfigError("dirac profile needs problem context")
        return make_dirac(float(spec.get("mass", 1.0)),
                          spec.get("location", [0.0] * problem.dim), problem.dim)
    if kind == "translated":
        base = profile_from_spec(spec["base"], problem, default_truncation)
        return translate(base, spec["z"])
    raise ConfigError(f"unknown profile kind {kind!r}")
