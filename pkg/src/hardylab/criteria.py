"""Solvability criteria: necessary statistics, sufficiency statistic, and the
supersolution certificate.

Each necessary condition bounds a σ-indexed ratio of ball measures against
the scale the theory permits; the implied constants are unknown, so every
operation returns the empirical statistic with a fitted log-log slope and a
verdict — ``BoundedBy`` (statistic stays level) or ``DivergesLike`` (statistic
grows as σ → 0, slope below -0.05 against the natural regressor).  Divergence
of a necessary statistic certifies nonexistence; smallness of the sufficiency
statistic is corroborated constructively by a supersolution built from the
linear evolution plus a singular-in-time corrector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigError, NumericalError
from .fields import Field, GridSpec
from .kernel import KernelTable, default_table, kernel_moment, shifted_moment
from .measures import (BALL_VOLUME, MeasureData, ball_average_power,
                       ball_measure)
from .picard import duhamel_sweep
from .semigroup import Problem, apply_to_measure
from .validation import as_point, check_positive

DIVERGENCE_SLOPE = -0.05


def critical_exponents(dim: int, theta: float, gamma: float) -> tuple[float, float]:
    """``(p0, p_gamma)``: the γ-free threshold power and its Hardy shift.

    ``p0 = 1 + θ/N`` separates the regimes for bounded-mass data;
    ``p_gamma = 1 + (θ-γ)/N < p0`` is where the singular potential moves it.
    """
    if not 0.0 < gamma < min(theta, dim):
        raise ConfigError("need 0 < gamma < min(theta, N)")
    return 1.0 + theta / dim, 1.0 + (theta - gamma) / dim


@dataclass(frozen=True)
class Verdict:
    kind: str          # "BoundedBy" | "DivergesLike"
    value: float       # empirical sup, resp. fitted rate

    def __str__(self):
        return f"{self.kind}({self.value:.6g})"


@dataclass(frozen=True)
class CriterionStatistic:
    sigmas: np.ndarray
    values: np.ndarray
    slope: float
    verdict: Verdict

    def __post_init__(self):
        s = np.asarray(self.sigmas, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.shape != v.shape or len(s) < 2:
            raise ConfigError("need matching sigma/value arrays, at least 2 points")
        if np.any(np.diff(s) >= 0):
            raise ConfigError("sigma grid must decrease strictly")
        if np.any(~np.isfinite(v)) or np.any(v < 0):
            raise ConfigError("statistic values must be finite and nonnegative")
        object.__setattr__(self, "sigmas", s)
        object.__setattr__(self, "values", v)

    @property
    def diverges(self) -> bool:
        return self.verdict.kind == "DivergesLike"


def _judge(sigmas, values, regressor) -> tuple[float, Verdict]:
    """Fit log(statistic) against the regressor; diverging means the statistic
    grows as σ decreases (regressors decrease with σ, so slope < 0)."""
    values = np.asarray(values, dtype=float)
    pos = values > 0.0
    if pos.sum() < 2:
        return 0.0, Verdict("BoundedBy", float(values.max(initial=0.0)))
    slope = float(np.polyfit(regressor[pos], np.log(values[pos]), 1)[0])
    if slope < DIVERGENCE_SLOPE:
        return slope, Verdict("DivergesLike", slope)
    return slope, Verdict("BoundedBy", float(values.max()))


def default_sigma_grid(problem: Problem, n: int = 24, decades: float = 2.5) -> np.ndarray:
    """Decreasing σ grid below the self-similar length ``T^{1/θ}``."""
    top = 0.5 * problem.horizon ** (1.0 / problem.theta)
    return np.geomspace(top, top * 10.0 ** (-decades), n)


def default_z_set(problem: Problem) -> list:
    """The origin plus rings at ``T^{1/θ}/2`` and ``2 T^{1/θ}`` — probing the
    Hardy-dominated and the translation-invariant regimes."""
    ell = problem.horizon ** (1.0 / problem.theta)
    pts = [(0.0,) * problem.dim]
    for radius in (ell / 2.0, 2.0 * ell):
        if problem.dim == 1:
            pts += [(radius,), (-radius,)]
        else:
            pts += [(radius, 0.0), (0.0, radius), (-radius, 0.0), (0.0, -radius)]
    return pts


def _validated_sigmas(problem, sigma_grid):
    if sigma_grid is None:
        return default_sigma_grid(problem)
    s = np.asarray(sigma_grid, dtype=float)
    if np.any(s <= 0) or np.any(s >= problem.horizon ** (1.0 / problem.theta)):
        raise ConfigError("sigma grid must lie in (0, T^{1/theta})")
    return s


def necessary_subcritical_stat(mu: MeasureData, problem: Problem, z_set=None,
                               sigma_grid=None) -> CriterionStatistic:
    """Ball-measure growth test against ``σ^{N - θ/(p-1)}`` with the local
    Hardy average as weight.

    statistic(σ) = sup_z  μ(B(z,σ)) / [avg_{B(z,σ)}|x|^{γ/(p-1)} · σ^{N-θ/(p-1)}].

    Bounded statistic is consistent with solvability; a negative fitted slope
    against log σ certifies data too singular to solve.
    """
    z_set = default_z_set(problem) if z_set is None else list(z_set)
    if not z_set:
        raise ConfigError("z_set must contain at least one point")
    sigmas = _validated_sigmas(problem, sigma_grid)
    a = problem.gamma / (problem.p - 1.0)
    decay = problem.dim - problem.theta / (problem.p - 1.0)
    values = np.empty_like(sigmas)
    for i, s in enumerate(sigmas):
        best = 0.0
        for z in z_set:
            bm = ball_measure(mu, z, float(s))
            if bm > 0.0:
                best = max(best, bm / (ball_average_power(z, float(s), a, problem.dim)
                                       * float(s) ** decay))
        values[i] = best
    slope, verdict = _judge(sigmas, values, np.log(sigmas))
    return CriterionStatistic(sigmas, values, slope, verdict)


def necessary_critical_stat(mu: MeasureData, problem: Problem,
                            sigma_grid=None) -> CriterionStatistic:
    """Origin ball measure against the logarithmic scale that rules the
    borderline power ``p = p_gamma``:
    statistic(σ) = μ(B(0,σ)) · [log(e + T^{1/θ}/σ)]^{N/(θ-γ)}.
    """
    _, p_gamma = critical_exponents(problem.dim, problem.theta, problem.gamma)
    if abs(problem.p - p_gamma) > 1e-12:
        raise ConfigError(f"criterion applies only at p = p_gamma = {p_gamma}")
    sigmas = _validated_sigmas(problem, sigma_grid)
    ell = problem.horizon ** (1.0 / problem.theta)
    power = problem.dim / (problem.theta - problem.gamma)
    origin = (0.0,) * problem.dim
    logs = np.log(np.e + ell / sigmas)
    values = np.array([ball_measure(mu, origin, float(s)) for s in sigmas]) * logs**power
    # log divergence is invisible against log σ; regress against the log-log scale
    slope, verdict = _judge(sigmas, values, -np.log(logs))
    return CriterionStatistic(sigmas, values, slope, verdict)


def necessary_offorigin_stat(mu: MeasureData, problem: Problem, z,
                             sigma_grid=None) -> CriterionStatistic:
    """Away-from-origin ball test at the γ-free threshold power ``p = p0``:
    statistic(σ) = μ(B(z,σ)) · |z|^{-γ/(p-1)} · [log(e + T^{1/θ}/σ)]^{N/θ}.
    Requires the probe point outside the self-similar ball, |z| > T^{1/θ}.
    """
    p0, _ = critical_exponents(problem.dim, problem.theta, problem.gamma)
    if abs(problem.p - p0) > 1e-12:
        raise ConfigError(f"criterion applies only at p = p0 = {p0}")
    z = as_point(z, problem.dim)
    ell = problem.horizon ** (1.0 / problem.theta)
    dist = float(np.linalg.norm(z))
    if dist <= ell:
        raise ConfigError(f"|z| = {dist} must exceed T^(1/theta) = {ell}")
    sigmas = _validated_sigmas(problem, sigma_grid)
    logs = np.log(np.e + ell / sigmas)
    weight = dist ** (-problem.gamma / (problem.p - 1.0))
    values = (np.array([ball_measure(mu, z, float(s)) for s in sigmas])
              * weight * logs ** (problem.dim / problem.theta))
    slope, verdict = _judge(sigmas, values, -np.log(logs))
    return CriterionStatistic(sigmas, values, slope, verdict)


def _measure_power(mu: MeasureData, r: float) -> MeasureData:
    if any(m > 0 for _, m in mu.atoms):
        raise ConfigError("r-average undefined for atomic data")
    if mu.law is not None and mu.density is not None:
        raise ConfigError("pointwise power of mixed law+grid data is undefined")
    density = None if mu.density is None else mu.density.with_values(mu.density.values**r)
    law = None if mu.law is None else mu.law.powered(r)
    return MeasureData(mu.dim, (), density, law)


def sufficient_condition_stat(mu: MeasureData, problem: Problem, r: float,
                              z_set=None, sigma_grid=None) -> CriterionStatistic:
    """Smallness test backing local existence:
    statistic(σ) = sup_z (avg_{B(z,σ)} μ^r)^{1/r} · σ^{(θ-γ)/(p-1)}.
    ``r`` must sit inside the admissible window (see exponent_window).
    """
    _, p_gamma = critical_exponents(problem.dim, problem.theta, problem.gamma)
    if problem.p <= p_gamma:
        raise ConfigError("sufficiency statistic needs p > p_gamma")
    hi = problem.dim * (problem.p - 1.0) / (problem.theta - problem.gamma)
    if not 1.0 < r < hi:
        raise ConfigError(f"r must lie in (1, {hi})")
    z_set = default_z_set(problem) if z_set is None else list(z_set)
    if not z_set:
        raise ConfigError("z_set must contain at least one point")
    sigmas = _validated_sigmas(problem, sigma_grid)
    powered = _measure_power(mu, r)
    vol = BALL_VOLUME[problem.dim]
    grow = (problem.theta - problem.gamma) / (problem.p - 1.0)
    values = np.empty_like(sigmas)
    for i, s in enumerate(sigmas):
        best = max(ball_measure(powered, z, float(s)) for z in z_set)
        values[i] = (best / (vol * float(s) ** problem.dim)) ** (1.0 / r) \
            * float(s) ** grow
    slope, verdict = _judge(sigmas, values, np.log(sigmas))
    return CriterionStatistic(sigmas, values, slope, verdict)


def exponent_window(problem: Problem, epsilon: float) -> tuple[float, float]:
    """Admissible ``r`` interval ``(N(p-1)/(θ-γ) - ε, N(p-1)/(θ-γ))``."""
    check_positive(epsilon, "epsilon")
    _, p_gamma = critical_exponents(problem.dim, problem.theta, problem.gamma)
    if problem.p <= p_gamma:
        raise ConfigError("window defined only for p > p_gamma")
    hi = problem.dim * (problem.p - 1.0) / (problem.theta - problem.gamma)
    lo = hi - epsilon
    if lo <= 1.0:
        raise ConfigError(f"epsilon={epsilon} pushes the window lower end to"
                          f" {lo} <= 1; choose it smaller")
    return lo, hi


# ---------------------------------------------------------------------------
# supersolution certificate

@dataclass(frozen=True)
class SupersolutionParams:
    """Exponents of the ansatz ``W(t) = S(t)μ + t^E (S(t)μ^r)^{1/(rα')}``.

    ``integrability_margin`` > 0 keeps the singular time factor integrable
    against the Hardy weight; ``absorption_margin`` > 0 lets the nonlinear
    image of W be re-absorbed into the corrector.  Either failing invalidates
    the construction.
    """

    alpha: float
    alpha_conj: float
    rho_exponent: float
    integrability_margin: float
    absorption_margin: float


def supersolution_exponents(problem: Problem, alpha: float) -> SupersolutionParams:
    """Exponent bookkeeping of the certificate for a Hölder split ``alpha``.

    ``alpha`` must sit just below ``N/γ`` (accepted range
    ``(max(1, 0.8 N/γ), N/γ)``) so that ``|x|^{-γα}`` stays locally
    integrable while losing as little as possible.
    """
    hardy_cap = problem.dim / problem.gamma
    lo = max(1.0, 0.8 * hardy_cap)
    if not lo < alpha < hardy_cap:
        raise ConfigError(f"alpha must lie in ({lo}, {hardy_cap})")
    conj = alpha / (alpha - 1.0)
    frac = (problem.theta - problem.gamma) / problem.theta
    drive = (problem.p - 1.0 / conj) / (problem.p - 1.0)
    integrability = 1.0 - frac * drive
    absorption = 1.0 + frac * problem.p * (1.0 - drive) - frac / conj
    rho_exponent = 1.0 - problem.gamma / problem.theta - frac * drive
    if integrability <= 0.0 or absorption <= 0.0:
        raise ConfigError("construction hypotheses violated: a margin is nonpositive")
    return SupersolutionParams(alpha=alpha, alpha_conj=conj,
                               rho_exponent=rho_exponent,
                               integrability_margin=integrability,
                               absorption_margin=absorption)


def build_supersolution(mu: MeasureData, params: SupersolutionParams, r: float,
                        t: float, problem: Problem, grid: GridSpec,
                        table: KernelTable | None = None) -> Field:
    """``W(t) = S(t)μ + t^E (S(t)μ^r)^{1/(rα')}`` sampled on the grid."""
    if not 0.0 < t < 1.0:
        raise ConfigError("the certificate is built for t in (0, 1)")
    if table is None:
        table = default_table(problem.dim, problem.theta)
    linear = apply_to_measure(mu, table, t, grid)
    boost = apply_to_measure(_measure_power(mu, r), table, t, grid)
    expo = 1.0 / (r * params.alpha_conj)
    return linear.with_values(
        linear.values + t**params.rho_exponent * boost.values**expo)


@dataclass(frozen=True)
class CertificateReport:
    passed: bool
    samples: tuple          # (t, min_residual, sup_W) per time sample
    tolerance: float


def verify_supersolution(mu: MeasureData, params: SupersolutionParams, r: float,
                         problem: Problem, time_samples, grid: GridSpec | None = None,
                         table: KernelTable | None = None, nodes: int = 64,
                         tolerance: float = 1e-6) -> CertificateReport:
    """Check ``W(t) ≥ S(t)μ + Duhamel[V W^p](t)`` at the sample times.

    The Duhamel image uses the same left-endpoint quadrature as the solver,
    so a passing certificate dominates the entire discrete Picard sequence.
    Passing means min residual ≥ -tolerance · ‖W‖_∞ at every sample.
    """
    if grid is None:
        grid = GridSpec(problem.dim, 20.0, 1024 if problem.dim == 1 else 256)
    if table is None:
        table = default_table(problem.dim, problem.theta)
    results = []
    ok = True
    for t_star in time_samples:
        t_star = check_positive(float(t_star), "time sample")
        times = np.linspace(0.0, t_star, nodes + 1)[1:]
        stack = np.empty((nodes,) + (grid.n,) * grid.dim)
        for j, s in enumerate(times):
            stack[j] = build_supersolution(mu, params, r, float(s), problem,
                                           grid, table).values
        zero = np.zeros_like(stack)
        duh = duhamel_sweep(stack, zero, grid, problem, float(times[0]),
                            ringing_tol=1e-7)[-1]
        linear = apply_to_measure(mu, table, t_star, grid).values
        residual = stack[-1] - linear - duh
        sup_w = float(stack[-1].max())
        min_r = float(residual.min())
        results.append((t_star, min_r, sup_w))
        ok = ok and min_r >= -tolerance * sup_w
    return CertificateReport(passed=ok, samples=tuple(results), tolerance=tolerance)


# ---------------------------------------------------------------------------
# moment inequalities

@dataclass(frozen=True)
class RatioReport:
    max_ratio: float
    s_values: np.ndarray
    ratios: np.ndarray


def moment_ratio_check(problem: Problem, z, rho: float, s_grid,
                       table: KernelTable | None = None) -> RatioReport:
    """Shifted kernel moment against the local Hardy integral:
    ratio(s) = ∫G(y,s)|y+z|^{γ/(p-1)} dy / [ρ^{-N} ∫_{B(z,ρ)} |y|^{γ/(p-1)} dy],
    for probes |z| > T^{1/θ} and times ρ^θ < s < T/3.  Finiteness of the max
    ratio is the checkable content; the value is the empirical constant.
    """
    rho = check_positive(rho, "rho")
    z = as_point(z, problem.dim)
    ell = problem.horizon ** (1.0 / problem.theta)
    if float(np.linalg.norm(z)) <= ell:
        raise ConfigError(f"probe point must satisfy |z| > T^(1/theta) = {ell}")
    s_values = np.asarray(s_grid, dtype=float)
    if np.any(s_values <= rho**problem.theta) or np.any(s_values >= problem.horizon / 3.0):
        raise ConfigError("sample times must lie in (rho^theta, T/3)")
    if table is None:
        table = default_table(problem.dim, problem.theta)
    a = problem.gamma / (problem.p - 1.0)
    denom = BALL_VOLUME[problem.dim] * ball_average_power(z, rho, a, problem.dim)
    ratios = np.array([shifted_moment(table, a, z, float(s)) for s in s_values]) / denom
    if not np.all(np.isfinite(ratios)):
        raise NumericalError("non-finite moment ratio")
    return RatioReport(float(ratios.max()), s_values, ratios)


@dataclass(frozen=True)
class SpreadReport:
    constant: float
    spread: float
    s_values: np.ndarray
    values: np.ndarray


def moment_bound_check(problem: Problem, s_grid,
                       table: KernelTable | None = None) -> SpreadReport:
    """Scaling flatness of the Hardy-weight kernel moment:
    ``∫G(y,s)|y|^{γ/(p-1)} dy · s^{-γ/(θ(p-1))`` must be s-independent."""
    if table is None:
        table = default_table(problem.dim, problem.theta)
    a = problem.gamma / (problem.p - 1.0)
    s_values = np.asarray(s_grid, dtype=float)
    values = np.array([kernel_moment(table, a, float(s)) for s in s_values]) \
        * s_values ** (-a / problem.theta)
    mean = float(values.mean())
    spread = float((values.max() - values.min()) / mean)
    if spread > 1e-3:
        raise NumericalError(f"moment scaling spread {spread:.2e} exceeds 1e-3")
    return SpreadReport(mean, spread, s_values, values)
