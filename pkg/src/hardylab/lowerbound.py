"""Iteration lab behind the nonexistence bounds: the doubly-exponential
coefficient recursion, its envelope functions, kernel-weighted solution
functionals, and the mass bound they imply.

The recursion ``a_{k+1} = c2 * a_k^p * (p-1)/(p^k - 1)`` collapses doubly
exponentially, so everything is carried in log-space; ``a_k`` only ever
leaves log-space for display.  The envelope ``f_k`` lower-bounds the
kernel-weighted functional ``w`` of any solution, and boundedness of
``b_k = -p^{-k} log a_k`` turns the chain into a quantitative mass bound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigError, NumericalError, SolverError
from .kernel import KernelTable, default_table, kernel_at_radius
from .measures import MeasureData, ball_measure
from .picard import SolveReport
from .validation import as_point, check_positive

_LOG10 = math.log(10.0)


@dataclass(frozen=True)
class RecursionRun:
    """Log-space record of the coefficient recursion.

    ``log_a[i]`` is the natural log of ``a_{i+1}``; ``b[i] = -p^{-(i+1)}
    log_a[i]`` stays O(1) where ``a`` itself underflows float64 near k = 12.
    ``beta = exp(-max b) = min_k a_k^{p^{-k}}`` realizes the uniform lower
    bound ``a_k >= beta^{p^k}``.
    """

    c1: float
    c2: float
    p: float
    log_a: np.ndarray
    b: np.ndarray
    beta: float

    def __post_init__(self):
        la = np.asarray(self.log_a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if la.shape != b.shape or la.ndim != 1 or len(la) < 2:
            raise ConfigError("need matching log_a/b arrays of length >= 2")
        if np.any(~np.isfinite(la)) or np.any(~np.isfinite(b)):
            raise ConfigError("recursion sequences must stay finite in log-space")
        if not self.beta > 0.0:
            raise ConfigError("beta must be positive")
        object.__setattr__(self, "log_a", la)
        object.__setattr__(self, "b", b)

    @property
    def a(self) -> np.ndarray:
        """Linear-scale coefficients; underflows to 0 for deep k by design."""
        with np.errstate(under="ignore"):
            return np.exp(self.log_a)

    def __len__(self):
        return len(self.log_a)


def a_sequence(c1: float, c2: float, p: float, K: int) -> RecursionRun:
    """Run the recursion ``a_1 = c1``, ``a_{k+1} = c2 a_k^p (p-1)/(p^k-1)``
    for K terms, entirely in log-space."""
    check_positive(c1, "c1")
    check_positive(c2, "c2")
    if p <= 1.0:
        raise ConfigError("need p > 1")
    if K < 2:
        raise ConfigError("need K >= 2")
    log_a = np.empty(K)
    log_a[0] = math.log(c1)
    lc2, lp, lpm1 = math.log(c2), math.log(p), math.log(p - 1.0)
    for k in range(1, K):
        # log(p^k - 1) = k log p + log(1 - p^-k), never formed in linear scale
        log_a[k] = lc2 + p * log_a[k - 1] + lpm1 - (k * lp + math.log1p(-p ** (-k)))
    b = -np.exp(-lp * np.arange(1, K + 1)) * log_a
    return RecursionRun(c1=c1, c2=c2, p=p, log_a=log_a, b=b,
                        beta=math.exp(-float(b.max())))


@dataclass(frozen=True)
class BoundReport:
    sup_b: float
    fitted_c: float            # least c with b_{k+1} - b_k <= c p^{-k-1} (k+1)
    increments: np.ndarray
    tail_index: int | None     # first k past which all increments are < 1e-10

    @property
    def tail_certified(self) -> bool:
        return self.tail_index is not None


def b_bound_check(run: RecursionRun, tail_tol: float = 1e-10) -> BoundReport:
    """Quantify boundedness of ``b``: fit the increment constant and locate
    where the Cauchy tail drops below ``tail_tol``.

    Increments come from the telescoped form
    ``b_{k+1} - b_k = p^{-k-1} [log((p^k-1)/(p-1)) - log c2]`` — identical to
    diff(b) in exact arithmetic but immune to the catastrophic cancellation
    that differencing O(1) values hits once the true gap is ~p^{-k}."""
    k = np.arange(1, len(run))                 # 1-based index of the left term
    d = run.p ** (-(k + 1.0)) * (k * math.log(run.p) + np.log1p(-run.p ** (-k))
                                 - math.log(run.p - 1.0) - math.log(run.c2))
    weights = run.p ** (-(k + 1.0)) * (k + 1.0)
    fitted = float((d / weights).max())
    small = np.abs(d) < tail_tol
    tail = None
    for i in range(len(d)):
        if small[i:].all():
            tail = i + 1
            break
    return BoundReport(sup_b=float(run.b.max()), fitted_c=fitted,
                       increments=d, tail_index=tail)


def _log_envelope(run: RecursionRun, mu_ball: float, rho: float, theta: float,
                  dim: int, t: float, k: int) -> float:
    pk1 = run.p ** (k - 1)
    out = run.log_a[k - 1] + pk1 * math.log(mu_ball) - (dim / theta) * math.log(t)
    q = (pk1 - 1.0) / (run.p - 1.0)
    if q != 0.0:
        out += q * math.log(math.log(t / rho**theta))
    return float(out)


def f_envelope(run: RecursionRun, mu_ball: float, rho: float, theta: float,
               dim: int, t: float, k: int) -> float:
    """``f_k(t) = a_k mu_ball^{p^{k-1}} t^{-N/θ} [log(t/ρ^θ)]^{(p^{k-1}-1)/(p-1)}``.

    Evaluated via log-space; requires ``t > ρ^θ`` (the log factor must be
    positive once k >= 2, and the envelope is only meaningful past the
    concentration time anyway).
    """
    check_positive(rho, "rho")
    check_positive(theta, "theta")
    if not 1 <= k <= len(run):
        raise ConfigError(f"k must be in 1..{len(run)}")
    if t <= rho**theta:
        raise ConfigError("need t > rho^theta: log factor undefined at or below it")
    if mu_ball < 0.0:
        raise ConfigError("mu_ball must be nonnegative")
    if mu_ball == 0.0:
        return 0.0
    with np.errstate(over="ignore"):
        return float(np.exp(_log_envelope(run, mu_ball, rho, theta, dim, t, k)))


def induction_step_check(run: RecursionRun, mu_ball: float, rho: float,
                         theta: float, gamma: float, dim: int, t: float,
                         k: int) -> float:
    """Relative mismatch of the chain step
    ``c2 t^{-N/θ} ∫_{ρ^θ}^t s^{(N-γ)/θ} f_k(s)^p ds  =  f_{k+1}(t)``.

    The two sides agree identically only at the borderline power
    ``p = 1 + (θ-γ)/N`` (the s-exponent then collapses to -1 and the log
    powers telescope); other powers are rejected rather than compared
    against a formula they do not satisfy.
    """
    p_edge = 1.0 + (theta - gamma) / dim
    if abs(run.p - p_edge) > 1e-9:
        raise ConfigError(f"telescoping step needs the borderline power {p_edge}")
    if not 1 <= k < len(run):
        raise ConfigError(f"k must be in 1..{len(run) - 1}")
    check_positive(mu_ball, "mu_ball")
    target = f_envelope(run, mu_ball, rho, theta, dim, t, k + 1)
    s_pow = (dim - gamma) / theta

    def integrand(s):
        return math.exp(run.p * _log_envelope(run, mu_ball, rho, theta, dim, s, k)
                        + s_pow * math.log(s))

    val, _ = quad(integrand, rho**theta, t, limit=200)
    lhs = run.c2 * t ** (-dim / theta) * val
    if target == 0.0:
        raise NumericalError("envelope target underflowed; pick smaller k or larger t")
    return abs(lhs - target) / target


def w_functional(report, table: KernelTable, z, t_node: float,
                 time_shift: float = 0.0) -> float:
    """Kernel-weighted probe ``w(t) = h^N Σ_x G(x,t) u(x+z, t+shift)``.

    ``t + shift`` must land on a solver node; ``z`` must sit on the grid
    (the shift is a roll, not an interpolation).
    """
    state = report.state if isinstance(report, SolveReport) else report
    grid = state.grid
    j = state.node_index(t_node + time_shift)
    u = state.values[j]
    z = as_point(z, grid.dim)
    h = grid.spacing
    shifted = u
    for axis, comp in enumerate(z):
        steps = comp / h
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("probe offset must sit on the grid")
        shifted = np.roll(shifted, -int(round(steps)), axis=axis)
    mesh = grid.mesh()
    r = np.abs(mesh[0]) if grid.dim == 1 else np.hypot(mesh[0], mesh[1])
    weights = kernel_at_radius(table, r, check_positive(t_node, "t_node"))
    return float(grid.cell_volume * np.sum(weights * shifted))


def early_lower_bound_probe(report: SolveReport, mu: MeasureData, z,
                            rho: float, table: KernelTable | None = None) -> float:
    """Empirical constant of the concentration lower bound: the infimum over
    ``|x| <= 3ρ`` of ``u(x+z, (2ρ)^θ) / [G(x, ρ^θ) μ(B(z,ρ))]``.

    A positive return is the checkable trace of "mass in a ball forces the
    solution above a kernel profile one doubling later".
    """
    if not report.converged:
        raise SolverError("probe needs a converged solution")
    state = report.state
    problem = state.problem
    rho = check_positive(rho, "rho")
    t_probe = (2.0 * rho) ** problem.theta
    if t_probe >= problem.horizon:
        raise ConfigError("(2 rho)^theta must stay below the horizon")
    mass = ball_measure(mu, z, rho)
    if mass == 0.0:
        raise ConfigError("probe ball carries no mass; ratio undefined")
    if table is None:
        table = default_table(problem.dim, problem.theta)
    grid = state.grid
    z = as_point(z, problem.dim)
    u = state.values[state.node_index(t_probe)]
    for axis, comp in enumerate(z):
        steps = comp / grid.spacing
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("probe offset must sit on the grid")
        u = np.roll(u, -int(round(steps)), axis=axis)
    mesh = grid.mesh()
    r = np.abs(mesh[0]) if grid.dim == 1 else np.hypot(mesh[0], mesh[1])
    mask = r <= 3.0 * rho
    if not mask.any():
        raise ConfigError("no grid nodes inside |x| <= 3 rho")
    denom = kernel_at_radius(table, r[mask], rho**problem.theta) * mass
    ratio = float((u[mask] / denom).min())
    if ratio <= 0.0:
        raise NumericalError(f"probe ratio {ratio:.3e} not positive")
    return ratio


def nonexistence_mass_bound(T: float, rho: float, theta: float, p: float) -> float:
    """Shape of the admissible-mass ceiling, ``[log(T/(5ρ^θ))]^{-1/(p-1)}``:
    any datum putting more (suitably normalized) mass on ``B(0,ρ)`` admits no
    solution up to time T.  Constant-free; degenerates as ``5ρ^θ → T``."""
    check_positive(T, "T")
    check_positive(rho, "rho")
    check_positive(theta, "theta")
    if p <= 1.0:
        raise ConfigError("need p > 1")
    if 5.0 * rho**theta >= T:
        raise ConfigError("need 5 rho^theta < T")
    return math.log(T / (5.0 * rho**theta)) ** (-1.0 / (p - 1.0))


def _a_repr(log_a: float) -> str:
    """Decimal string for exp(log_a), usable past float64 underflow.

    Mantissa digits shrink with depth: once |log10 a| reaches 10^m, float64
    only resolves ~15-m fractional digits of the exponent, so printing more
    mantissa would fabricate precision."""
    log10 = log_a / _LOG10
    if abs(log10) < 300.0:
        return f"{math.exp(log_a):.12g}"
    e = math.floor(log10)
    digits = max(0, 14 - len(str(abs(e))))
    return f"{10.0 ** (log10 - e):.{digits}f}e{e:+d}"


def write_run_csv(run: RecursionRun, path) -> None:
    """Emit ``k,a_k,b_k`` rows, one per recursion index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "a_k", "b_k"])
        for i in range(len(run)):
            writer.writerow([i + 1, _a_repr(float(run.log_a[i])),
                             f"{run.b[i] + 0.0:.12g}"])
