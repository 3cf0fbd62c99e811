"""Monotone Picard construction of mild solutions with blow-up detection.

The iteration is ``u_{k+1}(t_j) = S(t_j)μ + Σ_{i<j} Δt · S(t_j - s_i)[V_h u_k(s_i)^p]``
with left-endpoint weights on a uniform time grid.  Left-endpoint quadrature
keeps every term monotone in the iterate, which is what makes the scheme an
increasing construction rather than a generic fixed-point search; the panel
touching s = 0 is dropped because measure data carry no pointwise trace
there.  On a uniform grid the Duhamel sums obey the prefix recursion
``Σ̂_{j+1} = Ê · (Σ̂_j + F̂_j)`` in Fourier space, so one sweep costs O(M)
transforms rather than O(M²).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .exceptions import ConfigError, SolverError
from .fields import Field, GridSpec
from .kernel import KernelTable, default_table
from .measures import MeasureData, RadialLaw, _origin_cell_average
from .semigroup import Problem, apply_to_measure
from .validation import check_positive

_POTENTIAL_CACHE: dict[tuple, np.ndarray] = {}


def hardy_potential(grid: GridSpec, gamma: float) -> np.ndarray:
    """Cell-averaged ``|x|^{-γ}``: exact average on the origin cell (where the
    midpoint value would be infinite), midpoint elsewhere."""
    if not 0.0 < gamma < grid.dim:
        raise ConfigError(f"|x|^{-gamma} is not cell-integrable in dim {grid.dim}")
    key = (grid, gamma)
    if key not in _POTENTIAL_CACHE:
        mesh = grid.mesh()
        r = np.abs(mesh[0]) if grid.dim == 1 else np.hypot(*mesh)
        with np.errstate(divide="ignore"):
            v = np.where(r > 0.0, r ** -gamma, np.inf)
        v[grid.index_of([0.0] * grid.dim)] = _origin_cell_average(
            RadialLaw(grid.dim, 1.0, gamma, 0.0, 1.0), grid.spacing)
        v.flags.writeable = False
        _POTENTIAL_CACHE[key] = v
    return _POTENTIAL_CACHE[key]


def hardy_source(u: Field, gamma: float, p: float) -> Field:
    """The nonlinearity ``V_h(x) u(x)^p`` feeding the Duhamel integral."""
    return u.with_values(hardy_potential(u.grid, gamma) * u.values**p)


@dataclass(frozen=True)
class SolverConfig:
    time_nodes: int = 64
    tol: float = 1e-8
    max_iter: int = 200
    blowup_threshold: float = 1e10
    source_enabled: bool = True

    def __post_init__(self):
        if self.time_nodes < 2:
            raise ConfigError("need at least 2 time nodes")
        check_positive(self.tol, "tol")
        check_positive(self.blowup_threshold, "blowup_threshold")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")


@dataclass
class EvolutionState:
    """Iterate storage: arrays (node-major) at the positive time nodes."""

    problem: Problem
    grid: GridSpec
    times: np.ndarray              # t_1 .. t_M, uniform, t_M = horizon
    linear: np.ndarray             # S(t_j)mu, shape (M, *grid)
    values: np.ndarray             # current iterate, same shape
    k: int = 0

    def field_at(self, j: int) -> Field:
        return Field(self.grid, self.values[j])

    def node_index(self, t: float, tol: float = 1e-9) -> int:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > tol * max(1.0, self.times[-1]):
            raise SolverError(f"t={t} is not a solver node (nearest: {self.times[j]})")
        return j


@dataclass(frozen=True)
class SolveReport:
    verdict: str                   # Converged | BlowupProxy | IterationBudgetExceeded
    iterations: int
    sup_norm_history: tuple
    residual: float
    wrap_contamination_estimate: float
    monotonicity_margin: float
    state: EvolutionState = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.verdict == "Converged"


def _linear_part(mu: MeasureData, table: KernelTable, grid: GridSpec,
                 times: np.ndarray) -> np.ndarray:
    out = np.empty((len(times),) + (grid.n,) * grid.dim)
    for j, t in enumerate(times):
        out[j] = apply_to_measure(mu, table, float(t), grid).values
    return out


def duhamel_sweep(values: np.ndarray, linear: np.ndarray, grid: GridSpec,
                  problem: Problem, dt: float, source_enabled: bool = True,
                  ringing_tol: float = 1e-12) -> np.ndarray:
    """One Picard update over all nodes (the O(M)-transform prefix form).

    The singular source rings spectrally at barely-dissipated node spacings;
    ``ringing_tol`` (relative) bounds the dip allowed before raising — the
    output is clamped nonnegative regardless.
    """
    if not source_enabled:
        return linear.copy()
    shape = values.shape[1:]
    pot = hardy_potential(grid, problem.gamma)
    decay = np.exp(-dt * grid.wavenumbers() ** problem.theta)
    out = np.empty_like(values)
    out[0] = linear[0]
    acc = np.zeros(decay.shape, dtype=complex)
    for j in range(1, len(values)):
        acc = decay * (acc + np.fft.rfftn(pot * values[j - 1] ** problem.p))
        upd = linear[j] + dt * np.fft.irfftn(acc, s=shape, axes=tuple(range(len(shape))))
        slack = max(1e-12, ringing_tol) * max(1.0, float(np.max(upd)))
        if np.min(upd) < -slack:
            raise SolverError(f"Duhamel sweep produced {np.min(upd):.3e} < 0")
        out[j] = np.clip(upd, 0.0, None)
    if not np.all(np.isfinite(out)):
        raise SolverError("non-finite values in Duhamel sweep")
    return out


def iterate_to_fixed_point(mu: MeasureData, problem: Problem,
                           config: SolverConfig = SolverConfig(),
                           grid: GridSpec | None = None,
                           table: KernelTable | None = None) -> SolveReport:
    """Run the monotone iteration until convergence, blow-up proxy, or budget.

    Converged: sup-norm change ≤ tol·(1 + sup of the iterate).  BlowupProxy:
    the iterate exceeds ``blowup_threshold``, or doubles on three consecutive
    sweeps while already 10³ above the linear evolution.  The returned state
    carries the final iterate at every node.
    """
    if grid is None:
        grid = GridSpec(problem.dim, 20.0, 1024 if problem.dim == 1 else 256)
    if table is None:
        table = default_table(problem.dim, problem.theta)
    M = config.time_nodes
    times = np.linspace(0.0, problem.horizon, M + 1)[1:]
    dt = times[0]
    linear = _linear_part(mu, table, grid, times)
    base_sup = float(linear.max(initial=0.0))
    # singular data (law spike or atoms) feed a spiky source into the sweep,
    # which rings at barely-dissipated dt; smooth densities get no slack
    singular = mu.law is not None or any(m > 0 for _, m in mu.atoms)
    ringing = 1e-7 if singular else 1e-12

    state = EvolutionState(problem, grid, times, linear, linear.copy())
    history = [base_sup]
    margin = np.inf
    residual = np.inf
    verdict = "IterationBudgetExceeded"
    doublings = 0
    for k in range(1, config.max_iter + 1):
        new = duhamel_sweep(state.values, linear, grid, problem, dt,
                            config.source_enabled, ringing_tol=ringing)
        diff = new - state.values
        margin = min(margin, float(diff.min()))
        sup_new = float(new.max())
        # dips within the ringing slack are Gibbs artifacts of the spectral
        # step, not scheme failures; the true margin is reported either way
        if margin < -ringing * max(1.0, sup_new):
            raise SolverError(f"monotonicity violated by {margin:.3e}")
        residual = float(np.abs(diff).max())
        state.values = new
        state.k = k
        history.append(sup_new)
        if sup_new > config.blowup_threshold:
            verdict = "BlowupProxy"
            break
        if len(history) >= 2 and history[-1] >= 2.0 * history[-2] \
                and sup_new > 1e3 * max(base_sup, 1e-300):
            doublings += 1
            if doublings >= 3:
                verdict = "BlowupProxy"
                break
        else:
            doublings = 0
        if residual <= config.tol * (1.0 + sup_new):
            verdict = "Converged"
            break

    half_box_scaled = (grid.half_width / 2.0) * problem.horizon ** (-1.0 / problem.theta)
    wrap = max(0.0, table.total_mass - table.ball_mass_unit(half_box_scaled))
    return SolveReport(verdict=verdict, iterations=state.k,
                       sup_norm_history=tuple(history), residual=residual,
                       wrap_contamination_estimate=wrap,
                       monotonicity_margin=margin, state=state)


class PicardSolver(BaseEstimator):
    """Estimator facade: configure the problem once, ``fit`` on a measure."""

    def __init__(self, dim=1, theta=2.0, gamma=0.5, p=3.0, horizon=0.5,
                 half_width=20.0, n=None, time_nodes=64, tol=1e-8,
                 max_iter=200, blowup_threshold=1e10, source_enabled=True):
        self.dim = dim
        self.theta = theta
        self.gamma = gamma
        self.p = p
        self.horizon = horizon
        self.half_width = half_width
        self.n = n
        self.time_nodes = time_nodes
        self.tol = tol
        self.max_iter = max_iter
        self.blowup_threshold = blowup_threshold
        self.source_enabled = source_enabled

    def _problem(self) -> Problem:
        return Problem(self.dim, self.theta, self.gamma, self.p, self.horizon)

    def fit(self, mu: MeasureData, y=None):
        problem = self._problem()
        n = self.n if self.n is not None else (1024 if self.dim == 1 else 256)
        grid = GridSpec(self.dim, self.half_width, n)
        cfg = SolverConfig(self.time_nodes, self.tol, self.max_iter,
                           self.blowup_threshold, self.source_enabled)
        self.report_ = iterate_to_fixed_point(mu, problem, cfg, grid)
        return self

    def _report(self) -> SolveReport:
        if not hasattr(self, "report_"):
            raise NotFittedError("call fit() on a measure first")
        return self.report_

    @property
    def verdict_(self) -> str:
        return self._report().verdict

    def solution(self, j: int = -1) -> Field:
        return self._report().state.field_at(j)
