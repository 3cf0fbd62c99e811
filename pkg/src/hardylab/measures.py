"""Nonnegative initial data: atoms, grid densities, and singular radial laws.

The admissible data are finite nonnegative measures composed of point masses,
a sampled density on a periodic grid, and/or an analytic radial law

    c |x - x0|^{-b} [log(e + 1/|x - x0|)]^{-q}   on |x - x0| <= truncation.

The law component exists so that ball measures and ball averages of the
singular profiles are computed from radial primitives (exact for ``q = 0``)
rather than from grid sums, whose O(h²) staircase error would drown the
criterion statistics near the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.integrate import quad

from .exceptions import ConfigError
from .fields import Field, GridSpec
from .validation import as_point, check_dim, check_nonnegative, check_positive

BALL_VOLUME = {1: 2.0, 2: math.pi}


def _log_weight(s, q):
    if q == 0.0:
        return np.ones_like(s)
    return np.log(np.e + 1.0 / s) ** (-q)


@dataclass(frozen=True)
class RadialLaw:
    """Truncated radial density ``c r^{-b} [log(e + 1/r)]^{-q}`` around a center."""

    dim: int
    amplitude: float
    decay: float = 0.0
    log_exponent: float = 0.0
    truncation: float = math.inf
    center: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "dim", check_dim(self.dim))
        check_nonnegative(self.amplitude, "amplitude")
        check_nonnegative(self.log_exponent, "log_exponent")
        # r^{-b} needs b < N; the borderline b = N is integrable only with a
        # log correction stronger than the first power
        if not 0.0 <= self.decay <= self.dim or (
                self.decay == self.dim and self.log_exponent <= 1.0):
            raise ConfigError(f"decay exponent {self.decay} not integrable in dim {self.dim}")
        if not self.truncation > 0.0:
            raise ConfigError("truncation radius must be positive")
        if math.isinf(self.truncation) and self.decay == 0.0 and self.amplitude > 0.0:
            raise ConfigError("untruncated bounded law has infinite mass")
        center = tuple(float(v) for v in (self.center or (0.0,) * self.dim))
        if len(center) != self.dim:
            raise ConfigError(f"center must have {self.dim} coordinates")
        object.__setattr__(self, "center", center)

    def density_at_radius(self, r):
        """Density value at distance ``r`` from the center (0 past truncation)."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(r > 0.0, self.amplitude * r ** (-self.decay)
                           * _log_weight(np.maximum(r, 1e-300), self.log_exponent),
                           np.inf if self.decay > 0 else self.amplitude)
        return np.where(r <= self.truncation, out, 0.0)

    def radial_primitive(self, r_hi: float, r_lo: float = 0.0) -> float:
        """``∫ s^{N-1} dens(s) ds`` over ``[r_lo, r_hi]`` (no surface factor)."""
        hi = min(float(r_hi), self.truncation)
        lo = float(r_lo)
        if hi <= lo or self.amplitude == 0.0:
            return 0.0
        e = self.dim - 1 - self.decay
        if self.log_exponent == 0.0:
            return self.amplitude * (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
        if e == -1.0:
            # borderline decay: substitute u = log s, integrable for q > 1
            q = self.log_exponent
            val = quad(lambda u: float(np.logaddexp(1.0, -u)) ** (-q),
                       -math.inf if lo == 0.0 else math.log(lo), math.log(hi),
                       limit=400)[0]
        else:
            val = quad(lambda s: s**e * math.log(math.e + 1.0 / s) ** (-self.log_exponent),
                       lo, hi, limit=200)[0]
        return self.amplitude * val

    def powered(self, r: float) -> "RadialLaw":
        """The law of the pointwise power ``dens^r`` (same support)."""
        check_positive(r, "power")
        return replace(self, amplitude=self.amplitude**r, decay=self.decay * r,
                       log_exponent=self.log_exponent * r)

    def total_mass(self) -> float:
        surface = 2.0 if self.dim == 1 else 2.0 * math.pi
        return surface * self.radial_primitive(self.truncation)


@dataclass(frozen=True)
class MeasureData:
    """Finite nonnegative measure: atoms + optional grid density + optional law."""

    dim: int
    atoms: tuple = ()
    density: Field | None = None
    law: RadialLaw | None = None

    def __post_init__(self):
        object.__setattr__(self, "dim", check_dim(self.dim))
        cleaned = []
        for loc, mass in self.atoms:
            cleaned.append((tuple(float(v) for v in as_point(loc, self.dim)),
                            check_nonnegative(float(mass), "atom mass")))
        object.__setattr__(self, "atoms", tuple(cleaned))
        if self.density is not None and self.density.dim != self.dim:
            raise ConfigError("density dimension mismatch")
        if self.law is not None and self.law.dim != self.dim:
            raise ConfigError("law dimension mismatch")

    def total_mass(self) -> float:
        total = sum(m for _, m in self.atoms)
        if self.density is not None:
            total += self.density.mass()
        if self.law is not None:
            total += self.law.total_mass()
        return total

    def is_zero(self) -> bool:
        return self.total_mass() == 0.0

    def scaled(self, lam: float) -> "MeasureData":
        """The measure ``lam * mu`` (exact 1-homogeneity)."""
        check_nonnegative(lam, "scale")
        density = (None if self.density is None
                   else self.density.with_values(self.density.values * lam))
        law = None if self.law is None else replace(self.law, amplitude=self.law.amplitude * lam)
        return MeasureData(self.dim, tuple((loc, m * lam) for loc, m in self.atoms),
                           density, law)


def translate(mu: MeasureData, z) -> MeasureData:
    """Shift every component of ``mu`` by the vector ``z``, preserving masses.

    Grid densities move by whole cells plus a linear-interpolation remainder
    (a convex combination, so nonnegativity survives); the shifted support
    must stay inside the central half of the box.
    """
    z = as_point(z, mu.dim)
    atoms = tuple((tuple(np.add(loc, z)), m) for loc, m in mu.atoms)
    law = None if mu.law is None else replace(mu.law, center=tuple(np.add(mu.law.center, z)))
    density = None
    if mu.density is not None:
        f = mu.density
        shift = z / f.grid.spacing
        whole = np.floor(shift).astype(int)
        frac = shift - whole
        vals = f.values
        for ax in range(mu.dim):
            vals = np.roll(vals, whole[ax], axis=ax)
            if frac[ax] > 0.0:
                vals = (1.0 - frac[ax]) * vals + frac[ax] * np.roll(vals, 1, axis=ax)
        density = f.with_values(vals)
        support = np.abs(np.stack(f.grid.mesh())) if mu.dim == 2 else np.abs(f.grid.mesh()[0])
        extent = support.max(axis=0) if mu.dim == 2 else support
        live = vals > 1e-15 * max(vals.max(), 1e-300)
        if np.any(live) and float(np.max(np.where(live, extent, 0.0))) > f.grid.half_width / 2:
            raise ConfigError("translated density support escapes [-L/2, L/2]")
    return MeasureData(mu.dim, atoms, density, law)


# ---------------------------------------------------------------------------
# exact geometry helpers

def _sqrt_primitive(u, radius):
    # antiderivative of sqrt(radius^2 - u^2), u clipped to the disk
    u = min(max(u, -radius), radius)
    return 0.5 * (u * math.sqrt(max(radius**2 - u**2, 0.0))
                  + radius**2 * math.asin(u / radius))


def disk_rect_overlap(center, radius, x0, x1, y0, y1) -> float:
    """Exact area of ``disk(center, radius) ∩ [x0,x1]×[y0,y1]``."""
    cx, cy = center
    x0, x1, y0, y1 = x0 - cx, x1 - cx, y0 - cy, y1 - cy
    if radius <= 0.0 or x0 >= radius or x1 <= -radius or y0 >= radius or y1 <= -radius:
        return 0.0

    def half_width_breaks(y):
        return math.sqrt(radius**2 - y**2) if abs(y) < radius else 0.0

    cuts = {x0, x1, -radius, radius}
    for y in (y0, y1):
        if abs(y) < radius:
            w = math.sqrt(radius**2 - y**2)
            cuts.update((-w, w))
    cuts = sorted(c for c in cuts if x0 <= c <= x1)
    area = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        mid = 0.5 * (lo + hi)
        s_mid = half_width_breaks(mid)
        top_curved = y1 > s_mid      # top edge of the strip is the circle
        bot_curved = y0 < -s_mid     # bottom edge is the circle
        top = min(y1, s_mid)
        bot = max(y0, -s_mid)
        if top <= bot:
            continue
        piece = 0.0
        piece += (_sqrt_primitive(hi, radius) - _sqrt_primitive(lo, radius)
                  if top_curved else y1 * (hi - lo))
        piece -= (-(_sqrt_primitive(hi, radius) - _sqrt_primitive(lo, radius))
                  if bot_curved else y0 * (hi - lo))
        area += piece
    return max(area, 0.0)


def _arc_angle(rho, d, sigma):
    # angular measure of the circle of radius rho (around the law center)
    # inside the ball B(z, sigma) with d = |z - center|
    if rho <= 0.0:
        return 2.0 * math.pi if d < sigma else 0.0
    if rho <= sigma - d:
        return 2.0 * math.pi
    if rho >= d + sigma or rho <= d - sigma:
        return 0.0
    cosang = (rho**2 + d**2 - sigma**2) / (2.0 * rho * d)
    return 2.0 * math.acos(min(1.0, max(-1.0, cosang)))


# ---------------------------------------------------------------------------
# ball measures and averages

def _law_ball_measure(law: RadialLaw, z, sigma) -> float:
    d = float(np.linalg.norm(np.subtract(as_point(z, law.dim), law.center)))
    if law.dim == 1:
        lo, hi = max(d - sigma, -law.truncation), min(d + sigma, law.truncation)
        if hi <= lo:
            return 0.0
        if lo >= 0.0:
            return law.radial_primitive(hi, lo)
        if hi <= 0.0:
            return law.radial_primitive(-lo, -hi)
        return law.radial_primitive(hi) + law.radial_primitive(-lo)
    full = min(max(sigma - d, 0.0), law.truncation)
    total = 2.0 * math.pi * law.radial_primitive(full)
    lo = max(abs(d - sigma), full)
    hi = min(d + sigma, law.truncation)
    if hi > lo and d > 0.0:
        total += quad(lambda r: r * float(law.density_at_radius(r)) * _arc_angle(r, d, sigma),
                      lo, hi, points=[lo, hi], limit=200)[0]
    return total


def _grid_ball_measure(f: Field, z, sigma) -> float:
    g = f.grid
    h = g.spacing
    z = as_point(z, f.dim)
    ax = g.axis()
    if f.dim == 1:
        lo_edge, hi_edge = ax - h / 2, ax + h / 2
        cover = np.clip(np.minimum(hi_edge, z[0] + sigma) - np.maximum(lo_edge, z[0] - sigma),
                        0.0, h)
        return float(np.dot(f.values, cover))
    i_lo = max(int(math.floor((z[0] - sigma + g.half_width) / h)) - 1, 0)
    i_hi = min(int(math.ceil((z[0] + sigma + g.half_width) / h)) + 1, g.n - 1)
    j_lo = max(int(math.floor((z[1] - sigma + g.half_width) / h)) - 1, 0)
    j_hi = min(int(math.ceil((z[1] + sigma + g.half_width) / h)) + 1, g.n - 1)
    total = 0.0
    r_in = sigma - h * math.sqrt(0.5)  # cells whose center is this close are fully inside
    for i in range(i_lo, i_hi + 1):
        x = ax[i]
        for j in range(j_lo, j_hi + 1):
            v = f.values[i, j]
            if v == 0.0:
                continue
            y = ax[j]
            dist = math.hypot(x - z[0], y - z[1])
            if dist <= r_in:
                total += v * h * h
            elif dist < sigma + h:
                total += v * disk_rect_overlap(z, sigma, x - h / 2, x + h / 2,
                                               y - h / 2, y + h / 2)
    return total


def ball_measure(mu: MeasureData, z, sigma: float) -> float:
    """``mu(B(z, sigma))`` with the open-ball convention for atoms.

    Grid densities weight boundary cells by their exactly covered fraction;
    law components integrate the radial primitive over the covered arcs.
    """
    sigma = check_positive(sigma, "sigma")
    z = as_point(z, mu.dim)
    total = sum(m for loc, m in mu.atoms
                if float(np.linalg.norm(np.subtract(loc, z))) < sigma)
    if mu.law is not None:
        total += _law_ball_measure(mu.law, z, sigma)
    if mu.density is not None:
        total += _grid_ball_measure(mu.density, z, sigma)
    return float(total)


def ball_average_power(z, sigma: float, a: float, dim: int) -> float:
    """Average of ``|x|^a`` over ``B(z, sigma)``; analytic at ``z = 0``.

    Requires ``a > -dim`` for integrability when the ball covers the origin.
    """
    dim = check_dim(dim)
    sigma = check_positive(sigma, "sigma")
    if a <= -dim:
        raise ConfigError(f"|x|^{a} is not integrable over balls in dim {dim}")
    z = as_point(z, dim)
    d = float(np.linalg.norm(z))
    if d == 0.0:
        return dim * sigma**a / (dim + a)
    if dim == 1:
        prim = lambda x: math.copysign(abs(x) ** (1.0 + a), x) / (1.0 + a)
        return (prim(d + sigma) - prim(d - sigma)) / (2.0 * sigma)
    total = 0.0
    full = max(sigma - d, 0.0)
    if full > 0.0:
        total += 2.0 * math.pi * full ** (2.0 + a) / (2.0 + a)
    lo, hi = abs(d - sigma), d + sigma
    total += quad(lambda r: r ** (1.0 + a) * _arc_angle(r, d, sigma), lo, hi,
                  points=[lo, hi], limit=200)[0]
    return total / (math.pi * sigma**2)


# ---------------------------------------------------------------------------
# grid rendering

def _origin_cell_average(law: RadialLaw, h: float) -> float:
    """Exact cell average of the law over the grid cell holding its center."""
    if law.dim == 1:
        return 2.0 * law.radial_primitive(h / 2.0) / h
    if law.log_exponent == 0.0 and law.amplitude > 0.0:
        b = law.decay
        # square split into 8 wedges; radial integral exact per wedge
        ang = quad(lambda phi: math.cos(phi) ** (b - 2.0), 0.0, math.pi / 4.0)[0]
        return 8.0 * law.amplitude * (h / 2.0) ** (2.0 - b) / ((2.0 - b) * h * h) * ang
    # log-corrected laws: radial quadrature over the equal-area disk
    return 2.0 * math.pi * law.radial_primitive(h / math.sqrt(math.pi)) / h**2


def render_measure(mu: MeasureData, grid: GridSpec) -> Field:
    """Cell-sampled Field of the density components (atoms are not renderable).

    Law cells use the midpoint value except the cell containing the law
    center, which gets its exact average — the singularity is the point of
    the whole construction and midpoint would miss it entirely.
    """
    if any(m > 0 for _, m in mu.atoms):
        raise ConfigError("atoms have no grid rendering; apply the kernel directly")
    if mu.dim != grid.dim:
        raise ConfigError("grid dimension mismatch")
    values = np.zeros((grid.n,) * grid.dim)
    if mu.density is not None:
        if mu.density.grid != grid:
            raise ConfigError("density grid mismatch")
        values = values + mu.density.values
    if mu.law is not None and mu.law.amplitude > 0.0:
        values = values + _render_law(mu.law, grid)
    return Field(grid, values)


def _render_law(law: RadialLaw, grid: GridSpec) -> np.ndarray:
    h = grid.spacing
    if (max(abs(c) for c in law.center) + min(law.truncation, grid.half_width / 2)
            > grid.half_width / 2 + 1e-12):
        raise ConfigError("law support escapes [-L/2, L/2]")
    mesh = grid.mesh()
    if law.dim == 1:
        r = np.abs(mesh[0] - law.center[0])
    else:
        r = np.hypot(mesh[0] - law.center[0], mesh[1] - law.center[1])
    with np.errstate(divide="ignore"):
        vals = np.where(r > 0.0, law.density_at_radius(np.maximum(r, 1e-300)), 0.0)

    if law.dim == 1:
        # exact cell averages where midpoint is poor: near the singularity
        # and across the truncation edge (radial primitive clamps there)
        fix = (r <= min(4.0, law.truncation + h)) | (np.abs(r - law.truncation) <= h)
        for i in np.nonzero(fix)[0]:
            vals[i] = (law.radial_primitive(r[i] + h / 2, max(r[i] - h / 2, 0.0))) / h
    else:
        x_rel = mesh[0] - law.center[0]
        y_rel = mesh[1] - law.center[1]
        near = (r > 0.0) & (r <= 8.0 * h)
        if np.any(near):
            u, w = np.polynomial.legendre.leggauss(24)
            off = u * h / 2.0
            w2 = np.outer(w, w).ravel() / 4.0  # cell-average weights
            ox, oy = np.meshgrid(off, off, indexing="ij")
            px = x_rel[near][:, None] + ox.ravel()[None, :]
            py = y_rel[near][:, None] + oy.ravel()[None, :]
            vals[near] = law.density_at_radius(np.hypot(px, py)) @ w2
        if law.truncation < grid.half_width:
            edge = np.abs(r - law.truncation) <= h
            for i, j in zip(*np.nonzero(edge)):
                frac = disk_rect_overlap(law.center, law.truncation,
                                         mesh[0][i, j] - h / 2, mesh[0][i, j] + h / 2,
                                         mesh[1][i, j] - h / 2, mesh[1][i, j] + h / 2) / h**2
                dens = float(law.density_at_radius(min(r[i, j], law.truncation)))
                vals[i, j] = dens * frac
    idx = grid.index_of(law.center)
    vals[idx] = _origin_cell_average(law, h)
    return vals
