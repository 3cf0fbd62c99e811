"""Periodic grid layouts and nonnegative scalar fields.

A field lives on the uniform periodic grid over ``[-L, L)^dim`` with ``n``
points per axis (``n`` a power of two).  Grid points double as cell centers:
cell ``i`` spans ``[x_i - h/2, x_i + h/2]`` with ``h = 2L/n``, and the origin
is itself a grid point, so the cell containing the singular point of a Hardy
weight is centered at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import pathlib

import numpy as np

from .exceptions import ConfigError
from .validation import check_dim, check_positive, check_power_of_two

# Negative values smaller than this (relative to field scale) are treated as
# roundoff and clamped; anything below is a genuine numerical failure.
NEGATIVE_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Layout of a periodic grid: dimension, half-width and points per axis."""

    dim: int
    half_width: float
    n: int

    def __post_init__(self):
        object.__setattr__(self, "dim", check_dim(self.dim))
        object.__setattr__(self, "half_width", check_positive(self.half_width, "half_width"))
        object.__setattr__(self, "n", check_power_of_two(self.n, "n"))

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.n

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    def axis(self):
        """Grid coordinates along one axis; includes the origin exactly."""
        return -self.half_width + self.spacing * np.arange(self.n)

    def mesh(self):
        """Coordinate arrays, shape ``(n,)`` for dim=1 or two ``(n, n)`` for dim=2."""
        ax = self.axis()
        if self.dim == 1:
            return (ax,)
        return np.meshgrid(ax, ax, indexing="ij")

    def radii(self):
        """Distance from the origin at every grid point."""
        if self.dim == 1:
            return np.abs(self.axis())
        xx, yy = self.mesh()
        return np.hypot(xx, yy)

    def wavenumbers(self):
        """|k| on the FFT grid matching ``numpy.fft.rfftn`` layout."""
        k_full = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)
        k_half = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.spacing)
        if self.dim == 1:
            return np.abs(k_half)
        return np.hypot(k_full[:, None], k_half[None, :])

    def index_of(self, point):
        """Grid index of the cell whose center is nearest to ``point``."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint((point + self.half_width) / self.spacing).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.n):
            raise ConfigError(f"point {point} lies outside the grid box")
        return tuple(int(i) for i in idx)


@dataclass(frozen=True)
class Field:
    """Nonnegative scalar field sampled on a :class:`GridSpec`."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.grid.n,) * self.grid.dim
        if values.shape != expected:
            raise ConfigError(f"values shape {values.shape} does not match grid {expected}")
        if not np.all(np.isfinite(values)):
            raise ConfigError("field values must be finite")
        scale = max(1.0, float(np.max(values, initial=0.0)))
        if np.min(values, initial=0.0) < -NEGATIVE_SLACK * scale:
            raise ConfigError("field values must be nonnegative")
        values = np.where(values < 0.0, 0.0, values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.grid.dim

    def sup(self):
        return float(np.max(self.values))

    def mass(self):
        return float(np.sum(self.values) * self.grid.cell_volume)

    def with_values(self, values):
        return Field(self.grid, values)

    def at(self, point):
        return float(self.values[self.grid.index_of(point)])


def zero_field(grid: GridSpec) -> Field:
    return Field(grid, np.zeros((grid.n,) * grid.dim))


def export_field(f: Field, path, theta: float | None = None) -> None:
    """Write a field as CSV plus a JSON sidecar describing the layout.

    CSV columns are ``x,value`` (dim=1) or ``x,y,value`` (dim=2), twelve
    significant digits, row order matching C-order iteration of the grid.
    The sidecar records ``{dim, L, n, theta}``; ``theta`` is the operator
    order the field was produced under, or null for raw data.
    """
    path = pathlib.Path(path)
    ax = f.grid.axis()
    with open(path, "w") as fh:
        if f.dim == 1:
            fh.write("x,value\n")
            for x, v in zip(ax, f.values):
                fh.write(f"{x:.12g},{v:.12g}\n")
        else:
            fh.write("x,y,value\n")
            for i, x in enumerate(ax):
                for j, y in enumerate(ax):
                    fh.write(f"{x:.12g},{y:.12g},{f.values[i, j]:.12g}\n")
    sidecar = {"dim": f.dim, "L": f.grid.half_width, "n": f.grid.n, "theta": theta}
    with open(path.with_suffix(path.suffix + ".json"), "w") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def import_field(path) -> Field:
    """Read a field written by :func:`export_field`."""
    path = pathlib.Path(path)
    with open(path.with_suffix(path.suffix + ".json")) as fh:
        sidecar = json.load(fh)
    grid = GridSpec(sidecar["dim"], sidecar["L"], sidecar["n"])
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = raw[:, -1].reshape((grid.n,) * grid.dim)
    return Field(grid, values)
