"""Input-validation helpers used by the estimators and module functions."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigError


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be a nonnegative finite number, got {value!r}")
    return float(value)


def check_in_open_interval(value, lo, hi, name):
    value = float(value)
    if not (lo < value < hi):
        raise ConfigError(f"{name} must lie in ({lo}, {hi}), got {value}")
    return value


def check_dim(dim):
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim!r}")
    return int(dim)


def check_theta(theta):
    theta = check_positive(theta, "theta")
    if theta > 2:
        raise ConfigError(f"theta must satisfy 0 < theta <= 2, got {theta}")
    return theta


def check_power_of_two(n, name, minimum=16):
    n = int(n)
    if n < minimum or (n & (n - 1)) != 0:
        raise ConfigError(f"{name} must be a power of two >= {minimum}, got {n}")
    return n


def as_point(x, dim):
    """Coerce ``x`` to a float vector of length ``dim``."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (dim,):
        raise ConfigError(f"expected a point of dimension {dim}, got shape {arr.shape}")
    return arr


def check_array_finite(values, name):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ConfigError(f"{name} must be finite everywhere")
    return values
