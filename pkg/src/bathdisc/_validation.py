"""Small input-validation helpers shared by all modules."""

import math
import numbers

import numpy as np

from .exceptions import ConfigError


def check_scalar(x, name, *, min_val=None, max_val=None, strict_min=False,
                 integer=False):
    """Validate a finite real (or integer) scalar and return it.

    Mirrors ``sklearn.utils.check_scalar`` but raises :class:`ConfigError`.
    """
    if integer:
        if isinstance(x, bool) or not isinstance(x, (numbers.Integral, np.integer)):
            raise ConfigError(f"expected an integer, got {x!r}", name)
        x = int(x)
    else:
        if isinstance(x, bool) or not isinstance(x, (numbers.Real, np.floating, np.integer)):
            raise ConfigError(f"expected a real number, got {x!r}", name)
        x = float(x)
        if not math.isfinite(x):
            raise ConfigError(f"must be finite, got {x!r}", name)
    if min_val is not None:
        if strict_min and not x > min_val:
            raise ConfigError(f"must be > {min_val}, got {x!r}", name)
        if not strict_min and not x >= min_val:
            raise ConfigError(f"must be >= {min_val}, got {x!r}", name)
    if max_val is not None and not x <= max_val:
        raise ConfigError(f"must be <= {max_val}, got {x!r}", name)
    return x


def check_support(support, name="support"):
    try:
        a, b = (float(v) for v in support)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a pair [a, b], got {support!r}", name) from None
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ConfigError("support must be finite", name)
    if not a < b:
        raise ConfigError(f"support must satisfy a < b, got [{a}, {b}]", name)
    return a, b


def check_increasing(values, name, *, strict=True, min_size=1):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ConfigError("expected a one-dimensional sequence", name)
    if arr.size < min_size:
        raise ConfigError(f"needs at least {min_size} entries", name)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("entries must be finite", name)
    d = np.diff(arr)
    if strict and np.any(d <= 0):
        raise ConfigError("must be strictly increasing", name)
    if not strict and np.any(d < 0):
        raise ConfigError("must be non-decreasing", name)
    return arr


def check_precision(precision):
    if precision not in ("auto", "double", "extended"):
        raise ConfigError(
            f"expected 'auto', 'double' or 'extended', got {precision!r}",
            "precision")
    return precision
