"""Uniform time grids and sampled series."""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_scalar
from .exceptions import GridMismatchError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k * dt`` for ``k = 0 .. count - 1``."""

    dt: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "dt", check_scalar(self.dt, "dt", min_val=0.0, strict_min=True))
        object.__setattr__(self, "count", check_scalar(self.count, "count", min_val=1, integer=True))

    @classmethod
    def until(cls, t_end, dt):
        """Grid from 0 to (at least) ``t_end`` with spacing ``dt``."""
        t_end = check_scalar(t_end, "t_end", min_val=0.0)
        dt = check_scalar(dt, "dt", min_val=0.0, strict_min=True)
        return cls(dt, int(np.ceil(t_end / dt - 1e-9)) + 1)

    @property
    def times(self):
        return self.dt * np.arange(self.count)

    @property
    def t_end(self):
        return self.dt * (self.count - 1)

    def refine(self, factor):
        """Grid with ``factor`` times smaller spacing over the same span."""
        factor = check_scalar(factor, "factor", min_val=1, integer=True)
        return TimeGrid(self.dt / factor, (self.count - 1) * factor + 1)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Complex (or real) values sampled on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values)
        if vals.shape != (self.grid.count,):
            raise ValueError(
                f"expected {self.grid.count} values, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def times(self):
        return self.grid.times

    @property
    def is_real(self):
        return not np.iscomplexobj(self.values)

    def __len__(self):
        return self.grid.count

    def coarsen(self, factor):
        """Keep every ``factor``-th sample."""
        factor = check_scalar(factor, "factor", min_val=1, integer=True)
        n = (self.grid.count - 1) // factor + 1
        return TimeSeries(TimeGrid(self.grid.dt * factor, n),
                          self.values[::factor][:n], self.name, dict(self.meta))


def same_grid(a, b, rtol=1e-12):
    """True if two grids have the same count and (relatively) the same step."""
    return a.count == b.count and abs(a.dt - b.dt) <= rtol * max(a.dt, b.dt)


def check_same_grid(a, b):
    if not same_grid(a.grid, b.grid):
        raise GridMismatchError(
            f"grids differ: dt={a.grid.dt}, n={a.grid.count} vs "
            f"dt={b.grid.dt}, n={b.grid.count}")
