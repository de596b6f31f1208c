"""Shared value types: time series, index windows and change-point sets.

All public indices are 1-based and inclusive, matching the usual
statistical convention for observations Y_1, ..., Y_n.  A change-point at
``k`` marks the boundary between segments ``[.., k]`` and ``[k+1, ..]``,
i.e. observation ``k`` belongs to the left segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeSeries",
    "Window",
    "ChangePointSet",
    "segments_from_changepoints",
    "relative_changepoints",
]


@dataclass(frozen=True)
class TimeSeries:
    """An n x p matrix of time-ordered observations (row t = Y_t).

    Parameters
    ----------
    data : array_like
        Real-valued matrix of shape (n, p) or a 1-d array of length n
        which is treated as a single column.

    Raises
    ------
    ValueError
        If n < 2, p < 1 or any entry is non-finite.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError(f"series must be 1-d or 2-d, got ndim={arr.ndim}")
        n, p = arr.shape
        if n < 2:
            raise ValueError(f"series needs at least 2 observations, got n={n}")
        if p < 1:
            raise ValueError("series needs at least one column")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contains NaN or infinite entries")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, order=True)
class Window:
    """A contiguous inclusive index span (t1, t2), 1-based.

    Scan windows always have t1 < t2; singleton spans (t1 == t2) are
    allowed so that single-observation segments are representable.
    """

    t1: int
    t2: int

    def __post_init__(self):
        if not (1 <= self.t1 <= self.t2):
            raise ValueError(f"invalid window ({self.t1}, {self.t2})")

    @property
    def length(self) -> int:
        return self.t2 - self.t1 + 1


@dataclass(frozen=True)
class ChangePointSet:
    """A strictly increasing set of change-points for a series of length n.

    Every point k satisfies 1 <= k <= n-1; the change at k means the
    segment boundary sits between observations k and k+1.
    """

    points: tuple[int, ...]
    n: int

    def __post_init__(self):
        pts = tuple(int(k) for k in self.points)
        n = int(self.n)
        if n < 2:
            raise ValueError(f"series length n={n} too short")
        for k in pts:
            if not (1 <= k <= n - 1):
                raise ValueError(f"change-point {k} outside [1, {n - 1}]")
        if any(a >= b for a, b in zip(pts, pts[1:])):
            raise ValueError(f"change-points must be strictly increasing: {pts}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "n", n)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def segments_from_changepoints(cps: ChangePointSet) -> list[Window]:
    """Partition [1, n] into the contiguous segments induced by ``cps``.

    Returns [(1, k1), (k1+1, k2), ..., (km+1, n)]; segment lengths sum to n.
    """
    bounds = (0,) + cps.points + (cps.n,)
    return [Window(lo + 1, hi) for lo, hi in zip(bounds, bounds[1:])]


def relative_changepoints(cps: ChangePointSet) -> list[float]:
    """Convert integer change-points k_i to relative locations k_i / n."""
    return [k / cps.n for k in cps.points]
