"""Segmentation accuracy: directed Hausdorff distances and adjusted Rand index.

Change-point sets are compared in relative units k/n.  Both sets are
augmented with the boundary points {0, 1} before computing the directed
distances, which keeps d1/d2 defined when either set is empty (an empty
estimate is "as far as the nearest boundary" from every missed point).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ChangePointSet

__all__ = ["MetricsReport", "hausdorff", "ari", "evaluate"]


@dataclass(frozen=True)
class MetricsReport:
    """d1 = over-segmentation, d2 = under-segmentation, dh = max of both."""

    d1: float
    d2: float
    dh: float
    ari: float


def _relative(cps, n=None) -> tuple[np.ndarray, int]:
    if isinstance(cps, ChangePointSet):
        return np.asarray(cps.points, dtype=float) / cps.n, cps.n
    if n is None:
        raise ValueError("n is required when passing a bare sequence of points")
    return np.asarray(list(cps), dtype=float) / n, int(n)


def hausdorff(true_cps, est_cps, n: int | None = None) -> tuple[float, float, float]:
    """(d1, d2, dH) in relative units.

    d1 is the largest distance from an estimated point to the true set,
    d2 the largest distance from a true point to the estimated set; both
    sets include the boundaries {0, 1}.
    """
    rel_t, n_t = _relative(true_cps, n)
    rel_e, n_e = _relative(est_cps, n if n is not None else n_t)
    if n_t != n_e:
        raise ValueError(f"sets refer to different lengths: {n_t} vs {n_e}")
    aug_t = np.concatenate([[0.0, 1.0], rel_t])
    aug_e = np.concatenate([[0.0, 1.0], rel_e])
    dist = np.abs(aug_e[:, None] - aug_t[None, :])
    d1 = float(dist.min(axis=1).max())
    d2 = float(dist.min(axis=0).max())
    return d1, d2, max(d1, d2)


def _labels(points: np.ndarray, n: int) -> np.ndarray:
    return np.searchsorted(points, np.arange(1, n + 1), side="left")


def ari(cps_a, cps_b, n: int | None = None) -> float:
    """Adjusted Rand index between the segmentations induced by two sets.

    Identical partitions give 1 (including the both-empty case); the
    expected-index correction makes a single-segment partition score 0
    against anything else.
    """
    rel_a, n_a = _relative(cps_a, n)
    rel_b, n_b = _relative(cps_b, n if n is not None else n_a)
    if n_a != n_b:
        raise ValueError(f"sets refer to different lengths: {n_a} vs {n_b}")
    n_obs = n_a
    pts_a = np.asarray(np.round(rel_a * n_obs), dtype=int)
    pts_b = np.asarray(np.round(rel_b * n_obs), dtype=int)
    la = _labels(pts_a, n_obs)
    lb = _labels(pts_b, n_obs)
    ka = la.max() + 1
    kb = lb.max() + 1
    cont = np.bincount(la * kb + lb, minlength=ka * kb).reshape(ka, kb)

    def comb2(x):
        x = np.asarray(x, dtype=float)
        return x * (x - 1) / 2.0

    sum_cells = comb2(cont).sum()
    sum_rows = comb2(cont.sum(axis=1)).sum()
    sum_cols = comb2(cont.sum(axis=0)).sum()
    total = comb2(n_obs)
    expected = sum_rows * sum_cols / total
    max_index = (sum_rows + sum_cols) / 2.0
    denom = max_index - expected
    if denom == 0.0:
        return 1.0
    return float((sum_cells - expected) / denom)


def evaluate(true_cps, est_cps, n: int | None = None) -> MetricsReport:
    """Full accuracy report for an estimated set against the truth."""
    d1, d2, dh = hausdorff(true_cps, est_cps, n)
    return MetricsReport(d1=d1, d2=d2, dh=dh, ari=ari(true_cps, est_cps, n))
