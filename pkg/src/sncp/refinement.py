"""Second-stage local refinement and per-feature attribution.

First-stage estimates isolate each change-point inside a local interval;
a plain CUSUM contrast maximized over the trimmed interval then sharpens
the location.  Attribution reruns a single change-point test per feature
on the same local interval, against the single_cp critical-value family.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ChangePointSet, TimeSeries
from .critical_values import CriticalValueTable, lookup
from .functionals import FunctionalSpec, PrecomputedState, precompute
from .statistic import single_cp_profile

__all__ = [
    "RefinementConfig",
    "default_trim",
    "cusum_stat",
    "refine",
    "attribute_features",
    "FeatureFlag",
]


def default_trim(n: int, epsilon: float) -> int:
    """ceil(epsilon * n / log n), at least 1."""
    return max(1, int(math.ceil(epsilon * n / math.log(n))))


@dataclass(frozen=True)
class RefinementConfig:
    functional: FunctionalSpec
    epsilon: float = 0.05
    trim: int | None = None  # None resolves to default_trim(n, epsilon)

    def resolve_trim(self, n: int) -> int:
        t = self.trim if self.trim is not None else default_trim(n, self.epsilon)
        if t < 1:
            raise ValueError(f"trim must be >= 1, got {t}")
        return t


def cusum_stat(state: PrecomputedState, k: int, s: int, e: int) -> np.ndarray:
    """CUSUM contrast sqrt((k-s+1)(e-k))/(e-s+1) * (theta(k+1..e) - theta(s..k))."""
    if not (max(1, state.eff_start) <= s <= k < e <= state.n):
        raise ValueError(f"need eff_start <= s <= k < e <= n, got ({s}, {k}, {e})")
    scale = math.sqrt((k - s + 1) * (e - k)) / (e - s + 1)
    return scale * (state.estimate(k + 1, e) - state.estimate(s, k))


def _cusum_argmax(state: PrecomputedState, s: int, e: int, lo: int, hi: int) -> int | None:
    """Argmax of the squared CUSUM norm over k in [lo, hi]; ties take the
    smallest k.  None when every candidate is degenerate."""
    ks = np.arange(lo, hi + 1)
    d = state.d
    delta = state.delta_pairs(np.full_like(ks, s), ks, np.full_like(ks, e)).reshape(-1, d)
    scale = np.sqrt((ks - s + 1.0) * (e - ks)) / (e - s + 1)
    norm2 = scale**2 * np.einsum("kd,kd->k", delta, delta)
    norm2 = np.where(np.isfinite(norm2), norm2, -np.inf)
    if not np.isfinite(norm2).any():
        return None
    return int(ks[np.argmax(norm2)])


def refine(series, cps: ChangePointSet, config: RefinementConfig) -> ChangePointSet:
    """Refine each point by the CUSUM argmax on its trimmed local interval.

    Point i is re-estimated on [k_{i-1} + trim, k_{i+1} - trim] (with the
    convention k_0 = 1 - trim and k_{m+1} = n + trim, so the first interval
    starts at 1 and the last ends at n), maximizing over k at least trim
    away from both interval ends.  A point whose interval is emptied by
    trimming, turns entirely degenerate, or would break the ordering keeps
    its first-stage location, with a warning.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(series)
    if len(cps) == 0:
        return cps
    n = series.n
    if cps.n != n:
        raise ValueError(f"change-point set refers to n={cps.n}, series has n={n}")
    trim = config.resolve_trim(n)
    state = precompute(series, config.functional)
    ext = (1 - trim,) + cps.points + (n + trim,)
    refined: list[int] = []
    for i in range(1, len(ext) - 1):
        orig = ext[i]
        s_i = max(ext[i - 1] + trim, state.eff_start)
        e_i = min(ext[i + 1] - trim, n)
        lo = max(s_i + trim, s_i)
        hi = min(e_i - trim, e_i - 1)
        new = orig
        if lo > hi or s_i >= e_i:
            warnings.warn(
                f"refinement interval around k={orig} emptied by trimming; keeping it",
                stacklevel=2,
            )
        else:
            cand = _cusum_argmax(state, s_i, e_i, lo, hi)
            if cand is None:
                warnings.warn(
                    f"all CUSUM contrasts degenerate around k={orig}; keeping it",
                    stacklevel=2,
                )
            else:
                new = cand
        if refined and new <= refined[-1]:
            warnings.warn(
                f"refined location {new} for k={orig} breaks ordering; keeping {orig}",
                stacklevel=2,
            )
            new = orig
        refined.append(new)
    return ChangePointSet(refined, n)


@dataclass(frozen=True)
class FeatureFlag:
    """Attribution verdict for one component at one change-point."""

    functional: FunctionalSpec
    stat: float
    threshold: float
    flagged: bool


def attribute_features(
    series,
    refined_cps: ChangePointSet,
    component_specs,
    table: CriticalValueTable,
    epsilon: float = 0.05,
    level: float = 0.90,
    trim: int | None = None,
) -> list[list[FeatureFlag]]:
    """Heuristic per-feature attribution at each change-point.

    For every point, each component functional gets a single change-point
    SN test on the trimmed local interval around the point, compared
    against the single_cp-family threshold for its dimension.  No
    multiplicity correction is applied; treat flags as exploratory.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(series)
    n = series.n
    t = trim if trim is not None else default_trim(n, epsilon)
    specs = list(component_specs)
    states = [precompute(series, spec) for spec in specs]
    thresholds = [
        lookup(table, epsilon, spec.output_dim(series.p), level, family="single_cp")
        for spec in specs
    ]
    ext = (1 - t,) + refined_cps.points + (n + t,)
    out: list[list[FeatureFlag]] = []
    for i in range(1, len(ext) - 1):
        s_i = max(ext[i - 1] + t, 1)
        e_i = min(ext[i + 1] - t, n)
        row: list[FeatureFlag] = []
        for spec, state, thr in zip(specs, states, thresholds):
            s_eff = max(s_i, state.eff_start)
            stat = 0.0
            if e_i - s_eff >= 1:
                stat = float(single_cp_profile(state, s_eff, e_i).max())
            row.append(FeatureFlag(spec, stat, thr, stat > thr))
        out.append(row)
    return out
