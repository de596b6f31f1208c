"""Multiple change-point estimation strategies built on the SN statistic.

``sncp_detect`` is the main algorithm: on each segment it maximizes the
nested-local-window statistic over k, splits when the maximum exceeds the
threshold, and recurses on (s, k*) and (k*+1, e).  The remaining methods
combine the same test statistic with classical binary segmentation
(``snbs``), a single smallest local window (``snlocal``), random intervals
(``snwbs``) and deterministic seeded intervals (``snsbs``); they exist
mainly as baselines, since binary segmentation demonstrably loses power
under non-monotonic changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ChangePointSet, TimeSeries, Window
from .functionals import FunctionalSpec, precompute
from .statistic import local_profile, nested_profile, single_cp_profile

__all__ = [
    "DetectionConfig",
    "DetectionRecord",
    "NodeTrace",
    "DetectionResult",
    "detect",
    "sncp_detect",
    "snbs_detect",
    "snlocal_detect",
    "snwbs_detect",
    "snsbs_detect",
    "seeded_intervals",
]

_METHODS = ("sncp", "snbs", "snlocal", "snwbs", "snsbs")

DEFAULT_WBS_INTERVALS = 1000
DEFAULT_SBS_DECAY = 0.5 ** 0.25


@dataclass(frozen=True)
class DetectionConfig:
    """Detection parameters shared by all methods.

    epsilon sets the window size h = floor(n * epsilon); the threshold is
    the critical value K the maximal statistic is compared against.  For
    ``snwbs`` the interval count and RNG seed apply; for ``snsbs`` the
    seeded-interval decay rate.  ``min_interval`` overrides the default
    floor(n * epsilon) minimum interval length of the interval methods.
    """

    functional: FunctionalSpec
    threshold: float
    epsilon: float = 0.05
    method: str = "sncp"
    intervals: int = DEFAULT_WBS_INTERVALS
    decay: float = DEFAULT_SBS_DECAY
    seed: int = 0
    min_interval: int | None = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {_METHODS}")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not (self.threshold > 0):
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.intervals < 1:
            raise ValueError("interval count must be >= 1")
        if not (0.0 < self.decay < 1.0):
            raise ValueError(f"decay rate must be in (0, 1), got {self.decay}")

    def window_size(self, n: int) -> int:
        return int(math.floor(n * self.epsilon))


@dataclass(frozen=True)
class DetectionRecord:
    """One detected point: location, statistic, maximizing window, and the
    segment it was found in (in detection order)."""

    k: int
    stat: float
    window: Window | None
    segment: Window
    order: int


@dataclass(frozen=True)
class NodeTrace:
    """Per-recursion-node diagnostics: segment, best candidate and verdict."""

    s: int
    e: int
    k_best: int | None
    stat_best: float
    stopped: str  # "short" | "threshold" | "split"
    stats: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class DetectionResult:
    changepoints: ChangePointSet
    records: tuple[DetectionRecord, ...]
    config: DetectionConfig
    trace: tuple[NodeTrace, ...] | None = None

    @property
    def m(self) -> int:
        return len(self.changepoints)


def _bind(series, config: DetectionConfig):
    if not isinstance(series, TimeSeries):
        series = TimeSeries(series)
    h = config.window_size(series.n)
    if h < 2:
        raise ValueError(
            f"window size floor(n*epsilon) = {h} too small; need >= 2 "
            f"(n={series.n}, epsilon={config.epsilon})"
        )
    state = precompute(series, config.functional)
    return state, h


def _result(state, config, records, trace):
    cps = ChangePointSet(sorted(r.k for r in records), state.n)
    return DetectionResult(
        changepoints=cps,
        records=tuple(records),
        config=config,
        trace=tuple(trace) if trace is not None else None,
    )


def sncp_detect(series, config: DetectionConfig, collect_trace: bool = False) -> DetectionResult:
    """Nested local-window segmentation.

    On each segment [s, e]: stop if shorter than 2h; otherwise find the k
    maximizing the nested-window statistic (grid anchored at k globally and
    clipped to the segment), stop if it does not exceed the threshold, else
    record k and recurse on (s, k) and (k+1, e).  Argmax ties break toward
    the smallest k.
    """
    state, h = _bind(series, config)
    records: list[DetectionRecord] = []
    trace: list[NodeTrace] = []

    def visit(s: int, e: int) -> None:
        if e - s + 1 < 2 * h:
            trace.append(NodeTrace(s, e, None, 0.0, "short"))
            return
        stats, wins = nested_profile(state, s, e, h)
        i = int(np.argmax(stats))
        k, t = s + i, float(stats[i])
        kept = stats if collect_trace else None
        if t <= config.threshold:
            trace.append(NodeTrace(s, e, k, t, "threshold", kept))
            return
        trace.append(NodeTrace(s, e, k, t, "split", kept))
        records.append(DetectionRecord(k, t, wins[i], Window(s, e), len(records)))
        visit(s, k)
        visit(k + 1, e)

    visit(1, state.n)
    return _result(state, config, records, trace)


def snbs_detect(series, config: DetectionConfig, collect_trace: bool = False) -> DetectionResult:
    """Classical binary segmentation with the full-segment SN statistic.

    Each segment is scanned with the single change-point statistic over the
    whole segment (no window grid); the minimum segment length 2h is kept
    as the stop rule for comparability with ``sncp_detect``.
    """
    state, h = _bind(series, config)
    records: list[DetectionRecord] = []
    trace: list[NodeTrace] = []

    def visit(s: int, e: int) -> None:
        if e - s + 1 < 2 * h:
            trace.append(NodeTrace(s, e, None, 0.0, "short"))
            return
        stats = single_cp_profile(state, s, e)
        i = int(np.argmax(stats))
        k, t = s + i, float(stats[i])
        kept = stats if collect_trace else None
        if t <= config.threshold:
            trace.append(NodeTrace(s, e, k, t, "threshold", kept))
            return
        trace.append(NodeTrace(s, e, k, t, "split", kept))
        records.append(DetectionRecord(k, t, Window(s, e), Window(s, e), len(records)))
        visit(s, k)
        visit(k + 1, e)

    visit(1, state.n)
    return _result(state, config, records, trace)


def snlocal_detect(series, config: DetectionConfig, collect_trace: bool = False) -> DetectionResult:
    """Pure local-window detection on the smallest window only.

    k is declared a change-point when its smallest-window statistic exceeds
    the threshold and is the maximum over the h-neighborhood {j: |j-k|<=h}
    (ties toward the smallest k).  Thresholds for this method come from the
    ``local`` critical-value family.
    """
    state, h = _bind(series, config)
    n = state.n
    records: list[DetectionRecord] = []
    if n - state.eff_start + 1 >= 2 * h:
        stats, _ = local_profile(state, 1, n, h)
        cand = np.flatnonzero(stats > config.threshold)
        for k0 in cand:
            lo = max(0, k0 - h)
            hi = min(n - 1, k0 + h)
            neigh = stats[lo : hi + 1]
            t = stats[k0]
            if t < neigh.max():
                continue
            left = stats[lo:k0]
            if left.size and left.max() >= t:
                continue  # an equal or larger value earlier in the neighborhood wins
            k = int(k0) + 1
            records.append(
                DetectionRecord(
                    k, float(t), Window(k - h + 1, k + h), Window(1, n), len(records)
                )
            )
    return _result(state, config, records, None)


def seeded_intervals(n: int, decay: float, min_length: int) -> list[Window]:
    """Deterministic seeded interval collection.

    Layer k = 0, 1, ... holds 2*ceil((1/decay)^k) - 1 intervals of length
    ceil(n * decay^k), evenly spaced over [1, n]; layers stop once the
    length drops below ``min_length``.  Duplicates are removed and the
    result is sorted by (t1, t2).
    """
    if not (0.0 < decay < 1.0):
        raise ValueError(f"decay rate must be in (0, 1), got {decay}")
    min_length = max(int(min_length), 2)
    out: set[tuple[int, int]] = set()
    k = 0
    while True:
        length = int(math.ceil(n * decay**k))
        if length < min_length:
            break
        count = 2 * int(math.ceil((1.0 / decay) ** k)) - 1
        if count == 1:
            starts = [1]
        else:
            span = n - length
            starts = [int(math.floor(i * span / (count - 1))) + 1 for i in range(count)]
        for st in starts:
            out.add((st, st + length - 1))
        k += 1
    return [Window(a, b) for a, b in sorted(out)]


def _random_intervals(n: int, count: int, min_length: int, seed: int) -> list[Window]:
    """WBS interval draws: length uniform on [min_length, n], then a
    uniform placement.  Generated by numpy's seeded PCG64 generator."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    min_length = max(int(min_length), 2)
    lengths = rng.integers(min_length, n + 1, size=count)
    starts = np.array([rng.integers(1, n - ln + 2) for ln in lengths])
    wins = sorted({(int(s), int(s + ln - 1)) for s, ln in zip(starts, lengths)})
    return [Window(a, b) for a, b in wins]


def _interval_recursion(state, config, intervals: list[Window]) -> list[DetectionRecord]:
    """Shared WBS/SBS recursion: the largest-statistic interval wins."""
    cache: dict[tuple[int, int], tuple[int, float]] = {}

    def interval_stat(w: Window) -> tuple[int, float]:
        key = (w.t1, w.t2)
        if key not in cache:
            stats = single_cp_profile(state, w.t1, w.t2)
            i = int(np.argmax(stats))
            cache[key] = (w.t1 + i, float(stats[i]))
        return cache[key]

    records: list[DetectionRecord] = []

    def visit(s: int, e: int) -> None:
        best: tuple[float, Window, int] | None = None
        for w in intervals:
            if w.t1 >= s and w.t2 <= e and w.t2 > w.t1:
                k, t = interval_stat(w)
                if best is None or t > best[0]:
                    best = (t, w, k)
        if best is None or best[0] <= config.threshold:
            return
        t, w, k = best
        records.append(DetectionRecord(k, t, w, Window(s, e), len(records)))
        visit(s, k)
        visit(k + 1, e)

    visit(1, state.n)
    return records


def snwbs_detect(series, config: DetectionConfig, collect_trace: bool = False) -> DetectionResult:
    """SN statistic combined with wild binary segmentation (random intervals)."""
    state, h = _bind(series, config)
    min_len = config.min_interval if config.min_interval is not None else h
    intervals = _random_intervals(state.n, config.intervals, min_len, config.seed)
    records = _interval_recursion(state, config, intervals)
    return _result(state, config, records, None)


def snsbs_detect(series, config: DetectionConfig, collect_trace: bool = False) -> DetectionResult:
    """SN statistic combined with seeded binary segmentation (deterministic intervals)."""
    state, h = _bind(series, config)
    min_len = config.min_interval if config.min_interval is not None else h
    intervals = seeded_intervals(state.n, config.decay, min_len)
    records = _interval_recursion(state, config, intervals)
    return _result(state, config, records, None)


_DISPATCH = {
    "sncp": sncp_detect,
    "snbs": snbs_detect,
    "snlocal": snlocal_detect,
    "snwbs": snwbs_detect,
    "snsbs": snsbs_detect,
}


def detect(series, config: DetectionConfig, collect_trace: bool = False) -> DetectionResult:
    """Run the detection method named in ``config.method``."""
    return _DISPATCH[config.method](series, config, collect_trace)
