"""Detection thresholds: built-in constants and Monte-Carlo simulation.

The maximal nested-window statistic has a pivotal null limit depending
only on the window fraction epsilon and the functional dimension d, so a
single quantile table thresholds every functional.  The built-in table
covers epsilon = 0.05, d = 1..10 at the 90% and 95% levels.  Any other
key, and the two auxiliary families (the full-interval single change-point
statistic and the pure smallest-local-window statistic), are obtained by
simulating the finite-n statistic on Gaussian white noise with the exact
production scan code.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import TimeSeries
from .functionals import FunctionalSpec, precompute
from .statistic import local_profile, nested_profile, single_cp_profile
from ._parallel import parallel_map

__all__ = [
    "FAMILIES",
    "ThresholdNotFound",
    "CriticalValueTable",
    "builtin_table",
    "lookup",
    "simulate_null_stats",
    "simulate_threshold",
    "save_table",
    "load_table",
    "cache_path_from_env",
    "CACHE_ENV_VAR",
]

FAMILIES = ("nested", "single_cp", "local")

CACHE_ENV_VAR = "SNCP_CRITVAL_CACHE"

# Simulated 90%/95% quantiles of the limiting null distribution of the
# maximal nested-window statistic at epsilon = 0.05, for d = 1..10.
_BUILTIN_90 = (141.9, 208.2, 275.0, 344.4, 415.9, 492.5, 568.4, 651.4, 740.3, 823.5)
_BUILTIN_95 = (165.5, 237.5, 309.1, 387.5, 464.5, 541.7, 624.1, 713.3, 808.6, 898.9)


class ThresholdNotFound(KeyError):
    """Raised when a (family, epsilon, d, level) key has no stored threshold."""

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return (
            f"no critical value stored for key {self.key!r}; simulate one "
            f"(critval simulate / simulate_threshold) or pass an explicit threshold"
        )


def table_key(epsilon: float, d: int, level: float, family: str) -> str:
    """Canonical key string family/epsilon/d/level."""
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}, expected one of {FAMILIES}")
    return f"{family}/{repr(float(epsilon))}/{int(d)}/{repr(float(level))}"


@dataclass
class CriticalValueTable:
    """Thresholds keyed by (epsilon, d, level, family) with provenance."""

    entries: dict[str, dict] = field(default_factory=dict)

    def add(self, epsilon, d, level, family, threshold, provenance) -> str:
        key = table_key(epsilon, d, level, family)
        if not threshold > 0:
            raise ValueError(f"threshold must be positive, got {threshold}")
        self.entries[key] = {"threshold": float(threshold), "provenance": provenance}
        return key

    def get(self, epsilon, d, level, family) -> float:
        key = table_key(epsilon, d, level, family)
        if key not in self.entries:
            raise ThresholdNotFound(key)
        return self.entries[key]["threshold"]

    def merged_with(self, other: "CriticalValueTable") -> "CriticalValueTable":
        out = CriticalValueTable(dict(self.entries))
        out.entries.update(other.entries)
        return out


def builtin_table() -> CriticalValueTable:
    """The 20 built-in nested-family thresholds (epsilon 0.05, d 1..10)."""
    table = CriticalValueTable()
    for d in range(1, 11):
        table.add(0.05, d, 0.90, "nested", _BUILTIN_90[d - 1], "builtin")
        table.add(0.05, d, 0.95, "nested", _BUILTIN_95[d - 1], "builtin")
    return table


def lookup(table: CriticalValueTable, epsilon, d, level, family="nested") -> float:
    """Stored threshold for the key; raises ThresholdNotFound when absent."""
    return table.get(epsilon, d, level, family)


def _one_null_stat(args) -> float:
    family, epsilon, d, n_sim, seed, rep = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))
    series = TimeSeries(rng.standard_normal((n_sim, d)))
    state = precompute(series, FunctionalSpec.mean())
    h = int(np.floor(epsilon * n_sim))
    if family == "nested":
        stats, _ = nested_profile(state, 1, n_sim, h, want_windows=False)
    elif family == "local":
        stats, _ = local_profile(state, 1, n_sim, h)
    else:
        stats = single_cp_profile(state, 1, n_sim)
    return float(stats.max())


def simulate_null_stats(epsilon, d, family, n_sim=2000, reps=5000, seed=0, jobs=1) -> np.ndarray:
    """Independent draws of the null statistic on Gaussian white noise.

    Replication r uses the derived stream SeedSequence(seed, spawn_key=(r,))
    of numpy's PCG64 generator, so results do not depend on scheduling.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}, expected one of {FAMILIES}")
    if n_sim < 500:
        raise ValueError(f"n_sim must be >= 500, got {n_sim}")
    if reps < 1000:
        raise ValueError(f"reps must be >= 1000, got {reps}")
    args = [(family, float(epsilon), int(d), int(n_sim), int(seed), r) for r in range(reps)]
    return np.array(parallel_map(_one_null_stat, args, jobs))


def empirical_quantile(stats: np.ndarray, level: float) -> float:
    """Upper-biased ceil(level * reps)-th order statistic."""
    reps = stats.shape[0]
    r = min(max(int(np.ceil(level * reps)), 1), reps)
    return float(np.sort(stats)[r - 1])


def simulate_threshold(
    epsilon, d, level, family="nested", n_sim=2000, reps=5000, seed=0, jobs=1
) -> float:
    """Monte-Carlo critical value: the empirical level-quantile of the
    simulated null statistic."""
    if not (0.0 < level < 1.0):
        raise ValueError(f"level must be in (0, 1), got {level}")
    stats = simulate_null_stats(epsilon, d, family, n_sim=n_sim, reps=reps, seed=seed, jobs=jobs)
    return empirical_quantile(stats, level)


def save_table(table: CriticalValueTable, path) -> None:
    """Atomically write the table as JSON (full-precision decimal floats)."""
    doc = {"entries": table.entries}
    payload = json.dumps(doc, sort_keys=True, indent=2)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_table(path) -> CriticalValueTable:
    """Read a table written by ``save_table``; duplicate keys are an error."""
    with open(path) as fh:
        raw = fh.read()
    doc = json.loads(raw)
    entries = doc.get("entries")
    if not isinstance(entries, dict):
        raise ValueError(f"{path}: missing 'entries' object")
    table = CriticalValueTable()
    seen: set[str] = set()
    for key, val in entries.items():
        parts = key.split("/")
        if len(parts) != 4 or parts[0] not in FAMILIES:
            raise ValueError(f"{path}: malformed key {key!r}")
        family, eps_s, d_s, level_s = parts
        try:
            canonical = table_key(float(eps_s), int(d_s), float(level_s), family)
        except ValueError as exc:
            raise ValueError(f"{path}: malformed key {key!r}: {exc}") from exc
        if canonical in seen:
            raise ValueError(f"{path}: duplicate key {canonical!r}")
        seen.add(canonical)
        try:
            thr = float(val["threshold"])
        except (TypeError, KeyError) as exc:
            raise ValueError(f"{path}: entry {key!r} lacks a threshold") from exc
        if not thr > 0:
            raise ValueError(f"{path}: entry {key!r} has non-positive threshold")
        table.entries[canonical] = {
            "threshold": thr,
            "provenance": val.get("provenance", "unknown"),
        }
    return table


def cache_path_from_env() -> str | None:
    """Cache file path from the SNCP_CRITVAL_CACHE environment variable."""
    return os.environ.get(CACHE_ENV_VAR) or None
