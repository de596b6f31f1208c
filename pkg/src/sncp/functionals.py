"""Declarative target functionals and fast subsample plug-in estimators.

A :class:`FunctionalSpec` describes which parameter of the marginal (or
lagged joint) distribution is monitored for changes.  ``precompute`` binds a
spec to a series and returns a :class:`PrecomputedState` whose ``estimate``
evaluates the plug-in estimator theta(F_hat) on any subsample [a, b] cheaply:
prefix-moment arithmetic for smooth functionals, order-statistic selection
for quantiles.

All estimators are plug-in functionals of the empirical distribution, so
variance-type quantities use the biased divisor m, and the quantile is the
left-continuous empirical inverse (the ceil(q*m)-th order statistic).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import TimeSeries
from ._kernels import covmat_theta, fill_quantile_table

__all__ = ["FunctionalSpec", "PrecomputedState", "precompute", "estimate", "parse_functional"]

_KINDS = (
    "mean",
    "variance",
    "covariance",
    "correlation",
    "autocovariance",
    "autocorrelation",
    "quantile",
    "covariance_matrix",
    "multi",
)

# Plug-in variances at or below this relative fraction of the column's
# overall variance are treated as degenerate when they appear in a
# denominator (correlation-type functionals).
_VAR_REL_TOL = 1e-10


@dataclass(frozen=True)
class FunctionalSpec:
    """Declarative description of the monitored parameter theta(.).

    Use the classmethod constructors (``FunctionalSpec.mean()``,
    ``FunctionalSpec.quantile(0.9)`` ...) rather than building instances by
    hand.  Coordinates are 1-based; ``lag >= 1``; ``q`` in (0, 1).
    """

    kind: str
    coord: int = 1
    coord2: int = 1
    lag: int = 0
    q: float = 0.5
    components: tuple["FunctionalSpec", ...] = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.kind in ("autocovariance", "autocorrelation") and self.lag < 1:
            raise ValueError("lag must be >= 1")
        if self.kind == "quantile" and not (0.0 < self.q < 1.0):
            raise ValueError(f"quantile level must be in (0, 1), got {self.q}")
        if self.kind == "multi":
            if not self.components:
                raise ValueError("multi needs at least one component")
            if any(c.kind == "multi" for c in self.components):
                raise ValueError("multi components cannot be nested")

    # -- constructors -------------------------------------------------
    @classmethod
    def mean(cls) -> "FunctionalSpec":
        return cls("mean")

    @classmethod
    def variance(cls, coord: int = 1) -> "FunctionalSpec":
        return cls("variance", coord=coord)

    @classmethod
    def covariance(cls, i: int, j: int) -> "FunctionalSpec":
        return cls("covariance", coord=i, coord2=j)

    @classmethod
    def correlation(cls, i: int, j: int) -> "FunctionalSpec":
        return cls("correlation", coord=i, coord2=j)

    @classmethod
    def autocovariance(cls, coord: int = 1, lag: int = 1) -> "FunctionalSpec":
        return cls("autocovariance", coord=coord, lag=lag)

    @classmethod
    def autocorrelation(cls, coord: int = 1, lag: int = 1) -> "FunctionalSpec":
        return cls("autocorrelation", coord=coord, lag=lag)

    @classmethod
    def quantile(cls, q: float, coord: int = 1) -> "FunctionalSpec":
        return cls("quantile", coord=coord, q=q)

    @classmethod
    def covariance_matrix(cls) -> "FunctionalSpec":
        return cls("covariance_matrix")

    @classmethod
    def multi(cls, components) -> "FunctionalSpec":
        return cls("multi", components=tuple(components))

    # -- derived attributes -------------------------------------------
    @property
    def embed_offset(self) -> int:
        """Largest lag among components; 0 for lag-free functionals."""
        if self.kind in ("autocovariance", "autocorrelation"):
            return self.lag
        if self.kind == "multi":
            return max(c.embed_offset for c in self.components)
        return 0

    def output_dim(self, p: int) -> int:
        """Dimension d of theta for a series with p columns."""
        if self.kind == "mean":
            return p
        if self.kind == "covariance_matrix":
            return p * (p + 1) // 2
        if self.kind == "multi":
            return sum(c.output_dim(p) for c in self.components)
        return 1

    def encode(self) -> str:
        """Canonical textual form used by the CLI (see ``parse_functional``)."""
        k = self.kind
        if k == "mean":
            return "mean"
        if k == "variance":
            return "variance" if self.coord == 1 else f"variance:{self.coord}"
        if k == "covariance":
            return f"cov:{self.coord},{self.coord2}"
        if k == "correlation":
            return f"cor:{self.coord},{self.coord2}"
        if k == "autocovariance":
            return f"acov:{self.coord},{self.lag}"
        if k == "autocorrelation":
            return f"acor:{self.coord},{self.lag}"
        if k == "quantile":
            return f"quantile:{self.coord},{self.q:g}"
        if k == "covariance_matrix":
            return "covmat"
        return "multi:(" + ";".join(c.encode() for c in self.components) + ")"


def parse_functional(text: str) -> FunctionalSpec:
    """Parse the canonical textual encoding of a functional.

    Grammar: ``mean`` | ``variance[:coord]`` | ``cov:i,j`` | ``cor:i,j`` |
    ``acov:coord,lag`` | ``acor:coord,lag`` | ``quantile:coord,q`` |
    ``covmat`` | ``multi:(spec;spec;...)``.
    """
    text = text.strip()
    if text.startswith("multi:"):
        body = text[len("multi:"):].strip()
        if not (body.startswith("(") and body.endswith(")")):
            raise ValueError(f"malformed multi spec {text!r}")
        parts = [s for s in body[1:-1].split(";") if s.strip()]
        return FunctionalSpec.multi(parse_functional(s) for s in parts)
    head, _, rest = text.partition(":")
    args = [s.strip() for s in rest.split(",")] if rest else []
    try:
        if head == "mean" and not args:
            return FunctionalSpec.mean()
        if head == "variance":
            return FunctionalSpec.variance(int(args[0])) if args else FunctionalSpec.variance()
        if head == "cov" and len(args) == 2:
            return FunctionalSpec.covariance(int(args[0]), int(args[1]))
        if head == "cor" and len(args) == 2:
            return FunctionalSpec.correlation(int(args[0]), int(args[1]))
        if head == "acov" and len(args) == 2:
            return FunctionalSpec.autocovariance(int(args[0]), int(args[1]))
        if head == "acor" and len(args) == 2:
            return FunctionalSpec.autocorrelation(int(args[0]), int(args[1]))
        if head == "quantile" and len(args) == 2:
            return FunctionalSpec.quantile(float(args[1]), int(args[0]))
        if head == "covmat" and not args:
            return FunctionalSpec.covariance_matrix()
    except (ValueError, IndexError) as exc:
        raise ValueError(f"cannot parse functional {text!r}: {exc}") from exc
    raise ValueError(f"cannot parse functional {text!r}")


def order_stat_index(q: float, m) -> np.ndarray:
    """1-based index ceil(q*m) of the empirical q-quantile, clipped to [1, m]."""
    r = np.ceil(q * np.asarray(m, dtype=float)).astype(np.int64)
    return np.clip(r, 1, m)


# ---------------------------------------------------------------------------
# component evaluators
# ---------------------------------------------------------------------------


def _prefix(z: np.ndarray) -> np.ndarray:
    """Length n+1 cumulative sum with a leading zero row."""
    out = np.zeros((z.shape[0] + 1,) + z.shape[1:], dtype=float)
    np.cumsum(z, axis=0, out=out[1:])
    return out


class _Component:
    """One functional component bound to a series.

    ``est_pairs(a, b)`` evaluates theta_hat on subsamples given 1-based
    inclusive index arrays (broadcast together, a <= b elementwise) and
    returns an array of shape ``broadcast(a, b).shape + (d,)`` with NaN rows
    marking degenerate estimates.

    ``delta_pairs(lo, i, hi)`` evaluates the split contrast
    theta_hat(lo..i) - theta_hat(i+1..hi); prefix-based components override
    it to share the interior gather between the two halves.
    """

    d: int = 1
    lag: int = 0

    def est_pairs(self, a, b) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def delta_pairs(self, lo, i, hi) -> np.ndarray:
        return self.est_pairs(lo, i) - self.est_pairs(i + 1, hi)


class _PrefixComp(_Component):
    """Base for components evaluated as H of prefix-moment means."""

    prefix: np.ndarray

    def _theta(self, s, m) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def est_pairs(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return self._theta(self.prefix[b] - self.prefix[a - 1], (b - a + 1).astype(float))

    def delta_pairs(self, lo, i, hi):
        lo = np.asarray(lo, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        if self.lag and int(np.min(lo)) <= self.lag:
            return super().delta_pairs(lo, i, hi)
        mid = self.prefix[i]
        left = self._theta(mid - self.prefix[lo - 1], (i - lo + 1).astype(float))
        right = self._theta(self.prefix[hi] - mid, (hi - i).astype(float))
        return left - right


class _MeanComp(_PrefixComp):
    def __init__(self, data: np.ndarray):
        self.d = data.shape[1]
        self.col_mean = data.mean(axis=0)
        self.prefix = _prefix(data - self.col_mean)

    def _theta(self, s, m):
        return s / m[..., None] + self.col_mean

    def delta_pairs(self, lo, i, hi):
        lo = np.asarray(lo, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        mid = self.prefix[i]
        left = (mid - self.prefix[lo - 1]) / (i - lo + 1).astype(float)[..., None]
        right = (self.prefix[hi] - mid) / (hi - i).astype(float)[..., None]
        return left - right


class _SecondMomentComp(_PrefixComp):
    """Shared machinery for variance / covariance / correlation.

    Works on globally centered columns, which leaves all second-moment
    plug-ins unchanged but avoids cancellation for far-from-zero data.
    """

    def __init__(self, data: np.ndarray, i: int, j: int, want_corr: bool):
        wi = data[:, i - 1] - data[:, i - 1].mean()
        wj = data[:, j - 1] - data[:, j - 1].mean()
        cols = [wi, wj, wi * wj]
        if want_corr:
            cols += [wi * wi, wj * wj]
        self.prefix = _prefix(np.column_stack(cols))
        self.want_corr = want_corr
        if want_corr:
            self.var_tol = (
                _VAR_REL_TOL * np.mean(wi * wi),
                _VAR_REL_TOL * np.mean(wj * wj),
            )

    def _theta(self, s, m):
        m1 = s[..., 0] / m
        m2 = s[..., 1] / m
        cov = s[..., 2] / m - m1 * m2
        if not self.want_corr:
            return cov[..., None]
        vi = s[..., 3] / m - m1 * m1
        vj = s[..., 4] / m - m2 * m2
        bad = (vi <= self.var_tol[0]) | (vj <= self.var_tol[1])
        denom = np.sqrt(np.where(bad, 1.0, vi * vj))
        out = np.where(bad, np.nan, cov / denom)
        return out[..., None]


class _VarComp(_PrefixComp):
    def __init__(self, data: np.ndarray, coord: int):
        w = data[:, coord - 1] - data[:, coord - 1].mean()
        self.prefix = _prefix(np.column_stack([w, w * w]))

    def _theta(self, s, m):
        m1 = s[..., 0] / m
        return (s[..., 1] / m - m1 * m1)[..., None]


class _LaggedComp(_PrefixComp):
    """Autocovariance / autocorrelation via the embedded pairs (Y_t, Y_{t-lag}).

    Prefix sums run over t = lag+1 .. n; subsamples are clipped to that
    range and need at least 2 embedded pairs to be non-degenerate.
    """

    def __init__(self, data: np.ndarray, coord: int, lag: int, want_corr: bool):
        w = data[:, coord - 1] - data[:, coord - 1].mean()
        n = w.shape[0]
        u = w[lag:]          # w_t for t = lag+1..n
        v = w[: n - lag]     # w_{t-lag}
        cols = [u, v, u * v]
        if want_corr:
            cols += [u * u, v * v]
        z = np.zeros((n, len(cols)))
        z[lag:] = np.column_stack(cols)
        self.prefix = _prefix(z)
        self.lag = lag
        self.want_corr = want_corr
        if want_corr:
            self.var_tol = (
                _VAR_REL_TOL * np.mean(u * u),
                _VAR_REL_TOL * np.mean(v * v),
            )

    def _theta_clipped(self, s, m_int):
        bad = m_int < 2
        m = np.where(bad, 2, m_int).astype(float)
        m1 = s[..., 0] / m
        m2 = s[..., 1] / m
        cov = s[..., 2] / m - m1 * m2
        if self.want_corr:
            vu = s[..., 3] / m - m1 * m1
            vv = s[..., 4] / m - m2 * m2
            bad = bad | (vu <= self.var_tol[0]) | (vv <= self.var_tol[1])
            denom = np.sqrt(np.where(bad, 1.0, vu * vv))
            out = np.where(bad, np.nan, cov / denom)
        else:
            out = np.where(bad, np.nan, cov)
        return out[..., None]

    def est_pairs(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        a_eff = np.maximum(a, self.lag + 1)
        return self._theta_clipped(self.prefix[b] - self.prefix[a_eff - 1], b - a_eff + 1)

    def delta_pairs(self, lo, i, hi):
        lo = np.asarray(lo, dtype=np.int64)
        i = np.asarray(i, dtype=np.int64)
        hi = np.asarray(hi, dtype=np.int64)
        if int(np.min(lo)) <= self.lag:
            return self.est_pairs(lo, i) - self.est_pairs(i + 1, hi)
        mid = self.prefix[i]
        left = self._theta_clipped(mid - self.prefix[lo - 1], i - lo + 1)
        right = self._theta_clipped(self.prefix[hi] - mid, hi - i)
        return left - right


class _CovMatComp(_PrefixComp):
    """Vectorized upper triangle (row-major, diagonal included) of the
    plug-in covariance matrix."""

    def __init__(self, data: np.ndarray):
        p = data.shape[1]
        w = data - data.mean(axis=0)
        iu, ju = np.triu_indices(p)
        cols = np.concatenate([w, w[:, iu] * w[:, ju]], axis=1)
        self.prefix = _prefix(cols)
        self.p = p
        self.iu = iu
        self.ju = ju
        self.d = p * (p + 1) // 2

    def _theta(self, s, m):
        return covmat_theta(s, m, self.iu, self.ju, self.p)


class _QuantileComp(_Component):
    """Empirical quantile: the ceil(q*m)-th order statistic of the subsample.

    Scalar evaluation selects in O(m); vectorized evaluation memoizes all
    (a, b) subsample quantiles in one triangular table, filled by a single
    incremental order-statistic pass per left endpoint.  The cache changes
    nothing behaviourally, both paths apply the same selection rule.
    """

    def __init__(self, data: np.ndarray, coord: int, q: float):
        self.x = np.ascontiguousarray(data[:, coord - 1], dtype=float)
        self.q = float(q)
        self._table: np.ndarray | None = None

    def _ensure_table(self) -> np.ndarray:
        if self._table is None:
            n = self.x.shape[0]
            order = np.argsort(self.x, kind="stable")
            ranks = np.empty(n, dtype=np.int64)
            ranks[order] = np.arange(n, dtype=np.int64)
            table = np.full((n + 1, n + 1), np.nan)
            fill_quantile_table(ranks, self.x[order], self.q, table)
            self._table = table
        return self._table

    def est_single(self, a: int, b: int) -> float:
        seg = self.x[a - 1 : b]
        r = int(order_stat_index(self.q, seg.shape[0]))
        return float(np.partition(seg, r - 1)[r - 1])

    def est_pairs(self, a, b):
        table = self._ensure_table()
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return table[a, b][..., None]


def _build_component(data: np.ndarray, spec: FunctionalSpec) -> _Component:
    k = spec.kind
    if k == "mean":
        return _MeanComp(data)
    if k == "variance":
        return _VarComp(data, spec.coord)
    if k == "covariance":
        return _SecondMomentComp(data, spec.coord, spec.coord2, want_corr=False)
    if k == "correlation":
        return _SecondMomentComp(data, spec.coord, spec.coord2, want_corr=True)
    if k == "autocovariance":
        return _LaggedComp(data, spec.coord, spec.lag, want_corr=False)
    if k == "autocorrelation":
        return _LaggedComp(data, spec.coord, spec.lag, want_corr=True)
    if k == "covariance_matrix":
        return _CovMatComp(data)
    if k == "quantile":
        return _QuantileComp(data, spec.coord, spec.q)
    raise ValueError(f"no component for kind {k!r}")


@dataclass
class PrecomputedState:
    """A FunctionalSpec bound to a series, ready for repeated evaluation.

    Immutable after construction apart from an internal quantile
    memoization table that is filled lazily; ``estimate`` is reentrant.
    """

    series: TimeSeries
    spec: FunctionalSpec
    d: int
    embed_offset: int
    components: tuple[_Component, ...]
    is_linear: bool

    @property
    def n(self) -> int:
        return self.series.n

    @property
    def eff_start(self) -> int:
        """First usable 1-based index (1 + embed_offset)."""
        return 1 + self.embed_offset

    def est_pairs(self, a, b) -> np.ndarray:
        """theta_hat on subsamples [a, b] for broadcast index arrays."""
        outs = [c.est_pairs(a, b) for c in self.components]
        return outs[0] if len(outs) == 1 else np.concatenate(outs, axis=-1)

    def delta_pairs(self, lo, i, hi) -> np.ndarray:
        """theta_hat(lo..i) - theta_hat(i+1..hi), the split-sample contrast."""
        outs = [c.delta_pairs(lo, i, hi) for c in self.components]
        return outs[0] if len(outs) == 1 else np.concatenate(outs, axis=-1)

    def estimate(self, a: int, b: int) -> np.ndarray:
        """theta_hat_{a,b} as a length-d vector (NaN marks degenerate)."""
        a, b = int(a), int(b)
        if not (self.eff_start <= a <= b <= self.n):
            raise ValueError(
                f"need {self.eff_start} <= a <= b <= {self.n}, got ({a}, {b})"
            )
        parts = []
        for c in self.components:
            if isinstance(c, _QuantileComp) and c._table is None:
                parts.append(np.array([c.est_single(a, b)]))
            else:
                parts.append(np.atleast_1d(np.asarray(c.est_pairs(a, b)).reshape(-1)))
        return np.concatenate(parts)


def precompute(series: TimeSeries, spec: FunctionalSpec) -> PrecomputedState:
    """Bind ``spec`` to ``series``, validating coordinates and lags.

    Raises ValueError if a coordinate exceeds the series dimension or the
    series is too short for the requested lag embedding.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(series)
    flat = spec.components if spec.kind == "multi" else (spec,)
    for c in flat:
        if c.kind in ("variance", "autocovariance", "autocorrelation", "quantile"):
            if not (1 <= c.coord <= series.p):
                raise ValueError(f"coordinate {c.coord} outside [1, {series.p}]")
        if c.kind in ("covariance", "correlation"):
            for cc in (c.coord, c.coord2):
                if not (1 <= cc <= series.p):
                    raise ValueError(f"coordinate {cc} outside [1, {series.p}]")
    offset = spec.embed_offset
    if series.n - offset < 2:
        raise ValueError(
            f"series too short: n={series.n} leaves fewer than 2 usable "
            f"observations after lag embedding (offset {offset})"
        )
    comps = tuple(_build_component(series.data, c) for c in flat)
    is_linear = spec.kind == "mean"
    return PrecomputedState(
        series=series,
        spec=spec,
        d=spec.output_dim(series.p),
        embed_offset=offset,
        components=comps,
        is_linear=is_linear,
    )


def estimate(state: PrecomputedState, a: int, b: int) -> np.ndarray:
    """Module-level alias for :meth:`PrecomputedState.estimate`."""
    return state.estimate(a, b)
