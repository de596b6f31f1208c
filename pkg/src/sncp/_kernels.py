"""Numba-accelerated inner kernels (with pure-numpy fallbacks).

Currently two: the triangular subsample-quantile table, and the plug-in
covariance-matrix evaluation from raw moment sums.

For the quantile table: for a fixed left endpoint a, window quantiles for
all right endpoints b = a..n come from one pass that inserts ranks into a
Fenwick tree and selects the ceil(q*m)-th smallest.  The full table costs
O(n^2 log n) and makes every subsequent subsample quantile a plain array
lookup.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _fill_kernel(ranks, sorted_vals, q, out):  # pragma: no cover - jitted
    n = ranks.shape[0]
    size = 1
    while size < n:
        size <<= 1
    tree = np.zeros(size + 1, dtype=np.int64)
    for a in range(n):
        tree[:] = 0
        cnt = 0
        for b in range(a, n):
            r = ranks[b] + 1
            i = r
            while i <= size:
                tree[i] += 1
                i += i & (-i)
            cnt += 1
            t = int(math.ceil(q * cnt))
            if t < 1:
                t = 1
            elif t > cnt:
                t = cnt
            pos = 0
            rem = t
            mask = size
            while mask > 0:
                nxt = pos + mask
                if nxt <= size and tree[nxt] < rem:
                    rem -= tree[nxt]
                    pos = nxt
                mask >>= 1
            out[a + 1, b + 1] = sorted_vals[pos]


def _fill_python(ranks, sorted_vals, q, out):
    """Pure-numpy fallback using insertion into a sorted buffer."""
    n = ranks.shape[0]
    vals = sorted_vals[ranks]
    buf = np.empty(n)
    for a in range(n):
        cnt = 0
        for b in range(a, n):
            x = vals[b]
            pos = np.searchsorted(buf[:cnt], x)
            buf[pos + 1 : cnt + 1] = buf[pos:cnt]
            buf[pos] = x
            cnt += 1
            t = min(max(int(math.ceil(q * cnt)), 1), cnt)
            out[a + 1, b + 1] = buf[t - 1]


def fill_quantile_table(ranks: np.ndarray, sorted_vals: np.ndarray, q: float, out: np.ndarray) -> None:
    """Fill out[a, b] (1-based, a <= b) with subsample quantiles.

    ``ranks[t]`` is the position of observation t in ``sorted_vals``.
    """
    if _HAVE_NUMBA:
        _fill_kernel(
            np.ascontiguousarray(ranks, dtype=np.int64),
            np.ascontiguousarray(sorted_vals, dtype=np.float64),
            float(q),
            out,
        )
    else:
        _fill_python(ranks, sorted_vals, q, out)


@njit(cache=True)
def _covmat_kernel(s, m, iu, ju, p, out):  # pragma: no cover - jitted
    rows = s.shape[0]
    d = iu.shape[0]
    for r in range(rows):
        inv = 1.0 / m[r]
        for t in range(d):
            out[r, t] = (s[r, p + t] - s[r, iu[t]] * s[r, ju[t]] * inv) * inv


def covmat_theta(s: np.ndarray, m: np.ndarray, iu: np.ndarray, ju: np.ndarray, p: int) -> np.ndarray:
    """Plug-in covariances from raw moment sums.

    ``s[..., :p]`` hold coordinate sums, ``s[..., p:]`` pairwise product
    sums for the upper-triangle pairs (iu, ju); ``m`` the subsample sizes.
    """
    shape = s.shape[:-1]
    d = iu.shape[0]
    if _HAVE_NUMBA:
        flat_s = np.ascontiguousarray(s.reshape(-1, s.shape[-1]))
        flat_m = np.ascontiguousarray(np.broadcast_to(m, shape).reshape(-1), dtype=np.float64)
        out = np.empty((flat_s.shape[0], d))
        _covmat_kernel(flat_s, flat_m, iu, ju, p, out)
        return out.reshape(shape + (d,))
    mm = np.asarray(m, dtype=float)[..., None]
    means = s[..., :p] / mm
    return s[..., p:] / mm - means[..., iu] * means[..., ju]
