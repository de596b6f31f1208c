"""Self-normalized contrast statistics on subsample windows.

For a window (t1, k, t2) the contrast D is the scaled difference of the
plug-in estimates on [t1, k] and [k+1, t2]; the self-normalizer V = L + R
accumulates weighted outer products of recursive subsample contrasts, and
the test statistic is T = D' V^{-1} D.  Detection scans maximize T over a
nested set of windows anchored at k in multiples of the window size h.

Three evaluation layers produce identical numbers (up to roundoff):

* ``window_components`` / ``max_window_statistic``: direct per-window
  reference implementations.
* a batched engine that gathers all required subsample estimates per
  window-size step, for any functional.
* a closed-form engine for the mean functional, where the inner weighted
  sums collapse into prefix-moment combinations evaluated in O(1) per
  window; this is what makes Monte-Carlo threshold simulation affordable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Window
from .functionals import PrecomputedState

__all__ = [
    "SnComponents",
    "window_grid",
    "contrast",
    "self_normalizer",
    "t_statistic",
    "window_components",
    "max_window_statistic",
    "nested_profile",
    "single_cp_profile",
    "local_profile",
]

_EPS = float(np.finfo(float).eps)


# ---------------------------------------------------------------------------
# per-window reference operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SnComponents:
    """Contrast vector, normalizer matrices and statistic for one window."""

    D: np.ndarray
    L: np.ndarray
    R: np.ndarray
    V: np.ndarray
    T: float | None


def window_grid(k: int, s: int, e: int, h: int, n: int, eff_start: int = 1):
    """Nested windows (t1, t2) anchored at k, clipped to [s, e].

    Anchoring is global: t1 = k - j1*h + 1 and t2 = k + j2*h for positive
    integers j1, j2, with 1 <= t1 and t2 <= n, then intersected with the
    segment bounds (and the lag-effective start).  Windows are ordered by
    (j1, j2) lexicographically.
    """
    lo = max(s, eff_start)
    out = []
    j1 = 1
    while k - j1 * h + 1 >= lo:
        t1 = k - j1 * h + 1
        j2 = 1
        while k + j2 * h <= min(e, n):
            out.append((t1, k + j2 * h))
            j2 += 1
        j1 += 1
    return out


def contrast(state: PrecomputedState, t1: int, k: int, t2: int) -> np.ndarray:
    """D(t1, k, t2); entries are NaN when an estimate is degenerate."""
    if not (max(1, state.eff_start) <= t1 <= k < t2 <= state.n):
        raise ValueError(f"need eff_start <= t1 <= k < t2 <= n, got ({t1}, {k}, {t2})")
    scale = (k - t1 + 1) * (t2 - k) / (t2 - t1 + 1) ** 1.5
    return scale * (state.estimate(t1, k) - state.estimate(k + 1, t2))


def self_normalizer(state: PrecomputedState, t1: int, k: int, t2: int):
    """Normalizer matrices (L, R, V) for one window; V = L + R.

    Sum terms whose estimate is degenerate contribute zero; boundary terms
    with vanishing weight are skipped outright.
    """
    d = state.d
    length2 = float(t2 - t1 + 1) ** 2

    def _side(i_arr, w, left_a, left_b, right_a, right_b):
        if i_arr.size == 0:
            return np.zeros((d, d))
        le = np.atleast_2d(state.est_pairs(left_a, left_b).reshape(len(i_arr), d))
        re = np.atleast_2d(state.est_pairs(right_a, right_b).reshape(len(i_arr), d))
        delta = le - re
        ok = np.isfinite(delta).all(axis=1)
        delta = np.where(ok[:, None], delta, 0.0)
        wm = w * ok
        return (delta * wm[:, None]).T @ delta / length2

    i = np.arange(t1, k)  # left sum, i = t1 .. k-1
    wl = ((i - t1 + 1) * (k - i) / (k - t1 + 1)) ** 2
    L = _side(i, wl, np.full_like(i, t1), i, i + 1, np.full_like(i, k))

    i = np.arange(k + 2, t2 + 1)  # right sum, i = k+2 .. t2
    wr = ((t2 - i + 1) * (i - 1 - k) / (t2 - k)) ** 2
    R = _side(i, wr, i, np.full_like(i, t2), np.full_like(i, k + 1), i - 1)
    return L, R, L + R


def t_statistic(D: np.ndarray, V: np.ndarray) -> float | None:
    """D' V^{-1} D, or None when the window is unusable.

    Unusable means a degenerate contrast or a normalizer that is not
    numerically positive definite (Cholesky failure, or a pivot at or below
    d * eps * trace(V)).  Callers treat None as statistic 0.
    """
    D = np.atleast_1d(np.asarray(D, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    d = D.shape[0]
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(V))):
        return None
    try:
        chol = np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        return None
    piv = np.diag(chol) ** 2
    if piv.min() <= d * _EPS * np.trace(V):
        return None
    x = np.linalg.solve(V, D)
    return float(D @ x)


def window_components(state: PrecomputedState, t1: int, k: int, t2: int) -> SnComponents:
    """All statistic pieces for one window."""
    D = contrast(state, t1, k, t2)
    L, R, V = self_normalizer(state, t1, k, t2)
    return SnComponents(D=D, L=L, R=R, V=V, T=t_statistic(D, V))


def max_window_statistic(state: PrecomputedState, k: int, s: int, e: int, h: int):
    """Maximum of the window statistic over the nested grid at k within [s, e].

    Returns (T, best_window); (0.0, None) when the grid is empty or every
    window is unusable.  Ties prefer the smallest (j1, j2), i.e. the most
    local window.
    """
    best_t = -1.0
    best: Window | None = None
    for t1, t2 in window_grid(k, s, e, h, state.n, state.eff_start):
        t = window_components(state, t1, k, t2).T
        if t is not None and t > best_t:
            best_t = t
            best = Window(t1, t2)
    if best is None:
        return 0.0, None
    return best_t, best


# ---------------------------------------------------------------------------
# batched helpers
# ---------------------------------------------------------------------------


def _batch_t_stat(D: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Vector of statistics for stacked windows; -1 marks unusable ones."""
    K, d = D.shape
    ok = np.isfinite(D).all(axis=1) & np.isfinite(V).all(axis=(1, 2))
    diag = np.diagonal(V, axis1=1, axis2=2)
    tr = diag.sum(axis=1)
    ok &= (diag > 0).all(axis=1) & (tr > 0)
    if not ok.any():
        return np.full(K, -1.0)
    Vf = np.where(ok[:, None, None], V, np.eye(d))
    Df = np.where(ok[:, None], D, 0.0)
    try:
        chol = np.linalg.cholesky(Vf)
        piv = np.diagonal(chol, axis1=1, axis2=2) ** 2
        ok &= piv.min(axis=1) > d * _EPS * tr
        Vf = np.where(ok[:, None, None], Vf, np.eye(d))
        x = np.linalg.solve(Vf, Df[..., None])[..., 0]
        t = np.einsum("kd,kd->k", Df, x)
        return np.where(ok, t, -1.0)
    except np.linalg.LinAlgError:
        out = np.full(K, -1.0)
        for idx in range(K):
            if ok[idx]:
                t = t_statistic(D[idx], V[idx])
                out[idx] = -1.0 if t is None else t
        return out


def _combine(SL, SR, thL, thR, h: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Maximize T over the (j1, j2) grid for every k.

    SL: (K, J1, d, d), SR: (K, J2, d, d) with NaN marking absent windows;
    thL/thR the matching endpoint estimates.  Returns (T, best_j1,
    best_j2) with T = 0 and best 0 where no window is usable.  Ties prefer
    lexicographically smallest (j1, j2).
    """
    K, J1, d, _ = SL.shape
    J2 = SR.shape[1]
    j1 = np.arange(1, J1 + 1, dtype=float)
    j2 = np.arange(1, J2 + 1, dtype=float)
    lens = (j1[:, None] + j2[None, :]) * h
    dscale = (j1[:, None] * h) * (j2[None, :] * h) / lens**1.5
    if d == 1:
        diff = thL[:, :, None, 0] - thR[:, None, :, 0]
        diff *= dscale[None]
        diff *= diff
        V3 = SL[:, :, None, 0, 0] + SR[:, None, :, 0, 0]
        V3 *= 1.0 / lens[None] ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            T3 = diff / V3
            T3 = np.where((V3 > 0) & np.isfinite(T3), T3, -1.0)
        flat = T3.reshape(K, J1 * J2)
        idx = np.argmax(flat, axis=1)
        best_t = flat[np.arange(K), idx]
    elif d == 2:
        # closed-form 2x2 quadratic form; pivot test identical to t_statistic
        inv_len2 = 1.0 / lens**2
        a = (SL[:, :, None, 0, 0] + SR[:, None, :, 0, 0]) * inv_len2
        b = (SL[:, :, None, 0, 1] + SR[:, None, :, 0, 1]) * inv_len2
        c = (SL[:, :, None, 1, 1] + SR[:, None, :, 1, 1]) * inv_len2
        D0 = (thL[:, :, None, 0] - thR[:, None, :, 0]) * dscale
        D1 = (thL[:, :, None, 1] - thR[:, None, :, 1]) * dscale
        with np.errstate(invalid="ignore", divide="ignore"):
            det = a * c - b * b
            tau = 2.0 * _EPS * (a + c)
            valid = (a > tau) & (det / a > tau) & np.isfinite(D0) & np.isfinite(D1)
            T3 = (c * D0 * D0 - 2.0 * b * D0 * D1 + a * D1 * D1) / det
            T3 = np.where(valid & np.isfinite(T3), T3, -1.0)
        flat = T3.reshape(K, J1 * J2)
        idx = np.argmax(flat, axis=1)
        best_t = flat[np.arange(K), idx]
    else:
        best_t = np.full(K, -1.0)
        idx = np.zeros(K, dtype=np.int64)
        for a in range(J1):
            D2 = dscale[a][None, :, None] * (thL[:, a, None, :] - thR)
            V2 = (SL[:, a, None] + SR) / (lens[a] ** 2)[None, :, None, None]
            t = _batch_t_stat(D2.reshape(-1, d), V2.reshape(-1, d, d)).reshape(K, J2)
            j2best = np.argmax(t, axis=1)
            tbest = t[np.arange(K), j2best]
            upd = tbest > best_t
            best_t[upd] = tbest[upd]
            idx[upd] = a * J2 + j2best[upd]
    none = best_t < 0
    bj1 = np.where(none, 0, idx // J2 + 1)
    bj2 = np.where(none, 0, idx % J2 + 1)
    return np.where(none, 0.0, best_t), bj1, bj2


# ---------------------------------------------------------------------------
# batched engine (any functional)
# ---------------------------------------------------------------------------


def _sides_batched(state: PrecomputedState, ks: np.ndarray, j1cap: int, j2cap: int, h: int, S0: int, e: int):
    """Per-window-size inner sums and endpoint estimates for all k in ks."""
    K = ks.shape[0]
    d = state.d
    SL = np.full((K, j1cap, d, d), np.nan)
    SR = np.full((K, j2cap, d, d), np.nan)
    thL = np.full((K, j1cap, d), np.nan)
    thR = np.full((K, j2cap, d), np.nan)
    for j in range(1, j1cap + 1):
        sel = ks - j * h + 1 >= S0
        if not sel.any():
            break
        kk = ks[sel]
        t1 = kk - j * h + 1
        thL[sel, j - 1] = state.est_pairs(t1, kk).reshape(-1, d)
        m = j * h - 1
        offs = np.arange(m)
        i_idx = t1[:, None] + offs[None, :]
        delta = state.delta_pairs(t1[:, None], i_idx, kk[:, None]).reshape(-1, m, d)
        okm = np.isfinite(delta).all(axis=2)
        delta = np.where(okm[:, :, None], delta, 0.0)
        w = (((offs + 1.0) * (m - offs)) / (j * h)) ** 2
        wm = w[None, :] * okm
        SL[sel, j - 1] = np.matmul((delta * wm[:, :, None]).transpose(0, 2, 1), delta)
    for j in range(1, j2cap + 1):
        sel = ks + j * h <= e
        if not sel.any():
            break
        kk = ks[sel]
        t2 = kk + j * h
        thR[sel, j - 1] = state.est_pairs(kk + 1, t2).reshape(-1, d)
        m = j * h - 1
        offs = np.arange(1, m + 1)
        i_idx = kk[:, None] + 1 + offs[None, :]
        # sign of the split contrast is irrelevant inside the outer products
        delta = state.delta_pairs(kk[:, None] + 1, i_idx - 1, t2[:, None]).reshape(-1, m, d)
        okm = np.isfinite(delta).all(axis=2)
        delta = np.where(okm[:, :, None], delta, 0.0)
        w = ((offs * (j * h - offs)) / (j * h)) ** 2
        wm = w[None, :] * okm
        SR[sel, j - 1] = np.matmul((delta * wm[:, :, None]).transpose(0, 2, 1), delta)
    return SL, SR, thL, thR


# ---------------------------------------------------------------------------
# closed-form engine (mean functional)
# ---------------------------------------------------------------------------


def _linear_bundle(state: PrecomputedState):
    """Cached prefix moments of the running-sum path P for the mean case."""
    bundle = getattr(state, "_linear_cache", None)
    if bundle is None:
        P = state.components[0].prefix  # (n+1, d), globally centered
        n1, d = P.shape
        cumP = np.zeros_like(P)
        np.cumsum(P[1:], axis=0, out=cumP[1:])
        u = np.arange(n1, dtype=float)[:, None]
        cumUP = np.zeros_like(P)
        np.cumsum(u[1:] * P[1:], axis=0, out=cumUP[1:])
        PP = np.einsum("ui,uj->uij", P[1:], P[1:])
        cumPP = np.zeros((n1, d, d))
        np.cumsum(PP, axis=0, out=cumPP[1:])
        bundle = (P, cumP, cumUP, cumPP)
        state._linear_cache = bundle
    return bundle


def _sum_i(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return hi * (hi + 1) / 2 - (lo - 1) * lo / 2


def _sum_i2(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def f(x):
        return x * (x + 1) * (2 * x + 1) / 6

    return f(hi) - f(lo - 1)


def _quad_sum(cumP, cumUP, cumPP, lo, hi, c, U, W):
    """Sum over i in [lo, hi] of G G' with G = c*P[i] + i*U + W.

    c broadcasts as a scalar or (K,) array; U, W are (K, d).  Empty ranges
    (hi < lo) contribute zero.
    """
    hi_c = np.maximum(hi, lo - 1)
    SP = cumP[hi_c] - cumP[lo - 1]
    SUP = cumUP[hi_c] - cumUP[lo - 1]
    SPP = cumPP[hi_c] - cumPP[lo - 1]
    T1 = _sum_i(lo, hi_c)
    T2 = _sum_i2(lo, hi_c)
    m = np.maximum(hi - lo + 1, 0).astype(float)
    c = np.asarray(c, dtype=float)
    cb = c[..., None, None] if c.ndim else c

    def outer(x, y):
        return np.einsum("...i,...j->...ij", x, y)

    out = cb**2 * SPP
    out += cb * (outer(SUP, U) + outer(U, SUP))
    out += cb * (outer(SP, W) + outer(W, SP))
    out += T2[..., None, None] * outer(U, U)
    out += T1[..., None, None] * (outer(U, W) + outer(W, U))
    out += m[..., None, None] * outer(W, W)
    return out


def _sides_linear(state: PrecomputedState, ks: np.ndarray, j1cap: int, j2cap: int, h: int, S0: int, e: int):
    """Closed-form inner sums for the mean functional (O(1) per window)."""
    P, cumP, cumUP, cumPP = _linear_bundle(state)
    K = ks.shape[0]
    d = state.d
    SL = np.full((K, j1cap, d, d), np.nan)
    SR = np.full((K, j2cap, d, d), np.nan)
    thL = np.full((K, j1cap, d), np.nan)
    thR = np.full((K, j2cap, d), np.nan)
    Pk = P[ks]
    for j in range(1, j1cap + 1):
        c = float(j * h)
        sel = ks - j * h + 1 >= S0
        if not sel.any():
            break
        kk = ks[sel]
        a = kk - j * h
        Pa = P[a]
        Pkk = Pk[sel]
        U = Pa - Pkk
        W = a[:, None] * Pkk - kk[:, None] * Pa
        G2 = _quad_sum(cumP, cumUP, cumPP, a + 1, kk - 1, c, U, W)
        SL[sel, j - 1] = G2 / c**2
        thL[sel, j - 1] = (Pkk - Pa) / c
    for j in range(1, j2cap + 1):
        c = float(j * h)
        sel = ks + j * h <= e
        if not sel.any():
            break
        kk = ks[sel]
        b = kk + j * h
        Pb = P[b]
        Pkk = Pk[sel]
        U = Pb - Pkk
        W = b[:, None] * Pkk - kk[:, None] * Pb
        G2 = _quad_sum(cumP, cumUP, cumPP, kk + 1, b - 1, -c, U, W)
        SR[sel, j - 1] = G2 / c**2
        thR[sel, j - 1] = (Pb - Pkk) / c
    return SL, SR, thL, thR


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------


def nested_profile(state: PrecomputedState, s: int, e: int, h: int, want_windows: bool = True):
    """Maximal nested-window statistic for every k in [s, e].

    Returns (stats, windows) where stats[k - s] is the maximum statistic at
    k (0 when the clipped grid is empty or unusable) and windows[k - s] is
    the maximizing Window or None.  ``want_windows=False`` skips building
    the window list.
    """
    return _profile(state, s, e, h, cap=None, want_windows=want_windows)


def local_profile(state: PrecomputedState, s: int, e: int, h: int, want_windows: bool = False):
    """Smallest-window statistic T_n(k-h+1, k, k+h), clipped to [s, e]."""
    return _profile(state, s, e, h, cap=1, want_windows=want_windows)


def _profile(state: PrecomputedState, s: int, e: int, h: int, cap, want_windows: bool):
    n = state.n
    if h < 2:
        raise ValueError(f"window size h must be >= 2, got {h}")
    if not (1 <= s <= e <= n):
        raise ValueError(f"invalid segment ({s}, {e}) for n={n}")
    num = e - s + 1
    stats = np.zeros(num)
    wins: list[Window | None] = [None] * num if want_windows else None
    S0 = max(s, state.eff_start)
    k0 = S0 + h - 1
    k1 = e - h
    if k0 > k1:
        return stats, wins
    ks = np.arange(k0, k1 + 1)
    j1cap = (k1 - S0 + 1) // h
    j2cap = (e - k0) // h
    if cap is not None:
        j1cap = min(j1cap, cap)
        j2cap = min(j2cap, cap)
    sides = _sides_linear if state.is_linear else _sides_batched
    SL, SR, thL, thR = sides(state, ks, j1cap, j2cap, h, S0, e)
    t, bj1, bj2 = _combine(SL, SR, thL, thR, h)
    stats[ks - s] = t
    if want_windows:
        for i, k in enumerate(ks):
            if bj1[i] > 0:
                wins[k - s] = Window(int(k - bj1[i] * h + 1), int(k + bj2[i] * h))
    return stats, wins


def single_cp_profile(state: PrecomputedState, s: int, e: int) -> np.ndarray:
    """Full-interval statistic T_n(s, k, e) for k = s .. e-1.

    This is the single change-point statistic on the whole segment, with no
    window grid; unusable k yield 0.  The returned array is aligned to
    k = s .. e-1 even when the lag embedding shifts the usable start.
    """
    n = state.n
    if not (1 <= s < e <= n):
        raise ValueError(f"invalid segment ({s}, {e}) for n={n}")
    out = np.zeros(e - s)
    s_eff = max(s, state.eff_start)
    if s_eff >= e:
        return out
    ks = np.arange(s_eff, e)
    if state.is_linear:
        D, V = _single_cp_linear(state, ks, s_eff, e)
    else:
        D, V = _single_cp_batched(state, ks, s_eff, e)
    t = _batch_t_stat(D, V)
    out[ks - s] = np.where(t < 0, 0.0, t)
    return out


def _single_cp_linear(state, ks, s, e):
    P, cumP, cumUP, cumPP = _linear_bundle(state)
    a = s - 1
    Pa = P[a]
    Pe = P[e]
    Pk = P[ks]
    cL = (ks - a).astype(float)
    U = Pa[None, :] - Pk
    W = a * Pk - ks[:, None] * Pa[None, :]
    GL = _quad_sum(cumP, cumUP, cumPP, np.full_like(ks, s), ks - 1, cL, U, W)
    SLk = GL / cL[:, None, None] ** 2
    cR = (e - ks).astype(float)
    U2 = Pe[None, :] - Pk
    W2 = e * Pk - ks[:, None] * Pe[None, :]
    GR = _quad_sum(cumP, cumUP, cumPP, ks + 1, np.full_like(ks, e - 1), -cR, U2, W2)
    SRk = GR / cR[:, None, None] ** 2
    length = float(e - s + 1)
    D = (cL * cR / length**1.5)[:, None] * ((Pk - Pa) / cL[:, None] - (Pe - Pk) / cR[:, None])
    V = (SLk + SRk) / length**2
    return D, V


def _single_cp_batched(state, ks, s, e):
    d = state.d
    K = ks.shape[0]
    D = np.full((K, d), np.nan)
    V = np.full((K, d, d), np.nan)
    length = float(e - s + 1)
    for idx, k in enumerate(ks):
        k = int(k)
        left = state.est_pairs(s, k).reshape(d)
        right = state.est_pairs(k + 1, e).reshape(d)
        D[idx] = (k - s + 1) * (e - k) / length**1.5 * (left - right)
        acc = np.zeros((d, d))
        i = np.arange(s, k)
        if i.size:
            delta = state.delta_pairs(np.full_like(i, s), i, np.full_like(i, k)).reshape(-1, d)
            okm = np.isfinite(delta).all(axis=1)
            delta = np.where(okm[:, None], delta, 0.0)
            w = (((i - s + 1.0) * (k - i)) / (k - s + 1)) ** 2 * okm
            acc += (delta * w[:, None]).T @ delta
        i = np.arange(k + 2, e + 1)
        if i.size:
            delta = state.delta_pairs(np.full_like(i, k + 1), i - 1, np.full_like(i, e)).reshape(-1, d)
            okm = np.isfinite(delta).all(axis=1)
            delta = np.where(okm[:, None], delta, 0.0)
            w = (((e - i + 1.0) * (i - 1 - k)) / (e - k)) ** 2 * okm
            acc += (delta * w[:, None]).T @ delta
        V[idx] = acc / length**2
    return D, V
