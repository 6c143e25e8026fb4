"""Hot inner loops, each in a numba and a pure-numpy flavour.

The backend is picked once at import from the ``FTNCPR_BACKEND`` environment
variable (``numba`` or ``numpy``; default ``numba`` when importable). Both
flavours are always reachable through :func:`get_kernel` so tests and the
benchmark can compare them directly.
"""
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _default_backend():
    name = os.environ.get("FTNCPR_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"FTNCPR_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


BACKEND = _default_backend()


# ---------------------------------------------------------------------------
# Blind phase search
# ---------------------------------------------------------------------------

def _bps_numpy(re, im, cos_b, sin_b, levels, half_window):
    n = re.shape[0]
    mids = 0.5 * (levels[1:] + levels[:-1])
    xr = re[None, :] * cos_b[:, None] + im[None, :] * sin_b[:, None]
    xi = im[None, :] * cos_b[:, None] - re[None, :] * sin_b[:, None]
    sr = levels[np.searchsorted(mids, xr)]
    si = levels[np.searchsorted(mids, xi)]
    d = (xr - sr) ** 2 + (xi - si) ** 2
    csum = np.zeros((d.shape[0], n + 1))
    np.cumsum(d, axis=1, out=csum[:, 1:])
    idx = np.arange(n)
    hi = np.minimum(idx + half_window, n)
    lo = np.maximum(idx - half_window, 0)
    windowed = csum[:, hi] - csum[:, lo]
    # argmin returns the first minimum, i.e. ties go to the smaller test phase
    return np.argmin(windowed, axis=0)


@njit(cache=True)
def _bps_numba(re, im, cos_b, sin_b, levels, half_window):
    n = re.shape[0]
    n_phase = cos_b.shape[0]
    mids = 0.5 * (levels[1:] + levels[:-1])
    best = np.full(n, np.inf)
    best_idx = np.zeros(n, dtype=np.int64)
    csum = np.zeros(n + 1)
    for b in range(n_phase):
        c = cos_b[b]
        s = sin_b[b]
        acc = 0.0
        for k in range(n):
            xr = re[k] * c + im[k] * s
            xi = im[k] * c - re[k] * s
            sr = levels[np.searchsorted(mids, xr)]
            si = levels[np.searchsorted(mids, xi)]
            acc += (xr - sr) ** 2 + (xi - si) ** 2
            csum[k + 1] = acc
        for k in range(n):
            hi = min(k + half_window, n)
            lo = max(k - half_window, 0)
            w = csum[hi] - csum[lo]
            if w < best[k]:
                best[k] = w
                best_idx[k] = b
    return best_idx


# ---------------------------------------------------------------------------
# Binary Viterbi over a real FIR channel
# ---------------------------------------------------------------------------
#
# Causal model: r[t] = sum_k g[k] a[t-k] + sum_j tail[j] a[t-L-j], a in {-1,+1},
# a[t] = 0 outside [0, n_sym). State bit i holds a[t-i]. Observation r[t] is
# available for t in [delay, delay + n_obs). ``tail`` terms are cancelled per
# survivor from its own decision history. Callers pad ``g`` to length >= 2.

_TABLE_MAX = 20


def _tail_table(tail):
    # table[w] = sum_j tail[j] * (+1 if bit j of w else -1), summed in j order
    T = tail.shape[0]
    w = np.arange(1 << T)
    acc = np.zeros(1 << T)
    for j in range(T):
        acc = acc + tail[j] * (((w >> j) & 1) * 2.0 - 1.0)
    return acc


@njit(cache=True)
def _tail_table_nb(tail):
    T = tail.shape[0]
    out = np.empty(1 << T)
    for w in range(1 << T):
        acc = 0.0
        for j in range(T):
            acc += tail[j] * (2.0 * ((w >> j) & 1) - 1.0)
        out[w] = acc
    return out


def _viterbi_numpy(obs, g, tail, delay, n_sym, traceback):
    L = g.shape[0]
    M = L - 1
    S = 1 << M
    T = tail.shape[0]
    n_steps = n_sym + max(L - 1 - delay, 0)
    n_steps = max(n_steps, delay + obs.shape[0])
    states = np.arange(S)
    bits = ((states[:, None] >> np.arange(M)[None, :]) & 1) * 2.0 - 1.0
    top = (states >> (M - 1)) & 1
    pm = np.full(S, np.inf)
    pm[0] = 0.0
    # tail history packed as bits (bit j set <=> a[t - L - j] = +1); entries
    # at positions before the block are masked through the tail weights
    hist = np.zeros(S, dtype=np.int64)
    table = _tail_table(tail) if 0 < T <= _TABLE_MAX else None
    wbits = np.arange(T)
    dec = np.zeros((n_steps, S), dtype=np.uint8)
    out = np.zeros(n_sym)
    decided = np.zeros(n_sym, dtype=np.bool_)
    for t in range(n_steps):
        # symbol positions t-k for k = 0..L-1 (k=0 is the new bit)
        pos = t - np.arange(L)
        valid = ((pos >= 0) & (pos < n_sym)).astype(float)
        gv = g * valid
        ob = t - delay
        have_obs = 0 <= ob < obs.shape[0]
        # contribution of the already-stored bits (k >= 1)
        past = bits @ gv[1:]
        if T:
            if table is not None and t - L - (T - 1) >= 0:
                past = past + table[hist]
            else:
                tpos = t - L - wbits
                tv = tail * ((tpos >= 0) & (tpos < n_sym))
                past = past + (((hist[:, None] >> wbits) & 1) * 2.0 - 1.0) @ tv
        new_allowed = t < n_sym
        cand = np.full((S, 2), np.inf)
        for b in (0, 1):
            if b == 1 and not new_allowed:
                continue
            v = past + gv[0] * (2.0 * b - 1.0)
            bm = (obs[ob] - v) ** 2 if have_obs else 0.0
            cand[:, b] = pm + bm
        # next state ns = ((s << 1) | b) & (S - 1); predecessors differ in top bit
        new_pm = np.full(S, np.inf)
        new_dec = np.zeros(S, dtype=np.uint8)
        for b in (0, 1):
            ns = ((states << 1) | b) & (S - 1)
            m = cand[:, b]
            # two predecessors per ns: s with top bit 0 and with top bit 1
            for tb in (0, 1):
                sel = top == tb
                tgt = ns[sel]
                mv = m[sel]
                better = mv < new_pm[tgt]
                new_pm[tgt[better]] = mv[better]
                new_dec[tgt[better]] = tb
        if T:
            prev = ((states >> 1) | (new_dec.astype(np.int64) << (M - 1))) & (S - 1)
            dropped = (prev >> (M - 1)) & 1
            hist = ((hist[prev] << 1) | dropped) & ((1 << T) - 1)
        pm = new_pm
        dec[t] = new_dec
        if traceback > 0 and t >= traceback and (t + 1) % traceback == 0:
            # chunked traceback: decide the block traceback..2*traceback-1 back
            s = int(np.argmin(pm))
            for u in range(t, t - traceback, -1):
                s = ((s >> 1) | (int(dec[u, s]) << (M - 1))) & (S - 1)
            for u in range(t - traceback, max(t - 2 * traceback, -1), -1):
                if u < n_sym:
                    out[u] = 2.0 * (s & 1) - 1.0
                    decided[u] = True
                s = ((s >> 1) | (int(dec[u, s]) << (M - 1))) & (S - 1)
    s = int(np.argmin(pm))
    for u in range(n_steps - 1, -1, -1):
        if u < n_sym and not decided[u]:
            out[u] = 2.0 * (s & 1) - 1.0
        s = ((s >> 1) | (int(dec[u, s]) << (M - 1))) & (S - 1)
    return out


@njit(cache=True)
def _viterbi_numba(obs, g, tail, delay, n_sym, traceback):
    L = g.shape[0]
    M = L - 1
    S = 1 << M
    T = tail.shape[0]
    n_steps = n_sym + max(L - 1 - delay, 0)
    n_steps = max(n_steps, delay + obs.shape[0])
    n_obs = obs.shape[0]
    pm = np.full(S, np.inf)
    pm[0] = 0.0
    new_pm = np.empty(S)
    hist = np.zeros(S, dtype=np.int64)
    new_hist = np.zeros(S, dtype=np.int64)
    use_table = T > 0 and T <= _TABLE_MAX
    table = _tail_table_nb(tail) if use_table else np.zeros(1)
    mask = (1 << T) - 1
    dec = np.zeros((n_steps, S), dtype=np.uint8)
    out = np.zeros(n_sym)
    decided = np.zeros(n_sym, dtype=np.bool_)
    gv = np.empty(L)
    tv = np.empty(T)
    for t in range(n_steps):
        for k in range(L):
            p = t - k
            gv[k] = g[k] if (p >= 0 and p < n_sym) else 0.0
        for j in range(T):
            p = t - L - j
            tv[j] = tail[j] if (p >= 0 and p < n_sym) else 0.0
        ob = t - delay
        have_obs = ob >= 0 and ob < n_obs
        r = obs[ob] if have_obs else 0.0
        nb = 2 if t < n_sym else 1
        full_tail = use_table and t - L - (T - 1) >= 0
        for s in range(S):
            new_pm[s] = np.inf
        for s in range(S):
            if pm[s] == np.inf:
                continue
            past = 0.0
            for k in range(1, L):
                past += gv[k] * (2.0 * ((s >> (k - 1)) & 1) - 1.0)
            if full_tail:
                past += table[hist[s]]
            else:
                acc = 0.0
                for j in range(T):
                    acc += tv[j] * (2.0 * ((hist[s] >> j) & 1) - 1.0)
                past += acc
            for b in range(nb):
                v = past + gv[0] * (2.0 * b - 1.0)
                m = pm[s]
                if have_obs:
                    m += (r - v) ** 2
                ns = ((s << 1) | b) & (S - 1)
                # s ascending visits the top-bit-0 predecessor first; strict <
                # keeps it on ties, as in the numpy flavour
                if m < new_pm[ns]:
                    new_pm[ns] = m
                    dec[t, ns] = (s >> (M - 1)) & 1
        if T > 0:
            for ns in range(S):
                prev = ((ns >> 1) | (int(dec[t, ns]) << (M - 1))) & (S - 1)
                new_hist[ns] = ((hist[prev] << 1) | ((prev >> (M - 1)) & 1)) & mask
            for ns in range(S):
                hist[ns] = new_hist[ns]
        for s in range(S):
            pm[s] = new_pm[s]
        if traceback > 0 and t >= traceback and (t + 1) % traceback == 0:
            # chunked traceback: decide the block traceback..2*traceback-1 back
            s = int(np.argmin(pm))
            for u in range(t, t - traceback, -1):
                s = ((s >> 1) | (int(dec[u, s]) << (M - 1))) & (S - 1)
            for u in range(t - traceback, max(t - 2 * traceback, -1), -1):
                if u < n_sym:
                    out[u] = 2.0 * (s & 1) - 1.0
                    decided[u] = True
                s = ((s >> 1) | (int(dec[u, s]) << (M - 1))) & (S - 1)
    s = int(np.argmin(pm))
    for u in range(n_steps - 1, -1, -1):
        if u < n_sym and not decided[u]:
            out[u] = 2.0 * (s & 1) - 1.0
        s = ((s >> 1) | (int(dec[u, s]) << (M - 1))) & (S - 1)
    return out


# ---------------------------------------------------------------------------
# CMA 2x2 butterfly, fractionally spaced (2 samples in, 1 out)
# ---------------------------------------------------------------------------

def _cma_numpy(xin, yin, w, mu, r2, passes, adapt_mask):
    n_taps = w.shape[2]
    c = n_taps // 2
    n_out = xin.shape[0] // 2
    xp = np.concatenate((np.zeros(c, xin.dtype), xin, np.zeros(c, xin.dtype)))
    yp = np.concatenate((np.zeros(c, yin.dtype), yin, np.zeros(c, yin.dtype)))
    for _ in range(passes):
        for k in range(n_out):
            ux = xp[2 * k : 2 * k + n_taps][::-1]
            uy = yp[2 * k : 2 * k + n_taps][::-1]
            for p in range(2):
                if not adapt_mask[p]:
                    continue
                z = np.dot(w[p, 0], ux) + np.dot(w[p, 1], uy)
                e = r2 - (z.real * z.real + z.imag * z.imag)
                w[p, 0] += mu * e * z * np.conj(ux)
                w[p, 1] += mu * e * z * np.conj(uy)
    out = np.empty((2, n_out), dtype=np.complex128)
    for k in range(n_out):
        ux = xp[2 * k : 2 * k + n_taps][::-1]
        uy = yp[2 * k : 2 * k + n_taps][::-1]
        for p in range(2):
            out[p, k] = np.dot(w[p, 0], ux) + np.dot(w[p, 1], uy)
    return out, w


@njit(cache=True)
def _cma_numba(xin, yin, w, mu, r2, passes, adapt_mask):
    n_taps = w.shape[2]
    c = n_taps // 2
    n_in = xin.shape[0]
    n_out = n_in // 2
    for _ in range(passes):
        for k in range(n_out):
            for p in range(2):
                if not adapt_mask[p]:
                    continue
                z = 0j
                for i in range(n_taps):
                    m = 2 * k + c - i
                    if m >= 0 and m < n_in:
                        z += w[p, 0, i] * xin[m] + w[p, 1, i] * yin[m]
                e = r2 - (z.real * z.real + z.imag * z.imag)
                g = mu * e * z
                for i in range(n_taps):
                    m = 2 * k + c - i
                    if m >= 0 and m < n_in:
                        w[p, 0, i] += g * np.conj(xin[m])
                        w[p, 1, i] += g * np.conj(yin[m])
    out = np.empty((2, n_out), dtype=np.complex128)
    for k in range(n_out):
        for p in range(2):
            z = 0j
            for i in range(n_taps):
                m = 2 * k + c - i
                if m >= 0 and m < n_in:
                    z += w[p, 0, i] * xin[m] + w[p, 1, i] * yin[m]
            out[p, k] = z
    return out, w


_KERNELS = {
    "bps": {"numba": _bps_numba, "numpy": _bps_numpy},
    "viterbi": {"numba": _viterbi_numba, "numpy": _viterbi_numpy},
    "cma": {"numba": _cma_numba, "numpy": _cma_numpy},
}


def get_kernel(name, backend=None):
    """Return kernel ``name`` for ``backend`` (defaults to :data:`BACKEND`)."""
    backend = backend or BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        backend = "numpy"
    if name not in _KERNELS:
        raise KeyError(f"unknown kernel {name!r}")
    return _KERNELS[name][backend]
