"""Polarization demultiplexing (CMA) and sequence detection (MLSE)."""
import itertools
from dataclasses import dataclass, field

import numpy as np

from .dsp import RealTaps, combined_isi_taps
from .errors import EqualizerDivergedError, ParameterError
from .kernels import get_kernel
from .link import DualPolSignal


@dataclass(frozen=True)
class CmaParams:
    n_taps: int = 3
    step: float = 1e-4
    radius: float = None  # R^2 on the unit-power input; None -> E|s|^4 / E|s|^2
    iterations: int = 3

    def __post_init__(self):
        if self.n_taps < 1 or self.n_taps % 2 == 0:
            raise ParameterError("n_taps must be odd and positive")
        if self.step <= 0:
            raise ParameterError("step must be positive")
        if self.radius is not None and self.radius <= 0:
            raise ParameterError("radius must be positive")
        if self.iterations < 1:
            raise ParameterError("iterations must be >= 1")


@dataclass(frozen=True)
class MlseParams:
    """Viterbi detector settings.

    ``tail`` holds optional post-cursor coefficients beyond the trellis
    memory: ``tail[j]`` weights the symbol ``center + 1 + j`` positions in the
    past. They are cancelled per survivor, leaving the 2**(L-1)-state trellis
    unchanged. Empty ``tail`` gives the plain Viterbi detector.
    """

    taps: RealTaps = field(default_factory=lambda: combined_isi_taps(0.5, 0.1, 3))
    traceback: int = 32
    tail: tuple = ()

    def __post_init__(self):
        if len(self.taps) % 2 == 0:
            raise ParameterError("MLSE needs an odd number of taps")
        if self.traceback < 0:
            raise ParameterError("traceback must be >= 0")
        object.__setattr__(self, "tail", tuple(float(v) for v in self.tail))

    @classmethod
    def for_channel(cls, alpha, rolloff, half_span=3, tail_len=0, traceback=32):
        """Analytic FTN taps, optionally with ``tail_len`` post-cursor taps."""
        full = combined_isi_taps(alpha, rolloff, half_span + tail_len)
        c = full.center_index
        taps = RealTaps(full.coefficients[c - half_span : c + half_span + 1], half_span)
        tail = full.coefficients[c + half_span + 1 :]
        return cls(taps=taps, traceback=traceback, tail=tuple(tail))


def _cma_radius(sig):
    s = np.concatenate((sig.x, sig.y))
    p2 = np.mean(np.abs(s) ** 2)
    return float(np.mean(np.abs(s) ** 4) / p2)


def _correlation(a, b):
    den = np.sqrt(np.sum(np.abs(a) ** 2) * np.sum(np.abs(b) ** 2))
    return float(np.abs(np.vdot(a, b)) / den) if den > 0 else 0.0


def cma_equalize(sig, params=CmaParams(), backend=None):
    """2x2 butterfly CMA at 2 samples/symbol in, 1 sample/symbol out.

    The four FIR filters start as center spikes (x->x and y->y), are adapted
    with ``w += mu * (R^2 - |z|^2) * z * conj(u)`` for ``params.iterations``
    passes over the block, and are then frozen to produce the output. If both
    outputs lock onto the same source the y branch is restarted orthogonal to
    the x branch and re-adapted.

    Raises
    ------
    EqualizerDivergedError
        If the output power exceeds 100x the input power.
    """
    if len(sig) % 2:
        raise ParameterError("CMA input must hold 2 samples per symbol")
    # adapt on a unit-power copy so the step size is scale free
    scale = np.sqrt(0.5 * (np.mean(np.abs(sig.x) ** 2) + np.mean(np.abs(sig.y) ** 2)))
    if not scale > 0:
        raise ParameterError("CMA input has zero power")
    sig = DualPolSignal(sig.x / scale, sig.y / scale)
    r2 = params.radius if params.radius is not None else _cma_radius(sig)
    kernel = get_kernel("cma", backend)
    c = params.n_taps // 2
    w = np.zeros((2, 2, params.n_taps), dtype=complex)
    w[0, 0, c] = 1.0
    w[1, 1, c] = 1.0
    xin = np.ascontiguousarray(sig.x)
    yin = np.ascontiguousarray(sig.y)
    both = np.array([True, True])
    out, w = kernel(xin, yin, w, params.step, r2, params.iterations, both)
    if _correlation(out[0], out[1]) > 0.9:
        w[1, 1] = np.conj(w[0, 0][::-1])
        w[1, 0] = -np.conj(w[0, 1][::-1])
        out, w = kernel(xin, yin, w, params.step, r2, params.iterations, np.array([False, True]))
    p_in = np.mean(np.abs(xin) ** 2) + np.mean(np.abs(yin) ** 2)
    p_out = np.mean(np.abs(out[0]) ** 2) + np.mean(np.abs(out[1]) ** 2)
    if not np.isfinite(p_out) or p_out > 100 * p_in:
        raise EqualizerDivergedError(f"CMA output power {p_out:.3g} vs input {p_in:.3g}")
    # a unitary demux preserves total power; undo the gain error of an
    # approximate radius
    p_sym = np.mean(np.abs(xin[::2]) ** 2) + np.mean(np.abs(yin[::2]) ** 2)
    g = scale * np.sqrt(p_sym / p_out)
    return DualPolSignal(out[0] * g, out[1] * g)


def _detect_real(obs, params, backend):
    g = params.taps.coefficients
    if g.size == 1:
        g = np.array([g[0], 0.0])
    kernel = get_kernel("viterbi", backend)
    return kernel(
        np.ascontiguousarray(obs, dtype=float),
        np.ascontiguousarray(g, dtype=float),
        np.asarray(params.tail, dtype=float),
        params.taps.center_index,
        obs.size,
        params.traceback,
    )


def mlse_equalize(symbols, params=MlseParams(), backend=None):
    """Hard QPSK decisions from two binary Viterbi detectors (I and Q).

    Model: ``r[n] = sum_m taps[center + m] * a[n - m]`` with ``a = 0`` outside
    the block. Real taps make the quadratures independent, so each runs its
    own 2**(L-1)-state trellis.
    """
    z = np.asarray(symbols, dtype=complex)
    i = _detect_real(z.real, params, backend)
    q = _detect_real(z.imag, params, backend)
    return i + 1j * q


def mlse_oracle(symbols, params=MlseParams()):
    """Exhaustive ML search over every QPSK sequence of the block length.

    Only for blocks of at most 12 symbols. The squared error of a complex
    sequence ``aI + j aQ`` splits exactly into an I term and a Q term for real
    taps, so the full 4**n cost table is the outer sum of two 2**n tables.
    """
    r = np.asarray(symbols, dtype=complex)
    n = r.size
    if n > 12:
        raise ParameterError("oracle refuses blocks longer than 12 symbols")
    h = params.taps.coefficients
    c = params.taps.center_index
    G = np.zeros((n, n))
    for row in range(n):
        for col in range(n):
            k = row - col + c
            if 0 <= k < h.size:
                G[row, col] = h[k]
    cand = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    model = cand @ G.T
    cost_i = np.sum((r.real[None, :] - model) ** 2, axis=1)
    cost_q = np.sum((r.imag[None, :] - model) ** 2, axis=1)
    total = cost_i[:, None] + cost_q[None, :]
    best = np.unravel_index(np.argmin(total), total.shape)
    return cand[best[0]] + 1j * cand[best[1]]


def estimate_isi_taps(received, training, half_span=3):
    """Least-squares symbol-spaced channel estimate from known symbols.

    Solves ``received ~ sum_m h[m] training[n - m]`` for real, centered taps.
    """
    r = np.asarray(received, dtype=complex)
    a = np.asarray(training, dtype=complex)
    n = min(r.size, a.size)
    K = half_span
    cols = []
    for m in range(-K, K + 1):
        col = np.zeros(n, dtype=complex)
        if m >= 0:
            col[m:] = a[: n - m]
        else:
            col[:m] = a[-m:n]
        cols.append(col)
    A = np.stack(cols, axis=1)[K : n - K]
    b = r[K : n - K]
    # I and Q are separate real equations sharing the same real taps
    h, *_ = np.linalg.lstsq(np.concatenate((A.real, A.imag)), np.concatenate((b.real, b.imag)), rcond=None)
    return RealTaps(h, K)
