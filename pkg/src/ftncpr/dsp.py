"""Pulse design, FIR filtering and seeded random streams.

Time is measured in units of the Nyquist symbol period ``T0`` throughout, so
a raised-cosine pulse has its zero crossings at the nonzero integers.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

# one independent stream per noise source so that, e.g., changing the OSNR
# leaves the phase-noise realization untouched
STREAMS = {"bits-x": 0, "bits-y": 1, "phase": 2, "awgn-x": 3, "awgn-y": 4}

_SINGULAR_TOL = 1e-9


@dataclass
class RealTaps:
    """Real FIR coefficients with the index of the ``t = 0`` tap."""

    coefficients: np.ndarray
    center_index: int

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.ndim != 1 or self.coefficients.size == 0:
            raise ParameterError("taps must be a nonempty 1-D sequence")
        if not 0 <= self.center_index < self.coefficients.size:
            raise ParameterError("center_index outside the tap vector")

    def __len__(self):
        return self.coefficients.size

    def is_symmetric(self, tol=1e-12):
        c = self.center_index
        n = min(c, self.coefficients.size - 1 - c)
        left = self.coefficients[c - n : c][::-1]
        right = self.coefficients[c + 1 : c + 1 + n]
        return bool(np.all(np.abs(left - right) < tol))


def _check_rolloff(rolloff):
    if not (0.0 < rolloff <= 1.0):
        raise ParameterError(f"rolloff must lie in (0, 1], got {rolloff}")


def rrc_response(t, rolloff):
    """Root-raised-cosine impulse response at times ``t`` (units of T0).

    Not energy normalized; the peak value is ``1 - rolloff + 4 rolloff / pi``.
    The removable singularities at ``t = 0`` and ``|t| = 1 / (4 rolloff)`` are
    replaced by their limits.
    """
    _check_rolloff(rolloff)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b = rolloff
    out = np.empty_like(t)
    at_zero = np.abs(t) < _SINGULAR_TOL
    at_edge = np.abs(np.abs(t) - 1.0 / (4.0 * b)) < _SINGULAR_TOL
    regular = ~(at_zero | at_edge)
    x = t[regular]
    out[regular] = (np.sin(np.pi * x * (1 - b)) + 4 * b * x * np.cos(np.pi * x * (1 + b))) / (
        np.pi * x * (1 - (4 * b * x) ** 2)
    )
    out[at_zero] = 1 - b + 4 * b / np.pi
    q = np.pi / (4 * b)
    out[at_edge] = b / np.sqrt(2) * ((1 + 2 / np.pi) * np.sin(q) + (1 - 2 / np.pi) * np.cos(q))
    return out


def raised_cosine(t, rolloff):
    """Raised-cosine pulse at times ``t`` (units of T0), unit peak."""
    _check_rolloff(rolloff)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b = rolloff
    den = 1 - (2 * b * t) ** 2
    singular = np.abs(den) < _SINGULAR_TOL
    safe = np.where(singular, 1.0, den)
    out = np.sinc(t) * np.cos(np.pi * b * t) / safe
    return np.where(singular, np.pi / 4 * np.sinc(1 / (2 * b)), out)


def design_rrc(rolloff, span=32, samples_per_nyquist_symbol=4):
    """Unit-energy RRC filter spanning ``span`` Nyquist symbols.

    Parameters
    ----------
    rolloff : float
        Excess bandwidth factor in (0, 1].
    span : int
        Filter length in Nyquist symbols (at least 8).
    samples_per_nyquist_symbol : int
        Oversampling relative to the Nyquist symbol period T0.

    Returns
    -------
    RealTaps
        ``span * samples_per_nyquist_symbol + 1`` symmetric taps with
        ``sum(taps**2) == 1``.
    """
    _check_rolloff(rolloff)
    if span < 8:
        raise ParameterError(f"span must be >= 8, got {span}")
    if samples_per_nyquist_symbol < 2:
        raise ParameterError("need at least 2 samples per Nyquist symbol")
    sps = int(samples_per_nyquist_symbol)
    n = int(span) * sps
    if n % 2:
        n += 1
    c = n // 2
    # build one half and mirror it so the taps are symmetric to the bit
    half = rrc_response(np.arange(c + 1) / sps, rolloff)
    taps = np.concatenate((half[:0:-1], half))
    taps /= np.sqrt(np.sum(taps**2))
    return RealTaps(taps, c)


def fir_filter(signal, taps):
    """Center-aligned linear convolution.

    Output sample ``n`` lines up with input sample ``n``; the output has the
    input's length and samples beyond the block edges are taken as zero.
    """
    x = np.asarray(signal)
    if not isinstance(taps, RealTaps):
        raise ParameterError("taps must be RealTaps")
    full = np.convolve(x, taps.coefficients)
    c = taps.center_index
    return full[c : c + x.size]


def combined_isi_taps(alpha, rolloff, half_span):
    """Symbol-spaced response of the Tx RRC / Rx RRC cascade under time packing.

    Returns ``h[k] = RC(k * alpha)`` for ``k = -half_span .. half_span``, the
    discrete ISI channel seen at the matched-filter output when symbols are
    sent every ``alpha * T0``.
    """
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha}")
    if half_span < 1:
        raise ParameterError("half_span must be >= 1")
    k = np.arange(-half_span, half_span + 1)
    h = raised_cosine(k * alpha, rolloff)
    # exact zeros at alpha = 1 and exact symmetry by construction
    h[np.abs(h) < 1e-15] = 0.0
    h = 0.5 * (h + h[::-1])
    h[half_span] = 1.0
    return RealTaps(h, int(half_span))


@dataclass
class RngStream:
    """Reproducible random source keyed by ``(seed, stream_id)``."""

    seed: int
    stream_id: int
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.stream_id, str):
            self.stream_id = STREAMS[self.stream_id]
        ss = np.random.SeedSequence([int(self.seed) & (2**64 - 1), int(self.stream_id)])
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def bits(self, size=None):
        return self._gen.integers(0, 2, size=size, dtype=np.int8)


def next_gaussian(rng):
    """One standard-normal draw from ``rng``."""
    return float(rng.normal())


def next_bit(rng):
    """One uniform bit from ``rng``."""
    return int(rng.bits())
