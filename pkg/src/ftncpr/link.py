"""Transmitter and channel for a dual-polarization FTN-QPSK link."""
import math
from dataclasses import dataclass, replace

import numpy as np

from .dsp import RealTaps, RngStream, fir_filter, rrc_response
from .errors import ParameterError

B_REF_HZ = 12.5e9


@dataclass(frozen=True)
class LinkConfig:
    """Physical parameters of one link realization.

    ``osnr_db = inf`` switches the AWGN stage off. ``osnr_pols`` is the number
    of polarizations the OSNR is referred to (2 for the usual dual-pol
    convention).
    """

    alpha: float = 0.5
    rolloff: float = 0.1
    baud: float = 28e9
    sps: int = 2
    linewidth_hz: float = 0.0
    osnr_db: float = math.inf
    n_symbols: int = 2**17
    pol_mix_angle: float = math.pi / 7
    pol_mix_phase: float = 0.0
    rrc_span: int = 32
    osnr_pols: int = 2

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0.0 < self.rolloff <= 1.0):
            raise ParameterError(f"rolloff must lie in (0, 1], got {self.rolloff}")
        if self.sps < 2:
            raise ParameterError("sps must be >= 2")
        if self.linewidth_hz < 0:
            raise ParameterError("linewidth_hz must be >= 0")
        if self.n_symbols < 1000:
            raise ParameterError("n_symbols must be >= 1000")
        if self.osnr_pols not in (1, 2):
            raise ParameterError("osnr_pols must be 1 or 2")
        if math.isnan(self.osnr_db):
            raise ParameterError("osnr_db must not be NaN")

    @property
    def sample_rate(self):
        return self.baud * self.sps

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class DualPolSignal:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=complex)
        self.y = np.asarray(self.y, dtype=complex)
        if self.x.shape != self.y.shape:
            raise ParameterError("x and y polarizations differ in length")

    def __len__(self):
        return self.x.size

    def map(self, fn):
        return DualPolSignal(fn(self.x), fn(self.y))


@dataclass
class GroundTruth:
    bits_x: np.ndarray
    bits_y: np.ndarray
    symbols_x: np.ndarray
    symbols_y: np.ndarray
    phase: np.ndarray


def map_qpsk(bits):
    """Gray-map bit pairs onto unit-amplitude QPSK.

    ``(0,0) -> 1+1j``, ``(0,1) -> -1+1j``, ``(1,1) -> -1-1j``, ``(1,0) -> 1-1j``.
    """
    bits = np.asarray(bits).astype(np.int8)
    if bits.size % 2:
        raise ParameterError("QPSK mapping needs an even number of bits")
    b = bits.reshape(-1, 2)
    # second bit picks the in-phase sign, first bit the quadrature sign
    return (1 - 2 * b[:, 1]) + 1j * (1 - 2 * b[:, 0])


def demap_qpsk(symbols):
    """Hard decision inverse of :func:`map_qpsk`."""
    s = np.asarray(symbols)
    b0 = (s.imag < 0).astype(np.int8)
    b1 = (s.real < 0).astype(np.int8)
    return np.stack((b0, b1), axis=1).reshape(-1)


def shaping_taps(cfg):
    """Unit-energy RRC sampled every ``alpha / sps`` Nyquist periods."""
    spn = cfg.sps / cfg.alpha
    if spn < 2:
        raise ParameterError("sps / alpha must give at least 2 samples per Nyquist symbol")
    c = int(math.ceil(cfg.rrc_span * spn / 2))
    t = np.arange(-c, c + 1) / spn
    half = rrc_response(t[c:], cfg.rolloff)
    taps = np.concatenate((half[:0:-1], half))
    taps /= np.sqrt(np.sum(taps**2))
    return RealTaps(taps, c)


def ftn_shape(symbols, cfg):
    """Pulse-shape ``symbols`` at FTN spacing.

    One impulse every ``cfg.sps`` samples, filtered by an RRC whose Nyquist
    period is ``sps / alpha`` samples. The output runs at ``baud * sps``.
    """
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.size == 0:
        raise ParameterError("no symbols to shape")
    taps = shaping_taps(cfg)
    up = np.zeros(symbols.size * cfg.sps, dtype=complex)
    up[:: cfg.sps] = symbols
    return fir_filter(up, taps)


def matched_filter(signal, cfg):
    """Receive RRC, aligned so sample ``n * sps`` is symbol ``n``."""
    return fir_filter(np.asarray(signal, dtype=complex), shaping_taps(cfg))


def apply_phase_noise(sig, cfg, rng):
    """Common Wiener laser phase noise on both polarizations.

    Returns the rotated signal and the true per-sample phase (starting at 0).
    """
    n = len(sig)
    if cfg.linewidth_hz == 0:
        return DualPolSignal(sig.x.copy(), sig.y.copy()), np.zeros(n)
    sigma = math.sqrt(2 * math.pi * cfg.linewidth_hz / cfg.sample_rate)
    theta = np.zeros(n)
    np.cumsum(sigma * rng.normal(n - 1), out=theta[1:])
    rot = np.exp(1j * theta)
    return DualPolSignal(sig.x * rot, sig.y * rot), theta


def snr_from_osnr(osnr_db, baud, pols=2, b_ref=B_REF_HZ):
    """Linear per-symbol SNR (Es/N0) for an OSNR in a ``b_ref`` bandwidth."""
    return 10 ** (osnr_db / 10) * 2 * b_ref / (pols * baud)


def apply_awgn_osnr(sig, cfg, rng, rng_y=None):
    """Add white complex Gaussian noise at the OSNR in ``cfg``.

    Signal power is measured per polarization from the waveform itself; the
    per-sample noise variance is ``P * sps / SNR`` so that the Es/N0 seen by a
    unit-energy matched filter equals the OSNR-derived SNR. ``rng`` feeds the
    x polarization, ``rng_y`` (default: ``rng`` again) the y polarization.
    """
    if math.isinf(cfg.osnr_db) and cfg.osnr_db > 0:
        return DualPolSignal(sig.x.copy(), sig.y.copy())
    snr = snr_from_osnr(cfg.osnr_db, cfg.baud, cfg.osnr_pols)
    out = []
    for s, r in ((sig.x, rng), (sig.y, rng_y or rng)):
        p = np.mean(np.abs(s) ** 2)
        std = math.sqrt(p * cfg.sps / snr / 2)
        w = r.normal(2 * s.size)
        out.append(s + std * (w[: s.size] + 1j * w[s.size :]))
    return DualPolSignal(*out)


def apply_pol_mix(sig, angle, phase):
    """Static unitary Jones rotation."""
    c, s = math.cos(angle), math.sin(angle)
    e = complex(math.cos(phase), math.sin(phase))
    x = c * sig.x + s * e * sig.y
    y = -s * e.conjugate() * sig.x + c * sig.y
    return DualPolSignal(x, y)


def undo_pol_mix(sig, angle, phase):
    """Conjugate-transpose of :func:`apply_pol_mix`."""
    c, s = math.cos(angle), math.sin(angle)
    e = complex(math.cos(phase), math.sin(phase))
    x = c * sig.x - s * e * sig.y
    y = s * e.conjugate() * sig.x + c * sig.y
    return DualPolSignal(x, y)


def transmit(cfg, seed):
    """Random bits for both polarizations, mapped and FTN-shaped.

    Returns the transmitted waveform and the matching ground truth (phase
    left empty; the channel fills it in).
    """
    bx = RngStream(seed, "bits-x").bits(2 * cfg.n_symbols)
    by = RngStream(seed, "bits-y").bits(2 * cfg.n_symbols)
    sx, sy = map_qpsk(bx), map_qpsk(by)
    wave = DualPolSignal(ftn_shape(sx, cfg), ftn_shape(sy, cfg))
    return wave, GroundTruth(bx, by, sx, sy, np.zeros(0))
