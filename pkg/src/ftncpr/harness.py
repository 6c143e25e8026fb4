"""End-to-end Monte-Carlo experiment: link, receiver DSP, BER counting.

The receive chain per trial is::

    bits -> QPSK -> FTN shaping -> pol mix -> phase noise -> AWGN
         -> matched filter -> CMA (or plain downsampling) -> CPR -> MLSE
         -> pi/2 ambiguity / pol-swap resolution -> BER

Everything upstream of the carrier recovery depends only on the seed,
linewidth and OSNR, so all schemes of a sweep see bit-identical received
waveforms for the same ``(linewidth, osnr, seed)`` cell.
"""
import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .cpr import FIXED_LEVELS, BpsParams, apply_phase, polybinary_transform, recover_carrier
from .dsp import RealTaps, RngStream, combined_isi_taps
from .equalize import CmaParams, MlseParams, cma_equalize, estimate_isi_taps, mlse_equalize
from .errors import CalibrationError, EqualizerDivergedError, NotMeasurableError, ParameterError
from .link import (
    LinkConfig,
    apply_awgn_osnr,
    apply_phase_noise,
    apply_pol_mix,
    demap_qpsk,
    matched_filter,
    transmit,
)

log = logging.getLogger(__name__)

SCHEMES = ("conventional", "corrected")
CSV_HEADER = "scheme,alpha,linewidth_hz,osnr_db,seed,bits,errors,ber,levels"
MIN_AGREEMENT = 0.6
SWEEP_BPS_WINDOW = 512


@dataclass(frozen=True)
class SweepConfig:
    link: LinkConfig = field(default_factory=LinkConfig)
    schemes: tuple = SCHEMES
    linewidths_hz: tuple = (300e3, 500e3, 800e3, 1e6)
    osnr_db_list: tuple = tuple(float(v) for v in range(10, 23))
    seeds: tuple = (1, 2, 3, 4)
    # a longer window than the library default; see the project notes
    bps: BpsParams = field(default_factory=lambda: BpsParams(window=SWEEP_BPS_WINDOW))
    grid_source: object = "blind"  # "blind" or a 4-tuple of level ratios
    cma: CmaParams = field(default_factory=CmaParams)
    cma_enabled: bool = True
    mlse_taps: str = "analytic"  # or "estimated" (least squares on training symbols)
    mlse_traceback: int = 32
    mlse_tail: int = 16
    mlse_stream: str = "original"  # or "polybinary"
    training_symbols: int = 4096
    guard_symbols: int = 512
    # pi/2 ambiguity resolved per segment of this many symbols (0: whole block)
    ambiguity_segment: int = 1024
    ber_target: float = 1e-2
    output_path: str = "results"
    seed_base: int = 0

    def __post_init__(self):
        for name in ("schemes", "linewidths_hz", "osnr_db_list", "seeds"):
            value = tuple(getattr(self, name))
            if not value:
                raise ParameterError(f"{name} must not be empty")
            object.__setattr__(self, name, value)
        for s in self.schemes:
            if s not in SCHEMES:
                raise ParameterError(f"unknown scheme {s!r}")
        if self.mlse_taps not in ("analytic", "estimated"):
            raise ParameterError("mlse_taps must be 'analytic' or 'estimated'")
        if self.mlse_stream not in ("original", "polybinary"):
            raise ParameterError("mlse_stream must be 'original' or 'polybinary'")
        if isinstance(self.grid_source, str):
            if self.grid_source == "fixed":
                object.__setattr__(self, "grid_source", FIXED_LEVELS)
            elif self.grid_source != "blind":
                raise ParameterError(f"unknown grid source {self.grid_source!r}")
        else:
            object.__setattr__(self, "grid_source", tuple(float(v) for v in self.grid_source))
        need = max(self.bps.window, self.mlse_traceback)
        if self.guard_symbols < need:
            raise ParameterError(f"guard_symbols must be >= {need}")
        if self.ambiguity_segment < 0:
            raise ParameterError("ambiguity_segment must be >= 0")
        if self.link.n_symbols <= 2 * self.guard_symbols:
            raise ParameterError("n_symbols leaves nothing between the guard bands")
        if self.cma_enabled and self.link.sps % 2:
            raise ParameterError("CMA needs an even number of samples per symbol")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class BerRecord:
    scheme: str
    alpha: float
    linewidth_hz: float
    osnr_db: float
    seed: int
    bits_counted: int
    bit_errors: int
    ber: float
    calibrated_levels: tuple = ()
    status: str = "ok"
    # rotation changes between ambiguity segments; diagnostic only, not in the CSV
    cycle_slips: int = field(default=0, compare=False)

    @property
    def ok(self):
        return self.status == "ok"


class Alignment(NamedTuple):
    rotation: int
    decisions: np.ndarray
    agreement: float


def resolve_ambiguity(decisions, truth):
    """Rotate hard decisions by the k*pi/2 that best matches ``truth``.

    Genie-aided: the simulation knows the transmitted symbols. Returns the
    rotation ``k`` (decisions are multiplied by ``1j**k``), the aligned
    decisions and the fraction of agreeing symbols.
    """
    d = np.asarray(decisions)
    t = np.asarray(truth)
    if d.shape != t.shape:
        raise ParameterError("decisions and truth differ in length")
    best = None
    for k in range(4):
        rotated = d * (1j**k)
        rotated = np.round(rotated.real) + 1j * np.round(rotated.imag)
        agree = float(np.mean(rotated == t)) if t.size else 0.0
        if best is None or agree > best.agreement:
            best = Alignment(k, rotated, agree)
    return best


class SegmentAlignment(NamedTuple):
    decisions: np.ndarray
    agreement: float
    slips: int


def align_segments(decisions, truth, segment):
    """:func:`resolve_ambiguity` applied independently per ``segment`` symbols.

    Stands in for ideal cycle-slip correction: a pi/2 slip of the carrier
    estimate costs only the symbols of the segment it falls in. The last
    segment absorbs any remainder. ``segment = 0`` aligns the whole block
    with a single rotation.
    """
    d = np.asarray(decisions)
    t = np.asarray(truth)
    n = t.size
    if segment <= 0 or segment >= n:
        a = resolve_ambiguity(d, t)
        return SegmentAlignment(a.decisions, a.agreement, 0)
    bounds = [i * segment for i in range(n // segment)] + [n]
    parts, rots, agree = [], [], 0.0
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        a = resolve_ambiguity(d[lo:hi], t[lo:hi])
        parts.append(a.decisions)
        rots.append(a.rotation)
        agree += a.agreement * (hi - lo)
    slips = int(np.count_nonzero(np.diff(rots)))
    return SegmentAlignment(np.concatenate(parts), agree / n, slips)


class _Front(NamedTuple):
    rx: object  # DualPolSignal at 1 sample/symbol
    truth: object


def _effective_seed(cfg, seed):
    return (int(cfg.seed_base) + int(seed)) % 2**64


class _Channel:
    """Memoizes the scheme- and OSNR-independent parts of a trial."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._tx = {}
        self._pn = {}

    def transmit(self, seed):
        if seed not in self._tx:
            self._tx[seed] = transmit(self.cfg.link, _effective_seed(self.cfg, seed))
        return self._tx[seed]

    def phase_noised(self, seed, linewidth):
        key = (seed, linewidth)
        if key not in self._pn:
            wave, truth = self.transmit(seed)
            link = self.cfg.link.with_(linewidth_hz=linewidth)
            if self.cfg.cma_enabled:
                wave = apply_pol_mix(wave, link.pol_mix_angle, link.pol_mix_phase)
            rng = RngStream(_effective_seed(self.cfg, seed), "phase")
            self._pn[key] = apply_phase_noise(wave, link, rng)
        return self._pn[key]

    def front_end(self, seed, linewidth, osnr):
        cfg = self.cfg
        link = cfg.link.with_(linewidth_hz=linewidth, osnr_db=osnr)
        _, truth = self.transmit(seed)
        sig, theta = self.phase_noised(seed, linewidth)
        es = _effective_seed(cfg, seed)
        sig = apply_awgn_osnr(sig, link, RngStream(es, "awgn-x"), RngStream(es, "awgn-y"))
        mf = sig.map(lambda s: matched_filter(s, link))
        if cfg.cma_enabled:
            half = link.sps // 2
            rx = cma_equalize(mf.map(lambda s: s[::half]), cfg.cma)
        else:
            rx = mf.map(lambda s: s[:: link.sps])
        truth = replace(truth, phase=theta)
        return _Front(rx, truth)


def _mlse_params(cfg, received=None, truth_symbols=None):
    link = cfg.link
    if cfg.mlse_stream == "polybinary":
        full = combined_isi_taps(link.alpha, link.rolloff, 4 + cfg.mlse_tail)
        c = full.center_index
        h = full.coefficients
        poly = h.copy()
        poly[1:] += h[:-1]
        # centered support -4..4 (index -4 is zero for the 1+D response of 7 taps)
        core = poly[c - 4 : c + 5].copy()
        core[0] = 0.0
        tail = poly[c + 5 : c + 5 + cfg.mlse_tail]
        return MlseParams(RealTaps(core, 4), cfg.mlse_traceback, tuple(tail))
    if cfg.mlse_taps == "estimated" and received is not None:
        n = min(cfg.training_symbols, received.size)
        best = None
        # training under every pi/2 and pol-swap hypothesis; the best fit wins
        for known in truth_symbols:
            for k in range(4):
                taps = estimate_isi_taps(received[:n] * (1j**k), known[:n], 3)
                model = np.convolve(known[:n], taps.coefficients)[3 : 3 + n]
                resid = np.mean(np.abs(received[:n] * (1j**k) - model) ** 2)
                if best is None or resid < best[0]:
                    best = (resid, taps)
        taps = best[1]
        tail = combined_isi_taps(link.alpha, link.rolloff, 3 + cfg.mlse_tail).coefficients[7 + 3 :]
        return MlseParams(taps, cfg.mlse_traceback, tuple(tail) if cfg.mlse_tail else ())
    return MlseParams.for_channel(link.alpha, link.rolloff, 3, cfg.mlse_tail, cfg.mlse_traceback)


def _detect(cfg, front, scheme):
    """Carrier recovery, MLSE and BER for one scheme on a prepared front end."""
    g = cfg.guard_symbols
    truth = front.truth
    decisions, levels = [], ()
    for pol in (front.rx.x, front.rx.y):
        cr = recover_carrier(pol, scheme, cfg.bps, cfg.grid_source)
        if scheme == "corrected":
            levels = tuple(float(v) for v in cr.grid.levels)
        if cfg.mlse_stream == "polybinary":
            stream = apply_phase(polybinary_transform(pol), cr.phase)
        else:
            stream = cr.symbols
        params = _mlse_params(cfg, stream, (truth.symbols_x, truth.symbols_y))
        decisions.append(mlse_equalize(stream, params))
    sym = (truth.symbols_x, truth.symbols_y)
    bits = (truth.bits_x, truth.bits_y)
    inner = slice(g, len(truth.symbols_x) - g)
    best = None
    for order in ((0, 1), (1, 0)):
        al = [align_segments(decisions[order[p]][inner], sym[p][inner], cfg.ambiguity_segment) for p in (0, 1)]
        score = al[0].agreement + al[1].agreement
        if best is None or score > best[0]:
            best = (score, al)
    aligned = best[1]
    slips = sum(a.slips for a in aligned)
    n_bits = n_err = 0
    for p in (0, 1):
        tb = bits[p][2 * g : 2 * (len(truth.symbols_x) - g)]
        rb = demap_qpsk(aligned[p].decisions)
        n_bits += tb.size
        n_err += int(np.count_nonzero(rb != tb))
    agreement = min(a.agreement for a in aligned)
    status = "ok" if agreement >= MIN_AGREEMENT else "no-convergence"
    ber = n_err / n_bits if status == "ok" else math.nan
    return n_bits, n_err, ber, levels, status, slips


def _record(cfg, scheme, lw, osnr, seed, n_bits=0, n_err=0, ber=math.nan, levels=(), status="ok", slips=0):
    return BerRecord(scheme, cfg.link.alpha, float(lw), float(osnr), int(seed), int(n_bits), int(n_err), ber,
                     tuple(levels), status, slips)


def _run_cells(cfg, seed, linewidth, channel=None):
    """All OSNRs and schemes for one (seed, linewidth)."""
    channel = channel or _Channel(cfg)
    out = []
    for osnr in cfg.osnr_db_list:
        try:
            front = channel.front_end(seed, linewidth, osnr)
        except EqualizerDivergedError as exc:
            log.warning("cell lw=%g osnr=%g seed=%d: %s", linewidth, osnr, seed, exc)
            out.extend(_record(cfg, s, linewidth, osnr, seed, status="diverged") for s in cfg.schemes)
            continue
        for scheme in cfg.schemes:
            try:
                res = _detect(cfg, front, scheme)
            except CalibrationError as exc:
                log.warning("cell %s lw=%g osnr=%g seed=%d: %s", scheme, linewidth, osnr, seed, exc)
                out.append(_record(cfg, scheme, linewidth, osnr, seed, status="calibration-error"))
                continue
            out.append(_record(cfg, scheme, linewidth, osnr, seed, *res))
    return out


def run_trial(cfg, scheme, linewidth_hz, osnr_db, seed):
    """One Monte-Carlo cell: a single scheme at one linewidth, OSNR and seed."""
    one = cfg.with_(schemes=(scheme,), linewidths_hz=(linewidth_hz,), osnr_db_list=(osnr_db,), seeds=(seed,))
    return _run_cells(one, seed, linewidth_hz)[0]


def _sort_key(r):
    return (r.scheme, r.linewidth_hz, r.osnr_db, r.seed)


def _task(args):
    cfg, seed, lw = args
    return _run_cells(cfg, seed, lw)


def run_sweep(cfg, parallel=1):
    """Cartesian product schemes x linewidths x OSNRs x seeds, canonically sorted."""
    tasks = [(cfg, seed, lw) for seed in cfg.seeds for lw in cfg.linewidths_hz]
    records = []
    if parallel and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            for chunk in pool.map(_task, tasks):
                records.extend(chunk)
    else:
        channels = {}
        for cfg_, seed, lw in tasks:
            ch = channels.setdefault(seed, _Channel(cfg_))
            records.extend(_run_cells(cfg_, seed, lw, ch))
            if lw == cfg.linewidths_hz[-1]:
                channels.pop(seed, None)
    return sorted(records, key=_sort_key)


# ---------------------------------------------------------------------------
# post-processing
# ---------------------------------------------------------------------------

def ber_curve(records, scheme, linewidth):
    """Seed-pooled ``(osnr, ber, bits)`` arrays for one scheme and linewidth.

    Cells without counted bits are skipped. Cells flagged ``no-convergence``
    still contribute their measured counts.
    """
    pooled = {}
    for r in records:
        if r.scheme != scheme or not math.isclose(r.linewidth_hz, linewidth) or r.bits_counted <= 0:
            continue
        b, e = pooled.get(r.osnr_db, (0, 0))
        pooled[r.osnr_db] = (b + r.bits_counted, e + r.bit_errors)
    osnr = np.array(sorted(pooled))
    bits = np.array([pooled[o][0] for o in osnr], dtype=float)
    errs = np.array([pooled[o][1] for o in osnr], dtype=float)
    return osnr, errs / np.maximum(bits, 1), bits


def osnr_at_ber(osnr, ber, bits, target):
    """First downward crossing of ``target``, log-linear interpolation.

    A zero-error point is placed at half an error over its bit count so the
    logarithm stays finite.
    """
    if osnr.size < 2:
        raise NotMeasurableError("curve has fewer than two points")
    b = np.where(ber > 0, ber, 0.5 / np.maximum(bits, 1))
    lt = np.log10(target)
    lb = np.log10(b)
    for i in range(osnr.size - 1):
        if lb[i] >= lt >= lb[i + 1] and lb[i] > lb[i + 1]:
            f = (lb[i] - lt) / (lb[i] - lb[i + 1])
            return float(osnr[i] + f * (osnr[i + 1] - osnr[i]))
    raise NotMeasurableError(f"no crossing of BER {target:g} in {osnr.min():g}..{osnr.max():g} dB")


def compute_osnr_gain(records, scheme_a="conventional", scheme_b="corrected", linewidth=None, ber_target=1e-2):
    """Required-OSNR difference ``OSNR_a - OSNR_b`` at ``ber_target`` (dB)."""
    out = []
    for scheme in (scheme_a, scheme_b):
        curve = ber_curve(records, scheme, linewidth)
        try:
            out.append(osnr_at_ber(*curve, ber_target))
        except NotMeasurableError as exc:
            label = f"{scheme} @ {linewidth:g} Hz"
            raise NotMeasurableError(f"{label}: {exc}", curve=label) from None
    return out[0] - out[1]


def _fmt(v):
    return repr(float(v))


def emit_results(records, path, stem="ber"):
    """Write ``<stem>.csv`` and an SVG BER-vs-OSNR plot into directory ``path``.

    Returns the two file paths.
    """
    if not records:
        raise ParameterError("no records to emit")
    os.makedirs(path, exist_ok=True)
    csv_path = os.path.join(path, f"{stem}.csv")
    svg_path = os.path.join(path, f"{stem}.svg")
    with open(csv_path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        for r in records:
            if r.ok:
                levels = ";".join(_fmt(v) for v in r.calibrated_levels)
                ber = _fmt(r.ber)
            else:
                levels = f"status={r.status}"
                ber = "nan"
            w.writerow([r.scheme, _fmt(r.alpha), _fmt(r.linewidth_hz), _fmt(r.osnr_db), r.seed,
                        r.bits_counted, r.bit_errors, ber, levels])
    _plot(records, svg_path)
    return csv_path, svg_path


def read_results(csv_path):
    """Parse a CSV written by :func:`emit_results`."""
    out = []
    with open(csv_path, newline="") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ParameterError(f"unexpected CSV header {header!r}")
        for row in csv.reader(fh):
            scheme, alpha, lw, osnr, seed, bits, errs, ber, levels = row
            if levels.startswith("status="):
                status, lv = levels[len("status="):], ()
            else:
                status = "ok"
                lv = tuple(float(v) for v in levels.split(";")) if levels else ()
            out.append(BerRecord(scheme, float(alpha), float(lw), float(osnr), int(seed), int(bits),
                                 int(errs), float(ber), lv, status))
    return out


def _plot(records, svg_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ftncpr"
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    keys = sorted({(r.scheme, r.linewidth_hz) for r in records})
    for scheme, lw in keys:
        osnr, ber, _ = ber_curve(records, scheme, lw)
        mask = ber > 0
        style = "-o" if scheme == "corrected" else "--s"
        (line,) = ax.semilogy(osnr[mask], ber[mask], style, label=f"{scheme}, {lw / 1e3:g} kHz")
        line.set_gid(f"curve-{scheme}-{int(round(lw))}")
    ax.set_xlabel("OSNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
