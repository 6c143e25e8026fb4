"""Carrier phase recovery by blind phase search.

Two schemes are provided:

``conventional``
    BPS directly on the received symbols against the 4-point QPSK grid.
``corrected``
    The received symbols are first passed through the polybinary transform
    ``y[n] = x[n] + x[n-1]``. BPS then runs on ``y`` against a 16-point grid
    whose four per-quadrature levels are calibrated blindly from ``y`` itself.
    The phase found on ``y`` is removed from the original stream.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CalibrationError, ParameterError
from .kernels import get_kernel

# level set read off the polybinary density plot of a time-packed QPSK signal;
# only the ratio between the two magnitudes is meaningful
FIXED_LEVELS = (-5.4, -2.1, 2.1, 5.4)


@dataclass(frozen=True)
class DecisionGrid:
    levels: tuple

    def __post_init__(self):
        lv = np.sort(np.asarray(self.levels, dtype=float))
        if lv.size < 2:
            raise ParameterError("a decision grid needs at least two levels")
        if not np.allclose(lv, -lv[::-1], rtol=1e-9, atol=1e-12):
            raise ParameterError(f"levels must be symmetric about zero, got {lv}")
        object.__setattr__(self, "levels", tuple(float(v) for v in lv))

    @property
    def level_array(self):
        return np.asarray(self.levels)

    @property
    def points(self):
        lv = self.level_array
        return (lv[:, None] + 1j * lv[None, :]).ravel()

    def snap(self, z):
        """Nearest grid point, chosen independently per quadrature."""
        lv = self.level_array
        mids = 0.5 * (lv[1:] + lv[:-1])
        z = np.asarray(z)
        return lv[np.searchsorted(mids, z.real)] + 1j * lv[np.searchsorted(mids, z.imag)]

    def nearest_point(self, z):
        return complex(self.snap(np.asarray([z]))[0])

    @property
    def ratio(self):
        """Outer-to-inner magnitude ratio (4-level grids)."""
        lv = np.abs(self.level_array)
        return float(lv.max() / lv.min())


@dataclass(frozen=True)
class BpsParams:
    test_phases: int = 32
    window: int = 64

    def __post_init__(self):
        if self.test_phases < 8:
            raise ParameterError("need at least 8 test phases")
        if self.window < 8 or self.window % 2:
            raise ParameterError("window must be even and >= 8")

    @property
    def step(self):
        return (math.pi / 2) / self.test_phases

    def phases(self):
        return -math.pi / 4 + np.arange(self.test_phases) * self.step


@dataclass
class PhaseTrace:
    values: np.ndarray
    kind: str = "raw"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.kind not in ("raw", "unwrapped"):
            raise ParameterError(f"unknown phase trace kind {self.kind!r}")

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


class CarrierRecovery(NamedTuple):
    symbols: np.ndarray
    phase: PhaseTrace
    grid: DecisionGrid


def polybinary_transform(symbols):
    """``y[n] = x[n] + x[n-1]`` with ``y[0] = x[0]``."""
    x = np.asarray(symbols)
    if x.size == 0:
        raise ParameterError("empty input")
    y = x.copy()
    y[1:] += x[:-1]
    return y


def conventional_grid():
    return DecisionGrid((-1.0, 1.0))


def corrected_grid(levels):
    levels = tuple(levels)
    if len(levels) != 4:
        raise ParameterError("the corrected grid takes exactly four levels")
    return DecisionGrid(levels)


def _kmeans_1d(x, init, max_iter=200):
    # x sorted; clusters are contiguous runs split at centroid midpoints
    csum = np.concatenate(([0.0], np.cumsum(x)))
    c = np.asarray(init, dtype=float)
    for _ in range(max_iter):
        cuts = np.searchsorted(x, 0.5 * (c[1:] + c[:-1]), side="right")
        bounds = np.concatenate(([0], cuts, [x.size]))
        counts = np.diff(bounds)
        if np.any(counts == 0):
            raise CalibrationError("k-means produced an empty cluster")
        new = (csum[bounds[1:]] - csum[bounds[:-1]]) / counts
        if np.array_equal(new, c):
            break
        c = new
    return c


def calibrate_levels(poly_symbols, n_levels=4):
    """Blindly estimate the per-quadrature decision levels of a polybinary stream.

    Real and imaginary parts are pooled and clustered with 1-D k-means,
    started from evenly spaced quantiles. The sorted centroids are then
    symmetrized about zero.

    Raises
    ------
    CalibrationError
        If the data do not support ``n_levels`` distinct clusters.
    """
    z = np.asarray(poly_symbols)
    x = np.sort(np.concatenate((z.real.ravel(), z.imag.ravel())))
    if np.unique(x).size < n_levels:
        raise CalibrationError(f"fewer than {n_levels} distinct amplitudes in input")
    init = np.quantile(x, (np.arange(n_levels) + 0.5) / n_levels)
    if np.unique(init).size < n_levels:
        raise CalibrationError("degenerate quantile initialization")
    c = _kmeans_1d(x, init)
    mag = 0.5 * (np.abs(c) + np.abs(c[::-1]))
    levels = np.where(np.arange(n_levels) < n_levels / 2, -mag, mag)
    if n_levels % 2:
        levels[n_levels // 2] = 0.0
    if np.unique(levels).size < n_levels:
        raise CalibrationError(f"calibrated levels collapsed: {levels}")
    return DecisionGrid(tuple(levels))


def bps_estimate(symbols, grid, params=BpsParams(), backend=None):
    """Blind phase search; returns a raw trace in ``[-pi/4, pi/4)``."""
    z = np.ascontiguousarray(symbols, dtype=complex)
    if z.size < params.window:
        raise ParameterError("fewer symbols than the BPS window")
    phi = params.phases()
    idx = get_kernel("bps", backend)(
        np.ascontiguousarray(z.real),
        np.ascontiguousarray(z.imag),
        np.cos(phi),
        np.sin(phi),
        grid.level_array,
        params.window // 2,
    )
    return PhaseTrace(phi[idx], "raw")


def bps_indices(symbols, grid, params=BpsParams(), backend=None):
    """Selected test-phase index per symbol (for property checks)."""
    raw = bps_estimate(symbols, grid, params, backend)
    return np.rint((raw.values + math.pi / 4) / params.step).astype(int)


def unwrap_phase(raw):
    """Remove the pi/2 jumps BPS leaves in its estimate.

    Each sample is shifted by the multiple of pi/2 that brings it closest to
    its (already unwrapped) predecessor.
    """
    values = raw.values if isinstance(raw, PhaseTrace) else np.asarray(raw, dtype=float)
    if isinstance(raw, PhaseTrace) and raw.kind != "raw":
        raise ParameterError("trace is already unwrapped")
    return PhaseTrace(np.unwrap(values, period=math.pi / 2), "unwrapped")


def apply_phase(symbols, trace):
    """Rotate every symbol by ``-trace[n]``."""
    z = np.asarray(symbols)
    t = np.asarray(trace, dtype=float)
    if z.shape != t.shape:
        raise ParameterError(f"length mismatch: {z.shape} vs {t.shape}")
    return z * np.exp(-1j * t)


def _scaled_fixed_grid(poly, levels):
    lv = np.asarray(levels, dtype=float)
    rms_sig = math.sqrt(np.mean(np.abs(poly) ** 2) / 2)
    rms_lv = math.sqrt(np.mean(lv**2))
    return corrected_grid(tuple(lv * rms_sig / rms_lv))


def recover_carrier(symbols, scheme="corrected", params=BpsParams(), grid_source="blind", backend=None):
    """Full blind CPR pipeline.

    Parameters
    ----------
    symbols : array of complex
        Symbol-rate received samples.
    scheme : {"conventional", "corrected"}
    params : BpsParams
    grid_source : "blind" or sequence of 4 floats
        For the corrected scheme, either calibrate the levels from the data or
        use the given level *ratios*, rescaled to the RMS of the polybinary
        stream.

    Returns
    -------
    CarrierRecovery
        ``(compensated symbols, unwrapped phase, grid used)``. The compensated
        symbols are the original (non-polybinary) stream.
    """
    z = np.asarray(symbols, dtype=complex)
    if scheme == "conventional":
        grid = conventional_grid()
        target = z
    elif scheme == "corrected":
        target = polybinary_transform(z)
        if isinstance(grid_source, str):
            if grid_source != "blind":
                raise ParameterError(f"unknown grid source {grid_source!r}")
            grid = calibrate_levels(target)
        else:
            grid = _scaled_fixed_grid(target, grid_source)
    else:
        raise ParameterError(f"unknown scheme {scheme!r}")
    trace = unwrap_phase(bps_estimate(target, grid, params, backend))
    return CarrierRecovery(apply_phase(z, trace), trace, grid)
