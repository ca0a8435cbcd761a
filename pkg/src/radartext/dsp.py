"""Range/Doppler processing, static clutter removal, top-k peaks, 6D decoding."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DSPError
from .fmcw_config import RadarConfig, derive
from .if_synth import IFCube

log = logging.getLogger(__name__)

POINTS_PER_FRAME = 128
# Intensity assigned to zero-valued cells used as filler when a map has
# fewer than k non-zero cells.
INTENSITY_FLOOR_DB = -400.0

ANGLE_MODES = ("phase_array", "paper_literal")


@dataclass(frozen=True)
class RangeDopplerMap:
    values: np.ndarray  # complex [rx][doppler bin][range bin], zero velocity at M/2
    config: RadarConfig

    def __post_init__(self):
        c = self.config
        shape = (c.rx_count, c.chirps_per_frame, c.samples_per_chirp)
        if self.values.shape != shape:
            raise DSPError(f"range-Doppler map shape {self.values.shape} != {shape}")


@dataclass(frozen=True)
class PeakSet:
    range_bins: np.ndarray
    doppler_bins: np.ndarray
    values: np.ndarray   # (k, rx) complex clutter-removed cell values
    scores: np.ndarray   # mean over rx of |value|

    def __len__(self):
        return len(self.range_bins)

    def __getitem__(self, i) -> "Peak":
        return Peak(int(self.range_bins[i]), int(self.doppler_bins[i]), self.values[i])


class Peak(NamedTuple):
    range_bin: int
    doppler_bin: int
    values: np.ndarray  # per-rx complex


class RadarPoint(NamedTuple):
    x: float
    y: float
    z: float
    range_r: float
    velocity_v: float
    intensity_db: float


@dataclass(frozen=True)
class FrameCloud:
    frame_index: int
    timestamp: float
    points: np.ndarray  # (128, 6): x, y, z, r, v, intensity_db

    def __post_init__(self):
        if self.points.shape != (POINTS_PER_FRAME, 6):
            raise DSPError(f"frame cloud must hold {POINTS_PER_FRAME} points, got {self.points.shape}")

    def __iter__(self):
        return (RadarPoint(*map(float, p)) for p in self.points)


def range_fft(cube: IFCube, window: str | None = None) -> np.ndarray:
    """FFT along fast time for every (rx, chirp); rectangular unless ``window='hann'``."""
    x = cube.samples
    if window == "hann":
        x = x * np.hanning(x.shape[-1])
    elif window is not None:
        raise DSPError(f"unknown window {window!r}")
    return np.fft.fft(x, axis=-1)


def doppler_fft(range_spectra: np.ndarray, config: RadarConfig, window: str | None = None) -> RangeDopplerMap:
    """FFT along slow time, shifted so bin ``M/2`` is zero velocity."""
    x = range_spectra
    if window == "hann":
        x = x * np.hanning(x.shape[1])[None, :, None]
    elif window is not None:
        raise DSPError(f"unknown window {window!r}")
    return RangeDopplerMap(np.fft.fftshift(np.fft.fft(x, axis=1), axes=1), config)


def remove_clutter(rd: RangeDopplerMap) -> RangeDopplerMap:
    """Subtract the antenna-averaged map from every RX map."""
    if rd.values.shape[0] < 2:
        raise DSPError("clutter removal requires multiple rx")
    return RangeDopplerMap(rd.values - rd.values.mean(axis=0, keepdims=True), rd.config)


def _ranked_cells(rd: RangeDopplerMap):
    """All (doppler, range) cells ordered by descending score, then range, then doppler."""
    score = np.abs(rd.values).mean(axis=0)  # (M, N)
    dop, rng = np.indices(score.shape)
    order = np.lexsort((dop.ravel(), rng.ravel(), -score.ravel()))
    return order, score.ravel(), dop.ravel(), rng.ravel()


def select_topk(rd: RangeDopplerMap, k: int = POINTS_PER_FRAME) -> PeakSet:
    """The ``k`` strongest cells by mean-over-rx magnitude.

    Ties break towards the lower range bin, then the lower Doppler bin.
    """
    m, n = rd.values.shape[1:]
    if m * n < k:
        raise DSPError(f"map has {m * n} cells, fewer than k={k}")
    order, score, dop, rng = _ranked_cells(rd)
    sel = order[:k]
    return _peakset(rd, sel, score, dop, rng)


def _peakset(rd, sel, score, dop, rng) -> PeakSet:
    d, r = dop[sel], rng[sel]
    return PeakSet(r, d, rd.values[:, d, r].T.copy(), score[sel])


def _phase_difference(values: np.ndarray) -> np.ndarray:
    """Mean inter-element phase lag, arg sum_i D_i conj(D_{i+1}), per peak."""
    if values.shape[1] < 2:
        return np.zeros(len(values))
    return np.angle(np.sum(values[:, :-1] * np.conj(values[:, 1:]), axis=1))


def decode_points(peaks: PeakSet, config: RadarConfig, angle_mode: str = "phase_array",
                  mount_height_m: float = 0.0) -> np.ndarray:
    """Vectorised :func:`decode_point`; returns an ``(k, 6)`` array."""
    if angle_mode not in ANGLE_MODES:
        raise DSPError(f"unknown angle mode {angle_mode!r}")
    dp = derive(config)
    m = config.chirps_per_frame
    r = peaks.range_bins * dp.range_resolution_m
    v_bin = peaks.doppler_bins - m // 2
    v = v_bin * dp.velocity_resolution_mps
    with np.errstate(divide="ignore"):
        inten = np.where(peaks.scores > 0, 10 * np.log10(peaks.scores), INTENSITY_FLOOR_DB)

    if angle_mode == "phase_array":
        dphi = _phase_difference(peaks.values)
        sin_t = np.clip(dp.wavelength_m * dphi / (2 * math.pi * config.rx_spacing_m), -1.0, 1.0)
        cos_t = np.sqrt(1.0 - sin_t**2)
        # azimuth from boresight (+y) towards +x; elevation fixed at 0
        x, y, z = r * sin_t, r * cos_t, np.zeros_like(r)
    else:
        # Literal form: theta from the signed Doppler bin over the array
        # aperture, phi from the antenna-geometry ratio. Its z (cos theta)
        # axis is boresight, so (x, y, z)_literal -> (x, z, y) here.
        aperture = max(config.rx_count - 1, 1) * config.rx_spacing_m
        theta = np.arcsin(np.clip(dp.wavelength_m * v_bin / (2 * aperture), -1.0, 1.0))
        phi = math.atan2(0.0, aperture)  # linear array along x: y_ant = 0
        x = r * np.sin(theta) * math.cos(phi)
        z = r * np.sin(theta) * math.sin(phi)
        y = r * np.cos(theta)
    z = z + mount_height_m
    return np.stack([x, y, z, r, v, inten], axis=1)


def decode_point(peak: Peak, config: RadarConfig, angle_mode: str = "phase_array",
                 mount_height_m: float = 0.0) -> RadarPoint:
    vals = np.asarray(peak.values, dtype=np.complex128).reshape(1, -1)
    score = np.abs(vals).mean(axis=1)
    one = PeakSet(np.array([peak.range_bin]), np.array([peak.doppler_bin]), vals, score)
    if not score[0] > 0:
        raise DSPError("zero complex value: intensity undefined")
    return RadarPoint(*map(float, decode_points(one, config, angle_mode, mount_height_m)[0]))


def process_frame(cube: IFCube, angle_mode: str = "phase_array",
                  window: str | None = None, mount_height_m: float = 0.0,
                  timestamp: float | None = None) -> FrameCloud:
    """Full chain to exactly 128 decoded points.

    Zero-valued cells have no defined intensity and are skipped in favour of
    the next-ranked cell; only if fewer than 128 non-zero cells exist are
    zero cells used, tagged with ``INTENSITY_FLOOR_DB``.
    """
    cfg = cube.config
    k = POINTS_PER_FRAME
    rd = remove_clutter(doppler_fft(range_fft(cube, window), cfg, window))
    order, score, dop, rng = _ranked_cells(rd)
    if len(order) < k:
        raise DSPError(f"map has {len(order)} cells, fewer than k={k}")
    nonzero = order[score[order] > 0]
    if len(nonzero) >= k:
        sel = nonzero[:k]
    else:
        log.warning("frame %d: only %d non-zero cells; padding with floor-intensity points",
                    cube.frame_index, len(nonzero))
        sel = np.concatenate([nonzero, order[score[order] == 0][:k - len(nonzero)]])
    peaks = _peakset(rd, sel, score, dop, rng)
    pts = decode_points(peaks, cfg, angle_mode, mount_height_m)
    if timestamp is None:
        timestamp = cube.frame_index / cfg.frame_rate_hz
    return FrameCloud(cube.frame_index, float(timestamp), pts)


def angular_bin_width(config: RadarConfig) -> float:
    """Resolution of the RX line array in sin(azimuth): lambda / (N * spacing)."""
    return derive(config).wavelength_m / (config.rx_count * config.rx_spacing_m)
