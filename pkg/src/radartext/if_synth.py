"""Complex IF cube synthesis from scatter paths, plus calibrated AWGN.

Phase model for a path with length ``d`` and rate ``ddot`` at chirp ``m``
and fast-time sample ``n``::

    d_m   = d + ddot * (m - (M - 1) / 2) * T
    tau_n = (n - (N - 1) / 2) / N                 # fraction of the ADC window
    value = A * exp(j * 2*pi/c * d_m * (B_valid * tau_n + f_c))

Both time axes are centred: ``d`` is the path length at the middle of the
frame and ``f_c`` the instantaneous frequency at the middle of the ADC
window. With that reference the Doppler bin decodes with ``lambda = c/f_c``
and range migration within a frame spreads symmetrically about the true
range.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import FormatError, SynthError
from .fmcw_config import SPEED_OF_LIGHT, RadarConfig


@dataclass(frozen=True)
class IFCube:
    samples: np.ndarray  # complex128 [rx][chirp][sample]
    config: RadarConfig
    frame_index: int = 0

    def __post_init__(self):
        c = self.config
        shape = (c.rx_count, c.chirps_per_frame, c.samples_per_chirp)
        if self.samples.shape != shape:
            raise SynthError(f"IF cube shape {self.samples.shape} != {shape}")
        if not np.isfinite(self.samples).all():
            raise SynthError("IF cube contains non-finite samples")

    def power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@numba.njit(cache=True, nogil=True)
def _accumulate(out, rx, d, ddot, amp, k_phase, f_c, b_valid, interval):
    n_chirp = out.shape[1]
    n_samp = out.shape[2]
    mc = (n_chirp - 1) / 2.0
    nc = (n_samp - 1) / 2.0
    for p in range(rx.shape[0]):
        r = rx[p]
        for m in range(n_chirp):
            dm = d[p] + ddot[p] * (m - mc) * interval
            step = k_phase * dm * b_valid / n_samp
            ph0 = k_phase * dm * (f_c - b_valid * nc / n_samp)
            # rotate a phasor sample by sample, renormalising by direct
            # evaluation every 32 samples to bound drift
            for n0 in range(0, n_samp, 32):
                ph = ph0 + step * n0
                cr = amp[p] * math.cos(ph)
                ci = amp[p] * math.sin(ph)
                sr = math.cos(step)
                si = math.sin(step)
                for n in range(n0, min(n0 + 32, n_samp)):
                    out[r, m, n] += complex(cr, ci)
                    cr, ci = cr * sr - ci * si, cr * si + ci * sr


def synthesize_if(paths, config: RadarConfig, frame_index: int = 0) -> IFCube:
    """Sum every path's IF tone into an ``[rx][chirp][sample]`` cube."""
    out = np.zeros((config.rx_count, config.chirps_per_frame, config.samples_per_chirp),
                   dtype=np.complex128)
    if len(paths):
        rx = np.ascontiguousarray(paths.rx_index, dtype=np.int64)
        if rx.min() < 0 or rx.max() >= config.rx_count:
            bad = int(rx[(rx < 0) | (rx >= config.rx_count)][0])
            raise SynthError(f"path rx_index {bad} outside [0, {config.rx_count})")
        _accumulate(out, rx,
                    np.ascontiguousarray(paths.path_length_m, dtype=np.float64),
                    np.ascontiguousarray(paths.path_rate_mps, dtype=np.float64),
                    np.ascontiguousarray(paths.amplitude, dtype=np.float64),
                    2.0 * math.pi / SPEED_OF_LIGHT, config.carrier_hz,
                    config.sampled_bandwidth_hz, config.chirp_interval_s)
    return IFCube(out, config, frame_index)


def noise_generator(seed: int, frame_index: int, rx: int) -> np.random.Generator:
    """Philox stream keyed by (seed, frame, rx); chirp/sample index the counter."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFF_FFFF_FFFF_FFFF, int(frame_index), int(rx)])
    return np.random.Generator(np.random.Philox(ss))


def add_noise(cube: IFCube, snr_db: float, seed: int) -> IFCube:
    """Add complex white Gaussian noise at ``snr_db`` relative to the cube's mean power.

    ``snr_db = inf`` disables noise and returns the samples unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return IFCube(cube.samples.copy(), cube.config, cube.frame_index)
    if math.isnan(snr_db):
        raise SynthError("snr_db is NaN")
    p_signal = cube.power()
    if p_signal == 0:
        raise SynthError("SNR undefined for zero signal")
    sigma = math.sqrt(p_signal / 10 ** (snr_db / 10))
    out = cube.samples.copy()
    m, n = out.shape[1:]
    for r in range(out.shape[0]):
        z = noise_generator(seed, cube.frame_index, r).standard_normal((m, n, 2))
        # unit total variance: 1/2 on each quadrature
        out[r] += sigma * math.sqrt(0.5) * (z[..., 0] + 1j * z[..., 1])
    return IFCube(out, cube.config, cube.frame_index)


def measured_snr_db(clean: IFCube, noisy: IFCube) -> float:
    noise = noisy.samples - clean.samples
    return 10 * math.log10(clean.power() / float(np.mean(np.abs(noise) ** 2)))


_IFC_HEADER = struct.Struct("<4sIII")


def write_if_cube(cube: IFCube, path) -> None:
    c = cube.config
    with open(path, "wb") as fh:
        fh.write(_IFC_HEADER.pack(b"IFC1", c.rx_count, c.chirps_per_frame, c.samples_per_chirp))
        fh.write(cube.samples.astype("<c8").tobytes())


def read_if_cube(path, config: RadarConfig, frame_index: int = 0) -> IFCube:
    data = Path(path).read_bytes()
    if len(data) < _IFC_HEADER.size:
        raise FormatError(f"bad header: {path}")
    magic, rx, chirps, samples = _IFC_HEADER.unpack_from(data)
    if magic != b"IFC1":
        raise FormatError(f"bad header: {path}")
    count = rx * chirps * samples
    if len(data) != _IFC_HEADER.size + 8 * count:
        raise FormatError(f"IF cube payload size mismatch: {path}")
    arr = np.frombuffer(data, dtype="<c8", offset=_IFC_HEADER.size).reshape(rx, chirps, samples)
    return IFCube(arr.astype(np.complex128), config, frame_index)
