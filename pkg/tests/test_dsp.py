import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import topk_sorted
from radartext.dsp import (INTENSITY_FLOOR_DB, POINTS_PER_FRAME, Peak, PeakSet, RangeDopplerMap,
                           angular_bin_width, decode_point, decode_points, doppler_fft, process_frame,
                           range_fft, remove_clutter, select_topk)
from radartext.errors import DSPError
from radartext.fmcw_config import default_config, derive
from radartext.if_synth import IFCube, add_noise, synthesize_if
from radartext.raytrace import ScatterPaths, point_target_paths

CFG = default_config()
DP = derive(CFG)
M, N = CFG.chirps_per_frame, CFG.samples_per_chirp


def _target(r, v=0.0, az_deg=20.0, amp=1.0):
    az = math.radians(az_deg)
    u = np.array([math.sin(az), math.cos(az), 0.0])
    return point_target_paths(r * u, v * u, CFG, amplitude=amp)


def _rd(paths, cfg=CFG):
    return doppler_fft(range_fft(synthesize_if(paths, cfg)), cfg)


def test_range_fft_peak_bin_70():
    spec = range_fft(synthesize_if(_target(70 * DP.range_resolution_m), CFG))
    assert np.all(np.abs(spec).argmax(axis=-1) == 70)


def test_range_fft_zero_and_parseval():
    zero = IFCube(np.zeros((4, M, N), complex), CFG)
    assert not range_fft(zero).any()
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, M, N)) + 1j * rng.normal(size=(4, M, N))
    X = range_fft(IFCube(x, CFG))
    lhs = np.sum(np.abs(x) ** 2, axis=-1)
    rhs = np.sum(np.abs(X) ** 2, axis=-1) / N
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)


def test_hann_window_option():
    cube = synthesize_if(_target(3.0), CFG)
    spec = range_fft(cube, "hann")
    assert np.abs(spec[0, 0]).argmax() == np.abs(range_fft(cube)[0, 0]).argmax()
    with pytest.raises(DSPError):
        range_fft(cube, "kaiser")


def test_static_target_zero_velocity_bin():
    rd = _rd(_target(3.0))
    mag = np.abs(rd.values[0])
    assert np.unravel_index(mag.argmax(), mag.shape)[0] == M // 2


def test_radial_one_mps_offsets_14_bins():
    rd = _rd(_target(3.0, v=1.0))
    d, _ = np.unravel_index(np.abs(rd.values[0]).argmax(), (M, N))
    assert d - M // 2 == round(1.0 / DP.velocity_resolution_mps) == 14


def test_doppler_conjugate_symmetry_for_real_input():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, M, N)).astype(complex)
    raw = np.fft.ifftshift(doppler_fft(x, CFG).values, axes=1)  # undo the shift
    k = np.arange(M)
    np.testing.assert_allclose(raw[:, k], np.conj(raw[:, (-k) % M]), atol=1e-9)


def test_clutter_common_mode_removed():
    base = np.random.default_rng(2).normal(size=(M, N)) + 0j
    rd = RangeDopplerMap(np.repeat(base[None], 4, axis=0), CFG)
    assert np.abs(remove_clutter(rd).values).max() <= 1e-12 * np.abs(base).max()


def test_clutter_scalar_case():
    cfg = CFG.replace(rx_count=2, chirps_per_frame=2, samples_per_chirp=2)
    vals = np.zeros((2, 2, 2), complex)
    vals[0], vals[1] = 2, 4
    out = remove_clutter(RangeDopplerMap(vals, cfg)).values
    np.testing.assert_array_equal(out[0], -1)
    np.testing.assert_array_equal(out[1], 1)


def test_clutter_single_rx_rejected():
    cfg = CFG.replace(rx_count=1)
    with pytest.raises(DSPError, match="clutter removal requires multiple rx"):
        remove_clutter(RangeDopplerMap(np.zeros((1, M, N), complex), cfg))


def test_topk_exactly_128_nonzero_cells():
    rng = np.random.default_rng(3)
    vals = np.zeros((4, M, N), complex)
    flat = rng.choice(M * N, 128, replace=False)
    d, r = np.unravel_index(flat, (M, N))
    vals[:, d, r] = rng.normal(size=(4, 128)) + 1.0
    peaks = select_topk(RangeDopplerMap(vals, CFG))
    assert set(zip(peaks.doppler_bins, peaks.range_bins)) == set(zip(d, r))


def test_topk_dominant_first_and_sorted():
    rng = np.random.default_rng(4)
    vals = rng.normal(size=(4, M, N)) * 0.01 + 0j
    vals[:, 70, 100] = 5.0
    peaks = select_topk(RangeDopplerMap(vals, CFG))
    assert (peaks[0].range_bin, peaks[0].doppler_bin) == (100, 70)
    assert len(peaks) == 128 and np.all(np.diff(peaks.scores) <= 0)
    assert len(set(zip(peaks.range_bins, peaks.doppler_bins))) == 128


@pytest.mark.parametrize("seed", range(5))
def test_topk_equals_full_sort(seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(4, M, N)) + 1j * rng.normal(size=(4, M, N))
    # quantise so ties actually occur
    vals = np.round(vals * 2) / 2
    peaks = select_topk(RangeDopplerMap(vals, CFG))
    assert list(zip(peaks.range_bins.tolist(), peaks.doppler_bins.tolist())) == topk_sorted(vals, 128)


def test_topk_ties_break_by_range_then_doppler():
    vals = np.ones((4, M, N), complex)
    peaks = select_topk(RangeDopplerMap(vals, CFG))
    assert peaks.range_bins.tolist() == [0] * 128
    assert peaks.doppler_bins.tolist() == list(range(128))


def test_topk_too_few_cells():
    cfg = CFG.replace(chirps_per_frame=4, samples_per_chirp=16)
    with pytest.raises(DSPError, match="fewer than k"):
        select_topk(RangeDopplerMap(np.ones((4, 4, 16), complex), cfg))


def _peak(r_bin, d_bin, values):
    return Peak(r_bin, d_bin, np.asarray(values, complex))


def test_decode_range_bin_70():
    p = decode_point(_peak(70, M // 2, [1, 1j, -1, -1j]), CFG)
    assert p.range_r == pytest.approx(3.009, abs=DP.range_resolution_m / 2)
    assert p.velocity_v == 0.0


def _ula_values(theta_deg, cfg=CFG):
    """Forward-simulate per-RX phases of a far-field target at azimuth theta."""
    lam = derive(cfg).wavelength_m
    xs = (np.arange(cfg.rx_count) - (cfg.rx_count - 1) / 2) * cfg.rx_spacing_m
    # path to RX at x is shorter by x sin(theta); phase = 2 pi d / lambda
    return np.exp(1j * 2 * np.pi / lam * (-xs * math.sin(math.radians(theta_deg))))


@pytest.mark.parametrize("theta", [-30.0, 0.0, 10.0, 30.0, 45.0])
def test_decode_azimuth_from_forward_phases(theta):
    p = decode_point(_peak(70, M // 2, _ula_values(theta)), CFG)
    sin_est = p.x / p.range_r
    assert abs(sin_est - math.sin(math.radians(theta))) <= angular_bin_width(CFG)
    assert sin_est == pytest.approx(math.sin(math.radians(theta)), abs=1e-9)


def test_decode_zero_value_rejected():
    with pytest.raises(DSPError, match="zero"):
        decode_point(_peak(70, 64, [0, 0, 0, 0]), CFG)


@given(st.integers(0, N - 1), st.integers(0, M - 1),
       st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False),
                min_size=4, max_size=4).filter(lambda v: any(abs(x) > 1e-6 for x in v)),
       st.sampled_from(["phase_array", "paper_literal"]))
@settings(max_examples=200, deadline=None)
def test_point_invariants(r_bin, d_bin, values, mode):
    p = decode_point(_peak(r_bin, d_bin, values), CFG, mode)
    assert p.range_r >= 0
    assert abs(p.velocity_v) <= DP.max_velocity_mps + 1e-12
    assert math.isfinite(p.intensity_db)
    assert math.sqrt(p.x**2 + p.y**2 + p.z**2) == pytest.approx(p.range_r, abs=1e-6)


def test_mount_height_offsets_z():
    p = decode_point(_peak(70, 64, _ula_values(10)), CFG, mount_height_m=1.2)
    assert p.z == 1.2


def test_unknown_angle_mode():
    with pytest.raises(DSPError):
        decode_point(_peak(70, 64, [1, 1, 1, 1]), CFG, "music")


def test_paper_literal_mode_uses_doppler_bin():
    vals = _ula_values(20)
    lit0 = decode_point(_peak(70, 64, vals), CFG, "paper_literal")
    assert lit0.x == 0.0 and lit0.y == pytest.approx(lit0.range_r)
    lit = decode_point(_peak(70, 66, vals), CFG, "paper_literal")
    aperture = 3 * CFG.rx_spacing_m
    assert lit.x / lit.range_r == pytest.approx(DP.wavelength_m * 2 / (2 * aperture))


@pytest.mark.parametrize("delta", [0.1, 0.5, 1.0])
def test_velocity_aliasing_wraps(delta):
    v = DP.max_velocity_mps + delta
    cloud = process_frame(synthesize_if(_target(4.0, v=v, az_deg=30), CFG))
    top = cloud.points[0]
    assert top[4] == pytest.approx(v - 2 * DP.max_velocity_mps, abs=DP.velocity_resolution_mps)


def test_pure_noise_frame_has_128_points():
    rng = np.random.default_rng(7)
    x = (rng.normal(size=(4, M, N)) + 1j * rng.normal(size=(4, M, N))) * math.sqrt(0.5)
    cloud = process_frame(IFCube(x, CFG))
    assert cloud.points.shape == (POINTS_PER_FRAME, 6)
    # intensities sit near the noise floor: no cell stands out by more than ~12 dB
    assert np.ptp(cloud.points[:, 5]) < 12


def test_single_target_top_point():
    r, v = 5.0, -1.5
    cloud = process_frame(add_noise(synthesize_if(_target(r, v, az_deg=-25), CFG), 20.0, 0))
    top = cloud.points[0]
    assert abs(top[3] - r) <= DP.range_resolution_m
    assert abs(top[4] - v) <= DP.velocity_resolution_mps
    assert math.degrees(math.asin(top[0] / top[3])) == pytest.approx(-25, abs=5)


def test_two_targets_two_range_clusters():
    paths = ScatterPaths.concatenate([_target(3.0, az_deg=25), _target(4.0, az_deg=-25)])
    cloud = process_frame(add_noise(synthesize_if(paths, CFG), 20.0, 1))
    ranges = cloud.points[:20, 3]
    assert np.any(np.abs(ranges - 3.0) < 0.1) and np.any(np.abs(ranges - 4.0) < 0.1)


def test_all_zero_cube_padded_to_128():
    cloud = process_frame(IFCube(np.zeros((4, M, N), complex), CFG))
    assert cloud.points.shape == (128, 6)
    assert np.all(cloud.points[:, 5] == INTENSITY_FLOOR_DB)


def test_zero_cells_skipped_for_next_ranked():
    # one live cell; every other point is floor padding, never a decode error
    cube = synthesize_if(_target(70 * DP.range_resolution_m, az_deg=30), CFG)
    cloud = process_frame(cube)
    assert cloud.points.shape == (128, 6)
    assert np.isfinite(cloud.points).all()


def test_decode_points_matches_decode_point():
    rd = remove_clutter(_rd(ScatterPaths.concatenate([_target(3.0, 1.0), _target(6.0, -2.0, -40)])))
    peaks = select_topk(rd)
    batch = decode_points(peaks, CFG)
    for i in range(0, 128, 17):
        np.testing.assert_allclose(batch[i], decode_point(peaks[i], CFG))


def test_peakset_type():
    rd = remove_clutter(_rd(_target(3.0)))
    peaks = select_topk(rd)
    assert isinstance(peaks, PeakSet) and peaks.values.shape == (128, 4)
