import math

import numpy as np
import pytest

from ftncpr.dsp import RngStream, combined_isi_taps
from ftncpr.errors import ParameterError
from ftncpr.link import (
    DualPolSignal,
    LinkConfig,
    apply_awgn_osnr,
    apply_phase_noise,
    apply_pol_mix,
    demap_qpsk,
    ftn_shape,
    map_qpsk,
    matched_filter,
    shaping_taps,
    snr_from_osnr,
    transmit,
    undo_pol_mix,
)


def test_gray_mapping_table():
    bits = np.array([0, 0, 0, 1, 1, 1, 1, 0])
    np.testing.assert_array_equal(map_qpsk(bits), [1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j])
    np.testing.assert_array_equal(demap_qpsk(map_qpsk(bits)), bits)
    with pytest.raises(ParameterError):
        map_qpsk([1, 0, 1])


def test_gray_neighbours_differ_by_one_bit():
    pts = map_qpsk(np.array([0, 0, 0, 1, 1, 1, 1, 0]))
    bits = demap_qpsk(pts).reshape(4, 2)
    for i in range(4):
        assert np.sum(bits[i] != bits[(i + 1) % 4]) == 1


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.0])
def test_matched_filter_output_equals_isi_model(alpha):
    cfg = LinkConfig(alpha=alpha, n_symbols=2000)
    sym = map_qpsk(RngStream(3, 0).bits(4000))
    rx = matched_filter(ftn_shape(sym, cfg), cfg)[:: cfg.sps]
    h = combined_isi_taps(alpha, cfg.rolloff, 30)
    model = np.convolve(sym, h.coefficients)[30 : 30 + sym.size]
    # gain: unit-energy filters sampled at alpha/sps per tap
    gain = np.vdot(model, rx).real / np.vdot(model, model).real
    err = rx[100:-100] - gain * model[100:-100]
    assert np.sqrt(np.mean(np.abs(err) ** 2)) < 0.02 * gain


def test_shaping_taps_unit_energy_and_spacing():
    cfg = LinkConfig(alpha=0.5)
    taps = shaping_taps(cfg)
    assert np.sum(taps.coefficients**2) == pytest.approx(1.0)
    assert taps.is_symmetric()
    assert len(taps) == 2 * math.ceil(32 * 4 / 2) + 1


def test_phase_noise_statistics():
    cfg = LinkConfig(linewidth_hz=500e3, n_symbols=2**19)
    n = 2**20
    sig = DualPolSignal(np.ones(n), np.ones(n))
    out, theta = apply_phase_noise(sig, cfg, RngStream(1, "phase"))
    assert theta[0] == 0
    var = np.var(np.diff(theta))
    assert var == pytest.approx(2 * math.pi * 500e3 / cfg.sample_rate, rel=0.03)
    np.testing.assert_allclose(out.x, np.exp(1j * theta))
    np.testing.assert_array_equal(out.x, out.y)


def test_zero_linewidth_is_identity():
    cfg = LinkConfig()
    sig = DualPolSignal(np.arange(5) + 0j, np.arange(5) * 1j)
    out, theta = apply_phase_noise(sig, cfg, RngStream(1, 2))
    np.testing.assert_array_equal(out.x, sig.x)
    np.testing.assert_array_equal(theta, 0)


def test_snr_from_osnr_convention():
    # dual-pol, 12.5 GHz reference at 28 GBaud: -3.50 dB offset
    snr_db = 10 * math.log10(snr_from_osnr(14.0, 28e9, 2))
    assert snr_db == pytest.approx(10.50, abs=5e-3)
    assert 10 * math.log10(snr_from_osnr(14.0, 28e9, 1)) == pytest.approx(13.51, abs=5e-3)


def test_awgn_variance_matches_osnr():
    cfg = LinkConfig(osnr_db=15.0)
    n = 200000
    x = np.full(n, 1 + 1j) * 0.5
    sig = DualPolSignal(x, x)
    out = apply_awgn_osnr(sig, cfg, RngStream(2, 3), RngStream(2, 4))
    noise = out.x - x
    want = np.mean(np.abs(x) ** 2) * cfg.sps / snr_from_osnr(15.0, cfg.baud)
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(want, rel=0.02)
    assert abs(np.corrcoef(noise.real, (out.y - x).real)[0, 1]) < 0.02


def test_awgn_infinite_osnr_is_noop():
    sig = DualPolSignal(np.ones(10), np.ones(10))
    out = apply_awgn_osnr(sig, LinkConfig(), RngStream(1, 3))
    np.testing.assert_array_equal(out.x, sig.x)


def test_pol_mix_is_unitary_and_invertible():
    r = np.random.default_rng(0)
    sig = DualPolSignal(r.normal(size=64) + 1j * r.normal(size=64), r.normal(size=64) + 1j * r.normal(size=64))
    mixed = apply_pol_mix(sig, 0.3, 1.1)
    p0 = np.sum(np.abs(sig.x) ** 2 + np.abs(sig.y) ** 2)
    p1 = np.sum(np.abs(mixed.x) ** 2 + np.abs(mixed.y) ** 2)
    assert p1 == pytest.approx(p0)
    back = undo_pol_mix(mixed, 0.3, 1.1)
    np.testing.assert_allclose(back.x, sig.x, atol=1e-12)
    np.testing.assert_allclose(back.y, sig.y, atol=1e-12)


def test_transmit_deterministic():
    cfg = LinkConfig(n_symbols=1000)
    w1, t1 = transmit(cfg, 5)
    w2, t2 = transmit(cfg, 5)
    np.testing.assert_array_equal(w1.x, w2.x)
    np.testing.assert_array_equal(t1.bits_y, t2.bits_y)
    assert len(w1) == 2000
    np.testing.assert_array_equal(map_qpsk(t1.bits_x), t1.symbols_x)


@pytest.mark.parametrize("kw", [dict(alpha=0.0), dict(alpha=1.2), dict(rolloff=0.0), dict(sps=1),
                                dict(linewidth_hz=-1.0), dict(n_symbols=10), dict(osnr_pols=3),
                                dict(osnr_db=float("nan"))])
def test_link_config_validation(kw):
    with pytest.raises(ParameterError):
        LinkConfig(**kw)


def test_dual_pol_length_check():
    with pytest.raises(ParameterError):
        DualPolSignal(np.ones(3), np.ones(4))
