"""Fiber propagation, filters, noise loading and OSNR conversions."""

import numpy as np
import pytest

from simplexsim import build_format, de_bruijn
from simplexsim.channel import (
    FiberSpec,
    apply_jones,
    cd_phase,
    ebn0_from_osnr,
    jones_matrix,
    measure_osnr,
    noise_load,
    optical_bpf,
    osnr_from_ebn0,
    propagate_linear,
    propagate_nonlinear,
    voa,
)
from simplexsim.tx import TxConfig, map_bits, pulse_shape, set_power
from simplexsim.waveform import DualPolWaveform

RS = 16e9


def make_waveform(n_sym=1024, sps=4, power_dbm=0.0, fmt="3D-Simplex", seed=None):
    fd = build_format(fmt)
    bits = de_bruijn(11).tile(n_sym * fd.bits_per_symbol)
    cfg = TxConfig(symbol_rate=RS, samples_per_symbol=sps)
    wf = pulse_shape(map_bits(bits, fd, RS), cfg)
    return set_power(wf, power_dbm)


class TestLinear:
    def test_zero_length_identity(self):
        wf = make_waveform()
        out = propagate_linear(wf, FiberSpec(length_km=0.0))
        np.testing.assert_allclose(out.x, wf.x, atol=1e-12)

    def test_attenuation_300km(self):
        """0.21 dB/km over 300 km is 63 dB of power loss."""
        wf = make_waveform(power_dbm=10.0)
        out = propagate_linear(wf, FiberSpec(length_km=300.0, dispersion_ps_nm_km=0.0))
        loss = 10 * np.log10(wf.power() / out.power())
        assert loss == pytest.approx(63.0, abs=1e-9)

    def test_dispersion_preserves_power(self):
        wf = make_waveform()
        fiber = FiberSpec(length_km=100.0, attenuation_db_km=0.0)
        out = propagate_linear(wf, fiber)
        assert out.power() == pytest.approx(wf.power(), rel=1e-12)

    def test_phase_value(self):
        """phi(f) = pi lambda^2 D L f^2 / c at a spot frequency."""
        fiber = FiberSpec(length_km=300.0)
        f = np.array([10e9])
        phi = cd_phase(f, fiber, 1550e-9)
        d_si = 16.5e-6
        expect = np.pi * (1550e-9) ** 2 * d_si * 300e3 * (10e9) ** 2 / 299792458.0
        assert phi[0] == pytest.approx(expect, rel=1e-12)

    def test_group_delay_spread(self):
        """An impulse through D = 16.5 ps/(nm km), L = 300 km spreads over
        roughly D*L*(signal bandwidth in nm); check energy leaves the
        original support."""
        n = 8192
        x = np.zeros(n, dtype=np.complex128)
        x[n // 2] = 1.0
        wf = DualPolWaveform(x=x, y=np.zeros_like(x), sample_rate=64e9)
        out = propagate_linear(wf, FiberSpec(length_km=300.0, attenuation_db_km=0.0))
        core = np.abs(out.x[n // 2 - 8 : n // 2 + 8]) ** 2
        assert core.sum() < 0.1  # energy dispersed far beyond 16 samples


class TestNonlinear:
    def test_cw_spm_closed_form(self):
        """alpha = 0, D = 0: a CW field of power P acquires exactly
        (8/9) gamma P L of common phase."""
        p_w = 0.01
        n = 256
        fld = np.sqrt(p_w / 2.0) * np.ones(n, dtype=np.complex128)
        wf = DualPolWaveform(x=fld.copy(), y=fld.copy(), sample_rate=64e9)
        fiber = FiberSpec(
            length_km=80.0, attenuation_db_km=0.0, dispersion_ps_nm_km=0.0
        )
        out = propagate_nonlinear(wf, fiber, steps=16)
        gamma = 1.3e-3
        expect = (8.0 / 9.0) * gamma * p_w * 80e3  # 0.924 rad, no wrap
        np.testing.assert_allclose(np.angle(out.x / wf.x), expect, atol=1e-12)
        np.testing.assert_allclose(np.angle(out.y / wf.y), expect, atol=1e-12)
        # step count must not matter for CW
        out1 = propagate_nonlinear(wf, fiber, steps=1)
        np.testing.assert_allclose(np.angle(out1.x / wf.x), expect, atol=1e-12)

    def test_gamma_zero_matches_linear(self):
        wf = make_waveform(power_dbm=16.0)
        fiber = FiberSpec(length_km=100.0, gamma_per_w_km=0.0)
        nl = propagate_nonlinear(wf, fiber, steps=50)
        lin = propagate_linear(wf, fiber)
        err = np.sqrt(np.mean(np.abs(nl.x - lin.x) ** 2) / np.mean(np.abs(lin.x) ** 2))
        assert err < 1e-9

    def test_lossless_energy_conserved(self):
        wf = make_waveform(power_dbm=16.0)
        fiber = FiberSpec(length_km=50.0, attenuation_db_km=0.0)
        out = propagate_nonlinear(wf, fiber, steps=100)
        assert out.power() == pytest.approx(wf.power(), rel=1e-9)

    def test_step_halving_converged(self):
        """Doubling the step count changes the field by < 1e-3 RMS at the
        default resolution, 16 dBm over 300 km."""
        wf = make_waveform(n_sym=2048, power_dbm=16.0)
        fiber = FiberSpec(length_km=300.0)
        a = propagate_nonlinear(wf, fiber, steps=1000)
        b = propagate_nonlinear(wf, fiber, steps=2000)
        scale = np.sqrt(np.mean(np.abs(b.x) ** 2 + np.abs(b.y) ** 2))
        err = np.sqrt(
            np.mean(np.abs(a.x - b.x) ** 2 + np.abs(a.y - b.y) ** 2)
        ) / scale
        assert err < 1e-3

    def test_default_step_count(self):
        assert FiberSpec(length_km=300.0).resolved_steps() == 1000
        assert FiberSpec(length_km=300.0, steps=123).resolved_steps() == 123

    def test_commutes_with_jones_rotation(self):
        """The Manakov nonlinearity depends on |x|^2 + |y|^2 only, so a
        unitary polarization rotation commutes with propagation."""
        wf = make_waveform(n_sym=512, power_dbm=16.0)
        m = jones_matrix(0.4, 0.3)
        fiber = FiberSpec(length_km=20.0)
        a = propagate_nonlinear(apply_jones(wf, m), fiber, steps=40)
        b = apply_jones(propagate_nonlinear(wf, fiber, steps=40), m)
        err = np.sqrt(np.mean(np.abs(a.x - b.x) ** 2 + np.abs(a.y - b.y) ** 2))
        assert err / np.sqrt(b.power()) < 1e-9


class TestVoaAndFilter:
    def test_voa_loss(self):
        wf = make_waveform(power_dbm=10.0)
        out = voa(wf, 4.0)
        assert 10 * np.log10(wf.power() / out.power()) == pytest.approx(4.0, abs=1e-12)

    def test_voa_rejects_gain(self):
        with pytest.raises(ValueError):
            voa(make_waveform(n_sym=16), -1.0)

    @pytest.mark.parametrize("order", [1, 2, 4, 6])
    def test_bpf_half_power_at_edges(self, order):
        """-3 dB at +-B/2 for every super-Gaussian order."""
        n = 4096
        fs = 64e9
        x = np.zeros(n, dtype=np.complex128)
        x[0] = 1.0  # impulse: flat spectrum
        wf = DualPolWaveform(x=x, y=x.copy(), sample_rate=fs)
        b = 20e9
        out = optical_bpf(wf, b, order=order)
        spec = np.fft.fft(out.x)
        f = np.fft.fftfreq(n, 1 / fs)
        k = np.argmin(np.abs(f - b / 2))
        assert np.abs(spec[k]) ** 2 == pytest.approx(0.5, rel=1e-3)

    def test_bpf_order1_gaussian(self):
        n = 4096
        fs = 64e9
        x = np.zeros(n, dtype=np.complex128)
        x[0] = 1.0
        wf = DualPolWaveform(x=x, y=x.copy(), sample_rate=fs)
        out = optical_bpf(wf, 20e9, order=1)
        spec = np.abs(np.fft.fft(out.x))
        f = np.fft.fftfreq(n, 1 / fs)
        model = np.exp(-np.log(np.sqrt(2.0)) * (2 * f / 20e9) ** 2)
        np.testing.assert_allclose(spec, model, atol=1e-9)

    def test_bpf_wide_open_identity(self):
        wf = make_waveform(n_sym=256)
        out = optical_bpf(wf, 1e15, order=4)
        np.testing.assert_allclose(out.x, wf.x, atol=1e-9)


class TestNoise:
    def test_round_trip_osnr(self):
        """noise_load then measure_osnr reproduces the target within
        statistical wobble of the finite block."""
        wf = make_waveform(n_sym=16384, power_dbm=0.0)
        rng = np.random.default_rng(42)
        for target in (5.0, 10.0, 15.0, 20.0, 25.0):
            noisy, noise = noise_load(wf, target, rng)
            got = measure_osnr(wf, noise)
            assert got == pytest.approx(target, abs=0.05)
            assert noisy.power() > wf.power()

    def test_infinite_target_no_noise(self):
        wf = make_waveform(n_sym=64)
        rng = np.random.default_rng(0)
        noisy, noise = noise_load(wf, np.inf, rng)
        np.testing.assert_array_equal(noisy.x, wf.x)
        assert noise.power() == 0.0

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            noise_load(make_waveform(n_sym=16), np.nan, np.random.default_rng(0))

    def test_seeded_noise_reproducible(self):
        wf = make_waveform(n_sym=256)
        a, _ = noise_load(wf, 12.0, np.random.default_rng(7))
        b, _ = noise_load(wf, 12.0, np.random.default_rng(7))
        np.testing.assert_array_equal(a.x, b.x)

    def test_doubling_noise_power_costs_3db(self):
        wf = make_waveform(n_sym=4096)
        rng = np.random.default_rng(3)
        _, n1 = noise_load(wf, 13.0, rng)
        half = n1.with_fields(n1.x * np.sqrt(2.0), n1.y * np.sqrt(2.0))
        got = measure_osnr(wf, half)
        ref = measure_osnr(wf, n1)
        assert ref - got == pytest.approx(3.0103, abs=1e-6)

    def test_unpolarized_split(self):
        """Noise power splits evenly between polarizations."""
        wf = make_waveform(n_sym=16384)
        _, noise = noise_load(wf, 10.0, np.random.default_rng(11))
        px = np.mean(np.abs(noise.x) ** 2)
        py = np.mean(np.abs(noise.y) ** 2)
        assert px / py == pytest.approx(1.0, abs=0.05)


class TestOsnrConversion:
    def test_32g_example(self):
        """Eb/N0 = 10 dB at 32 Gb/s maps to OSNR = 11.07 dB."""
        assert osnr_from_ebn0(10.0, 32e9) == pytest.approx(11.0721, abs=1e-3)

    def test_round_trip(self):
        for ebn0 in (0.0, 6.5, 14.0):
            for rb in (32e9, 50e9):
                osnr = osnr_from_ebn0(ebn0, rb)
                assert ebn0_from_osnr(osnr, rb) == pytest.approx(ebn0, abs=1e-12)

    def test_reference_band_scaling(self):
        """Halving the reference bandwidth halves the counted noise power,
        so the same link reads 3 dB more OSNR."""
        a = osnr_from_ebn0(10.0, 32e9, ref_bandwidth=12.5e9)
        b = osnr_from_ebn0(10.0, 32e9, ref_bandwidth=6.25e9)
        assert b - a == pytest.approx(3.0103, abs=1e-4)
