"""End-to-end blind receiver: waveform in, bits out, diagnostics honest."""

import json

import numpy as np
import pytest

from simplexsim import build_format, de_bruijn
from simplexsim.analysis import count_ber
from simplexsim.channel import FiberSpec, apply_jones, jones_matrix, noise_load, propagate_linear
from simplexsim.dsp.chain import RxConfig, receive
from simplexsim.errors import DspDiagnosticError
from simplexsim.tx import TxConfig, transmit
from simplexsim.waveform import DualPolWaveform

RS = 16e9


def tx_block(fmt="3D-Simplex", n_sym=8192, order=13, **tx_kw):
    fd = build_format(fmt)
    bits = de_bruijn(order).tile(n_sym * fd.bits_per_symbol)
    cfg = TxConfig(symbol_rate=RS, samples_per_symbol=4, **tx_kw)
    rng = np.random.default_rng(11) if cfg.laser_linewidth or cfg.freq_offset else None
    return bits, fd, transmit(bits, fd, cfg, rng=rng)


class TestIdentityChannel:
    @pytest.mark.parametrize("fmt", ["3D-Simplex", "DP-BPSK", "DP-DPSK", "DP-QPSK"])
    @pytest.mark.parametrize("mode", ["ideal-cma", "hybrid-blind"])
    def test_noiseless_ber_zero(self, fmt, mode):
        bits, fd, wf = tx_block(fmt=fmt)
        out, rep = receive(wf, fd, RxConfig(symbol_rate=RS, eq_mode=mode))
        assert count_ber(bits, out, fd).ber == 0.0
        assert rep.converged
        assert rep.cycle_slips == 0

    def test_report_contents(self):
        bits, fd, wf = tx_block(n_sym=4096)
        out, rep = receive(wf, fd, RxConfig(symbol_rate=RS))
        assert set(rep.snapshots) == {"timing", "equalized", "carrier"}
        for sx, sy in rep.snapshots.values():
            assert len(sx) == len(sy) == 4096
        assert len(out) == 4096 * fd.bits_per_symbol
        np.testing.assert_array_equal(rep.symbols_x, rep.snapshots["carrier"][0])
        blob = json.dumps(rep.to_dict())
        assert "probe_distance" in blob
        assert len(rep.to_dict(trace_limit=16)["timing_tau"]) == 16


class TestImpairments:
    def test_jones_rotation_inverted(self):
        bits, fd, wf = tx_block()
        rotated = apply_jones(wf, jones_matrix(0.5, 0.3))
        out, rep = receive(rotated, fd, RxConfig(symbol_rate=RS))
        assert count_ber(bits, out, fd).ber == 0.0

    def test_dispersion_unwound(self):
        fiber = FiberSpec(length_km=300.0)
        bits, fd, wf = tx_block()
        out, rep = receive(
            propagate_linear(wf, fiber), fd, RxConfig(symbol_rate=RS, fiber=fiber)
        )
        assert count_ber(bits, out, fd).ber == 0.0

    def test_frequency_offset_and_linewidth(self):
        """100 MHz offset plus 100 kHz beat linewidth: the chain reports
        the offset within the estimator accuracy and still decodes."""
        bits, fd, wf = tx_block(laser_linewidth=50e3, freq_offset=100e6)
        cfg = RxConfig(symbol_rate=RS, lo_linewidth=50e3)
        out, rep = receive(wf, fd, cfg, rng=np.random.default_rng(3))
        assert abs(rep.freq_offset - 100e6) < 2e6
        assert count_ber(bits, out, fd).ber == 0.0

    def test_deterministic_given_seed(self):
        bits, fd, wf = tx_block(laser_linewidth=100e3)
        cfg = RxConfig(symbol_rate=RS, lo_linewidth=100e3)
        out1, rep1 = receive(wf, fd, cfg, rng=np.random.default_rng(42))
        out2, rep2 = receive(wf, fd, cfg, rng=np.random.default_rng(42))
        np.testing.assert_array_equal(out1, out2)
        assert rep1.to_dict() == rep2.to_dict()


class TestDiagnostics:
    def test_rank_one_channel_flagged(self):
        """Both receiver inputs carrying one polarization cannot be
        un-mixed; the equalizer's orthogonal reseed cannot help and the
        chain refuses to emit bits."""
        bits, fd, wf = tx_block(n_sym=4096)
        degenerate = wf.with_fields(wf.x, wf.x.copy())
        with pytest.raises(DspDiagnosticError, match="singular"):
            receive(degenerate, fd, RxConfig(symbol_rate=RS))

    def test_noise_only_input_flagged(self):
        fd = build_format("3D-Simplex")
        rng = np.random.default_rng(9)
        n = 4 * 4096
        wf = DualPolWaveform(
            x=(rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2),
            y=(rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2),
            sample_rate=4 * RS,
        )
        with pytest.raises(DspDiagnosticError, match="probe"):
            receive(wf, fd, RxConfig(symbol_rate=RS))

    def test_low_osnr_still_locks(self):
        """6 dB OSNR is far below the working point but the chain still
        locks: errors counted, no diagnostic."""
        bits, fd, wf = tx_block(n_sym=16384)
        noisy, _ = noise_load(wf, 6.0, np.random.default_rng(17))
        out, rep = receive(noisy, fd, RxConfig(symbol_rate=RS))
        res = count_ber(bits, out, fd)
        assert 0.0 < res.ber < 0.2
        assert rep.probe_distance < 0.55
