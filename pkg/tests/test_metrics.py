import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zakotfs.core import DDSignal, TDSignal, idzt, make_grid, oversampled_td, sinc_interpolate
from zakotfs.exceptions import FrameSizeError, InvalidParameterError
from zakotfs.metrics import EVM_FLOOR_DB, BerReport, ber, evm, packet_papr, papr, qpsk_ber_theory
from zakotfs.modem import ModemConfig, bits_per_packet, tx_packet
from zakotfs.pilot import PointPilotSpec, SpreadPilotSpec, point_pilot, spread_pilot

from . import oracles


def test_ber_counts():
    bits = np.random.default_rng(0).integers(0, 2, 3072)
    assert ber(bits, bits).ber == 0.0
    assert ber(bits, 1 - bits).ber == 1.0
    flipped = bits.copy()
    flipped[[0, 100, 3071]] ^= 1
    rep = ber(bits, flipped)
    assert rep == BerReport(3, 3072) and rep.ber == 3 / 3072


def test_ber_length_mismatch():
    with pytest.raises(FrameSizeError):
        ber([0, 1], [0])


def test_ber_report_addition():
    assert (BerReport(1, 10) + BerReport(2, 30)).ber == pytest.approx(3 / 40)


def test_constant_modulus_papr():
    s = np.exp(2j * np.pi * 0.123 * np.arange(1000))
    assert papr(TDSignal(s, 1.0)).papr_db == pytest.approx(0.0, abs=1e-12)


def test_zero_signal_rejected():
    with pytest.raises(InvalidParameterError):
        papr(np.zeros(10))


def test_point_pilot_frame_papr():
    g = make_grid(32, 48, 30e3)
    td = oversampled_td(point_pilot(g, PointPilotSpec(16, 24)), 4)
    assert papr(td).papr_db == pytest.approx(15.0, abs=1.5)


def test_spread_pilot_frame_papr():
    g = make_grid(31, 37, 30e3)
    td = oversampled_td(spread_pilot(g, SpreadPilotSpec(16, 19, 5)), 4)
    assert papr(td).papr_db == pytest.approx(6.0, abs=1.5)


@pytest.mark.parametrize("mode", ["point", "spread"])
def test_papr_against_exact_interpolant(mode):
    g = make_grid(32, 48, 30e3) if mode == "point" else make_grid(31, 37, 30e3)
    pilot = point_pilot(g, PointPilotSpec(16, 24)) if mode == "point" else spread_pilot(g, SpreadPilotSpec(16, 19, 5))
    s = idzt(pilot).samples
    exact = oracles.band_limited_papr_db(s, 4)
    # a kernel spanning the whole frame is the exact interpolant
    assert packet_papr(s, 4, sinc_half_width=s.size).papr_db == pytest.approx(exact, abs=1e-9)
    # the default 64-bin truncation stays far inside the +-1.5 dB PAPR tolerance
    assert packet_papr(s, 4).papr_db == pytest.approx(exact, abs=0.25)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_papr_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(256) + 1j * rng.standard_normal(256)
    assert papr(scale * s).papr_db == pytest.approx(papr(s).papr_db, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_papr_oversampling_monotone(seed):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(200) + 1j * rng.standard_normal(200)
    assert packet_papr(s, 8).papr_db - papr(s).papr_db >= -1e-9


def test_sinc_interpolate_keeps_samples():
    s = np.random.default_rng(1).standard_normal(50) + 0j
    np.testing.assert_allclose(sinc_interpolate(s, 4)[::4], s, atol=1e-12)


def test_full_packet_papr_gap():
    rng = np.random.default_rng(2)
    vals = {}
    for cfg in (ModemConfig(make_grid(32, 48, 30e3)), ModemConfig(make_grid(31, 37, 30e3), pilot_mode="spread")):
        td, layout = tx_packet(cfg, rng.integers(0, 2, bits_per_packet(cfg)))
        vals[cfg.pilot_mode] = packet_papr(td.samples[layout.payload_slice], 4).papr_db
    assert vals["point"] - vals["spread"] >= 3.0


def test_evm_values():
    g = make_grid(4, 4, 1.0)
    x = DDSignal(g, np.exp(1j * np.pi / 4 * (2 * np.arange(16).reshape(4, 4) + 1)))
    assert evm(x, x) == EVM_FLOOR_DB
    assert evm(x.cell + 0.1, x) == pytest.approx(-20.0)
    with pytest.raises(FrameSizeError):
        evm(x, np.ones(3))


def test_qpsk_theory_against_oracle():
    snr = np.array([0.0, 5.0, 7.33, 9.8, 12.0])
    np.testing.assert_allclose(qpsk_ber_theory(snr), oracles.qpsk_ber(snr), rtol=1e-12)
    assert qpsk_ber_theory(7.33) == pytest.approx(1e-2, rel=0.01)
    assert qpsk_ber_theory(9.80) == pytest.approx(1e-3, rel=0.02)
