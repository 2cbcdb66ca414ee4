import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zakotfs.channel import ChannelTap, add_awgn, apply_dd_channel, effective_channel_oracle, make_rng
from zakotfs.core import DDChannelEstimate, dzt, idzt, make_grid, twisted_conv_periodic
from zakotfs.estimation import build_channel_matrix
from zakotfs.exceptions import FrameSizeError, InvalidParameterError
from zakotfs.metrics import ber
from zakotfs.modem import (
    ModemConfig,
    bits_per_packet,
    build_data_frame,
    cancel_pilot,
    demap_qpsk,
    map_qpsk,
    packet_layout,
    receive_packet,
    rx_demodulate,
    tx_point_pilot_packet,
    tx_spread_pilot_packet,
)
from zakotfs.pilot import SpreadPilotSpec, spread_pilot

S = 1 / math.sqrt(2)
POINT = ModemConfig(make_grid(32, 48, 30e3))
SPREAD = ModemConfig(make_grid(31, 37, 30e3), pilot_mode="spread")


def bits_for(cfg, seed=0):
    return make_rng(seed).integers(0, 2, bits_per_packet(cfg), dtype=np.uint8)


def run_link(cfg, taps, snr_db=math.inf, seed=0):
    bits = bits_for(cfg, seed)
    td, layout = tx_point_pilot_packet(cfg, bits) if cfg.pilot_mode == "point" else tx_spread_pilot_packet(cfg, bits)
    rx = apply_dd_channel(td, taps) if taps else td
    rx, nv = add_awgn(rx, snr_db, seed=seed + 1000, power_slice=layout.payload_slice)
    return bits, rx_demodulate(rx, layout, cfg, nv)


# --- QPSK ----------------------------------------------------------------------


def test_map_examples():
    assert map_qpsk([0, 0])[0] == pytest.approx((1 + 1j) * S)
    np.testing.assert_allclose(map_qpsk([1, 1, 0, 0]), [(-1 - 1j) * S, (1 + 1j) * S])


def test_demap_examples():
    np.testing.assert_array_equal(demap_qpsk([(0.9 + 1.1j) * S]), [0, 0])
    np.testing.assert_array_equal(demap_qpsk([0j]), [0, 0])
    pts = map_qpsk([0, 0, 0, 1, 1, 1, 1, 0])
    np.testing.assert_array_equal(demap_qpsk(pts), [0, 0, 0, 1, 1, 1, 1, 0])


@given(st.lists(st.integers(0, 1), min_size=0, max_size=200).filter(lambda b: len(b) % 2 == 0))
def test_qpsk_round_trip(bits):
    np.testing.assert_array_equal(demap_qpsk(map_qpsk(bits)), np.array(bits, dtype=np.uint8))


def test_qpsk_unit_energy_and_gray():
    pts = map_qpsk([0, 0, 0, 1, 1, 1, 1, 0])
    np.testing.assert_allclose(np.abs(pts), 1.0)
    # neighbours around the circle differ in one bit
    for a, b in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        assert abs(pts[a] - pts[b]) == pytest.approx(math.sqrt(2))


def test_map_rejects_odd_and_non_binary():
    with pytest.raises(InvalidParameterError):
        map_qpsk([0, 1, 1])
    with pytest.raises(ValueError):
        map_qpsk([0, 2])


# --- transmitter ------------------------------------------------------------------


def test_point_packet_layout():
    td, layout = tx_point_pilot_packet(POINT, bits_for(POINT))
    assert len(td) - layout.payload_start == 2 * 1536
    assert layout.frames == ("pilot", "data")
    assert td.origin_index == layout.payload_start
    assert layout == packet_layout(POINT)


def test_spread_packet_layout():
    td, layout = tx_spread_pilot_packet(SPREAD, bits_for(SPREAD))
    assert len(td) - layout.payload_start == 1147
    assert layout.frames == ("isac",)


def test_zero_bits_data_frame():
    cfg = POINT
    x = build_data_frame(cfg, np.zeros(bits_per_packet(cfg), dtype=np.uint8))
    np.testing.assert_allclose(x.cell * math.sqrt(cfg.grid.MN), (1 + 1j) * S)
    td, layout = tx_point_pilot_packet(cfg, np.zeros(bits_per_packet(cfg), dtype=np.uint8))
    data = dzt(td.samples[layout.frame_slice(1)], cfg.grid).cell / cfg.amplitude
    np.testing.assert_allclose(data, x.cell, atol=1e-12)


def test_pilot_only_spread_frame():
    cfg = ModemConfig(make_grid(31, 37, 30e3), pilot_mode="spread", pilot_to_data_db=math.inf)
    td, layout = tx_spread_pilot_packet(cfg, bits_for(cfg))
    frame = td.samples[layout.frame_slice(0)]
    pilot = spread_pilot(cfg.grid, SpreadPilotSpec(16, 19, 5))
    np.testing.assert_allclose(frame, idzt(pilot).samples * cfg.amplitude, atol=1e-12)
    with pytest.raises(InvalidParameterError):
        rx_demodulate(td, layout, cfg)


def test_payload_power():
    td, layout = tx_point_pilot_packet(POINT, bits_for(POINT))
    assert np.mean(np.abs(td.samples[layout.payload_slice]) ** 2) == pytest.approx(1.0, rel=1e-12)
    # superposed pilot and data: unit power on average, the cross term is zero mean
    powers = []
    for seed in range(50):
        td, layout = tx_spread_pilot_packet(SPREAD, bits_for(SPREAD, seed))
        p = np.mean(np.abs(td.samples[layout.payload_slice]) ** 2)
        assert abs(p - 1.0) <= 0.05
        powers.append(p)
    assert np.mean(powers) == pytest.approx(1.0, abs=0.01)


def test_energy_split():
    cfg = ModemConfig(make_grid(31, 37, 30e3), pilot_mode="spread", pilot_to_data_db=3.0)
    e_p, e_d = cfg.energies
    assert e_p + e_d == pytest.approx(1.0)
    assert 10 * math.log10(e_p / e_d) == pytest.approx(3.0)


def test_wrong_mode_rejected():
    with pytest.raises(InvalidParameterError):
        tx_spread_pilot_packet(POINT, bits_for(POINT))
    with pytest.raises(InvalidParameterError):
        tx_point_pilot_packet(SPREAD, bits_for(SPREAD))
    with pytest.raises(InvalidParameterError):
        ModemConfig(make_grid(32, 48, 30e3), pilot_mode="spread")


# --- receiver ---------------------------------------------------------------------


@pytest.mark.parametrize("cfg", [POINT, SPREAD], ids=["point", "spread"])
def test_identity_loopback(cfg):
    bits, res = run_link(cfg, [])
    assert ber(bits, res.bits).bit_errors == 0
    k, l, v = res.estimate.peak()
    assert (k, l) == (0, 0)
    # the spread estimate sees the data through the pilot's cross-ambiguity,
    # which is noise-like with rms sqrt(E_d / (E_p MN))
    tol = 1e-9 if cfg.pilot_mode == "point" else 4 / math.sqrt(cfg.grid.MN)
    assert abs(v - 1.0) <= tol


@pytest.mark.parametrize("cfg", [POINT, SPREAD], ids=["point", "spread"])
def test_single_tap(cfg):
    g = 0.8 * np.exp(1j * np.pi / 4)
    bits, res = run_link(cfg, [ChannelTap.from_bins(cfg.grid, 2, 1, g)])
    tol = 0.01 * abs(g) if cfg.pilot_mode == "point" else 4 / math.sqrt(cfg.grid.MN)
    assert abs(res.estimate.at(2, 1) - g) <= tol
    assert res.estimate.peak()[:2] == (2, 1)
    assert ber(bits, res.bits).bit_errors == 0


def test_point_pilot_at_22db():
    errors = total = 0
    for seed in range(4):
        bits, res = run_link(POINT, [], 22.0, seed)
        rep = ber(bits, res.bits)
        errors, total = errors + rep.bit_errors, total + rep.bits_total
    assert errors / total <= 1e-3


@pytest.mark.parametrize("cfg", [POINT, SPREAD], ids=["point", "spread"])
def test_two_tap_channel_at_20db(cfg):
    taps = [ChannelTap.from_bins(cfg.grid, 0, 0, 1.0), ChannelTap.from_bins(cfg.grid, 3, -1, 0.5j)]
    bits, res = run_link(cfg, taps, 20.0, seed=3)
    assert ber(bits, res.bits).ber <= 0.01


def test_demodulation_deterministic():
    bits = bits_for(SPREAD)
    td, layout = tx_spread_pilot_packet(SPREAD, bits)
    rx, nv = add_awgn(td, 12.0, seed=5)
    a = rx_demodulate(rx, layout, SPREAD, nv)
    b = rx_demodulate(rx, layout, SPREAD, nv)
    np.testing.assert_array_equal(a.bits, b.bits)
    np.testing.assert_array_equal(a.equalized.cell, b.equalized.cell)


def test_short_buffer_rejected():
    td, layout = tx_point_pilot_packet(POINT, bits_for(POINT))
    with pytest.raises(FrameSizeError):
        rx_demodulate(td.with_samples(td.samples[:-10]), layout, POINT)


def test_receive_packet_with_sync():
    from zakotfs.channel import apply_impairments

    bits = bits_for(POINT, 4)
    td, layout = tx_point_pilot_packet(POINT, bits)
    rx = apply_impairments(td, timing_offset=321, cfo_hz=420.0, phase=2.0)
    res, sync = receive_packet(rx, layout, POINT, 0.0, sync=True)
    assert sync.frame_start == 321
    assert ber(bits, res.bits).bit_errors == 0


def test_evm_decreases_with_snr():
    values = []
    for snr in (0, 5, 10, 15, 20, 25, 30):
        errs = []
        for seed in range(100):
            bits, res = run_link(POINT, [], float(snr), seed)
            ref = map_qpsk(bits).reshape(POINT.grid.shape, order="F")
            errs.append(np.mean(np.abs(res.equalized.cell - ref) ** 2))
        values.append(10 * math.log10(np.mean(errs)))
    assert all(b < a for a, b in zip(values, values[1:]))


# --- pilot cancellation -----------------------------------------------------------


def test_cancel_exact():
    g = SPREAD.grid
    pilot = SPREAD.pilot()
    vals = np.zeros((13, 5), dtype=complex)
    vals[6, 2], vals[8, 3] = 1.0, 0.4j
    h = DDChannelEstimate(g, SPREAD.support, vals)
    y = twisted_conv_periodic(h, pilot)
    assert np.max(np.abs(cancel_pilot(y, h, pilot).cell)) <= 1e-10
    zero = DDChannelEstimate.zeros(g, SPREAD.support)
    np.testing.assert_array_equal(cancel_pilot(y, zero, pilot).cell, y.cell)


def test_isac_residual_is_filtered_data():
    cfg = SPREAD
    g = cfg.grid
    bits = bits_for(cfg)
    taps = [ChannelTap.from_bins(g, 0, 0, 1.0), ChannelTap.from_bins(g, 2, 1, 0.5j)]
    h = effective_channel_oracle(taps, g, cfg.support)
    h = DDChannelEstimate(g, cfg.support, np.where(np.abs(h.values) > 1e-6, h.values, 0))
    data = build_data_frame(cfg, bits)
    pilot = cfg.pilot()
    y = twisted_conv_periodic(h, data + pilot)
    residual = cancel_pilot(y, h, pilot)
    expected = build_channel_matrix(h).apply(data)
    np.testing.assert_allclose(residual.cell, expected.cell, atol=1e-10)
    # pilot energy left in the residual, relative to what was there
    leftover = residual - expected
    assert 10 * math.log10(max(leftover.energy, 1e-300) / twisted_conv_periodic(h, pilot).energy) <= -60
