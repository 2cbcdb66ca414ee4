"""End-to-end acceptance criteria, one test each.

Every test prints a ``CRITERION n: PASS|FAIL`` line (shown even under
captured output) and then asserts.  Runtime limits are part of each
criterion and are checked with a wall clock.
"""

import math
import time

import numpy as np
import pytest

from zakotfs.channel import ChannelTap, add_awgn, apply_dd_channel, apply_impairments, make_rng
from zakotfs.config import default_config, load_config
from zakotfs.core import DDFilter, DDSignal, SupportSet, cross_ambiguity, dzt, idzt, make_grid, twisted_conv_periodic
from zakotfs.estimation import build_channel_matrix
from zakotfs.experiments import run_ber_sweep, run_isac_sense, run_loopback, run_papr_compare
from zakotfs.framing import HeaderSpec, detect_frame, estimate_cfo
from zakotfs.metrics import ber, qpsk_ber_theory
from zakotfs.modem import ModemConfig, bits_per_packet, rx_demodulate, tx_packet, tx_point_pilot_packet
from zakotfs.pilot import SpreadPilotSpec, spread_pilot, validate_spread_params

from . import oracles

pytestmark = pytest.mark.acceptance

POINT = ModemConfig(make_grid(32, 48, 30e3))
SPREAD = ModemConfig(make_grid(31, 37, 30e3), pilot_mode="spread")


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def cfg_for(preset, **over):
    return load_config(base=default_config(preset).to_dict(), overrides=list(over.items()))


def test_criterion_1_transform_round_trip(report):
    t0 = time.perf_counter()
    worst = 0.0
    rng = np.random.default_rng(1)
    for M, N in ((32, 48), (31, 37), (5, 7)):
        g = make_grid(M, N, 30e3)
        for _ in range(100):
            x = DDSignal(g, rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N)))
            worst = max(worst, float(np.max(np.abs(dzt(idzt(x), g).cell - x.cell))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5
    report(1, ok, f"max err {worst:.2e} (<= 1e-12), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_2_twisted_convolution_oracle(report):
    t0 = time.perf_counter()
    g = make_grid(5, 7, 1.0)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        ntaps = int(rng.integers(1, 6))
        w = DDFilter(g, rng.integers(-8, 9, ntaps), rng.integers(-8, 9, ntaps), rng.standard_normal(ntaps) + 1j * rng.standard_normal(ntaps))
        x = DDSignal(g, rng.standard_normal((5, 7)) + 1j * rng.standard_normal((5, 7)))
        expected = oracles.twisted_conv_cell(w.to_dense(), x.cell)
        worst = max(
            worst,
            float(np.max(np.abs(twisted_conv_periodic(w, x).cell - expected))),
            float(np.max(np.abs(build_channel_matrix(w).apply(x).cell - expected))),
        )
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    report(2, ok, f"max err {worst:.2e} (<= 1e-10), {elapsed:.2f} s (< 10 s)")
    assert ok


def test_criterion_3_loopback(report):
    t0 = time.perf_counter()
    errors = {}
    for cfg in (POINT, SPREAD):
        bits = make_rng(3).integers(0, 2, bits_per_packet(cfg), dtype=np.uint8)
        td, layout = tx_packet(cfg, bits)
        errors[cfg.pilot_mode] = ber(bits, rx_demodulate(td, layout, cfg, 0.0).bits).bit_errors
    elapsed = time.perf_counter() - t0
    ok = not any(errors.values()) and elapsed < 10
    report(3, ok, f"bit errors {errors}, {elapsed:.2f} s (< 10 s)")
    assert ok


def _leakage_db(est, k0, l0):
    mag = est.magnitude_map().copy()
    ks, ls = est.support.lags()
    peak = abs(est.at(k0, l0))
    mag[(ks == k0) & (ls == l0)] = 0.0
    rest = mag.max()
    return -math.inf if rest == 0 else 20 * math.log10(rest / peak)


def test_criterion_4_single_tap_estimation(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    sup = POINT.support
    # leakage is measured over the whole fundamental cell, not just the support
    cell = SupportSet(-16, 15, -24, 23)
    pilot = POINT.pilot()
    bits = rng.integers(0, 2, bits_per_packet(POINT), dtype=np.uint8)
    td, layout = tx_point_pilot_packet(POINT, bits)
    worst_err, worst_leak = 0.0, -math.inf
    # physical taps through the full time-domain chain; delays are causal
    for _ in range(20):
        k0, l0 = int(rng.integers(0, sup.k_max + 1)), int(rng.integers(sup.l_min, sup.l_max + 1))
        g = rng.uniform(0.1, 2.0) * np.exp(2j * np.pi * rng.uniform())
        rx = apply_dd_channel(td, [ChannelTap.from_bins(POINT.grid, k0, l0, g)])
        y = dzt(rx.samples[layout.frame_slice(0)], POINT.grid).scaled(1 / POINT.amplitude)
        worst_err = max(worst_err, abs(cross_ambiguity(y, pilot, sup).at(k0, l0) - g) / abs(g))
        worst_leak = max(worst_leak, _leakage_db(cross_ambiguity(y, pilot, cell), k0, l0))
    # the delay-Doppler model over the full support (negative delays included),
    # for both pilot types
    spread = spread_pilot(SPREAD.grid, SpreadPilotSpec(16, 19, 5))
    spread_cell = SupportSet(-15, 15, -18, 18)
    for grid_pilot, full in ((pilot, cell), (spread, spread_cell)):
        for _ in range(20):
            k0, l0 = int(rng.integers(sup.k_min, sup.k_max + 1)), int(rng.integers(sup.l_min, sup.l_max + 1))
            g = rng.uniform(0.1, 2.0) * np.exp(2j * np.pi * rng.uniform())
            y = twisted_conv_periodic(DDFilter.delta(grid_pilot.grid, k0, l0, g), grid_pilot)
            worst_err = max(worst_err, abs(cross_ambiguity(y, grid_pilot, sup).at(k0, l0) - g) / abs(g))
            worst_leak = max(worst_leak, _leakage_db(cross_ambiguity(y, grid_pilot, full), k0, l0))
    elapsed = time.perf_counter() - t0
    ok = worst_err <= 0.02 and worst_leak <= -20 and elapsed < 30
    report(4, ok, f"worst gain err {100 * worst_err:.2e} % (<= 2 %), worst leakage {worst_leak:.1f} dB (<= -20 dB), {elapsed:.2f} s (< 30 s)")
    assert ok


def test_criterion_5_awgn_ber_envelope(report):
    t0 = time.perf_counter()
    targets = (7.33, 9.80)  # analytic QPSK BER 1e-2 and 1e-3
    trials = math.ceil(1e6 / bits_per_packet(POINT))
    cfg = cfg_for("ber-sweep", trials=trials, seed=5, **{"channel.snr_db": list(targets)})
    rows = run_ber_sweep(cfg)
    details, ok = [], True
    for row in rows:
        snr, sim = row["snr_db"], row["ber"]
        lo, hi = float(qpsk_ber_theory(snr + 0.5)), float(qpsk_ber_theory(snr - 0.5))
        # within 0.5 dB: the simulated point lies between the curve shifted by +-0.5 dB
        inside = lo <= sim <= hi and row["bits"] >= 1_000_000
        ok &= inside
        details.append(f"{snr} dB: {sim:.3e} in [{lo:.3e}, {hi:.3e}] over {row['bits']} bits")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    report(5, ok, "; ".join(details) + f", {elapsed:.1f} s (< 300 s)")
    assert ok


def test_criterion_6_papr(report):
    t0 = time.perf_counter()
    rows = run_papr_compare(cfg_for("papr", trials=20))
    val = {(r["mode"], r["region"]): r["papr_db"] for r in rows}
    pilot_gap, full_gap = val["improvement", "pilot"], val["improvement", "full"]
    elapsed = time.perf_counter() - t0
    ok = pilot_gap >= 8 and full_gap >= 3 and elapsed < 30
    report(
        6,
        ok,
        f"pilot-only {val['point', 'pilot']:.2f} vs {val['spread', 'pilot']:.2f} dB, gap {pilot_gap:.2f} dB (>= 8); "
        f"full-frame gap {full_gap:.2f} dB (>= 3), {elapsed:.2f} s (< 30 s)",
    )
    assert ok


def test_criterion_7_isac(report):
    t0 = time.perf_counter()
    taps = [{"gain": 1.0, "delay_bins": 0, "doppler_bins": 0}, {"gain": [0.45, -0.45], "delay_bins": 4, "doppler_bins": -1}]
    noisy = run_isac_sense(cfg_for("isac-sense", trials=20, **{"channel.taps": taps, "channel.snr_db": [20.0]})).summary[0]
    ident = run_isac_sense(cfg_for("isac-sense", trials=20, **{"channel.snr_db": [20.0]})).summary[0]
    clean = run_isac_sense(cfg_for("isac-sense", trials=5, **{"channel.taps": taps, "channel.snr_db": ["inf"]})).summary[0]
    elapsed = time.perf_counter() - t0
    p2s = min(noisy["peak_to_spurious_db"], ident["peak_to_spurious_db"])
    worst_ber = max(noisy["ber"], ident["ber"])
    ok = p2s >= 10 and worst_ber <= 0.05 and clean["bit_errors"] == 0 and elapsed < 60
    report(7, ok, f"peak-to-spurious {p2s:.1f} dB (>= 10), BER at 20 dB {worst_ber:.2e} (<= 0.05), zero-noise errors {clean['bit_errors']}, {elapsed:.2f} s (< 60 s)")
    assert ok


def test_criterion_8_sync_and_cfo(report):
    t0 = time.perf_counter()
    spec = HeaderSpec()
    rng = np.random.default_rng(8)
    nu_p = POINT.grid.nu_p
    misses, cfo_err = 0, []
    for trial in range(100):
        bits = rng.integers(0, 2, bits_per_packet(POINT), dtype=np.uint8)
        td, layout = tx_packet(POINT, bits)
        offset = int(rng.integers(0, 2000))
        cfo = float(rng.uniform(-0.1, 0.1) * nu_p)
        rx = apply_impairments(td, timing_offset=offset, cfo_hz=cfo, phase=float(rng.uniform(0, 2 * np.pi)))
        rx, _ = add_awgn(rx, 20.0, seed=trial, power_slice=slice(offset, offset + len(td)))
        sync = detect_frame(rx, spec)
        misses += sync.frame_start != offset
        cfo_err.append(abs(estimate_cfo(rx, sync, spec) - cfo))
    median = float(np.median(cfo_err))
    elapsed = time.perf_counter() - t0
    ok = misses == 0 and median <= 0.01 * nu_p and elapsed < 60
    report(8, ok, f"timing misses {misses}/100, median CFO error {median:.2f} Hz (<= {0.01 * nu_p:.0f} Hz), {elapsed:.2f} s (< 60 s)")
    assert ok


def test_criterion_9_reproducibility(report, tmp_path):
    runs = {
        "ber-sweep": (lambda out: run_ber_sweep(cfg_for("ber-sweep", trials=3, seed=9), out), ["ber_sweep.csv"]),
        "ber-sweep threaded": (lambda out: run_ber_sweep(cfg_for("ber-sweep", trials=3, seed=9, workers=4), out), ["ber_sweep.csv"]),
        "papr": (lambda out: run_papr_compare(cfg_for("papr", trials=3, seed=9), out), ["papr.csv"]),
        "isac-sense": (lambda out: run_isac_sense(cfg_for("isac-sense", trials=3, seed=9), out), ["isac_summary.csv", "sensing_map.csv"]),
        "loopback": (lambda out: run_loopback(cfg_for("loopback", seed=9), out), ["constellation.csv", "sensing_map.csv"]),
    }
    same = {}
    for name, (fn, files) in runs.items():
        fn(tmp_path / name / "a")
        fn(tmp_path / name / "b")
        for f in files:
            same[f"{name}/{f}"] = (tmp_path / name / "a" / f).read_bytes() == (tmp_path / name / "b" / f).read_bytes()
    serial, threaded = (tmp_path / n / "a" / "ber_sweep.csv" for n in ("ber-sweep", "ber-sweep threaded"))
    same["ber-sweep serial vs threaded"] = serial.read_bytes() == threaded.read_bytes()
    ok = all(same.values())
    report(9, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert ok


def test_criterion_10_spread_constraints(report):
    accepted = bool(validate_spread_params(31, 37, 5))
    bad = [(32, 37, 5), (31, 35, 5), (2, 37, 5), (31, 37, 31), (31, 37, 37), (31, 37, 0)]
    rejected = [t for t in bad if not validate_spread_params(*t)]
    energy = float(np.sum(np.abs(spread_pilot(SPREAD.grid, SpreadPilotSpec(16, 19, 5)).cell) ** 2))
    ok = accepted and len(rejected) == len(bad) and abs(energy - 1) <= 1e-12
    report(10, ok, f"(31,37,5) accepted={accepted}, rejected {len(rejected)}/{len(bad)} invalid triples, pilot energy - 1 = {energy - 1:.1e}")
    assert ok
