"""Config-driven simulations and capture processing with CSV/JSON output.

CSV schemas (column order is fixed):

* ``ber_sweep.csv``: snr_db, trials, bits, bit_errors, ber, ber_theory, evm_db
* ``papr.csv``: mode, region, oversample, trials, papr_db (``mode=improvement``
  rows hold point minus spread)
* ``sensing_map.csv``: snr_db, k, l, magnitude, magnitude_db
* ``isac_summary.csv``: snr_db, trials, bits, bit_errors, ber, evm_db,
  peak_k, peak_l, peak_to_spurious_db
* ``constellation.csv``: index, k, l, re, im

Seeds: trial ``t`` draws its bits from ``trial_seed(seed, t, 0)`` and its
noise from ``trial_seed(seed, t, 1 + i)``, where ``i`` is the position of
the SNR point in the configured list, so sweep points are independent.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import resample_poly

from .channel import ChannelTap, add_awgn, apply_dd_channel, apply_impairments, make_rng, trial_seed
from .config import ExperimentConfig
from .core import DDChannelEstimate, TDSignal, idzt
from .exceptions import ConfigError
from .framing import SyncResult
from .iq import IQCapture, read_iq, write_iq
from .metrics import EVM_FLOOR_DB, ber, evm, packet_papr, qpsk_ber_theory
from .modem import ModemConfig, RxResult, bits_per_packet, map_qpsk, packet_layout, receive_packet, tx_packet

__all__ = [
    "TrialOutcome",
    "IsacResult",
    "LoopbackResult",
    "CaptureResult",
    "simulate_packet",
    "run_ber_sweep",
    "run_papr_compare",
    "run_isac_sense",
    "run_loopback",
    "run_demod_capture",
    "write_csv",
    "peak_to_spurious_db",
]

BER_COLUMNS = ("snr_db", "trials", "bits", "bit_errors", "ber", "ber_theory", "evm_db")
PAPR_COLUMNS = ("mode", "region", "oversample", "trials", "papr_db")
MAP_COLUMNS = ("snr_db", "k", "l", "magnitude", "magnitude_db")
ISAC_COLUMNS = ("snr_db", "trials", "bits", "bit_errors", "ber", "evm_db", "peak_k", "peak_l", "peak_to_spurious_db")
CONSTELLATION_COLUMNS = ("index", "k", "l", "re", "im")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    return path


def _write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _trial_bits(cfg: ModemConfig, seed: int, trial: int) -> np.ndarray:
    return make_rng(trial_seed(seed, trial, 0)).integers(0, 2, bits_per_packet(cfg), dtype=np.uint8)


def _reference_cell(cfg: ModemConfig, bits: np.ndarray) -> np.ndarray:
    return map_qpsk(bits).reshape(cfg.grid.shape, order="F")


@dataclass
class TrialOutcome:
    trial: int
    bits: np.ndarray
    rx: RxResult
    noise_var: float
    sync: SyncResult | None = None
    received: TDSignal | None = None

    @property
    def bit_errors(self) -> int:
        return int(np.count_nonzero(self.bits != self.rx.bits))


def simulate_packet(
    cfg: ModemConfig,
    taps: Sequence[ChannelTap],
    snr_db: float,
    *,
    seed: int,
    trial: int,
    stream: int = 1,
    timing_offset: int = 0,
    cfo_hz: float = 0.0,
    phase: float = 0.0,
    use_sync: bool = False,
    threshold: float = 0.6,
    quantize: bool = False,
) -> TrialOutcome:
    """One packet through channel, impairments and noise, then the receiver.

    ``quantize`` rounds the received samples to complex64, which is what a
    capture file stores.
    """
    bits = _trial_bits(cfg, seed, trial)
    td, layout = tx_packet(cfg, bits)
    rx = apply_dd_channel(td, taps) if taps else td
    if timing_offset or cfo_hz or phase:
        rx = apply_impairments(rx, timing_offset, cfo_hz, phase)
    payload = slice(rx.origin_index, rx.origin_index + layout.total_length - layout.payload_start)
    rx, noise_var = add_awgn(rx, snr_db, seed=trial_seed(seed, trial, stream), power_slice=payload)
    if quantize:
        rx = rx.with_samples(rx.samples.astype(np.complex64).astype(np.complex128))
    result, sync = receive_packet(rx, layout, cfg, noise_var, sync=use_sync, threshold=threshold)
    return TrialOutcome(trial, bits, result, noise_var, sync, rx)


def _run_trials(cfg: ExperimentConfig, modem: ModemConfig, snr_db: float, stream: int) -> list[TrialOutcome]:
    taps = cfg.taps()
    ch = cfg.channel

    def one(trial: int) -> TrialOutcome:
        return simulate_packet(
            modem,
            taps,
            snr_db,
            seed=cfg.seed,
            trial=trial,
            stream=stream,
            timing_offset=ch.timing_offset,
            cfo_hz=ch.cfo_hz,
            phase=ch.phase,
            use_sync=cfg.sync.enabled,
            threshold=cfg.sync.threshold,
        )

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            outcomes = list(pool.map(one, range(cfg.trials)))
    else:
        outcomes = [one(t) for t in range(cfg.trials)]
    return sorted(outcomes, key=lambda o: o.trial)


def _noise_stream(snr_index: int) -> int:
    return 1 + snr_index


def _aggregate(modem: ModemConfig, outcomes: list[TrialOutcome]) -> tuple[int, int, float]:
    errors = sum(o.bit_errors for o in outcomes)
    total = sum(o.bits.size for o in outcomes)
    # mean error power over all trials; QPSK reference symbols have unit energy
    err = float(np.mean([np.mean(np.abs(o.rx.equalized.cell - _reference_cell(modem, o.bits)) ** 2) for o in outcomes]))
    evm_db = max(EVM_FLOOR_DB, 10 * math.log10(err)) if err > 0 else EVM_FLOOR_DB
    return errors, total, evm_db


def run_ber_sweep(cfg: ExperimentConfig, out_dir=None) -> list[dict]:
    """Monte-Carlo BER and EVM per SNR point, rows sorted by SNR."""
    modem = cfg.modem_config()
    order = sorted(range(len(cfg.channel.snr_db)), key=lambda i: cfg.channel.snr_db[i])
    rows = []
    for i in order:
        snr = cfg.channel.snr_db[i]
        outcomes = _run_trials(cfg, modem, snr, _noise_stream(i))
        errors, total, evm_db = _aggregate(modem, outcomes)
        rows.append(
            {
                "snr_db": snr,
                "trials": cfg.trials,
                "bits": total,
                "bit_errors": errors,
                "ber": errors / total,
                "ber_theory": float(qpsk_ber_theory(snr)),
                "evm_db": evm_db,
            }
        )
    if out_dir is not None:
        write_csv(Path(out_dir) / "ber_sweep.csv", BER_COLUMNS, rows)
    return rows


def run_papr_compare(cfg: ExperimentConfig, out_dir=None) -> list[dict]:
    """Pilot-only and full-frame PAPR for both pilot modes.

    The pilot region is the pilot alone at full frame power.  The full
    region is the packet payload (plus the header when
    ``papr.include_header``) over ``trials`` random data draws; the median
    is reported.
    """
    sec = cfg.papr
    rows, by_key = [], {}
    for modem in cfg.papr_modems():
        pilot_td = idzt(modem.pilot().scaled(1.0 / math.sqrt(modem.energies[0]))).samples * modem.amplitude
        p = packet_papr(pilot_td, sec.oversample, sec.sinc_half_width).papr_db
        full = []
        for t in range(cfg.trials):
            td, layout = tx_packet(modem, _trial_bits(modem, cfg.seed, t))
            region = td.samples if sec.include_header else td.samples[layout.payload_slice]
            full.append(packet_papr(region, sec.oversample, sec.sinc_half_width).papr_db)
        f = float(np.median(full))
        for region, value, n in (("pilot", p, 1), ("full", f, cfg.trials)):
            rows.append({"mode": modem.pilot_mode, "region": region, "oversample": sec.oversample, "trials": n, "papr_db": value})
            by_key[modem.pilot_mode, region] = value
    for region in ("pilot", "full"):
        rows.append(
            {
                "mode": "improvement",
                "region": region,
                "oversample": sec.oversample,
                "trials": 1 if region == "pilot" else cfg.trials,
                "papr_db": by_key["point", region] - by_key["spread", region],
            }
        )
    if out_dir is not None:
        write_csv(Path(out_dir) / "papr.csv", PAPR_COLUMNS, rows)
    return rows


def _tap_bins(cfg: ExperimentConfig, modem: ModemConfig) -> list[tuple[int, int]]:
    g = modem.grid
    return [(int(round(t.delay * g.B)), int(round(t.doppler * g.T))) for t in cfg.taps()]


def peak_to_spurious_db(est: DDChannelEstimate, bins: Sequence[tuple[int, int]]) -> float:
    """Weakest magnitude at ``bins`` over the strongest elsewhere, in dB."""
    mag = est.magnitude_map()
    ks, ls = est.support.lags()
    mask = np.zeros(mag.shape, dtype=bool)
    for k, l in bins:
        mask |= (ks == k) & (ls == l)
    if not mask.any():
        return -math.inf
    signal = float(mag[mask].min())
    rest = mag[~mask]
    spur = float(rest.max()) if rest.size else 0.0
    if spur == 0.0:
        return math.inf
    if signal == 0.0:
        return -math.inf
    return 20 * math.log10(signal / spur)


def _map_rows(snr, est: DDChannelEstimate) -> list[dict]:
    mag = est.magnitude_map()
    peak = float(mag.max()) or 1.0
    ks, ls = est.support.lags()
    rows = []
    for k, l, m in zip(ks.ravel(), ls.ravel(), mag.ravel()):
        db = 20 * math.log10(m / peak) if m > 0 else -math.inf
        rows.append({"snr_db": snr, "k": int(k), "l": int(l), "magnitude": float(m), "magnitude_db": db})
    return rows


def _write_gnuplot(path, rows: list[dict]) -> None:
    # splot layout: one block per delay lag, blank line between blocks
    lines, last = [], None
    for r in rows:
        if last is not None and r["k"] != last:
            lines.append("")
        lines.append(f"{r['k']} {r['l']} {_fmt(r['magnitude'])}")
        last = r["k"]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class IsacResult:
    summary: list[dict]
    maps: dict = field(default_factory=dict)


def run_isac_sense(cfg: ExperimentConfig, out_dir=None) -> IsacResult:
    """Spread-pilot sensing map (trial 0) and data BER after pilot cancellation."""
    modem = cfg.modem_config()
    if modem.pilot_mode != "spread":
        raise ConfigError("isac-sense needs the spread pilot", field="modem.pilot_mode")
    bins = _tap_bins(cfg, modem)
    order = sorted(range(len(cfg.channel.snr_db)), key=lambda i: cfg.channel.snr_db[i])
    summary, maps, map_rows = [], {}, []
    for i in order:
        snr = cfg.channel.snr_db[i]
        outcomes = _run_trials(cfg, modem, snr, _noise_stream(i))
        errors, total, evm_db = _aggregate(modem, outcomes)
        est = outcomes[0].rx.estimate
        k, l, _ = est.peak()
        maps[snr] = est
        map_rows.extend(_map_rows(snr, est))
        summary.append(
            {
                "snr_db": snr,
                "trials": cfg.trials,
                "bits": total,
                "bit_errors": errors,
                "ber": errors / total,
                "evm_db": evm_db,
                "peak_k": k,
                "peak_l": l,
                "peak_to_spurious_db": peak_to_spurious_db(est, bins),
            }
        )
    if out_dir is not None:
        out = Path(out_dir)
        write_csv(out / "isac_summary.csv", ISAC_COLUMNS, summary)
        write_csv(out / "sensing_map.csv", MAP_COLUMNS, map_rows)
        _write_gnuplot(out / "sensing_map.dat", [r for r in map_rows if r["snr_db"] == summary[0]["snr_db"]])
    return IsacResult(summary, maps)


@dataclass
class LoopbackResult:
    bits: np.ndarray
    rx: RxResult
    sync: SyncResult | None
    noise_var: float
    capture: IQCapture
    summary: dict


def _summary(modem: ModemConfig, rx: RxResult, sync: SyncResult | None, reference: np.ndarray | None) -> dict:
    decided = map_qpsk(rx.bits).reshape(modem.grid.shape, order="F")
    blind = evm(rx.equalized, decided)
    out = {
        "frame_start": None if sync is None else sync.frame_start,
        "cfo_hz": None if sync is None else sync.cfo_hz,
        "detection_metric": None if sync is None else sync.detection_metric,
        "evm_db": blind,
        "snr_est_db": -blind,
        "ber": None,
        "bit_errors": None,
        "bits": None,
    }
    if reference is not None:
        rep = ber(reference, rx.bits)
        out.update(ber=rep.ber, bit_errors=rep.bit_errors, bits=rep.bits_total)
    return out


def _write_rx_outputs(out: Path, modem: ModemConfig, rx: RxResult) -> None:
    rows = []
    cell = rx.equalized.cell
    for idx in range(modem.grid.MN):
        k, l = idx % modem.grid.M, idx // modem.grid.M
        rows.append({"index": idx, "k": k, "l": l, "re": float(cell[k, l].real), "im": float(cell[k, l].imag)})
    write_csv(out / "constellation.csv", CONSTELLATION_COLUMNS, rows)
    write_csv(out / "sensing_map.csv", MAP_COLUMNS, _map_rows("", rx.estimate))


def run_loopback(cfg: ExperimentConfig, out_dir=None) -> LoopbackResult:
    """One packet (trial 0) at the first configured SNR through the full chain.

    The received buffer is rounded to complex64 before demodulation so that
    the capture written to ``out_dir`` demodulates to the same result.
    """
    modem = cfg.modem_config()
    ch = cfg.channel
    o = simulate_packet(
        modem,
        cfg.taps(),
        ch.snr_db[0],
        seed=cfg.seed,
        trial=0,
        stream=_noise_stream(0),
        timing_offset=ch.timing_offset,
        cfo_hz=ch.cfo_hz,
        phase=ch.phase,
        use_sync=cfg.sync.enabled,
        threshold=cfg.sync.threshold,
        quantize=True,
    )
    notes = {"noise_var": o.noise_var, "seed": cfg.seed, "M": modem.grid.M, "N": modem.grid.N, "pilot_mode": modem.pilot_mode}
    capture = IQCapture(o.received.samples, modem.grid.B, "simulated loopback packet", notes)
    summary = _summary(modem, o.rx, o.sync, o.bits)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_iq(out / "capture.iq", capture)
        _write_json(out / "loopback.json", summary)
        _write_rx_outputs(out, modem, o.rx)
    return LoopbackResult(o.bits, o.rx, o.sync, o.noise_var, capture, summary)


@dataclass
class CaptureResult:
    rx: RxResult
    sync: SyncResult
    summary: dict


def _reference_bits(cfg: ExperimentConfig, modem: ModemConfig) -> np.ndarray | None:
    cap = cfg.capture
    if cap.reference_seed is not None:
        return _trial_bits(modem, cap.reference_seed, 0)
    if cap.reference_bits is not None:
        path = Path(cap.reference_bits)
        try:
            if path.suffix == ".npy":
                bits = np.load(path)
            else:
                bits = np.array([int(c) for c in path.read_text() if c in "01"], dtype=np.uint8)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read reference bits: {exc}", field="capture.reference_bits") from None
        if bits.size != bits_per_packet(modem):
            raise ConfigError(f"expected {bits_per_packet(modem)} bits, got {bits.size}", field="capture.reference_bits")
        return bits
    return None


def run_demod_capture(cfg: ExperimentConfig, path=None, out_dir=None) -> CaptureResult:
    """Detect, CFO-correct and demodulate the first packet in a recorded capture.

    ``noise_var`` comes from the config or, failing that, the capture
    sidecar.  SNR is reported from the blind EVM (decision-directed), since
    absolute SNR of a recording is not calibrated.
    """
    modem = cfg.modem_config()
    cap = cfg.capture
    path = path if path is not None else cap.path
    if path is None:
        raise ConfigError("no capture file given", field="capture.path")
    capture = read_iq(path)
    samples = capture.samples.astype(np.complex128)
    rate = capture.sample_rate
    if (cap.resample_up, cap.resample_down) != (1, 1):
        samples = resample_poly(samples, cap.resample_up, cap.resample_down)
        rate = rate * cap.resample_up / cap.resample_down
    if not math.isclose(rate, modem.grid.B, rel_tol=1e-9):
        raise ConfigError(
            f"capture rate {rate} Hz after resampling {cap.resample_up}/{cap.resample_down} is not B = {modem.grid.B} Hz",
            field="capture.resample_up",
        )
    noise_var = cap.noise_var if cap.noise_var is not None else capture.notes.get("noise_var")
    if noise_var is None:
        raise ConfigError("noise variance not in config or capture metadata", field="capture.noise_var")
    td = TDSignal(samples, modem.grid.B)
    rx, sync = receive_packet(td, packet_layout(modem), modem, float(noise_var), sync=True, threshold=cfg.sync.threshold)
    summary = _summary(modem, rx, sync, _reference_bits(cfg, modem))
    if out_dir is not None:
        out = Path(out_dir)
        _write_json(out / "demod.json", summary)
        _write_rx_outputs(out, modem, rx)
    return CaptureResult(rx, sync, summary)
