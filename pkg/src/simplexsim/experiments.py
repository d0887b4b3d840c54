"""Experiment runners: a resolved config in, deterministic result tables out.

Every Monte-Carlo point gets its own integer seed derived from the master
seed before any work is dispatched, so the output is identical whether the
points run inline or on a process pool, and a manifest that records the
resolved config reproduces the tables byte for byte.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import count_ber, monte_carlo, required_osnr, theory_ber
from .channel import noise_load, osnr_from_ebn0, propagate_link
from .config import ExperimentConfig
from .dsp import receive
from .errors import DspDiagnosticError
from .formats import build_format, format_metrics, osnr_gap_db
from .tx import transmit

CSV_SCHEMA = "simplexsim-results/v1"

COLUMNS = {
    "theory": ["ebn0_db", "osnr_db", "format", "ber"],
    "b2b": ["osnr_db", "format", "ber", "ci_low", "ci_high", "errors", "bits"],
    "power-sweep": [
        "launch_power_dbm",
        "osnr_db",
        "format",
        "ber",
        "ci_low",
        "ci_high",
        "errors",
        "bits",
    ],
    "span-loss-sweep": [
        "voa_db",
        "osnr_db",
        "format",
        "ber",
        "ci_low",
        "ci_high",
        "errors",
        "bits",
    ],
    "constellation": ["osnr_db", "format", "ber", "ci_low", "ci_high", "errors", "bits"],
    "metrics": [
        "format",
        "bits_per_symbol",
        "d_min",
        "p_avg",
        "energy_per_dmin_sq",
        "asymptotic_gain_db",
    ],
}


@dataclass
class RunResult:
    """One experiment's tables plus the manifest that replays them."""

    columns: list[str]
    rows: list[list]
    manifest: dict
    # extra tables keyed by output stem, e.g. constellation stage dumps
    extras: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)


def _point_seeds(master_seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(master_seed).generate_state(n, np.uint64)]


def _even_tributary_weight(bits: np.ndarray, bps: int) -> None:
    """Flip at most one bit per tributary so each column weight is even.

    Differential decoding is applied cyclically per block; the wrap-around
    pair decodes consistently only when the tributary's differential bits
    sum to zero mod 2. Balancing the payload keeps noiseless blocks exactly
    error free instead of leaking up to one wrap error per tributary.
    """
    cols = bits.reshape(-1, bps)
    odd = cols.sum(axis=0) % 2 == 1
    cols[-1, odd] ^= 1


def _mc_point(
    cfg_data: dict,
    fmt: str,
    osnr_db: float,
    launch_dbm: float | None,
    voa_db: float | None,
    seed: int,
    label: str,
) -> dict:
    """One Monte-Carlo axis point through the full tx/link/rx pipeline."""
    cfg = ExperimentConfig.model_validate(cfg_data)
    fd = build_format(fmt)
    tx_cfg = cfg.tx.to_tx_config(launch_power_dbm=launch_dbm)
    link = cfg.link.to_link_spec(voa_db=voa_db)
    rx_cfg = cfg.rx.to_rx_config(cfg.tx, link.fiber)
    n_bits = cfg.n_symbols * fd.bits_per_symbol

    def trial(ss: np.random.SeedSequence) -> tuple[int, int]:
        rng = np.random.default_rng(ss)
        bits = rng.integers(0, 2, n_bits, dtype=np.uint8)
        if fd.differential:
            _even_tributary_weight(bits, fd.bits_per_symbol)
        wf = transmit(bits, fd, tx_cfg, rng)
        wf = propagate_link(wf, link)
        wf, _ = noise_load(wf, osnr_db, rng)
        rx_bits, _ = receive(wf, fd, rx_cfg, rng)
        c = count_ber(bits, rx_bits, fd)
        return c.errors, c.bits

    t0 = time.perf_counter()
    try:
        mc = monte_carlo(
            trial, master_seed=seed, min_errors=cfg.min_errors, max_bits=cfg.max_bits
        )
    except DspDiagnosticError as exc:
        raise DspDiagnosticError(f"{fmt} at {label}: {exc}") from exc
    return {
        "format": fmt,
        "ber": mc.ber,
        "ci_low": mc.ci_low,
        "ci_high": mc.ci_high,
        "errors": mc.errors,
        "bits": mc.bits,
        "trials": mc.trials,
        "zero_errors": mc.zero_errors,
        "seconds": time.perf_counter() - t0,
    }


def _dispatch(calls: list[tuple], jobs: int) -> list[dict]:
    """Run the point workers, inline or on a process pool, in list order."""
    if jobs <= 1 or len(calls) <= 1:
        return [_mc_point(*args) for args in calls]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_mc_point, *args) for args in calls]
        return [f.result() for f in futures]


def _base_manifest(cfg: ExperimentConfig) -> dict:
    return {
        "manifest_version": 1,
        "tool": {"name": "simplexsim", "version": __version__},
        "csv_schema": CSV_SCHEMA,
        "experiment": cfg.experiment,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config": cfg.model_dump(mode="json"),
        "master_seed": cfg.master_seed,
        "points": [],
        "wall_clock_s": 0.0,
    }


def run_theory(cfg: ExperimentConfig) -> RunResult:
    """Closed-form BER curves on the configured Eb/N0 grid.

    Each row carries both axes: the Eb/N0 the curve is defined on and the
    equivalent OSNR for this symbol rate, so the same table serves both
    plots.
    """
    cfg = cfg.resolve()
    t0 = time.perf_counter()
    grid = cfg.sweep.values()
    rows: list[list] = []
    for fmt in cfg.formats:
        fd = build_format(fmt)
        bit_rate = fd.bits_per_symbol * cfg.tx.symbol_rate
        for e in grid:
            rows.append(
                [
                    e,
                    round(osnr_from_ebn0(e, bit_rate), 10),
                    fmt,
                    float(theory_ber(fmt, e)),
                ]
            )
    manifest = _base_manifest(cfg)
    manifest["wall_clock_s"] = time.perf_counter() - t0
    return RunResult(columns=list(COLUMNS["theory"]), rows=rows, manifest=manifest)


def run_metrics(cfg: ExperimentConfig) -> RunResult:
    """Geometry table: distances, powers, and the asymptotic gain over
    DP-BPSK implied by the energy-normalized minimum distance."""
    cfg = cfg.resolve()
    t0 = time.perf_counter()
    ref = build_format("DP-BPSK")
    rows: list[list] = []
    for fmt in cfg.formats:
        fd = build_format(fmt)
        m = format_metrics(fd)
        rows.append(
            [
                fmt,
                fd.bits_per_symbol,
                m.d_min,
                m.p_avg,
                m.energy_per_dmin_sq,
                # positive when this format tolerates less OSNR than DP-BPSK
                osnr_gap_db(ref, fd),
            ]
        )
    manifest = _base_manifest(cfg)
    manifest["wall_clock_s"] = time.perf_counter() - t0
    return RunResult(columns=list(COLUMNS["metrics"]), rows=rows, manifest=manifest)


def _run_mc_sweep(cfg: ExperimentConfig) -> RunResult:
    """Shared driver for the b2b, power, and span-loss sweeps."""
    cfg = cfg.resolve()
    t0 = time.perf_counter()
    axis = cfg.sweep.values()
    kind = cfg.experiment
    link = cfg.link.to_link_spec()

    calls: list[tuple] = []
    meta: list[dict] = []
    cfg_data = cfg.model_dump(mode="json")
    seeds = _point_seeds(cfg.master_seed, len(cfg.formats) * len(axis))
    k = 0
    for fmt in cfg.formats:
        for v in axis:
            if kind == "b2b":
                osnr, launch, voa, axis_cols = v, None, None, {"osnr_db": v}
            elif kind == "power-sweep":
                osnr = cfg.link.to_link_spec().span_osnr_db(v)
                launch, voa = v, None
                axis_cols = {"launch_power_dbm": v, "osnr_db": osnr}
            else:  # span-loss-sweep
                launch = cfg.format_launch_dbm[fmt]
                osnr = cfg.link.to_link_spec(voa_db=v).span_osnr_db(launch)
                voa = v
                axis_cols = {"voa_db": v, "osnr_db": osnr}
            label = ", ".join(f"{k2}={v2}" for k2, v2 in axis_cols.items())
            calls.append((cfg_data, fmt, osnr, launch, voa, seeds[k], label))
            meta.append({"format": fmt, **axis_cols, "seed": seeds[k]})
            k += 1

    results = _dispatch(calls, cfg.jobs)

    columns = list(COLUMNS[kind])
    rows: list[list] = []
    points: list[dict] = []
    for m, r in zip(meta, results):
        row = {**m, **r}
        rows.append([row[c] for c in columns])
        points.append(
            {
                key: row[key]
                for key in (*m.keys(), "errors", "bits", "trials", "zero_errors", "seconds")
            }
        )

    manifest = _base_manifest(cfg)
    manifest["points"] = points
    manifest["wall_clock_s"] = time.perf_counter() - t0
    if kind == "b2b":
        manifest["required_osnr_db"] = _required_osnr_summary(cfg, columns, rows)
    return RunResult(columns=columns, rows=rows, manifest=manifest)


def _required_osnr_summary(
    cfg: ExperimentConfig, columns: list[str], rows: list[list]
) -> dict:
    """Per-format required OSNR at the target BER, where the sweep brackets
    it; formats whose curve misses the target report null."""
    i_osnr = columns.index("osnr_db")
    i_fmt = columns.index("format")
    i_ber = columns.index("ber")
    out: dict[str, float | None] = {}
    for fmt in cfg.formats:
        pts = [(r[i_osnr], r[i_ber]) for r in rows if r[i_fmt] == fmt]
        try:
            out[fmt] = required_osnr(
                np.array([p[0] for p in pts]),
                np.array([p[1] for p in pts]),
                cfg.target_ber,
            )
        except ValueError:
            out[fmt] = None
    return out


def run_b2b(cfg: ExperimentConfig) -> RunResult:
    """Back-to-back OSNR sweep through the full blind receiver."""
    return _run_mc_sweep(cfg)


def run_power_sweep(cfg: ExperimentConfig) -> RunResult:
    """Launch-power sweep over the split-span link with receiver-side noise
    loading at the span-model OSNR."""
    return _run_mc_sweep(cfg)


def run_span_loss_sweep(cfg: ExperimentConfig) -> RunResult:
    """VOA sweep at fixed per-format launch power; the OSNR axis follows
    the configured anchor map exactly."""
    return _run_mc_sweep(cfg)


def _constellation_point(cfg_data: dict, fmt: str, seed: int) -> tuple[dict, dict]:
    """One block at the configured OSNR, keeping the per-stage symbols."""
    cfg = ExperimentConfig.model_validate(cfg_data)
    fd = build_format(fmt)
    tx_cfg = cfg.tx.to_tx_config()
    link = cfg.link.to_link_spec()
    rx_cfg = cfg.rx.to_rx_config(cfg.tx, link.fiber)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    bits = rng.integers(0, 2, cfg.n_symbols * fd.bits_per_symbol, dtype=np.uint8)
    if fd.differential:
        _even_tributary_weight(bits, fd.bits_per_symbol)
    wf = transmit(bits, fd, tx_cfg, rng)
    wf = propagate_link(wf, link)
    wf, _ = noise_load(wf, cfg.osnr_db, rng)
    rx_bits, report = receive(wf, fd, rx_cfg, rng)
    c = count_ber(bits, rx_bits, fd)
    stats = {
        "format": fmt,
        "osnr_db": cfg.osnr_db,
        "ber": c.ber,
        "ci_low": c.ci_low,
        "ci_high": c.ci_high,
        "errors": c.errors,
        "bits": c.bits,
        "seed": seed,
    }
    return stats, report.snapshots


def run_constellation(cfg: ExperimentConfig) -> RunResult:
    """Single-point run that dumps the post-DSP symbols per stage."""
    cfg = cfg.resolve()
    t0 = time.perf_counter()
    seeds = _point_seeds(cfg.master_seed, len(cfg.formats))
    cfg_data = cfg.model_dump(mode="json")
    columns = list(COLUMNS["constellation"])
    rows: list[list] = []
    points: list[dict] = []
    extras: dict[str, tuple[list[str], list[list]]] = {}
    for fmt, seed in zip(cfg.formats, seeds):
        t_point = time.perf_counter()
        stats, snapshots = _constellation_point(cfg_data, fmt, seed)
        stats["seconds"] = time.perf_counter() - t_point
        rows.append([stats[c] for c in columns])
        points.append(stats)
        for stage, (sx, sy) in snapshots.items():
            stem = (
                f"constellation_{stage}"
                if len(cfg.formats) == 1
                else f"constellation_{fmt.lower().replace(' ', '_')}_{stage}"
            )
            table: list[list] = []
            for pol, s in (("x", sx), ("y", sy)):
                for i, z in enumerate(s):
                    table.append([i, pol, float(z.real), float(z.imag)])
            extras[stem] = (["index", "pol", "re", "im"], table)
    manifest = _base_manifest(cfg)
    manifest["points"] = points
    manifest["wall_clock_s"] = time.perf_counter() - t0
    return RunResult(columns=columns, rows=rows, manifest=manifest, extras=extras)


_RUNNERS = {
    "theory": run_theory,
    "b2b": run_b2b,
    "power-sweep": run_power_sweep,
    "span-loss-sweep": run_span_loss_sweep,
    "constellation": run_constellation,
    "metrics": run_metrics,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Dispatch a validated config to its runner."""
    return _RUNNERS[cfg.experiment](cfg)
