"""Command-line experiment runner.

Subcommands: rabi, ramsey, echo, entangle, analyze, tomo. Every run writes its
data files plus a ``<command>_report.json`` into ``--out``.

Exit codes: 0 success, 2 configuration error, 3 input-format error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import analyzer, dynamics, source, tomography
from .config import ConfigError, ExperimentConfig, load_config
from .fileio import complex_matrix_to_json, csv_text, atomic_write_text, write_json
from .qcore import InvalidStateError, bell_state
from .timetags import TimeTagFormatError, TimeTagStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

ILLUSTRATIVE = (
    "dynamics.biexciton_lifetime_ps",
    "dynamics.exciton_lifetime_ps",
)


class InputFormatError(ValueError):
    pass


def _versions() -> dict:
    try:
        own = metadata.version("qdtimebin")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"qdtimebin": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _write_report(out: Path, command: str, cfg: ExperimentConfig, outputs, started: float,
                  results: dict | None = None) -> Path:
    outputs = [Path(p) for p in outputs]
    for p in outputs:
        if not p.exists() or p.stat().st_size == 0:
            raise RuntimeError(f"output {p} missing or empty")
    payload = {
        "command": command,
        "seed": cfg.run.seed,
        "config": cfg.to_dict(),
        "config_text": cfg.to_text(),
        "outputs": [str(p) for p in outputs],
        "wall_time_s": round(time.perf_counter() - started, 3),
        "versions": _versions(),
        "illustrative_parameters": list(ILLUSTRATIVE),
        "results": results or {},
    }
    return write_json(out / f"{command}_report.json", payload)


def _dt(cfg: ExperimentConfig) -> float | None:
    return cfg.dynamics.dt_ps or None


# --- dynamics ----------------------------------------------------------------------------


def rabi_table(cfg: ExperimentConfig) -> np.ndarray:
    d = cfg.dynamics
    areas = np.linspace(0.0, d.rabi_max_area_pi * math.pi, d.rabi_points)
    return dynamics.rabi_scan(cfg.level_system(), cfg.timing.pulse_sigma_ps, areas,
                              cfg.dephasing(), dt=_dt(cfg))


def _envelope(table: np.ndarray) -> float:
    return dynamics.oscillation_envelope(table[:, 0], table[:, 1], 5 * math.pi)


def run_rabi(cfg: ExperimentConfig, out: Path, compare: ExperimentConfig | None = None) -> list[Path]:
    """Rabi scan (area, P_b, P_x); with ``compare`` also the damping comparison."""
    header = ["area_rad", "P_b", "P_x"]
    table = rabi_table(cfg)
    paths = [atomic_write_text(out / "rabi.csv", csv_text(header, table.T))]
    if compare is not None:
        other = rabi_table(compare)
        paths.append(atomic_write_text(out / "rabi_compare.csv", csv_text(header, other.T)))
        env = np.array([_envelope(table), _envelope(other)])
        sig = np.array([cfg.timing.pulse_sigma_ps, compare.timing.pulse_sigma_ps])
        flag = (env == env.min()).astype(float)
        paths.append(atomic_write_text(out / "envelope_comparison.csv",
                                       csv_text(["sigma_ps", "envelope_at_5pi", "more_damped"],
                                                [sig, env, flag])))
    return paths


def _delays(cfg: ExperimentConfig, echo: bool) -> np.ndarray:
    d = cfg.dynamics
    if echo:
        # echo pulses sit half the total delay apart
        return np.linspace(2 * d.ramsey_delay_min_ps, max(d.ramsey_delay_max_ps, 2 * d.ramsey_delay_min_ps),
                           d.echo_points)
    return np.linspace(d.ramsey_delay_min_ps, d.ramsey_delay_max_ps, d.ramsey_points)


def _scan_system(cfg: ExperimentConfig) -> dynamics.LevelSystem:
    # fringes probe the g-b coherence alone; radiative decay stays off as in the Rabi scan
    return cfg.level_system().without_decay()


def ramsey_result(cfg: ExperimentConfig, delays=None) -> dynamics.FringeResult:
    d = cfg.dynamics
    half = dynamics.Pulse(area=math.pi / 2, duration=cfg.timing.pulse_sigma_ps)
    delays = _delays(cfg, echo=False) if delays is None else delays
    return dynamics.ramsey(_scan_system(cfg), (half, half), delays, cfg.dephasing(),
                           n_phase=d.n_phase, detuning_std=d.detuning_std,
                           n_samples=d.n_samples, seed=cfg.run.seed, dt=_dt(cfg))


def echo_result(cfg: ExperimentConfig, delays=None) -> dynamics.FringeResult:
    d = cfg.dynamics
    delays = _delays(cfg, echo=True) if delays is None else delays
    template = dynamics.echo_template(dynamics.Pulse(area=math.pi / 2, duration=cfg.timing.pulse_sigma_ps),
                                      float(delays[0]))
    return dynamics.echo(_scan_system(cfg), template, delays, cfg.dephasing(),
                         detuning_std=d.detuning_std, n_samples=max(d.n_samples, 100),
                         seed=cfg.run.seed, n_phase=d.n_phase, dt=_dt(cfg))


def _fringe_csv(path: Path, res: dynamics.FringeResult) -> Path:
    return atomic_write_text(path, csv_text(["delay_ps", "P_b", "visibility"],
                                            [res.delays, res.p_b, res.visibility]))


def run_ramsey(cfg: ExperimentConfig, out: Path) -> list[Path]:
    return [_fringe_csv(out / "ramsey.csv", ramsey_result(cfg))]


def run_echo(cfg: ExperimentConfig, out: Path) -> list[Path]:
    return [_fringe_csv(out / "echo.csv", echo_result(cfg))]


# --- entangle / analyze ------------------------------------------------------------------


def simulate_tags(cfg: ExperimentConfig, threads: int = 1, phase1: float | None = None):
    """Time tags for ``run.n_pulses`` pulses, generated in pulse-range shards.

    Shards are keyed by absolute pulse index, so the output does not depend on
    the shard size or the thread count.
    """
    src = cfg.source_config()
    cfg1 = cfg.analyzer_config(1)
    if phase1 is not None:
        cfg1 = replace(cfg1, phase=float(phase1))
    cfg2 = cfg.analyzer_config(2)
    timing = cfg.timing_config()
    n, step = cfg.run.n_pulses, cfg.run.shard_pulses
    seed = cfg.run.seed

    def shard(start: int):
        stop = min(start + step, n)
        ev = source.sample_emissions(src, stop - start, seed, start=start)
        return ev, analyzer.sample_timetags(ev, cfg1, cfg2, timing, seed, src)

    starts = range(0, n, step)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(shard, starts))
    else:
        parts = [shard(s) for s in starts]
    if not parts:
        empty = TimeTagStream.empty()
        return empty, empty, empty, {"n_events": 0, "n_double": 0}
    # shards cover disjoint, increasing time ranges
    s1, s2, sync = (_concat([p[1][k] for p in parts]) for k in range(3))
    stats = {"n_events": int(sum(len(p[0]) for p in parts)),
             "n_double": int(sum(p[0].n_double for p in parts))}
    return s1, s2, sync, stats


def _concat(streams) -> TimeTagStream:
    return TimeTagStream(np.concatenate([s.timestamps for s in streams]),
                         np.concatenate([s.channels for s in streams]))


def run_entangle(cfg: ExperimentConfig, out: Path, threads: int = 1) -> tuple[list[Path], dict]:
    s1, s2, sync, stats = simulate_tags(cfg, threads)
    paths = [s1.write_ttb1(out / "ch1.ttb1"), s2.write_ttb1(out / "ch2.ttb1"),
             sync.write_ttb1(out / "sync.ttb1")]
    stats.update({"n_pulses": cfg.run.n_pulses, "tags_side1": len(s1), "tags_side2": len(s2)})
    return paths, stats


def _read_tags(path: Path) -> TimeTagStream:
    try:
        return TimeTagStream.read_ttb1(path)
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from None
    except TimeTagFormatError as exc:
        raise TimeTagFormatError(f"{path}: {exc}") from None


def run_analyze(cfg: ExperimentConfig, out: Path, inputs: tuple[Path, Path, Path],
                phase_scan: int = 0, threads: int = 1) -> tuple[list[Path], dict]:
    s1, s2 = _read_tags(inputs[0]), _read_tags(inputs[1])
    sync = _read_tags(inputs[2])
    delay, window = cfg.timing.delay_ps, cfg.timing.window_ps
    try:
        hist = analyzer.coincidences(s1, s2, sync, delay, window)
    except analyzer.UnsortedStreamError as exc:
        raise InputFormatError(str(exc)) from None
    paths = [write_json(out / "histogram.json", hist.to_json())]
    total = len(s1) + len(s2)
    results = {"coincidences": int(hist.counts.sum()), "unassigned": hist.unassigned,
               "unassigned_fraction": hist.unassigned / total if total else 0.0,
               "multi_periods": hist.multi_periods}
    if phase_scan:
        paths.append(run_phase_scan(cfg, out, phase_scan, threads))
    return paths, results


def run_phase_scan(cfg: ExperimentConfig, out: Path, n_points: int, threads: int = 1) -> Path:
    """Middle-middle coincidences versus the side-1 phase, one simulated run per point.

    Every point reuses the configured seed (common random numbers).
    """
    phases = 2 * math.pi * np.arange(n_points) / n_points
    mid = analyzer.MIDDLE
    cols = {k: [] for k in ("n_pairs", "AA", "AB", "BA", "BB")}
    for phi in phases:
        s1, s2, sync, stats = simulate_tags(cfg, threads, phase1=phi)
        hist = analyzer.coincidences(s1, s2, sync, cfg.timing.delay_ps, cfg.timing.window_ps)
        cols["n_pairs"].append(stats["n_events"])
        for name, (i, j) in zip(("AA", "AB", "BA", "BB"),
                                ((mid[0], mid[0]), (mid[0], mid[1]), (mid[1], mid[0]), (mid[1], mid[1]))):
            cols[name].append(hist.counts[i, j])
    header = ["phi1_rad", "n_pairs", "coinc_Amid_Amid", "coinc_Amid_Bmid", "coinc_Bmid_Amid", "coinc_Bmid_Bmid"]
    data = [phases] + [np.asarray(cols[k], dtype=float) for k in ("n_pairs", "AA", "AB", "BA", "BB")]
    return atomic_write_text(out / "fringe.csv", csv_text(header, data))


# --- tomography ----------------------------------------------------------------------------


def read_count_records(path) -> list[tomography.CountRecord]:
    try:
        obj = json.loads(Path(path).read_text())
        return [tomography.CountRecord.from_json(r) for r in obj["records"]]
    except OSError as exc:
        raise InputFormatError(f"cannot read {path}: {exc}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"{path}: malformed count file ({exc})") from None


def write_count_records(path, records) -> Path:
    return write_json(path, {"records": [r.to_json() for r in records]})


def run_tomo(cfg: ExperimentConfig, out: Path, counts_file=None, threads: int = 1) -> tuple[list[Path], dict]:
    paths = []
    counts_file = counts_file or cfg.tomography.counts_file or None
    if counts_file:
        records = read_count_records(counts_file)
    else:
        truth = source.realistic_state(cfg.source_config())
        records = tomography.simulate_counts(truth, tomography.default_settings(),
                                             cfg.tomography.n_per_setting, cfg.run.seed)
        paths.append(write_count_records(out / "counts.json", records))
    res = tomography.reconstruct_mle(records)
    rho = res.rho_hat
    targets = {"phi+": bell_state("phi+"), "phi-": bell_state("phi-")}
    fids = {k: tomography.fidelity(rho, v) for k, v in targets.items()}
    best = max(fids, key=fids.get)
    report = tomography.entanglement_report(rho, targets[best])
    report.extra_fidelities = fids
    if cfg.tomography.bootstrap:
        boot = tomography.bootstrap(records, rho, targets[best], cfg.tomography.bootstrap,
                                    seed=cfg.run.seed, threads=threads)
        report.fidelity_interval = boot["fidelity_interval"]
        report.concurrence_interval = boot["concurrence_interval"]
        report.fidelity_std = boot["fidelity_std"]
        report.concurrence_std = boot["concurrence_std"]
    paths.append(write_json(out / "rho.json", {
        "basis": ["EE", "EL", "LE", "LL"],
        "rho": complex_matrix_to_json(rho),
        "log_likelihood": res.log_likelihood,
        "iterations": res.iterations,
        "converged": res.converged,
    }))
    rep = report.to_json()
    rep.update({"target": best, "iterations": res.iterations,
                "populations": np.real(np.diag(rho)).tolist()})
    paths.append(write_json(out / "entanglement.json", rep))
    return paths, rep


# --- entry point ---------------------------------------------------------------------------


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the subcommand copy suppresses defaults so flags given before the subcommand survive
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=d(None), help="experiment config file")
    common.add_argument("--seed", type=int, default=d(None), help="overrides run.seed")
    common.add_argument("--out", type=Path, default=d(Path("out")), help="output directory")
    common.add_argument("--threads", type=int, default=d(1), help="worker threads")
    return common


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdtimebin", description=__doc__.split("\n")[0],
                                parents=[_global_flags(False)])
    common = _global_flags(True)
    sub = p.add_subparsers(dest="command", required=True)
    rabi = sub.add_parser("rabi", parents=[common], help="Rabi oscillation scan")
    rabi.add_argument("--compare", type=Path, help="second config whose damping is compared")
    sub.add_parser("ramsey", parents=[common], help="Ramsey visibility versus delay")
    sub.add_parser("echo", parents=[common], help="spin-echo visibility versus delay")
    sub.add_parser("entangle", parents=[common], help="simulate time-tag files")
    an = sub.add_parser("analyze", parents=[common], help="coincidence histogram from tag files")
    an.add_argument("--input", type=Path, help="directory holding ch1/ch2/sync.ttb1 (default: --out)")
    an.add_argument("--ch1", type=Path)
    an.add_argument("--ch2", type=Path)
    an.add_argument("--sync", type=Path)
    an.add_argument("--phase-scan", type=int, default=None, help="number of side-1 phases to scan")
    tomo = sub.add_parser("tomo", parents=[common], help="state reconstruction and entanglement report")
    tomo.add_argument("--counts", type=Path, help="CountRecord JSON file (default: simulate)")
    return p


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return cfg


def _dispatch(args) -> None:
    started = time.perf_counter()
    cfg = _load(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    cmd = args.command
    if cmd == "rabi":
        compare = load_config(args.compare).with_seed(cfg.run.seed) if args.compare else None
        paths = run_rabi(cfg, out, compare)
    elif cmd == "ramsey":
        paths = run_ramsey(cfg, out)
    elif cmd == "echo":
        paths = run_echo(cfg, out)
    elif cmd == "entangle":
        paths, results = run_entangle(cfg, out, args.threads)
    elif cmd == "analyze":
        base = args.input or out
        inputs = (args.ch1 or base / "ch1.ttb1", args.ch2 or base / "ch2.ttb1", args.sync or base / "sync.ttb1")
        scan = cfg.analyze.phase_scan_points if args.phase_scan is None else args.phase_scan
        if scan < 0:
            raise ConfigError("--phase-scan must be non-negative")
        paths, results = run_analyze(cfg, out, inputs, scan, args.threads)
    else:
        paths, results = run_tomo(cfg, out, args.counts, args.threads)
    report = _write_report(out, cmd, cfg, paths, started, results)
    print(report)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TimeTagFormatError, InputFormatError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidStateError, tomography.IncompleteSettingsError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining ValueErrors come from parameter checks in the library
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
