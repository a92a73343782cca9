"""Command-line entry point: ``raysep {synth,estimate,peaks,compare}``.

Failures print one JSON object ``{"error": <category>, "message": ...}`` on
stderr and exit with the category's code (see ``raysep.errors``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ConfigError, RaysepError, StorageError
from .io import (ScenarioConfig, cube_for, export_grid, load_config, load_cube, load_grid,
                 save_cube, save_grid)
from .pipeline import METHODS, estimate
from .spectrum import MatchReport, PeakSearch, extract_peaks, match_to_truth
from .synth import SpectralCube, synthesize

log = logging.getLogger("raysep")


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _threads(args) -> int:
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    return 1 if args.deterministic else args.threads


def _synth(cfg: ScenarioConfig) -> SpectralCube:
    if not cfg.paths:
        raise ConfigError("config has no [[paths]] to synthesize")
    return synthesize(cfg.geometry, cfg.paths, cfg.noise)


def _peak_dict(p) -> dict:
    return {"rank": p.rank, "theta_e_deg": p.theta_e, "theta_r_deg": p.theta_r,
            "t_s": p.arrival_time, "value": p.value, "index": list(p.index)}


def _match_dict(report: MatchReport) -> dict:
    rows = []
    for i, m in enumerate(report.matches):
        t = m.truth
        rows.append({"path": i + 1, "theta_e_deg": t.emission_angle,
                     "theta_r_deg": t.reception_angle, "t_s": t.arrival_time,
                     "hit": m.hit, "cell_distance": m.distance,
                     "peak_rank": m.peak.rank if m.peak is not None else None})
    return {"tolerance_cells": report.tolerance, "hits": report.hits,
            "truths": len(report.matches), "matches": rows}


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc.strerror}") from None


def cmd_synth(args) -> int:
    cfg = _config(args)
    cube = _synth(cfg)
    save_cube(args.out, cube)
    log.info("wrote %s (%d x %d x %d)", args.out, *cube.geom.shape)
    return 0


def cmd_estimate(args) -> int:
    cfg = _config(args)
    freqs, data = load_cube(args.cube)
    cube = cube_for(cfg, freqs, data)
    method = args.method or cfg.estimator
    ps = estimate(cube, cfg.num_paths, method, cfg.plan, cfg.grid,
                  threads=_threads(args))
    save_grid(args.out, ps)
    if args.export:
        fmt, dest = args.export
        export_grid(ps, fmt, dest)
    return 0


def cmd_peaks(args) -> int:
    ps = load_grid(args.grid)
    if args.count < 1:
        raise ConfigError(f"--count must be >= 1, got {args.count}")
    found = extract_peaks(ps, args.count)
    out = {"estimator": ps.estimator, "requested": found.requested,
           "complete": found.complete, "peaks": [_peak_dict(p) for p in found]}
    if args.truth:
        truths = load_config(args.truth).paths
        out["truth"] = _match_dict(match_to_truth(list(found), truths, ps.grid,
                                                  args.tolerance))
    sys.stdout.write(_dump(out))
    return 0


def _table(cfg: ScenarioConfig, results: dict) -> str:
    head = f"{'path':>4} {'theta_e':>8} {'theta_r':>8} {'T (s)':>12}"
    for name in results:
        head += f" {name:>9}"
    lines = [f"scenario {cfg.name} seed {cfg.seed}", head]
    for i, p in enumerate(cfg.paths):
        row = f"{i + 1:>4} {p.emission_angle:>8.2f} {p.reception_angle:>8.2f} {p.arrival_time:>12.6f}"
        for name, (_, report) in results.items():
            row += f" {'hit' if report.matches[i].hit else 'MISS':>9}"
        lines.append(row)
    total = f"{'hits':>4} {'':>8} {'':>8} {'':>12}"
    for _, report in results.values():
        total += f" {f'{report.hits}/{len(report.matches)}':>9}"
    lines.append(total)
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    cfg = _config(args)
    threads = _threads(args)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {out}: {exc.strerror}") from None
    cube = _synth(cfg)
    save_cube(out / "cube.spc", cube)
    results: dict[str, tuple[PeakSearch, MatchReport]] = {}
    timings = {}
    for method in METHODS:
        t0 = time.perf_counter()
        ps = estimate(cube, cfg.num_paths, method, cfg.plan, cfg.grid, threads=threads)
        timings[method] = time.perf_counter() - t0
        save_grid(out / f"{method}.psg", ps)
        found = extract_peaks(ps, cfg.num_paths)
        results[method] = (found, match_to_truth(list(found), cfg.paths, ps.grid,
                                                 args.tolerance))
    report = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "version": __version__,
        "estimators": {
            m: {"peaks": [_peak_dict(p) for p in found], "complete": found.complete,
                **_match_dict(rep)}
            for m, (found, rep) in results.items()
        },
    }
    if not args.deterministic:
        report["seconds"] = timings
    _write_text(out / "report.json", _dump(report))
    table = _table(cfg, results)
    _write_text(out / "report.txt", table)
    sys.stdout.write(table)
    return 0


def _global_flags(default) -> argparse.ArgumentParser:
    # Accepted before or after the subcommand; the subcommand copy uses
    # SUPPRESS so it does not clobber values given before it.
    p = argparse.ArgumentParser(add_help=False)
    sup = default is argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=default,
                   help="override the scenario seed (noise realization)")
    p.add_argument("--threads", type=int, default=default if sup else 1,
                   help="worker threads for moment accumulation and grid evaluation")
    p.add_argument("--deterministic", action="store_true", default=default if sup else False,
                   help="single-threaded run, no timing fields in reports")
    p.add_argument("-v", "--verbose", action="store_true", default=default if sup else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="raysep", parents=[_global_flags(None)],
                                     description="Raypath separation for double-array data.")
    parser.add_argument("--version", action="version", version=f"raysep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="synthesize a cube from a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("estimate", parents=[common], help="compute a pseudo-spectrum grid")
    p.add_argument("--config", required=True)
    p.add_argument("--cube", required=True)
    p.add_argument("--method", choices=METHODS, default=None,
                   help="estimator (default: the config's scenario.estimator)")
    p.add_argument("--out", required=True)
    p.add_argument("--export", nargs=2, metavar=("FORMAT", "DEST"),
                   help="also export as 'csv FILE' or 'pgm DIR'")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("peaks", parents=[common], help="list grid peaks, optionally vs truth")
    p.add_argument("--grid", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--truth", default=None, help="scenario config whose paths are the truth")
    p.add_argument("--tolerance", type=float, default=1.0, help="cells per axis")
    p.set_defaults(func=cmd_peaks)

    p = sub.add_parser("compare", parents=[common],
                       help="run all estimators on one synthesized cube")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default="compare-out")
    p.add_argument("--tolerance", type=float, default=1.0, help="cells per axis")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except RaysepError as exc:
        sys.stderr.write(json.dumps({"error": exc.category, "message": str(exc)}) + "\n")
        return exc.exit_code
    except MemoryError:
        sys.stderr.write(json.dumps({"error": "resource", "message": "out of memory"}) + "\n")
        return 7


if __name__ == "__main__":
    sys.exit(main())
