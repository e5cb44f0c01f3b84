"""Command-line orchestration: simulate, sweep, optimize, adapt, coverage.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import adapt as adapt_mod
from .config import SEED_ENV, ConfigError, RunConfig, apply_preset, load_config
from .decoder import peel_decode
from .geometry import coverage_sets
from .protocol import build_graph, generate_frame
from .sim import SeedPolicy, sweep

log = logging.getLogger("owcsim")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config and env)")
    common.add_argument("--frames", type=int, help="frames per cell")
    common.add_argument("--out", help="output path (default: config output.path or stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--preset", help="figure preset: fig4, fig5 or fig6")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; never changes results)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="owcsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("simulate", parents=[common], help="one (p_a, FOV) cell")
    s.add_argument("--pa", type=float, help="activation probability (default: first config p_a)")
    s.add_argument("--fov", type=float, help="FOV in degrees (default: scenario.fov)")
    s.add_argument("--trace", help="write per-iteration decoding trace as JSON lines")
    sub.add_parser("sweep", parents=[common], help="full (p_a, FOV) grid")
    sub.add_parser("optimize", parents=[common], help="throughput-maximising FOV per p_a")
    a = sub.add_parser("adapt", parents=[common], help="closed-loop run over the trajectory")
    a.add_argument("--estimator", choices=["oracle", "power"])
    c = sub.add_parser("coverage", parents=[common], help="dump gain matrix and coverage")
    c.add_argument("--fov", type=float)
    return p


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config, os.environ.get(SEED_ENV))
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.frames is not None:
        if args.frames < 1:
            raise ConfigError(["--frames: must be >= 1"])
        updates["frames"] = args.frames
    if args.out is not None:
        updates["out_path"] = args.out
    if args.format is not None:
        updates["out_format"] = args.format
    if args.threads is not None and args.threads < 1:
        raise ConfigError(["--threads: must be >= 1"])
    return replace(cfg, **updates)


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _variant_path(path: str | None, preset: str, variant: str, suffix: str = "") -> str:
    if path is None:
        return f"{preset}_{variant}{suffix}.csv"
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{variant}{suffix}{p.suffix or '.csv'}"))


def _variants(cfg: RunConfig, preset: str | None):
    return apply_preset(cfg, preset) if preset else [(None, cfg)]


def cmd_simulate(args, cfg: RunConfig):
    pa = args.pa if args.pa is not None else cfg.pa[0]
    fov = args.fov if args.fov is not None else cfg.scenario.fov
    if not 0.0 <= pa <= 1.0:
        raise ConfigError([f"--pa: {pa} outside [0, 1]"])
    if not 0.0 < fov < 90.0:
        raise ConfigError([f"--fov: {fov} outside the FOV range (0, 90) degrees"])
    table = sweep(cfg.scenario, [pa], [fov], cfg.omega, cfg.slots, cfg.frames, cfg.seed,
                  args.threads)
    m = table.cells[0][0]
    print(f"p_a={pa:g} fov={fov:g}: p_rec={m.p_rec:.6f} (se {m.p_rec_se:.2g}) "
          f"R_avg={m.r_avg:.6f} (se {m.r_avg_se:.2g}) over {m.frames} frames",
          file=sys.stderr)
    _emit(table.to_json() if cfg.out_format == "json" else table.to_csv(), cfg.out_path)
    if args.trace:
        _write_trace(args.trace, cfg, pa, fov)


def _write_trace(path, cfg: RunConfig, pa, fov):
    cov = coverage_sets(cfg.scenario.with_fov(fov))
    with open(path, "w") as fh:
        for f, rng in SeedPolicy(cfg.seed).frame_rngs(cfg.frames):
            frame = generate_frame(cov.n_devices, pa, cfg.omega, cfg.slots, rng)
            res = peel_decode(build_graph(frame, cov))
            for t, ids in enumerate(res.schedule, start=1):
                fh.write(json.dumps({"frame": f, "iteration": t, "decoded": ids}) + "\n")


def cmd_sweep(args, cfg: RunConfig):
    for variant, vcfg in _variants(cfg, args.preset):
        table = sweep(vcfg.scenario, vcfg.pa, vcfg.fov_grid, vcfg.omega, vcfg.slots,
                      vcfg.frames, vcfg.seed, args.threads)
        text = table.to_json() if vcfg.out_format == "json" else table.to_csv()
        if variant is None:
            _emit(text, vcfg.out_path)
            continue
        _emit(text, _variant_path(vcfg.out_path, args.preset, variant))
        lookup = adapt_mod.lookup_from_table(table)
        _emit(lookup.to_csv(), _variant_path(vcfg.out_path, args.preset, variant, "_opt"))


def cmd_optimize(args, cfg: RunConfig):
    for variant, vcfg in _variants(cfg, args.preset):
        lookup, _ = adapt_mod.optimize_fov(vcfg.scenario, vcfg.pa, vcfg.fov_grid, vcfg.omega,
                                           vcfg.slots, vcfg.frames, vcfg.seed, args.threads)
        text = lookup.to_json() if vcfg.out_format == "json" else lookup.to_csv()
        path = vcfg.out_path if variant is None else _variant_path(vcfg.out_path, args.preset,
                                                                   variant)
        _emit(text, path)


def cmd_adapt(args, cfg: RunConfig):
    if not cfg.trajectory:
        raise ConfigError(["protocol.trajectory: required by the adapt subcommand"])
    if cfg.lookup:
        lookup = adapt_mod.FovLookupTable.from_csv(Path(cfg.lookup).read_text())
    else:
        lookup, _ = adapt_mod.optimize_fov(cfg.scenario, cfg.pa, cfg.fov_grid, cfg.omega,
                                           cfg.slots, cfg.frames, cfg.seed, args.threads)
    run = adapt_mod.adaptive_run(cfg.scenario, adapt_mod.step_trajectory(cfg.trajectory),
                                 lookup, cfg.omega, cfg.slots, cfg.seed,
                                 estimator=args.estimator or cfg.estimator,
                                 noise_std=cfg.noise_std, preamble_fov=cfg.preamble_fov)
    m = run.metrics
    print(f"adaptive run: p_rec={m.p_rec:.6f} R_avg={m.r_avg:.6f} over {m.frames} frames",
          file=sys.stderr)
    _emit(run.to_json() if cfg.out_format == "json" else run.to_csv(), cfg.out_path)


def cmd_coverage(args, cfg: RunConfig):
    fov = args.fov if args.fov is not None else cfg.scenario.fov
    if not 0.0 < fov < 90.0:
        raise ConfigError([f"--fov: {fov} outside the FOV range (0, 90) degrees"])
    cov = coverage_sets(cfg.scenario.with_fov(fov))
    sizes = [len(u) for u in cov.sets]
    print(f"fov={fov:g}: |U_j| = {sizes}, uncovered = {cov.uncovered.size}", file=sys.stderr)
    _emit(cov.to_csv(), cfg.out_path)


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "optimize": cmd_optimize,
            "adapt": cmd_adapt, "coverage": cmd_coverage}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if exc.filename == args.config else 2
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
