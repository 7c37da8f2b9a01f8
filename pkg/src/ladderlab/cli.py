"""Command-line entry point: ``ladderlab <subcommand> [--config run.toml] [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, outputs
from .config import (
    ConfigError,
    RunConfig,
    config_to_dict,
    ladder_index,
    ladder_name,
    parse_config,
    with_overrides,
)
from .dynamics import DriveParams, Frame, TruncationError, integrate, labeled_initial_state, trajectory_vs_ladder
from .labeling import LabelingError, Method, compare_ladders, label
from .observables import cavity_frequency_curve, detect_features, occupancy_curve
from .operators import SystemSpec
from .spectrum import product_state_overlaps, solve
from .sweeps import ceiling_occupancy, default_cache_dir, run_offset_charge_sweep, run_window_sweep

log = logging.getLogger("ladderlab")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML run configuration")
    sysg = p.add_argument_group("system")
    sysg.add_argument("--e-c", type=float, dest="e_c")
    sysg.add_argument("--e-j", type=float, dest="e_j")
    sysg.add_argument("--g", type=float, dest="g")
    sysg.add_argument("--n-g", type=float, dest="n_g")
    sysg.add_argument("--charge-cutoff", type=int, dest="charge_cutoff")
    sysg.add_argument("--fock-cutoff", type=int, dest="fock_cutoff")
    sysg.add_argument("--coupling-form", choices=["full", "rwa"], dest="coupling_form")
    lab = p.add_argument_group("labeling")
    lab.add_argument("--method", action="append", choices=[m.value for m in Method], dest="methods")
    lab.add_argument("--ladder", help="'g', 'e' or a qubit level index")
    lab.add_argument("--delta", type=float)
    lab.add_argument("--n-max", type=int, dest="n_max")
    lab.add_argument("--first-step", choices=["extrapolate", "overlap"], dest="first_step")
    lab.add_argument("--truncation-margin", type=int, dest="truncation_margin")
    lab.add_argument("--peak-threshold", type=float, dest="peak_threshold")
    run = p.add_argument_group("run")
    run.add_argument("--out", dest="output_dir")
    run.add_argument("--workers", type=int)
    run.add_argument("--no-cache", action="store_true")


def _add_drive(p: argparse.ArgumentParser):
    d = p.add_argument_group("drive")
    d.add_argument("--amplitude", type=float)
    d.add_argument("--omega-d", type=float, dest="omega_d")
    d.add_argument("--t-end", type=float, dest="t_end")
    d.add_argument("--dt", type=float)
    d.add_argument("--fock-cutoff-dyn", type=int, dest="fock_cutoff_dyn")
    d.add_argument("--sample-every", type=float, dest="sample_every")
    d.add_argument("--ceiling-tolerance", type=float, dest="ceiling_tolerance",
                   help="max population allowed in the top two Fock levels before aborting")
    d.add_argument("--frame", choices=[f.value for f in Frame])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ladderlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ladderlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("spectrum", "diagonalize and write an eigen summary"),
        ("label", "build labeled ladders"),
        ("freq", "ladders -> cavity-frequency curves and resonance features"),
        ("dynamics", "driven trajectory in the <N_q>-<c^dag c> plane"),
        ("compare", "compare ladders with each other and with a driven trajectory"),
        ("sweep", "offset-charge or energy-window grids"),
    ]:
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name in ("dynamics", "compare"):
            _add_drive(p)
        if name == "sweep":
            p.add_argument("--kind", choices=["offset", "window"], default=None,
                           help="offset-charge or window sweep (default: whichever grid is configured)")
    return parser


def resolve_config(args) -> RunConfig:
    if args.config is not None:
        cfg = parse_config(args.config.read_text())
    else:
        missing = [k for k in ("e_c", "e_j", "g") if getattr(args, k) is None]
        if missing:
            raise ConfigError(f"missing required field(s) {', '.join(missing)} (give --config or flags)")
        cfg = RunConfig(SystemSpec(args.e_c, args.e_j, args.g))
    system = {k: getattr(args, k) for k in ("e_c", "e_j", "g", "n_g", "charge_cutoff", "fock_cutoff", "coupling_form")}
    labeling = {k: getattr(args, k) for k in ("delta", "n_max", "first_step", "truncation_margin", "peak_threshold")}
    if args.methods:
        labeling["methods"] = tuple(Method(m) for m in args.methods)
    if args.ladder is not None:
        labeling["ladder"] = ladder_index(args.ladder)
    cfg = with_overrides(cfg, system, labeling, output_dir=args.output_dir, workers=args.workers,
                         cache=False if args.no_cache else None)
    if hasattr(args, "amplitude"):
        fields = ("amplitude", "omega_d", "t_end", "dt", "fock_cutoff_dyn", "sample_every", "ceiling_tolerance")
        given = {k: getattr(args, k) for k in fields if getattr(args, k) is not None}
        if given or cfg.drive is not None:
            base = cfg.drive.__dict__ if cfg.drive is not None else {}
            merged = {**base, **given}
            try:
                drive = DriveParams(**merged)
            except TypeError as exc:
                raise ConfigError(f"incomplete drive parameters: {exc}") from exc
            from dataclasses import replace

            cfg = replace(cfg, drive=drive, frame=Frame(args.frame) if args.frame else cfg.frame)
    return cfg


def _cache(cfg: RunConfig):
    return default_cache_dir() if cfg.cache else None


def _manifest(cfg: RunConfig, command: str, extra: dict) -> str:
    entries = {"command": command, "config": config_to_dict(cfg)}
    entries.update(extra)
    return outputs.manifest_text(entries)


def _ladders(cfg: RunConfig, sol):
    lab = cfg.labeling
    return {m.value: label(sol, lab.ladder, m, lab.n_max, lab.continuity()) for m in lab.methods}


def cmd_spectrum(cfg, out: Path) -> list:
    sol = solve(cfg.system, cache_dir=_cache(cfg))
    rows = []
    for i in range(sol.dim):
        rows.append((i, sol.energies[i], sol.nq[i], sol.photons[i]))
    text = outputs._table({"spec": cfg.system.as_dict()}, ["index", "energy", "nq_expect", "photons_expect"], rows)
    outputs.write(out / "spectrum.csv", text)
    ground = int(np.argmax(product_state_overlaps(sol, 0, 0)))
    extra = {"residual": sol.residual, "h_max": sol.h_max, "commutator_norm": sol.commutator_norm,
             "dim": sol.dim, "ground_index": ground}
    outputs.write(out / "manifest.txt", _manifest(cfg, "spectrum", extra))
    return []


def cmd_label(cfg, out: Path, with_curves: bool) -> list:
    sol = solve(cfg.system, cache_dir=_cache(cfg))
    diagnostics = []
    extra = {"residual": sol.residual}
    name = ladder_name(cfg.labeling.ladder)
    for method, ladder in _ladders(cfg, sol).items():
        tag = f"{name}_{method}"
        outputs.write(out / f"ladder_{tag}.csv", outputs.ladder_csv(ladder, cfg.system))
        fock_top, qubit_top = ceiling_occupancy(sol, ladder)
        extra[f"ladder.{tag}"] = {"ceiling_fock": fock_top, "ceiling_qubit": qubit_top,
                                  "fallbacks": int(ladder.fallback.sum()), "diagnostics": ladder.diagnostics}
        diagnostics += ladder.diagnostics
        if with_curves:
            curve = cavity_frequency_curve(ladder)
            features = detect_features(curve, cfg.labeling.peak_threshold)
            outputs.write(out / f"freq_{tag}.csv", outputs.curve_csv(curve))
            outputs.write(out / f"occupancy_{tag}.csv", outputs.curve_csv(occupancy_curve(ladder)))
            outputs.write(out / f"features_{tag}.txt", outputs.feature_report(features))
    outputs.write(out / "manifest.txt", _manifest(cfg, "freq" if with_curves else "label", extra))
    return diagnostics


def _trajectory(cfg, sol):
    if cfg.drive is None:
        raise ConfigError("dynamics needs drive parameters ([drive] section or --amplitude/--omega-d/--t-end)")
    start = int(np.argmax(product_state_overlaps(sol, cfg.labeling.ladder, 0)))
    initial = labeled_initial_state(sol, start, cfg.drive.fock_cutoff_dyn)
    return integrate(cfg.system, cfg.drive, initial, cfg.frame)


def cmd_dynamics(cfg, out: Path) -> list:
    sol = solve(cfg.system, cache_dir=_cache(cfg))
    traj = _trajectory(cfg, sol)
    outputs.write(out / "trajectory.csv", outputs.trajectory_csv(traj))
    extra = {"norm_drift": traj.norm_drift, "fock_ceiling": traj.ceiling}
    outputs.write(out / "manifest.txt", _manifest(cfg, "dynamics", extra))
    return []


def cmd_compare(cfg, out: Path) -> list:
    sol = solve(cfg.system, cache_dir=_cache(cfg))
    ladders = _ladders(cfg, sol)
    lines = []
    names = list(ladders)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            div = compare_ladders(ladders[a], ladders[b])
            where = div.n if div.diverged else "none"
            line = f"ladders {a} {b} divergence {where}"
            if div.bound is not None:
                line += f" bound 0 {div.bound.bound_high:.17g} resonant_energy {div.bound.resonant_energy:.17g}"
            lines.append(line)
    extra = {}
    if cfg.drive is not None:
        traj = _trajectory(cfg, sol)
        outputs.write(out / "trajectory.csv", outputs.trajectory_csv(traj))
        cmp = trajectory_vs_ladder(traj, {k: occupancy_curve(v) for k, v in ladders.items()})
        for name in cmp.ranking:
            lines.append(f"trajectory {name} l1 {cmp.deviations[name]:.17g}")
        extra["norm_drift"] = traj.norm_drift
    outputs.write(out / "comparison.txt", "\n".join(lines) + "\n")
    outputs.write(out / "manifest.txt", _manifest(cfg, "compare", extra))
    return [d for lad in ladders.values() for d in lad.diagnostics]


def cmd_sweep(cfg, out: Path, kind: str | None) -> list:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section with an n_g or delta grid")
    if kind is None:
        kind = "offset" if cfg.sweep.n_g else "window"
    if kind == "offset":
        result = run_offset_charge_sweep(cfg, cache_dir=_cache(cfg))
    else:
        result = run_window_sweep(cfg, cache_dir=_cache(cfg))
    result.manifest["command"] = f"sweep {kind}"
    result.write(out)
    return result.diagnostics


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"ladderlab: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output_dir)
    start = time.perf_counter()
    try:
        if args.command == "spectrum":
            diagnostics = cmd_spectrum(cfg, out)
        elif args.command in ("label", "freq"):
            diagnostics = cmd_label(cfg, out, with_curves=args.command == "freq")
        elif args.command == "dynamics":
            diagnostics = cmd_dynamics(cfg, out)
        elif args.command == "compare":
            diagnostics = cmd_compare(cfg, out)
        else:
            diagnostics = cmd_sweep(cfg, out, args.kind)
    except ConfigError as exc:
        print(f"ladderlab: {exc}", file=sys.stderr)
        return 2
    except (LabelingError, TruncationError) as exc:
        print(f"ladderlab: {exc}", file=sys.stderr)
        return 1
    log.info("%s finished in %.1f s", args.command, time.perf_counter() - start)
    for d in diagnostics:
        print(f"diagnostic: {d}", file=sys.stderr)
    return 1 if diagnostics else 0


if __name__ == "__main__":
    sys.exit(main())
