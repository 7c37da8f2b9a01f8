"""Batch runs over offset-charge and energy-window grids."""
from __future__ import annotations

import hashlib
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import outputs
from .config import RunConfig, config_to_dict, ladder_name, serialize_config
from .labeling import LabelLadder, Method, compare_ladders, label
from .observables import FrequencyCurve, cavity_frequency_curve, detect_features
from .spectrum import EigenSolution, solve

log = logging.getLogger(__name__)

CACHE_ENV = "LADDERLAB_CACHE"


def default_cache_dir() -> Path | None:
    value = os.environ.get(CACHE_ENV)
    return Path(value) if value else None


@dataclass
class SweepPoint:
    n_g: float
    p: int
    method: Method
    delta: float | None
    ladder: LabelLadder | None = None
    curve: FrequencyCurve | None = None
    features: list = field(default_factory=list)
    wall_time: float = 0.0
    diagnostics: list = field(default_factory=list)
    error: str | None = None

    @property
    def tag(self) -> str:
        tag = f"ng{self.n_g:.4f}_{ladder_name(self.p)}_{self.method.value}"
        if self.method is Method.CONTINUITY:
            tag += f"_d{self.delta:.4f}"
        return tag


@dataclass
class SweepResult:
    points: list
    comparisons: list = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def find(self, n_g=None, p=None, method=None, delta=None) -> list:
        out = []
        for pt in self.points:
            if n_g is not None and abs(pt.n_g - n_g) > 1e-12:
                continue
            if p is not None and pt.p != p:
                continue
            if method is not None and pt.method is not Method(method):
                continue
            if delta is not None and (pt.delta is None or abs(pt.delta - delta) > 1e-12):
                continue
            out.append(pt)
        return out

    @property
    def diagnostics(self) -> list:
        found = []
        for pt in self.points:
            found += [f"{pt.tag}: {d}" for d in pt.diagnostics]
            if pt.error:
                found.append(f"{pt.tag}: {pt.error}")
        return found

    def write(self, directory: str | Path, spec_dicts: dict | None = None) -> Path:
        directory = Path(directory)
        for pt in self.points:
            if pt.ladder is None:
                continue
            outputs.write(directory / f"ladder_{pt.tag}.csv", outputs.ladder_csv(pt.ladder))
            outputs.write(directory / f"freq_{pt.tag}.csv", outputs.curve_csv(pt.curve, {"n_g": pt.n_g}))
            outputs.write(directory / f"features_{pt.tag}.txt", outputs.feature_report(pt.features))
        outputs.write(directory / "manifest.txt", outputs.manifest_text(self.manifest))
        return directory


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:16]


def ceiling_occupancy(sol: EigenSolution, ladder: LabelLadder) -> tuple[float, float]:
    """Largest top-two-Fock and top-two-qubit-level population over a ladder's states."""
    tops = [sol.truncation_ceiling(int(i)) for i in np.unique(ladder.eigen_index)]
    return max(t[0] for t in tops), max(t[1] for t in tops)


def _label_point(sol, n_g, p, method, delta, cfg: RunConfig) -> SweepPoint:
    start = time.perf_counter()
    point = SweepPoint(n_g, p, Method(method), delta if Method(method) is Method.CONTINUITY else None)
    try:
        ladder = label(sol, p, method, cfg.labeling.n_max, cfg.labeling.continuity(delta))
        point.ladder = ladder
        point.curve = cavity_frequency_curve(ladder)
        point.features = detect_features(point.curve, cfg.labeling.peak_threshold)
        point.diagnostics = list(ladder.diagnostics)
    except Exception as exc:  # per-point failures must not abort a sweep
        log.exception("sweep point %s failed", point.tag)
        point.error = f"{type(exc).__name__}: {exc}"
    point.wall_time = time.perf_counter() - start
    return point


def _run_offset_point(args):
    cfg, n_g, cache_dir = args
    start = time.perf_counter()
    spec = cfg.system.replace(n_g=n_g)
    info = {"n_g": n_g}
    points = []
    try:
        sol = solve(spec, cache_dir=cache_dir if cfg.cache else None)
    except Exception as exc:
        info["error"] = f"{type(exc).__name__}: {exc}"
        for p in cfg.sweep.ladders:
            for method in cfg.labeling.methods:
                pt = SweepPoint(n_g, p, Method(method), None, error=info["error"])
                points.append(pt)
        return points, info
    info["residual"] = sol.residual
    for p in cfg.sweep.ladders:
        delta = cfg.sweep.delta_for(p, n_g, cfg.labeling.delta)
        for method in cfg.labeling.methods:
            pt = _label_point(sol, n_g, p, method, delta, cfg)
            if pt.ladder is not None:
                fock_top, qubit_top = ceiling_occupancy(sol, pt.ladder)
                info[f"{pt.tag}.ceiling_fock"] = fock_top
                info[f"{pt.tag}.ceiling_qubit"] = qubit_top
            points.append(pt)
    info["wall_time"] = time.perf_counter() - start
    return points, info


def _base_manifest(cfg: RunConfig) -> dict:
    return {"config_hash": config_hash(cfg), "config": config_to_dict(cfg)}


def run_offset_charge_sweep(cfg: RunConfig, cache_dir: str | Path | None = None) -> SweepResult:
    """Label every requested ladder at every offset charge of the sweep grid."""
    if cfg.sweep is None or not cfg.sweep.n_g:
        raise ValueError("offset-charge sweep needs a non-empty sweep.n_g grid")
    if cache_dir is None:
        cache_dir = default_cache_dir()
    jobs = [(cfg, n_g, cache_dir) for n_g in cfg.sweep.n_g]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_offset_point, jobs))
    else:
        results = [_run_offset_point(job) for job in jobs]

    manifest = _base_manifest(cfg)
    points = []
    for pts, info in results:
        points += pts
        key = f"point.ng{info['n_g']:.4f}"
        manifest[key] = {k: v for k, v in info.items() if k != "n_g"}
        for pt in pts:
            manifest[key][f"{pt.tag}.diagnostics"] = pt.diagnostics + ([pt.error] if pt.error else [])
    return SweepResult(points, [], manifest)


def run_window_sweep(cfg: RunConfig, cache_dir: str | Path | None = None,
                     sol: EigenSolution | None = None) -> SweepResult:
    """Continuity ladders for every window in the grid on one shared eigensystem."""
    if cfg.sweep is None or not cfg.sweep.delta:
        raise ValueError("window sweep needs a non-empty sweep.delta grid")
    if cache_dir is None:
        cache_dir = default_cache_dir()
    if sol is None:
        sol = solve(cfg.system, cache_dir=cache_dir if cfg.cache else None)
    n_g = cfg.system.n_g
    manifest = _base_manifest(cfg)
    manifest["residual"] = sol.residual
    points = []
    comparisons = []
    for p in cfg.sweep.ladders:
        continuity = []
        for delta in cfg.sweep.delta:
            pt = _label_point(sol, n_g, p, Method.CONTINUITY, delta, cfg)
            points.append(pt)
            continuity.append(pt)
        for method in cfg.labeling.methods:
            if Method(method) is not Method.CONTINUITY:
                points.append(_label_point(sol, n_g, p, method, None, cfg))
        for i, a in enumerate(continuity):
            for b in continuity[i + 1:]:
                if a.ladder is None or b.ladder is None:
                    continue
                div = compare_ladders(a.ladder, b.ladder)
                comparisons.append((a.delta, b.delta, p, div))
                entry = {"divergence_n": div.n if div.diverged else "none"}
                if div.bound is not None:
                    entry.update(bound_low=div.bound.bound_low, bound_high=div.bound.bound_high,
                                 resonant_energy=div.bound.resonant_energy)
                manifest[f"compare.{ladder_name(p)}.d{a.delta:.4f}_vs_d{b.delta:.4f}"] = entry
    for pt in points:
        if pt.ladder is not None:
            fock_top, qubit_top = ceiling_occupancy(sol, pt.ladder)
            manifest[f"point.{pt.tag}"] = {"ceiling_fock": fock_top, "ceiling_qubit": qubit_top,
                                           "wall_time": pt.wall_time,
                                           "diagnostics": pt.diagnostics + ([pt.error] if pt.error else [])}
    return SweepResult(points, comparisons, manifest)
