"""Run configuration: a TOML document with sections system / labeling / drive / sweep / run.

Example::

    [system]
    e_c = 0.05
    e_j = 1.6
    g = 0.025
    n_g = 0.0

    [labeling]
    methods = ["continuity", "recursive"]
    ladder = "g"
    delta = 0.01

    [sweep]
    n_g = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    ladders = ["g", "e"]
    delta_overrides = [{ladder = "g", n_g = 0.1, delta = 0.015}]
"""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field, replace

import tomli
import tomli_w

from .dynamics import CEILING_TOLERANCE, DriveParams, Frame
from .labeling import DEFAULT_TRUNCATION_MARGIN, ContinuityConfig, FirstStep, Method
from .observables import PEAK_THRESHOLD
from .operators import CouplingForm, SystemSpec


class ConfigError(ValueError):
    pass


LADDER_NAMES = {"g": 0, "e": 1}


def ladder_index(value) -> int:
    if isinstance(value, str):
        if value in LADDER_NAMES:
            return LADDER_NAMES[value]
        if value.isdigit():
            return int(value)
        raise ValueError(f"unknown ladder start {value!r} (use 'g', 'e' or a level index)")
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise ValueError(f"invalid ladder start {value!r}")
    return int(value)


def ladder_name(p: int) -> str:
    return {v: k for k, v in LADDER_NAMES.items()}.get(p, str(p))


@dataclass(frozen=True)
class LabelingConfig:
    methods: tuple = (Method.CONTINUITY,)
    ladder: int = 0
    delta: float = 0.01
    n_max: int = 260
    first_step: FirstStep = FirstStep.EXTRAPOLATE
    truncation_margin: int = DEFAULT_TRUNCATION_MARGIN
    peak_threshold: float = PEAK_THRESHOLD

    def continuity(self, delta: float | None = None) -> ContinuityConfig:
        return ContinuityConfig(delta=self.delta if delta is None else delta, n_max=self.n_max,
                                first_step=self.first_step, truncation_margin=self.truncation_margin)


@dataclass(frozen=True)
class DeltaOverride:
    ladder: int
    n_g: float
    delta: float


@dataclass(frozen=True)
class SweepConfig:
    n_g: tuple = ()
    delta: tuple = ()
    ladders: tuple = (0,)
    delta_overrides: tuple = ()

    def delta_for(self, ladder: int, n_g: float, default: float) -> float:
        for o in self.delta_overrides:
            if o.ladder == ladder and abs(o.n_g - n_g) < 1e-12:
                return o.delta
        return default


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    drive: DriveParams | None = None
    frame: Frame = Frame.DISPLACED
    sweep: SweepConfig | None = None
    output_dir: str = "ladderlab-out"
    cache: bool = True
    workers: int = 1


_SCHEMA = {
    "system": {"e_c", "e_j", "g", "n_g", "charge_cutoff", "fock_cutoff", "coupling_form", "omega_c"},
    "labeling": {"methods", "ladder", "delta", "n_max", "first_step", "truncation_margin", "peak_threshold"},
    "drive": {"amplitude", "omega_d", "t_end", "dt", "fock_cutoff_dyn", "sample_every", "ceiling_tolerance", "frame"},
    "sweep": {"n_g", "delta", "ladders", "delta_overrides"},
    "run": {"output_dir", "cache", "workers"},
}
_REQUIRED = {"system": ("e_c", "e_j", "g"), "drive": ("amplitude", "omega_d", "t_end")}


def _line_of(text: str, section: str | None, key: str | None) -> int | None:
    """Best-effort 1-based line number of ``key`` inside ``[section]``."""
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return no
    return None


def _error(text, section, key, message) -> ConfigError:
    line = _line_of(text, section, key)
    where = f"line {line}: " if line else ""
    name = f"[{section}] {key}" if key else f"[{section}]"
    return ConfigError(f"{where}{name}: {message}")


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    for section, body in doc.items():
        if section not in _SCHEMA:
            raise _error(text, section, None, "unknown section")
        if not isinstance(body, dict):
            raise _error(text, section, None, "expected a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise _error(text, section, key, "unknown key")
    for section, keys in _REQUIRED.items():
        if section in doc or section == "system":
            for key in keys:
                if key not in doc.get(section, {}):
                    raise _error(text, section, None, f"missing required field '{key}'")

    def build(section, key, fn):
        try:
            return fn()
        except (TypeError, ValueError) as exc:
            raise _error(text, section, key, str(exc)) from exc

    s = doc["system"]
    if s.get("omega_c", 1.0) != 1.0:
        raise _error(text, "system", "omega_c", "energies are in units of hbar*omega_c, so omega_c must be 1")
    system = build("system", None, lambda: SystemSpec(
        e_c=float(s["e_c"]), e_j=float(s["e_j"]), g=float(s["g"]), n_g=float(s.get("n_g", 0.0)),
        charge_cutoff=s.get("charge_cutoff", 10), fock_cutoff=s.get("fock_cutoff", 350),
        coupling_form=CouplingForm(s.get("coupling_form", "full"))))

    lab = doc.get("labeling", {})
    methods = lab.get("methods", ["continuity"])
    if isinstance(methods, str):
        methods = [methods]
    labeling = LabelingConfig(
        methods=build("labeling", "methods", lambda: tuple(Method(m) for m in methods)),
        ladder=build("labeling", "ladder", lambda: ladder_index(lab.get("ladder", "g"))),
        delta=float(lab.get("delta", 0.01)),
        n_max=int(lab.get("n_max", 260)),
        first_step=build("labeling", "first_step", lambda: FirstStep(lab.get("first_step", "extrapolate"))),
        truncation_margin=int(lab.get("truncation_margin", DEFAULT_TRUNCATION_MARGIN)),
        peak_threshold=float(lab.get("peak_threshold", PEAK_THRESHOLD)),
    )
    if not labeling.delta > 0:
        raise _error(text, "labeling", "delta", "energy window must be positive")
    if not labeling.peak_threshold > 0:
        raise _error(text, "labeling", "peak_threshold", "must be positive")
    if labeling.ladder >= system.n_charge:
        raise _error(text, "labeling", "ladder", f"qubit level {labeling.ladder} outside the {system.n_charge} levels")
    if not 0 <= labeling.n_max <= system.fock_cutoff:
        raise _error(text, "labeling", "n_max", f"must lie in 0..fock_cutoff ({system.fock_cutoff})")

    drive = None
    frame = Frame.DISPLACED
    if "drive" in doc:
        d = doc["drive"]
        drive = build("drive", None, lambda: DriveParams(
            amplitude=float(d["amplitude"]), omega_d=float(d["omega_d"]), t_end=float(d["t_end"]),
            dt=float(d.get("dt", 1e-3)), fock_cutoff_dyn=int(d.get("fock_cutoff_dyn", 150)),
            sample_every=float(d.get("sample_every", 0.5)),
            ceiling_tolerance=float(d.get("ceiling_tolerance", CEILING_TOLERANCE))))
        frame = build("drive", "frame", lambda: Frame(d.get("frame", "displaced")))

    sweep = None
    if "sweep" in doc:
        w = doc["sweep"]
        overrides = []
        for o in w.get("delta_overrides", []):
            overrides.append(build("sweep", "delta_overrides", lambda o=o: DeltaOverride(
                ladder_index(o["ladder"]), float(o["n_g"]), float(o["delta"]))))
        sweep = SweepConfig(
            n_g=tuple(float(x) for x in w.get("n_g", [])),
            delta=tuple(float(x) for x in w.get("delta", [])),
            ladders=build("sweep", "ladders", lambda: tuple(ladder_index(x) for x in w.get("ladders", ["g"]))),
            delta_overrides=tuple(overrides),
        )
        if not sweep.n_g and not sweep.delta:
            raise _error(text, "sweep", None, "needs a non-empty n_g or delta grid")
        if any(o.delta <= 0 for o in overrides) or any(x <= 0 for x in sweep.delta):
            raise _error(text, "sweep", "delta", "energy windows must be positive")
        if not sweep.ladders:
            raise _error(text, "sweep", "ladders", "must not be empty")

    r = doc.get("run", {})
    workers = int(r.get("workers", 1))
    if workers < 1:
        raise _error(text, "run", "workers", "must be >= 1")
    return RunConfig(system, labeling, drive, frame, sweep,
                     output_dir=str(r.get("output_dir", "ladderlab-out")),
                     cache=bool(r.get("cache", True)), workers=workers)


def config_to_dict(cfg: RunConfig) -> dict:
    lab = cfg.labeling
    doc = {
        "system": cfg.system.as_dict(),
        "labeling": {
            "methods": [m.value for m in lab.methods],
            "ladder": ladder_name(lab.ladder),
            "delta": lab.delta,
            "n_max": lab.n_max,
            "first_step": lab.first_step.value,
            "truncation_margin": lab.truncation_margin,
            "peak_threshold": lab.peak_threshold,
        },
        "run": {"output_dir": cfg.output_dir, "cache": cfg.cache, "workers": cfg.workers},
    }
    if cfg.drive is not None:
        doc["drive"] = {**asdict(cfg.drive), "frame": cfg.frame.value}
    if cfg.sweep is not None:
        doc["sweep"] = {
            "n_g": list(cfg.sweep.n_g),
            "delta": list(cfg.sweep.delta),
            "ladders": [ladder_name(p) for p in cfg.sweep.ladders],
            "delta_overrides": [
                {"ladder": ladder_name(o.ladder), "n_g": o.n_g, "delta": o.delta} for o in cfg.sweep.delta_overrides
            ],
        }
    return doc


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def with_overrides(cfg: RunConfig, system: dict | None = None, labeling: dict | None = None, **run) -> RunConfig:
    """Copy of ``cfg`` with selected fields replaced (used by CLI flags)."""
    system = {k: v for k, v in (system or {}).items() if v is not None}
    labeling = {k: v for k, v in (labeling or {}).items() if v is not None}
    run = {k: v for k, v in run.items() if v is not None}
    return replace(cfg, system=cfg.system.replace(**system), labeling=replace(cfg.labeling, **labeling), **run)
