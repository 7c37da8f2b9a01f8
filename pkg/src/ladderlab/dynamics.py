"""Driven transmon-cavity dynamics in the lab frame and in a displaced cavity frame.

States are stored as (qubit level, photon number) arrays in the physical basis
(qubit eigenbasis (x) Fock).  Both integrators are 4th-order Runge-Kutta in the
interaction picture of the static diagonal part (Lawson's integrating-factor
RK4): the diagonal qubit + photon energies are propagated exactly and RK4
handles the coupling and the drive.  This keeps the step size set by the
coupling strength rather than by the energy of the highest Fock level.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .operators import SystemSpec, build_qubit_eigensystem, qubit_charge_matrix

log = logging.getLogger(__name__)

CEILING_TOLERANCE = 1e-6


class Frame(str, enum.Enum):
    LAB = "lab"
    DISPLACED = "displaced"


class TruncationError(RuntimeError):
    """The Fock (or displacement) cutoff is too small for the requested run."""


@dataclass(frozen=True)
class DriveParams:
    amplitude: float
    omega_d: float
    t_end: float
    dt: float = 1e-3
    fock_cutoff_dyn: int = 150
    sample_every: float = 0.5
    ceiling_tolerance: float = CEILING_TOLERANCE

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("drive amplitude must be non-negative")
        if not self.dt > 0 or not self.t_end > 0:
            raise ValueError("dt and t_end must be positive")
        if not self.ceiling_tolerance > 0:
            raise ValueError("ceiling_tolerance must be positive")
        if self.fock_cutoff_dyn < 1:
            raise ValueError("fock_cutoff_dyn must be >= 1")
        stride = self.sample_every / self.dt
        if abs(stride - round(stride)) > 1e-9 * stride or round(stride) < 1:
            raise ValueError(f"sample_every {self.sample_every} must be a positive multiple of dt {self.dt}")

    @property
    def stride(self) -> int:
        return int(round(self.sample_every / self.dt))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    t: np.ndarray
    alpha: np.ndarray
    nq: np.ndarray
    photon_lab: np.ndarray
    frame: Frame
    norm_drift: float = 0.0
    ceiling: float = 0.0
    energy: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    # population of the top two Fock levels of the integration basis, per sample
    top_population: np.ndarray | None = None

    def __len__(self):
        return len(self.t)


class _Model:
    """Shared pieces of the transmon-cavity generator for one dynamics basis."""

    def __init__(self, spec: SystemSpec, n_fock: int):
        qubit = build_qubit_eigensystem(spec)
        self.g = spec.g
        self.n_q = spec.n_charge
        self.n_f = n_fock
        # constant energy offset only changes the global phase
        self.offset = float(qubit.energies[0])
        self.omega = qubit.energies - self.offset
        self.charge = qubit_charge_matrix(spec, qubit)
        self.sqrt_n = np.sqrt(np.arange(1, n_fock, dtype=float))
        self.diag = self.omega[:, None] + np.arange(n_fock, dtype=float)[None, :]
        self.levels = np.arange(self.n_q, dtype=float)
        self.photons = np.arange(n_fock, dtype=float)

    def lower(self, psi):
        out = np.zeros_like(psi)
        out[:, :-1] = psi[:, 1:] * self.sqrt_n
        return out

    def raise_(self, psi):
        out = np.zeros_like(psi)
        out[:, 1:] = psi[:, :-1] * self.sqrt_n
        return out

    def coupling(self, psi, n_psi=None):
        """i g N (c^dag - c) psi."""
        if n_psi is None:
            n_psi = self.charge @ psi
        return 1j * self.g * (self.raise_(n_psi) - self.lower(n_psi))

    def hamiltonian(self, psi):
        """Undriven H psi (including the offset, so <H> is the true energy)."""
        return (self.diag + self.offset) * psi + self.coupling(psi)

    def qubit_occupancy(self, psi):
        return float(self.levels @ np.sum(np.abs(psi) ** 2, axis=1))

    def photon_number(self, psi):
        return float(np.sum(np.abs(psi) ** 2, axis=0) @ self.photons)

    def mean_lower(self, psi):
        return complex(np.vdot(psi, self.lower(psi)))

    def mean_charge(self, psi, n_psi=None):
        if n_psi is None:
            n_psi = self.charge @ psi
        return float(np.vdot(psi, n_psi).real)

    def ceiling(self, psi, levels=2):
        return float(np.sum(np.abs(psi[:, -levels:]) ** 2))


def _lawson_rk4(y, t, h, lin, rhs):
    """One integrating-factor RK4 step for y' = -i lin * y + rhs(t, y)."""
    half = np.exp(-0.5j * h * lin)
    full = half * half
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, half * (y + 0.5 * h * k1))
    k3 = rhs(t + 0.5 * h, half * y + 0.5 * h * k2)
    k4 = rhs(t + h, full * y + h * half * k3)
    return full * y + (h / 6.0) * (full * k1 + 2.0 * half * (k2 + k3) + k4)


def prepare_initial_state(vector: np.ndarray, spec: SystemSpec, fock_cutoff_dyn: int) -> np.ndarray:
    """Map a physical composite vector (any Fock cutoff) onto the dynamics basis and normalize.

    Weight above the dynamics cutoff is dropped.
    """
    v = np.asarray(vector, dtype=complex).reshape(spec.n_charge, -1)
    out = np.zeros((spec.n_charge, fock_cutoff_dyn + 1), dtype=complex)
    k = min(v.shape[1], fock_cutoff_dyn + 1)
    out[:, :k] = v[:, :k]
    norm = np.linalg.norm(out)
    if norm == 0:
        raise ValueError("initial state has no weight inside the dynamics basis")
    return out / norm


def labeled_initial_state(sol, index: int, fock_cutoff_dyn: int) -> np.ndarray:
    """Physical-basis eigenvector ``index`` of an EigenSolution, moved onto the dynamics basis."""
    from .spectrum import Gauge  # local import keeps dynamics usable without a spectrum

    v = sol.vectors[:, index].astype(complex)
    if sol.gauge is Gauge.FOCK_PHASE:
        v = v * np.tile(1j ** np.arange(sol.n_fock), sol.n_qubit)
    return prepare_initial_state(v, sol.spec, fock_cutoff_dyn)


def _check_norm(psi, step):
    norm = float(np.vdot(psi, psi).real)
    if not np.isfinite(norm):
        raise FloatingPointError(f"state diverged at step {step}; reduce dt")
    return norm


def integrate_lab(
    spec: SystemSpec, drive: DriveParams, initial: np.ndarray, record_energy: bool = False
) -> Trajectory:
    """Integrate i d|psi>/dt = [H + E(e^{-i w_d t} c^dag + h.c.)]|psi> in the lab frame."""
    model = _Model(spec, drive.fock_cutoff_dyn + 1)
    psi = prepare_initial_state(initial, spec, drive.fock_cutoff_dyn).ravel()
    shape = (model.n_q, model.n_f)
    lin = model.diag.ravel()
    amp, wd = drive.amplitude, drive.omega_d

    def rhs(t, y):
        p = y.reshape(shape)
        out = model.coupling(p)
        if amp:
            drv = amp * np.exp(-1j * wd * t)
            out = out + drv * model.raise_(p) + np.conj(drv) * model.lower(p)
        return (-1j * out).ravel()

    samples = []
    worst_norm = 0.0
    ceiling = 0.0

    def record(t, y):
        nonlocal worst_norm, ceiling
        p = y.reshape(shape)
        worst_norm = max(worst_norm, abs(np.sqrt(_check_norm(p, t)) - 1.0))
        top = model.ceiling(p)
        ceiling = max(ceiling, top)
        if top > drive.ceiling_tolerance:
            raise TruncationError(
                f"lab-frame population {top:.2e} in the top two Fock levels at t = {t:g} exceeds "
                f"{drive.ceiling_tolerance:g}; increase fock_cutoff_dyn (now {drive.fock_cutoff_dyn})"
            )
        energy = float(np.vdot(p, model.hamiltonian(p)).real) if record_energy else np.nan
        samples.append((t, model.mean_lower(p), model.qubit_occupancy(p), model.photon_number(p), energy, top))

    t = 0.0
    record(t, psi)
    for step in range(1, drive.n_steps + 1):
        psi = _lawson_rk4(psi, t, drive.dt, lin, rhs)
        t = step * drive.dt
        if step % drive.stride == 0:
            record(t, psi)
    return _assemble(samples, Frame.LAB, worst_norm, ceiling, record_energy, drive)


def integrate_displaced(spec: SystemSpec, drive: DriveParams, initial: np.ndarray) -> Trajectory:
    """Integrate the same dynamics in the frame displaced by alpha(t).

    With U = exp(-alpha c^dag + alpha^* c) and phi = U psi, the generator is
    U H_dyn U^dag + i (dU/dt) U^dag, i.e. H with c -> c + alpha minus
    i(alpha' c^dag - alpha'^* c), up to a c-number.  alpha follows

        alpha' = -i [ (alpha + <c>_U) + i g <N_t>_U + E e^{-i w_d t} ]

    so alpha tracks the lab-frame <c>.  Collecting terms:

        H~ = H_q + c^dag c + i g N (c^dag - c) + 2 g Im(alpha) N + f c^dag + f^* c,
        f  = -<c>_U - i g <N_t>_U.
    """
    model = _Model(spec, drive.fock_cutoff_dyn + 1)
    phi = prepare_initial_state(initial, spec, drive.fock_cutoff_dyn)
    shape = phi.shape
    size = phi.size
    y = np.concatenate([phi.ravel(), [0.0j]])
    lin = np.concatenate([model.diag.ravel(), [1.0]])
    amp, wd, g = drive.amplitude, drive.omega_d, spec.g
    alpha_limit = float(spec.fock_cutoff)

    def rhs(t, y):
        p = y[:size].reshape(shape)
        alpha = y[size]
        n_p = model.charge @ p
        lower = model.lower(p)
        mean_c = complex(np.vdot(p, lower))
        mean_n = float(np.vdot(p, n_p).real)
        f = -mean_c - 1j * g * mean_n
        h = model.coupling(p, n_p) + (2.0 * g * alpha.imag) * n_p + f * model.raise_(p) + np.conj(f) * lower
        dalpha = -1j * (mean_c + 1j * g * mean_n + amp * np.exp(-1j * wd * t))
        out = np.empty_like(y)
        out[:size] = (-1j * h).ravel()
        out[size] = dalpha
        return out

    samples = []
    worst_norm = 0.0
    ceiling = 0.0

    def record(t, y):
        nonlocal worst_norm, ceiling
        p = y[:size].reshape(shape)
        alpha = complex(y[size])
        worst_norm = max(worst_norm, abs(np.sqrt(_check_norm(p, t)) - 1.0))
        top = model.ceiling(p)
        ceiling = max(ceiling, top)
        if top > drive.ceiling_tolerance:
            raise TruncationError(
                f"displaced-frame population {top:.2e} in the top two Fock levels at t = {t:g} exceeds "
                f"{drive.ceiling_tolerance:g}; increase fock_cutoff_dyn (now {drive.fock_cutoff_dyn})"
            )
        if abs(alpha) ** 2 > alpha_limit:
            raise TruncationError(
                f"|alpha|^2 = {abs(alpha) ** 2:.1f} at t = {t:g} exceeds the spectral fock_cutoff {spec.fock_cutoff}"
            )
        mean_c = model.mean_lower(p)
        photon_lab = model.photon_number(p) + 2.0 * (np.conj(alpha) * mean_c).real + abs(alpha) ** 2
        samples.append((t, alpha, model.qubit_occupancy(p), photon_lab, np.nan, top))

    t = 0.0
    record(t, y)
    for step in range(1, drive.n_steps + 1):
        y = _lawson_rk4(y, t, drive.dt, lin, rhs)
        t = step * drive.dt
        if step % drive.stride == 0:
            record(t, y)
            if step % (drive.stride * 2000) == 0:
                log.info("displaced run t = %.1f, photons %.1f, <N_q> %.3f", t, samples[-1][3], samples[-1][2])
    return _assemble(samples, Frame.DISPLACED, worst_norm, ceiling, False, drive)


def _assemble(samples, frame, norm_drift, ceiling, with_energy, drive) -> Trajectory:
    t, alpha, nq, photons, energy, top = (np.array(col) for col in zip(*samples))
    return Trajectory(
        t=t.astype(float),
        alpha=alpha.astype(complex),
        nq=nq.astype(float),
        photon_lab=photons.astype(float),
        frame=Frame(frame),
        norm_drift=norm_drift,
        ceiling=ceiling,
        energy=energy.astype(float) if with_energy else None,
        top_population=top.astype(float),
        meta={"amplitude": drive.amplitude, "omega_d": drive.omega_d, "dt": drive.dt,
              "t_end": drive.t_end, "fock_cutoff_dyn": drive.fock_cutoff_dyn,
              "ceiling_tolerance": drive.ceiling_tolerance},
    )


def integrate(spec: SystemSpec, drive: DriveParams, initial: np.ndarray, frame: Frame | str = Frame.DISPLACED) -> Trajectory:
    if Frame(frame) is Frame.LAB:
        return integrate_lab(spec, drive, initial)
    return integrate_displaced(spec, drive, initial)


def step_halving_error(spec: SystemSpec, drive: DriveParams, initial: np.ndarray, frame=Frame.DISPLACED) -> float:
    """Max difference in (<N_q>, photon_lab) between runs at dt and dt/2."""
    coarse = integrate(spec, drive, initial, frame)
    fine_drive = replace(drive, dt=drive.dt / 2)
    fine = integrate(spec, fine_drive, initial, frame)
    return float(max(np.max(np.abs(coarse.nq - fine.nq)), np.max(np.abs(coarse.photon_lab - fine.photon_lab))))


def coherent_amplitude(t, amplitude: float, omega_d: float) -> np.ndarray:
    """Closed-form <c>(t) of a bare driven cavity (omega_c = 1) starting in vacuum."""
    t = np.asarray(t, dtype=float)
    detuning = 1.0 - omega_d
    if detuning == 0:
        return -1j * amplitude * t * np.exp(-1j * t)
    return -amplitude * (np.exp(-1j * omega_d * t) - np.exp(-1j * t)) / detuning


# --- trajectory vs ladder --------------------------------------------------


@dataclass
class TrajectoryComparison:
    deviations: dict
    ranking: list
    n_range: tuple
    samples_used: int


def ramp_samples(traj: Trajectory, n_hi: float) -> np.ndarray:
    """Indices of the samples up to the first time photon_lab reaches ``n_hi`` (or its maximum)."""
    above = np.flatnonzero(traj.photon_lab >= n_hi)
    stop = above[0] if above.size else int(np.argmax(traj.photon_lab))
    return np.arange(stop + 1)


def trajectory_vs_ladder(traj: Trajectory, curves: dict, n_range: tuple | None = None,
                         ramp_only: bool = True) -> TrajectoryComparison:
    """L1-mean deviation between the driven <N_q> and each ladder's occupancy at n = photon_lab.

    ``curves`` maps a name to an occupancy curve (anything with ``n`` and
    ``values``).  Ladder occupancy is linearly interpolated in n.
    """
    if not curves:
        raise ValueError("no occupancy curves to compare against")
    lo = min(float(np.min(c.n)) for c in curves.values())
    hi = max(float(np.max(c.n)) for c in curves.values())
    if n_range is None:
        n_range = (lo, hi)
    idx = ramp_samples(traj, n_range[1]) if ramp_only else np.arange(len(traj))
    ph = traj.photon_lab[idx]
    sel = idx[(ph >= n_range[0]) & (ph <= n_range[1])]
    if sel.size == 0:
        raise ValueError(f"trajectory never enters photon range {n_range}")
    deviations = {}
    for name, curve in curves.items():
        ladder_nq = np.interp(traj.photon_lab[sel], curve.n, curve.values)
        deviations[name] = float(np.mean(np.abs(traj.nq[sel] - ladder_nq)))
    ranking = sorted(deviations, key=deviations.get)
    return TrajectoryComparison(deviations, ranking, tuple(n_range), int(sel.size))
