"""Matrices of the transmon-cavity model.

Energies are in units of hbar*omega_c and hbar = omega_c = 1 throughout.
Composite states are ordered qubit-major: index = i * (fock_cutoff + 1) + n,
with i the qubit eigenstate label and n the photon number.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class CouplingForm(str, enum.Enum):
    FULL = "full"
    RWA = "rwa"


class Basis(str, enum.Enum):
    TRANSMON = "transmon"
    CAVITY = "cavity"
    COMPOSITE = "composite"


class Gauge(str, enum.Enum):
    # "fock_phase" stores P^dag A P with P = diag(i**n) on the cavity factor.
    PHYSICAL = "physical"
    FOCK_PHASE = "fock_phase"


@dataclass(frozen=True)
class SystemSpec:
    e_c: float
    e_j: float
    g: float
    n_g: float = 0.0
    charge_cutoff: int = 10
    fock_cutoff: int = 350
    coupling_form: CouplingForm = CouplingForm.FULL

    def __post_init__(self):
        object.__setattr__(self, "coupling_form", CouplingForm(self.coupling_form))
        if not self.e_c > 0:
            raise ValueError(f"e_c must be positive, got {self.e_c}")
        if not self.e_j > 0:
            raise ValueError(f"e_j must be positive, got {self.e_j}")
        if not self.g >= 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if int(self.charge_cutoff) != self.charge_cutoff or self.charge_cutoff < 1:
            raise ValueError(f"charge_cutoff must be an integer >= 1, got {self.charge_cutoff}")
        if int(self.fock_cutoff) != self.fock_cutoff or self.fock_cutoff < 1:
            raise ValueError(f"fock_cutoff must be an integer >= 1, got {self.fock_cutoff}")

    @property
    def n_charge(self) -> int:
        return 2 * self.charge_cutoff + 1

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.n_charge * self.n_fock

    def charges(self) -> np.ndarray:
        return np.arange(-self.charge_cutoff, self.charge_cutoff + 1, dtype=float)

    def replace(self, **changes) -> "SystemSpec":
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SystemSpec(**values)

    def as_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["coupling_form"] = self.coupling_form.value
        return d


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    basis: Basis
    hermitian: bool = True
    gauge: Gauge = Gauge.PHYSICAL
    # (qubit levels, fock levels) for composite matrices
    dims: tuple = field(default=())

    @property
    def shape(self):
        return self.matrix.shape

    def max_asymmetry(self) -> float:
        m = self.matrix
        return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


@dataclass(frozen=True)
class QubitEigensystem:
    energies: np.ndarray
    states: np.ndarray

    @property
    def n_levels(self) -> int:
        return len(self.energies)


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Ties go to the lowest basis index (np.argmax returns the first maximum).
    """
    vectors = np.array(vectors, copy=True)
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    phases = pivots / np.abs(pivots)
    if np.isrealobj(vectors):
        phases = np.sign(pivots)
    vectors /= phases[np.newaxis, :]
    return vectors


def build_charge_operator(spec: SystemSpec) -> OperatorMatrix:
    return OperatorMatrix(np.diag(spec.charges() - spec.n_g), Basis.TRANSMON)


def build_transmon_hamiltonian(spec: SystemSpec) -> OperatorMatrix:
    charge = spec.charges() - spec.n_g
    hop = np.full(spec.n_charge - 1, -0.5 * spec.e_j)
    h = np.diag(4.0 * spec.e_c * charge**2) + np.diag(hop, 1) + np.diag(hop, -1)
    return OperatorMatrix(h, Basis.TRANSMON)


def build_qubit_eigensystem(spec: SystemSpec) -> QubitEigensystem:
    h = build_transmon_hamiltonian(spec).matrix
    try:
        energies, states = scipy.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"transmon eigensolver failed for {spec}: {exc}") from exc
    return QubitEigensystem(energies, fix_phases(states))


def qubit_charge_matrix(spec: SystemSpec, qubit: QubitEigensystem | None = None) -> np.ndarray:
    """Charge operator rotated into the qubit eigenbasis (real symmetric)."""
    if qubit is None:
        qubit = build_qubit_eigensystem(spec)
    s = qubit.states
    n_t = s.T @ build_charge_operator(spec).matrix @ s
    # exact symmetry; rounding in the product can leave ~1e-16 asymmetry
    return 0.5 * (n_t + n_t.T)


def annihilation(n_fock: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1)


def creation(n_fock: int) -> np.ndarray:
    return annihilation(n_fock).T


def fock_phases(n_fock: int) -> np.ndarray:
    return 1j ** np.arange(n_fock)


def composite_fock_phases(spec: SystemSpec) -> np.ndarray:
    """Diagonal of P = 1 (x) diag(i**n) in the composite basis."""
    return np.tile(fock_phases(spec.n_fock), spec.n_charge)


def _coupling_factors(spec: SystemSpec, n_t: np.ndarray):
    """Return (qubit_factor, cavity_factor) with H_int = A (x) B + h.c. in the Fock-phase gauge.

    In that gauge c -> i c and c^dag -> -i c^dag, so i g N (c^dag - c) becomes
    g N (c^dag + c) and the whole Hamiltonian is real symmetric.
    """
    cdag = creation(spec.n_fock)
    if spec.coupling_form is CouplingForm.FULL:
        return spec.g * n_t, cdag
    # excitation-preserving part: i g (L (x) c^dag - L^T (x) c), L = |i><i+1| elements of N.
    # Farther off-diagonal elements change N_q + c^dag c by more than one and are dropped.
    lowering = np.diag(np.diag(n_t, 1), 1)
    return spec.g * lowering, cdag


def build_composite_hamiltonian(
    spec: SystemSpec, gauge: Gauge | str = Gauge.PHYSICAL, qubit: QubitEigensystem | None = None
) -> OperatorMatrix:
    """Full transmon-cavity Hamiltonian in the qubit-eigenbasis (x) Fock basis.

    ``gauge="fock_phase"`` returns the unitarily equivalent real symmetric matrix
    P^dag H P, which the spectrum module can diagonalize with a real solver.
    """
    gauge = Gauge(gauge)
    if qubit is None:
        qubit = build_qubit_eigensystem(spec)
    n_t = qubit_charge_matrix(spec, qubit)
    a_q, b_c = _coupling_factors(spec, n_t)
    diag = (qubit.energies[:, None] + np.arange(spec.n_fock, dtype=float)[None, :]).ravel()

    if gauge is Gauge.FOCK_PHASE:
        term = np.kron(a_q, b_c)
        h = term + term.T
    else:
        term = np.kron(a_q.astype(complex), b_c) * 1j
        h = term + term.conj().T
    del term
    h[np.diag_indices_from(h)] += diag
    return OperatorMatrix(h, Basis.COMPOSITE, gauge=gauge, dims=(spec.n_charge, spec.n_fock))


def build_occupancy_operator(spec: SystemSpec) -> OperatorMatrix:
    """N_q (x) 1 with N_q = diag(0, 1, 2, ...) in the qubit eigenbasis."""
    diag = np.repeat(np.arange(spec.n_charge, dtype=float), spec.n_fock)
    return OperatorMatrix(np.diag(diag), Basis.COMPOSITE, dims=(spec.n_charge, spec.n_fock))


def build_photon_number_operator(spec: SystemSpec) -> OperatorMatrix:
    diag = np.tile(np.arange(spec.n_fock, dtype=float), spec.n_charge)
    return OperatorMatrix(np.diag(diag), Basis.COMPOSITE, dims=(spec.n_charge, spec.n_fock))


def build_excitation_operator(spec: SystemSpec) -> OperatorMatrix:
    m = build_occupancy_operator(spec).matrix + build_photon_number_operator(spec).matrix
    return OperatorMatrix(m, Basis.COMPOSITE, dims=(spec.n_charge, spec.n_fock))


def build_cavity_quadratures(spec: SystemSpec) -> tuple[OperatorMatrix, OperatorMatrix]:
    """1 (x) (c^dag + c) and 1 (x) i(c^dag - c), both Hermitian."""
    cdag = creation(spec.n_fock)
    eye = np.eye(spec.n_charge)
    x = np.kron(eye, cdag + cdag.T)
    y = np.kron(eye, 1j * (cdag - cdag.T))
    dims = (spec.n_charge, spec.n_fock)
    return OperatorMatrix(x, Basis.COMPOSITE, dims=dims), OperatorMatrix(y, Basis.COMPOSITE, dims=dims)


def excitation_commutator_norm(h: OperatorMatrix) -> float:
    """max |[H, N_q (x) 1 + 1 (x) c^dag c]| elementwise, for a composite H.

    The excitation operator is diagonal (and gauge invariant), so the
    commutator is H_mn (d_n - d_m).
    """
    n_q, n_f = h.dims
    d = (np.arange(n_q)[:, None] + np.arange(n_f)[None, :]).ravel().astype(float)
    worst = 0.0
    # row blocks keep the temporary small at full-scale dimension
    for start in range(0, len(d), 1024):
        rows = slice(start, start + 1024)
        block = np.abs(h.matrix[rows]) * np.abs(d[None, :] - d[rows, None])
        worst = max(worst, float(block.max()))
    return worst
