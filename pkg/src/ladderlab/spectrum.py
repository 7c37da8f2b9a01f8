"""Full diagonalization of the composite Hamiltonian and overlap queries."""
from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .operators import (
    Basis,
    Gauge,
    OperatorMatrix,
    SystemSpec,
    build_composite_hamiltonian,
    excitation_commutator_norm,
    fock_phases,
)

log = logging.getLogger(__name__)

# relative energy gap below which two eigenvalues count as degenerate for ordering
DEGENERACY_RTOL = 1e-12


class EigensolverError(RuntimeError):
    pass


@dataclass(eq=False)
class EigenSolution:
    """Ascending eigensystem of a composite Hamiltonian.

    ``vectors`` are stored in the gauge the Hamiltonian was built in; for the
    Fock-phase gauge the physical eigenvectors are ``P @ vectors`` with
    P = 1 (x) diag(i**n).  Overlaps with product states and with c^dag|lambda>
    are gauge independent, so labeling never needs the physical matrix.
    """

    energies: np.ndarray
    vectors: np.ndarray
    dims: tuple
    gauge: Gauge = Gauge.PHYSICAL
    spec: SystemSpec | None = None
    nq: np.ndarray = field(default=None, repr=False)
    photons: np.ndarray = field(default=None, repr=False)
    residual: float = float("nan")
    h_max: float = float("nan")
    commutator_norm: float = float("nan")

    def __post_init__(self):
        if self.nq is None or self.photons is None:
            self.nq, self.photons = _occupancies(self.vectors, self.dims)

    @property
    def n_qubit(self) -> int:
        return self.dims[0]

    @property
    def n_fock(self) -> int:
        return self.dims[1]

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def states(self) -> np.ndarray:
        """Eigenvectors in the physical basis (complex copy for the Fock-phase gauge)."""
        if self.gauge is Gauge.PHYSICAL:
            return self.vectors
        return self.vectors * np.tile(fock_phases(self.n_fock), self.n_qubit)[:, None]

    def to_gauge(self, v: np.ndarray) -> np.ndarray:
        """Map a physical-basis vector into the stored gauge."""
        if self.gauge is Gauge.PHYSICAL:
            return v
        return v * np.tile(fock_phases(self.n_fock), self.n_qubit).conj()

    def state_index(self, p: int, n: int) -> int:
        if not 0 <= p < self.n_qubit:
            raise IndexError(f"qubit label {p} outside 0..{self.n_qubit - 1}")
        if not 0 <= n < self.n_fock:
            raise IndexError(f"photon number {n} outside 0..{self.n_fock - 1}")
        return p * self.n_fock + n

    def raise_photon(self, index: int) -> np.ndarray:
        """c^dag applied to eigenvector ``index``, in the stored gauge (up to a global phase)."""
        v = self.vectors[:, index].reshape(self.dims)
        out = np.zeros_like(v)
        out[:, 1:] = v[:, :-1] * np.sqrt(np.arange(1, self.n_fock))[None, :]
        return out.ravel()

    def truncation_ceiling(self, index: int, levels: int = 2) -> tuple[float, float]:
        """Population of eigenstate ``index`` in the top ``levels`` Fock and qubit levels."""
        prob = np.abs(self.vectors[:, index].reshape(self.dims)) ** 2
        return float(prob[:, -levels:].sum()), float(prob[-levels:, :].sum())


def _occupancies(vectors: np.ndarray, dims: tuple) -> tuple[np.ndarray, np.ndarray]:
    n_q, n_f = dims
    nq = np.zeros(vectors.shape[1])
    ph = np.zeros(vectors.shape[1])
    qubit_label = np.repeat(np.arange(n_q, dtype=float), n_f)
    photon_label = np.tile(np.arange(n_f, dtype=float), n_q)
    for start in range(0, vectors.shape[1], 1024):
        cols = slice(start, start + 1024)
        prob = np.abs(vectors[:, cols]) ** 2
        nq[cols] = qubit_label @ prob
        ph[cols] = photon_label @ prob
    return nq, ph


def _max_residual(h: np.ndarray, energies: np.ndarray, vectors: np.ndarray) -> float:
    worst = 0.0
    for start in range(0, len(energies), 512):
        cols = slice(start, start + 512)
        r = h @ vectors[:, cols] - vectors[:, cols] * energies[None, cols]
        worst = max(worst, float(np.linalg.norm(r, axis=0).max()))
    return worst


def _order_degenerate(energies, nq, photons):
    """Stable ordering: energy, then <c^dag c>, then <N_q> inside degenerate groups."""
    scale = max(1.0, float(np.max(np.abs(energies)))) if len(energies) else 1.0
    groups = np.concatenate([[0], np.cumsum(np.diff(energies) > DEGENERACY_RTOL * scale)])
    return np.lexsort((nq, photons, groups))


def diagonalize(h: OperatorMatrix, spec: SystemSpec | None = None, check_residual: bool = True) -> EigenSolution:
    """Full eigendecomposition of a Hermitian composite Hamiltonian."""
    m = h.matrix
    if h.basis is not Basis.COMPOSITE or not h.dims:
        raise ValueError("diagonalize expects a composite operator with dims")
    if not h.hermitian:
        raise ValueError("diagonalize requires a Hermitian operator")
    if np.iscomplexobj(m) and not np.any(m.imag):
        m = m.real
    try:
        energies, vectors = scipy.linalg.eigh(m, driver="evd", check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"dense eigensolver failed (dim {m.shape[0]}): {exc}") from exc
    if not np.all(np.isfinite(energies)):
        raise EigensolverError("eigensolver returned non-finite eigenvalues")

    nq, photons = _occupancies(vectors, h.dims)
    order = _order_degenerate(energies, nq, photons)
    if np.any(order != np.arange(len(order))):
        energies, vectors, nq, photons = energies[order], vectors[:, order], nq[order], photons[order]

    h_max = float(np.max(np.abs(m)))
    residual = _max_residual(m, energies, vectors) if check_residual else float("nan")
    if check_residual and residual > 1e-9 * h_max:
        raise EigensolverError(f"eigen residual {residual:.3e} exceeds 1e-9 * |H|_max = {1e-9 * h_max:.3e}")
    return EigenSolution(
        energies=energies,
        vectors=vectors,
        dims=tuple(h.dims),
        gauge=h.gauge,
        spec=spec,
        nq=nq,
        photons=photons,
        residual=residual,
        h_max=h_max,
        commutator_norm=excitation_commutator_norm(h),
    )


def product_state_overlaps(sol: EigenSolution, p: int, n: int) -> np.ndarray:
    """|<lambda| p, n>|^2 for every eigenstate lambda."""
    return np.abs(sol.vectors[sol.state_index(p, n), :]) ** 2


def vector_overlaps(sol: EigenSolution, v: np.ndarray, gauge: Gauge | str = Gauge.PHYSICAL) -> np.ndarray:
    """|<lambda|v>|^2 / <v|v> for every eigenstate lambda."""
    v = np.asarray(v)
    norm2 = float(np.vdot(v, v).real)
    if norm2 == 0.0:
        raise ValueError("vector_overlaps needs a nonzero vector")
    if Gauge(gauge) is Gauge.PHYSICAL:
        v = sol.to_gauge(v)
    return np.abs(sol.vectors.conj().T @ v) ** 2 / norm2


def solve(spec: SystemSpec, cache_dir: str | Path | None = None) -> EigenSolution:
    """Build and diagonalize the composite Hamiltonian, using the real Fock-phase gauge.

    With ``cache_dir`` the decomposition is loaded from / stored to disk.
    """
    if cache_dir is not None:
        path = cache_path(spec, cache_dir)
        if path.exists():
            log.info("loading cached eigensystem %s", path)
            return load_solution(path)
    h = build_composite_hamiltonian(spec, gauge=Gauge.FOCK_PHASE)
    log.info("diagonalizing dim %d", h.shape[0])
    sol = diagonalize(h, spec)
    del h
    if cache_dir is not None:
        save_solution(sol, path)
    return sol


# --- binary cache ---------------------------------------------------------
#
# Layout (little endian):
#   8 bytes   magic b"LDRLAB01"
#   uint32    header length L
#   L bytes   UTF-8 JSON header: spec fields, gauge, dims, dtype, residual, h_max, commutator_norm
#   dim * f8  energies
#   dim * f8  <N_q> per eigenstate
#   dim * f8  <c^dag c> per eigenstate
#   dim*dim   eigenvectors row-major, f8 (real gauge) or c16 as (re, im) pairs

_MAGIC = b"LDRLAB01"


def spec_hash(spec: SystemSpec) -> str:
    payload = json.dumps(spec.as_dict(), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]


def cache_path(spec: SystemSpec, cache_dir: str | Path) -> Path:
    return Path(cache_dir) / f"eig-{spec_hash(spec)}.bin"


def save_solution(sol: EigenSolution, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    real = not np.iscomplexobj(sol.vectors)
    header = {
        "spec": sol.spec.as_dict() if sol.spec is not None else None,
        "gauge": sol.gauge.value,
        "dims": list(sol.dims),
        "dtype": "<f8" if real else "<c16",
        "residual": sol.residual,
        "h_max": sol.h_max,
        "commutator_norm": sol.commutator_norm,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for arr in (sol.energies, sol.nq, sol.photons):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(sol.vectors, dtype=header["dtype"]).tobytes())
    tmp.replace(path)


def load_solution(path: str | Path) -> EigenSolution:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError(f"{path} is not an eigensystem cache file")
        (n,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(n))
        dims = tuple(header["dims"])
        dim = dims[0] * dims[1]
        energies, nq, photons = (np.frombuffer(fh.read(8 * dim), dtype="<f8").copy() for _ in range(3))
        dtype = np.dtype(header["dtype"])
        vectors = np.frombuffer(fh.read(dtype.itemsize * dim * dim), dtype=dtype).reshape(dim, dim).copy()
    spec = SystemSpec(**header["spec"]) if header["spec"] else None
    return EigenSolution(
        energies=energies,
        vectors=vectors,
        dims=dims,
        gauge=Gauge(header["gauge"]),
        spec=spec,
        nq=nq,
        photons=photons,
        residual=header["residual"],
        h_max=header["h_max"],
        commutator_norm=header["commutator_norm"],
    )
