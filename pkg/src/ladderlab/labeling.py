"""Assigning (qubit label, photon number) to eigenstates of the composite Hamiltonian.

Four ladder builders share one output type:

* overlap    -- largest overlap with the product state |p>|n>
* block      -- total-excitation blocks, valid only for excitation-preserving H
* recursive  -- largest overlap with c^dag applied to the previous labeled state
* continuity -- energy extrapolation plus a window, keeping <N_q> as continuous as possible
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .spectrum import EigenSolution, product_state_overlaps, vector_overlaps

log = logging.getLogger(__name__)

DEFAULT_TRUNCATION_MARGIN = 90


class Method(str, enum.Enum):
    OVERLAP = "overlap"
    BLOCK = "block"
    RECURSIVE = "recursive"
    CONTINUITY = "continuity"


class FirstStep(str, enum.Enum):
    EXTRAPOLATE = "extrapolate"
    OVERLAP = "overlap"


class LabelingError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuityConfig:
    delta: float = 0.01
    n_max: int = 260
    first_step: FirstStep = FirstStep.EXTRAPOLATE
    truncation_margin: int = DEFAULT_TRUNCATION_MARGIN

    def __post_init__(self):
        object.__setattr__(self, "first_step", FirstStep(self.first_step))
        if not self.delta > 0:
            raise ValueError(f"energy window delta must be positive, got {self.delta}")
        if self.n_max < 0:
            raise ValueError(f"n_max must be non-negative, got {self.n_max}")


@dataclass
class LabelLadder:
    p: int
    method: Method
    eigen_index: np.ndarray
    energy: np.ndarray
    nq: np.ndarray
    fallback: np.ndarray
    config: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)
    provenance: int | None = None

    def __len__(self):
        return len(self.eigen_index)

    @property
    def n_max(self) -> int:
        return len(self.eigen_index) - 1

    @property
    def delta(self) -> float | None:
        return self.config.get("delta")

    def entries(self):
        for n in range(len(self)):
            yield n, int(self.eigen_index[n]), float(self.energy[n]), float(self.nq[n]), bool(self.fallback[n])


def _check_range(sol: EigenSolution, p: int, n_max: int, margin: int = 0):
    if not 0 <= p < sol.n_qubit:
        raise LabelingError(f"qubit label {p} outside 0..{sol.n_qubit - 1}")
    fock_cutoff = sol.n_fock - 1
    if n_max < 0 or n_max > fock_cutoff:
        raise LabelingError(f"n_max {n_max} outside 0..{fock_cutoff}")
    if n_max > fock_cutoff - margin:
        raise LabelingError(
            f"n_max {n_max} exceeds fock_cutoff - margin = {fock_cutoff} - {margin}; "
            "labeled states near the Fock ceiling are truncation-polluted (lower the margin to override)"
        )


def _finish(sol, p, method, indices, fallback, config) -> LabelLadder:
    indices = np.asarray(indices, dtype=int)
    ladder = LabelLadder(
        p=p,
        method=Method(method),
        eigen_index=indices,
        energy=sol.energies[indices],
        nq=sol.nq[indices],
        fallback=np.asarray(fallback, dtype=bool),
        config=config,
        provenance=id(sol),
    )
    _, first, counts = np.unique(indices, return_index=True, return_counts=True)
    for i in np.flatnonzero(counts > 1):
        repeats = np.flatnonzero(indices == indices[first[i]]).tolist()
        ladder.diagnostics.append(f"eigenstate {int(indices[first[i]])} reused at n = {repeats}")
    if ladder.diagnostics:
        log.warning("%s ladder p=%d: %s", method, p, "; ".join(ladder.diagnostics))
    return ladder


def label_overlap(sol: EigenSolution, p: int, n_max: int) -> LabelLadder:
    _check_range(sol, p, n_max)
    rows = sol.vectors[[sol.state_index(p, n) for n in range(n_max + 1)], :]
    indices = np.argmax(np.abs(rows), axis=1)
    return _finish(sol, p, Method.OVERLAP, indices, np.zeros(n_max + 1, bool), {"n_max": n_max})


def label_block(sol: EigenSolution, p: int, n_max: int, rtol: float = 1e-8) -> LabelLadder:
    _check_range(sol, p, n_max)
    if not sol.commutator_norm <= rtol * sol.h_max:
        raise LabelingError(
            f"block labeling needs [H, N_q + c^dag c] = 0, but its max element is {sol.commutator_norm:.3e} "
            f"(> {rtol:g} * |H|_max = {rtol * sol.h_max:.3e}); H does not preserve the excitation number"
        )
    excitations = np.rint(sol.nq + sol.photons).astype(int)
    indices = []
    for n in range(n_max + 1):
        members = np.flatnonzero(excitations == p + n)
        if members.size == 0:
            raise LabelingError(f"no eigenstate in excitation block M = {p + n}")
        indices.append(int(members[np.argmin(np.abs(sol.photons[members] - n))]))
    return _finish(sol, p, Method.BLOCK, indices, np.zeros(n_max + 1, bool), {"n_max": n_max})


def label_recursive(sol: EigenSolution, p: int, n_max: int) -> LabelLadder:
    _check_range(sol, p, n_max)
    indices = [int(np.argmax(product_state_overlaps(sol, p, 0)))]
    for _ in range(n_max):
        candidate = sol.raise_photon(indices[-1])
        indices.append(int(np.argmax(vector_overlaps(sol, candidate, gauge=sol.gauge))))
    return _finish(sol, p, Method.RECURSIVE, indices, np.zeros(n_max + 1, bool), {"n_max": n_max})


def window_candidates(energies: np.ndarray, target: float, delta: float) -> tuple[np.ndarray, bool]:
    """Eigenstate indices with |e - target| <= delta/2; else the two closest.

    Returns (candidates, fallback).  When the second and third closest states
    are equidistant from the target, both are kept.
    """
    dist = np.abs(energies - target)
    inside = np.flatnonzero(dist <= 0.5 * delta)
    if inside.size:
        return inside, False
    order = np.argsort(dist, kind="stable")
    chosen = list(order[:2])
    if len(order) > 2 and dist[order[2]] == dist[order[1]]:
        chosen.append(order[2])
    return np.asarray(chosen, dtype=int), True


def select_continuous(
    energies: np.ndarray, nq: np.ndarray, target: float, previous_nq: float, delta: float
) -> tuple[int, bool]:
    """One continuity step: the in-window state whose <N_q> is closest to ``previous_nq``.

    Ties go to the energy closer to ``target``, then to the lower index.
    """
    cand, fallback = window_candidates(energies, target, delta)
    key = np.lexsort((cand, np.abs(energies[cand] - target), np.abs(nq[cand] - previous_nq)))
    return int(cand[key[0]]), fallback


def label_continuity(sol: EigenSolution, p: int, cfg: ContinuityConfig) -> LabelLadder:
    _check_range(sol, p, cfg.n_max, cfg.truncation_margin)
    indices = [int(np.argmax(product_state_overlaps(sol, p, 0)))]
    fallback = [False]
    for n in range(1, cfg.n_max + 1):
        if n == 1:
            if cfg.first_step is FirstStep.OVERLAP:
                indices.append(int(np.argmax(product_state_overlaps(sol, p, 1))))
                fallback.append(False)
                continue
            target = sol.energies[indices[0]] + 1.0
        else:
            target = 2.0 * sol.energies[indices[-1]] - sol.energies[indices[-2]]
        idx, fb = select_continuous(sol.energies, sol.nq, target, sol.nq[indices[-1]], cfg.delta)
        indices.append(idx)
        fallback.append(fb)
    config = {
        "delta": cfg.delta,
        "n_max": cfg.n_max,
        "first_step": cfg.first_step.value,
        "truncation_margin": cfg.truncation_margin,
    }
    return _finish(sol, p, Method.CONTINUITY, indices, fallback, config)


def label(sol: EigenSolution, p: int, method: Method | str, n_max: int, cfg: ContinuityConfig | None = None) -> LabelLadder:
    method = Method(method)
    if method is Method.OVERLAP:
        return label_overlap(sol, p, n_max)
    if method is Method.BLOCK:
        return label_block(sol, p, n_max)
    if method is Method.RECURSIVE:
        return label_recursive(sol, p, n_max)
    if cfg is None:
        cfg = ContinuityConfig(n_max=n_max)
    return label_continuity(sol, p, cfg)


# --- comparing ladders -----------------------------------------------------


@dataclass(frozen=True)
class RepulsionBound:
    """Interval for the level repulsion at a point where two windows part ways.

    delta_1 is the window of the ladder that picked the higher energy.
    """

    divergence_n: int
    delta_1: float
    delta_2: float
    resonant_energy: float
    bound_low: float = 0.0

    @property
    def bound_high(self) -> float:
        return self.delta_1 + self.delta_2

    def contains(self, gap: float) -> bool:
        return self.bound_low < gap < self.bound_high


@dataclass(frozen=True)
class Divergence:
    n: int | None
    index_a: int | None = None
    index_b: int | None = None
    bound: RepulsionBound | None = None

    @property
    def diverged(self) -> bool:
        return self.n is not None


def repulsion_bound(n: int, energy_a: float, delta_a: float, energy_b: float, delta_b: float) -> RepulsionBound:
    if energy_a >= energy_b:
        d1, d2 = delta_a, delta_b
    else:
        d1, d2 = delta_b, delta_a
    return RepulsionBound(n, d1, d2, 0.5 * (energy_a + energy_b))


def compare_ladders(a: LabelLadder, b: LabelLadder) -> Divergence:
    """First photon number where two ladders pick different eigenstates.

    A RepulsionBound is attached when both ladders come from the continuity
    method and both divergent picks satisfied their own window (no fallback):
    that is exactly the situation the bound 0 < Delta < delta_1 + delta_2 covers.
    """
    if a.provenance is not None and b.provenance is not None and a.provenance != b.provenance:
        raise LabelingError("ladders come from different eigen solutions")
    if a.p != b.p:
        raise LabelingError(f"ladders start from different qubit labels ({a.p} vs {b.p})")
    common = min(len(a), len(b))
    diff = np.flatnonzero(a.eigen_index[:common] != b.eigen_index[:common])
    if diff.size == 0:
        return Divergence(None)
    n = int(diff[0])
    bound = None
    both_windowed = a.method is Method.CONTINUITY and b.method is Method.CONTINUITY
    if both_windowed and n >= 1 and not a.fallback[n] and not b.fallback[n]:
        bound = repulsion_bound(n, float(a.energy[n]), a.delta, float(b.energy[n]), b.delta)
    return Divergence(n, int(a.eigen_index[n]), int(b.eigen_index[n]), bound)
