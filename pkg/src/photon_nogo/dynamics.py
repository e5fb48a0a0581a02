"""Sector-restricted Hamiltonians and exact time evolution.

Each detuning segment is propagated in the frame co-rotating with the atomic
transition, where the Hamiltonian is constant:

    H_seg = -sum_k delta_k n_k + V,
    V = -sum_k g_k sum_j [ f_k(r_j) s_{j,k}^+ a_k + h.c. ].

Since ``sum_k delta_k n_k`` is diagonal in the Fock basis, the interaction
picture (free field and free atoms rotated away) is recovered exactly by the
phase ``exp(-i sum_k n_k phi_k(t))`` with ``phi_k(t) = int_t0^t delta_k``.
With zero coupling the interaction-picture evolution is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import ModelSpec, SectorBasis, build_basis


@dataclass(frozen=True)
class HamiltonianSegment:
    duration: float
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def propagator(self, dt: float | None = None) -> np.ndarray:
        dt = self.duration if dt is None else dt
        w, v = self.eigenvalues, self.eigenvectors
        return (v * np.exp(-1j * w * dt)) @ v.conj().T


@dataclass(frozen=True)
class SectorHamiltonian:
    basis: SectorBasis
    segments: tuple[HamiltonianSegment, ...]
    spec: ModelSpec

    def is_hermitian(self) -> bool:
        for seg in self.segments:
            h = seg.matrix
            scale = max(np.abs(h).max(), np.finfo(float).tiny)
            if np.abs(h - h.conj().T).max() > 1e-14 * scale:
                return False
        return True


@dataclass(frozen=True)
class StateVector:
    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.basis.dim,):
            raise ValueError(f"expected {self.basis.dim} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def basis_state(cls, basis: SectorBasis, record) -> "StateVector":
        amps = np.zeros(basis.dim, dtype=complex)
        amps[basis.index_of[tuple(record)]] = 1.0
        return cls(basis, amps)


@dataclass(frozen=True)
class SectorState:
    """Direct sum of state vectors over several excitation sectors."""

    sectors: Mapping[int, StateVector]

    @property
    def norm(self) -> float:
        return float(np.sqrt(sum(v.norm**2 for v in self.sectors.values())))

    def __getitem__(self, n: int) -> StateVector:
        return self.sectors[n]


def interaction_matrix(spec: ModelSpec, basis: SectorBasis) -> np.ndarray:
    """Matrix of V in ``basis``; bosonic sqrt(n) factors for photons and oscillators."""
    m = basis.n_modes
    dim = basis.dim
    g = spec.effective_couplings
    f = spec.mode_functions
    bosonic = spec.species.is_bosonic
    cap = spec.species.level_cap
    # raise[row, col] = <row| sum g_k f_k(r_j) s^+_{j,k} a_k |col>
    raise_part = np.zeros((dim, dim), dtype=complex)
    for col, state in enumerate(basis.states):
        for k in range(m):
            nk = state[k]
            if nk == 0 or g[k] == 0.0:
                continue
            for j in range(spec.n_atoms):
                slot = m + spec.atomic_slot(j, k)
                level = state[slot]
                if level >= cap:
                    continue
                target = list(state)
                target[k] -= 1
                target[slot] += 1
                amp = g[k] * f[k, j] * np.sqrt(nk)
                if bosonic:
                    amp *= np.sqrt(level + 1)
                raise_part[basis.index_of[tuple(target)], col] += amp
    return -(raise_part + raise_part.conj().T)


def build_hamiltonian(spec: ModelSpec, basis: SectorBasis) -> SectorHamiltonian:
    if (
        basis.n_modes != spec.n_modes
        or basis.n_slots != spec.n_atomic_slots
        or basis.species is not spec.species
    ):
        raise ValueError("basis was not built from this spec")
    v = interaction_matrix(spec, basis)
    n_photons = basis.photon_numbers()
    segments = []
    for seg in spec.detuning_schedule:
        h = v - np.diag(n_photons @ np.asarray(seg.delta, dtype=float)).astype(complex)
        w, vecs = np.linalg.eigh(h)
        segments.append(HamiltonianSegment(seg.duration, h, w, vecs))
    return SectorHamiltonian(basis, tuple(segments), spec)


def _frame_phase(h: SectorHamiltonian, t: float) -> np.ndarray:
    phi = h.spec.accumulated_phase(t)
    return np.exp(-1j * (h.basis.photon_numbers() @ phi))


def propagate(h: SectorHamiltonian, psi: StateVector, t_start: float, t_end: float) -> StateVector:
    """Interaction-picture propagation of ``psi`` from ``t_start`` to ``t_end`` (t0 <= t_start <= t_end <= t1)."""
    spec = h.spec
    if not spec.t0 <= t_start <= t_end <= spec.t1:
        raise ValueError(f"times [{t_start}, {t_end}] outside window [{spec.t0}, {spec.t1}]")
    if psi.basis.dim != h.basis.dim or psi.basis.states != h.basis.states:
        raise ValueError("state and Hamiltonian live in different bases")
    amps = _frame_phase(h, t_start).conj() * psi.amplitudes
    for seg, sched in zip(h.segments, spec.detuning_schedule):
        lo, hi = max(t_start, sched.t_start), min(t_end, sched.t_end)
        if hi > lo:
            amps = seg.propagator(hi - lo) @ amps
    return StateVector(h.basis, _frame_phase(h, t_end) * amps)


def evolve_window(h: SectorHamiltonian, psi0: StateVector, t: float) -> StateVector:
    """Interaction-picture state at time ``t`` in [t0, t1]."""
    if not h.spec.t0 <= t <= h.spec.t1:
        raise ValueError(f"time {t} outside window [{h.spec.t0}, {h.spec.t1}]")
    return propagate(h, psi0, h.spec.t0, t)


def evolve(h: SectorHamiltonian, psi0: StateVector) -> StateVector:
    return evolve_window(h, psi0, h.spec.t1)


def evolve_sectors(spec: ModelSpec, state: SectorState, t: float | None = None) -> SectorState:
    """Evolve every sector component of ``state`` (to ``t1`` unless ``t`` is given)."""
    t = spec.t1 if t is None else t
    out = {}
    for n, psi in state.sectors.items():
        h = build_hamiltonian(spec, psi.basis)
        out[n] = evolve_window(h, psi, t)
    return SectorState(out)


def sector_bases(spec: ModelSpec, sectors=(0, 1, 2)) -> dict[int, SectorBasis]:
    return {n: build_basis(spec, n) for n in sectors}
