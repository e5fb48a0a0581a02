"""Conditional photon map: amplitudes left behind when every atom ends in |g>.

Two-photon amplitudes ``c2[k, k']`` are Fock amplitudes: the off-diagonal
entry is the amplitude of ``|1_k 1_k'>`` (stored at both ``(k, k')`` and
``(k', k)``), the diagonal entry is the amplitude of ``|2_k>``. A product
``(sum_k t_k a_k^+)(sum_k s_k a_k^+)|0>`` therefore has ``c2[k, k'] =
t_k s_k' + t_k' s_k`` off the diagonal and ``sqrt(2) t_k s_k`` on it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SectorState, StateVector, build_hamiltonian, evolve, evolve_sectors
from .model import ModelSpec, build_basis

PHASE_FLOOR = 1e-12
NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class ConditionalAmplitudes:
    c0: complex
    c1: np.ndarray
    c2: np.ndarray
    ground_probability: float | None = None

    def __post_init__(self):
        c1 = np.array(self.c1, dtype=complex).reshape(-1)
        c2 = np.array(self.c2, dtype=complex)
        if c2.shape != (c1.size, c1.size):
            raise ValueError("c2 must be an M x M matrix matching c1")
        c2 = (c2 + c2.T) / 2
        c1.setflags(write=False)
        c2.setflags(write=False)
        object.__setattr__(self, "c0", complex(self.c0))
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)
        if self.ground_probability is None:
            object.__setattr__(self, "ground_probability", float(np.sum(np.abs(self.as_vector()) ** 2)))

    @property
    def n_modes(self) -> int:
        return self.c1.size

    def as_vector(self) -> np.ndarray:
        """Concatenated (c0, c1, upper triangle of c2): the projected state's Fock amplitudes."""
        iu = np.triu_indices(self.n_modes)
        return np.concatenate([[self.c0], self.c1, self.c2[iu]])

    def with_mode_phases(self, theta) -> "ConditionalAmplitudes":
        """Apply the local phase redefinition ``a_k^+ -> exp(i theta_k) a_k^+``."""
        u = np.exp(1j * np.asarray(theta, dtype=float))
        return ConditionalAmplitudes(self.c0, self.c1 * u, self.c2 * np.outer(u, u), self.ground_probability)


@dataclass(frozen=True)
class FactorizationReport:
    deviation: float
    conditional_phase: float  # nan when undefined
    phase_defined: bool
    schmidt_values: tuple[float, float]
    entanglement_entropy: float
    mode_cross_ratio_phase: float  # nan when undefined

    def as_record(self) -> dict:
        return {
            "deviation": self.deviation,
            "conditional_phase": self.conditional_phase,
            "phase_defined": self.phase_defined,
            "entropy": self.entanglement_entropy,
            "schmidt_1": self.schmidt_values[0],
            "schmidt_2": self.schmidt_values[1],
            "mode_cross_ratio_phase": self.mode_cross_ratio_phase,
        }


def _check_qubit(alpha: complex, beta: complex, name: str):
    norm = abs(alpha) ** 2 + abs(beta) ** 2
    if abs(norm - 1.0) > NORMALIZATION_TOL:
        raise ValueError(f"{name}: |alpha|^2 + |beta|^2 = {norm!r}, expected 1")


def prepare_initial(
    spec: ModelSpec,
    alpha1: complex,
    beta1: complex,
    k1: int,
    alpha2: complex,
    beta2: complex,
    k2: int,
) -> SectorState:
    """``(alpha1 + beta1 a_k1^+)(alpha2 + beta2 a_k2^+)|0>|g>`` split over sectors 0-2."""
    m = spec.n_modes
    if k1 == k2:
        raise ValueError("k1 and k2 must be distinct modes")
    for k in (k1, k2):
        if not 0 <= k < m:
            raise ValueError(f"mode index {k} out of range for {m} modes")
    _check_qubit(alpha1, beta1, "first photon")
    _check_qubit(alpha2, beta2, "second photon")
    slots = spec.n_atomic_slots

    def record(*modes):
        occ = [0] * (m + slots)
        for k in modes:
            occ[k] += 1
        return tuple(occ)

    sectors = {}
    for n, entries in (
        (0, [((), alpha1 * alpha2)]),
        (1, [((k1,), beta1 * alpha2), ((k2,), alpha1 * beta2)]),
        (2, [((k1, k2), beta1 * beta2)]),
    ):
        basis = build_basis(spec, n)
        amps = np.zeros(basis.dim, dtype=complex)
        for modes, amp in entries:
            amps[basis.index_of[record(*modes)]] += amp
        sectors[n] = StateVector(basis, amps)
    return SectorState(sectors)


def project_ground(state: SectorState) -> ConditionalAmplitudes:
    """Unnormalized photonic amplitudes of the component with all atoms in |g>."""
    m = next(iter(state.sectors.values())).basis.n_modes
    c0 = 0j
    c1 = np.zeros(m, dtype=complex)
    c2 = np.zeros((m, m), dtype=complex)
    prob = 0.0
    for n, psi in state.sectors.items():
        basis = psi.basis
        for i in basis.ground_indices():
            amp = psi.amplitudes[i]
            prob += abs(amp) ** 2
            occupied = [k for k, nk in enumerate(basis.photons(i)) for _ in range(nk)]
            if n == 0:
                c0 = amp
            elif n == 1:
                c1[occupied[0]] = amp
            else:
                a, b = occupied
                c2[a, b] = c2[b, a] = amp
    return ConditionalAmplitudes(c0, c1, c2, float(prob))


def single_photon_transfer(spec: ModelSpec, k: int) -> np.ndarray:
    """Column ``k`` of the conditional one-photon transfer matrix."""
    if not 0 <= k < spec.n_modes:
        raise ValueError(f"mode index {k} out of range for {spec.n_modes} modes")
    basis = build_basis(spec, 1)
    record = [0] * (spec.n_modes + spec.n_atomic_slots)
    record[k] = 1
    psi = evolve(build_hamiltonian(spec, basis), StateVector.basis_state(basis, record))
    return project_ground(SectorState({1: psi})).c1.copy()


def transfer_matrix(spec: ModelSpec) -> np.ndarray:
    """All columns at once: ``T[k', k]`` is the amplitude for k -> k' with atoms back in |g>."""
    basis = build_basis(spec, 1)
    u = np.eye(basis.dim, dtype=complex)
    h = build_hamiltonian(spec, basis)
    m = spec.n_modes
    cols = [evolve(h, StateVector(basis, u[:, i])).amplitudes[:m] for i in range(m)]
    # photon-only states lead the descending lexicographic order, mode 0 first
    return np.stack(cols, axis=1)


def predict_product(t_vec, s_vec, alpha1, beta1, alpha2, beta2) -> ConditionalAmplitudes:
    """Amplitudes of ``[alpha1 + beta1 t.a^+][alpha2 + beta2 s.a^+]|0>``."""
    t = np.asarray(t_vec, dtype=complex)
    s = np.asarray(s_vec, dtype=complex)
    if t.shape != s.shape or t.ndim != 1:
        raise ValueError("transfer vectors must be 1-D and of equal length")
    pair = np.outer(t, s) + np.outer(s, t)
    np.fill_diagonal(pair, math.sqrt(2) * t * s)
    return ConditionalAmplitudes(
        alpha1 * alpha2,
        alpha1 * beta2 * s + alpha2 * beta1 * t,
        beta1 * beta2 * pair,
    )


def _cross_ratio(amps: ConditionalAmplitudes, k1: int, k2: int) -> complex | None:
    parts = (amps.c0, amps.c2[k1, k2], amps.c1[k1], amps.c1[k2])
    if min(abs(p) for p in parts) <= PHASE_FLOOR:
        return None
    return amps.c0 * amps.c2[k1, k2] / (amps.c1[k1] * amps.c1[k2])


def factorization_report(
    exact: ConditionalAmplitudes, predicted: ConditionalAmplitudes, k1: int, k2: int
) -> FactorizationReport:
    """Compare exact conditional amplitudes with the factorized prediction.

    The mode cross ratio ``c0 c2[k1,k2] / (c1[k1] c1[k2])`` is not 1 for a
    product state once linear scattering moves photons between k1 and k2,
    so the conditional phase is taken relative to the prediction's cross
    ratio, and the logical 2x2 block has its two-photon entry rescaled the
    same way. Both reduce to the plain mode quantities when k1 and k2 do not
    mix, and both are invariant under local mode-phase redefinitions.
    """
    if exact.n_modes != predicted.n_modes:
        raise ValueError("amplitude sets have different numbers of modes")
    if k1 == k2:
        raise ValueError("k1 and k2 must be distinct modes")

    ev, pv = exact.as_vector(), predicted.as_vector()
    ref = np.linalg.norm(ev)
    diff = np.linalg.norm(ev - pv)
    if ref > 0:
        deviation = float(diff / ref)
    else:
        deviation = 0.0 if diff == 0 else math.inf

    r_exact = _cross_ratio(exact, k1, k2)
    r_pred = _cross_ratio(predicted, k1, k2)
    raw_phase = float(np.angle(r_exact)) if r_exact is not None else math.nan
    defined = r_exact is not None and r_pred is not None
    phase = float(np.angle(r_exact / r_pred)) if defined else math.nan

    # rows: occupation of k1, columns: occupation of k2
    c22 = exact.c2[k1, k2] / r_pred if r_pred is not None else exact.c2[k1, k2]
    block = np.array([[exact.c0, exact.c1[k2]], [exact.c1[k1], c22]])
    sv = np.linalg.svd(block, compute_uv=False)
    total = np.sqrt(np.sum(sv**2))
    if total > 0:
        sv = sv / total
    probs = sv**2
    probs = probs[probs > 0]
    entropy = float(max(0.0, -np.sum(probs * np.log2(probs))))
    return FactorizationReport(
        deviation=deviation,
        conditional_phase=phase,
        phase_defined=defined,
        schmidt_values=(float(sv[0]), float(sv[1])),
        entanglement_entropy=entropy,
        mode_cross_ratio_phase=raw_phase,
    )


def conditional_amplitudes(spec: ModelSpec, alpha1, beta1, k1, alpha2, beta2, k2) -> ConditionalAmplitudes:
    """Exact route: prepare, evolve all sectors, project on the atomic ground state."""
    psi0 = prepare_initial(spec, alpha1, beta1, k1, alpha2, beta2, k2)
    return project_ground(evolve_sectors(spec, psi0))
