"""Physical configuration of the atom-photon system and excitation-sector bases.

Conventions: hbar = 1, angular-frequency units, discrete orthonormal photon
modes ``k = 0..M-1`` and atoms ``j = 0..N-1``. The rotating-wave coupling
conserves the total number of excitations (photons plus atomic excitations),
so every computation happens inside one sector of fixed excitation number.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

MAX_EXCITATIONS = 2


class Species(enum.Enum):
    """How the atomic lowering operator is realized."""

    LINEAR_OSCILLATOR = "linear_oscillator"  # bosonic b_j, one per atom
    TWO_LEVEL_SHARED = "two_level_shared"  # one sigma_j coupled to every mode
    TWO_LEVEL_PER_MODE = "two_level_per_mode"  # independent sigma_{j,k} per mode

    @property
    def is_bosonic(self) -> bool:
        return self is Species.LINEAR_OSCILLATOR

    @property
    def level_cap(self) -> int:
        """Maximum excitation of one atomic slot within the <=2 sectors."""
        return MAX_EXCITATIONS if self.is_bosonic else 1


class CouplingScaling(enum.Enum):
    FIXED = "fixed"
    INVERSE_SQRT_N = "inverse_sqrt_n"


class ModeFunctionKind(enum.Enum):
    RANDOM = "random"  # seeded unit-modulus phases
    UNIFORM = "uniform"  # f_k(r_j) = 1
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class DetuningSegment:
    """Constant detunings ``delta[k]`` (atom minus mode frequency) on [t_start, t_end)."""

    t_start: float
    t_end: float
    delta: tuple[float, ...]

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def random_mode_functions(n_modes: int, n_atoms: int, seed: int) -> np.ndarray:
    """Unit-modulus mode functions ``exp(i theta)``, theta uniform in [0, 2 pi).

    Returns an ``(n_modes, n_atoms)`` complex array; identical for equal seeds.
    """
    if n_modes < 1 or n_atoms < 1:
        raise ValueError("n_modes and n_atoms must be >= 1")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(n_modes, n_atoms))
    return np.exp(1j * theta)


def resolve_mode_functions(
    kind: ModeFunctionKind, n_modes: int, n_atoms: int, seed: int
) -> np.ndarray:
    if kind is ModeFunctionKind.RANDOM:
        return random_mode_functions(n_modes, n_atoms, seed)
    if kind is ModeFunctionKind.UNIFORM:
        return np.ones((n_modes, n_atoms), dtype=complex)
    raise ValueError(f"mode functions of kind {kind.value!r} cannot be generated")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModelSpec:
    """Full physical configuration of one run.

    ``mode_functions[k, j]`` is f_k(r_j). ``detuning_schedule`` tiles
    ``[t0, t1]`` with piecewise-constant detunings, which stand in for the
    classically controlled part of the atomic Hamiltonian.
    """

    n_atoms: int
    n_modes: int
    species: Species
    couplings: tuple[float, ...]
    coupling_scaling: CouplingScaling
    mode_functions: np.ndarray
    detuning_schedule: tuple[DetuningSegment, ...]
    t0: float
    t1: float
    rng_seed: int = 0
    mode_function_kind: ModeFunctionKind = field(default=ModeFunctionKind.EXPLICIT)

    def __post_init__(self):
        object.__setattr__(self, "species", Species(self.species))
        object.__setattr__(self, "coupling_scaling", CouplingScaling(self.coupling_scaling))
        object.__setattr__(self, "mode_function_kind", ModeFunctionKind(self.mode_function_kind))
        object.__setattr__(self, "couplings", tuple(float(g) for g in self.couplings))
        object.__setattr__(self, "mode_functions", _frozen(self.mode_functions))
        object.__setattr__(
            self,
            "detuning_schedule",
            tuple(
                DetuningSegment(float(s.t_start), float(s.t_end), tuple(float(d) for d in s.delta))
                for s in self.detuning_schedule
            ),
        )
        self._validate()

    def _validate(self):
        if self.n_atoms < 1 or self.n_modes < 1:
            raise ValueError("n_atoms and n_modes must be positive")
        if len(self.couplings) != self.n_modes:
            raise ValueError(f"expected {self.n_modes} couplings, got {len(self.couplings)}")
        if any(g < 0 or not np.isfinite(g) for g in self.couplings):
            raise ValueError("couplings must be finite and non-negative")
        if self.mode_functions.shape != (self.n_modes, self.n_atoms):
            raise ValueError(
                f"mode_functions must have shape {(self.n_modes, self.n_atoms)}, "
                f"got {self.mode_functions.shape}"
            )
        if np.any(np.abs(self.mode_functions) > 1.0 + 1e-12):
            raise ValueError("mode functions must satisfy |f_k(r_j)| <= 1")
        if not self.t1 > self.t0:
            raise ValueError("t1 must be larger than t0")
        segs = self.detuning_schedule
        if not segs:
            raise ValueError("detuning_schedule needs at least one segment")
        if segs[0].t_start != self.t0 or segs[-1].t_end != self.t1:
            raise ValueError("detuning segments must start at t0 and end at t1")
        for a, b in zip(segs, segs[1:]):
            if a.t_end != b.t_start:
                raise ValueError("detuning segments must be contiguous and non-overlapping")
        for s in segs:
            if not s.t_end > s.t_start:
                raise ValueError("detuning segments must have positive duration")
            if len(s.delta) != self.n_modes:
                raise ValueError("each detuning segment needs one value per mode")

    @property
    def duration(self) -> float:
        return self.t1 - self.t0

    @property
    def effective_couplings(self) -> np.ndarray:
        g = np.asarray(self.couplings, dtype=float)
        if self.coupling_scaling is CouplingScaling.INVERSE_SQRT_N:
            g = g / np.sqrt(self.n_atoms)
        return g

    @property
    def n_atomic_slots(self) -> int:
        if self.species is Species.TWO_LEVEL_PER_MODE:
            return self.n_atoms * self.n_modes
        return self.n_atoms

    def atomic_slot(self, atom: int, mode: int) -> int:
        """Index of the atomic transition that couples atom ``atom`` to mode ``mode``."""
        if self.species is Species.TWO_LEVEL_PER_MODE:
            return atom * self.n_modes + mode
        return atom

    def accumulated_phase(self, t: float) -> np.ndarray:
        """Integral of the detunings from t0 to ``t``, one value per mode."""
        phi = np.zeros(self.n_modes)
        for seg in self.detuning_schedule:
            if t <= seg.t_start:
                break
            phi += np.asarray(seg.delta) * (min(t, seg.t_end) - seg.t_start)
        return phi

    def same_physics(self, other: "ModelSpec") -> bool:
        return (
            self.n_atoms == other.n_atoms
            and self.n_modes == other.n_modes
            and self.species is other.species
            and self.couplings == other.couplings
            and self.coupling_scaling is other.coupling_scaling
            and np.array_equal(self.mode_functions, other.mode_functions)
            and self.detuning_schedule == other.detuning_schedule
            and self.t0 == other.t0
            and self.t1 == other.t1
        )

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (
            self.same_physics(other)
            and self.rng_seed == other.rng_seed
            and self.mode_function_kind is other.mode_function_kind
        )

    __hash__ = None

    def replace(self, **changes) -> "ModelSpec":
        """Copy with changed fields; generated mode functions follow N, M and the seed."""
        spec = {**self.__dict__, **changes}
        kind = ModeFunctionKind(spec["mode_function_kind"])
        if "mode_functions" not in changes and kind is not ModeFunctionKind.EXPLICIT:
            spec["mode_functions"] = resolve_mode_functions(
                kind, spec["n_modes"], spec["n_atoms"], spec["rng_seed"]
            )
        if "t1" in changes and "detuning_schedule" not in changes:
            spec["detuning_schedule"] = rescale_schedule(
                self.detuning_schedule, self.t0, self.t1, spec["t0"], spec["t1"]
            )
        return replace(self, **{k: v for k, v in spec.items() if k in self.__dataclass_fields__})


def rescale_schedule(
    schedule: Sequence[DetuningSegment], t0: float, t1: float, new_t0: float, new_t1: float
) -> tuple[DetuningSegment, ...]:
    """Stretch segment boundaries affinely onto a new window, keeping the detunings."""
    scale = (new_t1 - new_t0) / (t1 - t0)
    out = []
    for i, seg in enumerate(schedule):
        start = new_t0 if i == 0 else out[-1].t_end
        end = new_t1 if i == len(schedule) - 1 else new_t0 + (seg.t_end - t0) * scale
        out.append(DetuningSegment(start, end, seg.delta))
    return tuple(out)


def make_spec(
    n_atoms: int,
    n_modes: int,
    species: Species | str = Species.TWO_LEVEL_SHARED,
    g: float | Sequence[float] = 1.0,
    duration: float = 1.0,
    *,
    seed: int = 0,
    mode_functions: str | np.ndarray = "random",
    coupling_scaling: CouplingScaling | str = CouplingScaling.FIXED,
    detuning: Sequence[float] | None = None,
    t0: float = 0.0,
) -> ModelSpec:
    """Convenience constructor: one detuning segment, uniform or per-mode couplings."""
    couplings = [float(g)] * n_modes if np.isscalar(g) else list(g)
    if isinstance(mode_functions, str):
        kind = ModeFunctionKind(mode_functions)
        f = resolve_mode_functions(kind, n_modes, n_atoms, seed)
    else:
        kind = ModeFunctionKind.EXPLICIT
        f = np.asarray(mode_functions, dtype=complex)
    delta = tuple(detuning) if detuning is not None else (0.0,) * n_modes
    t1 = t0 + duration
    return ModelSpec(
        n_atoms=n_atoms,
        n_modes=n_modes,
        species=Species(species),
        couplings=tuple(couplings),
        coupling_scaling=CouplingScaling(coupling_scaling),
        mode_functions=f,
        detuning_schedule=(DetuningSegment(t0, t1, delta),),
        t0=t0,
        t1=t1,
        rng_seed=seed,
        mode_function_kind=kind,
    )


# --------------------------------------------------------------------------- #
#                              sector bases                                   #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SectorBasis:
    """Ordered basis of the sector with ``excitation_count`` total excitations.

    Each state is an occupation record ``(n_0, ..., n_{M-1}, a_0, ..., a_{S-1})``:
    photon numbers per mode followed by excitations per atomic slot. States are
    in descending lexicographic order, so photon-only states come first.
    """

    excitation_count: int
    n_modes: int
    n_slots: int
    species: Species
    states: tuple[tuple[int, ...], ...]
    index_of: dict

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def photons(self, i: int) -> tuple[int, ...]:
        return self.states[i][: self.n_modes]

    def atoms(self, i: int) -> tuple[int, ...]:
        return self.states[i][self.n_modes :]

    def photon_numbers(self) -> np.ndarray:
        """``(dim, M)`` integer array of photon occupations."""
        return np.array([s[: self.n_modes] for s in self.states], dtype=int).reshape(
            self.dim, self.n_modes
        )

    def ground_indices(self) -> list[int]:
        """Indices of states with every atomic slot in its ground state."""
        return [i for i, s in enumerate(self.states) if not any(s[self.n_modes :])]


def build_basis(spec: ModelSpec, n: int) -> SectorBasis:
    if n not in range(MAX_EXCITATIONS + 1):
        raise ValueError(f"excitation count must be in 0..{MAX_EXCITATIONS}, got {n}")
    m, slots = spec.n_modes, spec.n_atomic_slots
    cap = spec.species.level_cap
    records = set()
    for placement in itertools.combinations_with_replacement(range(m + slots), n):
        occ = [0] * (m + slots)
        for p in placement:
            occ[p] += 1
        if all(a <= cap for a in occ[m:]):
            records.add(tuple(occ))
    states = tuple(sorted(records, reverse=True))
    return SectorBasis(
        excitation_count=n,
        n_modes=m,
        n_slots=slots,
        species=spec.species,
        states=states,
        index_of={s: i for i, s in enumerate(states)},
    )
