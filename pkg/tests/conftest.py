import itertools

import numpy as np
import pytest

from photon_nogo.model import Species

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_acceptance():
    def record(label: str, passed: bool, detail: str = ""):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}".rstrip())

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def brute_force_sector(n_modes, n_slots, cap, n):
    """All occupation records with total ``n`` by exhaustive product enumeration."""
    ranges = [range(n + 1)] * n_modes + [range(min(cap, n) + 1)] * n_slots
    return {occ for occ in itertools.product(*ranges) if sum(occ) == n}


def tensor_interaction(spec):
    """V on the full truncated Fock space built from Kronecker products.

    Every photon mode keeps levels 0..2, every atomic slot 0..cap. Returns the
    operator and the list of occupation records labelling its basis.
    """
    m = spec.n_modes
    slots = spec.n_atomic_slots
    cap = spec.species.level_cap
    dims = [3] * m + [cap + 1] * slots

    def lowering(d, bosonic=True):
        op = np.zeros((d, d))
        for n in range(1, d):
            op[n - 1, n] = np.sqrt(n) if bosonic else 1.0
        return op

    def embed(op, pos):
        out = np.array([[1.0]])
        for i, d in enumerate(dims):
            out = np.kron(out, op if i == pos else np.eye(d))
        return out

    g = spec.effective_couplings
    total = int(np.prod(dims))
    v = np.zeros((total, total), dtype=complex)
    for k in range(m):
        a = embed(lowering(3), k)
        for j in range(spec.n_atoms):
            slot = m + spec.atomic_slot(j, k)
            s = embed(lowering(cap + 1, spec.species is Species.LINEAR_OSCILLATOR), slot)
            term = g[k] * spec.mode_functions[k, j] * s.T @ a
            v -= term + term.conj().T
    records = list(itertools.product(*[range(d) for d in dims]))
    return v, records


def restrict(op, records, basis):
    idx = [records.index(s) for s in basis.states]
    return op[np.ix_(idx, idx)]


def random_state(basis, rng):
    z = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    return z / np.linalg.norm(z)
