"""Linear-response kernels on a uniform time grid and the Dyson equation.

Grid points are pairs ``(tau_i, k)``; a kernel ``K`` is stored as a
``(T, M, T, M)`` array whose first pair is the later (emission) point.

Conventions, fixed here and checked against exact dynamics in the tests:

* ``P((t, k1), (s, k2)) = -g_k1 g_k2 sum_j f*_k1(r_j) f_k2(r_j) theta(t - s)
  exp(-i phi_k1(t) + i phi_k2(s))``: a photon absorbed from mode k2 at s and
  re-emitted into k1 at t. ``phi`` is the accumulated detuning.
* ``D((t, k), (s, k')) = delta_kk' theta(t - s)``: the free photon carries
  no phase in the interaction picture.
* ``theta(0) = 1/2``; integrals use trapezoidal weights, so a composition is
  ``(A o B) = A W B`` with ``W`` the diagonal weight matrix.
* ``Pi = P + P o D o Pi`` and the conditional one-photon transfer is
  ``T[k', k] = delta_k'k + sum_ij w_i w_j Pi((tau_i, k'), (tau_j, k))``; the
  external legs carry no half-step because t0 and t1 lie strictly outside
  the interaction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, Species

SINGULAR_COND = 1e12


class DysonSingularError(np.linalg.LinAlgError):
    """``I - P o D`` is singular or numerically ill-posed on this grid."""


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if not self.t1 > self.t0:
            raise ValueError("t1 must be larger than t0")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.dt)
        w[[0, -1]] = self.dt / 2
        return w

    @classmethod
    def for_spec(cls, spec: ModelSpec, n_steps: int) -> "TimeGrid":
        return cls(spec.t0, spec.t1, n_steps)


@dataclass(frozen=True)
class KernelGrid:
    grid: TimeGrid
    values: np.ndarray  # (T, M, T, M)
    kind: str = "kernel"

    @property
    def n_modes(self) -> int:
        return self.values.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        n = self.grid.n_nodes * self.n_modes
        return self.values.reshape(n, n)

    @classmethod
    def from_matrix(cls, grid: TimeGrid, n_modes: int, matrix: np.ndarray, kind: str) -> "KernelGrid":
        t = grid.n_nodes
        return cls(grid, np.asarray(matrix).reshape(t, n_modes, t, n_modes), kind)

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))


def _step(grid: TimeGrid) -> np.ndarray:
    i = np.arange(grid.n_nodes)
    theta = (i[:, None] > i[None, :]).astype(float)
    np.fill_diagonal(theta, 0.5)
    return theta


def _check_window(spec: ModelSpec, grid: TimeGrid):
    if grid.t0 != spec.t0 or grid.t1 != spec.t1:
        raise ValueError("time grid and spec must share the window [t0, t1]")


def coupling_structure(spec: ModelSpec) -> np.ndarray:
    """``G[k1, k2] = g_k1 g_k2 sum_j f*_k1(r_j) f_k2(r_j)`` (mode-diagonal for per-mode transitions)."""
    g = spec.effective_couplings
    f = spec.mode_functions
    overlap = f.conj() @ f.T
    if spec.species is Species.TWO_LEVEL_PER_MODE:
        overlap = np.diag(np.diag(overlap))
    return np.outer(g, g) * overlap


def kernel_P(spec: ModelSpec, grid: TimeGrid) -> KernelGrid:
    _check_window(spec, grid)
    phi = np.array([spec.accumulated_phase(t) for t in grid.nodes])  # (T, M)
    emit = np.exp(-1j * phi)
    absorb = np.exp(1j * phi)
    theta = _step(grid)
    values = -np.einsum("ab,ij,ia,jb->iajb", coupling_structure(spec), theta, emit, absorb)
    return KernelGrid(grid, values, "P")


def propagator_D(grid: TimeGrid, spec: ModelSpec) -> KernelGrid:
    m = spec.n_modes
    values = np.einsum("ij,ab->iajb", _step(grid), np.eye(m)).astype(complex)
    return KernelGrid(grid, values, "D")


def _weights(k: KernelGrid) -> np.ndarray:
    return np.repeat(k.grid.weights, k.n_modes)


def compose(a: KernelGrid, b: KernelGrid, kind: str = "kernel") -> KernelGrid:
    """Grid contraction ``(a o b)(x, y) = sum_z a(x, z) w_z b(z, y)``."""
    if a.grid != b.grid or a.n_modes != b.n_modes:
        raise ValueError("kernels live on different grids")
    return KernelGrid.from_matrix(a.grid, a.n_modes, (a.matrix * _weights(a)) @ b.matrix, kind)


def _pd_matrix(P: KernelGrid, D: KernelGrid) -> np.ndarray:
    return compose(P, D).matrix * _weights(P)


def spectral_radius(P: KernelGrid, D: KernelGrid) -> float:
    """Spectral radius of the Born iteration map ``X -> P o D o X``."""
    return float(np.max(np.abs(np.linalg.eigvals(_pd_matrix(P, D)))))


def born_terms(P: KernelGrid, D: KernelGrid, order: int) -> list[KernelGrid]:
    """The first ``order`` terms ``P, P o D o P, ...`` of the perturbation series."""
    if order < 1:
        raise ValueError("order must be >= 1")
    pd = _pd_matrix(P, D)
    terms = [P.matrix]
    for _ in range(order - 1):
        terms.append(pd @ terms[-1])
    return [KernelGrid.from_matrix(P.grid, P.n_modes, t, "Pi_term") for t in terms]


def born_series(P: KernelGrid, D: KernelGrid, order: int) -> KernelGrid:
    total = sum(t.matrix for t in born_terms(P, D, order))
    return KernelGrid.from_matrix(P.grid, P.n_modes, total, f"Pi_{order}")


def dyson_solve(P: KernelGrid, D: KernelGrid) -> KernelGrid:
    """Solve ``(I - P o D) Pi = P`` densely."""
    if P.grid != D.grid or P.n_modes != D.n_modes:
        raise ValueError("P and D live on different grids")
    a = np.eye(P.matrix.shape[0]) - _pd_matrix(P, D)
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise DysonSingularError(f"I - P o D is ill-conditioned (cond = {cond:.3g})")
    try:
        pi = np.linalg.solve(a, P.matrix)
    except np.linalg.LinAlgError as exc:
        raise DysonSingularError(str(exc)) from exc
    return KernelGrid.from_matrix(P.grid, P.n_modes, pi, "Pi")


def dyson_residual(Pi: KernelGrid, P: KernelGrid, D: KernelGrid) -> float:
    """Relative residual ``||Pi - P - P o D o Pi|| / ||P||`` (0 when P = 0 and Pi = 0)."""
    r = Pi.matrix - P.matrix - _pd_matrix(P, D) @ Pi.matrix
    ref = P.norm()
    rn = float(np.linalg.norm(r))
    return rn / ref if ref > 0 else rn


def transfer_from_dyson(Pi: KernelGrid, D: KernelGrid, grid: TimeGrid, k: int) -> np.ndarray:
    """Dyson prediction of the one-photon transfer vector for a photon entering in mode ``k``."""
    m = Pi.n_modes
    if not 0 <= k < m:
        raise ValueError(f"mode index {k} out of range for {m} modes")
    w = grid.weights
    # causal-wedge value of D between t0 (resp. t1) and the grid, per mode
    leg = np.real_if_close(np.diagonal(D.values[-1, :, 0, :]))
    out = np.einsum("i,iaj,j->a", w, Pi.values[:, :, :, k], w) * leg * leg[k]
    out = out.astype(complex)
    out[k] += 1.0
    return out


def dyson_transfer_matrix(spec: ModelSpec, n_steps: int) -> tuple[np.ndarray, float]:
    """Full transfer matrix from the Dyson route plus the solve residual."""
    grid = TimeGrid.for_spec(spec, n_steps)
    P = kernel_P(spec, grid)
    D = propagator_D(grid, spec)
    Pi = dyson_solve(P, D)
    cols = [transfer_from_dyson(Pi, D, grid, k) for k in range(spec.n_modes)]
    return np.stack(cols, axis=1), dyson_residual(Pi, P, D)
