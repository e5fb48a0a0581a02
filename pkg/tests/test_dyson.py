import numpy as np
import pytest
from scipy import integrate

from photon_nogo.conditional import transfer_matrix
from photon_nogo.dyson import (
    DysonSingularError,
    KernelGrid,
    TimeGrid,
    born_series,
    born_terms,
    compose,
    coupling_structure,
    dyson_residual,
    dyson_solve,
    dyson_transfer_matrix,
    kernel_P,
    propagator_D,
    spectral_radius,
    transfer_from_dyson,
)
from photon_nogo.model import DetuningSegment, Species, make_spec


def setup(spec, n_steps=32):
    grid = TimeGrid.for_spec(spec, n_steps)
    return grid, kernel_P(spec, grid), propagator_D(grid, spec)


def test_time_grid():
    grid = TimeGrid(0.0, 2.0, 4)
    np.testing.assert_allclose(grid.nodes, [0, 0.5, 1, 1.5, 2])
    np.testing.assert_allclose(grid.weights, [0.25, 0.5, 0.5, 0.5, 0.25])
    assert grid.weights.sum() == 2.0
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0, 8)


def test_zero_coupling_kernel_vanishes():
    _, P, _ = setup(make_spec(2, 2, "linear_oscillator", 0.0, 1.0))
    assert not np.any(P.values)


def test_single_atom_kernel_values():
    spec = make_spec(1, 1, "linear_oscillator", 0.7, 1.0, mode_functions="uniform")
    grid, P, _ = setup(spec, 8)
    p = P.values[:, 0, :, 0]
    i, j = np.tril_indices(grid.n_nodes, -1)
    np.testing.assert_allclose(p[i, j], -0.49, atol=1e-15)
    np.testing.assert_allclose(np.diag(p), -0.245, atol=1e-15)
    assert not np.any(np.triu(p, 1))


def test_kernel_is_causal_with_detuning():
    spec = make_spec(3, 2, "two_level_shared", [1.0, 0.4], 1.5, seed=1, detuning=[0.8, -0.3])
    grid, P, D = setup(spec, 10)
    upper = np.triu_indices(grid.n_nodes, 1)
    assert not np.any(P.values[upper[0], :, upper[1], :])
    # modulus on the wedge is fixed by the coupling structure, phases by the detuning
    G = coupling_structure(spec)
    np.testing.assert_allclose(np.abs(P.values[5, :, 2, :]), np.abs(G), atol=1e-15)
    assert not np.any(D.values[:, 0, :, 1]) and not np.any(D.values[:, 1, :, 0])
    np.testing.assert_array_equal(np.abs(D.values[5, 0, 2, 0]), 1.0)


def test_per_mode_coupling_structure_is_diagonal():
    spec = make_spec(2, 3, "two_level_per_mode", 1.0, 1.0, seed=4)
    G = coupling_structure(spec)
    np.testing.assert_array_equal(G, np.diag(np.diag(G)))
    shared = coupling_structure(spec.replace(species=Species.TWO_LEVEL_SHARED))
    np.testing.assert_allclose(np.diag(G), np.diag(shared))
    np.testing.assert_allclose(shared, shared.conj().T, atol=1e-15)


def test_window_mismatch_rejected():
    spec = make_spec(1, 1, duration=1.0)
    with pytest.raises(ValueError):
        kernel_P(spec, TimeGrid(0.0, 2.0, 8))
    a = propagator_D(TimeGrid(0.0, 1.0, 8), spec)
    b = propagator_D(TimeGrid(0.0, 1.0, 16), spec)
    with pytest.raises(ValueError):
        compose(a, b)
    with pytest.raises(ValueError):
        dyson_solve(a, b)


def test_born_first_order_is_kernel_and_terms_telescope():
    spec = make_spec(2, 2, "linear_oscillator", 0.8, 1.0, seed=2, detuning=[0.3, 0.1])
    _, P, D = setup(spec, 16)
    np.testing.assert_array_equal(born_series(P, D, 1).values, P.values)
    terms = born_terms(P, D, 4)
    np.testing.assert_allclose(terms[2].matrix, compose(compose(P, D), terms[1]).matrix, atol=1e-14)
    diff = born_series(P, D, 4).matrix - born_series(P, D, 3).matrix
    np.testing.assert_allclose(diff, terms[3].matrix, atol=1e-14)
    with pytest.raises(ValueError):
        born_terms(P, D, 0)


def test_weak_coupling_third_order_is_close():
    spec = make_spec(1, 1, "linear_oscillator", 0.1, 1.0, mode_functions="uniform")
    _, P, D = setup(spec, 32)
    pi = dyson_solve(P, D)
    err = np.linalg.norm(born_series(P, D, 3).matrix - pi.matrix) / pi.norm()
    assert err < 1e-4


def test_born_errors_decrease_inside_radius():
    spec = make_spec(2, 2, "linear_oscillator", 0.6, 1.0, seed=0)
    _, P, D = setup(spec, 32)
    assert spectral_radius(P, D) < 1
    pi = dyson_solve(P, D)
    errs = [np.linalg.norm(born_series(P, D, n).matrix - pi.matrix) for n in range(1, 9)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_dyson_zero_kernel():
    _, P, D = setup(make_spec(2, 2, "linear_oscillator", 0.0, 1.0))
    pi = dyson_solve(P, D)
    assert not np.any(pi.values)
    assert dyson_residual(pi, P, D) == 0


@pytest.mark.parametrize("species", list(Species))
def test_dyson_residual_small(species):
    spec = make_spec(3, 2, species, [1.2, 0.7], 2.0, seed=6, detuning=[0.4, -0.9])
    _, P, D = setup(spec, 48)
    assert dyson_residual(dyson_solve(P, D), P, D) <= 1e-10


def test_singular_system_raises():
    grid = TimeGrid(0.0, 1.0, 6)
    spec = make_spec(1, 1, duration=1.0)
    D = propagator_D(grid, spec)
    w = np.diag(grid.weights)
    # P o D = I exactly, so I - P o D = 0
    P = KernelGrid.from_matrix(grid, 1, np.linalg.inv(w @ D.matrix @ w), "P")
    with pytest.raises(DysonSingularError):
        dyson_solve(P, D)
    assert issubclass(DysonSingularError, np.linalg.LinAlgError)


def test_transfer_without_interaction_is_unit_vector():
    spec = make_spec(1, 3, "linear_oscillator", 0.0, 1.0)
    grid, P, D = setup(spec, 8)
    pi = dyson_solve(P, D)
    for k in range(3):
        np.testing.assert_array_equal(transfer_from_dyson(pi, D, grid, k), np.eye(3)[k])
    with pytest.raises(ValueError):
        transfer_from_dyson(pi, D, grid, 3)


def test_single_oscillator_transfer_converges_at_second_order():
    spec = make_spec(1, 1, "linear_oscillator", 0.5, 1.0, mode_functions="uniform")
    exact = np.cos(0.5)
    errs = [abs(dyson_transfer_matrix(spec, n)[0][0, 0] - exact) for n in (16, 32, 64, 128)]
    assert errs[-1] < 1e-4
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.7 <= r <= 4.3 for r in ratios)


def second_order_oracle(spec, k_out, k_in):
    """Continuum -int_{t0}^{t1} dt int_{t0}^{t} ds G e^{-i phi_out(t) + i phi_in(s)} per unit g^2."""
    G = coupling_structure(spec) / spec.effective_couplings.max() ** 2

    def phase(t, k):
        return spec.accumulated_phase(t)[k]

    def part(fn):
        return integrate.dblquad(lambda s, t: fn(t, s), spec.t0, spec.t1, spec.t0, lambda t: t,
                                 epsabs=1e-12, epsrel=1e-12)[0]

    re = part(lambda t, s: np.cos(phase(s, k_in) - phase(t, k_out)))
    im = part(lambda t, s: np.sin(phase(s, k_in) - phase(t, k_out)))
    return -G[k_out, k_in] * (re + 1j * im)


@pytest.mark.parametrize("species", [Species.LINEAR_OSCILLATOR, Species.TWO_LEVEL_SHARED])
def test_second_order_expansion_matches_continuum_integral(species):
    spec = make_spec(2, 2, species, 1.0, 1.2, seed=3)
    spec = spec.replace(detuning_schedule=(
        DetuningSegment(0.0, 0.5, (0.7, -0.4)),
        DetuningSegment(0.5, 1.2, (-0.2, 1.1)),
    ))
    g = 1e-3
    small = spec.replace(couplings=(g, g))
    t_exact = transfer_matrix(small)
    for a in range(2):
        for b in range(2):
            oracle = second_order_oracle(spec, a, b)
            coeff = (t_exact[a, b] - (a == b)) / g**2
            assert abs(coeff - oracle) < 1e-5 * max(1, abs(oracle))
            # the discretized Dyson kernel at first Born order approaches the same integral
            grid = TimeGrid.for_spec(spec, 256)
            P = kernel_P(spec, grid)
            born = np.einsum("i,ij,j->", grid.weights, P.values[:, a, :, b], grid.weights)
            assert abs(born - oracle) < 1e-4


@pytest.mark.parametrize("n_atoms,n_modes", [(1, 1), (2, 2), (3, 2)])
def test_dyson_matches_exact_for_linear_species(n_atoms, n_modes):
    spec = make_spec(n_atoms, n_modes, "linear_oscillator", 1.0, 1.0, seed=9, detuning=[0.3] * n_modes)
    t_dyson, res = dyson_transfer_matrix(spec, 128)
    assert res <= 1e-10
    np.testing.assert_allclose(t_dyson, transfer_matrix(spec), atol=1e-3)


def test_small_radius_does_not_bound_low_order_born_error():
    # the discretized Volterra map is nearly nilpotent: its radius stays tiny even at strong
    # coupling, where the series still converges but only factorially
    spec = make_spec(5, 2, "linear_oscillator", 2.0, 1.0, seed=5)
    _, P, D = setup(spec, 48)
    assert spectral_radius(P, D) < 0.05
    pi = dyson_solve(P, D)
    err = [np.linalg.norm(born_series(P, D, n).matrix - pi.matrix) / pi.norm() for n in (8, 24)]
    assert err[0] > 1e-4 and err[1] < 1e-8
