import itertools
from dataclasses import replace
from math import comb

import numpy as np
import pytest
from scipy import linalg

from diag import (LatticeBox, SymmetricBasis, build_hamiltonian, discrete_scattering_energy,
                  green_function_unit, ground_state, match_scattering_energy, neumann_gap,
                  symmetrizer, tensor_product_hamiltonian, universality_experiment)
from potentials import RadialProfile, permuted_points, radial_metric, zero_potential
from utils import (AsymmetricPotentialError, ConfigError, DEFAULT_CONFIG, DimensionCapError,
                   ParameterWindowError, deep_merge)


def metric_potential(kind, height, radius):
    params = {"height": height, "radius": radius}
    return radial_metric(RadialProfile(kind, params)).with_symmetry_flag()


@pytest.fixture
def contact():
    return metric_potential("wall", 7.0, 0.5)


@pytest.fixture
def tent_v():
    return metric_potential("tent", 5.0, 1.8)


@pytest.fixture
def weak_wall():
    return metric_potential("wall", 0.1, 1.2)


# -------------------------------
# Box
# -------------------------------
def test_neumann_gap_matches_one_body_spectrum():
    box = LatticeBox(4, 1.0, "neumann")
    values = np.linalg.eigvalsh(box.one_body_1d().toarray())
    assert values[0] == pytest.approx(0.0, abs=1e-12)
    assert values[1] == pytest.approx(neumann_gap(4, 1.0))
    assert neumann_gap(64, 1.0 / 64) == pytest.approx(np.pi**2, rel=1e-3)


def test_dirichlet_ground_energy():
    s = 4
    values = np.linalg.eigvalsh(LatticeBox(s, 0.5, "dirichlet").one_body().toarray())
    assert values[0] == pytest.approx(3.0 * 4.0 * np.sin(np.pi / (2 * (s + 1))) ** 2 / 0.25)


def test_box_validation():
    with pytest.raises(ConfigError):
        LatticeBox(4, 1.0, "robin")
    with pytest.raises(ParameterWindowError):
        LatticeBox(2, 1.0)


def test_neighbor_tables_and_minimum_image():
    assert np.all(LatticeBox(4, boundary="periodic").neighbor_table() >= 0)
    table = LatticeBox(4, boundary="neumann").neighbor_table()
    assert np.count_nonzero(table[0] < 0) == 3
    box = LatticeBox(4, boundary="periodic")
    assert box.displacement(np.array([0.5, 0.5, 0.5]), np.array([3.5, 0.5, 0.5])).tolist() == [1.0, 0.0, 0.0]

# -------------------------------
# Basis
# -------------------------------
@pytest.mark.parametrize("s,n", [(3, 1), (3, 3), (4, 3), (3, 4)])
def test_basis_dimension_and_ranking(s, n, rng):
    basis = SymmetricBasis(n, s**3)
    assert basis.dimension == comb(s**3 + n - 1, n)
    sample = rng.integers(0, basis.dimension, size=min(10_000, basis.dimension))
    assert np.array_equal(basis.rank(basis.states[sample]), sample)


def test_basis_is_lexicographic():
    basis = SymmetricBasis(3, 27)
    states = [tuple(row) for row in basis.states.tolist()]
    assert states == sorted(states)
    assert basis.index_of_occupation(basis.occupation(17)) == 17

# -------------------------------
# Hamiltonian
# -------------------------------
def test_hamiltonian_is_exactly_symmetric(tent_v):
    for boundary in ("neumann", "dirichlet", "periodic"):
        H = build_hamiltonian(LatticeBox(3, 1.0, boundary), 3, tent_v).matrix
        assert abs(H - H.T).max() == 0.0


@pytest.mark.parametrize("boundary", ["neumann", "dirichlet"])
def test_projection_of_tensor_product_hamiltonian(tent_v, boundary):
    box = LatticeBox(3, 1.0, boundary)
    H = build_hamiltonian(box, 3, tent_v)
    P = symmetrizer(H.basis)
    projected = (P.T @ tensor_product_hamiltonian(box, 3, tent_v) @ P).toarray()
    assert np.allclose(projected, H.matrix.toarray(), atol=1e-12, rtol=0)
    x = np.random.default_rng(1).standard_normal(H.dimension)
    assert np.allclose(H.matrix @ x, H.matrix.toarray() @ x, atol=1e-12, rtol=0)


def test_contact_interaction_counts_coincidences(contact):
    for n in (3, 4):
        H = build_hamiltonian(LatticeBox(3), n, contact)
        occupations = np.stack([np.bincount(row, minlength=27) for row in H.basis.states])
        triples = (occupations * (occupations - 1) * (occupations - 2) // 6).sum(axis=1)
        assert np.allclose(H.interaction, 7.0 * triples, atol=0, rtol=0)


def test_interaction_ignores_argument_order(tent_v):
    permuted = replace(tent_v, evaluator=lambda p: tent_v.evaluator(permuted_points(np.asarray(p))[1]))
    box = LatticeBox(3)
    a = build_hamiltonian(box, 3, tent_v).matrix
    b = build_hamiltonian(box, 3, permuted).matrix
    assert abs(a - b).max() <= 1e-12


def test_hamiltonian_preconditions(tent_v):
    with pytest.raises(AsymmetricPotentialError):
        build_hamiltonian(LatticeBox(3), 3, tent_v.with_symmetry_flag(False))
    tiny = deep_merge(DEFAULT_CONFIG, {"runtime": {"mem_cap_bytes": 1000}})
    with pytest.raises(DimensionCapError):
        build_hamiltonian(LatticeBox(4), 3, tent_v, tiny)

# -------------------------------
# Ground state
# -------------------------------
def test_single_particle_neumann_ground_state(tent_v):
    result = ground_state(build_hamiltonian(LatticeBox(4), 1, tent_v))
    assert result.energy == pytest.approx(0.0, abs=1e-10)
    assert np.allclose(result.vector, 1.0 / 8.0, atol=1e-8)
    assert result.method == "dense"


def test_two_particles_do_not_interact(tent_v):
    H = build_hamiltonian(LatticeBox(3), 2, tent_v)
    assert np.all(H.interaction == 0.0)
    assert ground_state(H).energy == pytest.approx(0.0, abs=1e-10)


def test_ground_state_bounds_and_dense_agreement(tent_v):
    H = build_hamiltonian(LatticeBox(3), 3, tent_v)
    result = ground_state(H)
    assert result.method == "eigsh"
    dense = linalg.eigh(H.matrix.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
    assert result.energy == pytest.approx(dense, rel=1e-9)
    ones = np.ones(H.dimension)
    assert 0.0 <= result.energy <= ones @ (H.matrix @ ones) / H.dimension
    assert result.residual <= 1e-8 * max(abs(result.energy), H.matrix.diagonal().max())


def test_symmetric_sector_holds_the_ground_state(tent_v):
    box = LatticeBox(3)
    symmetric = ground_state(build_hamiltonian(box, 3, tent_v)).energy
    full = ground_state(tensor_product_hamiltonian(box, 3, tent_v)).energy
    assert symmetric == pytest.approx(full, rel=1e-8)


@pytest.mark.slow
def test_symmetric_sector_holds_the_ground_state_s4(tent_v):
    box = LatticeBox(4)
    symmetric = ground_state(build_hamiltonian(box, 3, tent_v)).energy
    full = ground_state(tensor_product_hamiltonian(box, 3, tent_v)).energy
    assert symmetric == pytest.approx(full, rel=1e-8)

# -------------------------------
# Discrete scattering energy
# -------------------------------
def test_green_function_far_field():
    m = np.array([[12, 0, 0, 0, 0, 0]])
    quad = (2.0 / 3.0) * 144.0
    continuum = 1.0 / (4.0 * np.pi**3 * np.sqrt(27.0) * quad**2)
    assert green_function_unit(m)[0] == pytest.approx(continuum, rel=0.1)
    along = green_function_unit(np.array([[k, 0, 0, 0, 0, 0] for k in range(6)]))
    assert np.all(np.diff(along) < 0)
    assert np.all(along > 0)


def test_zero_potential_has_zero_discrete_energy():
    assert discrete_scattering_energy(zero_potential(6), 1.0).value == 0.0


def test_single_site_potential_closed_form(contact):
    G0 = green_function_unit(np.zeros((1, 6), dtype=int))[0]
    est = discrete_scattering_energy(contact, 1.0)
    assert est.support_points == 1
    assert est.value == pytest.approx(7.0 / (1.0 + 7.0 * G0), rel=1e-12)


def test_discrete_energy_scaling(tent_v):
    b1 = discrete_scattering_energy(tent_v, 1.0, refine=False).value
    b2 = discrete_scattering_energy(tent_v.rescaled(2.0), 2.0, refine=False).value
    assert b2 == pytest.approx(16.0 * b1, rel=1e-10)


def test_weak_coupling_approaches_born_value():
    weak = metric_potential("wall", 1e-5, 1.2)
    est = discrete_scattering_energy(weak, 1.0, refine=False)
    born = 19 * 1e-5
    assert est.support_points == 19
    assert est.value <= born
    assert est.value == pytest.approx(born, rel=1e-3)


def test_matching_tunes_height(weak_wall):
    target = discrete_scattering_energy(weak_wall, 1.0, refine=False).value
    height, V = match_scattering_energy(lambda p: metric_potential("tent", p, 1.8), target, (1e-3, 10.0), 1.0)
    assert 0 < height < 10.0
    assert discrete_scattering_energy(V, 1.0, refine=False).value == pytest.approx(target, rel=1e-8)

# -------------------------------
# Universality
# -------------------------------
def test_universality_in_periodic_box(weak_wall):
    box = LatticeBox(4, 1.0, "periodic")
    target = discrete_scattering_energy(weak_wall, 1.0, refine=False).value
    _, tent = match_scattering_energy(lambda p: metric_potential("tent", p, 1.8), target, (1e-3, 10.0), 1.0)
    report = universality_experiment(weak_wall, tent, box, 3)
    assert report["Y_disc"] <= 0.1
    assert report["relative_difference"] <= 0.1
    assert report["relative_difference"] <= report["threshold"]
    for ratio in report["ratio"]:
        assert 0.85 <= ratio <= 1.15


def test_identical_potentials_give_identical_energies(weak_wall):
    report = universality_experiment(weak_wall, weak_wall, LatticeBox(4, 1.0, "periodic"), 3)
    assert report["E0"][0] == report["E0"][1]
    assert report["relative_difference"] == 0.0


def test_universality_preconditions(weak_wall, tent_v):
    box = LatticeBox(4, 1.0, "periodic")
    with pytest.raises(ParameterWindowError):
        universality_experiment(weak_wall, weak_wall, box, 5)
    with pytest.raises(ParameterWindowError):
        universality_experiment(weak_wall, tent_v, box, 3)


@pytest.mark.slow
def test_universality_at_lower_density(weak_wall):
    box = LatticeBox(6, 1.0, "periodic")
    target = discrete_scattering_energy(weak_wall, 1.0, refine=False).value
    _, tent = match_scattering_energy(lambda p: metric_potential("tent", p, 1.8), target, (1e-3, 10.0), 1.0)
    report = universality_experiment(weak_wall, tent, box, 3)
    assert report["Y_disc"] < 0.03
    assert report["relative_difference"] <= report["threshold"]


def test_unordered_triples_equal_a_sixth_of_ordered(tent_v, rng):
    positions = rng.uniform(0.0, 1.0, size=(5, 3))

    def value(i, j, k):
        point = np.concatenate([positions[i] - positions[j], positions[i] - positions[k]])
        return float(tent_v(point[None, :])[0])

    unordered = sum(value(*t) for t in itertools.combinations(range(5), 3))
    ordered = sum(value(*t) for t in itertools.permutations(range(5), 3))
    assert unordered > 0
    assert unordered == pytest.approx(ordered / 6.0, rel=1e-12)
