import numpy as np
import pytest

from diag import LatticeBox
from potentials import RadialProfile, radial_metric, zero_potential
from upperbound import (UpperParameters, analytic_box_energy, assemble_thermo_upper, box_upper_energy, build_cutoff,
                        calibrated_constant, cutoff_1d, dirichlet_box_bound, gp_functional,
                        product_state_energy, upper_exponents)
from utils import (CrossTermError, DEFAULT_CONFIG, GridResolutionError, ParameterWindowError,
                   PreconditionError, deep_merge)

SWEEP = (0.2, 0.1, 0.05)


@pytest.fixture
def metric_wall():
    profile = RadialProfile("wall", {"height": 10.0, "radius": 1.0})
    return radial_metric(profile).with_symmetry_flag()

# -------------------------------
# Cutoff profile
# -------------------------------
def test_cutoff_shape():
    x = np.linspace(-0.5, 0.5, 2001)
    phi = cutoff_1d(x, 0.2)
    assert np.all((phi >= 0) & (phi <= 1))
    assert np.all(phi[np.abs(x) <= 0.39] == 1.0)
    assert phi[0] == 0.0 and phi[-1] == 0.0


def test_ramp_integrals():
    profile = build_cutoff(0.2, 64)
    # int_0^1 S'^2 = 10/7 on each of the two ramps of width 0.1
    Q0 = profile.raw_l2_sq ** (1.0 / 3.0)
    assert profile.grad_sq * Q0 == pytest.approx(3.0 * 2.0 * (10.0 / 7.0) / 0.1, rel=1e-5)
    assert Q0 == pytest.approx(0.8 + 0.2 * 0.391775, rel=1e-5)


def test_interior_volume_bounds_sixth_power():
    assert build_cutoff(0.2).raw_l6 >= 0.8**3


def test_gradient_constant_is_stable():
    constants = [build_cutoff(eps).grad_constant for eps in SWEEP]
    mean = np.mean(constants)
    assert all(abs(c - mean) <= 0.1 * mean for c in constants)
    assert max(constants) <= 3.0 * 40.0 / 7.0 / (1.0 - 0.62 * 0.2)


def test_c_phi_is_scale_free():
    c = [build_cutoff(eps).c_phi for eps in SWEEP]
    assert c == pytest.approx([c[0]] * 3, rel=1e-12)
    # per axis eps sup|phi_1'| = 2 * 15/8
    assert 3.75 <= c[0] <= np.sqrt(3.0) * 3.75 + 1e-12
    lap = [build_cutoff(eps).c_phi_laplacian for eps in SWEEP]
    assert lap == pytest.approx([lap[0]] * 3, rel=1e-12)
    assert lap[0] <= 3.0 * 4.0 * 10.0 / np.sqrt(3.0) + 1e-9


def test_h2_norm_bound():
    h2 = [build_cutoff(eps).h2_constant for eps in SWEEP]
    assert all(0 < c < 10.0 for c in h2)
    assert h2[0] > h2[1] > h2[2]


def test_cutoff_preconditions():
    with pytest.raises(ParameterWindowError):
        build_cutoff(0.5)
    with pytest.raises(GridResolutionError):
        build_cutoff(0.1, 4)


def test_calibrated_constant():
    C = calibrated_constant()
    assert 130.0 < C < 160.0
    measured = [build_cutoff(eps).lemma_constant for eps in (0.4, 0.2, 0.1, 0.05)]
    assert C == pytest.approx(measured[0])
    assert measured == sorted(measured, reverse=True)
    override = deep_merge(DEFAULT_CONFIG, {"upper": {"lemma_constant": 7.0}})
    assert calibrated_constant(override) == 7.0

# -------------------------------
# Dirichlet box bound
# -------------------------------
def test_zero_interaction_costs_confinement_only():
    bound = dirichlet_box_bound(10, zero_potential(6), 0.0)
    assert bound.gp_interaction == 0.0
    assert bound.gp_value == bound.gp_kinetic
    assert bound.gp_kinetic == pytest.approx(build_cutoff(0.4).grad_sq)


def test_display_at_k_ten(metric_wall):
    K = 10.0
    bound = dirichlet_box_bound(1e6, metric_wall, K**2)
    assert bound.epsilon == pytest.approx(0.1)
    profile = build_cutoff(0.1)
    assert bound.gp_interaction == pytest.approx(100.0 / 6.0 * profile.l6)
    relative = bound.gp_value / (100.0 / 6.0) - 1.0
    assert relative * K == pytest.approx(profile.lemma_constant)
    assert bound.gp_value <= bound.leading + bound.lemma_term


def test_remainder_decays_with_n(metric_wall):
    small = dirichlet_box_bound(1e3, metric_wall, 4.0)
    large = dirichlet_box_bound(8e3, metric_wall, 4.0)
    assert large.remainder == pytest.approx(small.remainder / 2.0)
    assert large.value < small.value
    assert large.value - large.remainder == pytest.approx(4.0 / 6.0 * (1.0 + large.constant / 2.0))


def test_gp_functional_is_monotone_in_b():
    profile = build_cutoff(0.1)
    values = [gp_functional(profile, b) for b in np.linspace(0.0, 50.0, 11)]
    assert np.all(np.diff(values) > 0)


def test_box_bound_rejects_bad_input(metric_wall):
    with pytest.raises(PreconditionError):
        dirichlet_box_bound(0, metric_wall, 1.0)

# -------------------------------
# Thermodynamic assembly
# -------------------------------
def test_upper_exponents_are_positive():
    for alpha in np.arange(1e-4, 2.0 / 75.0, 1e-4):
        assert min(upper_exponents(alpha)) > 0


def test_upper_parameters():
    p = UpperParameters(rho=1e-6, b_M=1.0, alpha=1.0 / 75.0, R0=1.0)
    assert p.K == pytest.approx(1e6 ** (1.0 / 75.0))
    assert p.density_mismatch <= 2.0 * p.Y ** (2.0 - 3.0 * p.alpha)
    assert p.ell == pytest.approx(p.a * np.sqrt(p.n / p.K))
    for alpha in (0.0, 2.0 / 75.0, 0.1):
        with pytest.raises(ParameterWindowError):
            UpperParameters(rho=1e-6, b_M=1.0, alpha=alpha)


def test_error_powers_at_reference_point(metric_wall):
    p = UpperParameters(rho=1e-6, b_M=1.0, alpha=1.0 / 75.0, R0=metric_wall.range_R0)
    report = assemble_thermo_upper(p, metric_wall)
    powers = list(report.error_powers.values())
    assert powers[0] == max(powers)
    assert powers[1] == pytest.approx(p.Y ** (1.0 / 3.0))


def test_upper_bound_approaches_leading(metric_wall):
    b = 2.0
    excess = []
    for Y in (1e-40, 1e-80):
        p = UpperParameters(rho=Y / b**0.75, b_M=b, alpha=1.0 / 75.0, R0=metric_wall.range_R0)
        report = assemble_thermo_upper(p, metric_wall)
        assert report.ratio_to_leading > 1.0
        excess.append(report.ratio_to_leading - 1.0)
    assert excess[1] / excess[0] == pytest.approx(1e-40 ** (1.0 / 75.0), rel=1e-6)


@pytest.mark.parametrize("Y", [1e-3, 1e-6])
def test_upper_bound_sits_above_leading(metric_wall, Y):
    p = UpperParameters(rho=Y, b_M=1.0, alpha=0.02, R0=metric_wall.range_R0)
    report = assemble_thermo_upper(p, metric_wall)
    assert report.e_upper >= report.leading_density
    assert report.packing_factor < 1.0


def test_packing_factor_without_range():
    p = UpperParameters(rho=1e-6, b_M=1.0, alpha=0.01, R0=0.0)
    report = assemble_thermo_upper(p, zero_potential(6))
    assert report.packing_factor == 1.0
    assert report.packing_factor_display == 1.0


def test_corridor_must_cover_range(metric_wall):
    p = UpperParameters(rho=1e-6, b_M=1.0, alpha=0.01, R0=0.5 * metric_wall.range_R0)
    with pytest.raises(CrossTermError):
        assemble_thermo_upper(p, metric_wall)

# -------------------------------
# Product states
# -------------------------------
def test_product_state_single_box():
    assert product_state_energy(3.0, 2.0, 0.5, 1) == pytest.approx(3.0 / 27.0)


def test_product_state_is_intensive():
    one = product_state_energy([5.0], 4.0, 0.25, 1)
    for M in (2, 3, 5):
        assert product_state_energy(5.0, 4.0, 0.25, M) == pytest.approx(one, rel=1e-14)
        assert product_state_energy(np.full(M**3, 5.0), 4.0, 0.25, M) == pytest.approx(one, rel=1e-14)


def test_product_state_preconditions():
    with pytest.raises(CrossTermError):
        product_state_energy(1.0, 4.0, 0.5, 2, interaction_range=1.0)
    with pytest.raises(PreconditionError):
        product_state_energy([1.0, 2.0], 4.0, 0.5, 2)


def test_box_upper_energy_routes(metric_wall):
    box = LatticeBox(3, 1.0, "neumann")
    energy, route = box_upper_energy(box, 3, metric_wall, 1.0)
    assert route == "diagonalized"
    assert energy > 0
    tiny = deep_merge(DEFAULT_CONFIG, {"runtime": {"mem_cap_bytes": 1000}})
    fallback, route = box_upper_energy(box, 3, metric_wall, 1.0, tiny)
    assert route == "analytic"
    assert fallback > energy
    analytic, bound = analytic_box_energy(3, box.side, metric_wall, 1.0, tiny)
    assert fallback == pytest.approx(analytic)
    assert analytic == pytest.approx(3.0 / box.side**2 * bound.value)
