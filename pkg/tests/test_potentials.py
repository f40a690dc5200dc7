import numpy as np
import pytest

from potentials import (RadialProfile, ball_volume, from_callable, identity_metric,
                        load_potential_file, metric_matrix, product_potential, pullback_by_metric,
                        radial_euclidean, radial_metric, sample_ball, symmetrize, tabulated_grid,
                        validate_symmetry, write_grid_file)
from utils import ConfigError, PreconditionError


@pytest.fixture
def tent():
    return RadialProfile("tent", {"height": 3.0, "radius": 1.0})


# -------------------------------
# Metric
# -------------------------------
def test_metric_square_and_determinant():
    M = metric_matrix()
    assert np.allclose(M.block @ M.block, 0.5 * np.array([[2.0, 1.0], [1.0, 2.0]]), atol=1e-12, rtol=0)
    assert np.allclose(M.block_squared, 0.5 * np.array([[2.0, 1.0], [1.0, 2.0]]), atol=1e-12, rtol=0)
    assert M.det_M == pytest.approx(0.75**1.5, abs=1e-12)
    assert np.linalg.det(M.full) == pytest.approx(np.prod(np.linalg.eigvalsh(M.full)), abs=1e-12)
    assert np.linalg.det(M.full) == pytest.approx(0.649519052838329, abs=1e-12)


def test_metric_eigenvalues_and_symmetric_direction():
    M = metric_matrix()
    assert np.allclose(np.sort(M.eigenvalues), [np.sqrt(0.5), np.sqrt(1.5)], atol=1e-14)
    e = np.array([0.0, 0.6, 0.8])
    v = np.concatenate([e, e])
    assert np.allclose(M.apply(v), np.sqrt(1.5) * v, atol=1e-14)
    assert np.allclose(M.full @ v, M.apply(v), atol=1e-14)
    assert np.allclose(M.apply_inverse(M.apply(v)), v, atol=1e-14)


# -------------------------------
# Profiles and norms
# -------------------------------
def test_profile_closed_form_norms_match_quadrature():
    wall = RadialProfile("wall", {"height": 2.0, "radius": 1.5})
    assert wall.l1_norm(3) == pytest.approx(2.0 * 4.0 / 3.0 * np.pi * 1.5**3)
    assert RadialProfile("annulus", {"height": 1.0, "inner": 1.0, "outer": 2.0}).l1_norm(6) == \
        pytest.approx(ball_volume(6) * (2.0**6 - 1.0))
    tent = RadialProfile("tent", {"height": 1.0, "radius": 1.0})
    assert tent.l1_norm(3) == pytest.approx(np.pi / 3.0)


def test_unknown_profile_is_config_error():
    with pytest.raises(ConfigError):
        RadialProfile("spike", {"height": 1.0})


def test_metric_radial_l1_matches_monte_carlo(tent, rng):
    V = radial_metric(tent)
    pts = sample_ball(rng, 400_000, 6, V.range_R0)
    estimate = V(pts).mean() * ball_volume(6) * V.range_R0**6
    assert estimate == pytest.approx(V.l1_norm, rel=0.03)


def test_product_l1_matches_monte_carlo(tent, rng):
    V = product_potential(tent)
    pts = sample_ball(rng, 400_000, 6, V.range_R0)
    values = V(pts)
    assert np.all(values >= 0)
    assert values.max() <= V.sup_norm
    estimate = values.mean() * ball_volume(6) * V.range_R0**6
    assert estimate == pytest.approx(V.l1_norm, rel=0.03)


def test_support_containment(tent, rng):
    V = product_potential(tent)
    pts = sample_ball(rng, 20_000, 6, 3.0 * V.range_R0)
    outside = np.linalg.norm(pts, axis=1) > V.range_R0
    assert np.all(V(pts[outside]) == 0.0)


def test_rescaled_potential_values_and_norms(tent, rng):
    V = radial_metric(tent)
    W = V.rescaled(2.0)
    pts = sample_ball(rng, 1000, 6, V.range_R0)
    assert np.allclose(W(2.0 * pts), V(pts) / 4.0, rtol=1e-12, atol=1e-14)
    assert W.range_R0 == pytest.approx(2.0 * V.range_R0)
    assert W.sup_norm == pytest.approx(V.sup_norm / 4.0)
    assert W.l1_norm == pytest.approx(16.0 * V.l1_norm)


# -------------------------------
# Symmetry
# -------------------------------
def test_product_potential_is_symmetric(tent, rng):
    report = validate_symmetry(product_potential(tent), sample_count=5000, rng=rng)
    assert report.passed
    assert report.potential.symmetry_flag
    assert report.worst_sample is None


def test_asymmetric_potential_fails_with_sample(rng):
    def first_norm(p):
        return np.linalg.norm(p[..., :3], axis=-1) * (np.linalg.norm(p, axis=-1) <= 1.0)

    V = from_callable(first_norm, 6, 1.0, name="first-norm", rng=rng)
    report = validate_symmetry(V, sample_count=2000, rng=rng)
    assert not report.passed
    assert report.worst_violation > 1e-3
    assert len(report.worst_sample) == 6
    assert not report.potential.symmetry_flag


def test_metric_radial_is_symmetric_but_euclidean_radial_is_not(tent, rng):
    assert validate_symmetry(radial_metric(tent), sample_count=2000, rng=rng).passed
    assert not validate_symmetry(radial_euclidean(tent, 6), sample_count=2000, rng=rng).passed


def test_symmetrization_of_raw_potential_passes(tent, rng):
    other = RadialProfile("tent", {"height": 1.0, "radius": 2.0})

    def raw(p):
        return tent(np.linalg.norm(p[..., :3], axis=-1)) * other(np.linalg.norm(p[..., 3:], axis=-1))

    W = from_callable(raw, 6, np.sqrt(5.0), rng=rng)
    assert not validate_symmetry(W, sample_count=2000, rng=rng).passed
    S = symmetrize(W)
    assert validate_symmetry(S, sample_count=5000, rng=rng).passed
    # the six permuted arguments, evaluated directly
    pts = sample_ball(rng, 100, 6, 2.0)
    x, y = pts[:, :3], pts[:, 3:]
    images = [(x, y), (y, x), (-x, y - x), (x - y, -y), (y - x, -x), (-y, x - y)]
    direct = sum(raw(np.concatenate(img, axis=1)) for img in images) / 6.0
    assert np.allclose(S(pts), direct, rtol=1e-12, atol=1e-15)


def test_symmetrization_is_idempotent_on_symmetric_input(tent, rng):
    V = product_potential(tent)
    pts = sample_ball(rng, 2000, 6, V.range_R0)
    assert np.max(np.abs(symmetrize(V)(pts) - V(pts))) <= 1e-12


def test_symmetry_needs_three_body(tent):
    with pytest.raises(PreconditionError):
        validate_symmetry(radial_euclidean(tent, 3))

# -------------------------------
# Pullback
# -------------------------------
def test_pullback_support_bound(tent, rng):
    V = product_potential(tent)
    W = pullback_by_metric(V)
    assert W.range_R0 <= np.sqrt(2.0) * V.range_R0 + 1e-12
    pts = sample_ball(rng, 20_000, 6, 2.0 * W.range_R0)
    far = np.linalg.norm(pts, axis=1) > np.sqrt(2.0) * V.range_R0
    assert np.all(W(pts[far]) == 0.0)


def test_identity_pullback_is_identity(tent, rng):
    V = product_potential(tent)
    W = pullback_by_metric(V, identity_metric())
    pts = sample_ball(rng, 1000, 6, V.range_R0)
    assert np.array_equal(W(pts), V(pts))


def test_pullback_of_gaussian_product_is_pointwise(rng):
    g = RadialProfile("gaussian", {"height": 2.0, "width": 0.4, "cutoff": 1.0})
    V = product_potential(g)
    W = pullback_by_metric(V)
    pts = sample_ball(rng, 1000, 6, W.range_R0)
    assert np.allclose(W(pts), V(metric_matrix().apply(pts)), rtol=0, atol=0)


def test_pullback_of_metric_radial_is_radial(tent, rng):
    V = radial_metric(tent)
    W = pullback_by_metric(V)
    assert W.is_radial
    assert W.range_R0 == pytest.approx(1.0)
    pts = sample_ball(rng, 1000, 6, 1.2)
    assert np.allclose(W(pts), tent(np.linalg.norm(pts, axis=1)), atol=1e-14)
    assert np.allclose(V(metric_matrix().apply(pts)), W(pts), atol=1e-12)
    assert W.l1_norm == pytest.approx(V.l1_norm / metric_matrix().det_M)

# -------------------------------
# Tabulated potentials and files
# -------------------------------
def test_grid_potential_reproduces_multilinear_data(tmp_path, rng):
    axis = np.linspace(-1.0, 1.0, 9)
    X, Y, Z = np.meshgrid(axis, axis, axis, indexing="ij")
    values = (X + 2.0) * (Y + 2.0) * (Z + 3.0)
    path = write_grid_file(tmp_path / "v.grid", values, 0.25, (-1.0, -1.0, -1.0))
    toml = tmp_path / "v.toml"
    toml.write_text('[potential]\nkind = "tabulated"\ndimension = 3\n[potential.params]\ngrid_file = "v.grid"\n')
    V = load_potential_file(str(toml))
    pts = rng.uniform(-0.99, 0.99, size=(200, 3))
    expected = (pts[:, 0] + 2.0) * (pts[:, 1] + 2.0) * (pts[:, 2] + 3.0)
    assert np.allclose(V(pts), expected, rtol=1e-12)
    assert V(np.array([[5.0, 0.0, 0.0]]))[0] == 0.0
    assert V.range_R0 >= np.sqrt(3.0)
    assert path.exists()


def test_grid_support_radius_is_grid_aligned():
    values = np.zeros((5, 5, 5))
    values[2, 2, 2] = 1.0
    V = tabulated_grid(values, 0.5, (-1.0, -1.0, -1.0))
    assert V.range_R0 == pytest.approx(1.0)
    assert V.l1_norm == pytest.approx(0.125)


def test_load_metric_potential_file(tmp_path):
    path = tmp_path / "wall.toml"
    path.write_text(
        '[potential]\nkind = "radial_metric"\ndimension = 6\nrange_R0 = 1.3\n'
        '[potential.params]\nprofile = "wall"\nheight = 5.0\nradius = 1.0\n')
    V = load_potential_file(str(path))
    assert V.kind == "radial_metric"
    assert V.range_R0 == pytest.approx(np.sqrt(1.5))
    assert V.sup_norm == 5.0


def test_potential_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_potential_file(str(tmp_path / "missing.toml"))
    bad = tmp_path / "bad.toml"
    bad.write_text('[potential]\nkind = "hardcore"\n')
    with pytest.raises(ConfigError):
        load_potential_file(str(bad))
