# Dyson-lemma constructions
# The soft annulus potential U, the numerical certification of the operator inequality
#   -2 M grad 1_{|x| <= R2} M grad + v >= lambda U
# and the many-body cutoff combinatorics (F_ijk and the no-four-body bound).

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, sparse
from scipy.linalg import LinAlgError, eigh, eigh_tridiagonal, solve_banded
from scipy.special import roots_chebyu

from potentials import (RadialProfile, ball_volume, identity_metric, metric_matrix, pullback_by_metric,
                        sphere_area)
from scattering import MIN_POINTS_PER_RANGE, cell_potential_integrals, scattering_energy
from utils import (DEFAULT_CONFIG, ConvergenceError, GridResolutionError, ParameterWindowError,
                   PreconditionError, PullbackError)

logger = logging.getLogger(__name__)

# -------------------------------
# Soft Potential U
# -------------------------------
@dataclass(frozen=True)
class DysonPotential:
    """Uniform density on the annulus {R1 <= |x| <= R2} in R^d, unit integral."""
    R1: float
    R2: float
    d: int
    value: float
    integral: float = 1.0

    def __call__(self, points):
        r = np.linalg.norm(np.asarray(points, dtype=float), axis=-1)
        return np.where((r >= self.R1) & (r <= self.R2), self.value, 0.0)

    @property
    def profile(self):
        return RadialProfile("annulus", {"height": self.value, "inner": self.R1, "outer": self.R2})

    @property
    def sup_norm(self):
        return self.value

    def scaled(self, R):
        """U_R = R^{-d} U(. / R)."""
        return construct_U(self.R1 * R, self.R2 * R, self.d)

    def to_dict(self):
        return {"R1": self.R1, "R2": self.R2, "d": self.d, "value": self.value, "integral": self.integral}


def construct_U(R1, R2, d):
    if not (R1 > 0 and R2 > 2.0 * R1):
        raise ParameterWindowError(f"U needs R2 > 2 R1 > 0, got R1={R1}, R2={R2}")
    value = 1.0 / (ball_volume(d) * (R2**d - R1**d))
    mass, _ = integrate.quad(lambda r: value * sphere_area(d) * r ** (d - 1), R1, R2,
                             epsabs=0.0, epsrel=1e-13)
    if abs(mass - 1.0) > 1e-10:
        raise ConvergenceError(f"Quadrature of U gives {mass!r}, expected 1")
    return DysonPotential(R1=float(R1), R2=float(R2), d=int(d), value=float(value), integral=mass)


def sample_U(U, count, rng):
    """Draws from the probability density U."""
    direction = rng.standard_normal((count, U.d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    u = rng.random(count)
    radii = (U.R1**U.d + u * (U.R2**U.d - U.R1**U.d)) ** (1.0 / U.d)
    return direction * radii[:, None]


def monte_carlo_mass(U, samples, rng, chunk=1_000_000):
    """Monte Carlo estimate of int U over the cube [-R2, R2]^d; returns (mean, standard error)."""
    volume = (2.0 * U.R2) ** U.d
    total = total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        values = U(rng.uniform(-U.R2, U.R2, size=(m, U.d))) * volume
        total += values.sum()
        total_sq += (values**2).sum()
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean**2, 0.0)
    return float(mean), float(np.sqrt(var / samples))

# -------------------------------
# Pencil Certification
# -------------------------------
def dyson_pencil(v, U, h):
    """
    Radial forms on the ball [0, R2] with a natural boundary at R2:
    A = 2 |grad|^2 + v and B = U, cell-integrated on nodes r_i = i h (shared factor |S^{d-1}| dropped).

    Returns:
        (A, B) as sparse matrices; B is diagonal.
    """
    d = U.d
    N = int(round(U.R2 / h))
    if abs(N * h - U.R2) > 1e-9 * U.R2:
        raise GridResolutionError(f"R2={U.R2} is not a multiple of h={h}")
    faces = np.concatenate(([0.0], h * (np.arange(N) + 0.5), [U.R2]))
    edge = (h * (np.arange(N) + 0.5)) ** (d - 1) / h
    q = np.zeros(N + 1) if v.is_zero else cell_potential_integrals(v.radial_profile, faces, d)
    u = cell_potential_integrals(U.profile, faces, d)
    diag = q.copy()
    diag[:-1] += 2.0 * edge
    diag[1:] += 2.0 * edge
    A = sparse.diags([-2.0 * edge, diag, -2.0 * edge], [-1, 0, 1], format="csr")
    B = sparse.diags(u, 0, format="csr")
    return A, B


def pencil_minimum(A, B):
    """
    Smallest generalized eigenvalue of (A, B) on {phi : <phi, B phi> > 0}, for tridiagonal A and
    diagonal B whose zero block is a leading index range.

    The zero block is eliminated by a Schur complement and the rest is a symmetric tridiagonal
    problem after scaling by B^{-1/2}.
    """
    a_diag = A.diagonal().copy()
    a_off = A.diagonal(1).copy()
    b = B.diagonal()
    positive = np.nonzero(b > 0)[0]
    if positive.size == 0:
        raise PreconditionError("U has no mass on the grid")
    i1 = int(positive[0])
    if np.any(b[i1:] <= 0):
        raise PreconditionError("Support of U must be a trailing block of the grid")
    if i1 > 0:
        n_i = i1
        ab = np.zeros((3, n_i))
        ab[0, 1:] = a_off[: n_i - 1]
        ab[1] = a_diag[:n_i]
        ab[2, :-1] = a_off[: n_i - 1]
        e_last = np.zeros(n_i)
        e_last[-1] = 1.0
        g = solve_banded((1, 1), ab, e_last)[-1]
        a_diag[i1] -= a_off[i1 - 1] ** 2 * g
    scale = 1.0 / np.sqrt(b[i1:])
    d_scaled = a_diag[i1:] * scale**2
    e_scaled = a_off[i1:] * scale[:-1] * scale[1:]
    try:
        values = eigh_tridiagonal(d_scaled, e_scaled, eigvals_only=True, select="i", select_range=(0, 0))
    except LinAlgError as e:
        raise ConvergenceError(f"Tridiagonal pencil solve failed: {e}") from e
    return float(values[0]), float(np.max(np.abs(d_scaled)))


@dataclass(frozen=True)
class CertificationReport:
    R0: float
    R1: float
    R2: float
    d: int
    metric: str
    grid: dict
    b_reference: float
    lambda_min: float
    ratio: float
    C_eff: float
    c_eff_max: float
    discretization_delta: float
    passed: bool
    reduced: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "R0": self.R0, "R1": self.R1, "R2": self.R2, "d": self.d, "metric": self.metric,
            "grid": self.grid, "b_reference": self.b_reference, "lambda_min": self.lambda_min,
            "lambda_over_b": self.ratio, "C_eff": self.C_eff, "c_eff_max": self.c_eff_max,
            "discretization_delta": self.discretization_delta, "pass": self.passed,
            "reduced": self.reduced,
        }


def _certify_radial(v, U, R0, h, settings):
    if not v.is_zero and not v.is_radial:
        raise PullbackError(f"Certification needs a radial potential, got {v.name or v.kind}")
    if R0 >= U.R1:
        raise ParameterWindowError(f"Need R0 < R1, got R0={R0}, R1={U.R1}")
    if h > R0 / MIN_POINTS_PER_RANGE:
        raise GridResolutionError(f"Spacing h={h} puts fewer than {MIN_POINTS_PER_RANGE} points across R0={R0}")
    lam, scale = pencil_minimum(*dyson_pencil(v, U, h))
    if 2.0 * h <= R0 / 4.0 and abs(round(U.R2 / (2.0 * h)) * 2.0 * h - U.R2) < 1e-9 * U.R2:
        lam_coarse, _ = pencil_minimum(*dyson_pencil(v, U, 2.0 * h))
        delta = abs(lam - lam_coarse)
    else:
        delta = 0.0
    if v.is_zero:
        b = 0.0
    else:
        b = scattering_energy(v, settings.get("scattering"), spacing=h).value
    return lam, b, delta, scale


def certify_dyson_inequality(v, U, h=None, metric=None, config=None, R0=None):
    """
    Certify -2 M grad 1_{|x|<=R2} M grad + v >= b_M(v)(1 - C_eff R0/R1) U on radial test functions.

    For a non-identity metric the problem is first reduced by x = M y to the identity metric with
    R0' = sqrt(2) R0, R1' = sqrt(2) R1, R2' = sqrt(2/3) R2 and v' = v(M .); the minimum and b both
    carry the factor det M.

    Args:
        v: radial potential (identity metric) or three-body potential whose pullback is radial.
        U: DysonPotential in the same dimension.
        h: radial spacing; defaults to R0 / cells_per_range.
        metric: MetricMatrix, None for the identity.
        config: full configuration dict.
        R0: support radius of v; defaults to v.range_R0.

    Returns:
        CertificationReport
    """
    config = config or DEFAULT_CONFIG
    dyson_cfg = {**DEFAULT_CONFIG["dyson"], **config.get("dyson", {})}
    settings = {"scattering": {**DEFAULT_CONFIG["scattering"], **config.get("scattering", {})}}
    R0 = float(R0 if R0 is not None else v.range_R0)
    if v.dimension != U.d:
        raise PreconditionError(f"v lives in d={v.dimension}, U in d={U.d}")
    if U.R2 <= 2.0 * U.R1 or U.R1 <= R0:
        raise ParameterWindowError(f"Need R2/2 > R1 > R0 > 0, got R0={R0}, R1={U.R1}, R2={U.R2}")

    reduced = {}
    if metric is None or np.allclose(metric.block, np.eye(2)):
        metric_name, factor = "identity", 1.0
        v_work, U_work, R0_work = v, U, R0
    else:
        metric_name, factor = "M", metric.det_M
        v_work = v if v.is_zero else pullback_by_metric(v, metric)
        R0_work = np.sqrt(2.0) * R0
        U_work = construct_U(np.sqrt(2.0) * U.R1, np.sqrt(2.0 / 3.0) * U.R2, U.d)
        reduced = {"R0": R0_work, "R1": U_work.R1, "R2": U_work.R2}
    if h is None:
        h = R0_work / dyson_cfg["cells_per_range"]
        h = U_work.R2 / np.ceil(U_work.R2 / h)
    lam, b, delta, scale = _certify_radial(v_work, U_work, R0_work, h, settings)
    lam, b, delta = lam * factor, b * factor, delta * factor

    if b > 0:
        ratio = lam / b
        c_eff = (1.0 - ratio) * U.R1 / R0
    else:
        ratio, c_eff = (np.inf if lam > 0 else 1.0), 0.0
    tol = dyson_cfg["tol"] * scale * factor
    passed = bool(lam >= -tol and c_eff <= dyson_cfg["c_eff_max"]
                  and lam >= b * (1.0 - c_eff * R0 / U.R1) - tol)
    margin = lam - b * (1.0 - dyson_cfg["c_eff_max"] * R0 / U.R1)
    if b > 0 and margin > 0 and delta > margin:
        raise GridResolutionError(
            f"Discretization change {delta:.3e} exceeds the certification margin {margin:.3e}")
    logger.info("Dyson certificate R0=%.4g R1=%.4g R2=%.4g: lambda=%.8g b=%.8g C_eff=%.4g pass=%s",
                R0, U.R1, U.R2, lam, b, c_eff, passed)
    return CertificationReport(
        R0=R0, R1=U.R1, R2=U.R2, d=U.d, metric=metric_name,
        grid={"kind": "radial", "h": h, "cells": int(round(U_work.R2 / h)) + 1},
        b_reference=b, lambda_min=lam, ratio=float(ratio), C_eff=float(c_eff),
        c_eff_max=dyson_cfg["c_eff_max"], discretization_delta=delta, passed=passed,
        reduced=reduced,
    )


def certify_family(potentials, U, h=None, metric=None, config=None):
    """Certify each potential and report the largest C_eff over the family."""
    reports = [certify_dyson_inequality(v, U, h=h, metric=metric, config=config) for v in potentials]
    c_max = max((r.C_eff for r in reports), default=0.0)
    return {"reports": reports, "C_eff_max": c_max, "pass": all(r.passed for r in reports)}

# -------------------------------
# Metric Form in Six Dimensions
# -------------------------------
def _invariant_points(s, sigma):
    """Points of R^3 (+) R^3 with |x|^2 = s and x1.x2 = s sigma / 2."""
    half = np.sqrt(0.5 * s)
    points = np.zeros(s.shape + (6,))
    points[..., 0] = half
    points[..., 3] = half * sigma
    points[..., 4] = half * np.sqrt(np.clip(1.0 - sigma**2, 0.0, None))
    return points


def metric_form_minimum(v, U, metric=None, radius=None, cells=160, degree=8, sigma_nodes=48,
                        grading=1.5):
    """
    Smallest Rayleigh quotient of
        int_{|x| <= radius} 2 grad f . M^2 grad f + v f^2   over   int U(M^{-1} x) f^2 / det M
    assembled directly in six dimensions.

    Test functions depend on x through s = |x|^2 and t = x1.x2, which is enough for potentials
    that are radial in |x| or in |M^{-1} x|. The basis is hat functions in |x| on a graded grid
    times Legendre polynomials in sigma = 2t/s, so its members are not radial in metric
    coordinates. The volume element is 2 pi^2 r^5 sqrt(1 - sigma^2) dr dsigma.

    Args:
        v: potential depending on x only through s and t (radial_euclidean or radial_metric).
        U: soft potential in the coordinates y = M^{-1} x.
        metric: MetricMatrix whose square has equal diagonal entries, None for the identity.
        radius: Euclidean radius of the kinetic ball, defaults to U.R2.
        cells, grading: radial grid r_i = radius (i / cells)^grading.
        degree: highest Legendre degree in sigma.
        sigma_nodes: Gauss-Chebyshev (second kind) nodes in sigma.

    Returns:
        dict with lambda_min and the basis description
    """
    metric = metric or identity_metric()
    if v.dimension != 6 or U.d != 6:
        raise PreconditionError("The metric form lives in d = 6")
    if not v.is_zero and v.kind not in ("radial_euclidean", "radial_metric"):
        raise PullbackError(f"The metric form needs a potential radial in |x| or |M^-1 x|, got {v.kind}")
    if degree < 1 or sigma_nodes <= degree:
        raise PreconditionError(f"Need 1 <= degree < sigma_nodes, got {degree} and {sigma_nodes}")
    squared = metric.block_squared
    inverse = np.linalg.inv(squared)
    if not (np.isclose(squared[0, 0], squared[1, 1]) and np.isclose(squared[0, 1], squared[1, 0])):
        raise PreconditionError("The metric form needs M^2 with equal diagonal entries")
    p, r_off = float(squared[0, 0]), float(squared[0, 1])
    a, c = float(inverse[0, 0]), float(inverse[0, 1])
    radius = float(radius if radius is not None else U.R2)
    nodes = radius * (np.arange(cells + 1) / cells) ** grading

    sigma, sigma_w = roots_chebyu(sigma_nodes)
    gl_x, gl_w = np.polynomial.legendre.leggauss(6)
    profile_breaks = () if v.is_zero else v.radial_profile.breakpoints
    r_pts, s_pts, w_pts = [], [], []
    for sj, wj in zip(sigma, sigma_w):
        # |M^-1 x| = |x| sqrt(a + c sigma)
        stretch = np.sqrt(a + c * sj)
        breaks = [U.R1 / stretch, U.R2 / stretch]
        breaks += [b if v.kind == "radial_euclidean" else b / stretch for b in profile_breaks]
        edges = np.union1d(nodes, [b for b in breaks if 0.0 < b < radius])
        lo, hi = edges[:-1], edges[1:]
        r = (0.5 * (hi + lo))[:, None] + (0.5 * (hi - lo))[:, None] * gl_x[None, :]
        w = (0.5 * (hi - lo))[:, None] * gl_w[None, :]
        r_pts.append(r.ravel())
        s_pts.append(np.full(r.size, sj))
        w_pts.append(wj * w.ravel())
    r, sig = np.concatenate(r_pts), np.concatenate(s_pts)
    w = 2.0 * np.pi**2 * r**5 * np.concatenate(w_pts)
    s, t = r**2, 0.5 * r**2 * sig

    cell = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, cells - 1)
    width = nodes[cell + 1] - nodes[cell]
    hats = np.stack([(nodes[cell + 1] - r) / width, (r - nodes[cell]) / width], axis=1)
    hats_r = np.stack([-1.0 / width, 1.0 / width], axis=1)
    eye = np.eye(degree + 1)
    P = np.polynomial.legendre.legvander(sig, degree)
    dP = np.polynomial.legendre.legvander(sig, degree - 1) @ np.polynomial.legendre.legder(eye, axis=0)

    phi = (hats[:, :, None] * P[:, None, :]).reshape(r.size, -1)
    phi_r = (hats_r[:, :, None] * P[:, None, :]).reshape(r.size, -1)
    phi_sigma = (hats[:, :, None] * dP[:, None, :]).reshape(r.size, -1)
    phi_s = phi_r / (2.0 * r[:, None]) - phi_sigma * (sig / s)[:, None]
    phi_t = phi_sigma * (2.0 / s)[:, None]

    n = (cells + 1) * (degree + 1)
    cols = ((cell[:, None, None] + np.arange(2)[None, :, None]) * (degree + 1)
            + np.arange(degree + 1)[None, None, :]).reshape(r.size, -1)
    rows = np.repeat(np.arange(r.size), cols.shape[1])

    def as_sparse(values):
        return sparse.csr_matrix((values.ravel(), (rows, cols.ravel())), shape=(r.size, n))

    Phi, Phi_s, Phi_t = as_sparse(phi), as_sparse(phi_s), as_sparse(phi_t)
    points = _invariant_points(s, sig)
    v_vals = np.zeros_like(r) if v.is_zero else v(points)
    u_vals = U(metric.apply_inverse(points)) / metric.det_M
    # grad f . M^2 grad f in terms of f_s and f_t
    a_ss = 4.0 * p * s + 8.0 * r_off * t
    a_st = 8.0 * p * t + 4.0 * r_off * s
    a_tt = p * s + 2.0 * r_off * t

    def weighted(left, weights, right):
        return (left.T @ sparse.diags(weights) @ right).toarray()

    A = (weighted(Phi_s, 2.0 * w * a_ss, Phi_s) + weighted(Phi_s, w * a_st, Phi_t)
         + weighted(Phi_t, w * a_st, Phi_s) + weighted(Phi_t, 2.0 * w * a_tt, Phi_t)
         + weighted(Phi, w * v_vals, Phi))
    B = weighted(Phi, w * u_vals, Phi)
    scale = 1.0 / np.sqrt(np.diag(A))
    A = 0.5 * (A + A.T) * np.outer(scale, scale)
    B = 0.5 * (B + B.T) * np.outer(scale, scale)
    try:
        mu = eigh(B, A, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0]
    except LinAlgError as e:
        raise ConvergenceError(f"Metric form pencil is not positive definite: {e}") from e
    if mu <= 0:
        raise PreconditionError("U has no mass inside the kinetic ball")
    lam = float(1.0 / mu)
    logger.info("Metric form on |x| <= %.4g with %d basis functions: lambda=%.8g", radius, n, lam)
    return {"lambda_min": lam, "basis_size": n, "cells": cells, "degree": degree,
            "sigma_nodes": sigma_nodes, "radius": radius}

# -------------------------------
# Many-body Cutoffs
# -------------------------------
@dataclass(frozen=True)
class CutoffConfig:
    R: float
    positions: np.ndarray = field(repr=False)
    eta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterWindowError(f"eta must lie in (0, 1), got {self.eta}")
        if self.R <= 0:
            raise ParameterWindowError("Pair cutoff R must be positive")

    def in_shrunk_box(self, points):
        """Indicator of Lambda_eta = (1 - eta)[-1/2, 1/2]^3."""
        return np.all(np.abs(np.asarray(points)) <= 0.5 * (1.0 - self.eta), axis=-1)

    def F(self, i, j, k):
        return pair_cutoffs(self.positions, i, j, k, self.R)


def lemma_hypotheses(cfg, U, R0, ell):
    """
    Check eta > R2 R and R1 R > R0 under both readings of R0: box units (R0 / ell) and unscaled.
    """
    box = bool(cfg.eta > U.R2 * cfg.R and U.R1 * cfg.R > R0 / ell)
    unscaled = bool(cfg.eta > U.R2 * cfg.R and U.R1 * cfg.R > R0)
    if box != unscaled:
        logger.warning("Cutoff hypotheses disagree between box-unit and unscaled R0 (R=%.4g, eta=%.4g)",
                       cfg.R, cfg.eta)
    return {"box_units": box, "unscaled": unscaled, "consistent": box == unscaled}


def pair_cutoffs(positions, i, j, k, R):
    """
    F_ijk = chi_R(x_i - x_j) chi_R(x_i - x_k) chi_R(x_j - x_k) prod_{l != i,j,k} theta_2R(c - x_l),
    c the centroid of the triple; chi_R = 1{|x| <= R} and theta = 1 - chi.
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if len({i, j, k}) != 3:
        raise PreconditionError(f"Indices must be distinct, got ({i}, {j}, {k})")
    if not all(0 <= idx < n for idx in (i, j, k)):
        raise PreconditionError(f"Index out of range for {n} positions: ({i}, {j}, {k})")
    xi, xj, xk = positions[i], positions[j], positions[k]
    if (np.linalg.norm(xi - xj) > R or np.linalg.norm(xi - xk) > R or np.linalg.norm(xj - xk) > R):
        return 0
    centroid = (xi + xj + xk) / 3.0
    others = np.delete(positions, [i, j, k], axis=0)
    if others.size and np.any(np.linalg.norm(centroid - others, axis=1) <= 2.0 * R):
        return 0
    return 1


def _triangle_weights(batch, R, chunk=100_000):
    """
    Per-particle sums sum_{j != k} F_ijk for a batch of configurations (B, n, 3).

    Returns:
        array (B, n) of integer sums.
    """
    B, n, _ = batch.shape
    diff = batch[:, :, None, :] - batch[:, None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    adj = dist <= R
    idx = np.arange(n)
    adj[:, idx, idx] = False
    triple = adj[:, :, :, None] & adj[:, :, None, :] & adj[:, None, :, :]
    b, i, j, k = np.nonzero(triple)
    sums = np.zeros((B, n), dtype=np.int64)
    if b.size == 0:
        return sums
    for start in range(0, b.size, chunk):
        sl = slice(start, start + chunk)
        bb, ii, jj, kk = b[sl], i[sl], j[sl], k[sl]
        centroid = (batch[bb, ii] + batch[bb, jj] + batch[bb, kk]) / 3.0
        near = np.linalg.norm(batch[bb] - centroid[:, None, :], axis=-1) <= 2.0 * R
        rows = np.arange(bb.size)
        near[rows, ii] = False
        near[rows, jj] = False
        near[rows, kk] = False
        F = ~near.any(axis=1)
        np.add.at(sums, (bb[F], ii[F]), 1)
    return sums


def no_four_body_check(positions, R):
    """max_i sum_{j != k} F_ijk; at most 2 for every configuration."""
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] < 3:
        raise PreconditionError("Need at least 3 positions")
    return int(_triangle_weights(positions[None], R).max())


def scan_no_four_body(rng, configs, n_range=(4, 30), densities=(0.05, 0.3, 1.0, 4.0), R=1.0,
                      batch=64):
    """
    Random configurations with n uniform in n_range and side L = (n / density)^{1/3} R.

    Returns:
        dict with the number of configurations, the largest sum seen and the violation count.
    """
    worst, violations, done = 0, 0, 0
    while done < configs:
        m = min(batch, configs - done)
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        density = float(rng.choice(densities))
        side = (n / density) ** (1.0 / 3.0) * R
        sums = _triangle_weights(rng.uniform(0.0, side, size=(m, n, 3)), R).max(axis=1)
        worst = max(worst, int(sums.max()))
        violations += int(np.count_nonzero(sums > 2))
        done += m
    logger.info("No-four-body scan: %d configurations, max sum %d, %d violations", configs, worst, violations)
    return {"configurations": configs, "max_sum": worst, "violations": violations}
