# Zero-energy scattering solvers
# Computes b(v), the truncated b_R(v), the modified energy b_M(V) and the scattering solutions
# through a radial finite-volume route, a conjugate-gradient variational route and an orbit grid
# for rotation-invariant three-body potentials.

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, cg, spsolve
from scipy.spatial.transform import Rotation
from scipy.special import ive

from potentials import PotentialSpec, metric_matrix, pullback_by_metric, sphere_area
from utils import (DEFAULT_CONFIG, AsymmetricPotentialError, ConfigError, ConvergenceError,
                   GridMismatchError, GridResolutionError, IllConditionedFitError,
                   ParameterWindowError, PreconditionError, PullbackError)

logger = logging.getLogger(__name__)

MIN_POINTS_PER_RANGE = 8
FIT_SPREAD_MIN = 1e-3
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)

# -------------------------------
# Closed Forms
# -------------------------------
def hard_sphere_energy(a, d):
    """b of the hard sphere of radius a: 2(d-2)|S^{d-1}| a^{d-2}."""
    return 2.0 * (d - 2) * sphere_area(d) * a ** (d - 2)


def soft_sphere_energy(height, a, d):
    """
    b of the bounded wall height * 1{|x| <= a} in R^d.

    Inside the wall f ~ r^{-nu} I_nu(kr) with nu = (d-2)/2 and k = sqrt(height/2); matching the
    logarithmic derivative to 1 - c r^{2-d} gives c = a^{d-2} qa / ((d-2) + qa).
    """
    if height == 0:
        return 0.0
    nu = (d - 2) / 2.0
    k = np.sqrt(height / 2.0)
    x = k * a
    q = k * ive(nu + 1.0, x) / ive(nu, x)
    c = a ** (d - 2) * q * a / ((d - 2) + q * a)
    return 2.0 * (d - 2) * sphere_area(d) * c


def truncated_energy(b_infinite, R, d):
    """b_R for a compactly supported radial v: 1/b_R = 1/b - R^{2-d} / (2(d-2)|S^{d-1}|)."""
    if b_infinite == 0:
        return 0.0
    return 1.0 / (1.0 / b_infinite - R ** (2 - d) / (2.0 * (d - 2) * sphere_area(d)))


def tail_corrected(b_R, R, d):
    """Invert truncated_energy: exact b from b_R once R is past the support."""
    if b_R <= 0:
        return 0.0
    return 1.0 / (1.0 / b_R + R ** (2 - d) / (2.0 * (d - 2) * sphere_area(d)))

# -------------------------------
# Result Types
# -------------------------------
@dataclass(frozen=True)
class ScatteringSolution:
    """
    Discrete scattering solution. f_values lives on `nodes`; for the radial route nodes are
    radii r_i = i h, for the Cartesian route points in R^3, for the orbit route (r1, r2, c).
    """
    grid: dict
    nodes: np.ndarray = field(repr=False)
    f_values: np.ndarray = field(repr=False)
    b_value: float
    truncation_R: float
    residual_sup: float
    route: str
    dimension: int
    born_value: float
    iterations: int = 0
    weights: Optional[np.ndarray] = field(default=None, repr=False)
    residual_over_sup_norm: float = 0.0

    @property
    def omega_values(self):
        return 1.0 - self.f_values

    @property
    def b_tail(self):
        """b corrected for the exterior tail; exact for radial v supported inside the ball."""
        return tail_corrected(self.b_value, self.truncation_R, self.dimension)

    def to_dict(self):
        return {
            "grid": self.grid,
            "route": self.route,
            "dimension": self.dimension,
            "b_R": self.b_value,
            "b_tail": self.b_tail,
            "born_value": self.born_value,
            "truncation_R": self.truncation_R,
            "residual_sup": self.residual_sup,
            "residual_over_sup_norm": self.residual_over_sup_norm,
            "iterations": self.iterations,
            "f_min": float(np.min(self.f_values)),
        }


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    uncertainty: float
    route: str
    dimension: int
    radii: tuple = ()
    b_values: tuple = ()
    b_values_coarse: tuple = ()
    spacing: float = 0.0
    fit_coefficient: float = 0.0
    fit_residual: float = 0.0
    refinement_delta: float = 0.0
    tail_value: float = 0.0
    residual_sup: float = 0.0
    born_value: float = 0.0
    metric_factor: float = 1.0
    residual_over_sup_norm: float = 0.0

    def to_dict(self):
        return {
            "b": self.value,
            "uncertainty": self.uncertainty,
            "route": self.route,
            "dimension": self.dimension,
            "truncation_radii": list(self.radii),
            "b_R_fine": list(self.b_values),
            "b_R_coarse": list(self.b_values_coarse),
            "spacing": self.spacing,
            "fit_coefficient": self.fit_coefficient,
            "fit_residual": self.fit_residual,
            "refinement_delta": self.refinement_delta,
            "b_tail": self.tail_value,
            "residual_sup": self.residual_sup,
            "residual_over_sup_norm": self.residual_over_sup_norm,
            "born_value": self.born_value,
            "metric_factor": self.metric_factor,
        }

    def scaled(self, factor):
        return replace(self, value=self.value * factor, uncertainty=self.uncertainty * factor,
                       b_values=tuple(b * factor for b in self.b_values),
                       b_values_coarse=tuple(b * factor for b in self.b_values_coarse),
                       tail_value=self.tail_value * factor, born_value=self.born_value * factor,
                       fit_coefficient=self.fit_coefficient * factor, fit_residual=self.fit_residual * factor,
                       refinement_delta=self.refinement_delta * factor,
                       metric_factor=self.metric_factor * factor)

# -------------------------------
# Radial Finite Volumes
# -------------------------------
def _profile_of(v):
    if isinstance(v, PotentialSpec):
        if v.is_zero:
            return None
        if not v.is_radial:
            raise PreconditionError(f"Potential {v.name or v.kind} is not radial")
        return v.radial_profile
    return v


def cell_potential_integrals(profile, edges, d):
    """
    int_{edges[i]}^{edges[i+1]} g(r) r^{d-1} dr for every cell, with 8-point Gauss-Legendre on
    each piece between the profile's breakpoints.
    """
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    r = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    values = (profile(r) * r ** (d - 1)) @ _GL_WEIGHTS * half
    for b in getattr(profile, "breakpoints", ()):
        for i in np.nonzero((lo < b) & (b < hi))[0]:
            total = 0.0
            for a, c in ((lo[i], b), (b, hi[i])):
                h2, m2 = 0.5 * (c - a), 0.5 * (c + a)
                rr = m2 + h2 * _GL_NODES
                total += h2 * float(_GL_WEIGHTS @ (profile(rr) * rr ** (d - 1)))
            values[i] = total
    return values


@dataclass(frozen=True)
class RadialSystem:
    """Tridiagonal form 2[a+(f_i - f_{i+1}) + a-(f_i - f_{i-1})] + q_i f_i on nodes 0..N-1."""
    radii: np.ndarray
    edge: np.ndarray
    cell_volume: np.ndarray
    q: np.ndarray
    h: float
    R: float
    d: int

    @property
    def diagonal(self):
        a_minus = np.concatenate(([0.0], self.edge[:-1]))
        return 2.0 * (self.edge + a_minus) + self.q

    def banded(self):
        n = self.q.size
        ab = np.zeros((3, n))
        ab[0, 1:] = -2.0 * self.edge[:-1]
        ab[1] = self.diagonal
        ab[2, :-1] = -2.0 * self.edge[:-1]
        return ab

    def sparse(self):
        off = -2.0 * self.edge[:-1]
        return sparse.diags([off, self.diagonal, off], [-1, 0, 1], format="csr")

    def residual(self, f_nodes):
        """Pointwise residual of -2 Delta f + v f per unit cell volume (f_N = 1)."""
        f_full = np.append(f_nodes, 1.0)
        a_minus = np.concatenate(([0.0], self.edge[:-1]))
        f_prev = np.concatenate(([0.0], f_nodes[:-1]))
        res = (2.0 * (self.edge * (f_nodes - f_full[1:]) + a_minus * (f_nodes - f_prev))
               + self.q * f_nodes)
        return res / self.cell_volume


def radial_system(profile, d, R_max, h):
    N = int(round(R_max / h))
    if N < 2:
        raise GridResolutionError(f"Radial grid needs at least 2 cells, got R={R_max}, h={h}")
    radii = h * np.arange(N + 1)
    faces = np.concatenate(([0.0], h * (np.arange(N) + 0.5)))
    edge = (h * (np.arange(N) + 0.5)) ** (d - 1) / h
    cell_volume = (faces[1:] ** d - faces[:-1] ** d) / d
    if profile is None:
        q = np.zeros(N)
    else:
        q = cell_potential_integrals(profile, faces, d)
    return RadialSystem(radii=radii, edge=edge, cell_volume=cell_volume, q=q, h=h, R=N * h, d=d)


def _residual_ratio(residual_sup, sup_norm):
    """Residual relative to sup|v|, without the grid scale used by the acceptance check."""
    return float(residual_sup / sup_norm) if sup_norm > 0 else 0.0


def _check_radial_grid(v, profile, R_max, h):
    R0 = profile.support if profile is not None else 0.0
    if profile is not None and h > R0 / MIN_POINTS_PER_RANGE:
        raise GridResolutionError(
            f"Spacing h={h:.4g} puts fewer than {MIN_POINTS_PER_RANGE} points across range {R0:.4g}")
    if R_max <= R0:
        raise ParameterWindowError(f"Truncation radius {R_max} must exceed the range {R0}")


def solve_radial(v, d, R_max, h, residual_tol=DEFAULT_CONFIG["scattering"]["residual_tol"]):
    """
    Solve -2(f'' + (d-1)/r f') + v f = 0 on (0, R_max] with f'(0) = 0 and f(R_max) = 1.

    Args:
        v: radial PotentialSpec or radial profile g.
        d: dimension.
        R_max: truncation radius.
        h: radial spacing.

    Returns:
        ScatteringSolution with b from the integral route |S^{d-1}| sum_i q_i f_i.
    """
    profile = _profile_of(v)
    _check_radial_grid(v, profile, R_max, h)
    system = radial_system(profile, d, R_max, h)
    area = sphere_area(d)
    if profile is None:
        f = np.ones(system.q.size)
    else:
        f = solve_banded((1, 1), system.banded(), np.append(np.zeros(system.q.size - 1), 2.0 * system.edge[-1]))
    residual = system.residual(f)
    sup_norm = getattr(profile, "sup_norm", 0.0)
    # roundoff in the cell-volume normalized residual grows like 1/h^2
    scale = max(sup_norm, 1.0 / h**2)
    residual_sup = float(np.max(np.abs(residual)))
    ratio = _residual_ratio(residual_sup, sup_norm)
    if residual_sup > residual_tol * scale:
        raise GridResolutionError(f"Radial residual {residual_sup:.3e} exceeds {residual_tol:.1e} x {scale:.3e} "
                                  f"(residual / sup|v| = {ratio:.3e})")
    b = area * float(system.q @ f)
    born = area * float(system.q.sum())
    _check_born(b, born, "radial")
    logger.debug("solve_radial d=%d R=%.4g h=%.4g N=%d b_R=%.10g residual/sup|v|=%.2e",
                 d, system.R, h, f.size, b, ratio)
    return ScatteringSolution(
        grid={"kind": "radial", "h": h, "cells": int(f.size)},
        nodes=system.radii,
        f_values=np.append(f, 1.0),
        b_value=b,
        truncation_R=system.R,
        residual_sup=residual_sup,
        route="radial",
        dimension=d,
        born_value=born,
        weights=np.append(system.q * area, 0.0),
        residual_over_sup_norm=ratio,
    )


def _check_born(b, born, route):
    tol = 1e-9 * max(abs(born), 1e-300)
    if b > born + tol:
        raise ConvergenceError(f"{route} solve violates the Born bound: b={b:.12g} > {born:.12g}")
    if born > 0 and b <= 0:
        raise ConvergenceError(f"{route} solve returned non-positive b={b:.3e} for a nonzero potential")

# -------------------------------
# Conjugate Gradients
# -------------------------------
def cg_solve(K, F, rtol=1e-10, maxiter=100_000):
    """Jacobi-preconditioned CG; returns (solution, iterations)."""
    diag = K.diagonal()
    if np.any(diag <= 0):
        raise ConvergenceError("Quadratic form is not positive definite (non-positive diagonal)")
    inv = 1.0 / diag
    precond = LinearOperator(K.shape, matvec=lambda x: inv * x, dtype=float)
    counter = {"n": 0}

    def count(_):
        counter["n"] += 1

    x, info = cg(K, F, rtol=rtol, atol=0.0, maxiter=maxiter, M=precond, callback=count)
    if info > 0:
        raise ConvergenceError(f"CG did not converge in {maxiter} iterations")
    if info < 0:
        raise ConvergenceError("CG breakdown; the discrete form is indefinite")
    logger.debug("CG converged in %d iterations (n=%d)", counter["n"], F.size)
    return x, counter["n"]

# -------------------------------
# Variational Route
# -------------------------------
def _radial_variational(v, d, R, h, rtol, maxiter):
    profile = _profile_of(v)
    _check_radial_grid(v, profile, R, h)
    system = radial_system(profile, d, R, h)
    area = sphere_area(d)
    if profile is None:
        phi, iterations = np.zeros(system.q.size), 0
    else:
        phi, iterations = cg_solve(system.sparse(), system.q.copy(), rtol, maxiter)
    phi_full = np.append(phi, 0.0)
    residual_sup = float(np.max(np.abs(system.residual(1.0 - phi))))
    kinetic = 2.0 * float(system.edge @ np.diff(phi_full) ** 2)
    potential = float(system.q @ (1.0 - phi) ** 2)
    b = area * (kinetic + potential)
    born = area * float(system.q.sum())
    _check_born(b, born, "variational")
    return ScatteringSolution(
        grid={"kind": "radial", "h": h, "cells": int(phi.size)},
        nodes=system.radii,
        f_values=1.0 - phi_full,
        b_value=b,
        truncation_R=system.R,
        residual_sup=residual_sup,
        route="variational",
        dimension=d,
        born_value=born,
        iterations=iterations,
        weights=np.append(system.q * area, 0.0),
        residual_over_sup_norm=_residual_ratio(residual_sup, getattr(profile, "sup_norm", 0.0)),
    )


def _cartesian_variational(v, R, h, rtol, maxiter):
    """7-point stencil on the grid h Z^3 inside the ball |x| < R, phi = 0 outside."""
    n = int(np.ceil(R / h))
    axis = h * np.arange(-n, n + 1)
    m = axis.size
    X = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    free = np.linalg.norm(X, axis=1) < R * (1 - 1e-12)
    path = sparse.diags([-np.ones(m - 1), 2.0 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    eye = sparse.identity(m)
    lap = (sparse.kron(sparse.kron(path, eye), eye) + sparse.kron(sparse.kron(eye, path), eye)
           + sparse.kron(sparse.kron(eye, eye), path)).tocsr()
    values = v(X)
    idx = np.nonzero(free)[0]
    K = (2.0 * h * lap[idx][:, idx] + sparse.diags(h**3 * values[idx])).tocsr()
    F = h**3 * values[idx]
    C = h**3 * float(values.sum())
    phi, iterations = cg_solve(K, F, rtol, maxiter) if C > 0 else (np.zeros(idx.size), 0)
    b = C - float(F @ phi)
    _check_born(b, C, "cartesian")
    phi_all = np.zeros(X.shape[0])
    phi_all[idx] = phi
    residual = (F - K @ phi) / h**3
    residual_sup = float(np.max(np.abs(residual), initial=0.0))
    return ScatteringSolution(
        grid={"kind": "cartesian", "h": h, "points_per_axis": m},
        nodes=X,
        f_values=1.0 - phi_all,
        b_value=b,
        truncation_R=R,
        residual_sup=residual_sup,
        route="variational",
        dimension=3,
        born_value=C,
        iterations=iterations,
        weights=h**3 * values,
        residual_over_sup_norm=_residual_ratio(residual_sup, v.sup_norm),
    )

# -------------------------------
# Orbit Grid (rotation-invariant functions on R^3 x R^3)
# -------------------------------
def orbit_points(r1, r2, c):
    """Representative point (r1 e_x, r2 (c, sqrt(1 - c^2), 0)) of the orbit (r1, r2, c)."""
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    zero = np.zeros_like(r1)
    return np.stack([r1, zero, zero, r2 * c, r2 * s, zero], axis=-1)


def _orbit_coefficients(r1, r2, c, metric_form):
    """8 pi^2 r1^2 r2^2-weighted coefficient tensor of 2|grad phi|^2 (or 2|M grad phi|^2)."""
    w = 1.0 - c * c
    p = r1 * r1 * r2 * r2
    A = np.zeros(r1.shape + (3, 3))
    A[..., 0, 0] = p
    A[..., 1, 1] = p
    A[..., 2, 2] = w * (r1 * r1 + r2 * r2)
    if metric_form:
        A[..., 0, 1] = A[..., 1, 0] = 0.5 * c * p
        A[..., 0, 2] = A[..., 2, 0] = 0.5 * w * r1 * r1 * r2
        A[..., 1, 2] = A[..., 2, 1] = 0.5 * w * r1 * r2 * r2
        A[..., 2, 2] -= c * w * r1 * r2
    return 2.0 * 8.0 * np.pi**2 * A


def orbit_system(potential, R, h, c_cells, metric_form=False, gauss=3):
    """
    Assemble the trilinear finite-element system on (r1, r2, c) in [0, R]^2 x [-1, 1].

    Returns:
        dict with stiffness-plus-potential matrix K, load F, constant C = int V, node coordinates,
        free-node index and lumped measure per node.
    """
    n = int(np.ceil(R / h))
    hc = 2.0 / c_cells
    shape = (n + 1, n + 1, c_cells + 1)
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(c_cells), indexing="ij")
    keep = (i * h) ** 2 + (j * h) ** 2 < R * R
    i, j, k = i[keep], j[keep], k[keep]
    E = i.size

    corners = np.array([(a, b, e) for a in (0, 1) for b in (0, 1) for e in (0, 1)])
    conn = np.ravel_multi_index(
        (i[:, None] + corners[:, 0], j[:, None] + corners[:, 1], k[:, None] + corners[:, 2]), shape)

    xi, wq = np.polynomial.legendre.leggauss(gauss)
    xi, wq = 0.5 * (xi + 1.0), 0.5 * wq
    jac = h * h * hc
    K_loc = np.zeros((E, 8, 8))
    F_loc = np.zeros((E, 8))
    lumped_loc = np.zeros((E, 8))
    C = 0.0
    for qa, wa in zip(xi, wq):
        for qb, wb in zip(xi, wq):
            for qe, we in zip(xi, wq):
                loc = np.array([qa, qb, qe])
                N = np.prod(np.where(corners == 1, loc, 1.0 - loc), axis=1)
                G = np.empty((8, 3))
                for ax, step in enumerate((h, h, hc)):
                    others = np.prod(np.where(corners == 1, loc, 1.0 - loc)[:, [a for a in range(3) if a != ax]], axis=1)
                    G[:, ax] = np.where(corners[:, ax] == 1, 1.0, -1.0) * others / step
                r1 = (i + qa) * h
                r2 = (j + qb) * h
                c = -1.0 + (k + qe) * hc
                weight = wa * wb * we * jac
                A = _orbit_coefficients(r1, r2, c, metric_form)
                K_loc += weight * np.einsum("ax,exy,by->eab", G, A, G)
                measure = 8.0 * np.pi**2 * r1 * r1 * r2 * r2
                Vm = potential(orbit_points(r1, r2, c)) * measure
                K_loc += weight * Vm[:, None, None] * np.outer(N, N)[None]
                F_loc += weight * Vm[:, None] * N[None]
                lumped_loc += weight * measure[:, None] * N[None]
                C += weight * float(Vm.sum())

    size = int(np.prod(shape))
    rows = np.repeat(conn, 8, axis=1).ravel()
    cols = np.tile(conn, (1, 8)).ravel()
    K = sparse.coo_matrix((K_loc.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    F = np.bincount(conn.ravel(), weights=F_loc.ravel(), minlength=size)
    lumped = np.bincount(conn.ravel(), weights=lumped_loc.ravel(), minlength=size)

    ii, jj, kk = np.unravel_index(np.arange(size), shape)
    coords = np.stack([ii * h, jj * h, -1.0 + kk * hc], axis=1)
    free = np.nonzero((coords[:, 0] ** 2 + coords[:, 1] ** 2 < R * R * (1 - 1e-12)) & (lumped > 0))[0]
    logger.debug("orbit grid: %d elements, %d free nodes, R=%.4g h=%.4g", E, free.size, R, h)
    return {"K": K, "F": F, "C": C, "coords": coords, "free": free, "lumped": lumped,
            "shape": shape, "h": h, "hc": hc}


def _orbit_solve(potential, R, h, c_cells, metric_form, rtol, maxiter, direct=False):
    sysd = orbit_system(potential, R, h, c_cells, metric_form)
    free = sysd["free"]
    K = sysd["K"][free][:, free].tocsr()
    F = sysd["F"][free]
    if sysd["C"] <= 0:
        phi_free, iterations = np.zeros(free.size), 0
    elif direct:
        phi_free, iterations = spsolve(K.tocsc(), F), 0
    else:
        phi_free, iterations = cg_solve(K, F, rtol, maxiter)
    b = sysd["C"] - float(F @ phi_free)
    _check_born(b, sysd["C"], "orbit")
    phi = np.zeros(sysd["coords"].shape[0])
    phi[free] = phi_free
    residual = (F - K @ phi_free) / sysd["lumped"][free]
    residual_sup = float(np.max(np.abs(residual), initial=0.0))
    return ScatteringSolution(
        grid={"kind": "orbit", "h": h, "c_cells": c_cells, "shape": list(sysd["shape"]),
              "metric_form": metric_form},
        nodes=sysd["coords"],
        f_values=1.0 - phi,
        b_value=b,
        truncation_R=R,
        residual_sup=residual_sup,
        route="variational",
        dimension=6,
        born_value=sysd["C"],
        iterations=iterations,
        weights=sysd["F"],
        residual_over_sup_norm=_residual_ratio(residual_sup, potential.sup_norm),
    )


def check_rotation_invariance(V, rng=None, samples=512, tol=1e-10):
    """Sampled check that V(Q x, Q y) = V(x, y) for random rotations Q of R^3."""
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = rng.standard_normal((samples, 6))
    pts *= (V.range_R0 * rng.random(samples) ** (1 / 6) / np.linalg.norm(pts, axis=1))[:, None]
    rot = Rotation.random(samples, random_state=rng)
    rotated = np.concatenate([rot.apply(pts[:, :3]), rot.apply(pts[:, 3:])], axis=1)
    base = V(pts)
    scale = max(V.sup_norm, 1e-300)
    return float(np.max(np.abs(V(rotated) - base)) / scale) <= tol


def solve_variational(v, domain_R, h, config=None, route="auto"):
    """
    Minimize the discretized form int 2|grad phi|^2 + v |1 - phi|^2 over phi = 0 on |x| = R by CG
    on -2 Delta phi + v phi = v; b_R is the form value at the minimizer.

    With route="auto" radial v uses the one-dimensional form, d = 3 uses a 7-point Cartesian grid
    and rotation-invariant d = 6 potentials use the orbit grid. route="cartesian" sends any d = 3
    potential, radial or not, to the Cartesian grid.
    """
    settings = {**DEFAULT_CONFIG["scattering"], **(config or {})}
    rtol, maxiter = settings["cg_rtol"], settings["cg_maxiter"]
    if route not in ("auto", "cartesian"):
        raise ConfigError(f"Unknown variational route: {route}")
    if domain_R <= v.range_R0 and not v.is_zero:
        raise ParameterWindowError(f"Domain radius {domain_R} must exceed the range {v.range_R0}")
    if route == "auto" and (v.is_zero or v.is_radial):
        return _radial_variational(v, v.dimension, domain_R, h, rtol, maxiter)
    if route == "cartesian" and v.dimension != 3:
        raise PreconditionError(f"The Cartesian grid is three-dimensional, got d={v.dimension}")
    if h > v.range_R0 / MIN_POINTS_PER_RANGE * 2.0:
        raise GridResolutionError(f"Spacing {h} too coarse for range {v.range_R0}")
    if v.dimension == 3:
        return _cartesian_variational(v, domain_R, h, rtol, maxiter)
    if v.dimension == 6:
        return _orbit_solve(v, domain_R, h, settings["orbit_c_cells"], False, rtol, maxiter)
    raise PreconditionError(f"No variational route for a non-radial potential in d={v.dimension}")


def direct_metric_energy(V, domain_R, h, c_cells=16, config=None, direct=True):
    """
    Minimum of int 2|M grad phi|^2 + V|1 - phi|^2 over the ball |x| < domain_R, taken directly in
    x-coordinates on the orbit grid (sparse direct solve, or CG for fine grids).
    """
    if not V.is_three_body:
        raise PreconditionError("Metric form needs a three-body potential")
    settings = {**DEFAULT_CONFIG["scattering"], **(config or {})}
    return _orbit_solve(V, domain_R, h, c_cells, True, settings["cg_rtol"], settings["cg_maxiter"],
                        direct=direct)

# -------------------------------
# Integral Route
# -------------------------------
def integral_energy(sol, v):
    """b = int v f, by the quadrature of v on the solution's own grid."""
    if sol.dimension != v.dimension:
        raise GridMismatchError(f"Solution in d={sol.dimension}, potential in d={v.dimension}")
    if v.is_zero:
        return 0.0
    if sol.truncation_R <= v.range_R0:
        raise GridMismatchError("Solution grid does not cover the support of the potential")
    kind = sol.grid["kind"]
    if kind == "radial":
        h = sol.grid["h"]
        N = sol.grid["cells"]
        faces = np.concatenate(([0.0], h * (np.arange(N) + 0.5)))
        q = cell_potential_integrals(_profile_of(v), faces, v.dimension)
        return sphere_area(v.dimension) * float(q @ sol.f_values[:N])
    if kind == "cartesian":
        h = sol.grid["h"]
        return h**3 * float(v(sol.nodes) @ sol.f_values)
    if kind == "orbit":
        sysd = orbit_system(v, sol.truncation_R, sol.grid["h"], sol.grid["c_cells"],
                            sol.grid.get("metric_form", False))
        if sysd["F"].size != sol.f_values.size:
            raise GridMismatchError("Orbit grids differ")
        return float(sysd["F"] @ sol.f_values)
    raise GridMismatchError(f"Unknown grid kind {kind}")

# -------------------------------
# Extrapolation
# -------------------------------
def extrapolate_to_infinity(values, d, range_R0=None):
    """
    Fit 1/b_R = 1/b - c' R^{2-d}; to first order b_R = b + c / R^{d-2} with c = c' b^2.

    Args:
        values: sequence of (R, b_R).
        d: dimension.
        range_R0: when given, every R must exceed 2 range_R0.

    Returns:
        (b, uncertainty, c) with the largest b_R misfit as the uncertainty.
    """
    values = sorted((float(R), float(b)) for R, b in values)
    if len(values) < 3:
        raise PreconditionError(f"Extrapolation needs at least 3 radii, got {len(values)}")
    R = np.array([v[0] for v in values])
    b = np.array([v[1] for v in values])
    if range_R0 is not None and np.any(R <= 2.0 * range_R0):
        raise ParameterWindowError(f"Radii {R.tolist()} must all exceed 2 x range {range_R0}")
    x = R ** (2.0 - d)
    if (x.max() - x.min()) / x.max() < FIT_SPREAD_MIN:
        raise IllConditionedFitError(f"Radii {R.tolist()} are too clustered for a fit")
    if np.all(b == 0):
        return 0.0, 0.0, 0.0
    if np.any(b <= 0):
        raise PreconditionError("Truncated energies must be all zero or all positive")
    design = np.stack([np.ones_like(x), x], axis=1)
    (p, q), *_ = np.linalg.lstsq(design, 1.0 / b, rcond=None)
    b_inf = 1.0 / p
    model = 1.0 / (p + q * x)
    residual = float(np.max(np.abs(model - b)))
    return float(b_inf), residual, float(-q / p**2)

# -------------------------------
# Pipelines
# -------------------------------
def scattering_energy(v, config=None, spacing=None, radius_multipliers=None):
    """
    b(v) with uncertainty: solves at truncation radii multiples of range_R0 on spacings h and h/2,
    extrapolates each, and reports the fine value with the combined fit and refinement error.
    """
    settings = {**DEFAULT_CONFIG["scattering"], **(config or {})}
    d = v.dimension
    if v.is_zero:
        return EnergyEstimate(value=0.0, uncertainty=0.0, route="radial", dimension=d)
    multipliers = tuple(radius_multipliers or settings["radius_multipliers"])
    R0 = v.range_R0
    radial = v.is_radial
    if spacing is None:
        cells = settings["cells_per_range"] if radial else settings["orbit_cells_per_range"]
        spacing = R0 / cells
    radii = tuple(m * R0 for m in multipliers)

    def run(h, R):
        if radial:
            return solve_radial(v, d, R, h, settings["residual_tol"])
        return solve_variational(v, R, h, settings)

    fine, coarse = [], []
    if radial:
        for R in radii:
            coarse.append(run(spacing, R))
            fine.append(run(spacing / 2.0, R))
    else:
        # the orbit grid refines only at the smallest radius
        for R in radii:
            coarse.append(run(spacing, R))
        fine_first = run(spacing / 2.0, radii[0])
    b_coarse, _, _ = extrapolate_to_infinity([(s.truncation_R, s.b_value) for s in coarse], d, R0)
    if radial:
        b_fine, fit_res, c = extrapolate_to_infinity([(s.truncation_R, s.b_value) for s in fine], d, R0)
        delta = abs(b_fine - b_coarse)
        finest = fine[-1]
    else:
        b_fine_0 = fine_first.b_value
        delta = abs(b_fine_0 - coarse[0].b_value)
        shift = b_fine_0 - coarse[0].b_value
        _, fit_res, c = extrapolate_to_infinity([(s.truncation_R, s.b_value) for s in coarse], d, R0)
        b_fine = b_coarse + shift
        finest = fine_first
    uncertainty = float(np.hypot(fit_res, delta))
    route = "radial" if radial else "variational"
    logger.info("b(%s) = %.10g +- %.2e via %s route (radii %s)", v.name or v.kind, b_fine, uncertainty,
                route, [round(R, 6) for R in radii])
    return EnergyEstimate(
        value=float(b_fine),
        uncertainty=uncertainty,
        route=route,
        dimension=d,
        radii=tuple(s.truncation_R for s in coarse),
        b_values=tuple(s.b_value for s in fine) if radial else (fine_first.b_value,),
        b_values_coarse=tuple(s.b_value for s in coarse),
        spacing=spacing,
        fit_coefficient=c,
        fit_residual=fit_res,
        refinement_delta=delta,
        tail_value=finest.b_tail,
        residual_sup=finest.residual_sup,
        born_value=finest.born_value,
        residual_over_sup_norm=finest.residual_over_sup_norm,
    )


def modified_scattering_energy(V, config=None, spacing=None, radius_multipliers=None, rng=None,
                               metric=None):
    """
    b_M(V) = det M * b(V(M .)).

    Returns:
        (EnergyEstimate scaled by det M, ScatteringSolution of the pulled-back problem)
    """
    if not V.is_three_body:
        raise PreconditionError("Modified scattering energy needs a three-body potential (d = 6)")
    if not V.symmetry_flag:
        raise AsymmetricPotentialError(
            f"Potential {V.name or V.kind} has not passed the three-body symmetry check")
    metric = metric or metric_matrix()
    if V.is_zero:
        sol = solve_radial(V, 6, 8.0, 1.0 / 8.0)
        return EnergyEstimate(value=0.0, uncertainty=0.0, route="radial", dimension=6,
                              metric_factor=metric.det_M), sol
    W = pullback_by_metric(V, metric)
    if not W.is_radial and not check_rotation_invariance(W, rng):
        raise PullbackError(f"Pullback of {V.name} is neither radial nor rotation invariant; "
                            "no reduced grid represents it")
    estimate = scattering_energy(W, config, spacing, radius_multipliers)
    settings = {**DEFAULT_CONFIG["scattering"], **(config or {})}
    h = estimate.spacing / 2.0 if W.is_radial else estimate.spacing
    R = estimate.radii[-1]
    if W.is_radial:
        solution = solve_radial(W, 6, R, h, settings["residual_tol"])
    else:
        solution = solve_variational(W, R, h, settings)
    scaled = estimate.scaled(metric.det_M)
    logger.info("b_M(%s) = %.10g +- %.2e", V.name, scaled.value, scaled.uncertainty)
    return scaled, solution
