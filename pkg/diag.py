# Exact diagonalization of lattice bosons with a three-body interaction
# Symmetric (occupation) basis on s^3 sites, sparse Hamiltonian assembly, Krylov ground states,
# the discrete scattering energy of the same lattice operator and the universality experiment.

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg, sparse
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from potentials import SUPPORT_THRESHOLD
from utils import (DEFAULT_CONFIG, AsymmetricPotentialError, ConfigError, ConvergenceError,
                   DimensionCapError, GridMismatchError, ParameterWindowError, PreconditionError)

logger = logging.getLogger(__name__)

BOUNDARIES = ("neumann", "dirichlet", "periodic")
# unit lattice displacements along x, y, z in both directions
_DIRECTIONS = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]])
ASSEMBLY_CHUNK = 200_000

# -------------------------------
# Box
# -------------------------------
def neumann_gap(sites, spacing):
    """First nonzero eigenvalue of the discrete Neumann Laplacian on `sites` cells of width `spacing`."""
    return 4.0 / spacing**2 * np.sin(np.pi / (2.0 * sites)) ** 2


@dataclass(frozen=True)
class LatticeBox:
    sites_per_side: int
    spacing: float = 1.0
    boundary: str = "neumann"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"Unknown boundary '{self.boundary}', expected one of {BOUNDARIES}")
        if int(self.sites_per_side) < 3:
            raise ParameterWindowError(f"Need at least 3 sites per side, got {self.sites_per_side}")
        if self.spacing <= 0:
            raise ParameterWindowError("Lattice spacing must be positive")

    @property
    def side(self):
        return self.sites_per_side * self.spacing

    @property
    def site_count(self):
        return self.sites_per_side**3

    def coordinates(self):
        """Cell-center coordinates of all sites, shape (s^3, 3), x fastest last."""
        s = self.sites_per_side
        axis = (np.arange(s) + 0.5) * self.spacing
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
        return grid.reshape(s**3, 3)

    def site_index(self, ijk):
        s = self.sites_per_side
        ijk = np.asarray(ijk)
        return (ijk[..., 0] * s + ijk[..., 1]) * s + ijk[..., 2]

    def displacement(self, a, b):
        """x_a - x_b, folded to the minimum image for periodic boxes."""
        d = a - b
        if self.boundary == "periodic":
            d = d - self.side * np.round(d / self.side)
        return d

    def one_body_1d(self):
        s, h2 = self.sites_per_side, self.spacing**2
        off = -np.ones(s - 1)
        diag = np.full(s, 2.0)
        if self.boundary == "neumann":
            diag[0] = diag[-1] = 1.0
        T = sparse.diags([off, diag, off], [-1, 0, 1], format="lil")
        if self.boundary == "periodic":
            T[0, s - 1] = T[s - 1, 0] = -1.0
        return T.tocsr() / h2

    def one_body(self):
        """Single-particle -Delta on s^3 sites."""
        T1 = self.one_body_1d()
        I = sparse.identity(self.sites_per_side, format="csr")
        return (sparse.kron(sparse.kron(T1, I), I) + sparse.kron(sparse.kron(I, T1), I)
                + sparse.kron(sparse.kron(I, I), T1)).tocsr()

    def neighbor_table(self):
        """(s^3, 6) neighbor site indices, -1 where the hop leaves the box."""
        s = self.sites_per_side
        ijk = np.stack(np.unravel_index(np.arange(s**3), (s, s, s)), axis=-1)
        moved = ijk[:, None, :] + _DIRECTIONS[None, :, :]
        if self.boundary == "periodic":
            moved %= s
            return self.site_index(moved)
        inside = np.all((moved >= 0) & (moved < s), axis=-1)
        return np.where(inside, self.site_index(np.clip(moved, 0, s - 1)), -1)

    def to_dict(self):
        return {"sites_per_side": self.sites_per_side, "spacing": self.spacing, "side": self.side,
                "boundary": self.boundary}

# -------------------------------
# Symmetric basis
# -------------------------------
class SymmetricBasis:
    """
    Bosonic basis of n particles on S sites: sorted site tuples in lexicographic order
    (the combinations_with_replacement order), ranked by the combinatorial number system.
    """

    def __init__(self, n, sites):
        if n < 1:
            raise PreconditionError("Need at least one particle")
        self.n = int(n)
        self.sites = int(sites)
        self.span = self.sites + self.n - 1
        self.pascal = self._pascal(self.span, self.n)
        self.dimension = int(self.pascal[self.span, self.n])
        self._states = None

    @staticmethod
    def _pascal(top, k_max):
        table = np.zeros((top + 1, k_max + 1), dtype=np.int64)
        table[:, 0] = 1
        for a in range(1, top + 1):
            table[a, 1:] = table[a - 1, 1:] + table[a - 1, :-1]
        return table

    @property
    def states(self):
        if self._states is None:
            flat = np.fromiter(
                itertools.chain.from_iterable(itertools.combinations_with_replacement(range(self.sites), self.n)),
                dtype=np.int32, count=self.dimension * self.n)
            self._states = flat.reshape(self.dimension, self.n)
        return self._states

    def rank(self, tuples):
        """Index of sorted site tuples (..., n) in the basis."""
        q = np.asarray(tuples, dtype=np.int64) + np.arange(self.n)
        colex = np.zeros(q.shape[:-1], dtype=np.int64)
        for i in range(self.n):
            colex += self.pascal[self.span - 1 - q[..., i], self.n - i]
        return self.dimension - 1 - colex

    def occupation(self, index):
        return np.bincount(self.states[index], minlength=self.sites)

    def index_of_occupation(self, occupation):
        occupation = np.asarray(occupation)
        if occupation.sum() != self.n or occupation.shape != (self.sites,):
            raise PreconditionError(f"Occupation must hold {self.n} particles on {self.sites} sites")
        return int(self.rank(np.repeat(np.arange(self.sites), occupation)))

# -------------------------------
# Hamiltonian
# -------------------------------
@dataclass
class LatticeHamiltonian:
    matrix: sparse.csr_matrix = field(repr=False)
    box: LatticeBox
    n: int
    basis: SymmetricBasis = field(repr=False)
    interaction: np.ndarray = field(repr=False)
    memory_bytes: int

    @property
    def dimension(self):
        return self.basis.dimension


def estimate_memory(dimension, n):
    nnz = dimension * (6 * n + 1)
    # COO arrays during assembly, CSR afterwards, the basis itself
    return int(nnz * (8 + 4 + 4) + nnz * (8 + 4) + (dimension + 1) * 4 + dimension * n * 4)


def _slot_triples(n):
    return list(itertools.combinations(range(n), 3))


def interaction_diagonal(box, states, V):
    """sum_{i<j<k} V(x_pi - x_pj, x_pi - x_pk) for every state row."""
    n = states.shape[1]
    coords = box.coordinates()
    total = np.zeros(states.shape[0])
    for i, j, k in _slot_triples(n):
        xi, xj, xk = coords[states[:, i]], coords[states[:, j]], coords[states[:, k]]
        total += V(np.concatenate([box.displacement(xi, xj), box.displacement(xi, xk)], axis=-1))
    return total


def build_hamiltonian(box, n, V, config=None):
    """
    Sum of one-body lattice Laplacians plus the three-body interaction on the symmetric basis.

    Hopping q -> p in a state with occupations m carries T_pq sqrt(m_q (m_p + 1)); the interaction
    is diagonal. Matrix elements are generated once per (state, hop), so the result is exactly
    symmetric.

    Raises:
        AsymmetricPotentialError: V is not flagged symmetric.
        DimensionCapError: the estimated footprint exceeds runtime.mem_cap_bytes.
    """
    config = config or DEFAULT_CONFIG
    cap = {**DEFAULT_CONFIG["runtime"], **config.get("runtime", {})}["mem_cap_bytes"]
    if not V.is_three_body:
        raise PreconditionError("The lattice interaction needs a three-body potential (d = 6)")
    if not V.symmetry_flag:
        raise AsymmetricPotentialError(f"Potential {V.name or V.kind} is not flagged symmetric")
    basis = SymmetricBasis(n, box.site_count)
    memory = estimate_memory(basis.dimension, n)
    if memory > cap:
        raise DimensionCapError(
            f"Basis dimension {basis.dimension} needs about {memory / 1024**3:.2f} GiB, cap is {cap / 1024**3:.2f} GiB")
    logger.info("Building H: s=%d n=%d dimension=%d boundary=%s", box.sites_per_side, n,
                basis.dimension, box.boundary)

    states = basis.states
    T1 = box.one_body()
    t_diag = T1.diagonal()
    hop = -1.0 / box.spacing**2
    neighbors = box.neighbor_table()
    rows, cols, vals = [], [], []
    diagonal = np.zeros(basis.dimension)
    interaction = np.zeros(basis.dimension) if n < 3 else None
    parts = []
    for start in range(0, basis.dimension, ASSEMBLY_CHUNK):
        chunk = states[start:start + ASSEMBLY_CHUNK]
        index = np.arange(start, start + chunk.shape[0])
        counts = (chunk[:, :, None] == chunk[:, None, :]).sum(axis=2)
        first = np.ones(chunk.shape, dtype=bool)
        first[:, 1:] = chunk[:, 1:] != chunk[:, :-1]
        diagonal[index] = t_diag[chunk].sum(axis=1)
        if n >= 3:
            parts.append(interaction_diagonal(box, chunk, V))
        for i in range(n):
            for d in range(_DIRECTIONS.shape[0]):
                target_site = neighbors[chunk[:, i], d]
                ok = first[:, i] & (target_site >= 0)
                if not np.any(ok):
                    continue
                moved = chunk[ok].copy()
                moved[:, i] = target_site[ok]
                moved.sort(axis=1)
                m_p = (chunk[ok] == target_site[ok][:, None]).sum(axis=1)
                amp = hop * np.sqrt(counts[ok, i] * (m_p + 1.0))
                rows.append(basis.rank(moved).astype(np.int32))
                cols.append(index[ok].astype(np.int32))
                vals.append(amp)
    if interaction is None:
        interaction = np.concatenate(parts)
    diagonal += interaction
    rows.append(np.arange(basis.dimension, dtype=np.int32))
    cols.append(np.arange(basis.dimension, dtype=np.int32))
    vals.append(diagonal)
    H = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(basis.dimension, basis.dimension)).tocsr()
    H.sum_duplicates()
    return LatticeHamiltonian(matrix=H, box=box, n=int(n), basis=basis, interaction=interaction,
                              memory_bytes=memory)


def tensor_product_hamiltonian(box, n, V):
    """First-quantized H on (s^3)^n without symmetrization; small boxes only."""
    T = box.one_body()
    S = box.site_count
    I = sparse.identity(S, format="csr")
    H = sparse.csr_matrix((S**n, S**n))
    for i in range(n):
        factors = [I] * n
        factors[i] = T
        term = factors[0]
        for f in factors[1:]:
            term = sparse.kron(term, f, format="csr")
        H = H + term
    if n >= 3:
        labels = np.stack(np.unravel_index(np.arange(S**n), (S,) * n), axis=-1)
        H = H + sparse.diags(interaction_diagonal(box, labels, V))
    return H.tocsr()


def symmetrizer(basis):
    """Isometry from the symmetric basis into the tensor product space, shape (S^n, D)."""
    rows, cols, vals = [], [], []
    S = basis.sites
    for col, state in enumerate(basis.states):
        perms = set(itertools.permutations(state.tolist()))
        weight = 1.0 / np.sqrt(len(perms))
        for p in perms:
            rows.append(np.ravel_multi_index(p, (S,) * basis.n))
            cols.append(col)
            vals.append(weight)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(S**basis.n, basis.dimension))

# -------------------------------
# Ground state
# -------------------------------
@dataclass
class GroundStateResult:
    energy: float
    vector: np.ndarray = field(repr=False)
    residual: float
    iterations: int
    method: str

    def to_dict(self):
        return {"energy": self.energy, "residual": self.residual, "iterations": self.iterations,
                "method": self.method}


def ground_state(H, tol=1e-8, config=None, seed=0):
    """
    Lowest eigenpair of a sparse symmetric H.

    Dense eigh below diag.dense_limit, otherwise eigsh (which='SA') on a counting LinearOperator
    started from the normalized all-ones vector; on non-convergence one retry from a seeded
    random vector.

    Raises:
        ConvergenceError: eigsh fails twice or the residual exceeds tol * max(|E|, max|H_ii|).
    """
    config = config or DEFAULT_CONFIG
    settings = {**DEFAULT_CONFIG["diag"], **config.get("diag", {})}
    matrix = H.matrix if isinstance(H, LatticeHamiltonian) else H
    D = matrix.shape[0]
    if D <= settings["dense_limit"]:
        values, vectors = linalg.eigh(matrix.toarray(), subset_by_index=[0, 0])
        energy, vector, iterations, method = float(values[0]), vectors[:, 0], 1, "dense"
    else:
        counter = {"matvec": 0}

        def matvec(x):
            counter["matvec"] += 1
            return matrix @ x

        op = LinearOperator((D, D), matvec=matvec, dtype=float)
        starts = [np.ones(D) / np.sqrt(D), np.random.default_rng(seed).standard_normal(D)]
        for attempt, v0 in enumerate(starts):
            try:
                values, vectors = eigsh(op, k=1, which="SA", v0=v0, tol=settings["eigsh_tol"],
                                        maxiter=settings["eigsh_maxiter"])
                break
            except ArpackNoConvergence as e:
                logger.warning("eigsh attempt %d did not converge: %s", attempt + 1, e)
        else:
            raise ConvergenceError(f"eigsh did not converge for dimension {D}")
        energy, vector, iterations, method = float(values[0]), vectors[:, 0], counter["matvec"], "eigsh"
    vector = vector / np.linalg.norm(vector)
    if vector.sum() < 0:
        vector = -vector
    residual = float(np.linalg.norm(matrix @ vector - energy * vector))
    scale = max(abs(energy), float(np.max(np.abs(matrix.diagonal()))), 1e-300)
    if residual > tol * scale:
        raise ConvergenceError(f"Ground state residual {residual:.3e} exceeds {tol:.1e} * {scale:.3e}")
    logger.info("Ground state E0=%.12g residual=%.2e (%s, %d matvecs)", energy, residual, method, iterations)
    return GroundStateResult(energy=energy, vector=vector, residual=residual, iterations=iterations,
                             method=method)

# -------------------------------
# Discrete scattering energy
# -------------------------------
HEAT_FFT_SIZE = 256
HEAT_WINDOW = 16
LOG_T_RANGE = (np.log(1e-6), np.log(400.0))
LOG_T_STEP = 0.05
SUPPORT_CAP = 3000
SUPPORT_RADIUS_CAP = 5


def _pair_symbol(size):
    k = 2.0 * np.pi * np.fft.fftfreq(size)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    return 2.0 * (3.0 - np.cos(k1 + k2) - np.cos(k1) - np.cos(k2))


@lru_cache(maxsize=1)
def heat_kernel_table():
    """
    Heat kernels of the unit-spacing relative-coordinate operator for one Cartesian axis,
    on the offsets [-W, W]^2 and log-spaced times, with trapezoid weights in log t.

    Returns:
        (times, weights, table) with table shape (len(times), 2W+1, 2W+1).
    """
    symbol = _pair_symbol(HEAT_FFT_SIZE)
    log_t = np.arange(LOG_T_RANGE[0], LOG_T_RANGE[1] + 0.5 * LOG_T_STEP, LOG_T_STEP)
    times = np.exp(log_t)
    weights = np.full(times.size, LOG_T_STEP) * times
    weights[0] *= 0.5
    weights[-1] *= 0.5
    offsets = np.arange(-HEAT_WINDOW, HEAT_WINDOW + 1)
    table = np.empty((times.size, offsets.size, offsets.size))
    for i, t in enumerate(times):
        kernel = np.fft.ifft2(np.exp(-t * symbol)).real
        table[i] = kernel[np.ix_(offsets % HEAT_FFT_SIZE, offsets % HEAT_FFT_SIZE)]
    return times, weights, table


def green_function_unit(differences, chunk=20_000):
    """
    G_1(m) = int_0^inf p_t(m) dt for integer offsets m (U, 6) of the unit-spacing lattice.

    p_t factorizes over the three Cartesian axes; below t0 only m = 0 contributes (p_t(0) ~ 1)
    and above T the continuum tail int_T^inf (4 sqrt(3) pi t)^{-3} dt is added.
    """
    differences = np.asarray(differences, dtype=np.int64)
    if differences.size and np.abs(differences).max() > HEAT_WINDOW:
        raise DimensionCapError(f"Lattice offsets beyond {HEAT_WINDOW} sites are not tabulated")
    times, weights, table = heat_kernel_table()
    T = times[-1]
    tail = (4.0 * np.sqrt(3.0) * np.pi) ** -3 / (2.0 * T**2)
    G = np.empty(differences.shape[0])
    o = HEAT_WINDOW
    for start in range(0, differences.shape[0], chunk):
        m = differences[start:start + chunk]
        p = np.ones((times.size, m.shape[0]))
        for c in range(3):
            p *= table[:, m[:, c] + o, m[:, 3 + c] + o]
        G[start:start + chunk] = weights @ p + tail
    G[np.all(differences == 0, axis=1)] += times[0]
    return G


@dataclass(frozen=True)
class DiscreteScatteringEstimate:
    value: float
    uncertainty: float
    spacing: float
    support_points: int
    coarse_value: float = None

    def to_dict(self):
        return {"value": self.value, "uncertainty": self.uncertainty, "spacing": self.spacing,
                "support_points": self.support_points, "coarse_value": self.coarse_value}


def lattice_support(V, h):
    """Integer offsets m in Z^6 with V(h m) > 0 and the values there."""
    r = int(np.floor(V.range_R0 / h + 1e-12))
    if r > SUPPORT_RADIUS_CAP:
        raise DimensionCapError(f"Support radius of {r} sites exceeds the cap of {SUPPORT_RADIUS_CAP}")
    axis = np.arange(-r, r + 1, dtype=np.int16)
    grid = np.stack(np.meshgrid(*([axis] * 6), indexing="ij"), axis=-1).reshape(-1, 6)
    grid = grid[np.einsum("ij,ij->i", grid, grid) <= (V.range_R0 / h) ** 2 + 1e-9]
    values = V(h * grid.astype(float))
    keep = values > SUPPORT_THRESHOLD
    return grid[keep], values[keep]


def _discrete_b(V, h):
    points, values = lattice_support(V, h)
    if points.shape[0] == 0:
        return 0.0, 0
    if points.shape[0] > SUPPORT_CAP:
        raise DimensionCapError(f"{points.shape[0]} support points exceed the cap of {SUPPORT_CAP}")
    # offsets lie in [-2r, 2r]^6; encode each as one integer so np.unique stays one-dimensional
    base = 4 * SUPPORT_RADIUS_CAP + 1
    powers = base ** np.arange(6, dtype=np.int64)
    codes = (points.astype(np.int64) + 2 * SUPPORT_RADIUS_CAP) @ powers
    keys, inverse = np.unique(codes[:, None] - codes[None, :] + 2 * SUPPORT_RADIUS_CAP * powers.sum(),
                              return_inverse=True)
    unique = (keys[:, None] // powers) % base - 2 * SUPPORT_RADIUS_CAP
    G = green_function_unit(unique)[inverse.ravel()].reshape(points.shape[0], points.shape[0])
    root = np.sqrt(values)
    system = np.eye(points.shape[0]) + h**2 * root[:, None] * G * root[None, :]
    x = linalg.solve(system, root, assume_a="pos")
    return float(h**6 * root @ x), int(points.shape[0])


def discrete_scattering_energy(V, spacing, refine=True):
    """
    Modified scattering energy of V on the lattice h Z^6 with the relative-coordinate stencil of
    sum_i -Delta_{x_i}. With D = diag(V) on the support and G_1 the unit-lattice Green's function,
        b = h^6 1^T D^{1/2} (I + h^2 D^{1/2} G_1 D^{1/2})^{-1} D^{1/2} 1.
    The uncertainty is |b_h - b_2h| when refine is set.
    """
    if isinstance(spacing, LatticeBox):
        spacing = spacing.spacing
    if not V.is_three_body:
        raise GridMismatchError("The discrete scattering energy needs a three-body potential (d = 6)")
    if V.is_zero:
        return DiscreteScatteringEstimate(value=0.0, uncertainty=0.0, spacing=spacing, support_points=0)
    b, count = _discrete_b(V, spacing)
    coarse = uncertainty = None
    if refine:
        coarse, _ = _discrete_b(V, 2.0 * spacing)
        uncertainty = abs(b - coarse)
    logger.info("Discrete scattering energy h=%.4g: b=%.10g on %d support points", spacing, b, count)
    return DiscreteScatteringEstimate(value=b, uncertainty=uncertainty, spacing=spacing,
                                      support_points=count, coarse_value=coarse)


def match_scattering_energy(family, target, bracket, spacing, xtol=1e-12):
    """
    Parameter p in bracket with discrete_scattering_energy(family(p)) = target, by brentq.

    Returns:
        (p, potential)
    """
    def mismatch(p):
        return discrete_scattering_energy(family(p), spacing, refine=False).value - target

    lo, hi = bracket
    if mismatch(lo) * mismatch(hi) > 0:
        raise ParameterWindowError(f"Target b={target} is not bracketed by parameters {bracket}")
    p = brentq(mismatch, lo, hi, xtol=xtol, rtol=1e-12)
    return p, family(p)

# -------------------------------
# Universality
# -------------------------------
def predicted_leading(b, side, n):
    return b / (6.0 * side**6) * n * (n - 1) * (n - 2)


def universality_experiment(V1, V2, box, n, config=None, match_tol=0.02, max_Y=0.1):
    """
    Ground energies of two potentials with matched discrete scattering energy in the same box.

    Raises:
        ParameterWindowError: b mismatch above match_tol, n outside {3, 4} or Y_disc > max_Y.
    """
    if n not in (3, 4):
        raise ParameterWindowError(f"Universality runs use n in {{3, 4}}, got {n}")
    b1 = discrete_scattering_energy(V1, box.spacing, refine=False).value
    b2 = discrete_scattering_energy(V2, box.spacing, refine=False).value
    if b1 <= 0 or b2 <= 0 or abs(b1 - b2) > match_tol * max(b1, b2):
        raise ParameterWindowError(f"Scattering energies not matched within {match_tol:.0%}: {b1:.6g} vs {b2:.6g}")
    b = 0.5 * (b1 + b2)
    Y = n / box.side**3 * b**0.75
    if Y > max_Y:
        raise ParameterWindowError(f"Y_disc={Y:.4g} exceeds {max_Y}")
    E1 = ground_state(build_hamiltonian(box, n, V1, config), config=config)
    E2 = ground_state(build_hamiltonian(box, n, V2, config), config=config)
    leading = predicted_leading(b, box.side, n)
    rel = abs(E1.energy - E2.energy) / max(abs(E1.energy), abs(E2.energy), 1e-300)
    logger.info("Universality n=%d s=%d: E1=%.10g E2=%.10g rel=%.3e Y=%.4g", n, box.sites_per_side,
                E1.energy, E2.energy, rel, Y)
    return {
        "box": box.to_dict(), "n": n, "b_disc": [b1, b2], "Y_disc": Y,
        "E0": [E1.energy, E2.energy], "residual": [E1.residual, E2.residual],
        "relative_difference": rel, "predicted_leading": leading,
        "ratio": [E1.energy / leading, E2.energy / leading],
        "threshold": max(5.0 * np.sqrt(Y), 0.1),
    }
