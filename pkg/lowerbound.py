# Lower bound on the ground state energy density
# Temple-inequality estimate on a single box of side ell, the parameter window and the
# error exponent, box occupation statistics and the assembly of box energies into e_lower.

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats
from scipy.spatial import ConvexHull, QhullError

from diag import neumann_gap
from dyson import construct_U, sample_U
from utils import (DEFAULT_CONFIG, IncompleteTableError, ParameterWindowError, PreconditionError,
                   SamplerError)

logger = logging.getLogger(__name__)

C_ERR_SENSITIVITY = (1.0, 10.0, 100.0)
ERROR_TERM_NAMES = ("Y^(1-3(alpha-beta))", "Y^beta", "Y^(alpha-beta)", "epsilon",
                    "epsilon^-1 Y^(7alpha-12beta-1)")
PREFACTOR_RTOL = 1e-6

# -------------------------------
# Parameters and window
# -------------------------------
def validate_window(alpha, beta):
    """
    Check 1/3 < alpha < 3/5 and alpha - 1/3 < beta < (7 alpha - 1)/12, all strict.

    Returns:
        (ok, diagnostics) with one message per violated inequality.
    """
    diagnostics = []
    if not 1.0 / 3.0 < alpha:
        diagnostics.append(f"alpha={alpha} must exceed 1/3")
    if not alpha < 3.0 / 5.0:
        diagnostics.append(f"alpha={alpha} must be below 3/5")
    if not alpha - 1.0 / 3.0 < beta:
        diagnostics.append(f"beta={beta} must exceed alpha - 1/3 = {alpha - 1.0 / 3.0:.6g}")
    if not beta < (7.0 * alpha - 1.0) / 12.0:
        diagnostics.append(f"beta={beta} must be below (7 alpha - 1)/12 = {(7.0 * alpha - 1.0) / 12.0:.6g}")
    return not diagnostics, diagnostics


def beta_window(alpha):
    return alpha - 1.0 / 3.0, (7.0 * alpha - 1.0) / 12.0


@dataclass(frozen=True)
class TempleParameters:
    rho: float
    b_M: float
    alpha: float
    beta: float
    epsilon: float = None

    def __post_init__(self):
        if self.rho <= 0 or self.b_M <= 0:
            raise ParameterWindowError("rho and b_M must be positive")
        if not self.Y < 1.0:
            raise ParameterWindowError(f"Dilute regime needs Y < 1, got Y={self.Y:.4g}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", self.default_epsilon)
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterWindowError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def Y(self):
        return self.rho * self.b_M**0.75

    @property
    def a(self):
        return self.b_M**0.25

    @property
    def ell(self):
        return self.a * self.Y ** (-self.alpha)

    @property
    def R(self):
        return self.Y**self.beta

    @property
    def eta(self):
        return 2.0 * self.R

    @property
    def rho_ell3(self):
        return self.rho * self.ell**3

    @property
    def n_max(self):
        return 10.0 * self.rho_ell3

    @property
    def ell_GP(self):
        return self.a / (self.rho * self.a**3)

    @property
    def coupling(self):
        """Unit-box coupling b_M / ell^4."""
        return self.b_M / self.ell**4

    @property
    def default_epsilon(self):
        return self.Y ** ((7.0 * self.alpha - 12.0 * self.beta - 1.0) / 2.0)

    def to_dict(self):
        return {
            "rho": self.rho, "b_M": self.b_M, "alpha": self.alpha, "beta": self.beta,
            "epsilon": self.epsilon, "Y": self.Y, "a": self.a, "ell": self.ell, "R": self.R,
            "eta": self.eta, "n_max": self.n_max, "rho_ell3": self.rho_ell3, "ell_GP": self.ell_GP,
        }


def _temple_settings(config):
    config = config or DEFAULT_CONFIG
    return {**DEFAULT_CONFIG["temple"], **config.get("temple", {})}

# -------------------------------
# Expectation of W_U on the constant state
# -------------------------------
def _check_n(params, n):
    if not (isinstance(n, (int, np.integer)) and 0 <= n <= params.n_max):
        raise PreconditionError(f"n={n} must be an integer in [0, 10 rho ell^3 = {params.n_max:.4g}]")


def leading_term(params, n):
    return params.coupling / 6.0 * n * (n - 1) * (n - 2)


def correction_factors(params, n, c_geom):
    """Clamped factors multiplying the leading term in the lower estimate of <W_U>."""
    return {
        "exclusion": max(1.0 - c_geom * n * params.R**3, 0.0),
        "box": max(1.0 - params.eta, 0.0) ** 3,
        "dyson": max(1.0 - c_geom * params.a / (params.ell * params.R), 0.0),
    }


def expectation_WU(params, n, config=None):
    """
    Lower estimate of <1, W_U 1> on the unit box and the scale-free upper estimate Y^{3 - 5 alpha}.

    Returns:
        (value, upper_estimate)
    """
    _check_n(params, n)
    c_geom = _temple_settings(config)["c_geom"]
    factors = correction_factors(params, n, c_geom)
    value = leading_term(params, n) * factors["exclusion"] * factors["box"] * factors["dyson"]
    return value, params.Y ** (3.0 - 5.0 * params.alpha)


def wu_expectation_monte_carlo(params, n, samples, rng, config=None, U=None):
    """
    Monte Carlo value of <1, W_U 1> for n uniform particles in the unit box.

    The pair (x_i - x_j, x_i - x_k) is drawn from U_R directly, so every ordered triple has
    the same weight and the estimator needs no rejection of the peaked U_R.

    Returns:
        (mean, standard error)
    """
    _check_n(params, n)
    if n < 3:
        return 0.0, 0.0
    settings = _temple_settings(config)
    U = U or construct_U(settings["u_inner"], settings["u_outer"], 6)
    R, eta = params.R, params.eta
    half = 0.5
    xi = rng.uniform(-half, half, size=(samples, 3))
    y = sample_U(U, samples, rng) * R
    xj, xk = xi - y[:, :3], xi - y[:, 3:]
    inside = (np.all(np.abs(xi) <= half * (1.0 - eta), axis=1)
              & np.all(np.abs(xj) <= half, axis=1) & np.all(np.abs(xk) <= half, axis=1))
    if n > 3:
        centroid = (xi + xj + xk) / 3.0
        others = rng.uniform(-half, half, size=(samples, n - 3, 3))
        far = np.all(np.linalg.norm(others - centroid[:, None, :], axis=-1) > 2.0 * R, axis=1)
        inside &= far
    dyson = max(1.0 - settings["c_geom"] * params.a / (params.ell * params.R), 0.0)
    prefactor = params.coupling / 6.0 * dyson * n * (n - 1) * (n - 2)
    weights = inside.astype(float)
    return float(prefactor * weights.mean()), float(prefactor * weights.std(ddof=1) / np.sqrt(samples))

# -------------------------------
# Temple bound
# -------------------------------
def error_exponents(params):
    """Exponents of Y for the five error terms; epsilon enters through log epsilon / log Y."""
    alpha, beta = params.alpha, params.beta
    eps_power = np.log(params.epsilon) / np.log(params.Y)
    return {
        ERROR_TERM_NAMES[0]: 1.0 - 3.0 * (alpha - beta),
        ERROR_TERM_NAMES[1]: beta,
        ERROR_TERM_NAMES[2]: alpha - beta,
        ERROR_TERM_NAMES[3]: eps_power,
        ERROR_TERM_NAMES[4]: 7.0 * alpha - 12.0 * beta - 1.0 - eps_power,
    }


def error_terms(params):
    Y, eps = params.Y, params.epsilon
    alpha, beta = params.alpha, params.beta
    return {
        ERROR_TERM_NAMES[0]: Y ** (1.0 - 3.0 * (alpha - beta)),
        ERROR_TERM_NAMES[1]: Y**beta,
        ERROR_TERM_NAMES[2]: Y ** (alpha - beta),
        ERROR_TERM_NAMES[3]: eps,
        ERROR_TERM_NAMES[4]: Y ** (7.0 * alpha - 12.0 * beta - 1.0) / eps,
    }


@dataclass
class TempleReport:
    n: int
    parameters: dict
    expectation_WU: float
    expectation_WU_max: float
    upper_estimate: float
    variance_WU: float
    gap: float
    gap_readings: dict
    temple_value: float
    temple_correction: float
    leading_term: float
    error_terms: dict
    error_exponents: dict
    correction: float
    lower_bound: float
    nu: float
    valid: bool
    c_err_sensitivity: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)

    @property
    def relative_correction(self):
        return self.correction / self.leading_term if self.leading_term > 0 else np.inf

    def to_dict(self):
        return {
            "n": self.n, "parameters": self.parameters, "expectation_WU": self.expectation_WU,
            "expectation_WU_max": self.expectation_WU_max, "upper_estimate": self.upper_estimate,
            "variance_WU": self.variance_WU, "gap": self.gap, "gap_readings": self.gap_readings,
            "temple_value": self.temple_value, "temple_correction": self.temple_correction,
            "leading_term": self.leading_term, "error_terms": self.error_terms,
            "error_exponents": self.error_exponents, "correction": self.correction,
            "lower_bound": self.lower_bound, "nu": self.nu, "cond_temple": self.valid,
            "c_err_sensitivity": self.c_err_sensitivity, "factors": self.factors,
        }


def temple_lower_bound(params, n, config=None):
    """
    Temple lower bound for n bosons in the unit box with kinetic weight epsilon.

    The perturbation is (1 - epsilon) W_U with <W_U> between the lower estimate of expectation_WU
    and leading * (1 - C a/(ell R)), and <W_U^2> <= (sup W_U)^2 from the at-most-two-triangles
    bound. When the gap condition fails the report is returned with valid=False and no bound.

    Args:
        params: TempleParameters inside the (alpha, beta) window.
        n: particle number, 0 <= n <= 10 rho ell^3.
        config: full configuration dict; uses the [temple] section.

    Returns:
        TempleReport
    """
    ok, diagnostics = validate_window(params.alpha, params.beta)
    if not ok:
        raise ParameterWindowError("; ".join(diagnostics))
    _check_n(params, n)
    settings = _temple_settings(config)
    c_geom, c_err, eps = settings["c_geom"], settings["c_err"], params.epsilon
    U = construct_U(settings["u_inner"], settings["u_outer"], 6)

    leading = leading_term(params, n)
    factors = correction_factors(params, n, c_geom)
    expectation, upper_estimate = expectation_WU(params, n, config)
    expectation_max = leading * factors["dyson"]
    sup_W = params.coupling / 6.0 * factors["dyson"] * 2.0 * n * U.sup_norm * params.R**-6
    second_moment = sup_W**2
    variance = max(second_moment - expectation**2, 0.0)

    sites = int(settings["gap_sites"])
    gap = eps * neumann_gap(sites, 1.0 / sites)
    gap_readings = {"discrete_neumann": gap, "continuum": eps * np.pi**2, "literal": eps * np.pi}
    valid = bool(gap > (1.0 - eps) * expectation_max)

    terms = error_terms(params)
    exponents = error_exponents(params)
    total = sum(terms.values())
    scale = params.rho_ell3**3 * params.coupling
    correction = c_err * scale * total
    if valid:
        temple_correction = (1.0 - eps) ** 2 * variance / (gap - (1.0 - eps) * expectation_max)
        temple_value = (1.0 - eps) * expectation - temple_correction
        lower_bound = leading - correction
        sensitivity = {str(c): leading - c * scale * total for c in C_ERR_SENSITIVITY}
    else:
        logger.warning("Temple condition fails for n=%d: gap %.4g <= (1-eps)<W> %.4g",
                       n, gap, (1.0 - eps) * expectation_max)
        temple_correction = temple_value = lower_bound = None
        sensitivity = {str(c): None for c in C_ERR_SENSITIVITY}
    return TempleReport(
        n=int(n), parameters=params.to_dict(), expectation_WU=expectation,
        expectation_WU_max=expectation_max, upper_estimate=upper_estimate, variance_WU=variance,
        gap=gap, gap_readings=gap_readings, temple_value=temple_value,
        temple_correction=temple_correction, leading_term=leading, error_terms=terms,
        error_exponents=exponents, correction=correction, lower_bound=lower_bound,
        nu=float(min(exponents.values())), valid=valid, c_err_sensitivity=sensitivity,
        factors=factors,
    )

# -------------------------------
# Error exponent
# -------------------------------
def nu_exponent(alpha, beta):
    return min(1.0 - 3.0 * (alpha - beta), beta, alpha - beta, (7.0 * alpha - 12.0 * beta - 1.0) / 2.0,
               3.0 * alpha - 1.0, 3.0 * (1.0 - alpha))


@dataclass(frozen=True)
class ExponentOptimum:
    alpha: float
    beta: float
    nu: float
    grid_alpha: float
    grid_beta: float
    grid_nu: float
    resolution: int

    def to_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "nu": self.nu, "grid_alpha": self.grid_alpha,
                "grid_beta": self.grid_beta, "grid_nu": self.grid_nu, "resolution": self.resolution}


def grid_exponent(resolution=400):
    """Largest nu over an interior grid of the admissible (alpha, beta) window."""
    t = (np.arange(resolution) + 0.5) / resolution
    alpha = 1.0 / 3.0 + t * (3.0 / 5.0 - 1.0 / 3.0)
    lo, hi = beta_window(alpha)
    A = np.repeat(alpha[:, None], resolution, axis=1)
    B = lo[:, None] + t[None, :] * (hi - lo)[:, None]
    nu = np.minimum.reduce([1.0 - 3.0 * (A - B), B, A - B, (7.0 * A - 12.0 * B - 1.0) / 2.0,
                            3.0 * A - 1.0, 3.0 * (1.0 - A)])
    i, j = np.unravel_index(np.argmax(nu), nu.shape)
    return float(A[i, j]), float(B[i, j]), float(nu[i, j])


def optimize_exponent(resolution=400):
    """
    Maximize nu(alpha, beta) over the window: grid search, then the exact optimum of the
    piecewise-linear objective as a linear program in (alpha, beta, t).
    """
    ga, gb, gnu = grid_exponent(resolution)
    # maximize t subject to t <= each linear piece
    A_ub = np.array([
        [3.0, -3.0, 1.0],
        [0.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0],
        [-3.5, 6.0, 1.0],
        [-3.0, 0.0, 1.0],
        [3.0, 0.0, 1.0],
    ])
    b_ub = np.array([1.0, 0.0, 0.0, -0.5, -1.0, 3.0])
    result = optimize.linprog(c=[0.0, 0.0, -1.0], A_ub=A_ub, b_ub=b_ub,
                              bounds=[(1.0 / 3.0, 3.0 / 5.0), (None, None), (None, None)], method="highs")
    if result.success and -result.fun >= gnu:
        alpha, beta, nu = (float(v) for v in result.x)
    else:
        logger.warning("Linear program refinement failed (%s); keeping grid optimum", result.message)
        alpha, beta, nu = ga, gb, gnu
    logger.info("Exponent optimum nu=%.6f at alpha=%.6f beta=%.6f (grid nu=%.6f)", nu, alpha, beta, gnu)
    return ExponentOptimum(alpha=alpha, beta=beta, nu=nu, grid_alpha=ga, grid_beta=gb, grid_nu=gnu,
                           resolution=resolution)

# -------------------------------
# Box statistics
# -------------------------------
@dataclass(frozen=True)
class BoxStatistics:
    c_k: np.ndarray
    M_boxes: int
    rho_ell3: float
    draws: int

    def to_dict(self):
        return {"c_k": self.c_k, "M_boxes": self.M_boxes, "rho_ell3": self.rho_ell3, "draws": self.draws}


def uniform_sampler(rng, boxes, N):
    """Independent uniform placement of N particles into the boxes."""
    return rng.integers(0, boxes, size=N)


def equal_fill_sampler(rng, boxes, N):
    """Deterministic placement of N / boxes particles in every box."""
    if N % boxes:
        raise SamplerError(f"Equal filling needs N divisible by the box count, got N={N}, boxes={boxes}")
    return np.repeat(np.arange(boxes), N // boxes)


def box_statistics(sampler, M_boxes, N, draws=1, rng=None):
    """
    Estimate c_k, the fraction of boxes holding exactly k particles, for M_boxes^3 boxes.

    Each draw contributes an exact histogram, so sum c_k = 1 and sum k c_k = N / M^3 hold
    for every sampler.
    """
    rng = rng if rng is not None else np.random.default_rng()
    boxes = int(M_boxes) ** 3
    c = np.zeros(N + 1)
    for _ in range(draws):
        assignment = np.asarray(sampler(rng, boxes, N))
        if assignment.shape != (N,) or not np.issubdtype(assignment.dtype, np.integer):
            raise SamplerError(f"Sampler must return {N} integer box indices, got shape {assignment.shape}")
        if N and (assignment.min() < 0 or assignment.max() >= boxes):
            raise SamplerError("Sampler returned a box index out of range")
        occupation = np.bincount(assignment, minlength=boxes)
        c += np.bincount(occupation, minlength=N + 1)[: N + 1]
    c /= boxes * draws
    return BoxStatistics(c_k=c, M_boxes=int(M_boxes), rho_ell3=N / boxes, draws=int(draws))


def poisson_distance(c_k, lam):
    """Total-variation distance between c_k and Poisson(lam)."""
    k = np.arange(len(c_k))
    pmf = stats.poisson.pmf(k, lam)
    return 0.5 * (np.abs(c_k - pmf).sum() + max(1.0 - pmf.sum(), 0.0))

# -------------------------------
# Thermodynamic assembly
# -------------------------------
def leading_energy_table(b_M, ell, k_max):
    """E(ell, k) from the leading term b_M k(k-1)(k-2) / (6 ell^6)."""
    return {k: b_M / (6.0 * ell**6) * k * (k - 1) * (k - 2) for k in range(int(k_max) + 1)}


def temple_energy_table(params, config=None):
    """E(ell, k) >= ell^-2 max(temple lower bound, 0) for every k <= 10 rho ell^3."""
    table = {}
    for k in range(int(np.floor(params.n_max)) + 1):
        report = temple_lower_bound(params, k, config)
        unit = report.lower_bound if report.valid else 0.0
        table[k] = max(unit, 0.0) / params.ell**2
    return table


def lower_convex_envelope(k, E):
    """Largest convex minorant of the points (k, E), as a callable."""
    k = np.asarray(k, dtype=float)
    E = np.asarray(E, dtype=float)
    span = max(np.ptp(E), 1e-300)
    points = np.column_stack([k / max(k.max(), 1.0), (E - E.min()) / span])
    try:
        hull = ConvexHull(points)
    except QhullError:
        # collinear table
        return lambda x: np.interp(x, k, E)
    lower = np.unique(hull.simplices[hull.equations[:, 1] < 0].ravel())
    vertices = np.union1d(lower, [np.argmin(k), np.argmax(k)])
    order = np.argsort(k[vertices])
    kv, Ev = k[vertices][order], E[vertices][order]
    return lambda x: np.interp(x, kv, Ev)


@dataclass
class ThermoLowerReport:
    e_lower: float
    per_box: float
    x_star: float
    rho_ell3: float
    K: int
    ell: float
    tail_prefactor: float
    display_prefactor: float
    prefactor_flag: bool
    asymptotic: float
    leading_density: float

    def to_dict(self):
        return {
            "e_lower": self.e_lower, "per_box": self.per_box, "x_star": self.x_star,
            "rho_ell3": self.rho_ell3, "K": self.K, "ell": self.ell,
            "tail_prefactor": self.tail_prefactor, "display_prefactor": self.display_prefactor,
            "prefactor_flag": self.prefactor_flag, "asymptotic": self.asymptotic,
            "leading_density": self.leading_density,
            "ratio_to_leading": self.e_lower / self.leading_density,
        }


def assemble_thermo_lower(rho, b_M, alpha, beta, E_table, scan_points=513):
    """
    Combine box energies into a lower bound on the energy density.

    With m = rho ell^3 and K = floor(10 m), boxes with k <= K particles contribute at least the
    lower convex envelope at their mean occupation x, and boxes with k > K at least
    k E(ell, K) / (2K) by superadditivity. The bound per box is
        f(x) = Env(x) + E(ell, K) / (2K) * (m - x),
    minimized over x in [0, m]; e_lower = f(x*) / ell^3.

    Raises:
        IncompleteTableError: E_table misses some k <= K.
    """
    params = TempleParameters(rho=rho, b_M=b_M, alpha=alpha, beta=beta)
    m, ell = params.rho_ell3, params.ell
    K = int(np.floor(10.0 * m))
    missing = [k for k in range(K + 1) if k not in E_table]
    if missing:
        raise IncompleteTableError(f"E_table misses {len(missing)} occupations up to K={K}, first {missing[0]}")
    ks = np.arange(K + 1)
    Es = np.array([E_table[k] for k in ks], dtype=float)
    envelope = lower_convex_envelope(ks, Es)
    slope = Es[K] / (2.0 * K) if K > 0 else 0.0
    display = b_M / (12.0 * ell**6) * (K - 1) * (K - 2)
    flag = bool(abs(slope - display) > PREFACTOR_RTOL * max(abs(display), 1e-300))
    if flag:
        logger.warning("Tail prefactor E_K/(2K)=%.6g differs from the display reading %.6g", slope, display)

    def f(x):
        return float(envelope(x) + slope * (m - x))

    grid = np.linspace(0.0, m, scan_points)
    values = np.array([f(x) for x in grid])
    i = int(np.argmin(values))
    candidates = [(values[i], grid[i])]
    if 0 < i < scan_points - 1:
        result = optimize.minimize_scalar(f, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden")
        if 0.0 <= result.x <= m:
            candidates.append((result.fun, result.x))
    per_box, x_star = min(candidates)
    e_lower = per_box / ell**3
    leading_density = rho**3 * b_M / 6.0
    asymptotic = leading_density * (1.0 - 3.0 * params.Y ** (3.0 * alpha - 1.0))
    logger.info("Assembly: m=%.6g K=%d x*=%.6g e_lower=%.6g (%.6g of rho^3 b/6)",
                m, K, x_star, e_lower, e_lower / leading_density)
    return ThermoLowerReport(
        e_lower=e_lower, per_box=per_box, x_star=float(x_star), rho_ell3=m, K=K, ell=ell,
        tail_prefactor=slope, display_prefactor=display, prefactor_flag=flag,
        asymptotic=asymptotic, leading_density=leading_density,
    )
