# Interaction potentials and the three-body metric
# A three-body potential is a function V(x, y) on R^3 x R^3 with x = x1 - x2 and y = x1 - x3,
# evaluated on arrays of shape (..., 6). Generic potentials live on R^d, shape (..., d).

import logging
import os
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gamma

from utils import ConfigError, PreconditionError, tomllib

logger = logging.getLogger(__name__)

# -------------------------------
# Constants
# -------------------------------
POTENTIAL_KINDS = ("radial_metric", "radial_euclidean", "tabulated", "named")
SYMMETRY_SAMPLES = 10_000
SYMMETRY_TOL = 1e-10
SUPPORT_THRESHOLD = 1e-14


def sphere_area(d):
    """|S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)"""
    return 2.0 * np.pi ** (d / 2.0) / gamma(d / 2.0)


def ball_volume(d):
    """|B_d| = pi^{d/2} / Gamma(d/2 + 1)"""
    return np.pi ** (d / 2.0) / gamma(d / 2.0 + 1.0)

# -------------------------------
# Metric Matrix
# -------------------------------
@dataclass(frozen=True)
class MetricMatrix:
    """2x2 block acting on R^3 (+) R^3 as block (x) I_3."""
    block: np.ndarray
    det_M: float
    block_squared: np.ndarray

    @cached_property
    def full(self):
        return np.kron(self.block, np.eye(3))

    @cached_property
    def inverse_block(self):
        return np.linalg.inv(self.block)

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.block)

    @property
    def smallest_singular_value(self):
        return float(np.min(np.abs(self.eigenvalues)))

    def apply(self, y):
        """Return M y for points y of shape (..., 6)."""
        y = np.asarray(y, dtype=float)
        pairs = y.reshape(y.shape[:-1] + (2, 3))
        return np.einsum("ij,...jk->...ik", self.block, pairs).reshape(y.shape)

    def apply_inverse(self, x):
        x = np.asarray(x, dtype=float)
        pairs = x.reshape(x.shape[:-1] + (2, 3))
        return np.einsum("ij,...jk->...ik", self.inverse_block, pairs).reshape(x.shape)


def metric_matrix():
    """The metric M whose square is (1/2)[[2,1],[1,2]] on each coordinate axis."""
    s3 = np.sqrt(3.0)
    block = np.array([[s3 + 1.0, s3 - 1.0], [s3 - 1.0, s3 + 1.0]]) / (2.0 * np.sqrt(2.0))
    return MetricMatrix(
        block=block,
        det_M=float(np.linalg.det(block) ** 3),
        block_squared=block @ block,
    )


def identity_metric():
    """Debug metric M = I."""
    return MetricMatrix(block=np.eye(2), det_M=1.0, block_squared=np.eye(2))

# -------------------------------
# Radial Profiles
# -------------------------------
# Parameters that carry a length (rescaled by lambda); "height" carries energy.
PROFILE_LENGTHS = {
    "wall": ("radius",),
    "gaussian": ("width", "cutoff"),
    "tent": ("radius",),
    "annulus": ("inner", "outer"),
}


@dataclass(frozen=True)
class RadialProfile:
    """Non-negative bounded profile g(r) with compact support."""
    name: str
    params: dict

    def __post_init__(self):
        if self.name not in PROFILE_LENGTHS:
            raise ConfigError(f"Unknown radial profile: {self.name}")
        missing = [k for k in PROFILE_LENGTHS[self.name] + ("height",) if k not in self.params]
        if missing:
            raise ConfigError(f"Profile {self.name} missing parameters: {missing}")
        if self.params["height"] < 0:
            raise PreconditionError("Potential height must be non-negative")

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        p = self.params
        h = p["height"]
        if self.name == "wall":
            return np.where(r <= p["radius"], h, 0.0)
        if self.name == "gaussian":
            return np.where(r <= p["cutoff"], h * np.exp(-0.5 * (r / p["width"]) ** 2), 0.0)
        if self.name == "tent":
            return h * np.clip(1.0 - r / p["radius"], 0.0, None)
        return np.where((r >= p["inner"]) & (r <= p["outer"]), h, 0.0)

    @property
    def support(self):
        p = self.params
        return float({"wall": p.get("radius"), "gaussian": p.get("cutoff"),
                      "tent": p.get("radius"), "annulus": p.get("outer")}[self.name])

    @property
    def breakpoints(self):
        """Radii where g or g' jumps."""
        p = self.params
        if self.name == "annulus":
            return (float(p["inner"]), float(p["outer"]))
        return (self.support,)

    @property
    def sup_norm(self):
        return float(self.params["height"])

    def l1_norm(self, d):
        """Integral of g(|x|) over R^d."""
        p = self.params
        h = p["height"]
        if self.name == "wall":
            return h * ball_volume(d) * p["radius"] ** d
        if self.name == "annulus":
            return h * ball_volume(d) * (p["outer"] ** d - p["inner"] ** d)
        if self.name == "tent":
            return h * sphere_area(d) * p["radius"] ** d / (d * (d + 1))
        value, _ = integrate.quad(lambda r: self(r) * r ** (d - 1), 0.0, self.support,
                                  epsabs=0.0, epsrel=1e-12, limit=200)
        return sphere_area(d) * value

    def rescaled(self, lam):
        """Profile of lam^{-2} g(r / lam)."""
        params = dict(self.params)
        for key in PROFILE_LENGTHS[self.name]:
            params[key] = params[key] * lam
        params["height"] = params["height"] / lam**2
        return RadialProfile(self.name, params)

    def scaled_height(self, factor):
        params = dict(self.params)
        params["height"] = params["height"] * factor
        return RadialProfile(self.name, params)


@dataclass(frozen=True)
class TabulatedProfile:
    """Radial profile given as a table, linearly interpolated and zero past the last node."""
    radii: tuple
    values: tuple
    name: str = "table"

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return np.interp(r, self.radii, self.values, right=0.0)

    @property
    def support(self):
        vals = np.asarray(self.values)
        idx = np.nonzero(vals > SUPPORT_THRESHOLD * max(vals.max(), 1e-300))[0]
        if idx.size == 0:
            return 0.0
        last = min(idx[-1] + 1, len(self.radii) - 1)
        return float(self.radii[last])

    @property
    def breakpoints(self):
        return tuple(float(r) for r in self.radii)

    @property
    def sup_norm(self):
        return float(np.max(self.values))

    def l1_norm(self, d):
        support = max(self.support, 1e-300)
        value, _ = integrate.quad(lambda r: self(r) * r ** (d - 1), 0.0, support,
                                  points=[r for r in self.radii if 0 < r < support][:40],
                                  epsabs=0.0, epsrel=1e-10, limit=400)
        return sphere_area(d) * value

    def rescaled(self, lam):
        return TabulatedProfile(tuple(np.asarray(self.radii) * lam),
                                tuple(np.asarray(self.values) / lam**2), self.name)

    def scaled_height(self, factor):
        return TabulatedProfile(self.radii, tuple(np.asarray(self.values) * factor), self.name)

# -------------------------------
# Potential Specification
# -------------------------------
@dataclass(frozen=True)
class PotentialSpec:
    """
    A compactly supported bounded potential with its norms.

    kind is one of POTENTIAL_KINDS. For radial kinds `radial_profile` holds g:
    radial_euclidean means V(x) = g(|x|); radial_metric means V(x) = g(|M^{-1} x|)
    on R^6, so that V(M y) = g(|y|).
    """
    kind: str
    dimension: int
    range_R0: float
    sup_norm: float
    l1_norm: float
    evaluator: Callable = field(repr=False, compare=False)
    radial_profile: Optional[object] = field(default=None, compare=False)
    params: dict = field(default_factory=dict, compare=False)
    symmetry_flag: bool = False
    name: str = ""

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ConfigError(f"Unknown potential kind: {self.kind}")
        if self.dimension < 3:
            raise PreconditionError(f"Dimension must be >= 3, got {self.dimension}")

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.dimension:
            raise PreconditionError(
                f"Expected points with last axis {self.dimension}, got shape {points.shape}")
        return self.evaluator(points)

    @property
    def is_three_body(self):
        return self.dimension == 6

    @property
    def is_zero(self):
        return self.sup_norm == 0.0

    @property
    def is_radial(self):
        """True if V(x) is a function of |x| alone."""
        return self.kind == "radial_euclidean" or (
            self.kind == "tabulated" and self.radial_profile is not None)

    def radial_values(self, r):
        if self.radial_profile is None:
            raise PreconditionError(f"Potential {self.name or self.kind} is not radial")
        return self.radial_profile(r)

    def with_symmetry_flag(self, flag=True):
        return replace(self, symmetry_flag=flag)

    def rescaled(self, lam):
        """The potential lam^{-2} V(. / lam) with rescaled norms."""
        if lam <= 0:
            raise PreconditionError("Scale factor must be positive")
        base = self.evaluator
        profile = self.radial_profile.rescaled(lam) if self.radial_profile is not None else None
        return replace(
            self,
            range_R0=self.range_R0 * lam,
            sup_norm=self.sup_norm / lam**2,
            l1_norm=self.l1_norm * lam ** (self.dimension - 2),
            evaluator=lambda x: base(np.asarray(x) / lam) / lam**2,
            radial_profile=profile,
            params={**self.params, "scale": self.params.get("scale", 1.0) * lam},
        )

    def descriptor(self):
        """JSON-ready summary used in reports."""
        desc = {
            "name": self.name,
            "kind": self.kind,
            "dimension": self.dimension,
            "range_R0": self.range_R0,
            "sup_norm": self.sup_norm,
            "l1_norm": self.l1_norm,
            "symmetry_flag": self.symmetry_flag,
        }
        if isinstance(self.radial_profile, RadialProfile):
            desc["profile"] = {"name": self.radial_profile.name, **self.radial_profile.params}
        return desc

# -------------------------------
# Constructors
# -------------------------------
def radial_euclidean(profile, dimension, name=None):
    """V(x) = g(|x|) on R^d."""
    return PotentialSpec(
        kind="radial_euclidean",
        dimension=dimension,
        range_R0=profile.support,
        sup_norm=profile.sup_norm,
        l1_norm=profile.l1_norm(dimension),
        evaluator=lambda x: profile(np.linalg.norm(x, axis=-1)),
        radial_profile=profile,
        name=name or f"{profile.name}-euclidean-d{dimension}",
    )


def radial_metric(profile, metric=None, name=None):
    """
    Three-body potential V(x) = g(|M^{-1} x|).

    |M^{-1} x|^2 = (2/3)(|x1-x2|^2 + |x1-x3|^2 + |x2-x3|^2), so V is permutation
    symmetric and its pullback by M is exactly g(|y|).
    """
    metric = metric or metric_matrix()
    max_singular = float(np.max(np.abs(metric.eigenvalues)))
    return PotentialSpec(
        kind="radial_metric",
        dimension=6,
        range_R0=max_singular * profile.support,
        sup_norm=profile.sup_norm,
        l1_norm=metric.det_M * profile.l1_norm(6),
        evaluator=lambda x: profile(np.linalg.norm(metric.apply_inverse(x), axis=-1)),
        radial_profile=profile,
        name=name or f"{profile.name}-metric",
        params={"metric_block": metric.block.tolist()},
    )


def _pair_norms(points):
    x, y = points[..., :3], points[..., 3:]
    return (np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1),
            np.linalg.norm(x - y, axis=-1))


def orbit_integral(func, r_max, breakpoints=()):
    """
    Integral over R^3 x R^3 of a rotation-invariant function given as func(r1, r2, c),
    with c the cosine between the two vectors: 8 pi^2 int r1^2 r2^2 func dc dr1 dr2.
    """
    breaks = sorted(b for b in breakpoints if 0 < b < r_max)

    def inner(r1, r2):
        points = []
        if r1 > 0 and r2 > 0:
            for b in breaks:
                c_star = (r1 * r1 + r2 * r2 - b * b) / (2 * r1 * r2)
                if -1 < c_star < 1:
                    points.append(c_star)
        value, _ = integrate.quad(lambda c: func(r1, r2, c), -1.0, 1.0,
                                  points=points or None, epsabs=1e-13, epsrel=1e-10, limit=100)
        return value

    def middle(r1):
        value, _ = integrate.quad(lambda r2: r2 * r2 * inner(r1, r2), 0.0, r_max,
                                  points=breaks or None, epsabs=1e-13, epsrel=1e-9, limit=100)
        return value

    value, _ = integrate.quad(lambda r1: r1 * r1 * middle(r1), 0.0, r_max,
                              points=breaks or None, epsabs=1e-13, epsrel=1e-8, limit=100)
    return 8.0 * np.pi**2 * value


@lru_cache(maxsize=64)
def _product_l1(profile_name, params):
    profile = RadialProfile(profile_name, dict(params))

    def reduced(r1, r2, c):
        r12 = np.sqrt(max(r1 * r1 + r2 * r2 - 2 * r1 * r2 * c, 0.0))
        return float(profile(r1) * profile(r2) * profile(r12))

    return orbit_integral(reduced, profile.support, profile.breakpoints)


def product_potential(profile, name=None):
    """Three-body potential g(|x|) g(|y|) g(|x - y|)."""
    r_g = profile.support

    def evaluate(points):
        a, b, c = _pair_norms(points)
        return profile(a) * profile(b) * profile(c)

    l1 = _product_l1(profile.name, tuple(sorted(profile.params.items())))
    return PotentialSpec(
        kind="named",
        dimension=6,
        range_R0=np.sqrt(2.0) * r_g,
        sup_norm=profile.sup_norm**3,
        l1_norm=l1,
        evaluator=evaluate,
        radial_profile=None,
        params={"form": "product", "profile": profile.name, **profile.params},
        name=name or f"{profile.name}-product",
    )


def from_callable(func, dimension, range_R0, name="custom", rng=None, samples=200_000):
    """
    Wrap an arbitrary evaluator. sup and L1 norms are estimated by sampling the
    support ball; the estimate is seeded by rng.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    pts = sample_ball(rng, samples, dimension, range_R0)
    vals = np.asarray(func(pts), dtype=float)
    if np.any(vals < 0):
        raise PreconditionError("Potential takes negative values")
    return PotentialSpec(
        kind="named",
        dimension=dimension,
        range_R0=float(range_R0),
        sup_norm=float(vals.max(initial=0.0)),
        l1_norm=float(vals.mean() * ball_volume(dimension) * range_R0**dimension),
        evaluator=func,
        name=name,
    )


def zero_potential(dimension=6):
    return PotentialSpec(kind="named", dimension=dimension, range_R0=1.0, sup_norm=0.0,
                         l1_norm=0.0, evaluator=lambda x: np.zeros(np.shape(x)[:-1]),
                         name="zero", symmetry_flag=dimension == 6)

# -------------------------------
# Symmetry
# -------------------------------
# (x, y) -> images under the five nontrivial permutations of (x1, x2, x3)
_PERMUTATION_MAPS = (
    lambda x, y: (y, x),
    lambda x, y: (-x, y - x),
    lambda x, y: (x - y, -y),
    lambda x, y: (y - x, -x),
    lambda x, y: (-y, x - y),
)


def permuted_points(points):
    """List of the five permuted copies of points (..., 6)."""
    x, y = points[..., :3], points[..., 3:]
    return [np.concatenate(m(x, y), axis=-1) for m in _PERMUTATION_MAPS]


def symmetrize(V):
    """Average V over the six permutations of the three particles."""
    if not V.is_three_body:
        raise PreconditionError("Symmetrization needs a three-body potential (d = 6)")
    base = V.evaluator

    def evaluate(points):
        points = np.asarray(points, dtype=float)
        total = base(points)
        for p in permuted_points(points):
            total = total + base(p)
        return total / 6.0

    return replace(
        V,
        kind="named",
        evaluator=evaluate,
        # |x|^2 + |y - x|^2 <= 3(|x|^2 + |y|^2) bounds every image
        range_R0=np.sqrt(3.0) * V.range_R0,
        radial_profile=None,
        params={**V.params, "symmetrized": True},
        name=f"sym({V.name})",
        symmetry_flag=True,
    )


@dataclass(frozen=True)
class SymmetryReport:
    passed: bool
    worst_violation: float
    worst_sample: Optional[list]
    sample_count: int
    tol: float
    potential: PotentialSpec = field(repr=False)

    def to_dict(self):
        return {"passed": self.passed, "worst_violation": self.worst_violation,
                "worst_sample": self.worst_sample, "sample_count": self.sample_count,
                "tol": self.tol}


def sample_ball(rng, count, dimension, radius):
    """Uniform samples from the ball of given radius in R^d."""
    direction = rng.standard_normal((count, dimension))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / dimension)
    return direction * radii[:, None]


def validate_symmetry(V, sample_count=SYMMETRY_SAMPLES, tol=SYMMETRY_TOL, rng=None):
    """
    Check V(x, y) = V(y, x) and invariance under the remaining particle permutations
    on random samples from the support ball.

    Returns:
        SymmetryReport whose `potential` carries symmetry_flag = passed.
    """
    if not V.is_three_body:
        raise PreconditionError("Symmetry validation needs a three-body potential (d = 6)")
    rng = rng if rng is not None else np.random.default_rng()
    points = sample_ball(rng, sample_count, 6, V.range_R0)
    base = V(points)
    scale = max(V.sup_norm, np.max(np.abs(base), initial=0.0), 1e-300)
    worst, worst_idx = 0.0, None
    for image in permuted_points(points):
        diff = np.abs(V(image) - base) / scale
        idx = int(np.argmax(diff))
        if diff[idx] > worst:
            worst, worst_idx = float(diff[idx]), idx
    passed = worst <= tol
    sample = points[worst_idx].tolist() if worst_idx is not None and not passed else None
    if passed:
        logger.debug("Symmetry check passed for %s (worst %.3e)", V.name, worst)
    else:
        logger.warning("Symmetry check failed for %s: violation %.3e at %s", V.name, worst, sample)
    return SymmetryReport(passed=passed, worst_violation=worst, worst_sample=sample,
                          sample_count=sample_count, tol=tol,
                          potential=V.with_symmetry_flag(passed))

# -------------------------------
# Metric Pullback
# -------------------------------
def pullback_by_metric(V, M=None):
    """The potential y -> V(M y). Its support radius is range_R0 / sigma_min(M)."""
    if not V.is_three_body:
        raise PreconditionError("Pullback needs a three-body potential (d = 6)")
    M = M or metric_matrix()
    sigma_min = M.smallest_singular_value
    if V.kind == "radial_metric" and np.allclose(M.block, metric_matrix().block):
        profile = V.radial_profile
        return PotentialSpec(
            kind="radial_euclidean",
            dimension=6,
            range_R0=profile.support,
            sup_norm=V.sup_norm,
            l1_norm=V.l1_norm / M.det_M,
            evaluator=lambda y: profile(np.linalg.norm(y, axis=-1)),
            radial_profile=profile,
            params={**V.params, "pulled_back": True},
            name=f"pullback({V.name})",
        )
    base = V.evaluator
    return PotentialSpec(
        kind=V.kind if V.kind != "radial_metric" else "named",
        dimension=6,
        range_R0=V.range_R0 / sigma_min,
        sup_norm=V.sup_norm,
        l1_norm=V.l1_norm / M.det_M,
        evaluator=lambda y: base(M.apply(y)),
        radial_profile=V.radial_profile if V.kind == "radial_euclidean" and np.allclose(M.block, np.eye(2)) else None,
        params={**V.params, "pulled_back": True},
        name=f"pullback({V.name})",
    )

# -------------------------------
# Tabulated Potentials and Grid Files
# -------------------------------
def write_grid_file(path, values, spacing, origin):
    """Write a float64 grid with a one-line text header."""
    values = np.ascontiguousarray(values, dtype="<f8")
    header = "# shape={}; spacing={!r}; origin={}\n".format(
        ",".join(str(n) for n in values.shape), float(spacing),
        ",".join(repr(float(o)) for o in origin))
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(values.tobytes(order="C"))
    return path


def read_grid_file(path):
    """Returns (values, spacing, origin)."""
    try:
        with open(path, "rb") as f:
            header = f.readline().decode("ascii").strip()
            raw = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read grid file {path}: {e}") from e
    fields = {}
    for part in header.lstrip("#").split(";"):
        if "=" in part:
            key, value = part.split("=", 1)
            fields[key.strip()] = value.strip()
    try:
        shape = tuple(int(n) for n in fields["shape"].split(","))
        spacing = float(fields["spacing"])
        origin = tuple(float(o) for o in fields["origin"].split(","))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Malformed grid header in {path}: {header!r}") from e
    values = np.frombuffer(raw, dtype="<f8")
    if values.size != int(np.prod(shape)):
        raise ConfigError(f"Grid file {path} holds {values.size} values, header says {shape}")
    return values.reshape(shape).astype(float), spacing, origin


def tabulated_grid(values, spacing, origin, name="grid"):
    """Trilinear interpolation of a d-dimensional Cartesian grid, zero outside."""
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise PreconditionError("Tabulated potential has negative values")
    axes = [origin[i] + spacing * np.arange(n) for i, n in enumerate(values.shape)]
    interpolator = RegularGridInterpolator(axes, values, method="linear",
                                           bounds_error=False, fill_value=0.0)
    sup = float(values.max(initial=0.0))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    active = values > SUPPORT_THRESHOLD * max(sup, 1e-300)
    radius = float(np.linalg.norm(mesh[active], axis=-1).max(initial=0.0))
    # one cell diagonal covers the interpolant's reach, rounded up to the grid
    reach = radius + spacing * np.sqrt(values.ndim)
    range_R0 = spacing * np.ceil(reach / spacing)
    l1 = float(values.sum() * spacing**values.ndim)
    return PotentialSpec(
        kind="tabulated",
        dimension=values.ndim,
        range_R0=range_R0,
        sup_norm=sup,
        l1_norm=l1,
        evaluator=lambda x: interpolator(np.asarray(x, dtype=float).reshape(-1, values.ndim)).reshape(np.shape(x)[:-1]),
        params={"spacing": spacing, "origin": list(origin), "shape": list(values.shape)},
        name=name,
    )


def tabulated_radial(radii, values, dimension, name="radial-table"):
    profile = TabulatedProfile(tuple(float(r) for r in radii), tuple(float(v) for v in values), name)
    if np.any(np.asarray(profile.values) < 0):
        raise PreconditionError("Tabulated potential has negative values")
    spec = radial_euclidean(profile, dimension, name=name)
    return replace(spec, kind="tabulated")

# -------------------------------
# Potential Files
# -------------------------------
def potential_from_dict(table, base_dir="."):
    """Build a PotentialSpec from the [potential] table of a potential file."""
    try:
        kind = table["kind"]
        dimension = int(table.get("dimension", 6))
        params = dict(table.get("params", {}))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Potential table needs kind and dimension: {e}") from e

    def profile_from(p):
        name = p.pop("profile", None)
        if name is None:
            raise ConfigError("Potential params need a 'profile' name")
        return RadialProfile(name, {k: float(v) for k, v in p.items() if k in PROFILE_LENGTHS.get(name, ()) + ("height",)})

    if kind == "radial_metric":
        if dimension != 6:
            raise ConfigError("radial_metric potentials live in dimension 6")
        spec = radial_metric(profile_from(params))
    elif kind == "radial_euclidean":
        spec = radial_euclidean(profile_from(params), dimension)
    elif kind == "named":
        form = params.pop("form", "product")
        if form != "product":
            raise ConfigError(f"Unknown named form: {form}")
        spec = product_potential(profile_from(params))
    elif kind == "tabulated":
        if "grid_file" in params:
            values, spacing, origin = read_grid_file(os.path.join(base_dir, params["grid_file"]))
            spec = tabulated_grid(values, spacing, origin, name=params["grid_file"])
        elif "radii" in params and "values" in params:
            spec = tabulated_radial(params["radii"], params["values"], dimension)
        else:
            raise ConfigError("Tabulated potential needs grid_file or radii/values")
    else:
        raise ConfigError(f"Unknown potential kind: {kind}")

    if table.get("symmetrize", False):
        spec = symmetrize(spec)
    if "range_R0" in table and float(table["range_R0"]) < spec.range_R0 - 1e-12:
        logger.warning("Declared range_R0 %.6g is below the computed support %.6g; using the latter",
                       float(table["range_R0"]), spec.range_R0)
    return spec


def load_potential_file(path):
    """Load a TOML potential file."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"Cannot read potential file {path}: {e}") from e
    if "potential" not in data:
        raise ConfigError(f"Potential file {path} has no [potential] table")
    return potential_from_dict(data["potential"], base_dir=os.path.dirname(os.path.abspath(path)))
