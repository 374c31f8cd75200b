"""Weighted Bergman dimensions on the projective line, in the affine chart.

The weight of O(k) with the Fubini-Study volume folded in is
phi_k(z) = (1 + |z|^2)^-(k+2); its log-Laplacian has total mass
4 pi (k + 2), and the dimension of A^2 over the whole chart is the
largest integer strictly below mass / 4 pi.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Callable

import numpy as np

from capstone_defaults import DEFAULTS
from convergence import nondecreasing
import geometry
import potential
from potential import PolarityVerdict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightSpec:
    k: int

    def phi(self, z):
        return (1.0 + np.abs(np.asarray(z)) ** 2) ** (-(self.k + 2))


@dataclass(frozen=True)
class ScalarField:
    evaluation: Callable
    # points within exclusion_radius of `excluded` lie outside the domain
    excluded: geometry.CompactSetSpec | None = None
    exclusion_radius: float = 0.0
    bounded: bool = False
    bound: float = math.inf
    recipe: dict = field(default_factory=dict, compare=False)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.reshape(self.evaluation(z), z.shape)

    def in_domain(self, z):
        z = np.asarray(z, dtype=complex)
        if self.excluded is None:
            return np.ones(z.shape, dtype=bool)
        return np.asarray(geometry.distance(self.excluded, z)) > self.exclusion_radius


@dataclass(frozen=True)
class Dimension:
    value: int | None  # None is infinite

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def to_json(self):
        return "infinite" if self.value is None else {"finite": self.value}


INFINITE = Dimension(None)


@dataclass(frozen=True)
class DimensionReport:
    polarity: PolarityVerdict
    dimension: Dimension | None
    method: str
    conditional: dict = field(default_factory=dict)

    def __post_init__(self):
        if (
            self.dimension is not None
            and not self.dimension.is_infinite
            and self.polarity.classification != "polar"
        ):
            raise ValueError("finite dimensions require a polar set")

    def to_json(self) -> dict:
        out = {
            "polarity": self.polarity.to_json(),
            "dimension": None if self.dimension is None else self.dimension.to_json(),
            "method": self.method,
        }
        if self.conditional:
            out["conditional"] = {key: d.to_json() for key, d in self.conditional.items()}
        return out


@dataclass(frozen=True)
class RieszGrid:
    inner_exponent: int = DEFAULTS["riesz_inner_exponent"]
    outer_exponent: int = DEFAULTS["riesz_outer_exponent"]
    cells: int = DEFAULTS["riesz_cells"]
    decay_shells: int = DEFAULTS["riesz_decay_shells"]
    negative_tol: float = 1e-6


def phi_k(spec: WeightSpec, z: complex) -> float:
    return float(spec.phi(z))


def laplacian_log_weight(spec: WeightSpec, z: complex) -> float:
    return 4.0 * (spec.k + 2) / (1.0 + abs(z) ** 2) ** 2


def dim_global_sections(k: int) -> int:
    return max(0, k + 1)


def log_weight_field(k: int) -> ScalarField:
    """psi = -ln phi_k = (k + 2) ln(1 + |z|^2)."""
    return ScalarField(
        evaluation=lambda z: (k + 2) * np.log1p(np.abs(z) ** 2),
        recipe={"k": k},
    )


def laplacian_fd(func: Callable, z, h):
    """Five-point Laplacian with (possibly per-point) step h."""
    z = np.asarray(z, dtype=complex)
    h = np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    centre = func(z)
    total = func(z + h) + func(z - h) + func(z + 1j * h) + func(z - 1j * h) - 4.0 * centre
    return total / h**2, centre


def _polar_cells(r_lo: float, r_hi: float, radial: int, angular: int):
    edges = np.linspace(r_lo, r_hi, radial + 1)
    radii = 0.5 * (edges[1:] + edges[:-1])
    theta = 2.0 * np.pi * (np.arange(angular) + 0.5) / angular
    z = radii[:, None] * np.exp(1j * theta)[None, :]
    area = 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2) * (2.0 * np.pi / angular)
    return z.ravel(), np.repeat(area, angular), np.repeat(radii, angular)


def riesz_mass(psi: ScalarField, grid: RieszGrid = RieszGrid()):
    """Integral of the Laplacian of psi over the plane.

    Returns (mass, details); mass is math.inf when the outer shell masses
    stop decaying. Each shell is integrated with the midpoint rule at
    `cells` and `cells / 2` radial cells and Richardson-extrapolated; the
    stencil is evaluated at h and 2h, and the difference bounds both the
    pointwise truncation error and its contribution to the mass.
    """
    floor_radius = 2.0**grid.inner_exponent
    bands = [(0.0, floor_radius)] + [
        (2.0**j, 2.0 ** (j + 1)) for j in range(grid.inner_exponent, grid.outer_exponent + 1)
    ]
    masses = []
    corrections = []
    stencil_errors = []
    worst = 0.0
    for r_lo, r_hi in bands:
        z, area, radii = _polar_cells(r_lo, r_hi, grid.cells, grid.cells)
        h = 1e-3 * np.maximum(radii, floor_radius)
        lap, centre = laplacian_fd(psi, z, h)
        lap_wide, _ = laplacian_fd(psi, z, 2.0 * h)
        # leading h^2 term of the stencil error
        truncation = (lap_wide - lap) / 3.0
        noise = 64.0 * np.finfo(float).eps * (np.abs(centre) + 1.0) / h**2
        scale = float(np.abs(lap).max()) if lap.size else 0.0
        negative = lap < -(grid.negative_tol * scale + noise + 4.0 * np.abs(truncation))
        if np.any(negative):
            worst_index = int(np.argmax(negative))
            raise ValueError(
                "negative Laplacian detected: the field is not subharmonic "
                f"(value {lap[worst_index]:.3e} at z = {z[worst_index]:.4g})"
            )
        worst = max(worst, float(np.abs(np.minimum(lap, 0.0)).max()) if lap.size else 0.0)
        fine = float(lap @ area)
        masses.append(fine)
        stencil_errors.append(abs(float(truncation @ area)))

        zc, area_c, radii_c = _polar_cells(r_lo, r_hi, grid.cells // 2, grid.cells)
        lap_c, _ = laplacian_fd(psi, zc, 1e-3 * np.maximum(radii_c, floor_radius))
        corrections.append((fine - float(lap_c @ area_c)) / 3.0)

    shells = masses[1:]
    tail = shells[-grid.decay_shells:]
    bulk = float(sum(masses)) - sum(tail)
    growing = nondecreasing(shells, grid.decay_shells) and tail[-1] > 1e-3 * max(1.0, abs(bulk))
    details = {
        "shell_masses": masses,
        "largest_negative": worst,
        "shells": len(bands),
    }
    if growing:
        logger.info("riesz mass: shells non-decreasing, reporting infinite mass")
        return math.inf, details
    total = float(sum(masses) + sum(corrections))
    details["error_estimate"] = (
        abs(tail[-1])
        + float(np.abs(corrections).sum())
        + float(sum(stencil_errors))
        + 1e-12 * abs(total)
    )
    return total, details


def strict_floor(x: float) -> int:
    """Greatest integer strictly less than x for x > 0; 0 at x = 0."""
    if x < 0:
        raise ValueError("strict_floor is defined for x >= 0")
    if x == 0:
        return 0
    return math.ceil(x) - 1


def bly_dimension(mass: float) -> Dimension:
    if math.isinf(mass) and mass > 0:
        return INFINITE
    if mass < 0:
        raise ValueError("negative Riesz mass")
    return Dimension(strict_floor(mass / (4.0 * math.pi)))


def snapped_mass(mass: float, error: float) -> float:
    """Moves mass onto the nearest multiple of 4 pi when it lies within error of it."""
    if not math.isfinite(mass):
        return mass
    nearest = round(mass / (4.0 * math.pi))
    target = 4.0 * math.pi * nearest
    if abs(mass - target) <= error:
        logger.debug("riesz mass %.12g snapped to %d * 4 pi (error %.3g)", mass, nearest, error)
        return target
    return mass


def dimension_report(
    k: int,
    complement_of: geometry.CompactSetSpec,
    psi: ScalarField | None = None,
    seed: int = 0,
    threshold: float = DEFAULTS["polarity_threshold"],
    schedule=DEFAULTS["polarity_schedule"],
    tol: float = DEFAULTS["equilibrium_tol"],
    grid: RieszGrid = RieszGrid(),
    stability: float = DEFAULTS["polarity_stability"],
) -> DimensionReport:
    verdict = potential.classify_polarity(complement_of, threshold, schedule, tol, seed, stability)

    def polar_answer():
        if psi is None:
            return Dimension(dim_global_sections(k)), "polar: global sections of O(k)"
        mass, details = riesz_mass(psi, grid)
        if math.isfinite(mass):
            mass = snapped_mass(mass, details["error_estimate"])
        return bly_dimension(mass), "polar: Riesz mass of psi"

    if verdict.classification == "nonpolar":
        return DimensionReport(verdict, INFINITE, "nonpolar: infinite-dimensional complement")
    if verdict.classification == "polar":
        dimension, method = polar_answer()
        return DimensionReport(verdict, dimension, method)
    dimension, method = polar_answer()
    logger.warning("dimension report for k=%d is conditional on polarity", k)
    return DimensionReport(
        verdict,
        None,
        "inconclusive",
        conditional={"polar": dimension, "nonpolar": INFINITE},
    )


# -- witness psi_* = e^{-p} + eps chi ---------------------------------------


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _smoothstep_d1(u):
    u = np.clip(u, 0.0, 1.0)
    return 30.0 * u**2 * (1.0 - u) ** 2


def _smoothstep_d2(u):
    u = np.clip(u, 0.0, 1.0)
    return 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)


@dataclass(frozen=True)
class RadialBump:
    """chi = r^2 on r <= inner, quintic blend in 1/r down to 0 at outer."""

    inner: float
    outer: float

    def _u(self, r):
        span = 1.0 / self.inner - 1.0 / self.outer
        with np.errstate(divide="ignore"):
            return (1.0 / self.inner - 1.0 / np.maximum(r, 1e-300)) / span

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self.outer, 0.0, r**2 * (1.0 - _smoothstep(self._u(r))))

    def laplacian(self, r):
        r = np.asarray(r, dtype=float)
        span = 1.0 / self.inner - 1.0 / self.outer
        u = self._u(r)
        blend = (
            4.0 * (1.0 - _smoothstep(u))
            - 3.0 * _smoothstep_d1(u) / (np.maximum(r, 1e-300) * span)
            - _smoothstep_d2(u) / (np.maximum(r, 1e-300) ** 2 * span**2)
        )
        return np.where(r <= self.inner, 4.0, np.where(r >= self.outer, 0.0, blend))

    def supremum(self, samples: int = 4097) -> float:
        r = np.linspace(self.inner, self.outer, samples)
        return float(self(r).max()) * (1.0 + 1e-3)


@dataclass(frozen=True)
class WitnessParameters:
    eps: float = DEFAULTS["witness_epsilon"]
    n: int = DEFAULTS["support_points"]
    seed: int = 0
    outer_factor: float = DEFAULTS["witness_outer_factor"]
    bound_slack: float = DEFAULTS["witness_bound_slack"]
    tol: float = DEFAULTS["equilibrium_tol"]
    threshold: float = DEFAULTS["polarity_threshold"]
    schedule: tuple = DEFAULTS["polarity_schedule"]
    stability: float = DEFAULTS["polarity_stability"]


def witness_psi_star(
    G: geometry.CompactSetSpec,
    eps: float = DEFAULTS["witness_epsilon"],
    n: int = DEFAULTS["support_points"],
    seed: int = 0,
    params: WitnessParameters | None = None,
) -> ScalarField:
    params = params or WitnessParameters(eps, n, seed)
    if params.eps < 0:
        raise ValueError("eps must be nonnegative")
    verdict = potential.classify_polarity(
        G, params.threshold, params.schedule, params.tol, params.seed, params.stability
    )
    if verdict.classification != "nonpolar":
        raise ValueError(f"witness needs a nonpolar G (classified {verdict.classification})")

    measure = potential.equilibrium_measure(G, params.n, params.tol, params.seed)
    energy = potential.regularized_energy(measure)
    radius = geometry.enclosing_radius(G)
    bump = RadialBump(2.0 * radius, params.outer_factor * radius)
    # three sample spacings keep evaluation points off the log singularities of p
    exclusion = 3.0 * float(measure.cells.max())
    # Frostman: p >= I, so e^{-p} <= e^{-I}; the slack covers discretization
    bound = math.exp(-energy) * (1.0 + params.bound_slack) + params.eps * bump.supremum()

    def evaluation(z):
        return np.exp(-potential.potential_values(measure, z)) + params.eps * bump(np.abs(z))

    recipe = {
        "G": G.to_json(),
        "eps": params.eps,
        "n": params.n,
        "seed": params.seed,
        "tol": params.tol,
        "R": radius,
        "R_outer": bump.outer,
        "energy": energy,
        "measure": measure,
        "bump": bump,
        "params": params,
    }
    field_ = ScalarField(
        evaluation,
        excluded=geometry.point_set(measure.support.tolist()),
        exclusion_radius=exclusion,
        bounded=True,
        bound=bound,
        recipe=recipe,
    )
    _check_finite(field_, 1000, params.seed, 2.0 * bump.outer)
    return field_


def _check_finite(field_: ScalarField, samples: int, seed: int, radius: float):
    z = _domain_samples(field_, samples, seed, radius)
    values = field_(z)
    if not np.all(np.isfinite(values)):
        raise ValueError("scalar field is not finite on its declared domain")


def _domain_samples(field_: ScalarField, count: int, seed: int, radius: float, keep=None):
    rng = np.random.default_rng(seed)
    found = []
    total = 0
    while total < count:
        z = radius * np.sqrt(rng.uniform(size=2 * count)) * np.exp(2j * np.pi * rng.uniform(size=2 * count))
        mask = field_.in_domain(z)
        if keep is not None:
            mask &= keep(z)
        found.append(z[mask])
        total += int(mask.sum())
    return np.concatenate(found)[:count]


def witness_gradient_term(field_: ScalarField, z):
    """Laplacian of e^{-p}: e^{-p} |grad p|^2 with grad p = sum w / conj(z - xi)."""
    measure = field_.recipe["measure"]
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    grad = (1.0 / (z[:, None] - measure.support)) @ measure.weights
    return np.exp(-potential.potential_values(measure, z)) * np.abs(grad) ** 2, np.abs(grad)


def witness_laplacian(field_: ScalarField, z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    gradient_term, _ = witness_gradient_term(field_, z)
    return gradient_term + field_.recipe["eps"] * field_.recipe["bump"].laplacian(np.abs(z))


def verify_witness_bounds(
    field_: ScalarField,
    R: float,
    samples: int = DEFAULTS["witness_samples"],
    seed: int = 0,
    band: float = 0.01,
    floor: float = DEFAULTS["witness_floor"],
) -> dict:
    """Finite-difference certification of the piecewise Laplacian bound.

    tau2 = min |z|^3 Lap psi outside D(0, 2R), tau3 = min Lap psi inside,
    samples within band * R of |z| = 2R are excluded.
    """
    outer = field_.recipe.get("R_outer", 20.0 * R)

    def off_circle(z):
        return np.abs(np.abs(z) - 2.0 * R) > band * R

    half = samples // 2
    inside = _domain_samples(field_, half, seed, 2.0 * R, keep=lambda z: off_circle(z) & (np.abs(z) < 2.0 * R))
    rng = np.random.default_rng(seed + 1)
    found = []
    total = 0
    while total < samples - half:
        r = 2.0 * R * np.exp(rng.uniform(0.0, math.log(outer / R), size=samples))
        z = r * np.exp(2j * np.pi * rng.uniform(size=samples))
        mask = field_.in_domain(z) & off_circle(z)
        found.append(z[mask])
        total += int(mask.sum())
    outside = np.concatenate(found)[: samples - half]

    z = np.concatenate([inside, outside])
    h = 1e-3 * np.maximum(np.abs(z), R)
    lap, values = laplacian_fd(field_, z, h)
    is_outside = np.abs(z) > 2.0 * R
    tau2 = float((lap[is_outside] * np.abs(z[is_outside]) ** 3).min())
    tau3 = float(lap[~is_outside].min())
    max_value = float(np.abs(values).max())
    bounded = (not field_.bounded) or max_value <= field_.bound
    report = {
        "tau2": tau2,
        "tau3": tau3,
        "certified": tau2 > floor and tau3 > floor,
        "bounded": bounded,
        "max_value": max_value,
        "bound": field_.bound,
        "samples": len(z),
        "outside_samples": int(is_outside.sum()),
        "excluded_band": band * R,
    }
    if "measure" in field_.recipe:
        _, grad = witness_gradient_term(field_, z[is_outside])
        report["tau1"] = float((grad * np.abs(z[is_outside])).min())
    if not bounded:
        raise ValueError(
            f"witness bound violated: max |psi| = {max_value:.6g} exceeds {field_.bound:.6g}"
        )
    logger.info("witness: tau2=%.4g tau3=%.4g certified=%s", tau2, tau3, report["certified"])
    return report


def field_from_recipe(recipe: dict) -> ScalarField:
    if "G" in recipe:
        params = recipe.get("params") or WitnessParameters(recipe["eps"], recipe["n"], recipe["seed"])
        if isinstance(params, dict):
            params = WitnessParameters(**dict(params, schedule=tuple(params["schedule"])))
        return witness_psi_star(geometry.spec_from_json(recipe["G"]), params=params)
    return log_weight_field(int(recipe["k"]))
