"""Discrete logarithmic potential theory.

Sign convention: p_nu(z) = sum w_i ln|z - z_i|, I(nu) = int p_nu dnu and
cap(K) = exp(sup I(nu)) over probability measures on K.

The equilibrium solver maximizes w^T A w over the probability simplex,
where A_ij = ln|z_i - z_j| off the diagonal and A_ii = ln(h_i) - 3/2 is
the mean of ln|s - t| over a boundary cell of length h_i. The plain
diagonal-excluded energy is not concave on the simplex, so the self-cell
term is what makes the discrete problem a concave maximization.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import pdist

from capstone_defaults import DEFAULTS
from convergence import NonConvergenceError
import geometry

logger = logging.getLogger(__name__)

_CHUNK = 2048


@dataclass(frozen=True)
class DiscreteMeasure:
    support: np.ndarray
    weights: np.ndarray
    mass: float
    # boundary cell lengths of the support, when it came from sampling a set
    cells: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        support = np.array(self.support, dtype=complex).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        if support.shape != weights.shape:
            raise ValueError("support and weights must have the same length.")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative.")
        total = float(weights.sum())
        if abs(total - self.mass) > 1e-12 * max(1.0, abs(self.mass)):
            raise ValueError(
                f"weights sum to {total!r}, not the declared mass {self.mass!r}."
            )
        support.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)
        if self.cells is not None:
            cells = np.array(self.cells, dtype=float).ravel()
            cells.flags.writeable = False
            object.__setattr__(self, "cells", cells)

    def __len__(self):
        return len(self.support)

    def to_json(self) -> dict:
        return {
            "support": [[p.real, p.imag] for p in self.support.tolist()],
            "weights": self.weights.tolist(),
            "mass": self.mass,
        }


def measure_from_json(data: dict) -> DiscreteMeasure:
    support = [complex(re, im) for re, im in data["support"]]
    return DiscreteMeasure(np.array(support), np.array(data["weights"]), float(data["mass"]))


def point_mass(z: complex) -> DiscreteMeasure:
    return DiscreteMeasure(np.array([complex(z)]), np.array([1.0]), 1.0)


def probability_measure(support, weights=None, cells=None) -> DiscreteMeasure:
    support = np.asarray(support, dtype=complex)
    if weights is None:
        weights = np.full(len(support), 1.0 / len(support))
    weights = np.asarray(weights, dtype=float)
    return DiscreteMeasure(support, weights, float(weights.sum()), cells)


@dataclass(frozen=True)
class SignedMeasure:
    positive: DiscreteMeasure
    negative: DiscreteMeasure

    @property
    def mass(self) -> float:
        return self.positive.mass - self.negative.mass

    def to_json(self) -> dict:
        return {"positive": self.positive.to_json(), "negative": self.negative.to_json()}


@dataclass(frozen=True)
class PolarityVerdict:
    capacity_estimate: float
    sequence: tuple[float, ...]
    classification: str  # "polar", "nonpolar" or "inconclusive"
    threshold: float

    def __post_init__(self):
        if self.classification not in {"polar", "nonpolar", "inconclusive"}:
            raise ValueError(f"unknown classification {self.classification!r}")
        if self.classification == "polar" and not self.capacity_estimate < self.threshold:
            raise ValueError("polar verdicts need a capacity estimate below threshold")

    def to_json(self) -> dict:
        return {
            "capacity_estimate": self.capacity_estimate,
            "sequence": list(self.sequence),
            "classification": self.classification,
            "threshold": self.threshold,
        }


def _check_distinct(points: np.ndarray):
    if len(points) > 1 and pdist(np.column_stack([points.real, points.imag])).min() == 0:
        raise ValueError("coincident support points")


def _log_distance_matrix(points: np.ndarray) -> np.ndarray:
    diff = np.abs(points[:, None] - points[None, :])
    np.fill_diagonal(diff, 1.0)
    return np.log(diff)


def kernel_matrix(points: np.ndarray, cells: np.ndarray | None) -> np.ndarray:
    """ln|z_i - z_j| with the self-cell value ln(h_i) - 3/2 on the diagonal."""
    a = _log_distance_matrix(points)
    if cells is None or not np.any(cells > 0):
        np.fill_diagonal(a, 0.0)
        return a
    diag = np.where(cells > 0, np.log(np.where(cells > 0, cells, 1.0)) - 1.5, np.nan)
    # isolated atoms take the finest cell's value
    diag = np.where(np.isnan(diag), np.nanmin(diag), diag)
    np.fill_diagonal(a, diag)
    return a


def log_energy(m: DiscreteMeasure) -> float:
    _check_distinct(m.support)
    a = _log_distance_matrix(m.support)
    np.fill_diagonal(a, 0.0)
    return float(m.weights @ a @ m.weights)


def regularized_energy(m: DiscreteMeasure) -> float:
    _check_distinct(m.support)
    return float(m.weights @ kernel_matrix(m.support, m.cells) @ m.weights)


def potential_values(m: DiscreteMeasure, z) -> np.ndarray:
    """Vectorized p_nu(z); -inf where z hits a weighted support point."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    flat = z.ravel()
    out = np.empty(flat.shape, dtype=float)
    active = m.weights > 0
    support = m.support[active]
    weights = m.weights[active]
    with np.errstate(divide="ignore"):
        for start in range(0, len(flat), _CHUNK):
            block = flat[start:start + _CHUNK]
            out[start:start + _CHUNK] = np.log(np.abs(block[:, None] - support)) @ weights
    return out.reshape(z.shape)


def potential_eval(m: DiscreteMeasure, z: complex) -> float:
    return float(potential_values(m, z)[0])


def support_potential(m: DiscreteMeasure) -> np.ndarray:
    """The solver's potential A w on the support itself."""
    return kernel_matrix(m.support, m.cells) @ m.weights


def _face_newton(a: np.ndarray, w: np.ndarray, active: np.ndarray):
    """Maximizer of w^T A w on the affine hull of the active face."""
    idx = np.flatnonzero(active)
    k = len(idx)
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = a[np.ix_(idx, idx)]
    system[:k, k] = -1.0
    system[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    solution = np.linalg.solve(system, rhs)
    target = np.zeros_like(w)
    target[idx] = solution[:k]
    return target


def solve_equilibrium(
    points: np.ndarray,
    cells: np.ndarray | None = None,
    tol: float = DEFAULTS["equilibrium_tol"],
    max_iter: int = DEFAULTS["equilibrium_max_iter"],
) -> dict:
    """Active-set conditional gradient for max w^T A w on the simplex.

    Pairwise (away) steps with exact line search bring new vertices in;
    face-Newton steps with a ratio test solve the KKT system on the active
    face. Both steps are monotone in the energy, which is checked per step.
    """
    points = np.asarray(points, dtype=complex)
    n = len(points)
    if n < 2:
        raise ValueError("at least two support points are needed")
    _check_distinct(points)
    a = kernel_matrix(points, cells)
    w = np.full(n, 1.0 / n)
    energy = float(w @ a @ w)
    history = [energy]

    def accept(candidate):
        nonlocal energy
        value = float(candidate @ a @ candidate)
        if value < energy - 1e-12 * max(1.0, abs(energy)):
            return False
        energy = value
        history.append(value)
        return True

    gap = math.inf
    at_face_optimum = False
    for iteration in range(1, max_iter + 1):
        g = a @ w
        active = w > 0
        i = int(np.argmax(g))
        j = int(np.flatnonzero(active)[np.argmin(g[active])])
        gap = float(g[i] - g[j])
        logger.debug("iteration %d energy %.12f gap %.3e", iteration, energy, gap)
        if gap < tol:
            return {
                "weights": w,
                "energy": energy,
                "iterations": iteration,
                "gap": gap,
                "energy_history": history,
                "kernel": a,
            }

        if not at_face_optimum:
            # face-Newton on the active set, clipped to stay in the simplex
            try:
                target = _face_newton(a, w, active)
            except np.linalg.LinAlgError:
                target = None
            if target is not None:
                step = target - w
                shrinking = step < 0
                ratios = np.where(shrinking, w / np.where(shrinking, -step, 1.0), np.inf)
                t = min(1.0, float(ratios.min()))
                candidate = np.maximum(w + t * step, 0.0)
                if t < 1.0:
                    candidate[np.argmin(ratios)] = 0.0
                candidate /= candidate.sum()
                if t > 0 and accept(candidate):
                    w = candidate
                    at_face_optimum = t == 1.0
                    continue

        # pairwise step: mass from the lowest active vertex to the highest
        at_face_optimum = False
        curvature = a[i, i] + a[j, j] - 2.0 * a[i, j]
        t = w[j] if curvature >= 0 else min(w[j], -gap / curvature)
        candidate = w.copy()
        candidate[i] += t
        candidate[j] = max(candidate[j] - t, 0.0)
        if accept(candidate):
            w = candidate

    raise NonConvergenceError(
        f"equilibrium solver did not reach gap {tol:g} in {max_iter} iterations",
        iterations=max_iter,
        residual=gap,
    )


def equilibrium_measure(
    spec: geometry.CompactSetSpec,
    n: int = DEFAULTS["support_points"],
    tol: float = DEFAULTS["equilibrium_tol"],
    seed: int = 0,
) -> DiscreteMeasure:
    measure, _ = equilibrium_with_details(spec, n, tol, seed)
    return measure


def equilibrium_with_details(spec, n, tol, seed, max_iter=DEFAULTS["equilibrium_max_iter"]):
    geometry.validate(spec)
    if isinstance(spec, geometry.PointSet) and len(spec.points) < 2:
        raise ValueError("polar input: a single point has no equilibrium measure")
    solved = geometry.without_atoms(spec)
    if solved != spec:
        # polar parts carry no equilibrium mass
        logger.info("equilibrium: dropping finite point sets from the union")
    sample = geometry.sample_with_cells(solved, n, seed)
    result = solve_equilibrium(sample.points, sample.cells, tol=tol, max_iter=max_iter)
    measure = probability_measure(sample.points, result["weights"], sample.cells)
    details = {
        "energy": result["energy"],
        "iterations": result["iterations"],
        "gap": result["gap"],
        "energy_history": result["energy_history"],
        "min_separation": sample.min_separation,
        "tol": tol,
    }
    logger.info("equilibrium: n=%d energy=%.8f iterations=%d", n, result["energy"], result["iterations"])
    return measure, details


def capacity(
    spec: geometry.CompactSetSpec,
    n: int = DEFAULTS["support_points"],
    tol: float = DEFAULTS["equilibrium_tol"],
    seed: int = 0,
) -> float:
    geometry.validate(spec)
    if geometry.is_finite_point_set(spec):
        return 0.0
    _, details = equilibrium_with_details(spec, n, tol, seed)
    return math.exp(details["energy"])


def frostman_check(
    m: DiscreteMeasure,
    spec: geometry.CompactSetSpec,
    samples: int = 100,
    seed: int = 0,
    min_distance: float = DEFAULTS["frostman_sample_distance"],
) -> dict:
    """Flatness of A w on the support and p >= I at exterior samples."""
    energy = regularized_energy(m)
    on_support = support_potential(m)[m.weights > 0]
    rng = np.random.default_rng(seed)
    radius = 3.0 * geometry.enclosing_radius(spec) + 1.0
    found = []
    while len(found) < samples:
        z = radius * np.sqrt(rng.uniform(size=4 * samples)) * np.exp(2j * np.pi * rng.uniform(size=4 * samples))
        keep = z[np.asarray(geometry.distance(spec, z)) >= min_distance]
        found.extend(keep.tolist())
    z = np.array(found[:samples])
    exterior = potential_values(m, z)
    return {
        "energy": energy,
        "flatness": float(on_support.max() - on_support.min()),
        "min_exterior_excess": float((exterior - energy).min()),
        "samples": samples,
    }


def _config_log_product(z: np.ndarray) -> float:
    return float(np.log(pdist(np.column_stack([z.real, z.imag]))).sum())


def fekete_diameter(
    spec: geometry.CompactSetSpec,
    n: int,
    seed: int = 0,
    sweeps: int = DEFAULTS["fekete_sweeps"],
    candidates: int = DEFAULTS["fekete_candidates"],
) -> float:
    value, _ = fekete_with_details(spec, n, seed, sweeps, candidates)
    return value


def fekete_with_details(spec, n, seed=0, sweeps=DEFAULTS["fekete_sweeps"], candidates=DEFAULTS["fekete_candidates"]):
    geometry.validate(spec)
    if n < 2:
        raise ValueError("fekete_diameter needs n >= 2")
    spec = geometry.without_atoms(spec)
    curve = isinstance(spec, (geometry.Disc, geometry.Segment, geometry.Polygon))
    if curve:
        closed = not isinstance(spec, geometry.Segment)
        grid = np.arange(candidates) / candidates if closed else np.linspace(0.0, 1.0, candidates)
        pool = np.asarray(geometry.curve_point(spec, grid), dtype=complex)
        rng = np.random.default_rng(seed)
        phase = rng.uniform(0.0, 1.0)
        params = (np.arange(n) + phase) / n if closed else np.linspace(0.0, 1.0, n)
        z = np.asarray(geometry.curve_point(spec, params), dtype=complex)
    else:
        size = geometry.point_count(spec) if geometry.is_finite_point_set(spec) else candidates
        pool = geometry.sample_with_cells(spec, min(size, max(candidates, n)), seed).points
        if n > len(pool):
            raise ValueError(f"n = {n} exceeds point set cardinality {len(pool)}")
        z = pool[np.linspace(0, len(pool) - 1, n).round().astype(int)]
        params = None

    def partial(c, others):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.asarray(c)[..., None] - others)).sum(axis=-1)

    total = _config_log_product(z)
    for sweep in range(1, sweeps + 1):
        before = total
        for i in range(n):
            others = np.delete(z, i)
            scores = partial(pool, others)
            best = int(np.argmax(scores))
            current = float(partial(z[i], others))
            if scores[best] > current:
                z[i] = pool[best]
                current = float(scores[best])
                if curve:
                    params[i] = grid[best]
            if curve:
                width = 1.0 / candidates
                lo, hi = params[i] - width, params[i] + width
                if not closed:
                    lo, hi = max(lo, 0.0), min(hi, 1.0)
                res = minimize_scalar(
                    lambda s: -float(partial(geometry.curve_point(spec, s), others)),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-12},
                )
                if -res.fun > current:
                    params[i] = res.x
                    z[i] = complex(geometry.curve_point(spec, res.x))
        total = _config_log_product(z)
        logger.debug("fekete sweep %d log-product %.12f", sweep, total)
        if total - before <= 1e-8 * max(1.0, abs(before)):
            pairs = n * (n - 1) / 2.0
            return math.exp(total / pairs), {"points": z, "sweeps": sweep}
    raise NonConvergenceError(
        f"fekete coordinate ascent still improving after {sweeps} sweeps",
        iterations=sweeps,
        residual=total - before,
    )


def classify_polarity(
    spec: geometry.CompactSetSpec,
    threshold: float = DEFAULTS["polarity_threshold"],
    schedule=DEFAULTS["polarity_schedule"],
    tol: float = DEFAULTS["equilibrium_tol"],
    seed: int = 0,
    stability: float = DEFAULTS["polarity_stability"],
) -> PolarityVerdict:
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    geometry.validate(spec)
    if geometry.is_finite_point_set(spec):
        return PolarityVerdict(0.0, tuple(0.0 for _ in schedule), "polar", threshold)

    sequence = []
    for n in schedule:
        try:
            sequence.append(capacity(spec, n, tol, seed))
        except NonConvergenceError as exc:
            logger.warning("capacity at n=%d did not converge: %s", n, exc)
            break
    if not sequence:
        return PolarityVerdict(math.inf, (), "inconclusive", threshold)

    estimate = sequence[-1]
    if len(sequence) == len(schedule) and estimate < threshold:
        classification = "polar"
    elif (
        len(sequence) == len(schedule)
        and len(sequence) >= 2
        and min(sequence) > threshold
        and abs(sequence[-1] - sequence[-2]) <= stability * estimate
    ):
        classification = "nonpolar"
    else:
        classification = "inconclusive"
    if classification == "inconclusive":
        logger.warning("polarity inconclusive: sequence %s", sequence)
    return PolarityVerdict(estimate, tuple(sequence), classification, threshold)


def verdict_from_json(data: dict) -> PolarityVerdict:
    return PolarityVerdict(
        float(data["capacity_estimate"]),
        tuple(float(v) for v in data["sequence"]),
        data["classification"],
        float(data["threshold"]),
    )
