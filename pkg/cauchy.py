"""Cauchy transforms, Laurent tails at infinity and the vanishing-order boost.

Every function here is holomorphic off a compact set and vanishes at
infinity. Its behaviour there is carried by a LaurentTail
f(z) = sum_{l >= p} c_l z^{-l}. Boosting combines difference quotients
(f(z) - f(z_j)) / (z - z_j) so that the first p coefficients cancel.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import shapely
from scipy import integrate, linalg

from capstone_defaults import DEFAULTS
from convergence import ConvergenceVerdict, divergent, finite
import geometry
import potential
from potential import SignedMeasure

logger = logging.getLogger(__name__)

_TRIM = 1e-12
_CHUNK = 2048


class TrivialBoostError(ValueError):
    """The boosted combination vanished identically (f looks rational)."""


@dataclass(frozen=True)
class LaurentTail:
    start_order: int
    coefficients: tuple[complex, ...] = ()

    def __post_init__(self):
        if self.start_order < 1:
            raise ValueError("start_order must be at least 1")
        if self.coefficients and self.coefficients[0] == 0:
            raise ValueError("leading Laurent coefficient must be nonzero")

    @property
    def is_zero(self) -> bool:
        return not self.coefficients

    @property
    def last_order(self) -> int:
        return self.start_order + len(self.coefficients) - 1

    def coefficient(self, order: int) -> complex:
        index = order - self.start_order
        if 0 <= index < len(self.coefficients):
            return self.coefficients[index]
        if order < self.start_order:
            return 0j
        raise IndexError(f"order {order} is beyond the stored tail")

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for i, c in enumerate(self.coefficients):
            out += c * z ** (-(self.start_order + i))
        return out

    def to_json(self) -> dict:
        return {
            "start_order": self.start_order,
            "coefficients": [[c.real, c.imag] for c in self.coefficients],
        }


def tail_from_json(data: dict) -> LaurentTail:
    return LaurentTail(
        int(data["start_order"]), tuple(complex(re, im) for re, im in data["coefficients"])
    )


def trimmed_tail(coefficients, scales, first_order: int = 1) -> LaurentTail:
    """Drop leading coefficients that are roundoff relative to their scale."""
    coefficients = np.asarray(coefficients, dtype=complex)
    scales = np.asarray(scales, dtype=float)
    significant = np.abs(coefficients) > _TRIM * np.maximum(scales, 1e-300)
    if not significant.any():
        return LaurentTail(first_order + len(coefficients))
    lead = int(np.argmax(significant))
    return LaurentTail(first_order + lead, tuple(complex(c) for c in coefficients[lead:]))


def _combined(mu: SignedMeasure):
    support = np.concatenate([mu.positive.support, mu.negative.support])
    weights = np.concatenate([mu.positive.weights, -mu.negative.weights])
    return support, weights


def signed_equilibrium_difference(
    e1: geometry.CompactSetSpec,
    e2: geometry.CompactSetSpec,
    n: int = DEFAULTS["support_points"],
    tol: float = DEFAULTS["equilibrium_tol"],
    seed: int = 0,
) -> SignedMeasure:
    for spec in (e1, e2):
        geometry.validate(spec)
        if geometry.is_finite_point_set(spec):
            raise ValueError("polar component: finite point sets have capacity zero")
        verdict = potential.classify_polarity(spec, tol=tol, seed=seed)
        if verdict.classification != "nonpolar":
            raise ValueError(f"polar component: polarity classified {verdict.classification}")

    mu1 = potential.equilibrium_measure(e1, n, tol, seed)
    mu2 = potential.equilibrium_measure(e2, n, tol, seed + 1)
    if (
        np.any(np.asarray(geometry.distance(e1, mu2.support)) <= 1e-9)
        or np.any(np.asarray(geometry.distance(e2, mu1.support)) <= 1e-9)
    ):
        raise ValueError("supports overlap")
    return SignedMeasure(mu1, mu2)


def signed_measure_from_json(data: dict) -> SignedMeasure:
    return SignedMeasure(
        potential.measure_from_json(data["positive"]),
        potential.measure_from_json(data["negative"]),
    )


def cauchy_values(mu: SignedMeasure, z) -> np.ndarray:
    support, weights = _combined(mu)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    flat = z.ravel()
    if len(support) and np.abs(flat[:, None] - support).min() <= 1e-9:
        raise ValueError("Cauchy transform evaluated on the support")
    out = np.empty(flat.shape, dtype=complex)
    for start in range(0, len(flat), _CHUNK):
        block = flat[start:start + _CHUNK]
        out[start:start + _CHUNK] = (1.0 / (support - block[:, None])) @ weights
    return out.reshape(z.shape)


def cauchy_transform(mu: SignedMeasure, z: complex) -> complex:
    return complex(cauchy_values(mu, z)[0])


def moments(mu: SignedMeasure, count: int) -> np.ndarray:
    support, weights = _combined(mu)
    powers = support[None, :] ** np.arange(count)[:, None]
    return powers @ weights


def laurent_tail(mu: SignedMeasure, max_order: int) -> LaurentTail:
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    support, weights = _combined(mu)
    m = moments(mu, max_order)
    # c_l = -m_{l-1}
    coefficients = -m
    radius = float(np.abs(support).max()) if len(support) else 0.0
    variation = float(np.abs(weights).sum())
    scales = variation * np.maximum(radius, 1.0) ** np.arange(max_order)
    return trimmed_tail(coefficients, scales)


def contour_laurent_coefficients(
    func,
    max_order: int,
    radius: float = DEFAULTS["contour_radius"],
    nodes: int = DEFAULTS["contour_nodes"],
) -> np.ndarray:
    """c_1..c_max_order by the trapezoid rule on |z| = radius, via FFT."""
    if max_order >= nodes:
        raise ValueError("contour nodes must exceed max_order")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    values = np.asarray(func(radius * np.exp(1j * theta)), dtype=complex)
    spectrum = np.fft.ifft(values)
    orders = np.arange(1, max_order + 1)
    return spectrum[orders] * radius**orders


def _area_nodes(e: geometry.CompactSetSpec, n_grid: int):
    if isinstance(e, geometry.Disc):
        r = e.radius
        edges = np.linspace(0.0, r, n_grid + 1)
        radii = 0.5 * (edges[1:] + edges[:-1])
        ring_area = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2) / n_grid
        theta = 2.0 * np.pi * (np.arange(n_grid) + 0.5) / n_grid
        nodes = e.center + radii[:, None] * np.exp(1j * theta)[None, :]
        weights = np.broadcast_to(ring_area[:, None], nodes.shape)
        return nodes.ravel(), np.array(weights).ravel()
    if isinstance(e, geometry.Polygon):
        shape = e.shape()
        x0, y0, x1, y1 = shape.bounds
        xs = x0 + (np.arange(n_grid) + 0.5) * (x1 - x0) / n_grid
        ys = y0 + (np.arange(n_grid) + 0.5) * (y1 - y0) / n_grid
        gx, gy = np.meshgrid(xs, ys)
        inside = shapely.contains_xy(shape, gx.ravel(), gy.ravel())
        cell = (x1 - x0) * (y1 - y0) / n_grid**2
        nodes = (gx.ravel() + 1j * gy.ravel())[inside]
        return nodes, np.full(len(nodes), cell)
    if isinstance(e, geometry.SetUnion):
        parts = [_area_nodes(c, n_grid) for c in e.children if geometry.area(c) > 0]
        if not parts:
            return np.array([], dtype=complex), np.array([])
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
    return np.array([], dtype=complex), np.array([])


def area_cauchy_values(e: geometry.CompactSetSpec, z, n_grid: int = DEFAULTS["area_grid"]):
    geometry.validate(e)
    if geometry.area(e) <= 0:
        raise ValueError("zero area: the area Cauchy transform needs a disc or polygon")
    nodes, weights = _area_nodes(e, n_grid)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    flat = z.ravel()
    if np.any(np.asarray(geometry.distance(e, flat)) <= 1e-9):
        raise ValueError("area Cauchy transform evaluated on the set")
    out = np.empty(flat.shape, dtype=complex)
    step = max(1, _CHUNK * 64 // max(1, len(nodes)))
    for start in range(0, len(flat), step):
        block = flat[start:start + step]
        out[start:start + step] = (1.0 / (nodes - block[:, None])) @ weights
    return out.reshape(z.shape)


def area_cauchy_transform(
    e: geometry.CompactSetSpec, z: complex, n_grid: int = DEFAULTS["area_grid"]
) -> complex:
    return complex(area_cauchy_values(e, z, n_grid)[0])


def area_laurent_tail(
    e: geometry.CompactSetSpec, max_order: int, n_grid: int = DEFAULTS["area_grid"]
) -> LaurentTail:
    """g = -sum_l M_l z^{-l-1} with area moments M_l; c_1 = -area(E)."""
    if geometry.area(e) <= 0:
        raise ValueError("zero area: the area Cauchy transform needs a disc or polygon")
    nodes, weights = _area_nodes(e, n_grid)
    powers = nodes[None, :] ** np.arange(max_order)[:, None]
    coefficients = -(powers @ weights)
    radius = max(geometry.enclosing_radius(e), 1.0)
    scales = geometry.area(e) * radius ** np.arange(max_order)
    return trimmed_tail(coefficients, scales)


# -- holomorphic functions with serializable recursions ---------------------


@dataclass(frozen=True)
class CauchyFunction:
    measure: SignedMeasure

    def __call__(self, z):
        return cauchy_values(self.measure, z)

    def tail(self, max_order: int) -> LaurentTail:
        return laurent_tail(self.measure, max_order)

    def singular_radius(self) -> float:
        support, _ = _combined(self.measure)
        return float(np.abs(support).max())

    def to_json(self) -> dict:
        return {"kind": "cauchy", "measure": self.measure.to_json()}


@dataclass(frozen=True)
class AreaPowerFunction:
    """g^j for the area Cauchy transform g of a positive-area set."""

    area_set: geometry.CompactSetSpec
    power: int
    n_grid: int = DEFAULTS["area_grid"]

    def __call__(self, z):
        return area_cauchy_values(self.area_set, z, self.n_grid) ** self.power

    def tail(self, max_order: int) -> LaurentTail:
        base = area_laurent_tail(self.area_set, max_order, self.n_grid)
        series = np.zeros(max_order + 1, dtype=complex)
        for order in range(base.start_order, base.last_order + 1):
            series[order] = base.coefficient(order)
        result = np.zeros(max_order + 1, dtype=complex)
        result[0] = 1.0
        for _ in range(self.power):
            result = np.convolve(result, series)[: max_order + 1]
        radius = max(geometry.enclosing_radius(self.area_set), 1.0)
        orders = np.arange(1, max_order + 1)
        scales = geometry.area(self.area_set) ** self.power * radius ** np.maximum(orders - self.power, 0)
        return trimmed_tail(result[1:], scales)

    def singular_radius(self) -> float:
        return geometry.enclosing_radius(self.area_set)

    def to_json(self) -> dict:
        return {
            "kind": "area_power",
            "set": self.area_set.to_json(),
            "power": self.power,
            "n_grid": self.n_grid,
        }


@dataclass(frozen=True)
class BoostedFunction:
    base: "HolomorphicFunction"
    anchors: tuple[complex, ...]
    combiners: tuple[complex, ...]
    tail: LaurentTail
    anchor_values: tuple[complex, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if not self.anchor_values:
            values = np.asarray(self.base(np.array(self.anchors)), dtype=complex)
            object.__setattr__(self, "anchor_values", tuple(complex(v) for v in values))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        f = np.asarray(self.base(z), dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for b, a, fa in zip(self.combiners, self.anchors, self.anchor_values):
            out += b * (f - fa) / (z - a)
        return out

    def singular_radius(self) -> float:
        return max(self.base.singular_radius(), max(abs(a) for a in self.anchors))

    def to_json(self) -> dict:
        return {
            "kind": "boost",
            "base": self.base.to_json(),
            "anchors": [[a.real, a.imag] for a in self.anchors],
            "combiners": [[b.real, b.imag] for b in self.combiners],
            "tail": self.tail.to_json(),
        }


HolomorphicFunction = CauchyFunction | AreaPowerFunction | BoostedFunction


def function_from_json(data: dict) -> HolomorphicFunction:
    kind = data.get("kind")
    if kind == "cauchy":
        return CauchyFunction(signed_measure_from_json(data["measure"]))
    if kind == "area_power":
        return AreaPowerFunction(
            geometry.spec_from_json(data["set"]), int(data["power"]), int(data["n_grid"])
        )
    if kind == "boost":
        return BoostedFunction(
            function_from_json(data["base"]),
            tuple(complex(re, im) for re, im in data["anchors"]),
            tuple(complex(re, im) for re, im in data["combiners"]),
            tail_from_json(data["tail"]),
        )
    raise ValueError(f"unknown function kind {kind!r}")


def vanishing_boost(
    tail: LaurentTail,
    evaluator,
    anchors,
    null_ratio: float = DEFAULTS["null_space_ratio"],
    coefficient_tol: float = DEFAULTS["boost_coefficient_tol"],
) -> BoostedFunction:
    """Kill c_1..c_p of f with p + 1 anchors; returns g of order >= p + 1."""
    p = tail.start_order
    if tail.is_zero:
        raise ValueError("cannot boost an identically zero function")
    if p < 2:
        raise ValueError("boosting needs start_order >= 2")
    anchors = np.asarray([complex(a) for a in anchors])
    if len(anchors) != p + 1:
        raise ValueError(f"exactly {p + 1} anchors are needed for start_order {p}")
    if len(set(anchors.tolist())) != len(anchors):
        raise ValueError("repeated anchors")

    values = np.asarray(evaluator(anchors), dtype=complex)
    if not np.all(np.isfinite(values)):
        raise ValueError("anchors must avoid the singular set")

    # a_m = -sum_l b_l f(z_l) z_l^{m-1}, m = 1..p
    system = -(values[None, :] * anchors[None, :] ** np.arange(p)[:, None])
    _, sigma, vh = linalg.svd(system)
    b = vh[-1].conj()
    residual = np.abs(system @ b)
    magnitude = np.abs(system) @ np.abs(b)
    if np.linalg.norm(system @ b) > null_ratio * max(sigma[0], 1e-300):
        raise ValueError("only the trivial solution was found (rank-deficient system)")
    if np.any(residual > coefficient_tol * np.maximum(1.0, magnitude)):
        raise ValueError("boosted coefficients a_m did not vanish to tolerance")

    # a_n = sum_l b_l [-f(z_l) z_l^{n-1} + sum_{j=p}^{n-1} c_j z_l^{n-1-j}]
    orders = np.arange(p + 1, tail.last_order + 2)
    coefficients = np.zeros(len(orders), dtype=complex)
    scales = np.zeros(len(orders))
    for i, n in enumerate(orders):
        terms = -values * anchors ** (n - 1)
        for j in range(p, n):
            terms = terms + tail.coefficient(j) * anchors ** (n - 1 - j)
        coefficients[i] = terms @ b
        scales[i] = np.abs(terms) @ np.abs(b)
    boosted = trimmed_tail(coefficients, scales, first_order=p + 1)
    if boosted.is_zero:
        raise TrivialBoostError("boosted function is identically zero: f appears rational")
    logger.debug("boost p=%d -> start_order %d", p, boosted.start_order)
    return BoostedFunction(
        evaluator,
        tuple(complex(a) for a in anchors),
        tuple(complex(v) for v in b),
        boosted,
        tuple(complex(v) for v in values),
    )


def default_anchors(count: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return radius * np.exp(1j * (phase + 2.0 * np.pi * np.arange(count) / count))


def weighted_tail_norm(tail: LaurentTail, k: int, R: float) -> ConvergenceVerdict:
    """2 pi sum |c_l|^2 int_R^inf r^{1-2l} (1+r^2)^{-2-k} dr, termwise."""
    if R <= 1:
        raise ValueError("R must exceed 1")
    if tail.is_zero:
        return finite(0.0, 0.0, detail="zero tail")
    lead = tail.start_order
    exponent = 1 - 2 * lead - 2 * (2 + k)
    if exponent >= -1:
        return divergent(float(exponent), detail=f"integrand ~ r^{exponent} at order {lead}")
    total = 0.0
    error = 0.0
    masses = []
    for i, c in enumerate(tail.coefficients):
        order = lead + i
        value, abserr = integrate.quad(
            lambda r, order=order: r ** (1 - 2 * order) * (1 + r * r) ** (-2 - k),
            R,
            np.inf,
        )
        term = 2.0 * math.pi * abs(c) ** 2
        masses.append(term * value)
        total += term * value
        error += term * abserr
    return finite(total, error, exponent=float(exponent), shell_masses=tuple(masses))


@dataclass(frozen=True)
class SequenceTerm:
    function: HolomorphicFunction
    tail: LaurentTail
    verdict: ConvergenceVerdict

    @property
    def order(self) -> int:
        return self.tail.start_order

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "function": self.function.to_json(),
            "tail": self.tail.to_json(),
            "verdict": self.verdict.to_json(),
        }


@dataclass(frozen=True)
class BoostSettings:
    anchor_radius_factor: float = DEFAULTS["anchor_radius_factor"]
    extra_orders: int = DEFAULTS["laurent_extra_orders"]
    attempts: int = DEFAULTS["boost_attempts"]
    null_ratio: float = DEFAULTS["null_space_ratio"]
    coefficient_tol: float = DEFAULTS["boost_coefficient_tol"]
    area_grid: int = DEFAULTS["area_grid"]


def wiegerinck_sequence(
    e1: geometry.CompactSetSpec,
    e2: geometry.CompactSetSpec,
    count: int,
    k: int,
    seed: int = 0,
    n: int = DEFAULTS["support_points"],
    tol: float = DEFAULTS["equilibrium_tol"],
    settings: BoostSettings = BoostSettings(),
) -> list[SequenceTerm]:
    """Functions of strictly increasing vanishing order at infinity."""
    if count < 1:
        raise ValueError("count must be at least 1")
    mu = signed_equilibrium_difference(e1, e2, n, tol, seed)
    both = geometry.union([e1, e2])
    anchor_radius = settings.anchor_radius_factor * geometry.enclosing_radius(both)
    # each boost level gets its own anchor circle, away from earlier anchors
    R = max(2.0, 2.0 * anchor_radius * (1.0 + 0.1 * count))
    extra = settings.extra_orders
    rng = np.random.default_rng(seed)

    current = CauchyFunction(mu)
    tail = laurent_tail(mu, 2 + extra)
    if tail.is_zero:
        raise TrivialBoostError("Cauchy transform vanishes identically")
    tail = laurent_tail(mu, tail.start_order + extra)
    terms = [SequenceTerm(current, tail, weighted_tail_norm(tail, k, R))]

    rational = False
    while len(terms) < count:
        if not rational:
            for attempt in range(settings.attempts):
                anchors = default_anchors(
                    tail.start_order + 1, anchor_radius * (1.0 + 0.1 * len(terms)), rng
                )
                try:
                    boosted = vanishing_boost(
                        tail, current, anchors, settings.null_ratio, settings.coefficient_tol
                    )
                    break
                except TrivialBoostError:
                    logger.debug("boost attempt %d trivial", attempt + 1)
            else:
                rational = True
                logger.warning("f appears rational; switching to powers of the area Cauchy transform")
                if geometry.area(both) <= 0:
                    raise TrivialBoostError(
                        "f appears rational and E1 u E2 has zero area; no fallback sequence"
                    )
                continue
            current, tail = boosted, boosted.tail
        else:
            power = terms[-1].order + 1
            current = AreaPowerFunction(both, power, settings.area_grid)
            tail = current.tail(power + extra)
        terms.append(SequenceTerm(current, tail, weighted_tail_norm(tail, k, R)))
        logger.info("sequence term %d: order %d", len(terms), tail.start_order)

    orders = [t.order for t in terms]
    if len(set(orders)) != len(orders):
        raise RuntimeError(f"sequence orders are not distinct: {orders}")
    return terms
