"""Compact subsets of the plane: specs, validation, sampling and membership.

Sets are immutable frozen dataclasses. Discs and polygons are sampled on
their outer boundary, where equilibrium measures live; segments and point
sets are sampled on the set itself.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
import shapely
from scipy.spatial.distance import pdist
from shapely.geometry import LinearRing
from shapely.geometry import Polygon as ShapelyPolygon

logger = logging.getLogger(__name__)


def _pair(value: complex) -> list[float]:
    value = complex(value)
    return [value.real, value.imag]


def _complex(pair) -> complex:
    if not isinstance(pair, (list, tuple)) or len(pair) != 2:
        raise ValueError("complex coordinates must be [re, im] pairs.")
    return complex(float(pair[0]), float(pair[1]))


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def to_json(self) -> dict:
        return {"type": "disc", "center": _pair(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Segment:
    a: complex
    b: complex

    def to_json(self) -> dict:
        return {"type": "segment", "a": _pair(self.a), "b": _pair(self.b)}


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[complex, ...]

    def to_json(self) -> dict:
        return {"type": "polygon", "vertices": [_pair(v) for v in self.vertices]}

    def shape(self) -> ShapelyPolygon:
        return ShapelyPolygon([(v.real, v.imag) for v in self.vertices])


@dataclass(frozen=True)
class PointSet:
    points: tuple[complex, ...]

    def to_json(self) -> dict:
        return {"type": "point_set", "points": [_pair(p) for p in self.points]}


@dataclass(frozen=True)
class SetUnion:
    children: tuple["CompactSetSpec", ...]

    def to_json(self) -> dict:
        return {"type": "union", "children": [c.to_json() for c in self.children]}


CompactSetSpec = Disc | Segment | Polygon | PointSet | SetUnion


@dataclass(frozen=True)
class PlanePoint2:
    """A point (z, w) of the affine chart of the projective plane."""

    z: complex
    w: complex

    def __post_init__(self):
        if not (math.isfinite(abs(self.z)) and math.isfinite(abs(self.w))):
            raise ValueError("PlanePoint2 coordinates must be finite.")


@dataclass(frozen=True)
class SupportSample:
    points: np.ndarray
    # boundary length represented by each sample; 0 for isolated points
    cells: np.ndarray = field(repr=False)

    @property
    def min_separation(self) -> float:
        if len(self.points) < 2:
            return math.inf
        return float(pdist(np.column_stack([self.points.real, self.points.imag])).min())


def disc(center: complex, radius: float) -> Disc:
    return Disc(complex(center), float(radius))


def segment(a: complex, b: complex) -> Segment:
    return Segment(complex(a), complex(b))


def polygon(vertices) -> Polygon:
    return Polygon(tuple(complex(v) for v in vertices))


def point_set(points) -> PointSet:
    return PointSet(tuple(complex(p) for p in points))


def union(children) -> SetUnion:
    return SetUnion(tuple(children))


def _finite(*values: complex) -> bool:
    return all(math.isfinite(complex(v).real) and math.isfinite(complex(v).imag) for v in values)


def validate(spec: CompactSetSpec) -> CompactSetSpec:
    if isinstance(spec, Disc):
        if not _finite(spec.center) or not math.isfinite(spec.radius):
            raise ValueError("disc coordinates must be finite")
        if spec.radius <= 0:
            raise ValueError("radius must be positive")
    elif isinstance(spec, Segment):
        if not _finite(spec.a, spec.b):
            raise ValueError("segment coordinates must be finite")
        if spec.a == spec.b:
            raise ValueError("degenerate segment: endpoints must differ")
    elif isinstance(spec, Polygon):
        if len(spec.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        if not _finite(*spec.vertices):
            raise ValueError("polygon coordinates must be finite")
        ring = LinearRing([(v.real, v.imag) for v in spec.vertices])
        if not ring.is_simple or spec.shape().area <= 0:
            raise ValueError("self-intersecting polygon boundary")
    elif isinstance(spec, PointSet):
        if not spec.points:
            raise ValueError("empty point set")
        if not _finite(*spec.points):
            raise ValueError("point coordinates must be finite")
        if len(set(spec.points)) != len(spec.points):
            raise ValueError("point set has repeated points")
    elif isinstance(spec, SetUnion):
        if not spec.children:
            raise ValueError("empty union")
        for child in spec.children:
            validate(child)
    else:
        raise ValueError(f"unknown set variant {type(spec).__name__}")
    return spec


def boundary_length(spec: CompactSetSpec) -> float:
    if isinstance(spec, Disc):
        return 2.0 * math.pi * spec.radius
    if isinstance(spec, Segment):
        return abs(spec.b - spec.a)
    if isinstance(spec, Polygon):
        return spec.shape().exterior.length
    if isinstance(spec, PointSet):
        return 0.0
    return sum(boundary_length(child) for child in spec.children)


def area(spec: CompactSetSpec) -> float:
    if isinstance(spec, Disc):
        return math.pi * spec.radius**2
    if isinstance(spec, Polygon):
        return spec.shape().area
    if isinstance(spec, SetUnion):
        return sum(area(child) for child in spec.children)
    return 0.0


def enclosing_radius(spec: CompactSetSpec) -> float:
    """Radius of the smallest origin-centred disc containing the set."""
    if isinstance(spec, Disc):
        return abs(spec.center) + spec.radius
    if isinstance(spec, Segment):
        return max(abs(spec.a), abs(spec.b))
    if isinstance(spec, Polygon):
        return max(abs(v) for v in spec.vertices)
    if isinstance(spec, PointSet):
        return max(abs(p) for p in spec.points)
    return max(enclosing_radius(child) for child in spec.children)


def is_finite_point_set(spec: CompactSetSpec) -> bool:
    if isinstance(spec, PointSet):
        return True
    if isinstance(spec, SetUnion):
        return all(is_finite_point_set(child) for child in spec.children)
    return False


def without_atoms(spec: CompactSetSpec) -> CompactSetSpec:
    """Drops finite point-set parts from a union that also contains curves."""
    if not isinstance(spec, SetUnion) or is_finite_point_set(spec):
        return spec
    kept = [without_atoms(child) for child in spec.children if not is_finite_point_set(child)]
    return kept[0] if len(kept) == 1 else union(kept)


def curve_point(spec: CompactSetSpec, s):
    """Arc-length parametrization s in [0, 1) of a single curve variant."""
    s = np.asarray(s, dtype=float)
    if isinstance(spec, Disc):
        return spec.center + spec.radius * np.exp(2j * np.pi * s)
    if isinstance(spec, Segment):
        return spec.a + (spec.b - spec.a) * s
    if isinstance(spec, Polygon):
        ring = spec.shape().exterior
        pts = shapely.line_interpolate_point(ring, np.mod(s, 1.0) * ring.length)
        coords = shapely.get_coordinates(np.atleast_1d(pts))
        out = coords[:, 0] + 1j * coords[:, 1]
        return out.reshape(s.shape)
    raise ValueError(f"{type(spec).__name__} has no curve parametrization")


def _sample(spec: CompactSetSpec, n: int, rng: np.random.Generator) -> SupportSample:
    if isinstance(spec, PointSet):
        if n > len(spec.points):
            raise ValueError(
                f"n = {n} exceeds point set cardinality {len(spec.points)}"
            )
        chosen = np.sort(rng.choice(len(spec.points), size=n, replace=False))
        pts = np.array(spec.points, dtype=complex)[chosen]
        return SupportSample(pts, np.zeros(n))

    if isinstance(spec, SetUnion):
        return _sample_union(spec, n, rng)

    length = boundary_length(spec)
    if isinstance(spec, Segment):
        # sub-cell shift keeps endpoints out of the sample
        phase = rng.uniform(0.25, 0.75)
    else:
        phase = rng.uniform(0.0, 1.0)
    s = (np.arange(n) + phase) / n
    pts = np.asarray(curve_point(spec, s), dtype=complex)
    return SupportSample(pts, np.full(n, length / n))


def _sample_union(spec: SetUnion, n: int, rng: np.random.Generator) -> SupportSample:
    children = spec.children
    counts = np.zeros(len(children), dtype=int)
    lengths = np.array([boundary_length(c) for c in children])
    for i, child in enumerate(children):
        if is_finite_point_set(child):
            counts[i] = point_count(child)
    remaining = n - counts.sum()
    if remaining < 0:
        raise ValueError(
            f"n = {n} exceeds point set cardinality {int(counts.sum())}"
        )
    curved = lengths > 0
    if remaining > 0 and not curved.any():
        raise ValueError(
            f"n = {n} exceeds point set cardinality {int(counts.sum())}"
        )
    if curved.any():
        if remaining < curved.sum():
            raise ValueError("n is too small to sample every union component")
        # largest-remainder split by boundary length, at least 1 each
        share = remaining * lengths / lengths.sum()
        alloc = np.where(curved, np.maximum(1, np.floor(share)).astype(int), 0)
        order = np.argsort(-(share - np.floor(share)))
        i = 0
        while alloc.sum() < remaining:
            j = order[i % len(order)]
            if curved[j]:
                alloc[j] += 1
            i += 1
        while alloc.sum() > remaining:
            j = int(np.argmax(alloc))
            alloc[j] -= 1
        counts = counts + alloc

    seeds = rng.integers(0, 2**31 - 1, size=len(children))
    parts = [
        _sample(child, int(c), np.random.default_rng(int(s)))
        for child, c, s in zip(children, counts, seeds)
        if c > 0
    ]
    return SupportSample(
        np.concatenate([p.points for p in parts]),
        np.concatenate([p.cells for p in parts]),
    )


def point_count(spec: CompactSetSpec) -> int:
    if isinstance(spec, PointSet):
        return len(spec.points)
    return sum(point_count(child) for child in spec.children)


def sample_with_cells(spec: CompactSetSpec, n: int, seed: int) -> SupportSample:
    validate(spec)
    if n < 1:
        raise ValueError("n must be at least 1")
    sample = _sample(spec, n, np.random.default_rng(seed))
    separation = sample.min_separation
    if separation <= 0:
        raise ValueError("sampled support points coincide (overlapping union components)")
    logger.debug("sampled %d points, min separation %.3e", n, separation)
    return sample


def sample_support(spec: CompactSetSpec, n: int, seed: int) -> list[complex]:
    return [complex(p) for p in sample_with_cells(spec, n, seed).points]


def distance(spec: CompactSetSpec, z):
    """Euclidean distance from z (scalar or array) to the set."""
    z = np.asarray(z, dtype=complex)
    if isinstance(spec, Disc):
        d = np.maximum(np.abs(z - spec.center) - spec.radius, 0.0)
    elif isinstance(spec, Segment):
        direction = spec.b - spec.a
        t = ((z - spec.a) * np.conj(direction)).real / abs(direction) ** 2
        d = np.abs(z - (spec.a + np.clip(t, 0.0, 1.0) * direction))
    elif isinstance(spec, Polygon):
        pts = shapely.points(np.atleast_1d(z.real), np.atleast_1d(z.imag))
        d = shapely.distance(spec.shape(), pts).reshape(z.shape)
    elif isinstance(spec, PointSet):
        pts = np.array(spec.points, dtype=complex)
        d = np.abs(z[..., None] - pts).min(axis=-1)
    else:
        d = np.min([distance(child, z) for child in spec.children], axis=0)
    return float(d) if np.ndim(d) == 0 else d


def contains(spec: CompactSetSpec, z: complex, tol: float = 1e-9) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return bool(distance(spec, z) <= tol)


def spec_from_json(data: dict) -> CompactSetSpec:
    if not isinstance(data, dict) or "type" not in data:
        raise ValueError("set spec must be an object with a 'type' field")
    kind = data["type"]
    if kind == "disc":
        spec = disc(_complex(data["center"]), float(data["radius"]))
    elif kind == "segment":
        spec = segment(_complex(data["a"]), _complex(data["b"]))
    elif kind == "polygon":
        spec = polygon([_complex(v) for v in data["vertices"]])
    elif kind == "point_set":
        spec = point_set([_complex(p) for p in data["points"]])
    elif kind == "union":
        spec = union([spec_from_json(child) for child in data["children"]])
    else:
        raise ValueError(f"unknown set type {kind!r}")
    return validate(spec)
