"""Monomial Bergman spaces of the Reinhardt regions B, X_l, Y, Z_m in C^2.

Norms use the weight (1 + |z|^2 + |w|^2)^-(3+k). With r = |z|, s = |w|,
||z^p w^q||^2 = (2 pi)^2 * int r^(2p+1) s^(2q+1) (1 + r^2 + s^2)^-(3+k) dr ds
over the region's (r, s) shadow. The tails are integrated on geometric
radial shells in log space, so very thin regions do not underflow.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp

from capstone_defaults import DEFAULTS, worker_count
import convergence
from convergence import ConvergenceVerdict
from geometry import PlanePoint2

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RegionB:
    """max(|z|, |w|) < 2."""

    @property
    def label(self) -> str:
        return "B"

    def to_json(self) -> dict:
        return {"type": "B"}


@dataclass(frozen=True)
class RegionX:
    """|z| > sqrt 2, |w| < |z|^-ell."""

    ell: int

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError("X regions need ell >= 1")

    @property
    def label(self) -> str:
        return f"X_{self.ell}"

    def to_json(self) -> dict:
        return {"type": "X", "ell": self.ell}


@dataclass(frozen=True)
class RegionY:
    """|w| > sqrt 2, |z| < 1 / |w|."""

    @property
    def label(self) -> str:
        return "Y"

    def to_json(self) -> dict:
        return {"type": "Y"}


@dataclass(frozen=True)
class RegionZ:
    """|z|^2 + |w|^2 > 2, ||z| - |w|| < (|z| + |w|)^-m."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("Z regions need m >= 2")

    @property
    def label(self) -> str:
        return f"Z_{self.m}"

    def to_json(self) -> dict:
        return {"type": "Z", "m": self.m}


@dataclass(frozen=True)
class RegionUnion:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ValueError("empty union")

    @property
    def label(self) -> str:
        return " ∪ ".join(child.label for child in self.children)

    def to_json(self) -> dict:
        return {"type": "union", "children": [child.to_json() for child in self.children]}


RegionSpec = RegionB | RegionX | RegionY | RegionZ | RegionUnion


@dataclass(frozen=True)
class MonomialIndex:
    p: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("monomial exponents must be nonnegative")

    def to_json(self) -> list:
        return [self.p, self.q]


@dataclass(frozen=True)
class ShellBudget:
    shells: int = DEFAULTS["shell_count"]
    r_max: float = DEFAULTS["shell_r_max"]
    nodes: int = DEFAULTS["shell_gauss_nodes"]
    critical_margin: float = DEFAULTS["critical_margin"]
    decay_shells: int = DEFAULTS["shell_decay_shells"]

    def escalated(self) -> "ShellBudget":
        # squaring R_max doubles the log-range, so the shell count doubles too
        return ShellBudget(
            self.shells * 2, self.r_max**2, self.nodes, self.critical_margin, self.decay_shells
        )


def region_from_json(data: dict) -> RegionSpec:
    kind = data.get("type")
    if kind == "B":
        return RegionB()
    if kind == "X":
        return RegionX(int(data["ell"]))
    if kind == "Y":
        return RegionY()
    if kind == "Z":
        return RegionZ(int(data["m"]))
    if kind == "union":
        return RegionUnion(tuple(region_from_json(child) for child in data["children"]))
    raise ValueError(f"unknown region type {kind!r}")


def region_contains(region: RegionSpec, pt: PlanePoint2) -> bool:
    a, b = abs(pt.z), abs(pt.w)
    if isinstance(region, RegionB):
        return max(a, b) < 2.0
    if isinstance(region, RegionX):
        return a > SQRT2 and b < a ** (-region.ell)
    if isinstance(region, RegionY):
        return b > SQRT2 and a < 1.0 / b
    if isinstance(region, RegionZ):
        return a * a + b * b > 2.0 and abs(a - b) < (a + b) ** (-region.m)
    return any(region_contains(child, pt) for child in region.children)


def monomial_predicate(region: RegionSpec, idx: MonomialIndex, k: int) -> bool:
    p, q = idx.p, idx.q
    if isinstance(region, RegionB):
        return True
    if isinstance(region, RegionX):
        return p - region.ell * q <= k + region.ell + 1
    if isinstance(region, RegionY):
        return q - p <= k + 2
    if isinstance(region, RegionZ):
        return 2 * (p + q) <= region.m + 2 * k + 2
    # z^p w^q lies in A^2 of a union iff it is square integrable on every piece
    return all(monomial_predicate(child, idx, k) for child in region.children)


def predicate_exponent(region: RegionSpec, idx: MonomialIndex, k: int) -> float:
    """Radial exponent e with ||z^p w^q||^2 ~ int^inf R^e dR; finite iff e < -1."""
    p, q = idx.p, idx.q
    if isinstance(region, RegionB):
        return -math.inf
    if isinstance(region, RegionX):
        return 2 * p + 2 * q + 3 - (region.ell + 1) * (2 * q + 2) - 2 * (3 + k)
    if isinstance(region, RegionY):
        return 2 * p + 2 * q + 3 - 2 * (2 * p + 2) - 2 * (3 + k)
    if isinstance(region, RegionZ):
        return 2 * p + 2 * q + 3 - (region.m + 1) - 2 * (3 + k)
    raise ValueError("predicate_exponent needs a single region, not a union")


# -- quadrature ---------------------------------------------------------------


def _gauss(nodes: int, lo: float, hi: float):
    x, w = leggauss(nodes)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


def _z_half_width(m: int, R: np.ndarray) -> np.ndarray:
    """psi* with sin(psi*) cos(psi*)^m = (sqrt 2 R)^-(m+1).

    sin cos^m is increasing and concave on [0, atan(m^-1/2)], so Newton
    from the left converges monotonically.
    """
    c = np.exp(-(m + 1) * np.log(SQRT2 * R))
    psi = np.array(c, dtype=float)
    for _ in range(60):
        s, co = np.sin(psi), np.cos(psi)
        f = s * co**m - c
        df = co ** (m + 1) - m * s * s * co ** (m - 1)
        step = f / df
        psi = psi - step
        if np.all(np.abs(step) <= 1e-15 * psi):
            break
    return psi


def _log_shell_masses(region: RegionSpec, idx: MonomialIndex, k: int, budget: ShellBudget):
    """log of int over each shell; returns (edges, log_masses)."""
    p, q = idx.p, idx.q
    if isinstance(region, RegionY):
        # Y is X_1 with the roles of z and w exchanged
        region, p, q = RegionX(1), q, p
    edges = SQRT2 * (budget.r_max / SQRT2) ** np.linspace(0.0, 1.0, budget.shells + 1)
    t, wt = leggauss(budget.nodes)
    log_masses = np.empty(budget.shells)
    for j in range(budget.shells):
        u, wu = _gauss(budget.nodes, math.log(edges[j]), math.log(edges[j + 1]))
        R = np.exp(u)[:, None]
        if isinstance(region, RegionX):
            ell = region.ell
            tt = 0.5 * (t + 1.0)[None, :]
            log_s = -ell * np.log(R) + np.log(tt)
            log_f = (
                (2 * p + 1) * np.log(R)
                + (2 * q + 1) * log_s
                - ell * np.log(R)  # ds = R^-ell dt
                - (3 + k) * np.log1p(R**2 + np.exp(2.0 * log_s))
                + np.log(R)  # dr = R du
            )
            log_w = np.log(wu)[:, None] + np.log(0.5 * wt)[None, :]
        else:
            half = _z_half_width(region.m, R)
            psi = half * t[None, :]
            log_f = (
                (2 * p + 2 * q + 3) * np.log(R)
                - (3 + k) * np.log1p(R**2)
                + (2 * p + 1) * np.log(np.cos(math.pi / 4 - psi))
                + (2 * q + 1) * np.log(np.sin(math.pi / 4 - psi))
                + np.log(half)
                + np.log(R)
            )
            log_w = np.log(wu)[:, None] + np.log(wt)[None, :]
        log_masses[j] = logsumexp(log_f + log_w)
    return edges, log_masses


def _bounded_region_norm(idx: MonomialIndex, k: int, nodes: int) -> float:
    r, wr = _gauss(nodes, 0.0, 2.0)
    rr, ss = np.meshgrid(r, r, indexing="ij")
    f = rr ** (2 * idx.p + 1) * ss ** (2 * idx.q + 1) * (1.0 + rr**2 + ss**2) ** (-(3 + k))
    return float(wr @ f @ wr) * (2.0 * math.pi) ** 2


def _classify_shells(edges, log_masses, budget: ShellBudget):
    tail = slice(-budget.decay_shells, None)
    slope = np.polyfit(np.log(edges[:-1][tail]), log_masses[tail], 1)[0]
    exponent = float(slope - 1.0)
    masses = np.exp(log_masses - log_masses.max())
    growing = convergence.nondecreasing(masses, budget.decay_shells)
    decaying = bool(np.all(np.diff(log_masses[tail]) < 0))
    near = abs(exponent + 1.0) < budget.critical_margin
    return exponent, growing, decaying, near


def monomial_norm_estimate(
    region: RegionSpec,
    idx: MonomialIndex,
    k: int,
    budget: ShellBudget = ShellBudget(),
) -> ConvergenceVerdict:
    if isinstance(region, RegionUnion):
        raise ValueError("monomial_norm_estimate needs a single region, not a union")
    if isinstance(region, RegionB):
        value = _bounded_region_norm(idx, k, 2 * budget.nodes)
        error = abs(value - _bounded_region_norm(idx, k, budget.nodes))
        return convergence.finite(value, error, detail="bounded region")

    edges, log_masses = _log_shell_masses(region, idx, k, budget)
    exponent, growing, decaying, near = _classify_shells(edges, log_masses, budget)
    escalated = False
    if near:
        logger.warning(
            "%s z^%d w^%d k=%d: exponent %.3f near critical, escalating R_max",
            region.label, idx.p, idx.q, k, exponent,
        )
        budget = budget.escalated()
        edges, log_masses = _log_shell_masses(region, idx, k, budget)
        exponent, growing, decaying, near = _classify_shells(edges, log_masses, budget)
        escalated = True

    scale = (2.0 * math.pi) ** 2
    shell_masses = tuple(float(v) for v in scale * np.exp(log_masses))
    common = {
        "near_critical": escalated,
        "shell_masses": shell_masses,
    }
    if growing:
        return convergence.divergent(exponent, detail=f"R_max={budget.r_max:g}", **common)
    if decaying and not near and exponent < -1.0:
        ratio = (edges[-1] / edges[-2]) ** (exponent + 1.0)
        tail = shell_masses[-1] * ratio / (1.0 - ratio)
        value = scale * float(np.exp(logsumexp(log_masses)))
        return convergence.finite(value + tail, tail + 1e-10 * value, exponent=exponent, **common)
    logger.warning("%s z^%d w^%d k=%d: shells undecided", region.label, idx.p, idx.q, k)
    return ConvergenceVerdict(
        "undecided",
        exponent=exponent,
        detail="shell budget exhausted without a classification",
        **common,
    )


# -- the domains Omega_k --------------------------------------------------------


def omega_k_spec(k: int) -> RegionUnion:
    if k >= -2:
        return RegionUnion((RegionB(), RegionX(1), RegionY(), RegionZ(2)))
    return RegionUnion((RegionB(), RegionX(1 - 2 * (k + 2)), RegionY(), RegionZ(-2 * (2 * k + 3))))


def default_p_max(k: int) -> int:
    return k + 4 if k >= -2 else -k + 2


def omega_k_monomial_basis(k: int, p_max: int | None = None) -> list[MonomialIndex]:
    p_max = default_p_max(k) if p_max is None else p_max
    if p_max < 0:
        raise ValueError("p_max must be nonnegative")
    omega = omega_k_spec(k)
    basis = [
        MonomialIndex(p, total - p)
        for total in range(p_max + 1)
        for p in range(total + 1)
        if monomial_predicate(omega, MonomialIndex(p, total - p), k)
    ]
    if any(m.p + m.q == p_max for m in basis):
        raise ValueError(f"p_max = {p_max} does not bound the basis for k = {k}")
    return basis


def omega_k_dimension(k: int) -> int:
    return len(omega_k_monomial_basis(k))


def dim_global_sections_p2(k: int) -> int:
    return max(0, (k + 1) * (k + 2) // 2)


def omega_k_report(k: int, budget: ShellBudget = ShellBudget()) -> dict:
    omega = omega_k_spec(k)
    basis = omega_k_monomial_basis(k)
    verdicts = {}
    for region in omega.children:
        verdicts[region.label] = {
            f"{m.p},{m.q}": monomial_norm_estimate(region, m, k, budget).to_json() for m in basis
        }
    return {
        "k": k,
        "omega": omega.label,
        "basis": [m.to_json() for m in basis],
        "dimension": len(basis),
        "global_dimension": dim_global_sections_p2(k),
        "verdicts": verdicts,
    }


def cross_validate(
    k_values=(-5, -3, -2, 0, 1),
    ell_values=(1, 3, 5),
    m_values=(2, 6, 10),
    max_degree: int = 6,
    budget: ShellBudget = ShellBudget(),
) -> dict:
    """Compare shell quadrature with the closed-form predicates on a grid."""
    regions = [RegionX(ell) for ell in ell_values] + [RegionY()] + [RegionZ(m) for m in m_values]
    cells = [
        (region, MonomialIndex(p, total - p), k)
        for region in regions
        for k in k_values
        for total in range(max_degree + 1)
        for p in range(total + 1)
    ]

    def evaluate(cell):
        region, idx, k = cell
        verdict = monomial_norm_estimate(region, idx, k, budget)
        expected = predicate_exponent(region, idx, k)
        return {
            "region": region.label,
            "p": idx.p,
            "q": idx.q,
            "k": k,
            "predicate": monomial_predicate(region, idx, k),
            "status": verdict.status,
            "decided": verdict.decided,
            "near_critical": verdict.near_critical,
            "exponent": verdict.exponent,
            "expected_exponent": expected,
        }

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(evaluate, cells))

    decided = [row for row in rows if row["decided"]]
    contradictions = [
        row for row in decided
        if (row["status"] == "finite") != row["predicate"] and not row["near_critical"]
    ]
    mismatched = [
        row for row in decided
        if row["status"] == "divergent" and abs(row["exponent"] - row["expected_exponent"]) > 0.2
    ]
    summary = {
        "cells": len(rows),
        "decided": len(decided),
        "flagged": sum(row["near_critical"] for row in rows),
        "contradictions": len(contradictions),
        "exponent_mismatches": len(mismatched),
        "decided_fraction": len(decided) / len(rows) if rows else 1.0,
        "rows": rows,
    }
    logger.info(
        "cross-validation: %d cells, %d decided, %d flagged, %d contradictions",
        summary["cells"], summary["decided"], summary["flagged"], summary["contradictions"],
    )
    return summary
