"""Numerical defaults for the capacity / Bergman-dimension toolkit.

Every tolerance, schedule and grid size used by the computational modules
is read from DEFAULTS so that reports can echo the resolved values.
"""

import os

DEFAULTS = {
    "support_points": 256,              # n, boundary samples per compact set
    "equilibrium_tol": 1e-8,            # simplex-gradient gap at stationarity
    "equilibrium_max_iter": 20000,      # conditional-gradient iteration budget
    "polarity_threshold": 1e-6,         # capacity below this reads as polar
    "polarity_schedule": (64, 128, 256),
    "polarity_stability": 0.05,         # relative change for "stabilized"
    "frostman_sample_distance": 0.1,    # exterior samples keep this distance
    "fekete_sweeps": 200,               # coordinate-ascent passes
    "fekete_candidates": 720,           # boundary candidates per coordinate
    "laurent_extra_orders": 12,         # tail truncation = start_order + 12
    "contour_radius": 50.0,             # |z| for contour Laurent extraction
    "contour_nodes": 512,               # trapezoid nodes on that contour
    "area_grid": 400,                   # n_grid for area Cauchy transforms
    "null_space_ratio": 1e-8,           # smallest/largest singular value
    "boost_coefficient_tol": 1e-10,     # |a_m| acceptance, relative to scale
    "boost_attempts": 3,                # failed anchor sets before fallback
    "anchor_radius_factor": 2.0,        # anchors on 2 * enclosing radius
    "riesz_inner_exponent": -6,         # first shell [2^-6, 2^-5]
    "riesz_outer_exponent": 20,         # last shell [2^20, 2^21]
    "riesz_cells": 64,                  # 64 x 64 polar cells per shell
    "riesz_decay_shells": 3,            # non-decreasing tail => infinite
    "witness_epsilon": 0.01,
    "witness_outer_factor": 40.0,       # R' = 40 R
    "witness_samples": 10000,
    "witness_bound_slack": 0.05,        # discretization slack on e^{-p}
    "witness_floor": 1e-6,              # certified tau must exceed this
    "shell_count": 48,                  # dyadic radial shells up to R_max
    "shell_r_max": 2.0**16,
    "shell_gauss_nodes": 24,            # Gauss-Legendre nodes per direction
    "critical_margin": 0.3,             # |e + 1| below this is near-critical
    "shell_decay_shells": 5,            # growing tail shells => divergent
}

DEFAULT_SOURCES = {
    "equilibrium": (
        "Disc and segment oracles (capacity r and L/4) converge inside the "
        "n = 256, tol = 1e-8 budget"
    ),
    "bergman": (
        "Shell grids resolve (1 + r^2)^-2 type decay; 2^16 radial range "
        "separates exponents 0.3 away from the critical value"
    ),
}

THREADS_ENV = "CAPSTONE_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer.") from None
    if value <= 0:
        raise ValueError(f"{THREADS_ENV} must be a positive integer.")
    return value
