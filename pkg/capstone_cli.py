"""Batch front end: JSON job config in, report out.

    python capstone_cli.py job.json [--format json|csv-tables|pdf] [--out path]

Exit codes: 0 success, 2 config error, 3 numerical non-convergence,
4 inconclusive classification.
"""

import argparse
import io
import json
import logging
import math
import sys
import time
from typing import Annotated, Literal

import numpy as np
import pandas as pd
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, model_validator

import bergman_p1
import bergman_p2
import capstone_report
import cauchy
from capstone_defaults import DEFAULTS
from convergence import NonConvergenceError
import geometry
import potential

__version__ = "0.3.0"

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_INCONCLUSIVE = 4


class ConfigError(ValueError):
    """A job config that cannot be run; the message names the field."""


def _set_spec(value: dict) -> dict:
    try:
        spec = geometry.spec_from_json(value)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed set spec: {exc!r}") from None
    geometry.validate(spec)
    return value


SetSpecJson = Annotated[dict, AfterValidator(_set_spec)]


class Job(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    seed: int = 0


class PolarityOptions(BaseModel):
    threshold: float = Field(DEFAULTS["polarity_threshold"], gt=0)
    schedule: list[Annotated[int, Field(gt=1)]] = Field(
        default_factory=lambda: list(DEFAULTS["polarity_schedule"]), min_length=1
    )
    # consecutive capacities within stability * estimate count as stabilized
    stability: float = Field(DEFAULTS["polarity_stability"], gt=0, lt=1)


class SetJob(Job):
    set_spec: SetSpecJson = Field(alias="set")
    n: int = Field(DEFAULTS["support_points"], gt=1)
    tol: float = Field(DEFAULTS["equilibrium_tol"], gt=0)

    def spec(self) -> geometry.CompactSetSpec:
        return geometry.spec_from_json(self.set_spec)


class SolveJob(SetJob):
    max_iter: int = Field(DEFAULTS["equilibrium_max_iter"], gt=0)


class CapacityJob(SolveJob):
    command: Literal["capacity"]


class EquilibriumJob(SolveJob):
    command: Literal["equilibrium"]


class PolarityJob(SetJob, PolarityOptions):
    command: Literal["polarity"]


class WiegerinckJob(Job):
    command: Literal["wiegerinck"]
    e1: SetSpecJson
    e2: SetSpecJson
    count: int = Field(3, ge=1)
    k: int
    n: int = Field(DEFAULTS["support_points"], gt=1)
    tol: float = Field(DEFAULTS["equilibrium_tol"], gt=0)
    anchor_radius_factor: float = Field(DEFAULTS["anchor_radius_factor"], gt=1)
    extra_orders: int = Field(DEFAULTS["laurent_extra_orders"], ge=0)
    boost_attempts: int = Field(DEFAULTS["boost_attempts"], ge=1)
    null_ratio: float = Field(DEFAULTS["null_space_ratio"], gt=0)
    coefficient_tol: float = Field(DEFAULTS["boost_coefficient_tol"], gt=0)
    area_grid: int = Field(DEFAULTS["area_grid"], gt=1)

    def settings(self) -> cauchy.BoostSettings:
        return cauchy.BoostSettings(
            self.anchor_radius_factor,
            self.extra_orders,
            self.boost_attempts,
            self.null_ratio,
            self.coefficient_tol,
            self.area_grid,
        )


class DimP1Job(Job, PolarityOptions):
    command: Literal["dim-p1"]
    k: int
    set_spec: SetSpecJson = Field(alias="set")
    tol: float = Field(DEFAULTS["equilibrium_tol"], gt=0)
    # use the BLY Riesz-mass route with psi = -ln phi_k instead of the section count
    riesz: bool = False
    riesz_inner_exponent: int = DEFAULTS["riesz_inner_exponent"]
    riesz_outer_exponent: int = DEFAULTS["riesz_outer_exponent"]
    riesz_cells: int = Field(DEFAULTS["riesz_cells"], ge=4)
    riesz_decay_shells: int = Field(DEFAULTS["riesz_decay_shells"], ge=2)

    @model_validator(mode="after")
    def _shell_range(self):
        if self.riesz_outer_exponent <= self.riesz_inner_exponent:
            raise ValueError("riesz_outer_exponent must exceed riesz_inner_exponent")
        return self

    def grid(self) -> bergman_p1.RieszGrid:
        return bergman_p1.RieszGrid(
            self.riesz_inner_exponent,
            self.riesz_outer_exponent,
            self.riesz_cells,
            self.riesz_decay_shells,
        )


class DimP2Job(Job):
    command: Literal["dim-p2"]
    k: int
    verdicts: bool = True
    cross_validate: bool = False
    shells: int = Field(DEFAULTS["shell_count"], ge=1)
    r_max: float = Field(DEFAULTS["shell_r_max"], gt=1)
    nodes: int = Field(DEFAULTS["shell_gauss_nodes"], ge=2)
    critical_margin: float = Field(DEFAULTS["critical_margin"], gt=0)
    decay_shells: int = Field(DEFAULTS["shell_decay_shells"], ge=2)

    def budget(self) -> bergman_p2.ShellBudget:
        return bergman_p2.ShellBudget(
            self.shells, self.r_max, self.nodes, self.critical_margin, self.decay_shells
        )


class WitnessJob(SetJob, PolarityOptions):
    command: Literal["witness"]
    eps: float = Field(DEFAULTS["witness_epsilon"], ge=0)
    samples: int = Field(DEFAULTS["witness_samples"], gt=0)
    outer_factor: float = Field(DEFAULTS["witness_outer_factor"], gt=1)
    bound_slack: float = Field(DEFAULTS["witness_bound_slack"], ge=0)
    # half-width of the excluded annulus around |z| = 2R, in units of R
    band: float = Field(0.01, ge=0)
    floor: float = Field(DEFAULTS["witness_floor"], gt=0)

    def parameters(self) -> bergman_p1.WitnessParameters:
        return bergman_p1.WitnessParameters(
            self.eps,
            self.n,
            self.seed,
            self.outer_factor,
            self.bound_slack,
            self.tol,
            self.threshold,
            tuple(self.schedule),
            self.stability,
        )


JOBS = {
    "capacity": CapacityJob,
    "equilibrium": EquilibriumJob,
    "polarity": PolarityJob,
    "wiegerinck": WiegerinckJob,
    "dim-p1": DimP1Job,
    "dim-p2": DimP2Job,
    "witness": WitnessJob,
}


def parse_config(text: bytes | str) -> Job:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    command = data.get("command")
    if command not in JOBS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        return JOBS[command].model_validate(data)
    except ValidationError as exc:
        messages = []
        for error in exc.errors():
            field = ".".join(str(part) for part in error["loc"]) or "config"
            messages.append(f"{field}: {error['msg']}")
        raise ConfigError("\n".join(messages)) from None


# -- dispatch -------------------------------------------------------------------


def _capacity(job: CapacityJob):
    spec = job.spec()
    if geometry.is_finite_point_set(spec):
        return {"capacity": 0.0, "polar": True, "tol": job.tol}, {}
    measure, details = potential.equilibrium_with_details(
        spec, job.n, job.tol, job.seed, job.max_iter
    )
    results = {
        "capacity": math.exp(details["energy"]),
        "energy": details["energy"],
        "tol": job.tol,
        "error_estimate": details["gap"],
    }
    return results, {"iterations": details["iterations"], "gap": details["gap"]}


def _equilibrium(job: EquilibriumJob):
    measure, details = potential.equilibrium_with_details(
        job.spec(), job.n, job.tol, job.seed, job.max_iter
    )
    report =potential.frostman_check(measure, job.spec(), seed=job.seed)
    results = {
        "measure": measure.to_json(),
        "cells": measure.cells.tolist(),
        "energy": details["energy"],
        "tol": job.tol,
        "frostman": report,
    }
    return results, {"iterations": details["iterations"], "gap": details["gap"]}


def _polarity(job: PolarityJob):
    verdict = potential.classify_polarity(
        job.spec(), job.threshold, tuple(job.schedule), job.tol, job.seed, job.stability
    )
    return dict(verdict.to_json(), tol=job.tol, stability=job.stability), {}


def _wiegerinck(job: WiegerinckJob):
    terms = cauchy.wiegerinck_sequence(
        geometry.spec_from_json(job.e1),
        geometry.spec_from_json(job.e2),
        job.count,
        job.k,
        job.seed,
        job.n,
        job.tol,
        job.settings(),
    )
    return {"terms": [term.to_json() for term in terms]}, {}


def _dim_p1(job: DimP1Job):
    psi = bergman_p1.log_weight_field(job.k) if job.riesz else None
    report = bergman_p1.dimension_report(
        job.k,
        geometry.spec_from_json(job.set_spec),
        psi,
        job.seed,
        job.threshold,
        tuple(job.schedule),
        job.tol,
        job.grid(),
        job.stability,
    )
    return report.to_json(), {}


def _dim_p2(job: DimP2Job):
    if job.verdicts:
        results = bergman_p2.omega_k_report(job.k, job.budget())
    else:
        basis = bergman_p2.omega_k_monomial_basis(job.k)
        results = {
            "k": job.k,
            "omega": bergman_p2.omega_k_spec(job.k).label,
            "basis": [m.to_json() for m in basis],
            "dimension": len(basis),
            "global_dimension": bergman_p2.dim_global_sections_p2(job.k),
        }
    if job.cross_validate:
        results["cross_validation"] = bergman_p2.cross_validate(budget=job.budget())
    return results, {}


def _witness(job: WitnessJob):
    psi = bergman_p1.witness_psi_star(job.spec(), params=job.parameters())
    check = bergman_p1.verify_witness_bounds(
        psi, psi.recipe["R"], job.samples, job.seed, job.band, job.floor
    )
    results = {
        "eps": job.eps,
        "R": psi.recipe["R"],
        "R_outer": psi.recipe["R_outer"],
        "energy": psi.recipe["energy"],
        "bound": psi.bound,
        "exclusion_radius": psi.exclusion_radius,
        "verification": check,
    }
    return results, {}


RUNNERS = {
    "capacity": _capacity,
    "equilibrium": _equilibrium,
    "polarity": _polarity,
    "wiegerinck": _wiegerinck,
    "dim-p1": _dim_p1,
    "dim-p2": _dim_p2,
    "witness": _witness,
}


def run(config: Job) -> dict:
    command = config.command
    started = time.perf_counter()
    try:
        results, diagnostics = RUNNERS[command](config)
    except NonConvergenceError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{command}: {exc}") from exc
    diagnostics = dict(diagnostics, seconds=round(time.perf_counter() - started, 3))
    warnings = []
    if _is_inconclusive(results):
        warnings.append("polarity classification is inconclusive; answers are conditional")
    logger.info("%s finished in %.2fs", command, diagnostics["seconds"])
    return {
        "version": __version__,
        "config": config.model_dump(by_alias=True),
        "results": results,
        "diagnostics": diagnostics,
        "warnings": warnings,
    }


def _is_inconclusive(results: dict) -> bool:
    if results.get("classification") == "inconclusive":
        return True
    return results.get("method") == "inconclusive"


# -- output -----------------------------------------------------------------------


def _to_builtin(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _tables(report: dict) -> dict:
    command = report["config"]["command"]
    results = report["results"]
    if command == "equilibrium":
        support = np.array(results["measure"]["support"], dtype=float)
        cells = np.array(results["cells"])
        return {
            "support": pd.DataFrame(
                {
                    "x": support[:, 0],
                    "y": support[:, 1],
                    "weight": results["measure"]["weights"],
                    "cell": cells,
                    # arc parameter at each cell midpoint
                    "s": np.cumsum(cells) - 0.5 * cells,
                }
            )
        }
    if command == "polarity":
        schedule = report["config"]["schedule"][: len(results["sequence"])]
        return {"capacity_sequence": pd.DataFrame({"n": schedule, "capacity": results["sequence"]})}
    if command == "wiegerinck":
        rows = [
            {
                "term": i,
                "order": term["order"],
                "kind": term["function"]["kind"],
                "status": term["verdict"]["status"],
                "value": term["verdict"].get("value", math.nan),
            }
            for i, term in enumerate(results["terms"])
        ]
        return {"terms": pd.DataFrame(rows)}
    if command == "dim-p2":
        tables = {"basis": pd.DataFrame(results["basis"], columns=["p", "q"])}
        if "cross_validation" in results:
            tables["cross_validation"] = pd.DataFrame(results["cross_validation"]["rows"])
        return tables
    flat = pd.json_normalize(results, sep=".")
    return {"results": flat}


def emit(report: dict, fmt: str = "json") -> bytes:
    if fmt == "json":
        return (json.dumps(report, indent=2, sort_keys=True, default=_to_builtin) + "\n").encode()
    if fmt == "csv-tables":
        buffer = io.StringIO()
        for name, frame in _tables(report).items():
            buffer.write(f"# table: {name}\n")
            frame.to_csv(buffer, index=False)
            buffer.write("\n")
        return buffer.getvalue().encode()
    if fmt == "pdf":
        return capstone_report.create_pdf(report)
    raise ValueError(f"unknown format {fmt!r}")


def exit_code_for(report: dict) -> int:
    return EXIT_INCONCLUSIVE if report["warnings"] else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", help="path to the JSON job config")
    parser.add_argument("--format", choices=("json", "csv-tables", "pdf"), default="json")
    parser.add_argument("--out", help="output path (default: stdout)")
    parser.add_argument("--log-level", default="WARNING")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=args.log_level.upper(), format="%(asctime)s %(name)s %(levelname)s: %(message)s"
    )
    try:
        with open(args.config, "rb") as handle:
            config = parse_config(handle.read())
        report = run(config)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(
            f"non-convergence after {exc.iterations} iterations (residual {exc.residual:.3g}): {exc}",
            file=sys.stderr,
        )
        return EXIT_NONCONVERGENCE

    payload = emit(report, args.format)
    if args.out:
        with open(args.out, "wb") as handle:
            handle.write(payload)
    else:
        sys.stdout.buffer.write(payload)
    return exit_code_for(report)


if __name__ == "__main__":
    raise SystemExit(main())
