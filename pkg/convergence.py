"""Verdicts for improper integrals evaluated over radial shells."""

from dataclasses import dataclass, field
import math


class NonConvergenceError(RuntimeError):
    """A numerical procedure ran out of budget before meeting its tolerance."""

    def __init__(self, message: str, iterations: int = 0, residual: float = math.nan):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class ConvergenceVerdict:
    status: str  # "finite", "divergent" or "undecided"
    value: float = math.nan
    error: float = math.nan
    exponent: float = math.nan
    near_critical: bool = False
    shell_masses: tuple[float, ...] = field(default=(), repr=False)
    detail: str = ""

    def __post_init__(self):
        if self.status not in {"finite", "divergent", "undecided"}:
            raise ValueError(f"unknown verdict status {self.status!r}")
        if self.status == "finite" and not math.isfinite(self.value):
            raise ValueError("finite verdicts need a finite value")

    @property
    def decided(self) -> bool:
        return self.status != "undecided"

    def to_json(self) -> dict:
        out = {"status": self.status, "near_critical": self.near_critical}
        if self.status == "finite":
            out.update(value=self.value, error=self.error)
        if math.isfinite(self.exponent):
            out["exponent"] = self.exponent
        if self.detail:
            out["detail"] = self.detail
        out["shell_masses"] = list(self.shell_masses)
        return out


def finite(value: float, error: float, **kwargs) -> ConvergenceVerdict:
    return ConvergenceVerdict("finite", value=value, error=error, **kwargs)


def divergent(exponent: float, **kwargs) -> ConvergenceVerdict:
    return ConvergenceVerdict("divergent", exponent=exponent, **kwargs)


def nondecreasing(values, count: int, rel_tol: float = 1e-6) -> bool:
    """True when the last `count` values never drop by more than rel_tol."""
    tail = list(values)[-count:]
    if len(tail) < count:
        return False
    return all(b >= a * (1.0 - rel_tol) for a, b in zip(tail, tail[1:]))
