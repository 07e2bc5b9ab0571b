"""Exact penalty objective P(y) = J(y) + lambda * ||g(y)||_1.

Two modes are supported.  In "equality" mode the dynamics defects are kept
as hard equality constraints (requires affine dynamics) and the penalty
term vanishes at every feasible point, which is the natural reading of a
zero penalty weight.  In "penalty" mode the defects are relaxed to
g(y) >= 0 and the weighted 1-norm enters the objective; the penalty is
exact once lambda dominates the infinity norm of the dynamics multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UnsupportedModelError
from .problem import OptimalControlProblem, eval_g

MODES = ("equality", "penalty")


@dataclass(frozen=True)
class PenaltyConfig:
    lam: float = 0.0
    mode: str = "equality"

    def __post_init__(self):
        if self.lam < 0:
            raise DimensionError(f"penalty weight must be nonnegative, got {self.lam}")
        if self.mode not in MODES:
            raise DimensionError(f"penalty mode must be one of {MODES}, got {self.mode!r}")


def check_mode(problem: OptimalControlProblem, config: PenaltyConfig):
    """Equality mode is only sound when every defect component is affine."""
    if config.mode == "equality" and not problem.dynamics.is_affine:
        raise UnsupportedModelError(
            "equality mode requires affine dynamics; use penalty mode for "
            "convex nonlinear dynamics"
        )


@dataclass(frozen=True)
class PenaltyCheck:
    """Outcome of the a-posteriori penalty-weight validation."""

    status: str  # "valid" | "invalid" | "not-applicable"
    required_lambda: float | None = None


def penalty_value(problem: OptimalControlProblem, config: PenaltyConfig, y) -> float:
    """P(y) = J(y) + lambda * sum_j |g_j(y)|."""
    value = problem.objective_value(y)
    if config.lam > 0.0:
        value += config.lam * float(np.sum(np.abs(eval_g(problem, y))))
    return value


def validate_penalty_weight(config: PenaltyConfig, multipliers) -> PenaltyCheck:
    """Check lambda >= max_j |mu_j| for the relaxed dynamics multipliers.

    Only meaningful in penalty mode; equality mode has no relaxation to
    validate and reports not-applicable.
    """
    if config.mode == "equality":
        return PenaltyCheck("not-applicable")
    multipliers = np.asarray(multipliers, dtype=float)
    required = float(np.max(np.abs(multipliers))) if multipliers.size else 0.0
    if config.lam >= required:
        return PenaltyCheck("valid")
    return PenaltyCheck("invalid", required_lambda=required)
