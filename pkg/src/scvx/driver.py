"""Outer successions loop: project, linearize, solve, repeat.

Each succession projects the current iterate onto every keep-out set,
replaces the sets by their supporting halfspaces, and minimizes the exact
penalty objective over the resulting convex region.  Iterates are accepted
only when they improve the penalty value, so the reported sequence is
monotone; the loop stops once an improvement falls below epsilon.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .errors import (
    DimensionError,
    InfeasibleAnchorError,
    InfeasibleScenarioError,
    SubsolverError,
)
from .linearize import (
    FeasibleRegion,
    _rows_to_linearize,
    build_feasible_region,
    check_anchor,
)
from .penalty import PenaltyCheck, PenaltyConfig, check_mode, penalty_value, validate_penalty_weight
from .problem import OptimalControlProblem, eval_g
from .projection import safe_gradient
from .subproblem import (
    ProgramBuilder,
    add_base_set_rows,
    add_equality_dynamics_rows,
    assemble,
    extract,
    polish_rows,
)

# residual quality required of the tightened fixed-point certificate solve
CERTIFICATE_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class ScvxConfig:
    epsilon: float = 1e-6
    max_successions: int = 50
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    subsolver_tol: float = 1e-9
    subsolver_max_iter: int = 100
    certificate_tol: float = 1e-12
    polish: bool = True
    compute_floor: bool = True
    compute_certificate: bool = True
    dump_dir: str | None = None

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise DimensionError("epsilon must be positive")
        if self.max_successions < 1:
            raise DimensionError("max_successions must be at least 1")


@dataclass(frozen=True)
class SuccessionRecord:
    index: int
    penalty_before: float
    penalty_after: float
    improvement: float
    accepted: bool
    halfspaces: int
    subsolver_status: str
    subsolver_iterations: int
    subsolver_gap: float


@dataclass
class SolveReport:
    status: str  # "converged" or "max-successions"
    z: np.ndarray
    successions: int
    iterates: list
    penalty_values: list
    objective_values: list
    records: list
    multipliers: np.ndarray | None = None
    penalty_check: PenaltyCheck | None = None
    relaxation_floor: float | None = None
    fixed_point_residual: float | None = None
    wall_time: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _solve_region(problem, config, region, tol=None, max_iter=None):
    """One subproblem solve over an explicit region; returns (y, mult, P, sol, art)."""
    artifacts = assemble(problem, config.penalty, region)
    sol = conic.solve(
        artifacts.program,
        tol=config.subsolver_tol if tol is None else tol,
        max_iter=config.subsolver_max_iter if max_iter is None else max_iter,
    )
    y, mult, value = extract(artifacts, sol, polish=config.polish)
    return y, mult, value, sol, artifacts


def scvx(problem: OptimalControlProblem, z0, config: ScvxConfig | None = None) -> SolveReport:
    """Run successions from a feasible anchor z0 until convergence.

    Raises InfeasibleAnchorError if z0 is not a valid anchor (use
    find_feasible_start), SubsolverError if a subproblem solve fails.
    """
    config = config or ScvxConfig()
    check_mode(problem, config.penalty)
    t0 = time.perf_counter()
    z = np.array(z0, dtype=float).ravel()
    if z.size != problem.dims.n_y:
        raise DimensionError(
            f"anchor has {z.size} coordinates, expected {problem.dims.n_y}"
        )
    check_anchor(problem, z, config.penalty.mode)
    P_z = penalty_value(problem, config.penalty, z)

    iterates = [z.copy()]
    penalties = [P_z]
    objectives = [problem.objective_value(z)]
    records = []
    multipliers = None

    convex_only = not _rows_to_linearize(problem, config.penalty.mode)

    relaxation_floor = None
    if config.compute_floor and not convex_only:
        floor_region = FeasibleRegion(problem.base_set, (), z.copy())
        relaxation_floor = _solve_region(problem, config, floor_region)[2]

    if config.dump_dir:
        os.makedirs(config.dump_dir, exist_ok=True)

    status = "max-successions"
    successions = 0
    for k in range(1, config.max_successions + 1):
        successions = k
        region = build_feasible_region(problem, z, config.penalty.mode)
        artifacts = assemble(problem, config.penalty, region)
        if config.dump_dir:
            conic.dump_program(
                artifacts.program,
                os.path.join(config.dump_dir, f"subproblem_{k:03d}.txt"),
            )
        sol = conic.solve(
            artifacts.program, tol=config.subsolver_tol, max_iter=config.subsolver_max_iter
        )
        y, multipliers, P_y = extract(artifacts, sol, polish=config.polish)
        improvement = P_z - P_y
        accepted = P_y < P_z
        records.append(
            SuccessionRecord(
                index=k,
                penalty_before=P_z,
                penalty_after=P_y,
                improvement=improvement,
                accepted=accepted,
                halfspaces=len(region.halfspaces),
                subsolver_status=sol.status,
                subsolver_iterations=sol.iterations,
                subsolver_gap=sol.gap,
            )
        )
        if accepted:
            z = y
            P_z = P_y
            iterates.append(z.copy())
            penalties.append(P_z)
            objectives.append(problem.objective_value(z))
        if convex_only or improvement < config.epsilon:
            status = "converged"
            break

    report = SolveReport(
        status=status,
        z=z,
        successions=successions,
        iterates=iterates,
        penalty_values=penalties,
        objective_values=objectives,
        records=records,
        multipliers=multipliers,
        relaxation_floor=relaxation_floor,
    )
    if multipliers is not None:
        report.penalty_check = validate_penalty_weight(config.penalty, multipliers)
    if status == "converged" and config.compute_certificate:
        report.fixed_point_residual = fixed_point_residual(problem, z, config)
    report.wall_time = time.perf_counter() - t0
    return report


def fixed_point_residual(
    problem: OptimalControlProblem, z_star, config: ScvxConfig | None = None
) -> float:
    """P(z*) minus the exact minimum of P over the region anchored at z*.

    A vanishing residual certifies the fixed point: z* already minimizes
    the penalty objective over its own projected-linearized region.  The
    certifying solve runs at a tightened tolerance and is rejected unless
    its residuals reach CERTIFICATE_RESIDUAL_TOL.
    """
    config = config or ScvxConfig()
    z_star = np.asarray(z_star, dtype=float).ravel()
    region = build_feasible_region(problem, z_star, config.penalty.mode)
    artifacts = assemble(problem, config.penalty, region)
    sol = conic.solve(
        artifacts.program,
        tol=config.certificate_tol,
        max_iter=max(200, config.subsolver_max_iter),
    )
    if sol.status in ("primal-infeasible", "dual-infeasible"):
        raise SubsolverError(
            f"certificate solve failed with status {sol.status!r}", status=sol.status
        )
    # the tightened tolerance is aspirational; what matters is that the
    # returned point is accurate enough to certify the fixed point
    pres, dres, gap = conic.residuals(artifacts.program, sol)
    quality = max(pres, dres, gap)
    if not quality <= CERTIFICATE_RESIDUAL_TOL:
        raise SubsolverError(
            f"certificate solve reached residual {quality:.3e}, "
            f"needed {CERTIFICATE_RESIDUAL_TOL:.0e}",
            status=sol.status,
        )
    y, _, phi = extract(artifacts, sol, polish=config.polish, require_optimal=False)
    # z_star is itself a member of its own region, so the region minimum
    # never exceeds P(z_star); taking the better of the two candidates
    # keeps the reported residual nonnegative under subsolver noise
    p_star = penalty_value(problem, config.penalty, z_star)
    return p_star - min(p_star, phi)


def feasibility_summary(problem: OptimalControlProblem, y) -> dict:
    """Feasibility metrics of a candidate trajectory, for reports and gates."""
    from .problem import Pin, eval_h

    y = np.asarray(y, dtype=float)
    defect = eval_g(problem, y)
    pin_error = 0.0
    base_min = np.inf
    for mem in problem.base_set.members:
        margin = mem.margin(y)
        if isinstance(mem, Pin):
            pin_error = max(pin_error, -margin)
        else:
            base_min = min(base_min, margin)
    h = eval_h(problem, y)
    return {
        "defect_max": float(np.max(np.abs(defect))) if defect.size else 0.0,
        "pin_error": float(pin_error),
        "base_margin_min": float(base_min) if np.isfinite(base_min) else None,
        "state_margin_min": float(np.min(h)) if h.size else None,
    }


def _violation(problem, rows, w, mode):
    """Total constraint violation at w: keep-out rows, base set, hard defects."""
    v = sum(max(0.0, -spec.value(w)) for _, spec in rows)
    v += float(np.sum(np.maximum(0.0, -problem.base_set.margins(w))))
    if mode == "equality":
        ng = problem.dims.n * (problem.dims.T - 1)
        if ng:
            v += float(np.sum(np.abs(eval_g(problem, w))))
    return float(v)


def find_feasible_start(
    problem: OptimalControlProblem,
    guess=None,
    config: ScvxConfig | None = None,
    trust_radius: float | None = None,
    max_rounds: int = 200,
    stall_limit: int = 20,
):
    """Search for a valid anchor by trust-region slack minimization.

    Each round minimizes the total slack needed to satisfy the directly
    linearized keep-out rows (global under-estimators, so zero slack
    implies true feasibility) subject to the base set, hard dynamics in
    equality mode, and a trust ball around the incumbent.  The trust
    radius grows on improvement and shrinks otherwise; stall_limit rounds
    without improvement raise InfeasibleScenarioError.
    """
    config = config or ScvxConfig()
    mode = config.penalty.mode
    check_mode(problem, config.penalty)
    dims = problem.dims
    lo, hi = problem.base_set.coordinate_bounds()
    if guess is None:
        w = 0.5 * (lo + hi)
    else:
        w = np.array(guess, dtype=float).ravel()
        if w.size != dims.n_y:
            raise DimensionError(
                f"guess has {w.size} coordinates, expected {dims.n_y}"
            )
    rho = trust_radius if trust_radius is not None else 2.0 * float(np.linalg.norm(hi - lo))
    rho_min = 1e-6

    rows = _rows_to_linearize(problem, mode)
    best = _violation(problem, rows, w, mode)
    stall = 0
    for _ in range(max_rounds):
        try:
            return check_anchor(problem, w, mode)
        except InfeasibleAnchorError:
            pass

        builder = ProgramBuilder()
        y0 = builder.add_cols(("y",), dims.n_y)
        s0 = builder.add_cols(("sigma",), len(rows))
        for k in range(len(rows)):
            builder.add_cost(s0 + k, 1.0)
            builder.add_ge(("sigma-pos", k), [(s0 + k, 1.0)], 0.0)
        if mode == "equality":
            add_equality_dynamics_rows(builder, problem, y0)
        add_base_set_rows(builder, problem.base_set, y0)
        for k, (j, spec) in enumerate(rows):
            grad_local, _ = safe_gradient(spec, w)
            pairs = [(y0 + int(i), float(g)) for i, g in zip(spec.indices, grad_local)]
            offset = sum(g * w[int(i)] for i, g in zip(spec.indices, grad_local))
            offset -= spec.value(w)
            pairs.append((s0 + k, 1.0))
            builder.add_ge(("relaxed", j), pairs, float(offset))
        trust = [([], rho)]
        for i in range(dims.n_y):
            trust.append(([(y0 + i, 1.0)], float(-w[i])))
        builder.add_soc(("trust",), trust)

        program, row_spans, _ = builder.build()
        sol = conic.solve(program, tol=config.subsolver_tol, max_iter=config.subsolver_max_iter)
        if sol.status == "primal-infeasible":
            # the trust ball does not reach the hard constraints yet
            rho *= 4.0
            stall += 1
            if stall >= stall_limit:
                raise InfeasibleScenarioError(
                    "feasibility search stalled: the hard constraint set "
                    "appears empty (inconsistent pins, dynamics, or bounds)"
                )
            continue
        if sol.status != "optimal":
            raise SubsolverError(
                f"feasibility subproblem returned status {sol.status!r}",
                status=sol.status,
            )
        w_new = sol.x[:dims.n_y].copy()
        eq_rows = [
            r
            for span in row_spans
            if span.label[0] in ("pin", "dyn-eq")
            for r in span.range()
        ]
        w_new = polish_rows(program, np.asarray(eq_rows, dtype=int), dims.n_y, w_new)
        v_new = _violation(problem, rows, w_new, mode)
        if v_new < best - 1e-12:
            w = w_new
            best = v_new
            rho *= 2.0
            stall = 0
        else:
            if v_new <= best:
                w = w_new
            rho = max(0.5 * rho, rho_min)
            stall += 1
        if stall >= stall_limit:
            raise InfeasibleScenarioError(
                f"feasibility search stalled with residual violation {best:.3e}; "
                "the scenario looks infeasible"
            )
    raise InfeasibleScenarioError(
        f"feasibility search exhausted {max_rounds} rounds "
        f"(residual violation {best:.3e})"
    )
