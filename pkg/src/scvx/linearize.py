"""Supporting-halfspace construction of the convexified region F_z.

For each constraint component q_j(y) >= 0 that must be convexified, the
current iterate z is projected onto the keep-out set {q_j <= 0} and q_j is
linearized at the projection point, producing the supporting halfspace

    l_j(y, z) = grad q_j(zbar_j) . (y - zbar_j) >= 0.

F_z is the base set Y intersected with these halfspaces.  It contains z
and is contained in the true feasible set, which is what makes the outer
loop recursively feasible.  Affine dynamics handled as hard equalities are
not linearized here; they enter the subproblem as zero-cone rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGradientError, InfeasibleAnchorError, ScvxError
from .problem import (
    BaseSet,
    ConstraintSpec,
    OptimalControlProblem,
    eval_q,
    sample_base_set,
)
from .projection import project

# anchors are accepted as feasible down to this constraint slack; iterates
# come from a tolerance-limited conic solver
ANCHOR_FEASIBILITY_TOL = 1e-8
GRADIENT_NORM_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Halfspace:
    """normal . y >= offset, anchored at a projection point."""

    normal: np.ndarray
    offset: float
    constraint_index: int

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    def slack(self, y) -> float:
        return float(self.normal @ y - self.offset)


@dataclass(frozen=True, eq=False)
class FeasibleRegion:
    base: BaseSet
    halfspaces: tuple
    anchor: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))
        anchor = np.asarray(self.anchor, dtype=float)
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)


def _rows_to_linearize(problem: OptimalControlProblem, mode: str):
    """Constraint rows that go through project-and-linearize.

    equality mode: state constraints only (affine defects become zero-cone
    rows downstream); penalty mode: relaxed dynamics rows too.
    """
    if mode not in ("equality", "penalty"):
        raise ScvxError(f"unknown linearization mode {mode!r}")
    rows = []
    for j, spec in enumerate(problem.constraints):
        if spec.kind == "dynamics-defect" and mode == "equality":
            continue
        rows.append((j, spec))
    return rows


def check_anchor(problem: OptimalControlProblem, z, mode: str):
    """Raise InfeasibleAnchorError unless z is feasible for the mode."""
    z = np.asarray(z, dtype=float)
    if not problem.base_set.contains(z, tol=ANCHOR_FEASIBILITY_TOL):
        worst = float(np.min(problem.base_set.margins(z)))
        raise InfeasibleAnchorError(
            f"anchor violates the base set by {-worst:.3e}; "
            "run find_feasible_start first"
        )
    q = eval_q(problem, z)
    if mode == "equality":
        # defects are enforced as equalities; tolerate solver-level drift
        ng = problem.dims.n * (problem.dims.T - 1)
        defect = float(np.max(np.abs(q[:ng]))) if ng else 0.0
        if defect > 1e-7:
            raise InfeasibleAnchorError(
                f"anchor dynamics defect {defect:.3e} exceeds 1e-7; "
                "run find_feasible_start first"
            )
        worst = float(np.min(q[ng:])) if q.size > ng else 0.0
    else:
        worst = float(np.min(q)) if q.size else 0.0
    if worst < -ANCHOR_FEASIBILITY_TOL:
        raise InfeasibleAnchorError(
            f"anchor violates q >= 0 by {-worst:.3e}; run find_feasible_start first"
        )
    return z


def build_feasible_region(
    problem: OptimalControlProblem, z, mode: str = "equality"
) -> FeasibleRegion:
    """Project z onto every keep-out set and emit the supporting halfspaces."""
    z = check_anchor(problem, z, mode)
    n_y = problem.dims.n_y
    halfspaces = []
    for j, spec in _rows_to_linearize(problem, mode):
        result = project(spec, z)
        zbar = result.point
        normal = spec.grad_row(zbar, n_y)
        norm = float(np.linalg.norm(normal))
        if norm < GRADIENT_NORM_FLOOR:
            raise DegenerateGradientError(
                f"constraint ({spec.kind}, step {spec.step}, component "
                f"{spec.component}) has gradient norm {norm:.3e} at its "
                "projection point; supporting halfspace undefined"
            )
        hs = Halfspace(normal, float(normal @ zbar), j)
        if hs.slack(z) < -1e-9:
            raise ScvxError(
                f"anchor lost containment on constraint index {j} "
                f"(slack {hs.slack(z):.3e}); this indicates a projector defect"
            )
        halfspaces.append(hs)
    return FeasibleRegion(problem.base_set, tuple(halfspaces), z)


def linearize_direct(constraint: ConstraintSpec, z, index: int = -1) -> Halfspace:
    """Linearize q_j at z itself (no projection): a.y >= a.z - q_j(z).

    Because q_j is convex this is a global under-estimator: any y
    satisfying the row satisfies q_j(y) >= 0.  Anchoring at z instead of at
    the projection point generally yields a smaller region than F_z; the
    feasibility initializer uses this form with slack variables.
    """
    z = np.asarray(z, dtype=float)
    normal = np.zeros(z.size)
    normal[constraint.indices] = constraint.grad_local(z)
    offset = float(normal @ z - constraint.value(z))
    return Halfspace(normal, offset, index)


@dataclass(frozen=True)
class InvarianceReport:
    samples: int
    violations: int
    worst_margin: float
    anchor_slack: float
    checked_rows: int


def verify_invariance(
    problem: OptimalControlProblem,
    region: FeasibleRegion,
    n_samples: int,
    seed: int = 0,
) -> InvarianceReport:
    """Sampled check of anchor membership and F_z containment.

    Samples points of F_z (base set filtered by the halfspaces) and
    evaluates the linearized constraint rows at each: every sample must
    satisfy q_j >= -1e-8.  Rows handled as hard equalities are not part of
    the halfspace description and are excluded (their feasibility is
    enforced exactly by the subproblem, not by this containment argument).
    Failures are reported, not raised.
    """
    anchor_slack = (
        min(hs.slack(region.anchor) for hs in region.halfspaces)
        if region.halfspaces
        else 0.0
    )
    rng = np.random.default_rng(seed)
    triples = [
        (np.nonzero(hs.normal)[0], hs.normal[np.nonzero(hs.normal)[0]], hs.offset)
        for hs in region.halfspaces
    ]
    Y = sample_base_set(region.base, rng, n_samples, halfspaces=triples)
    worst = np.inf
    violations = 0
    checked = 0
    for hs in region.halfspaces:
        spec = problem.constraints[hs.constraint_index]
        vals = spec.value_batch(Y)
        worst = min(worst, float(np.min(vals))) if vals.size else worst
        violations += int(np.sum(vals < -1e-8))
        checked += 1
    if not region.halfspaces:
        worst = 0.0
    return InvarianceReport(
        samples=n_samples,
        violations=violations,
        worst_margin=float(worst),
        anchor_slack=float(anchor_slack),
        checked_rows=checked,
    )


def lipschitz_probe(
    problem: OptimalControlProblem, z1, z2, y, mode: str = "equality"
) -> float:
    """Empirical ratio ||l(y, z1) - l(y, z2)|| / ||z1 - z2||.

    Property tests probe this for boundedness; no Lipschitz constant is
    stored or asserted by the library itself.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    dz = float(np.linalg.norm(z1 - z2))
    if dz <= 0.0:
        raise ScvxError("lipschitz_probe needs two distinct anchor points")
    r1 = build_feasible_region(problem, z1, mode)
    r2 = build_feasible_region(problem, z2, mode)
    y = np.asarray(y, dtype=float)
    l1 = np.array([hs.slack(y) for hs in r1.halfspaces])
    l2 = np.array([hs.slack(y) for hs in r2.halfspaces])
    return float(np.linalg.norm(l1 - l2) / dz)
