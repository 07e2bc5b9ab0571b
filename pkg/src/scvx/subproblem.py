"""Transcription of the convex subproblem min P(y) over F_z to a cone program.

Column layout: the decision vector y first, then objective epigraph
auxiliaries, then (penalty mode) one epigraph auxiliary per dynamics
defect.  Row layout: zero-cone rows (pins, equality-mode dynamics), then
nonnegative rows (supporting halfspaces, box bounds, affine epigraphs),
then second-order cone blocks (balls, thrust cones, norm epigraphs).
Assembly is deterministic: identical inputs produce identical programs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import conic
from .errors import SubsolverError, UnsupportedModelError
from .linearize import FeasibleRegion
from .penalty import PenaltyConfig, check_mode, penalty_value
from .problem import (
    AffineFn,
    Ball,
    Box,
    Cone,
    ConstantObjective,
    ControlNormSum,
    NormFn,
    OptimalControlProblem,
    Pin,
    QuadFn,
    QuadraticObjective,
)


@dataclass(frozen=True)
class Span:
    """A labeled, contiguous block of program rows or columns."""

    label: tuple
    start: int
    length: int

    @property
    def stop(self):
        return self.start + self.length

    def range(self):
        return range(self.start, self.stop)


class ProgramBuilder:
    """Incremental cone-program builder with labeled rows and columns.

    Expressions are (pairs, const) with pairs = [(column, coefficient)...];
    the slack of an emitted cone row equals const + sum(coeff * x[col]).
    Rows are grouped zero -> nonneg -> soc on build, and the returned maps
    record where every labeled block landed.
    """

    def __init__(self):
        self.n_cols = 0
        self.cols = []  # Span
        self._cost = []  # (col, coeff)
        self._zero = []  # (label, pairs, rhs): sum coeff*x = rhs
        self._nonneg = []  # (label, pairs, rhs): sum coeff*x >= rhs
        self._soc = []  # (label, [exprs])

    def add_cols(self, label, count) -> int:
        start = self.n_cols
        self.cols.append(Span(tuple(label), start, count))
        self.n_cols += count
        return start

    def add_cost(self, col, coeff):
        self._cost.append((int(col), float(coeff)))

    def add_eq(self, label, pairs, rhs):
        self._zero.append((tuple(label), list(pairs), float(rhs)))

    def add_ge(self, label, pairs, rhs):
        self._nonneg.append((tuple(label), list(pairs), float(rhs)))

    def add_soc(self, label, exprs):
        self._soc.append((tuple(label), [(list(p), float(k)) for p, k in exprs]))

    def build(self):
        rows_i, cols_j, vals = [], [], []
        bvals = []
        row_spans = []
        cones = []

        def emit(pairs, const, negate):
            r = len(bvals)
            sign = -1.0 if negate else 1.0
            for col, coeff in pairs:
                if coeff != 0.0:
                    rows_i.append(r)
                    cols_j.append(int(col))
                    vals.append(sign * float(coeff))
            bvals.append(const)

        for label, pairs, rhs in self._zero:
            row_spans.append(Span(label, len(bvals), 1))
            emit(pairs, rhs, negate=False)  # A x = b
        n_zero = len(bvals)
        for label, pairs, rhs in self._nonneg:
            row_spans.append(Span(label, len(bvals), 1))
            emit(pairs, -rhs, negate=True)  # s = sum coeff*x - rhs >= 0
        n_nonneg = len(bvals) - n_zero
        for label, exprs in self._soc:
            row_spans.append(Span(label, len(bvals), len(exprs)))
            for pairs, const in exprs:
                emit(pairs, const, negate=True)  # s_i = const + sum coeff*x
            cones.append(conic.Cone("soc", len(exprs)))

        cone_list = []
        if n_zero:
            cone_list.append(conic.Cone("zero", n_zero))
        if n_nonneg:
            cone_list.append(conic.Cone("nonneg", n_nonneg))
        cone_list.extend(cones)

        c = np.zeros(self.n_cols)
        for col, coeff in self._cost:
            c[col] += coeff
        A = sp.coo_matrix(
            (vals, (rows_i, cols_j)), shape=(len(bvals), self.n_cols)
        ).tocsc()
        program = conic.ConicProgram(c, A, np.asarray(bvals), tuple(cone_list))
        return program, tuple(row_spans), tuple(self.cols)


def _coord_pairs(indices, coeffs):
    return [(int(i), float(a)) for i, a in zip(indices, coeffs)]


def add_base_set_rows(builder: ProgramBuilder, base, y0: int = 0):
    """Emit cone rows for every base-set member (shared with the initializer)."""
    for k, mem in enumerate(base.members):
        if isinstance(mem, Pin):
            for i, v in zip(mem.indices, mem.values):
                builder.add_eq(("pin", k, int(i)), [(y0 + int(i), 1.0)], float(v))
        elif isinstance(mem, Box):
            for i, lo, hi in zip(mem.indices, mem.lower, mem.upper):
                if np.isfinite(lo):
                    builder.add_ge(("box-lo", k, int(i)), [(y0 + int(i), 1.0)], float(lo))
                if np.isfinite(hi):
                    builder.add_ge(("box-hi", k, int(i)), [(y0 + int(i), -1.0)], float(-hi))
        elif isinstance(mem, Ball):
            exprs = [([], float(mem.radius))]
            for i, cc in zip(mem.indices, mem.center):
                exprs.append(([(y0 + int(i), 1.0)], float(-cc)))
            builder.add_soc(("ball", k), exprs)
        elif isinstance(mem, Cone):
            head = _coord_pairs(y0 + mem.indices, mem.axis / mem.cos_angle)
            exprs = [(head, 0.0)]
            for i in mem.indices:
                exprs.append(([(y0 + int(i), 1.0)], 0.0))
            builder.add_soc(("cone", k), exprs)
        else:
            raise UnsupportedModelError(f"unknown base-set member {type(mem).__name__}")


def add_halfspace_rows(builder: ProgramBuilder, halfspaces, y0: int = 0):
    for hs in halfspaces:
        nz = np.nonzero(hs.normal)[0]
        builder.add_ge(
            ("halfspace", int(hs.constraint_index)),
            _coord_pairs(y0 + nz, hs.normal[nz]),
            float(hs.offset),
        )


def add_equality_dynamics_rows(builder: ProgramBuilder, problem, y0: int = 0):
    """Zero-cone rows A x_i + B u_i - x_{i+1} = -d for every step."""
    dims = problem.dims
    dyn = problem.dynamics
    for i in range(dims.T - 1):
        xs = dims.state_slice(i)
        us = dims.control_slice(i)
        ns = dims.state_slice(i + 1)
        for j in range(dims.n):
            pairs = _coord_pairs(y0 + np.arange(xs.start, xs.stop), dyn.A[j])
            pairs += _coord_pairs(y0 + np.arange(us.start, us.stop), dyn.B[j])
            pairs.append((y0 + ns.start + j, -1.0))
            builder.add_eq(("dyn-eq", i, j), pairs, float(-dyn.d[j]))


def _epigraph_exprs(fn, t_col, w_cols):
    """Cone rows for t >= fn(w); returns ("ge", pairs, rhs) or ("soc", exprs)."""
    w_cols = np.asarray(w_cols, dtype=int)
    if isinstance(fn, AffineFn):
        pairs = [(int(t_col), 1.0)] + _coord_pairs(w_cols, -fn.a)
        return ("ge", pairs, float(fn.beta))
    if isinstance(fn, NormFn):
        head = [(int(t_col), 1.0)] + _coord_pairs(w_cols, -fn.a)
        exprs = [(head, float(-fn.beta))]
        for i in range(fn.H.shape[0]):
            exprs.append((_coord_pairs(w_cols, fn.H[i]), float(-fn.p[i])))
        return ("soc", exprs)
    if isinstance(fn, QuadFn):
        r_pairs = [(int(t_col), 1.0)] + _coord_pairs(w_cols, -fn.a)
        exprs = [
            (list(r_pairs), float(1.0 - fn.beta)),  # r + 1
            (list(r_pairs), float(-1.0 - fn.beta)),  # r - 1
        ]
        root2 = np.sqrt(2.0)
        for i in range(fn.L.shape[0]):
            exprs.append((_coord_pairs(w_cols, root2 * fn.L[i]), 0.0))
        return ("soc", exprs)
    raise UnsupportedModelError(
        f"no cone-representable epigraph for {type(fn).__name__}"
    )


@dataclass(frozen=True, eq=False)
class SubproblemArtifacts:
    program: conic.ConicProgram
    variable_map: tuple  # Spans over columns
    row_map: tuple  # Spans over rows
    constant_offset: float  # objective constant not visible to the solver
    problem: OptimalControlProblem
    penalty: PenaltyConfig

    def rows(self, *prefix):
        """All program row indices whose label starts with the prefix."""
        out = []
        for span in self.row_map:
            if span.label[: len(prefix)] == prefix:
                out.extend(span.range())
        return np.asarray(out, dtype=int)

    def columns(self, *prefix):
        out = []
        for span in self.variable_map:
            if span.label[: len(prefix)] == prefix:
                out.extend(span.range())
        return np.asarray(out, dtype=int)


def assemble(
    problem: OptimalControlProblem,
    penalty_config: PenaltyConfig,
    region: FeasibleRegion,
) -> SubproblemArtifacts:
    """Build the cone program encoding min P(y) over the given region."""
    check_mode(problem, penalty_config)
    dims = problem.dims
    builder = ProgramBuilder()
    y0 = builder.add_cols(("y",), dims.n_y)

    constant = 0.0
    obj = problem.objective
    if isinstance(obj, ControlNormSum):
        t0 = builder.add_cols(("obj-t",), dims.T - 1)
        for i in range(dims.T - 1):
            builder.add_cost(t0 + i, obj.weight)
            us = dims.control_slice(i)
            exprs = [([(t0 + i, 1.0)], 0.0)]
            for col in range(us.start, us.stop):
                exprs.append(([(y0 + col, 1.0)], 0.0))
            builder.add_soc(("obj-epi", i), exprs)
        if obj.fixed_terms:
            f0 = builder.add_cols(("obj-t-fixed",), len(obj.fixed_terms))
            for k, vec in enumerate(obj.fixed_terms):
                builder.add_cost(f0 + k, obj.weight)
                exprs = [([(f0 + k, 1.0)], 0.0)]
                for v in vec:
                    exprs.append(([], float(v)))
                builder.add_soc(("obj-epi-fixed", k), exprs)
    elif isinstance(obj, QuadraticObjective):
        t0 = builder.add_cols(("obj-t",), 1)
        builder.add_cost(t0, 1.0)
        kind, *payload = _epigraph_exprs(
            QuadFn(obj.L, obj.a, obj.beta), t0, y0 + np.arange(dims.n_y)
        )
        if kind == "soc":
            builder.add_soc(("obj-epi", 0), payload[0])
        else:
            builder.add_ge(("obj-epi", 0), payload[0], payload[1])
    elif isinstance(obj, ConstantObjective):
        constant += float(obj.value_const)
    else:
        raise UnsupportedModelError(f"unknown objective {type(obj).__name__}")

    if penalty_config.mode == "penalty":
        dyn_rows = [
            (j, spec)
            for j, spec in enumerate(problem.constraints)
            if spec.kind == "dynamics-defect"
        ]
        if dyn_rows and penalty_config.lam > 0.0:
            p0 = builder.add_cols(("pen-t",), len(dyn_rows))
            for k, (j, spec) in enumerate(dyn_rows):
                builder.add_cost(p0 + k, penalty_config.lam)
                kind, *payload = _epigraph_exprs(spec.fn, p0 + k, y0 + spec.indices)
                if kind == "soc":
                    builder.add_soc(("pen-epi", j), payload[0])
                else:
                    builder.add_ge(("pen-epi", j), payload[0], payload[1])

    # feasible region: hard dynamics (equality mode), base set, halfspaces
    if penalty_config.mode == "equality":
        add_equality_dynamics_rows(builder, problem, y0)
    add_base_set_rows(builder, problem.base_set, y0)
    add_halfspace_rows(builder, region.halfspaces, y0)

    program, row_map, col_map = builder.build()
    return SubproblemArtifacts(
        program=program,
        variable_map=col_map,
        row_map=row_map,
        constant_offset=constant,
        problem=problem,
        penalty=penalty_config,
    )


def polish_rows(program: conic.ConicProgram, rows: np.ndarray, n_y: int, y: np.ndarray):
    """Minimum-norm correction of y onto the given equality rows of A x = b."""
    rows = np.asarray(rows, dtype=int)
    if rows.size == 0:
        return y
    E = program.A[rows.tolist(), :n_y].toarray()
    d = program.b[rows]
    r = d - E @ y
    try:
        cho = scipy.linalg.cho_factor(E @ E.T)
        return y + E.T @ scipy.linalg.cho_solve(cho, r)
    except scipy.linalg.LinAlgError:
        return y + E.T @ np.linalg.lstsq(E @ E.T, r, rcond=None)[0]


def polish_equalities(artifacts: SubproblemArtifacts, y: np.ndarray) -> np.ndarray:
    """Project y exactly onto the zero-cone rows (pins and dynamics).

    One least-squares correction removes the interior-point method's
    equality drift without touching anything else by more than that drift.
    """
    rows = np.concatenate([artifacts.rows("pin"), artifacts.rows("dyn-eq")])
    return polish_rows(artifacts.program, rows, artifacts.problem.dims.n_y, y)


def extract(
    artifacts: SubproblemArtifacts,
    solution: conic.ConicSolution,
    polish: bool = True,
    require_optimal: bool = True,
):
    """Pull (z_next, dynamics multipliers, true objective value) out of a solve.

    The objective is recomputed from the raw decision vector rather than
    trusting the solver's epigraph auxiliaries.  Callers that have already
    validated the solution quality themselves may pass require_optimal=False
    to extract from a best-effort status.
    """
    if require_optimal and solution.status != "optimal":
        raise SubsolverError(
            f"subproblem solve returned status {solution.status!r}",
            status=solution.status,
            diagnostics={
                "gap": solution.gap,
                "primal_res": solution.primal_res,
                "dual_res": solution.dual_res,
                "iterations": solution.iterations,
            },
        )
    n_y = artifacts.problem.dims.n_y
    y = solution.x[:n_y].copy()
    if polish:
        y = polish_equalities(artifacts, y)
    if artifacts.penalty.mode == "equality":
        dyn_rows = artifacts.rows("dyn-eq")
    else:
        dyn_constraint_idx = {
            j
            for j, spec in enumerate(artifacts.problem.constraints)
            if spec.kind == "dynamics-defect"
        }
        dyn_rows = np.asarray(
            [
                r
                for span in artifacts.row_map
                if span.label[0] == "halfspace" and span.label[1] in dyn_constraint_idx
                for r in span.range()
            ],
            dtype=int,
        )
    multipliers = solution.z_dual[dyn_rows] if dyn_rows.size else np.zeros(0)
    value = penalty_value(artifacts.problem, artifacts.penalty, y)
    return y, multipliers, value


def solver_objective(artifacts: SubproblemArtifacts, solution: conic.ConicSolution) -> float:
    """The solver's own objective value including constant offsets."""
    return float(artifacts.program.c @ solution.x) + artifacts.constant_offset
