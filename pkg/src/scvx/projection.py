"""Euclidean projection onto the convex sublevel set {q_j(y) <= 0}.

Each constraint component q_j >= 0 keeps the iterate out of a convex set;
the projection of the current iterate onto that set is where the
supporting halfspace gets anchored.  Closed forms cover halfspaces,
Euclidean balls, and infinite cylinders (a ball in a row-orthonormal
linear image); everything else goes through a small cone program on the
touched coordinates.  Projections move only the coordinates the
constraint reads, which is exactly the gradient sparsity pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import conic
from .errors import ProjectionError, UnsupportedModelError, GradientSingularityError
from .problem import AffineFn, ConstraintSpec, NormFn, QuadFn

# q_j(z) values in [-BOUNDARY_TOL, 0] count as "already on the boundary"
BOUNDARY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    point: np.ndarray
    distance: float
    on_boundary: bool
    method: str  # "analytic" | "conic"
    warning: Optional[str] = None


def project(constraint: ConstraintSpec, z: np.ndarray, tol: float = 1e-9) -> ProjectionResult:
    """Unique Euclidean projection of z onto {q_j <= 0}.

    Dispatches to the analytic formula named by the constraint's
    analytic_projector tag, falling back to a conic solve.
    """
    z = np.asarray(z, dtype=float)
    val = constraint.value(z)
    if val <= 0.0:
        return ProjectionResult(
            point=z.copy(),
            distance=0.0,
            on_boundary=bool(val >= -BOUNDARY_TOL),
            method="analytic",
        )
    fn = constraint.fn
    if constraint.analytic_projector == "halfspace" and isinstance(fn, AffineFn):
        return _project_halfspace(constraint, z, val)
    if constraint.analytic_projector in ("ball", "cylinder") and isinstance(fn, NormFn):
        return _project_norm_ball(constraint, z)
    return project_generic(constraint, z, tol)


def _project_halfspace(constraint, z, val):
    # {a.w + beta <= 0}: step along -a by the violation over ||a||^2
    fn = constraint.fn
    point = z.copy()
    w = z[constraint.indices]
    point[constraint.indices] = w - fn.a * (val / (fn.a @ fn.a))
    return ProjectionResult(
        point=point,
        distance=float(np.linalg.norm(point - z)),
        on_boundary=True,
        method="analytic",
    )


def _project_norm_ball(constraint, z):
    # {||H w - p|| <= r} with H row-orthonormal: pull the image point onto
    # the sphere, moving z only within the row space of H
    fn = constraint.fn
    if np.any(fn.a != 0):
        raise UnsupportedModelError("norm-ball projection requires a pure norm term")
    r = -fn.beta
    w = z[constraint.indices]
    v = fn.H @ w - fn.p
    nv = float(np.linalg.norm(v))
    warning = None
    if nv <= 1e-12:
        # z sits on the cylinder axis (possible only for deeply infeasible
        # input); fall back to the first image direction so the projection
        # stays total and deterministic
        v = np.zeros(fn.p.size)
        v[0] = 1.0
        nv = 1.0
        warning = (
            f"degenerate projection input at the axis of constraint "
            f"({constraint.kind}, step {constraint.step}, component "
            f"{constraint.component}); used fallback direction"
        )
    point = z.copy()
    point[constraint.indices] = w - fn.H.T @ (v * (1.0 - r / nv))
    return ProjectionResult(
        point=point,
        distance=float(np.linalg.norm(point - z)),
        on_boundary=True,
        method="analytic",
        warning=warning,
    )


def _sublevel_rows(fn, k, col0, rows, cols, vals, bvals, cones):
    """Append cone rows expressing {fn(w) <= 0} over w = x[col0:col0+k]."""
    if isinstance(fn, AffineFn):
        # nonneg slack: -(a.w + beta) >= 0
        for j, aj in enumerate(fn.a):
            if aj != 0.0:
                rows.append(len(bvals))
                cols.append(col0 + j)
                vals.append(aj)
        bvals.append(-fn.beta)
        cones.append(conic.Cone("nonneg", 1))
        return
    if isinstance(fn, NormFn):
        # soc: (-a.w - beta, H w - p) with head >= ||tail||
        head = len(bvals)
        for j, aj in enumerate(fn.a):
            if aj != 0.0:
                rows.append(head)
                cols.append(col0 + j)
                vals.append(aj)
        bvals.append(-fn.beta)
        for i in range(fn.H.shape[0]):
            rr = len(bvals)
            for j in range(k):
                if fn.H[i, j] != 0.0:
                    rows.append(rr)
                    cols.append(col0 + j)
                    vals.append(-fn.H[i, j])
            bvals.append(-fn.p[i])
        cones.append(conic.Cone("soc", 1 + fn.H.shape[0]))
        return
    if isinstance(fn, QuadFn):
        # 0.5||L w||^2 <= r with r = -(a.w + beta), via the rotated-cone
        # identity (r+1)^2 >= (r-1)^2 + 2||L w||^2
        rl = fn.L.shape[0]
        head = len(bvals)
        for j, aj in enumerate(fn.a):
            if aj != 0.0:
                rows.append(head)
                cols.append(col0 + j)
                vals.append(aj)
        bvals.append(1.0 - fn.beta)  # s0 = r + 1
        second = len(bvals)
        for j, aj in enumerate(fn.a):
            if aj != 0.0:
                rows.append(second)
                cols.append(col0 + j)
                vals.append(aj)
        bvals.append(-1.0 - fn.beta)  # s1 = r - 1
        root2 = np.sqrt(2.0)
        for i in range(rl):
            rr = len(bvals)
            for j in range(k):
                if fn.L[i, j] != 0.0:
                    rows.append(rr)
                    cols.append(col0 + j)
                    vals.append(-root2 * fn.L[i, j])
            bvals.append(0.0)
        cones.append(conic.Cone("soc", 2 + rl))
        return
    raise UnsupportedModelError(
        f"no cone-representable sublevel encoding for {type(fn).__name__}"
    )


# violations this small are handled by a Newton step along the gradient
# when the cone solve degenerates (projection distance at the soc apex)
NEAR_BOUNDARY_FALLBACK = 1e-6


def _newton_to_boundary(fn, w):
    """Drive fn(w) to 0 along its gradient; error O(val^2) for small val."""
    w = w.copy()
    for _ in range(3):
        val = fn.value(w)
        if abs(val) <= 1e-12:
            break
        grad = fn.grad(w)
        nr2 = float(grad @ grad)
        if nr2 <= 1e-20:
            raise ProjectionError("vanishing gradient in boundary fallback")
        w = w - (val / nr2) * grad
    return w


def project_generic(constraint: ConstraintSpec, z: np.ndarray, tol: float = 1e-9) -> ProjectionResult:
    """Projection via a small cone program over the touched coordinates.

    minimize t subject to t >= ||w - z[idx]||, fn(w) <= 0.
    """
    z = np.asarray(z, dtype=float)
    val0 = constraint.value(z)
    if val0 <= 0.0:
        return ProjectionResult(
            point=z.copy(),
            distance=0.0,
            on_boundary=bool(val0 >= -BOUNDARY_TOL),
            method="conic",
        )
    idx = constraint.indices
    k = idx.size
    w0 = z[idx]
    # columns: w (k), t (1)
    rows, cols, vals, bvals, cones = [], [], [], [], []
    # distance epigraph soc: (t, w - w0)
    rows.append(0)
    cols.append(k)
    vals.append(-1.0)
    bvals.append(0.0)
    for j in range(k):
        rows.append(len(bvals))
        cols.append(j)
        vals.append(-1.0)
        bvals.append(-w0[j])
    cones.append(conic.Cone("soc", 1 + k))
    _sublevel_rows(constraint.fn, k, 0, rows, cols, vals, bvals, cones)
    A = sp.coo_matrix((vals, (rows, cols)), shape=(len(bvals), k + 1)).tocsc()
    c = np.zeros(k + 1)
    c[k] = 1.0
    program = conic.ConicProgram(c, A, np.asarray(bvals), tuple(cones))
    sol = conic.solve(program, tol=tol, max_iter=100)
    if sol.status != "optimal":
        if val0 <= NEAR_BOUNDARY_FALLBACK:
            w = _newton_to_boundary(constraint.fn, w0)
            if abs(constraint.fn.value(w)) <= BOUNDARY_TOL:
                point = z.copy()
                point[idx] = w
                return ProjectionResult(
                    point=point,
                    distance=float(np.linalg.norm(point - z)),
                    on_boundary=True,
                    method="conic",
                    warning="cone solve degenerated near the boundary; "
                    "gradient-step fallback used",
                )
        raise ProjectionError(
            f"conic projection failed with status {sol.status!r} for constraint "
            f"({constraint.kind}, step {constraint.step}, component {constraint.component})",
            diagnostics={
                "status": sol.status,
                "gap": sol.gap,
                "primal_res": sol.primal_res,
                "dual_res": sol.dual_res,
                "iterations": sol.iterations,
            },
        )
    point = z.copy()
    point[idx] = sol.x[:k]
    val = constraint.value(z)
    return ProjectionResult(
        point=point,
        distance=float(np.linalg.norm(point - z)),
        on_boundary=bool(val >= -BOUNDARY_TOL),
        method="conic",
    )


def safe_gradient(constraint: ConstraintSpec, y: np.ndarray):
    """Gradient row of q_j at y with a deterministic fallback at norm centers.

    Used by callers that must linearize at arbitrary (possibly deeply
    infeasible) points, such as the feasibility initializer.  Returns
    (local gradient, warning-or-None).
    """
    try:
        return constraint.grad_local(y), None
    except GradientSingularityError:
        fn = constraint.fn
        if isinstance(fn, NormFn):
            v = np.zeros(fn.p.size)
            v[0] = 1.0
            grad = fn.H.T @ v + fn.a
            warning = (
                f"gradient fallback at the center of constraint ({constraint.kind}, "
                f"step {constraint.step}, component {constraint.component})"
            )
            return grad, warning
        raise
