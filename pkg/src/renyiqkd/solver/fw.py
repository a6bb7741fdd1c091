"""Frank-Wolfe minimization with certified lower bounds.

Each iteration linearizes the objective, calls the linear-minimization oracle,
and turns the oracle's dual bound into a certified lower bound on the global
minimum via the first-order convexity inequality.  The reported bound is the
best one seen across all iterates, so it remains valid even when the iteration
limit is reached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .lmo import LmoResult, solve_lmo
from .sets import FeasibleSet, Point, combine, copy_point, hs_inner


@dataclass
class ConvexObjective:
    """A convex objective over a feasible set's parts.

    ``eval`` maps a point to a float (may return +inf outside the domain of
    the classical terms); ``grad`` returns one gradient array per part.
    """

    eval: Callable[[Point], float]
    grad: Callable[[Point], Point]
    value_and_grad: Callable[[Point], tuple[float, Point]] | None = None

    def both(self, point: Point) -> tuple[float, Point]:
        if self.value_and_grad is not None:
            return self.value_and_grad(point)
        return self.eval(point), self.grad(point)


@dataclass
class FWParams:
    eps_rel: float = 1e-6
    max_iter: int = 500
    line_search_tol: float = 1e-8
    eps_abs: float = 1e-12
    corrective: bool = True
    atom_cap: int = 60
    max_step: float = 1.0 - 1e-9


@dataclass
class SolveReport:
    point: Point
    value: float
    certified_lower_bound: float
    fw_gap: float
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _line_search(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Golden-section minimization of a convex 1-d function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def _corrective_step(objective: ConvexObjective, atoms: list[Point],
                     weights: np.ndarray, f_current: float) -> tuple[Point, np.ndarray, float]:
    """Re-optimize the convex combination of collected atoms (SLSQP on weights)."""
    from scipy.optimize import minimize

    names = list(atoms[0])

    def assemble(w: np.ndarray) -> Point:
        return {k: sum(wi * a[k] for wi, a in zip(w, atoms)) for k in names}

    def fun(w: np.ndarray):
        point = assemble(np.maximum(w, 0.0))
        val, grads = objective.both(point)
        jac = np.array([hs_inner(grads, a) for a in atoms])
        return val, jac

    res = minimize(fun, weights, jac=True, method="SLSQP",
                   bounds=[(0.0, 1.0)] * len(atoms),
                   constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                                 "jac": lambda w: np.ones_like(w)}],
                   options={"maxiter": 40, "ftol": 1e-14})
    w = np.maximum(res.x, 0.0)
    total = w.sum()
    if total <= 0.0 or not np.isfinite(res.fun):
        return assemble(weights), weights, f_current
    w = w / total
    point = assemble(w)
    val = objective.eval(point)
    if val <= f_current:
        return point, w, val
    return assemble(weights), weights, f_current


def fw_minimize(objective: ConvexObjective, fset: FeasibleSet,
                params: FWParams | None = None) -> SolveReport:
    """Minimize a convex objective over a feasible set with a certified bound.

    Every iterate is feasible (a convex combination of the witness and oracle
    vertices).  The certified lower bound is max over iterates of
    f(x) + min_z <grad f(x), z - x>, evaluated with the oracle's own dual
    bound, so subsolver inexactness can only loosen it, never invalidate it.
    """
    params = params or FWParams()
    if fset.witness is None:
        raise ValueError("feasible set has no witness point to start from")
    x = copy_point(fset.witness)
    atoms: list[Point] = [copy_point(x)]
    weights = np.array([1.0])
    best_lb = -math.inf
    best_gap = math.inf
    f_val = objective.eval(x)
    converged = False
    it = 0
    lmo_diag: dict = {}

    for it in range(1, params.max_iter + 1):
        f_val, grads = objective.both(x)
        res: LmoResult = solve_lmo(fset, grads)
        lin_at_x = hs_inner(grads, x)
        gap = max(lin_at_x - res.certified_lb, 0.0)
        best_lb = max(best_lb, f_val - gap)
        best_gap = min(best_gap, gap)
        lmo_diag = res.diagnostics
        if gap <= max(params.eps_rel * abs(f_val), params.eps_abs):
            converged = True
            break

        z = res.point

        def f_along(lam: float) -> float:
            return objective.eval(combine(x, z, lam))

        lam = _line_search(f_along, 0.0, params.max_step, params.line_search_tol)
        f_step = f_along(lam)
        if f_step > f_val:
            lam = 0.0
            f_step = f_val
        x = combine(x, z, lam)
        f_val = f_step
        atoms.append(copy_point(z))
        weights = np.append((1.0 - lam) * weights, lam)

        if params.corrective and len(atoms) > 1:
            x, weights, f_val = _corrective_step(objective, atoms, weights, f_val)

        if len(atoms) > params.atom_cap:
            keep = np.argsort(weights)[-params.atom_cap:]
            keep.sort()
            atoms = [atoms[i] for i in keep]
            weights = weights[keep]
            total = weights.sum()
            if total > 0:
                weights = weights / total
            x = {k: sum(w * a[k] for w, a in zip(weights, atoms)) for k in atoms[0]}
            f_val = objective.eval(x)

    return SolveReport(
        point=x,
        value=f_val,
        certified_lower_bound=best_lb,
        fw_gap=best_gap,
        iterations=it,
        converged=converged,
        diagnostics={"atoms": len(atoms), "lmo": lmo_diag},
    )
