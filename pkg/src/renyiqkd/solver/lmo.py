"""Linear minimization oracles with rigorous dual lower bounds.

Every oracle returns both a feasible minimizer and a *certified* lower bound
on the true linear minimum.  The bound comes from dual feasibility plus an
explicit correction for any residuals, so it stays valid even when the
underlying solve is inexact; the Frank-Wolfe certificates inherit this
property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import qmath
from .sets import (
    BoxPart,
    ChoiPart,
    Coupling,
    FeasibleSet,
    FixedPart,
    InfeasibleError,
    Point,
    PolytopePart,
    SimplexPart,
)


class LmoError(RuntimeError):
    """Subproblem solver failed to produce a certified answer."""


@dataclass
class LmoResult:
    point: Point
    certified_lb: float
    primal_value: float
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Choi spectrahedron: min <C, J> s.t. Tr_out J = I, J >= 0
# ---------------------------------------------------------------------------

def _hermitian_basis(dim: int) -> list[np.ndarray]:
    """Orthonormal (Frobenius) basis of Hermitian dim x dim matrices."""
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    s = 1.0 / math.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = s
            e[j, i] = s
            basis.append(e)
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1j * s
            e[j, i] = -1j * s
            basis.append(e)
    return basis


@dataclass
class ChoiLmoResult:
    choi: np.ndarray
    primal_value: float
    dual_certificate: np.ndarray
    certified_lb: float
    barrier_mu: float
    newton_steps: int


def lmo_choi(cost: np.ndarray, dim_in: int, dim_out: int,
             gap_tol: float = 1e-9, max_newton: int = 400) -> ChoiLmoResult:
    """Minimize <C, J> over Choi matrices via a dual barrier method.

    The dual is max Tr Y s.t. C - Y (x) I >= 0; on the central path the primal
    iterate mu * (C - Y (x) I)^(-1) is exactly partial-trace feasible, so the
    method yields a feasible J and a dual-feasible Y whose trace is an
    unconditionally valid lower bound.
    """
    dim = dim_in * dim_out
    c = qmath.hermitian_operator(cost, tol=1e-9)
    scale = max(qmath.frob(c), 1.0)
    c = c / scale
    basis = _hermitian_basis(dim_in)
    eye_out = np.eye(dim_out)
    eye_in = np.eye(dim_in)

    wmin = float(np.linalg.eigvalsh(c)[0])
    y = (wmin - 1.0) * eye_in
    s = c - np.kron(y, eye_out)

    # feasible primal start J0 = I/dim_out fixes the initial gap scale
    mu = max((np.trace(c).real / dim_out - np.trace(y).real) / dim, 1e-6)
    tol = gap_tol / scale
    newton_steps = 0
    nb = len(basis)

    while True:
        # center: damped Newton on  max Tr Y + mu log det(C - Y x I)
        for _ in range(60):
            s_inv = np.linalg.inv(s)
            s_inv = 0.5 * (s_inv + s_inv.conj().T)
            # descent direction for phi(Y) = -Tr Y - mu log det S
            neg_grad = eye_in - mu * qmath.partial_trace(s_inv, [dim_in, dim_out], keep=[0])
            hess = np.empty((nb, nb))
            mats = []
            for bk in basis:
                m = s_inv @ np.kron(bk, eye_out) @ s_inv
                mats.append(mu * qmath.partial_trace(m, [dim_in, dim_out], keep=[0]))
            for k, bk in enumerate(basis):
                for l in range(nb):
                    hess[k, l] = np.trace(bk.conj().T @ mats[l]).real
            rhs = np.array([np.trace(bk.conj().T @ neg_grad).real for bk in basis])
            try:
                step = np.linalg.solve(hess, rhs)
            except np.linalg.LinAlgError as exc:
                raise LmoError(f"singular Newton system in Choi LMO: {exc}") from exc
            dy = sum(w * bk for w, bk in zip(step, basis))
            decrement = max(float(np.dot(step, rhs)), 0.0)
            # Newton decrement in the self-concordant metric of the barrier
            lam = math.sqrt(decrement / mu)
            t = 1.0 if lam <= 0.25 else 1.0 / (1.0 + lam)
            for _ in range(60):
                cand = s - t * np.kron(dy, eye_out)
                if np.linalg.eigvalsh(cand)[0] > 0.0:
                    break
                t *= 0.5
            else:
                raise LmoError("Choi LMO line search failed to restore definiteness")
            y = y + t * dy
            s = c - np.kron(y, eye_out)
            newton_steps += 1
            if newton_steps > max_newton:
                break
            if lam < 0.01 or qmath.frob(neg_grad) < 1e-10:
                break
        gap = mu * dim
        if gap <= tol or newton_steps > max_newton:
            break
        mu *= 0.12

    s_inv = np.linalg.inv(s)
    j = mu * 0.5 * (s_inv + s_inv.conj().T)
    # exact affine cleanup of the (tiny) partial-trace residual
    resid = eye_in - qmath.partial_trace(j, [dim_in, dim_out], keep=[0])
    j = j + np.kron(resid, eye_out) / dim_out
    wmin_j = float(np.linalg.eigvalsh(j)[0])
    if wmin_j < 0.0:
        # absorb cleanup round-off by mixing toward the feasible center
        tau = min(1.0, 1.1 * (-wmin_j) / (1.0 / dim_out - wmin_j))
        j = (1.0 - tau) * j + tau * np.eye(dim) / dim_out
    primal = float(np.trace(c.conj().T @ j).real)
    slack_min = float(np.linalg.eigvalsh(s)[0])
    lb = float(np.trace(y).real) - dim_in * max(0.0, -slack_min)
    return ChoiLmoResult(
        choi=j,
        primal_value=primal * scale,
        dual_certificate=y * scale,
        certified_lb=lb * scale,
        barrier_mu=mu * scale,
        newton_steps=newton_steps,
    )


# ---------------------------------------------------------------------------
# classical parts
# ---------------------------------------------------------------------------

def lmo_simplex(c: np.ndarray, part: SimplexPart) -> tuple[np.ndarray, float]:
    c = np.asarray(c, dtype=float)
    best = float(c.min())
    # ties resolve to the highest index: that vertex is lexicographically
    # smallest as a vector
    idx = int(np.max(np.flatnonzero(c == best)))
    x = np.zeros(part.dim)
    x[idx] = part.scale
    return x, best * part.scale


def lmo_box(c: np.ndarray, part: BoxPart) -> tuple[np.ndarray, float]:
    c = np.asarray(c, dtype=float)
    x = np.where(c > 0.0, part.lo, part.hi)
    x = np.where(c == 0.0, part.lo, x)
    return x, float(np.dot(c, x))


def lmo_polytope(c: np.ndarray, part: PolytopePart | BoxPart | SimplexPart | FixedPart,
                 ) -> tuple[np.ndarray, float]:
    """Exact vertex minimizer plus a certified lower bound on the optimum.

    Boxes and simplices are solved in closed form.  General polytopes go
    through scipy's HiGHS LP, with the bound recovered from the returned duals
    (any sign-feasible dual gives a valid bound after a reduced-cost
    correction, so solver inexactness cannot invalidate it).
    """
    if isinstance(part, FixedPart):
        return np.array(part.value, copy=True), float(np.dot(c, part.value))
    if isinstance(part, SimplexPart):
        return lmo_simplex(c, part)
    if isinstance(part, BoxPart):
        return lmo_box(c, part)

    from scipy.optimize import linprog

    res = linprog(c, A_ub=part.a_ub, b_ub=part.b_ub, A_eq=part.a_eq, b_eq=part.b_eq,
                  bounds=list(zip(part.lo, part.hi)), method="highs")
    if not res.success:
        raise InfeasibleError(f"polytope LMO failed: {res.message}")
    x = np.clip(res.x, part.lo, part.hi)
    # dual bound: for y_ub <= 0 (HiGHS sign), r = c - A_ub' y_ub - A_eq' y_eq,
    # bound = y_ub . b_ub + y_eq . b_eq + sum_i min(r_i lo_i, r_i hi_i)
    r = np.asarray(c, dtype=float).copy()
    bound = 0.0
    if part.a_ub is not None:
        y_ub = np.minimum(res.ineqlin.marginals, 0.0)
        r -= part.a_ub.T @ y_ub
        bound += float(np.dot(y_ub, part.b_ub))
    if part.a_eq is not None:
        y_eq = res.eqlin.marginals
        r -= part.a_eq.T @ y_eq
        bound += float(np.dot(y_eq, part.b_eq))
    bound += float(np.minimum(r * part.lo, r * part.hi).sum())
    return x, bound


# ---------------------------------------------------------------------------
# joint conic LMO for coupled sets (cvxopt conelp backend)
# ---------------------------------------------------------------------------

def _real_embedding(h: np.ndarray) -> np.ndarray:
    """[[Re, -Im], [Im, Re]]: PSD iff the Hermitian argument is PSD."""
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


class ConicLmo:
    """Pre-assembled mixed LP/PSD linear-minimization problem for one set.

    Variables are the concatenation of all non-fixed parts, with Choi parts
    expanded over an orthonormal Hermitian basis.  Only the objective vector
    changes between calls; G, h, A, b are built once.
    """

    def __init__(self, fset: FeasibleSet):
        import cvxopt

        self.fset = fset
        self.var_parts: list[str] = [n for n, p in fset.parts.items()
                                     if not isinstance(p, FixedPart)]
        self.offsets: dict[str, int] = {}
        self.bases: dict[str, list[np.ndarray]] = {}
        n = 0
        for name in self.var_parts:
            part = fset.parts[name]
            self.offsets[name] = n
            if isinstance(part, ChoiPart):
                self.bases[name] = _hermitian_basis(part.dim)
                n += part.dim ** 2
            else:
                n += part.dim
        self.nvars = n

        g_rows: list[np.ndarray] = []
        h_vals: list[float] = []
        a_rows: list[np.ndarray] = []
        b_vals: list[float] = []
        self.var_abs_bound = np.ones(n)

        def classical_row(name: str, coeffs: np.ndarray) -> np.ndarray:
            row = np.zeros(n)
            o = self.offsets[name]
            row[o:o + coeffs.size] = coeffs
            return row

        def choi_row(name: str, op: np.ndarray) -> np.ndarray:
            row = np.zeros(n)
            o = self.offsets[name]
            for k, bk in enumerate(self.bases[name]):
                row[o + k] = np.trace(bk.conj().T @ op).real
            return row

        for name in self.var_parts:
            part = fset.parts[name]
            o = self.offsets[name]
            if isinstance(part, SimplexPart):
                row = np.zeros(n)
                row[o:o + part.dim] = 1.0
                a_rows.append(row)
                b_vals.append(part.scale)
                for i in range(part.dim):
                    row = np.zeros(n)
                    row[o + i] = -1.0
                    g_rows.append(row)
                    h_vals.append(0.0)
                self.var_abs_bound[o:o + part.dim] = part.scale
            elif isinstance(part, (BoxPart, PolytopePart)):
                for i in range(part.dim):
                    row = np.zeros(n)
                    row[o + i] = -1.0
                    g_rows.append(row)
                    h_vals.append(-float(part.lo[i]))
                    row = np.zeros(n)
                    row[o + i] = 1.0
                    g_rows.append(row)
                    h_vals.append(float(part.hi[i]))
                self.var_abs_bound[o:o + part.dim] = np.maximum(
                    np.abs(part.lo), np.abs(part.hi))
                if isinstance(part, PolytopePart):
                    if part.a_ub is not None:
                        for rc, rb in zip(part.a_ub, part.b_ub):
                            g_rows.append(classical_row(name, rc))
                            h_vals.append(float(rb))
                    if part.a_eq is not None:
                        for rc, rb in zip(part.a_eq, part.b_eq):
                            a_rows.append(classical_row(name, rc))
                            b_vals.append(float(rb))
            elif isinstance(part, ChoiPart):
                basis_in = _hermitian_basis(part.dim_in)
                for fm in basis_in:
                    a_rows.append(choi_row(name, np.kron(fm, np.eye(part.dim_out))))
                    b_vals.append(float(np.trace(fm).real))
                self.var_abs_bound[o:o + part.dim ** 2] = float(part.dim_in)

        for c in fset.couplings:
            for i in range(c.nrows()):
                row = np.zeros(n)
                for pname, coeff in c.terms.items():
                    part = fset.parts[pname]
                    if isinstance(part, FixedPart):
                        continue
                    if isinstance(part, ChoiPart):
                        row += choi_row(pname, coeff[i])
                    else:
                        row += classical_row(pname, np.asarray(coeff)[i])
                # constants from fixed parts move to the rhs
                rhs = float(c.rhs[i])
                for pname, coeff in c.terms.items():
                    part = fset.parts[pname]
                    if isinstance(part, FixedPart):
                        from .sets import coupling_term_value
                        rhs -= float(coupling_term_value(part, coeff, part.value)[i])
                if c.sense == "eq":
                    a_rows.append(row)
                    b_vals.append(rhs)
                else:
                    g_rows.append(row)
                    h_vals.append(rhs)

        self.n_lin = len(g_rows)
        self.psd_parts: list[str] = []
        psd_dims: list[int] = []
        psd_cols: list[np.ndarray] = []
        for name in self.var_parts:
            part = fset.parts[name]
            if not isinstance(part, ChoiPart):
                continue
            self.psd_parts.append(name)
            d2 = 2 * part.dim
            psd_dims.append(d2)
            o = self.offsets[name]
            block = np.zeros((d2 * d2, n))
            for k, bk in enumerate(self.bases[name]):
                block[:, o + k] = -_real_embedding(bk).reshape(-1, order="F")
            psd_cols.append(block)

        g_lin = np.array(g_rows).reshape(self.n_lin, n) if g_rows else np.zeros((0, n))
        g_full = np.vstack([g_lin] + psd_cols) if psd_cols else g_lin
        h_full = np.concatenate([np.array(h_vals),
                                 np.zeros(sum(d * d for d in psd_dims))])
        self.dims = {"l": self.n_lin, "q": [], "s": psd_dims}
        self.g = cvxopt.matrix(g_full)
        self.h = cvxopt.matrix(h_full)
        self.a = cvxopt.matrix(np.array(a_rows).reshape(len(a_rows), n))
        self.b = cvxopt.matrix(np.array(b_vals, dtype=float))
        self._h_np = h_full
        self._g_np = g_full
        self._a_np = np.array(a_rows).reshape(len(a_rows), n)
        self._b_np = np.array(b_vals, dtype=float)
        cvxopt.solvers.options.setdefault("show_progress", False)

    def objective_vector(self, grads: Point) -> np.ndarray:
        c = np.zeros(self.nvars)
        for name in self.var_parts:
            o = self.offsets[name]
            g = grads[name]
            part = self.fset.parts[name]
            if isinstance(part, ChoiPart):
                for k, bk in enumerate(self.bases[name]):
                    c[o + k] = np.trace(bk.conj().T @ g).real
            else:
                c[o:o + part.dim] = np.asarray(g, dtype=float)
        return c

    def point_from_x(self, x: np.ndarray) -> Point:
        point: Point = {}
        for name, part in self.fset.parts.items():
            if isinstance(part, FixedPart):
                point[name] = np.array(part.value, copy=True)
                continue
            o = self.offsets[name]
            if isinstance(part, ChoiPart):
                j = sum(x[o + k] * bk for k, bk in enumerate(self.bases[name]))
                # snap the tiny conic-solver residuals back onto the affine slice
                resid = np.eye(part.dim_in) - qmath.partial_trace(
                    j, [part.dim_in, part.dim_out], keep=[0])
                j = j + np.kron(resid, np.eye(part.dim_out)) / part.dim_out
                point[name] = j
            else:
                point[name] = np.array(x[o:o + part.dim], dtype=float)
        return point

    def solve(self, grads: Point) -> LmoResult:
        import cvxopt

        c = self.objective_vector(grads)
        sol = cvxopt.solvers.conelp(cvxopt.matrix(c), self.g, self.h,
                                    dims=self.dims, A=self.a, b=self.b)
        if sol["x"] is None:
            raise LmoError(f"conelp failed with status {sol['status']}")
        x = np.array(sol["x"]).ravel()
        z = np.array(sol["z"]).ravel()
        yv = np.array(sol["y"]).ravel()

        # clean the dual onto the cone, then account for all residuals
        z_clean = z.copy()
        z_clean[:self.n_lin] = np.maximum(z[:self.n_lin], 0.0)
        off = self.n_lin
        for d in self.dims["s"]:
            m = z[off:off + d * d].reshape(d, d, order="F")
            m = 0.5 * (m + m.T)
            w, v = np.linalg.eigh(m)
            m = (v * np.maximum(w, 0.0)) @ v.T
            z_clean[off:off + d * d] = m.reshape(-1, order="F")
            off += d * d
        r = c + self._g_np.T @ z_clean + (self._a_np.T @ yv if yv.size else 0.0)
        lb = -float(self._h_np @ z_clean) - float(self._b_np @ yv)
        lb -= float(np.abs(r) @ self.var_abs_bound)

        point = self.point_from_x(x)
        primal = float(np.dot(c, x))
        return LmoResult(point=point, certified_lb=lb, primal_value=primal,
                         diagnostics={"status": sol["status"]})


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def solve_lmo(fset: FeasibleSet, grads: Point) -> LmoResult:
    """Global linear minimization over the feasible set with a certified bound."""
    if fset.couplings:
        if fset._conic_cache is None:
            fset._conic_cache = ConicLmo(fset)
        return fset._conic_cache.solve(grads)

    point: Point = {}
    lb = 0.0
    primal = 0.0
    diag: dict = {}
    for name, part in fset.parts.items():
        g = grads[name]
        if isinstance(part, ChoiPart):
            res = lmo_choi(g, part.dim_in, part.dim_out)
            point[name] = res.choi
            lb += res.certified_lb
            primal += res.primal_value
            diag[name] = {"newton_steps": res.newton_steps}
        else:
            x, bound = lmo_polytope(np.asarray(g, dtype=float), part)
            point[name] = x
            lb += bound
            primal += float(np.dot(g, x))
    return LmoResult(point=point, certified_lb=lb, primal_value=primal, diagnostics=diag)


def sample_feasible(fset: FeasibleSet, rng: np.random.Generator, n: int) -> list[Point]:
    """Random feasible points, used to stress certified lower bounds.

    Without couplings each part is sampled directly; with couplings, random
    vertices from LMO calls at random costs are mixed by Dirichlet weights
    (convexity keeps every mixture feasible).
    """
    if not fset.couplings:
        out = []
        for _ in range(n):
            p: Point = {}
            for name, part in fset.parts.items():
                if isinstance(part, FixedPart):
                    p[name] = np.array(part.value, copy=True)
                elif isinstance(part, SimplexPart):
                    p[name] = rng.dirichlet(np.ones(part.dim)) * part.scale
                elif isinstance(part, BoxPart):
                    p[name] = part.lo + rng.random(part.dim) * (part.hi - part.lo)
                elif isinstance(part, PolytopePart):
                    x = part.lo + rng.random(part.dim) * (part.hi - part.lo)
                    vert, _ = lmo_polytope(rng.normal(size=part.dim), part)
                    lam = rng.random()
                    p[name] = lam * vert + (1 - lam) * np.clip(x, part.lo, part.hi) \
                        if part.a_ub is None and part.a_eq is None else vert
                elif isinstance(part, ChoiPart):
                    ks = qmath.random_cptp_kraus(rng, part.dim_in, part.dim_out)
                    p[name] = qmath.choi_from_kraus(ks, part.dim_in)
            out.append(p)
        return out

    pool: list[Point] = []
    if fset.witness is not None:
        pool.append(fset.witness)
    n_pool = min(40, 5 + n // 25)
    for _ in range(n_pool):
        grads: Point = {}
        for name, part in fset.parts.items():
            if isinstance(part, ChoiPart):
                grads[name] = qmath.random_hermitian(rng, part.dim)
            else:
                grads[name] = rng.normal(size=part.dim)
        pool.append(solve_lmo(fset, grads).point)
    out = []
    for _ in range(n):
        w = rng.dirichlet(np.ones(len(pool)))
        p = {k: sum(wi * pt[k] for wi, pt in zip(w, pool)) for k in pool[0]}
        out.append(p)
    return out
