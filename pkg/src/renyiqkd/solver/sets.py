"""Feasible-set descriptions for the Frank-Wolfe solver.

A feasible set is a product of named parts (probability vectors, boxes, small
polytopes, Choi spectrahedra) plus optional affine couplings across parts.
Points are stored as dicts mapping part names to numpy arrays (real vectors
for classical parts, complex Hermitian matrices for Choi parts).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .. import qmath

FEAS_TOL = 1e-8
Point = dict[str, np.ndarray]


class InfeasibleError(ValueError):
    """Raised when a set description is empty, unbounded, or inconsistent."""


@dataclass(frozen=True)
class FixedPart:
    value: np.ndarray

    @property
    def dim(self) -> int:
        return self.value.size


@dataclass(frozen=True)
class SimplexPart:
    """{x >= 0, sum x = scale}."""

    dim: int
    scale: float = 1.0


@dataclass(frozen=True)
class BoxPart:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if np.any(self.lo > self.hi):
            raise InfeasibleError("box with lo > hi")

    @property
    def dim(self) -> int:
        return self.lo.size


@dataclass(frozen=True)
class PolytopePart:
    """Bounded polytope lo <= x <= hi, A_ub x <= b_ub, A_eq x = b_eq."""

    lo: np.ndarray
    hi: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.lo.size


@dataclass(frozen=True)
class ChoiPart:
    """{J >= 0 Hermitian on in (x) out, Tr_out J = I_in}."""

    dim_in: int
    dim_out: int

    @property
    def dim(self) -> int:
        return self.dim_in * self.dim_out


Part = FixedPart | SimplexPart | BoxPart | PolytopePart | ChoiPart


@dataclass(frozen=True)
class Coupling:
    """Affine rows  sum_p coeff_p(x_p)  (<=|=)  rhs  across several parts.

    For a classical part the coefficient is a (k, dim) matrix; for a Choi part
    it is a list of k Hermitian cost operators, row i contributing
    Re<H_i, J>.
    """

    terms: Mapping[str, np.ndarray | Sequence[np.ndarray]]
    sense: Literal["eq", "le"]
    rhs: np.ndarray

    def nrows(self) -> int:
        return self.rhs.size


def coupling_term_value(part: Part, coeff, x: np.ndarray) -> np.ndarray:
    if isinstance(part, ChoiPart):
        return np.array([float(np.trace(h.conj().T @ x).real) for h in coeff])
    return np.asarray(coeff) @ x


@dataclass
class FeasibleSet:
    """Product feasible set with affine couplings and a stored witness point."""

    parts: dict[str, Part]
    couplings: list[Coupling] = field(default_factory=list)
    witness: Point | None = None

    def __post_init__(self):
        self._conic_cache = None
        if self.witness is not None:
            errs = self.check_point(self.witness)
            if errs:
                raise InfeasibleError("witness point is infeasible: " + "; ".join(errs))

    def part_names(self) -> list[str]:
        return list(self.parts)

    def check_point(self, point: Point, tol: float = FEAS_TOL) -> list[str]:
        """Return a list of violated-constraint descriptions (empty if feasible)."""
        errs: list[str] = []
        for name, part in self.parts.items():
            x = point[name]
            if isinstance(part, FixedPart):
                if np.max(np.abs(x - part.value)) > tol:
                    errs.append(f"{name}: differs from fixed value")
            elif isinstance(part, SimplexPart):
                if np.min(x) < -tol or abs(x.sum() - part.scale) > tol:
                    errs.append(f"{name}: outside simplex (min {np.min(x):.2e})")
            elif isinstance(part, BoxPart):
                if np.any(x < part.lo - tol) or np.any(x > part.hi + tol):
                    errs.append(f"{name}: outside box")
            elif isinstance(part, PolytopePart):
                if np.any(x < part.lo - tol) or np.any(x > part.hi + tol):
                    errs.append(f"{name}: outside bounds")
                if part.a_ub is not None and np.any(part.a_ub @ x > part.b_ub + tol):
                    errs.append(f"{name}: violates inequality rows")
                if part.a_eq is not None and np.any(np.abs(part.a_eq @ x - part.b_eq) > tol):
                    errs.append(f"{name}: violates equality rows")
            elif isinstance(part, ChoiPart):
                if not qmath.is_hermitian(x, 1e-9):
                    errs.append(f"{name}: not Hermitian")
                else:
                    wmin = float(np.linalg.eigvalsh(x)[0])
                    if wmin < -1e-9 - tol:
                        errs.append(f"{name}: min eigenvalue {wmin:.2e}")
                    resid = qmath.frob(
                        qmath.partial_trace(x, [part.dim_in, part.dim_out], keep=[0])
                        - np.eye(part.dim_in))
                    if resid > tol:
                        errs.append(f"{name}: partial-trace residual {resid:.2e}")
        for i, c in enumerate(self.couplings):
            total = np.zeros(c.nrows())
            for pname, coeff in c.terms.items():
                total = total + coupling_term_value(self.parts[pname], coeff, point[pname])
            if c.sense == "eq":
                if np.max(np.abs(total - c.rhs)) > tol:
                    errs.append(f"coupling {i}: equality residual {np.max(np.abs(total - c.rhs)):.2e}")
            else:
                if np.max(total - c.rhs) > tol:
                    errs.append(f"coupling {i}: inequality excess {np.max(total - c.rhs):.2e}")
        return errs


def hs_inner(grads: Point, point: Point) -> float:
    """Hilbert-Schmidt/Euclidean inner product across all parts."""
    total = 0.0
    for name, g in grads.items():
        x = point[name]
        if g.ndim == 2:
            total += float(np.trace(g.conj().T @ x).real)
        else:
            total += float(np.dot(np.asarray(g, dtype=float), np.asarray(x, dtype=float)))
    return total


def combine(a: Point, b: Point, lam: float) -> Point:
    """(1-lam) a + lam b."""
    return {k: (1.0 - lam) * a[k] + lam * b[k] for k in a}


def copy_point(p: Point) -> Point:
    return {k: np.array(v, copy=True) for k, v in p.items()}
