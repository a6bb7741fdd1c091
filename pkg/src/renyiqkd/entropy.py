"""Renyi divergences, conditional entropies, and the convex key-entropy objective.

All logarithms are base 2.  The central object is ``pinched_entropy``: for a
state rho on a register Q carrying a complete family of key-map projectors Z_j,
it evaluates the sandwiched down-arrow Renyi entropy of the measurement outcome
conditioned on a purifying environment,

    (1/(1-alpha)) * log( Tr[(Z(rho^(1/alpha)))^alpha] + 1 - Tr[rho] ),

extended to subnormalized rho.  This function is convex in rho and its gradient
is available in closed form, which is what the Frank-Wolfe solver consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import qmath
from .qmath import (
    KrausChannel,
    LinearMapOnOperators,
    PinchingProjectors,
    dagger,
    eigh,
    mpow,
    pinch,
)

LN2 = math.log(2.0)
SUPPORT_REL_TOL = 1e-12


class EntropyDomainError(ValueError):
    """Raised on inputs outside an entropy's domain (e.g. zero-trace states)."""


def check_alpha(alpha: float, lo: float = 0.0, hi: float = math.inf) -> float:
    alpha = float(alpha)
    if not (lo < alpha < hi) or alpha == 1.0:
        raise EntropyDomainError(f"Renyi order must lie in ({lo},1)u(1,{hi}), got {alpha}")
    return alpha


def _support_projector(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigen data of sigma plus a mask of eigenvalues counted as support."""
    w, v = eigh(sigma)
    cutoff = SUPPORT_REL_TOL * max(w[-1], 0.0)
    mask = w > cutoff
    return w, v, mask


def petz_divergence(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    """Petz quantum Renyi divergence (1/(alpha-1)) log(Tr[rho^a sigma^(1-a)]/Tr rho).

    Returns +inf unless (alpha < 1 and rho not orthogonal to sigma) or
    supp(rho) is contained in supp(sigma).
    """
    alpha = check_alpha(alpha)
    tr_rho = float(np.trace(rho).real)
    if tr_rho <= 0.0:
        raise EntropyDomainError("divergence needs Tr[rho] > 0")
    ws, vs, mask = _support_projector(sigma)
    proj_out = (vs[:, ~mask]) @ dagger(vs[:, ~mask])
    overlap_out = float(np.trace(proj_out @ rho).real)
    if alpha > 1.0:
        if overlap_out > SUPPORT_REL_TOL * tr_rho:
            return math.inf
    else:
        overlap_in = tr_rho - overlap_out
        if overlap_in <= SUPPORT_REL_TOL * tr_rho:
            return math.inf
    sig_pow = (vs[:, mask] * np.power(ws[mask], 1.0 - alpha)) @ dagger(vs[:, mask])
    rho_pow = mpow(rho, alpha)
    q = float(np.trace(rho_pow @ sig_pow).real)
    if q <= 0.0:
        return math.inf
    return (math.log2(q) - math.log2(tr_rho)) / (alpha - 1.0)


def sandwiched_divergence(rho: np.ndarray, sigma: np.ndarray, alpha: float) -> float:
    """Sandwiched (minimal) Renyi divergence with the same support convention."""
    alpha = check_alpha(alpha)
    tr_rho = float(np.trace(rho).real)
    if tr_rho <= 0.0:
        raise EntropyDomainError("divergence needs Tr[rho] > 0")
    ws, vs, mask = _support_projector(sigma)
    proj_out = (vs[:, ~mask]) @ dagger(vs[:, ~mask])
    overlap_out = float(np.trace(proj_out @ rho).real)
    if alpha > 1.0:
        if overlap_out > SUPPORT_REL_TOL * tr_rho:
            return math.inf
    else:
        if tr_rho - overlap_out <= SUPPORT_REL_TOL * tr_rho:
            return math.inf
    expo = (1.0 - alpha) / (2.0 * alpha)
    half = (vs[:, mask] * np.power(ws[mask], expo)) @ dagger(vs[:, mask])
    core = half @ rho @ half
    q = float(np.trace(mpow(core, alpha)).real)
    if q <= 0.0:
        return math.inf
    return (math.log2(q) - math.log2(tr_rho)) / (alpha - 1.0)


def _marginal_b(rho_ab: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    return qmath.partial_trace(rho_ab, dims, keep=[1])


def cond_entropy_down(variant: Literal["petz", "sandwiched"], rho_ab: np.ndarray,
                      dims: tuple[int, int], alpha: float) -> float:
    """Down-arrow conditional Renyi entropy -D_alpha(rho_AB || I_A x rho_B)."""
    da, db = dims
    sigma = qmath.tensor(np.eye(da), _marginal_b(rho_ab, dims))
    div = {"petz": petz_divergence, "sandwiched": sandwiched_divergence}[variant]
    return -div(rho_ab, sigma, alpha)


def cond_entropy_petz_up(rho_ab: np.ndarray, dims: tuple[int, int], alpha: float) -> float:
    """Up-arrow Petz entropy via its closed form (alpha/(1-alpha)) log Tr[(Tr_A rho^a)^(1/a)]."""
    alpha = check_alpha(alpha)
    rho_a_pow = qmath.partial_trace(mpow(rho_ab, alpha), dims, keep=[1])
    val = float(np.trace(mpow(rho_a_pow, 1.0 / alpha)).real)
    return (alpha / (1.0 - alpha)) * math.log2(val)


def conditional_vn_entropy(rho_ab: np.ndarray, dims: tuple[int, int]) -> float:
    """Base-2 conditional von Neumann entropy H(A|B) = H(AB) - H(B)."""
    def _h(r: np.ndarray) -> float:
        w = np.linalg.eigvalsh(0.5 * (r + dagger(r)))
        w = w[w > 1e-15]
        return float(-(w * np.log2(w)).sum())

    return _h(rho_ab) - _h(_marginal_b(rho_ab, dims))


# ---------------------------------------------------------------------------
# pinched-entropy objective
# ---------------------------------------------------------------------------

def pinched_power_trace(rho: np.ndarray, z: PinchingProjectors, alpha: float,
                        min_eig_floor: float = 0.0) -> float:
    """theta(rho) = Tr[(Z(rho^(1/alpha)))^alpha] + 1 - Tr[rho], in (0, 1] on states."""
    alpha = check_alpha(alpha, lo=1.0)
    tr = float(np.trace(rho).real)
    root = mpow(rho, 1.0 / alpha, min_eig_floor)
    pinched = pinch(z, root)
    return float(np.trace(mpow(pinched, alpha)).real) + 1.0 - tr


def pinched_power_trace_grad(rho: np.ndarray, z: PinchingProjectors, alpha: float,
                             min_eig_floor: float = 0.0,
                             degeneracy_rel_tol: float = qmath.DEGENERACY_REL_TOL,
                             ) -> tuple[float, np.ndarray]:
    """theta and its gradient alpha * D[x^(1/a)](pow_(a-1)(Z(rho^(1/a)))) - I.

    Requires a strictly positive spectrum (supply the perturbation's eigenvalue
    floor); raises otherwise with the offending eigenvalue.
    """
    alpha = check_alpha(alpha, lo=1.0)
    w, v = eigh(rho)
    floor = max(min_eig_floor, 0.0)
    wc = np.maximum(w, floor)
    if wc[0] <= 0.0:
        raise EntropyDomainError(
            f"gradient needs a positive spectrum; min eigenvalue {w[0]:.3e} with floor {floor:.1e}")
    tr = float(wc.sum())
    root = (v * np.power(wc, 1.0 / alpha)) @ dagger(v)
    pinched = pinch(z, root)
    theta = float(np.trace(mpow(pinched, alpha)).real) + 1.0 - tr
    mid = mpow(pinched, alpha - 1.0)
    dmap = qmath.frechet_pow_map(rho, 1.0 / alpha, degeneracy_rel_tol, floor)
    grad = alpha * dmap.apply(mid) - np.eye(rho.shape[0])
    return theta, 0.5 * (grad + dagger(grad))


def pinched_entropy(rho: np.ndarray, z: PinchingProjectors, alpha: float,
                    min_eig_floor: float = 0.0) -> float:
    """Renyi entropy of the pinching outcome given a purifying environment.

    Equals the sandwiched down-arrow entropy H_alpha(S|E) of the state obtained
    by coherently measuring a purification of ``rho`` with the projectors
    ``z``; extended to subnormalized rho with value 0 at rho = 0.
    """
    theta = pinched_power_trace(rho, z, alpha, min_eig_floor)
    if theta <= 0.0:
        raise EntropyDomainError(f"internal inconsistency: theta = {theta}")
    return -math.log2(theta) / (alpha - 1.0)


def pinched_entropy_vn(rho: np.ndarray, z: PinchingProjectors) -> float:
    """alpha -> 1 limit of ``pinched_entropy``: H(Z(rho)) - H(rho) on the support."""
    def _h(r: np.ndarray) -> float:
        w = np.linalg.eigvalsh(0.5 * (r + dagger(r)))
        w = w[w > 1e-15]
        return float(-(w * np.log2(w)).sum())

    return _h(pinch(z, rho)) - _h(rho)


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

PerturbationMode = Literal["depolarize-only", "identity-only", "combined"]


@dataclass(frozen=True)
class PerturbationSpec:
    """Affine maps pushing states away from the boundary of the PSD cone.

    ``depolarize-only`` mixes with Tr[rho] I/d (needs rho != 0 for a gradient),
    ``identity-only`` mixes with I/d, and ``combined`` composes both so the
    identity part only guards the rho ~ 0 corner.  ``bound_factor`` is the
    factor (1-eps) such that value/bound_factor still lower-bounds the
    unperturbed entropy.
    """

    eps1: float = 1e-12
    eps2: float = 1e-14
    mode: PerturbationMode = "combined"

    def __post_init__(self):
        if self.mode in ("depolarize-only", "combined") and not (0.0 < self.eps1 <= 1.0):
            raise ValueError(f"eps1 must lie in (0,1], got {self.eps1}")
        if self.mode in ("identity-only", "combined") and not (0.0 < self.eps2 <= 1.0):
            raise ValueError(f"eps2 must lie in (0,1], got {self.eps2}")

    @property
    def delta(self) -> float:
        if self.mode == "depolarize-only":
            return self.eps1
        if self.mode == "identity-only":
            return self.eps2
        return self.eps1 + self.eps2 - self.eps1 * self.eps2

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = rho.shape[0]
        tr = float(np.trace(rho).real)
        eye = np.eye(d) / d
        if self.mode == "depolarize-only":
            return (1.0 - self.eps1) * rho + self.eps1 * tr * eye
        if self.mode == "identity-only":
            return (1.0 - self.eps2) * rho + self.eps2 * eye
        out = (1.0 - self.eps1) * rho + self.eps1 * tr * eye
        return (1.0 - self.eps2) * out + self.eps2 * eye

    def linear_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Adjoint of the linear part, for gradient pullbacks."""
        d = y.shape[0]
        tr_term = np.trace(y).real * np.eye(d) / d
        if self.mode == "depolarize-only":
            return (1.0 - self.eps1) * y + self.eps1 * tr_term
        if self.mode == "identity-only":
            return (1.0 - self.eps2) * y
        return (1.0 - self.eps2) * ((1.0 - self.eps1) * y + self.eps1 * tr_term)

    def min_eig_floor(self, rho: np.ndarray) -> float:
        """Safe lower bound on the smallest eigenvalue after perturbing rho."""
        d = rho.shape[0]
        tr = max(float(np.trace(rho).real), 0.0)
        if self.mode == "depolarize-only":
            return self.eps1 * tr / d
        if self.mode == "identity-only":
            return self.eps2 / d
        return (1.0 - self.eps2) * self.eps1 * tr / d + self.eps2 / d


@dataclass(frozen=True)
class PerturbationResult:
    state: np.ndarray
    bound_factor: float
    min_eig_floor: float


def perturb(rho: np.ndarray, spec: PerturbationSpec) -> PerturbationResult:
    """Apply the perturbation; entropy(perturbed)/bound_factor lower-bounds entropy(rho)."""
    return PerturbationResult(
        state=spec.apply(rho),
        bound_factor=1.0 - spec.delta,
        min_eig_floor=spec.min_eig_floor(rho),
    )


@dataclass(frozen=True)
class ObjectiveContext:
    """Composition data for the entropy objective rho -> pinched_entropy(A(rho)).

    The affine chain is affine_pre (e.g. the Choi-to-state map), then the
    generation-round channel ``gmap``, then the perturbation.
    """

    gmap: KrausChannel
    zproj: PinchingProjectors
    alpha: float
    perturbation: PerturbationSpec = PerturbationSpec()
    affine_pre: LinearMapOnOperators | None = None

    def forward(self, rho: np.ndarray) -> tuple[np.ndarray, float]:
        x = self.affine_pre.apply(rho) if self.affine_pre is not None else rho
        x = self.gmap.apply(x)
        res = perturb(x, self.perturbation)
        return res.state, res.min_eig_floor

    def pullback(self, grad: np.ndarray) -> np.ndarray:
        g = self.perturbation.linear_adjoint(grad)
        g = self.gmap.adjoint(g)
        if self.affine_pre is not None:
            g = self.affine_pre.adjoint_apply(g)
        return g


def g_bar(rho: np.ndarray, ctx: ObjectiveContext) -> float:
    """Objective value pinched_entropy at the perturbed image of rho."""
    sigma, floor = ctx.forward(rho)
    return pinched_entropy(sigma, ctx.zproj, ctx.alpha, floor)


def grad_g_bar(rho: np.ndarray, ctx: ObjectiveContext) -> np.ndarray:
    """Gradient of ``g_bar`` with respect to rho (the full affine chain pulled back)."""
    return g_bar_and_grad(rho, ctx)[1]


def g_bar_and_grad(rho: np.ndarray, ctx: ObjectiveContext) -> tuple[float, np.ndarray]:
    sigma, floor = ctx.forward(rho)
    theta, gtheta = pinched_power_trace_grad(sigma, ctx.zproj, ctx.alpha, floor)
    if theta <= 0.0:
        raise EntropyDomainError(f"internal inconsistency: theta = {theta}")
    value = -math.log2(theta) / (ctx.alpha - 1.0)
    scale = -1.0 / ((ctx.alpha - 1.0) * LN2 * theta)
    return value, ctx.pullback(scale * gtheta)


# ---------------------------------------------------------------------------
# classical helpers
# ---------------------------------------------------------------------------

def log_mean_exp(p: np.ndarray, v: np.ndarray, zeta: float) -> float:
    """(1/zeta) log2 sum_c p(c) 2^(zeta v(c)), with min/mean/max limits at -inf/0/+inf."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if p.shape != v.shape:
        raise ValueError("probability and value vectors must have equal length")
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < -1e-12):
        raise ValueError("p must be a normalized probability vector")
    supp = p > 0.0
    if not np.any(supp):
        raise ValueError("p has empty support")
    if zeta == 0.0:
        return float((p[supp] * v[supp]).sum())
    if math.isinf(zeta):
        return float(v[supp].max() if zeta > 0 else v[supp].min())
    shift = float(v[supp].max() if zeta > 0 else v[supp].min())
    acc = float((p[supp] * np.exp2(zeta * (v[supp] - shift))).sum())
    return shift + math.log2(acc) / zeta


def kl_divergence(q: np.ndarray, nu: np.ndarray) -> float:
    """Classical relative entropy sum q log2(q/nu); +inf on support violation."""
    q = np.asarray(q, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if abs(q.sum() - 1.0) > 1e-9 or np.any(q < -1e-12):
        raise ValueError("q must be a normalized probability vector")
    total = 0.0
    for qc, nc in zip(q, nu):
        if qc <= 0.0:
            continue
        if nc <= 0.0:
            return math.inf
        total += qc * math.log2(qc / nc)
    return total


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)
