"""Dense Hermitian linear algebra and quantum-channel primitives.

Everything here works on plain complex numpy arrays.  States, POVM elements,
Choi matrices and cost operators are all square Hermitian matrices; channels
are lists of (possibly rectangular) Kraus operators.  All operations are pure
and safe to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-12
PSD_SLACK = 1e-10
DEGENERACY_REL_TOL = 1e-12


class QmathError(ValueError):
    """Raised on malformed operator input."""


class EighError(RuntimeError):
    """Eigendecomposition failed or did not reconstruct the input."""


def frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def is_hermitian(a: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(frob(a), 1.0)
    return frob(a - dagger(a)) <= tol * scale


def hermitian_operator(entries: np.ndarray, tol: float = HERMITICITY_TOL) -> np.ndarray:
    """Validate and symmetrize a dense Hermitian matrix.

    Rejects non-square input and input whose anti-Hermitian part exceeds
    ``tol`` relative Frobenius norm.  Returns the exactly Hermitian average
    (a + a^dag)/2 as complex128.
    """
    a = np.asarray(entries, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise QmathError(f"expected a square matrix, got shape {a.shape}")
    if not is_hermitian(a, tol):
        dev = frob(a - dagger(a)) / max(frob(a), 1.0)
        raise QmathError(f"matrix is not Hermitian (relative deviation {dev:.3e})")
    return 0.5 * (a + dagger(a))


def check_subnormalized_state(rho: np.ndarray, eig_slack: float = PSD_SLACK) -> np.ndarray:
    """Validate a subnormalized state: eigenvalues >= -eig_slack, trace <= 1 + eig_slack."""
    rho = hermitian_operator(rho)
    w = np.linalg.eigvalsh(rho)
    if w[0] < -eig_slack:
        raise QmathError(f"state has eigenvalue {w[0]:.3e} below -{eig_slack:.0e}")
    tr = float(np.trace(rho).real)
    if tr > 1.0 + eig_slack:
        raise QmathError(f"state has trace {tr} above 1")
    return rho


def eigh(h: np.ndarray, recon_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix with a reconstruction check.

    Returns (eigenvalues ascending, unitary of eigenvectors as columns).
    Raises :class:`EighError` with conditioning diagnostics if LAPACK fails
    or the reconstruction residual exceeds ``recon_tol`` relative Frobenius.
    """
    h = 0.5 * (h + dagger(h))
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise EighError(
            f"eigh did not converge for dim {h.shape[0]}, "
            f"norm {frob(h):.3e}: {exc}"
        ) from exc
    scale = max(frob(h), 1.0)
    resid = frob((v * w) @ dagger(v) - h)
    if resid > recon_tol * scale:
        raise EighError(
            f"eigh reconstruction residual {resid:.3e} exceeds {recon_tol:.0e} "
            f"(dim {h.shape[0]}, spread {w[-1] - w[0]:.3e})"
        )
    return w, v


def mpow(a: np.ndarray, p: float, min_eig_floor: float = 0.0) -> np.ndarray:
    """Hermitian matrix power a^p via eigendecomposition.

    For non-integer powers the input must be (numerically) PSD; eigenvalues
    below ``max(min_eig_floor, 0)`` are replaced by the floor before powering.
    Negative powers with a zero eigenvalue and zero floor raise.
    """
    if not np.isfinite(p):
        raise QmathError("power must be finite")
    w, v = eigh(a)
    floor = max(min_eig_floor, 0.0)
    wc = np.maximum(w, floor)
    if p < 0.0 and np.any(wc == 0.0):
        raise QmathError("negative power of a singular matrix with zero floor")
    wp = np.power(wc, p)
    return (v * wp) @ dagger(v)


@dataclass(frozen=True)
class LinearMapOnOperators:
    """A linear map on Hermitian operators together with its adjoint.

    ``apply``/``adjoint_apply`` must satisfy <A, apply(B)> = <adjoint_apply(A), B>
    in the Hilbert-Schmidt inner product.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    adjoint_apply: Callable[[np.ndarray], np.ndarray]

    def compose(self, inner: "LinearMapOnOperators") -> "LinearMapOnOperators":
        """self after inner: x -> self(inner(x))."""
        return LinearMapOnOperators(
            apply=lambda x: self.apply(inner.apply(x)),
            adjoint_apply=lambda y: inner.adjoint_apply(self.adjoint_apply(y)),
        )


def sandwich_map(k: np.ndarray) -> LinearMapOnOperators:
    """The CP map X -> K X K^dag with adjoint Y -> K^dag Y K."""
    kd = dagger(k)
    return LinearMapOnOperators(
        apply=lambda x: k @ x @ kd,
        adjoint_apply=lambda y: kd @ y @ k,
    )


class FrechetPowerMap(LinearMapOnOperators):
    """Derivative of the matrix power x -> x^beta at a PSD base point.

    Implements rho -> sum_ij |i><i| rho |j><j| r_ij with the divided-difference
    coefficients r_ij, averaging the derivative on (relatively) degenerate
    eigenvalue pairs.  Self-adjoint and Hermitian preserving.
    """

    def __init__(self, base: np.ndarray, beta: float, rel_tol: float = DEGENERACY_REL_TOL,
                 min_eig_floor: float = 0.0):
        w, v = eigh(base)
        wc = np.maximum(w, max(min_eig_floor, 0.0))
        if beta < 1.0 and np.any(wc == 0.0):
            # the derivative beta*x^(beta-1) diverges at 0
            raise QmathError(
                "Frechet power map needs strictly positive spectrum for beta < 1; "
                "supply an eigenvalue floor from the perturbation in use"
            )
        li = wc[:, None]
        lj = wc[None, :]
        degenerate = np.abs(li - lj) <= rel_tol * np.maximum(np.abs(li), np.abs(lj))
        deriv = beta * np.power(wc, beta - 1.0)
        avg = 0.5 * (deriv[:, None] + deriv[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            fd = (np.power(li, beta) - np.power(lj, beta)) / (li - lj)
        coeff = np.where(degenerate, avg, fd)
        self.eigenvalues = wc
        self.basis = v
        self.coefficients = coeff

        def _apply(x: np.ndarray) -> np.ndarray:
            xe = dagger(v) @ x @ v
            return v @ (coeff * xe) @ dagger(v)

        super().__init__(apply=_apply, adjoint_apply=_apply)


def frechet_pow_map(base: np.ndarray, beta: float, rel_tol: float = DEGENERACY_REL_TOL,
                    min_eig_floor: float = 0.0) -> FrechetPowerMap:
    return FrechetPowerMap(base, beta, rel_tol, min_eig_floor)


def tensor(*ops: np.ndarray) -> np.ndarray:
    out = np.asarray(ops[0], dtype=np.complex128)
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def partial_trace(a: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Trace out all subsystems not in ``keep`` from an operator on a tensor space.

    ``dims`` lists the subsystem dimensions in tensor order; their product must
    equal the side of ``a``.  ``keep`` holds indices of retained subsystems.
    """
    dims = list(dims)
    n = len(dims)
    if int(np.prod(dims)) != a.shape[0] or a.shape[0] != a.shape[1]:
        raise QmathError(f"dims {dims} incompatible with operator of shape {a.shape}")
    keep = sorted(keep)
    if any(k < 0 or k >= n for k in keep):
        raise QmathError(f"keep indices {keep} out of range for {n} subsystems")
    t = a.reshape(dims + dims)
    # contract traced-out row/column axes pairwise, from the back to keep axis
    # numbering stable
    traced = [i for i in range(n) if i not in keep]
    for i in reversed(traced):
        t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def apply_choi(j: np.ndarray, rho_in: np.ndarray, dim_in: int, dim_out: int) -> np.ndarray:
    """Channel action from its Choi matrix: Tr_in[(rho^T x I_out) J].

    ``j`` lives on input (x) output with the unnormalized Choi convention
    Tr_out J = I_in for trace-preserving channels.
    """
    if j.shape != (dim_in * dim_out, dim_in * dim_out):
        raise QmathError(f"Choi matrix shape {j.shape} != {(dim_in * dim_out,) * 2}")
    if rho_in.shape != (dim_in, dim_in):
        raise QmathError(f"input state shape {rho_in.shape} != {(dim_in, dim_in)}")
    j4 = j.reshape(dim_in, dim_out, dim_in, dim_out)
    return np.einsum("ji,jbic->bc", rho_in, j4)


def choi_from_kraus(kraus_ops: Sequence[np.ndarray], dim_in: int) -> np.ndarray:
    """Unnormalized Choi matrix sum_ij |i><j| x E(|i><j|) of a Kraus channel."""
    dim_out = np.asarray(kraus_ops[0]).shape[0]
    j = np.zeros((dim_in * dim_out, dim_in * dim_out), dtype=np.complex128)
    for k in kraus_ops:
        k = np.asarray(k, dtype=np.complex128)
        # J_{(i,b),(j,c)} = K[b,i] conj(K[c,j])
        j += np.einsum("bi,cj->ibjc", k, k.conj()).reshape(
            dim_in * dim_out, dim_in * dim_out)
    return j


@dataclass(frozen=True)
class KrausChannel:
    """A completely positive trace-nonincreasing map given by Kraus operators."""

    kraus_ops: tuple[np.ndarray, ...]
    slack: float = PSD_SLACK

    def __init__(self, kraus_ops: Sequence[np.ndarray], slack: float = PSD_SLACK):
        ops = tuple(np.asarray(k, dtype=np.complex128) for k in kraus_ops)
        if not ops:
            raise QmathError("a Kraus channel needs at least one operator")
        din = ops[0].shape[1]
        dout = ops[0].shape[0]
        for k in ops:
            if k.shape != (dout, din):
                raise QmathError("Kraus operators must share input and output dimensions")
        gram = sum(dagger(k) @ k for k in ops)
        wmax = float(np.linalg.eigvalsh(gram)[-1])
        if wmax > 1.0 + slack:
            raise QmathError(f"channel is trace increasing: max eig of sum K^dag K = {wmax}")
        object.__setattr__(self, "kraus_ops", ops)
        object.__setattr__(self, "slack", slack)

    @property
    def input_dim(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros((self.output_dim, self.output_dim), dtype=np.complex128)
        for k in self.kraus_ops:
            out += k @ rho @ dagger(k)
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        out = np.zeros((self.input_dim, self.input_dim), dtype=np.complex128)
        for k in self.kraus_ops:
            out += dagger(k) @ y @ k
        return out

    def as_map(self) -> LinearMapOnOperators:
        return LinearMapOnOperators(apply=self.apply, adjoint_apply=self.adjoint)

    def choi(self) -> np.ndarray:
        return choi_from_kraus(self.kraus_ops, self.input_dim)


def kraus_apply(channel: KrausChannel, rho: np.ndarray) -> np.ndarray:
    if rho.shape != (channel.input_dim, channel.input_dim):
        raise QmathError(
            f"state dim {rho.shape[0]} != channel input dim {channel.input_dim}")
    return channel.apply(rho)


@dataclass(frozen=True)
class PinchingProjectors:
    """A complete family of orthogonal projectors defining a pinching channel."""

    projectors: tuple[np.ndarray, ...]
    tol: float = PSD_SLACK

    def __init__(self, projectors: Sequence[np.ndarray], tol: float = PSD_SLACK):
        projs = tuple(hermitian_operator(p, tol=1e-9) for p in projectors)
        dim = projs[0].shape[0]
        acc = np.zeros((dim, dim), dtype=np.complex128)
        for i, p in enumerate(projs):
            if frob(p @ p - p) > tol * max(1.0, frob(p)):
                raise QmathError(f"projector {i} is not idempotent")
            for q in projs[i + 1:]:
                if frob(p @ q) > tol * max(1.0, frob(p) * frob(q)):
                    raise QmathError("projectors are not mutually orthogonal")
            acc += p
        if frob(acc - np.eye(dim)) > tol * dim:
            raise QmathError("projectors do not sum to the identity")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "tol", tol)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def __len__(self) -> int:
        return len(self.projectors)


def pinch(z: PinchingProjectors, h: np.ndarray) -> np.ndarray:
    """The pinching channel sum_j Z_j H Z_j; idempotent and unital."""
    if h.shape != (z.dim, z.dim):
        raise QmathError(f"operator dim {h.shape[0]} != projector dim {z.dim}")
    out = np.zeros_like(h, dtype=np.complex128)
    for p in z.projectors:
        out += p @ h @ p
    return out


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + dagger(a))


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def random_cptp_kraus(rng: np.random.Generator, dim_in: int, dim_out: int,
                      env: int | None = None) -> list[np.ndarray]:
    """Random CPTP channel via a Haar-ish Stinespring isometry."""
    env = env or dim_in
    g = rng.normal(size=(dim_out * env, dim_in)) + 1j * rng.normal(size=(dim_out * env, dim_in))
    q, _ = np.linalg.qr(g)
    v = q[:, :dim_in]  # isometry: V^dag V = I_in
    return [v.reshape(dim_out, env, dim_in)[:, e, :] for e in range(env)]
