"""Concrete protocol builders, conditional POVMs, and honest-channel statistics.

A :class:`ProtocolSpec` collects everything the solver needs about one
prepare-and-measure protocol: per-photon-block signal states and POVMs, the
generation-round channel and key-map projectors, the announcement alphabet,
intensity tables for decoy operation, and hooks for the honest-channel model.

Bob's spaces follow one layout everywhere: dimension 0 is the no-detection
outcome, dimensions 1 and 2 carry the single-photon qubit, any further
dimensions are squasher flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import qmath
from .qmath import KrausChannel, PinchingProjectors, dagger, tensor


class ProtocolError(ValueError):
    """Raised on inconsistent protocol configuration."""


# canonical qubit signal vectors (polarization amplitudes)
SIGNAL_VECTORS = {
    "Z0": np.array([1.0, 0.0], dtype=complex),
    "Z1": np.array([0.0, 1.0], dtype=complex),
    "X0": np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0),
    "X1": np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0),
}


@dataclass(frozen=True)
class HonestChannelParams:
    """Loss in dB, depolarizing weight, and misalignment rotation angle."""

    loss_db: float = 0.0
    depol: float = 0.0
    misalign_angle: float = 0.0

    def __post_init__(self):
        if self.loss_db < 0.0 or not (0.0 <= self.depol <= 1.0):
            raise ProtocolError("invalid honest-channel parameters")

    @property
    def eta(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)


@dataclass
class Block:
    """One photon-number block: signal states, POVMs, and key-map data."""

    label: int | None
    dim_a: int
    dim_in: int
    xi_test: np.ndarray | None     # (dim_a, dim_in) amplitudes of the test state
    xi_gen: np.ndarray | None
    alice_test_povm: list[np.ndarray] | None
    p_gen: float = 0.0             # weight of this block in the entropy term
    gmap: KrausChannel | None = None
    zproj: PinchingProjectors | None = None
    omega_test: float = 0.0        # phase mode: block weight omega_{m|test}
    eps_m: float = 0.0             # phase mode: statistics shift for this block


@dataclass(frozen=True)
class SquashConstraint:
    """Subspace-weight constraint of a flag-state squasher.

    Enforces sum_{c in flag_outcomes} Psi_c[J] >= theta1 (theta2 -
    Tr[(M^A x Pi^B) chi_t(J)]) on every Choi block, with Pi^B the projector
    onto the listed Bob dimensions.  The constants come from an external
    subspace bound and are plain configuration inputs here.
    """

    theta1: float
    theta2: float
    flag_outcomes: tuple[int, ...]     # indices into the per-block (a, b) grid
    alice_op_index: int = 0
    bob_subspace_dims: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self):
        if not (0.0 <= self.theta1 and 0.0 <= self.theta2 <= 1.0):
            raise ProtocolError("squash constants outside their valid range")


@dataclass
class PhaseData:
    """Imperfection parameters attached to a phase-mode protocol."""

    quality_q: float
    n_a: int
    eps_prob: float
    eps_full: float
    omega_gen: list[float]         # omega_{m|gen} per block


@dataclass
class ProtocolSpec:
    name: str
    gamma: float
    mode: str                      # "plain" | "decoy" | "phase"
    bob_povm: list[np.ndarray]
    bob_labels: list[str]
    blocks: list[Block]
    test_signals: list[str]        # Alice announcement labels in test rounds
    gen_signals: list[str]
    d_s: int = 3                   # key alphabet incl. the sifted-out symbol
    intensities: dict[str, float] | None = None
    signal_intensity: str | None = None
    p_mu_test: dict[str, float] | None = None
    p_a_test: np.ndarray | None = None   # p(a|m, test); constant across blocks
    n_cons: int = 0
    squash: SquashConstraint | None = None
    phase: PhaseData | None = None

    @property
    def bob_dim(self) -> int:
        return self.bob_povm[0].shape[0]

    @property
    def n_test_a(self) -> int:
        return len(self.test_signals)

    @property
    def n_bob(self) -> int:
        return len(self.bob_povm)

    def test_labels(self) -> list[str]:
        """Announcement alphabet (without the generation flag), solver order."""
        if self.mode == "plain":
            return [f"{a}&{b}" for a in self.test_signals for b in self.bob_labels]
        if self.mode == "decoy":
            return [f"{mu}&{a}&{b}" for mu in self.intensities
                    for a in self.test_signals for b in self.bob_labels]
        # phase mode: Alice's announcement is the joint (signal, intensity)
        return [f"{a}&{mu}&{b}" for a in self.test_signals for mu in self.intensities
                for b in self.bob_labels]

    def validate(self) -> None:
        dim_b = self.bob_dim
        acc = sum(self.bob_povm)
        if qmath.frob(acc - np.eye(dim_b)) > 1e-9 * dim_b:
            raise ProtocolError("Bob POVM does not sum to the identity")
        for blk in self.blocks:
            if blk.alice_test_povm is not None:
                tot = sum(blk.alice_test_povm)
                w = np.linalg.eigvalsh(tot)
                # conditional POVMs sum to a projector on their support
                if np.any((w > 1e-9) & (np.abs(w - 1.0) > 1e-9)):
                    raise ProtocolError(
                        f"block {blk.label}: conditional test POVM sum is not a projector")
            for xi in (blk.xi_test, blk.xi_gen):
                if xi is not None and abs(np.linalg.norm(xi) - 1.0) > 1e-9:
                    raise ProtocolError(f"block {blk.label}: signal state not normalized")
            if blk.gmap is not None:
                gram = sum(dagger(k) @ k for k in blk.gmap.kraus_ops)
                if np.linalg.eigvalsh(gram)[-1] > 1.0 + 1e-9:
                    raise ProtocolError(f"block {blk.label}: channel is trace increasing")


# ---------------------------------------------------------------------------
# shared operator constructions
# ---------------------------------------------------------------------------

def qubit_bob_povm(gamma: float) -> tuple[list[np.ndarray], list[str]]:
    """Three-dimensional Bob POVM: loss at dim 0, Z/X measurements on the qubit."""
    p_z = 1.0 - gamma
    p_x = gamma
    z0 = np.diag([0.0, 1.0, 0.0]).astype(complex)
    z1 = np.diag([0.0, 0.0, 1.0]).astype(complex)
    x0 = np.zeros((3, 3), dtype=complex)
    x0[1:, 1:] = 0.5 * np.array([[1, 1], [1, 1]])
    x1 = np.zeros((3, 3), dtype=complex)
    x1[1:, 1:] = 0.5 * np.array([[1, -1], [-1, 1]])
    perp = np.diag([1.0, 0.0, 0.0]).astype(complex)
    povm = [p_z * z0, p_z * z1, p_x * x0, p_x * x1, perp]
    return povm, ["Z0", "Z1", "X0", "X1", "perp"]


def flag_padded_bob_povm(gamma: float, bases: str) -> tuple[list[np.ndarray], list[str]]:
    """Flag-state-squashed Bob POVM for passive detection ('ZX' or 'ZXY')."""
    p_z = 1.0 - gamma
    if bases == "ZX":
        probs = {"Z": p_z, "X": gamma}
    elif bases == "ZXY":
        probs = {"Z": p_z, "X": gamma / 2.0, "Y": gamma / 2.0}
    else:
        raise ProtocolError(f"unsupported basis set {bases!r}")
    qubit_ops = {
        "Z0": np.diag([1.0, 0.0]), "Z1": np.diag([0.0, 1.0]),
        "X0": 0.5 * np.array([[1, 1], [1, 1]]), "X1": 0.5 * np.array([[1, -1], [-1, 1]]),
        "Y0": 0.5 * np.array([[1, -1j], [1j, 1]]), "Y1": 0.5 * np.array([[1, 1j], [-1j, 1]]),
    }
    labels = [f"{b}{y}" for b in bases for y in (0, 1)]
    n_flags = len(labels) + 1          # one flag per sifted outcome plus multi-click
    dim = 3 + n_flags
    povm = []
    for i, lab in enumerate(labels):
        m = np.zeros((dim, dim), dtype=complex)
        m[1:3, 1:3] = probs[lab[0]] * qubit_ops[lab]
        m[3 + i, 3 + i] = 1.0
        povm.append(m)
    mult = np.zeros((dim, dim), dtype=complex)
    mult[dim - 1, dim - 1] = 1.0
    povm.append(mult)
    perp = np.zeros((dim, dim), dtype=complex)
    perp[0, 0] = 1.0
    povm.append(perp)
    return povm, labels + ["mult", "perp"]


def key_copy_kraus(gen_povm: list[np.ndarray], bob_factor: np.ndarray) -> KrausChannel:
    """Generation-round channel: copy the key bit to a fresh register.

    K = sum_s |s> (x) sqrt(M_s^gen) (x) bob_factor, so the output register
    order is (key, Alice remnant, Bob).  When every sqrt(M_s) is rank one the
    Alice remnant is dropped.
    """
    n = len(gen_povm)
    roots = [qmath.mpow(m, 0.5) for m in gen_povm]
    rank1 = all(np.linalg.matrix_rank(r, tol=1e-10) == 1 for r in roots)
    terms = []
    for s, r in enumerate(roots):
        ket = np.zeros((n, 1), dtype=complex)
        ket[s, 0] = 1.0
        if rank1:
            w, v = qmath.eigh(r)
            vec = math.sqrt(max(w[-1], 0.0)) * v[:, -1].conj()
            terms.append(tensor(ket @ vec[None, :], bob_factor))
        else:
            terms.append(tensor(ket, r, bob_factor))
    return KrausChannel([sum(terms)])


def key_pinching(n_key: int, rest_dim: int) -> PinchingProjectors:
    projs = []
    for s in range(n_key):
        p = np.zeros((n_key, n_key), dtype=complex)
        p[s, s] = 1.0
        projs.append(tensor(p, np.eye(rest_dim)))
    return PinchingProjectors(projs)


def block_test_ops(block: Block, bob_povm: list[np.ndarray]) -> list[np.ndarray]:
    """Hermitian cost operators T_(a,b) on the block's Choi space.

    Psi_m[J]_(a,b) = Tr[T_(a,b) J] reproduces Tr[(M_a x M_b) chi_t(J)].
    """
    w = np.kron(block.xi_test, np.eye(bob_povm[0].shape[0]))
    ops = []
    for ma in block.alice_test_povm:
        for mb in bob_povm:
            ops.append(dagger(w) @ tensor(ma, mb) @ w)
    return ops


def chi_map(xi: np.ndarray, dim_b: int) -> qmath.LinearMapOnOperators:
    """J on (A' x B) -> rho on (A x B) for the source-replaced signal state xi."""
    w = np.kron(xi, np.eye(dim_b))
    return qmath.sandwich_map(w)


def conditional_povm(povm_subset: list[np.ndarray], partition_op: np.ndarray,
                     tol: float = 1e-9) -> list[np.ndarray]:
    """Condition POVM elements on their partition via the pseudo-inverse root.

    Returns sqrt(pinv(L)) M sqrt(pinv(L)) for each element; the results are PSD
    and sum to the projector onto the support of the partition operator.
    """
    lam = qmath.hermitian_operator(partition_op, tol=1e-9)
    w, v = qmath.eigh(lam)
    wmax = max(float(w[-1]), 0.0)
    mask = w > tol * max(wmax, 1.0)
    if not np.any(mask):
        raise ProtocolError("partition operator has empty support")
    inv_root = (v[:, mask] * np.power(w[mask], -0.5)) @ dagger(v[:, mask])
    proj = v[:, mask] @ dagger(v[:, mask])
    out = []
    for m in povm_subset:
        outside = float(np.trace((np.eye(lam.shape[0]) - proj) @ m).real)
        if outside > tol * max(float(np.trace(m).real), 1.0):
            raise ProtocolError(
                f"POVM element has weight {outside:.2e} outside the partition support")
        out.append(qmath.hermitian_operator(inv_root @ m @ inv_root, tol=1e-8))
    total = sum(out)
    if qmath.frob(total - proj) > 1e-8 * lam.shape[0]:
        raise ProtocolError("conditional POVM does not sum to the support projector")
    return out


# ---------------------------------------------------------------------------
# protocol builders
# ---------------------------------------------------------------------------

def build_qubit_bb84(gamma: float) -> ProtocolSpec:
    """Single-photon BB84: Z basis generates key, X basis tests, loss flagged.

    Basis probabilities are p_z = 1 - gamma and p_x = gamma for both parties.
    """
    if not (0.0 < gamma < 1.0):
        raise ProtocolError("gamma must lie in (0,1)")
    bob_povm, bob_labels = qubit_bob_povm(gamma)
    p_z = 1.0 - gamma
    bell = np.eye(2, dtype=complex) / math.sqrt(2.0)
    x_povm = [np.outer(SIGNAL_VECTORS[a], SIGNAL_VECTORS[a].conj()) for a in ("X0", "X1")]
    keep_qubit = np.zeros((2, 3), dtype=complex)
    keep_qubit[0, 1] = keep_qubit[1, 2] = 1.0
    gmap = KrausChannel([math.sqrt(p_z) * np.kron(np.eye(2), keep_qubit)])
    block = Block(
        label=None, dim_a=2, dim_in=2, xi_test=bell, xi_gen=bell,
        alice_test_povm=x_povm, p_gen=1.0, gmap=gmap, zproj=key_pinching(2, 2),
    )
    spec = ProtocolSpec(
        name="qubit-bb84", gamma=gamma, mode="plain",
        bob_povm=bob_povm, bob_labels=bob_labels, blocks=[block],
        test_signals=["X0", "X1"], gen_signals=["Z0", "Z1"],
    )
    spec.validate()
    return spec


def _bb84_decoy_blocks(gamma: float, mu_s: float, dim_a: int,
                       gmap: KrausChannel, zproj: PinchingProjectors,
                       n_ent: int) -> list[Block]:
    """Vacuum and single-photon blocks shared by the decoy BB84 variants."""
    if n_ent != 1:
        raise ProtocolError("decoy BB84 builders support n_ent = 1")
    if dim_a == 2:
        xi_t0 = np.array([[1.0], [0.0]], dtype=complex)
        xi_g0 = np.array([[1.0], [1.0]], dtype=complex) / math.sqrt(2.0)
        xi_t1 = np.eye(2, dtype=complex) / math.sqrt(2.0)
        xi_g1 = np.eye(2, dtype=complex) / math.sqrt(2.0)
        test_povm = [np.outer(SIGNAL_VECTORS[a], SIGNAL_VECTORS[a].conj())
                     for a in ("X0", "X1")]
    else:
        # four-dimensional Alice register: Z0, Z1, X0, X1 in order
        xi_t0 = np.array([[0.0], [0.0], [1.0], [1.0]], dtype=complex) / math.sqrt(2.0)
        xi_g0 = np.array([[1.0], [1.0], [0.0], [0.0]], dtype=complex) / math.sqrt(2.0)
        xi_t1 = np.zeros((4, 2), dtype=complex)
        xi_t1[2] = SIGNAL_VECTORS["X0"] / math.sqrt(2.0)
        xi_t1[3] = SIGNAL_VECTORS["X1"] / math.sqrt(2.0)
        xi_g1 = np.zeros((4, 2), dtype=complex)
        xi_g1[0] = SIGNAL_VECTORS["Z0"] / math.sqrt(2.0)
        xi_g1[1] = SIGNAL_VECTORS["Z1"] / math.sqrt(2.0)
        test_povm = [np.diag(np.eye(4)[2]).astype(complex),
                     np.diag(np.eye(4)[3]).astype(complex)]
    pois = [math.exp(-mu_s), mu_s * math.exp(-mu_s)]
    return [
        Block(label=0, dim_a=dim_a, dim_in=1, xi_test=xi_t0, xi_gen=xi_g0,
              alice_test_povm=test_povm, p_gen=pois[0], gmap=gmap, zproj=zproj),
        Block(label=1, dim_a=dim_a, dim_in=2, xi_test=xi_t1, xi_gen=xi_g1,
              alice_test_povm=test_povm, p_gen=pois[1], gmap=gmap, zproj=zproj),
    ]


def _decoy_tables(mu_s: float, decoy_intensities: list[float]) -> tuple[dict, dict]:
    mus = [mu_s] + list(decoy_intensities)
    if any(m <= 0 for m in mus) or len(set(mus)) != len(mus):
        raise ProtocolError("intensities must be positive and distinct")
    labels = ["mu_s"] + [f"mu_{i + 2}" for i in range(len(decoy_intensities))]
    intensities = dict(zip(labels, mus))
    p_mu = {lab: 1.0 / len(mus) for lab in labels}
    return intensities, p_mu


def build_active_decoy_bb84(gamma: float, mu_s: float,
                            decoy_intensities: list[float],
                            n_cons: int = 10) -> ProtocolSpec:
    """Decoy-state BB84 with an active receiver reduced by the qubit squasher."""
    if not (0.0 < gamma < 1.0):
        raise ProtocolError("gamma must lie in (0,1)")
    bob_povm, bob_labels = qubit_bob_povm(gamma)
    p_z = 1.0 - gamma
    keep_qubit = np.zeros((2, 3), dtype=complex)
    keep_qubit[0, 1] = keep_qubit[1, 2] = 1.0
    gmap = KrausChannel([math.sqrt(p_z) * np.kron(np.eye(2), keep_qubit)])
    blocks = _bb84_decoy_blocks(gamma, mu_s, 2, gmap, key_pinching(2, 2), n_ent=1)
    intensities, p_mu = _decoy_tables(mu_s, decoy_intensities)
    spec = ProtocolSpec(
        name="active-decoy-bb84", gamma=gamma, mode="decoy",
        bob_povm=bob_povm, bob_labels=bob_labels, blocks=blocks,
        test_signals=["X0", "X1"], gen_signals=["Z0", "Z1"],
        intensities=intensities, signal_intensity="mu_s", p_mu_test=p_mu,
        p_a_test=np.array([0.5, 0.5]), n_cons=n_cons,
    )
    spec.validate()
    return spec


def build_passive_decoy_bb84(gamma: float, mu_s: float,
                             decoy_intensities: list[float],
                             squash_constants: tuple[float, float] | None = None,
                             n_cons: int = 10) -> ProtocolSpec:
    """Decoy-state BB84 with a passive receiver behind a flag-state squasher."""
    if not (0.0 < gamma < 1.0):
        raise ProtocolError("gamma must lie in (0,1)")
    bob_povm, bob_labels = flag_padded_bob_povm(gamma, "ZX")
    p_z = 1.0 - gamma
    dim_b = bob_povm[0].shape[0]
    bob_factor = np.zeros((dim_b, dim_b), dtype=complex)
    bob_factor[1, 1] = bob_factor[2, 2] = math.sqrt(p_z)
    bob_factor[3, 3] = bob_factor[4, 4] = 1.0       # Z flags pass unweighted
    pick = np.zeros((2, 4), dtype=complex)
    pick[0, 0] = pick[1, 1] = 1.0
    gmap = KrausChannel([np.kron(pick, bob_factor)])
    blocks = _bb84_decoy_blocks(gamma, mu_s, 4, gmap, key_pinching(2, dim_b), n_ent=1)
    intensities, p_mu = _decoy_tables(mu_s, decoy_intensities)
    squash = None
    if squash_constants is not None:
        theta1, theta2 = squash_constants
        # flag and multi-click outcomes of either test signal witness the
        # weight outside the qubit subspace
        n_b = len(bob_povm)
        flag_idx = tuple(a * n_b + b for a in range(2)
                         for b, lab in enumerate(bob_labels)
                         if lab in ("X0", "X1", "mult"))
        squash = SquashConstraint(theta1=theta1, theta2=theta2,
                                  flag_outcomes=flag_idx, alice_op_index=0,
                                  bob_subspace_dims=(0, 1, 2))
    spec = ProtocolSpec(
        name="passive-decoy-bb84", gamma=gamma, mode="decoy",
        bob_povm=bob_povm, bob_labels=bob_labels, blocks=blocks,
        test_signals=["X0", "X1"], gen_signals=["Z0", "Z1"],
        intensities=intensities, signal_intensity="mu_s", p_mu_test=p_mu,
        p_a_test=np.array([0.5, 0.5]), n_cons=n_cons, squash=squash,
    )
    spec.validate()
    return spec


def build_decoy_46(gamma: float, mu_s: float, mu_2: float, quality_q: float,
                   n_a: int = 12, n_cons: int = 3) -> ProtocolSpec:
    """Decoy 4-6 protocol: BB84 signal states, passive three-basis receiver.

    Alice's block states and POVMs are constructed numerically from the
    phase-imperfection source model with quality factor ``quality_q`` and
    photon cutoff ``n_a``; see :func:`renyiqkd.decoy.phase_blocks`.
    """
    from . import decoy as decoy_mod

    bob_povm, bob_labels = flag_padded_bob_povm(gamma, "ZXY")
    base = ProtocolSpec(
        name="decoy-46", gamma=gamma, mode="decoy",
        bob_povm=bob_povm, bob_labels=bob_labels, blocks=[],
        test_signals=["X0", "X1"], gen_signals=["Z0", "Z1"],
        intensities={"mu_s": mu_s, "mu_2": mu_2}, signal_intensity="mu_s",
        p_mu_test={"mu_s": 0.5, "mu_2": 0.5},
        p_a_test=np.array([0.5, 0.5]), n_cons=n_cons,
    )
    return decoy_mod.with_phase_model(base, quality_q, n_a, n_cons=n_cons)


# ---------------------------------------------------------------------------
# honest channel model
# ---------------------------------------------------------------------------

def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def honest_qubit_kraus(channel: HonestChannelParams, dim_b: int) -> list[np.ndarray]:
    """Single-photon honest channel qubit -> Bob: loss, depolarizing, rotation."""
    eta = channel.eta
    p = channel.depol
    rot = _rotation(channel.misalign_angle)
    emb = np.zeros((dim_b, 2), dtype=complex)
    emb[1, 0] = emb[2, 1] = 1.0
    perp = np.zeros((dim_b, 1), dtype=complex)
    perp[0, 0] = 1.0
    kraus: list[np.ndarray] = []
    # depolarizing via Pauli twirl, then rotation, then lossy embedding
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]),
              np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]])]
    weights = [1.0 - 3.0 * p / 4.0, p / 4.0, p / 4.0, p / 4.0]
    for w, sig in zip(weights, paulis):
        if w <= 0.0:
            continue
        kraus.append(math.sqrt(eta * w) * (emb @ rot @ sig))
    # the lost branch maps everything to the no-detection dimension
    kraus.append(math.sqrt(1.0 - eta) * (perp @ np.array([[1.0, 0.0]])))
    kraus.append(math.sqrt(1.0 - eta) * (perp @ np.array([[0.0, 1.0]])))
    return kraus


def honest_choi_block(block: Block, channel: HonestChannelParams, dim_b: int) -> np.ndarray:
    """A feasible honest Choi matrix for one block (witness construction)."""
    perp = np.zeros((dim_b, dim_b), dtype=complex)
    perp[0, 0] = 1.0
    if block.dim_in == 1:
        return perp.copy()
    if block.dim_in == 2:
        ch = KrausChannel(honest_qubit_kraus(channel, dim_b))
        return ch.choi()
    # higher blocks (phase mode): everything lost is always feasible
    return np.kron(np.eye(block.dim_in), perp)


def honest_yields(protocol: ProtocolSpec, channel: HonestChannelParams,
                  m_max: int) -> np.ndarray:
    """Per-photon-number honest outcome tables Y[m, a, b] for the test signals.

    Vacuum never fires; with m photons the detector fires with probability
    1 - (1-eta)^m and the surviving light behaves like a single photon through
    the depolarizing and misalignment channel (no dark counts, no honest
    multi-clicks).
    """
    eta = channel.eta
    single = KrausChannel(honest_qubit_kraus(replace(channel, loss_db=0.0),
                                             protocol.bob_dim))
    n_a = len(protocol.test_signals)
    n_b = len(protocol.bob_povm)
    perp_idx = protocol.bob_labels.index("perp")
    cond = np.zeros((n_a, n_b))
    for ia, a in enumerate(protocol.test_signals):
        vec = SIGNAL_VECTORS[a]
        out = single.apply(np.outer(vec, vec.conj()))
        for ib, mb in enumerate(protocol.bob_povm):
            cond[ia, ib] = float(np.trace(mb @ out).real)
    y = np.zeros((m_max + 1, n_a, n_b))
    y[0, :, perp_idx] = 1.0
    for m in range(1, m_max + 1):
        fire = 1.0 - (1.0 - eta) ** m
        y[m] = fire * cond
        y[m, :, perp_idx] += 1.0 - fire
    return y


def honest_statistics(protocol: ProtocolSpec, channel: HonestChannelParams,
                      ) -> tuple[np.ndarray, float, dict]:
    """Expected announcement frequencies, sifting probability, and error rates.

    Returns (q_hon over the full alphabet with the generation flag last,
    sift probability, diagnostics with conditional error rates).
    """
    gamma = protocol.gamma
    if protocol.mode == "plain":
        blk = protocol.blocks[0]
        ch = KrausChannel(honest_qubit_kraus(channel, protocol.bob_dim))
        j = ch.choi()
        ops = block_test_ops(blk, protocol.bob_povm)
        nu = np.array([float(np.trace(t @ j).real) for t in ops])
        q = np.concatenate([gamma * nu, [1.0 - gamma]])
        gen_joint = _gen_round_joint_plain(protocol, ch)
    else:
        m_max = 80
        y = honest_yields(protocol, channel, m_max)
        p_a = protocol.p_a_test
        rows = []
        if protocol.mode == "decoy":
            for mu in protocol.intensities.values():
                pois = _poisson_vector(mu, m_max)
                cond = np.einsum("m,a,mab->ab", pois, p_a, y).reshape(-1)
                rows.append(cond)
            nu = np.concatenate([protocol.p_mu_test[lab] * r for lab, r in
                                 zip(protocol.intensities, rows)])
        else:
            p_mu = np.array(list(protocol.p_mu_test.values()))
            for ia in range(len(protocol.test_signals)):
                for imu, mu in enumerate(protocol.intensities.values()):
                    pois = _poisson_vector(mu, m_max)
                    cond = np.einsum("m,mb->b", pois, y[:, ia, :])
                    rows.append(p_a[ia] * p_mu[imu] * cond)
            nu = np.concatenate(rows)
        q = np.concatenate([gamma * nu, [1.0 - gamma]])
        gen_joint = _gen_round_joint_decoy(protocol, channel, y)
    sift, err, h_cond = _sift_stats(protocol, gen_joint)
    p_sift = (1.0 - gamma) * sift
    diag = {"error_rate": err, "h_cond": h_cond,
            "detection": float(gen_joint.sum())}
    return q, p_sift, diag


def _poisson_vector(mu: float, m_max: int) -> np.ndarray:
    out = np.zeros(m_max + 1)
    out[0] = math.exp(-mu)
    for m in range(1, m_max + 1):
        out[m] = out[m - 1] * mu / m
    return out


def _gen_round_joint_plain(protocol: ProtocolSpec, ch: KrausChannel) -> np.ndarray:
    joint = np.zeros((2, len(protocol.bob_povm)))
    for x, a in enumerate(protocol.gen_signals):
        vec = SIGNAL_VECTORS[a]
        out = ch.apply(np.outer(vec, vec.conj()))
        for ib, mb in enumerate(protocol.bob_povm):
            joint[x, ib] = 0.5 * float(np.trace(mb @ out).real)
    return joint


def _gen_round_joint_decoy(protocol: ProtocolSpec, channel: HonestChannelParams,
                           y_test: np.ndarray) -> np.ndarray:
    # generation rounds send the Z states at the signal intensity
    m_max = y_test.shape[0] - 1
    eta = channel.eta
    single = KrausChannel(honest_qubit_kraus(replace(channel, loss_db=0.0),
                                             protocol.bob_dim))
    n_b = len(protocol.bob_povm)
    perp_idx = protocol.bob_labels.index("perp")
    cond = np.zeros((2, n_b))
    for x, a in enumerate(protocol.gen_signals):
        vec = SIGNAL_VECTORS[a]
        out = single.apply(np.outer(vec, vec.conj()))
        cond[x] = [float(np.trace(mb @ out).real) for mb in protocol.bob_povm]
    mu_s = protocol.intensities[protocol.signal_intensity]
    pois = _poisson_vector(mu_s, m_max)
    joint = np.zeros((2, n_b))
    for m in range(m_max + 1):
        fire = 1.0 - (1.0 - eta) ** m
        joint += pois[m] * 0.5 * fire * cond
        joint[:, perp_idx] += pois[m] * 0.5 * (1.0 - fire)
    return joint


def _sift_stats(protocol: ProtocolSpec, joint: np.ndarray) -> tuple[float, float, float]:
    """Sifted fraction, error rate, and H(X|Y) on the sifted generation rounds."""
    keep = [i for i, lab in enumerate(protocol.bob_labels) if lab in ("Z0", "Z1")]
    sifted = joint[:, keep]
    p_sift = float(sifted.sum())
    if p_sift <= 0.0:
        return 0.0, 0.0, 0.0
    err = (sifted[0, 1] + sifted[1, 0]) / p_sift
    h = 0.0
    for ib in range(sifted.shape[1]):
        col = sifted[:, ib]
        tot = col.sum()
        if tot <= 0.0:
            continue
        for v in col:
            if v > 0.0:
                h -= v / p_sift * math.log2(v / tot)
    return p_sift, float(err), h


def ec_entropy(protocol: ProtocolSpec, channel: HonestChannelParams) -> float:
    """Conditional entropy H(X|Y; sift) of Alice's key bit given Bob's outcome."""
    _, _, diag = honest_statistics(protocol, channel)
    return diag["h_cond"]
