import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renyiqkd import entropy, qmath
from util import basis_pinching, random_psd, random_pure, rng


def bell(dim: int = 2) -> np.ndarray:
    v = np.zeros(dim * dim, dtype=complex)
    for i in range(dim):
        v[i * dim + i] = 1 / math.sqrt(dim)
    return np.outer(v, v.conj())


def classical_joint(gen, na: int, nb: int) -> tuple[np.ndarray, np.ndarray]:
    p = gen.random((na, nb))
    p /= p.sum()
    rho = np.diag(p.reshape(-1)).astype(complex)
    return rho, p


class TestDivergences:
    def test_self_divergence_zero(self):
        rho = qmath.random_density(rng(0), 3)
        for alpha in (0.7, 1.3, 2.0):
            assert abs(entropy.petz_divergence(rho, rho, alpha)) < 1e-9
            assert abs(entropy.sandwiched_divergence(rho, rho, alpha)) < 1e-9

    def test_hand_value(self):
        rho = np.diag([0.5, 0.5]).astype(complex)
        sig = np.diag([0.25, 0.75]).astype(complex)
        want = math.log2(4.0 / 3.0)
        assert abs(entropy.petz_divergence(rho, sig, 2.0) - want) < 1e-12

    def test_orthogonal_infinite(self):
        rho = np.diag([1.0, 0.0]).astype(complex)
        sig = np.diag([0.0, 1.0]).astype(complex)
        assert entropy.petz_divergence(rho, sig, 2.0) == math.inf
        assert entropy.sandwiched_divergence(rho, sig, 2.0) == math.inf

    def test_commuting_pair_agrees(self):
        gen = rng(1)
        w1 = gen.random(4)
        w2 = gen.random(4)
        rho = np.diag(w1 / w1.sum()).astype(complex)
        sig = np.diag(w2 / w2.sum()).astype(complex)
        for alpha in (0.6, 1.4, 2.0):
            d1 = entropy.petz_divergence(rho, sig, alpha)
            d2 = entropy.sandwiched_divergence(rho, sig, alpha)
            assert abs(d1 - d2) < 1e-10

    def test_sandwiched_below_petz(self):
        gen = rng(2)
        for _ in range(10):
            rho = qmath.random_density(gen, 3)
            sig = qmath.random_density(gen, 3)
            assert (entropy.sandwiched_divergence(rho, sig, 2.0)
                    <= entropy.petz_divergence(rho, sig, 2.0) + 1e-10)

    def test_data_processing_partial_trace(self):
        gen = rng(3)
        for alpha in (1.1, 1.5, 2.0):
            for _ in range(5):
                rho = qmath.random_density(gen, 4)
                sig = qmath.random_density(gen, 4)
                rho_a = qmath.partial_trace(rho, [2, 2], keep=[0])
                sig_a = qmath.partial_trace(sig, [2, 2], keep=[0])
                full = entropy.petz_divergence(rho, sig, alpha)
                red = entropy.petz_divergence(rho_a, sig_a, alpha)
                assert red <= full + 1e-8
                fulls = entropy.sandwiched_divergence(rho, sig, alpha)
                reds = entropy.sandwiched_divergence(rho_a, sig_a, alpha)
                assert reds <= fulls + 1e-8

    def test_zero_trace_rejected(self):
        zero = np.zeros((2, 2), dtype=complex)
        with pytest.raises(entropy.EntropyDomainError):
            entropy.petz_divergence(zero, np.eye(2, dtype=complex) / 2, 2.0)


class TestConditionalEntropies:
    def test_product_maximally_mixed(self):
        gen = rng(4)
        sig_b = qmath.random_density(gen, 3)
        rho = qmath.tensor(np.eye(2) / 2, sig_b)
        for variant in ("petz", "sandwiched"):
            val = entropy.cond_entropy_down(variant, rho, (2, 3), 1.5)
            assert abs(val - 1.0) < 1e-9

    def test_bell_sandwiched(self):
        val = entropy.cond_entropy_down("sandwiched", bell(), (2, 2), 1.5)
        assert abs(val + 1.0) < 1e-9

    def test_classical_reduction(self):
        gen = rng(5)
        rho, p = classical_joint(gen, 2, 3)
        alpha = 1.7
        pb = p.sum(axis=0)
        direct = (1.0 / (1.0 - alpha)) * math.log2(
            sum(p[a, b] ** alpha * pb[b] ** (1 - alpha)
                for a in range(2) for b in range(3)))
        got = entropy.cond_entropy_down("petz", rho, (2, 3), alpha)
        assert abs(got - direct) < 1e-9

    def test_petz_up_product(self):
        gen = rng(6)
        rho_a = qmath.random_density(gen, 3)
        rho = qmath.tensor(rho_a, qmath.random_density(gen, 2))
        alpha = 1.5
        w = np.linalg.eigvalsh(rho_a)
        w = w[w > 1e-14]
        renyi_a = math.log2(float((w ** alpha).sum())) / (1 - alpha)
        assert abs(entropy.cond_entropy_petz_up(rho, (3, 2), alpha) - renyi_a) < 1e-9

    def test_petz_up_bell(self):
        assert abs(entropy.cond_entropy_petz_up(bell(), (2, 2), 2.0) + 1.0) < 1e-9

    def test_ordering(self):
        # the Petz down-variant is the smallest of the family; the sandwiched
        # down-variant and the Petz up-variant are mutually incomparable
        gen = rng(7)
        for _ in range(10):
            rho = qmath.random_density(gen, 4)
            alpha = float(gen.uniform(1.05, 1.95))
            down_p = entropy.cond_entropy_down("petz", rho, (2, 2), alpha)
            down_s = entropy.cond_entropy_down("sandwiched", rho, (2, 2), alpha)
            up_p = entropy.cond_entropy_petz_up(rho, (2, 2), alpha)
            assert down_p <= down_s + 1e-8
            assert down_p <= up_p + 1e-8


def measured_state(rho_qe: np.ndarray, dim_q: int, z: qmath.PinchingProjectors) -> np.ndarray:
    """sigma_SQE from coherently measuring Q of a joint state with projectors Z."""
    dim_e = rho_qe.shape[0] // dim_q
    n = len(z)
    v = np.zeros((n * dim_q * dim_e, dim_q * dim_e), dtype=complex)
    for j, p in enumerate(z.projectors):
        ket = np.zeros(n)
        ket[j] = 1.0
        v += qmath.tensor(ket.reshape(-1, 1), qmath.tensor(p, np.eye(dim_e)))
    return v @ rho_qe @ v.conj().T


class TestPinchedEntropy:
    def test_scaled_identity_zero(self):
        z = basis_pinching(3)
        for b in (0.2, 1.0):
            rho = b * np.eye(3, dtype=complex) / 3
            assert abs(entropy.pinched_entropy(rho, z, 1.4)) < 1e-12

    def test_plus_state_one_bit(self):
        z = basis_pinching(2)
        plus = 0.5 * np.ones((2, 2), dtype=complex)
        for alpha in (1.1, 1.5, 1.9):
            assert abs(entropy.pinched_entropy(plus, z, alpha) - 1.0) < 1e-12

    def test_diagonal_zero(self):
        z = basis_pinching(3)
        rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
        assert abs(entropy.pinched_entropy(rho, z, 1.6)) < 1e-12

    def test_duality_with_measured_state(self):
        gen = rng(8)
        for dim_q, alpha in ((2, 1.3), (3, 1.05), (4, 1.7)):
            rho_qe = random_pure(gen, dim_q * dim_q)
            rho_q = qmath.partial_trace(rho_qe, [dim_q, dim_q], keep=[0])
            z = basis_pinching(dim_q)
            sigma = measured_state(rho_qe, dim_q, z)
            sigma_se = qmath.partial_trace(
                sigma, [dim_q, dim_q, dim_q], keep=[0, 2])
            direct = entropy.cond_entropy_down("sandwiched", sigma_se, (dim_q, dim_q), alpha)
            assert abs(entropy.pinched_entropy(rho_q, z, alpha) - direct) < 1e-8

    def test_convexity_mixture(self):
        gen = rng(9)
        z = basis_pinching(3)
        for _ in range(10):
            a = qmath.random_density(gen, 3)
            b = qmath.random_density(gen, 3)
            alpha = float(gen.uniform(1.05, 1.9))
            for lam in (0.25, 0.5, 0.75):
                mix = entropy.pinched_entropy(lam * a + (1 - lam) * b, z, alpha)
                sep = (lam * entropy.pinched_entropy(a, z, alpha)
                       + (1 - lam) * entropy.pinched_entropy(b, z, alpha))
                assert mix <= sep + 1e-9

    def test_vn_limit(self):
        gen = rng(10)
        z = basis_pinching(3)
        rho = qmath.random_density(gen, 3)
        target = entropy.pinched_entropy_vn(rho, z)
        vals = [entropy.pinched_entropy(rho, z, 1.0 + 10.0 ** (-k)) for k in range(2, 7)]
        # Richardson extrapolation in (alpha - 1)
        extrap = vals[-1] + (vals[-1] - vals[-2]) / 9.0
        assert abs(vals[-1] - target) < 1e-4
        assert abs(extrap - target) < 1e-5


class TestGradient:
    def _ctx(self, dim=4, alpha=1.4, mode="combined"):
        z = basis_pinching(dim)
        gmap = qmath.KrausChannel([np.eye(dim)])
        pert = entropy.PerturbationSpec(1e-7, 1e-9, mode)
        return entropy.ObjectiveContext(gmap=gmap, zproj=z, alpha=alpha, perturbation=pert)

    def test_finite_difference(self):
        gen = rng(11)
        for mode in ("depolarize-only", "identity-only", "combined"):
            ctx = self._ctx(mode=mode)
            rho = qmath.random_density(gen, 4)
            val, grad = entropy.g_bar_and_grad(rho, ctx)
            d = qmath.random_hermitian(gen, 4)
            d = d - np.trace(d) * np.eye(4) / 4  # stay inside trace <= 1
            h = 1e-5
            fd = (entropy.g_bar(rho + h * d, ctx) - entropy.g_bar(rho - h * d, ctx)) / (2 * h)
            inner = float(np.trace(grad.conj().T @ d).real)
            assert abs(inner - fd) <= 1e-5 * max(1.0, abs(inner))

    def test_first_order_convexity(self):
        gen = rng(12)
        ctx = self._ctx()
        for _ in range(10):
            a = qmath.random_density(gen, 4)
            b = qmath.random_density(gen, 4)
            fa, ga = entropy.g_bar_and_grad(a, ctx)
            fb = entropy.g_bar(b, ctx)
            inner = float(np.trace(ga.conj().T @ (b - a)).real)
            assert fb >= fa + inner - 1e-9

    def test_stationary_at_maximally_mixed(self):
        # at rho = I/d the gradient has no component along traceless diagonal
        # directions, which span the zero-entropy slice through I/d
        ctx = self._ctx()
        rho = np.eye(4, dtype=complex) / 4
        _, grad = entropy.g_bar_and_grad(rho, ctx)
        for i in range(3):
            d = np.zeros((4, 4), dtype=complex)
            d[i, i] = 1.0
            d[i + 1, i + 1] = -1.0
            assert abs(np.trace(grad @ d).real) < 1e-8


class TestPerturbations:
    def test_depolarize_trace_and_floor(self):
        gen = rng(13)
        rho = qmath.random_density(gen, 4)
        spec = entropy.PerturbationSpec(eps1=1e-3, mode="depolarize-only")
        res = entropy.perturb(rho, spec)
        assert abs(np.trace(res.state).real - 1.0) < 1e-12
        assert np.linalg.eigvalsh(res.state)[0] >= 1e-3 / 4 - 1e-15
        assert res.bound_factor == 1.0 - 1e-3

    def test_depolarize_at_zero(self):
        spec = entropy.PerturbationSpec(eps1=1e-3, mode="depolarize-only")
        res = entropy.perturb(np.zeros((3, 3), dtype=complex), spec)
        assert qmath.frob(res.state) == 0.0
        assert res.min_eig_floor == 0.0

    def test_combined_inequality(self):
        gen = rng(14)
        z = basis_pinching(3)
        for _ in range(20):
            rho = qmath.random_density(gen, 3, rank=int(gen.integers(1, 4)))
            eps1 = float(10 ** gen.uniform(-8, -2))
            eps2 = float(10 ** gen.uniform(-10, -4))
            spec = entropy.PerturbationSpec(eps1, eps2, "combined")
            res = entropy.perturb(rho, spec)
            alpha = float(gen.uniform(1.05, 1.9))
            lhs = entropy.pinched_entropy(res.state, z, alpha, res.min_eig_floor)
            rhs = entropy.pinched_entropy(rho, z, alpha)
            assert lhs / res.bound_factor <= rhs + 1e-10


class TestClassicalHelpers:
    def test_lme_zero_is_mean(self):
        p = np.array([0.25, 0.75])
        v = np.array([1.0, 3.0])
        assert abs(entropy.log_mean_exp(p, v, 0.0) - 2.5) < 1e-12

    def test_lme_hand_value(self):
        p = np.array([0.5, 0.5])
        v = np.array([0.0, 1.0])
        assert abs(entropy.log_mean_exp(p, v, 1.0) - math.log2(1.5)) < 1e-12

    def test_lme_limits(self):
        p = np.array([0.5, 0.5, 0.0])
        v = np.array([0.0, 1.0, 9.0])
        assert entropy.log_mean_exp(p, v, math.inf) == 1.0
        assert entropy.log_mean_exp(p, v, -math.inf) == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_lme_monotone(self, seed):
        gen = np.random.default_rng(seed)
        n = int(gen.integers(2, 6))
        p = gen.random(n)
        p /= p.sum()
        v = gen.normal(size=n) * 3
        grid = [-math.inf, -10.0, -1.0, 0.0, 1.0, 10.0, math.inf]
        vals = [entropy.log_mean_exp(p, v, z) for z in grid]
        for lo, hi in zip(vals, vals[1:]):
            assert lo <= hi + 1e-9

    def test_kl_basics(self):
        q = np.array([0.4, 0.6])
        assert entropy.kl_divergence(q, q) == 0.0
        assert entropy.kl_divergence(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == 1.0
        assert entropy.kl_divergence(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == math.inf

    def test_kl_matches_direct_sum(self):
        gen = rng(15)
        q = gen.random(5)
        q /= q.sum()
        nu = gen.random(5)
        nu /= nu.sum()
        direct = sum(qc * math.log2(qc / nc) for qc, nc in zip(q, nu))
        assert abs(entropy.kl_divergence(q, nu) - direct) < 1e-12
