import numpy as np
import pytest

from renyiqkd import qmath
from util import basis_pinching, partial_trace_loops, random_psd, rng


def bell_state() -> np.ndarray:
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1 / np.sqrt(2)
    return np.outer(v, v.conj())


class TestHermitianOperator:
    def test_rejects_non_square(self):
        with pytest.raises(qmath.QmathError):
            qmath.hermitian_operator(np.ones((2, 3)))

    def test_rejects_non_hermitian(self):
        with pytest.raises(qmath.QmathError):
            qmath.hermitian_operator(np.array([[0, 1], [0, 0]], dtype=complex))

    def test_symmetrizes_within_tolerance(self):
        a = np.eye(2) + 1e-14 * np.array([[0, 1j], [0, 0]])
        h = qmath.hermitian_operator(a)
        assert qmath.is_hermitian(h, tol=0.0) or qmath.frob(h - h.conj().T) < 1e-15


class TestEigh:
    def test_diagonal(self):
        w, v = qmath.eigh(np.diag([3.0, 1.0, 2.0]).astype(complex))
        assert np.allclose(w, [1.0, 2.0, 3.0])
        # columns are permutation vectors
        assert np.allclose(np.abs(v).sum(axis=0), 1.0)

    def test_pauli_x(self):
        x = np.array([[0, 1], [1, 0]], dtype=complex)
        w, v = qmath.eigh(x)
        assert np.allclose(w, [-1.0, 1.0])
        plus = np.array([1, 1]) / np.sqrt(2)
        assert abs(abs(v[:, 1] @ plus) - 1.0) < 1e-12

    def test_reconstruction_random(self):
        gen = rng(1)
        for dim in (5, 17, 64):
            h = qmath.random_hermitian(gen, dim)
            w, v = qmath.eigh(h)
            resid = qmath.frob((v * w) @ v.conj().T - h)
            assert resid <= 1e-10 * max(qmath.frob(h), 1.0)
            assert qmath.frob(v.conj().T @ v - np.eye(dim)) < 1e-10


class TestMpow:
    def test_identity(self):
        assert np.allclose(qmath.mpow(np.eye(3, dtype=complex), 0.7), np.eye(3))

    def test_diagonal(self):
        out = qmath.mpow(np.diag([4.0, 1.0]).astype(complex), 0.5)
        assert np.allclose(out, np.diag([2.0, 1.0]))

    def test_round_trip(self):
        gen = rng(2)
        rho = random_psd(gen, 6)
        rho /= np.trace(rho).real
        for alpha in (1.2, 1.7):
            back = qmath.mpow(qmath.mpow(rho, 1 / alpha), alpha)
            assert qmath.frob(back - rho) < 1e-9

    def test_negative_power_singular_raises(self):
        with pytest.raises(qmath.QmathError):
            qmath.mpow(np.diag([1.0, 0.0]).astype(complex), -0.5)

    def test_floor_applies(self):
        out = qmath.mpow(np.diag([1.0, 0.0]).astype(complex), 0.5, min_eig_floor=1e-4)
        assert np.isclose(out[1, 1].real, 1e-2)


class TestFrechetPowMap:
    def test_hand_coefficients(self):
        m = qmath.frechet_pow_map(np.diag([1.0, 4.0]).astype(complex), 0.5)
        c = m.coefficients
        assert np.isclose(c[0, 0], 0.5)
        assert np.isclose(c[1, 1], 0.25)
        assert np.isclose(c[0, 1], 1.0 / 3.0)

    def test_scalar_matrix(self):
        c = 2.0
        beta = 0.3
        m = qmath.frechet_pow_map(c * np.eye(3, dtype=complex), beta)
        d = qmath.random_hermitian(rng(3), 3)
        assert np.allclose(m.apply(d), beta * c ** (beta - 1) * d)

    def test_matches_central_differences(self):
        gen = rng(4)
        for beta in (0.5, 1 / 1.3):
            s = random_psd(gen, 5) + 0.5 * np.eye(5)
            d = qmath.random_hermitian(gen, 5)
            m = qmath.frechet_pow_map(s, beta)
            h = 1e-5
            fd = (qmath.mpow(s + h * d, beta) - qmath.mpow(s - h * d, beta)) / (2 * h)
            err = qmath.frob(m.apply(d) - fd) / max(qmath.frob(fd), 1.0)
            assert err < 1e-5

    def test_self_adjoint(self):
        gen = rng(5)
        s = random_psd(gen, 4) + 0.1 * np.eye(4)
        m = qmath.frechet_pow_map(s, 0.7)
        a = qmath.random_hermitian(gen, 4)
        b = qmath.random_hermitian(gen, 4)
        lhs = np.trace(a.conj().T @ m.apply(b))
        rhs = np.trace(m.adjoint_apply(a).conj().T @ b)
        assert abs(lhs - rhs) < 1e-9 * max(1.0, abs(lhs))

    def test_zero_eigenvalue_raises_for_root(self):
        with pytest.raises(qmath.QmathError):
            qmath.frechet_pow_map(np.diag([1.0, 0.0]).astype(complex), 0.5)


class TestPartialTrace:
    def test_product(self):
        gen = rng(6)
        a = qmath.random_hermitian(gen, 2)
        b = qmath.random_hermitian(gen, 3)
        out = qmath.partial_trace(qmath.tensor(a, b), [2, 3], keep=[0])
        assert np.allclose(out, np.trace(b) * a)

    def test_bell(self):
        out = qmath.partial_trace(bell_state(), [2, 2], keep=[0])
        assert np.allclose(out, np.eye(2) / 2)

    def test_against_loops(self):
        gen = rng(7)
        h = qmath.random_hermitian(gen, 6)
        got = qmath.partial_trace(h, [2, 3], keep=[1])
        want = partial_trace_loops(h, [2, 3], keep=[1])
        assert np.allclose(got, want)

    def test_shape_error(self):
        with pytest.raises(qmath.QmathError):
            qmath.partial_trace(np.eye(6, dtype=complex), [2, 2], keep=[0])


class TestChoi:
    def test_identity_channel(self):
        j = qmath.choi_from_kraus([np.eye(2)], dim_in=2)
        gen = rng(8)
        rho = qmath.random_density(gen, 2)
        assert np.allclose(qmath.apply_choi(j, rho, 2, 2), rho)

    def test_depolarizing_choi(self):
        # J = I/d_out tensor-scaled so that Tr_B J = I maps rho -> Tr[rho] I/d
        d = 2
        j = np.kron(np.eye(d), np.eye(d)) / d
        rho = qmath.random_density(rng(9), d)
        assert np.allclose(qmath.apply_choi(j, rho, d, d), np.eye(d) / d)

    def test_kraus_vs_choi(self):
        gen = rng(10)
        for din, dout in ((2, 2), (2, 3), (3, 2)):
            ks = qmath.random_cptp_kraus(gen, din, dout)
            ch = qmath.KrausChannel(ks)
            j = ch.choi()
            # trace preservation shows up as a partial-trace constraint
            assert np.allclose(
                qmath.partial_trace(j, [din, dout], keep=[0]), np.eye(din), atol=1e-10)
            rho = qmath.random_density(gen, din)
            assert qmath.frob(qmath.apply_choi(j, rho, din, dout) - ch.apply(rho)) < 1e-10


class TestKrausChannel:
    def test_identity(self):
        ch = qmath.KrausChannel([np.eye(2)])
        rho = qmath.random_density(rng(11), 2)
        assert np.allclose(qmath.kraus_apply(ch, rho), rho)

    def test_scaling(self):
        p = 0.3
        ch = qmath.KrausChannel([np.sqrt(p) * np.eye(2)])
        rho = qmath.random_density(rng(12), 2)
        assert np.isclose(np.trace(ch.apply(rho)).real, p)

    def test_rejects_trace_increasing(self):
        with pytest.raises(qmath.QmathError):
            qmath.KrausChannel([np.eye(2), np.eye(2)])

    def test_adjoint_pairing(self):
        gen = rng(13)
        ch = qmath.KrausChannel(qmath.random_cptp_kraus(gen, 3, 2))
        x = qmath.random_hermitian(gen, 2)
        y = qmath.random_hermitian(gen, 3)
        lhs = np.trace(x.conj().T @ ch.apply(y))
        rhs = np.trace(ch.adjoint(x).conj().T @ y)
        assert abs(lhs - rhs) < 1e-10


class TestPinching:
    def test_diagonal_fixed(self):
        z = basis_pinching(3)
        h = np.diag([1.0, 2.0, 3.0]).astype(complex)
        assert np.allclose(qmath.pinch(z, h), h)

    def test_plus_state(self):
        z = basis_pinching(2)
        plus = 0.5 * np.ones((2, 2), dtype=complex)
        assert np.allclose(qmath.pinch(z, plus), np.eye(2) / 2)

    def test_idempotent_unital_and_commuting(self):
        gen = rng(14)
        z = basis_pinching(4)
        h = qmath.random_hermitian(gen, 4)
        once = qmath.pinch(z, h)
        assert np.allclose(qmath.pinch(z, once), once)
        assert np.allclose(qmath.pinch(z, np.eye(4, dtype=complex)), np.eye(4))
        for p in z.projectors:
            assert qmath.frob(once @ p - p @ once) < 1e-12

    def test_rejects_incomplete_family(self):
        p0 = np.diag([1.0, 0.0]).astype(complex)
        with pytest.raises(qmath.QmathError):
            qmath.PinchingProjectors([p0])
