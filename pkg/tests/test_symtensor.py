import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slaglab import symtensor as sy

from fdtools import det_ld, fd_first, fd_second, random_sym, sym_with_eigs

ENTRY = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


def sym_strategy():
    return st.tuples(ENTRY, ENTRY, ENTRY, ENTRY, ENTRY, ENTRY).map(
        lambda v: sy.SymMat3(*v).to_matrix()
    )


class TestSymMat3:
    def test_round_trip(self):
        m = sy.SymMat3(1.0, 2.0, 3.0, 0.1, -0.2, 0.3)
        assert sy.SymMat3.from_matrix(m.to_matrix()) == m
        assert sy.SymMat3.from_vec6(m.to_vec6()) == m

    def test_symmetrizes_skew_input(self):
        a = np.array([[1.0, 0.3, 0.0], [0.1, 2.0, 0.0], [0.0, 0.0, 3.0]])
        m = sy.SymMat3.from_matrix(a).to_matrix()
        assert np.allclose(m, m.T)
        assert m[0, 1] == pytest.approx(0.2)

    def test_rejects_nonfinite(self):
        bad = np.eye(3)
        bad[2, 2] = np.nan
        with pytest.raises(sy.SpectralError):
            sy.SymMat3.from_matrix(bad)

    def test_vec6_order(self):
        m = sy.SymMat3(11.0, 22.0, 33.0, 12.0, 13.0, 23.0)
        assert m.to_vec6().tolist() == [11.0, 22.0, 33.0, 12.0, 13.0, 23.0]


class TestEig3:
    def test_identity(self):
        s = sy.eig3(np.eye(3))
        assert np.allclose(s.eigenvalues, 1.0)
        assert np.allclose(s.frame @ s.frame.T, np.eye(3), atol=1e-14)

    @settings(max_examples=150, deadline=None)
    @given(sym_strategy())
    def test_reconstruction(self, a):
        s = sy.eig3(a)
        scale = 1.0 + np.max(np.abs(a))
        assert np.max(np.abs(s.reconstruct() - a)) <= 1e-10 * scale
        assert np.max(np.abs(s.frame.T @ s.frame - np.eye(3))) <= 1e-12
        assert s.eigenvalues[0] <= s.eigenvalues[1] <= s.eigenvalues[2]

    def test_tiny_gaps(self):
        rng = np.random.default_rng(7)
        for gap in (1e-2, 1e-5, 1e-6, 1e-8, 0.0):
            for _ in range(40):
                base = rng.uniform(-1.0, 1.0)
                a = sym_with_eigs(rng, [base, base + gap, base + 1.0])
                s = sy.eig3(a)
                assert np.max(np.abs(s.reconstruct() - a)) <= 1e-10 * (
                    1.0 + np.max(np.abs(a))
                )
                assert np.max(np.abs(s.frame.T @ s.frame - np.eye(3))) <= 1e-12

    def test_deterministic_and_sign_convention(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a = random_sym(rng)
            s1 = sy.eig3(a)
            s2 = sy.eig3(a.copy())
            assert np.array_equal(s1.eigenvalues, s2.eigenvalues)
            assert np.array_equal(s1.frame, s2.frame)
            for k in range(3):
                col = s1.frame[:, k]
                lead = col[np.abs(col) > 1e-12 * np.max(np.abs(col))][0]
                assert lead > 0

    def test_repeated_eigenvalue_frame(self):
        a = np.diag([2.0, 2.0, 5.0])
        s = sy.eig3(a)
        assert np.allclose(s.eigenvalues, [2.0, 2.0, 5.0])
        assert np.max(np.abs(s.reconstruct() - a)) <= 1e-12


class TestSlagAngle:
    def test_frozen_values(self):
        # arctan(1)*3 and 2*arctan(0.1), directly checkable by hand.
        assert sy.slag_angle(np.eye(3)) == pytest.approx(2.356194490192345, abs=1e-14)
        assert sy.slag_angle(np.diag([0.1, 0.1, 0.0])) == pytest.approx(
            0.19933730498232407, abs=1e-14
        )

    @settings(max_examples=100, deadline=None)
    @given(sym_strategy())
    def test_range_and_conjugation_invariance(self, a):
        f = sy.slag_angle(a)
        assert abs(f) < 3 * np.pi / 2
        rng = np.random.default_rng(int(abs(np.sum(a)) * 1e4) % 2**31)
        q, r = np.linalg.qr(rng.normal(size=(3, 3)))
        rotated = q @ a @ q.T
        assert sy.slag_angle(rotated) == pytest.approx(f, abs=5e-13)

    def test_inverse_duality(self):
        # F(M^-1) + F(M) = (3 - 2l) pi/2 with l the count of negative eigenvalues.
        rng = np.random.default_rng(11)
        done = 0
        while done < 200:
            a = random_sym(rng)
            vals = np.linalg.eigvalsh(a)
            if np.min(np.abs(vals)) < 1e-3:
                continue
            l = int(np.sum(vals < 0))
            total = sy.slag_angle(np.linalg.inv(a)) + sy.slag_angle(a)
            assert total == pytest.approx((3 - 2 * l) * np.pi / 2, abs=1e-11)
            done += 1


def angle_ld(a):
    return np.sum(np.arctan(sy._eigvals_cardano(a)))


class TestSlagDeriv:
    def test_first_derivative_vs_fd(self):
        rng = np.random.default_rng(23)
        for _ in range(60):
            a = random_sym(rng)
            md = sy.slag_deriv(a)
            e = random_sym(rng, 1.0)
            want = fd_first(angle_ld, a, e)
            got = sy.directional_derivative(md, e)
            assert got == pytest.approx(want, rel=1e-6, abs=1e-9)

    def test_second_derivative_vs_fd(self):
        rng = np.random.default_rng(29)
        for _ in range(60):
            a = random_sym(rng)
            md = sy.slag_deriv(a)
            e = random_sym(rng, 1.0)
            want = fd_second(angle_ld, a, e)
            got = sy.quadratic_form(md, e)
            assert got == pytest.approx(want, rel=1e-6, abs=1e-8)

    def test_small_gap_path(self):
        rng = np.random.default_rng(31)
        for gap in (1e-6, 1e-8, 0.0):
            for _ in range(15):
                a = sym_with_eigs(rng, [0.3, 0.3 + gap, -0.9])
                md = sy.slag_deriv(a)
                e = random_sym(rng, 1.0)
                assert sy.directional_derivative(md, e) == pytest.approx(
                    fd_first(angle_ld, a, e), rel=1e-5, abs=1e-9
                )
                assert sy.quadratic_form(md, e) == pytest.approx(
                    fd_second(angle_ld, a, e), rel=1e-5, abs=1e-7
                )

    def test_coalescence_switch_is_continuous(self):
        # Tensors just above and below the divided-difference switch must agree.
        rng = np.random.default_rng(37)
        base = sym_with_eigs(rng, [0.5, 0.5 + 2e-7, 1.5])
        near = sym_with_eigs(np.random.default_rng(37), [0.5, 0.5 + 0.5e-7, 1.5])
        t_above = sy.slag_deriv(base).second_tensor()
        t_below = sy.slag_deriv(near).second_tensor()
        assert np.max(np.abs(t_above - t_below)) <= 1e-5

    def test_first_derivative_spectral_form(self):
        a = np.diag([0.1, 0.1, 0.0])
        first = sy.slag_deriv(a).first.to_matrix()
        want = np.diag([1 / 1.01, 1 / 1.01, 1.0])
        assert np.allclose(first, want, atol=1e-12)


class TestDetCalculus:
    def test_frozen_example(self):
        d, md = sy.det_calculus(np.diag([1.0, 2.0, 3.0]))
        assert d == pytest.approx(6.0, abs=1e-14)
        assert np.allclose(md.first.to_matrix(), np.diag([6.0, 3.0, 2.0]), atol=1e-14)

    def test_singular_cofactor(self):
        a = np.diag([0.1, 0.1, 0.0])
        d, md = sy.det_calculus(a)
        assert d == pytest.approx(0.0, abs=1e-16)
        assert np.allclose(md.first.to_matrix(), np.diag([0.0, 0.0, 0.01]), atol=1e-15)

    def test_first_derivative_vs_fd(self):
        rng = np.random.default_rng(41)
        for _ in range(60):
            a = random_sym(rng)
            _, md = sy.det_calculus(a)
            e = random_sym(rng, 1.0)
            want = fd_first(det_ld, a, e)
            got = sy.directional_derivative(md, e)
            assert got == pytest.approx(want, rel=1e-8, abs=1e-10)

    def test_second_derivative_vs_fd(self):
        rng = np.random.default_rng(43)
        for _ in range(60):
            a = random_sym(rng)
            _, md = sy.det_calculus(a)
            e = random_sym(rng, 1.0)
            # det is cubic along a ray, so the central second difference is
            # exact for any step; a wide one avoids the rounding floor.
            want = fd_second(det_ld, a, e, h=1e-2)
            got = sy.quadratic_form(md, e)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_zero_row_column_structure(self):
        # With a zero eigen-direction xi = e1, the second derivative block in
        # the nu=e3 slot vanishes except against the (xi,xi) component.
        a = np.diag([0.0, 0.7, 0.4])
        _, md = sy.det_calculus(a)
        t4 = md.second_tensor()
        nu = 2
        for k in range(3):
            for l in range(3):
                if (k, l) != (0, 0):
                    assert abs(t4[nu, nu, k, l]) <= 1e-15
        assert t4[nu, nu, 0, 0] == pytest.approx(a[1, 1], abs=1e-15)


class TestDerivBlocks:
    def test_second_block_symmetric(self):
        rng = np.random.default_rng(47)
        for _ in range(20):
            a = random_sym(rng)
            for md in (sy.slag_deriv(a), sy.det_calculus(a)[1]):
                assert np.allclose(md.second, md.second.T, atol=1e-12)

    def test_matderiv_finite(self):
        rng = np.random.default_rng(53)
        a = random_sym(rng)
        md = sy.slag_deriv(a)
        assert np.all(np.isfinite(md.first.to_matrix()))
        assert np.all(np.isfinite(md.second))
