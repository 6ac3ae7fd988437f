"""Wide-stencil solver tests.

Exact oracles: quadratic fields (all four discrete operators reproduce the
analytic values, exactly for aligned Hessians and one-sidedly for rotated
ones), the degenerate quadratic for the Bellman equation, constant-shift
comparison, and the vanishing solution of the model problem with forcing
-1.  The non-quadratic reference is the order-four expansion of a known
solution with c = pi/2, checked against a twice-finer grid of itself plus
an allowance for its cubic forcing error.
"""

import math
import warnings

import numpy as np
import pytest
import scipy.ndimage as ndi

from slaglab import solver as sv

STENCIL = sv.make_wide_stencil()

DIAG = np.array([0.3, 0.2, 0.1])
F_DIAG = float(np.arctan(DIAG).sum())


def diag_quad(x, y, z):
    return 0.5 * (0.3 * x * x + 0.2 * y * y + 0.1 * z * z) - 0.4 * x + 0.2 * y + 1.0


def rotated_matrix():
    cz, sz = math.cos(math.pi / 6), math.sin(math.pi / 6)
    cx, sx = math.cos(0.7), math.sin(0.7)
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    r = rz @ rx
    return r @ np.diag([0.5, 0.3, 0.1]) @ r.T


def quad_field(grid, a):
    def q(x, y, z):
        return 0.5 * (a[0, 0] * x * x + a[1, 1] * y * y + a[2, 2] * z * z) \
            + a[0, 1] * x * y + a[0, 2] * x * z + a[1, 2] * y * z
    return sv.ScalarField3.from_function(grid, q)


def wy2(x, y, z):
    """Quartic expansion of a c = pi/2 solution; forcing error O(|x|^3)."""
    return (0.5 * (x ** 2 + y ** 2) + z * (x ** 2 - y ** 2)
            + z ** 2 * (18 * x ** 2 + 18 * y ** 2 - z ** 2) / 12.0
            - (x ** 2 + y ** 2) ** 2 / 8.0)


class TestGridAndFields:
    def test_centered_geometry(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        assert grid.dims == (9, 9, 9)
        assert grid.origin == (-1.0, -1.0, -1.0)
        assert np.allclose(grid.point(4, 4, 4), 0.0)
        assert np.allclose(grid.point(0, 4, 8), [-1.0, 0.0, 1.0])

    def test_boundary_is_two_layers(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        b = grid.boundary_mask()
        assert int(b.sum()) == 9 ** 3 - 5 ** 3
        assert not b[2:-2, 2:-2, 2:-2].any()
        assert b[1].all() and b[:, 1].all() and b[:, :, 1].all()

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            sv.Grid3((0, 0, 0), -0.1, (9, 9, 9))
        with pytest.raises(ValueError):
            sv.Grid3((0, 0, 0), 0.1, (4, 9, 9))

    def test_field_validation(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        with pytest.raises(ValueError):
            sv.ScalarField3(grid, np.zeros((9, 9, 5)))
        bad = np.zeros(grid.dims)
        bad[3, 3, 3] = np.inf
        with pytest.raises(ValueError):
            sv.ScalarField3(grid, bad)

    def test_flat_is_x_fastest(self):
        grid = sv.Grid3((0, 0, 0), 0.5, (5, 6, 7))
        rng = np.random.default_rng(3)
        field = sv.ScalarField3(grid, rng.normal(size=grid.dims))
        flat = field.flat()
        nx, ny, _ = grid.dims
        for (i, j, k) in [(0, 0, 0), (4, 0, 0), (1, 2, 3), (4, 5, 6)]:
            assert flat[i + nx * (j + ny * k)] == field.values[i, j, k]
        back = sv.ScalarField3.from_flat(grid, flat)
        assert np.array_equal(back.values, field.values)


class TestStencil:
    def test_counts(self):
        assert len(STENCIL) == 13
        assert STENCIL.directions.shape == (25, 3)
        assert np.array_equal(STENCIL.frames[0], np.eye(3, dtype=np.int64))
        assert np.abs(STENCIL.frames).max() == sv.STENCIL_RADIUS

    def test_frames_orthogonal(self):
        for fr in STENCIL.frames:
            g = fr @ fr.T
            assert np.array_equal(g, np.diag(np.diag(g)))
        assert np.array_equal(
            STENCIL.frame_len_sq, (STENCIL.frames ** 2).sum(axis=2)
        )
        assert np.array_equal(
            STENCIL.dir_len_sq, (STENCIL.directions ** 2).sum(axis=1)
        )

    def test_directions_distinct_lines(self):
        d = STENCIL.directions
        for i in range(len(d)):
            for j in range(i + 1, len(d)):
                assert np.any(np.cross(d[i], d[j]) != 0)

    def test_validation(self):
        f = STENCIL.frames
        with pytest.raises(ValueError):
            sv.StencilSet(f[::-1], STENCIL.frame_len_sq[::-1],
                          STENCIL.directions, STENCIL.dir_len_sq)
        bad = f.copy()
        bad[1, 1] = bad[1, 0]
        with pytest.raises(ValueError):
            sv.StencilSet(bad, STENCIL.frame_len_sq,
                          STENCIL.directions, STENCIL.dir_len_sq)
        far = np.array([[[3, 0, 0], [0, 1, 0], [0, 0, 1]]], np.int64)
        with pytest.raises(ValueError):
            sv.StencilSet(far, (far ** 2).sum(axis=2),
                          STENCIL.directions, STENCIL.dir_len_sq)


class TestOperators:
    def test_aligned_quadratic_exact(self):
        grid = sv.Grid3.centered(1.0, 0.2)
        field = sv.ScalarField3.from_function(grid, diag_quad)
        fh, lm, lap, d33 = sv.operator_fields(STENCIL, field)
        s = grid.interior()
        assert np.nanmax(np.abs(fh[s] - F_DIAG)) <= 1e-12
        assert np.nanmax(np.abs(lm[s] - 0.1)) <= 1e-12
        assert np.nanmax(np.abs(lap[s] - 0.6)) <= 1e-12
        assert np.nanmax(np.abs(d33[s] - 0.1)) <= 1e-12

    def test_half_norm_squared(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        field = sv.ScalarField3.from_function(
            grid, lambda x, y, z: 0.5 * (x * x + y * y + z * z))
        fh, lm, lap, d33 = sv.operator_fields(STENCIL, field)
        s = grid.interior()
        assert np.nanmax(np.abs(lm[s] - 1.0)) <= 1e-12
        assert np.nanmax(np.abs(lap[s] - 3.0)) <= 1e-12
        assert np.nanmax(np.abs(d33[s] - 1.0)) <= 1e-12
        assert np.nanmax(np.abs(fh[s] - 3 * math.atan(1.0))) <= 1e-12

    def test_rotated_quadratic_one_sided(self):
        # min over frames can only sit above F(A) for a semidefinite
        # Hessian (arctan is concave on [0, inf)); the excess is the
        # directional-resolution error, capped well below the 0.05 budget
        a = rotated_matrix()
        grid = sv.Grid3.centered(1.0, 0.2)
        field = quad_field(grid, a)
        fh, lm, lap, d33 = sv.operator_fields(STENCIL, field)
        s = grid.interior()
        fa = float(np.arctan(np.linalg.eigvalsh(a)).sum())
        assert np.nanmin(fh[s]) >= fa - 1e-12
        assert np.nanmax(fh[s]) <= fa + 0.05
        assert np.nanmin(lm[s]) >= 0.1 - 1e-12
        assert np.nanmax(lm[s]) <= 0.1 + 0.05
        assert np.nanmax(np.abs(lap[s] - a.trace())) <= 1e-12
        assert np.nanmax(np.abs(d33[s] - a[2, 2])) <= 1e-12

    def test_quartic_consistency_floor(self):
        # h-independent directional error on a non-quadratic field: the
        # floor is O(1) in h and must stay within the documented cap
        for h in (0.1 / 6, 0.1 / 12):
            grid = sv.Grid3.centered(0.1, h)
            field = sv.ScalarField3.from_function(grid, wy2)
            fh, _, _, _ = sv.operator_fields(STENCIL, field)
            dev = np.nanmax(np.abs(fh[grid.interior()] - math.pi / 2))
            assert dev <= 0.05

    def test_single_node_matches_field_kernel(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        field = sv.ScalarField3.from_function(
            grid, lambda x, y, z: 0.1 * np.sin(x) * np.cos(y) * np.exp(z / 2))
        fields = sv.operator_fields(STENCIL, field)
        for node in [(2, 2, 2), (4, 4, 4), (6, 3, 2), (2, 6, 5), (5, 5, 6)]:
            single = sv.discrete_ops(STENCIL, field, node)
            for got, full in zip(single, fields):
                assert abs(got - full[node]) <= 1e-13

    def test_near_boundary_node_rejected(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        field = sv.ScalarField3.from_function(grid, diag_quad)
        for node in [(1, 4, 4), (4, 4, 7), (0, 0, 0)]:
            with pytest.raises(ValueError):
                sv.discrete_ops(STENCIL, field, node)

    def test_monotone_in_every_node(self):
        # degenerate ellipticity, exhaustively: raising any off-center
        # value never lowers an operator at the center, raising the
        # center never raises one
        grid = sv.Grid3((0, 0, 0), 0.3, (5, 5, 5))
        center = (2, 2, 2)
        for seed in (0, 1, 2):
            rng = np.random.default_rng(seed)
            base = rng.normal(size=(5, 5, 5))
            ref = sv.discrete_ops(STENCIL, sv.ScalarField3(grid, base), center)
            for flat in range(125):
                node = np.unravel_index(flat, (5, 5, 5))
                bumped = base.copy()
                bumped[node] += 0.37
                ops = sv.discrete_ops(STENCIL, sv.ScalarField3(grid, bumped), center)
                if node == center:
                    assert all(b <= r + 1e-12 for b, r in zip(ops, ref))
                else:
                    assert all(b >= r - 1e-12 for b, r in zip(ops, ref))


class TestDirichlet:
    def test_quadratic_is_exact(self):
        grid = sv.Grid3.centered(1.0, 0.125)
        u, rep = sv.solve_dirichlet(F_DIAG, diag_quad, grid, tol=1e-10)
        exact = sv.ScalarField3.from_function(grid, diag_quad)
        assert rep.converged
        assert np.abs(u.values - exact.values).max() <= 1e-9
        recomputed = sv.residual(u, sv.DirichletProblem(F_DIAG))
        assert recomputed <= 1e-10
        assert abs(recomputed - rep.residual) <= 1e-13

    def test_comparison_constant_shift(self):
        grid = sv.Grid3.centered(1.0, 0.125)
        u1, _ = sv.solve_dirichlet(F_DIAG, diag_quad, grid, tol=1e-10)
        u2, _ = sv.solve_dirichlet(
            F_DIAG, lambda x, y, z: diag_quad(x, y, z) + 0.35, grid, tol=1e-10)
        assert np.abs(u2.values - u1.values - 0.35).max() <= 1e-10

    def test_comparison_nonconstant_bump(self):
        grid = sv.Grid3.centered(1.0, 0.125)

        def bump(x, y, z):
            return 0.05 * (1.0 + np.sin(2 * x) * np.cos(y)) + 0.02 * (z + 1)

        u1, _ = sv.solve_dirichlet(F_DIAG, diag_quad, grid, tol=1e-10)
        u2, _ = sv.solve_dirichlet(
            F_DIAG, lambda x, y, z: diag_quad(x, y, z) + bump(x, y, z),
            grid, tol=1e-10)
        d = u2.values - u1.values
        bmax = bump(*grid.meshgrid())[grid.boundary_mask()].max()
        assert d.min() >= -1e-9
        assert d.max() <= bmax + 1e-9

    def test_quartic_fine_grid_self_oracle(self):
        # the quartic is only an O(r^3)-approximate solution, so the
        # discrete deviations plateau at the forcing error rather than
        # vanish with h; the coarse run must match the 2x-finer reference
        # up to that allowance
        errs = {}
        for n, h in ((13, 0.1 / 6), (25, 0.1 / 12)):
            grid = sv.Grid3.centered(0.1, h)
            assert grid.dims == (n, n, n)
            u, rep = sv.solve_dirichlet(math.pi / 2, wy2, grid, tol=1e-8)
            assert rep.converged
            exact = sv.ScalarField3.from_function(grid, wy2)
            errs[n] = np.abs(u.values - exact.values).max()
        assert errs[13] <= 2e-5
        assert errs[25] <= 3e-5
        assert errs[13] <= errs[25] + 2e-3

    def test_level_out_of_range(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        with pytest.raises(ValueError):
            sv.solve_dirichlet(3 * math.pi / 2, diag_quad, grid)

    def test_nonfinite_boundary_data(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        with pytest.raises(ValueError):
            sv.solve_dirichlet(
                0.1, lambda x, y, z: np.where(x > 0.9, np.inf, 0.0), grid)

    def test_iteration_cap_reports_nonconvergence(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        with pytest.warns(sv.SolverConvergenceWarning):
            _, rep = sv.solve_dirichlet(F_DIAG, diag_quad, grid,
                                        tol=1e-14, max_iter=10)
        assert not rep.converged
        assert rep.residual > 0
        assert len(rep.history) >= 1


class TestBellman:
    def test_degenerate_quadratic_is_exact(self):
        a = 0.1
        grid = sv.Grid3.centered(0.5, 0.1)
        w, rep = sv.solve_bellman(
            2 * math.atan(a), lambda x, y, z: 0.5 * a * (x * x + y * y),
            grid, tol=1e-10)
        exact = sv.ScalarField3.from_function(
            grid, lambda x, y, z: 0.5 * a * (x * x + y * y))
        assert rep.converged
        assert rep.mask_stable
        assert np.abs(w.values - exact.values).max() <= 1e-9
        s = grid.interior()
        assert rep.mask[s].shape == (7, 7, 7)
        # mask recorded against the same buffer the residual was measured
        # on, so recomputing the argmax from the returned field matches it
        fh, lm, _, _ = sv.operator_fields(STENCIL, w)
        assert np.array_equal(
            rep.mask[s], (lm[s] >= fh[s] - 2 * math.atan(a)).astype(np.uint8))

    def test_strictly_convex_data_flattens(self):
        # the boundary quadratic has lambda_min > 0, so it is a strict
        # subsolution; the solver must come to rest above it
        grid = sv.Grid3.centered(0.5, 0.1)
        conv = lambda x, y, z: 0.1 * (x * x + y * y + z * z)
        w, rep = sv.solve_bellman(math.pi / 2, conv, grid, tol=1e-10)
        q = sv.ScalarField3.from_function(grid, conv)
        assert rep.converged
        assert (w.values >= q.values - 1e-9).all()
        assert sv.residual(w, sv.BellmanProblem(math.pi / 2)) <= 1e-10

    def test_level_out_of_range(self):
        grid = sv.Grid3.centered(0.5, 0.1)
        with pytest.raises(ValueError):
            sv.solve_bellman(-3 * math.pi / 2, diag_quad, grid)


class TestModel:
    def test_constant_negative_forcing_vanishes(self):
        field, rep = sv.solve_model(
            4.0, 0.25, forcing=lambda x, y, z: -np.ones_like(x))
        assert rep.converged
        assert np.abs(field.values).max() == 0.0
        assert int(rep.mask.sum()) == 0

    def test_preconditions(self):
        with pytest.raises(ValueError):
            sv.solve_model(2.5, 0.125)
        with pytest.raises(ValueError):
            sv.solve_model(4.0, 0.3)
        with pytest.raises(ValueError):
            sv.solve_model(4.0, 0.25, method="newton")
        with pytest.raises(ValueError):
            sv.solve_model(4.0, 0.25, v0=np.zeros((5, 5, 5)))

    def test_damped_and_policy_paths_agree(self):
        fd, rd = sv.solve_model(3.0, 0.1875, tol=1e-7, method="damped")
        fp, rp = sv.solve_model(3.0, 0.1875, tol=1e-9)
        assert rd.converged and rp.converged
        assert np.abs(fd.values - fp.values).max() <= 1e-6
        assert (rd.mask == rp.mask).mean() >= 0.999

    def test_bundle_converged(self, model_bundle):
        for key, rep in model_bundle["reports"].items():
            assert rep.converged, key
        assert sv.residual(
            model_bundle["fields"][0.25], sv.ModelProblem()) <= 1e-6

    def test_contact_set_compact(self, model_bundle):
        mask = model_bundle["reports"][0.125].mask
        assert mask[mask.shape[0] // 2, mask.shape[1] // 2,
                    mask.shape[2] // 2] == 1
        assert 1200 <= int(mask.sum()) <= 1800
        hits = np.argwhere(mask == 1)
        margin = min(hits.min(), (np.array(mask.shape) - 1 - hits.max(0)).min())
        assert margin >= 10

    def test_contact_set_insensitive_to_domain(self, model_bundle):
        m4 = model_bundle["reports"][0.125].mask
        m6 = model_bundle["reports"]["R6"].mask[model_bundle["inner"]]
        grown4 = ndi.binary_dilation(m4, np.ones((3, 3, 3), bool))
        grown6 = ndi.binary_dilation(m6, np.ones((3, 3, 3), bool))
        assert (m6 <= grown4).all() and (m4 <= grown6).all()

    def test_symmetry(self, model_bundle):
        v = model_bundle["fields"][0.125].values
        assert np.abs(v - np.rot90(v, k=1, axes=(0, 1))).max() <= 1e-6
        assert np.abs(v - v[:, :, ::-1]).max() <= 1e-6

    def test_nonnegative(self, model_bundle):
        for key in (0.25, 0.125, 0.0625, "R6"):
            assert model_bundle["fields"][key].values.min() >= -1e-9

    def test_grid_convergence_monotone(self, model_bundle):
        f = model_bundle["fields"]
        d1 = np.abs(f[0.125].values[::2, ::2, ::2] - f[0.25].values).max()
        d2 = np.abs(f[0.0625].values[::2, ::2, ::2] - f[0.125].values).max()
        assert d1 <= 0.02
        assert d2 <= d1

    def test_refinement_helpers(self):
        rng = np.random.default_rng(7)
        coarse = rng.normal(size=(4, 5, 6))
        fine = sv.dyadic_refine(coarse)
        assert fine.shape == (7, 9, 11)
        assert np.array_equal(fine[::2, ::2, ::2], coarse)
        assert fine[1, 0, 0] == 0.5 * (coarse[0, 0, 0] + coarse[1, 0, 0])
        m = (coarse > 0).astype(np.uint8)
        mf = sv.dyadic_refine_mask(m)
        assert mf.shape == (7, 9, 11)
        assert np.array_equal(mf[::2, ::2, ::2], m)


class TestResidual:
    def test_perturbation_detected(self):
        grid = sv.Grid3.centered(1.0, 0.125)
        u, _ = sv.solve_dirichlet(F_DIAG, diag_quad, grid, tol=1e-10)
        pert = u.values.copy()
        pert[8, 8, 8] += 1.0
        assert sv.residual(u.with_values(pert),
                           sv.DirichletProblem(F_DIAG)) > 0.1

    def test_model_perturbation_detected(self):
        field, _ = sv.solve_model(3.0, 0.1875)
        pert = field.values.copy()
        pert[16, 16, 16] += 1.0
        assert sv.residual(field.with_values(pert), sv.ModelProblem()) > 1.0

    def test_unknown_problem_rejected(self):
        grid = sv.Grid3.centered(1.0, 0.25)
        field = sv.ScalarField3.from_function(grid, diag_quad)
        with pytest.raises(TypeError):
            sv.residual(field, object())
