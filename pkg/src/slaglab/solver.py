"""Monotone wide-stencil solvers on 3D boxes.

Three problems share one discretization: the Dirichlet problem
F(D^2 u) = c for the arctan-eigenvalue operator, the degenerate Bellman
equation max{F(D^2 w) - c*, lambda_min(D^2 w)} = 0, and the linear model
problem max{lap v, v_33 + 1 - |x|^2} = 0 with decay imposed as zero
boundary data on a large box.

All discrete operators are built from directional second differences over
orthogonal lattice frames, so raising any neighbor value never lowers an
operator value at the node (degenerate ellipticity); that property is what
the damped fixed-point iterations rely on.  The discrete boundary is the
two outermost index layers, matching the stencil radius.
"""

from __future__ import annotations

import math
import time
import warnings
from collections import deque
from dataclasses import dataclass, field as dfield

import numpy as np
import pyamg
import scipy.sparse as sp
from numba import njit, prange

__all__ = [
    "STENCIL_RADIUS",
    "SolverConvergenceWarning",
    "Grid3",
    "ScalarField3",
    "StencilSet",
    "SolveReport",
    "DirichletProblem",
    "BellmanProblem",
    "ModelProblem",
    "make_wide_stencil",
    "discrete_ops",
    "operator_fields",
    "solve_dirichlet",
    "solve_bellman",
    "solve_model",
    "residual",
]

STENCIL_RADIUS = 2


class SolverConvergenceWarning(UserWarning):
    """Iteration cap reached, or a Bellman active set kept flipping."""


# ---------------------------------------------------------------------------
# grid and field containers


@dataclass(frozen=True)
class Grid3:
    """Axis-aligned box grid: node (i,j,k) sits at origin + h*(i,j,k)."""

    origin: tuple[float, float, float]
    spacing: float
    dims: tuple[int, int, int]

    def __post_init__(self) -> None:
        if self.spacing <= 0.0:
            raise ValueError("grid spacing must be positive")
        if min(self.dims) < 5:
            raise ValueError("need at least 5 nodes per axis for the wide stencil")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))

    @classmethod
    def centered(cls, radius: float, spacing: float) -> "Grid3":
        n = 2 * int(round(radius / spacing)) + 1
        return cls((-radius, -radius, -radius), spacing, (n, n, n))

    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            self.origin[a] + self.spacing * np.arange(self.dims[a]) for a in range(3)
        )

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def point(self, i: int, j: int, k: int) -> np.ndarray:
        return np.array(self.origin) + self.spacing * np.array([i, j, k], float)

    def interior(self) -> tuple[slice, slice, slice]:
        r = STENCIL_RADIUS
        return tuple(slice(r, n - r) for n in self.dims)

    def boundary_mask(self) -> np.ndarray:
        mask = np.ones(self.dims, dtype=bool)
        mask[self.interior()] = False
        return mask


@dataclass(frozen=True)
class ScalarField3:
    """Grid function; values indexed [i,j,k], serialized x-fastest."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, float)
        if v.shape != self.grid.dims:
            raise ValueError(f"values shape {v.shape} does not match dims {self.grid.dims}")
        if not np.isfinite(v).all():
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid3, func) -> "ScalarField3":
        x, y, z = grid.meshgrid()
        return cls(grid, func(x, y, z))

    def flat(self) -> np.ndarray:
        """Values flattened x-fastest (index i varies quickest)."""
        return np.ravel(self.values, order="F")

    @classmethod
    def from_flat(cls, grid: Grid3, flat: np.ndarray) -> "ScalarField3":
        v = np.asarray(flat, float).reshape(grid.dims, order="F")
        return cls(grid, v)

    def with_values(self, values: np.ndarray) -> "ScalarField3":
        return ScalarField3(self.grid, values)


# ---------------------------------------------------------------------------
# stencil


@dataclass(frozen=True)
class StencilSet:
    """Orthogonal lattice frames plus the deduplicated direction list.

    frames[f, a] is the a-th integer offset vector of frame f;
    frame_len_sq[f, a] its squared length (the second-difference weight is
    1/(len_sq*h^2)).  directions collects each distinct line once for the
    minimum-eigenvalue operator.
    """

    frames: np.ndarray
    frame_len_sq: np.ndarray
    directions: np.ndarray
    dir_len_sq: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.frames, np.int64)
        if f.ndim != 3 or f.shape[1:] != (3, 3):
            raise ValueError("frames must have shape (nf, 3, 3)")
        for fr in f:
            if np.any(fr @ fr.T != np.diag(np.diag(fr @ fr.T))):
                raise ValueError("frame directions are not mutually orthogonal")
        if np.abs(f).max() > STENCIL_RADIUS:
            raise ValueError("stencil offset exceeds the stencil radius")
        if not np.array_equal(f[0], np.eye(3, dtype=np.int64)):
            raise ValueError("the axis-aligned frame must come first")
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "frame_len_sq", np.asarray(self.frame_len_sq, float))
        object.__setattr__(self, "directions", np.asarray(self.directions, np.int64))
        object.__setattr__(self, "dir_len_sq", np.asarray(self.dir_len_sq, float))

    def __len__(self) -> int:
        return self.frames.shape[0]


def make_wide_stencil() -> StencilSet:
    """The 13-frame stencil: the axis frame plus the twelve frames pairing
    each body diagonal with an orthogonal face diagonal.

    Each mixed frame is {(1,1,1)-type, (1,1,0)-type, (1,1,-2)-type} up to
    signs and axis permutations; the union resolves 25 distinct lattice
    lines within offset radius 2.
    """
    frames = [np.eye(3, dtype=np.int64)]
    for body in ([1, 1, 1], [1, 1, -1], [1, -1, 1], [-1, 1, 1]):
        b = np.array(body, np.int64)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            face = np.zeros(3, np.int64)
            face[j], face[k] = b[k], -b[j]
            frames.append(np.stack([b, face, np.cross(b, face)]))
    frames = np.array(frames)
    len_sq = (frames * frames).sum(axis=2).astype(float)

    seen: dict[tuple[int, int, int], None] = {}
    for v in frames.reshape(-1, 3):
        v = v if tuple(v) > tuple(-v) else -v
        seen.setdefault(tuple(v), None)
    dirs = np.array(sorted(seen), np.int64)
    return StencilSet(frames, len_sq, dirs, (dirs * dirs).sum(axis=1).astype(float))


# ---------------------------------------------------------------------------
# discrete operators


@njit(cache=True, parallel=True)
def _op_fields_kernel(u, h2, frames, flen2, dirs, dlen2, fh, lmin):
    nx, ny, nz = u.shape
    for i in prange(2, nx - 2):
        for j in range(2, ny - 2):
            for k in range(2, nz - 2):
                c2 = 2.0 * u[i, j, k]
                best = 1.0e300
                for f in range(frames.shape[0]):
                    s = 0.0
                    for a in range(3):
                        di, dj, dk = frames[f, a, 0], frames[f, a, 1], frames[f, a, 2]
                        dd = (u[i + di, j + dj, k + dk] - c2 + u[i - di, j - dj, k - dk]) / (flen2[f, a] * h2)
                        s += math.atan(dd)
                    if s < best:
                        best = s
                fh[i, j, k] = best
                mn = 1.0e300
                for d in range(dirs.shape[0]):
                    di, dj, dk = dirs[d, 0], dirs[d, 1], dirs[d, 2]
                    dd = (u[i + di, j + dj, k + dk] - c2 + u[i - di, j - dj, k - dk]) / (dlen2[d] * h2)
                    if dd < mn:
                        mn = dd
                lmin[i, j, k] = mn


def operator_fields(stencil: StencilSet, field: ScalarField3):
    """All four discrete operators as full arrays (NaN off the interior)."""
    u = field.values
    h2 = field.grid.spacing ** 2
    fh = np.full(u.shape, np.nan)
    lmin = np.full(u.shape, np.nan)
    _op_fields_kernel(
        u, h2, stencil.frames, stencil.frame_len_sq,
        stencil.directions, stencil.dir_len_sq, fh, lmin,
    )
    lap = np.full(u.shape, np.nan)
    d33 = np.full(u.shape, np.nan)
    s = field.grid.interior()
    ii, jj, kk = s
    lap[s] = (
        u[ii.start - 1:ii.stop - 1, jj, kk] + u[ii.start + 1:ii.stop + 1, jj, kk]
        + u[ii, jj.start - 1:jj.stop - 1, kk] + u[ii, jj.start + 1:jj.stop + 1, kk]
        + u[ii, jj, kk.start - 1:kk.stop - 1] + u[ii, jj, kk.start + 1:kk.stop + 1]
        - 6.0 * u[s]
    ) / h2
    d33[s] = (
        u[ii, jj, kk.start - 1:kk.stop - 1] - 2.0 * u[s] + u[ii, jj, kk.start + 1:kk.stop + 1]
    ) / h2
    return fh, lmin, lap, d33


def discrete_ops(stencil: StencilSet, field: ScalarField3, node) -> tuple[float, float, float, float]:
    """(F_h, lambda_min_h, laplacian_h, d33_h) at one interior node."""
    i, j, k = node
    u = field.values
    r = STENCIL_RADIUS
    for a, n in zip((i, j, k), u.shape):
        if a < r or a >= n - r:
            raise ValueError(f"node {node} is within the stencil radius of the boundary")
    h2 = field.grid.spacing ** 2
    c2 = 2.0 * u[i, j, k]

    def second(v, l2):
        return (u[i + v[0], j + v[1], k + v[2]] - c2 + u[i - v[0], j - v[1], k - v[2]]) / (l2 * h2)

    fh = min(
        sum(math.atan(second(fr[a], l2[a])) for a in range(3))
        for fr, l2 in zip(stencil.frames, stencil.frame_len_sq)
    )
    lm = min(second(d, l2) for d, l2 in zip(stencil.directions, stencil.dir_len_sq))
    lap = sum(second(np.eye(3, dtype=int)[a], 1.0) for a in range(3))
    d33 = second(np.array([0, 0, 1]), 1.0)
    return fh, lm, lap, d33


# ---------------------------------------------------------------------------
# reports and problems


@dataclass(frozen=True)
class DirichletProblem:
    c: float


@dataclass(frozen=True)
class BellmanProblem:
    c_star: float


@dataclass(frozen=True)
class ModelProblem:
    forcing: object = None


@dataclass
class SolveReport:
    iterations: int
    residual: float
    mask: np.ndarray | None
    seconds: float
    converged: bool
    problem: object
    mask_stable: bool = True
    history: list = dfield(default_factory=list)


def _damped_loop(grid, u, apply_residual, tol, max_iter, track_mask=False):
    """Shared damped fixed-point driver with double buffering.

    apply_residual(u, out) fills the interior residual field and, when
    track_mask is set, a matching active-branch field; the update is
    u += rho * residual with rho from the stability bound rho = h^2 / 6
    (three directions, unit minimum squared offset, slope of arctan <= 1).
    """
    rho = grid.spacing ** 2 / 6.0
    s = grid.interior()
    res = np.zeros(grid.dims)
    mask = np.zeros(grid.dims, np.uint8) if track_mask else None
    prev_mask = None
    flips: deque = deque(maxlen=100)
    history = []
    t0 = time.perf_counter()
    it = 0
    sup = math.inf
    while it < max_iter:
        apply_residual(u, res, mask)
        if track_mask:
            if prev_mask is not None:
                flips.append(bool(np.any(mask[s] != prev_mask[s])))
            prev_mask = mask.copy()
        if it % 25 == 0:
            sup = float(np.abs(res[s]).max())
            history.append((it, sup))
            if sup <= tol:
                # u is untouched since this residual was measured, so the
                # reported residual is exactly the returned field's
                break
        u[s] += rho * res[s]
        it += 1
    else:
        sup = float(np.abs(res[s]).max())
    converged = sup <= tol
    if not converged:
        warnings.warn(
            f"iteration cap {max_iter} reached with residual {sup:.3e}",
            SolverConvergenceWarning,
        )
    stable = not any(flips)
    if track_mask and not stable:
        warnings.warn(
            "Bellman active set still flipping over the final 100 iterations",
            SolverConvergenceWarning,
        )
    return SolveReport(
        iterations=it, residual=sup, mask=mask,
        seconds=time.perf_counter() - t0, converged=converged,
        problem=None, mask_stable=stable, history=history,
    )


def _dirichlet_init(grid: Grid3, bdata) -> np.ndarray:
    """Boundary data on the two-layer discrete boundary, zero inside."""
    x, y, z = grid.meshgrid()
    u = np.zeros(grid.dims)
    b = grid.boundary_mask()
    vals = bdata(x, y, z)
    if not np.isfinite(vals[b]).all():
        raise ValueError("boundary data is not finite on the discrete boundary")
    u[b] = vals[b]
    return u


def solve_dirichlet(
    c: float,
    bdata,
    grid: Grid3,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    stencil: StencilSet | None = None,
) -> tuple[ScalarField3, SolveReport]:
    """F(D^2 u) = c with two-layer Dirichlet data, by damped iteration."""
    if abs(c) >= 3 * math.pi / 2:
        raise ValueError("level c outside the range of the operator")
    st = stencil or make_wide_stencil()
    u = _dirichlet_init(grid, bdata)
    h2 = grid.spacing ** 2
    s = grid.interior()
    fh = np.full(grid.dims, np.nan)
    lm = np.full(grid.dims, np.nan)

    def apply_residual(u, res, mask):
        _op_fields_kernel(u, h2, st.frames, st.frame_len_sq, st.directions, st.dir_len_sq, fh, lm)
        res[s] = fh[s] - c

    report = _damped_loop(grid, u, apply_residual, tol, max_iter)
    report.problem = DirichletProblem(c)
    return ScalarField3(grid, u), report


def solve_bellman(
    c_star: float,
    bdata,
    grid: Grid3,
    tol: float = 1e-10,
    max_iter: int = 200_000,
    stencil: StencilSet | None = None,
) -> tuple[ScalarField3, SolveReport]:
    """max{F(D^2 w) - c*, lambda_min(D^2 w)} = 0; mask 1 marks nodes where
    the eigenvalue branch attains the max (the determinant branch on the
    two-positive-eigenvalue cone, where sign det = sign lambda_min)."""
    if abs(c_star) >= 3 * math.pi / 2:
        raise ValueError("level c* outside the range of the operator")
    st = stencil or make_wide_stencil()
    u = _dirichlet_init(grid, bdata)
    h2 = grid.spacing ** 2
    s = grid.interior()
    fh = np.full(grid.dims, np.nan)
    lm = np.full(grid.dims, np.nan)

    def apply_residual(u, res, mask):
        _op_fields_kernel(u, h2, st.frames, st.frame_len_sq, st.directions, st.dir_len_sq, fh, lm)
        fb = fh[s] - c_star
        res[s] = np.maximum(fb, lm[s])
        mask[s] = (lm[s] >= fb).astype(np.uint8)

    report = _damped_loop(grid, u, apply_residual, tol, max_iter, track_mask=True)
    report.problem = BellmanProblem(c_star)
    return ScalarField3(grid, u), report


# ---------------------------------------------------------------------------
# model problem


def _model_forcing(grid: Grid3):
    x, y, z = grid.meshgrid()
    return 1.0 - (x * x + y * y + z * z)


def _policy_matrix(grid: Grid3, mask_flat: np.ndarray) -> sp.csr_matrix:
    """Rows: -lap where mask 0, -d33 where mask 1; Dirichlet rows identity."""
    nx, ny, nz = grid.dims
    n = nx * ny * nz
    h2 = grid.spacing ** 2
    interior = ~grid.boundary_mask()
    idx = np.arange(n).reshape(grid.dims, order="F")
    rows, cols, vals = [], [], []

    ii = idx[interior].ravel()
    act = mask_flat[ii] == 1
    # diagonal
    rows.append(ii)
    cols.append(ii)
    vals.append(np.where(act, 2.0 / h2, 6.0 / h2))
    # neighbor couplings
    offs = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    ijk = np.argwhere(interior)
    for di, dj, dk in offs:
        nb = idx[ijk[:, 0] + di, ijk[:, 1] + dj, ijk[:, 2] + dk]
        coef = np.where(act, -1.0 / h2 if dk != 0 else 0.0, -1.0 / h2)
        keep = coef != 0.0
        rows.append(ii[keep])
        cols.append(nb[keep])
        vals.append(coef[keep])
    # Dirichlet identity rows
    bi = idx[grid.boundary_mask()].ravel()
    rows.append(bi)
    cols.append(bi)
    vals.append(np.ones(bi.size))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def solve_model(
    R: float,
    h: float,
    tol: float = 1e-9,
    forcing=None,
    method: str = "policy",
    max_iter: int = 200_000,
    mask0: np.ndarray | None = None,
    v0: np.ndarray | None = None,
) -> tuple[ScalarField3, SolveReport]:
    """max{lap v, v_33 + f} = 0 on [-R,R]^3, v = 0 on the boundary.

    The default forcing f = 1 - |x|^2 is the paper's model; decay at
    infinity is approximated by the zero boundary data, with domain
    enlargement as the corresponding robustness check.  Policy iteration
    alternates branch selection with linear solves (algebraic multigrid,
    warm-started and solved loosely until the active set stops moving);
    "damped" falls back to the explicit monotone iteration.  mask0 and v0
    seed the active set and the first Krylov solve, e.g. from a coarser
    level via refine_to.
    """
    if R < 3:
        raise ValueError("domain radius must be at least 3")
    if h > R / 16:
        raise ValueError("spacing too coarse for the model problem")
    grid = Grid3.centered(R, h)
    f = _model_forcing(grid) if forcing is None else forcing(*grid.meshgrid())
    if method == "damped":
        return _solve_model_damped(grid, f, tol, max_iter, forcing)
    if method != "policy":
        raise ValueError(f"unknown method {method!r}")

    t0 = time.perf_counter()
    s = grid.interior()
    interior = ~grid.boundary_mask()
    h2 = h * h
    n = int(np.prod(grid.dims))
    if mask0 is not None:
        mask = np.zeros(grid.dims, np.uint8)
        mask[interior] = np.asarray(mask0, np.uint8)[interior]
    else:
        mask = np.zeros(grid.dims, np.uint8)
        mask[interior & (f > 0.0)] = 1
    history = []
    idx = np.arange(n).reshape(grid.dims, order="F")
    if v0 is not None:
        seed = np.asarray(v0, float)
        if seed.shape != tuple(grid.dims):
            raise ValueError("v0 shape does not match the grid")
        sol = seed.ravel(order="F").copy()
    else:
        sol = np.zeros(n)

    def linear_solve(mask, x0, lintol):
        A = _policy_matrix(grid, mask.ravel(order="F"))
        rhs = np.zeros(n)
        rhs[idx[interior]] = np.where(mask[interior] == 1, f[interior], 0.0)
        ml = pyamg.ruge_stuben_solver(A, max_coarse=400)
        out = ml.solve(rhs, tol=lintol, accel="bicgstab", maxiter=400, x0=x0)
        v = out.reshape(grid.dims, order="F").copy()
        v[grid.boundary_mask()] = 0.0
        return out, v

    it = 0
    for it in range(1, 31):
        # loose tolerance while hunting for the active set; signs only
        sol, v = linear_solve(mask, sol, 1e-8)
        b0 = _lap_field(v, h2, s)
        b1 = _d33_field(v, h2, s) + f[s]
        new_mask = np.zeros_like(mask)
        new_mask[s] = (b1 >= b0).astype(np.uint8)
        sup = float(np.abs(np.maximum(b0, b1)).max())
        history.append((it, sup))
        if np.array_equal(new_mask, mask):
            break
        mask = new_mask
    if sup > tol:
        sol, v = linear_solve(mask, sol, 1e-13)
        b0 = _lap_field(v, h2, s)
        b1 = _d33_field(v, h2, s) + f[s]
        sup = float(np.abs(np.maximum(b0, b1)).max())
        history.append((it, sup))
    converged = sup <= tol
    if not converged:
        warnings.warn(
            f"policy iteration stopped at residual {sup:.3e}", SolverConvergenceWarning
        )
    report = SolveReport(
        iterations=it, residual=sup, mask=mask,
        seconds=time.perf_counter() - t0, converged=converged,
        problem=ModelProblem(forcing), history=history,
    )
    return ScalarField3(grid, v), report


def dyadic_refine(values: np.ndarray) -> np.ndarray:
    """Interpolate nodal values onto the grid with half the spacing.

    (n1, n2, n3) maps to (2*n1 - 1, 2*n2 - 1, 2*n3 - 1); even output
    nodes coincide with input nodes, odd ones take midpoint averages.
    """
    out = np.asarray(values, float)
    for ax in range(3):
        shape = list(out.shape)
        shape[ax] = 2 * shape[ax] - 1
        dbl = np.empty(shape, float)
        even, odd, lo, hi = ([slice(None)] * 3 for _ in range(4))
        even[ax] = slice(0, None, 2)
        odd[ax] = slice(1, None, 2)
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        dbl[tuple(even)] = out
        dbl[tuple(odd)] = 0.5 * (out[tuple(lo)] + out[tuple(hi)])
        out = dbl
    return out


def dyadic_refine_mask(mask: np.ndarray) -> np.ndarray:
    """Nearest-neighbour refinement of a node mask onto the halved grid."""
    out = np.asarray(mask)
    for ax in range(3):
        out = out.repeat(2, axis=ax)
    return out[:-1, :-1, :-1]


def _lap_field(u, h2, s):
    ii, jj, kk = s
    return (
        u[ii.start - 1:ii.stop - 1, jj, kk] + u[ii.start + 1:ii.stop + 1, jj, kk]
        + u[ii, jj.start - 1:jj.stop - 1, kk] + u[ii, jj.start + 1:jj.stop + 1, kk]
        + u[ii, jj, kk.start - 1:kk.stop - 1] + u[ii, jj, kk.start + 1:kk.stop + 1]
        - 6.0 * u[s]
    ) / h2


def _d33_field(u, h2, s):
    ii, jj, kk = s
    return (
        u[ii, jj, kk.start - 1:kk.stop - 1] - 2.0 * u[s] + u[ii, jj, kk.start + 1:kk.stop + 1]
    ) / h2


def _solve_model_damped(grid, f, tol, max_iter, forcing=None):
    u = np.zeros(grid.dims)
    h2 = grid.spacing ** 2
    s = grid.interior()

    def apply_residual(u, res, mask):
        b0 = _lap_field(u, h2, s)
        b1 = _d33_field(u, h2, s) + f[s]
        res[s] = np.maximum(b0, b1)
        mask[s] = (b1 >= b0).astype(np.uint8)

    report = _damped_loop(grid, u, apply_residual, tol, max_iter, track_mask=True)
    report.problem = ModelProblem(forcing)
    return ScalarField3(grid, u), report


# ---------------------------------------------------------------------------
# residual evaluation


def residual(field: ScalarField3, problem) -> float:
    """Sup-norm of the discrete equation over interior nodes."""
    grid = field.grid
    s = grid.interior()
    if isinstance(problem, DirichletProblem):
        st = make_wide_stencil()
        fh, _, _, _ = operator_fields(st, field)
        return float(np.abs(fh[s] - problem.c).max())
    if isinstance(problem, BellmanProblem):
        st = make_wide_stencil()
        fh, lm, _, _ = operator_fields(st, field)
        return float(np.abs(np.maximum(fh[s] - problem.c_star, lm[s])).max())
    if isinstance(problem, ModelProblem):
        h2 = grid.spacing ** 2
        f = (
            _model_forcing(grid)
            if problem.forcing is None
            else problem.forcing(*grid.meshgrid())
        )
        b0 = _lap_field(field.values, h2, s)
        b1 = _d33_field(field.values, h2, s) + f[s]
        return float(np.abs(np.maximum(b0, b1)).max())
    raise TypeError(f"unknown problem type {type(problem).__name__}")
