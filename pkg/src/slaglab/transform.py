"""Discrete multivalued Legendre transform of the glued potential.

The gradient map of the glued potential collapses every kernel line inside
K to a single image point, so the transform u(y) = x.y - w(x) is multivalued
over the image surface Gamma = grad w(K) and single-valued off it.  This
module samples that structure numerically: a forward graph cloud, Newton
inversion of the gradient map with branch bookkeeping, the slice maps
H(x) = (w_1, w_2, x_3) and T(y) = (y_1, y_2, w_3(H^{-1}(y))), the profile of
the gradient jump across Gamma, local Hölder exponents of grad u, and the
tilted potentials w - x_3^2/k that desingularize the transform.

The forward cloud is built once and never mutated; every query method is a
pure function of it, so instances are safe to share across threads.
"""

from __future__ import annotations

import dataclasses
import math
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from . import explicit as ex
from . import freeboundary as fb

__all__ = [
    "InversionError",
    "GraphSample",
    "JumpProfile",
    "HolderFit",
    "QuadraticPotential",
    "LegendreTransform",
    "kernel_chord",
    "default_transform",
    "invert_gradient",
    "u_eval",
    "t_map",
    "jump_profile",
    "holder_fit",
    "wk_check",
]

_SEED_COUNT = 32
_COARSE_TOL = 1e-7
_FINE_TOL = 1e-13
_COARSE_ITERS = 40
_POLISH_ITERS = 20
_STEP_CAP = 1e-2
_RCOND = 1e-8
_DEDUP_TOL = 1e-6
_KERNEL_RATIO = 1e-6


class InversionError(RuntimeError):
    """No Newton seed produced a preimage; the query point is outside the
    neighborhood covered by the forward graph cloud."""


@dataclasses.dataclass(frozen=True)
class GraphSample:
    """One branch of the transform graph: a source point x, its achieved
    gradient y = grad w(x), the Legendre value ell = x.y - w(x), and the
    branch tag, "inside-K" for kernel-line representatives and "outside-K"
    for the single-valued concave pieces."""

    x: np.ndarray
    y: np.ndarray
    ell: float
    branch: str


@dataclasses.dataclass(frozen=True)
class JumpProfile:
    """One-sided limits of u_3 across the image surface over vertical lines.

    y12 holds the (y1, y2) sample locations, gamma3 the surface height over
    each, jump the extrapolated limit difference u_3(+) - u_3(-), chord the
    x3-extent of the kernel chord of K feeding that line (zero when the line
    misses K), and ok flags the samples where every probe inversion and the
    extrapolation succeeded.
    """

    y12: np.ndarray
    gamma3: np.ndarray
    jump: np.ndarray
    chord: np.ndarray
    ok: np.ndarray


@dataclasses.dataclass(frozen=True)
class HolderFit:
    """Least-squares growth exponent of |grad u(z) - grad u(z0)| in |z - z0|.

    alpha is the fitted log-log slope, decades the span of usable radii,
    and reliable is False when that span is under 1.5 decades or too few
    probes survived the coverage and noise cuts.
    """

    alpha: float
    decades: float
    reliable: bool
    radii: np.ndarray
    gaps: np.ndarray


class QuadraticPotential:
    """Test stand-in for the glued field: w(x) = |x|^2 / 2 everywhere.

    Mirrors the evaluate() contract of the jet-glued potential.  Every point
    is flagged interior and the Hessian is the identity, so the transform
    engine exercises its single-branch path: the inverse gradient is x = y
    and the Legendre value is |y|^2 / 2.
    """

    def evaluate(self, x: np.ndarray, order: int = 2, refine: bool = True) -> dict:
        pts = np.atleast_2d(np.asarray(x, float))
        n = pts.shape[0]
        out = {
            "value": 0.5 * np.einsum("ni,ni->n", pts, pts),
            "gradient": pts.copy(),
            "hessian": np.tile(np.eye(3), (n, 1, 1)),
            "outside": np.zeros(n, bool),
            "distance": np.zeros(n),
        }
        if order >= 3:
            out["third"] = np.zeros((n, 3, 3, 3))
        if order >= 4:
            out["fourth"] = np.zeros((n, 3, 3, 3, 3))
        return out


def _dedup(pts: np.ndarray, tol: float) -> np.ndarray:
    order = np.lexsort(pts.T)
    kept: list[np.ndarray] = []
    for q in pts[order]:
        if all(np.linalg.norm(q - r) > tol for r in kept):
            kept.append(q)
    out = np.array(kept)
    return out[np.argsort(out[:, 2])]


class LegendreTransform:
    """Numerical Legendre transform of a potential sampled forward once.

    The engine lays a lattice of sources over [lo, hi], keeps the points the
    ``keep`` filter accepts, records (x, grad w(x), x.grad w - w) for each,
    and answers every inverse query by Newton iteration seeded from the
    nearest forward samples.  ``inside_fn`` must report membership in the
    degenerate core K; it is only needed by fields whose Hessian has a
    kernel there.  The cloud is immutable and all queries are pure.
    """

    def __init__(self, field, lo, hi, n: int = 96, keep=None, inside_fn=None,
                 params: ex.ModelParams | None = None):
        lo = np.asarray(lo, float).reshape(3)
        hi = np.asarray(hi, float).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
            raise ValueError("cloud box must be finite with hi > lo componentwise")
        if n < 8:
            raise ValueError(f"cloud resolution must be at least 8 per axis, got {n}")
        self.field = field
        self.params = params
        self._keep = keep
        self._inside = inside_fn
        self._box = (lo, hi)

        axes = [np.linspace(lo[i], hi[i], n) for i in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        if keep is not None:
            pts = pts[keep(pts)]
        if len(pts) == 0:
            raise ValueError("no cloud point survived the keep filter")

        vals = np.empty(len(pts))
        grads = np.empty((len(pts), 3))
        inner = np.empty(len(pts), bool)
        for a in range(0, len(pts), 200_000):
            b = min(a + 200_000, len(pts))
            ev = field.evaluate(pts[a:b], order=2, refine=False)
            vals[a:b] = ev["value"]
            grads[a:b] = ev["gradient"]
            inner[a:b] = ~ev["outside"]
        self.cloud_x = pts
        self.cloud_y = grads
        self.cloud_ell = np.einsum("ni,ni->n", pts, grads) - vals
        self.cloud_inside = inner
        # seed pools are split by side: the gradient is constant along every
        # kernel line of K, so interior samples pile up on the image surface
        # and would crowd band samples out of any joint nearest-seed query
        self._idx_in = np.flatnonzero(inner)
        self._idx_out = np.flatnonzero(~inner)
        self._ytree_in = cKDTree(grads[self._idx_in]) if len(self._idx_in) else None
        self._ytree_out = cKDTree(grads[self._idx_out]) if len(self._idx_out) else None
        self._htree = cKDTree(np.column_stack([grads[:, 0], grads[:, 1], pts[:, 2]]))
        pad = 1e-9 + 1e-6 * (grads.max(axis=0) - grads.min(axis=0))
        self._y_lo = grads.min(axis=0) - pad
        self._y_hi = grads.max(axis=0) + pad

    # -- coverage ----------------------------------------------------------

    def coverage(self) -> dict:
        """Extent of the neighborhood the forward cloud actually covers.

        No canonical domain exists for the transform, so the covered region
        is reported rather than assumed: bounding boxes of the sources and
        of their gradient images, the sample split, and the radius of the
        projected image of the interior samples.
        """
        return {
            "samples": int(len(self.cloud_x)),
            "interior_samples": int(self.cloud_inside.sum()),
            "x_box": np.stack([self.cloud_x.min(axis=0), self.cloud_x.max(axis=0)]),
            "y_box": np.stack([self._y_lo, self._y_hi]),
            "proj_radius": self.proj_radius(),
        }

    def proj_radius(self, interior_only: bool = True) -> float:
        """Largest |(y1, y2)| attained by the sampled gradients.

        With interior_only this is the radius of the projected image
        surface; over the full cloud it is the slightly larger radius the
        band images reach, which bounds where vertical lines stay covered.
        """
        if interior_only:
            if not self.cloud_inside.any():
                return 0.0
            return float(np.linalg.norm(self.cloud_y[self.cloud_inside, :2], axis=1).max())
        return float(np.linalg.norm(self.cloud_y[:, :2], axis=1).max())

    # -- Newton kernels ----------------------------------------------------

    def _valid(self, pts: np.ndarray) -> np.ndarray:
        if self._keep is not None:
            return self._keep(pts)
        lo, hi = self._box
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def _seed_points(self, yq: np.ndarray, per_side: int) -> np.ndarray:
        parts = []
        for tree, idx in ((self._ytree_out, self._idx_out),
                          (self._ytree_in, self._idx_in)):
            if tree is None:
                continue
            k = min(per_side, len(idx))
            _, i = tree.query(yq, k=k)
            parts.append(self.cloud_x[idx[np.atleast_1d(i)]])
        return np.vstack(parts)

    def _newton(self, x0, y, refine, iters, tol):
        """Pseudo-inverse Newton for grad w(x) = y, one seed per row.

        The kernel eigenvalue of the Hessian is truncated so iterates cannot
        slide along the flat directions inside K; rows whose step would
        leave the evaluable region are frozen where they stand.
        """
        x = np.atleast_2d(np.asarray(x0, float)).copy()
        res = np.full(len(x), np.inf)
        alive = self._valid(x)
        for _ in range(iters):
            act = np.flatnonzero(alive & (res > tol))
            if act.size == 0:
                break
            ev = self.field.evaluate(x[act], order=2, refine=refine)
            r = y[None, :] - ev["gradient"]
            rn = np.linalg.norm(r, axis=1)
            res[act] = rn
            move = rn > tol
            if not move.any():
                continue
            rows = act[move]
            lam, vec = np.linalg.eigh(ev["hessian"][move])
            rc = np.einsum("nki,nk->ni", vec, r[move])
            keep = np.abs(lam) > _RCOND * np.abs(lam).max(axis=1, keepdims=True)
            coef = np.where(keep, rc / np.where(keep, lam, 1.0), 0.0)
            step = np.einsum("nik,nk->ni", vec, coef)
            size = np.linalg.norm(step, axis=1, keepdims=True)
            step *= np.minimum(1.0, _STEP_CAP / np.maximum(size, 1e-300))
            nxt = x[rows] + step
            good = self._valid(nxt)
            x[rows[good]] = nxt[good]
            res[rows[good]] = np.inf
            alive[rows[~good]] = False
        return x, res

    def _newton_h(self, x0, yq, refine, iters, tol):
        """Planar Newton for (w_1, w_2)(x) = (y_1, y_2) at frozen x_3."""
        x = np.atleast_2d(np.asarray(x0, float)).copy()
        x[:, 2] = yq[2]
        res = np.full(len(x), np.inf)
        alive = self._valid(x)
        for _ in range(iters):
            act = np.flatnonzero(alive & (res > tol))
            if act.size == 0:
                break
            ev = self.field.evaluate(x[act], order=2, refine=refine)
            r = yq[None, :2] - ev["gradient"][:, :2]
            rn = np.linalg.norm(r, axis=1)
            res[act] = rn
            move = rn > tol
            if not move.any():
                continue
            rows = act[move]
            step = np.linalg.solve(ev["hessian"][move][:, :2, :2], r[move][..., None])[..., 0]
            size = np.linalg.norm(step, axis=1, keepdims=True)
            step *= np.minimum(1.0, _STEP_CAP / np.maximum(size, 1e-300))
            nxt = x[rows].copy()
            nxt[:, :2] += step
            good = self._valid(nxt)
            x[rows[good]] = nxt[good]
            res[rows[good]] = np.inf
            alive[rows[~good]] = False
        return x, res

    def _newton_tilted(self, x0, eta, k, refine, iters, tol):
        """Full Newton for grad w(x) - (2 x_3 / k) e_3 = eta.

        The tilt makes the Jacobian invertible across the whole band, K
        included, so plain solves replace the pseudo-inverse.
        """
        x = np.atleast_2d(np.asarray(x0, float)).copy()
        res = np.full(len(x), np.inf)
        alive = self._valid(x)
        for _ in range(iters):
            act = np.flatnonzero(alive & (res > tol))
            if act.size == 0:
                break
            ev = self.field.evaluate(x[act], order=2, refine=refine)
            g = ev["gradient"].copy()
            g[:, 2] -= 2.0 * x[act, 2] / k
            r = eta[None, :] - g
            rn = np.linalg.norm(r, axis=1)
            res[act] = rn
            move = rn > tol
            if not move.any():
                continue
            rows = act[move]
            jac = ev["hessian"][move].copy()
            jac[:, 2, 2] -= 2.0 / k
            step = np.linalg.solve(jac, r[move][..., None])[..., 0]
            size = np.linalg.norm(step, axis=1, keepdims=True)
            step *= np.minimum(1.0, _STEP_CAP / np.maximum(size, 1e-300))
            nxt = x[rows] + step
            good = self._valid(nxt)
            x[rows[good]] = nxt[good]
            res[rows[good]] = np.inf
            alive[rows[~good]] = False
        return x, res

    # -- gradient inversion and branches -------------------------------------

    def invert(self, y, seeds: int = _SEED_COUNT) -> list[GraphSample]:
        """All branches of the inverse gradient map over y, sorted by x_3.

        Coarse Newton runs from the nearest forward samples on the cached
        jets, survivors are deduplicated and polished on exact footpoint
        jets.  A converged interior point with a Hessian kernel means y lies
        on the image surface; the whole kernel segment is then the preimage
        and is reported as three representatives: the two endpoint limits of
        the outer concave pieces and the segment midpoint.
        """
        yq = np.asarray(y, float).reshape(3)
        if not np.all(np.isfinite(yq)):
            raise ValueError("query gradient must be finite")
        if np.any(yq < self._y_lo) or np.any(yq > self._y_hi):
            raise InversionError(
                "query outside the gradient image of the forward cloud")
        x0 = self._seed_points(yq, max(seeds // 2, 1))
        x1, r1 = self._newton(x0, yq, refine=False, iters=_COARSE_ITERS, tol=_COARSE_TOL)
        cand = x1[r1 <= _COARSE_TOL]
        if len(cand) == 0:
            raise InversionError(
                f"no Newton seed converged at y={np.array2string(yq, precision=6)}; "
                "the point is outside the covered neighborhood")
        cand = _dedup(cand, 10.0 * _DEDUP_TOL)
        x2, r2 = self._newton(cand, yq, refine=True, iters=_POLISH_ITERS, tol=_FINE_TOL)
        cand = x2[r2 <= _FINE_TOL]
        if len(cand) == 0:
            raise InversionError(
                f"polishing lost every branch at y={np.array2string(yq, precision=6)}")
        reps = _dedup(cand, _DEDUP_TOL)
        ev = self.field.evaluate(reps, order=2, refine=True)
        lam = np.abs(np.linalg.eigvalsh(ev["hessian"]))
        degenerate = ~ev["outside"] & (lam.min(axis=1) <= _KERNEL_RATIO * lam.max(axis=1))
        if degenerate.any():
            return self._fiber_branches(reps[np.flatnonzero(degenerate)[0]], yq)
        return [self._sample(ev, i, reps[i]) for i in range(len(reps))]

    def _sample(self, ev: dict, i: int, x: np.ndarray, tag: str | None = None) -> GraphSample:
        g = ev["gradient"][i]
        ell = float(x @ g - ev["value"][i])
        if not math.isfinite(ell):
            raise InversionError("non-finite Legendre value")
        if tag is None:
            tag = "outside-K" if ev["outside"][i] else "inside-K"
        return GraphSample(x=x.copy(), y=g.copy(), ell=ell, branch=tag)

    def _fiber_branches(self, x_in: np.ndarray, yq: np.ndarray) -> list[GraphSample]:
        if self._inside is None:
            raise InversionError(
                "field provides no interior test; kernel-line branches unavailable")
        ev = self.field.evaluate(x_in.reshape(1, 3), order=2, refine=True)
        lam, vec = np.linalg.eigh(ev["hessian"][0])
        d = vec[:, np.argmin(np.abs(lam))]
        if abs(d[2]) < 1e-6:
            raise InversionError("kernel line is horizontal; cannot follow it in x_3")
        d = d / d[2]
        a = -self._crossing(x_in, -d)
        b = self._crossing(x_in, d)
        pts = np.stack([x_in + a * d, x_in + 0.5 * (a + b) * d, x_in + b * d])
        ev3 = self.field.evaluate(pts, order=2, refine=True)
        drift = np.linalg.norm(ev3["gradient"] - yq, axis=1).max()
        if drift > 1e-10:
            raise InversionError(
                f"kernel segment is not straight to tolerance: gradient drift {drift:.2e}")
        tags = ("outside-K", "inside-K", "outside-K")
        return [self._sample(ev3, i, pts[i], tag=tags[i]) for i in range(3)]

    def _crossing(self, x: np.ndarray, d: np.ndarray, s_max: float = 2.0) -> float:
        """Arc length to the boundary of the interior region along x + s d."""

        def inside(s: float) -> bool:
            return bool(self._inside((x + s * d).reshape(1, 3))[0])

        hi = 1e-3
        while inside(hi):
            hi *= 2.0
            if hi > s_max:
                raise InversionError("kernel line never leaves the interior region")
        lo = 0.0
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            if inside(mid):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    # -- the transform and its derivatives -----------------------------------

    def u_value(self, y) -> float:
        """Transform value: the smallest Legendre value over all branches."""
        return min(s.ell for s in self.invert(y))

    def u_values(self, ys) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(ys, float))
        return np.array([self.u_value(q) for q in pts])

    def u_gradient(self, y) -> np.ndarray:
        """Gradient of the transform; equals the minimizing source point."""
        return min(self.invert(y), key=lambda s: s.ell).x.copy()

    def u_jet(self, y) -> tuple[float, np.ndarray, np.ndarray]:
        """(value, gradient, Hessian) of u where it is single-valued.

        The Hessian is the matrix inverse of the potential Hessian at the
        source point; on the image surface no such point exists and the
        query is refused.
        """
        branches = self.invert(y)
        if len(branches) != 1:
            raise InversionError(
                "u has a gradient jump across the image surface here; "
                "second derivatives are undefined")
        s = branches[0]
        hess = self.field.evaluate(s.x.reshape(1, 3), order=2, refine=True)["hessian"][0]
        return s.ell, s.x.copy(), np.linalg.inv(hess)

    # -- slice maps ----------------------------------------------------------

    def t_map(self, y, seeds: int = 8) -> tuple[np.ndarray, float]:
        """T(y) = (y_1, y_2, w_3(H^{-1}(y))) and det DT for H = (w_1, w_2, x_3).

        det DT collapses to the vertical derivative of the third component
        and equals det D2w over the determinant of the planar Hessian block,
        both evaluated at the preimage.
        """
        yq = np.asarray(y, float).reshape(3)
        if not np.all(np.isfinite(yq)):
            raise ValueError("query point must be finite")
        lo, hi = self._box
        if not (lo[2] <= yq[2] <= hi[2]):
            raise InversionError(f"slice height {yq[2]} outside the covered band")
        k = min(seeds, len(self.cloud_x))
        _, idx = self._htree.query(yq, k=k)
        x0 = self.cloud_x[np.atleast_1d(idx)]
        x1, r1 = self._newton_h(x0, yq, refine=False, iters=_COARSE_ITERS, tol=_COARSE_TOL)
        cand = x1[r1 <= _COARSE_TOL]
        if len(cand) == 0:
            raise InversionError(
                f"slice map inversion failed at y={np.array2string(yq, precision=6)}")
        cand = _dedup(cand, 10.0 * _DEDUP_TOL)
        x2, r2 = self._newton_h(cand, yq, refine=True, iters=_POLISH_ITERS, tol=_FINE_TOL)
        if not (r2 <= _FINE_TOL).any():
            raise InversionError(
                f"slice map polishing failed at y={np.array2string(yq, precision=6)}")
        x = x2[np.argmin(r2)]
        ev = self.field.evaluate(x.reshape(1, 3), order=2, refine=True)
        hess = ev["hessian"][0]
        det2 = float(np.linalg.det(hess[:2, :2]))
        det_dt = float(np.linalg.det(hess)) / det2
        t = np.array([yq[0], yq[1], ev["gradient"][0, 2]])
        return t, det_dt

    # -- jump profile ----------------------------------------------------------

    def _probe_x3(self, y: np.ndarray) -> float:
        branches = self.invert(y)
        if len(branches) != 1:
            raise InversionError("probe landed on the image surface")
        return float(branches[0].x[2])

    def _side_reach(self, a: float, b: float, g3: float, sgn: float,
                    hint: float) -> float:
        """Largest vertical offset from the surface that still inverts."""
        d = hint
        for _ in range(40):
            if d < 1e-12:
                return 0.0
            try:
                self._probe_x3(np.array([a, b, g3 + sgn * d]))
                return d
            except InversionError:
                d *= 0.5
        return 0.0

    def jump_profile(self, y12, h_probe: float | None = None) -> JumpProfile:
        """One-sided limits of u_3 over vertical lines, with the chord oracle.

        u_3 equals the x_3 component of the inverse gradient, so each limit
        is extrapolated from four probe heights {4, 8, 16, 32} h_probe above
        or below the surface with a power basis {1, t^1/2, t, t^3/2}; plain
        sampling converges too slowly because grad u is only Hölder-1/2 in
        the vertical.  When h_probe is omitted it is set per line from the
        measured coverage reach, which shrinks toward the surface edge.  The
        chord column is measured independently from the level function along
        the closed-form kernel line.
        """
        if self.params is None:
            raise TypeError("jump profile requires the model potential parameters")
        p = self.params
        y12 = np.atleast_2d(np.asarray(y12, float))
        if y12.shape[1] != 2:
            raise ValueError(f"expected (n, 2) sample locations, got {y12.shape}")
        n = len(y12)
        gamma3 = np.empty(n)
        jump = np.full(n, np.nan)
        chord = np.zeros(n)
        ok = np.zeros(n, bool)
        hint = max(float(self._y_hi[2] - self._y_lo[2]), 1e-9)
        powers = np.array([0.0, 0.5, 1.0, 1.5])
        for i, (a, b) in enumerate(y12):
            g3, t_lo, t_hi, _ = kernel_chord(p, a, b)
            gamma3[i] = g3
            chord[i] = t_hi - t_lo
            if h_probe is None:
                reach = min(self._side_reach(a, b, g3, 1.0, hint),
                            self._side_reach(a, b, g3, -1.0, hint))
                if reach <= 0.0:
                    continue
                h = 0.028 * reach
            else:
                h = h_probe
            offs = h * np.array([4.0, 8.0, 16.0, 32.0])
            basis = offs[:, None] ** powers[None, :]
            try:
                above = [self._probe_x3(np.array([a, b, g3 + d])) for d in offs]
                below = [self._probe_x3(np.array([a, b, g3 - d])) for d in offs]
            except InversionError:
                continue
            cu = np.linalg.solve(basis, np.asarray(above))
            cl = np.linalg.solve(basis, np.asarray(below))
            jump[i] = cu[0] - cl[0]
            ok[i] = True
        return JumpProfile(y12=y12, gamma3=gamma3, jump=jump, chord=chord, ok=ok)

    # -- Hölder exponents -------------------------------------------------------

    def holder_fit(self, z0, side: str, r_lo: float = 1e-12, r_hi: float = 1e-3,
                   per_decade: int = 4) -> HolderFit:
        """Growth exponent of |grad u(z) - grad u(z0)| approaching z0 vertically.

        The reference gradient is the one-sided limit: for z0 on the image
        surface it is the kernel-chord endpoint facing the chosen side (the
        tangency point when the chord degenerates on the surface edge), and
        off the surface it is the plain inverse gradient.  Probe radii sweep
        geometrically and keep only inversions that stay covered and above
        the Newton noise floor, so the usable window adapts to how fast the
        source point runs away from z0.
        """
        if self.params is None:
            raise TypeError("Hölder fits require the model potential parameters")
        if side not in ("above", "below"):
            raise ValueError(f"side must be 'above' or 'below', got {side!r}")
        p = self.params
        z = np.asarray(z0, float).reshape(3)
        sgn = 1.0 if side == "above" else -1.0
        g3, t_lo, t_hi, theta_min = kernel_chord(p, z[0], z[1])
        on_surface = abs(z[2] - g3) <= 1e-9 and theta_min <= p.c_star + 1e-9
        if on_surface:
            t_ref = t_lo if side == "above" else t_hi
            x_ref = _kernel_point(p, z[0], z[1], t_ref)
        else:
            x_ref = self.u_gradient(z)
        gap_cap = 0.8 * getattr(self.field, "mu", np.inf)
        radii: list[float] = []
        gaps: list[float] = []
        r = r_lo
        factor = 10.0 ** (1.0 / per_decade)
        while r <= r_hi:
            q = z + np.array([0.0, 0.0, sgn * r])
            try:
                branches = self.invert(q)
            except InversionError:
                break
            if len(branches) == 1:
                gap = float(np.linalg.norm(branches[0].x - x_ref))
                if gap > gap_cap:
                    break
                if gap >= 1e-8:
                    radii.append(r)
                    gaps.append(gap)
            r *= factor
        radii_a = np.array(radii)
        gaps_a = np.array(gaps)
        if len(radii_a) < 2:
            return HolderFit(alpha=float("nan"), decades=0.0, reliable=False,
                             radii=radii_a, gaps=gaps_a)
        alpha = float(np.polyfit(np.log(radii_a), np.log(gaps_a), 1)[0])
        decades = float(np.log10(radii_a[-1] / radii_a[0]))
        reliable = decades >= 1.5 and len(radii_a) >= 6
        return HolderFit(alpha=alpha, decades=decades, reliable=reliable,
                         radii=radii_a, gaps=gaps_a)

    # -- tilted potentials ------------------------------------------------------

    def _wk_invert(self, k: float, eta: np.ndarray, extra_seeds=None):
        seeds = []
        try:
            seeds.extend(s.x for s in self.invert(eta))
        except InversionError:
            pass
        if extra_seeds is not None:
            seeds.extend(np.atleast_2d(np.asarray(extra_seeds, float)))
        seeds.append(self._seed_points(eta, 4))
        x0 = np.vstack(seeds)
        x1, r1 = self._newton_tilted(x0, eta, k, refine=False,
                                     iters=_COARSE_ITERS, tol=_COARSE_TOL)
        cand = x1[r1 <= _COARSE_TOL]
        if len(cand) == 0:
            raise InversionError("tilted inversion found no preimage")
        cand = _dedup(cand, 10.0 * _DEDUP_TOL)
        x2, r2 = self._newton_tilted(cand, eta, k, refine=True,
                                     iters=_POLISH_ITERS, tol=_FINE_TOL)
        if not (r2 <= _FINE_TOL).any():
            raise InversionError("tilted inversion lost the preimage while polishing")
        return x2[np.argmin(r2)]

    def wk_star(self, k: float, y) -> float:
        """Transform of the tilted potential w - x_3^2 / k at y.

        The tilt removes the Hessian kernel, so the inversion is unique and
        the value single-valued for every k > 0.
        """
        if not (math.isfinite(k) and k > 0):
            raise ValueError(f"tilt parameter must be positive, got {k}")
        eta = np.asarray(y, float).reshape(3)
        x = self._wk_invert(k, eta)
        ev = self.field.evaluate(x.reshape(1, 3), order=2, refine=True)
        return float(x @ eta - ev["value"][0] + x[2] ** 2 / k)

    def wk_check(self, k: float, x) -> tuple[float, float]:
        """Tilt identity residual and dual angle slack at a source point x.

        Checks |w_k^*(grad w(x) - 2 x_3 e_3 / k) - w^*(grad w(x)) + x_3^2/k|
        with both transforms computed by independent Newton inversions, and
        returns alongside it F applied to the inverse tilted Hessian minus
        the dual level pi/2 - c*, which must be positive.
        """
        if not (math.isfinite(k) and k > 0):
            raise ValueError(f"tilt parameter must be positive, got {k}")
        if self.params is None:
            raise TypeError("the dual angle gap requires the model parameters")
        x0 = np.asarray(x, float).reshape(3)
        if not self._valid(x0.reshape(1, 3))[0]:
            raise InversionError("source point outside the covered band")
        ev0 = self.field.evaluate(x0.reshape(1, 3), order=2, refine=True)
        y = ev0["gradient"][0]
        eta = y.copy()
        eta[2] -= 2.0 * x0[2] / k
        xk = self._wk_invert(k, eta, extra_seeds=x0)
        evk = self.field.evaluate(xk.reshape(1, 3), order=2, refine=True)
        wk_star = float(xk @ eta - evk["value"][0] + xk[2] ** 2 / k)
        branch = min(self.invert(y), key=lambda s: float(np.linalg.norm(s.x - x0)))
        residual = abs(wk_star - branch.ell + x0[2] ** 2 / k)
        hk = evk["hessian"][0].copy()
        hk[2, 2] -= 2.0 / k
        dual_angle = float(np.arctan(1.0 / np.linalg.eigvalsh(hk)).sum())
        return residual, dual_angle - self.params.c


# ---------------------------------------------------------------------------
# kernel-line chord oracle


def _kernel_point(p: ex.ModelParams, y1: float, y2: float, t: float) -> np.ndarray:
    c1 = y1 / (2.0 * p.lam)
    c2 = y2 / (2.0 * p.lam)
    return np.array([c1 * (1.0 + t), c2 * (1.0 - t), t])


def kernel_chord(p: ex.ModelParams, y1: float, y2: float,
                 t_span: float = 0.96) -> tuple[float, float, float, float]:
    """Where the kernel line with planar gradient (y1, y2) runs inside K.

    The kernel curves of the model potential are the straight lines
    x(t) = (c1 (1+t), c2 (1-t), t) with c_i = y_i / (2 lam); the gradient is
    constant along each, with height gamma3 = (y2^2 - y1^2) / (4 lam).
    Returns (gamma3, t_lo, t_hi, theta_min) where [t_lo, t_hi] brackets the
    sublevel segment, collapsing to the closest-approach parameter when the
    line misses K, and theta_min is the smallest level value seen.
    """
    c1 = y1 / (2.0 * p.lam)
    c2 = y2 / (2.0 * p.lam)
    gamma3 = (y2 * y2 - y1 * y1) / (4.0 * p.lam)

    def level(t: np.ndarray) -> np.ndarray:
        pts = np.stack([c1 * (1.0 + t), c2 * (1.0 - t), t], axis=-1).reshape(-1, 3)
        (theta,) = ex.theta_field(p, pts)
        return theta

    t = np.linspace(-t_span, t_span, 1921)
    theta = level(t)
    below = theta <= p.c_star
    if not below.any():
        i = int(np.argmin(theta))
        window = (t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)])
        opt = minimize_scalar(lambda s: level(np.array([s]))[0], bounds=window,
                              method="bounded", options={"xatol": 1e-13})
        return gamma3, float(opt.x), float(opt.x), float(opt.fun)
    i0, i1 = np.flatnonzero(below)[[0, -1]]
    if i0 == 0 or i1 == len(t) - 1:
        raise ValueError("kernel chord scan window does not bracket K")

    def cross(lo: float, hi: float) -> float:
        # level is <= c* at exactly one end of the bracket
        f_lo = level(np.array([lo]))[0] - p.c_star
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            if (level(np.array([mid]))[0] - p.c_star > 0.0) == (f_lo > 0.0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    t_lo = cross(t[i0 - 1], t[i0])
    t_hi = cross(t[i1 + 1], t[i1])
    return gamma3, float(t_lo), float(t_hi), float(theta.min())


# ---------------------------------------------------------------------------
# cached default engine and one-shot wrappers


@lru_cache(maxsize=4)
def _cached_transform(p: ex.ModelParams, n: int, mesh_level: int) -> LegendreTransform:
    field = fb._default_field(p, mesh_level)
    node_tree = cKDTree(field.mesh.points)
    lo = field.mesh.points.min(axis=0) - field.mu
    hi = field.mesh.points.max(axis=0) + field.mu

    def keep(pts: np.ndarray) -> np.ndarray:
        # nearest mesh node overestimates the footpoint distance, so this
        # filter can never admit a point beyond the jet band
        (theta,) = ex.theta_field(p, pts)
        dist, _ = node_tree.query(pts)
        return (theta <= p.c_star) | (dist <= 0.999 * field.mu)

    def inside(pts: np.ndarray) -> np.ndarray:
        (theta,) = ex.theta_field(p, pts)
        return theta <= p.c_star

    return LegendreTransform(field, lo, hi, n=n, keep=keep, inside_fn=inside, params=p)


def default_transform(p: ex.ModelParams | None = None, n: int = 96,
                      mesh_level: int = 4) -> LegendreTransform:
    """The shared transform engine of the glued potential for parameters p."""
    return _cached_transform(p if p is not None else ex.ModelParams(), n, mesh_level)


def invert_gradient(p: ex.ModelParams, y, n: int = 96,
                    mesh_level: int = 4) -> list[GraphSample]:
    """All (x, ell) branches of the inverse gradient of the glued potential."""
    return default_transform(p, n, mesh_level).invert(y)


def u_eval(p: ex.ModelParams, y, n: int = 96, mesh_level: int = 4) -> float:
    """Transform value u(y): the minimum Legendre value over the branches."""
    return default_transform(p, n, mesh_level).u_value(y)


def t_map(p: ex.ModelParams, y, n: int = 96,
          mesh_level: int = 4) -> tuple[np.ndarray, float]:
    """The vertical-slice map T and its Jacobian determinant at y."""
    return default_transform(p, n, mesh_level).t_map(y)


def jump_profile(p: ex.ModelParams, y12=None, h_probe: float | None = None, n: int = 96,
                 mesh_level: int = 4) -> JumpProfile:
    """Gradient-jump profile over a grid of vertical lines.

    When y12 is omitted a polar grid is used whose outermost ring sits just
    beyond the projected image surface but still inside the covered band,
    so the samples straddle both the jump region and the single-valued
    exterior.
    """
    tr = default_transform(p, n, mesh_level)
    if y12 is None:
        r_in = tr.proj_radius()
        r_edge = r_in + 0.7 * (tr.proj_radius(interior_only=False) - r_in)
        radii = np.linspace(0.0, r_edge, 5)[1:]
        phi = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
        ring = np.stack([np.outer(radii, np.cos(phi)).ravel(),
                         np.outer(radii, np.sin(phi)).ravel()], axis=1)
        y12 = np.vstack([[0.0, 0.0], ring])
    return tr.jump_profile(y12, h_probe=h_probe)


def holder_fit(p: ex.ModelParams, z0, side: str, n: int = 96,
               mesh_level: int = 4) -> HolderFit:
    """Vertical Hölder exponent of grad u at z0 from the chosen side."""
    return default_transform(p, n, mesh_level).holder_fit(z0, side)


def wk_check(p: ex.ModelParams, k: float, x, n: int = 96,
             mesh_level: int = 4) -> tuple[float, float]:
    """Tilt identity residual and dual angle slack at the source point x."""
    return default_transform(p, n, mesh_level).wk_check(k, x)
