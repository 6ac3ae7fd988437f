"""Level-set extraction of the compact convex region K, adapted boundary
frames, one-sided jets of the exterior solution, and the glued potential.

The region is K = {theta <= c*} (component of the origin).  Its boundary
carries, at every sample, the outward normal nu, tangents tau1/tau2, the
Hessian kernel direction xi, curvature data, and the third-derivative defect
s = -theta_nu / F_nunu of the exterior solution v of F(D^2 v) = c* with
two-sided contact to phi on the boundary.  Jets of v through order 4 are
propagated from that Cauchy data; the glued field equals phi inside K and
the jet extension of v on the outer band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.spatial import cKDTree

from . import explicit as ex
from .symtensor import SymMat3, det_calculus, quadratic_form, slag_first_from_eigs, slag_second_from_eigs

__all__ = [
    "KExtractionError",
    "OutOfBandError",
    "BoundarySample",
    "BoundaryMesh",
    "DetSignReport",
    "GluedField",
    "GluedJet",
    "icosphere",
    "radial_extent",
    "extract_k",
    "sample_at",
    "tangency_points",
    "cauchy_jet",
    "cauchy_jets",
    "detsign_report",
    "glue_w",
    "bands",
    "fiber_growth",
]


class KExtractionError(RuntimeError):
    """No level crossing found along some ray (offset too large for lam)."""


class OutOfBandError(ValueError):
    """Query point is farther from K than the jet-extension band allows."""


# ---------------------------------------------------------------------------
# sphere mesh


def icosphere(level: int) -> np.ndarray:
    """Unit vectors of a subdivided icosahedron; level 4 gives 2562 nodes."""
    if level < 0:
        raise ValueError("subdivision level must be nonnegative")
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (i, j) if i < j else (j, i)
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return np.array(verts)


# ---------------------------------------------------------------------------
# radial extraction


def radial_extent(p: ex.ModelParams, dirs: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Radius where theta first crosses c* along each unit direction.

    Bracketing by doubling from the origin (theta(0) = c* - eps^2 < c*), then
    bisection; rays that never cross inside the slab-limited search radius
    raise KExtractionError, which is the runtime form of the smallness
    precondition on eps.
    """
    d = np.atleast_2d(np.asarray(dirs, float))
    n = d.shape[0]
    cap = np.where(np.abs(d[:, 2]) > 1e-9, 0.95 / np.maximum(np.abs(d[:, 2]), 1e-9), np.inf)
    cap = np.minimum(cap, 4.0)
    c_star = p.c_star

    def above(r):
        (vals,) = ex.theta_field(p, r[:, None] * d)
        return vals > c_star

    hi = np.full(n, 0.05)
    hi = np.minimum(hi, cap)
    for _ in range(12):
        todo = ~above(hi) & (hi < cap)
        if not todo.any():
            break
        hi = np.where(todo, np.minimum(2.0 * hi, cap), hi)
    bad = ~above(hi)
    if bad.any():
        raise KExtractionError(
            f"{int(bad.sum())} of {n} rays never reach the level c*={c_star:.6f} "
            "inside the search radius; the sublevel set is not compact at these parameters"
        )
    lo = np.zeros(n)
    for _ in range(55):
        mid = 0.5 * (lo + hi)
        up = above(mid)
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.max(hi - lo) <= rtol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# boundary frames


@dataclass(frozen=True)
class BoundarySample:
    """One point of the K boundary with its adapted frame and level data.

    kappa_xi is the normal curvature along the tangential projection of xi;
    it is NaN at the two mesh poles where xi and nu align and the projection
    degenerates.  f_nunu is the normal-normal coefficient of the linearized
    operator, positive for this operator family.
    """

    x0: np.ndarray
    nu: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    xi: np.ndarray
    score: float
    kappa_xi: float
    theta_nu: float
    f_nunu: float
    shape_op: np.ndarray

    @property
    def defect(self) -> float:
        """Third-derivative defect s = v_nnn - phi_nnn = -theta_nu/f_nunu."""
        return -self.theta_nu / self.f_nunu


class _SampleFields:
    """Vectorized frame data for a batch of boundary points."""

    __slots__ = ("x", "nu", "tau1", "tau2", "xi", "score", "kappa_xi",
                 "theta", "theta_nu", "f_nunu", "shape_op", "curvatures")

    def __init__(self, p: ex.ModelParams, pts: np.ndarray):
        pts = np.atleast_2d(np.asarray(pts, float))
        theta, grads, hessians = ex.theta_field(p, pts, order=2)
        gnorm = np.linalg.norm(grads, axis=1)
        nu = grads / gnorm[:, None]
        # tangent seed: coordinate axis least aligned with the normal
        seed = np.eye(3)[np.argmin(np.abs(nu), axis=1)]
        tau1 = seed - np.einsum("ni,ni->n", seed, nu)[:, None] * nu
        tau1 /= np.linalg.norm(tau1, axis=1)[:, None]
        tau2 = np.cross(nu, tau1)
        xi = ex.zero_direction(p, pts)
        score = np.einsum("ni,ni->n", xi, nu)

        taus = np.stack([tau1, tau2], axis=1)
        shape_op = np.einsum("nai,nij,nbj->nab", taus, hessians, taus, optimize=True)
        shape_op /= gnorm[:, None, None]
        shape_op = 0.5 * (shape_op + np.swapaxes(shape_op, 1, 2))
        curvatures = np.linalg.eigvalsh(shape_op)

        xi_t = xi - score[:, None] * nu
        tnorm = np.linalg.norm(xi_t, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            xi_hat = xi_t / tnorm[:, None]
            kappa = np.einsum("ni,nij,nj->n", xi_hat, hessians, xi_hat, optimize=True) / gnorm
        kappa = np.where(tnorm > 1e-8, kappa, np.nan)

        phi_h = ex.phi_jet_batch(p, pts, order=2).hessian
        lam, u = np.linalg.eigh(phi_h)
        f1 = slag_first_from_eigs(lam, u)
        f_nunu = np.einsum("ni,nij,nj->n", nu, f1, nu, optimize=True)

        self.x, self.nu, self.tau1, self.tau2, self.xi = pts, nu, tau1, tau2, xi
        self.score, self.kappa_xi = score, kappa
        self.theta, self.theta_nu, self.f_nunu = theta, gnorm, f_nunu
        self.shape_op, self.curvatures = shape_op, curvatures

    def sample(self, i: int) -> BoundarySample:
        return BoundarySample(
            x0=self.x[i], nu=self.nu[i], tau1=self.tau1[i], tau2=self.tau2[i],
            xi=self.xi[i], score=float(self.score[i]), kappa_xi=float(self.kappa_xi[i]),
            theta_nu=float(self.theta_nu[i]), f_nunu=float(self.f_nunu[i]),
            shape_op=self.shape_op[i],
        )


def sample_at(p: ex.ModelParams, x0, tol: float = 1e-9) -> BoundarySample:
    """Adapted frame at a point expected to lie on the K boundary."""
    fields = _SampleFields(p, np.asarray(x0, float).reshape(1, 3))
    off = abs(float(fields.theta[0]) - p.c_star)
    if off > tol:
        raise ValueError(f"point is off the level set by {off:.3e} (tol {tol:.1e})")
    return fields.sample(0)


@dataclass(frozen=True)
class BoundaryMesh:
    """Boundary samples generated from one icosphere direction per node."""

    directions: np.ndarray
    radii: np.ndarray
    fields: _SampleFields
    level: int
    c_star: float

    def __len__(self) -> int:
        return self.directions.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.fields.x

    def sample(self, i: int) -> BoundarySample:
        return self.fields.sample(i)

    @property
    def samples(self) -> tuple:
        return tuple(self.fields.sample(i) for i in range(len(self)))

    @property
    def min_curvature(self) -> float:
        return float(self.fields.curvatures.min())

    @property
    def max_curvature(self) -> float:
        return float(self.fields.curvatures.max())


def extract_k(p: ex.ModelParams, sphere_mesh_level: int = 4) -> BoundaryMesh:
    dirs = icosphere(sphere_mesh_level)
    radii = radial_extent(p, dirs)
    pts = radii[:, None] * dirs
    return BoundaryMesh(
        directions=dirs, radii=radii, fields=_SampleFields(p, pts),
        level=sphere_mesh_level, c_star=p.c_star,
    )


def bands(p: ex.ModelParams, mesh: BoundaryMesh) -> tuple[float, float]:
    """Jet band mu and injectivity band mu_prime, honoring overrides.

    The default ties the band to the tightest boundary bend so order-4
    extension error stays below the downstream measurement scales.
    """
    mu = p.mu if p.mu is not None else 0.2 / mesh.max_curvature
    mu_prime = p.mu_prime if p.mu_prime is not None else 0.5 * mu
    return mu, mu_prime


# ---------------------------------------------------------------------------
# tangency curve


def tangency_points(p: ex.ModelParams, n_phi: int = 32, tol: float = 1e-12) -> np.ndarray:
    """Points of the boundary where xi is tangent (xi . nu = 0).

    One root per meridian: the signed score is +1 at the north pole and -1
    at the south pole, so bisection in the polar angle always brackets.
    """
    phis = 2.0 * math.pi * np.arange(n_phi) / n_phi
    cos_p, sin_p = np.cos(phis), np.sin(phis)

    def score_at(psi: np.ndarray) -> np.ndarray:
        d = np.stack([np.sin(psi) * cos_p, np.sin(psi) * sin_p, np.cos(psi)], axis=1)
        r = radial_extent(p, d)
        f = _SampleFields(p, r[:, None] * d)
        return f.score

    lo = np.full(n_phi, 1e-6)
    hi = np.full(n_phi, math.pi - 1e-6)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        pos = score_at(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.max(hi - lo) <= tol:
            break
    psi = 0.5 * (lo + hi)
    d = np.stack([np.sin(psi) * cos_p, np.sin(psi) * sin_p, np.cos(psi)], axis=1)
    r = radial_extent(p, d)
    return r[:, None] * d


# ---------------------------------------------------------------------------
# Cauchy jets of the exterior solution


def _project_level(p: ex.ModelParams, pts: np.ndarray, nu: np.ndarray, iters: int = 8) -> np.ndarray:
    """Newton correction along a fixed direction until theta = c*."""
    out = pts.copy()
    for _ in range(iters):
        vals, grads = ex.theta_field(p, out, order=1)
        resid = vals - p.c_star
        slope = np.einsum("ni,ni->n", grads, nu)
        out -= (resid / slope)[:, None] * nu
        if np.max(np.abs(resid)) < 1e-14:
            break
    return out


def _defect_field(p: ex.ModelParams, pts: np.ndarray) -> np.ndarray:
    """s = -theta_nu / F_nunu as a function on the boundary."""
    _, grads = ex.theta_field(p, pts, order=1)
    gnorm = np.linalg.norm(grads, axis=1)
    nu = grads / gnorm[:, None]
    hess = ex.phi_jet_batch(p, pts, order=2).hessian
    lam, u = np.linalg.eigh(hess)
    f1 = slag_first_from_eigs(lam, u)
    f_nunu = np.einsum("ni,nij,nj->n", nu, f1, nu, optimize=True)
    return -gnorm / f_nunu


def cauchy_jets(
    p: ex.ModelParams,
    points: np.ndarray,
    order: int = 4,
    stencil_h: float = 1e-3,
) -> ex.JetBatch:
    """Jets of the exterior solution at boundary points, vectorized.

    Through order 2 the jet is phi's.  The pure-normal third derivative is
    lowered by the defect s; all other third components are phi's.  At order
    4 the correction tensor has frame components: nnnn from the twice
    normally differentiated equation, nnnt from tangential 5-point stencils
    of s along the surface, nntt from s times the shape operator, and zero
    with fewer than two normal slots.
    """
    if order not in (3, 4):
        raise ValueError(f"jet propagation order must be 3 or 4, got {order}")
    f = _SampleFields(p, points)
    n = f.x.shape[0]
    phi = ex.phi_jet_batch(p, f.x, order=4)
    s = -f.theta_nu / f.f_nunu

    nnn = np.einsum("ni,nj,nk->nijk", f.nu, f.nu, f.nu)
    third = phi.third + s[:, None, None, None] * nnn
    if order == 3:
        return ex.JetBatch(f.x, phi.value, phi.gradient, phi.hessian, third, None, 3)

    # tangential derivatives of s via on-surface stencils
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * stencil_h
    ds = np.empty((n, 2))
    for a, tau in enumerate((f.tau1, f.tau2)):
        pts8 = f.x[:, None, :] + offsets[None, :, None] * tau[:, None, :]
        flat = _project_level(p, pts8.reshape(-1, 3), np.repeat(f.nu, 4, axis=0))
        sv = _defect_field(p, flat).reshape(n, 4)
        ds[:, a] = (sv[:, 0] - 8.0 * sv[:, 1] + 8.0 * sv[:, 2] - sv[:, 3]) / (12.0 * stencil_h)

    frame4 = np.zeros((n, 3, 3, 3, 3))
    for idx in product(range(3), repeat=4):
        srt = tuple(sorted(idx))
        if srt[0] == 0 and srt[1] == 0 and srt[2] > 0:
            frame4[(slice(None),) + idx] = s * f.shape_op[:, srt[2] - 1, srt[3] - 1]
        elif srt[0] == 0 and srt[1] == 0 and srt[2] == 0 and srt[3] > 0:
            frame4[(slice(None),) + idx] = ds[:, srt[3] - 1]
    rot = np.stack([f.nu, f.tau1, f.tau2], axis=2)
    partial = np.einsum(
        "zpqrs,zip,zjq,zkr,zls->zijkl", frame4, rot, rot, rot, rot, optimize=True
    )

    lam, u = np.linalg.eigh(phi.hessian)
    f1 = slag_first_from_eigs(lam, u)
    f2 = slag_second_from_eigs(lam, u)
    v3n = np.einsum("nijk,nk->nij", third, f.nu)
    quad = np.einsum("zijkl,zij,zkl->z", f2, v3n, v3n, optimize=True)
    lin = np.einsum(
        "zij,zijkl,zk,zl->z", f1, phi.fourth + partial, f.nu, f.nu, optimize=True
    )
    c4 = -(lin + quad) / f.f_nunu
    fourth = phi.fourth + partial + c4[:, None, None, None, None] * np.einsum(
        "ni,njkl->nijkl", f.nu, nnn
    )
    return ex.JetBatch(f.x, phi.value, phi.gradient, phi.hessian, third, fourth, 4)


def cauchy_jet(p: ex.ModelParams, s: BoundarySample, order: int = 4) -> ex.Jet4:
    return cauchy_jets(p, s.x0.reshape(1, 3), order=order).jet(0)


# ---------------------------------------------------------------------------
# determinant sign diagnostics


@dataclass(frozen=True)
class DetSignReport:
    """Normal derivatives of det(D^2 v) at one boundary sample."""

    case: str
    score: float
    d_nu: float
    d_nunu: float
    identity_rel: float
    scale: float


def detsign_report(p: ex.ModelParams, s: BoundarySample, jet: ex.Jet4 | None = None) -> DetSignReport:
    """First and second normal derivatives of det(D^2 v), with the
    curvature-defect identity discrepancy for the tangential case.

    Classification: |xi.nu| >= 0.1 generic, <= 0.01 tangential, otherwise
    near-tangential (reported, never asserted).  The identity discrepancy is
    meaningful only at genuinely tangential points; at merely small scores it
    carries an O(score) error.
    """
    if jet is None:
        jet = cauchy_jet(p, s, order=4)
    nu = s.nu
    hess = jet.hessian
    _, md = det_calculus(hess)
    v3n = np.einsum("ijk,k->ij", jet.third, nu)
    v4nn = np.einsum("ijkl,k,l->ij", jet.fourth, nu, nu)
    d_nu = float(np.sum(md.first.to_matrix() * v3n))
    d_nunu = float(np.sum(md.first.to_matrix() * v4nn)) + quadratic_form(md, v3n)

    lp, lm = ex.lambda_pm(p, s.x0)
    scale = float(lp * lm * abs(s.defect))
    g_xixi = float(s.xi @ md.first.to_matrix() @ s.xi)
    predicted = s.kappa_xi * g_xixi * s.defect
    identity_rel = abs(d_nunu - predicted) / max(abs(predicted), 1e-300)

    a = abs(s.score)
    case = "generic" if a >= 0.1 else ("tangential" if a <= 0.01 else "near-tangential")
    return DetSignReport(
        case=case, score=float(s.score), d_nu=d_nu, d_nunu=d_nunu,
        identity_rel=float(identity_rel), scale=scale,
    )


# ---------------------------------------------------------------------------
# glued potential


@dataclass(frozen=True)
class GluedJet(ex.Jet4):
    """Jet of the glued potential, tagged with the branch that produced it.

    branch is "phi" inside K (footpoint is None there) and "jet" on the
    outer band, where distance is the footpoint separation.
    """

    branch: str
    distance: float
    footpoint: np.ndarray | None


class GluedField:
    """The potential that equals phi on K and the exterior jet extension on
    the band of width mu around it.

    Queries come in two flavors: ``refine=True`` projects each point to its
    exact boundary footpoint and propagates a fresh jet there (needed for
    1e-9-class assertions), while ``refine=False`` reuses the precomputed
    jets of the nearest mesh sample, which is orders of magnitude faster and
    accurate enough for seeding and bulk sampling.
    """

    def __init__(self, p: ex.ModelParams, mesh_level: int = 4, stencil_h: float = 1e-3):
        self.params = p
        self.mesh = extract_k(p, mesh_level)
        self.mu, self.mu_prime = bands(p, self.mesh)
        self.jets = cauchy_jets(p, self.mesh.points, order=4, stencil_h=stencil_h)
        self._tree = cKDTree(self.mesh.points)
        self._stencil_h = stencil_h

    def distance_to_k(self, x: np.ndarray) -> np.ndarray:
        """Signed distance proxy: negative inside K, else footpoint distance."""
        pts = np.atleast_2d(np.asarray(x, float))
        (theta,) = ex.theta_field(self.params, pts)
        inside = theta <= self.params.c_star
        foot = self.footpoints(pts)
        d = np.linalg.norm(pts - foot, axis=1)
        return np.where(inside, -d, d)

    def footpoints(self, x: np.ndarray, iters: int = 60) -> np.ndarray:
        """Closest boundary points, by tangential pull plus level correction."""
        pts = np.atleast_2d(np.asarray(x, float))
        _, idx = self._tree.query(pts)
        y = self.mesh.points[idx].copy()
        for _ in range(iters):
            vals, grads = ex.theta_field(self.params, y, order=1)
            gn = np.linalg.norm(grads, axis=1)
            nu = grads / gn[:, None]
            d = pts - y
            step = d - np.einsum("ni,ni->n", d, nu)[:, None] * nu
            step -= ((vals - self.params.c_star) / gn)[:, None] * nu
            y += step
            if np.max(np.abs(step)) < 1e-14:
                break
        return y

    def evaluate(self, x: np.ndarray, order: int = 2, refine: bool = True) -> dict:
        """Glued values/derivatives at query points.

        Returns a dict with 'value', 'gradient', 'hessian', branch flags
        ('outside' boolean per point), 'distance', and at order >= 3 the
        third tensors.  Points beyond the band raise OutOfBandError.
        """
        pts = np.atleast_2d(np.asarray(x, float))
        (theta,) = ex.theta_field(self.params, pts)
        outside = theta > self.params.c_star

        n = pts.shape[0]
        out = {
            "value": np.empty(n),
            "gradient": np.empty((n, 3)),
            "hessian": np.empty((n, 3, 3)),
            "outside": outside,
            "distance": np.zeros(n),
        }
        if order >= 3:
            out["third"] = np.empty((n, 3, 3, 3))
        if order >= 4:
            out["fourth"] = np.empty((n, 3, 3, 3, 3))

        if (~outside).any():
            inner = ex.phi_jet_batch(self.params, pts[~outside], order=max(order, 2))
            out["value"][~outside] = inner.value
            out["gradient"][~outside] = inner.gradient
            out["hessian"][~outside] = inner.hessian
            if order >= 3:
                out["third"][~outside] = inner.third
            if order >= 4:
                out["fourth"][~outside] = inner.fourth

        if outside.any():
            q = pts[outside]
            if refine:
                foot = self.footpoints(q)
                jets = cauchy_jets(self.params, foot, order=4, stencil_h=self._stencil_h)
            else:
                _, idx = self._tree.query(q)
                foot = self.mesh.points[idx]
                jets = ex.JetBatch(
                    self.jets.x[idx], self.jets.value[idx], self.jets.gradient[idx],
                    self.jets.hessian[idx], self.jets.third[idx], self.jets.fourth[idx], 4,
                )
            dist = np.linalg.norm(q - jets.x, axis=1)
            if np.any(dist > self.mu * (1.0 + 1e-9)):
                worst = float(dist.max())
                raise OutOfBandError(
                    f"query at distance {worst:.3e} from K exceeds the band mu={self.mu:.3e}"
                )
            out["value"][outside] = jets.value_at(q)
            out["gradient"][outside] = jets.gradient_at(q)
            out["hessian"][outside] = jets.hessian_at(q)
            out["distance"][outside] = dist
            if order >= 3:
                d = q - jets.x
                out["third"][outside] = jets.third + np.einsum(
                    "nijkl,nl->nijk", jets.fourth, d
                )
            if order >= 4:
                out["fourth"][outside] = jets.fourth
        return out

    def glue(self, x, order: int = 4) -> GluedJet:
        pt = np.asarray(x, float).reshape(3)
        (theta,) = ex.theta_field(self.params, pt.reshape(1, 3))
        if theta[0] <= self.params.c_star:
            inner = ex.phi_jet(self.params, pt, order)
            return GluedJet(
                inner.x, inner.value, inner.gradient, inner.hessian,
                inner.third, inner.fourth, order, "phi", 0.0, None,
            )
        foot = self.footpoints(pt.reshape(1, 3))
        jets = cauchy_jets(self.params, foot, order=4, stencil_h=self._stencil_h)
        dist = float(np.linalg.norm(pt - foot[0]))
        if dist > self.mu * (1.0 + 1e-9):
            raise OutOfBandError(
                f"query at distance {dist:.3e} from K exceeds the band mu={self.mu:.3e}"
            )
        d = pt - foot[0]
        third = jets.third[0] + np.einsum("ijkl,l->ijk", jets.fourth[0], d)
        return GluedJet(
            pt,
            float(jets.value_at(pt.reshape(1, 3))[0]),
            jets.gradient_at(pt.reshape(1, 3))[0],
            SymMat3.from_matrix(jets.hessian_at(pt.reshape(1, 3))[0]),
            third if order >= 3 else None,
            jets.fourth[0] if order >= 4 else None,
            order,
            "jet",
            dist,
            foot[0],
        )


@lru_cache(maxsize=4)
def _default_field(p: ex.ModelParams, mesh_level: int) -> GluedField:
    return GluedField(p, mesh_level)


def glue_w(p: ex.ModelParams, x, order: int = 4, mesh_level: int = 4) -> GluedJet:
    """One-shot glued jet; the underlying field is cached per parameter set."""
    return _default_field(p, mesh_level).glue(x, order)


# ---------------------------------------------------------------------------
# gradient growth along the vertical-line preimage


def fiber_growth(field: GluedField, x0: np.ndarray, arcs: np.ndarray, sign: float = 1.0) -> np.ndarray:
    """|grad w(x) - grad w(x0)| along the curve where the first two gradient
    components stay frozen at their x0 values.

    The curve is the preimage of a vertical line under (w_1, w_2, x_3); it
    crosses the boundary transversally at generic points and tangentially on
    the tangency curve, which is what makes the growth exponents differ.
    Parametrized by the x3 offset; traced by a 2x2 Newton continuation.
    """
    p = field.params
    x0 = np.asarray(x0, float).reshape(3)
    g0 = field.evaluate(x0.reshape(1, 3))["gradient"][0]
    target = g0[:2]
    out = np.empty(len(arcs))
    xy = x0[:2].copy()
    for k, t in enumerate(arcs):
        x3 = x0[2] + sign * t
        for _ in range(40):
            pt = np.array([xy[0], xy[1], x3])
            res = field.evaluate(pt.reshape(1, 3), order=2)
            grad = res["gradient"][0]
            r = grad[:2] - target
            if np.abs(r).max() < 1e-13:
                break
            jac = res["hessian"][0][:2, :2]
            xy = xy - np.linalg.solve(jac, r)
        out[k] = np.linalg.norm(grad - g0)
    return out
