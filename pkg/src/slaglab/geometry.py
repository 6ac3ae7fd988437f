"""Gradient-graph geometry and the minimality split of the glued potential.

The graph {(x, grad w(x))} carries the induced metric g = I + (D2w)^2
and the Lagrangian angle theta = F(D2w).  For a Lagrangian gradient
graph the mean-curvature magnitude equals the metric norm of the angle
gradient, so constancy of theta over a piece is the minimality
diagnostic used here: a piece counts as minimal when its sampled
sup |grad theta|_g stays below 1e-6.  This avoids discretizing the
second fundamental form altogether.

The two analytic pieces behave differently.  Inside the body the angle
is the explicit level function, nonconstant with an interior critical
point at the origin, so that piece is never minimal.  On the outer
piece the angle is constant for the exact solution; the sampled norm
only reflects the O(d^3) Taylor truncation of the band jets and grows
like d^2 with the offset, which is why the default band sampling stays
in the inner half of the band.

All functions sample immutable inputs and are safe to call from
threads.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import explicit as ex
from . import freeboundary as fb
from . import transform as tf
from .symtensor import SymMat3, slag_angle_from_eigs, slag_first_from_eigs

__all__ = [
    "GraphMetric",
    "angle_field",
    "minimality_report",
    "swap_match",
]

_MINIMAL_SUP = 1e-6
_BAND_FRACTIONS = (0.125, 0.25, 0.375, 0.5)
_RADIAL_FRACTIONS = (0.2, 0.4, 0.6, 0.8, 0.95, 1.0)
_FD_STEP = 1e-4
_GAP_STEP = 1e-6


@dataclass(frozen=True)
class GraphMetric:
    """Pointwise data of the gradient graph at a base point.

    grad_norm is |grad theta|_g, the g^{-1}-weighted norm of the ambient
    angle gradient, equal to the mean-curvature magnitude of the graph.
    """

    x: np.ndarray
    g: SymMat3
    theta: float
    angle_gradient: np.ndarray
    grad_norm: float


def _metric_rows(pts: np.ndarray, hess: np.ndarray, theta: np.ndarray,
                 grads: np.ndarray) -> list[GraphMetric]:
    g = np.eye(3) + hess @ hess
    z = np.linalg.solve(g, grads[..., None])[..., 0]
    norms = np.sqrt(np.maximum(np.einsum("ni,ni->n", grads, z), 0.0))
    return [
        GraphMetric(
            x=pts[i].copy(),
            g=SymMat3.from_matrix(g[i]),
            theta=float(theta[i]),
            angle_gradient=grads[i].copy(),
            grad_norm=float(norms[i]),
        )
        for i in range(len(pts))
    ]


def _band_rows(field: fb.GluedField, x: np.ndarray) -> list[GraphMetric]:
    ev = field.evaluate(x, order=3, refine=True)
    lam, frame = np.linalg.eigh(ev["hessian"])
    theta = slag_angle_from_eigs(lam)
    first = slag_first_from_eigs(lam, frame)
    grads = np.einsum("nij,nijk->nk", first, ev["third"])
    return _metric_rows(x, ev["hessian"], theta, grads)


def angle_field(p: ex.ModelParams, region: str, mesh_level: int = 4,
                stride: int = 8, fractions=None) -> list[GraphMetric]:
    """Sampled graph geometry over one analytic piece.

    region "inside-K" covers the body with a radial lattice (boundary
    ring included, origin once); the angle and its gradient are the
    exact explicit expressions.  region "outside-band" offsets the
    boundary mesh along outward normals by the given fractions of the
    band half-width; derivatives come from the propagated jets.
    """
    field = fb._default_field(p, mesh_level)
    mesh = field.mesh
    if region == "inside-K":
        fr = _RADIAL_FRACTIONS if fractions is None else tuple(fractions)
        dirs = mesh.directions[::stride]
        radii = mesh.radii[::stride]
        pts = np.vstack([np.zeros((1, 3))]
                        + [f * radii[:, None] * dirs for f in fr])
        theta, grads = ex.theta_field(p, pts, order=1)
        hess = ex.phi_jet_batch(p, pts, order=2).hessian
        return _metric_rows(pts, hess, theta, grads)
    if region == "outside-band":
        fr = _BAND_FRACTIONS if fractions is None else tuple(fractions)
        foots = mesh.points[::stride]
        nus = mesh.fields.nu[::stride]
        rows: list[GraphMetric] = []
        for f in fr:
            rows.extend(_band_rows(field, foots + (f * field.mu) * nus))
        return rows
    raise ValueError(
        f"region must be 'inside-K' or 'outside-band', got {region!r}")


def _boundary_angle_data(p: ex.ModelParams, mesh) -> dict:
    """Angle-gradient norms over every boundary node, with the normal
    lower bound theta_nu / sqrt(g(nu, nu)) that Cauchy-Schwarz gives."""
    pts = mesh.points
    nus = mesh.fields.nu
    _, grads = ex.theta_field(p, pts, order=1)
    hess = ex.phi_jet_batch(p, pts, order=2).hessian
    g = np.eye(3) + hess @ hess
    z = np.linalg.solve(g, grads[..., None])[..., 0]
    norms = np.sqrt(np.einsum("ni,ni->n", grads, z))
    theta_nu = np.einsum("ni,ni->n", grads, nus)
    g_nunu = np.einsum("ni,nij,nj->n", nus, g, nus)
    return {
        "norms": norms,
        "theta_nu": theta_nu,
        "normal_bound": theta_nu / np.sqrt(g_nunu),
    }


def _one_sided_slopes(field: fb.GluedField, pts: np.ndarray, nus: np.ndarray,
                      h: float) -> np.ndarray:
    """nu.D2w.nu slope along the normal from each side, second order.

    Returns (n, 2): columns are the inside and outside one-sided
    derivatives at the boundary.  The outside column is exact up to
    roundoff because the band Hessian is a quadratic polynomial along
    the normal ray.
    """
    base = ex.phi_jet_batch(field.params, pts, order=2).hessian
    h0 = np.einsum("ni,nij,nj->n", nus, base, nus)

    def hnn(side: int, k: int) -> np.ndarray:
        ev = field.evaluate(pts + (side * k * h) * nus, order=2, refine=True)
        return np.einsum("ni,nij,nj->n", nus, ev["hessian"], nus)

    slopes = np.empty((len(pts), 2))
    for col, side in enumerate((-1, +1)):
        slopes[:, col] = side * (4.0 * hnn(side, 1) - hnn(side, 2)
                                 - 3.0 * h0) / (2.0 * h)
    return slopes


def minimality_report(p: ex.ModelParams, mesh_level: int = 4, stride: int = 8,
                      jump_stride: int = 40, fd_step: float = _FD_STEP) -> dict:
    """Minimality verdicts for the two graph pieces with gluing evidence.

    A piece is judged "minimal" exactly when its sampled
    sup |grad theta|_g is at most 1e-6.  delta0 is the minimum
    angle-gradient norm over the boundary: the interior piece touches
    the boundary, so its sup can never fall below delta0 and the
    verdict split is robust.

    Gluing evidence: Hessians agree across the boundary (the gap at
    offset 1e-6 is of the size offset times the bounded third
    derivatives, i.e. C^{2,1} gluing), the third derivative jumps by
    theta_nu / F_nunu in the pure-normal slot and by nothing in any
    other slot, and the jump value is cross-checked against one-sided
    normal stencils of nu.D2w.nu that never look at the jet tensors.

    Returns a JSON-ready dict of plain floats and verdict strings.
    """
    t0 = time.perf_counter()
    field = fb._default_field(p, mesh_level)
    mesh = field.mesh

    pieces = {}
    for region, key in (("inside-K", "interior"), ("outside-band", "exterior")):
        norms = np.array([s.grad_norm for s in angle_field(
            p, region, mesh_level=mesh_level, stride=stride)])
        pieces[key] = {
            "min": float(norms.min()),
            "max": float(norms.max()),
            "verdict": "minimal" if norms.max() <= _MINIMAL_SUP
                       else "non-minimal",
        }

    boundary = _boundary_angle_data(p, mesh)
    origin_theta, origin_grad = ex.theta_field(p, np.zeros((1, 3)), order=1)
    origin_norm = float(np.linalg.norm(origin_grad[0]))

    sub = mesh.points[::jump_stride]
    nus = mesh.fields.nu[::jump_stride]
    phi = ex.phi_jet_batch(p, sub, order=4)
    jets = fb.cauchy_jets(p, sub, order=4)
    _, grads = ex.theta_field(p, sub, order=1)
    lam, frame = np.linalg.eigh(phi.hessian)
    first = slag_first_from_eigs(lam, frame)
    theta_nu = np.einsum("ni,ni->n", grads, nus)
    f_nunu = np.einsum("ni,nij,nj->n", nus, first, nus)
    predicted = theta_nu / f_nunu
    nnn = np.einsum("ni,nj,nk->nijk", nus, nus, nus)
    jump_tensor = phi.third - jets.third
    offslot = np.abs(jump_tensor - predicted[:, None, None, None] * nnn).max()

    slopes = _one_sided_slopes(field, sub, nus, fd_step)
    fd_jump = slopes[:, 0] - slopes[:, 1]
    fd_rel = np.abs(fd_jump - predicted) / np.abs(predicted)

    gap_out = field.evaluate(sub + _GAP_STEP * nus, order=2,
                             refine=True)["hessian"]
    gap_in = field.evaluate(sub - _GAP_STEP * nus, order=2,
                            refine=True)["hessian"]

    return {
        "interior": pieces["interior"],
        "exterior": pieces["exterior"],
        "delta0": float(boundary["norms"].min()),
        "boundary_norm_max": float(boundary["norms"].max()),
        "normal_bound_min": float(boundary["normal_bound"].min()),
        "origin_norm": origin_norm,
        "hessian_gap": float(np.abs(gap_out - gap_in).max()),
        "jump_min": float(predicted.min()),
        "jump_max": float(predicted.max()),
        "jump_offslot_max": float(offslot),
        "jump_fd_rel_max": float(fd_rel.max()),
        "seconds": time.perf_counter() - t0,
    }


def swap_match(p: ex.ModelParams, n_band: int = 8, n_inside: int = 6,
               mesh_level: int = 4, lattice_n: int = 96) -> dict:
    """Point-cloud agreement of the grad-u graph with the swapped w graph.

    Every sampled point (x, grad w(x)) is swapped to (y, x) and matched
    against the inverse-gradient branches over y.  Band sources are kept
    away from the fold circle, where the inversion conditioning is
    known to degrade; interior sources have a whole fiber segment as
    preimage, so agreement there is the distance from x to that
    segment.  Returns the maximal mismatch per piece, JSON-ready.
    """
    field = fb._default_field(p, mesh_level)
    mesh = field.mesh
    eng = tf.default_transform(p, lattice_n, mesh_level)

    xi = ex.zero_direction(p, mesh.points)
    align = np.abs(np.einsum("ni,ni->n", xi, mesh.fields.nu))
    idx = np.flatnonzero(align >= 0.5)
    idx = idx[:: max(len(idx) // n_band, 1)][:n_band]
    sources = mesh.points[idx] + 0.5 * field.mu * mesh.fields.nu[idx]
    ev = field.evaluate(sources, order=1, refine=True)
    band_max = 0.0
    for x, y in zip(sources, ev["gradient"]):
        branches = eng.invert(y)
        band_max = max(band_max, min(
            float(np.linalg.norm(b.x - x)) for b in branches))

    inner_idx = np.linspace(0, len(mesh.points) - 1, n_inside).astype(int)
    inner = 0.55 * mesh.radii[inner_idx, None] * mesh.directions[inner_idx]
    grads = ex.phi_jet_batch(p, inner, order=2).gradient
    fiber_max = 0.0
    for x, y in zip(inner, grads):
        branches = eng.invert(y)
        lo = min(branches, key=lambda b: b.x[2]).x
        hi = max(branches, key=lambda b: b.x[2]).x
        d = hi - lo
        t = np.clip((x - lo) @ d / (d @ d), 0.0, 1.0)
        fiber_max = max(fiber_max, float(np.linalg.norm(lo + t * d - x)))

    return {
        "band_max_mismatch": band_max,
        "fiber_max_mismatch": fiber_max,
        "band_count": int(len(sources)),
        "fiber_count": int(len(inner)),
    }
