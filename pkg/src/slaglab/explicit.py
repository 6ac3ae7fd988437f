"""Closed-form building blocks of the laboratory.

This module evaluates, exactly, every analytic object the rest of the package
is built on: the convex potential ``phi`` with identically degenerate Hessian,
its level function ``theta`` and spectral data, the paraboloid carrying the
gradient image, the quartic seed solution used by the rotated construction,
and the gradient-graph rotation itself.  All derivatives are hand-derived
rational or polynomial expressions; nothing here differentiates numerically
except the optional cross-check mode of :func:`theta_eval`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Iterator

import numpy as np

from .symtensor import (
    SymMat3,
    slag_angle,
    slag_deriv,
    slag_first_from_eigs,
    slag_second_from_eigs,
)

__all__ = [
    "DomainError",
    "RotationBreakdownError",
    "Jet4",
    "JetBatch",
    "ModelParams",
    "phi_jet",
    "phi_jet_batch",
    "theta_eval",
    "theta_field",
    "lambda_pm",
    "zero_direction",
    "paraboloid_residual",
    "quartic_jet",
    "quartic_jet_batch",
    "rotate_hessian",
    "rotate_point",
    "rotate_gradient",
]


class DomainError(ValueError):
    """A point lies outside the slab |x3| < 1 where phi is defined."""


class RotationBreakdownError(ValueError):
    """I - eps*M is singular, so the rotated Hessian does not exist."""


def _sym_fill3(entries: dict, prefix: tuple, dtype) -> np.ndarray:
    out = np.zeros(prefix + (3, 3, 3), dtype=dtype)
    for idx, val in entries.items():
        for perm in set(permutations(idx)):
            out[(...,) + perm] = val
    return out


def _sym_fill4(entries: dict, prefix: tuple, dtype) -> np.ndarray:
    out = np.zeros(prefix + (3, 3, 3, 3), dtype=dtype)
    for idx, val in entries.items():
        for perm in set(permutations(idx)):
            out[(...,) + perm] = val
    return out


def _check_sym3(t: np.ndarray) -> bool:
    return np.allclose(t, t.transpose(1, 0, 2)) and np.allclose(t, t.transpose(0, 2, 1))


def _check_sym4(t: np.ndarray) -> bool:
    return (
        np.allclose(t, t.transpose(1, 0, 2, 3))
        and np.allclose(t, t.transpose(0, 2, 1, 3))
        and np.allclose(t, t.transpose(0, 1, 3, 2))
    )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Jet4:
    """Derivatives of a scalar field at one point, through order 2, 3, or 4.

    ``third`` and ``fourth`` are stored as full symmetric tensors (10 and 15
    independent components respectively); entries above ``order`` are None,
    never silently zero.  Taylor evaluation helpers treat the jet as a
    polynomial centered at ``x``.
    """

    x: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: SymMat3
    third: np.ndarray | None
    fourth: np.ndarray | None
    order: int

    def __post_init__(self) -> None:
        if self.order not in (2, 3, 4):
            raise ValueError(f"jet order must be 2, 3, or 4, got {self.order}")
        if (self.third is None) != (self.order < 3):
            raise ValueError("third derivatives present iff order >= 3")
        if (self.fourth is None) != (self.order < 4):
            raise ValueError("fourth derivatives present iff order == 4")
        object.__setattr__(self, "x", _frozen(np.asarray(self.x, float).reshape(3)))
        object.__setattr__(self, "gradient", _frozen(np.asarray(self.gradient, float).reshape(3)))
        if self.third is not None:
            t = np.asarray(self.third, float).reshape(3, 3, 3)
            if not _check_sym3(t):
                raise ValueError("third-derivative tensor is not symmetric")
            object.__setattr__(self, "third", _frozen(t))
        if self.fourth is not None:
            q = np.asarray(self.fourth, float).reshape(3, 3, 3, 3)
            if not _check_sym4(q):
                raise ValueError("fourth-derivative tensor is not symmetric")
            object.__setattr__(self, "fourth", _frozen(q))

    def value_at(self, y) -> float:
        d = np.asarray(y, float).reshape(3) - self.x
        out = self.value + self.gradient @ d + 0.5 * d @ self.hessian.to_matrix() @ d
        if self.third is not None:
            out += np.einsum("ijk,i,j,k->", self.third, d, d, d) / 6.0
        if self.fourth is not None:
            out += np.einsum("ijkl,i,j,k,l->", self.fourth, d, d, d, d) / 24.0
        return float(out)

    def gradient_at(self, y) -> np.ndarray:
        d = np.asarray(y, float).reshape(3) - self.x
        g = self.gradient + self.hessian.to_matrix() @ d
        if self.third is not None:
            g = g + 0.5 * np.einsum("ijk,j,k->i", self.third, d, d)
        if self.fourth is not None:
            g = g + np.einsum("ijkl,j,k,l->i", self.fourth, d, d, d) / 6.0
        return g

    def hessian_at(self, y) -> SymMat3:
        d = np.asarray(y, float).reshape(3) - self.x
        h = self.hessian.to_matrix().copy()
        if self.third is not None:
            h += np.einsum("ijk,k->ij", self.third, d)
        if self.fourth is not None:
            h += 0.5 * np.einsum("ijkl,k,l->ij", self.fourth, d, d)
        return SymMat3.from_matrix(h)

    def third_at(self, y) -> np.ndarray:
        if self.third is None:
            raise ValueError("jet order is 2; no third derivatives")
        d = np.asarray(y, float).reshape(3) - self.x
        t = self.third.copy()
        if self.fourth is not None:
            t += np.einsum("ijkl,l->ijk", self.fourth, d)
        return t

    def rotated(self, frame: np.ndarray) -> "Jet4":
        """Jet components along the columns of an orthonormal frame.

        The base point is kept; displacement arguments of the Taylor helpers
        must then be supplied in frame coordinates.
        """
        r = np.asarray(frame, float)
        g = r.T @ self.gradient
        h = SymMat3.from_matrix(r.T @ self.hessian.to_matrix() @ r)
        t = None
        q = None
        if self.third is not None:
            t = np.einsum("ijk,ia,jb,kc->abc", self.third, r, r, r, optimize=True)
        if self.fourth is not None:
            q = np.einsum("ijkl,ia,jb,kc,ld->abcd", self.fourth, r, r, r, r, optimize=True)
        return Jet4(self.x, self.value, g, h, t, q, self.order)


@dataclass(frozen=True)
class JetBatch:
    """Stacked jets at many points; the vectorized twin of :class:`Jet4`.

    ``hessian`` is kept as an (n, 3, 3) array rather than SymMat3 instances
    because every consumer immediately feeds it to batched linear algebra.
    """

    x: np.ndarray
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    third: np.ndarray | None
    fourth: np.ndarray | None
    order: int

    def __len__(self) -> int:
        return self.x.shape[0]

    def jet(self, i: int) -> Jet4:
        return Jet4(
            self.x[i],
            float(self.value[i]),
            self.gradient[i],
            SymMat3.from_matrix(self.hessian[i]),
            None if self.third is None else self.third[i],
            None if self.fourth is None else self.fourth[i],
            self.order,
        )

    def __iter__(self) -> Iterator[Jet4]:
        return (self.jet(i) for i in range(len(self)))

    def value_at(self, y: np.ndarray) -> np.ndarray:
        d = np.asarray(y, float) - self.x
        out = self.value + np.einsum("ni,ni->n", self.gradient, d)
        out = out + 0.5 * np.einsum("nij,ni,nj->n", self.hessian, d, d, optimize=True)
        if self.third is not None:
            out = out + np.einsum("nijk,ni,nj,nk->n", self.third, d, d, d, optimize=True) / 6.0
        if self.fourth is not None:
            out = out + np.einsum(
                "nijkl,ni,nj,nk,nl->n", self.fourth, d, d, d, d, optimize=True
            ) / 24.0
        return out

    def gradient_at(self, y: np.ndarray) -> np.ndarray:
        d = np.asarray(y, float) - self.x
        g = self.gradient + np.einsum("nij,nj->ni", self.hessian, d)
        if self.third is not None:
            g = g + 0.5 * np.einsum("nijk,nj,nk->ni", self.third, d, d, optimize=True)
        if self.fourth is not None:
            g = g + np.einsum("nijkl,nj,nk,nl->ni", self.fourth, d, d, d, optimize=True) / 6.0
        return g

    def hessian_at(self, y: np.ndarray) -> np.ndarray:
        d = np.asarray(y, float) - self.x
        h = self.hessian.copy()
        if self.third is not None:
            h += np.einsum("nijk,nk->nij", self.third, d, optimize=True)
        if self.fourth is not None:
            h += 0.5 * np.einsum("nijkl,nk,nl->nij", self.fourth, d, d, optimize=True)
        return h


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the construction.

    lam scales the potential, eps sets the sublevel offset defining the
    compact region K, eps_r is the rotation parameter of the perturbed
    example.  Band widths mu (jet-extension band around K) and mu_prime
    (injectivity band) are optional; when None the boundary machinery picks
    them from the measured curvature of the extracted surface.
    """

    lam: float = 0.05
    eps: float = 0.05
    eps_r: float = 0.05
    mu: float | None = None
    mu_prime: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lam must be positive and finite, got {self.lam}")
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ValueError(f"eps must be positive and finite, got {self.eps}")
        if not (math.isfinite(self.eps_r) and self.eps_r >= 0):
            raise ValueError(f"eps_r must be nonnegative, got {self.eps_r}")
        for name in ("mu", "mu_prime"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive when given, got {v}")

    @property
    def theta_origin(self) -> float:
        """Level value at the origin, 2*arctan(2*lam)."""
        return 2.0 * math.atan(2.0 * self.lam)

    @property
    def c_star(self) -> float:
        return self.theta_origin + self.eps**2

    @property
    def c(self) -> float:
        return 0.5 * math.pi - self.c_star

    @property
    def theta_r(self) -> float:
        return math.atan(self.eps_r)


def _slab_coords(x) -> tuple:
    p = np.asarray(x)
    if p.shape[-1] != 3:
        raise ValueError(f"expected points with 3 components, got shape {p.shape}")
    dtype = p.dtype if np.issubdtype(p.dtype, np.floating) else np.float64
    p = p.astype(dtype, copy=False)
    x1, x2, x3 = p[..., 0], p[..., 1], p[..., 2]
    if np.any(np.abs(x3) >= 1.0) or not np.all(np.isfinite(p)):
        raise DomainError("phi requires |x3| < 1 and finite coordinates")
    return p, x1, x2, x3, dtype


def _phi_fields(lam: float, x, order: int) -> tuple:
    """Value through fourth-derivative tensors of phi, any leading shape."""
    if order not in (2, 3, 4):
        raise ValueError(f"order must be 2, 3, or 4, got {order}")
    p, x1, x2, x3, dtype = _slab_coords(x)
    prefix = p.shape[:-1]
    a = 1.0 / (1.0 + x3)
    b = 1.0 / (1.0 - x3)
    a2, a3, a4, a5 = a * a, a**3, a**4, a**5
    b2, b3, b4, b5 = b * b, b**3, b**4, b**5
    s1, s2 = x1 * x1, x2 * x2

    value = lam * (s1 * a + s2 * b)
    grad = np.stack(
        [2 * lam * x1 * a, 2 * lam * x2 * b, lam * (s2 * b2 - s1 * a2)], axis=-1
    )
    hess = np.zeros(prefix + (3, 3), dtype=dtype)
    hess[..., 0, 0] = 2 * lam * a
    hess[..., 1, 1] = 2 * lam * b
    hess[..., 2, 2] = 2 * lam * (s1 * a3 + s2 * b3)
    hess[..., 0, 2] = hess[..., 2, 0] = -2 * lam * x1 * a2
    hess[..., 1, 2] = hess[..., 2, 1] = 2 * lam * x2 * b2

    third = None
    fourth = None
    if order >= 3:
        third = _sym_fill3(
            {
                (0, 0, 2): -2 * lam * a2,
                (1, 1, 2): 2 * lam * b2,
                (0, 2, 2): 4 * lam * x1 * a3,
                (1, 2, 2): 4 * lam * x2 * b3,
                (2, 2, 2): 6 * lam * (s2 * b4 - s1 * a4),
            },
            prefix,
            dtype,
        )
    if order == 4:
        fourth = _sym_fill4(
            {
                (0, 0, 2, 2): 4 * lam * a3,
                (1, 1, 2, 2): 4 * lam * b3,
                (0, 2, 2, 2): -12 * lam * x1 * a4,
                (1, 2, 2, 2): 12 * lam * x2 * b4,
                (2, 2, 2, 2): 24 * lam * (s1 * a5 + s2 * b5),
            },
            prefix,
            dtype,
        )
    return p, value, grad, hess, third, fourth


def phi_jet(p: ModelParams, x, order: int = 4) -> Jet4:
    """Exact jet of phi(x) = lam*x1^2/(1+x3) + lam*x2^2/(1-x3)."""
    pt, value, grad, hess, third, fourth = _phi_fields(p.lam, np.asarray(x).reshape(3), order)
    return Jet4(pt, float(value), grad, SymMat3.from_matrix(hess), third, fourth, order)


def phi_jet_batch(p: ModelParams, x: np.ndarray, order: int = 2) -> JetBatch:
    """Stacked phi jets at an (n, 3) array of points."""
    pts = np.asarray(x, float)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, 3) array, got shape {pts.shape}")
    pt, value, grad, hess, third, fourth = _phi_fields(p.lam, pts, order)
    return JetBatch(pt, value, grad, hess, third, fourth, order)


def lambda_pm(p: ModelParams, x) -> tuple:
    """Nonzero Hessian eigenvalues of phi, largest first.

    Closed form with a = 1/(1+x3), b = 1/(1-x3): half the trace of the rank-2
    block plus/minus the discriminant root.  The third eigenvalue is 0.
    """
    _, x1, x2, x3, _ = _slab_coords(x)
    a = 1.0 / (1.0 + x3)
    b = 1.0 / (1.0 - x3)
    s1, s2 = x1 * x1, x2 * x2
    mean = a * b + 0.5 * (a**3 * s1 + b**3 * s2)
    disc = 0.25 * (2 * a * b * x3 + (b**3 * s2 - a**3 * s1)) ** 2 + a**3 * b**3 * s1 * s2
    root = np.sqrt(disc)
    return 2 * p.lam * (mean + root), 2 * p.lam * (mean - root)


def zero_direction(p: ModelParams, x) -> np.ndarray:
    """Unit kernel vector of the phi Hessian, third component positive.

    Proportional to (x1/(1+x3), -x2/(1-x3), 1) at every point of the slab,
    so it never degenerates and needs no eigensolver.
    """
    _, x1, x2, x3, _ = _slab_coords(x)
    v = np.stack([x1 / (1.0 + x3), -x2 / (1.0 - x3), np.ones_like(x3)], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def theta_eval(p: ModelParams, x, method: str = "analytic") -> tuple:
    """Level function theta = F(D2 phi) with gradient and Hessian.

    The analytic path uses the chain rules theta_k = F_ij phi_ijk and
    theta_kl = F_ij phi_ijkl + F_ij,mn phi_ijk phi_mnl.  method="fd" replaces
    both with extended-precision central differences of the value; it exists
    as an independent cross-check of the hardest kernel and is slow.
    """
    if method == "fd":
        return _theta_fd(p, x)
    if method != "analytic":
        raise ValueError(f"method must be 'analytic' or 'fd', got {method!r}")
    jet = phi_jet(p, x, order=4)
    hess = jet.hessian
    theta = slag_angle(hess)
    md = slag_deriv(hess)
    f1 = md.first.to_matrix()
    grad = np.einsum("ij,ijk->k", f1, jet.third)
    h = np.einsum("ij,ijkl->kl", f1, jet.fourth) + np.einsum(
        "ijmn,ijk,mnl->kl", md.second_tensor(), jet.third, jet.third, optimize=True
    )
    return theta, grad, SymMat3.from_matrix(h)


def _theta_value_ld(p: ModelParams, x: np.ndarray):
    _, _, _, hess, _, _ = _phi_fields(p.lam, x.astype(np.longdouble), 2)
    return slag_angle(hess)


def _theta_fd(p: ModelParams, x) -> tuple:
    pt = np.asarray(x, np.longdouble).reshape(3)
    h = np.longdouble(1e-4)
    f0 = _theta_value_ld(p, pt)

    def at(*steps):
        q = pt.copy()
        for k, s in steps:
            q[k] += s
        return _theta_value_ld(p, q)

    grad = np.empty(3)
    hess = np.empty((3, 3))
    for k in range(3):
        fp, fm = at((k, h)), at((k, -h))
        grad[k] = float((fp - fm) / (2 * h))
        hess[k, k] = float((fp - 2 * f0 + fm) / (h * h))
    for k in range(3):
        for l in range(k + 1, 3):
            mixed = at((k, h), (l, h)) - at((k, h), (l, -h)) - at((k, -h), (l, h)) + at((k, -h), (l, -h))
            hess[k, l] = hess[l, k] = float(mixed / (4 * h * h))
    theta = float(f0)
    return theta, grad, SymMat3.from_matrix(hess)


def theta_field(p: ModelParams, x: np.ndarray, order: int = 0) -> tuple:
    """Batched theta over (n, 3) points.

    order 0 returns values only (from the eigenvalue closed form); order 1
    adds gradients; order 2 adds Hessians.  Gradient and Hessian batches use
    numpy's symmetric eigensolver plus the divided-difference kernels, which
    is safe here because first derivatives of a spectral function do not
    depend on the eigenframe choice inside degenerate blocks.
    """
    pts = np.asarray(x, float)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, 3) array, got shape {pts.shape}")
    lp, lm = lambda_pm(p, pts)
    values = np.arctan(lp) + np.arctan(lm)
    if order == 0:
        return (values,)
    jets = phi_jet_batch(p, pts, order=3 if order == 1 else 4)
    lam, u = np.linalg.eigh(jets.hessian)
    f1 = slag_first_from_eigs(lam, u)
    grads = np.einsum("nij,nijk->nk", f1, jets.third, optimize=True)
    if order == 1:
        return values, grads
    f2 = slag_second_from_eigs(lam, u)
    hesses = np.einsum("zij,zijkl->zkl", f1, jets.fourth, optimize=True)
    hesses += np.einsum("zijmn,zijk,zmnl->zkl", f2, jets.third, jets.third, optimize=True)
    hesses = 0.5 * (hesses + np.swapaxes(hesses, 1, 2))
    return values, grads, hesses


def paraboloid_residual(p: ModelParams, y) -> np.ndarray | float:
    """Signed distance of y from the gradient-image paraboloid, measured
    vertically: y3 - (y2^2 - y1^2)/(4*lam).  Zero exactly on the image of
    the phi gradient map."""
    q = np.asarray(y, float)
    r = q[..., 2] - (q[..., 1] ** 2 - q[..., 0] ** 2) / (4.0 * p.lam)
    return float(r) if r.ndim == 0 else r


_QUARTIC_THIRD = {
    (0, 0, 0): lambda x1, x2, x3: -3.0 * x1,
    (0, 0, 1): lambda x1, x2, x3: -x2,
    (0, 1, 1): lambda x1, x2, x3: -x1,
    (1, 1, 1): lambda x1, x2, x3: -3.0 * x2,
    (0, 0, 2): lambda x1, x2, x3: 2.0 + 6.0 * x3,
    (1, 1, 2): lambda x1, x2, x3: -2.0 + 6.0 * x3,
    (0, 2, 2): lambda x1, x2, x3: 6.0 * x1,
    (1, 2, 2): lambda x1, x2, x3: 6.0 * x2,
    (2, 2, 2): lambda x1, x2, x3: -2.0 * x3,
}

_QUARTIC_FOURTH = {
    (0, 0, 0, 0): -3.0,
    (0, 0, 1, 1): -1.0,
    (1, 1, 1, 1): -3.0,
    (0, 0, 2, 2): 6.0,
    (1, 1, 2, 2): 6.0,
    (2, 2, 2, 2): -2.0,
}


def _quartic_fields(x, order: int) -> tuple:
    if order not in (2, 3, 4):
        raise ValueError(f"order must be 2, 3, or 4, got {order}")
    p = np.asarray(x, float)
    if p.shape[-1] != 3:
        raise ValueError(f"expected points with 3 components, got shape {p.shape}")
    prefix = p.shape[:-1]
    x1, x2, x3 = p[..., 0], p[..., 1], p[..., 2]
    s1, s2, r2 = x1 * x1, x2 * x2, x1 * x1 + x2 * x2

    value = (
        0.5 * r2
        + x3 * (s1 - s2)
        + 1.5 * x3 * x3 * r2
        - x3**4 / 12.0
        - 0.125 * r2 * r2
    )
    grad = np.stack(
        [
            x1 * (1.0 + 2.0 * x3 + 3.0 * x3 * x3 - 0.5 * r2),
            x2 * (1.0 - 2.0 * x3 + 3.0 * x3 * x3 - 0.5 * r2),
            (s1 - s2) + 3.0 * x3 * r2 - x3**3 / 3.0,
        ],
        axis=-1,
    )
    hess = np.zeros(prefix + (3, 3), dtype=float)
    hess[..., 0, 0] = 1.0 + 2.0 * x3 + 3.0 * x3 * x3 - 0.5 * r2 - s1
    hess[..., 1, 1] = 1.0 - 2.0 * x3 + 3.0 * x3 * x3 - 0.5 * r2 - s2
    hess[..., 2, 2] = 3.0 * r2 - x3 * x3
    hess[..., 0, 1] = hess[..., 1, 0] = -x1 * x2
    hess[..., 0, 2] = hess[..., 2, 0] = x1 * (2.0 + 6.0 * x3)
    hess[..., 1, 2] = hess[..., 2, 1] = x2 * (-2.0 + 6.0 * x3)

    third = None
    fourth = None
    if order >= 3:
        third = _sym_fill3(
            {idx: f(x1, x2, x3) for idx, f in _QUARTIC_THIRD.items()}, prefix, float
        )
    if order == 4:
        fourth = _sym_fill4(
            {idx: np.full(prefix, v) for idx, v in _QUARTIC_FOURTH.items()}, prefix, float
        )
    return p, value, grad, hess, third, fourth


def quartic_jet(x, order: int = 4) -> Jet4:
    """Jet of the quartic seed solution.

    w = (x1^2 + x2^2)/2 + x3*(x1^2 - x2^2)
      + x3^2*(18 x1^2 + 18 x2^2 - x3^2)/12 - (x1^2 + x2^2)^2/8.

    This polynomial is the definition of w for the whole package; it solves
    the operator equation at level pi/2 only up to O(|x|^3), so consumers
    stay inside radii where that truncation error is below their tolerances.
    """
    pt, value, grad, hess, third, fourth = _quartic_fields(np.asarray(x).reshape(3), order)
    return Jet4(pt, float(value), grad, SymMat3.from_matrix(hess), third, fourth, order)


def quartic_jet_batch(x: np.ndarray, order: int = 2) -> JetBatch:
    pts = np.asarray(x, float)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, 3) array, got shape {pts.shape}")
    pt, value, grad, hess, third, fourth = _quartic_fields(pts, order)
    return JetBatch(pt, value, grad, hess, third, fourth, order)


def rotate_hessian(m, eps_r: float):
    """Hessian after rotating the gradient graph: (I - e M)^(-1) (e I + M).

    Accepts a SymMat3 or (..., 3, 3) array and returns the same kind.  Both
    factors are functions of M, so the product is symmetric up to rounding;
    the output is symmetrized.  Eigenvalues map through the arctan addition
    law t -> (e + t)/(1 - e t).
    """
    single = isinstance(m, SymMat3)
    a = m.to_matrix() if single else np.asarray(m, float)
    eye = np.eye(3)
    lhs = eye - eps_r * a
    det = np.linalg.det(lhs)
    scale = (1.0 + eps_r * np.abs(a).max(axis=(-2, -1))) ** 3
    if np.any(np.abs(det) <= 1e-12 * scale):
        raise RotationBreakdownError(
            f"I - eps*M is singular to working precision (eps={eps_r})"
        )
    out = np.linalg.solve(lhs, eps_r * eye + a)
    out = 0.5 * (out + np.swapaxes(out, -2, -1))
    return SymMat3.from_matrix(out) if single else out


def rotate_point(x, g, theta_r: float) -> np.ndarray:
    """Base point of the rotated graph: cos(t)*x - sin(t)*g."""
    return math.cos(theta_r) * np.asarray(x, float) - math.sin(theta_r) * np.asarray(g, float)


def rotate_gradient(x, g, theta_r: float) -> np.ndarray:
    """Gradient of the rotated potential at the rotated point:
    sin(t)*x + cos(t)*g."""
    return math.sin(theta_r) * np.asarray(x, float) + math.cos(theta_r) * np.asarray(g, float)
