"""Spectral calculus for symmetric 3x3 matrices.

Everything downstream differentiates the angle sum F(M) = sum_i arctan(lambda_i(M))
and the determinant through matrix arguments, so this module owns the shared
conventions: eigenvalues sorted ascending, deterministic eigenvector signs, and
derivative tensors stored over the six independent components in the fixed
order (11, 22, 33, 12, 13, 23).

Derivative components follow the full-matrix convention: F_ij = dF/dM_ij with
all nine entries treated as independent, so chain rules contract over both
index orders.  Second derivatives are symmetrized in (i,j) and (k,l); they are
only ever contracted against symmetric tensors, where the symmetrization is
exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Independent-component order for 6-vector / 6x6 storage.
PAIRS6 = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))

# Below this eigenvalue gap, divided differences switch to their limits.
COALESCE_GAP = 1e-7

# Relative eigenvalue-gap threshold under which the closed-form eigenvector
# path is untrustworthy and the Jacobi fallback takes over.
_DEGENERATE_GAP = 1e-6


class SpectralError(ValueError):
    """Raised when a matrix argument is unusable (non-finite, wrong shape)."""


@dataclass(frozen=True)
class SymMat3:
    """Symmetric 3x3 matrix stored as its six independent components."""

    m11: float
    m22: float
    m33: float
    m12: float
    m13: float
    m23: float

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "SymMat3":
        a = np.asarray(mat, dtype=float)
        if a.shape != (3, 3) or not np.all(np.isfinite(a)):
            raise SpectralError("expected a finite 3x3 matrix")
        # Average the off-diagonal pairs so the stored object is symmetric
        # by construction even if the input carries roundoff skew.
        return cls(
            m11=float(a[0, 0]),
            m22=float(a[1, 1]),
            m33=float(a[2, 2]),
            m12=float(0.5 * (a[0, 1] + a[1, 0])),
            m13=float(0.5 * (a[0, 2] + a[2, 0])),
            m23=float(0.5 * (a[1, 2] + a[2, 1])),
        )

    def to_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.m11, self.m12, self.m13],
                [self.m12, self.m22, self.m23],
                [self.m13, self.m23, self.m33],
            ]
        )

    def to_vec6(self) -> np.ndarray:
        return np.array([self.m11, self.m22, self.m33, self.m12, self.m13, self.m23])

    @classmethod
    def from_vec6(cls, v) -> "SymMat3":
        v = np.asarray(v, dtype=float)
        return cls(*v.tolist())


def as_matrix(m) -> np.ndarray:
    """Coerce a SymMat3 or array-like into a finite symmetric 3x3 ndarray."""
    if isinstance(m, SymMat3):
        return m.to_matrix()
    a = np.asarray(m, dtype=float)
    if a.shape != (3, 3):
        raise SpectralError(f"expected 3x3 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SpectralError("matrix entries must be finite")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class Spectral3:
    """Eigendecomposition: ascending eigenvalues and orthonormal frame columns."""

    eigenvalues: np.ndarray  # shape (3,), ascending
    frame: np.ndarray  # shape (3,3), frame[:, k] is the k-th eigenvector

    def reconstruct(self) -> np.ndarray:
        return (self.frame * self.eigenvalues) @ self.frame.T


@dataclass(frozen=True)
class MatDeriv:
    """First and second derivatives of a scalar spectral function at M.

    `first` holds dF/dM_ij.  `second` is the symmetric 6x6 block of tensor
    components F_ij,kl in the PAIRS6 order; `second_tensor` expands it back to
    the full rank-4 tensor for chain-rule contractions.
    """

    first: SymMat3
    second: np.ndarray

    def second_tensor(self) -> np.ndarray:
        t = np.empty((3, 3, 3, 3))
        for a, (i, j) in enumerate(PAIRS6):
            for b, (k, l) in enumerate(PAIRS6):
                v = self.second[a, b]
                t[i, j, k, l] = v
                t[j, i, k, l] = v
                t[i, j, l, k] = v
                t[j, i, l, k] = v
        return t


def _eigvals_cardano(mat: np.ndarray) -> np.ndarray:
    """Closed-form eigenvalues of a symmetric 3x3, ascending.

    Trigonometric form of Cardano's solution.  Dtype-generic so callers can
    run it in extended precision.
    """
    a = mat
    one = a.dtype.type(1)
    q = (a[0, 0] + a[1, 1] + a[2, 2]) / 3
    p1 = a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2
    p2 = (a[0, 0] - q) ** 2 + (a[1, 1] - q) ** 2 + (a[2, 2] - q) ** 2 + 2 * p1
    if p2 == 0:
        return np.array([q, q, q], dtype=a.dtype)
    p = np.sqrt(p2 / 6)
    b = (a - q * np.eye(3, dtype=a.dtype)) / p
    r = (
        b[0, 0] * (b[1, 1] * b[2, 2] - b[1, 2] ** 2)
        - b[0, 1] * (b[0, 1] * b[2, 2] - b[1, 2] * b[0, 2])
        + b[0, 2] * (b[0, 1] * b[1, 2] - b[1, 1] * b[0, 2])
    ) / 2
    r = min(max(r, -one), one)
    phi = np.arccos(r) / 3
    hi = q + 2 * p * np.cos(phi)
    lo = q + 2 * p * np.cos(phi + 2 * np.pi / 3)
    mid = 3 * q - hi - lo
    return np.array([lo, mid, hi], dtype=a.dtype)


def _jacobi_eig(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi rotations; robust for (near-)degenerate spectra."""
    a = mat.copy()
    v = np.eye(3)
    scale = max(1.0, float(np.max(np.abs(a))))
    for _ in range(50):
        off = np.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off <= 1e-16 * scale:
            break
        for p in range(2):
            for q in range(p + 1, 3):
                if abs(a[p, q]) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(3)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], v[:, order]


def _fix_signs(frame: np.ndarray) -> np.ndarray:
    out = frame.copy()
    for k in range(3):
        col = out[:, k]
        thresh = 1e-12 * np.max(np.abs(col))
        for i in range(3):
            if abs(col[i]) > thresh:
                if col[i] < 0:
                    out[:, k] = -col
                break
    return out


def eig3(m) -> Spectral3:
    """Eigendecomposition with deterministic output.

    Closed-form Cardano eigenvalues with cross-product eigenvectors on the
    well-separated path; Jacobi rotations whenever the spectrum is within
    relative gap 1e-6 of degenerate (discriminant within ~1e-12 of zero) or
    the closed-form frame fails its own reconstruction test.
    """
    a = as_matrix(m)
    vals = _eigvals_cardano(a)
    scale = max(1.0, float(np.max(np.abs(vals))))
    gaps = np.diff(vals)
    if np.min(gaps) < _DEGENERATE_GAP * scale:
        jvals, jvecs = _jacobi_eig(a)
        return Spectral3(jvals, _fix_signs(jvecs))

    vecs = np.empty((3, 3))
    ok = True
    for k, which in ((0, 0), (2, 2)):
        b = a - vals[which] * np.eye(3)
        cands = np.stack(
            [
                np.cross(b[0], b[1]),
                np.cross(b[0], b[2]),
                np.cross(b[1], b[2]),
            ]
        )
        norms = np.linalg.norm(cands, axis=1)
        best = int(np.argmax(norms))
        if norms[best] <= 1e-14 * scale * scale:
            ok = False
            break
        vecs[:, which] = cands[best] / norms[best]
    if ok:
        # Cross-product vectors can pick up O(eps/gap) tilt; re-orthogonalize
        # the extreme pair so the returned frame is orthonormal to 1e-12.
        vecs[:, 0] -= np.dot(vecs[:, 0], vecs[:, 2]) * vecs[:, 2]
        vecs[:, 0] /= np.linalg.norm(vecs[:, 0])
        mid = np.cross(vecs[:, 2], vecs[:, 0])
        nm = np.linalg.norm(mid)
        ok = nm > 1e-8
        if ok:
            vecs[:, 1] = mid / nm
            recon = (vecs * vals) @ vecs.T
            ok = np.max(np.abs(recon - a)) <= 1e-11 * (1.0 + scale)
    if not ok:
        jvals, jvecs = _jacobi_eig(a)
        return Spectral3(jvals, _fix_signs(jvecs))
    return Spectral3(vals, _fix_signs(vecs))


def slag_angle(m) -> float:
    """F(M) = arctan(lambda_1) + arctan(lambda_2) + arctan(lambda_3).

    Dtype-preserving: a longdouble input is evaluated and returned in
    longdouble, which difference-quotient checks rely on.
    """
    a = m.to_matrix() if isinstance(m, SymMat3) else np.asarray(m)
    if a.shape != (3, 3):
        raise SpectralError(f"expected 3x3 matrix, got shape {a.shape}")
    if a.dtype not in (np.dtype(np.longdouble),):
        a = a.astype(float)
    a = (a + a.T) / 2
    total = np.sum(np.arctan(_eigvals_cardano(a)))
    return float(total) if a.dtype == np.dtype(float) else total


def _fprime(lam):
    return 1.0 / (1.0 + lam**2)


def _fsecond(lam):
    return -2.0 * lam / (1.0 + lam**2) ** 2


def _divided_fprime(lam: np.ndarray) -> np.ndarray:
    """First divided differences of f'(t) = 1/(1+t^2) over eigenvalue pairs."""
    c = np.empty((3, 3))
    fp = _fprime(lam)
    for a in range(3):
        for b in range(3):
            gap = lam[a] - lam[b]
            if abs(gap) < COALESCE_GAP:
                c[a, b] = _fsecond(0.5 * (lam[a] + lam[b]))
            else:
                c[a, b] = (fp[a] - fp[b]) / gap
    return c


def _pair_block(t4: np.ndarray) -> np.ndarray:
    block = np.empty((6, 6))
    for a, (i, j) in enumerate(PAIRS6):
        for b, (k, l) in enumerate(PAIRS6):
            block[a, b] = t4[i, j, k, l]
    return block


def slag_deriv(m) -> MatDeriv:
    """First and second derivatives of the eigenvalue-angle sum at M.

    First derivative is the spectral function f'(M) with f' = 1/(1+t^2);
    the second derivative uses first divided differences of f' over
    eigenvalue pairs (Daleckii-Krein), with the f'' limit below COALESCE_GAP.
    """
    s = eig3(m)
    lam, u = s.eigenvalues, s.frame
    first = (u * _fprime(lam)) @ u.T
    c = _divided_fprime(lam)
    t4 = np.einsum("ab,ia,jb,ka,lb->ijkl", c, u, u, u, u, optimize=True)
    t4 = 0.25 * (
        t4
        + np.swapaxes(t4, 0, 1)
        + np.swapaxes(t4, 2, 3)
        + np.swapaxes(np.swapaxes(t4, 0, 1), 2, 3)
    )
    return MatDeriv(first=SymMat3.from_matrix(first), second=_pair_block(t4))


_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k, _s in (
    (0, 1, 2, 1.0),
    (1, 2, 0, 1.0),
    (2, 0, 1, 1.0),
    (0, 2, 1, -1.0),
    (2, 1, 0, -1.0),
    (1, 0, 2, -1.0),
):
    _EPS3[_i, _j, _k] = _s


def det3(m) -> float:
    a = as_matrix(m)
    return float(
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] ** 2)
        - a[0, 1] * (a[0, 1] * a[2, 2] - a[1, 2] * a[0, 2])
        + a[0, 2] * (a[0, 1] * a[1, 2] - a[1, 1] * a[0, 2])
    )


def cofactor3(m) -> np.ndarray:
    """Cofactor matrix, cof_ij = d(det)/dM_ij; valid for singular M."""
    a = as_matrix(m)
    return 0.5 * np.einsum("pjk,qmn,jm,kn->pq", _EPS3, _EPS3, a, a, optimize=True)


def det_calculus(m) -> tuple[float, MatDeriv]:
    """Determinant plus its exact polynomial derivative blocks.

    d(det)/dM_ij is the cofactor; d^2(det)/dM_ij dM_kl is linear in M:
    sum_{a,b} eps_{ika} eps_{jlb} M_ab, symmetrized over (i,j) and (k,l).
    """
    a = as_matrix(m)
    cof = cofactor3(a)
    t4 = np.einsum("ika,jlb,ab->ijkl", _EPS3, _EPS3, a, optimize=True)
    t4 = 0.25 * (
        t4
        + np.swapaxes(t4, 0, 1)
        + np.swapaxes(t4, 2, 3)
        + np.swapaxes(np.swapaxes(t4, 0, 1), 2, 3)
    )
    return det3(a), MatDeriv(first=SymMat3.from_matrix(cof), second=_pair_block(t4))


def directional_derivative(md: MatDeriv, e: np.ndarray) -> float:
    """dF[E] = sum_ij F_ij E_ij for a symmetric direction E."""
    return float(np.sum(md.first.to_matrix() * as_matrix(e)))


def quadratic_form(md: MatDeriv, e1: np.ndarray, e2: np.ndarray | None = None) -> float:
    """d2F[E1,E2] = sum F_ij,kl (E1)_ij (E2)_kl for symmetric directions."""
    a = as_matrix(e1)
    b = a if e2 is None else as_matrix(e2)
    return float(np.einsum("ijkl,ij,kl->", md.second_tensor(), a, b, optimize=True))


# Batched helpers shared by the closed-form geometry pipelines.  These accept
# stacked eigen-decompositions (lam: (n,3), u: (n,3,3)) so callers that know
# their spectra analytically skip the generic eigensolver.


def slag_angle_from_eigs(lam: np.ndarray) -> np.ndarray:
    return np.sum(np.arctan(lam), axis=-1)


def slag_first_from_eigs(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("na,nia,nja->nij", _fprime(lam), u, u, optimize=True)


def slag_second_from_eigs(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Batched rank-4 second-derivative tensors, symmetrized."""
    la = lam[:, :, None]
    lb = lam[:, None, :]
    gap = la - lb
    fp = _fprime(lam)
    small = np.abs(gap) < COALESCE_GAP
    denom = np.where(small, 1.0, gap)
    c = (fp[:, :, None] - fp[:, None, :]) / denom
    c = np.where(small, _fsecond(0.5 * (la + lb)), c)
    t4 = np.einsum("nab,nia,njb,nka,nlb->nijkl", c, u, u, u, u, optimize=True)
    return 0.25 * (
        t4
        + np.swapaxes(t4, 1, 2)
        + np.swapaxes(t4, 3, 4)
        + np.swapaxes(np.swapaxes(t4, 1, 2), 3, 4)
    )
