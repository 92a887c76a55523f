"""Cone algebra for the interior-point solver.

A cone product is described by :class:`Dims`: ``l`` nonnegative
coordinates, then one second-order cone per entry of ``q`` and one
positive semidefinite cone per entry of ``s``.  PSD blocks are stored
packed with ``svec`` (lower triangle, column-major, off-diagonals scaled
by sqrt(2)) so that the Euclidean inner product of packed vectors equals
the trace inner product of the matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Dims:
    l: int = 0
    q: tuple[int, ...] = field(default_factory=tuple)
    s: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.l < 0 or any(k < 1 for k in self.q) or any(k < 1 for k in self.s):
            raise ValueError(f"invalid cone dimensions {self}")

    @property
    def size(self) -> int:
        return self.l + sum(self.q) + sum(k * (k + 1) // 2 for k in self.s)

    @property
    def degree(self) -> int:
        return self.l + len(self.q) + sum(self.s)

    def blocks(self):
        """Yield ``(kind, slice, order)`` for every cone block."""
        start = 0
        if self.l:
            yield "l", slice(0, self.l), self.l
            start = self.l
        for k in self.q:
            yield "q", slice(start, start + k), k
            start += k
        for k in self.s:
            m = k * (k + 1) // 2
            yield "s", slice(start, start + m), k
            start += m


@lru_cache(maxsize=None)
def _svec_indices(n: int):
    rows, cols = np.tril_indices(n)
    # column-major ordering of the lower triangle
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return rows, cols, scale


@lru_cache(maxsize=None)
def svec_basis(n: int) -> np.ndarray:
    """Matrix ``S`` with ``svec(X) = S @ vec(X)`` for symmetric ``X`` (column-major vec)."""
    rows, cols, _ = _svec_indices(n)
    m = len(rows)
    S = np.zeros((m, n * n))
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            S[k, i + j * n] = 1.0
        else:
            S[k, i + j * n] = S[k, j + i * n] = 1.0 / _SQRT2
    return S


def svec(X: np.ndarray) -> np.ndarray:
    rows, cols, scale = _svec_indices(X.shape[0])
    return X[rows, cols] * scale


def smat(v: np.ndarray, n: int) -> np.ndarray:
    rows, cols, scale = _svec_indices(n)
    X = np.zeros((n, n))
    X[rows, cols] = v / scale
    X[cols, rows] = v / scale
    return X


def identity(dims: Dims) -> np.ndarray:
    e = np.zeros(dims.size)
    for kind, sl, k in dims.blocks():
        if kind == "l":
            e[sl] = 1.0
        elif kind == "q":
            e[sl.start] = 1.0
        else:
            e[sl] = svec(np.eye(k))
    return e


def jordan_product(dims: Dims, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    for kind, sl, k in dims.blocks():
        a, b = u[sl], v[sl]
        if kind == "l":
            out[sl] = a * b
        elif kind == "q":
            out[sl.start] = a @ b
            out[sl.start + 1:sl.stop] = a[0] * b[1:] + b[0] * a[1:]
        else:
            A, B = smat(a, k), smat(b, k)
            out[sl] = svec(0.5 * (A @ B + B @ A))
    return out


def jordan_divide(dims: Dims, lam: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve ``lam o x = v`` for ``x``; PSD blocks of ``lam`` must be diagonal."""
    out = np.empty_like(v)
    for kind, sl, k in dims.blocks():
        a, b = lam[sl], v[sl]
        if kind == "l":
            out[sl] = b / a
        elif kind == "q":
            det = soc_det(a)
            x0 = (a[0] * b[0] - a[1:] @ b[1:]) / det
            out[sl.start] = x0
            out[sl.start + 1:sl.stop] = (b[1:] - x0 * a[1:]) / a[0]
        else:
            d = np.diag(smat(a, k))
            out[sl] = svec(2.0 * smat(b, k) / (d[:, None] + d[None, :]))
    return out


def max_step(dims: Dims, lam: np.ndarray, d: np.ndarray) -> float:
    """Largest ``alpha`` with ``lam + alpha * d`` in the cone (``inf`` if unbounded).

    ``lam`` must be interior; PSD blocks of ``lam`` must be diagonal, which
    holds for the scaled point of the NT scaling.
    """
    alpha = np.inf
    for kind, sl, k in dims.blocks():
        a, b = lam[sl], d[sl]
        if kind == "l":
            neg = b < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-a[neg] / b[neg])))
        elif kind == "q":
            alpha = min(alpha, _soc_step(a, b))
        else:
            r = 1.0 / np.sqrt(np.diag(smat(a, k)))
            D = smat(b, k) * r[:, None] * r[None, :]
            emin = np.linalg.eigvalsh(D)[0]
            if emin < 0:
                alpha = min(alpha, -1.0 / emin)
    return alpha


def _soc_step(u: np.ndarray, d: np.ndarray) -> float:
    # smallest positive root of (u0 + a d0)^2 - |u1 + a d1|^2
    qa = d[0] ** 2 - d[1:] @ d[1:]
    qb = u[0] * d[0] - u[1:] @ d[1:]
    qc = soc_det(u)
    roots = []
    if abs(qa) < 1e-300:
        if qb < 0:
            roots.append(-qc / (2 * qb))
    else:
        disc = qb * qb - qa * qc
        if disc >= 0:
            sq = np.sqrt(disc)
            # numerically stable pair of roots
            t = -(qb + np.copysign(sq, qb))
            if t != 0:
                roots.extend([t / qa, qc / t])
            else:
                roots.append(0.0)
    pos = [r for r in roots if r > 0]
    alpha = min(pos) if pos else np.inf
    if d[0] < 0:
        alpha = min(alpha, -u[0] / d[0])
    return alpha


@dataclass
class Scaling:
    """Nesterov-Todd scaling ``W`` with ``W z = W^{-T} s = lam``."""

    W: np.ndarray
    Winv: np.ndarray
    lam: np.ndarray


def soc_det(u: np.ndarray) -> float:
    """``u0^2 - |u1|^2`` in the factored form that keeps precision near the boundary."""
    r = np.linalg.norm(u[1:])
    return float((u[0] - r) * (u[0] + r))


def _hyperbolic(w: np.ndarray) -> np.ndarray:
    # symmetric Lorentz boost mapping e to w (w'Jw = 1)
    k = len(w)
    H = np.empty((k, k))
    H[0, 0] = w[0]
    H[0, 1:] = H[1:, 0] = w[1:]
    H[1:, 1:] = np.eye(k - 1) + np.outer(w[1:], w[1:]) / (1.0 + w[0])
    return H


def nt_scaling(dims: Dims, s: np.ndarray, z: np.ndarray) -> Scaling:
    m = dims.size
    W = np.zeros((m, m))
    Winv = np.zeros((m, m))
    lam = np.empty(m)
    for kind, sl, k in dims.blocks():
        a, b = s[sl], z[sl]
        if kind == "l":
            r = np.sqrt(a / b)
            W[sl, sl] = np.diag(r)
            Winv[sl, sl] = np.diag(1.0 / r)
            lam[sl] = np.sqrt(a * b)
        elif kind == "q":
            sdet = soc_det(a)
            zdet = soc_det(b)
            if not (sdet > 0 and zdet > 0):
                raise np.linalg.LinAlgError("iterate left the cone interior")
            beta = (sdet / zdet) ** 0.25
            sn = a / np.sqrt(sdet)
            zn = b / np.sqrt(zdet)
            gamma = np.sqrt(0.5 * (1.0 + sn @ zn))
            zj = zn.copy()
            zj[1:] = -zj[1:]
            w = (sn + zj) / (2.0 * gamma)
            wj = w.copy()
            wj[1:] = -wj[1:]
            Wb = beta * _hyperbolic(w)
            W[sl, sl] = Wb
            Winv[sl, sl] = _hyperbolic(wj) / beta
            lam[sl] = Wb @ b
        else:
            S, Z = smat(a, k), smat(b, k)
            Ls = np.linalg.cholesky(S)
            Lz = np.linalg.cholesky(Z)
            U, sv, Vt = np.linalg.svd(Lz.T @ Ls)
            r = Ls @ Vt.T / np.sqrt(sv)[None, :]
            rinv = np.sqrt(sv)[:, None] * (Vt @ np.linalg.inv(Ls))
            B = svec_basis(k)
            W[sl, sl] = B @ np.kron(r.T, r.T) @ B.T
            Winv[sl, sl] = B @ np.kron(rinv.T, rinv.T) @ B.T
            lam[sl] = svec(np.diag(sv))
    return Scaling(W, Winv, lam)
