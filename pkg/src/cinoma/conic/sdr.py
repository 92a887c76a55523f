"""Semidefinite relaxation of quadratically constrained beamforming problems.

An :class:`SdrProgram` has Hermitian PSD block variables ``W_1..W_K`` (the
lifted ``w_k w_k^H``) and is::

    minimize    sum_k tr(O_k W_k)
    subject to  sum_k tr(C_jk W_k) >= d_j      for every row j
                W_k >= 0

Each Hermitian block is parameterized by its real diagonal and the real
and imaginary parts of its strict upper triangle; positive
semidefiniteness is imposed on the real symmetric embedding
``[[Re W, -Im W], [Im W, Re W]]`` so that the same cone solver handles it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import RandomizationError
from . import ipm
from .cones import Dims, svec


@dataclass
class SdrProgram:
    sizes: tuple[int, ...]
    objective: list                      # O_k, Hermitian
    constraints: list = field(default_factory=list)   # (list of C_jk, d_j)

    def __post_init__(self):
        self.sizes = tuple(int(n) for n in self.sizes)
        self.objective = [np.asarray(O, dtype=complex) for O in self.objective]
        if len(self.objective) != len(self.sizes):
            raise ValueError("one objective matrix per block required")
        for O, n in zip(self.objective, self.sizes):
            _check_hermitian(O, n)

    def add_constraint(self, mats, rhs):
        mats = [np.asarray(C, dtype=complex) for C in mats]
        if len(mats) != len(self.sizes):
            raise ValueError("one coefficient matrix per block required")
        for C, n in zip(mats, self.sizes):
            _check_hermitian(C, n)
        self.constraints.append((mats, float(rhs)))
        return self

    def evaluate(self, matrices):
        """Objective value and constraint slacks (``>= 0`` when satisfied)."""
        obj = sum(np.real(np.trace(O @ W)) for O, W in zip(self.objective, matrices))
        slack = np.array([sum(np.real(np.trace(C @ W)) for C, W in zip(mats, matrices)) - d
                          for mats, d in self.constraints])
        return float(obj), slack

    def evaluate_vectors(self, vectors):
        return self.evaluate([np.outer(w, w.conj()) for w in vectors])


def _check_hermitian(C, n):
    if C.shape != (n, n) or not np.allclose(C, C.conj().T, atol=1e-12):
        raise ValueError("coefficient matrices must be Hermitian and match the block size")


def _param_count(n):
    return n * n


def _hermitian_from_params(v, n):
    W = np.zeros((n, n), dtype=complex)
    W[np.diag_indices(n)] = v[:n]
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    W[iu] = v[n:n + k] + 1j * v[n + k:n + 2 * k]
    W[(iu[1], iu[0])] = np.conj(W[iu])
    return W


def _trace_coeffs(C, n):
    # tr(C W) as a linear form in the block parameters
    iu = np.triu_indices(n, 1)
    return np.concatenate([np.real(np.diag(C)), 2 * np.real(C[iu]), 2 * np.imag(C[iu])])


def _embedding_matrix(n):
    # columns: svec of the real embedding for each unit parameter
    cols = []
    for i in range(_param_count(n)):
        v = np.zeros(_param_count(n))
        v[i] = 1.0
        W = _hermitian_from_params(v, n)
        E = np.block([[W.real, -W.imag], [W.imag, W.real]])
        cols.append(svec(E))
    return np.array(cols).T


@dataclass
class SdrSolution:
    status: str
    matrices: list
    objective: float


def solve_sdr(program: SdrProgram, tol: float = 1e-8, max_iter: int = 100) -> SdrSolution:
    sizes = program.sizes
    offsets = np.cumsum([0] + [_param_count(n) for n in sizes])
    nx = int(offsets[-1])

    c = np.zeros(nx)
    for k, (O, n) in enumerate(zip(program.objective, sizes)):
        c[offsets[k]:offsets[k + 1]] = _trace_coeffs(O, n)

    rows, rhs = [], []
    for mats, d in program.constraints:
        row = np.zeros(nx)
        for k, (C, n) in enumerate(zip(mats, sizes)):
            row[offsets[k]:offsets[k + 1]] = _trace_coeffs(C, n)
        # sum tr(C W) >= d  ->  -row x <= -d, scaled to a unit-size row
        scale = max(np.linalg.norm(row), abs(d), 1e-300)
        rows.append(-row / scale)
        rhs.append(-d / scale)
    blocks = []
    for k, n in enumerate(sizes):
        M = _embedding_matrix(n)
        B = np.zeros((M.shape[0], nx))
        B[:, offsets[k]:offsets[k + 1]] = -M
        blocks.append(B)
    G = np.vstack([np.array(rows).reshape(-1, nx)] + blocks)
    h = np.concatenate([np.array(rhs, dtype=float), np.zeros(sum(b.shape[0] for b in blocks))])
    dims = Dims(l=len(rows), s=tuple(2 * n for n in sizes))

    sol = ipm.conelp(c, G, h, dims, tol=tol, max_iter=max_iter)
    mats = [_hermitian_from_params(sol.x[offsets[k]:offsets[k + 1]], n)
            for k, n in enumerate(sizes)]
    obj = sol.primal_objective if sol.status == ipm.OPTIMAL else np.nan
    return SdrSolution(sol.status, mats, obj)


def _rescale_lp(gains, costs, rhs):
    """Cheapest nonnegative power scalings ``p`` per candidate.

    ``gains`` has shape (draws, rows, blocks), ``costs`` (draws, blocks).
    Minimizes ``costs @ p`` subject to ``gains @ p >= rhs`` and ``p >= 0``
    by enumerating vertices.  Returns ``(p, value)`` with ``value = inf``
    for candidates without a feasible scaling.
    """
    D, J, K = gains.shape
    rows = np.concatenate([gains, np.broadcast_to(np.eye(K), (D, K, K))], axis=1)
    b = np.concatenate([rhs, np.zeros(K)])
    best_val = np.full(D, np.inf)
    best_p = np.zeros((D, K))
    tol = 1e-12 * max(1.0, np.abs(rhs).max(initial=0.0))
    for combo in itertools.combinations(range(J + K), K):
        M = rows[:, combo, :]
        det = np.linalg.det(M)
        ok = np.abs(det) > 1e-14 * np.prod(np.linalg.norm(M, axis=2), axis=1) + 1e-300
        if not np.any(ok):
            continue
        p = np.full((D, K), np.nan)
        p[ok] = np.linalg.solve(M[ok], np.broadcast_to(b[list(combo)], (ok.sum(), K))[..., None])[..., 0]
        p = np.where(np.abs(p) < 1e-15, 0.0, p)
        feas = ok & np.all(p >= -1e-12, axis=1)
        feas &= np.all(np.einsum("djk,dk->dj", gains, np.maximum(p, 0)) >= rhs - tol, axis=1)
        val = np.einsum("dk,dk->d", costs, np.maximum(p, 0))
        better = feas & (val < best_val)
        best_val[better] = val[better]
        best_p[better] = np.maximum(p[better], 0)
    return best_p, best_val


def extract_rank1(matrices, program: SdrProgram, n_draws: int = 1000, rng=None,
                  rank_tol: float = 1e-6):
    """Recover one beamforming vector per block from an SDR solution.

    If every block is numerically rank one its scaled principal
    eigenvector is used; otherwise Gaussian randomization generates
    ``n_draws`` candidates.  Each candidate is rescaled per block to the
    cheapest scaling that satisfies all constraints, and the cheapest
    feasible candidate is returned.
    """
    rng = np.random.default_rng(rng)
    K = len(matrices)
    if len(set(program.sizes)) > 1:
        raise ValueError("randomization needs blocks of equal size")
    factors, rank_one = [], True
    principal = []
    eigs = [np.linalg.eigh(0.5 * (W + W.conj().T)) for W in matrices]
    scale = max(float(ev[-1]) for ev, _ in eigs)
    for evals, evecs in eigs:
        evals = np.clip(evals, 0.0, None)
        top = evals[-1]
        if top <= max(1e-14, 1e-9 * scale):
            factors.append(np.zeros_like(evecs))
            principal.append(np.zeros(evecs.shape[0], dtype=complex))
            continue
        if len(evals) > 1 and evals[-2] > rank_tol * top:
            rank_one = False
        factors.append(evecs * np.sqrt(evals)[None, :])
        principal.append(np.sqrt(top) * evecs[:, -1])

    cands = [np.array(principal)[None]]
    if not rank_one:
        draws = []
        for F in factors:
            n = F.shape[0]
            xi = (rng.standard_normal((n_draws, n)) + 1j * rng.standard_normal((n_draws, n))) / np.sqrt(2)
            draws.append(xi @ F.T)
        cands.append(np.stack(draws, axis=1))
    V = np.concatenate(cands, axis=0)            # (draws, K, n)
    J = len(program.constraints)
    gains = np.empty((V.shape[0], J, K))
    for j, (mats, _) in enumerate(program.constraints):
        for k in range(K):
            gains[:, j, k] = np.real(np.einsum("di,ij,dj->d", V[:, k].conj(), mats[k], V[:, k]))
    costs = np.stack([np.real(np.einsum("di,ij,dj->d", V[:, k].conj(), program.objective[k], V[:, k]))
                      for k in range(K)], axis=1)
    rhs = np.array([d for _, d in program.constraints])
    p, val = _rescale_lp(gains, costs, rhs)
    best = int(np.argmin(val))
    if not np.isfinite(val[best]):
        raise RandomizationError("no randomized candidate could be rescaled to feasibility")
    return [V[best, k] * np.sqrt(p[best, k]) for k in range(K)]
