"""Homogeneous self-dual interior-point method for linear cone programs.

Solves::

    minimize    c'x
    subject to  G x + s = h
                A x = b
                s in K

together with its dual, where ``K`` is described by :class:`~.cones.Dims`.
Search directions use Nesterov-Todd scaling and a Mehrotra
predictor-corrector; the embedding yields certificates of primal or dual
infeasibility when no optimum exists.  All linear algebra is dense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import cones
from .cones import Dims

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAXITER = "MaxIter"


@dataclass
class ConeSolution:
    status: str
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int


def conelp(c, G, h, dims: Dims, A=None, b=None, tol=1e-8, max_iter=100,
           step_fraction=0.99, regularization=1e-10) -> ConeSolution:
    c = np.asarray(c, dtype=float)
    n = c.size
    G = np.asarray(G, dtype=float).reshape(-1, n)
    h = np.asarray(h, dtype=float)
    if A is None:
        A = np.zeros((0, n))
        b = np.zeros(0)
    A = np.asarray(A, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float)
    m, p = G.shape[0], A.shape[0]
    if m != dims.size or h.size != m or b.size != p:
        raise ValueError("inconsistent problem dimensions")

    nu = dims.degree
    e = cones.identity(dims)
    x, y = np.zeros(n), np.zeros(p)
    s, z = e.copy(), e.copy()
    tau = kappa = 1.0

    bnorm = max(1.0, np.linalg.norm(b))
    hnorm = max(1.0, np.linalg.norm(h))
    cnorm = max(1.0, np.linalg.norm(c))
    N = n + p + m + 1
    ix, iy, iz, it = slice(0, n), slice(n, n + p), slice(n + p, n + p + m), n + p + m
    reg = np.concatenate([np.full(n, regularization), np.full(p, -regularization),
                          np.zeros(m), [0.0]])

    def report(status, it_count):
        t = tau if status == OPTIMAL or status == MAXITER else 1.0
        return ConeSolution(
            status=status, x=x / t, y=y / t, z=z / t, s=s / t,
            primal_objective=float(c @ x / t),
            dual_objective=float(-(h @ z + b @ y) / t),
            primal_residual=pres, dual_residual=dres, gap=relgap,
            iterations=it_count)

    pres = dres = relgap = np.inf
    best = None
    for k in range(max_iter + 1):
        rx = A.T @ y + G.T @ z + c * tau
        ry = b * tau - A @ x
        rz = s + G @ x - h * tau
        rt = kappa + c @ x + b @ y + h @ z

        # primal residual relative to the data or the slack, whichever is larger
        snorm = max(hnorm, np.linalg.norm(s) / tau)
        pres = max(np.linalg.norm(ry) / bnorm, np.linalg.norm(rz) / (tau * snorm))
        dres = np.linalg.norm(rx) / cnorm / tau
        pcost = c @ x / tau
        dcost = -(h @ z + b @ y) / tau
        gap = s @ z / tau**2
        relgap = gap / max(1.0, abs(pcost), abs(dcost))
        if pres <= tol and dres <= tol and relgap <= tol:
            return report(OPTIMAL, k)
        merit = max(pres, dres, relgap)
        if not np.isfinite(merit):
            break
        if best is None or merit < best[0]:
            best = (merit, k, x, y, z, s, tau, kappa, pres, dres, relgap)
        elif merit > 100 * best[0] and k > best[1] + 5:
            break           # rounding errors dominate, stop improving

        hz_by = h @ z + b @ y
        if hz_by < 0:
            pinf = np.linalg.norm(A.T @ y + G.T @ z) / cnorm / -hz_by
            if pinf <= tol:
                pres, dres, relgap = pinf, np.nan, np.nan
                return report(INFEASIBLE, k)
        cx = c @ x
        if cx < 0:
            dinf = max(np.linalg.norm(A @ x) / bnorm,
                       np.linalg.norm(G @ x + s) / hnorm) / -cx
            if dinf <= tol:
                pres, dres, relgap = np.nan, dinf, np.nan
                return report(UNBOUNDED, k)
        if k == max_iter:
            break

        mu = (s @ z + tau * kappa) / (nu + 1)
        try:
            sc = cones.nt_scaling(dims, s, z)
        except np.linalg.LinAlgError:
            break
        lam = sc.lam
        WinvT = sc.Winv.T
        Gh = WinvT @ G
        hh = WinvT @ h

        K = np.zeros((N, N))
        K[ix, iy] = A.T
        K[ix, iz] = Gh.T
        K[ix, it] = c
        K[iy, ix] = A
        K[iy, it] = -b
        K[iz, ix] = Gh
        K[iz, iz] = -np.eye(m)
        K[iz, it] = -hh
        K[it, ix] = c
        K[it, iy] = b
        K[it, iz] = hh
        K[it, it] = -kappa / tau
        try:
            lu = scipy.linalg.lu_factor(K + np.diag(reg), check_finite=False)
        except (ValueError, np.linalg.LinAlgError):
            break

        def direction(f, xi, xi_tau):
            rhs = np.empty(N)
            rhs[ix] = -f * rx
            rhs[iy] = f * ry
            rhs[iz] = -f * (WinvT @ rz) - cones.jordan_divide(dims, lam, xi)
            rhs[it] = -f * rt - xi_tau / tau
            v = scipy.linalg.lu_solve(lu, rhs, check_finite=False)
            for _ in range(2):
                v += scipy.linalg.lu_solve(lu, rhs - K @ v, check_finite=False)
            dz_hat = v[iz]
            ds_hat = cones.jordan_divide(dims, lam, xi) - dz_hat
            dtau = v[it]
            dkappa = (xi_tau - kappa * dtau) / tau
            return v[ix], v[iy], dz_hat, ds_hat, dtau, dkappa

        def step_length(ds_hat, dz_hat, dtau, dkappa):
            a = min(cones.max_step(dims, lam, ds_hat), cones.max_step(dims, lam, dz_hat))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        # predictor
        lamlam = cones.jordan_product(dims, lam, lam)
        aff = direction(1.0, -lamlam, -tau * kappa)
        alpha_aff = min(1.0, step_length(*aff[2:]))
        sigma = (1.0 - alpha_aff) ** 3

        # corrector
        _, _, dz_a, ds_a, dtau_a, dkappa_a = aff
        xi = -lamlam - cones.jordan_product(dims, ds_a, dz_a) + sigma * mu * e
        xi_tau = -tau * kappa - dtau_a * dkappa_a + sigma * mu
        dx, dy, dz_hat, ds_hat, dtau, dkappa = direction(1.0 - sigma, xi, xi_tau)
        alpha = min(1.0, step_fraction * step_length(ds_hat, dz_hat, dtau, dkappa))

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * (sc.Winv @ dz_hat)
        s = s + alpha * (sc.W.T @ ds_hat)
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    if best is not None:
        _, k, x, y, z, s, tau, kappa, pres, dres, relgap = best
    return report(MAXITER, max_iter)
