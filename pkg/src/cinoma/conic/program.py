"""Quadratic / second-order cone programs over real variables.

A :class:`ConicProgram` is::

    minimize    x'Qx + c'x
    subject to  a_i'x  = b_i            (lin_eq)
                a_j'x <= b_j            (lin_ineq)
                ||A_k x + d_k|| <= g_k'x + f_k   (soc)

The quadratic term is moved into an epigraph cone before handing the
problem to :func:`cinoma.conic.ipm.conelp`.  Complex decision vectors are
stacked by callers as ``[real parts, imaginary parts]``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import ipm
from .cones import Dims

OPTIMAL = ipm.OPTIMAL
INFEASIBLE = ipm.INFEASIBLE
UNBOUNDED = ipm.UNBOUNDED
MAXITER = ipm.MAXITER


@dataclass
class SocConstraint:
    """``||A x + d|| <= g'x + f``."""

    A: np.ndarray
    d: np.ndarray
    g: np.ndarray
    f: float

    def residual(self, x):
        """Positive when satisfied."""
        return float(self.g @ x + self.f - np.linalg.norm(self.A @ x + self.d))


@dataclass
class ConicProgram:
    n_vars: int
    Q: np.ndarray | None = None
    c: np.ndarray | None = None
    lin_eq: list = field(default_factory=list)
    lin_ineq: list = field(default_factory=list)
    soc: list = field(default_factory=list)

    def __post_init__(self):
        n = self.n_vars
        if n < 1:
            raise ValueError("n_vars must be positive")
        self.c = np.zeros(n) if self.c is None else np.asarray(self.c, dtype=float)
        if self.Q is not None:
            self.Q = np.asarray(self.Q, dtype=float)

    def add_eq(self, a, b):
        self.lin_eq.append((np.asarray(a, dtype=float), float(b)))
        return self

    def add_ineq(self, a, b):
        self.lin_ineq.append((np.asarray(a, dtype=float), float(b)))
        return self

    def add_soc(self, A, d, g, f):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.soc.append(SocConstraint(A, np.asarray(d, dtype=float).ravel(),
                                      np.asarray(g, dtype=float).ravel(), float(f)))
        return self

    def validate(self):
        n = self.n_vars
        if self.c.shape != (n,):
            raise ValueError("linear objective has wrong width")
        if self.Q is not None:
            if self.Q.shape != (n, n):
                raise ValueError("Q has wrong shape")
            if not np.allclose(self.Q, self.Q.T, atol=1e-12, rtol=0):
                raise ValueError("Q is not symmetric")
            if np.linalg.eigvalsh(self.Q)[0] < -1e-10:
                raise ValueError("Q is not positive semidefinite")
        for a, _ in self.lin_eq + self.lin_ineq:
            if a.shape != (n,):
                raise ValueError("constraint row has wrong width")
        for cone in self.soc:
            if cone.A.shape[1] != n or cone.g.shape != (n,) or cone.d.shape != (cone.A.shape[0],):
                raise ValueError("cone constraint has wrong shape")

    def objective(self, x) -> float:
        val = float(self.c @ x)
        if self.Q is not None:
            val += float(x @ self.Q @ x)
        return val

    def max_violation(self, x) -> float:
        """Largest constraint violation at ``x``, evaluated from the original rows."""
        viol = 0.0
        for a, b in self.lin_eq:
            viol = max(viol, abs(a @ x - b) / max(1.0, abs(b)))
        for a, b in self.lin_ineq:
            viol = max(viol, (a @ x - b) / max(1.0, abs(b)))
        for cone in self.soc:
            viol = max(viol, -cone.residual(x) / max(1.0, abs(cone.f), np.linalg.norm(cone.d)))
        return float(viol)

    # -- plain-text dump ------------------------------------------------------
    def dump(self, fh=None) -> str:
        """Write the program in a line-oriented text format.

        One record per line, numbers in ``repr`` precision::

            n_vars <n>
            Q <row> <col> <value>          (nonzero entries only)
            c <c_1> ... <c_n>
            eq <a_1> ... <a_n> = <b>
            ineq <a_1> ... <a_n> <= <b>
            soc <f> ; <g_1> ... <g_n> ; <d_1> <A_11> ... <A_1n> ; <d_2> ...

        Lines starting with ``#`` are comments.
        """
        out = io.StringIO()
        fmt = lambda v: " ".join(repr(float(t)) for t in v)
        out.write(f"n_vars {self.n_vars}\n")
        if self.Q is not None:
            for i, j in zip(*np.nonzero(self.Q)):
                out.write(f"Q {i} {j} {float(self.Q[i, j])!r}\n")
        out.write(f"c {fmt(self.c)}\n")
        for a, b in self.lin_eq:
            out.write(f"eq {fmt(a)} = {float(b)!r}\n")
        for a, b in self.lin_ineq:
            out.write(f"ineq {fmt(a)} <= {float(b)!r}\n")
        for cone in self.soc:
            rows = " ; ".join(f"{float(cone.d[i])!r} {fmt(cone.A[i])}" for i in range(len(cone.d)))
            out.write(f"soc {float(cone.f)!r} ; {fmt(cone.g)} ; {rows}\n")
        text = out.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def load(cls, text: str) -> "ConicProgram":
        prog = None
        Q = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key == "n_vars":
                prog = cls(int(rest))
            elif key == "Q":
                i, j, v = rest.split()
                if Q is None:
                    Q = np.zeros((prog.n_vars, prog.n_vars))
                Q[int(i), int(j)] = float(v)
            elif key == "c":
                prog.c = np.array(rest.split(), dtype=float)
            elif key == "eq":
                lhs, rhs = rest.split("=")
                prog.add_eq(np.array(lhs.split(), dtype=float), float(rhs))
            elif key == "ineq":
                lhs, rhs = rest.split("<=")
                prog.add_ineq(np.array(lhs.split(), dtype=float), float(rhs))
            elif key == "soc":
                parts = [p.split() for p in rest.split(";")]
                f = float(parts[0][0])
                g = np.array(parts[1], dtype=float)
                rows = np.array(parts[2:], dtype=float)
                prog.add_soc(rows[:, 1:], rows[:, 0], g, f)
            else:
                raise ValueError(f"unknown record {key!r}")
        if prog is None:
            raise ValueError("missing n_vars record")
        prog.Q = Q
        return prog


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    objective_value: float
    kkt_residuals: tuple[float, float, float]
    dual_bound: float = np.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _standard_form(prog: ConicProgram):
    n = prog.n_vars
    quad = prog.Q is not None and np.any(prog.Q)
    nx = n + 1 if quad else n
    pad = lambda a: np.concatenate([a, np.zeros(nx - n)])

    c = pad(prog.c)
    if quad:
        c[n] = 1.0
    G_rows, h_vals, qdims = [], [], []
    for a, b in prog.lin_ineq:
        G_rows.append(pad(a))
        h_vals.append(b)
    n_lin = len(G_rows)
    for cone in prog.soc:
        # s = (g'x + f, A x + d)
        G_rows.append(-pad(cone.g))
        h_vals.append(cone.f)
        for i in range(len(cone.d)):
            G_rows.append(-pad(cone.A[i]))
            h_vals.append(cone.d[i])
        qdims.append(len(cone.d) + 1)
    if quad:
        # x'Qx <= t  <=>  ||(2 L'x, t - 1)|| <= t + 1
        evals, evecs = np.linalg.eigh(prog.Q)
        keep = evals > max(1e-14, 1e-14 * evals.max())
        L = evecs[:, keep] * np.sqrt(evals[keep])
        tcol = np.zeros(nx)
        tcol[n] = 1.0
        G_rows.append(-tcol)
        h_vals.append(1.0)
        for col in L.T:
            G_rows.append(-2.0 * pad(col))
            h_vals.append(0.0)
        G_rows.append(-tcol)
        h_vals.append(-1.0)
        qdims.append(int(keep.sum()) + 2)
    G = np.array(G_rows).reshape(-1, nx)
    h = np.array(h_vals, dtype=float)
    if prog.lin_eq:
        A = np.array([pad(a) for a, _ in prog.lin_eq])
        b = np.array([b for _, b in prog.lin_eq])
    else:
        A, b = None, None
    return c, G, h, Dims(l=n_lin, q=tuple(qdims)), A, b


def solve(program: ConicProgram, tol: float = 1e-8, max_iter: int = 100) -> SolveResult:
    """Solve ``program`` with the homogeneous interior-point method.

    An ``Optimal`` status is only reported when the returned point also
    passes an independent evaluation of the original constraint rows at
    ``10 * tol``; otherwise the status is downgraded to ``MaxIter``.
    """
    program.validate()
    n = program.n_vars
    c, G, h, dims, A, b = _standard_form(program)
    if G.shape[0] == 0:
        # unconstrained in cone terms: add a trivially satisfied row
        G = np.zeros((1, c.size))
        h = np.ones(1)
        dims = Dims(l=1)
    sol = ipm.conelp(c, G, h, dims, A, b, tol=tol, max_iter=max_iter)
    x = sol.x[:n].copy()
    kkt = (sol.primal_residual, sol.dual_residual, sol.gap)
    status = sol.status
    if status == OPTIMAL:
        obj = program.objective(x)
        if program.max_violation(x) > 10 * tol:
            status = MAXITER
        dual = sol.dual_objective
    else:
        obj = np.nan
        dual = np.nan
    return SolveResult(status=status, x=x, objective_value=obj, kkt_residuals=kkt,
                       dual_bound=dual, iterations=sol.iterations)
