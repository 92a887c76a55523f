"""SER-minimizing precoders under a total power budget.

For PSK with unit-modulus symbols the per-user SER is driven by the
received SNR, so both designs maximize the smaller of the two users'
SNRs.

CoMA is handled by block coordinate ascent: a closed-form update of the
auxiliary weight ``y`` of the fractional SINR constraint, then a
second-order cone program in the precoders and ``t`` built around the
current point.  NOMA is handled by bisection on ``t`` with a power
minimization feasibility test.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .channel import PairScenario, PrecoderPair, _coeffs
from .conic import ConicProgram, solve
from .errors import InfeasibleError, RandomizationError, SolverError
from .powermin import (_noma_design, channel_basis, real_rows, solve_power_min_coma,
                       symbol_offset)


def ser_from_snr(snr):
    """Gaussian tail ``Q(sqrt(snr))``, the per-branch PSK error term.

    Accepts scalars or arrays; negative input raises ``ValueError``.
    """
    snr = np.asarray(snr, dtype=float)
    if np.any(snr < 0) or np.any(np.isnan(snr)):
        raise ValueError("snr must be nonnegative")
    out = 0.5 * erfc(np.sqrt(snr / 2.0))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FractionalPieces:
    """Numerator and denominator of user 2's SINR around an expansion point.

    ``A(w2) = 2 Re(conj(h2^T w2_bar) h2^T w2) - |h2^T w2_bar|^2`` (a
    tangent lower bound of ``|h2^T w2|^2``) and
    ``B(w1) = |h2^T w1|^2 + noise2``.
    """

    h2: np.ndarray
    noise2: float
    w2_bar: np.ndarray

    def A(self, w2) -> float:
        b = self.h2 @ self.w2_bar
        return float(2.0 * np.real(np.conj(b) * (self.h2 @ w2)) - abs(b) ** 2)

    def B(self, w1) -> float:
        return float(abs(self.h2 @ w1) ** 2 + self.noise2)

    def surrogate(self, y, w1, w2) -> float:
        """``2 y sqrt(A) - y^2 B``, a lower bound of ``A/B`` for any ``y``."""
        return 2.0 * y * np.sqrt(max(self.A(w2), 0.0)) - y * y * self.B(w1)


def update_y(w1, w2, h2, noise2: float, w2_bar) -> float:
    """Maximizer ``sqrt(A(w2)) / B(w1)`` of the surrogate over ``y``."""
    if not noise2 > 0:
        raise ValueError("noise2 must be positive")
    pieces = FractionalPieces(_coeffs(h2), float(noise2), np.asarray(w2_bar, dtype=complex))
    A = pieces.A(np.asarray(w2, dtype=complex))
    if A < 0:
        raise ValueError("numerator is negative at this point")
    return float(np.sqrt(A) / pieces.B(np.asarray(w1, dtype=complex)))


@dataclass
class MaxMinState:
    t: float
    y: float
    expansion_point: PrecoderPair
    t_trace: list = field(default_factory=list)
    iterations: int = 0


def coma_min_snr(h1, h2, pair: PrecoderPair, delta: float, noise1: float, noise2: float,
                 theta: float | None = None):
    """``(snr_u1, sinr_u2)`` of a CoMA pair for unit-modulus symbols.

    With ``theta`` user 1's SNR is the sector-margin measure of :func:`ci_snr`.
    """
    g1, g2 = _coeffs(h1), _coeffs(h2)
    if theta is None:
        snr1 = abs(g1 @ pair.composite(delta)) ** 2 / noise1
    else:
        snr1 = ci_snr(g1, pair.composite(delta), theta, noise1)
    sinr2 = abs(g2 @ pair.w2) ** 2 / (abs(g2 @ pair.w1) ** 2 + noise2)
    return float(snr1), float(sinr2)


def ci_snr(k1, u, theta: float, noise1: float) -> float:
    """Squared distance of ``k1^T u`` to the edge of its constructive sector, over noise.

    The point must satisfy ``Re y - sqrt(noise1 t) >= |Im y| cot(theta)``;
    the largest such ``t`` is returned (0 outside the sector).
    """
    y = _coeffs(k1) @ np.asarray(u, dtype=complex)
    cot = 0.0 if np.isclose(theta, np.pi / 2) else 1.0 / np.tan(theta)
    m = max(y.real - abs(y.imag) * cot, 0.0)
    return float(m * m / noise1)


def _best_weak_gain(c, noise2):
    """Real ``a >= 0`` maximizing ``a^2 / (|c - a|^2 + noise2)``."""
    if c.real > 0:
        return (abs(c) ** 2 + noise2) / c.real
    return 10.0 * np.sqrt(abs(c) ** 2 + noise2)


def _weak_sinr_bound(c, noise2):
    """Best user-2 SINR over ``a >= 0`` for fixed ``c = e^{-j delta} h2^T u``."""
    if c.real > 0:
        return (abs(c) ** 2 + noise2) / (c.imag ** 2 + noise2)
    return 1.0


def _balanced_start(k1, k2, delta, theta, budget, noise1, noise2, snr1, n_grid=256):
    """Full-power start that puts both received points on their ideal phase.

    With two independent channels ``u`` solves ``k1 u = cos(w)`` and
    ``k2 u = sin(w) e^{j delta}``; with one dimension ``u`` is MRT for
    user 1 rotated within the sector.  The split ``w`` maximizing the
    smaller SNR is kept.
    """
    rot = np.exp(-1j * delta)
    dim = k1.size
    K = np.vstack([k1, k2])
    if dim == 2 and np.linalg.cond(K) < 1e8:
        w = np.linspace(0.0, np.pi / 2, n_grid + 2)[1:-1]
        rhs = np.vstack([np.cos(w), np.sin(w) / rot])
        U = np.linalg.solve(K, rhs)
    else:
        w = np.linspace(-theta, theta, 2 * n_grid + 1) * (1 - 1e-9)
        base = np.conj(k1) / np.linalg.norm(k1)
        U = base[:, None] * np.exp(1j * w)[None, :]
    U = U * (np.sqrt(budget) / np.linalg.norm(U, axis=0))[None, :]
    best, best_t = None, -1.0
    for u in U.T:
        c = rot * (k2 @ u)
        t = min(snr1(u), _weak_sinr_bound(c, noise2))
        if t > best_t:
            best, best_t = u, t
    return _project_start(k1, k2, best, delta, noise2, budget)


def _project_start(k1, k2, alpha, delta, noise2, budget):
    """Force user 2's gain real and nonnegative and scale to the full budget."""
    c = np.exp(-1j * delta) * (k2 @ alpha)
    a = _best_weak_gain(c, noise2)
    kappa = np.sqrt(budget) / np.linalg.norm(alpha)
    return alpha * kappa, a * kappa


def _p5_program(k1, k2, delta, theta, budget, noise1, noise2, alpha_bar, a_bar, t_ref):
    """Cone program around ``(alpha_bar, a_bar)`` with ``y`` at its closed-form value.

    Variables are normalized so that every coefficient is of order one:
    ``alpha = sqrt(P) x``, ``a = a_bar v``, ``s = a_bar r`` and
    ``t = t_ref tau``; the program maximizes ``tau`` over ``[x, v, tau, r]``.
    """
    d = k1.size
    n = 2 * d + 3
    ia, it, ir = 2 * d, 2 * d + 1, 2 * d + 2
    e = np.eye(n)
    rho = np.sqrt(budget)
    pad = np.zeros(3)
    c = np.zeros(n)
    c[it] = -1.0
    prog = ConicProgram(n, c=c)
    # power budget
    A = np.zeros((2 * d, n))
    A[:, :2 * d] = np.eye(2 * d)
    prog.add_soc(A, np.zeros(2 * d), np.zeros(n), 1.0)
    # constructive sector at user 1 around the origin
    u1 = k1 / np.linalg.norm(k1)
    re1, im1 = real_rows(u1)
    re1, im1 = np.concatenate([re1, pad]), np.concatenate([im1, pad])
    sn, cs = np.sin(theta), np.cos(theta)
    prog.add_ineq(-sn * re1 + cs * im1, 0.0)
    if cs > 1e-15:
        prog.add_ineq(-sn * re1 - cs * im1, 0.0)
    # user 1: tangent of |k1 alpha|^2 >= noise1 t, divided by |k1 alpha_bar|^2
    b1 = k1 @ alpha_bar
    m1 = abs(b1) ** 2
    tre, _ = real_rows(np.conj(b1) * k1)
    prog.add_ineq(-2.0 * rho / m1 * np.concatenate([tre, pad]) + noise1 * t_ref / m1 * e[it], -1.0)
    # a >= 0, s >= 0
    prog.add_ineq(-e[ia], 0.0)
    prog.add_ineq(-e[ir], 0.0)
    # s^2 <= 2 a_bar a - a_bar^2   ->   r^2 <= 2 v - 1
    prog.add_soc(np.vstack([2.0 * e[ir], 2.0 * e[ia]]), [0.0, -2.0], 2.0 * e[ia], 0.0)
    # 2 y s - y^2 (|q|^2 + noise2) >= t with y = a_bar / B_bar, divided by a_bar^2 / B_bar
    rot = np.exp(1j * delta)
    B_bar = abs(k2 @ alpha_bar - a_bar * rot) ** 2 + noise2
    sb = np.sqrt(B_bar)
    re2, im2 = real_rows(k2)
    q_re = np.concatenate([rho * re2, [-a_bar * rot.real, 0.0, 0.0]]) / sb
    q_im = np.concatenate([rho * im2, [-a_bar * rot.imag, 0.0, 0.0]]) / sb
    sinr2 = a_bar ** 2 / B_bar
    gv = 2.0 * e[ir] - (t_ref / sinr2) * e[it]
    fv = -noise2 / B_bar
    prog.add_soc(np.vstack([2.0 * q_re, 2.0 * q_im, gv]), [0.0, 0.0, fv - 1.0], gv, fv + 1.0)
    return prog


def _p5_margin_program(k1, k2, delta, theta, budget, noise1, noise2, alpha_bar, a_bar, t_ref):
    """Cone program with the SNR floor inside the constructive sector.

    Maximizes ``s = sqrt(t)`` subject to ``Re y - sqrt(noise1) s >= |Im y| cot(theta)``
    at user 1 and ``2 y sqrt(A) - y^2 B >= s^2`` at user 2.  Variables are
    ``[x, v, sigma, r]`` with ``alpha = sqrt(P) x``, ``a = a_bar v``,
    ``s = sqrt(t_ref) sigma`` and ``sqrt(A) = a_bar r``.
    """
    d = k1.size
    n = 2 * d + 3
    ia, i_s, ir = 2 * d, 2 * d + 1, 2 * d + 2
    e = np.eye(n)
    rho = np.sqrt(budget)
    pad = np.zeros(3)
    c = np.zeros(n)
    c[i_s] = -1.0
    prog = ConicProgram(n, c=c)
    A = np.zeros((2 * d, n))
    A[:, :2 * d] = np.eye(2 * d)
    prog.add_soc(A, np.zeros(2 * d), np.zeros(n), 1.0)
    nk = np.linalg.norm(k1)
    re1, im1 = real_rows(k1 / nk)
    re1, im1 = np.concatenate([re1, pad]), np.concatenate([im1, pad])
    mu = np.sqrt(noise1 * t_ref) / (nk * rho)
    sn, cs = np.sin(theta), np.cos(theta)
    prog.add_ineq(-sn * re1 + cs * im1 + sn * mu * e[i_s], 0.0)
    if cs > 1e-15:
        prog.add_ineq(-sn * re1 - cs * im1 + sn * mu * e[i_s], 0.0)
    prog.add_ineq(-e[ia], 0.0)
    prog.add_ineq(-e[ir], 0.0)
    prog.add_soc(np.vstack([2.0 * e[ir], 2.0 * e[ia]]), [0.0, -2.0], 2.0 * e[ia], 0.0)
    rot = np.exp(1j * delta)
    B_bar = abs(k2 @ alpha_bar - a_bar * rot) ** 2 + noise2
    sb = np.sqrt(B_bar)
    re2, im2 = real_rows(k2)
    q_re = np.concatenate([rho * re2, [-a_bar * rot.real, 0.0, 0.0]]) / sb
    q_im = np.concatenate([rho * im2, [-a_bar * rot.imag, 0.0, 0.0]]) / sb
    kappa = np.sqrt(t_ref * B_bar) / a_bar
    gv = 2.0 * e[ir]
    fv = -noise2 / B_bar
    prog.add_soc(np.vstack([2.0 * q_re, 2.0 * q_im, 2.0 * kappa * e[i_s], gv]),
                 [0.0, 0.0, 0.0, fv - 1.0], gv, fv + 1.0)
    return prog


def solve_sermin_coma(scenario: PairScenario, h1, h2, symbols, max_outer: int = 50,
                      tol: float = 1e-6, init_pair: PrecoderPair | None = None, rng=None,
                      solver_tol: float = 1e-8, start: str = "auto", sector: str = "margin"):
    """Maximize the smaller CoMA SNR under ``||w1 + w2 e^{j delta}||^2 <= P``.

    User 1's received point must stay in the constructive sector of its
    symbol and ``h2^T w2`` must be real and nonnegative.  Each outer
    iteration sets ``y`` in closed form and then solves a cone program in
    which ``|h1^T u|^2`` and ``|h2^T w2|^2`` are replaced by their tangents
    at the current point.  The current point stays feasible for the next
    program, so the true min-SNR never decreases.

    Two starting points are available: a low-target power-minimizing
    design made to satisfy the user-2 alignment and scaled to the full
    budget (``start="power_min"``), and a full-power design that puts both
    received points on their ideal phase (``start="balanced"``).  The
    default ``"auto"`` runs from whichever has the larger min-SNR.
    ``init_pair`` overrides both.  Stops when the min-SNR improves by at most
    ``tol * (1 + t)``.

    ``sector`` selects how user 1's SNR is measured.  With ``"plain"`` the
    received point only has to lie in the sector and its SNR is
    ``|h1^T u|^2 / noise1``; such optima often sit on a decision boundary.
    With ``"margin"`` (default) the SNR is the squared distance to the
    sector edges (see :func:`ci_snr`), which keeps the point inside.

    Returns ``(pair, t_star, state)`` with ``t_star`` the exact min-SNR of
    ``pair`` under the chosen measure.
    """
    if sector not in ("margin", "plain"):
        raise ValueError(f"unknown sector form {sector!r}")
    g1, g2 = _coeffs(h1), _coeffs(h2)
    if g1.shape != g2.shape:
        raise ValueError("channel dimensions differ")
    P = scenario.power_budget
    if not P > 0:
        raise ValueError("power budget must be positive")
    if not (np.any(g1) and np.any(g2)):
        raise InfeasibleError("zero channel")
    delta = symbol_offset(symbols)
    theta = scenario.constellation.half_angle
    s1, s2 = scenario.noise1, scenario.noise2
    B = channel_basis(g1, g2)
    k1, k2 = g1 @ B, g2 @ B
    gain2 = float(np.vdot(g2, g2).real)
    rot = np.exp(1j * delta)

    def to_pair(alpha, a):
        w2 = a * np.conj(g2) / gain2
        return PrecoderPair(B @ alpha - rot * w2, w2)

    def snr1(alpha):
        if sector == "margin":
            return ci_snr(k1, alpha, theta, s1)
        return abs(k1 @ alpha) ** 2 / s1

    def min_snr(alpha, a):
        sinr2 = a * a / (abs(k2 @ alpha - a * rot) ** 2 + s2)
        return min(snr1(alpha), sinr2)

    def in_sector(alpha):
        y = k1 @ alpha
        return abs(y.imag) * np.cos(theta) <= y.real * np.sin(theta) + 1e-12 * abs(y)

    def refine(alpha, a, t):
        # exact block update of user 2's gain for a fixed composite vector
        c = k2 @ alpha / rot
        if c.real > 0:
            a_opt = _best_weak_gain(c, s2)
            t_opt = min_snr(alpha, a_opt)
            if t_opt > t:
                return alpha, a_opt, t_opt
        return alpha, a, t

    def extrapolate(alpha_old, a_old, alpha, a, t):
        # longer steps along the last move while they keep improving
        step, a_step = alpha - alpha_old, a - a_old
        for beta in (2.0, 4.0, 8.0, 16.0, 32.0, 64.0):
            trial = alpha_old + beta * step
            a_trial = a_old + beta * a_step
            trial *= min(1.0, np.sqrt(P) / np.linalg.norm(trial))
            if a_trial < 0 or (sector == "plain" and not in_sector(trial)):
                break
            cand = refine(trial, a_trial, min_snr(trial, a_trial))
            if cand[2] <= t:
                break
            alpha, a, t = cand
        return alpha, a, t

    if init_pair is None:
        starts = []
        if start in ("auto", "power_min"):
            low = scenario.replace(r1=0.1, r2=0.1)
            pm_pair, _, _ = solve_power_min_coma(low, g1, g2, symbols, rng=rng)
            alpha0 = B.conj().T @ pm_pair.composite(delta)
            starts.append(_project_start(k1, k2, alpha0, delta, s2, P))
        if start in ("auto", "balanced"):
            starts.append(_balanced_start(k1, k2, delta, theta, P, s1, s2, snr1))
        if not starts:
            raise ValueError(f"unknown start {start!r}")
        alpha, a = max(starts, key=lambda st: min_snr(*st))
    else:
        alpha = B.conj().T @ init_pair.composite(delta)
        a = float(np.real(g2 @ init_pair.w2))
        if a < 0 or np.linalg.norm(alpha) ** 2 > P * (1 + 1e-9):
            raise ValueError("initial pair violates the user-2 alignment or the budget")
        if a == 0:
            alpha, a = _project_start(k1, k2, alpha, delta, s2, P)

    t = min_snr(alpha, a)
    trace = [t]
    y = 0.0
    it = 0
    d = k1.size
    for it in range(1, max_outer + 1):
        y = a / (abs(k2 @ alpha - a * rot) ** 2 + s2)
        build = _p5_margin_program if sector == "margin" else _p5_program
        prog = build(k1, k2, delta, theta, P, s1, s2, alpha, a, max(t, 1e-12))
        res = solve(prog, tol=solver_tol)
        if not res.optimal:
            if it == 1:
                raise SolverError(f"cone subproblem returned {res.status}")
            break
        alpha_new = np.sqrt(P) * (res.x[:d] + 1j * res.x[d:2 * d])
        a_new = a * max(float(res.x[2 * d]), 0.0)
        # rounding can leave the budget a hair exceeded
        scale = min(1.0, np.sqrt(P) / max(np.linalg.norm(alpha_new), 1e-300))
        alpha_new, a_new = alpha_new * scale, a_new * scale
        t_new = min_snr(alpha_new, a_new)
        alpha_new, a_new, t_new = refine(alpha_new, a_new, t_new)
        if t_new > t:
            alpha_new, a_new, t_new = extrapolate(alpha, a, alpha_new, a_new, t_new)
        if t_new < t:
            trace.append(t)
            break
        alpha, a, gain_t, t = alpha_new, a_new, t_new - t, t_new
        trace.append(t)
        if gain_t <= tol * (1.0 + t):
            break
    pair = to_pair(alpha, a)
    state = MaxMinState(t=t, y=y, expansion_point=pair, t_trace=trace, iterations=it)
    return pair, t, state


def sermin_coma_sweep(scenario: PairScenario, h1, h2, symbols, budgets, **kw):
    """Run :func:`solve_sermin_coma` over increasing budgets.

    Each budget also tries the previous budget's solution as a starting
    point and keeps the better result, so ``t_star`` is nondecreasing
    along the sweep.
    """
    out, prev = [], None
    for P in budgets:
        sc = scenario.replace(power_budget=float(P))
        best = solve_sermin_coma(sc, h1, h2, symbols, **kw)
        if prev is not None and P >= prev[0]:
            warm = solve_sermin_coma(sc, h1, h2, symbols, init_pair=prev[1], **kw)
            if warm[1] > best[1]:
                best = warm
        out.append(best)
        prev = (P, best[0])
    return out


# ---------------------------------------------------------------------------


def solve_sermin_noma(scenario: PairScenario, h1, h2, tol: float = 1e-5,
                      include_user1: bool = True, n_draws: int = 200, rng=None):
    """Max-min SNR NOMA design by bisection on the common target ``t``.

    A target is feasible when the minimum ``||w1||^2 + ||w2||^2`` meeting
    user 2's SINR ``t``, SIC decodability of user 2's symbol at user 1
    with SINR ``r2``, and (``include_user1``) user 1's post-SIC SNR ``t``
    stays within the budget.  With ``include_user1=False`` only user 2's
    SINR is maximized.

    Returns ``(pair, t_star)`` where ``t_star`` is the largest feasible
    target found, within ``tol`` of the true value.
    """
    g1, g2 = _coeffs(h1), _coeffs(h2)
    if g1.shape != g2.shape:
        raise ValueError("channel dimensions differ")
    P = scenario.power_budget
    if not P > 0:
        raise ValueError("power budget must be positive")
    s = scenario
    B = channel_basis(g1, g2)
    k1, k2 = g1 @ B, g2 @ B
    rng = np.random.default_rng(rng)
    n1 = s.sic_err_var + s.noise1

    def design(t):
        try:
            d = _noma_design(k1, k2, B, t * n1 if include_user1 else 0.0, s.r2,
                             s.noise1, s.noise2, t, n_draws, rng, 1e-8)
        except (InfeasibleError, RandomizationError):
            return None
        return d if d.power <= P * (1 + 1e-9) else None

    base = design(0.0)
    if base is None:
        raise InfeasibleError("SIC requirement cannot be met within the budget")
    t_ub = P * float(np.vdot(g2, g2).real) / s.noise2
    if include_user1:
        t_ub = min(t_ub, P * float(np.vdot(g1, g1).real) / n1)
    top = design(t_ub)
    if top is not None:
        return top.pair, t_ub
    lo, hi, best = 0.0, t_ub, base
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        d = design(mid)
        if d is None:
            hi = mid
        else:
            lo, best = mid, d
    return best.pair, lo


def noma_min_snr(scenario: PairScenario, h1, h2, pair: PrecoderPair, include_user1=True):
    g1, g2 = _coeffs(h1), _coeffs(h2)
    sinr2 = abs(g2 @ pair.w2) ** 2 / (abs(g2 @ pair.w1) ** 2 + scenario.noise2)
    if not include_user1:
        return float(sinr2)
    snr1 = abs(g1 @ pair.w1) ** 2 / (scenario.sic_err_var + scenario.noise1)
    return float(min(snr1, sinr2))
