"""Power-minimizing precoder design for one user pair.

Three schemes are provided:

* constructive multiple access (CoMA): user 1 receives the superposition
  inside the constructive sector of its own symbol, solved by successive
  convex approximation;
* conventional NOMA with SIC at the strong user, solved by semidefinite
  relaxation and Gaussian randomization;
* an orthogonal time-sharing baseline with MRT in each half slot.

All schemes work in the two-dimensional subspace spanned by the conjugate
channels.  Every objective is a norm and every constraint depends on a
precoder only through ``h1^T w`` and ``h2^T w``, so projecting onto that
subspace never hurts.  The solves are therefore the same size for any N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import PairScenario, PrecoderPair, _coeffs, ci_region_residual
from .conic import ConicProgram, SdrProgram, extract_rank1, solve, solve_sdr
from .conic.program import INFEASIBLE, OPTIMAL
from .errors import InfeasibleError, SolverError

# ---------------------------------------------------------------------------
# helpers shared with the SER module


def channel_basis(h1, h2, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of span{conj(h1), conj(h2)}."""
    H = np.column_stack([np.conj(_coeffs(h1)), np.conj(_coeffs(h2))])
    Q, R = np.linalg.qr(H)
    scale = max(np.abs(R).max(), 1e-300)
    keep = np.abs(np.diag(R)) > rtol * scale
    if not np.any(keep):
        keep[0] = True
    return Q[:, keep]


def real_rows(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``(a, b)`` with ``Re(g @ w) = a @ v`` and ``Im(g @ w) = b @ v``
    for the stacked real vector ``v = [Re w, Im w]``."""
    g = np.asarray(g, dtype=complex)
    return np.concatenate([g.real, -g.imag]), np.concatenate([g.imag, g.real])


def stack(w):
    return np.concatenate([w.real, w.imag])


def unstack(v):
    n = v.size // 2
    return v[:n] + 1j * v[n:]


def symbol_offset(symbols) -> float:
    """Phase of user 2's symbol relative to user 1's."""
    x1, x2 = (complex(s) for s in symbols)
    if x1 == 0 or x2 == 0:
        raise ValueError("symbols must be nonzero")
    return float(np.angle(x2) - np.angle(x1))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineForm:
    """``w -> 2 Re(coef @ w) + offset``."""

    coef: np.ndarray
    offset: float

    def __call__(self, w) -> float:
        return float(2.0 * np.real(self.coef @ np.asarray(w)) + self.offset)


def taylor_lower_bound(h, w_bar) -> AffineForm:
    """First-order expansion of ``|h^T w|^2`` around ``w_bar``.

    Returns ``w -> 2 Re(conj(h^T w_bar) h^T w) - |h^T w_bar|^2``, which
    touches ``|h^T w|^2`` at ``w_bar`` and lies below it everywhere since
    ``|a|^2 - 2 Re(conj(b) a) + |b|^2 = |a - b|^2 >= 0``.
    """
    h = _coeffs(h)
    w_bar = np.asarray(w_bar, dtype=complex)
    if w_bar.shape != h.shape:
        raise ValueError("channel and expansion point dimensions differ")
    b = h @ w_bar
    return AffineForm(np.conj(b) * h, -float(abs(b) ** 2))


@dataclass
class ScaState:
    iter: int
    expansion_point: PrecoderPair
    objective_trace: list = field(default_factory=list)


def _sector_rows(g1, a, theta, n_extra):
    """Linear rows ``A v <= b`` for ``|Im y| cos(t) <= (Re y - a) sin(t)``, ``y = g1 @ w``."""
    re, im = real_rows(g1)
    pad = np.zeros(n_extra)
    re, im = np.concatenate([re, pad]), np.concatenate([im, pad])
    s, c = np.sin(theta), np.cos(theta)
    rows = [(-s * re + c * im, -a * s)]
    if c > 1e-15:
        rows.append((-s * re - c * im, -a * s))
    return rows


def _pair_from_reduced(B, alpha, z, h2, delta) -> PrecoderPair:
    u = B @ alpha
    g2 = _coeffs(h2)
    gain2 = float(np.vdot(g2, g2).real)
    w2 = z * np.conj(g2) / gain2 if gain2 > 0 else np.zeros_like(u)
    return PrecoderPair(u - np.exp(1j * delta) * w2, w2)


def _z_multiplier(r2, c_abs2, noise2, margin):
    """Smallest-ish ``lam`` with ``lam^2 |c|^2 >= r2 (|1-lam|^2 |c|^2 + noise2)``.

    Returns ``None`` when no real multiplier works.
    """
    if c_abs2 <= 0:
        return None
    q = r2 * noise2 / c_abs2
    if abs(r2 - 1.0) < 1e-12:
        return margin * 0.5 * (1.0 + q)
    if r2 > 1.0:
        # the best multiplier reaches r2/(r2-1) |c|^2, so |c|^2 >= noise2 (r2-1) is needed
        if c_abs2 >= noise2 * (r2 - 1.0):
            return r2 / (r2 - 1.0)
        return None
    # (1-r2) lam^2 + 2 r2 lam - r2 (1 + noise2/|c|^2) >= 0, largest root times margin
    a2, b2, c2 = 1.0 - r2, 2.0 * r2, -r2 * (1.0 + noise2 / c_abs2)
    root = (-b2 + np.sqrt(b2 * b2 - 4 * a2 * c2)) / (2 * a2)
    return margin * root


def _coma_initial(scenario, g1, g2, B, delta, rng, random):
    """Feasible starting point ``(alpha, z)`` in the reduced coordinates."""
    s2 = scenario.noise2
    r2 = scenario.r2
    a = np.sqrt(scenario.r1 * scenario.noise1)
    margin = 1.1
    k1 = g1 @ B           # reduced channels (row vectors)
    k2 = g2 @ B
    dim = B.shape[1]

    alpha = np.conj(k1) * (max(a, 1e-3) * margin / float(np.vdot(k1, k1).real))
    if random:
        xi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        xi -= np.conj(k1) * (k1 @ xi) / float(np.vdot(k1, k1).real)
        alpha = alpha + xi * np.linalg.norm(alpha) * rng.uniform(0.2, 2.0)
    if r2 == 0:
        return alpha, None

    rot = np.exp(-1j * delta)
    c = rot * (k2 @ alpha)
    need = margin * s2 * (r2 - 1.0) if r2 > 1 else 0.0
    if abs(c) ** 2 < max(need, 1e-12):
        # push h2^T u up without touching h1^T u when possible
        p = np.conj(k2) - np.conj(k1) * (k1 @ np.conj(k2)) / float(np.vdot(k1, k1).real)
        kp = k2 @ p
        target = np.sqrt(max(margin * need, 1e-2 * s2))
        if dim > 1 and abs(kp) > 1e-9 * np.linalg.norm(k2) * np.linalg.norm(p):
            ph = np.exp(1j * np.angle(c)) if abs(c) > 0 else 1.0
            gamma = (target - abs(c)) / abs(kp) * ph / (rot * kp / abs(kp))
            alpha = alpha + gamma * p
        else:
            alpha = alpha * (target / max(abs(c), 1e-300))
        c = rot * (k2 @ alpha)
    lam = _z_multiplier(r2, abs(c) ** 2, s2, margin)
    if lam is None:
        return None
    return alpha, lam * c


def _coma_subproblem(scenario, k1, k2, delta, theta, z_bar, reg):
    """Convex inner approximation around ``z_bar``; returns the ConicProgram."""
    dim = k1.size
    r2, s2 = scenario.r2, scenario.noise2
    a = np.sqrt(scenario.r1 * scenario.noise1)
    n_extra = 0 if z_bar is None else 2
    n = 2 * dim + n_extra
    Q = np.zeros((n, n))
    Q[:2 * dim, :2 * dim] = np.eye(2 * dim)
    if n_extra:
        Q[2 * dim:, 2 * dim:] = reg * np.eye(2)
    prog = ConicProgram(n, Q=Q)
    for row, rhs in _sector_rows(k1, a, theta, n_extra):
        prog.add_ineq(row, rhs)
    if z_bar is None:
        return prog
    # q = k2 @ alpha - e^{j delta} z, stacked
    re2, im2 = real_rows(k2)
    cd, sd = np.cos(delta), np.sin(delta)
    q_re = np.concatenate([re2, [-cd, sd]])
    q_im = np.concatenate([im2, [-sd, -cd]])
    # L(z) - r2 s2 with L the tangent of |z|^2 at z_bar
    gl = np.zeros(n)
    gl[2 * dim:] = 2.0 * np.array([z_bar.real, z_bar.imag])
    f0 = -abs(z_bar) ** 2 - r2 * s2
    # r2 |q|^2 <= gl v + f0   <=>   ||(2 sqrt(r2) q, gl v + f0 - 1)|| <= gl v + f0 + 1
    sr = 2.0 * np.sqrt(r2)
    prog.add_soc(np.vstack([sr * q_re, sr * q_im, gl]), [0.0, 0.0, f0 - 1.0], gl, f0 + 1.0)
    return prog


def solve_power_min_coma(scenario: PairScenario, h1, h2, symbols, q_max: int = 20,
                         rng=None, n_restarts: int = 3, tol: float = 1e-8,
                         rel_stop: float = 1e-7):
    """Minimum composite-power CoMA precoders for one symbol pair.

    Minimizes ``||w1 + w2 e^{j delta}||^2`` (``delta`` the phase offset of
    the two symbols) subject to the constructive-sector constraint at user 1
    and ``|h2^T w2|^2 >= r2 (|h2^T w1|^2 + noise2)`` at user 2.

    Writing ``u = w1 + e^{j delta} w2`` and ``z = h2^T w2``, the objective
    and the sector constraint depend on ``u`` only, and user 2's constraint
    reads ``|z|^2 >= r2 (|h2^T u - e^{j delta} z|^2 + noise2)``.  Only the
    nonconvex left side ``|z|^2`` is replaced by its tangent, which gives
    an inner approximation: every iterate is feasible for the original
    problem and the objective never increases.

    Returns
    -------
    pair : PrecoderPair
        ``w2`` is the minimum-norm vector with ``h2^T w2 = z``.
    power : float
        ``||w1 + w2 e^{j delta}||^2``.
    state : ScaState
    """
    g1, g2 = _coeffs(h1), _coeffs(h2)
    if g1.shape != g2.shape:
        raise ValueError("channel dimensions differ")
    if not np.any(g1):
        raise InfeasibleError("strong-user channel is zero")
    rng = np.random.default_rng(rng)
    delta = symbol_offset(symbols)
    theta = scenario.constellation.half_angle
    B = channel_basis(g1, g2)
    k1, k2 = g1 @ B, g2 @ B
    r2 = scenario.r2

    if scenario.r1 == 0 and r2 == 0:
        zero = PrecoderPair(np.zeros_like(g1), np.zeros_like(g1))
        return zero, 0.0, ScaState(0, zero, [0.0])
    if r2 > 0 and not np.any(k2):
        raise InfeasibleError("weak-user channel is zero")

    last_err = None
    for attempt in range(n_restarts + 1):
        start = _coma_initial(scenario, g1, g2, B, delta, rng, random=attempt > 0)
        if start is None:
            last_err = InfeasibleError("no feasible starting point")
            continue
        alpha, z = start
        obj = float(np.vdot(alpha, alpha).real)
        trace = [obj]
        q = 0
        failed = False
        while q < q_max:
            reg = 1e-9 * max(obj, 1e-12) / max(abs(z) ** 2, 1e-12) if z is not None else 0.0
            prog = _coma_subproblem(scenario, k1, k2, delta, theta, z, reg)
            res = solve(prog, tol=tol)
            q += 1
            if not res.optimal:
                if q == 1:
                    failed = True
                    last_err = (InfeasibleError if res.status == INFEASIBLE else SolverError)(
                        f"first subproblem returned {res.status}")
                break
            d = B.shape[1]
            alpha_new = res.x[:d] + 1j * res.x[d:2 * d]
            z_new = complex(res.x[2 * d], res.x[2 * d + 1]) if z is not None else None
            obj_new = float(np.vdot(alpha_new, alpha_new).real)
            if obj_new > obj:
                # numerical noise only; keep the previous point
                trace.append(obj)
                break
            change = obj - obj_new
            alpha, z, obj = alpha_new, z_new, obj_new
            trace.append(obj)
            if change <= rel_stop * (1.0 + abs(obj)):
                break
            if z is None:
                break         # no linearized constraint, one solve is exact
        if failed:
            continue
        pair = _pair_from_reduced(B, alpha, 0.0 if z is None else z, g2, delta)
        return pair, pair.composite_power(delta), ScaState(q, pair, trace)
    raise last_err


def coma_constraint_slack(scenario: PairScenario, h1, h2, pair: PrecoderPair, symbols):
    """Slack of the original CoMA constraints: ``(sector, user 2)``."""
    delta = symbol_offset(symbols)
    sector = ci_region_residual(h1, pair, (0.0, delta), scenario.r1, scenario.noise1,
                                scenario.constellation.half_angle)
    g2 = _coeffs(h2)
    user2 = abs(g2 @ pair.w2) ** 2 - scenario.r2 * (abs(g2 @ pair.w1) ** 2 + scenario.noise2)
    return sector, float(user2)


# ---------------------------------------------------------------------------
# conventional NOMA


@dataclass(frozen=True)
class NomaDesign:
    """Result of the NOMA power minimization.

    Unpacks as ``pair, power``; ``sdr_bound`` is the relaxation's optimal
    value and ``randomization_gap`` flags a power more than 1% above it.
    """

    pair: PrecoderPair
    power: float
    sdr_bound: float
    randomization_gap: bool

    def __iter__(self):
        return iter((self.pair, self.power))


def _lift(g):
    return np.outer(np.conj(g), g)


def noma_sdr_program(k1, k2, user1_rhs, r2, noise1, noise2, t2=None) -> SdrProgram:
    """Lifted NOMA program in (possibly reduced) channel coordinates.

    ``user1_rhs`` is the right side of ``|h1^T w1|^2 >= user1_rhs``; ``t2``
    is user 2's SINR target (defaults to ``r2``) while ``r2`` also sets the
    SIC requirement at user 1.  Constraints whose target is zero are kept
    since they are then trivially satisfied.
    """
    t2 = r2 if t2 is None else t2
    H1, H2 = _lift(k1), _lift(k2)
    n = len(k1)
    zero = np.zeros((n, n))
    prog = SdrProgram((n, n), [np.eye(n), np.eye(n)])
    if user1_rhs > 0:
        prog.add_constraint([H1, zero], user1_rhs)
    if t2 > 0:
        prog.add_constraint([-t2 * H2, H2], t2 * noise2)
    if r2 > 0:
        prog.add_constraint([-r2 * H1, H1], r2 * noise1)
    return prog


def _noma_design(k1, k2, B, user1_rhs, r2, noise1, noise2, t2, n_draws, rng, tol):
    prog = noma_sdr_program(k1, k2, user1_rhs, r2, noise1, noise2, t2)
    n = len(k1)
    if not prog.constraints:
        zero = PrecoderPair(np.zeros(B.shape[0]), np.zeros(B.shape[0]))
        return NomaDesign(zero, 0.0, 0.0, False)
    sol = solve_sdr(prog, tol=tol)
    if sol.status == INFEASIBLE:
        raise InfeasibleError("NOMA targets are not attainable")
    if sol.status != OPTIMAL:
        raise SolverError(f"SDR solve returned {sol.status}")
    v1, v2 = extract_rank1(sol.matrices, prog, n_draws=n_draws, rng=rng)
    pair = PrecoderPair(B @ v1, B @ v2)
    power = pair.total_power
    bound = float(sol.objective)
    gap = power > 1.01 * bound + 1e-12
    return NomaDesign(pair, power, bound, bool(gap))


def solve_power_min_noma(scenario: PairScenario, h1, h2, n_draws: int = 1000, rng=None,
                         tol: float = 1e-8) -> NomaDesign:
    """Minimum ``||w1||^2 + ||w2||^2`` for NOMA with SIC at user 1.

    Constraints: post-SIC SNR of user 1 (with residual SIC error variance)
    at least ``r1``, SINR of user 2 at least ``r2``, and user 1 able to
    decode user 2's symbol at SINR ``r2``.
    """
    g1, g2 = _coeffs(h1), _coeffs(h2)
    if g1.shape != g2.shape:
        raise ValueError("channel dimensions differ")
    B = channel_basis(g1, g2)
    s = scenario
    return _noma_design(g1 @ B, g2 @ B, B, s.r1 * (s.sic_err_var + s.noise1), s.r2,
                        s.noise1, s.noise2, None, n_draws, rng, tol)


def noma_constraint_slack(scenario: PairScenario, h1, h2, pair: PrecoderPair):
    """Slack of the three NOMA constraints, each in SINR-scaled power units."""
    s = scenario
    g1, g2 = _coeffs(h1), _coeffs(h2)
    c1 = abs(g1 @ pair.w1) ** 2 - s.r1 * (s.sic_err_var + s.noise1)
    c2 = abs(g2 @ pair.w2) ** 2 - s.r2 * (abs(g2 @ pair.w1) ** 2 + s.noise2)
    c3 = abs(g1 @ pair.w2) ** 2 - s.r2 * (abs(g1 @ pair.w1) ** 2 + s.noise1)
    return float(c1), float(c2), float(c3)


# ---------------------------------------------------------------------------
# orthogonal baseline


def oma_slot_target(r: float) -> float:
    """SINR needed in a half-length slot to carry the rate of ``r``."""
    return (1.0 + r) ** 2 - 1.0


def solve_power_min_oma(scenario: PairScenario, h1, h2):
    """Time-sharing baseline: each user served alone by MRT in half the slots.

    Returns the pair of per-slot precoders and the average power
    ``0.5 * (||w1||^2 + ||w2||^2)``.
    """
    ws, total = [], 0.0
    for g, r, s2 in ((_coeffs(h1), scenario.r1, scenario.noise1),
                     (_coeffs(h2), scenario.r2, scenario.noise2)):
        gain = float(np.vdot(g, g).real)
        need = oma_slot_target(r) * s2
        if need == 0:
            ws.append(np.zeros_like(g))
            continue
        if gain == 0:
            raise InfeasibleError("zero channel cannot meet a positive target")
        p = need / gain
        ws.append(np.sqrt(p) * np.conj(g) / np.sqrt(gain))
        total += p
    return PrecoderPair(*ws), 0.5 * total
