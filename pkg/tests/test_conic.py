import numpy as np
import pytest

from cinoma.conic import (INFEASIBLE, OPTIMAL, UNBOUNDED, ConicProgram, SdrProgram,
                          extract_rank1, solve, solve_sdr)
from oracles import active_set_qp, kkt_socp, random_qp


def _qp_program(Q, c, A, b):
    prog = ConicProgram(len(c), Q=Q, c=c)
    for a, bb in zip(A, b):
        prog.add_ineq(a, bb)
    return prog


@pytest.mark.parametrize("seed", range(10))
def test_qp_matches_active_set(seed):
    rng = np.random.default_rng(100 + seed)
    Q, c, A, b = random_qp(rng, int(rng.integers(4, 7)))
    value, x_ref = active_set_qp(Q, c, A, b)
    res = solve(_qp_program(Q, c, A, b))
    assert res.status == OPTIMAL
    assert abs(res.objective_value - value) <= 1e-6 * max(1.0, abs(value))
    # an objective error e moves x by about sqrt(e / lambda_min(Q))
    assert np.allclose(res.x, x_ref, atol=1e-3)
    assert max(res.kkt_residuals) <= 1e-8


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("quadratic", [False, True])
def test_socp_with_planted_optimum(seed, quadratic):
    rng = np.random.default_rng(200 + seed)
    prog, x_star, value = kkt_socp(rng, int(rng.integers(4, 9)), quadratic=quadratic)
    res = solve(prog)
    assert res.status == OPTIMAL
    assert abs(res.objective_value - value) <= 1e-6 * max(1.0, abs(value))
    assert prog.max_violation(res.x) <= 1e-7
    assert max(res.kkt_residuals) <= 1e-8


def test_small_lp_by_hand():
    # max x + y on the unit simplex corner box: x, y >= 0, x + 2y <= 2, 2x + y <= 2
    prog = ConicProgram(2, c=[-1.0, -1.0])
    for a, b in (([-1, 0], 0), ([0, -1], 0), ([1, 2], 2), ([2, 1], 2)):
        prog.add_ineq(a, b)
    res = solve(prog)
    assert res.status == OPTIMAL
    assert np.allclose(res.x, [2 / 3, 2 / 3], atol=1e-7)


def test_equality_and_norm_ball():
    # min c'x s.t. ||x|| <= 1 has value -||c||
    c = np.array([3.0, -4.0, 0.0])
    prog = ConicProgram(3, c=c).add_soc(np.eye(3), np.zeros(3), np.zeros(3), 1.0)
    res = solve(prog)
    assert res.objective_value == pytest.approx(-5.0, abs=1e-7)
    prog.add_eq([0, 0, 1.0], 0.5)
    res = solve(prog)
    assert res.objective_value == pytest.approx(-5.0 * np.sqrt(0.75), abs=1e-7)


def test_infeasible_and_unbounded():
    prog = ConicProgram(1, c=[1.0]).add_ineq([1.0], -1.0).add_ineq([-1.0], -1.0)
    assert solve(prog).status == INFEASIBLE
    prog = ConicProgram(2, c=[-1.0, 0.0]).add_ineq([0.0, 1.0], 1.0)
    assert solve(prog).status == UNBOUNDED


def test_validate_rejects_bad_shapes():
    prog = ConicProgram(2, c=[1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        prog.validate()
    prog = ConicProgram(2, Q=-np.eye(2))
    with pytest.raises(ValueError):
        prog.validate()


def test_dump_load_round_trip():
    rng = np.random.default_rng(7)
    prog, x_star, _ = kkt_socp(rng, 5, quadratic=True)
    a = rng.normal(size=5)
    prog.add_eq(a, a @ x_star)
    text = prog.dump()
    again = ConicProgram.load(text)
    assert again.dump() == text
    res = solve(again)
    assert res.status == OPTIMAL
    assert res.objective_value == pytest.approx(solve(prog).objective_value, abs=1e-9)


def test_load_rejects_unknown_record():
    with pytest.raises(ValueError):
        ConicProgram.load("n_vars 1\nfoo 1\n")


def test_sdr_single_constraint_is_tight():
    rng = np.random.default_rng(3)
    h = rng.normal(size=3) + 1j * rng.normal(size=3)
    C = np.outer(h.conj(), h)
    prog = SdrProgram((3,), [np.eye(3)]).add_constraint([C], 2.0)
    sol = solve_sdr(prog)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(2.0 / np.vdot(h, h).real, rel=1e-7)
    (w,) = extract_rank1(sol.matrices, prog, rng=0)
    assert abs(h @ w) ** 2 == pytest.approx(2.0, rel=1e-6)
    assert np.vdot(w, w).real == pytest.approx(sol.objective, rel=1e-6)


def test_sdr_two_blocks_randomization_feasible():
    rng = np.random.default_rng(5)
    hs = [rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(3)]
    Cs = [np.outer(h.conj(), h) for h in hs]
    prog = SdrProgram((2, 2), [np.eye(2), np.eye(2)])
    prog.add_constraint([Cs[0], -0.5 * Cs[0]], 0.5)
    prog.add_constraint([-0.5 * Cs[1], Cs[1]], 0.5)
    prog.add_constraint([Cs[2], Cs[2]], 1.0)
    sol = solve_sdr(prog)
    assert sol.status == OPTIMAL
    ws = extract_rank1(sol.matrices, prog, n_draws=500, rng=1)
    obj, slack = prog.evaluate_vectors(ws)
    assert np.all(slack >= -1e-9)
    assert obj >= sol.objective - 1e-7


def test_against_cvxpy():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(11)
    for _ in range(3):
        prog, _, _ = kkt_socp(rng, 6, quadratic=True)
        x = cp.Variable(6)
        cons = [cp.norm(k.A @ x + k.d) <= k.g @ x + k.f for k in prog.soc]
        cons += [a @ x <= b for a, b in prog.lin_ineq]
        P = 0.5 * (prog.Q + prog.Q.T)
        val = cp.Problem(cp.Minimize(cp.quad_form(x, cp.psd_wrap(P)) + prog.c @ x), cons).solve()
        assert solve(prog).objective_value == pytest.approx(val, abs=1e-5)


def test_halfspace_projection_and_ball_support():
    a, b = np.array([1.0, 2.0, -1.0]), 3.0
    prog = ConicProgram(3, Q=np.eye(3)).add_ineq(-a, -b)
    res = solve(prog)
    assert np.allclose(res.x, b * a / (a @ a), atol=1e-7)
    assert res.objective_value == pytest.approx(b * b / (a @ a), abs=1e-8)
    prog = ConicProgram(2, c=[-1.0, 0.0]).add_soc(np.eye(2), [0, 0], [0, 0], 1.0)
    res = solve(prog)
    assert np.allclose(res.x, [1.0, 0.0], atol=1e-7)
    assert res.objective_value == pytest.approx(-1.0, abs=1e-8)


def test_extract_rank1_cases():
    rng = np.random.default_rng(4)
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    C = np.outer(v.conj(), v)
    prog = SdrProgram((3,), [np.eye(3)]).add_constraint([C], 1.0)
    (w,) = extract_rank1([np.outer(v, v.conj())], prog, rng=0)
    # same direction up to a global phase, rescaled to the cheapest feasible size
    assert abs(abs(np.vdot(w, v)) - np.linalg.norm(w) * np.linalg.norm(v)) < 1e-9
    # rank-2 optimum of min tr W s.t. tr W >= 1: any candidate is optimal after rescaling
    toy = SdrProgram((2,), [np.eye(2)]).add_constraint([np.eye(2)], 1.0)
    (w,) = extract_rank1([np.eye(2) / 2], toy, n_draws=200, rng=0)
    obj, slack = toy.evaluate_vectors([w])
    assert slack[0] >= -1e-12 and obj <= 1.05
    free = SdrProgram((2,), [np.eye(2)])
    assert np.all(extract_rank1([np.zeros((2, 2))], free)[0] == 0)
    from cinoma import RandomizationError
    with pytest.raises(RandomizationError):
        extract_rank1([np.zeros((2, 2))], toy)
