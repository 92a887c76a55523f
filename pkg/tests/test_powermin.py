import numpy as np
import pytest

from cinoma import (InfeasibleError, PairScenario, coma_constraint_slack, noma_constraint_slack,
                    order_pair, sample_channel, solve_power_min_coma, solve_power_min_noma,
                    solve_power_min_oma, taylor_lower_bound)
from cinoma.channel import ChannelVector, PskConstellation

# Global optima from a 40-60 start SLSQP search over the full (w1, w2)
# variables; channels are order_pair(sample_channel(2, 2, g), sample_channel(2, 1, g))
# with g = default_rng(seed), defaults otherwise.
COMA_R2_HALF = [0.6633342677824209, 0.38433567115452255, 0.155270061875285,
                0.08933402178876743, 0.2733875448174543, 0.37943774444983197]
COMA_R2_THREE = [4.401360125025528, 2.4552496524119554, 0.7615074924984475,
                 0.912094579961821, 1.2882404023921443, 1.7986125174218162]
NOMA_R2_ONE = [3.1325557497586827, 1.9403788935496094, 0.6142602483471286,
               0.5658703811652188, 1.1219358786223004, 1.5163095259872004]


def _pair(seed, n=2):
    g = np.random.default_rng(seed)
    return order_pair(sample_channel(n, 2.0, g), sample_channel(n, 1.0, g))


def test_taylor_bound_below_and_tight():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 6))
        h, w_bar, w = (rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n)))
        L = taylor_lower_bound(h, w_bar)
        assert L(w) <= abs(h @ w) ** 2 + 1e-10
        assert L(w_bar) == pytest.approx(abs(h @ w_bar) ** 2, abs=1e-12 * (1 + abs(h @ w_bar) ** 2))
    with pytest.raises(ValueError):
        taylor_lower_bound(np.ones(2), np.ones(3))


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("r2, table", [(0.5, COMA_R2_HALF), (3.0, COMA_R2_THREE)])
def test_coma_matches_global_search(seed, r2, table):
    h1, h2 = _pair(seed)
    sc = PairScenario(n_antennas=2, r2=r2)
    pair, power, state = solve_power_min_coma(sc, h1, h2, (1, 1j), rng=0)
    assert power == pytest.approx(table[seed], rel=1e-6)
    assert min(coma_constraint_slack(sc, h1, h2, pair, (1, 1j))) >= -1e-6
    assert np.all(np.diff(state.objective_trace) <= 1e-12)


@pytest.mark.parametrize("r2", [0.0, 0.5, 1.0, 2.0, 4.0])
def test_coma_single_antenna_closed_form(r2):
    # with N = 1 the sector needs |h1 u| >= sqrt(r1 s1) and, for r2 > 1,
    # user 2 needs |h2 u|^2 >= s2 (r2 - 1); phase is free
    rng = np.random.default_rng(1)
    for _ in range(5):
        h1, h2 = order_pair(sample_channel(1, 2.0, rng), sample_channel(1, 1.0, rng))
        sc = PairScenario(n_antennas=1, r1=1.5, r2=r2, noise1=0.7, noise2=1.3)
        want = sc.r1 * sc.noise1 / h1.gain
        if r2 > 1:
            want = max(want, sc.noise2 * (r2 - 1) / h2.gain)
        pair, power, _ = solve_power_min_coma(sc, h1, h2, (1, -1), rng=0)
        assert power == pytest.approx(want, rel=1e-6)
        assert min(coma_constraint_slack(sc, h1, h2, pair, (1, -1))) >= -1e-6


@pytest.mark.parametrize("M", [2, 8])
def test_coma_other_orders_feasible(M):
    h1, h2 = _pair(9, 4)
    sc = PairScenario(n_antennas=4, constellation=PskConstellation(M), r2=2.0)
    const = sc.constellation
    for m in range(M):
        symbols = (const.symbol(0), const.symbol(m))
        pair, power, state = solve_power_min_coma(sc, h1, h2, symbols, rng=0)
        assert min(coma_constraint_slack(sc, h1, h2, pair, symbols)) >= -1e-6
        assert power == pytest.approx(pair.composite_power(const.phase(m)))


def test_coma_zero_targets_and_zero_channel():
    h1, h2 = _pair(0)
    sc = PairScenario(r1=0.0, r2=0.0)
    assert solve_power_min_coma(sc, h1, h2, (1, 1))[1] == 0.0
    zero = ChannelVector([0.0, 0.0], 1.0)
    with pytest.raises(InfeasibleError):
        solve_power_min_coma(PairScenario(), zero, h2, (1, 1))
    with pytest.raises(InfeasibleError):
        solve_power_min_coma(PairScenario(), h1, zero, (1, 1))


@pytest.mark.parametrize("seed", range(6))
def test_noma_matches_global_search(seed):
    h1, h2 = _pair(seed)
    sc = PairScenario(n_antennas=2)
    d = solve_power_min_noma(sc, h1, h2, rng=0)
    assert d.power == pytest.approx(NOMA_R2_ONE[seed], rel=1e-6)
    assert d.sdr_bound <= d.power * (1 + 1e-7)
    assert not d.randomization_gap
    assert min(noma_constraint_slack(sc, h1, h2, d.pair)) >= -1e-6
    pair, power = d
    assert power == d.power


def test_noma_single_antenna_closed_form():
    rng = np.random.default_rng(2)
    for _ in range(5):
        h1, h2 = order_pair(sample_channel(1, 2.0, rng), sample_channel(1, 1.0, rng))
        sc = PairScenario(n_antennas=1, r1=2.0, r2=1.5, sic_err_var=0.3)
        a1, a2 = h1.gain, h2.gain
        p1 = sc.r1 * (sc.sic_err_var + sc.noise1) / a1
        p2 = max(sc.r2 * (a1 * p1 + sc.noise1) / a1, sc.r2 * (a2 * p1 + sc.noise2) / a2)
        d = solve_power_min_noma(sc, h1, h2, rng=0)
        assert d.power == pytest.approx(p1 + p2, rel=1e-6)


def test_oma_closed_form():
    h1, h2 = _pair(3, 4)
    sc = PairScenario(n_antennas=4, r1=1.0, r2=3.0, noise1=2.0)
    pair, power = solve_power_min_oma(sc, h1, h2)
    want = 0.5 * (3.0 * 2.0 / h1.gain + 15.0 * 1.0 / h2.gain)
    assert power == pytest.approx(want)
    assert abs(h1.coeffs @ pair.w1) ** 2 == pytest.approx(6.0)
    with pytest.raises(InfeasibleError):
        solve_power_min_oma(sc, ChannelVector(np.zeros(4), 1.0), h2)


def test_power_grows_with_targets():
    h1, h2 = _pair(4, 4)
    prev = None
    for r2 in (1.0, 2.0, 3.0):
        sc = PairScenario(n_antennas=4, r2=r2)
        cur = (solve_power_min_coma(sc, h1, h2, (1, 1j), rng=0)[1],
               solve_power_min_noma(sc, h1, h2, rng=0).power,
               solve_power_min_oma(sc, h1, h2)[1])
        if prev is not None:
            assert all(c >= p - 1e-9 for c, p in zip(cur, prev))
        prev = cur


def test_noma_orthogonal_channels_kkt():
    # h1 orthogonal to h2: w1 along conj(h1) never reaches user 2; w2 splits into
    # a conj(h2) part for user 2 and a conj(h1) part for the SIC decision
    h1 = ChannelVector([1.0, 1.0j], 2.0)
    h2 = ChannelVector([0.5, 0.5j * -1.0], 1.0)
    assert abs(np.sum(h1.coeffs * np.conj(h2.coeffs))) == 0
    sc = PairScenario(n_antennas=2, r1=1.5, r2=2.0, sic_err_var=0.3)
    p1 = sc.r1 * (sc.sic_err_var + sc.noise1) / h1.gain
    p2 = sc.r2 * sc.noise2 / h2.gain + sc.r2 * (sc.r1 * (sc.sic_err_var + sc.noise1) + sc.noise1) / h1.gain
    d = solve_power_min_noma(sc, h1, h2, rng=0)
    assert d.sdr_bound == pytest.approx(p1 + p2, rel=1e-6)
    # the relative phase of the two w2 parts is free, so the relaxed W2 has
    # rank 2 and randomization lands slightly above the bound
    assert p1 + p2 - 1e-6 <= d.power <= 1.01 * (p1 + p2)
    assert min(noma_constraint_slack(sc, h1, h2, d.pair)) >= -1e-9


def test_noma_without_weak_target_is_single_user_mrt():
    h1, h2 = _pair(6, 3)
    sc = PairScenario(n_antennas=3, r1=2.0, r2=0.0, sic_err_var=0.5)
    d = solve_power_min_noma(sc, h1, h2, rng=0)
    assert np.allclose(d.pair.w2, 0)
    assert d.power == pytest.approx(2.0 * 1.5 / h1.gain, rel=1e-6)
    mrt = np.conj(h1.coeffs) / np.sqrt(h1.gain)
    assert abs(np.vdot(mrt, d.pair.w1)) == pytest.approx(np.linalg.norm(d.pair.w1), rel=1e-6)


def test_oma_examples():
    h = ChannelVector([1.0], 1.0)
    sc = PairScenario(n_antennas=1, r1=1.0, r2=1.0)
    assert solve_power_min_oma(sc, h, h)[1] == pytest.approx(3.0)
    assert solve_power_min_oma(sc.replace(r1=0.0, r2=0.0), h, h)[1] == 0.0


def test_coma_vanishing_targets():
    h1, h2 = _pair(2)
    powers = [solve_power_min_coma(PairScenario(r1=r, r2=r), h1, h2, (1, 1), rng=0)[1]
              for r in (1e-2, 1e-4, 1e-6)]
    assert np.all(np.diff(powers) < 0) and powers[-1] < 1e-5
