import numpy as np
import pytest

from cinoma import (PairScenario, PrecoderPair, PskConstellation, SimReport, ci_receive,
                    complexity_coma, complexity_noma, complexity_report, ml_detect,
                    monte_carlo_ser, order_pair, sample_channel, sic_receive,
                    solve_power_min_coma, solve_power_min_noma, solve_power_min_oma)
from cinoma.receiver import block_errors, complex_noise, draw_design, wilson_interval
from oracles import psk_ser


@pytest.mark.parametrize("M", [2, 4, 8])
def test_ml_detect_noiseless_and_ties(M):
    c = PskConstellation(M)
    g = 0.7 * np.exp(0.3j)
    assert np.array_equal(ml_detect(g * c.points, g, c), np.arange(M))
    # equidistant from every point: smallest index
    assert ml_detect(0.0, g, c) == 0
    # halfway between points 0 and 1
    mid = g * (c.points[0] + c.points[1]) / 2
    assert ml_detect(mid, g, c) == 0
    with pytest.raises(ValueError):
        ml_detect(1.0, np.inf, c)


@pytest.mark.parametrize("M", [2, 4, 8])
def test_ci_receive_sector_edges(M):
    c = PskConstellation(M)
    half = np.pi / M
    for m in range(M):
        centre = 2 * np.pi * m / M
        assert ci_receive(np.exp(1j * centre), c) == m
        # half-open sectors [centre - pi/M, centre + pi/M)
        assert ci_receive(np.exp(1j * (centre - half)), c) == m
        assert ci_receive(np.exp(1j * (centre + half)), c) == (m + 1) % M
        assert ci_receive(np.exp(1j * (centre + half - 1e-9)), c) == m
    assert ci_receive(0.0, c) == 0


@pytest.mark.parametrize("M, snr_db", [(2, 4.0), (4, 8.0), (8, 14.0)])
def test_awgn_ser_matches_analytic(M, snr_db):
    rng = np.random.default_rng(M)
    c = PskConstellation(M)
    n = 100_000
    snr = 10 ** (snr_db / 10)
    idx = rng.integers(M, size=n)
    y = c.symbol(idx) + complex_noise(rng, 1 / snr, n)
    errors = int((ml_detect(y, 1.0, c) != idx).sum())
    assert errors == int((ci_receive(y, c) != idx).sum())
    lo, hi = wilson_interval(errors, n)
    want = psk_ser(snr, M)
    assert abs(errors / n - want) <= 3 * (hi - lo)


def test_complex_noise_variance():
    z = complex_noise(np.random.default_rng(0), 2.5, 200_000)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.5, rel=0.01)
    assert np.mean(z.real ** 2) == pytest.approx(1.25, rel=0.02)


def test_sic_noiseless_and_propagation():
    c = PskConstellation(4)
    h1 = np.array([1.0, 0.5j])
    p = PrecoderPair([0.3, 0.0], [2.0, 0.0])
    i1, i2 = np.meshgrid(np.arange(4), np.arange(4))
    i1, i2 = i1.ravel(), i2.ravel()
    y = (h1 @ p.w1) * c.symbol(i1) + (h1 @ p.w2) * c.symbol(i2)
    x1, x2 = sic_receive(y, h1, p, c, rng=0)
    assert np.array_equal(x1, i1) and np.array_equal(x2, i2)
    # a disturbance 60% of the way to the neighbouring x2 flips that decision,
    # and the cancellation then leaves 40% of the gap, which swamps user 1
    g2 = h1 @ p.w2
    gap = g2 * (c.symbol(i2 + 1) - c.symbol(i2))
    x1, x2 = sic_receive(y + 0.6 * gap, h1, p, c, rng=0)
    assert np.all(x2 == (i2 + 1) % 4)
    assert np.mean(x1 != i1) >= 0.5
    with pytest.raises(ValueError):
        sic_receive(y, np.ones(3), p, c, rng=0)


def test_sic_error_variance_saturates():
    c = PskConstellation(4)
    h1 = np.array([1.0])
    p = PrecoderPair([1.0], [3.0])
    rng = np.random.default_rng(3)
    idx = rng.integers(4, size=(2, 20000))
    y = p.w1[0] * c.symbol(idx[0]) + p.w2[0] * c.symbol(idx[1])
    x1, _ = sic_receive(y, h1, p, c, rng=1, sic_err_var=1e6)
    assert np.mean(x1 != idx[0]) == pytest.approx(0.75, abs=0.02)
    x1, _ = sic_receive(y, h1, p, c, rng=1, sic_err_var=0.0)
    assert np.all(x1 == idx[0])


@pytest.mark.parametrize("M", [2, 4, 8])
def test_coma_user1_noiseless_all_pairs(M):
    rng = np.random.default_rng(10 + M)
    sc = PairScenario(n_antennas=2, constellation=PskConstellation(M), noise1=1e-9, noise2=1e-9)
    design_sc = sc.replace(noise1=1.0, noise2=1.0)
    h1, h2 = order_pair(sample_channel(2, 2.0, rng), sample_channel(2, 1.0, rng))
    src = lambda a, b, d: solve_power_min_coma(design_sc, a, b, (1, np.exp(1j * d)), rng=0)[0]
    design = draw_design("CoMA", sc, h1, h2, src)
    i1, i2 = np.meshgrid(np.arange(M), np.arange(M))
    e1, e2 = block_errors("CoMA", sc, h1, h2, design, i1.ravel(), i2.ravel(), rng)
    assert e1 == 0


def test_sim_report():
    r = SimReport("NOMA", 100, 3, 7, 1)
    assert r.ser_max == 0.07 and r.worst_user == 2
    assert r.ci_max == r.wilson_ci_95[2]
    lo, hi = r.ci_max
    assert lo < 0.07 < hi
    s = r + SimReport("NOMA", 50, 1, 0)
    assert (s.trials, s.errors_u1, s.errors_u2, s.resampled) == (150, 4, 7, 1)
    with pytest.raises(ValueError):
        r + SimReport("OMA", 1, 0, 0)
    with pytest.raises(ValueError):
        SimReport("TDMA", 1, 0, 0)
    with pytest.raises(ValueError):
        SimReport("OMA", 10, 11, 0)


def _sources(sc):
    return {"OMA": lambda a, b, d: solve_power_min_oma(sc, a, b)[0],
            "NOMA": lambda a, b, d: solve_power_min_noma(sc, a, b, rng=0).pair,
            "CoMA": lambda a, b, d: solve_power_min_coma(sc, a, b, (1, np.exp(1j * d)), rng=0)[0]}


@pytest.mark.parametrize("scheme", ["OMA", "NOMA", "CoMA"])
def test_monte_carlo_reproducible(scheme):
    sc = PairScenario(n_antennas=2, r2=4.0)
    src = _sources(sc)[scheme]
    a = monte_carlo_ser(scheme, sc, src, 500, rng=7, symbols_per_draw=50)
    b = monte_carlo_ser(scheme, sc, src, 500, rng=7, symbols_per_draw=50)
    assert a == b
    assert a.trials == 500


def test_monte_carlo_resamples_failed_designs():
    from cinoma import InfeasibleError
    sc = PairScenario(n_antennas=2)
    calls = []

    def flaky(a, b, d):
        calls.append(1)
        if len(calls) % 2:
            raise InfeasibleError("no")
        return solve_power_min_oma(sc, a, b)[0]

    r = monte_carlo_ser("OMA", sc, flaky, 200, rng=0, symbols_per_draw=100)
    assert r.resampled == 2
    from cinoma import SolverError
    with pytest.raises(SolverError):
        monte_carlo_ser("OMA", sc, lambda *a: (_ for _ in ()).throw(InfeasibleError()), 10,
                        rng=0, max_resamples=3)
    with pytest.raises(ValueError):
        monte_carlo_ser("OMA", sc, flaky, 0)


def test_complexity_values():
    assert complexity_noma(2, 2, 1, 1) == 76
    assert complexity_coma(2, 2, 1, 2) == 26
    assert complexity_coma(2, 2) == 26
    assert complexity_noma(3, 4, K=2, subtraction_const=0) == 2 * 3 * (48 + 128)
    r = complexity_report(4, 8, K=3)
    assert (r.ops_noma, r.ops_coma, r.d_of_m) == (complexity_noma(4, 8, 3), complexity_coma(4, 8, 3), 8)


@pytest.mark.parametrize("args", [(0, 2), (2, 1), (2, 2, 0), (1.5, 2)])
def test_complexity_rejects_bad_sizes(args):
    with pytest.raises(ValueError):
        complexity_noma(*args)
    with pytest.raises(ValueError):
        complexity_coma(*args)


def test_complexity_gap_grows():
    for M in (2, 4, 8):
        gaps = [complexity_noma(N, M) - complexity_coma(N, M) for N in range(1, 20)]
        assert np.all(np.diff(gaps) > 0)


def test_detector_examples():
    c = PskConstellation(4)
    g = 1.3 - 0.4j
    assert ml_detect(g * c.points[3], g, c) == 3
    assert ci_receive(2.7 * np.exp(1j * np.pi), c) == 2


def test_single_user_reduction_matches_awgn():
    # w2 = 0 and a gain normalized to sqrt(snr): user 1 sees plain AWGN
    snr = 10 ** 0.8
    sc = PairScenario(n_antennas=2)
    src = lambda h1, h2, d: PrecoderPair(np.sqrt(snr) * np.conj(h1.coeffs) / h1.gain, np.zeros(2))
    rep = monte_carlo_ser("CoMA", sc, src, 100_000, rng=3, symbols_per_draw=1000)
    lo, hi = rep.wilson_ci_95[1]
    assert abs(rep.ser_u1 - psk_ser(snr, 4)) <= 3 * (hi - lo)


def test_complexity_linear_in_k_and_increasing_in_n():
    assert complexity_noma(3, 4, K=2) == 2 * complexity_noma(3, 4)
    assert complexity_coma(3, 4, K=2) == 2 * complexity_coma(3, 4)
    vals = [complexity_noma(N, 2) for N in range(1, 65)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
