"""Symbol detectors, Monte-Carlo error counting and receiver operation counts.

Received samples follow ``y = h^T (w1 x1 + w2 x2) + n`` with
``n ~ CN(0, noise)``.  The strong user decodes with SIC under NOMA and by
phase alone under CoMA; the weak user always runs an ML detector that
treats the other user's term as noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import binomtest

from .channel import PairScenario, PrecoderPair, PskConstellation, order_pair, sample_channel
from .errors import InfeasibleError, RandomizationError, SolverError

SCHEMES = ("OMA", "NOMA", "CoMA")


def ml_detect(y, effective_gain, constellation: PskConstellation):
    """Index of the point ``x_m`` minimizing ``|y - gain x_m|^2``.

    Works elementwise on arrays of samples (and gains).  Ties, up to a
    relative rounding tolerance, go to the smallest index.
    """
    y = np.asarray(y, dtype=complex)
    g = np.asarray(effective_gain, dtype=complex)
    if not np.all(np.isfinite(g)):
        raise ValueError("effective gain must be finite")
    pts = constellation.points
    d = np.abs(y[..., None] - g[..., None] * pts) ** 2
    dmin = d.min(axis=-1, keepdims=True)
    scale = np.abs(y)[..., None] ** 2 + np.abs(g)[..., None] ** 2 * constellation.amplitude ** 2
    return np.argmax(d <= dmin + 1e-12 * scale, axis=-1)


def ci_receive(y, constellation: PskConstellation):
    """Phase-only PSK decision with half-open sectors ``[phi_m - pi/M, phi_m + pi/M)``.

    ``y = 0`` maps to index 0.
    """
    M = constellation.order
    s = np.angle(np.asarray(y, dtype=complex)) * M / (2 * np.pi) + 0.5
    return np.mod(np.floor(s + 1e-12).astype(int), M)


def complex_noise(rng, variance: float, size):
    """Samples of ``CN(0, variance)``."""
    z = rng.standard_normal((2,) + tuple(np.atleast_1d(size)))
    return np.sqrt(variance / 2) * (z[0] + 1j * z[1])


def sic_receive(y, h1, p: PrecoderPair, constellation: PskConstellation, rng,
                sic_err_var: float = 0.0):
    """Detect the weak user's symbol, cancel it, then detect the strong user's symbol.

    The cancellation leaves a complex Gaussian residual of variance
    ``sic_err_var``.  Returns ``(x1_hat, x2_hat)`` as index arrays.
    """
    g = h1.coeffs if hasattr(h1, "coeffs") else np.asarray(h1, dtype=complex)
    if g.shape != p.w1.shape:
        raise ValueError("channel and precoder dimensions differ")
    y = np.asarray(y, dtype=complex)
    g1, g2 = g @ p.w1, g @ p.w2
    x2_hat = ml_detect(y, g2, constellation)
    r = y - g2 * constellation.symbol(x2_hat)
    if sic_err_var > 0:
        r = r + complex_noise(np.random.default_rng(rng), sic_err_var, y.shape)
    x1_hat = ml_detect(r, g1, constellation)
    return x1_hat, x2_hat


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    ci = binomtest(int(errors), int(trials)).proportion_ci(0.95, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class SimReport:
    scheme: str
    trials: int
    errors_u1: int
    errors_u2: int
    resampled: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.trials < 1 or not (0 <= self.errors_u1 <= self.trials and 0 <= self.errors_u2 <= self.trials):
            raise ValueError("error counts must lie in [0, trials]")

    @property
    def ser_u1(self) -> float:
        return self.errors_u1 / self.trials

    @property
    def ser_u2(self) -> float:
        return self.errors_u2 / self.trials

    @property
    def ser_max(self) -> float:
        return max(self.ser_u1, self.ser_u2)

    @property
    def worst_user(self) -> int:
        return 1 if self.errors_u1 >= self.errors_u2 else 2

    @property
    def wilson_ci_95(self) -> dict:
        return {1: wilson_interval(self.errors_u1, self.trials),
                2: wilson_interval(self.errors_u2, self.trials)}

    @property
    def ci_max(self) -> tuple[float, float]:
        """Interval of the user that attains ``ser_max``."""
        return self.wilson_ci_95[self.worst_user]

    def __add__(self, other: "SimReport") -> "SimReport":
        if other.scheme != self.scheme:
            raise ValueError("cannot merge reports of different schemes")
        return SimReport(self.scheme, self.trials + other.trials, self.errors_u1 + other.errors_u1,
                         self.errors_u2 + other.errors_u2, self.resampled + other.resampled)


# a precoder source maps (h1, h2, delta) to the pair used for that draw;
# delta is the relative phase of the two symbols and only matters for CoMA
PrecoderSource = Callable[[object, object, float], PrecoderPair]


def block_errors(scheme: str, scenario: PairScenario, h1, h2, design, idx1, idx2, rng):
    """Error counts of one fading block.

    ``design`` is a :class:`PrecoderPair` for OMA and NOMA and a mapping from
    the relative symbol index ``(idx2 - idx1) mod M`` to a pair for CoMA.
    For OMA the indices address the ``M^2``-point alphabet each user sends
    in its own slot, and the pair holds the two slot precoders.
    """
    const = scenario.constellation
    n = len(idx1)
    g1, g2 = h1.coeffs, h2.coeffs
    n1 = complex_noise(rng, scenario.noise1, n)
    n2 = complex_noise(rng, scenario.noise2, n)
    if scheme == "OMA":
        wide = PskConstellation(const.order ** 2, const.amplitude)
        y1 = (g1 @ design.w1) * wide.symbol(idx1) + n1
        y2 = (g2 @ design.w2) * wide.symbol(idx2) + n2
        e1 = ml_detect(y1, g1 @ design.w1, wide) != idx1
        e2 = ml_detect(y2, g2 @ design.w2, wide) != idx2
        return int(e1.sum()), int(e2.sum())
    x1, x2 = const.symbol(idx1), const.symbol(idx2)
    if scheme == "NOMA":
        y1 = g1 @ design.w1 * x1 + g1 @ design.w2 * x2 + n1
        y2 = g2 @ design.w1 * x1 + g2 @ design.w2 * x2 + n2
        x1_hat, _ = sic_receive(y1, h1, design, const, rng, scenario.sic_err_var)
        x2_hat = ml_detect(y2, g2 @ design.w2, const)
        return int((x1_hat != idx1).sum()), int((x2_hat != idx2).sum())
    rel = np.mod(idx2 - idx1, const.order)
    e1 = e2 = 0
    for d in np.unique(rel):
        sel = rel == d
        p = design[int(d)]
        y1 = g1 @ p.w1 * x1[sel] + g1 @ p.w2 * x2[sel] + n1[sel]
        y2 = g2 @ p.w1 * x1[sel] + g2 @ p.w2 * x2[sel] + n2[sel]
        e1 += int((ci_receive(y1, const) != idx1[sel]).sum())
        e2 += int((ml_detect(y2, g2 @ p.w2, const) != idx2[sel]).sum())
    return e1, e2


def draw_design(scheme: str, scenario: PairScenario, h1, h2, source: PrecoderSource, deltas=None):
    """Precoders for one block; CoMA gets one pair per relative symbol index."""
    if scheme != "CoMA":
        return source(h1, h2, 0.0)
    M = scenario.constellation.order
    deltas = range(M) if deltas is None else deltas
    return {int(d): source(h1, h2, 2 * np.pi * int(d) / M) for d in deltas}


_DESIGN_ERRORS = (InfeasibleError, SolverError, RandomizationError)


def monte_carlo_ser(scheme: str, scenario: PairScenario, precoder_source: PrecoderSource,
                    n_trials: int, rng=None, symbols_per_draw: int = 100,
                    max_resamples: int | None = None) -> SimReport:
    """Block-fading Monte-Carlo symbol error rate of one scheme.

    Each block draws a channel pair, orders it, asks ``precoder_source``
    for the precoders and sends ``symbols_per_draw`` uniform symbol pairs
    (the last block may be shorter) until ``n_trials`` pairs are sent.  A
    block whose design fails is redrawn and counted in ``resampled``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if n_trials < 1 or symbols_per_draw < 1:
        raise ValueError("n_trials and symbols_per_draw must be positive")
    rng = np.random.default_rng(rng)
    n_blocks = -(-n_trials // symbols_per_draw)
    limit = 10 * n_blocks + 10 if max_resamples is None else max_resamples
    M = scenario.constellation.order
    alphabet = M * M if scheme == "OMA" else M
    N = scenario.n_antennas
    sent = e1 = e2 = resampled = 0
    while sent < n_trials:
        h1, h2 = order_pair(sample_channel(N, scenario.var1, rng), sample_channel(N, scenario.var2, rng))
        n = min(symbols_per_draw, n_trials - sent)
        idx = rng.integers(alphabet, size=(2, n))
        try:
            rel = np.unique(np.mod(idx[1] - idx[0], M)) if scheme == "CoMA" else None
            design = draw_design(scheme, scenario, h1, h2, precoder_source, rel)
        except _DESIGN_ERRORS:
            resampled += 1
            if resampled > limit:
                raise SolverError(f"{scheme}: more than {limit} failed designs")
            continue
        a, b = block_errors(scheme, scenario, h1, h2, design, idx[0], idx[1], rng)
        e1 += a
        e2 += b
        sent += n
    return SimReport(scheme, n_trials, e1, e2, resampled)


# -- receiver operation counts -------------------------------------------------

@dataclass(frozen=True)
class ComplexityReport:
    n_antennas: int
    mod_order: int
    n_pairs: int
    ops_noma: int
    ops_coma: int
    d_of_m: int


def _check_sizes(N, M, K):
    for name, v, lo in (("N", N, 1), ("M", M, 2), ("K", K, 1)):
        if int(v) != v or v < lo:
            raise ValueError(f"{name} must be an integer >= {lo}, got {v}")
    return int(N), int(M), int(K)


def detection_ops(N: int, M: int) -> int:
    """Complex operations of one ML detection pass, ``4NM + 2M^N``."""
    return 4 * N * M + 2 * M ** N


def complexity_noma(N: int, M: int, K: int = 1, subtraction_const: int = 1) -> int:
    """SIC receivers: three detection passes plus ``c M^2`` for the subtraction, per pair."""
    N, M, K = _check_sizes(N, M, K)
    if subtraction_const < 0:
        raise ValueError("subtraction_const must be nonnegative")
    per_pair = sum(detection_ops(N, M) * (2 - i + 1) for i in (1, 2)) + subtraction_const * M ** 2
    return K * per_pair


def complexity_coma(N: int, M: int, K: int = 1, d_of_m: int | None = None) -> int:
    """CI receivers: one detection pass plus the sector decision ``D(M)``, per pair."""
    N, M, K = _check_sizes(N, M, K)
    d = M if d_of_m is None else d_of_m
    if int(d) != d or d < 1:
        raise ValueError("d_of_m must be a positive integer")
    return K * (detection_ops(N, M) + int(d))


def complexity_report(N: int, M: int, K: int = 1, subtraction_const: int = 1,
                      d_of_m: int | None = None) -> ComplexityReport:
    d = M if d_of_m is None else d_of_m
    return ComplexityReport(N, M, K, complexity_noma(N, M, K, subtraction_const),
                            complexity_coma(N, M, K, d), int(d))
