"""Channel vectors, PSK geometry and the closed-form link quality expressions.

Convention: the received sample of a user with channel ``h`` is
``h^T x`` with the *unconjugated* transpose.  Every inner product in this
package is therefore written ``h @ w`` (``numpy`` does not conjugate), and
``|h^T w|^2`` is ``abs(h @ w) ** 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ChannelVector:
    coeffs: np.ndarray
    gen_variance: float

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if coeffs.size < 1:
            raise ValueError("channel needs at least one antenna")
        if not self.gen_variance > 0:
            raise ValueError("generating variance must be positive")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n(self) -> int:
        return self.coeffs.size

    @property
    def gain(self) -> float:
        """Squared Euclidean norm."""
        return float(np.vdot(self.coeffs, self.coeffs).real)

    def __len__(self):
        return self.coeffs.size


@dataclass(frozen=True)
class PskConstellation:
    """Unit-spaced M-PSK alphabet, symbol ``m`` at phase ``2 pi m / M``."""

    order: int = 4
    amplitude: float = 1.0

    def __post_init__(self):
        M = self.order
        if M < 2 or M & (M - 1):
            raise ValueError(f"PSK order must be a power of two >= 2, got {M}")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")

    @property
    def half_angle(self) -> float:
        return np.pi / self.order

    def phase(self, m):
        return 2 * np.pi * np.asarray(m) / self.order

    @property
    def points(self) -> np.ndarray:
        return self.amplitude * np.exp(1j * self.phase(np.arange(self.order)))

    def symbol(self, m):
        return self.amplitude * np.exp(1j * self.phase(m))


@dataclass(frozen=True)
class PairScenario:
    n_antennas: int = 2
    var1: float = 2.0
    var2: float = 1.0
    noise1: float = 1.0
    noise2: float = 1.0
    sic_err_var: float = 0.0
    r1: float = 1.0
    r2: float = 1.0
    power_budget: float = 10.0
    constellation: PskConstellation = field(default_factory=PskConstellation)

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if min(self.var1, self.var2, self.sic_err_var) < 0:
            raise ValueError("variances must be nonnegative")
        if not (self.noise1 > 0 and self.noise2 > 0):
            raise ValueError("noise variances must be positive")
        if min(self.r1, self.r2) < 0:
            raise ValueError("target SINRs must be nonnegative")
        if not self.power_budget > 0:
            raise ValueError("power budget must be positive")

    def replace(self, **changes) -> "PairScenario":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True)
class PrecoderPair:
    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=complex).ravel()
        w2 = np.array(self.w2, dtype=complex).ravel()
        if w1.shape != w2.shape:
            raise ValueError("precoders must have equal length")
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
            raise ValueError("precoders must be finite")
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    def composite(self, delta: float = 0.0) -> np.ndarray:
        """Transmit vector per unit symbol, ``w1 + w2 exp(j delta)``."""
        return self.w1 + self.w2 * np.exp(1j * delta)

    def composite_power(self, delta: float = 0.0) -> float:
        u = self.composite(delta)
        return float(np.vdot(u, u).real)

    @property
    def total_power(self) -> float:
        """``||w1||^2 + ||w2||^2``."""
        return float(np.vdot(self.w1, self.w1).real + np.vdot(self.w2, self.w2).real)

    def rotated(self, alpha: float) -> "PrecoderPair":
        r = np.exp(1j * alpha)
        return PrecoderPair(self.w1 * r, self.w2 * r)


def sample_channel(n: int, variance: float, rng) -> ChannelVector:
    """Draw ``h ~ CN(0, variance I_n)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance}")
    rng = np.random.default_rng(rng)
    z = rng.standard_normal((2, int(n)))
    return ChannelVector(np.sqrt(variance / 2) * (z[0] + 1j * z[1]), variance)


def order_pair(h_a: ChannelVector, h_b: ChannelVector):
    """Return ``(strong, weak)`` by squared norm; ties keep ``h_a`` first."""
    if h_a.n != h_b.n:
        raise ValueError("channels have different lengths")
    if h_b.gain > h_a.gain:
        return h_b, h_a
    return h_a, h_b


def _coeffs(h):
    return h.coeffs if isinstance(h, ChannelVector) else np.asarray(h, dtype=complex)


def _check(h, *ws):
    for w in ws:
        if np.shape(w) != np.shape(h):
            raise ValueError("channel and precoder dimensions differ")


def noma_sic_sinr(h1, p: PrecoderPair, noise1: float) -> float:
    """SINR at the strong user when decoding the weak user's symbol."""
    h = _coeffs(h1)
    _check(h, p.w1)
    return float(abs(h @ p.w2) ** 2 / (abs(h @ p.w1) ** 2 + noise1))


def noma_sinrs(h1, h2, p: PrecoderPair, scenario: PairScenario):
    """Post-SIC SINR of user 1 and SINR of user 2 (interference as noise)."""
    g1, g2 = _coeffs(h1), _coeffs(h2)
    _check(g1, p.w1)
    _check(g2, p.w1)
    gamma1 = abs(g1 @ p.w1) ** 2 / (scenario.sic_err_var + scenario.noise1)
    gamma2 = abs(g2 @ p.w2) ** 2 / (abs(g2 @ p.w1) ** 2 + scenario.noise2)
    return float(gamma1), float(gamma2)


def coma_snrs(h1, h2, p: PrecoderPair, symbols, scenario: PairScenario):
    """User-1 SNR with the superimposed symbol counted as signal, and user-2 SINR."""
    g1, g2 = _coeffs(h1), _coeffs(h2)
    _check(g1, p.w1)
    _check(g2, p.w1)
    x1, x2 = symbols
    snr1 = abs(g1 @ (p.w1 * x1 + p.w2 * x2)) ** 2 / scenario.noise1
    sinr2 = abs(g2 @ p.w2) ** 2 / (abs(g2 @ p.w1) ** 2 + scenario.noise2)
    return float(snr1), float(sinr2)


def relative_phases(symbols) -> np.ndarray:
    """Phases of the symbols relative to user 1's symbol."""
    x = np.asarray(symbols, dtype=complex)
    return np.angle(x) - np.angle(x[0])


def ci_region_residual(h1, p: PrecoderPair, phases, r1: float, noise1: float,
                       theta: float) -> float:
    """Signed slack of the constructive-region constraint at user 1.

    With ``y = h1^T sum_k w_k exp(j(phi_k - phi_1))`` the constraint is
    ``|Im y| <= (Re y - sqrt(r1 noise1)) tan(theta)``; the return value is
    ``(Re y - sqrt(r1 noise1)) tan(theta) - |Im y|`` (nonnegative iff
    satisfied).  For ``theta = pi/2`` (BPSK) the region is the half-plane
    ``Re y >= sqrt(r1 noise1)`` and ``Re y - sqrt(r1 noise1)`` is returned.
    """
    if not 0 < theta <= np.pi / 2:
        raise ValueError("theta must lie in (0, pi/2]")
    g = _coeffs(h1)
    _check(g, p.w1)
    ph = np.asarray(phases, dtype=float)
    y = g @ (p.w1 + p.w2 * np.exp(1j * (ph[1] - ph[0])))
    margin = y.real - np.sqrt(r1 * noise1)
    if np.isclose(theta, np.pi / 2):
        return float(margin)
    return float(margin * np.tan(theta) - abs(y.imag))
