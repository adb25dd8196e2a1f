"""Stochastic physical layer: sources, fiber, detectors and the two monitors.

All samplers take one uniform draw per pulse per stochastic step, regardless
of the outcome, and invert the relevant CDF. That keeps the number of draws
consumed by a stage independent of what happened upstream, which is what lets
sessions with and without an eavesdropper share their random streams.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .random_stream import RandomStream

# Photon-number support beyond which source tails are treated as zero.
_PMF_TAIL = 1e-16


def _invert_cdf(pmf, u):
    cdf = np.cumsum(pmf)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(pmf) - 1).astype(np.int64)


@dataclass(frozen=True)
class WeakCoherentSource:
    """Attenuated laser: Poissonian photon number with mean ``mu``."""

    mu: float = 0.1

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mean photon number must be >= 0, got {self.mu!r}")

    def pmf(self) -> np.ndarray:
        if self.mu == 0:
            return np.array([1.0])
        n_max = int(stats.poisson.isf(_PMF_TAIL, self.mu)) + 1
        return stats.poisson.pmf(np.arange(n_max + 1), self.mu)

    def quantile(self, u):
        return _invert_cdf(self.pmf(), u)


@dataclass(frozen=True)
class SinglePhotonSource:
    """Sub-Poissonian source: one photon w.p. ``p1``, two w.p. ``p_multi``, else vacuum.

    ``p1 = 1, p_multi = 0`` is the ideal single-photon source.
    """

    p1: float = 1.0
    p_multi: float = 0.0

    def __post_init__(self):
        if self.p1 < 0 or self.p_multi < 0 or self.p1 + self.p_multi > 1 + 1e-15:
            raise ValueError("single-photon source probabilities must be >= 0 and sum to <= 1")

    def pmf(self) -> np.ndarray:
        return np.array([max(0.0, 1 - self.p1 - self.p_multi), self.p1, self.p_multi])

    def quantile(self, u):
        return _invert_cdf(self.pmf(), u)


def sample_photon_number(src, rng: RandomStream, size=None):
    """Photon number(s) emitted by ``src``.

    For an array, the non-vacuum pulses are placed first (a Bernoulli
    position draw) and only they get a photon number from the conditional
    distribution, so a faint source costs little per pulse.
    """
    if size is None:
        return int(src.quantile(rng.uniform()))
    shape = (size,) if np.ndim(size) == 0 else tuple(size)
    count = int(np.prod(shape))
    pmf = src.pmf()
    out = np.zeros(count, np.int64)
    lit = rng.bernoulli_positions(count, float(min(1.0, max(0.0, 1.0 - pmf[0]))))
    if len(lit):
        tail = pmf[1:] / pmf[1:].sum()
        out[lit] = 1 + _invert_cdf(tail, rng.uniform(len(lit)))
    return out.reshape(shape)


def multi_photon_probability(src) -> float:
    pmf = src.pmf()
    return float(pmf[2:].sum())


@dataclass(frozen=True)
class FiberChannel:
    attenuation: float = 0.25  # dB/km
    length: float = 0.0        # km

    def __post_init__(self):
        if self.attenuation < 0 or self.length < 0:
            raise ValueError("attenuation and length must be >= 0")


def transmittance(ch: FiberChannel) -> float:
    """Per-photon survival probability ``10**(-attenuation * length / 10)``."""
    return 10.0 ** (-ch.attenuation * ch.length / 10.0)


def binomial_from_uniform(u, n, p):
    """Binomial(n, p) by CDF inversion of ``u``; element-wise, one draw each."""
    n = np.asarray(n)
    u = np.asarray(u, dtype=float)
    if p <= 0:
        return np.zeros(np.broadcast(u, n).shape, np.int64)
    if p >= 1:
        return np.broadcast_to(n, np.broadcast(u, n).shape).astype(np.int64)
    # ppf(0) is -1 for discrete laws; u = 0 belongs to the lowest outcome
    return np.maximum(stats.binom.ppf(u, n, p), 0).astype(np.int64)


def channel_survivors(photons, ch: FiberChannel, rng: RandomStream):
    """Photons left after fiber loss, each surviving independently."""
    photons = np.asarray(photons)
    return binomial_from_uniform(rng.uniform(photons.shape), photons, transmittance(ch))


@dataclass(frozen=True)
class Detector:
    efficiency: float = 0.1
    dark_prob: float = 1e-5
    label: str = "D"

    def __post_init__(self):
        for name in ("efficiency", "dark_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")


def click_probability(photons, det: Detector):
    signal = 1.0 - (1.0 - det.efficiency) ** np.asarray(photons)
    return 1.0 - (1.0 - signal) * (1.0 - det.dark_prob)


def detect(photons_arriving, det: Detector, rng: RandomStream):
    """Threshold detection of ``photons_arriving`` with independent dark counts.

    Draws two uniforms per gate (signal, dark). Accepts a scalar or an array.
    """
    photons = np.asarray(photons_arriving)
    if np.any(photons < 0):
        raise ValueError("photon number must be non-negative")
    u = rng.uniform(photons.shape + (2,))
    clicks = detect_from_uniform(photons, det, u[..., 0], u[..., 1])
    return bool(clicks) if clicks.ndim == 0 else clicks


def detect_from_uniform(photons, det: Detector, u_signal, u_dark):
    photons = np.asarray(photons)
    u_signal = np.asarray(u_signal)
    lit = photons > 0
    signal = np.zeros(photons.shape, bool)
    signal[lit] = u_signal[lit] < 1.0 - (1.0 - det.efficiency) ** photons[lit]
    return signal | (np.asarray(u_dark) < det.dark_prob)


@dataclass(frozen=True)
class WatchdogMonitor:
    """Tap coupler at Bob's input feeding a classical energy monitor."""

    tap_fraction: float = 0.9
    energy_threshold: float = 9.0e4  # 10x a tapped nominal pulse of 1e4 photons

    def __post_init__(self):
        if not 0.0 <= self.tap_fraction <= 1.0:
            raise ValueError("tap_fraction must lie in [0, 1]")

    @classmethod
    def for_nominal(cls, nominal_energy: float, tap_fraction: float = 0.9, factor: float = 10.0):
        return cls(tap_fraction, factor * tap_fraction * nominal_energy)


def watchdog_check(pulse_energy, w: WatchdogMonitor):
    """``"alarm"`` iff the tapped energy exceeds the threshold, else ``"pass"``.

    With an array argument returns a boolean alarm mask.
    """
    e = np.asarray(pulse_energy, dtype=float)
    if np.any(e < 0):
        raise ValueError("pulse energy must be non-negative")
    alarm = w.tap_fraction * e > w.energy_threshold
    if alarm.ndim == 0:
        return "alarm" if alarm else "pass"
    return alarm


@dataclass(frozen=True)
class CoincidenceMonitor:
    """Double-click watch over consecutive, non-overlapping windows of gates.

    ``min_count`` is the fewest double clicks in a window that may raise an
    alarm; below it a single stray event would dominate the rate comparison.
    """

    accidental_threshold_factor: float = 3.0
    window: int = 1_000_000
    dark_prob: float = 0.0
    min_count: int = 5

    def __post_init__(self):
        if self.accidental_threshold_factor < 1:
            raise ValueError("accidental_threshold_factor must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")


@dataclass
class CoincidenceReport:
    verdict: str
    windows: list = field(default_factory=list)  # (observed_rate, expected_rate)


def coincidence_check(click_log, m: CoincidenceMonitor) -> CoincidenceReport:
    """Compare the observed double-click rate with the accidental rate.

    ``click_log`` is a sequence of ``(click0, click1)`` pairs, one per gate.
    The accidental rate for a window is the product of the two single-detector
    click rates, each floored at the dark-count probability; that product is
    exact for independent detectors. A window alarms when its double-click
    rate exceeds ``accidental_threshold_factor`` times that and it holds at
    least ``min_count`` double clicks. Trailing gates that do not fill a
    whole window are ignored.
    """
    log = np.asarray(click_log, dtype=bool).reshape(-1, 2)
    if len(log) < m.window:
        raise ValueError(f"click log has {len(log)} gates, fewer than the window of {m.window}")
    verdict = "pass"
    windows = []
    for start in range(0, len(log) - m.window + 1, m.window):
        block = log[start:start + m.window]
        r0 = max(block[:, 0].mean(), m.dark_prob)
        r1 = max(block[:, 1].mean(), m.dark_prob)
        doubles = int(np.count_nonzero(block[:, 0] & block[:, 1]))
        observed = doubles / m.window
        expected = float(r0 * r1)
        windows.append((observed, expected))
        if doubles >= m.min_count and observed > m.accidental_threshold_factor * expected:
            verdict = "alarm"
    return CoincidenceReport(verdict, windows)
