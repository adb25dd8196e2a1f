"""Path-amplitude models of time-bin interferometers.

Time is measured in integer bins equal to the interferometer imbalance and
pulses have zero width. Every optical imperfection is folded into a single
visibility ``V``; no polarization model is carried.

Coupler convention: a coupler with power ratio ``k`` passes amplitude
``sqrt(1 - k)`` straight through and ``i sqrt(k)`` across. Arm 0 is the short
arm and arm 1 the long one, so with ``k = 0`` a pulse entering port 0 stays
entirely in the short arm.
"""
from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

import numpy as np

PEAKS = ("early", "central", "late")
DETECTOR_PAIRS = ((0, 0), (0, 1), (1, 0), (1, 1))

# Documented defaults for the entangled-pair source; only used as labels.
PAIR_CREATION_PROBABILITY = 0.1
DOWNCONVERSION_PROBABILITY = 1e-10


def _check_visibility(v):
    if np.any(np.asarray(v) < 0) or np.any(np.asarray(v) > 1):
        raise ValueError(f"visibility must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class Interferometer:
    """Unbalanced Mach-Zehnder: short arm, long arm with extra ``delay`` bins and ``phase``."""

    phase: float = 0.0
    delay: int = 1
    input_coupling: float = 0.5
    output_coupling: float = 0.5

    def __post_init__(self):
        if self.delay < 1:
            raise ValueError("delay must be at least one time bin")
        for name in ("input_coupling", "output_coupling"):
            k = getattr(self, name)
            if not 0.0 <= k <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {k!r}")


def _coupler(k: float, port_in: int, port_out: int) -> complex:
    return math.sqrt(1 - k) if port_in == port_out else 1j * math.sqrt(k)


class TimeBinAmplitudes(dict):
    """Mapping ``(port, bin) -> complex amplitude``."""

    @classmethod
    def pulse(cls, port: int = 0, time_bin: int = 0) -> "TimeBinAmplitudes":
        return cls({(port, time_bin): 1.0 + 0j})

    def total_probability(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.values()))

    def probability(self, port=None, time_bin=None) -> float:
        return float(sum(
            abs(a) ** 2 for (p, t), a in self.items()
            if (port is None or p == port) and (time_bin is None or t == time_bin)
        ))

    def port(self, port: int) -> "TimeBinAmplitudes":
        """Keep only one output port (the rest is lost)."""
        return TimeBinAmplitudes({k: a for k, a in self.items() if k[0] == port})


def propagate(amplitudes: Mapping, device: Interferometer) -> TimeBinAmplitudes:
    """Coherent sum over the short and long paths of ``device``.

    Output port ``q`` of this device is meant to feed input port ``q`` of the
    next, so a cascade of lossless devices stays unitary.
    """
    out = defaultdict(complex)
    long_phase = cmath.exp(1j * device.phase)
    for (port, t), amp in amplitudes.items():
        for arm in (0, 1):
            a_arm = amp * _coupler(device.input_coupling, port, arm)
            if arm == 1:
                a_arm *= long_phase
            t_out = t + device.delay * arm
            for q in (0, 1):
                out[(q, t_out)] += a_arm * _coupler(device.output_coupling, arm, q)
    return TimeBinAmplitudes({k: v for k, v in out.items() if v != 0})


@dataclass(frozen=True)
class CoincidenceDistribution:
    """Joint probabilities over ``(peak, (alice_detector, bob_detector))``."""

    probabilities: Mapping

    def __getitem__(self, key):
        return self.probabilities[key]

    def peak(self, name: str) -> float:
        return sum(self.probabilities[(name, pair)] for pair in DETECTOR_PAIRS)

    def same_detector(self, name: str) -> float:
        return self.probabilities[(name, (0, 0))] + self.probabilities[(name, (1, 1))]

    def correlation(self, name: str = "central") -> float:
        """E = P(same) - P(different), conditioned on the peak."""
        total = self.peak(name)
        same = self.same_detector(name)
        return (same - (total - same)) / total

    def total(self) -> float:
        return float(sum(self.probabilities.values()))


def franson_coincidence(phase_a: float, phase_b: float, v: float) -> CoincidenceDistribution:
    """Coincidence statistics of an energy-time pair behind two 50/50 analyzers.

    Lateral peaks (both photons early or both late) carry 1/4 each and show
    no detector correlation; the central peak carries 1/2 and its
    same-detector probability is ``(1 + V cos(a + b)) / 2``.
    """
    _check_visibility(v)
    probs = {}
    for peak in ("early", "late"):
        for pair in DETECTOR_PAIRS:
            probs[(peak, pair)] = 1 / 16
    c = v * math.cos(phase_a + phase_b)
    for pair in DETECTOR_PAIRS:
        same = pair[0] == pair[1]
        probs[("central", pair)] = (1 + c) / 8 if same else (1 - c) / 8
    return CoincidenceDistribution(probs)


def plug_and_play_click_prob(phase_bob, phase_alice, v):
    """Detector probabilities ``(p0, p1)`` for a go-and-return interferometer.

    Detector 0 is the constructive port at zero phase difference. Works
    element-wise on arrays.
    """
    _check_visibility(v)
    p0 = 0.5 * (1 + v * np.cos(np.subtract(phase_bob, phase_alice)))
    if np.ndim(p0) == 0:
        p0 = float(p0)
    return p0, 1 - p0


def qber_from_visibility(v: float) -> float:
    """Error rate among interfering outcomes, ``(1 - V) / 2``."""
    _check_visibility(v)
    return (1 - v) / 2


CHSH_SETTINGS = ((0.0, math.pi / 2), (-math.pi / 4, math.pi / 4))


def chsh_value(v: float, settings=CHSH_SETTINGS) -> float:
    """CHSH combination of central-peak correlations at the given settings.

    The default settings are optimal for ``E = V cos(a + b)`` and give
    ``2 sqrt(2) V``.
    """
    (a0, a1), (b0, b1) = settings

    def e(a, b):
        return franson_coincidence(a, b, v).correlation("central")

    return abs(e(a0, b0) + e(a0, b1) + e(a1, b0) - e(a1, b1))
