"""Eavesdropping strategies and the analytic information curves.

Eve sits at the exit of Alice's station. Her quantum memory and photon-number
measurement are assumed perfect. Three behaviours are supported:

``none``
    Pulses pass untouched.
``intercept_resend``
    With probability ``omega`` Eve measures in a random basis and resends the
    eigenstate she observed.
``pns``
    Photon-number splitting: single-photon pulses are blocked, one photon of
    every multi-photon pulse is stored and the rest travel to Bob over a
    lossless line. The blocked fraction is tuned so that Bob's detection rate
    matches the honest one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .quantum import (
    Basis,
    QubitState,
    binary_entropy,
    born_probabilities,
    measure,
    prepare_state,
)
from .random_stream import RandomStream

# Per-pulse action codes, shared with the pulse log.
NONE, INTERCEPT, BLOCK, SPLIT, PASS = range(5)
ACTION_TAGS = ("none", "intercept", "block", "split", "pass")

STRATEGIES = ("none", "intercept_resend", "pns")
PNS_POLICIES = ("rate_matched", "block_all")


class ProtocolKind(str, enum.Enum):
    BB84 = "bb84"
    SARG = "sarg"


@dataclass(frozen=True)
class EveStrategy:
    tag: str = "none"
    omega: float = 1.0
    pns_policy: str = "rate_matched"

    def __post_init__(self):
        if self.tag not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.tag!r}; expected one of {STRATEGIES}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"attack fraction omega must lie in [0, 1], got {self.omega!r}")
        if self.pns_policy not in PNS_POLICIES:
            raise ValueError(f"unknown PNS policy {self.pns_policy!r}")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def intercept_resend(cls, omega=1.0):
        return cls("intercept_resend", omega=omega)

    @classmethod
    def pns(cls, policy="rate_matched"):
        return cls("pns", pns_policy=policy)


# -- state indices ---------------------------------------------------------
# A protocol state is encoded as ``2 * basis + bit``: 0=+x, 1=-x, 2=+y, 3=-y.

STATES = tuple(prepare_state(i % 2, Basis(i // 2)) for i in range(4))


def state_index(bit, basis):
    return 2 * np.asarray(basis) + np.asarray(bit)


def _overlap_table():
    return np.array([[a.overlap(b) for b in STATES] for a in STATES])


OVERLAP = _overlap_table()


# -- intercept-resend --------------------------------------------------------

@dataclass(frozen=True)
class MeasuredEntry:
    """What Eve holds after measuring: her basis and observed sign."""

    basis: Basis
    bit: int


def intercept_resend(state: QubitState, omega: float, rng: RandomStream):
    """Attack one pulse; returns ``(forwarded_state, entry or None)``.

    Three uniforms are drawn every call (attack, basis, outcome) so the draw
    count does not depend on ``omega``.
    """
    u_attack, u_basis = rng.uniform(2)
    outcome_rng = rng.child("outcome")
    if u_attack >= omega:
        return state, None
    basis = Basis(int(u_basis < 0.5))
    bit = measure(state, basis, outcome_rng)
    return prepare_state(bit, basis), MeasuredEntry(basis, bit)


def intercept_resend_many(state_idx, photons, omega, u):
    """Vectorized intercept-resend on state indices.

    ``u`` has shape ``(n, 3)``. Vacuum pulses are never attacked. Returns
    ``(attacked_mask, eve_state_idx)``; forwarded states are Eve's.
    """
    attacked = (u[:, 0] < omega) & (np.asarray(photons) > 0)
    eve_basis = (u[:, 1] < 0.5).astype(np.int64)
    p0 = _born_table()[state_idx, eve_basis]
    eve_bit = (u[:, 2] >= p0).astype(np.int64)
    return attacked, 2 * eve_basis + eve_bit


def _born_table():
    # [state, basis] -> probability of outcome 0
    return np.array([[born_probabilities(s, Basis(b))[0] for b in (0, 1)] for s in STATES])


# -- photon-number splitting ---------------------------------------------------

@dataclass(frozen=True)
class PNSPolicy:
    """Per-pulse action probabilities for a PNS attack.

    ``split_multi`` and ``pass_multi`` apply to pulses with two or more
    photons (the remainder is blocked); ``pass_single`` to one-photon pulses.
    """

    split_multi: float
    pass_multi: float
    pass_single: float
    honest_yield: float
    attack_yield: float

    @property
    def full(self) -> bool:
        return self.pass_single == 0.0 and self.pass_multi == 0.0


def honest_yield(pmf, transmittance, efficiency) -> float:
    """Probability that a pulse yields at least one detected signal photon."""
    n = np.arange(len(pmf))
    return float(np.sum(pmf * (1 - (1 - transmittance * efficiency) ** n)))


def pns_policy(pmf, transmittance, efficiency, policy="rate_matched") -> PNSPolicy:
    """Fractions that keep Bob's expected signal detection rate unchanged.

    Priority: split multi-photon pulses first; if that alone overshoots the
    honest rate, block some of them. If it falls short, pass single-photon
    pulses untouched over the lossless line, and as a last resort forward
    whole multi-photon pulses without keeping a photon.
    """
    pmf = np.asarray(pmf, dtype=float)
    n = np.arange(len(pmf))
    target = honest_yield(pmf, transmittance, efficiency)
    multi = n >= 2
    split_yield = float(np.sum(pmf[multi] * (1 - (1 - efficiency) ** (n[multi] - 1))))
    pass_multi_gain = float(np.sum(pmf[multi] * ((1 - efficiency) ** (n[multi] - 1)
                                                  - (1 - efficiency) ** n[multi])))
    single_yield = float(pmf[1] * efficiency) if len(pmf) > 1 else 0.0

    if policy == "block_all":
        return PNSPolicy(1.0, 0.0, 0.0, target, split_yield)

    if split_yield >= target:
        f = target / split_yield if split_yield > 0 else 0.0
        return PNSPolicy(f, 0.0, 0.0, target, target)
    deficit = target - split_yield
    f_single = min(1.0, deficit / single_yield) if single_yield > 0 else 0.0
    deficit -= f_single * single_yield
    g = min(1.0, deficit / pass_multi_gain) if pass_multi_gain > 0 and deficit > 0 else 0.0
    achieved = split_yield + f_single * single_yield + g * pass_multi_gain
    return PNSPolicy(1.0 - g, g, f_single, target, achieved)


def pns_actions(photons, policy: PNSPolicy, u):
    """Vectorized PNS decision, one uniform per pulse."""
    photons = np.asarray(photons)
    act = np.full(photons.shape, NONE, dtype=np.int8)
    single = photons == 1
    act[single] = np.where(u[single] < policy.pass_single, PASS, BLOCK)
    multi = photons >= 2
    um = u[multi]
    act[multi] = np.where(um < policy.split_multi, SPLIT,
                          np.where(um < policy.split_multi + policy.pass_multi, PASS, BLOCK))
    return act


def pns_attack(photon_number: int, policy: PNSPolicy, rng: RandomStream) -> str:
    """Action for one pulse: ``"block"``, ``"split"``, ``"pass"`` or ``"none"`` (vacuum)."""
    code = pns_actions(np.array([photon_number]), policy, rng.uniform(1))[0]
    return ACTION_TAGS[code]


def photons_forwarded(photons, action):
    """Photons Eve sends down her lossless line (split keeps one)."""
    photons = np.asarray(photons)
    return np.where(action == SPLIT, photons - 1, np.where(action == PASS, photons, 0))


# -- measurement after the public announcement --------------------------------

STORED, MEASURED = 0, 1


@dataclass
class EveKnowledge:
    """Per-pulse quantum or classical side information, for attacked pulses only.

    ``kind`` is ``STORED`` (a photon in memory, ``state`` is Alice's state
    index) or ``MEASURED`` (``state`` is the eigenstate Eve observed).
    """

    pulse_id: np.ndarray
    kind: np.ndarray
    state: np.ndarray

    def __len__(self):
        return len(self.pulse_id)


@dataclass
class EveBitKnowledge:
    pulse_id: np.ndarray
    guess: np.ndarray        # Eve's best guess of the key bit
    conclusive: np.ndarray   # bit known with certainty
    p_conclusive: np.ndarray  # probability of certainty before Eve's final measurement


def usd_probabilities(psi: QubitState, a: QubitState, b: QubitState):
    """Optimal unambiguous discrimination of ``a`` vs ``b`` (equal priors).

    Returns ``(P(conclude a), P(conclude b), P(inconclusive))`` for input
    ``psi``. The POVM elements are projectors onto the states orthogonal to
    ``b`` and to ``a``, scaled by ``1 / (1 + |<a|b>|)``.
    """
    gamma = a.overlap(b)
    if gamma >= 1 - 1e-12:
        raise ValueError("cannot discriminate identical states")
    pa = b.orthogonal().overlap(psi) ** 2 / (1 + gamma)
    pb = a.orthogonal().overlap(psi) ** 2 / (1 + gamma)
    return pa, pb, 1 - pa - pb


def _usd_table():
    # [stored, a, b] -> (P(a), P(b)); only non-orthogonal (a, b) used
    t = np.zeros((4, 4, 4, 2))
    for s in range(4):
        for a in range(4):
            for b in range(4):
                if a // 2 != b // 2:
                    pa, pb, _ = usd_probabilities(STATES[s], STATES[a], STATES[b])
                    t[s, a, b] = pa, pb
    return t


_USD = _usd_table()


def eve_measure_after_reveal(knowledge: EveKnowledge, revealed, protocol, rng: RandomStream) -> EveBitKnowledge:
    """Turn Eve's holdings into bit guesses once the sifting information is public.

    ``revealed`` maps to the entries of ``knowledge``: for BB84 an array of
    Alice's bases; for SARG an ``(n, 2)`` array of announced state-index
    pairs. Key bit conventions follow :mod:`qkdsim.protocols`: the BB84 bit is
    the state sign, the SARG bit is the state basis.
    """
    protocol = ProtocolKind(protocol)
    kind = np.asarray(knowledge.kind)
    state = np.asarray(knowledge.state)
    n = len(state)
    u = rng.uniform(n)
    guess = np.zeros(n, np.int8)
    conclusive = np.zeros(n, bool)
    p_conc = np.zeros(n)
    stored = kind == STORED
    measured = ~stored

    if protocol is ProtocolKind.BB84:
        basis = np.asarray(revealed)
        born0 = _born_table()[state, basis]
        # Stored photon measured in the revealed basis.
        out = (u >= born0).astype(np.int8)
        certain = (born0 > 1 - 1e-12) | (born0 < 1e-12)
        guess[stored] = out[stored]
        conclusive[stored] = certain[stored]
        p_conc[stored] = certain[stored]
        # Classical result from intercept-resend: certain iff the bases agreed.
        same = (state // 2) == basis
        guess[measured] = (state % 2)[measured]
        conclusive[measured] = same[measured]
        p_conc[measured] = same[measured].astype(float)
        return EveBitKnowledge(np.asarray(knowledge.pulse_id), guess, conclusive, p_conc)

    pairs = np.asarray(revealed).reshape(n, 2)
    a, b = pairs[:, 0], pairs[:, 1]
    if np.any(a // 2 == b // 2):
        raise ValueError("SARG announcements must pair non-orthogonal states")
    probs = _USD[state, a, b]
    pa, pb = probs[:, 0], probs[:, 1]
    concl_a = u < pa
    concl_b = (u >= pa) & (u < pa + pb)
    s_guess = np.where(concl_b, b, a)
    guess[stored] = (s_guess // 2)[stored]
    conclusive[stored] = (concl_a | concl_b)[stored]
    p_conc[stored] = (pa + pb)[stored]

    # Measured eigenstate: orthogonal to one announced state => the other.
    orth_a = OVERLAP[state, a] < 1e-12
    orth_b = OVERLAP[state, b] < 1e-12
    m_guess = np.where(orth_a, b, np.where(orth_b, a, state))
    guess[measured] = (m_guess // 2)[measured]
    conclusive[measured] = (orth_a | orth_b)[measured]
    p_conc[measured] = conclusive[measured].astype(float)
    return EveBitKnowledge(np.asarray(knowledge.pulse_id), guess, conclusive, p_conc)


# -- analytic curves -----------------------------------------------------------

@dataclass(frozen=True)
class InfoCurvePoint:
    D: float
    i_ab: float
    i_ae: float


def _check_disturbance(d):
    if not 0.0 <= d <= 0.5:
        raise ValueError(f"disturbance must lie in [0, 1/2], got {d!r}")


def eve_information_individual(d: float) -> float:
    """Eve's information under the optimal individual attack on BB84."""
    _check_disturbance(d)
    return 1.0 - binary_entropy(min(1.0, 0.5 + math.sqrt(d * (1 - d))))


def individual_attack_curves(d: float) -> InfoCurvePoint:
    _check_disturbance(d)
    return InfoCurvePoint(d, 1.0 - binary_entropy(d), eve_information_individual(d))


def shor_preskill_rate(d: float) -> float:
    """Asymptotic one-way rate ``1 - 2 h(D)`` (may be negative)."""
    _check_disturbance(d)
    return 1.0 - 2.0 * binary_entropy(d)


def individual_attack_threshold(xtol=1e-12) -> float:
    """QBER where Bob's and Eve's information are equal (about 14.6%)."""
    def gap(d):
        p = individual_attack_curves(d)
        return p.i_ab - p.i_ae
    return brentq(gap, 1e-9, 0.5 - 1e-9, xtol=xtol)


def shor_preskill_threshold(xtol=1e-12) -> float:
    """Zero of ``1 - 2 h(D)`` (about 11.0%)."""
    return brentq(shor_preskill_rate, 1e-9, 0.25, xtol=xtol)
