"""BB84 and SARG sessions: preparation, transmission, detection, sifting.

A session is simulated pulse-by-pulse but evaluated stage-by-stage over numpy
arrays. Each stage draws from its own child of the session stream:

========== ==================================================
alice      bit and basis, two bits per pulse
announce   SARG partner sign, one bit per pulse
source     non-vacuum positions, then one uniform per lit pulse
eve        attack decisions, keyed by pulse index
channel    fiber survival, keyed by pulse index
bob        measurement basis, one bit per pulse
detector   dark-count positions per detector;
           routing and signal clicks keyed by pulse index
trojan     probe-pulse injection, one uniform per pulse
sample     choice of disclosed bits for the error estimate
reveal     Eve's measurements after the public discussion
========== ==================================================

No stage's draws depend on what an earlier stage produced. Keyed stages use
:meth:`RandomStream.uniform_at`, so pulse ``i`` always sees the same draw
whether or not its neighbours needed one. Sessions that differ only in the
protocol or in Eve therefore share their source, channel and detector
randomness, and vacuum pulses cost nothing past the source.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import adversary as adv
from .adversary import EveKnowledge, EveStrategy, ProtocolKind
from .config import SessionConfig, validate
from .devices import (
    binomial_from_uniform,
    coincidence_check,
    sample_photon_number,
    transmittance,
    watchdog_check,
)
from .optics import plug_and_play_click_prob
from .random_stream import RandomStream
from .rates import leakage_threshold, secret_rate

UNSET, DISCARDED, KEPT, INCONCLUSIVE = -1, 0, 1, 2
SIFT_TAGS = {UNSET: "unset", DISCARDED: "discarded", KEPT: "kept", INCONCLUSIVE: "inconclusive"}
BASIS_NAMES = ("X", "Y")
STATE_NAMES = ("+x", "-x", "+y", "-y")


@dataclass(frozen=True)
class PulseRecord:
    pulse_id: int
    alice_bit: int
    alice_basis: str
    photon_number: int
    eve_action: dict
    bob_basis: str
    bob_clicks: tuple
    sift_status: str
    disclosed: bool
    announced: tuple | None = None
    pulse_energy: float | None = None

    def to_json(self) -> str:
        d = {
            "id": self.pulse_id,
            "a_bit": self.alice_bit,
            "a_basis": self.alice_basis,
            "n": self.photon_number,
            "eve": self.eve_action,
            "b_basis": self.bob_basis,
            "clicks": list(self.bob_clicks),
            "sift": self.sift_status,
            "disclosed": self.disclosed,
        }
        if self.announced is not None:
            d["announced"] = list(self.announced)
        if self.pulse_energy is not None:
            d["energy"] = self.pulse_energy
        return json.dumps(d, separators=(",", ":"))


@dataclass
class PulseLog:
    """Column store of a session's per-pulse trace."""

    protocol: ProtocolKind
    alice_bit: np.ndarray
    alice_basis: np.ndarray
    photon_number: np.ndarray
    bob_basis: np.ndarray
    clicks: np.ndarray                  # (n, 2) bool
    eve_action: np.ndarray
    eve_state: np.ndarray               # Eve's resent state for intercepts, else -1
    partner: np.ndarray | None = None   # SARG announced partner state index
    pulse_energy: np.ndarray | None = None
    sift_status: np.ndarray = None
    disclosed: np.ndarray = None

    def __post_init__(self):
        n = len(self.alice_bit)
        if self.sift_status is None:
            self.sift_status = np.full(n, UNSET, np.int8)
        if self.disclosed is None:
            self.disclosed = np.zeros(n, bool)

    def __len__(self):
        return len(self.alice_bit)

    @property
    def alice_state(self) -> np.ndarray:
        return adv.state_index(self.alice_bit, self.alice_basis)

    def announcements(self) -> np.ndarray:
        """Unordered announced SARG pairs as sorted ``(n, 2)`` state indices."""
        pair = np.stack([self.alice_state, self.partner], axis=1)
        return np.sort(pair, axis=1)

    def set_sift_status(self, status):
        if np.any(self.sift_status != UNSET) and not np.array_equal(self.sift_status, status):
            raise RuntimeError("sift status already set to different values")
        self.sift_status = np.asarray(status, np.int8)

    def record(self, i: int, _pairs=None) -> PulseRecord:
        action = int(self.eve_action[i])
        eve = {"tag": adv.ACTION_TAGS[action]}
        if action == adv.INTERCEPT:
            s = int(self.eve_state[i])
            eve.update(basis=BASIS_NAMES[s // 2], outcome=s % 2)
        elif action == adv.SPLIT:
            eve["kept"] = 1
        announced = None
        if self.protocol is ProtocolKind.SARG:
            pairs = self.announcements() if _pairs is None else _pairs
            announced = tuple(STATE_NAMES[s] for s in pairs[i])
        return PulseRecord(
            pulse_id=i,
            alice_bit=int(self.alice_bit[i]),
            alice_basis=BASIS_NAMES[self.alice_basis[i]],
            photon_number=int(self.photon_number[i]),
            eve_action=eve,
            bob_basis=BASIS_NAMES[self.bob_basis[i]],
            bob_clicks=(bool(self.clicks[i, 0]), bool(self.clicks[i, 1])),
            sift_status=SIFT_TAGS[int(self.sift_status[i])],
            disclosed=bool(self.disclosed[i]),
            announced=announced,
            pulse_energy=None if self.pulse_energy is None else float(self.pulse_energy[i]),
        )

    def records(self):
        pairs = self.announcements() if self.protocol is ProtocolKind.SARG else None
        for i in range(len(self)):
            yield self.record(i, pairs)

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records():
                fh.write(rec.to_json())
                fh.write("\n")


def read_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


# -- sifting -----------------------------------------------------------------

@dataclass(frozen=True)
class SiftedBit:
    pulse_id: int
    alice_value: int
    bob_value: int


@dataclass
class SiftedKey:
    pulse_id: np.ndarray
    alice: np.ndarray
    bob: np.ndarray

    def __len__(self):
        return len(self.pulse_id)

    def __iter__(self):
        for p, a, b in zip(self.pulse_id, self.alice, self.bob):
            yield SiftedBit(int(p), int(a), int(b))

    def subset(self, mask) -> "SiftedKey":
        return SiftedKey(self.pulse_id[mask], self.alice[mask], self.bob[mask])

    def errors(self) -> int:
        return int(np.count_nonzero(self.alice != self.bob))


def _single_click_outcome(clicks):
    clicks = np.asarray(clicks, bool)
    single = clicks[:, 0] ^ clicks[:, 1]
    return single, clicks[:, 1].astype(np.int8)


def sift_bb84(log: PulseLog) -> SiftedKey:
    """Keep single-click pulses measured in Alice's basis."""
    single, outcome = _single_click_outcome(log.clicks)
    kept = single & (log.alice_basis == log.bob_basis)
    log.set_sift_status(np.where(kept, KEPT, DISCARDED))
    idx = np.flatnonzero(kept)
    return SiftedKey(idx, log.alice_bit[idx].astype(np.int8), outcome[idx])


def sarg_conclusion(prepared, pair_other, bob_basis, outcome):
    """Bob's SARG inference for each pulse.

    Returns ``(conclusive, concluded_state)``. Bob's eigenstate rules out the
    announced state it is orthogonal to, leaving the other one.
    """
    bob_state = 2 * np.asarray(bob_basis) + np.asarray(outcome)
    orth_prepared = adv.OVERLAP[bob_state, prepared] < 1e-12
    orth_other = adv.OVERLAP[bob_state, pair_other] < 1e-12
    concluded = np.where(orth_other, prepared, pair_other)
    return orth_prepared | orth_other, concluded


def sift_sarg(log: PulseLog, announcements=None) -> SiftedKey:
    """SARG sifting: the key bit is the basis of the state Bob infers.

    ``announcements`` is an ``(n, 2)`` array of announced state indices that
    must contain Alice's state and one non-orthogonal partner; it defaults to
    the partners recorded in ``log``.
    """
    prepared = log.alice_state
    pairs = log.announcements() if announcements is None else np.asarray(announcements)
    a, b = pairs[:, 0], pairs[:, 1]
    if np.any(a // 2 == b // 2):
        raise ValueError("announced pairs must hold two non-orthogonal states")
    if np.any((a != prepared) & (b != prepared)):
        raise ValueError("announced pair does not contain the prepared state")
    other = np.where(a == prepared, b, a)
    single, outcome = _single_click_outcome(log.clicks)
    conclusive, concluded = sarg_conclusion(prepared, other, log.bob_basis, outcome)
    kept = single & conclusive
    status = np.where(kept, KEPT, np.where(single, INCONCLUSIVE, DISCARDED))
    log.set_sift_status(status)
    idx = np.flatnonzero(kept)
    return SiftedKey(idx, log.alice_basis[idx].astype(np.int8), (concluded[idx] // 2).astype(np.int8))


def sift(log: PulseLog) -> SiftedKey:
    return sift_bb84(log) if log.protocol is ProtocolKind.BB84 else sift_sarg(log)


# -- parameter estimation ------------------------------------------------------

@dataclass
class QberEstimate:
    qber: float
    error: float
    remaining: SiftedKey
    disclosed: np.ndarray  # pulse ids


def estimate_qber(sifted: SiftedKey, sample_fraction: float, rng: RandomStream,
                  log: PulseLog | None = None) -> QberEstimate:
    """Disclose a uniform sample of ``ceil(fraction * n)`` bits and compare them."""
    if not 0 < sample_fraction < 1:
        raise ValueError("sample_fraction must lie in (0, 1)")
    n = len(sifted)
    if n == 0:
        raise ValueError("cannot estimate the error rate of an empty sifted key")
    k = min(n, math.ceil(sample_fraction * n))
    pick = np.zeros(n, bool)
    pick[rng.choice_indices(n, k)] = True
    sample = sifted.subset(pick)
    q = sample.errors() / k
    err = math.sqrt(q * (1 - q) / k)
    if log is not None:
        log.disclosed[sample.pulse_id] = True
    return QberEstimate(q, err, sifted.subset(~pick), sample.pulse_id)


# -- results -----------------------------------------------------------------

@dataclass(frozen=True)
class EveAccounting:
    strategy: str
    attacked: int = 0            # pulses Eve measured or stored a photon from
    sifted_with_entry: int = 0
    info_per_sifted_bit: float = 0.0   # expected bits known with certainty
    certain_fraction: float = 0.0      # realized
    guess_accuracy: float = float("nan")  # on sifted bits Eve acted on
    pns_policy: adv.PNSPolicy | None = None


@dataclass(frozen=True)
class SessionResult:
    protocol: str
    pulses_sent: int
    bob_detections: int
    double_clicks: int
    sifted_length: int
    inconclusive: int
    disclosed: int
    final_key_length: int
    qber_estimate: float
    qber_error: float
    qber_true: float
    alarms: tuple
    eve: EveAccounting
    i_ab: float
    i_ae: float
    secret_fraction: float
    secret_rate: float
    log: PulseLog = field(repr=False, compare=False, default=None)
    key: SiftedKey = field(repr=False, compare=False, default=None)

    @property
    def detection_rate(self) -> float:
        return self.bob_detections / self.pulses_sent

    @property
    def sifted_rate(self) -> float:
        return self.sifted_length / self.pulses_sent

    def summary(self) -> str:
        lines = [
            f"protocol            {self.protocol}",
            f"pulses sent         {self.pulses_sent}",
            f"bob detections      {self.bob_detections} ({self.detection_rate:.6g} per pulse)",
            f"double clicks       {self.double_clicks}",
            f"sifted bits         {self.sifted_length} (fraction {self.sifted_rate:.6g})",
        ]
        if self.protocol == ProtocolKind.SARG.value:
            lines.append(f"inconclusive        {self.inconclusive}")
        lines += [
            f"disclosed bits      {self.disclosed}",
            f"final key bits      {self.final_key_length}",
            f"QBER                {self.qber_estimate:.6g} +/- {self.qber_error:.3g}",
            f"eve strategy        {self.eve.strategy}",
            f"eve info/sifted bit {self.eve.info_per_sifted_bit:.6g}",
            f"I(A;B) net of EC    {self.i_ab:.6g}",
            f"I(A;E) charged      {self.i_ae:.6g}",
            f"secret rate         {self.secret_rate:.6g} bits/pulse",
            f"alarms              {', '.join(self.alarms) if self.alarms else 'none'}",
        ]
        return "\n".join(lines)


# -- the session pipeline --------------------------------------------------------

def _route_to_detector0(photons, p0, u):
    """Photons sent to detector 0, each independently with probability ``p0``."""
    p0 = np.asarray(p0, float)
    k0 = np.where(p0 >= 1.0, photons, 0)
    mid = (p0 > 0.0) & (p0 < 1.0) & (photons > 0)
    if np.any(mid):
        k0[mid] = np.maximum(stats.binom.ppf(u[mid], photons[mid], p0[mid]), 0).astype(np.int64)
    return k0


def _state_phase(state_idx):
    return (state_idx // 2) * (math.pi / 2) + (state_idx % 2) * math.pi


def run_session(config: SessionConfig, eve: EveStrategy | None = None,
                rng: RandomStream | None = None) -> SessionResult:
    """Simulate one QKD session end to end.

    ``eve`` and ``rng`` default to the strategy and seed in ``config``.
    """
    validate(config)
    eve = config.eve_strategy() if eve is None else eve
    rng = RandomStream(config.session.seed) if rng is None else rng
    protocol = config.protocol_kind
    n = config.session.pulses
    src = config.source_model()
    det0, det1 = config.detectors()
    t = transmittance(config.channel_model())
    v = config.optics.visibility

    ab = rng.child("alice").bits((n, 2))
    alice_bit, alice_basis = ab[:, 0], ab[:, 1]
    partner = None
    if protocol is ProtocolKind.SARG:
        partner_sign = rng.child("announce").bits(n)
        partner = (2 * (1 - alice_basis) + partner_sign).astype(np.int8)
    photons = sample_photon_number(src, rng.child("source"), n)
    alice_state = adv.state_index(alice_bit, alice_basis)
    lit = np.flatnonzero(photons)  # only these pulses can be attacked or detected

    # Eve at Alice's exit.
    action = np.full(n, adv.NONE, np.int8)
    eve_state = np.full(n, -1, np.int8)
    sent_state = alice_state
    into_fiber = photons
    lossless = None
    policy = None
    eve_rng = rng.child("eve")
    if eve.tag == "intercept_resend":
        u = np.stack([eve_rng.child(lane).uniform_at(lit) for lane in ("attack", "basis", "outcome")], 1)
        took, e_state = adv.intercept_resend_many(alice_state[lit], photons[lit], eve.omega, u)
        action[lit[took]] = adv.INTERCEPT
        eve_state[lit[took]] = e_state[took]
        sent_state = alice_state.copy()
        sent_state[lit[took]] = e_state[took]
    elif eve.tag == "pns":
        policy = adv.pns_policy(src.pmf(), t, det0.efficiency, eve.pns_policy)
        action[lit] = adv.pns_actions(photons[lit], policy, eve_rng.uniform_at(lit))
        lossless = adv.photons_forwarded(photons, action)
        into_fiber = np.where(action == adv.NONE, photons, 0)

    sent = lit if eve.tag != "pns" else np.flatnonzero(into_fiber)
    survived = binomial_from_uniform(rng.child("channel").uniform_at(sent), into_fiber[sent], t)
    if lossless is None:
        hit, k_hit = sent[survived > 0], survived[survived > 0]
    else:
        arriving = lossless.copy()
        arriving[sent] += survived
        hit = np.flatnonzero(arriving)
        k_hit = arriving[hit]

    bob_basis = rng.child("bob").bits(n)
    det_rng = rng.child("detector")
    p0, _ = plug_and_play_click_prob(bob_basis[hit] * (math.pi / 2), _state_phase(sent_state[hit]), v)
    k0 = _route_to_detector0(k_hit, p0, det_rng.child("route").uniform_at(hit))
    clicks = np.zeros((n, 2), bool)
    for j, (det, k) in enumerate(((det0, k0), (det1, k_hit - k0))):
        clicks[det_rng.child(f"dark{j}").bernoulli_positions(n, det.dark_prob), j] = True
        signal = det_rng.child(f"signal{j}").uniform_at(hit) < 1.0 - (1.0 - det.efficiency) ** k
        clicks[hit, j] |= signal

    energy = None
    if config.trojan.fraction > 0:
        probe = rng.child("trojan").uniform(n) < config.trojan.fraction
        energy = np.where(probe, config.trojan.energy_factor, 1.0) * config.monitor.nominal_energy

    log = PulseLog(protocol, alice_bit, alice_basis, photons, bob_basis, clicks,
                   action, eve_state, partner, energy)

    sifted = sift(log)
    alarms = []
    if energy is not None and np.any(watchdog_check(energy, config.watchdog())):
        alarms.append("watchdog")
    if coincidence_check(clicks, config.coincidence_monitor()).verdict == "alarm":
        alarms.append("coincidence")

    if len(sifted):
        est = estimate_qber(sifted, config.session.sample_fraction, rng.child("sample"), log)
        qber, qber_err, remaining = est.qber, est.error, est.remaining
        qber_true = sifted.errors() / len(sifted)
    else:
        qber, qber_err, remaining, qber_true = 0.5, 0.5, sifted, 0.5
        alarms.append("empty_key")

    threshold = config.analysis.qber_threshold
    if threshold <= 0:
        threshold = leakage_threshold(config.analysis.leakage)
    if len(sifted) and qber > threshold:
        alarms.append("qber")

    eve_acct = _account_eve(log, sifted, eve, policy, rng.child("reveal"))
    rates = secret_rate(len(sifted) / n, qber, eve_acct.info_per_sifted_bit,
                        config.analysis.ec_efficiency, config.analysis.leakage)

    any_click = clicks[:, 0] | clicks[:, 1]
    return SessionResult(
        protocol=protocol.value,
        pulses_sent=n,
        bob_detections=int(np.count_nonzero(any_click)),
        double_clicks=int(np.count_nonzero(clicks[:, 0] & clicks[:, 1])),
        sifted_length=len(sifted),
        inconclusive=int(np.count_nonzero(log.sift_status == INCONCLUSIVE)),
        disclosed=int(np.count_nonzero(log.disclosed)),
        final_key_length=len(remaining),
        qber_estimate=qber,
        qber_error=qber_err,
        qber_true=qber_true,
        alarms=tuple(alarms),
        eve=eve_acct,
        i_ab=rates.i_ab,
        i_ae=rates.i_ae,
        secret_fraction=rates.secret_fraction,
        secret_rate=rates.secret_rate,
        log=log,
        key=remaining,
    )


def eve_knowledge(log: PulseLog) -> EveKnowledge:
    """Eve's holdings: stored photons from splits, classical results from intercepts."""
    split = np.flatnonzero(log.eve_action == adv.SPLIT)
    meas = np.flatnonzero(log.eve_action == adv.INTERCEPT)
    ids = np.concatenate([split, meas])
    kind = np.concatenate([np.full(len(split), adv.STORED), np.full(len(meas), adv.MEASURED)])
    state = np.concatenate([log.alice_state[split], log.eve_state[meas]]).astype(np.int64)
    order = np.argsort(ids, kind="stable")
    return EveKnowledge(ids[order], kind[order], state[order])


def _account_eve(log, sifted, eve, policy, rng) -> EveAccounting:
    know = eve_knowledge(log)
    if eve.tag == "none" or len(know) == 0:
        return EveAccounting(eve.tag, pns_policy=policy)
    if log.protocol is ProtocolKind.BB84:
        revealed = log.alice_basis[know.pulse_id]
    else:
        revealed = log.announcements()[know.pulse_id]
    bits = adv.eve_measure_after_reveal(know, revealed, log.protocol, rng)
    n_sift = len(sifted)
    on_key = np.isin(bits.pulse_id, sifted.pulse_id)
    if n_sift == 0 or not np.any(on_key):
        return EveAccounting(eve.tag, attacked=len(know), pns_policy=policy)
    pos = np.searchsorted(sifted.pulse_id, bits.pulse_id[on_key])
    alice_key = sifted.alice[pos]
    return EveAccounting(
        strategy=eve.tag,
        attacked=len(know),
        sifted_with_entry=int(np.count_nonzero(on_key)),
        info_per_sifted_bit=float(bits.p_conclusive[on_key].sum() / n_sift),
        certain_fraction=float(bits.conclusive[on_key].sum() / n_sift),
        guess_accuracy=float(np.mean(bits.guess[on_key] == alice_key)),
        pns_policy=policy,
    )
