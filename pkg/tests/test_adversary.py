import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkdsim import adversary as adv
from qkdsim.adversary import (
    EveKnowledge,
    EveStrategy,
    PNSPolicy,
    eve_measure_after_reveal,
    honest_yield,
    individual_attack_curves,
    individual_attack_threshold,
    intercept_resend,
    intercept_resend_many,
    pns_actions,
    pns_attack,
    pns_policy,
    shor_preskill_rate,
    shor_preskill_threshold,
    usd_probabilities,
)
from qkdsim.devices import WeakCoherentSource, transmittance, FiberChannel
from qkdsim.quantum import Basis, prepare_state
from qkdsim.random_stream import RandomStream

S = 1 / math.sqrt(2)
# hand-written state vectors, indexed 0=+x 1=-x 2=+y 3=-y
VEC = [np.array([S, S]), np.array([S, -S]), np.array([S, 1j * S]), np.array([S, -1j * S])]


def prob(outcome_idx, state_vec):
    return abs(np.vdot(VEC[outcome_idx], state_vec)) ** 2


def enumerate_intercept_resend():
    """Exact QBER and Eve guess accuracy of full intercept-resend on sifted BB84 bits."""
    err = agree = total = 0.0
    for a_basis, a_bit, e_basis in itertools.product((0, 1), repeat=3):
        w = 1 / 8
        for e_bit in (0, 1):
            pe = prob(2 * e_basis + e_bit, VEC[2 * a_basis + a_bit])
            for b_bit in (0, 1):  # Bob measures in Alice's basis (sifted)
                pb = prob(2 * a_basis + b_bit, VEC[2 * e_basis + e_bit])
                total += w * pe * pb
                err += w * pe * pb * (b_bit != a_bit)
                agree += w * pe * pb * (e_bit == a_bit)
    return err / total, agree / total


def bisect(f, lo, hi, tol=1e-12):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def h(p):
    return 0.0 if p <= 0 or p >= 1 else -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


class TestStrategy:
    def test_constructors(self):
        assert EveStrategy.none().tag == "none"
        assert EveStrategy.intercept_resend(0.3).omega == 0.3
        assert EveStrategy.pns("block_all").pns_policy == "block_all"

    @pytest.mark.parametrize("kw", [{"tag": "clone"}, {"omega": 1.5}, {"pns_policy": "x"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            EveStrategy(**kw)


class TestInterceptResend:
    def test_enumeration_oracle(self):
        q, g = enumerate_intercept_resend()
        assert q == pytest.approx(0.25, abs=1e-12)
        assert g == pytest.approx(0.75, abs=1e-12)

    def test_omega_zero_passes_untouched(self):
        psi = prepare_state(1, Basis.Y)
        rng = RandomStream(0)
        for _ in range(100):
            out, entry = intercept_resend(psi, 0.0, rng)
            assert out is psi and entry is None

    def test_omega_one_forwards_eigenstate(self):
        psi = prepare_state(0, Basis.X)
        rng = RandomStream(1)
        for _ in range(200):
            out, entry = intercept_resend(psi, 1.0, rng)
            assert out == prepare_state(entry.bit, entry.basis)
            if entry.basis is Basis.X:
                assert entry.bit == 0

    def test_vectorized_vacuum_never_attacked(self):
        u = RandomStream(2).uniform((1000, 3))
        attacked, _ = intercept_resend_many(np.zeros(1000, int), np.zeros(1000, int), 1.0, u)
        assert not attacked.any()

    def test_vectorized_statistics(self):
        n = 400_000
        rng = RandomStream(3)
        state = rng.integers(4, size=n)
        attacked, eve = intercept_resend_many(state, np.ones(n, int), 1.0, rng.uniform((n, 3)))
        same_basis = eve // 2 == state // 2
        assert np.all(eve[same_basis] == state[same_basis])
        assert np.mean(eve[~same_basis] % 2) == pytest.approx(0.5, abs=0.005)
        assert attacked.all()


class TestPNS:
    def test_policy_at_100km_is_rate_matched(self):
        pmf = WeakCoherentSource(0.1).pmf()
        t = transmittance(FiberChannel(0.25, 100))
        pol = pns_policy(pmf, t, 1.0)
        assert 0 < pol.split_multi < 1 and pol.pass_single == 0
        assert pol.attack_yield == pytest.approx(pol.honest_yield, rel=1e-12)
        # honest yield below the multi-photon probability: full PNS feasible
        assert pol.honest_yield < 1 - math.exp(-0.1) * 1.1

    def test_policy_short_distance_passes_singles(self):
        pmf = WeakCoherentSource(0.1).pmf()
        pol = pns_policy(pmf, 0.5, 1.0)
        assert pol.split_multi == 1.0 and pol.pass_single > 0
        assert pol.attack_yield == pytest.approx(pol.honest_yield, rel=1e-9)

    def test_honest_yield_formula(self):
        pmf = WeakCoherentSource(0.1).pmf()
        assert honest_yield(pmf, 0.01, 0.1) == pytest.approx(1 - math.exp(-0.1 * 0.001), rel=1e-9)

    def test_single_photon_blocked_when_full_pns(self):
        pol = PNSPolicy(1.0, 0.0, 0.0, 0.0, 0.0)
        assert pns_attack(1, pol, RandomStream(0)) == "block"

    def test_three_photons_split(self):
        pol = PNSPolicy(1.0, 0.0, 0.0, 0.0, 0.0)
        assert pns_attack(3, pol, RandomStream(0)) == "split"
        assert adv.photons_forwarded(np.array([3]), np.array([adv.SPLIT]))[0] == 2

    def test_vacuum_untouched(self):
        assert pns_attack(0, PNSPolicy(1.0, 0.0, 0.0, 0.0, 0.0), RandomStream(0)) == "none"

    def test_block_all(self):
        pol = pns_policy(WeakCoherentSource(0.1).pmf(), 0.001, 1.0, "block_all")
        act = pns_actions(np.array([0, 1, 2, 5]), pol, np.full(4, 0.3))
        assert list(act) == [adv.NONE, adv.BLOCK, adv.SPLIT, adv.SPLIT]

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.01, 1.0), st.floats(1e-4, 1.0), st.floats(0.05, 1.0))
    def test_policy_is_valid(self, mu, t, eta):
        pol = pns_policy(WeakCoherentSource(mu).pmf(), t, eta)
        for p in (pol.split_multi, pol.pass_multi, pol.pass_single):
            assert -1e-12 <= p <= 1 + 1e-12
        assert pol.split_multi + pol.pass_multi <= 1 + 1e-12
        assert pol.attack_yield <= pol.honest_yield * (1 + 1e-9) + 1e-15


class TestRevealMeasurement:
    def test_bb84_stored_copy_full_information(self):
        n = 1000
        rng = RandomStream(4)
        state = rng.integers(4, size=n)
        know = EveKnowledge(np.arange(n), np.full(n, adv.STORED), state)
        bits = eve_measure_after_reveal(know, state // 2, "bb84", rng)
        assert bits.conclusive.all()
        assert np.array_equal(bits.guess, state % 2)

    def test_usd_oracle(self):
        # explicit POVM: E_a ~ |b_perp><b_perp| / (1 + gamma)
        gamma = S
        for s, partner in [(0, 2), (0, 3), (3, 0), (2, 1)]:
            a_vec, b_vec = VEC[s], VEC[partner]
            b_perp = np.array([-np.conj(b_vec[1]), np.conj(b_vec[0])])
            pa = abs(np.vdot(b_perp, a_vec)) ** 2 / (1 + gamma)
            got = usd_probabilities(adv.STATES[s], adv.STATES[s], adv.STATES[partner])
            assert got[0] == pytest.approx(pa, abs=1e-12)
            assert got[1] == pytest.approx(0.0, abs=1e-12)
            assert got[0] == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-12)

    def test_usd_rejects_identical(self):
        with pytest.raises(ValueError):
            usd_probabilities(adv.STATES[0], adv.STATES[0], adv.STATES[0])

    def test_sarg_conclusive_fraction(self):
        n = 100_000
        rng = RandomStream(5)
        state = rng.integers(4, size=n)
        partner = 2 * (1 - state // 2) + rng.integers(2, size=n)
        pairs = np.sort(np.stack([state, partner], 1), 1)
        know = EveKnowledge(np.arange(n), np.full(n, adv.STORED), state)
        bits = eve_measure_after_reveal(know, pairs, "sarg", rng)
        p = 1 - 1 / math.sqrt(2)
        assert abs(bits.conclusive.mean() - 0.2929) <= 0.005
        assert abs(bits.conclusive.mean() - p) <= 3 * math.sqrt(p * (1 - p) / n)
        # unambiguous: every conclusive guess names Alice's basis
        c = bits.conclusive
        assert np.array_equal(bits.guess[c], (state // 2)[c])
        assert np.allclose(bits.p_conclusive, p)

    def test_sarg_rejects_orthogonal_pair(self):
        know = EveKnowledge(np.arange(1), np.full(1, adv.STORED), np.array([0]))
        with pytest.raises(ValueError):
            eve_measure_after_reveal(know, np.array([[0, 1]]), "sarg", RandomStream(0))

    def test_measured_entries(self):
        # Eve measured +x; Alice's pair {+x, +y}: +x is orthogonal to neither, -y cannot occur
        know = EveKnowledge(np.arange(2), np.full(2, adv.MEASURED), np.array([0, 1]))
        bits = eve_measure_after_reveal(know, np.array([[0, 2], [0, 2]]), "sarg", RandomStream(0))
        # -x is orthogonal to +x, so the state must be +y (basis 1)
        assert list(bits.conclusive) == [False, True]
        assert bits.guess[1] == 1


class TestInformationCurves:
    def test_endpoints(self):
        p = individual_attack_curves(0.0)
        assert (p.i_ab, p.i_ae) == (1.0, 0.0)

    def test_individual_crossing(self):
        def gap(d):
            return (1 - h(d)) - (1 - h(0.5 + math.sqrt(d * (1 - d))))
        root = bisect(gap, 1e-6, 0.4)
        assert root == pytest.approx(0.146447, abs=1e-5)
        assert individual_attack_threshold() == pytest.approx(root, abs=1e-9)

    def test_shor_preskill(self):
        root = bisect(lambda d: 1 - 2 * h(d), 1e-6, 0.3)
        assert root == pytest.approx(0.110028, abs=1e-5)
        assert shor_preskill_threshold() == pytest.approx(root, abs=1e-9)
        assert shor_preskill_rate(0.0) == 1.0

    @given(st.floats(0, 0.5), st.floats(0, 0.5))
    def test_monotone(self, a, b):
        lo, hi = sorted((a, b))
        p, q = individual_attack_curves(lo), individual_attack_curves(hi)
        assert q.i_ab <= p.i_ab + 1e-12
        assert q.i_ae >= p.i_ae - 1e-12
        for x in (p.i_ab, p.i_ae):
            assert 0.0 <= x <= 1.0

    def test_continuous(self):
        d = np.linspace(0, 0.5, 5001)
        vals = np.array([[c.i_ab, c.i_ae] for c in map(individual_attack_curves, d)])
        assert np.max(np.abs(np.diff(vals, axis=0))) < 0.02

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            individual_attack_curves(0.6)
