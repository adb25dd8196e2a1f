import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdsim.optics import (
    Interferometer,
    TimeBinAmplitudes,
    chsh_value,
    franson_coincidence,
    plug_and_play_click_prob,
    propagate,
    qber_from_visibility,
)

phases = st.floats(-2 * math.pi, 2 * math.pi)
visibilities = st.floats(0, 1)


def two_device_central_amplitude(p1, p2):
    """Oracle: short-long plus long-short path amplitudes into port 0, bin 1.

    Each 50/50 coupler transmits 1/sqrt2 straight and i/sqrt2 across. The
    first device's port-0 output is forwarded into the second's port 0.
    """
    t, r = 1 / math.sqrt(2), 1j / math.sqrt(2)
    short1 = t * t                                 # in 0 -> short arm -> out 0
    long1 = r * cmath.exp(1j * p1) * r             # in 0 -> long arm -> out 0
    short2 = t * t
    long2 = r * cmath.exp(1j * p2) * r
    return short1 * long2 + long1 * short2


class TestPropagate:
    def test_single_device_splits_evenly(self):
        out = propagate(TimeBinAmplitudes.pulse(), Interferometer(0.3))
        for port in (0, 1):
            for t in (0, 1):
                assert abs(out[(port, t)]) == pytest.approx(0.5, abs=1e-12)
        assert out.total_probability() == pytest.approx(1.0, abs=1e-12)

    @given(phases, phases)
    def test_cascade_of_full_outputs_is_unitary(self, p1, p2):
        out = propagate(propagate(TimeBinAmplitudes.pulse(), Interferometer(p1)), Interferometer(p2))
        assert out.total_probability() == pytest.approx(1.0, abs=1e-12)

    @given(phases, phases)
    def test_central_bin_matches_path_sum(self, p1, p2):
        first = propagate(TimeBinAmplitudes.pulse(), Interferometer(p1)).port(0)
        second = propagate(first, Interferometer(p2))
        want = abs(two_device_central_amplitude(p1, p2)) ** 2
        assert second.probability(0, 1) == pytest.approx(want, abs=1e-12)
        # as a fraction of the power entering the second device
        assert second.probability(0, 1) / first.total_probability() == pytest.approx(
            (1 + math.cos(p1 - p2)) / 4, abs=1e-12)

    @given(phases, phases, phases)
    def test_phase_leaves_lateral_bins_unchanged(self, p1, p2, p3):
        def bins(p):
            first = propagate(TimeBinAmplitudes.pulse(), Interferometer(p1)).port(0)
            return propagate(first, Interferometer(p))
        a, b = bins(p2), bins(p3)
        for port in (0, 1):
            for t in (0, 2):
                assert a.probability(port, t) == pytest.approx(b.probability(port, t), abs=1e-15)

    def test_longer_delay_moves_bins(self):
        out = propagate(TimeBinAmplitudes.pulse(), Interferometer(0.0, delay=3))
        assert {t for _, t in out} == {0, 3}

    @pytest.mark.parametrize("kw", [{"delay": 0}, {"input_coupling": 1.5}, {"output_coupling": -0.1}])
    def test_rejects_bad_device(self, kw):
        with pytest.raises(ValueError):
            Interferometer(**kw)

    def test_zero_coupling_keeps_short_arm(self):
        out = propagate(TimeBinAmplitudes.pulse(), Interferometer(0.0, input_coupling=0.0))
        assert out.probability(time_bin=1) == 0.0


class TestFranson:
    def test_perfect_correlation(self):
        d = franson_coincidence(0.0, 0.0, 1.0)
        assert d.same_detector("central") == pytest.approx(0.5)
        assert d.correlation("central") == pytest.approx(1.0)

    @given(phases)
    def test_sum_pi_anticorrelates(self, a):
        d = franson_coincidence(a, math.pi - a, 1.0)
        assert d.same_detector("central") == pytest.approx(0.0, abs=1e-12)

    def test_no_visibility_uniform(self):
        d = franson_coincidence(0.7, 0.1, 0.0)
        values = [d[("central", pair)] for pair in itertools.product((0, 1), repeat=2)]
        assert values == pytest.approx([1 / 8] * 4)

    @given(phases, phases, visibilities)
    def test_total_and_lateral_peaks(self, a, b, v):
        d = franson_coincidence(a, b, v)
        assert d.total() == pytest.approx(1.0)
        assert d.peak("early") == pytest.approx(0.25)
        assert d.peak("late") == pytest.approx(0.25)
        assert d.correlation("early") == pytest.approx(0.0)
        assert d.correlation("central") == pytest.approx(v * math.cos(a + b), abs=1e-12)

    def test_rejects_visibility(self):
        with pytest.raises(ValueError):
            franson_coincidence(0, 0, 1.2)


class TestPlugAndPlay:
    def test_constructive(self):
        assert plug_and_play_click_prob(0.0, 0.0, 1.0) == pytest.approx((1.0, 0.0))

    @given(visibilities)
    def test_quadrature_is_fair(self, v):
        p0, p1 = plug_and_play_click_prob(math.pi / 2, 0.0, v)
        assert (p0, p1) == pytest.approx((0.5, 0.5), abs=1e-12)

    def test_visibility_998(self):
        assert plug_and_play_click_prob(math.pi, 0.0, 0.998)[0] == pytest.approx(0.001, abs=1e-12)

    def test_arrays(self):
        p0, p1 = plug_and_play_click_prob(np.array([0.0, math.pi]), np.zeros(2), 1.0)
        assert np.allclose(p0, [1, 0]) and np.allclose(p0 + p1, 1)


class TestQberFromVisibility:
    @pytest.mark.parametrize("v,q", [(1.0, 0.0), (0.0, 0.5), (0.998, 0.001)])
    def test_values(self, v, q):
        assert qber_from_visibility(v) == pytest.approx(q, abs=1e-12)

    @given(visibilities)
    def test_equals_wrong_port_probability(self, v):
        assert qber_from_visibility(v) == pytest.approx(plug_and_play_click_prob(math.pi, 0, v)[0], abs=1e-12)


def brute_force_chsh(v, steps=24):
    """Max |S| over a grid of settings, E(a, b) = V cos(a + b)."""
    grid = np.linspace(-math.pi, math.pi, steps, endpoint=False)
    a0, a1, b0, b1 = np.meshgrid(grid, grid, grid, grid, indexing="ij", sparse=True)
    e = lambda a, b: v * np.cos(a + b)  # noqa: E731
    return float(np.max(np.abs(e(a0, b0) + e(a0, b1) + e(a1, b0) - e(a1, b1))))


class TestChsh:
    def test_ideal(self):
        assert chsh_value(1.0) == pytest.approx(2.828427, abs=1e-6)
        assert brute_force_chsh(1.0) == pytest.approx(2 * math.sqrt(2), abs=1e-9)

    def test_classical_bound(self):
        assert chsh_value(1 / math.sqrt(2)) == pytest.approx(2.0, abs=1e-12)

    def test_zero(self):
        assert chsh_value(0.0) == 0.0

    @given(visibilities)
    def test_default_settings_are_optimal(self, v):
        assert chsh_value(v) == pytest.approx(brute_force_chsh(v, 8), abs=1e-9)
