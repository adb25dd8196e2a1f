import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdsim.rates import (
    csiszar_korner_rate,
    eve_information,
    leakage_threshold,
    secret_rate,
)

info = st.floats(0, 1)


def h(p):
    return 0.0 if p <= 0 or p >= 1 else -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


class TestCsiszarKorner:
    def test_values(self):
        assert csiszar_korner_rate(1.0, 0.0, 0.0) == 1.0
        assert csiszar_korner_rate(0.5, 0.7, 0.2) == pytest.approx(0.3)
        assert csiszar_korner_rate(0.2, 0.5, 0.6) == 0.0

    @given(info, info, info, info)
    def test_monotone(self, iab, iae, ibe, bump):
        base = csiszar_korner_rate(iab, iae, ibe)
        assert csiszar_korner_rate(max(iab, bump), iae, ibe) >= base
        assert csiszar_korner_rate(iab, min(iae, bump), ibe) >= base

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            csiszar_korner_rate(1.2, 0, 0)


class TestSecretRate:
    def test_d10_chain(self):
        d = 0.10
        fig = secret_rate(1.0, d)
        assert fig.i_ab == pytest.approx(1 - h(d), abs=1e-9)
        assert fig.i_ab == pytest.approx(0.531, abs=1e-3)
        i_ae = 1 - h(0.5 + math.sqrt(d * (1 - d)))
        assert fig.i_ae == pytest.approx(i_ae, abs=1e-9)
        assert fig.secret_fraction == pytest.approx(fig.i_ab - i_ae, abs=1e-12)

    def test_shor_preskill_form(self):
        fig = secret_rate(0.5, 0.05, leakage="shor_preskill")
        assert fig.secret_fraction == pytest.approx(1 - 2 * h(0.05), abs=1e-12)
        assert fig.secret_rate == pytest.approx(0.5 * (1 - 2 * h(0.05)))

    @pytest.mark.parametrize("leakage", ["individual", "shor_preskill"])
    def test_zero_at_and_beyond_threshold(self, leakage):
        t = leakage_threshold(leakage)
        assert secret_rate(1.0, t + 1e-9, leakage=leakage).secret_rate == 0
        assert secret_rate(1.0, t - 1e-3, leakage=leakage).secret_rate > 0

    def test_side_information_charged(self):
        assert secret_rate(1.0, 0.0, eve_info=1.0).secret_rate == 0
        assert secret_rate(1.0, 0.0, eve_info=0.3).secret_fraction == pytest.approx(0.7)

    def test_error_correction_inefficiency_costs(self):
        assert secret_rate(1.0, 0.05, f=1.2).secret_rate < secret_rate(1.0, 0.05).secret_rate

    @given(st.floats(0, 0.5), st.floats(0, 0.5))
    def test_nonincreasing_in_qber(self, a, b):
        lo, hi = sorted((a, b))
        assert secret_rate(1.0, hi).secret_rate <= secret_rate(1.0, lo).secret_rate + 1e-12

    def test_unknown_leakage(self):
        with pytest.raises(ValueError):
            eve_information(0.1, "coherent")
        with pytest.raises(ValueError):
            leakage_threshold("coherent")
