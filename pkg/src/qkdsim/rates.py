"""One-way secret-key rates from mutual information.

A key is distillable with one-way error correction and privacy amplification
when Alice and Bob share more information than Eve holds about either of
them; the surplus ``I(A;B) - min(I(A;E), I(B;E))`` is the asymptotic rate
per sifted bit.
"""
from __future__ import annotations

from dataclasses import dataclass

from .adversary import (
    eve_information_individual,
    individual_attack_threshold,
    shor_preskill_threshold,
)
from .quantum import binary_entropy


def _check_info(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def csiszar_korner_rate(i_ab: float, i_ae: float, i_be: float) -> float:
    """``max(0, I(A;B) - min(I(A;E), I(B;E)))`` in bits."""
    _check_info("i_ab", i_ab)
    _check_info("i_ae", i_ae)
    _check_info("i_be", i_be)
    return max(0.0, i_ab - min(i_ae, i_be))


@dataclass(frozen=True)
class RateFigures:
    qber: float
    i_ab: float   # Bob's information net of the error-correction cost
    i_ae: float   # Eve's information used for privacy amplification
    secret_fraction: float  # secret bits per sifted bit
    secret_rate: float      # secret bits per emitted pulse


def leakage_threshold(leakage: str) -> float:
    if leakage == "individual":
        return individual_attack_threshold()
    if leakage == "shor_preskill":
        return shor_preskill_threshold()
    raise ValueError(f"unknown leakage model {leakage!r}")


def eve_information(q: float, leakage: str = "individual") -> float:
    """Eve's information per sifted bit implied by the error rate alone.

    ``individual`` uses the optimal individual-attack curve; ``shor_preskill``
    charges ``h(Q)``, which turns the rate into ``1 - 2h(Q)`` at ``f = 1``.
    """
    q = min(max(q, 0.0), 0.5)
    if leakage == "individual":
        return eve_information_individual(q)
    if leakage == "shor_preskill":
        return binary_entropy(q)
    raise ValueError(f"unknown leakage model {leakage!r}")


def secret_rate(sifted_rate: float, qber: float, eve_info: float = 0.0,
                f: float = 1.0, leakage: str = "individual") -> RateFigures:
    """Secret bits per emitted pulse.

    ``eve_info`` is any additional information Eve is known to hold per
    sifted bit (e.g. from stored multi-photon copies, which cause no errors);
    the larger of it and the error-implied leakage is charged.
    """
    q = min(max(qber, 0.0), 0.5)
    i_ab = max(0.0, 1.0 - f * binary_entropy(q))
    i_ae = min(1.0, max(eve_information(q, leakage), eve_info))
    frac = csiszar_korner_rate(i_ab, i_ae, i_ae)
    return RateFigures(qber, i_ab, i_ae, frac, sifted_rate * frac)


def secret_rate_from_session(result, f: float = 1.0, leakage: str = "individual") -> RateFigures:
    """Rate for a finished session, charging Eve's simulated side information too."""
    return secret_rate(result.sifted_rate, result.qber_estimate,
                       result.eve.info_per_sifted_bit, f, leakage)
