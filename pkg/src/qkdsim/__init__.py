"""Discrete-event simulator for BB84 and SARG quantum key distribution.

Typical use::

    from qkdsim import from_flat, run_session

    cfg = from_flat({"protocol": "sarg", "channel.length_km": 25})
    result = run_session(cfg)
    print(result.summary())
"""
from .adversary import (
    EveStrategy,
    ProtocolKind,
    eve_measure_after_reveal,
    individual_attack_curves,
    individual_attack_threshold,
    intercept_resend,
    pns_attack,
    shor_preskill_threshold,
)
from .config import ConfigError, SessionConfig, from_flat, load_config
from .devices import (
    CoincidenceMonitor,
    Detector,
    FiberChannel,
    SinglePhotonSource,
    WatchdogMonitor,
    WeakCoherentSource,
    coincidence_check,
    detect,
    sample_photon_number,
    transmittance,
    watchdog_check,
)
from .optics import (
    Interferometer,
    chsh_value,
    franson_coincidence,
    plug_and_play_click_prob,
    propagate,
    qber_from_visibility,
)
from .protocols import PulseLog, SessionResult, estimate_qber, run_session, sift_bb84, sift_sarg
from .quantum import (
    Basis,
    QubitState,
    Unitary2,
    binary_entropy,
    measure,
    mutual_information_bsc,
    prepare_state,
    transpose_identity_residual,
)
from .random_stream import RandomStream
from .rates import csiszar_korner_rate, secret_rate, secret_rate_from_session
from .sweep import KeyRateReport, SweepSpec, analytic_curves, load_sweep, run_sweep

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
