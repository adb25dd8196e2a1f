"""Built-in acceptance checks behind ``qkdsim selftest``.

Each check returns ``(ok, detail)``. Numbered checks carry the acceptance
criteria; the rest pin down worked examples of the individual modules.
"""
from __future__ import annotations

import io
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import adversary as adv
from .config import from_flat
from .devices import (
    CoincidenceMonitor,
    Detector,
    FiberChannel,
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
    TimeBinAmplitudes,
    chsh_value,
    franson_coincidence,
    plug_and_play_click_prob,
    propagate,
)
from .protocols import run_session
from .quantum import (
    Basis,
    Unitary2,
    binary_entropy,
    measure,
    mutual_information_bsc,
    prepare_state,
    random_unitary,
    transpose_identity_residual,
)
from .random_stream import RandomStream
from .rates import csiszar_korner_rate, secret_rate
from .sweep import SweepSpec, analytic_curves, curves_csv, run_sweep

IDEAL = {"source.kind": "single_photon", "detector.efficiency": 1.0, "detector.dark_prob": 0.0}

# Long-distance PNS setting: lossless detectors, so every click is signal.
PNS_SETTING = {"source.mu": 0.1, "channel.attenuation_db_per_km": 0.25, "channel.length_km": 100,
               "detector.efficiency": 1.0, "detector.dark_prob": 0.0, "session.pulses": 1_000_000}

LENGTH_SWEEP = {"source.mu": 0.1, "detector.efficiency": 0.05, "detector.dark_prob": 1e-5,
                "session.pulses": 20_000_000}
LENGTHS = tuple(range(0, 101, 10))

_CHECKS = []


def check(name, slow=False):
    def register(fn):
        _CHECKS.append((name, fn, slow))
        return fn
    return register


def _within(x, lo, hi):
    return lo <= x <= hi


# -- acceptance criteria ---------------------------------------------------------

@check("1 transpose identity on 100 random unitaries")
def _c1():
    rng = RandomStream(1)
    worst = max(transpose_identity_residual(random_unitary(rng)) for _ in range(100))
    return worst <= 1e-12, f"max residual {worst:.3g}"


@check("2 ideal BB84 sift fraction and zero QBER")
def _c2():
    r = run_session(from_flat({**IDEAL, "session.pulses": 100_000, "session.seed": 2}))
    return _within(r.sifted_rate, 0.495, 0.505) and r.qber_true == 0, \
        f"sifted {r.sifted_rate:.5f}, qber {r.qber_true}"


@check("3 ideal SARG conclusive fraction and zero QBER")
def _c3():
    r = run_session(from_flat({**IDEAL, "protocol": "sarg", "session.pulses": 100_000, "session.seed": 3}))
    return _within(r.sifted_rate, 0.245, 0.255) and r.qber_true == 0, \
        f"conclusive {r.sifted_rate:.5f}, qber {r.qber_true}"


@check("4 full intercept-resend QBER on BB84")
def _c4():
    r = run_session(from_flat({**IDEAL, "eve.strategy": "intercept_resend", "eve.omega": 1.0,
                               "session.pulses": 100_000, "session.seed": 4}))
    return _within(r.qber_estimate, 0.24, 0.26), f"qber {r.qber_estimate:.4f}"


@check("5 individual-attack crossing")
def _c5():
    d = adv.individual_attack_threshold()
    return abs(d - 0.146447) <= 1e-4, f"D = {d:.6f}"


@check("6 Shor-Preskill zero")
def _c6():
    d = adv.shor_preskill_threshold()
    return abs(d - 0.110028) <= 1e-4, f"D = {d:.6f}"


def usd_conclusive_fraction(n: int, seed: int) -> float:
    """Conclusive fraction of Eve's optimal discrimination on ``n`` stored SARG photons."""
    rng = RandomStream(seed)
    state = rng.child("state").integers(4, size=n)
    partner = 2 * (1 - state // 2) + rng.child("partner").integers(2, size=n)
    pairs = np.sort(np.stack([state, partner], 1), axis=1)
    know = adv.EveKnowledge(np.arange(n), np.full(n, adv.STORED), state)
    bits = adv.eve_measure_after_reveal(know, pairs, "sarg", rng.child("reveal"))
    return float(bits.conclusive.mean())


@check("7 SARG unambiguous discrimination probability")
def _c7():
    n = 100_000
    p = 1 - 1 / math.sqrt(2)
    frac = usd_conclusive_fraction(n, 17)
    sigma = math.sqrt(p * (1 - p) / n)
    return abs(frac - p) <= 3 * sigma, f"{frac:.5f} vs {p:.6f} (3 sigma {3 * sigma:.5f})"


@check("8 QBER from visibility 0.998")
def _c8():
    r = run_session(from_flat({**IDEAL, "optics.visibility": 0.998, "session.pulses": 400_000,
                               "session.seed": 8}))
    k = r.disclosed
    sigma = math.sqrt(0.001 * 0.999 / k)
    return abs(r.qber_estimate - 0.001) <= 3 * sigma, \
        f"qber {r.qber_estimate:.5f} over {k} bits (3 sigma {3 * sigma:.5f})"


@check("9 PNS stealth and BB84/SARG separation", slow=True)
def _c9():
    honest = run_session(from_flat({**PNS_SETTING, "session.seed": 9}))
    bb84 = run_session(from_flat({**PNS_SETTING, "session.seed": 9, "eve.strategy": "pns"}))
    sarg = run_session(from_flat({**PNS_SETTING, "session.seed": 9, "eve.strategy": "pns",
                                  "protocol": "sarg"}))
    sigma = math.sqrt(honest.bob_detections)
    stealth = abs(bb84.bob_detections - honest.bob_detections) <= 3 * sigma
    i_bb, i_sarg = bb84.eve.info_per_sifted_bit, sarg.eve.info_per_sifted_bit
    ok = stealth and abs(i_bb - 1.0) <= 0.01 and i_sarg <= 0.31
    return ok, (f"detections {bb84.bob_detections} vs {honest.bob_detections} (3 sigma {3 * sigma:.1f}); "
                f"eve info BB84 {i_bb:.4f}, SARG {i_sarg:.4f}")


def length_sweep(seed: int = 10):
    base = from_flat({**LENGTH_SWEEP, "session.seed": seed})
    return run_sweep(SweepSpec(base, "channel.length_km", LENGTHS))


@check("10 secret rate non-increasing in length, zero by 100 km", slow=True)
def _c10():
    r = length_sweep().column("secret_rate")
    mono = bool(np.all(np.diff(r) <= 0))
    reaches_zero = bool(np.any(r == 0))
    return mono and reaches_zero, "rates " + " ".join(f"{x:.3g}" for x in r)


@check("11 simulate logs are byte-identical across runs")
def _c11():
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp, "s.cfg")
        cfg.write_text("protocol = sarg\nsession.pulses = 20000\nsession.seed = 11\n"
                       "eve.strategy = intercept_resend\neve.omega = 0.3\n")
        logs = []
        for i in range(2):
            out = Path(tmp, f"run{i}.jsonl")
            main(["simulate", "--config", str(cfg), "--records", str(out)], stdout=io.StringIO(), env={})
            logs.append(out.read_bytes())
        return logs[0] == logs[1] and len(logs[0]) > 0, f"{len(logs[0])} bytes"


# -- worked examples -------------------------------------------------------------

@check("quantum: outcome frequency of |+x> measured in Y over 1e6 draws", slow=True)
def _q1():
    rng = RandomStream(101)
    psi = prepare_state(0, Basis.X)
    freq = sum(measure(psi, Basis.Y, rng) == 0 for _ in range(1_000_000)) / 1_000_000
    return _within(freq, 0.498, 0.502), f"{freq:.5f}"


@check("quantum: phase matrix residual and entropy values")
def _q2():
    res = transpose_identity_residual(Unitary2.phase(1.2345))
    h = binary_entropy(0.110028)
    mi = mutual_information_bsc(0.25)
    ok = res <= 1e-12 and abs(h - 0.5) <= 1e-6 and abs(mi - 0.18872) <= 1e-5
    return ok, f"residual {res:.2g}, h {h:.7f}, 1-h(.25) {mi:.6f}"


@check("optics: cascaded interferometers and Franson sign flip")
def _o1():
    p1, p2 = 0.7, 0.3
    first = propagate(TimeBinAmplitudes.pulse(), Interferometer(p1)).port(0)
    second = propagate(first, Interferometer(p2))
    total = second.total_probability()
    central = second.probability(0, 1)
    want = (1 + math.cos(p1 - p2)) / 4 * total
    anti = franson_coincidence(0.4, math.pi - 0.4, 1.0)
    ok = abs(central - want) <= 1e-12 and anti.same_detector("central") < 1e-12
    return ok, f"central {central:.6f} vs {want:.6f}"


@check("optics: visibility and CHSH values")
def _o2():
    p0 = plug_and_play_click_prob(math.pi, 0.0, 0.998)[0]
    s1, s2 = chsh_value(1.0), chsh_value(1 / math.sqrt(2))
    ok = abs(p0 - 0.001) <= 1e-12 and abs(s1 - 2.828427) <= 1e-6 and abs(s2 - 2) <= 1e-12
    return ok, f"P(D0) {p0:.6f}, S {s1:.6f} / {s2:.6f}"


@check("devices: Poisson multi-photon tail over 1e7 draws")
def _d1():
    n = 10_000_000
    p = 1 - math.exp(-0.1) * 1.1
    photons = sample_photon_number(WeakCoherentSource(0.1), RandomStream(201), n)
    frac = float(np.mean(photons >= 2))
    sigma = math.sqrt(p * (1 - p) / n)
    ok = abs(p - 0.004679) <= 1e-6 and abs(frac - p) <= 3 * sigma
    return ok, f"{frac:.6f} vs {p:.6f}"


@check("devices: transmittance and dark-count rate")
def _d2():
    t67 = transmittance(FiberChannel(0.25, 67))
    t40 = transmittance(FiberChannel(0.25, 40))
    rng = RandomStream(202)
    det = Detector(0.1, 1e-5)
    gates, clicks = 0, 0
    for _ in range(100):
        clicks += int(np.count_nonzero(detect(np.zeros(1_000_000, np.int64), det, rng)))
        gates += 1_000_000
    sigma = math.sqrt(1e-5 * gates) / gates
    ok = abs(t67 - 0.02113) <= 1e-5 and abs(t40 - 0.1) <= 1e-12 and abs(clicks / gates - 1e-5) <= 3 * sigma
    return ok, f"t(67) {t67:.5f}, dark rate {clicks / gates:.3e} over {gates:.0e} gates"


@check("devices: watchdog and coincidence monitors")
def _d3():
    w = WatchdogMonitor.for_nominal(1e4)
    wd = (watchdog_check(1e4, w), watchdog_check(1e6, w), watchdog_check(0.0, w))
    rng = RandomStream(203)
    n = 1_000_000
    det = Detector(0.1, 1e-5)
    # honest signal at ~1e-3 clicks per detector, plus bright pulses on 1e-5 of gates
    photons = (rng.uniform(n) < 1e-2).astype(np.int64)
    bright = rng.uniform(n) < 1e-5
    ph0 = np.where(bright, 100, photons * (rng.uniform(n) < 0.5))
    ph1 = np.where(bright, 100, photons - photons * (ph0 > 0))
    log = np.stack([detect(ph0, det, rng), detect(ph1, det, rng)], 1)
    attacked = coincidence_check(log, CoincidenceMonitor(3.0, n, 1e-5)).verdict
    passes = 0
    for _ in range(100):
        dark = np.stack([detect(np.zeros(n, np.int64), det, rng) for _ in range(2)], 1)
        passes += coincidence_check(dark, CoincidenceMonitor(3.0, n, 1e-5)).verdict == "pass"
    ok = wd == ("pass", "alarm", "pass") and attacked == "alarm" and passes >= 99
    return ok, f"watchdog {wd}, bright-pulse {attacked}, honest passes {passes}/100"


@check("protocols: intercept-resend estimate and Eve's guess accuracy")
def _p1():
    r = run_session(from_flat({**IDEAL, "eve.strategy": "intercept_resend", "session.pulses": 100_000,
                               "session.seed": 301}))
    sigma = math.sqrt(0.25 * 0.75 / r.disclosed)
    ok = abs(r.qber_estimate - 0.25) <= 3 * sigma and abs(r.eve.guess_accuracy - 0.75) <= 0.01
    return ok, f"qber {r.qber_estimate:.4f}, guess accuracy {r.eve.guess_accuracy:.4f}"


@check("rates: closed-form chain at D = 0.10")
def _r1():
    fig = secret_rate(1.0, 0.10)
    r = csiszar_korner_rate(fig.i_ab, fig.i_ae, fig.i_ae)
    ok = abs(fig.i_ab - 0.53100) <= 1e-4 and abs(fig.i_ae - 0.27807) <= 1e-4 and abs(r - 0.25293) <= 1e-4
    return ok, f"i_ab {fig.i_ab:.5f}, i_ae {fig.i_ae:.5f}, r {r:.5f}"


@check("rates: rate vanishes past each threshold")
def _r2():
    ok = (secret_rate(1.0, 0.1465).secret_rate == 0 and secret_rate(1.0, 0.1463).secret_rate > 0
          and secret_rate(1.0, 0.1101, leakage="shor_preskill").secret_rate == 0
          and secret_rate(1.0, 0.1099, leakage="shor_preskill").secret_rate > 0)
    return ok, "individual 0.146447, Shor-Preskill 0.110028"


@check("sweep: analytic error-rate sweep finds both zeros")
def _s1():
    grid = tuple(np.round(np.linspace(0, 0.25, 2501), 6))
    zeros = []
    for leakage in ("individual", "shor_preskill"):
        rep = run_sweep(SweepSpec(from_flat({"analysis.leakage": leakage}), "qber", grid))
        d, r = rep.column("value"), rep.column("secret_rate")
        zeros.append(float(d[np.argmax(r == 0)]))
    ok = abs(zeros[0] - 0.146447) <= 1e-4 and abs(zeros[1] - 0.110028) <= 1e-4
    return ok, f"first zeros {zeros[0]:.4f}, {zeros[1]:.4f}"


@check("sweep: SARG keeps a key under PNS where BB84 cannot", slow=True)
def _s2():
    rows = []
    for mu in (0.05, 0.1, 0.3, 0.6):
        rates = []
        for proto in ("bb84", "sarg"):
            cfg = from_flat({**PNS_SETTING, "source.mu": mu, "protocol": proto, "eve.strategy": "pns",
                             "session.seed": 401})
            rates.append(run_session(cfg).secret_rate)
        rows.append((mu, *rates))
    ok = all(s > b for _, b, s in rows if b == 0) and any(b == 0 for _, b, _ in rows)
    return ok, "; ".join(f"mu {m}: {b:.3g} vs {s:.3g}" for m, b, s in rows)


@check("cli: curves endpoint row and ideal simulate summary")
def _cli():
    from .cli import main

    first = curves_csv(analytic_curves(0.25, 100)).splitlines()[1]
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp, "ideal_bb84.cfg")
        cfg.write_text("".join(f"{k} = {v}\n" for k, v in IDEAL.items()))
        out = io.StringIO()
        code = main(["simulate", "--config", str(cfg)], stdout=out, env={})
    text = out.getvalue()
    frac = float(text.split("(fraction ")[1].split(")")[0])
    ok = first == "0,1,0,1,1" and code == 0 and abs(frac - 0.5) <= 0.02 and "QBER                0 " in text
    return ok, f"row {first!r}, sifted fraction {frac}"


def checks():
    """Registered ``(name, function, slow)`` triples in run order."""
    return list(_CHECKS)


def run_all(quick: bool = False, stream=None) -> bool:
    """Run every check, print one PASS/FAIL/SKIP line each, return overall success."""
    stream = sys.stdout if stream is None else stream
    ok_all = True
    for name, fn, slow in _CHECKS:
        if quick and slow:
            stream.write(f"SKIP  {name}\n")
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        stream.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail} [{time.perf_counter() - t0:.1f}s]\n")
        stream.flush()
    return ok_all
