"""Parameter sweeps and CSV key-rate reports.

A sweep file is a session config with extra ``sweep.*`` keys::

    protocol = bb84
    source.mu = 0.1
    session.pulses = 1000000
    sweep.parameter = channel.length_km
    sweep.values = 0, 10, 20, 30
    sweep.trials = 2

Each (value, trial) pair gets a seed hashed from the base seed, the
parameter name, the value and the trial index, so a point's result does not
depend on which other points are in the sweep or on their order.

The special parameter ``qber`` evaluates the analytic curves on the given
error rates instead of simulating.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from .adversary import individual_attack_curves, shor_preskill_rate
from .config import ConfigError, SessionConfig, config_keys, from_flat, read_flat
from .protocols import run_session
from .random_stream import derive_seed
from .rates import csiszar_korner_rate, secret_rate

ANALYTIC_PARAMETER = "qber"
CURVE_COLUMNS = ("D", "i_ab", "i_ae", "r_individual", "r_sp")


def sig9(x: float) -> float:
    """Round to the 9 significant digits used in every CSV."""
    return float(f"{x:.9g}")


@dataclass(frozen=True)
class SweepSpec:
    base: SessionConfig
    parameter: str
    values: tuple
    trials: int = 1

    def __post_init__(self):
        if self.parameter != ANALYTIC_PARAMETER and self.parameter not in config_keys():
            raise ConfigError("sweep.parameter", f"unknown configuration key {self.parameter!r}")
        if self.parameter != ANALYTIC_PARAMETER and isinstance(config_keys()[self.parameter], str):
            raise ConfigError("sweep.parameter", "only numeric parameters can be swept")
        if not self.values:
            raise ConfigError("sweep.values", "at least one value is required")
        try:
            vals = tuple(float(v) for v in self.values)
        except (TypeError, ValueError):
            raise ConfigError("sweep.values", f"values must be numbers, got {self.values!r}") from None
        if len(set(vals)) != len(vals):
            raise ConfigError("sweep.values", "values must be distinct")
        object.__setattr__(self, "values", vals)
        if self.trials < 1:
            raise ConfigError("sweep.trials", "must be >= 1")
        if self.parameter == ANALYTIC_PARAMETER:
            if any(not 0 <= v <= 0.5 for v in vals):
                raise ConfigError("sweep.values", "error rates must lie in [0, 1/2]")
        else:
            for v in vals:  # every point must be a valid config
                self.point_config(v, 0)

    def point_config(self, value: float, trial: int) -> SessionConfig:
        seed = derive_seed(self.base.session.seed, self.parameter, float(value), trial)
        return self.base.replace(**{self.parameter: value, "session.seed": seed})


def load_sweep(path, env=None) -> SweepSpec:
    values = read_flat(path)
    sweep = {k: values.pop(k) for k in list(values) if k.startswith("sweep.")}
    env = os.environ if env is None else env
    if env.get("QKDSIM_SEED"):
        values["session.seed"] = env["QKDSIM_SEED"]
    base = from_flat(values)
    unknown = set(sweep) - {"sweep.parameter", "sweep.values", "sweep.trials"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown sweep key")
    if "sweep.parameter" not in sweep:
        raise ConfigError("sweep.parameter", "missing")
    if "sweep.values" not in sweep:
        raise ConfigError("sweep.values", "missing")
    raw = sweep["sweep.values"]
    items = raw if isinstance(raw, list) else [s for s in str(raw).replace(",", " ").split() if s]
    try:
        trials = int(sweep.get("sweep.trials", 1))
    except ValueError:
        raise ConfigError("sweep.trials", f"expected an integer, got {sweep['sweep.trials']!r}") from None
    return SweepSpec(base, str(sweep["sweep.parameter"]).strip(), tuple(items), trials)


@dataclass(frozen=True)
class KeyRateRow:
    value: float
    detection_rate: float
    detection_rate_se: float
    sifted_rate: float
    sifted_rate_se: float
    qber: float
    qber_se: float
    i_ab: float
    i_ae: float
    secret_rate: float
    secret_rate_se: float
    alarms: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            object.__setattr__(self, f.name, int(v) if f.name == "alarms" else sig9(v))


ROW_COLUMNS = tuple(f.name for f in fields(KeyRateRow))


@dataclass(frozen=True)
class KeyRateReport:
    parameter: str
    rows: tuple

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow((self.parameter,) + ROW_COLUMNS[1:])
        for r in self.rows:
            w.writerow([f"{x:.9g}" if isinstance(x, float) else x for x in astuple(r)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "KeyRateReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header[1:]) != ROW_COLUMNS[1:]:
            raise ValueError(f"unexpected CSV header {header!r}")
        rows = []
        for line in reader:
            vals = [float(x) for x in line[:-1]] + [int(line[-1])]
            rows.append(KeyRateRow(*vals))
        return cls(header[0], tuple(rows))


def _summarize(cfg: SessionConfig) -> tuple:
    r = run_session(cfg)
    return (r.detection_rate, r.sifted_rate, r.qber_estimate, r.i_ab, r.i_ae,
            r.secret_rate, len(r.alarms))


def _mean_se(xs):
    xs = np.asarray(xs, float)
    if len(xs) < 2:
        return float(xs.mean()), 0.0
    return float(xs.mean()), float(xs.std(ddof=1) / math.sqrt(len(xs)))


def _analytic_row(d: float, leakage: str) -> KeyRateRow:
    fig = secret_rate(1.0, d, 0.0, 1.0, leakage)
    return KeyRateRow(d, 1.0, 0.0, 1.0, 0.0, d, 0.0, fig.i_ab, fig.i_ae,
                      fig.secret_rate, 0.0, 0)


def run_sweep(spec: SweepSpec, n_jobs: int = 1) -> KeyRateReport:
    """Run every (value, trial) session and reduce to one row per value."""
    values = sorted(spec.values)
    if spec.parameter == ANALYTIC_PARAMETER:
        rows = tuple(_analytic_row(v, spec.base.analysis.leakage) for v in values)
        return KeyRateReport(spec.parameter, rows)

    tasks = [(v, t) for v in values for t in range(spec.trials)]
    configs = [spec.point_config(v, t) for v, t in tasks]
    if n_jobs == 1:
        results = [_summarize(c) for c in configs]
    else:
        with ProcessPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
            results = list(pool.map(_summarize, configs))

    rows = []
    for i, v in enumerate(values):
        chunk = np.array(results[i * spec.trials:(i + 1) * spec.trials], float)
        det, det_se = _mean_se(chunk[:, 0])
        sif, sif_se = _mean_se(chunk[:, 1])
        q, q_se = _mean_se(chunk[:, 2])
        rate, rate_se = _mean_se(chunk[:, 5])
        rows.append(KeyRateRow(v, det, det_se, sif, sif_se, q, q_se,
                               float(chunk[:, 3].mean()), float(chunk[:, 4].mean()),
                               rate, rate_se, int(chunk[:, 6].sum())))
    return KeyRateReport(spec.parameter, tuple(rows))


def analytic_curves(dmax: float = 0.25, steps: int = 100) -> list[tuple]:
    """Rows ``(D, i_ab, i_ae, r_individual, r_sp)`` on ``steps + 1`` evenly spaced points."""
    if not 0 < dmax <= 0.5:
        raise ValueError("dmax must lie in (0, 1/2]")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rows = []
    for d in np.linspace(0.0, dmax, steps + 1):
        d = float(d)
        p = individual_attack_curves(d)
        rows.append((d, p.i_ab, p.i_ae, csiszar_korner_rate(p.i_ab, p.i_ae, p.i_ae),
                     max(0.0, shor_preskill_rate(d))))
    return rows


def curves_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for row in rows:
        w.writerow([f"{x:.9g}" for x in row])
    return buf.getvalue()
