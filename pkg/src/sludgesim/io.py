"""Configuration documents, delimited result tables, and the run manifest.

One YAML document describes one experiment: a ``model`` block, an optional
``integrator`` block, an ``experiment`` block whose ``kind`` names the
subcommand it belongs to, a ``seed``, and an ``output_dir``.  Unknown keys
are rejected outright.  Regime indices are 1-based in every file this
module reads or writes; in-memory objects are 0-based.

Numeric fields accept YAML numbers or numeric strings.  The latter matters
because YAML 1.1 reads ``1e-3`` (no decimal point) as a string, and config
authors should not have to remember that quirk.

Every table is CSV with floats printed at 17 significant digits, which
round-trips IEEE doubles exactly: rerunning an experiment with the same
config and seed reproduces each table byte for byte.  Only the manifest
carries wall-clock information.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import NamedTuple

import numpy as np
import yaml

from .analysis import (DEFAULT_BURN_IN, DEFAULT_HORIZON, DEFAULT_REPLICAS,
                       METHOD_MC, METHOD_QUADRATURE, EffluentPoint,
                       LambdaEstimate, RegimeHistogram, WashoutResult)
from .engine import IntegratorConfig, Trajectory, check_integrator
from .errors import ConfigSyntaxError, InvalidModel, SchemaError
from .model import (ChemostatModel, RegimeParams, SwitchingGenerator,
                    check_model, model_digest)

EXPERIMENT_KINDS = ("simulate", "lambda", "washout", "sweep", "density")

_METHOD_BY_TOKEN = {"mc": METHOD_MC, "quadrature": METHOD_QUADRATURE}
_TOKEN_BY_METHOD = {v: k for k, v in _METHOD_BY_TOKEN.items()}


# ---------------------------------------------------------------------------
# experiment settings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulateSettings:
    """One full-system trajectory from (s_init, x_init, regime_init)."""

    horizon: float
    s_init: float
    x_init: float
    regime_init: int = 0


@dataclass(frozen=True)
class LambdaSettings:
    """Threshold computation; burn_in/horizon/replicas apply to MC only."""

    method: str = METHOD_MC
    burn_in: float = DEFAULT_BURN_IN
    horizon: float = DEFAULT_HORIZON
    replicas: int = DEFAULT_REPLICAS


@dataclass(frozen=True)
class WashoutSettings:
    """Bisection for the wash-out residence time inside a theta bracket."""

    theta_lo: float
    theta_hi: float
    method: str = METHOD_QUADRATURE
    tol: float | None = None
    burn_in: float = DEFAULT_BURN_IN
    horizon: float = DEFAULT_HORIZON
    replicas: int = DEFAULT_REPLICAS
    max_escalations: int = 3


@dataclass(frozen=True)
class SweepSettings:
    """Residence-time sweep: lambda and effluent mean per grid point."""

    thetas: tuple[float, ...]
    method: str = METHOD_QUADRATURE
    burn_in: float = DEFAULT_BURN_IN
    horizon: float = DEFAULT_HORIZON
    replicas: int = DEFAULT_REPLICAS
    es_burn_in: float = 100.0
    es_horizon: float = 500.0
    es_replicas: int = 8
    x_init: float = 1.0


@dataclass(frozen=True)
class DensitySettings:
    """Occupation histogram over (S, X) from replicated trajectories."""

    horizon: float
    s_init: float
    x_init: float
    regime_init: int = 0
    burn_in: float = DEFAULT_BURN_IN
    replicas: int = 4
    s_bins: int = 60
    x_bins: int = 60
    s_range: tuple[float, float] | None = None
    x_range: tuple[float, float] | None = None


Settings = (SimulateSettings | LambdaSettings | WashoutSettings
            | SweepSettings | DensitySettings)


@dataclass(frozen=True)
class RunConfig:
    """A fully validated experiment description.

    ``experiment`` is one of :data:`EXPERIMENT_KINDS` and ``settings`` is
    the matching settings dataclass.  ``parse_config(serialize_config(c))``
    returns an equal RunConfig for any file-expressible config.
    """

    model: ChemostatModel
    integrator: IntegratorConfig
    experiment: str
    settings: Settings
    seed: int
    output_dir: Path


# ---------------------------------------------------------------------------
# schema walking
# ---------------------------------------------------------------------------

_REQUIRED = object()
_ABSENT = object()


def _dotted(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


class _Section:
    """A mapping consumed key by key; leftovers become schema errors."""

    def __init__(self, mapping, path: str = ""):
        if not isinstance(mapping, dict):
            name = path.rsplit(".", 1)[-1] if path else "document"
            raise SchemaError(name, f"'{path or 'document'}' must be a mapping")
        self._left = dict(mapping)
        self._path = path

    def take(self, key: str, default=_REQUIRED):
        if key in self._left:
            return self._left.pop(key)
        if default is _REQUIRED:
            raise SchemaError(key, f"missing required key '{_dotted(self._path, key)}'")
        return default

    def subsection(self, key: str) -> "_Section":
        return _Section(self.take(key), _dotted(self._path, key))

    def sequence(self, key: str, default=_REQUIRED) -> list:
        raw = self.take(key, _ABSENT if default is not _REQUIRED else _REQUIRED)
        if raw is _ABSENT:
            return default
        if not isinstance(raw, list):
            raise SchemaError(key, f"'{_dotted(self._path, key)}' must be a list")
        return raw

    def real(self, key: str, default=_REQUIRED, nullable: bool = False):
        raw = self.take(key, _ABSENT if default is not _REQUIRED else _REQUIRED)
        if raw is _ABSENT:
            return default
        if raw is None and nullable:
            return None
        return _as_real(raw, key, _dotted(self._path, key))

    def integer(self, key: str, default=_REQUIRED) -> int:
        raw = self.take(key, _ABSENT if default is not _REQUIRED else _REQUIRED)
        if raw is _ABSENT:
            return default
        label = _dotted(self._path, key)
        if isinstance(raw, bool):
            raise SchemaError(key, f"'{label}' must be an integer, got a boolean")
        if isinstance(raw, int):
            return raw
        if isinstance(raw, str):
            try:
                return int(raw, 10)
            except ValueError:
                pass
        raise SchemaError(key, f"'{label}' must be an integer, got {raw!r}")

    def string(self, key: str, default=_REQUIRED) -> str:
        raw = self.take(key, _ABSENT if default is not _REQUIRED else _REQUIRED)
        if raw is _ABSENT:
            return default
        if not isinstance(raw, str):
            raise SchemaError(key, f"'{_dotted(self._path, key)}' must be a string, got {raw!r}")
        return raw

    def finish(self) -> None:
        for key in self._left:
            raise SchemaError(str(key), f"unknown key '{_dotted(self._path, key)}'")


def _as_real(raw, key: str, label: str) -> float:
    if isinstance(raw, bool):
        raise SchemaError(key, f"'{label}' must be a number, got a boolean")
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        # YAML 1.1 resolves "1e-3" (no dot) as a string; accept it anyway.
        try:
            return float(raw)
        except ValueError:
            pass
    raise SchemaError(key, f"'{label}' must be a number, got {raw!r}")


def _positive(value: float, key: str, what: str) -> float:
    if not value > 0.0:
        raise SchemaError(key, f"{what} must be > 0, got {value}")
    return value


def _nonnegative(value: float, key: str, what: str) -> float:
    if not value >= 0.0:
        raise SchemaError(key, f"{what} must be >= 0, got {value}")
    return value


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _parse_model(sec: _Section) -> ChemostatModel:
    S0 = sec.real("S0")
    theta = sec.real("theta")
    K_S = sec.real("K_S")
    R = sec.real("R", 0.0)
    raw_regimes = sec.sequence("regimes")
    if not raw_regimes:
        raise SchemaError("regimes", "model.regimes must be a non-empty list")
    regimes = []
    for idx, entry in enumerate(raw_regimes):
        rs = _Section(entry, f"model.regimes[{idx + 1}]")
        regimes.append(RegimeParams(
            k_m=rs.real("k_m"), k_d=rs.real("k_d"), Y=rs.real("Y"),
            sigma1=rs.real("sigma1"), sigma2=rs.real("sigma2")))
        rs.finish()
    raw_gen = sec.take("generator", None)
    if raw_gen is None:
        if len(regimes) != 1:
            raise SchemaError(
                "generator",
                "model.generator is required when more than one regime is given")
        generator = SwitchingGenerator.none()
    else:
        generator = _parse_generator(raw_gen, len(regimes))
    sec.finish()
    model = ChemostatModel(S0=S0, theta=theta, K_S=K_S, R=R,
                           regimes=tuple(regimes), generator=generator)
    problems = check_model(model)
    if len(problems) == 1:
        raise problems[0]
    if problems:
        raise InvalidModel(problems)
    return model


def _parse_generator(raw, m0: int) -> SwitchingGenerator:
    if not isinstance(raw, list) or len(raw) != m0:
        raise SchemaError("generator", f"model.generator must be a {m0}x{m0} matrix")
    matrix = []
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != m0:
            raise SchemaError("generator", f"model.generator row {i + 1} must have {m0} entries")
        matrix.append([_as_real(v, "generator", f"model.generator[{i + 1}][{j + 1}]")
                       for j, v in enumerate(row)])
    return SwitchingGenerator.constant(matrix)


def _parse_integrator(raw, path: str = "integrator") -> IntegratorConfig:
    defaults = IntegratorConfig()
    if raw is None:
        return defaults
    sec = _Section(raw, path)
    config = IntegratorConfig(
        dt=sec.real("dt", defaults.dt),
        positivity_floor=sec.real("positivity_floor", defaults.positivity_floor),
        record_stride=sec.integer("record_stride", defaults.record_stride),
        scheme=sec.string("scheme", defaults.scheme))
    sec.finish()
    return config


def _take_method(sec: _Section, default_token: str) -> str:
    token = sec.string("method", default_token)
    if token not in _METHOD_BY_TOKEN:
        raise SchemaError("method", f"experiment.method must be one of "
                          f"{sorted(_METHOD_BY_TOKEN)}, got {token!r}")
    return _METHOD_BY_TOKEN[token]


def _take_regime_init(sec: _Section, m0: int) -> int:
    regime = sec.integer("regime_init", 1)
    if not 1 <= regime <= m0:
        raise SchemaError("regime_init",
                          f"experiment.regime_init must be in 1..{m0}, got {regime}")
    return regime - 1


def _take_mc_block(sec: _Section) -> tuple[float, float, int]:
    burn_in = _nonnegative(sec.real("burn_in", DEFAULT_BURN_IN),
                           "burn_in", "experiment.burn_in")
    horizon = _positive(sec.real("horizon", DEFAULT_HORIZON),
                        "horizon", "experiment.horizon")
    replicas = sec.integer("replicas", DEFAULT_REPLICAS)
    if replicas < 1:
        raise SchemaError("replicas", f"experiment.replicas must be >= 1, got {replicas}")
    return burn_in, horizon, replicas


def _parse_simulate(sec: _Section, model: ChemostatModel) -> SimulateSettings:
    settings = SimulateSettings(
        horizon=_positive(sec.real("horizon"), "horizon", "experiment.horizon"),
        s_init=_nonnegative(sec.real("s_init", model.S0), "s_init", "experiment.s_init"),
        x_init=_nonnegative(sec.real("x_init", 1.0), "x_init", "experiment.x_init"),
        regime_init=_take_regime_init(sec, model.m0))
    sec.finish()
    return settings


def _parse_lambda(sec: _Section, model: ChemostatModel) -> LambdaSettings:
    method = _take_method(sec, "mc")
    burn_in, horizon, replicas = _take_mc_block(sec)
    sec.finish()
    return LambdaSettings(method=method, burn_in=burn_in,
                          horizon=horizon, replicas=replicas)


def _parse_washout(sec: _Section, model: ChemostatModel) -> WashoutSettings:
    theta_lo = _positive(sec.real("theta_lo"), "theta_lo", "experiment.theta_lo")
    theta_hi = sec.real("theta_hi")
    if not theta_hi > theta_lo:
        raise SchemaError("theta_hi",
                          f"experiment.theta_hi must exceed theta_lo, got {theta_hi}")
    method = _take_method(sec, "quadrature")
    tol = sec.real("tol", None, nullable=True)
    if tol is not None:
        _positive(tol, "tol", "experiment.tol")
    burn_in, horizon, replicas = _take_mc_block(sec)
    max_escalations = sec.integer("max_escalations", 3)
    if max_escalations < 0:
        raise SchemaError("max_escalations",
                          f"experiment.max_escalations must be >= 0, got {max_escalations}")
    sec.finish()
    return WashoutSettings(theta_lo=theta_lo, theta_hi=theta_hi, method=method,
                           tol=tol, burn_in=burn_in, horizon=horizon,
                           replicas=replicas, max_escalations=max_escalations)


def _parse_sweep(sec: _Section, model: ChemostatModel) -> SweepSettings:
    raw = sec.sequence("thetas")
    thetas = tuple(_as_real(v, "thetas", f"experiment.thetas[{k + 1}]")
                   for k, v in enumerate(raw))
    if not thetas or any(t <= 0.0 for t in thetas) or list(thetas) != sorted(thetas):
        raise SchemaError("thetas",
                          "experiment.thetas must be a non-empty ascending list of positive values")
    method = _take_method(sec, "quadrature")
    burn_in, horizon, replicas = _take_mc_block(sec)
    es_burn_in = _nonnegative(sec.real("es_burn_in", 100.0),
                              "es_burn_in", "experiment.es_burn_in")
    es_horizon = _positive(sec.real("es_horizon", 500.0),
                           "es_horizon", "experiment.es_horizon")
    es_replicas = sec.integer("es_replicas", 8)
    if es_replicas < 1:
        raise SchemaError("es_replicas",
                          f"experiment.es_replicas must be >= 1, got {es_replicas}")
    x_init = _positive(sec.real("x_init", 1.0), "x_init", "experiment.x_init")
    sec.finish()
    return SweepSettings(thetas=thetas, method=method, burn_in=burn_in,
                         horizon=horizon, replicas=replicas,
                         es_burn_in=es_burn_in, es_horizon=es_horizon,
                         es_replicas=es_replicas, x_init=x_init)


def _parse_density(sec: _Section, model: ChemostatModel) -> DensitySettings:
    horizon = _positive(sec.real("horizon"), "horizon", "experiment.horizon")
    s_init = _nonnegative(sec.real("s_init", model.S0), "s_init", "experiment.s_init")
    x_init = _nonnegative(sec.real("x_init", 1.0), "x_init", "experiment.x_init")
    regime_init = _take_regime_init(sec, model.m0)
    burn_in = _nonnegative(sec.real("burn_in", DEFAULT_BURN_IN),
                           "burn_in", "experiment.burn_in")
    if burn_in >= horizon:
        raise SchemaError("burn_in", "experiment.burn_in must be below the horizon")
    replicas = sec.integer("replicas", 4)
    if replicas < 1:
        raise SchemaError("replicas", f"experiment.replicas must be >= 1, got {replicas}")
    bins = {}
    for key in ("s_bins", "x_bins"):
        bins[key] = sec.integer(key, 60)
        if bins[key] < 1:
            raise SchemaError(key, f"experiment.{key} must be >= 1, got {bins[key]}")
    ranges = {}
    for key in ("s_range", "x_range"):
        raw = sec.take(key, None)
        if raw is None:
            ranges[key] = None
            continue
        if not isinstance(raw, list) or len(raw) != 2:
            raise SchemaError(key, f"experiment.{key} must be a [lo, hi] pair")
        lo = _as_real(raw[0], key, f"experiment.{key}[1]")
        hi = _as_real(raw[1], key, f"experiment.{key}[2]")
        if not hi > lo:
            raise SchemaError(key, f"experiment.{key} must satisfy lo < hi")
        ranges[key] = (lo, hi)
    sec.finish()
    return DensitySettings(horizon=horizon, s_init=s_init, x_init=x_init,
                           regime_init=regime_init, burn_in=burn_in,
                           replicas=replicas, s_bins=bins["s_bins"],
                           x_bins=bins["x_bins"], s_range=ranges["s_range"],
                           x_range=ranges["x_range"])


_EXPERIMENT_PARSERS = {
    "simulate": _parse_simulate,
    "lambda": _parse_lambda,
    "washout": _parse_washout,
    "sweep": _parse_sweep,
    "density": _parse_density,
}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate one experiment document.

    Raises:
        ConfigSyntaxError: malformed YAML, with line/column when known.
        SchemaError: missing, unknown, or ill-typed key.
        ModelError: any model invariant violation (single violations are
            raised as their specific class, several at once as InvalidModel).
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        raise ConfigSyntaxError(str(exc), line=line, column=column) from exc
    root = _Section(doc, "")
    model = _parse_model(root.subsection("model"))
    integrator = _parse_integrator(root.take("integrator", None))
    exp = root.subsection("experiment")
    kind = exp.string("kind")
    if kind not in EXPERIMENT_KINDS:
        raise SchemaError("kind", f"experiment.kind must be one of "
                          f"{list(EXPERIMENT_KINDS)}, got {kind!r}")
    settings = _EXPERIMENT_PARSERS[kind](exp, model)
    seed = root.integer("seed")
    if not 0 <= seed < 2 ** 64:
        raise SchemaError("seed", f"seed must be a 64-bit unsigned integer, got {seed}")
    output_dir = Path(root.string("output_dir", "out"))
    root.finish()
    check_integrator(model, integrator)
    return RunConfig(model=model, integrator=integrator, experiment=kind,
                     settings=settings, seed=seed, output_dir=output_dir)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _settings_doc(kind: str, settings: Settings) -> dict:
    if kind == "simulate":
        return {"horizon": settings.horizon, "s_init": settings.s_init,
                "x_init": settings.x_init, "regime_init": settings.regime_init + 1}
    if kind == "lambda":
        return {"method": _TOKEN_BY_METHOD[settings.method],
                "burn_in": settings.burn_in, "horizon": settings.horizon,
                "replicas": settings.replicas}
    if kind == "washout":
        doc = {"theta_lo": settings.theta_lo, "theta_hi": settings.theta_hi,
               "method": _TOKEN_BY_METHOD[settings.method]}
        if settings.tol is not None:
            doc["tol"] = settings.tol
        doc.update(burn_in=settings.burn_in, horizon=settings.horizon,
                   replicas=settings.replicas,
                   max_escalations=settings.max_escalations)
        return doc
    if kind == "sweep":
        return {"thetas": list(settings.thetas),
                "method": _TOKEN_BY_METHOD[settings.method],
                "burn_in": settings.burn_in, "horizon": settings.horizon,
                "replicas": settings.replicas, "es_burn_in": settings.es_burn_in,
                "es_horizon": settings.es_horizon,
                "es_replicas": settings.es_replicas, "x_init": settings.x_init}
    if kind == "density":
        doc = {"horizon": settings.horizon, "s_init": settings.s_init,
               "x_init": settings.x_init, "regime_init": settings.regime_init + 1,
               "burn_in": settings.burn_in, "replicas": settings.replicas,
               "s_bins": settings.s_bins, "x_bins": settings.x_bins}
        if settings.s_range is not None:
            doc["s_range"] = list(settings.s_range)
        if settings.x_range is not None:
            doc["x_range"] = list(settings.x_range)
        return doc
    raise ValueError(f"unknown experiment kind {kind!r}")


def serialize_config(config: RunConfig) -> str:
    """Render a RunConfig back to its canonical YAML document.

    State-dependent generators have no file form (they are Python
    callbacks); serializing such a config raises SchemaError.
    """
    model = config.model
    if not model.generator.is_constant:
        raise SchemaError("generator",
                          "state-dependent generators cannot be serialized")
    model_doc = {
        "S0": model.S0, "theta": model.theta, "K_S": model.K_S, "R": model.R,
        "regimes": [{"k_m": r.k_m, "k_d": r.k_d, "Y": r.Y,
                     "sigma1": r.sigma1, "sigma2": r.sigma2}
                    for r in model.regimes],
    }
    if model.m0 > 1:
        model_doc["generator"] = [list(row) for row in model.generator.rows]
    integ = config.integrator
    doc = {
        "model": model_doc,
        "integrator": {"dt": integ.dt, "positivity_floor": integ.positivity_floor,
                       "record_stride": integ.record_stride, "scheme": integ.scheme},
        "experiment": {"kind": config.experiment,
                       **_settings_doc(config.experiment, config.settings)},
        "seed": config.seed,
        "output_dir": str(config.output_dir),
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def config_digest(config: RunConfig) -> str:
    """sha256 of the canonical serialization (falls back to the model digest
    plus experiment/seed for configs that cannot be serialized)."""
    try:
        payload = serialize_config(config)
    except SchemaError:
        payload = json.dumps({"model": model_digest(config.model),
                              "experiment": config.experiment,
                              "settings": repr(config.settings),
                              "seed": config.seed})
    return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return format(float(value), ".17g")


class TrajectoryTable(NamedTuple):
    """Columns of a trajectory CSV; regime is 0-based here."""

    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    regime: np.ndarray


class HistogramTable(NamedTuple):
    s_edges: np.ndarray
    x_edges: np.ndarray
    mass: np.ndarray


def _read_rows(path, expected_header: str) -> list[list[str]]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != expected_header.split(","):
            raise ValueError(f"{path}: expected header {expected_header!r}, "
                             f"got {header!r}")
        return [row for row in reader if row]


def write_trajectory_csv(path, trajectory: Trajectory) -> None:
    with open(path, "w", newline="") as f:
        f.write("t,s,x,regime\n")
        for k in range(len(trajectory)):
            f.write(f"{_fmt(trajectory.t[k])},{_fmt(trajectory.s[k])},"
                    f"{_fmt(trajectory.x[k])},{int(trajectory.regime[k]) + 1}\n")


def read_trajectory_csv(path) -> TrajectoryTable:
    rows = _read_rows(path, "t,s,x,regime")
    data = np.array([[float(a), float(b), float(c)] for a, b, c, _ in rows])
    regime = np.array([int(r) - 1 for *_, r in rows], dtype=np.int64)
    return TrajectoryTable(t=data[:, 0], s=data[:, 1], x=data[:, 2], regime=regime)


def write_lambda_csv(path, estimate: LambdaEstimate) -> None:
    with open(path, "w", newline="") as f:
        f.write("method,value,std_error,burn_in,horizon,replicas\n")
        f.write(f"{estimate.method},{_fmt(estimate.value)},{_fmt(estimate.std_error)},"
                f"{_fmt(estimate.burn_in)},{_fmt(estimate.horizon)},{estimate.replicas}\n")


def read_lambda_csv(path) -> LambdaEstimate:
    (row,) = _read_rows(path, "method,value,std_error,burn_in,horizon,replicas")
    return LambdaEstimate(value=float(row[1]), std_error=float(row[2]),
                          method=row[0], burn_in=float(row[3]),
                          horizon=float(row[4]), replicas=int(row[5]))


def write_washout_csv(path, result: WashoutResult) -> None:
    with open(path, "w", newline="") as f:
        f.write("method,theta0,theta_lo,theta_hi,iterations,lambda_at_root,escalations\n")
        f.write(f"{result.method},{_fmt(result.theta0)},{_fmt(result.bracket[0])},"
                f"{_fmt(result.bracket[1])},{result.iterations},"
                f"{_fmt(result.lambda_at_root)},{result.escalations}\n")


def read_washout_csv(path) -> WashoutResult:
    (row,) = _read_rows(
        path, "method,theta0,theta_lo,theta_hi,iterations,lambda_at_root,escalations")
    return WashoutResult(theta0=float(row[1]),
                         bracket=(float(row[2]), float(row[3])),
                         iterations=int(row[4]), lambda_at_root=float(row[5]),
                         method=row[0], escalations=int(row[6]))


def write_sweep_csv(path, points: list[EffluentPoint]) -> None:
    with open(path, "w", newline="") as f:
        f.write("theta,lambda,lambda_se,es_star,es_star_se\n")
        for p in points:
            f.write(f"{_fmt(p.theta)},{_fmt(p.lam)},{_fmt(p.lam_se)},"
                    f"{_fmt(p.es_star)},{_fmt(p.es_star_se)}\n")


def read_sweep_csv(path) -> list[EffluentPoint]:
    rows = _read_rows(path, "theta,lambda,lambda_se,es_star,es_star_se")
    return [EffluentPoint(theta=float(a), lam=float(b), lam_se=float(c),
                          es_star=float(d), es_star_se=float(e))
            for a, b, c, d, e in rows]


def write_histogram_csv(path, histogram: RegimeHistogram) -> None:
    """One row per (regime, S-bin, X-bin); regime 1-based, masses sum to 1."""
    s_edges, x_edges = histogram.s_edges, histogram.x_edges
    with open(path, "w", newline="") as f:
        f.write("regime,s_lo,s_hi,x_lo,x_hi,mass\n")
        for i in range(histogram.mass.shape[0]):
            for a in range(len(s_edges) - 1):
                for b in range(len(x_edges) - 1):
                    f.write(f"{i + 1},{_fmt(s_edges[a])},{_fmt(s_edges[a + 1])},"
                            f"{_fmt(x_edges[b])},{_fmt(x_edges[b + 1])},"
                            f"{_fmt(histogram.mass[i, a, b])}\n")


def read_histogram_csv(path) -> HistogramTable:
    rows = _read_rows(path, "regime,s_lo,s_hi,x_lo,x_hi,mass")
    regimes = np.array([int(r[0]) - 1 for r in rows])
    s_lo = np.array([float(r[1]) for r in rows])
    x_lo = np.array([float(r[3]) for r in rows])
    m0 = regimes.max() + 1
    s_edges = np.append(np.unique(s_lo), float(rows[-1][2]))
    x_edges = np.append(np.unique(x_lo), float(rows[-1][4]))
    mass = np.zeros((m0, len(s_edges) - 1, len(x_edges) - 1))
    ns, nx = len(s_edges) - 1, len(x_edges) - 1
    for k, row in enumerate(rows):
        a, b = divmod(k % (ns * nx), nx)
        mass[regimes[k], a, b] = float(row[5])
    return HistogramTable(s_edges=s_edges, x_edges=x_edges, mass=mass)


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def write_manifest(path, config: RunConfig, outputs: list[str],
                   wall_clock_seconds: float) -> None:
    """Record what produced the sibling files.

    Everything except ``wall_clock_seconds`` and ``created_utc`` is a pure
    function of (config, seed); the CSV outputs themselves are the
    byte-determinism contract.
    """
    import numba
    import scipy

    from . import __version__

    doc = {
        "package": "sludgesim",
        "version": __version__,
        "experiment": config.experiment,
        "seed": config.seed,
        "config_sha256": config_digest(config),
        "model_digest": model_digest(config.model),
        "outputs": list(outputs),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "wall_clock_seconds": round(wall_clock_seconds, 3),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
