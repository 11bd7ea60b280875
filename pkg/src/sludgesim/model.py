"""Model definition and pure coefficient functions.

The chemostat state is (S, X, alpha): substrate concentration, biomass
concentration, and the environmental regime (a continuous-time Markov chain
on finitely many states). All per-regime coefficients live in
:class:`RegimeParams`; the environment constants and the switching generator
live in :class:`ChemostatModel`. Everything here is immutable and pure, so a
validated model can be shared freely across worker threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    GeneratorNotIrreducible,
    GeneratorRowSumNonzero,
    InvalidModel,
    NonPositiveParameter,
)

#: State-dependent switching rate: (i, j, s, x) -> q_ij(s, x), j != i.
RateFunction = Callable[[int, int, float, float], float]

_ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class RegimeParams:
    """Coefficients of one environmental regime.

    Attributes:
        k_m: maximum specific substrate uptake rate (1/day).
        k_d: biomass death rate (1/day).
        Y: yield of biomass per unit substrate consumed (dimensionless).
        sigma1: white-noise intensity on the substrate equation (1/sqrt(day)).
        sigma2: white-noise intensity on the biomass equation (1/sqrt(day)).
    """

    k_m: float
    k_d: float
    Y: float
    sigma1: float
    sigma2: float


@dataclass(frozen=True)
class SwitchingGenerator:
    """Generator of the regime chain, either a constant matrix or a callback.

    Use :meth:`constant` / :meth:`state_dependent` instead of the raw
    constructor. Rows of a constant matrix must sum to zero within 1e-12 and
    have nonnegative off-diagonal entries; the matrix must be irreducible.
    For a state-dependent generator only the off-diagonal rates are ever
    requested from the callback -- the diagonal is implied, never trusted.
    """

    m0: int
    rows: tuple[tuple[float, ...], ...] | None = None
    rate_fn: RateFunction | None = None

    @classmethod
    def constant(cls, matrix: Sequence[Sequence[float]]) -> "SwitchingGenerator":
        rows = tuple(tuple(float(v) for v in row) for row in matrix)
        return cls(m0=len(rows), rows=rows)

    @classmethod
    def state_dependent(cls, rate_fn: RateFunction, m0: int) -> "SwitchingGenerator":
        return cls(m0=int(m0), rate_fn=rate_fn)

    @classmethod
    def none(cls) -> "SwitchingGenerator":
        """The 1x1 zero generator: a single regime, no switching."""
        return cls.constant([[0.0]])

    @property
    def is_constant(self) -> bool:
        return self.rows is not None

    @cached_property
    def matrix(self) -> np.ndarray:
        """Constant rate matrix as a float array (constant mode only)."""
        if self.rows is None:
            raise ValueError("state-dependent generator has no constant matrix")
        return np.array(self.rows, dtype=np.float64)

    @cached_property
    def max_total_rate(self) -> float:
        """Largest total exit rate over regimes (constant mode only)."""
        q = self.matrix
        off = q - np.diag(np.diag(q))
        return float(off.sum(axis=1).max()) if self.m0 > 1 else 0.0

    def rates_from(self, i: int, s: float, x: float) -> np.ndarray:
        """Off-diagonal exit rates out of regime ``i`` at state (s, x).

        Returns a length-m0 array whose entry j (j != i) is q_ij; entry i is 0.
        Callback results are checked to be nonnegative at every evaluation.
        """
        if self.rows is not None:
            row = self.matrix[i].copy()
            row[i] = 0.0
            return row
        row = np.zeros(self.m0)
        for j in range(self.m0):
            if j == i:
                continue
            rate = float(self.rate_fn(i, j, s, x))
            if rate < 0.0:
                raise NonPositiveParameter(
                    f"state-dependent rate q[{i + 1}->{j + 1}]({s}, {x}) = {rate} < 0"
                )
            row[j] = rate
        return row


class _RegimeArrays(NamedTuple):
    """Per-regime coefficients as parallel arrays, for the jit kernels."""

    k_m: np.ndarray
    k_d: np.ndarray
    Y: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray


@dataclass(frozen=True)
class ChemostatModel:
    """Full parameter set of the regime-switching chemostat.

    Attributes:
        S0: inflow substrate concentration (mg/L).
        theta: hydraulic residence time (day).
        K_S: Monod half-saturation constant (mg/L).
        R: sludge recycle ratio (dimensionless, >= 0).
        regimes: per-regime coefficient tables, one per environmental state.
        generator: switching generator of the regime chain.
    """

    S0: float
    theta: float
    K_S: float
    R: float
    regimes: tuple[RegimeParams, ...]
    generator: SwitchingGenerator

    def __post_init__(self):
        object.__setattr__(self, "regimes", tuple(self.regimes))

    @property
    def m0(self) -> int:
        return len(self.regimes)

    @property
    def washout_rate(self) -> float:
        """(1 + R) / theta: the dilution loss rate acting on the biomass."""
        return (1.0 + self.R) / self.theta

    @cached_property
    def regime_arrays(self) -> _RegimeArrays:
        return _RegimeArrays(
            k_m=np.array([r.k_m for r in self.regimes]),
            k_d=np.array([r.k_d for r in self.regimes]),
            Y=np.array([r.Y for r in self.regimes]),
            sigma1=np.array([r.sigma1 for r in self.regimes]),
            sigma2=np.array([r.sigma2 for r in self.regimes]),
        )


@dataclass(frozen=True)
class SystemState:
    """Instantaneous state (t, s, x, regime); regime is 0-based internally."""

    t: float
    s: float
    x: float
    regime: int = 0


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _strongly_connected(rows: np.ndarray) -> bool:
    """True if the positive-rate digraph is strongly connected."""
    m = rows.shape[0]
    if m == 1:
        return True
    adj = (rows > 0.0) & ~np.eye(m, dtype=bool)

    def reach(mat) -> int:
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in np.nonzero(mat[i])[0]:
                if j not in seen:
                    seen.add(int(j))
                    stack.append(int(j))
        return len(seen)

    return reach(adj) == m and reach(adj.T) == m


def check_model(model: ChemostatModel, *, allow_degenerate: bool = False) -> list:
    """Collect every violated invariant of ``model``.

    Args:
        model: candidate parameter set.
        allow_degenerate: permit sigma1 == 0 (noise-free substrate equation),
            used for deterministic-limit experiments only.

    Returns:
        A list of ModelError instances, empty when the model is valid.
    """
    problems: list = []

    def positive(name: str, value: float) -> None:
        if not value > 0.0:
            problems.append(NonPositiveParameter(f"{name} = {value} must be > 0"))

    positive("S0", model.S0)
    positive("theta", model.theta)
    positive("K_S", model.K_S)
    if model.R < 0.0:
        problems.append(NonPositiveParameter(f"R = {model.R} must be >= 0"))

    if not model.regimes:
        problems.append(DimensionMismatch("regimes list is empty"))
    for n, reg in enumerate(model.regimes, start=1):
        positive(f"k_m[{n}]", reg.k_m)
        positive(f"k_d[{n}]", reg.k_d)
        positive(f"Y[{n}]", reg.Y)
        if reg.sigma1 < 0.0 or (reg.sigma1 == 0.0 and not allow_degenerate):
            problems.append(
                NonPositiveParameter(f"sigma1[{n}] = {reg.sigma1} must be > 0")
            )
        if reg.sigma2 < 0.0:
            problems.append(
                NonPositiveParameter(f"sigma2[{n}] = {reg.sigma2} must be >= 0")
            )

    gen = model.generator
    if gen.m0 != model.m0:
        problems.append(
            DimensionMismatch(
                f"generator is {gen.m0}x{gen.m0} but there are {model.m0} regimes"
            )
        )
    if gen.is_constant:
        q = gen.matrix
        if q.shape != (gen.m0, gen.m0):
            problems.append(DimensionMismatch(f"generator matrix shape {q.shape}"))
        else:
            off = q - np.diag(np.diag(q))
            if (off < 0.0).any():
                problems.append(
                    GeneratorRowSumNonzero("negative off-diagonal switching rate")
                )
            bad = np.abs(q.sum(axis=1)) > _ROW_SUM_TOL
            for n in np.nonzero(bad)[0]:
                problems.append(
                    GeneratorRowSumNonzero(
                        f"generator row {n + 1} sums to {q[n].sum():g}, not 0"
                    )
                )
            if not bad.any() and not (off < 0.0).any() and not _strongly_connected(off):
                problems.append(
                    GeneratorNotIrreducible(
                        "switching graph is not strongly connected"
                    )
                )
    # State-dependent generators cannot be checked for irreducibility here;
    # their rates are checked pointwise at every evaluation instead.
    return problems


def validate(model: ChemostatModel, *, allow_degenerate: bool = False) -> None:
    """Raise on any violated invariant.

    A single violation is raised as its specific error class; several at
    once are wrapped in :class:`InvalidModel`, which lists all of them.
    """
    problems = check_model(model, allow_degenerate=allow_degenerate)
    if len(problems) == 1:
        raise problems[0]
    if problems:
        raise InvalidModel(problems)


# ---------------------------------------------------------------------------
# coefficient functions
# ---------------------------------------------------------------------------

def drift(model: ChemostatModel, state: SystemState) -> tuple[float, float]:
    """Drift vector (dS-rate, dX-rate) at ``state``.

    dS = (S0 - s)/theta - k_m(i) s x / (K_S + s)
    dX = x * (k_m(i) Y(i) s / (K_S + s) - k_d(i) - (1 + R)/theta)
    """
    reg = model.regimes[state.regime]
    uptake = reg.k_m * state.s / (model.K_S + state.s)
    ds = (model.S0 - state.s) / model.theta - uptake * state.x
    dx = state.x * (uptake * reg.Y - reg.k_d - model.washout_rate)
    return ds, dx


def diffusion(model: ChemostatModel, state: SystemState) -> tuple[float, float]:
    """Diffusion vector (sigma1(i) s, sigma2(i) x) at ``state``."""
    reg = model.regimes[state.regime]
    return reg.sigma1 * state.s, reg.sigma2 * state.x


def lambda_integrand(model: ChemostatModel, s: float, i: int) -> float:
    """Per-capita biomass growth rate at substrate level ``s`` in regime ``i``.

    This is the function averaged against the stationary law of the boundary
    substrate process to obtain the persistence threshold:

        k_m(i) Y(i) s/(K_S + s) - k_d(i) - (1 + R)/theta - sigma2(i)^2 / 2

    Monotone nondecreasing in s, saturating at the Monod limit.
    """
    reg = model.regimes[i]
    return (
        reg.k_m * reg.Y * s / (model.K_S + s)
        - reg.k_d
        - model.washout_rate
        - 0.5 * reg.sigma2**2
    )


def pstar_bound(model: ChemostatModel) -> float:
    """Upper bound on the moment exponent p with bounded (1+p)-moments.

    Returns min{ 2/(theta * min_i sigma1(i)^2),
                 2 (max_i k_d(i) + (1+R)/theta) / min_i sigma2(i)^2 }.
    The bound assumes noise on the biomass equation: if any sigma2(i) is
    zero it does not apply, and +inf is returned as a sentinel (every
    moment exponent is then accepted downstream).  The sigma1 term alone
    degenerates to +inf in the sigma1 = 0 case, leaving the sigma2 term.
    """
    s1_min = min(r.sigma1 for r in model.regimes)
    s2_min = min(r.sigma2 for r in model.regimes)
    kd_max = max(r.k_d for r in model.regimes)
    if s2_min <= 0.0:
        return math.inf
    t1 = 2.0 / (model.theta * s1_min**2) if s1_min > 0.0 else math.inf
    t2 = 2.0 * (kd_max + model.washout_rate) / s2_min**2
    return min(t1, t2)


# ---------------------------------------------------------------------------
# fingerprinting
# ---------------------------------------------------------------------------

def model_digest(model: ChemostatModel, extra: dict | None = None) -> str:
    """Stable hex digest of a model (plus optional run settings).

    State-dependent generators are identified by the callback's qualified
    name; two different callables with the same name hash alike, which is
    documented behaviour.
    """
    gen = model.generator
    if gen.is_constant:
        gen_doc = {"mode": "constant", "q": [list(row) for row in gen.rows]}
    else:
        fn = gen.rate_fn
        gen_doc = {
            "mode": "state-dependent",
            "m0": gen.m0,
            "rate_fn": f"{getattr(fn, '__module__', '?')}.{getattr(fn, '__qualname__', repr(fn))}",
        }
    doc = {
        "S0": model.S0,
        "theta": model.theta,
        "K_S": model.K_S,
        "R": model.R,
        "regimes": [
            {"k_m": r.k_m, "k_d": r.k_d, "Y": r.Y, "sigma1": r.sigma1, "sigma2": r.sigma2}
            for r in model.regimes
        ],
        "generator": gen_doc,
    }
    if extra:
        doc["extra"] = extra
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
