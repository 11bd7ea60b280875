"""Persistence threshold, wash-out time, and long-run statistics.

The sign of the threshold (called lambda throughout) decides the fate of the
biomass: negative means wash-out (extinction), zero is critical, positive
means persistence with a nontrivial stationary law. Lambda is the expected
per-capita biomass growth rate along the boundary substrate process -- the
substrate dynamics with biomass pinned at zero -- and is computed here two
ways: by ergodic Monte Carlo time-averaging of the growth-rate integrand
(any number of regimes), and by adaptive quadrature against the closed-form
inverse-gamma stationary density (single regime only).

Replica work may run on a thread pool (the compiled kernels release the
GIL); reductions always happen in ascending stream order, so parallel and
serial runs produce bit-identical results. Set ``SLUDGESIM_WORKERS`` to
override the pool size.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import stats as sp_stats

from . import _kernels
from .engine import IntegratorConfig, Trajectory, check_integrator, _q_off
from .errors import (
    BiomassHitZero,
    DegenerateNoise,
    EmptyAfterBurnIn,
    HorizonTooShort,
    InvalidMomentExponent,
    MCInconclusive,
    NonFiniteState,
    NoSignChange,
    QuadratureNonConvergence,
    RequiresSingleRegime,
    StepTooLargeForRates,
)
from .model import ChemostatModel, SystemState, pstar_bound
from .rng import RngStream

METHOD_MC = "ErgodicMC"
METHOD_QUADRATURE = "ClosedFormQuadrature"

#: Monte Carlo defaults, sized so the switching-example tolerance (+-0.05 at
#: three standard errors) is met at the default step size.
DEFAULT_BURN_IN = 200.0
DEFAULT_HORIZON = 2000.0
DEFAULT_REPLICAS = 16
N_BATCHES = 32

_WORKERS_ENV = "SLUDGESIM_WORKERS"


def _default_lambda_config() -> IntegratorConfig:
    return IntegratorConfig(dt=1e-3, record_stride=1)


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaEstimate:
    """The persistence threshold with its uncertainty and provenance.

    ``std_error`` is the batch-means standard error for the Monte Carlo
    method and the quadrature error estimate (replicas == 0) for the closed
    form.
    """

    value: float
    std_error: float
    method: str
    burn_in: float
    horizon: float
    replicas: int


@dataclass(frozen=True)
class InverseGammaParams:
    """Shape/scale of the boundary process's stationary density.

    a = (2 + sigma1^2 theta) / (theta sigma1^2) > 1 always, so the
    stationary mean b / (a - 1) is finite and equals S0.
    """

    a: float
    b: float

    @property
    def mean(self) -> float:
        return self.b / (self.a - 1.0)


@dataclass(frozen=True)
class WashoutResult:
    """Root of lambda(theta) = 0 with bracketing interval and diagnostics."""

    theta0: float
    bracket: tuple[float, float]
    iterations: int
    lambda_at_root: float
    method: str
    escalations: int = 0


@dataclass(frozen=True)
class StationarySummary:
    """Long-run time/replica averages of the full system."""

    mean_S: float
    mean_X: float
    regime_occupancy: tuple[float, ...]
    moment_1p: float
    mean_S_se: float
    mean_X_se: float
    moment_1p_se: float
    p: float


@dataclass(frozen=True, eq=False)
class RegimeHistogram:
    """Per-regime occupation-probability histogram over (S, X).

    ``mass`` has shape (m0, len(s_edges) - 1, len(x_edges) - 1) and sums to
    one over all regimes and bins.
    """

    s_edges: np.ndarray
    x_edges: np.ndarray
    mass: np.ndarray
    burn_in: float
    total_weight: int


@dataclass(frozen=True)
class SlopeEstimate:
    """Least-squares slope of ln X against t, with its standard error."""

    slope: float
    std_error: float


@dataclass(frozen=True)
class EffluentPoint:
    """One row of the residence-time sweep: threshold and effluent mean."""

    theta: float
    lam: float
    lam_se: float
    es_star: float
    es_star_se: float


# ---------------------------------------------------------------------------
# worker pool
# ---------------------------------------------------------------------------

def worker_count(n_tasks: int) -> int:
    """Pool size: SLUDGESIM_WORKERS if set, else the CPU count, capped."""
    env = os.environ.get(_WORKERS_ENV)
    workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def _map_ordered(fn, n: int) -> list:
    """[fn(0), ..., fn(n-1)], possibly threaded, always in index order."""
    workers = worker_count(n)
    if workers == 1:
        return [fn(r) for r in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, r) for r in range(n)]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# closed form (single regime)
# ---------------------------------------------------------------------------

def _require_single_regime(model: ChemostatModel, what: str) -> None:
    if model.m0 != 1:
        raise RequiresSingleRegime(
            f"{what} needs a single-regime model; this one has {model.m0}"
        )


def inverse_gamma_params(model: ChemostatModel) -> InverseGammaParams:
    """Stationary-density parameters of the boundary substrate process."""
    _require_single_regime(model, "inverse_gamma_params")
    sigma1 = model.regimes[0].sigma1
    if sigma1 <= 0.0:
        raise DegenerateNoise("sigma1 must be > 0 for the stationary density")
    v = model.theta * sigma1 * sigma1
    return InverseGammaParams(a=(2.0 + v) / v, b=2.0 * model.S0 / v)


def lambda_closed_form(model: ChemostatModel, *,
                       epsrel: float = 1e-8) -> LambdaEstimate:
    """The threshold by quadrature against the stationary density.

    The improper integral of the Monod uptake term against the inverse-gamma
    density f*(s) is transformed by u = b/s into a gamma-weighted integral
    with bounded integrand k_m Y b / (K_S u + b), truncated at the
    [1e-12, 1 - 1e-12] gamma quantiles and evaluated adaptively.

    Raises:
        RequiresSingleRegime: for switching models (no closed form exists).
        DegenerateNoise: when sigma1 == 0.
        QuadratureNonConvergence: if the tolerance is not reached.
    """
    ig = inverse_gamma_params(model)
    reg = model.regimes[0]
    km_y = reg.k_m * reg.Y
    a, b = ig.a, ig.b
    lgam = math.lgamma(a)

    def integrand(u: float) -> float:
        return km_y * b / (model.K_S * u + b) * math.exp(
            (a - 1.0) * math.log(u) - u - lgam
        )

    lo = float(sp_stats.gamma.ppf(1e-12, a))
    hi = float(sp_stats.gamma.isf(1e-12, a))
    result = integrate.quad(integrand, lo, hi, epsrel=epsrel, limit=200,
                            full_output=True)
    if len(result) > 3:
        raise QuadratureNonConvergence(
            f"adaptive quadrature did not converge: {result[3]}"
        )
    uptake_mean, abserr = result[0], result[1]
    err = abserr + 2e-12 * km_y  # quadrature error + truncated tail bound
    constants = reg.k_d + model.washout_rate + 0.5 * reg.sigma2**2
    return LambdaEstimate(
        value=uptake_mean - constants, std_error=err,
        method=METHOD_QUADRATURE, burn_in=0.0, horizon=0.0, replicas=0,
    )


# ---------------------------------------------------------------------------
# Monte Carlo (any number of regimes)
# ---------------------------------------------------------------------------

def _lambda_batches_python(model, gen, n_burn, n_avg, dt, s, i,
                           floor, km_y, growth_const, g_sums, s_sums, counts):
    """Python mirror of the boundary accumulation kernel (callback rates)."""
    a = model.regime_arrays
    sqdt = math.sqrt(dt)
    inv_theta = 1.0 / model.theta
    n_batches = g_sums.shape[0]
    for k in range(n_burn + n_avg):
        u = float(gen.random())
        z_x = float(gen.standard_normal())
        z_s = float(gen.standard_normal())
        rates = model.generator.rates_from(i, s, 0.0)
        if dt * float(rates.sum()) >= 1.0:
            raise StepTooLargeForRates(f"dt * total rate >= 1 at step {k + 1}")
        i = int(_kernels.pick_regime(i, u, rates, dt))
        s, _, _ = _kernels.sx_step(
            s, 0.0, False, i, dt, sqdt, z_x, z_s,
            model.S0, inv_theta, model.washout_rate, model.K_S,
            a.k_m, a.k_d, a.Y, a.sigma1, a.sigma2, floor)
        if not math.isfinite(s):
            return s, i, k + 1
        if k >= n_burn:
            b = (k - n_burn) * n_batches // n_avg
            g_sums[b] += km_y[i] * s / (model.K_S + s) + growth_const[i]
            s_sums[b] += s
            counts[b] += 1
    return s, i, -1


def _boundary_batch_run(model, config, burn_in, horizon, replicas, rng):
    """Per-replica batch sums of the growth integrand and of S_hat.

    Returns (g_means, s_means): arrays of shape (replicas, n_batches), plus
    the overall (integrand_average, substrate_average) weighted by step
    counts. Reduction order is fixed by replica index.
    """
    config = config if config is not None else _default_lambda_config()
    rng = rng if rng is not None else RngStream(0)
    if burn_in < 0.0 or horizon <= 0.0 or replicas < 1:
        raise ValueError("need burn_in >= 0, horizon > 0, replicas >= 1")
    check_integrator(model, config)
    n_burn = int(round(burn_in / config.dt))
    n_avg = int(round(horizon / config.dt))
    if n_avg < 1:
        raise HorizonTooShort(f"horizon {horizon} is below one step of {config.dt}")
    n_batches = min(N_BATCHES, n_avg)
    arrays = model.regime_arrays
    km_y = arrays.k_m * arrays.Y
    growth_const = -(arrays.k_d + model.washout_rate + 0.5 * arrays.sigma2**2)
    q_off = _q_off(model) if model.generator.is_constant else None

    def one(r: int):
        stream = rng.substream(r)
        g_sums = np.zeros(n_batches)
        s_sums = np.zeros(n_batches)
        counts = np.zeros(n_batches, dtype=np.int64)
        s0, i0 = model.S0, r % model.m0
        if q_off is not None:
            _, _, _, bad = _kernels.drive_lambda_batches(
                stream.generator, n_burn, n_avg, config.dt, s0, i0,
                model.S0, 1.0 / model.theta, model.washout_rate, model.K_S,
                arrays.k_m, arrays.k_d, arrays.Y, arrays.sigma1, arrays.sigma2,
                q_off, config.positivity_floor, km_y, growth_const,
                g_sums, s_sums, counts)
        else:
            _, _, bad = _lambda_batches_python(
                model, stream.generator, n_burn, n_avg, config.dt, s0, i0,
                config.positivity_floor, km_y, growth_const,
                g_sums, s_sums, counts)
        if bad >= 0:
            raise NonFiniteState(
                f"non-finite boundary state in replica {r}, step {bad}", step=bad)
        return g_sums, s_sums, counts

    results = _map_ordered(one, replicas)
    g_means = np.vstack([g / c for g, _, c in results])
    s_means = np.vstack([s / c for _, s, c in results])
    g_total = sum(g.sum() for g, _, _ in results)
    s_total = sum(s.sum() for _, s, _ in results)
    n_total = sum(c.sum() for _, _, c in results)
    return g_means, s_means, g_total / n_total, s_total / n_total


def _batch_se(batch_means: np.ndarray) -> float:
    flat = batch_means.ravel()
    if flat.size < 2:
        return 0.0
    return float(flat.std(ddof=1) / math.sqrt(flat.size))


def estimate_lambda_mc(model: ChemostatModel,
                       config: IntegratorConfig | None = None,
                       burn_in: float = DEFAULT_BURN_IN,
                       horizon: float = DEFAULT_HORIZON,
                       replicas: int = DEFAULT_REPLICAS,
                       rng: RngStream | None = None) -> LambdaEstimate:
    """The threshold by ergodic time-averaging along the boundary process.

    Each replica r runs the boundary process from S0 on stream
    ``rng.substream(r)``, discards ``burn_in``, and time-averages the
    growth-rate integrand over ``horizon``; the estimate is the step-weighted
    grand average and the standard error comes from 32 batch means per
    replica. Deterministic given the stream, independent of the worker pool.
    """
    g_means, _, g_avg, _ = _boundary_batch_run(
        model, config, burn_in, horizon, replicas, rng)
    return LambdaEstimate(
        value=float(g_avg), std_error=_batch_se(g_means), method=METHOD_MC,
        burn_in=burn_in, horizon=horizon, replicas=replicas,
    )


def boundary_substrate_mean(model: ChemostatModel,
                            config: IntegratorConfig | None = None,
                            burn_in: float = DEFAULT_BURN_IN,
                            horizon: float = DEFAULT_HORIZON,
                            replicas: int = DEFAULT_REPLICAS,
                            rng: RngStream | None = None) -> tuple[float, float]:
    """Long-run time average of the boundary substrate, with standard error.

    The stationary mean is S0 exactly (the drift has zero stationary
    expectation), which makes this a sharp self-check of the sampler.
    """
    _, s_means, _, s_avg = _boundary_batch_run(
        model, config, burn_in, horizon, replicas, rng)
    return float(s_avg), _batch_se(s_means)


# ---------------------------------------------------------------------------
# wash-out time
# ---------------------------------------------------------------------------

MAX_ITER_QUADRATURE = 60
MAX_ITER_MC = 25
_STREAM_BLOCK = 100_000


def washout_time(model: ChemostatModel, theta_lo: float, theta_hi: float,
                 tol: float | None = None, lambda_method: str = METHOD_QUADRATURE,
                 *, config: IntegratorConfig | None = None,
                 burn_in: float = DEFAULT_BURN_IN,
                 horizon: float = DEFAULT_HORIZON,
                 replicas: int = DEFAULT_REPLICAS,
                 rng: RngStream | None = None,
                 max_escalations: int = 3) -> WashoutResult:
    """Solve lambda(theta) = 0 by bisection over the residence time.

    The model is rebuilt at each iterate with only theta replaced. Bisection
    needs only signs, which is what makes the Monte Carlo method workable:
    each sign is decided at 3 standard errors on fresh deterministic
    sub-streams, doubling the replica count up to ``max_escalations`` times
    if the test is inconclusive before giving up.

    Args:
        theta_lo, theta_hi: bracket with lambda(theta_lo) < 0 < lambda(theta_hi).
        tol: bracket-width stopping tolerance (defaults: 1e-7 closed form,
            0.05 Monte Carlo).
        lambda_method: METHOD_QUADRATURE or METHOD_MC.

    Raises:
        NoSignChange: the bracket endpoints do not straddle zero.
        MCInconclusive: a Monte Carlo sign test stayed within 3 standard
            errors of zero after all escalations.
    """
    if lambda_method not in (METHOD_QUADRATURE, METHOD_MC):
        raise ValueError(f"unknown lambda method {lambda_method!r}")
    if not 0.0 < theta_lo < theta_hi:
        raise ValueError(f"bad bracket ({theta_lo}, {theta_hi})")
    mc = lambda_method == METHOD_MC
    if tol is None:
        tol = 0.05 if mc else 1e-7
    rng = rng if rng is not None else RngStream(0)
    max_iter = MAX_ITER_MC if mc else MAX_ITER_QUADRATURE
    escalations = 0

    def evaluate(theta: float, slot: int, attempt: int) -> tuple[float, float]:
        trial = dataclasses.replace(model, theta=theta)
        if not mc:
            est = lambda_closed_form(trial)
            return est.value, est.std_error
        base = (slot * (max_escalations + 1) + attempt + 1) * _STREAM_BLOCK
        est = estimate_lambda_mc(
            trial, config, burn_in, horizon, replicas * 2**attempt,
            rng.substream(base))
        return est.value, est.std_error

    def decided_sign(theta: float, slot: int) -> float:
        nonlocal escalations
        value = se = 0.0
        for attempt in range(max_escalations + 1):
            value, se = evaluate(theta, slot, attempt)
            if not mc or abs(value) >= 3.0 * se:
                return value
            escalations += 1
        raise MCInconclusive(
            f"|lambda({theta:g})| = {abs(value):.3g} < 3 SE = {3 * se:.3g} "
            f"after {max_escalations} escalations"
        )

    if decided_sign(theta_lo, 0) >= 0.0 or decided_sign(theta_hi, 1) <= 0.0:
        raise NoSignChange(
            f"need lambda({theta_lo}) < 0 < lambda({theta_hi})"
        )

    lo, hi = theta_lo, theta_hi
    iterations = 0
    for it in range(max_iter):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        if decided_sign(mid, it + 2) < 0.0:
            lo = mid
        else:
            hi = mid
        iterations += 1

    theta0 = 0.5 * (lo + hi)
    residual, _ = evaluate(theta0, max_iter + 2, 0)
    return WashoutResult(
        theta0=theta0, bracket=(lo, hi), iterations=iterations,
        lambda_at_root=abs(residual), method=lambda_method,
        escalations=escalations,
    )


# ---------------------------------------------------------------------------
# long-run statistics
# ---------------------------------------------------------------------------

def _stats_batches_python(model, gen, n_burn, n_avg, dt, s, lnx, alive, i,
                          floor, y_hat, one_plus_p,
                          s_sums, x_sums, m_sums, occ, counts):
    """Python mirror of the full-system accumulation kernel."""
    a = model.regime_arrays
    sqdt = math.sqrt(dt)
    inv_theta = 1.0 / model.theta
    n_batches = s_sums.shape[0]
    for k in range(n_burn + n_avg):
        u = float(gen.random())
        z_x = float(gen.standard_normal())
        z_s = float(gen.standard_normal())
        x = math.exp(lnx) if alive else 0.0
        rates = model.generator.rates_from(i, s, x)
        if dt * float(rates.sum()) >= 1.0:
            raise StepTooLargeForRates(f"dt * total rate >= 1 at step {k + 1}")
        i = int(_kernels.pick_regime(i, u, rates, dt))
        s, lnx, _ = _kernels.sx_step(
            s, lnx, alive, i, dt, sqdt, z_x, z_s,
            model.S0, inv_theta, model.washout_rate, model.K_S,
            a.k_m, a.k_d, a.Y, a.sigma1, a.sigma2, floor)
        if not (math.isfinite(s) and (not alive or math.isfinite(lnx))):
            return s, lnx, i, k + 1
        if k >= n_burn:
            b = (k - n_burn) * n_batches // n_avg
            x = math.exp(lnx) if alive else 0.0
            s_sums[b] += s
            x_sums[b] += x
            m_sums[b] += (y_hat * s + x) ** one_plus_p
            occ[i] += 1
            counts[b] += 1
    return s, lnx, i, -1


def stationary_summary(model: ChemostatModel,
                       config: IntegratorConfig | None = None,
                       burn_in: float = DEFAULT_BURN_IN,
                       horizon: float = DEFAULT_HORIZON,
                       replicas: int = DEFAULT_REPLICAS,
                       p: float | None = None,
                       rng: RngStream | None = None,
                       init: SystemState | None = None) -> StationarySummary:
    """Long-run averages of S, X, regime occupancy, and (Y_hat S + X)^(1+p).

    Runs the full system from ``init`` (default: substrate at S0, one unit
    of biomass, regime cycling over replicas) and averages after burn-in.
    The moment exponent p must lie strictly inside (0, pstar_bound(model));
    by default half the bound, capped at 1.

    Raises:
        InvalidMomentExponent: when p is outside the bounded-moment range.
    """
    config = config if config is not None else IntegratorConfig(dt=1e-2)
    rng = rng if rng is not None else RngStream(0)
    bound = pstar_bound(model)
    if p is None:
        p = min(1.0, 0.5 * bound)
    if not 0.0 < p < bound:
        raise InvalidMomentExponent(
            f"p = {p} is outside (0, {bound:g}) = (0, pstar_bound)"
        )
    if burn_in < 0.0 or horizon <= 0.0 or replicas < 1:
        raise ValueError("need burn_in >= 0, horizon > 0, replicas >= 1")
    check_integrator(model, config)
    n_burn = int(round(burn_in / config.dt))
    n_avg = int(round(horizon / config.dt))
    if n_avg < 1:
        raise HorizonTooShort(f"horizon {horizon} is below one step of {config.dt}")
    n_batches = min(N_BATCHES, n_avg)
    arrays = model.regime_arrays
    y_hat = float(arrays.Y.max())
    one_plus_p = 1.0 + p
    q_off = _q_off(model) if model.generator.is_constant else None
    base = init if init is not None else SystemState(0.0, model.S0, 1.0, 0)

    def one(r: int):
        stream = rng.substream(r)
        s_sums = np.zeros(n_batches)
        x_sums = np.zeros(n_batches)
        m_sums = np.zeros(n_batches)
        occ = np.zeros(model.m0, dtype=np.int64)
        counts = np.zeros(n_batches, dtype=np.int64)
        alive = base.x > 0.0
        lnx0 = math.log(base.x) if alive else 0.0
        s0 = max(base.s, config.positivity_floor)
        i0 = (base.regime + r) % model.m0 if init is None else base.regime
        if q_off is not None:
            _, _, _, _, bad = _kernels.drive_stats_batches(
                stream.generator, n_burn, n_avg, config.dt, s0, lnx0, alive, i0,
                model.S0, 1.0 / model.theta, model.washout_rate, model.K_S,
                arrays.k_m, arrays.k_d, arrays.Y, arrays.sigma1, arrays.sigma2,
                q_off, config.positivity_floor, y_hat, one_plus_p,
                s_sums, x_sums, m_sums, occ, counts)
        else:
            _, _, _, bad = _stats_batches_python(
                model, stream.generator, n_burn, n_avg, config.dt,
                s0, lnx0, alive, i0, config.positivity_floor, y_hat, one_plus_p,
                s_sums, x_sums, m_sums, occ, counts)
        if bad >= 0:
            raise NonFiniteState(
                f"non-finite state in replica {r}, step {bad}", step=bad)
        return s_sums, x_sums, m_sums, occ, counts

    results = _map_ordered(one, replicas)
    total_n = sum(c.sum() for *_, c in results)
    s_means = np.vstack([s / c for s, _, _, _, c in results])
    x_means = np.vstack([x / c for _, x, _, _, c in results])
    m_means = np.vstack([m / c for _, _, m, _, c in results])
    occ_total = np.sum([o for _, _, _, o, _ in results], axis=0)
    return StationarySummary(
        mean_S=float(sum(s.sum() for s, *_ in results) / total_n),
        mean_X=float(sum(x.sum() for _, x, *_ in results) / total_n),
        regime_occupancy=tuple((occ_total / total_n).tolist()),
        moment_1p=float(sum(m.sum() for _, _, m, _, _ in results) / total_n),
        mean_S_se=_batch_se(s_means),
        mean_X_se=_batch_se(x_means),
        moment_1p_se=_batch_se(m_means),
        p=p,
    )


# ---------------------------------------------------------------------------
# residence-time sweep
# ---------------------------------------------------------------------------

def effluent_curve(model: ChemostatModel, theta_grid,
                   *, lambda_method: str = METHOD_QUADRATURE,
                   lambda_config: IntegratorConfig | None = None,
                   burn_in: float = DEFAULT_BURN_IN,
                   horizon: float = DEFAULT_HORIZON,
                   replicas: int = DEFAULT_REPLICAS,
                   es_config: IntegratorConfig | None = None,
                   es_burn_in: float = 100.0,
                   es_horizon: float = 500.0,
                   es_replicas: int = 8,
                   x0: float = 1.0,
                   rng: RngStream | None = None) -> list[EffluentPoint]:
    """Threshold and expected effluent concentration along a theta grid.

    Per grid point: lambda by the configured method, and the effluent mean
    ES* by long-run time-averaging of S from a full-system run started at
    (S0, x0). ES* is always simulated -- never short-circuited to S0 in the
    extinction regime -- so the "levels off at S0" behavior is an observed
    output. Rows are emitted in grid order.
    """
    thetas = [float(t) for t in theta_grid]
    if any(t <= 0.0 for t in thetas) or sorted(thetas) != thetas:
        raise ValueError("theta grid must be positive and ascending")
    if lambda_method not in (METHOD_QUADRATURE, METHOD_MC):
        raise ValueError(f"unknown lambda method {lambda_method!r}")
    rng = rng if rng is not None else RngStream(0)
    es_config = es_config if es_config is not None else IntegratorConfig(dt=1e-2)
    rows: list[EffluentPoint] = []
    for g, theta in enumerate(thetas):
        trial = dataclasses.replace(model, theta=theta)
        if lambda_method == METHOD_QUADRATURE:
            est = lambda_closed_form(trial)
        else:
            est = estimate_lambda_mc(
                trial, lambda_config, burn_in, horizon, replicas,
                rng.substream((2 * g) * _STREAM_BLOCK))
        summary = stationary_summary(
            trial, es_config, es_burn_in, es_horizon, es_replicas,
            rng=rng.substream((2 * g + 1) * _STREAM_BLOCK),
            init=SystemState(0.0, model.S0, x0, 0))
        rows.append(EffluentPoint(
            theta=theta, lam=est.value, lam_se=est.std_error,
            es_star=summary.mean_S, es_star_se=summary.mean_S_se))
    return rows


# ---------------------------------------------------------------------------
# trajectory statistics
# ---------------------------------------------------------------------------

def extinction_rate(trajectory: Trajectory) -> SlopeEstimate:
    """Least-squares slope of ln X(t) over the trajectory's second half.

    The slope approaches the threshold from below in the extinction regime
    and zero in the persistent regime.

    Raises:
        BiomassHitZero: the trajectory contains X == 0 (log undefined).
        HorizonTooShort: fewer than three samples in the second half.
    """
    x = np.asarray(trajectory.x, dtype=np.float64)
    t = np.asarray(trajectory.t, dtype=np.float64)
    if (x <= 0.0).any():
        raise BiomassHitZero("trajectory contains X = 0; ln X is undefined")
    half = len(t) // 2
    t2, y2 = t[half:], np.log(x[half:])
    n = len(t2)
    if n < 3:
        raise HorizonTooShort(f"{n} samples in the second half; need >= 3")
    tc = t2 - t2.mean()
    stt = float(tc @ tc)
    slope = float(tc @ y2) / stt
    resid = y2 - y2.mean() - slope * tc
    var = float(resid @ resid) / (n - 2)
    return SlopeEstimate(slope=slope, std_error=math.sqrt(var / stt))


def empirical_density(trajectories, s_bins: int = 40, x_bins: int = 40,
                      burn_in: float = 0.0,
                      s_range: tuple[float, float] | None = None,
                      x_range: tuple[float, float] | None = None
                      ) -> RegimeHistogram:
    """Occupation-frequency histogram over (S, X), one 2D grid per regime.

    Args:
        trajectories: one Trajectory or an iterable of them.
        s_bins, x_bins: bin counts (> 0).
        burn_in: samples with t < burn_in are discarded.
        s_range, x_range: bin ranges; data-driven when omitted.

    Raises:
        EmptyAfterBurnIn: nothing remains after discarding the burn-in.
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    trajectories = list(trajectories)
    if s_bins < 1 or x_bins < 1:
        raise ValueError("bin counts must be positive")
    kept = [(tr.s[tr.t >= burn_in], tr.x[tr.t >= burn_in], tr.regime[tr.t >= burn_in])
            for tr in trajectories]
    total = sum(len(s) for s, _, _ in kept)
    if total == 0:
        raise EmptyAfterBurnIn(f"no samples at or after t = {burn_in}")
    all_s = np.concatenate([s for s, _, _ in kept])
    all_x = np.concatenate([x for _, x, _ in kept])
    all_reg = np.concatenate([r for _, _, r in kept])
    m0 = int(all_reg.max()) + 1

    def edges(values, rng_pair, count):
        lo, hi = rng_pair if rng_pair is not None else (values.min(), values.max())
        if not hi > lo:
            hi = lo + 1.0  # degenerate data: one flat bin still normalizes
        return np.linspace(lo, hi, count + 1)

    s_edges = edges(all_s, s_range, s_bins)
    x_edges = edges(all_x, x_range, x_bins)
    mass = np.zeros((m0, s_bins, x_bins))
    for i in range(m0):
        sel = all_reg == i
        if sel.any():
            counts, _, _ = np.histogram2d(
                all_s[sel], all_x[sel], bins=(s_edges, x_edges))
            mass[i] = counts
    binned = mass.sum()  # explicit ranges may clip samples; normalize over bins
    if binned == 0.0:
        raise EmptyAfterBurnIn("no post-burn-in samples fall inside the bin ranges")
    mass /= binned
    return RegimeHistogram(
        s_edges=s_edges, x_edges=x_edges, mass=mass,
        burn_in=burn_in, total_weight=int(binned),
    )
