"""Time-stepping of the hybrid diffusion (S, X, alpha) and its boundary process.

One positivity-preserving scheme: the regime chain is advanced first (one
uniform per step, switch probability q_ij * dt), then the biomass in
log-coordinates (exactly positive, with X == 0 absorbing), then the substrate
by Euler-Maruyama in levels, projected onto a small positive floor. Every
step consumes exactly three variates -- one uniform and two normals -- on
every branch, so coupled full/boundary runs stay synchronized on a shared
stream.

Models with a constant switching generator run in compiled kernels; models
with state-dependent rates take a Python path that calls the same compiled
scalar update, producing bit-identical states for identical rates and draws.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonFiniteState, StepTooLargeForRates
from .model import ChemostatModel, SystemState, model_digest
from .rng import RngStream

#: dt * (largest total switching rate) above this merely warns ...
RATE_WARN = 0.1
#: ... and above this is a hard error (first-order switch probabilities break).
RATE_ERROR = 1.0

SCHEMES = ("EulerMaruyamaLogX",)


@dataclass(frozen=True)
class IntegratorConfig:
    """Discretization settings.

    Attributes:
        dt: step size (day).
        positivity_floor: lower projection bound for the substrate (mg/L).
        record_stride: record every n-th step into the trajectory.
        scheme: integration scheme name; only "EulerMaruyamaLogX" exists.
    """

    dt: float = 1e-2
    positivity_floor: float = 1e-12
    record_stride: int = 1
    scheme: str = "EulerMaruyamaLogX"


def check_integrator(model: ChemostatModel, config: IntegratorConfig) -> None:
    """Validate config against the model's switching rates.

    Raises:
        ValueError: on non-positive dt/floor, bad stride, or unknown scheme.
        StepTooLargeForRates: when dt * max total switching rate >= 1.
    """
    if not config.dt > 0.0:
        raise ValueError(f"dt = {config.dt} must be > 0")
    if not config.positivity_floor > 0.0:
        raise ValueError(f"positivity_floor = {config.positivity_floor} must be > 0")
    if config.record_stride < 1:
        raise ValueError(f"record_stride = {config.record_stride} must be >= 1")
    if config.scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {config.scheme!r}; have {SCHEMES}")
    if model.generator.is_constant:
        budget = config.dt * model.generator.max_total_rate
        if budget >= RATE_ERROR:
            raise StepTooLargeForRates(
                f"dt * max total switching rate = {budget:.3g} >= {RATE_ERROR}"
            )
        if budget >= RATE_WARN:
            warnings.warn(
                f"dt * max total switching rate = {budget:.3g} >= {RATE_WARN}; "
                "switching discretization bias may be noticeable",
                stacklevel=2,
            )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A time-sampled path of the system.

    Recorded samples are columnar (t, s, x, regime with 0-based regimes);
    ``terminal`` is the state at the exact horizon, which is also the last
    recorded sample whenever the horizon falls on the recording grid.

    Attributes:
        t: recorded times (day), strictly increasing.
        s: substrate at recorded times (mg/L), all > 0.
        x: biomass at recorded times (mg/L), all >= 0.
        regime: regime index at recorded times, 0-based.
        terminal: state at the exact horizon T.
        model_fingerprint: digest of the generating model and integrator.
        floor_hits: how many steps the substrate projection fired (diagnostic).
    """

    t: np.ndarray
    s: np.ndarray
    x: np.ndarray
    regime: np.ndarray
    terminal: SystemState
    model_fingerprint: str
    floor_hits: int = 0

    def __len__(self) -> int:
        return len(self.t)

    def state(self, k: int) -> SystemState:
        return SystemState(
            t=float(self.t[k]), s=float(self.s[k]),
            x=float(self.x[k]), regime=int(self.regime[k]),
        )

    def __iter__(self):
        return (self.state(k) for k in range(len(self)))


# ---------------------------------------------------------------------------
# step-level operations
# ---------------------------------------------------------------------------

def sample_switch(model: ChemostatModel, state: SystemState, dt: float,
                  rng: RngStream) -> int:
    """Regime after one step of length dt; consumes exactly one uniform.

    Raises:
        StepTooLargeForRates: if dt times the total exit rate reaches 1.
    """
    rates = model.generator.rates_from(state.regime, state.s, state.x)
    total = float(rates.sum())
    if dt * total >= RATE_ERROR:
        raise StepTooLargeForRates(
            f"dt * total rate out of regime {state.regime + 1} is {dt * total:.3g}"
        )
    u = float(rng.random())
    return int(_kernels.pick_regime(state.regime, u, rates, dt))


def step(model: ChemostatModel, state: SystemState, config: IntegratorConfig,
         rng: RngStream) -> SystemState:
    """Advance one dt: switch the regime, advance ln X, advance S.

    The two normals are drawn on every branch (the X-normal is unused when
    x == 0) so streams stay aligned across coupled runs. Repeated application
    reproduces :func:`simulate` up to round-off in the level/log conversion
    of X, which ``simulate`` carries internally across steps.
    """
    i = sample_switch(model, state, config.dt, rng)
    z_x = float(rng.standard_normal())
    z_s = float(rng.standard_normal())
    alive = state.x > 0.0
    lnx = math.log(state.x) if alive else 0.0
    a = model.regime_arrays
    s_new, lnx_new, _ = _kernels.sx_step(
        max(state.s, config.positivity_floor), lnx, alive, i,
        config.dt, math.sqrt(config.dt), z_x, z_s,
        model.S0, 1.0 / model.theta, model.washout_rate, model.K_S,
        a.k_m, a.k_d, a.Y, a.sigma1, a.sigma2, config.positivity_floor,
    )
    if alive:
        # math.exp raises OverflowError where the kernels produce inf
        x_new = math.exp(lnx_new) if lnx_new <= _kernels.LN_MAX else math.inf
    else:
        x_new = 0.0
    if not (math.isfinite(s_new) and math.isfinite(x_new)):
        raise NonFiniteState(
            f"non-finite state after step from t = {state.t:g} (dt too large?)"
        )
    return SystemState(t=state.t + config.dt, s=s_new, x=x_new, regime=i)


# ---------------------------------------------------------------------------
# whole-path simulation
# ---------------------------------------------------------------------------

def _plan_steps(T: float, dt: float) -> tuple[int, float]:
    """Number of steps and the (possibly shortened) final step length."""
    n = max(1, math.ceil(T / dt - 1e-9))
    return n, T - (n - 1) * dt


def _q_off(model: ChemostatModel) -> np.ndarray:
    q = model.generator.matrix.copy()
    np.fill_diagonal(q, 0.0)
    return np.ascontiguousarray(q)


def _check_init(model: ChemostatModel, init: SystemState) -> None:
    if init.s < 0.0 or init.x < 0.0 or not (0 <= init.regime < model.m0):
        raise ValueError(f"invalid initial state {init} for a {model.m0}-regime model")


def _drive_python(model, gen, n_steps, g0, dt, s, lnx, alive, i,
                  floor, stride, out_s, out_x, out_reg,
                  coupled_s_hat=None, out_shat=None):
    """Python mirror of the compiled drivers, for state-dependent generators.

    Draws in the same (uniform, normal, normal) order and funnels arithmetic
    through the same compiled scalar update, so identical rates give states
    bit-identical to the kernel path.
    """
    a = model.regime_arrays
    sqdt = math.sqrt(dt)
    inv_theta = 1.0 / model.theta
    s_hat = coupled_s_hat
    n_floored = 0
    for k in range(n_steps):
        u = float(gen.random())
        z_x = float(gen.standard_normal())
        z_s = float(gen.standard_normal())
        x = math.exp(lnx) if alive else 0.0
        rates = model.generator.rates_from(i, s, x)
        total = float(rates.sum())
        if dt * total >= RATE_ERROR:
            raise StepTooLargeForRates(
                f"dt * total rate {dt * total:.3g} >= {RATE_ERROR} "
                f"at step {g0 + k + 1}"
            )
        i = int(_kernels.pick_regime(i, u, rates, dt))
        s, lnx, fl = _kernels.sx_step(
            s, lnx, alive, i, dt, sqdt, z_x, z_s,
            model.S0, inv_theta, model.washout_rate, model.K_S,
            a.k_m, a.k_d, a.Y, a.sigma1, a.sigma2, floor)
        if s_hat is not None:
            s_hat, _, fl2 = _kernels.sx_step(
                s_hat, 0.0, False, i, dt, sqdt, z_x, z_s,
                model.S0, inv_theta, model.washout_rate, model.K_S,
                a.k_m, a.k_d, a.Y, a.sigma1, a.sigma2, floor)
            fl = fl or fl2
        if fl:
            n_floored += 1
        ok = math.isfinite(s) and (not alive or (math.isfinite(lnx)
                                         and lnx <= _kernels.LN_MAX))
        if s_hat is not None:
            ok = ok and math.isfinite(s_hat)
        if not ok:
            return s, lnx, s_hat, i, n_floored, g0 + k + 1
        g = g0 + k + 1
        if g % stride == 0:
            r = g // stride
            out_s[r] = s
            out_x[r] = math.exp(lnx) if alive else 0.0
            out_reg[r] = i
            if out_shat is not None:
                out_shat[r] = s_hat
    return s, lnx, s_hat, i, n_floored, -1


def _record_times(n: int, stride: int, dt: float, T: float) -> np.ndarray:
    t = np.arange(n // stride + 1, dtype=np.float64) * (stride * dt)
    if n % stride == 0:
        t[-1] = T
    return t


def simulate(model: ChemostatModel, init: SystemState, T: float,
             config: IntegratorConfig, rng: RngStream,
             _with_boundary: bool = False):
    """Integrate the system from ``init`` to the exact horizon ``T``.

    ceil(T/dt) steps (the final one shortened to land on T exactly); the
    post-step state is recorded every ``record_stride`` steps, the initial
    state is always the first sample, and the terminal state is available
    whether or not it falls on the recording grid. Deterministic given
    (model, init, T, config, rng.seed, rng.stream_id).

    Args:
        model: validated parameter set.
        init: starting state; x == 0 starts (and stays on) the boundary
            process, x > 0 stays positive for the whole path.
        T: horizon (day), > 0.
        config: discretization settings.
        rng: the replica's variate stream.

    Returns:
        A :class:`Trajectory` (a pair of them when ``_with_boundary`` -- used
        by :func:`simulate_coupled_pair`).

    Raises:
        NonFiniteState: if a state coordinate leaves the finite range, with
            the offending step index attached.
    """
    if not T > 0.0:
        raise ValueError(f"horizon T = {T} must be > 0")
    _check_init(model, init)
    check_integrator(model, config)

    n, dt_last = _plan_steps(T, config.dt)
    stride = config.record_stride
    floor = config.positivity_floor
    alive = init.x > 0.0
    s = max(init.s, floor)
    lnx = math.log(init.x) if alive else 0.0
    i = init.regime

    rows = n // stride + 1
    out_s = np.empty(rows)
    out_x = np.empty(rows)
    out_reg = np.empty(rows, dtype=np.int64)
    out_s[0], out_x[0], out_reg[0] = s, init.x if alive else 0.0, i
    out_shat = np.empty(rows) if _with_boundary else None
    if out_shat is not None:
        out_shat[0] = s
    s_hat = s if _with_boundary else None

    a = model.regime_arrays
    gen = rng.generator
    n_floored = 0
    bad = -1
    if model.generator.is_constant:
        q_off = _q_off(model)
        args = (model.S0, 1.0 / model.theta, model.washout_rate, model.K_S,
                a.k_m, a.k_d, a.Y, a.sigma1, a.sigma2, q_off, floor, stride)
        for g0, count, dt_k in ((0, n - 1, config.dt), (n - 1, 1, dt_last)):
            if count <= 0 or bad >= 0:
                continue
            if _with_boundary:
                s, lnx, s_hat, i, fl, bad = _kernels.drive_coupled(
                    gen, count, g0, dt_k, s, lnx, alive, s_hat, i,
                    *args, out_s, out_x, out_reg, out_shat)
            else:
                s, lnx, i, fl, bad = _kernels.drive_path(
                    gen, count, g0, dt_k, s, lnx, alive, i,
                    *args, out_s, out_x, out_reg)
            n_floored += fl
    else:
        for g0, count, dt_k in ((0, n - 1, config.dt), (n - 1, 1, dt_last)):
            if count <= 0 or bad >= 0:
                continue
            s, lnx, s_hat, i, fl, bad = _drive_python(
                model, gen, count, g0, dt_k, s, lnx, alive, i,
                floor, stride, out_s, out_x, out_reg,
                coupled_s_hat=s_hat, out_shat=out_shat)
            n_floored += fl
    if bad >= 0:
        raise NonFiniteState(
            f"non-finite state at step {bad} (t ~ {bad * config.dt:g}); "
            "reduce dt", step=bad)

    digest = model_digest(model, extra={
        "dt": config.dt, "positivity_floor": floor,
        "record_stride": stride, "scheme": config.scheme})
    t = _record_times(n, stride, config.dt, T)
    x_T = math.exp(lnx) if alive else 0.0
    full = Trajectory(
        t=t, s=out_s, x=out_x, regime=out_reg,
        terminal=SystemState(t=T, s=float(s), x=x_T, regime=int(i)),
        model_fingerprint=digest, floor_hits=int(n_floored))
    if not _with_boundary:
        return full
    boundary = Trajectory(
        t=t, s=out_shat, x=np.zeros(rows), regime=out_reg,
        terminal=SystemState(t=T, s=float(s_hat), x=0.0, regime=int(i)),
        model_fingerprint=digest, floor_hits=int(n_floored))
    return full, boundary


def simulate_boundary(model: ChemostatModel, s0: float, i0: int, T: float,
                      config: IntegratorConfig, rng: RngStream) -> Trajectory:
    """The substrate process with biomass pinned at zero.

    Same scheme and variate pattern as :func:`simulate` with x == 0:
    dS_hat = (S0 - S_hat)/theta dt + sigma1(alpha) S_hat dW1.
    """
    return simulate(model, SystemState(t=0.0, s=s0, x=0.0, regime=i0),
                    T, config, rng)


def simulate_coupled_pair(model: ChemostatModel, init: SystemState, T: float,
                          config: IntegratorConfig, rng: RngStream):
    """Full system and boundary process on shared draws and regime path.

    Both start from the same substrate level and see identical Gaussian
    increments and switching decisions (for state-dependent generators the
    shared rates are evaluated at the full system's state). Returns
    (full, boundary) trajectories on one time grid; the boundary substrate
    dominates the full system's pathwise.
    """
    return simulate(model, init, T, config, rng, _with_boundary=True)
