"""Acceptance battery for the chemostat toolkit.

Each test prints one `[C-nn] PASS/FAIL` line with the measured numbers, so a
run of this file doubles as a scorecard.  Monte Carlo protocols and stream
seeds are frozen; the tolerance of every check is stated inline.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

import sludgesim as sl

DT_FINE = sl.IntegratorConfig(dt=1e-3)
DT_COARSE = sl.IntegratorConfig(dt=1e-2)


def _report(capsys, cid, ok, detail):
    with capsys.disabled():
        print(f"[{cid}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{cid}: {detail}"


@pytest.fixture(scope="module")
def persist_summary(persistence_model):
    """Long-run summary of the persistent single-regime plant (shared by 9/10)."""
    return sl.stationary_summary(persistence_model, DT_COARSE, burn_in=200.0,
                                 horizon=2000.0, replicas=8, rng=sl.RngStream(83))


def test_c01_closed_form_lambda_persistent(persistence_model, capsys):
    t0 = time.perf_counter()
    est = sl.lambda_closed_form(persistence_model)
    elapsed = time.perf_counter() - t0
    ok = 0.45 <= est.value <= 0.55 and elapsed < 1.0
    _report(capsys, "C-01", ok,
            f"closed-form lambda={est.value:.6f} in [0.45, 0.55], {elapsed*1e3:.0f} ms")


def test_c02_closed_form_lambda_extinct(extinction_model, capsys):
    est = sl.lambda_closed_form(extinction_model)
    ok = -0.31 <= est.value <= -0.25
    _report(capsys, "C-02", ok,
            f"closed-form lambda={est.value:.6f} in [-0.31, -0.25]")


def test_c03_mc_lambda_switching(switching_model, capsys):
    t0 = time.perf_counter()
    est = sl.estimate_lambda_mc(switching_model, DT_FINE, burn_in=200.0,
                                horizon=2000.0, replicas=16, rng=sl.RngStream(1001))
    elapsed = time.perf_counter() - t0
    half_width = 3.0 * est.std_error
    ok = 0.82 <= est.value <= 1.01 and half_width <= 0.05 and elapsed <= 300.0
    _report(capsys, "C-03", ok,
            f"MC lambda={est.value:.5f} +- {est.std_error:.5f} "
            f"(3-sigma {half_width:.4f} <= 0.05), {elapsed:.1f} s")


def test_c04_washout_quadrature(extinction_model, capsys):
    t0 = time.perf_counter()
    res = sl.washout_time(extinction_model, 0.5, 5.0, tol=1e-7)
    elapsed = time.perf_counter() - t0
    ok = 1.3 <= res.theta0 <= 1.5 and abs(res.lambda_at_root) < 1e-6 and elapsed < 10.0
    _report(capsys, "C-04", ok,
            f"theta0={res.theta0:.6f} in [1.3, 1.5], "
            f"|lambda(theta0)|={abs(res.lambda_at_root):.2e} < 1e-6, {elapsed:.2f} s")


def test_c05_washout_mc_switching(switching_model, capsys):
    t0 = time.perf_counter()
    res = sl.washout_time(switching_model, 0.2, 5.0, tol=0.05,
                          lambda_method=sl.METHOD_MC, config=DT_FINE,
                          burn_in=200.0, horizon=2000.0, replicas=16,
                          rng=sl.RngStream(1004))
    elapsed = time.perf_counter() - t0
    ok = 0.65 <= res.theta0 <= 0.95 and elapsed <= 1200.0
    _report(capsys, "C-05", ok,
            f"MC theta0={res.theta0:.5f} in [0.65, 0.95], {elapsed:.1f} s")


def test_c06_mc_quadrature_equivalence(capsys):
    # 10 plants drawn inside the typical operating ranges (k_m 2-10,
    # K_S 25-100, Y 0.4-0.8, k_d 0.025-0.075, theta 3-5); feed, recycle and
    # noise levels are drawn from sensible operating bands of our own choice.
    draw = np.random.default_rng(2026)
    hits, worst = 0, 0.0
    for k in range(10):
        model = sl.ChemostatModel(
            S0=float(draw.uniform(8, 20)), theta=float(draw.uniform(3, 5)),
            K_S=float(draw.uniform(25, 100)), R=float(draw.uniform(0, 0.5)),
            regimes=(sl.RegimeParams(
                k_m=float(draw.uniform(2, 10)), k_d=float(draw.uniform(0.025, 0.075)),
                Y=float(draw.uniform(0.4, 0.8)), sigma1=float(draw.uniform(0.1, 0.6)),
                sigma2=float(draw.uniform(0.1, 0.3))),),
            generator=sl.SwitchingGenerator.none())
        mc = sl.estimate_lambda_mc(model, sl.IntegratorConfig(dt=2e-3),
                                   burn_in=100.0, horizon=800.0, replicas=8,
                                   rng=sl.RngStream(3000 + k))
        quad = sl.lambda_closed_form(model)
        sigmas = abs(mc.value - quad.value) / math.hypot(mc.std_error, quad.std_error)
        worst = max(worst, sigmas)
        hits += sigmas <= 3.0
    ok = hits >= 9
    _report(capsys, "C-06", ok,
            f"MC vs quadrature within 3 sigma on {hits}/10 random plants "
            f"(worst {worst:.2f} sigma)")


def test_c07_stationary_mean_identity(switching_model, extinction_model,
                                      persistence_model, capsys):
    devs = []
    for model, seed in ((switching_model, 701), (extinction_model, 702),
                        (persistence_model, 703)):
        mean, se = sl.boundary_substrate_mean(model, DT_COARSE, burn_in=100.0,
                                              horizon=800.0, replicas=8,
                                              rng=sl.RngStream(seed))
        devs.append(abs(mean - model.S0) / se)
    mc_ok = all(d < 3.0 for d in devs)
    exact_ok = True
    for model in (extinction_model, persistence_model):
        ig = sl.inverse_gamma_params(model)
        exact_ok &= abs(ig.b / (ig.a - 1.0) - model.S0) <= 1e-12 * model.S0
    ok = mc_ok and exact_ok
    _report(capsys, "C-07", ok,
            f"boundary mean within 3 sigma of S0 on all models "
            f"(devs {', '.join(f'{d:.2f}' for d in devs)}); b/(a-1)=S0 to 1e-12")


def test_c08_extinction_regime(extinction_model, capsys):
    base = sl.RngStream(81)
    slopes = [
        sl.extinction_rate(
            sl.simulate(extinction_model, sl.SystemState(0.0, 12.0, 1.0, 0),
                        2000.0, DT_COARSE, base.substream(r))).slope
        for r in range(8)
    ]
    mean_slope = float(np.mean(slopes))
    sc = sl.stationary_summary(extinction_model, DT_COARSE, burn_in=200.0,
                               horizon=2000.0, replicas=8, rng=sl.RngStream(82))
    s_dev = abs(sc.mean_S - extinction_model.S0) / sc.mean_S_se
    ok = -0.38 <= mean_slope <= -0.18 and s_dev < 3.0
    _report(capsys, "C-08", ok,
            f"log-biomass slope={mean_slope:.4f} in [-0.38, -0.18] "
            f"(T=2000, 8 replicas); mean_S dev {s_dev:.2f} sigma")


def test_c09_persistence_regime(persistence_model, persist_summary, capsys):
    ps = persist_summary
    x_sig = ps.mean_X / ps.mean_X_se
    clean_sig = (persistence_model.S0 - ps.mean_S) / ps.mean_S_se
    ok = x_sig > 3.0 and clean_sig > 3.0
    _report(capsys, "C-09", ok,
            f"mean_X={ps.mean_X:.3f} > 0 at {x_sig:.0f} sigma; "
            f"ES*={ps.mean_S:.3f} < S0={persistence_model.S0} at {clean_sig:.0f} sigma")


def test_c10_critical_regime(extinction_model, persist_summary, capsys):
    # At theta = theta0 the law still forces E[S] = S0 for any initial
    # biomass, so a small x_init keeps the finite-horizon transient honest.
    theta0 = sl.washout_time(extinction_model, 0.5, 5.0, tol=1e-7).theta0
    critical = dataclasses.replace(extinction_model, theta=theta0)
    cs = sl.stationary_summary(critical, DT_COARSE, burn_in=200.0, horizon=2000.0,
                               replicas=8, rng=sl.RngStream(91),
                               init=sl.SystemState(0.0, 12.0, 1e-6, 0))
    s_dev = abs(cs.mean_S - critical.S0) / cs.mean_S_se
    cap = 0.1 * persist_summary.mean_X
    ok = s_dev < 3.0 and cs.mean_X < cap
    _report(capsys, "C-10", ok,
            f"at theta0={theta0:.4f}: mean_S dev {s_dev:.2f} sigma; "
            f"mean_X={cs.mean_X:.4f} < {cap:.4f} (10% of persistent value)")


def test_c11_pathwise_domination(persistence_model, capsys):
    base = sl.RngStream(111)
    violations = 0
    for r in range(100):
        full, bound = sl.simulate_coupled_pair(
            persistence_model, sl.SystemState(0.0, 12.0, 1.0, 0),
            100.0, DT_COARSE, base.substream(r))
        violations += not np.all(bound.s >= full.s)
    ok = violations == 0
    _report(capsys, "C-11", ok,
            f"biomass-free substrate dominates on 100 coupled runs "
            f"({violations} violations)")


def test_c12_invariant_suite(switching_model, persistence_model, capsys,
                             monkeypatch):
    checks = {}

    traj = sl.simulate(persistence_model, sl.SystemState(0.0, 12.0, 1.0, 0),
                       200.0, DT_COARSE, sl.RngStream(121))
    checks["positivity"] = bool(traj.s.min() > 0.0 and traj.x.min() > 0.0)

    dead = sl.simulate(persistence_model, sl.SystemState(0.0, 12.0, 0.0, 0),
                       50.0, DT_COARSE, sl.RngStream(122))
    checks["absorption"] = bool(np.all(dead.x == 0.0))

    def rejected(matrix):
        try:
            sl.validate(dataclasses.replace(
                switching_model,
                generator=sl.SwitchingGenerator.constant(np.asarray(matrix))))
        except sl.SludgesimError:
            return True
        return False

    checks["generator"] = (rejected([[-0.2, 0.3], [0.8, -0.8]])    # bad row sum
                           and rejected([[0.0, 0.0], [0.8, -0.8]]))  # reducible

    hist = sl.empirical_density(traj, 20, 20, burn_in=20.0)
    checks["normalization"] = bool(abs(hist.mass.sum() - 1.0) <= 1e-12)

    model = dataclasses.replace(persistence_model)
    lams = [sl.lambda_closed_form(dataclasses.replace(model, theta=t)).value
            for t in (0.6, 0.9, 1.2, 1.8, 2.6, 4.0)]
    checks["monotone"] = lams == sorted(lams)

    kwargs = dict(burn_in=20.0, horizon=100.0, replicas=6)
    monkeypatch.setenv("SLUDGESIM_WORKERS", "1")
    serial = sl.estimate_lambda_mc(persistence_model, DT_COARSE,
                                   rng=sl.RngStream(23), **kwargs)
    monkeypatch.setenv("SLUDGESIM_WORKERS", "4")
    threaded = sl.estimate_lambda_mc(persistence_model, DT_COARSE,
                                     rng=sl.RngStream(23), **kwargs)
    checks["bit_exact"] = serial == threaded

    ok = all(checks.values())
    verdicts = ", ".join(f"{name}={'ok' if good else 'FAIL'}"
                         for name, good in checks.items())
    _report(capsys, "C-12", ok, verdicts)
