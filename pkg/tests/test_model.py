import dataclasses
import math

import numpy as np
import pytest

import sludgesim as sl
from sludgesim.model import check_model


def test_reference_models_validate(switching_model, extinction_model,
                                   persistence_model):
    for model in (switching_model, extinction_model, persistence_model):
        sl.validate(model)  # must not raise


def test_theta_zero_rejected(persistence_model):
    bad = dataclasses.replace(persistence_model, theta=0.0)
    with pytest.raises(sl.NonPositiveParameter):
        sl.validate(bad)


def test_reducible_generator_rejected(switching_model):
    gen = sl.SwitchingGenerator.constant([[-0.2, 0.2], [0.0, 0.0]])
    bad = dataclasses.replace(switching_model, generator=gen)
    with pytest.raises(sl.GeneratorNotIrreducible):
        sl.validate(bad)


def test_row_sum_violation_rejected(switching_model):
    gen = sl.SwitchingGenerator.constant([[-0.2, 0.3], [0.8, -0.8]])
    bad = dataclasses.replace(switching_model, generator=gen)
    with pytest.raises(sl.GeneratorRowSumNonzero):
        sl.validate(bad)


def test_generator_dimension_mismatch(persistence_model):
    gen = sl.SwitchingGenerator.constant([[-0.2, 0.2], [0.8, -0.8]])
    bad = dataclasses.replace(persistence_model, generator=gen)
    with pytest.raises(sl.DimensionMismatch):
        sl.validate(bad)


@pytest.mark.parametrize("field,value", [
    ("S0", -1.0), ("K_S", 0.0), ("R", -0.5),
])
def test_environment_corruptions_rejected(persistence_model, field, value):
    bad = dataclasses.replace(persistence_model, **{field: value})
    with pytest.raises(sl.ModelError):
        sl.validate(bad)


@pytest.mark.parametrize("field", ["k_m", "k_d", "Y", "sigma1"])
def test_regime_corruptions_rejected(persistence_model, field):
    regime = dataclasses.replace(persistence_model.regimes[0], **{field: 0.0})
    bad = dataclasses.replace(persistence_model, regimes=(regime,))
    with pytest.raises(sl.NonPositiveParameter):
        sl.validate(bad)


def test_sigma1_zero_allowed_in_degenerate_mode(persistence_model):
    regime = dataclasses.replace(persistence_model.regimes[0], sigma1=0.0)
    model = dataclasses.replace(persistence_model, regimes=(regime,))
    with pytest.raises(sl.NonPositiveParameter):
        sl.validate(model)
    sl.validate(model, allow_degenerate=True)


def test_check_model_reports_every_violation(switching_model):
    gen = sl.SwitchingGenerator.constant([[-0.2, 0.3], [0.8, -0.8]])
    bad = dataclasses.replace(switching_model, theta=-1.0, generator=gen)
    problems = check_model(bad)
    kinds = {type(p) for p in problems}
    assert sl.NonPositiveParameter in kinds
    assert sl.GeneratorRowSumNonzero in kinds
    with pytest.raises(sl.InvalidModel) as err:
        sl.validate(bad)
    assert len(err.value.violations) == len(problems)


def test_constant_row_sums_tight(switching_model):
    q = switching_model.generator.matrix
    assert np.abs(q.sum(axis=1)).max() <= 1e-12


# --- coefficient functions -------------------------------------------------

def test_drift_equilibrium_at_inflow_without_biomass(switching_model):
    for i in range(switching_model.m0):
        ds, dx = sl.drift(switching_model,
                          sl.SystemState(0.0, switching_model.S0, 0.0, i))
        assert ds == 0.0
        assert dx == 0.0


def test_drift_hand_values(persistence_model):
    ds, dx = sl.drift(persistence_model, sl.SystemState(0.0, 12.0, 0.0, 0))
    assert ds == 0.0
    # s = 12, x = 1: dS = -8*12/72 = -4/3; dX = 0.8 - 0.06 - 0.2 = 0.54
    ds, dx = sl.drift(persistence_model, sl.SystemState(0.0, 12.0, 1.0, 0))
    assert ds == pytest.approx(-4.0 / 3.0, rel=1e-15)
    assert dx == pytest.approx(0.54, rel=1e-15)


def test_diffusion_vanishes_on_axes(persistence_model):
    assert sl.diffusion(persistence_model, sl.SystemState(0.0, 0.0, 3.0, 0))[0] == 0.0
    assert sl.diffusion(persistence_model, sl.SystemState(0.0, 3.0, 0.0, 0))[1] == 0.0
    assert sl.diffusion(persistence_model, sl.SystemState(0.0, 10.0, 2.0, 0)) \
        == (2.0, pytest.approx(0.4))


def test_lambda_integrand_at_zero_substrate(switching_model):
    for i, regime in enumerate(switching_model.regimes):
        expected = (-regime.k_d - switching_model.washout_rate
                    - regime.sigma2 ** 2 / 2.0)
        assert sl.lambda_integrand(switching_model, 0.0, i) == pytest.approx(expected)


def test_lambda_integrand_hand_value(extinction_model):
    # 4.8*12/72 - 0.06 - 1 - 0.02 = -0.28
    assert sl.lambda_integrand(extinction_model, 12.0, 0) == pytest.approx(-0.28)


def test_lambda_integrand_monotone_and_bounded(switching_model, persistence_model):
    rng = np.random.default_rng(5)
    for model in (switching_model, persistence_model):
        for i in range(model.m0):
            grid = np.sort(rng.uniform(0.0, 500.0, size=200))
            values = [sl.lambda_integrand(model, s, i) for s in grid]
            assert all(b >= a for a, b in zip(values, values[1:]))
            regime = model.regimes[i]
            bound = (regime.k_m * regime.Y - regime.k_d
                     - model.washout_rate - regime.sigma2 ** 2 / 2.0)
            assert values[-1] <= bound
            # Monod saturation: the bound is approached for large s
            assert sl.lambda_integrand(model, 1e9, i) == pytest.approx(bound, abs=1e-5)


def test_saturation_limit_value(persistence_model):
    regime = persistence_model.regimes[0]
    bound = (regime.k_m * regime.Y - regime.k_d
             - persistence_model.washout_rate - regime.sigma2 ** 2 / 2.0)
    assert bound == pytest.approx(4.52)


# --- moment exponent bound -------------------------------------------------

def test_pstar_bound_hand_value(persistence_model):
    # min{2/(5*0.04), 2*(0.06+0.2)/0.04} = min{10, 13} = 10
    assert sl.pstar_bound(persistence_model) == pytest.approx(10.0)


def test_pstar_bound_symmetric_construction():
    s2 = math.sqrt(2.0)
    model = sl.ChemostatModel(
        S0=1.0, theta=1.0, K_S=1.0, R=0.0,
        regimes=(sl.RegimeParams(k_m=1.0, k_d=1e-300, Y=1.0,
                                 sigma1=s2, sigma2=s2),),
        generator=sl.SwitchingGenerator.none())
    assert sl.pstar_bound(model) == pytest.approx(1.0)


def test_pstar_bound_matches_rescan(switching_model):
    sig1 = min(r.sigma1 for r in switching_model.regimes)
    sig2 = min(r.sigma2 for r in switching_model.regimes)
    kd_hat = max(r.k_d for r in switching_model.regimes)
    expected = min(2.0 / (switching_model.theta * sig1 ** 2),
                   2.0 * (kd_hat + switching_model.washout_rate) / sig2 ** 2)
    assert sl.pstar_bound(switching_model) == pytest.approx(expected, rel=1e-15)


def test_pstar_bound_infinite_without_biomass_noise(persistence_model):
    regime = dataclasses.replace(persistence_model.regimes[0], sigma2=0.0)
    model = dataclasses.replace(persistence_model, regimes=(regime,))
    assert sl.pstar_bound(model) == math.inf


# --- state-dependent generators --------------------------------------------

def test_state_dependent_rates_negative_rejected():
    def rate(i, j, s, x):
        return -0.1

    gen = sl.SwitchingGenerator.state_dependent(rate, 2)
    with pytest.raises(sl.NonPositiveParameter):
        gen.rates_from(0, 5.0, 1.0)


def test_state_dependent_diagonal_implied():
    def rate(i, j, s, x):
        return 0.25 * (j + 1)

    gen = sl.SwitchingGenerator.state_dependent(rate, 3)
    rates = gen.rates_from(1, 5.0, 1.0)
    assert rates[1] == 0.0  # never asks the callback for the diagonal
    assert rates[0] == pytest.approx(0.25)
    assert rates[2] == pytest.approx(0.75)


def test_model_digest_distinguishes_fields(switching_model):
    base = sl.model_digest(switching_model)
    assert base == sl.model_digest(switching_model)
    bumped = dataclasses.replace(switching_model, S0=15.5)
    assert sl.model_digest(bumped) != base
