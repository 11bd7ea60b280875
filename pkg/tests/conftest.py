"""Shared fixtures: the three reference parameter sets used across the suite.

The single-regime pair differ only in residence time theta, which flips the
sign of the persistence threshold: theta = 1 puts the reactor below
wash-out (biomass dies out), theta = 5 well above it (biomass persists).
The switching model alternates between a calm and a noisy environment.
"""

import pytest

import sludgesim as sl


@pytest.fixture(scope="session")
def switching_model():
    return sl.ChemostatModel(
        S0=15.0, theta=5.0, K_S=60.0, R=0.0,
        regimes=(
            sl.RegimeParams(k_m=9.0, k_d=0.06, Y=0.8, sigma1=0.1, sigma2=0.2),
            sl.RegimeParams(k_m=6.0, k_d=0.08, Y=0.6, sigma1=1.0, sigma2=0.1),
        ),
        generator=sl.SwitchingGenerator.constant([[-0.2, 0.2], [0.8, -0.8]]),
    )


def _single_regime(theta: float) -> sl.ChemostatModel:
    return sl.ChemostatModel(
        S0=12.0, theta=theta, K_S=60.0, R=0.0,
        regimes=(sl.RegimeParams(k_m=8.0, k_d=0.06, Y=0.6,
                                 sigma1=0.2, sigma2=0.2),),
        generator=sl.SwitchingGenerator.none(),
    )


@pytest.fixture(scope="session")
def extinction_model():
    return _single_regime(theta=1.0)


@pytest.fixture(scope="session")
def persistence_model():
    return _single_regime(theta=5.0)


@pytest.fixture(scope="session")
def fast_cfg():
    return sl.IntegratorConfig(dt=1e-2)
