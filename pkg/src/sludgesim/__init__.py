"""Regime-switching stochastic chemostat simulation and analysis.

A toolkit for the activated-sludge wastewater treatment model with
substrate S, biomass X, and a Markov-switching environment: path
simulation, the persistence threshold (Monte Carlo and closed form),
behavior classification, wash-out residence time, and long-run statistics.
"""

from .analysis import (
    METHOD_MC,
    METHOD_QUADRATURE,
    EffluentPoint,
    InverseGammaParams,
    LambdaEstimate,
    RegimeHistogram,
    SlopeEstimate,
    StationarySummary,
    WashoutResult,
    boundary_substrate_mean,
    effluent_curve,
    empirical_density,
    estimate_lambda_mc,
    extinction_rate,
    inverse_gamma_params,
    lambda_closed_form,
    stationary_summary,
    washout_time,
)
from .engine import (
    IntegratorConfig,
    Trajectory,
    check_integrator,
    sample_switch,
    simulate,
    simulate_boundary,
    simulate_coupled_pair,
    step,
)
from .errors import (
    BiomassHitZero,
    ConfigError,
    ConfigSyntaxError,
    DegenerateNoise,
    DimensionMismatch,
    EmptyAfterBurnIn,
    GeneratorNotIrreducible,
    GeneratorRowSumNonzero,
    HorizonTooShort,
    InvalidModel,
    InvalidMomentExponent,
    MCInconclusive,
    ModelError,
    NoSignChange,
    NonFiniteState,
    NonPositiveParameter,
    NumericalError,
    QuadratureNonConvergence,
    RequiresSingleRegime,
    SchemaError,
    SludgesimError,
    StepTooLargeForRates,
)
from .io import (
    EXPERIMENT_KINDS,
    DensitySettings,
    LambdaSettings,
    RunConfig,
    SimulateSettings,
    SweepSettings,
    WashoutSettings,
    load_config,
    parse_config,
    serialize_config,
)
from .model import (
    ChemostatModel,
    RegimeParams,
    SwitchingGenerator,
    SystemState,
    check_model,
    diffusion,
    drift,
    lambda_integrand,
    model_digest,
    pstar_bound,
    validate,
)
from .rng import RngStream

__version__ = "0.1.0"
