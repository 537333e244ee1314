"""Parametric haircuts for non-cash collateral.

Collateral log returns follow a mixed-exponential jump-diffusion; loss
distributions over the margin period of risk come from two-sided Laplace
inversion, and haircuts are solved to meet PD, EL, VaR/ES or economic
capital targets.
"""

from .analytics import (
    STANDARD_SHIFTS,
    EmpiricalHaircuts,
    ParameterShift,
    SensitivityTable,
    empirical_var_es,
    liquidity_haircut_delta,
    sensitivity_table,
)
from .errors import (
    DomainError,
    EstimationError,
    HaircutError,
    InputError,
    InversionError,
    ModelError,
    UnattainableTargetError,
)
from .estimation import (
    EstimationResult,
    PriceSeries,
    ReturnSeries,
    SampleStats,
    estimate_staged,
    log_likelihood,
    read_price_csv,
    rolling_estimate,
    sample_stats,
)
from .levy import (
    CORP_A_5_10Y,
    SPX_4P,
    SPX_5P,
    SPX_6P,
    DejdParams,
    JumpDiffusionModel,
    JumpMixture,
    Moments,
    TimeConvention,
    annual_mean,
    cumulants,
    levy_exponent,
    load_model,
    model_from_dict,
    model_to_dict,
    validate,
)
from .loss import LossSetup, expected_loss, loss_tail_prob, simulate_returns
from .solver import (
    EconomicCapital,
    ExpectedLoss,
    ExpectedShortfall,
    FirstLossPD,
    RatingTarget,
    RatingTargetTable,
    ValueAtRisk,
    expected_shortfall,
    haircut_economic_capital,
    haircut_expected_loss,
    haircut_first_loss,
    haircut_table,
    load_rating_table,
    loss_quantile,
    solve_haircut,
    value_at_risk,
)
from .transform import (
    InversionConfig,
    InversionResult,
    TransformKind,
    invert,
    stabilized_invert,
    transform,
    truncation_bound,
    upper_incomplete_gamma_half,
)

__version__ = "0.1.0"
