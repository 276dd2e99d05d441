"""riskcurve: design and certify minimum-norm linear-regression risk curves.

The library estimates the excess generalization risk of minimum-norm least
squares as features are revealed one at a time, and searches for
per-coordinate feature laws (Gaussian or trimodal Gaussian mixture) that
make the estimated curve rise and fall in any prescribed pattern away from
the interpolation threshold.
"""

from .designer import (
    Arrow,
    BudgetExhausted,
    CurvePlan,
    StepCertification,
    VerifyReport,
    choose_ascent_params,
    choose_descent_sigma,
    choose_rho,
    design_curve,
    parse_arrows,
    verify_plan,
)
from .laws import (
    FeatureLaw,
    Gaussian,
    ProductLaw,
    StdGaussian,
    TrimodalMix,
    mix_cdf,
    mix_pdf,
    mix_quantile,
    phi_map,
    sample,
    sample_row,
)
from .pinv import (
    InfeasibleSystem,
    MSpectrum,
    PinvState,
    SingularUpdate,
    m_matrix_spectrum,
    min_norm_solve,
    pinv_direct,
    projection_quantities,
    stack_row_pinv_over,
    stack_row_pinv_under,
)
from .planfile import PlanParseError, load_plan, save_plan
from .risk import (
    FixedBeta,
    GaussianBeta,
    PairedDelta,
    RegressionInstance,
    RiskEstimate,
    ZeroBeta,
    bias_gaussian_beta,
    conditional_stacked_mean,
    diag_ascent_lower_bound,
    diag_inv_z,
    diag_noncentral_dominance,
    estimate_Ld,
    estimate_delta,
    loss_sample,
)

__version__ = "0.1.0"
