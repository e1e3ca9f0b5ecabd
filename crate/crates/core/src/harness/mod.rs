//! Monte Carlo experiment drivers and their statistics.

pub mod conditions;
pub mod constants;
pub mod errors;
pub mod initial;
pub mod moments;
pub mod ou;
pub mod rate;
pub mod regularity;
pub mod stats;
pub mod sweep;

pub use conditions::{check_conditions, ConditionInputs, ConditionReport, ConditionRow};
pub use constants::{estimate_constants, estimate_constants_from, l4_interpolation_ratio, sup_norm_ratio, ConstantsEstimate};
pub use errors::{strong_error, strong_error_fem, ErrorSample};
pub use initial::InitialCondition;
pub use moments::{
    exp_moment_estimate, exp_moment_from_values, ExpFunctional, ExpMomentEstimate, FemMoments, MomentReport, MomentRow,
    MomentSweep, SpectralMoments,
};
pub use ou::{validate_ou, OuValidation, VarianceCheck};
pub use rate::{fit_rate, RateFit, RateReport, RateRow};
pub use regularity::{regularity_report, time_regularity_estimate, write_regularity_csv, RegularityMode, RegularitySweep};
pub use stats::{replicate_seed, run_replicates, McEstimate};
pub use sweep::{SpaceSweep, SweepOutcome, TimeSweep};
