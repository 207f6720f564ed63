//! SIF extraction, kink criteria and quasi-static crack growth.

pub mod criteria;
pub mod growth;
pub mod integrals;

pub use criteria::{check_growth, cr_map, kink_angle, merr_angle, mts_angle, pls_angle, Criterion, GrowthStatus};
pub use growth::{
    contour_radius, crack_size, hausdorff, run_growth, tip_sifs, GrowthCheckpoint, GrowthConfig, GrowthRunner,
    GrowthStep, GrowthTrace, ModelField, TipStep,
};
pub use integrals::{auxiliary_fields, extract_sifs, interaction_integral, j_integral, AuxiliaryState, FieldEvaluator, Mode, SifEstimate};
