// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod fracture;
pub mod geometry;
pub mod holonet;
pub mod km_fields;
pub mod reference;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::{Scalar, C};

/// Concrete double-precision types.
pub type Material64 = km_fields::Material<f64>;
pub type Model64 = km_fields::PotentialModel<f64>;
pub type Network64 = holonet::HoloNetwork<f64>;
pub type Crack64 = geometry::CrackGeometry<f64>;
pub type Domain64 = geometry::DomainSpec<f64>;
pub type Loads64 = geometry::EdgeLoads<f64>;
pub type Sif64 = fracture::SifEstimate<f64>;
pub type GrowthConfig64 = fracture::GrowthConfig<f64>;
pub type GrowthTrace64 = fracture::GrowthTrace<f64>;
