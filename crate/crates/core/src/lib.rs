//! Exact finite-size checks of the integrable chiral Potts model: the curve,
//! Boltzmann weights, the cyclic quantum-group representations behind them,
//! and the discretely holomorphic parafermions on the diamond lattice.

pub mod curve;
pub mod elliptic;
pub mod error;
pub mod lattice;
pub mod parafermion;
pub mod qgroup;
pub mod weights;

pub use curve::{make_point_from_chart, make_point_xyz, Branch, Chart, CurvePoint, ModelParams, C64};
pub use error::{Error, Result};
pub use weights::{build_weights, Variant, WeightTable};
