//! Dense numeric kernels: stationary distributions, rank-one inverse updates and
//! projections.

mod curvature;
mod dense;
mod stationary;

pub use curvature::{
    project_ball_a_norm, project_box, sherman_morrison_update, CurvatureMatrix,
};
pub(crate) use curvature::{combine, ridge_multiplier};
pub use dense::{Matrix, SymmetricEigen};
pub use stationary::{stationary_distribution, ColumnStochasticMatrix};
