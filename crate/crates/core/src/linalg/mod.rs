//! Dense linear algebra for the regression stack: rank-revealing least
//! squares and sandwich covariance assembly.

mod lstsq;
mod matrix;
mod sandwich;

pub use lstsq::{solve_least_squares, LeastSquares, RANK_TOL};
pub use matrix::Matrix;
pub use sandwich::{sandwich_covariance, sandwich_with_bread, CovVariant};
