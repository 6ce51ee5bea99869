//! Dense linear algebra and combinatorial kernels.

pub mod assignment;
pub mod lp;
pub mod mat;
pub mod norms;
pub mod svd;

pub use assignment::{assignment_cost, solve_assignment};
pub use lp::{lp_feasible, lp_solve, LpOutcome, LpProblem, LpStatus};
pub use mat::{dot, norm2, norm_inf, Mat};
pub use norms::{invert, matrix_norm, vector_norm, NormKind};
pub use svd::{singular_values, svd, SvdResult};
