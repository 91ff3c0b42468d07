//! Discrete differential operators on the MAC grid, the Leray projection and
//! the Sobolev norms used by the stability experiments.

mod calculus;
mod cg;
mod leray;
mod norms;
pub mod stencil;

pub use calculus::{divergence, gradient, laplacian, rot, rot_rot, rot_scalar};
pub use cg::{conjugate_gradient, CgOutcome, SolverConfig};
pub use leray::{l2_norm, leray_project, solve_neumann_poisson, Projection};
pub use norms::{data_norm, sobolev_norm, source_norm, spatial_sq, EvalMode, NormInput, NormRegion, NormSpec, SpaceNorm};
