//! Low-order quasidiffusion and second-moment solvers.

mod closures;
mod hybrid;
mod system;

pub use closures::{qd_closures, sm_closures, ClosureFlags, QdClosures, SmClosures};
pub use hybrid::{hybrid_realization, solve_with_tallies, Cost, CostMetric, HybridRealization, Method};
pub use system::{assemble_loqd, assemble_losm, solve_banded, BandMatrix, LinearSystem, LowOrderSolution};
