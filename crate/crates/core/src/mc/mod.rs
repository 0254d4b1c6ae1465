//! Monte Carlo particle transport and tallies.

mod tally;
mod transport;

pub use tally::{Side, SurfaceMoments, TallyMoments, TallySet};
pub use transport::{HistoryStats, Particle, Transport, WalkSettings};
