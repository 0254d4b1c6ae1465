//! One hybrid realization: Monte Carlo tallies, closures, low-order solve.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::closures::{qd_closures, sm_closures, ClosureFlags};
use super::system::{assemble_loqd, assemble_losm, solve_banded, LowOrderSolution};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridHierarchy};
use crate::mc::{TallyMoments, Transport};
use crate::problem::SlabProblem;
use crate::rng::StreamKey;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Hybrid quasidiffusion.
    Hqd,
    /// Hybrid second-moment method.
    Hsm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Hqd => "hqd",
            Self::Hsm => "hsm",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hqd" => Ok(Self::Hqd),
            "hsm" => Ok(Self::Hsm),
            _ => Err(Error::config(format!("unknown method `{s}` (expected hqd or hsm)"))),
        }
    }
}

/// Computational cost of a realization.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cost {
    pub seconds: f64,
    /// Random-walk events; deterministic for a given seed.
    pub events: u64,
}

/// Which cost feeds the sample-size optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMetric {
    /// Deterministic random-walk event count.
    #[default]
    Events,
    /// Wall-clock seconds.
    Seconds,
}

impl FromStr for CostMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "events" => Ok(Self::Events),
            "seconds" => Ok(Self::Seconds),
            _ => Err(Error::config(format!("unknown cost metric `{s}`"))),
        }
    }
}

impl std::ops::AddAssign for Cost {
    fn add_assign(&mut self, rhs: Self) {
        self.seconds += rhs.seconds;
        self.events += rhs.events;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HybridRealization<T: Real> {
    /// Solution on the grid the particles were tallied on.
    pub fine: LowOrderSolution<T>,
    /// Solution on the next coarser grid from the restricted tallies.
    pub coarse: Option<LowOrderSolution<T>>,
    pub cost: Cost,
    pub flags: ClosureFlags,
}

/// Closures from `moments`, then the low-order solve on `grid`.
pub fn solve_with_tallies<T: Real>(
    problem: &SlabProblem<T>,
    grid: &Grid<T>,
    method: Method,
    moments: &TallyMoments<T>,
) -> Result<(LowOrderSolution<T>, ClosureFlags)> {
    let (sys, flags) = match method {
        Method::Hqd => {
            let c = qd_closures(moments);
            (assemble_loqd(problem, grid, &c)?, c.flags)
        }
        Method::Hsm => {
            let c = sm_closures(moments, grid);
            (assemble_losm(problem, grid, &c)?, c.flags)
        }
    };
    Ok((solve_banded(&sys)?, flags))
}

/// Runs `histories` histories tallied on level `level`, solves there and,
/// with `coarse`, also on level `level - 1` from the restricted tallies.
#[allow(clippy::too_many_arguments)]
pub fn hybrid_realization<T: Real>(
    problem: &SlabProblem<T>,
    hierarchy: &GridHierarchy<T>,
    transport: &Transport,
    method: Method,
    level: usize,
    histories: u64,
    key: StreamKey,
    coarse: bool,
) -> Result<HybridRealization<T>> {
    if histories == 0 {
        return Err(Error::config("a realization needs at least one history"));
    }
    let start = Instant::now();
    let (tallies, _) = transport.run_ensemble(level, histories, key)?;
    let (fine, mut flags) = solve_with_tallies(problem, hierarchy.level(level), method, &tallies.moments())?;
    let coarse = if coarse && level > 0 {
        let restricted = tallies.restrict(hierarchy.refinement(), level - 1)?;
        if restricted.lineage() != tallies.lineage() {
            return Err(Error::internal("restricted tallies lost track of their ensemble"));
        }
        let (sol, f) = solve_with_tallies(problem, hierarchy.level(level - 1), method, &restricted.moments())?;
        flags.absorb(&f);
        Some(sol)
    } else {
        None
    };
    Ok(HybridRealization {
        fine,
        coarse,
        cost: Cost {
            seconds: start.elapsed().as_secs_f64(),
            events: tallies.events(),
        },
        flags,
    })
}
