//! Functionals `F_A = ∫_A φ dx` over regions aligned with the coarsest grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionalSpec {
    /// Integral over the whole slab, `F_D`.
    WholeDomain,
    /// Integral over coarse cell `τ_{i,0}` (1-based index, as in the tables).
    CoarseCell(usize),
    /// Vector `{F_{τ_{i,0}}}` over every coarse cell.
    AllCoarseCells,
    /// Integral over `[lo, hi]`; both ends must be coarse-grid edges.
    Interval { lo: f64, hi: f64 },
}

impl FunctionalSpec {
    /// Number of scalar components.
    pub fn components<T: Real>(&self, hierarchy: &GridHierarchy<T>) -> usize {
        match self {
            Self::AllCoarseCells => hierarchy.base_cells(),
            _ => 1,
        }
    }

    pub fn is_vector(&self) -> bool {
        matches!(self, Self::AllCoarseCells)
    }

    /// Coarse-cell ranges `[start, end)` integrated by each component.
    pub fn coarse_support<T: Real>(&self, hierarchy: &GridHierarchy<T>) -> Result<Vec<(usize, usize)>> {
        let n0 = hierarchy.base_cells();
        match *self {
            Self::WholeDomain => Ok(vec![(0, n0)]),
            Self::CoarseCell(i) => {
                if i == 0 || i > n0 {
                    return Err(Error::config(format!("coarse cell index {i} outside 1..={n0}")));
                }
                Ok(vec![(i - 1, i)])
            }
            Self::AllCoarseCells => Ok((0..n0).map(|i| (i, i + 1)).collect()),
            Self::Interval { lo, hi } => {
                let edges = hierarchy.level(0).edges();
                let find = |x: f64| {
                    edges
                        .iter()
                        .position(|e| (e.as_f64() - x).abs() <= 1e-12 * (1.0 + x.abs()))
                        .ok_or_else(|| Error::config(format!("interval end {x} is not a coarse-grid edge")))
                };
                let (a, b) = (find(lo)?, find(hi)?);
                if a >= b {
                    return Err(Error::config(format!("empty interval [{lo}, {hi}]")));
                }
                Ok(vec![(a, b)])
            }
        }
    }

    /// Evaluates every component on level `level` from cell-average fluxes.
    pub fn evaluate<T: Real>(&self, hierarchy: &GridHierarchy<T>, level: usize, phi: &[T]) -> Result<Vec<T>> {
        let grid = hierarchy.level(level);
        if phi.len() != grid.cells() {
            return Err(Error::internal(format!(
                "flux vector of length {} on level {level} with {} cells",
                phi.len(),
                grid.cells()
            )));
        }
        let per = hierarchy.children_per_cell(0, level);
        Ok(self
            .coarse_support(hierarchy)?
            .into_iter()
            .map(|(a, b)| {
                (a * per..b * per)
                    .map(|i| phi[i] * grid.width(i))
                    .sum()
            })
            .collect())
    }
}

impl fmt::Display for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::WholeDomain => write!(f, "domain"),
            Self::CoarseCell(i) => write!(f, "cell:{i}"),
            Self::AllCoarseCells => write!(f, "all-cells"),
            Self::Interval { lo, hi } => write!(f, "interval:{lo}:{hi}"),
        }
    }
}

impl FromStr for FunctionalSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::config(format!("unrecognized functional `{s}`"));
        match parts.as_slice() {
            ["domain"] => Ok(Self::WholeDomain),
            ["all-cells"] => Ok(Self::AllCoarseCells),
            ["cell", i] => i.parse().map(Self::CoarseCell).map_err(|_| bad()),
            ["interval", lo, hi] => Ok(Self::Interval {
                lo: lo.parse().map_err(|_| bad())?,
                hi: hi.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}
