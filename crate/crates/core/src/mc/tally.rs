//! Track-length and surface-crossing tallies.
//!
//! Scores are accumulated as exact integers: particle positions live on an
//! integer lattice shared by every level of a hierarchy, and each score is a
//! quantized per-segment factor times an integer lattice extent. Integer
//! addition is associative, so
//!
//! * merging partial tallies gives the same bits under any schedule, and
//! * summing the child cells of a fine tally reproduces, bit for bit, the
//!   tally the same histories would have scored directly on the coarse grid.

use std::hash::{Hash, Hasher};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::scalar::Real;

/// Binary digits kept by the fixed-point score factors.
pub(crate) const SCORE_FRACTION_BITS: i32 = 36;
const SCORE_SCALE: f64 = (1u64 << SCORE_FRACTION_BITS) as f64;

#[inline]
pub(crate) fn quantize(factor: f64) -> i128 {
    (factor * SCORE_SCALE).round() as i128
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Raw accumulators of one ensemble on one grid level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallySet {
    level: usize,
    /// Lattice units per cell.
    cell_size: i64,
    /// `track[r][i]`: Σ quantized `w μ^r / |μ|` × lattice extent.
    track: [Vec<i128>; 3],
    /// `surface[side][r][sign]`, sign 0 for `μ > 0`, 1 for `μ < 0`.
    surface: [[[i128; 2]; 3]; 2],
    histories: u64,
    events: u64,
    /// Physical length of one lattice unit.
    unit: f64,
    total_source: f64,
}

impl TallySet {
    pub(crate) fn empty(level: usize, cells: usize, cell_size: i64, unit: f64, total_source: f64) -> Self {
        Self {
            level,
            cell_size,
            track: [vec![0; cells], vec![0; cells], vec![0; cells]],
            surface: [[[0; 2]; 3]; 2],
            histories: 0,
            events: 0,
            unit,
            total_source,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cells(&self) -> usize {
        self.track[0].len()
    }

    /// Number of histories `K` accumulated.
    pub fn histories(&self) -> u64 {
        self.histories
    }

    /// Random-walk events (collisions, cell scores, surface crossings).
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn total_source(&self) -> f64 {
        self.total_source
    }

    pub(crate) fn add_history(&mut self, events: u64) {
        self.histories += 1;
        self.events += events;
    }

    /// Scores the flight from lattice position `from` to `to` (either order)
    /// with the three quantized factors `w μ^r / |μ|`. Returns the number of
    /// cells touched.
    #[inline]
    pub(crate) fn score_track(&mut self, from: i64, to: i64, factors: &[i128; 3]) -> u64 {
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        if lo == hi {
            return 0;
        }
        let cs = self.cell_size;
        let first = (lo / cs) as usize;
        let last = ((hi - 1) / cs) as usize;
        for i in first..=last {
            let a = lo.max(i as i64 * cs);
            let b = hi.min((i as i64 + 1) * cs);
            let extent = (b - a) as i128;
            self.track[0][i] += factors[0] * extent;
            self.track[1][i] += factors[1] * extent;
            self.track[2][i] += factors[2] * extent;
        }
        (last - first + 1) as u64
    }

    #[inline]
    pub(crate) fn score_surface(&mut self, side: Side, mu: f64, factors: &[i128; 3]) {
        let s = match side {
            Side::Left => 0,
            Side::Right => 1,
        };
        let sign = usize::from(mu < 0.0);
        for (r, f) in factors.iter().enumerate() {
            self.surface[s][r][sign] += f;
        }
    }

    /// Adds another ensemble tallied on the same grid.
    pub fn merge(&mut self, other: &TallySet) -> Result<()> {
        if self.level != other.level || self.cells() != other.cells() || self.cell_size != other.cell_size {
            return Err(Error::internal("merging tallies from different grids"));
        }
        for r in 0..3 {
            for (a, b) in self.track[r].iter_mut().zip(&other.track[r]) {
                *a += b;
            }
        }
        for s in 0..2 {
            for r in 0..3 {
                for k in 0..2 {
                    self.surface[s][r][k] += other.surface[s][r][k];
                }
            }
        }
        self.histories += other.histories;
        self.events += other.events;
        Ok(())
    }

    /// Sums groups of `factor` consecutive cells: the tally on the coarser
    /// grid `level`. Surface accumulators, `K` and normalization carry over.
    pub fn restrict(&self, factor: usize, level: usize) -> Result<TallySet> {
        if factor < 1 || self.cells() % factor != 0 {
            return Err(Error::internal(format!(
                "cannot restrict {} cells on level {} by {factor}",
                self.cells(),
                self.level
            )));
        }
        let track = std::array::from_fn(|r| {
            self.track[r]
                .chunks_exact(factor)
                .map(|c| c.iter().sum())
                .collect::<Vec<i128>>()
        });
        Ok(TallySet {
            level,
            cell_size: self.cell_size * factor as i64,
            track,
            surface: self.surface,
            histories: self.histories,
            events: self.events,
            unit: self.unit,
            total_source: self.total_source,
        })
    }

    /// Fingerprint of the quantities restriction must preserve: per-moment
    /// totals, surface accumulators and `K`. Tallies of the same ensemble on
    /// different levels share it.
    pub fn lineage(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for r in 0..3 {
            self.track[r].iter().sum::<i128>().hash(&mut h);
        }
        self.surface.hash(&mut h);
        self.histories.hash(&mut h);
        h.finish()
    }

    /// Normalized moments: `T^[r]_i` in particle·cm per unit source and the
    /// partial surface moments `S^[r]±` at both faces.
    pub fn moments<T: Real>(&self) -> TallyMoments<T> {
        let k = self.histories.max(1) as f64;
        let norm_surface = self.total_source / k / SCORE_SCALE;
        let norm_track = norm_surface * self.unit;
        let conv = |v: i128, n: f64| T::lit(v as f64 * n);
        let track = std::array::from_fn(|r| self.track[r].iter().map(|&v| conv(v, norm_track)).collect());
        let side = |s: usize| SurfaceMoments {
            plus: std::array::from_fn(|r| conv(self.surface[s][r][0], norm_surface)),
            minus: std::array::from_fn(|r| conv(self.surface[s][r][1], norm_surface)),
        };
        TallyMoments {
            level: self.level,
            track,
            left: side(0),
            right: side(1),
            histories: self.histories,
        }
    }
}

/// Partial angular moments `S^[r]±` at one face.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SurfaceMoments<T: Real> {
    /// `∫_{μ>0} |μ|^r ψ dμ`, r = 0, 1, 2.
    pub plus: [T; 3],
    /// `∫_{μ<0} |μ|^r ψ dμ`, r = 0, 1, 2.
    pub minus: [T; 3],
}

impl<T: Real> SurfaceMoments<T> {
    /// Full-range moment `∫ μ^r ψ dμ = S^+ + (-1)^r S^-`.
    pub fn full(&self, r: usize) -> T {
        if r % 2 == 0 {
            self.plus[r] + self.minus[r]
        } else {
            self.plus[r] - self.minus[r]
        }
    }

    /// Absolute moment `∫ |μ|^r ψ dμ = S^+ + S^-`.
    pub fn absolute(&self, r: usize) -> T {
        self.plus[r] + self.minus[r]
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            plus: self.plus.map(|v| v * s),
            minus: self.minus.map(|v| v * s),
        }
    }
}

/// Normalized angular-moment tallies on one grid, from Monte Carlo or from a
/// deterministic angular flux.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TallyMoments<T: Real> {
    pub level: usize,
    /// `T^[r]_i ≈ ∫_{τ_i} ∫ μ^r ψ dμ dx`.
    pub track: [Vec<T>; 3],
    pub left: SurfaceMoments<T>,
    pub right: SurfaceMoments<T>,
    /// Histories behind the estimate (0 for deterministic moments).
    pub histories: u64,
}

impl<T: Real> TallyMoments<T> {
    pub fn cells(&self) -> usize {
        self.track[0].len()
    }

    /// Cell-average scalar flux estimate `T^[0]_i / Δx_i`.
    pub fn scalar_flux(&self, grid: &Grid<T>) -> Vec<T> {
        self.track[0]
            .iter()
            .zip(grid.widths())
            .map(|(&t, &dx)| t / dx)
            .collect()
    }

    /// Floating-point restriction by summing `factor` consecutive cells.
    pub fn restrict(&self, factor: usize, level: usize) -> Result<Self> {
        if factor == 0 || self.cells() % factor != 0 {
            return Err(Error::internal(format!("cannot restrict {} cells by {factor}", self.cells())));
        }
        Ok(Self {
            level,
            track: std::array::from_fn(|r| {
                self.track[r]
                    .chunks_exact(factor)
                    .map(|c| c.iter().copied().sum())
                    .collect()
            }),
            left: self.left,
            right: self.right,
            histories: self.histories,
        })
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            level: self.level,
            track: std::array::from_fn(|r| self.track[r].iter().map(|&v| v * s).collect()),
            left: self.left.scaled(s),
            right: self.right.scaled(s),
            histories: self.histories,
        }
    }

    /// Debug dump, columns `level,cell,T0,T1,T2` (cells 1-based).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level,cell,T0,T1,T2")?;
        for i in 0..self.cells() {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e}",
                self.level,
                i + 1,
                self.track[0][i],
                self.track[1][i],
                self.track[2][i]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(cells: usize, t0: &[i128]) -> TallySet {
        let mut t = TallySet::empty(1, cells, 4, 0.25, 1.0);
        t.track[0].copy_from_slice(t0);
        t.histories = 1;
        t
    }

    #[test]
    fn restriction_is_additive() {
        let fine = set_with(4, &[1, 2, 3, 4]);
        let coarse = fine.restrict(2, 0).unwrap();
        assert_eq!(coarse.track[0], vec![3, 7]);
        assert_eq!(coarse.level(), 0);
        assert_eq!(coarse.lineage(), fine.lineage());
    }

    #[test]
    fn restriction_composes() {
        let mut fine = TallySet::empty(2, 8, 1, 0.125, 1.0);
        fine.level = 2;
        for (i, v) in fine.track[2].iter_mut().enumerate() {
            *v = (i * i) as i128;
        }
        let twice = fine.restrict(2, 1).unwrap().restrict(2, 0).unwrap();
        let once = fine.restrict(4, 0).unwrap();
        assert_eq!(twice.track, once.track);
        assert_eq!(twice.cell_size, once.cell_size);
    }

    #[test]
    fn track_scores_split_by_cell() {
        // cell size 4 lattice units, segment covering [2, 9)
        let mut t = TallySet::empty(0, 4, 4, 1.0, 1.0);
        let f = [10, 20, 30];
        let touched = t.score_track(9, 2, &f);
        assert_eq!(touched, 3);
        assert_eq!(t.track[0], vec![20, 40, 10, 0]);
        assert_eq!(t.track[2], vec![60, 120, 30, 0]);
    }

    #[test]
    fn surface_full_and_absolute_moments() {
        let s = SurfaceMoments {
            plus: [1.0f64, 0.5, 0.3],
            minus: [2.0, 0.7, 0.4],
        };
        assert_eq!(s.full(0), 3.0);
        assert!((s.full(1) + 0.2).abs() < 1e-15);
        assert!((s.full(2) - 0.7).abs() < 1e-15);
        assert!((s.absolute(1) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_merge_fails() {
        let mut a = TallySet::empty(0, 4, 4, 1.0, 1.0);
        let b = TallySet::empty(0, 8, 2, 1.0, 1.0);
        assert!(a.merge(&b).is_err());
    }
}
