//! Deterministic reference solutions, exact closures and error norms.

mod quadrature;
pub mod report;
mod sn;
mod study;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use quadrature::{double_gauss, gauss_legendre, Quadrature};
pub use sn::{sn_solve, sn_solve_with_incident, AngularFlux, MAX_SWEEPS};
pub use study::{mse_study, plain_mc, single_level_study, MseRun, MseStudy, SingleLevelStudy};

use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::grid::{Grid, GridHierarchy};
use crate::lo::{qd_closures, sm_closures, QdClosures, SmClosures};
use crate::problem::SlabProblem;
use crate::scalar::Real;

/// One resolution of the extrapolation sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceStage {
    /// Discrete-ordinates cells per target cell.
    pub subcells: usize,
    pub n_angles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSettings {
    pub stages: [ReferenceStage; 3],
    pub quadrature: Quadrature,
    pub tol: f64,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        let s = |subcells, n_angles| ReferenceStage { subcells, n_angles };
        Self {
            stages: [s(8, 32), s(16, 64), s(32, 128)],
            quadrature: Quadrature::DoubleGauss,
            tol: 1e-12,
        }
    }
}

/// Extrapolated cell-average flux on a target grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReferenceSolution<T: Real> {
    pub length: T,
    pub cells: usize,
    pub phi: Vec<T>,
    /// `|φ^ex - φ_finest|` per cell.
    pub uncertainty: Vec<T>,
    /// Cells where extrapolation fell back to the finest value.
    pub fallback_cells: Vec<usize>,
    pub stages: Vec<ReferenceStage>,
    /// Registered functional values by name.
    pub functionals: BTreeMap<String, Vec<T>>,
}

/// `Δ²` extrapolation of `x0, x1, x2`. Returns the finest value and `false`
/// when the triple is not a contracting monotone sequence.
pub fn aitken<T: Real>(x0: T, x1: T, x2: T) -> (T, bool) {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let den = d2 - d1;
    if !(den.abs() > T::lit(1e-14) * x2.abs()) {
        return (x2, d1 == T::zero() && d2 == T::zero() || den == T::zero());
    }
    if d1 * d2 < T::zero() || d2.abs() >= d1.abs() {
        return (x2, false);
    }
    (x2 - d2 * d2 / den, true)
}

/// Volume average of `values` over groups of `per` cells.
pub fn volume_average<T: Real>(values: &[T], widths: &[T], per: usize) -> Vec<T> {
    values
        .chunks_exact(per)
        .zip(widths.chunks_exact(per))
        .map(|(v, w)| {
            let vol: T = w.iter().copied().sum();
            v.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>() / vol
        })
        .collect()
}

/// Three nested discrete-ordinates solves averaged onto `cells` equal cells
/// and extrapolated cell by cell.
pub fn aitken_reference<T: Real>(
    problem: &SlabProblem<T>,
    cells: usize,
    settings: &ReferenceSettings,
) -> Result<ReferenceSolution<T>> {
    GridHierarchy::single(problem, cells)?;
    let solves: Vec<Vec<T>> = settings
        .stages
        .par_iter()
        .map(|stage| {
            let fine = GridHierarchy::single(problem, cells * stage.subcells)?;
            let g = fine.level(0);
            let af = sn_solve(problem, g, settings.quadrature, stage.n_angles, T::lit(settings.tol))?;
            Ok(volume_average(&af.scalar_flux(), g.widths(), stage.subcells))
        })
        .collect::<Result<_>>()?;
    let mut phi = Vec::with_capacity(cells);
    let mut fallback_cells = Vec::new();
    for i in 0..cells {
        let (v, ok) = aitken(solves[0][i], solves[1][i], solves[2][i]);
        if !ok {
            fallback_cells.push(i);
        }
        phi.push(v);
    }
    let uncertainty = phi.iter().zip(&solves[2]).map(|(a, b)| (*a - *b).abs()).collect();
    Ok(ReferenceSolution {
        length: problem.length(),
        cells,
        phi,
        uncertainty,
        fallback_cells,
        stages: settings.stages.to_vec(),
        functionals: BTreeMap::new(),
    })
}

impl<T: Real> ReferenceSolution<T> {
    /// Cell widths of the target grid.
    pub fn widths(&self) -> Vec<T> {
        vec![self.length / T::from_count(self.cells); self.cells]
    }

    /// Evaluates a functional of the extrapolated flux. The reference grid
    /// must refine the hierarchy's coarsest grid.
    pub fn functional(&self, spec: &FunctionalSpec, hierarchy: &GridHierarchy<T>) -> Result<Vec<T>> {
        let base = hierarchy.base_cells();
        if self.cells % base != 0 {
            return Err(Error::config(format!(
                "reference on {} cells does not refine {base} coarse cells",
                self.cells
            )));
        }
        let per = self.cells / base;
        let dx = self.length / T::from_count(self.cells);
        Ok(spec
            .coarse_support(hierarchy)?
            .into_iter()
            .map(|(a, b)| self.phi[a * per..b * per].iter().map(|&p| p * dx).sum())
            .collect())
    }

    /// Evaluates and stores a functional under its display name.
    pub fn register(&mut self, spec: &FunctionalSpec, hierarchy: &GridHierarchy<T>) -> Result<Vec<T>> {
        let v = self.functional(spec, hierarchy)?;
        self.functionals.insert(spec.to_string(), v.clone());
        Ok(v)
    }

    /// Flux volume-averaged onto `cells` equal cells.
    pub fn averaged(&self, cells: usize) -> Result<Vec<T>> {
        if cells == 0 || self.cells % cells != 0 {
            return Err(Error::config(format!("{cells} cells do not nest in the reference grid")));
        }
        Ok(volume_average(&self.phi, &self.widths(), self.cells / cells))
    }
}

/// `E`, `B`, `H`, `W` evaluated from a discrete-ordinates solution whose grid
/// refines `grid`.
pub fn exact_closures<T: Real>(af: &AngularFlux<T>, grid: &Grid<T>) -> Result<(QdClosures<T>, SmClosures<T>)> {
    let m = af.moments(grid.cells(), grid.level())?;
    Ok((qd_closures(&m), sm_closures(&m, grid)))
}

/// `‖φ - φ^ex‖ / ‖φ^ex‖` in the cell-width-weighted `L_2` norm.
pub fn relative_l2<T: Real>(phi: &[T], exact: &[T], widths: &[T]) -> Result<T> {
    if phi.len() != exact.len() || phi.len() != widths.len() {
        return Err(Error::config(format!(
            "relative error of vectors with lengths {}, {} and {} widths",
            phi.len(),
            exact.len(),
            widths.len()
        )));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for ((&p, &e), &w) in phi.iter().zip(exact).zip(widths) {
        num += (p - e) * (p - e) * w;
        den += e * e * w;
    }
    if !(den > T::zero()) {
        return Err(Error::config("reference flux has zero norm"));
    }
    Ok((num / den).sqrt())
}
