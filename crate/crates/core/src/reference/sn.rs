//! Diamond-difference discrete ordinates with source iteration.

use serde::{Deserialize, Serialize};

use super::quadrature::Quadrature;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mc::{SurfaceMoments, TallyMoments};
use crate::problem::SlabProblem;
use crate::scalar::Real;

pub const MAX_SWEEPS: usize = 100_000;

/// Converged discrete-ordinates angular flux on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AngularFlux<T: Real> {
    pub mu: Vec<T>,
    pub weights: Vec<T>,
    pub widths: Vec<T>,
    /// Cell-average `ψ[m][i]`.
    pub cell: Vec<Vec<T>>,
    /// Edge values `ψ[m][i]`, `i = 0..=I`.
    pub edge: Vec<Vec<T>>,
    pub sweeps: usize,
}

impl<T: Real> AngularFlux<T> {
    pub fn cells(&self) -> usize {
        self.widths.len()
    }

    /// `∫ μ^r ψ dμ` averaged over cell `i`.
    pub fn cell_moment(&self, r: i32, i: usize) -> T {
        self.mu
            .iter()
            .zip(&self.weights)
            .zip(&self.cell)
            .map(|((&mu, &w), psi)| w * mu.powi(r) * psi[i])
            .sum()
    }

    pub fn scalar_flux(&self) -> Vec<T> {
        (0..self.cells()).map(|i| self.cell_moment(0, i)).collect()
    }

    /// Partial moments `∫ |μ|^r ψ dμ` over each half range at edge `e`.
    pub fn surface_moments(&self, e: usize) -> SurfaceMoments<T> {
        let mut s = SurfaceMoments::default();
        for ((&mu, &w), psi) in self.mu.iter().zip(&self.weights).zip(&self.edge) {
            let a = mu.abs();
            let half = if mu > T::zero() { &mut s.plus } else { &mut s.minus };
            for (r, v) in half.iter_mut().enumerate() {
                *v += w * a.powi(r as i32) * psi[e];
            }
        }
        s
    }

    /// The angular moments a converged tally on a grid of `cells` equal
    /// cells would estimate: `T^[r]_i = ∫_{τ_i} ∫ μ^r ψ`, boundary `S^[r]±`.
    pub fn moments(&self, cells: usize, level: usize) -> Result<TallyMoments<T>> {
        if cells == 0 || self.cells() % cells != 0 {
            return Err(Error::config(format!(
                "{} discrete-ordinates cells do not nest in {cells} cells",
                self.cells()
            )));
        }
        let per = self.cells() / cells;
        let track = std::array::from_fn(|r| {
            (0..cells)
                .map(|i| {
                    (i * per..(i + 1) * per)
                        .map(|j| self.cell_moment(r as i32, j) * self.widths[j])
                        .sum()
                })
                .collect()
        });
        Ok(TallyMoments {
            level,
            track,
            left: self.surface_moments(0),
            right: self.surface_moments(self.cells()),
            histories: 0,
        })
    }
}

/// Solves with the problem's isotropic incident fluxes.
pub fn sn_solve<T: Real>(
    problem: &SlabProblem<T>,
    grid: &Grid<T>,
    quadrature: Quadrature,
    n_angles: usize,
    tol: T,
) -> Result<AngularFlux<T>> {
    let two = T::lit(2.0);
    let (left, right) = (problem.left().phi_in / two, problem.right().phi_in / two);
    sn_solve_with_incident(grid, quadrature, n_angles, tol, &vec![left; n_angles], &vec![right; n_angles])
}

/// Solves with incident `ψ` given per quadrature direction (entries for
/// outgoing directions are ignored).
pub fn sn_solve_with_incident<T: Real>(
    grid: &Grid<T>,
    quadrature: Quadrature,
    n_angles: usize,
    tol: T,
    psi_left: &[T],
    psi_right: &[T],
) -> Result<AngularFlux<T>> {
    if n_angles < 2 || n_angles % 2 != 0 {
        return Err(Error::config(format!("angular order must be even, got {n_angles}")));
    }
    if !(tol > T::zero()) {
        return Err(Error::config("source iteration tolerance must be positive"));
    }
    if psi_left.len() != n_angles || psi_right.len() != n_angles {
        return Err(Error::config("incident flux must have one entry per direction"));
    }
    let (mu, weights) = quadrature.rule::<T>(n_angles)?;
    let cells = grid.cells();
    let sigma_t: Vec<T> = grid.materials().iter().map(|m| m.sigma_t).collect();
    let sigma_s: Vec<T> = grid.materials().iter().map(|m| m.sigma_s).collect();
    let q: Vec<T> = grid.materials().iter().map(|m| m.q).collect();
    let c_max = grid
        .materials()
        .iter()
        .map(|m| m.scattering_ratio())
        .fold(T::zero(), T::max);
    let threshold = tol * (T::one() - c_max).max(T::lit(1e-3));
    let half = T::lit(0.5);

    let mut phi = vec![T::zero(); cells];
    let mut cell = vec![vec![T::zero(); cells]; n_angles];
    let mut edge = vec![vec![T::zero(); cells + 1]; n_angles];
    let mut last_diff = T::zero();
    let mut ratio = T::zero();
    for sweep in 1..=MAX_SWEEPS {
        let src: Vec<T> = (0..cells).map(|i| (sigma_s[i] * phi[i] + q[i]) * half).collect();
        for m in 0..n_angles {
            let a = mu[m].abs();
            let (psi_c, psi_e) = (&mut cell[m], &mut edge[m]);
            let mut step = |i: usize, psi_in: T| -> Result<T> {
                let k = a / grid.width(i);
                let st = sigma_t[i] * half;
                let out = (src[i] + (k - st) * psi_in) / (k + st);
                if out < T::zero() {
                    return Err(Error::NegativeFlux {
                        direction: m,
                        cell: i,
                        value: out.as_f64(),
                    });
                }
                psi_c[i] = (psi_in + out) * half;
                Ok(out)
            };
            if mu[m] > T::zero() {
                let mut p = psi_left[m];
                psi_e[0] = p;
                for i in 0..cells {
                    p = step(i, p)?;
                    psi_e[i + 1] = p;
                }
            } else {
                let mut p = psi_right[m];
                psi_e[cells] = p;
                for i in (0..cells).rev() {
                    p = step(i, p)?;
                    psi_e[i] = p;
                }
            }
        }
        let next: Vec<T> = (0..cells)
            .map(|i| (0..n_angles).map(|m| weights[m] * cell[m][i]).sum())
            .collect();
        let diff = next
            .iter()
            .zip(&phi)
            .fold(T::zero(), |d, (a, b)| d.max((*a - *b).abs()));
        phi = next;
        if last_diff > T::zero() {
            ratio = diff / last_diff;
        }
        last_diff = diff;
        if diff < threshold {
            return Ok(AngularFlux {
                mu,
                weights,
                widths: grid.widths().to_vec(),
                cell,
                edge,
                sweeps: sweep,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        spectral_radius: ratio.as_f64(),
    })
}
