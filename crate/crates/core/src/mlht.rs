//! Multilevel hybrid estimator: level-0 realizations plus fine/coarse
//! corrections from shared particle histories, assembled by telescoping.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::grid::GridHierarchy;
use crate::lo::{hybrid_realization, solve_with_tallies, ClosureFlags, Cost, CostMetric, LowOrderSolution, Method};
use crate::mc::Transport;
use crate::problem::SlabProblem;
use crate::reference::AngularFlux;
use crate::rng::StreamKey;
use crate::scalar::Real;
use crate::stats::{self, Welford};

/// Where realizations take their closures from.
#[derive(Debug, Clone, Copy)]
pub enum ClosureSource<'a, T: Real> {
    /// Monte Carlo tallies with `histories[ℓ]` histories per realization.
    MonteCarlo {
        transport: &'a Transport,
        histories: &'a [u64],
    },
    /// Deterministic closures of a discrete-ordinates solution whose grid
    /// refines every level.
    Exact(&'a AngularFlux<T>),
}

/// Piecewise-constant injection of a cell vector from level `from` to `to`.
pub fn prolongate<T: Real>(v: &[T], hierarchy: &GridHierarchy<T>, from: usize, to: usize) -> Result<Vec<T>> {
    if to < from || to > hierarchy.finest_level() || v.len() != hierarchy.level(from).cells() {
        return Err(Error::internal(format!(
            "cannot prolongate {} values from level {from} to level {to}",
            v.len()
        )));
    }
    let per = hierarchy.children_per_cell(from, to);
    Ok(v.iter().flat_map(|&x| std::iter::repeat_n(x, per)).collect())
}

/// Volume-weighted average of a cell vector from level `from` down to `to`.
pub fn restrict_average<T: Real>(v: &[T], hierarchy: &GridHierarchy<T>, from: usize, to: usize) -> Result<Vec<T>> {
    if to > from || v.len() != hierarchy.level(from).cells() {
        return Err(Error::internal(format!(
            "cannot restrict {} values from level {from} to level {to}",
            v.len()
        )));
    }
    let per = hierarchy.children_per_cell(to, from);
    Ok(crate::reference::volume_average(v, hierarchy.level(from).widths(), per))
}

/// Output of one realization on one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization<T: Real> {
    pub level: usize,
    pub fine: LowOrderSolution<T>,
    pub coarse: Option<LowOrderSolution<T>>,
    /// `φ_{n,ℓ} - I φ_{n,ℓ-1}` on `G_ℓ` (`φ_{n,0}` on level 0).
    pub dphi: Vec<T>,
    /// Functional of the fine solution, per component.
    pub f_fine: Vec<T>,
    /// Functional of the coarse solution, evaluated on the coarse grid.
    pub f_coarse: Option<Vec<T>>,
    /// `F_ℓ - F_{ℓ-1}` (`F_0` on level 0).
    pub df: Vec<T>,
    pub cost: Cost,
    pub flags: ClosureFlags,
}

/// Samples and running statistics of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LevelEstimate<T: Real> {
    pub level: usize,
    pub cells: usize,
    /// Histories per realization (0 in exact-closure mode).
    pub histories: u64,
    pub dphi: Welford<T>,
    /// `ΔF_ℓ(ω_n)`, `[n][component]`.
    pub df: Vec<Vec<T>>,
    /// `F_ℓ(ω_n)` on this level's grid.
    pub f_fine: Vec<Vec<T>>,
    pub seconds: Vec<f64>,
    pub events: Vec<u64>,
    /// Realizations with at least one fallback closure.
    pub flagged: usize,
}

impl<T: Real> LevelEstimate<T> {
    fn new(level: usize, cells: usize, histories: u64) -> Self {
        Self {
            level,
            cells,
            histories,
            dphi: Welford::new(cells),
            df: Vec::new(),
            f_fine: Vec::new(),
            seconds: Vec::new(),
            events: Vec::new(),
            flagged: 0,
        }
    }

    fn push(&mut self, r: Realization<T>) {
        self.dphi.push(&r.dphi);
        self.df.push(r.df);
        self.f_fine.push(r.f_fine);
        self.seconds.push(r.cost.seconds);
        self.events.push(r.cost.events);
        self.flagged += usize::from(r.flags.any());
    }

    /// `N_ℓ`.
    pub fn samples(&self) -> usize {
        self.df.len()
    }

    pub fn components(&self) -> usize {
        self.df.first().map_or(0, Vec::len)
    }

    fn column(rows: &[Vec<T>], k: usize) -> Vec<T> {
        rows.iter().map(|r| r[k]).collect()
    }

    pub fn df_samples(&self, component: usize) -> Vec<T> {
        Self::column(&self.df, component)
    }

    /// `⟨ΔF_ℓ⟩` per component.
    pub fn mean_df(&self) -> Vec<T> {
        (0..self.components()).map(|k| stats::mean(&self.df_samples(k))).collect()
    }

    /// Per-sample variance `V[ΔF_ℓ]` per component.
    pub fn var_df(&self) -> Vec<T> {
        (0..self.components()).map(|k| stats::variance(&self.df_samples(k))).collect()
    }

    /// `⟨F_ℓ⟩` of the single-grid solutions on this level.
    pub fn mean_f(&self) -> Vec<T> {
        (0..self.components())
            .map(|k| stats::mean(&Self::column(&self.f_fine, k)))
            .collect()
    }

    pub fn var_f(&self) -> Vec<T> {
        (0..self.components())
            .map(|k| stats::variance(&Self::column(&self.f_fine, k)))
            .collect()
    }

    pub fn kurtosis(&self) -> Vec<Option<T>> {
        (0..self.components()).map(|k| stats::kurtosis(&self.df_samples(k))).collect()
    }

    /// Mean cost per realization in the chosen metric.
    pub fn cost(&self, metric: CostMetric) -> f64 {
        let n = self.samples().max(1) as f64;
        match metric {
            CostMetric::Events => self.events.iter().sum::<u64>() as f64 / n,
            CostMetric::Seconds => self.seconds.iter().sum::<f64>() / n,
        }
    }

    pub fn mean_dphi(&self) -> &[T] {
        self.dphi.mean()
    }
}

/// Level estimates and the assembled flux on every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MultilevelSolution<T: Real> {
    pub method: Method,
    pub levels: Vec<LevelEstimate<T>>,
    /// Partial sums `⟨φ_ℓ⟩` on `G_ℓ`.
    pub partial: Vec<Vec<T>>,
}

impl<T: Real> MultilevelSolution<T> {
    /// `⟨φ_L⟩` on the finest grid.
    pub fn flux(&self) -> &[T] {
        self.partial.last().expect("at least one level")
    }

    /// Long-format per-cell table: `level,cell,x,mean_dphi,partial_sum`.
    pub fn write_flux_csv<W: Write>(&self, hierarchy: &GridHierarchy<T>, mut out: W) -> std::io::Result<()> {
        writeln!(out, "level,cell,x,mean_dphi,partial_sum")?;
        for (l, est) in self.levels.iter().enumerate() {
            let centers = hierarchy.level(l).centers();
            for i in 0..est.cells {
                writeln!(
                    out,
                    "{l},{},{:e},{:e},{:e}",
                    i + 1,
                    centers[i],
                    est.mean_dphi()[i],
                    self.partial[l][i]
                )?;
            }
        }
        Ok(())
    }
}

/// Telescoping sum `⟨φ_ℓ⟩ = I ⟨φ_{ℓ-1}⟩ + ⟨Δφ_ℓ⟩` over all levels.
pub fn assemble_solution<T: Real>(
    method: Method,
    levels: Vec<LevelEstimate<T>>,
    hierarchy: &GridHierarchy<T>,
) -> Result<MultilevelSolution<T>> {
    if levels.len() != hierarchy.finest_level() + 1 || levels.iter().enumerate().any(|(l, e)| e.level != l) {
        return Err(Error::internal(format!(
            "need estimates for levels 0..={}, got {}",
            hierarchy.finest_level(),
            levels.len()
        )));
    }
    let mut partial: Vec<Vec<T>> = Vec::with_capacity(levels.len());
    for (l, est) in levels.iter().enumerate() {
        let next = if l == 0 {
            est.mean_dphi().to_vec()
        } else {
            prolongate(&partial[l - 1], hierarchy, l - 1, l)?
                .into_iter()
                .zip(est.mean_dphi())
                .map(|(a, &b)| a + b)
                .collect()
        };
        partial.push(next);
    }
    Ok(MultilevelSolution {
        method,
        levels,
        partial,
    })
}

/// Everything needed to draw realizations on any level.
#[derive(Debug, Clone, Copy)]
pub struct Mlht<'a, T: Real> {
    pub problem: &'a SlabProblem<T>,
    pub hierarchy: &'a GridHierarchy<T>,
    pub source: ClosureSource<'a, T>,
    pub method: Method,
    pub functional: FunctionalSpec,
    pub seed: u64,
    /// Separates random streams of studies sharing a seed.
    pub tag: u64,
}

impl<'a, T: Real> Mlht<'a, T> {
    fn histories(&self, level: usize) -> u64 {
        match self.source {
            ClosureSource::MonteCarlo { histories, .. } => histories[level.min(histories.len() - 1)],
            ClosureSource::Exact(_) => 0,
        }
    }

    /// Realization `n` of level `level`.
    pub fn realization(&self, level: usize, n: u64) -> Result<Realization<T>> {
        let h = self.hierarchy;
        let (fine, coarse, cost, flags) = match self.source {
            ClosureSource::MonteCarlo { transport, .. } => {
                let key = StreamKey::new(self.seed, level, n).with_tag(self.tag);
                let r = hybrid_realization(
                    self.problem,
                    h,
                    transport,
                    self.method,
                    level,
                    self.histories(level),
                    key,
                    level > 0,
                )?;
                (r.fine, r.coarse, r.cost, r.flags)
            }
            ClosureSource::Exact(af) => {
                let start = Instant::now();
                let solve = |l: usize| {
                    let g = h.level(l);
                    solve_with_tallies(self.problem, g, self.method, &af.moments(g.cells(), l)?)
                };
                let (fine, mut flags) = solve(level)?;
                let coarse = if level > 0 {
                    let (c, f) = solve(level - 1)?;
                    flags.absorb(&f);
                    Some(c)
                } else {
                    None
                };
                let cost = Cost {
                    seconds: start.elapsed().as_secs_f64(),
                    events: 0,
                };
                (fine, coarse, cost, flags)
            }
        };
        let f_fine = self.functional.evaluate(h, level, &fine.phi)?;
        let (dphi, f_coarse, df) = match &coarse {
            Some(c) => {
                let up = prolongate(&c.phi, h, level - 1, level)?;
                let dphi = fine.phi.iter().zip(&up).map(|(&a, &b)| a - b).collect();
                let fc = self.functional.evaluate(h, level - 1, &c.phi)?;
                let df = f_fine.iter().zip(&fc).map(|(&a, &b)| a - b).collect();
                (dphi, Some(fc), df)
            }
            None => (fine.phi.clone(), None, f_fine.clone()),
        };
        Ok(Realization {
            level,
            fine,
            coarse,
            dphi,
            f_fine,
            f_coarse,
            df,
            cost,
            flags,
        })
    }

    pub fn empty_level(&self, level: usize) -> LevelEstimate<T> {
        LevelEstimate::new(level, self.hierarchy.level(level).cells(), self.histories(level))
    }

    /// Adds `extra` realizations to `est`, continuing its realization indices.
    pub fn extend_level(&self, est: &mut LevelEstimate<T>, extra: usize) -> Result<()> {
        let start = est.samples() as u64;
        let batch: Vec<Realization<T>> = (start..start + extra as u64)
            .into_par_iter()
            .map(|n| self.realization(est.level, n))
            .collect::<Result<_>>()?;
        for r in batch {
            est.push(r);
        }
        Ok(())
    }

    /// `N_ℓ` realizations of level `level`.
    pub fn run_level(&self, level: usize, count: usize) -> Result<LevelEstimate<T>> {
        if count == 0 {
            return Err(Error::config(format!("level {level} needs at least one realization")));
        }
        let mut est = self.empty_level(level);
        self.extend_level(&mut est, count)?;
        Ok(est)
    }

    /// Fixed sample counts on every level, assembled.
    pub fn run(&self, counts: &[usize]) -> Result<MultilevelSolution<T>> {
        if counts.len() != self.hierarchy.finest_level() + 1 {
            return Err(Error::config(format!(
                "{} sample counts for {} levels",
                counts.len(),
                self.hierarchy.finest_level() + 1
            )));
        }
        let levels = counts
            .iter()
            .enumerate()
            .map(|(l, &n)| self.run_level(l, n))
            .collect::<Result<Vec<_>>>()?;
        assemble_solution(self.method, levels, self.hierarchy)
    }
}
