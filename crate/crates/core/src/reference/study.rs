//! Error studies against a reference: repeated MLMC runs scored on a
//! functional, and repeated single-grid hybrid solves scored on the flux.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::lo::{hybrid_realization, Method};
use crate::mc::Transport;
use crate::mlht::Mlht;
use crate::mlmc::{run_mlmc, MlmcResult, MlmcSettings};
use crate::problem::SlabProblem;
use crate::reference::relative_l2;
use crate::rng::StreamKey;
use crate::scalar::Real;

/// Tag of the plain Monte Carlo ensembles; keeps them apart from every
/// realization ensemble of the same seed.
const PLAIN_MC_TAG: u64 = 0x9e37_79b9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRun {
    pub seed: u64,
    pub estimate: Vec<f64>,
    /// `(⟨F_L⟩ - F^ex)^2` per component.
    pub squared_error: Vec<f64>,
    pub samples: Vec<usize>,
    pub histories: u64,
    pub weak_pass: bool,
    pub eta_pass: bool,
    /// Track-length estimate from the same number of histories.
    pub plain_mc: Option<Vec<f64>>,
    pub plain_mc_squared_error: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseStudy {
    pub exact: Vec<f64>,
    pub epsilon: f64,
    pub runs: Vec<MseRun>,
}

fn component_mean(rows: impl Iterator<Item = Vec<f64>>) -> Option<Vec<f64>> {
    let mut sum: Option<Vec<f64>> = None;
    let mut n = 0.0;
    for r in rows {
        match &mut sum {
            None => sum = Some(r),
            Some(s) => s.iter_mut().zip(&r).for_each(|(a, b)| *a += b),
        }
        n += 1.0;
    }
    sum.map(|s| s.into_iter().map(|v| v / n).collect())
}

impl MseStudy {
    pub fn epsilon_squared(&self) -> f64 {
        self.epsilon * self.epsilon
    }

    /// Mean squared error over runs, per component.
    pub fn mean_mse(&self) -> Vec<f64> {
        component_mean(self.runs.iter().map(|r| r.squared_error.clone())).unwrap_or_default()
    }

    pub fn mean_plain_mse(&self) -> Option<Vec<f64>> {
        if self.runs.iter().any(|r| r.plain_mc_squared_error.is_none()) {
            return None;
        }
        component_mean(self.runs.iter().filter_map(|r| r.plain_mc_squared_error.clone()))
    }

    /// Largest component of the mean MSE.
    pub fn worst_mean_mse(&self) -> f64 {
        self.mean_mse().into_iter().fold(0.0, f64::max)
    }
}

fn squared(estimate: &[f64], exact: &[f64]) -> Vec<f64> {
    estimate.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).collect()
}

/// Plain Monte Carlo estimate of the functional: one ensemble of `histories`
/// histories tallied on the finest grid with the track-length estimator.
pub fn plain_mc<T: Real>(mlht: &Mlht<'_, T>, transport: &Transport, histories: u64, seed: u64) -> Result<Vec<f64>> {
    let level = mlht.hierarchy.finest_level();
    let key = StreamKey::new(seed, level, 0).with_tag(PLAIN_MC_TAG);
    let (tallies, _) = transport.run_ensemble(level, histories, key)?;
    let phi = tallies.moments::<T>().scalar_flux(mlht.hierarchy.level(level));
    Ok(mlht
        .functional
        .evaluate(mlht.hierarchy, level, &phi)?
        .into_iter()
        .map(T::as_f64)
        .collect())
}

/// `runs` independent MLMC runs with seeds `base_seed, base_seed + 1, …`.
///
/// With `plain` set, each run is paired with a plain Monte Carlo estimate
/// using as many histories as the MLMC run consumed in total.
pub fn mse_study<T: Real>(
    template: &Mlht<'_, T>,
    settings: &MlmcSettings,
    exact: &[f64],
    runs: usize,
    base_seed: u64,
    plain: Option<&Transport>,
) -> Result<MseStudy> {
    let comps = template.functional.components(template.hierarchy);
    if exact.len() != comps {
        return Err(Error::config(format!(
            "{} reference values for a functional with {comps} components",
            exact.len()
        )));
    }
    let mut out = Vec::with_capacity(runs);
    for r in 0..runs as u64 {
        let seed = base_seed.wrapping_add(r);
        let mlht = Mlht { seed, ..*template };
        let result: MlmcResult = run_mlmc(&mlht, settings)?.result;
        let histories = result.levels.iter().map(|l| l.histories * l.samples as u64).sum();
        let (plain_mc, plain_err) = match plain {
            Some(t) if histories > 0 => {
                let f = plain_mc(&mlht, t, histories, seed)?;
                let e = squared(&f, exact);
                (Some(f), Some(e))
            }
            _ => (None, None),
        };
        out.push(MseRun {
            seed,
            squared_error: squared(&result.estimate, exact),
            estimate: result.estimate.clone(),
            samples: result.samples(),
            histories,
            weak_pass: result.weak_pass,
            eta_pass: result.eta_pass,
            plain_mc,
            plain_mc_squared_error: plain_err,
        });
    }
    Ok(MseStudy {
        exact: exact.to_vec(),
        epsilon: settings.epsilon,
        runs: out,
    })
}

/// Spread of the relative `L_2` error of single-grid hybrid solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleLevelStudy {
    pub method: Method,
    pub cells: usize,
    pub dx: f64,
    pub histories: u64,
    pub errors: Vec<f64>,
}

impl SingleLevelStudy {
    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.errors)
    }

    /// Standard error of [`Self::mean`].
    pub fn std_error(&self) -> f64 {
        (crate::stats::variance(&self.errors) / self.errors.len() as f64).sqrt()
    }
}

/// `runs` independent hybrid solutions on a single grid of `cells` cells,
/// each scored against `exact` (the reference flux averaged onto that grid).
///
/// Ensembles are keyed by `(seed, method)`, so the two methods never share
/// histories.
pub fn single_level_study<T: Real>(
    problem: &SlabProblem<T>,
    cells: usize,
    method: Method,
    histories: u64,
    runs: usize,
    seed: u64,
    exact: &[T],
) -> Result<SingleLevelStudy> {
    let h = GridHierarchy::single(problem, cells)?;
    let transport = Transport::new(problem, &h)?;
    let tag = match method {
        Method::Hqd => 1,
        Method::Hsm => 2,
    };
    let errors = (0..runs as u64)
        .map(|n| {
            let key = StreamKey::new(seed, 0, n).with_tag(tag);
            let r = hybrid_realization(problem, &h, &transport, method, 0, histories, key, false)?;
            Ok(relative_l2(&r.fine.phi, exact, h.level(0).widths())?.as_f64())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SingleLevelStudy {
        method,
        cells,
        dx: (problem.length() / T::from_count(cells)).as_f64(),
        histories,
        errors,
    })
}
