//! Variance-optimal sample allocation for a target RMSE and the convergence
//! diagnostics of a multilevel run.
//!
//! `V_ℓ` is always the per-sample variance of `ΔF_ℓ`; the variance of the
//! level mean is `V_ℓ / N_ℓ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lo::{CostMetric, Method};
use crate::mlht::{assemble_solution, LevelEstimate, Mlht, MultilevelSolution};
use crate::scalar::Real;
use crate::stats;

/// Unrounded `N_ℓ = 2 ε⁻² √(V_ℓ/C_ℓ) Σ_m √(V_m C_m)`.
pub fn optimal_samples_raw(v: &[f64], c: &[f64], epsilon: f64) -> Vec<f64> {
    let total: f64 = v.iter().zip(c).map(|(&v, &c)| (v * c).sqrt()).sum();
    v.iter()
        .zip(c)
        .map(|(&v, &c)| {
            if v > 0.0 {
                2.0 / (epsilon * epsilon) * (v / c).sqrt() * total
            } else {
                0.0
            }
        })
        .collect()
}

/// Required realizations per level, rounded up. Levels with zero variance
/// need none.
pub fn optimal_samples(v: &[f64], c: &[f64], epsilon: f64) -> Vec<usize> {
    optimal_samples_raw(v, c, epsilon)
        .into_iter()
        .map(|n| n.ceil() as usize)
        .collect()
}

/// How a vector of functionals is reduced to one sample count per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VectorRule {
    /// `N_ℓ = max_i N_{i,ℓ}` with `N_{i,ℓ}` from each component's variances.
    #[default]
    PerComponentMax,
    /// `N_ℓ` from `max_i V_{i,ℓ}` fed to the scalar rule.
    MaxVariance,
}

/// `v[ℓ][i]`: per-sample variance of component `i` on level `ℓ`.
pub fn vector_mode_samples(v: &[Vec<f64>], c: &[f64], epsilon: f64, rule: VectorRule) -> Vec<usize> {
    let comps = v.first().map_or(0, Vec::len);
    match rule {
        VectorRule::PerComponentMax => {
            let mut n = vec![0; v.len()];
            for i in 0..comps {
                let vi: Vec<f64> = v.iter().map(|row| row[i]).collect();
                for (a, b) in n.iter_mut().zip(optimal_samples(&vi, c, epsilon)) {
                    *a = (*a).max(b);
                }
            }
            n
        }
        VectorRule::MaxVariance => {
            let vmax: Vec<f64> = v.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect();
            optimal_samples(&vmax, c, epsilon)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rates {
    /// Bias decay `|E[ΔF_ℓ]| ~ I_ℓ^{-α}`.
    pub alpha: Option<f64>,
    /// Variance decay `V_ℓ ~ I_ℓ^{-β}`.
    pub beta: Option<f64>,
    /// Cost growth `C_ℓ ~ I_ℓ^{γ}`.
    pub gamma: Option<f64>,
}

fn log_slope(values: &[f64], refinement: usize) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = values
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, v)| **v > 0.0 && v.is_finite())
        .map(|(l, v)| (l as f64, v.log2()))
        .unzip();
    stats::slope(&x, &y).map(|s| s / (refinement as f64).log2())
}

/// Least-squares rates over the correction levels `ℓ = 1..=L`, expressed per
/// factor of `I_ℓ`. Inputs are indexed by level, level 0 included.
pub fn fit_rates(mean_df: &[f64], var_df: &[f64], cost: &[f64], refinement: usize) -> Rates {
    let abs: Vec<f64> = mean_df.iter().map(|v| v.abs()).collect();
    Rates {
        alpha: log_slope(&abs, refinement).map(|s| -s),
        beta: log_slope(var_df, refinement).map(|s| -s),
        gamma: log_slope(cost, refinement),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakConvergence {
    /// Levels `ℓ̂` inspected.
    pub levels: Vec<usize>,
    /// `W_ℓ̂ = |⟨ΔF_ℓ̂⟩| / (a^α - 1)`.
    pub values: Vec<f64>,
    pub max: f64,
    /// `ε / √2`.
    pub threshold: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// Remaining-bias check on the last three correction levels
/// (`max(1, L-2) ..= L`).
pub fn weak_convergence(mean_df: &[f64], refinement: usize, alpha: f64, epsilon: f64) -> WeakConvergence {
    let last = mean_df.len().saturating_sub(1);
    let levels: Vec<usize> = (last.saturating_sub(2).max(1)..=last).filter(|&l| l >= 1).collect();
    let denom = (refinement as f64).powf(alpha) - 1.0;
    let values: Vec<f64> = levels.iter().map(|&l| mean_df[l].abs() / denom).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let threshold = epsilon / 2f64.sqrt();
    WeakConvergence {
        levels,
        values,
        max,
        threshold,
        alpha,
        pass: max < threshold,
    }
}

/// Mean, per-sample variance and count of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub variance: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn standard_error(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            (self.variance / self.samples as f64).sqrt()
        }
    }
}

/// `η_ℓ = (⟨F_{ℓ-1}⟩ - ⟨F_ℓ⟩ + ⟨ΔF_ℓ⟩) / (3 (σ_{ℓ-1} + σ_ℓ + σ_Δ))` with
/// standard errors of the means as `σ`. A zero denominator gives 0 for a
/// zero numerator and an infinite value otherwise.
pub fn consistency_check(coarse: Estimate, fine: Estimate, correction: Estimate) -> f64 {
    let num = coarse.mean - fine.mean + correction.mean;
    let den = 3.0 * (coarse.standard_error() + fine.standard_error() + correction.standard_error());
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcSettings {
    /// Target RMSE `ε`.
    pub epsilon: f64,
    /// Realizations per level in the first stage.
    pub n_ini: usize,
    /// Fixed `α` for the weak-convergence check instead of the fit.
    pub alpha: Option<f64>,
    pub cost_metric: CostMetric,
    pub vector_rule: VectorRule,
    /// Largest total number of realizations the run may request.
    pub max_realizations: usize,
}

impl Default for MlmcSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            n_ini: 10,
            alpha: None,
            cost_metric: CostMetric::Events,
            vector_rule: VectorRule::PerComponentMax,
            max_realizations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub cells: usize,
    pub histories: u64,
    /// `N_ℓ`.
    pub samples: usize,
    /// `N_ℓ` after each stage.
    pub stage_samples: Vec<usize>,
    pub mean_df: Vec<f64>,
    pub var_df: Vec<f64>,
    /// Single-grid `⟨F_ℓ⟩` and its per-sample variance.
    pub mean_f: Vec<f64>,
    pub var_f: Vec<f64>,
    /// `C_ℓ` in the optimizer's metric.
    pub cost: f64,
    pub cost_seconds: f64,
    pub cost_events: f64,
    pub kurtosis: Vec<Option<f64>>,
    /// `η_ℓ` per component (`None` on level 0).
    pub eta: Vec<Option<f64>>,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSummary {
    pub min_alpha: Option<f64>,
    pub max_alpha: Option<f64>,
    pub min_beta: Option<f64>,
    pub max_beta: Option<f64>,
    pub max_w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    BudgetExceeded { stage: usize, requested: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlmcResult {
    pub method: Method,
    pub functional: String,
    pub epsilon: f64,
    pub cost_metric: CostMetric,
    /// `⟨F_L⟩ = Σ_ℓ ⟨ΔF_ℓ⟩` per component.
    pub estimate: Vec<f64>,
    pub levels: Vec<LevelReport>,
    /// Per component.
    pub rates: Vec<Rates>,
    pub weak: Vec<WeakConvergence>,
    pub weak_pass: bool,
    /// `Σ_ℓ V_ℓ / N_ℓ` per component.
    pub variance_sum: Vec<f64>,
    pub variance_pass: bool,
    pub eta_pass: bool,
    /// `Σ_ℓ N_ℓ C_ℓ`.
    pub total_cost: f64,
    pub total_seconds: f64,
    pub vector: Option<VectorSummary>,
    /// Assembled `⟨φ_L⟩` on the finest grid.
    pub flux: Vec<f64>,
    pub status: RunStatus,
}

impl MlmcResult {
    pub fn samples(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.samples).collect()
    }

    pub fn max_abs_eta(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.eta.iter().flatten())
            .fold(0.0, |m: f64, e| m.max(e.abs()))
    }
}

pub struct MlmcRun<T: Real> {
    pub result: MlmcResult,
    pub solution: MultilevelSolution<T>,
}

fn as_f64<T: Real>(v: Vec<T>) -> Vec<f64> {
    v.into_iter().map(T::as_f64).collect()
}

fn level_cost<T: Real>(e: &LevelEstimate<T>, metric: CostMetric) -> f64 {
    e.cost(metric).max(f64::MIN_POSITIVE)
}

fn required<T: Real>(levels: &[LevelEstimate<T>], settings: &MlmcSettings) -> Vec<usize> {
    let v: Vec<Vec<f64>> = levels.iter().map(|e| as_f64(e.var_df())).collect();
    let c: Vec<f64> = levels.iter().map(|e| level_cost(e, settings.cost_metric)).collect();
    vector_mode_samples(&v, &c, settings.epsilon, settings.vector_rule)
}

/// Three-stage optimization: `N_ini` realizations everywhere, then twice the
/// deficit `max(N_required - N_ℓ, 0)` from the pooled statistics.
pub fn run_mlmc<T: Real>(mlht: &Mlht<'_, T>, settings: &MlmcSettings) -> Result<MlmcRun<T>> {
    if !(settings.epsilon > 0.0) {
        return Err(Error::config("epsilon must be positive"));
    }
    if settings.n_ini < 2 {
        return Err(Error::config("n_ini must be at least 2 to estimate variances"));
    }
    let nl = mlht.hierarchy.finest_level() + 1;
    let mut levels: Vec<LevelEstimate<T>> = (0..nl).map(|l| mlht.empty_level(l)).collect();
    let mut stage_samples: Vec<Vec<usize>> = vec![Vec::new(); nl];
    let mut add = vec![settings.n_ini; nl];
    let mut status = RunStatus::Completed;
    for stage in 1..=3 {
        let requested: usize = levels.iter().map(|e| e.samples()).sum::<usize>() + add.iter().sum::<usize>();
        if requested > settings.max_realizations {
            status = RunStatus::BudgetExceeded {
                stage,
                requested,
                cap: settings.max_realizations,
            };
            if stage == 1 {
                return Err(Error::Budget {
                    requested,
                    cap: settings.max_realizations,
                });
            }
            break;
        }
        for (e, &n) in levels.iter_mut().zip(&add) {
            mlht.extend_level(e, n)?;
        }
        for (s, e) in stage_samples.iter_mut().zip(&levels) {
            s.push(e.samples());
        }
        if stage < 3 {
            let req = required(&levels, settings);
            add = req
                .iter()
                .zip(&levels)
                .map(|(&r, e)| r.saturating_sub(e.samples()))
                .collect();
        }
    }
    let solution = assemble_solution(mlht.method, levels, mlht.hierarchy)?;
    let result = summarize(mlht, settings, &solution, stage_samples, status);
    Ok(MlmcRun { result, solution })
}

fn summarize<T: Real>(
    mlht: &Mlht<'_, T>,
    settings: &MlmcSettings,
    solution: &MultilevelSolution<T>,
    stage_samples: Vec<Vec<usize>>,
    status: RunStatus,
) -> MlmcResult {
    let levels = &solution.levels;
    let comps = levels[0].components();
    let refinement = mlht.hierarchy.refinement();
    let mut reports: Vec<LevelReport> = Vec::with_capacity(levels.len());
    for (l, e) in levels.iter().enumerate() {
        let mean_df = as_f64(e.mean_df());
        let var_df = as_f64(e.var_df());
        let mean_f = as_f64(e.mean_f());
        let var_f = as_f64(e.var_f());
        let eta = (0..comps)
            .map(|k| {
                (l > 0).then(|| {
                    let prev = &reports[l - 1];
                    consistency_check(
                        Estimate {
                            mean: prev.mean_f[k],
                            variance: prev.var_f[k],
                            samples: prev.samples,
                        },
                        Estimate {
                            mean: mean_f[k],
                            variance: var_f[k],
                            samples: e.samples(),
                        },
                        Estimate {
                            mean: mean_df[k],
                            variance: var_df[k],
                            samples: e.samples(),
                        },
                    )
                })
            })
            .collect();
        reports.push(LevelReport {
            level: l,
            cells: e.cells,
            histories: e.histories,
            samples: e.samples(),
            stage_samples: stage_samples[l].clone(),
            mean_df,
            var_df,
            mean_f,
            var_f,
            cost: e.cost(settings.cost_metric),
            cost_seconds: e.cost(CostMetric::Seconds),
            cost_events: e.cost(CostMetric::Events),
            kurtosis: e.kurtosis().into_iter().map(|k| k.map(T::as_f64)).collect(),
            eta,
            flagged: e.flagged,
        });
    }

    let mut estimate = vec![0.0; comps];
    for r in &reports {
        for (s, &m) in estimate.iter_mut().zip(&r.mean_df) {
            *s += m;
        }
    }
    let costs: Vec<f64> = reports.iter().map(|r| r.cost).collect();
    let mut rates = Vec::with_capacity(comps);
    let mut weak = Vec::with_capacity(comps);
    let mut variance_sum = Vec::with_capacity(comps);
    for k in 0..comps {
        let m: Vec<f64> = reports.iter().map(|r| r.mean_df[k]).collect();
        let v: Vec<f64> = reports.iter().map(|r| r.var_df[k]).collect();
        let rk = fit_rates(&m, &v, &costs, refinement);
        let alpha = settings.alpha.unwrap_or_else(|| rk.alpha.map_or(2.0, |a| a.clamp(0.5, 3.0)));
        weak.push(weak_convergence(&m, refinement, alpha, settings.epsilon));
        rates.push(rk);
        variance_sum.push(
            reports
                .iter()
                .map(|r| if r.samples > 0 { r.var_df[k] / r.samples as f64 } else { 0.0 })
                .sum(),
        );
    }
    let weak_pass = weak.iter().all(|w| w.pass);
    let variance_pass = variance_sum
        .iter()
        .all(|&s| s <= settings.epsilon * settings.epsilon / 2.0 * (1.0 + 1e-12));
    let eta_pass = reports.iter().flat_map(|r| r.eta.iter().flatten()).all(|e| e.abs() < 1.0);
    let total_cost = reports.iter().map(|r| r.cost * r.samples as f64).sum();
    let total_seconds = levels.iter().map(|e| e.seconds.iter().sum::<f64>()).sum();
    let vector = (comps > 1).then(|| {
        let fold = |f: fn(&Rates) -> Option<f64>, min: bool| {
            rates.iter().filter_map(f).fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| if min { a.min(v) } else { a.max(v) }))
            })
        };
        VectorSummary {
            min_alpha: fold(|r| r.alpha, true),
            max_alpha: fold(|r| r.alpha, false),
            min_beta: fold(|r| r.beta, true),
            max_beta: fold(|r| r.beta, false),
            max_w: weak.iter().map(|w| w.max).fold(0.0, f64::max),
        }
    });
    MlmcResult {
        method: mlht.method,
        functional: mlht.functional.to_string(),
        epsilon: settings.epsilon,
        cost_metric: settings.cost_metric,
        estimate,
        levels: reports,
        rates,
        weak,
        weak_pass,
        variance_sum,
        variance_pass,
        eta_pass,
        total_cost,
        total_seconds,
        vector,
        flux: as_f64(solution.flux().to_vec()),
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_value() {
        assert_eq!(optimal_samples(&[1.0; 4], &[1.0; 4], 1.0), vec![8, 8, 8, 8]);
    }

    #[test]
    fn single_contributing_level() {
        let eps: f64 = 0.1;
        let n = optimal_samples(&[1.0, 0.0, 0.0, 0.0], &[3.0, 5.0, 7.0, 9.0], eps);
        assert_eq!(n, vec![(2.0 / (eps * eps)).ceil() as usize, 0, 0, 0]);
    }

    #[test]
    fn rates_of_geometric_sequences() {
        let m = [1.0, 0.25, 0.0625, 0.015625];
        let v = [1.0, 1.0, 0.125, 0.015625];
        let c = [1.0, 2.0, 4.0, 8.0];
        let r = fit_rates(&m, &v, &c, 2);
        assert!((r.alpha.unwrap() - 2.0).abs() < 1e-12);
        assert!((r.beta.unwrap() - 3.0).abs() < 1e-12);
        assert!((r.gamma.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fit_rates(&[1.0, 0.5], &[1.0, 1.0], &[1.0, 1.0], 2).alpha, None);
    }

    #[test]
    fn weak_convergence_arithmetic() {
        let eps = 1e-3;
        let w = weak_convergence(&[1.0, 0.0, 0.0, 3.0 * eps], 2, 2.0, eps);
        assert_eq!(w.levels, vec![1, 2, 3]);
        assert!((w.max - eps).abs() < 1e-15);
        assert!(!w.pass);
        assert!(weak_convergence(&[1.0, 0.0, 0.0, 0.0], 2, 2.0, eps).pass);
    }

    #[test]
    fn eta_zero_denominator() {
        let e = |mean| Estimate {
            mean,
            variance: 0.0,
            samples: 3,
        };
        assert_eq!(consistency_check(e(1.0), e(1.5), e(0.5)), 0.0);
        assert!(consistency_check(e(1.0), e(1.5), e(-0.5)).is_infinite());
    }
}
