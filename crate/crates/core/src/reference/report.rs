//! Tables and long-format CSV output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lo::Method;
use crate::mlmc::MlmcResult;
use crate::reference::{relative_l2, MseStudy, ReferenceSolution, SingleLevelStudy};

/// A CSV table held as strings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: ToString>(headers: &[S]) -> Self {
        Self {
            headers: headers.iter().map(ToString::to_string).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.headers.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.6e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Fixed-`N` multilevel run as written by the `mlht` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlhtRecord {
    pub method: Method,
    pub functional: String,
    pub samples: Vec<usize>,
    pub histories: Vec<u64>,
    pub mean_df: Vec<Vec<f64>>,
    pub var_df: Vec<Vec<f64>>,
    /// `Σ_ℓ ⟨ΔF_ℓ⟩` per component.
    pub estimate: Vec<f64>,
    /// Partial sums `⟨φ_ℓ⟩`, each on its own grid.
    pub partial: Vec<Vec<f64>>,
}

/// Repeated-run accuracy study as written by `mlmc --runs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub method: Method,
    pub functional: String,
    pub study: MseStudy,
}

/// Any JSON document the command line writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Mlmc(Box<MlmcResult>),
    Mlht(MlhtRecord),
    Mse(MseRecord),
    Single(Vec<SingleLevelStudy>),
    Reference(ReferenceSolution<f64>),
}

impl Record {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Relative `L_2` error of every partial sum, prolongated to the finest grid,
/// against the reference averaged onto that grid.
pub fn partial_sum_errors(partial: &[Vec<f64>], reference: &ReferenceSolution<f64>) -> Result<Vec<f64>> {
    let fine = partial.last().ok_or_else(|| Error::config("no levels"))?.len();
    let exact = reference.averaged(fine)?;
    let widths = vec![reference.length / fine as f64; fine];
    partial
        .iter()
        .map(|p| {
            if p.is_empty() || fine % p.len() != 0 {
                return Err(Error::config(format!("{} cells do not nest in {fine}", p.len())));
            }
            let per = fine / p.len();
            let up: Vec<f64> = p.iter().flat_map(|&v| std::iter::repeat_n(v, per)).collect();
            relative_l2(&up, &exact, &widths)
        })
        .collect()
}

/// Mean relative error of single-grid solutions by `K`, `Δx` and method.
pub fn single_level_table(studies: &[SingleLevelStudy]) -> Table {
    let mut t = Table::new(&["K", "dx", "cells", "method", "runs", "mean_re_l2", "std_error"]);
    for s in studies {
        t.push(vec![
            s.histories.to_string(),
            num(s.dx),
            s.cells.to_string(),
            s.method.to_string(),
            s.errors.len().to_string(),
            num(s.mean()),
            num(s.std_error()),
        ]);
    }
    t
}

/// Relative error of `⟨φ_ℓ⟩` by level.
pub fn partial_error_table(record: &MlhtRecord, reference: &ReferenceSolution<f64>) -> Result<Table> {
    let errors = partial_sum_errors(&record.partial, reference)?;
    let mut t = Table::new(&["method", "level", "N", "K", "re_l2"]);
    for (l, e) in errors.iter().enumerate() {
        t.push(vec![
            record.method.to_string(),
            l.to_string(),
            record.samples[l].to_string(),
            record.histories[l].to_string(),
            num(*e),
        ]);
    }
    Ok(t)
}

/// One row per run: rates, `N_ℓ` and the weak-convergence maximum.
pub fn rates_table(results: &[(String, MlmcResult)]) -> Table {
    let nl = results.iter().map(|(_, r)| r.levels.len()).max().unwrap_or(0);
    let mut headers: Vec<String> = ["label", "method", "functional", "epsilon", "alpha", "beta", "gamma"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    headers.extend((0..nl).map(|l| format!("N{l}")));
    headers.extend(["max_W", "weak_pass", "max_abs_eta", "status"].map(String::from));
    let mut t = Table::new(&headers);
    for (label, r) in results {
        let (alpha, beta, gamma, max_w) = match &r.vector {
            Some(v) => (v.min_alpha, v.min_beta, r.rates.first().and_then(|x| x.gamma), v.max_w),
            None => {
                let x = &r.rates[0];
                (x.alpha, x.beta, x.gamma, r.weak[0].max)
            }
        };
        let mut row = vec![
            label.clone(),
            r.method.to_string(),
            r.functional.clone(),
            num(r.epsilon),
            opt(alpha),
            opt(beta),
            opt(gamma),
        ];
        let samples = r.samples();
        row.extend((0..nl).map(|l| samples.get(l).map(ToString::to_string).unwrap_or_default()));
        row.push(num(max_w));
        row.push(r.weak_pass.to_string());
        row.push(num(r.max_abs_eta()));
        row.push(serde_json::to_string(&r.status).unwrap_or_default().replace(',', ";"));
        t.push(row);
    }
    t
}

/// Mean MSE of plain Monte Carlo and of MLMC against `ε²`.
pub fn mse_table(records: &[MseRecord]) -> Table {
    let mut t = Table::new(&["method", "functional", "component", "epsilon", "runs", "mc", "mlmc", "epsilon_sq"]);
    for rec in records {
        let s = &rec.study;
        let plain = s.mean_plain_mse();
        for (k, m) in s.mean_mse().iter().enumerate() {
            t.push(vec![
                rec.method.to_string(),
                rec.functional.clone(),
                (k + 1).to_string(),
                num(s.epsilon),
                s.runs.len().to_string(),
                opt(plain.as_ref().map(|p| p[k])),
                num(*m),
                num(s.epsilon_squared()),
            ]);
        }
    }
    t
}

/// Per-run squared errors of an accuracy study.
pub fn mse_runs_table(record: &MseRecord) -> Table {
    let mut t = Table::new(&["method", "run", "seed", "component", "estimate", "squared_error", "mc_squared_error"]);
    for (n, r) in record.study.runs.iter().enumerate() {
        for (k, e) in r.squared_error.iter().enumerate() {
            t.push(vec![
                record.method.to_string(),
                (n + 1).to_string(),
                r.seed.to_string(),
                (k + 1).to_string(),
                num(r.estimate[k]),
                num(*e),
                opt(r.plain_mc_squared_error.as_ref().map(|p| p[k])),
            ]);
        }
    }
    t
}

/// Long format `label,level,component,quantity,value` of every per-level
/// diagnostic, ready for plotting.
pub fn level_long_table(label: &str, r: &MlmcResult) -> Table {
    let mut t = Table::new(&["label", "method", "level", "component", "quantity", "value"]);
    for l in &r.levels {
        let mut push = |k: usize, q: &str, v: String| {
            t.push(vec![
                label.to_string(),
                r.method.to_string(),
                l.level.to_string(),
                (k + 1).to_string(),
                q.to_string(),
                v,
            ])
        };
        for k in 0..l.mean_df.len() {
            push(k, "mean_f", num(l.mean_f[k]));
            push(k, "mean_df", num(l.mean_df[k]));
            push(k, "var_f", num(l.var_f[k]));
            push(k, "var_df", num(l.var_df[k]));
            push(k, "kurtosis", opt(l.kurtosis[k]));
            push(k, "eta", opt(l.eta[k]));
        }
        push(0, "cost", num(l.cost));
        push(0, "cost_seconds", num(l.cost_seconds));
        push(0, "cost_events", num(l.cost_events));
        push(0, "samples", l.samples.to_string());
    }
    t
}

/// Per-level summary of one run, the `levels.csv` layout.
pub fn levels_table(r: &MlmcResult) -> Table {
    let mut t = Table::new(&[
        "level",
        "cells",
        "K",
        "N",
        "mean_df",
        "var_df",
        "mean_f",
        "var_f",
        "cost",
        "cost_seconds",
        "cost_events",
        "kurtosis",
        "eta",
        "flagged",
    ]);
    for l in &r.levels {
        // vector functionals report the worst component
        let k = (0..l.var_df.len())
            .max_by(|&a, &b| l.var_df[a].total_cmp(&l.var_df[b]))
            .unwrap_or(0);
        t.push(vec![
            l.level.to_string(),
            l.cells.to_string(),
            l.histories.to_string(),
            l.samples.to_string(),
            num(l.mean_df[k]),
            num(l.var_df[k]),
            num(l.mean_f[k]),
            num(l.var_f[k]),
            num(l.cost),
            num(l.cost_seconds),
            num(l.cost_events),
            opt(l.kurtosis[k]),
            opt(l.eta[k]),
            l.flagged.to_string(),
        ]);
    }
    t
}
