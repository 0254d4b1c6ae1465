//! Gauss–Legendre quadrature on `[-1, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    GaussLegendre,
    #[default]
    DoubleGauss,
}

impl Quadrature {
    pub fn rule<T: Real>(self, n: usize) -> Result<(Vec<T>, Vec<T>)> {
        match self {
            Self::GaussLegendre => gauss_legendre(n),
            Self::DoubleGauss => double_gauss(n),
        }
    }
}

/// Nodes (ascending) and weights of the `n`-point rule. Weights sum to 2.
pub fn gauss_legendre<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 {
        return Err(Error::config("quadrature order must be positive"));
    }
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((
        nodes.into_iter().map(T::lit).collect(),
        weights.into_iter().map(T::lit).collect(),
    ))
}

/// Gauss–Legendre rules of order `n / 2` on each half range `[-1, 0]` and
/// `[0, 1]`. Exact for polynomials in `μ` on each half separately, which
/// suits the kink of `ψ` at `μ = 0` near vacuum boundaries.
pub fn double_gauss<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::config(format!("double-Gauss order must be even, got {n}")));
    }
    let (x, w) = gauss_legendre::<f64>(n / 2)?;
    let half = 0.5;
    let mut nodes: Vec<f64> = x.iter().map(|&x| half * (x - 1.0)).collect();
    nodes.extend(x.iter().map(|&x| half * (x + 1.0)));
    let mut weights: Vec<f64> = w.iter().map(|&w| half * w).collect();
    weights.extend(w.iter().map(|&w| half * w));
    Ok((
        nodes.into_iter().map(T::lit).collect(),
        weights.into_iter().map(T::lit).collect(),
    ))
}
