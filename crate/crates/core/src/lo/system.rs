//! Finite-volume low-order systems and their direct banded solve.
//!
//! Unknowns are interleaved as `φ_i → 2i` (`i = 0..=I+1`, faces included)
//! and `J_i → 2i+1` (`i = 0..=I`), so every equation couples three adjacent
//! unknowns:
//!
//! | row      | equation                                      |
//! |----------|-----------------------------------------------|
//! | `0`      | left boundary condition                       |
//! | `2i - 1` | first moment on the dual cell around `x_{i-1}` |
//! | `2i`     | balance on cell `i`                           |
//! | `2I + 2` | right boundary condition                      |

use serde::{Deserialize, Serialize};

use super::closures::{QdClosures, SmClosures};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::problem::SlabProblem;
use crate::scalar::Real;

/// Square banded matrix with room for the fill-in of partial pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T: Real> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (2 * kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, row: usize, col: usize) -> Option<usize> {
        let w = 2 * self.kl + self.ku + 1;
        (col + self.kl >= row && col <= row + self.kl + self.ku && row < self.n && col < self.n)
            .then(|| row * w + col + self.kl - row)
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.index(row, col).map_or(T::zero(), |k| self.data[k])
    }

    /// Sets an entry inside the declared band.
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "({row}, {col}) outside band kl={}, ku={}",
            self.kl,
            self.ku
        );
        let k = self.index(row, col).expect("inside matrix");
        self.data[k] = value;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting restricted to the band.
    fn solve_in_place(&mut self, b: &mut [T], level: usize) -> Result<Vec<T>> {
        let n = self.n;
        let reach = self.kl + self.ku;
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let p = (k..=last)
                .max_by(|&a, &b| self.get(a, k).abs().partial_cmp(&self.get(b, k).abs()).expect("finite"))
                .expect("non-empty");
            let pivot = self.get(p, k);
            if !(pivot.abs() > scale * T::epsilon()) {
                return Err(Error::Singular {
                    level,
                    row: k,
                    pivot: pivot.as_f64(),
                });
            }
            let cend = (k + reach).min(n - 1);
            if p != k {
                for j in k..=cend {
                    let (a, c) = (self.index(k, j).expect("band"), self.index(p, j).expect("band"));
                    self.data.swap(a, c);
                }
                b.swap(k, p);
            }
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                if l == T::zero() {
                    continue;
                }
                for j in k..=cend {
                    let kk = self.index(i, j).expect("band");
                    self.data[kk] = self.data[kk] - l * self.get(k, j);
                }
                b[i] = b[i] - l * b[k];
            }
        }
        let mut x = vec![T::zero(); n];
        for k in (0..n).rev() {
            let cend = (k + reach).min(n - 1);
            let s: T = (k + 1..=cend).map(|j| self.get(k, j) * x[j]).sum();
            x[k] = (b[k] - s) / self.get(k, k);
        }
        Ok(x)
    }
}

/// `A x = b` together with the grid level it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<T: Real> {
    pub level: usize,
    pub matrix: BandMatrix<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> LinearSystem<T> {
    /// Direct solve followed by the check `‖Ax - b‖∞ ≤ tol · ‖b‖∞`.
    pub fn solve(&self) -> Result<Vec<T>> {
        let mut m = self.matrix.clone();
        let mut b = self.rhs.clone();
        let x = m.solve_in_place(&mut b, self.level)?;
        let ax = self.matrix.mul_vec(&x);
        let res = ax
            .iter()
            .zip(&self.rhs)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        let norm = self.rhs.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let rel = if norm > T::zero() { res / norm } else { res };
        if !(rel <= T::solve_tolerance()) {
            return Err(Error::Residual {
                level: self.level,
                residual: rel.as_f64(),
            });
        }
        Ok(x)
    }
}

/// Cell fluxes, face fluxes and edge currents on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LowOrderSolution<T: Real> {
    pub level: usize,
    /// Cell-average `φ_i`, `i = 1..=I`.
    pub phi: Vec<T>,
    /// `φ_0`.
    pub phi_left: T,
    /// `φ_{I+1}`.
    pub phi_right: T,
    /// Edge currents `J_i`, `i = 0..=I`.
    pub current: Vec<T>,
}

impl<T: Real> LowOrderSolution<T> {
    fn from_unknowns(level: usize, x: &[T]) -> Self {
        let cells = (x.len() - 3) / 2;
        Self {
            level,
            phi: (1..=cells).map(|i| x[2 * i]).collect(),
            phi_left: x[0],
            phi_right: x[2 * cells + 2],
            current: (0..=cells).map(|i| x[2 * i + 1]).collect(),
        }
    }

    pub fn cells(&self) -> usize {
        self.phi.len()
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(&self.current).all(|v| v.is_finite())
            && self.phi_left.is_finite()
            && self.phi_right.is_finite()
    }

    /// `J_I - J_0 + Σ Σ_a Δx φ - Σ q Δx`.
    pub fn balance_defect(&self, grid: &Grid<T>) -> T {
        let mut d = self.current[self.cells()] - self.current[0];
        for i in 0..self.cells() {
            let m = grid.material(i);
            d += (m.sigma_a() * self.phi[i] - m.q) * grid.width(i);
        }
        d
    }
}

/// `Σ̂_i Δx̂_i` of the dual cell around edge `i`, `i = 0..=I`.
fn dual_optical_width<T: Real>(grid: &Grid<T>, edge: usize) -> T {
    let tau = |c: usize| grid.material(c).sigma_t * grid.width(c);
    let left = if edge > 0 { tau(edge - 1) } else { T::zero() };
    let right = if edge < grid.cells() { tau(edge) } else { T::zero() };
    (left + right) / T::lit(2.0)
}

fn balance_rows<T: Real>(grid: &Grid<T>, m: &mut BandMatrix<T>, b: &mut [T]) {
    for i in 1..=grid.cells() {
        let mat = grid.material(i - 1);
        let dx = grid.width(i - 1);
        let r = 2 * i;
        m.set(r, 2 * i - 1, -T::one());
        m.set(r, 2 * i, mat.sigma_a() * dx);
        m.set(r, 2 * i + 1, T::one());
        b[r] = mat.q * dx;
    }
}

fn check_size<T: Real>(grid: &Grid<T>, cells: usize) -> Result<()> {
    if cells != grid.cells() {
        return Err(Error::internal(format!(
            "closures for {cells} cells on a grid with {}",
            grid.cells()
        )));
    }
    Ok(())
}

/// Discretized quasidiffusion equations with the given Eddington factors.
pub fn assemble_loqd<T: Real>(
    problem: &SlabProblem<T>,
    grid: &Grid<T>,
    c: &QdClosures<T>,
) -> Result<LinearSystem<T>> {
    check_size(grid, c.e.len())?;
    let cells = grid.cells();
    let n = 2 * cells + 3;
    let mut m = BandMatrix::zeros(n, 1, 1);
    let mut b = vec![T::zero(); n];
    let e = |i: usize| match i {
        0 => c.e_left,
        i if i == cells + 1 => c.e_right,
        i => c.e[i - 1],
    };

    let (phi_l, j_l) = problem.left_incoming();
    m.set(0, 0, -c.b_left);
    m.set(0, 1, T::one());
    b[0] = j_l - c.b_left * phi_l;

    for i in 1..=cells + 1 {
        let r = 2 * i - 1;
        m.set(r, 2 * i - 2, -e(i - 1));
        m.set(r, 2 * i - 1, dual_optical_width(grid, i - 1));
        m.set(r, 2 * i, e(i));
    }
    balance_rows(grid, &mut m, &mut b);

    let (phi_r, j_r) = problem.right_incoming();
    m.set(n - 1, n - 2, T::one());
    m.set(n - 1, n - 1, -c.b_right);
    b[n - 1] = j_r - c.b_right * phi_r;

    Ok(LinearSystem {
        level: grid.level(),
        matrix: m,
        rhs: b,
    })
}

/// Discretized second-moment equations with the given functionals.
pub fn assemble_losm<T: Real>(
    problem: &SlabProblem<T>,
    grid: &Grid<T>,
    c: &SmClosures<T>,
) -> Result<LinearSystem<T>> {
    check_size(grid, c.h.len())?;
    let cells = grid.cells();
    let n = 2 * cells + 3;
    let mut m = BandMatrix::zeros(n, 1, 1);
    let mut b = vec![T::zero(); n];
    let third = T::one() / T::lit(3.0);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let h = |i: usize| match i {
        0 => c.h_left,
        i if i == cells + 1 => c.h_right,
        i => c.h[i - 1],
    };

    let (_, j_l) = problem.left_incoming();
    m.set(0, 0, half);
    m.set(0, 1, T::one());
    b[0] = two * j_l + c.w_left;

    for i in 1..=cells + 1 {
        let r = 2 * i - 1;
        m.set(r, 2 * i - 2, -third);
        m.set(r, 2 * i - 1, dual_optical_width(grid, i - 1));
        m.set(r, 2 * i, third);
        b[r] = h(i) - h(i - 1);
    }
    balance_rows(grid, &mut m, &mut b);

    let (_, j_r) = problem.right_incoming();
    m.set(n - 1, n - 2, T::one());
    m.set(n - 1, n - 1, -half);
    b[n - 1] = two * j_r - c.w_right;

    Ok(LinearSystem {
        level: grid.level(),
        matrix: m,
        rhs: b,
    })
}

/// Solves an assembled low-order system.
pub fn solve_banded<T: Real>(sys: &LinearSystem<T>) -> Result<LowOrderSolution<T>> {
    let x = sys.solve()?;
    if x.len() < 5 || x.len() % 2 == 0 {
        return Err(Error::internal(format!("{} unknowns is not a low-order layout", x.len())));
    }
    Ok(LowOrderSolution::from_unknowns(sys.level, &x))
}
