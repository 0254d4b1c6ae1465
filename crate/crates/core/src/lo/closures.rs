//! Closure functionals of the low-order equations estimated from tallies.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::mc::{SurfaceMoments, TallyMoments};
use crate::scalar::Real;

/// Places where a closure had no particles to estimate it from and the
/// diffusion default was used instead.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureFlags {
    /// 0-based cells with `T^[0]_i = 0`.
    pub empty_cells: Vec<usize>,
    pub empty_left: bool,
    pub empty_right: bool,
}

impl ClosureFlags {
    pub fn any(&self) -> bool {
        !self.empty_cells.is_empty() || self.empty_left || self.empty_right
    }

    pub fn absorb(&mut self, other: &ClosureFlags) {
        self.empty_cells.extend_from_slice(&other.empty_cells);
        self.empty_cells.sort_unstable();
        self.empty_cells.dedup();
        self.empty_left |= other.empty_left;
        self.empty_right |= other.empty_right;
    }
}

/// Quasidiffusion (Eddington) factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct QdClosures<T: Real> {
    /// Cell-average `E_i`.
    pub e: Vec<T>,
    /// `E_0` at `x = 0`.
    pub e_left: T,
    /// `E_{I+1}` at `x = X`.
    pub e_right: T,
    pub b_left: T,
    pub b_right: T,
    pub flags: ClosureFlags,
}

/// Second-moment method functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SmClosures<T: Real> {
    /// Cell-average `H_i`.
    pub h: Vec<T>,
    pub h_left: T,
    pub h_right: T,
    pub w_left: T,
    pub w_right: T,
    pub flags: ClosureFlags,
}

impl<T: Real> QdClosures<T> {
    /// `E ≡ 1/3`, `B_L = -1/2`, `B_R = 1/2`.
    pub fn diffusion(cells: usize) -> Self {
        let third = T::one() / T::lit(3.0);
        Self {
            e: vec![third; cells],
            e_left: third,
            e_right: third,
            b_left: T::lit(-0.5),
            b_right: T::lit(0.5),
            flags: ClosureFlags::default(),
        }
    }
}

impl<T: Real> SmClosures<T> {
    /// `H ≡ 0`, `W ≡ 0`.
    pub fn diffusion(cells: usize) -> Self {
        Self {
            h: vec![T::zero(); cells],
            h_left: T::zero(),
            h_right: T::zero(),
            w_left: T::zero(),
            w_right: T::zero(),
            flags: ClosureFlags::default(),
        }
    }
}

fn face_eddington<T: Real>(s: &SurfaceMoments<T>) -> Option<T> {
    let phi = s.full(0);
    (phi > T::zero()).then(|| s.full(2) / phi)
}

/// `E_i = T^[2]_i / T^[0]_i`, face factors from full-range surface moments and
/// `B_L = -S^-[1]/S^-[0]`, `B_R = S^+[1]/S^+[0]`.
pub fn qd_closures<T: Real>(t: &TallyMoments<T>) -> QdClosures<T> {
    let mut c = QdClosures::diffusion(t.cells());
    for (i, (e, (&t0, &t2))) in c.e.iter_mut().zip(t.track[0].iter().zip(&t.track[2])).enumerate() {
        if t0 > T::zero() {
            *e = t2 / t0;
        } else {
            c.flags.empty_cells.push(i);
        }
    }
    match face_eddington(&t.left) {
        Some(e) => c.e_left = e,
        None => c.flags.empty_left = true,
    }
    match face_eddington(&t.right) {
        Some(e) => c.e_right = e,
        None => c.flags.empty_right = true,
    }
    if t.left.minus[0] > T::zero() {
        c.b_left = -t.left.minus[1] / t.left.minus[0];
    } else {
        c.flags.empty_left = true;
    }
    if t.right.plus[0] > T::zero() {
        c.b_right = t.right.plus[1] / t.right.plus[0];
    } else {
        c.flags.empty_right = true;
    }
    c
}

/// `H_i = (T^[0]_i - 3 T^[2]_i) / (3 Δx_i)`, `H` at the faces from the
/// full-range surface moments, `W = (|S|^[0] - 2 |S|^[1]) / 2`.
pub fn sm_closures<T: Real>(t: &TallyMoments<T>, grid: &Grid<T>) -> SmClosures<T> {
    let three = T::lit(3.0);
    let mut c = SmClosures::diffusion(t.cells());
    for (i, h) in c.h.iter_mut().enumerate() {
        let (t0, t2) = (t.track[0][i], t.track[2][i]);
        if t0 > T::zero() {
            *h = (t0 - three * t2) / (three * grid.width(i));
        } else {
            c.flags.empty_cells.push(i);
        }
    }
    let face_h = |s: &SurfaceMoments<T>| (s.full(0) - three * s.full(2)) / three;
    let w = |s: &SurfaceMoments<T>| (s.absolute(0) - T::lit(2.0) * s.absolute(1)) / T::lit(2.0);
    c.h_left = face_h(&t.left);
    c.h_right = face_h(&t.right);
    c.w_left = w(&t.left);
    c.w_right = w(&t.right);
    c.flags.empty_left = !(t.left.absolute(0) > T::zero());
    c.flags.empty_right = !(t.right.absolute(0) > T::zero());
    c
}
