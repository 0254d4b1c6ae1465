//! Nested uniform spatial grids `G_0 ⊂ G_1 ⊂ … ⊂ G_L`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Material, SlabProblem};
use crate::scalar::Real;

/// A uniform grid of the slab on one level of the hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Grid<T: Real> {
    level: usize,
    edges: Vec<T>,
    widths: Vec<T>,
    materials: Vec<Material<T>>,
    regions: Vec<usize>,
}

impl<T: Real> Grid<T> {
    pub fn level(&self) -> usize {
        self.level
    }

    /// Number of cells `I_ℓ`.
    pub fn cells(&self) -> usize {
        self.widths.len()
    }

    /// Cell edges `x_0 … x_I`.
    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    /// Cell widths `Δx_i`.
    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    pub fn width(&self, cell: usize) -> T {
        self.widths[cell]
    }

    pub fn material(&self, cell: usize) -> &Material<T> {
        &self.materials[cell]
    }

    pub fn materials(&self) -> &[Material<T>] {
        &self.materials
    }

    /// Region index of each cell.
    pub fn regions(&self) -> &[usize] {
        &self.regions
    }

    pub fn length(&self) -> T {
        *self.edges.last().expect("grid has edges")
    }

    pub fn centers(&self) -> Vec<T> {
        self.edges
            .windows(2)
            .map(|e| (e[0] + e[1]) / T::lit(2.0))
            .collect()
    }
}

/// Hierarchy of uniformly refined grids with `I_ℓ = a^ℓ I_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GridHierarchy<T: Real> {
    refinement: usize,
    base_cells: usize,
    levels: Vec<Grid<T>>,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Edge `i` of a grid with `cells` cells. The position is computed from the
/// reduced fraction `i / cells`, so the same physical edge evaluates to the
/// same bits on every level and in every hierarchy.
fn edge_position<T: Real>(length: T, i: usize, cells: usize) -> T {
    if i == 0 {
        return T::zero();
    }
    let g = gcd(i, cells);
    let (num, den) = (i / g, cells / g);
    T::from_count(num) * length / T::from_count(den)
}

impl<T: Real> GridHierarchy<T> {
    /// Builds `levels + 1` nested grids over the problem's slab.
    ///
    /// Every region interface must coincide with an edge of the coarsest grid.
    pub fn build(problem: &SlabProblem<T>, base_cells: usize, refinement: usize, levels: usize) -> Result<Self> {
        if base_cells == 0 {
            return Err(Error::config("coarsest grid needs at least one cell"));
        }
        if refinement < 2 {
            return Err(Error::config(format!("refinement factor must be >= 2, got {refinement}")));
        }
        let finest = refinement
            .checked_pow(levels as u32)
            .and_then(|f| f.checked_mul(base_cells))
            .ok_or_else(|| Error::config("hierarchy too deep"))?;
        if finest > (1 << 24) {
            return Err(Error::config(format!("finest grid would have {finest} cells")));
        }

        let length = problem.length();
        let base_edge = region_base_edges(problem, base_cells)?;
        let base_region: Vec<usize> = (0..base_cells)
            .map(|j| base_edge.partition_point(|&e| e <= j) - 1)
            .collect();

        let mut grids = Vec::with_capacity(levels + 1);
        let mut cells = base_cells;
        let mut per_base = 1;
        for level in 0..=levels {
            let edges: Vec<T> = (0..=cells).map(|i| edge_position(length, i, cells)).collect();
            let widths = edges.windows(2).map(|e| e[1] - e[0]).collect();
            let regions: Vec<usize> = (0..cells).map(|i| base_region[i / per_base]).collect();
            let materials = regions.iter().map(|&r| problem.regions()[r].material).collect();
            grids.push(Grid {
                level,
                edges,
                widths,
                materials,
                regions,
            });
            cells *= refinement;
            per_base *= refinement;
        }
        Ok(Self {
            refinement,
            base_cells,
            levels: grids,
        })
    }

    /// Single grid of `cells` uniform cells (a hierarchy with `L = 0`).
    pub fn single(problem: &SlabProblem<T>, cells: usize) -> Result<Self> {
        Self::build(problem, cells, 2, 0)
    }

    pub fn refinement(&self) -> usize {
        self.refinement
    }

    pub fn base_cells(&self) -> usize {
        self.base_cells
    }

    /// Index `L` of the finest level.
    pub fn finest_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, level: usize) -> &Grid<T> {
        &self.levels[level]
    }

    pub fn grids(&self) -> &[Grid<T>] {
        &self.levels
    }

    pub fn finest(&self) -> &Grid<T> {
        self.levels.last().expect("at least one level")
    }

    /// Number of cells of level `to` contained in one cell of level `from`.
    pub fn children_per_cell(&self, from: usize, to: usize) -> usize {
        debug_assert!(to >= from);
        self.refinement.pow((to - from) as u32)
    }
}

/// Positions of the region boundaries as edge indices of the coarsest grid,
/// including `0` and `base_cells`.
fn region_base_edges<T: Real>(problem: &SlabProblem<T>, base_cells: usize) -> Result<Vec<usize>> {
    let length = problem.length();
    let mut edges = vec![0];
    for x in problem.interfaces() {
        let t = (x / length * T::from_count(base_cells)).as_f64();
        let k = t.round();
        if (t - k).abs() > 1e-9 * (1.0 + t.abs()) || k <= 0.0 || k >= base_cells as f64 {
            return Err(Error::UnresolvedInterface {
                x: x.as_f64(),
                cells: base_cells,
            });
        }
        edges.push(k as usize);
    }
    edges.push(base_cells);
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("two region interfaces map onto the same coarse edge"));
    }
    Ok(edges)
}
