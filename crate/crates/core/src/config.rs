//! JSON problem description.
//!
//! ```json
//! {
//!   "length": 1.0,
//!   "regions": [{"x_lo": 0.0, "x_hi": 1.0, "sigma_t": 1.0, "scattering_ratio": 0.9, "q": 1.0}],
//!   "bc": {"left": {"type": "vacuum"}, "right": {"type": "vacuum"}},
//!   "hierarchy": {"I0": 16, "a": 2, "L": 3}
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::problem::{Incident, Material, Region, SlabProblem};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub sigma_t: f64,
    pub scattering_ratio: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundaryConfig {
    Vacuum,
    /// Isotropic incidence. `J_in` defaults to `phi_in / 2`.
    Isotropic {
        phi_in: f64,
        #[serde(rename = "J_in", default, skip_serializing_if = "Option::is_none")]
        j_in: Option<f64>,
    },
}

impl BoundaryConfig {
    fn incident<T: Real>(&self) -> Result<Incident<T>> {
        match *self {
            Self::Vacuum => Ok(Incident::vacuum()),
            Self::Isotropic { phi_in, j_in } => {
                let j = j_in.unwrap_or(phi_in / 2.0);
                if (j - phi_in / 2.0).abs() > 1e-12 * (1.0 + phi_in.abs()) {
                    return Err(Error::config(format!(
                        "isotropic incidence needs J_in = phi_in/2, got phi_in={phi_in}, J_in={j}"
                    )));
                }
                Ok(Incident::isotropic(T::lit(phi_in)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryPair {
    pub left: BoundaryConfig,
    pub right: BoundaryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    #[serde(rename = "I0")]
    pub base_cells: usize,
    #[serde(rename = "a")]
    pub refinement: usize,
    #[serde(rename = "L")]
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub length: f64,
    pub regions: Vec<RegionConfig>,
    pub bc: BoundaryPair,
    pub hierarchy: HierarchyConfig,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn problem<T: Real>(&self) -> Result<SlabProblem<T>> {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                if !(0.0..=1.0).contains(&r.scattering_ratio) {
                    return Err(Error::config(format!(
                        "scattering ratio {} outside [0, 1]",
                        r.scattering_ratio
                    )));
                }
                Ok(Region {
                    x_lo: T::lit(r.x_lo),
                    x_hi: T::lit(r.x_hi),
                    material: Material {
                        sigma_t: T::lit(r.sigma_t),
                        sigma_s: T::lit(r.sigma_t * r.scattering_ratio),
                        q: T::lit(r.q),
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SlabProblem::new(
            T::lit(self.length),
            regions,
            self.bc.left.incident()?,
            self.bc.right.incident()?,
        )
    }

    /// Problem and hierarchy; `levels` overrides `L` from the file.
    pub fn build<T: Real>(&self, levels: Option<usize>) -> Result<(SlabProblem<T>, GridHierarchy<T>)> {
        let problem = self.problem()?;
        let h = self.hierarchy;
        let hierarchy = GridHierarchy::build(&problem, h.base_cells, h.refinement, levels.unwrap_or(h.levels))?;
        Ok((problem, hierarchy))
    }

    pub fn test1() -> Self {
        Self {
            length: 1.0,
            regions: vec![RegionConfig {
                x_lo: 0.0,
                x_hi: 1.0,
                sigma_t: 1.0,
                scattering_ratio: 0.9,
                q: 1.0,
            }],
            bc: BoundaryPair {
                left: BoundaryConfig::Vacuum,
                right: BoundaryConfig::Vacuum,
            },
            hierarchy: HierarchyConfig {
                base_cells: 16,
                refinement: 2,
                levels: 3,
            },
        }
    }

    pub fn test2(c2: f64) -> Self {
        let mut cfg = Self::test1();
        cfg.regions = vec![
            RegionConfig {
                x_hi: 0.5,
                ..cfg.regions[0].clone()
            },
            RegionConfig {
                x_lo: 0.5,
                x_hi: 1.0,
                sigma_t: 1.0,
                scattering_ratio: c2,
                q: 1.0,
            },
        ];
        cfg
    }
}
