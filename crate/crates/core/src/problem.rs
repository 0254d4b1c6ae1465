//! Slab transport problem: geometry, piecewise-constant materials, sources
//! and isotropic incident boundary data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Material properties of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Material<T: Real> {
    pub sigma_t: T,
    pub sigma_s: T,
    pub q: T,
}

impl<T: Real> Material<T> {
    /// Scattering ratio `sigma_s / sigma_t` (zero in a void).
    pub fn scattering_ratio(&self) -> T {
        if self.sigma_t > T::zero() {
            self.sigma_s / self.sigma_t
        } else {
            T::zero()
        }
    }

    pub fn sigma_a(&self) -> T {
        self.sigma_t - self.sigma_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Region<T: Real> {
    pub x_lo: T,
    pub x_hi: T,
    pub material: Material<T>,
}

impl<T: Real> Region<T> {
    pub fn width(&self) -> T {
        self.x_hi - self.x_lo
    }
}

/// Incoming isotropic angular flux at one face, stored as the partial scalar
/// flux and the (non-negative) magnitude of the incoming partial current.
///
/// For an isotropic incident distribution `current_in = phi_in / 2`. The sign
/// convention of the low-order boundary conditions is applied by
/// [`SlabProblem::left_incoming`] / [`SlabProblem::right_incoming`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Incident<T: Real> {
    pub phi_in: T,
    pub current_in: T,
}

impl<T: Real> Incident<T> {
    pub fn vacuum() -> Self {
        Self {
            phi_in: T::zero(),
            current_in: T::zero(),
        }
    }

    pub fn isotropic(phi_in: T) -> Self {
        Self {
            phi_in,
            current_in: phi_in / T::lit(2.0),
        }
    }

    pub fn is_vacuum(&self) -> bool {
        self.phi_in == T::zero() && self.current_in == T::zero()
    }
}

/// One-dimensional slab `[0, length]` with isotropic scattering and source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SlabProblem<T: Real> {
    length: T,
    regions: Vec<Region<T>>,
    left: Incident<T>,
    right: Incident<T>,
}

impl<T: Real> SlabProblem<T> {
    pub fn new(
        length: T,
        regions: Vec<Region<T>>,
        left: Incident<T>,
        right: Incident<T>,
    ) -> Result<Self> {
        let problem = Self {
            length,
            regions,
            left,
            right,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// One region, `sigma_t = 1`, `c = 0.9`, `q = 1`, vacuum boundaries, `X = 1`.
    pub fn test1() -> Self {
        Self::uniform(T::one(), T::one(), T::lit(0.9), T::one())
    }

    /// Two regions split at `x = 0.5`: `c = 0.9` on the left and `c2` on the
    /// right, `sigma_t = 1`, `q = 1`, vacuum boundaries.
    pub fn test2(c2: T) -> Self {
        let half = T::lit(0.5);
        let one = T::one();
        let material = |c: T| Material {
            sigma_t: one,
            sigma_s: c,
            q: one,
        };
        Self::new(
            one,
            vec![
                Region {
                    x_lo: T::zero(),
                    x_hi: half,
                    material: material(T::lit(0.9)),
                },
                Region {
                    x_lo: half,
                    x_hi: one,
                    material: material(c2),
                },
            ],
            Incident::vacuum(),
            Incident::vacuum(),
        )
        .expect("valid built-in problem")
    }

    pub fn uniform(length: T, sigma_t: T, c: T, q: T) -> Self {
        Self::new(
            length,
            vec![Region {
                x_lo: T::zero(),
                x_hi: length,
                material: Material {
                    sigma_t,
                    sigma_s: c * sigma_t,
                    q,
                },
            }],
            Incident::vacuum(),
            Incident::vacuum(),
        )
        .expect("valid uniform problem")
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > T::zero()) || !self.length.is_finite() {
            return Err(Error::config(format!("slab length must be positive, got {}", self.length)));
        }
        let first = self
            .regions
            .first()
            .ok_or_else(|| Error::config("at least one region is required"))?;
        if first.x_lo != T::zero() {
            return Err(Error::config(format!("first region must start at 0, starts at {}", first.x_lo)));
        }
        let last = self.regions.last().expect("non-empty");
        if last.x_hi != self.length {
            return Err(Error::config(format!(
                "last region must end at the slab length {}, ends at {}",
                self.length, last.x_hi
            )));
        }
        for (k, pair) in self.regions.windows(2).enumerate() {
            if pair[0].x_hi != pair[1].x_lo {
                return Err(Error::config(format!(
                    "regions {} and {} do not tile the slab ({} != {})",
                    k,
                    k + 1,
                    pair[0].x_hi,
                    pair[1].x_lo
                )));
            }
        }
        for (k, r) in self.regions.iter().enumerate() {
            let m = &r.material;
            if !(r.x_hi > r.x_lo) {
                return Err(Error::config(format!("region {k} has non-positive width")));
            }
            if !(m.sigma_t >= T::zero()) || !(m.sigma_s >= T::zero()) || m.sigma_s > m.sigma_t {
                return Err(Error::config(format!(
                    "region {k}: need 0 <= sigma_s <= sigma_t, got sigma_s = {}, sigma_t = {}",
                    m.sigma_s, m.sigma_t
                )));
            }
            if !(m.q >= T::zero()) || !m.q.is_finite() || !m.sigma_t.is_finite() {
                return Err(Error::config(format!("region {k}: source must be finite and non-negative")));
            }
        }
        for (side, b) in [("left", &self.left), ("right", &self.right)] {
            if !(b.phi_in >= T::zero()) || !(b.current_in >= T::zero()) {
                return Err(Error::config(format!("{side} incident data must be non-negative")));
            }
            let iso = b.phi_in / T::lit(2.0);
            if (b.current_in - iso).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) * (T::one() + iso) {
                return Err(Error::config(format!(
                    "{side} incident data must be isotropic (J_in = phi_in / 2), got phi_in = {}, J_in = {}",
                    b.phi_in, b.current_in
                )));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn regions(&self) -> &[Region<T>] {
        &self.regions
    }

    pub fn left(&self) -> &Incident<T> {
        &self.left
    }

    pub fn right(&self) -> &Incident<T> {
        &self.right
    }

    /// `(phi_in^+, J_in^+)` at `x = 0`; the current is non-negative.
    pub fn left_incoming(&self) -> (T, T) {
        (self.left.phi_in, self.left.current_in)
    }

    /// `(phi_in^-, J_in^-)` at `x = X`; the current is non-positive.
    pub fn right_incoming(&self) -> (T, T) {
        (self.right.phi_in, -self.right.current_in)
    }

    /// Index of the region owning `x`. Interior interfaces belong to the
    /// region on their right; `x = X` belongs to the last region.
    pub fn region_index(&self, x: T) -> Result<usize> {
        if !(x >= T::zero() && x <= self.length) {
            return Err(Error::Domain {
                x: x.as_f64(),
                length: self.length.as_f64(),
            });
        }
        let k = self.regions.partition_point(|r| r.x_hi <= x);
        Ok(k.min(self.regions.len() - 1))
    }

    pub fn material_at(&self, x: T) -> Result<Material<T>> {
        Ok(self.regions[self.region_index(x)?].material)
    }

    /// Region interfaces strictly inside the slab.
    pub fn interfaces(&self) -> impl Iterator<Item = T> + '_ {
        self.regions.iter().skip(1).map(|r| r.x_lo)
    }

    /// `int_D q dx`.
    pub fn volumetric_source(&self) -> T {
        self.regions.iter().map(|r| r.material.q * r.width()).sum()
    }

    /// Total particle emission rate: volumetric source plus incoming partial currents.
    pub fn total_source(&self) -> T {
        self.volumetric_source() + self.left.current_in + self.right.current_in
    }

    pub fn max_scattering_ratio(&self) -> T {
        self.regions
            .iter()
            .map(|r| r.material.scattering_ratio())
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Real>(&self) -> SlabProblem<U> {
        let c = |v: T| U::lit(v.as_f64());
        SlabProblem {
            length: c(self.length),
            regions: self
                .regions
                .iter()
                .map(|r| Region {
                    x_lo: c(r.x_lo),
                    x_hi: c(r.x_hi),
                    material: Material {
                        sigma_t: c(r.material.sigma_t),
                        sigma_s: c(r.material.sigma_s),
                        q: c(r.material.q),
                    },
                })
                .collect(),
            left: Incident {
                phi_in: c(self.left.phi_in),
                current_in: c(self.left.current_in),
            },
            right: Incident {
                phi_in: c(self.right.phi_in),
                current_in: c(self.right.current_in),
            },
        }
    }
}
