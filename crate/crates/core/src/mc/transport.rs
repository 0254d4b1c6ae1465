//! Random walk with implicit capture and Russian roulette.
//!
//! Positions are integers on a lattice of `M = I_L · 2^k ≤ 2^46` points that
//! refines every grid of the hierarchy, so a flight's extent inside any cell is
//! an exact integer and the walk itself never depends on the tally grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tally::{quantize, Side, TallySet};
use crate::error::{Error, Result};
use crate::grid::GridHierarchy;
use crate::problem::SlabProblem;
use crate::rng::{RngStream, StreamKey};
use crate::scalar::Real;

const LATTICE_BITS: u32 = 46;
/// Surface scores with `|μ|` below this are capped.
const GRAZING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSettings {
    /// Roulette threshold `w_min`.
    pub min_weight: f64,
    /// Weight `w_rr` given to roulette survivors.
    pub survival_weight: f64,
    /// Events per history before the walk is aborted.
    pub event_cap: u64,
}

impl Default for WalkSettings {
    fn default() -> Self {
        Self {
            min_weight: 1e-4,
            survival_weight: 2e-4,
            event_cap: 1_000_000,
        }
    }
}

/// A particle in flight. `x` is in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub mu: f64,
    pub w: f64,
    pub alive: bool,
}

/// Weight bookkeeping of one or more histories.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HistoryStats {
    pub events: u64,
    pub collisions: u64,
    pub leaked: f64,
    pub absorbed: f64,
    /// Net weight created by roulette (survivor boosts minus killed weight).
    pub roulette: f64,
}

#[derive(Debug, Clone, Copy)]
struct LatticeRegion {
    lo: i64,
    hi: i64,
    sigma_t: f64,
    c: f64,
}

#[derive(Debug, Clone, Copy)]
enum Birth {
    Volume(usize),
    Left,
    Right,
}

/// Geometry, materials and source of a problem mapped onto the lattice of a
/// grid hierarchy.
#[derive(Debug, Clone)]
pub struct Transport {
    lattice: i64,
    unit: f64,
    regions: Vec<LatticeRegion>,
    /// Cumulative emission weights and what each one samples.
    births: Vec<(f64, Birth)>,
    total_source: f64,
    cell_size: Vec<i64>,
    settings: WalkSettings,
}

impl Transport {
    pub fn new<T: Real>(problem: &SlabProblem<T>, hierarchy: &GridHierarchy<T>) -> Result<Self> {
        Self::with_settings(problem, hierarchy, WalkSettings::default())
    }

    pub fn with_settings<T: Real>(
        problem: &SlabProblem<T>,
        hierarchy: &GridHierarchy<T>,
        settings: WalkSettings,
    ) -> Result<Self> {
        let finest = hierarchy.finest().cells() as i64;
        let shift = LATTICE_BITS - (63 - finest.leading_zeros()).min(LATTICE_BITS);
        let lattice = finest << shift;
        let length = problem.length().as_f64();
        let unit = length / lattice as f64;
        let base = hierarchy.level(0);
        let per_base = lattice / base.cells() as i64;

        let mut regions = Vec::with_capacity(problem.regions().len());
        let cell_region = base.regions();
        let mut start = 0;
        for j in 1..=cell_region.len() {
            if j == cell_region.len() || cell_region[j] != cell_region[start] {
                let m = &problem.regions()[cell_region[start]].material;
                regions.push(LatticeRegion {
                    lo: start as i64 * per_base,
                    hi: j as i64 * per_base,
                    sigma_t: m.sigma_t.as_f64(),
                    c: m.scattering_ratio().as_f64(),
                });
                start = j;
            }
        }

        let mut births = Vec::new();
        let mut acc = 0.0;
        for (k, r) in problem.regions().iter().enumerate() {
            let s = (r.material.q * r.width()).as_f64();
            if s > 0.0 {
                acc += s;
                births.push((acc, Birth::Volume(k)));
            }
        }
        for (j, birth) in [
            (problem.left().current_in.as_f64(), Birth::Left),
            (problem.right().current_in.as_f64(), Birth::Right),
        ] {
            if j > 0.0 {
                acc += j;
                births.push((acc, birth));
            }
        }
        if !(acc > 0.0) {
            return Err(Error::config("total source is zero: nothing to simulate"));
        }

        let cell_size = hierarchy
            .grids()
            .iter()
            .map(|g| lattice / g.cells() as i64)
            .collect();
        Ok(Self {
            lattice,
            unit,
            regions,
            births,
            total_source: acc,
            cell_size,
            settings,
        })
    }

    pub fn settings(&self) -> &WalkSettings {
        &self.settings
    }

    /// `Q_total = ∫ q dx + J_in^+ + |J_in^-|`.
    pub fn total_source(&self) -> f64 {
        self.total_source
    }

    pub fn length(&self) -> f64 {
        self.lattice as f64 * self.unit
    }

    /// Empty tallies bound to level `level` of the hierarchy.
    pub fn tallies(&self, level: usize) -> TallySet {
        let cs = self.cell_size[level];
        TallySet::empty(level, (self.lattice / cs) as usize, cs, self.unit, self.total_source)
    }

    fn to_lattice(&self, x: f64) -> i64 {
        ((x / self.unit).round() as i64).clamp(0, self.lattice)
    }

    /// Samples a source particle: volumetric births uniform within a region
    /// chosen by emission rate, boundary births with the `|μ|`-weighted law.
    pub fn sample_source(&self, rng: &mut RngStream) -> Particle {
        let xi = rng.uniform() * self.total_source;
        let k = self.births.partition_point(|&(c, _)| c <= xi).min(self.births.len() - 1);
        match self.births[k].1 {
            Birth::Volume(r) => {
                let reg = &self.regions[r];
                let span = (reg.hi - reg.lo) as f64;
                let pos = (reg.lo + (rng.uniform() * span) as i64).min(reg.hi - 1);
                Particle {
                    x: pos as f64 * self.unit,
                    mu: rng.direction(),
                    w: 1.0,
                    alive: true,
                }
            }
            Birth::Left => Particle {
                x: 0.0,
                mu: rng.uniform_open0().sqrt(),
                w: 1.0,
                alive: true,
            },
            Birth::Right => Particle {
                x: self.length(),
                mu: -rng.uniform_open0().sqrt(),
                w: 1.0,
                alive: true,
            },
        }
    }

    #[inline]
    fn region_ahead(&self, x: i64, mu: f64) -> usize {
        let k = if mu > 0.0 {
            self.regions.partition_point(|r| r.hi <= x)
        } else {
            self.regions.partition_point(|r| r.hi < x)
        };
        k.min(self.regions.len() - 1)
    }

    fn track_factors(mu: f64, w: f64) -> [i128; 3] {
        let f = w / mu.abs();
        [quantize(f), quantize(f * mu), quantize(f * mu * mu)]
    }

    fn surface_factors(mu: f64, w: f64) -> [i128; 3] {
        let a = mu.abs();
        let f0 = if a < GRAZING { w / GRAZING } else { w / a };
        [quantize(f0), quantize(w), quantize(w * a)]
    }

    /// Scores a straight segment between two physical positions.
    pub fn score_segment(&self, tallies: &mut TallySet, from: f64, to: f64, mu: f64, w: f64) -> u64 {
        tallies.score_track(self.to_lattice(from), self.to_lattice(to), &Self::track_factors(mu, w))
    }

    /// Follows one particle from birth to leakage or roulette kill, scoring
    /// into `tallies`.
    pub fn simulate_history(
        &self,
        particle: Particle,
        tallies: &mut TallySet,
        rng: &mut RngStream,
    ) -> Result<HistoryStats> {
        let mut stats = HistoryStats::default();
        let cs = self.cell_size[tallies.level()];
        debug_assert_eq!(tallies.cells() as i64 * cs, self.lattice);
        let mut x = self.to_lattice(particle.x);
        let mut mu = particle.mu;
        let mut w = particle.w;
        if mu == 0.0 {
            mu = rng.direction();
        }
        if x == 0 && mu > 0.0 {
            tallies.score_surface(Side::Left, mu, &Self::surface_factors(mu, w));
            stats.events += 1;
        } else if x == self.lattice && mu < 0.0 {
            tallies.score_surface(Side::Right, mu, &Self::surface_factors(mu, w));
            stats.events += 1;
        }

        loop {
            let mut tau = -rng.uniform_open0().ln();
            let factors = Self::track_factors(mu, w);
            let a = mu.abs();
            let mut k = self.region_ahead(x, mu);
            let collided_in = loop {
                let r = &self.regions[k];
                let target = if mu > 0.0 { r.hi } else { r.lo };
                let extent = (target - x).abs();
                let optical = r.sigma_t * extent as f64 * self.unit / a;
                if optical > tau {
                    let dp = ((tau / r.sigma_t * a / self.unit).round() as i64).min(extent);
                    let next = if mu > 0.0 { x + dp } else { x - dp };
                    stats.events += tallies.score_track(x, next, &factors);
                    x = next;
                    break Some(k);
                }
                stats.events += tallies.score_track(x, target, &factors);
                tau -= optical;
                x = target;
                if x == 0 || x == self.lattice {
                    let side = if x == 0 { Side::Left } else { Side::Right };
                    tallies.score_surface(side, mu, &Self::surface_factors(mu, w));
                    stats.events += 1;
                    stats.leaked += w;
                    break None;
                }
                k = if mu > 0.0 { k + 1 } else { k - 1 };
            };
            let Some(k) = collided_in else {
                return Ok(stats);
            };

            stats.collisions += 1;
            stats.events += 1;
            let c = self.regions[k].c;
            stats.absorbed += w * (1.0 - c);
            w *= c;
            if w == 0.0 {
                return Ok(stats);
            }
            if w < self.settings.min_weight {
                let ws = self.settings.survival_weight;
                if rng.uniform() * ws < w {
                    stats.roulette += ws - w;
                    w = ws;
                } else {
                    stats.roulette -= w;
                    return Ok(stats);
                }
            }
            if stats.events >= self.settings.event_cap {
                return Err(Error::EventCap {
                    cap: self.settings.event_cap,
                    stream: (0, tallies.level(), 0, 0),
                });
            }
            mu = rng.direction();
        }
    }

    /// Runs `histories` source histories of ensemble `key`, tallying on level
    /// `level`. The result does not depend on the number of worker threads.
    pub fn run_ensemble(&self, level: usize, histories: u64, key: StreamKey) -> Result<(TallySet, HistoryStats)> {
        let run = |k: u64, acc: &mut (TallySet, HistoryStats)| -> Result<()> {
            let mut rng = key.history(k);
            let p = self.sample_source(&mut rng);
            let s = self.simulate_history(p, &mut acc.0, &mut rng).map_err(|e| match e {
                Error::EventCap { cap, .. } => Error::EventCap {
                    cap,
                    stream: (key.seed, key.level, key.realization, k),
                },
                e => e,
            })?;
            acc.0.add_history(s.events);
            merge_stats(&mut acc.1, &s);
            Ok(())
        };
        let empty = || (self.tallies(level), HistoryStats::default());
        (0..histories as usize)
            .into_par_iter()
            .with_min_len(256)
            .try_fold(empty, |mut acc, k| run(k as u64, &mut acc).map(|_| acc))
            .try_reduce(empty, |mut a, b| {
                a.0.merge(&b.0)?;
                merge_stats(&mut a.1, &b.1);
                Ok(a)
            })
    }
}

/// Floating-point weight sums depend on the reduction order; they are
/// diagnostics only and never feed the tallies.
fn merge_stats(a: &mut HistoryStats, b: &HistoryStats) {
    a.events += b.events;
    a.collisions += b.collisions;
    a.leaked += b.leaked;
    a.absorbed += b.absorbed;
    a.roulette += b.roulette;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn void_transport(cells: usize) -> Transport {
        let p = SlabProblem::<f64>::uniform(1.0, 0.0, 0.0, 1.0);
        let h = GridHierarchy::single(&p, cells).unwrap();
        Transport::new(&p, &h).unwrap()
    }

    #[test]
    fn streaming_particle_scores_each_cell() {
        let t = void_transport(4);
        let mut tallies = t.tallies(0);
        let mut rng = StreamKey::new(0, 0, 0).history(0);
        let p = Particle {
            x: 0.0,
            mu: 1.0,
            w: 1.0,
            alive: true,
        };
        let s = t.simulate_history(p, &mut tallies, &mut rng).unwrap();
        assert_eq!(s.leaked, 1.0);
        tallies.add_history(s.events);
        let m = tallies.moments::<f64>();
        for r in 0..3 {
            for i in 0..4 {
                assert!((m.track[r][i] - 0.25).abs() < 1e-12);
            }
        }
        assert!((m.left.plus[0] - 1.0).abs() < 1e-12);
        assert!((m.right.plus[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oblique_segment_scores_path_length() {
        let t = void_transport(4);
        let mut tallies = t.tallies(0);
        t.score_segment(&mut tallies, 0.0, 0.3, 0.5, 1.0);
        tallies.add_history(0);
        let m = tallies.moments::<f64>();
        assert!((m.track[0][0] - 0.5).abs() < 1e-12);
        assert!((m.track[1][0] - 0.25).abs() < 1e-12);
        assert!((m.track[2][0] - 0.125).abs() < 1e-12);
        assert!((m.track[0][1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_source_density_region_gets_no_births() {
        use crate::problem::{Incident, Material, Region};
        let mat = |q| Material {
            sigma_t: 1.0,
            sigma_s: 0.5,
            q,
        };
        let p = SlabProblem::new(
            1.0,
            vec![
                Region {
                    x_lo: 0.0,
                    x_hi: 0.5,
                    material: mat(2.0),
                },
                Region {
                    x_lo: 0.5,
                    x_hi: 1.0,
                    material: mat(0.0),
                },
            ],
            Incident::vacuum(),
            Incident::vacuum(),
        )
        .unwrap();
        let h = GridHierarchy::single(&p, 2).unwrap();
        let t = Transport::new(&p, &h).unwrap();
        let key = StreamKey::new(3, 0, 0);
        for k in 0..2000 {
            let b = t.sample_source(&mut key.history(k));
            assert!(b.x < 0.5 && b.w == 1.0 && b.mu != 0.0);
        }
    }

    #[test]
    fn zero_total_source_is_a_config_error() {
        let p = SlabProblem::<f64>::uniform(1.0, 1.0, 0.5, 0.0);
        let h = GridHierarchy::single(&p, 2).unwrap();
        assert!(matches!(Transport::new(&p, &h), Err(Error::Config(_))));
    }

    #[test]
    fn incident_source_enters_with_positive_mu() {
        use crate::problem::Incident;
        let p = SlabProblem::new(
            1.0,
            SlabProblem::<f64>::uniform(1.0, 1.0, 0.5, 0.0).regions().to_vec(),
            Incident::isotropic(2.0),
            Incident::vacuum(),
        )
        .unwrap();
        let h = GridHierarchy::single(&p, 4).unwrap();
        let t = Transport::new(&p, &h).unwrap();
        assert_eq!(t.total_source(), 1.0);
        let key = StreamKey::new(1, 0, 0);
        let n = 20_000;
        let mut mean = 0.0;
        for k in 0..n {
            let b = t.sample_source(&mut key.history(k));
            assert_eq!(b.x, 0.0);
            assert!(b.mu > 0.0);
            mean += b.mu;
        }
        // density 2μ on (0, 1]
        assert!((mean / n as f64 - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn ensemble_is_reproducible_across_thread_counts() {
        let p = SlabProblem::<f64>::test1();
        let h = GridHierarchy::build(&p, 8, 2, 1).unwrap();
        let t = Transport::new(&p, &h).unwrap();
        let key = StreamKey::new(11, 1, 2);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| t.run_ensemble(1, 3000, key).unwrap().0)
        };
        assert_eq!(run(1), run(4));
    }
}
