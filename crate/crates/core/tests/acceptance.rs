//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to some criteria.
//! `ACCEPTANCE_STRICT=1` turns any failure into a nonzero exit status.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlht_core::lo::{
    assemble_loqd, assemble_losm, qd_closures, sm_closures, solve_banded, solve_with_tallies, QdClosures, SmClosures,
};
use mlht_core::mc::Transport;
use mlht_core::mlht::{ClosureSource, Mlht};
use mlht_core::mlmc::{consistency_check, optimal_samples, run_mlmc, Estimate, MlmcResult, MlmcSettings};
use mlht_core::reference::report::partial_sum_errors;
use mlht_core::reference::{
    aitken_reference, mse_study, single_level_study, sn_solve, Quadrature, ReferenceSettings, ReferenceSolution,
};
use mlht_core::{FunctionalSpec, GridHierarchy, Incident, Material, Method, Region, SlabProblem, StreamKey};

type Check = fn() -> (bool, String);

const SEED: u64 = 1;
const METHODS: [Method; 2] = [Method::Hqd, Method::Hsm];
const C2: [f64; 3] = [0.1, 0.5, 0.9];

// Target (N_0, max W) per c2 at K = 1e4, eps = 1e-3.
const TARGET_HQD: [(usize, f64); 3] = [(62, 3.2e-4), (101, 3.5e-4), (182, 4.9e-4)];
const TARGET_HSM: [(usize, f64); 3] = [(54, 2.5e-4), (164, 2.8e-4), (200, 3.8e-4)];

fn test1_reference() -> &'static ReferenceSolution<f64> {
    static R: OnceLock<ReferenceSolution<f64>> = OnceLock::new();
    R.get_or_init(|| aitken_reference(&SlabProblem::test1(), 128, &ReferenceSettings::default()).unwrap())
}

fn c1_reference() -> (bool, String) {
    let start = Instant::now();
    let r = aitken_reference(&SlabProblem::<f64>::test1(), 128, &ReferenceSettings::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let h = GridHierarchy::build(&SlabProblem::test1(), 16, 2, 3).unwrap();
    let fd = r.functional(&FunctionalSpec::WholeDomain, &h).unwrap()[0];
    let pass = (fd - 1.37293).abs() <= 5e-4 && secs < 60.0;
    (pass, format!("F_D^ex = {fd:.7} (target 1.37293 +- 5e-4), {secs:.1} s"))
}

fn c2_single_level() -> (bool, String) {
    let p = SlabProblem::<f64>::test1();
    let r = test1_reference();
    let study = |cells, method| {
        let exact = r.averaged(cells).unwrap();
        single_level_study(&p, cells, method, 100_000, 100, SEED, &exact).unwrap()
    };
    // target (mean, sigma) of 100-run means at dx = 2^-4, K = 1e5
    let targets = [(4.41e-3, 1.15e-4), (5.18e-3, 1.20e-4)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (m, (target, sigma)) in METHODS.into_iter().zip(targets) {
        let s = study(16, m);
        let combined = (s.std_error().powi(2) + sigma * sigma).sqrt();
        let z = (s.mean() - target) / combined;
        pass &= z.abs() <= 4.0;
        detail.push(format!(
            "{m} dx=2^-4 {:.3e} +- {:.2e} vs {target:.2e} ({z:+.2} sigma)",
            s.mean(),
            s.std_error()
        ));
    }
    let qd = study(4, Method::Hqd);
    let sm = study(4, Method::Hsm);
    pass &= sm.mean() < qd.mean();
    detail.push(format!("dx=2^-2 hsm {:.3e} < hqd {:.3e}", sm.mean(), qd.mean()));
    (pass, detail.join("; "))
}

fn c3_level_errors() -> (bool, String) {
    let p = SlabProblem::<f64>::test1();
    let h = GridHierarchy::build(&p, 16, 2, 3).unwrap();
    let t = Transport::new(&p, &h).unwrap();
    let k = [10_000; 4];
    let mut pass = true;
    let mut detail = Vec::new();
    for method in METHODS {
        let m = Mlht {
            problem: &p,
            hierarchy: &h,
            source: ClosureSource::MonteCarlo {
                transport: &t,
                histories: &k,
            },
            method,
            functional: FunctionalSpec::WholeDomain,
            seed: SEED,
            tag: 0,
        };
        let sol = m.run(&[100, 50, 25, 10]).unwrap();
        let partial: Vec<Vec<f64>> = sol.partial.clone();
        let e = partial_sum_errors(&partial, test1_reference()).unwrap();
        let monotone = e.windows(2).all(|w| w[1] < w[0]);
        let last = *e.last().unwrap();
        pass &= monotone && (2.5e-3..=5.5e-3).contains(&last);
        let s: Vec<String> = e.iter().map(|v| format!("{v:.2e}")).collect();
        detail.push(format!("{method} [{}]", s.join(", ")));
    }
    (pass, detail.join("; "))
}

fn test2_runs() -> &'static Vec<(Method, f64, MlmcResult)> {
    static R: OnceLock<Vec<(Method, f64, MlmcResult)>> = OnceLock::new();
    R.get_or_init(|| {
        let mut out = Vec::new();
        for method in METHODS {
            for c2 in C2 {
                let p = SlabProblem::<f64>::test2(c2);
                let h = GridHierarchy::build(&p, 16, 2, 3).unwrap();
                let t = Transport::new(&p, &h).unwrap();
                let k = [10_000; 4];
                let m = Mlht {
                    problem: &p,
                    hierarchy: &h,
                    source: ClosureSource::MonteCarlo {
                        transport: &t,
                        histories: &k,
                    },
                    method,
                    functional: FunctionalSpec::WholeDomain,
                    seed: SEED,
                    tag: 0,
                };
                let r = run_mlmc(&m, &MlmcSettings::default()).unwrap().result;
                out.push((method, c2, r));
            }
        }
        out
    })
}

fn target_row(method: Method, i: usize) -> (usize, f64) {
    match method {
        Method::Hqd => TARGET_HQD[i],
        Method::Hsm => TARGET_HSM[i],
    }
}

fn c4_rates() -> (bool, String) {
    let mut pass = true;
    let mut detail = Vec::new();
    for method in METHODS {
        let mut close = 0;
        for (i, c2) in C2.into_iter().enumerate() {
            let (_, _, r) = test2_runs().iter().find(|(m, c, _)| *m == method && *c == c2).unwrap();
            let rates = &r.rates[0];
            let (a, b, g) = (
                rates.alpha.unwrap_or(f64::NAN),
                rates.beta.unwrap_or(f64::NAN),
                rates.gamma.unwrap_or(f64::NAN),
            );
            let n = r.samples();
            let ratio = n[0] as f64 / target_row(method, i).0 as f64;
            close += usize::from((0.5..=2.0).contains(&ratio));
            pass &= (1.8..=2.2).contains(&a) && b > g && (0.4..=0.9).contains(&g);
            pass &= n[1..].iter().all(|&x| x == 10) && n[0] > 10;
            detail.push(format!("{method} c2={c2}: a={a:.2} b={b:.2} g={g:.2} N={n:?}"));
        }
        pass &= close >= 2;
        detail.push(format!("{method} N0 within 2x in {close}/3"));
    }
    (pass, detail.join("; "))
}

fn c5_weak() -> (bool, String) {
    let limit = 1e-3 / 2f64.sqrt();
    let mut pass = true;
    let mut detail = Vec::new();
    for (method, c2, r) in test2_runs() {
        let i = C2.iter().position(|c| c == c2).unwrap();
        let target = target_row(*method, i).1;
        let w = r.weak[0].max;
        pass &= w < limit && (0.5..=2.0).contains(&(w / target));
        detail.push(format!("{method} c2={c2}: {w:.2e} (target {target:.1e})"));
    }
    (pass, format!("max W < {limit:.2e}: {}", detail.join(", ")))
}

fn c6_mse() -> (bool, String) {
    let p = SlabProblem::<f64>::test1();
    let h = GridHierarchy::build(&p, 16, 2, 3).unwrap();
    let t = Transport::new(&p, &h).unwrap();
    let k = [10_000; 4];
    let mut pass = true;
    let mut detail = Vec::new();
    for (functional, eps) in [(FunctionalSpec::WholeDomain, 1e-3), (FunctionalSpec::CoarseCell(8), 1e-4)] {
        let exact = test1_reference().functional(&functional, &h).unwrap();
        for method in METHODS {
            let m = Mlht {
                problem: &p,
                hierarchy: &h,
                source: ClosureSource::MonteCarlo {
                    transport: &t,
                    histories: &k,
                },
                method,
                functional,
                seed: 0,
                tag: 0,
            };
            let settings = MlmcSettings {
                epsilon: eps,
                ..MlmcSettings::default()
            };
            let s = mse_study(&m, &settings, &exact, 10, 100 * SEED, None).unwrap();
            let mse = s.worst_mean_mse();
            pass &= mse < eps * eps;
            detail.push(format!("{functional} {method}: {mse:.2e} < {:.0e}", eps * eps));
        }
    }
    (pass, detail.join("; "))
}

fn c7_telescoping() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for p in [SlabProblem::<f64>::test1(), SlabProblem::test2(0.5)] {
        let h = GridHierarchy::build(&p, 16, 2, 3).unwrap();
        let fine = GridHierarchy::single(&p, 128 * 8).unwrap();
        let af = sn_solve(&p, fine.level(0), Quadrature::DoubleGauss, 32, 1e-12).unwrap();
        for method in METHODS {
            let m = Mlht {
                problem: &p,
                hierarchy: &h,
                source: ClosureSource::Exact(&af),
                method,
                functional: FunctionalSpec::WholeDomain,
                seed: 0,
                tag: 0,
            };
            let sol = m.run(&[1, 1, 1, 1]).unwrap();
            let g = h.finest();
            let (direct, _) = solve_with_tallies(&p, g, method, &af.moments(g.cells(), 3).unwrap()).unwrap();
            for (a, b) in sol.flux().iter().zip(&direct.phi) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    (worst <= 1e-10, format!("max |<phi_L> - phi_L| = {worst:.2e}"))
}

fn random_problem(rng: &mut ChaCha8Rng, base_cells: usize) -> SlabProblem<f64> {
    let length = rng.random_range(0.2..5.0);
    let mut cuts: Vec<usize> = (1..base_cells).filter(|_| rng.random_bool(0.3)).collect();
    cuts.truncate(3);
    let mut edges = vec![0];
    edges.extend(cuts);
    edges.push(base_cells);
    let at = |i: usize| if i == base_cells { length } else { length * i as f64 / base_cells as f64 };
    let regions = edges
        .windows(2)
        .map(|w| {
            let sigma_t = rng.random_range(0.05..10.0);
            Region {
                x_lo: at(w[0]),
                x_hi: at(w[1]),
                material: Material {
                    sigma_t,
                    sigma_s: sigma_t * rng.random_range(0.0..0.99),
                    q: rng.random_range(0.0..2.0),
                },
            }
        })
        .collect();
    let incident = |rng: &mut ChaCha8Rng| {
        if rng.random_bool(0.5) {
            Incident::vacuum()
        } else {
            Incident::isotropic(rng.random_range(0.0..3.0))
        }
    };
    let (l, r) = (incident(rng), incident(rng));
    SlabProblem::new(length, regions, l, r).unwrap()
}

fn c8_diffusion_limit() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cases = 200;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let base = rng.random_range(1..=12);
        let p = random_problem(&mut rng, base);
        let h = GridHierarchy::build(&p, base, rng.random_range(2..=3), rng.random_range(0..=3)).unwrap();
        let g = h.finest();
        let qd = solve_banded(&assemble_loqd(&p, g, &QdClosures::diffusion(g.cells())).unwrap()).unwrap();
        let sm = solve_banded(&assemble_losm(&p, g, &SmClosures::diffusion(g.cells())).unwrap()).unwrap();
        let pairs = qd
            .phi
            .iter()
            .zip(&sm.phi)
            .chain(qd.current.iter().zip(&sm.current))
            .chain([(&qd.phi_left, &sm.phi_left), (&qd.phi_right, &sm.phi_right)]);
        for (a, b) in pairs {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    (worst <= 1e-10, format!("{cases} cases, max difference {worst:.2e}"))
}

fn c9_restriction() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cases = 120;
    let mut failures = 0;
    for case in 0..cases {
        let base = rng.random_range(1..=8);
        let p = random_problem(&mut rng, base);
        let a = rng.random_range(2..=3);
        let levels = rng.random_range(1..=3);
        let h = GridHierarchy::build(&p, base, a, levels).unwrap();
        let t = Transport::new(&p, &h).unwrap();
        let key = StreamKey::new(case, levels, 0);
        let histories = rng.random_range(20..200);
        let (fine, _) = t.run_ensemble(levels, histories, key).unwrap();
        let coarse_level = rng.random_range(0..levels);
        let (direct, _) = t.run_ensemble(coarse_level, histories, key).unwrap();
        let restricted = fine.restrict(h.children_per_cell(coarse_level, levels), coarse_level).unwrap();
        let (mr, md) = (restricted.moments::<f64>(), direct.moments::<f64>());
        let g = h.level(coarse_level);
        let same = restricted.lineage() == direct.lineage()
            && qd_closures(&mr) == qd_closures(&md)
            && sm_closures(&mr, g) == sm_closures(&md, g);
        failures += usize::from(!same);
    }
    (failures == 0, format!("{cases} cases, {failures} mismatches"))
}

fn c10_eta() -> (bool, String) {
    let max_eta = test2_runs().iter().map(|(_, _, r)| r.max_abs_eta()).fold(0.0, f64::max);
    let configs_ok = max_eta < 1.0;

    // fault: level-1 correction with flipped sign, on a coarse hierarchy
    // where the correction is large against the statistical error
    let p = SlabProblem::<f64>::test1();
    let h = GridHierarchy::build(&p, 4, 2, 3).unwrap();
    let t = Transport::new(&p, &h).unwrap();
    let k = [10_000; 4];
    let m = Mlht {
        problem: &p,
        hierarchy: &h,
        source: ClosureSource::MonteCarlo {
            transport: &t,
            histories: &k,
        },
        method: Method::Hqd,
        functional: FunctionalSpec::WholeDomain,
        seed: SEED,
        tag: 0,
    };
    let r = run_mlmc(&m, &MlmcSettings::default()).unwrap().result;
    let honest = r.levels[1].eta[0].unwrap();
    let (l0, l1) = (&r.levels[0], &r.levels[1]);
    let est = |mean, variance, samples| Estimate {
        mean,
        variance,
        samples,
    };
    let flipped = consistency_check(
        est(l0.mean_f[0], l0.var_f[0], l0.samples),
        est(l1.mean_f[0], l1.var_f[0], l1.samples),
        est(-l1.mean_df[0], l1.var_df[0], l1.samples),
    );
    let pass = configs_ok && honest.abs() < 1.0 && flipped.abs() >= 1.0;
    (
        pass,
        format!("max |eta| on Test 2 runs {max_eta:.3}; I0=4 level 1: eta {honest:+.3}, sign-flipped {flipped:+.3}"),
    )
}

fn c11_optimizer() -> (bool, String) {
    let v = [1.0; 4];
    let c = [1.0; 4];
    let n = optimal_samples(&v, &c, 1.0);
    let v2 = [3.0e-5, 2.0e-10, 9.0e-12, 6.0e-12];
    let c2 = [1.5e5, 2.6e5, 4.7e5, 9.0e5];
    let base = optimal_samples(&v2, &c2, 1e-3);
    let invariant = [1e-6, 0.37, 42.0, 1e9].into_iter().all(|s| {
        let scaled: Vec<f64> = c2.iter().map(|x| x * s).collect();
        optimal_samples(&v2, &scaled, 1e-3) == base
    });
    (
        n == vec![8; 4] && invariant,
        format!("N = {n:?}; scaled-cost allocation {base:?} invariant: {invariant}"),
    )
}

fn main() {
    let checks: [(u32, &str, Check); 11] = [
        (1, "reference functional", c1_reference),
        (2, "single-level accuracy", c2_single_level),
        (3, "multilevel level errors", c3_level_errors),
        (4, "MLMC rates", c4_rates),
        (5, "weak convergence", c5_weak),
        (6, "MSE study", c6_mse),
        (7, "exact-closure telescoping", c7_telescoping),
        (8, "diffusion-limit equivalence", c8_diffusion_limit),
        (9, "restriction consistency", c9_restriction),
        (10, "consistency diagnostic", c10_eta),
        (11, "optimizer identities", c11_optimizer),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, check) in checks {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = check();
        failed += usize::from(!pass);
        println!(
            "[{}] {id:>2} {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
