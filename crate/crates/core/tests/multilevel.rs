use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use mlht_core::lo::{solve_with_tallies, Method};
use mlht_core::mc::Transport;
use mlht_core::mlht::{ClosureSource, Mlht};
use mlht_core::mlmc::{
    consistency_check, optimal_samples, optimal_samples_raw, run_mlmc, vector_mode_samples, Estimate, MlmcSettings,
    VectorRule,
};
use mlht_core::reference::{aitken_reference, report::partial_sum_errors, sn_solve, Quadrature, ReferenceSettings};
use mlht_core::stats::kurtosis;
use mlht_core::{FunctionalSpec, GridHierarchy, SlabProblem};

fn mlht<'a>(
    p: &'a SlabProblem<f64>,
    h: &'a GridHierarchy<f64>,
    t: &'a Transport,
    k: &'a [u64],
    method: Method,
    seed: u64,
) -> Mlht<'a, f64> {
    Mlht {
        problem: p,
        hierarchy: h,
        source: ClosureSource::MonteCarlo {
            transport: t,
            histories: k,
        },
        method,
        functional: FunctionalSpec::WholeDomain,
        seed,
        tag: 0,
    }
}

#[test]
fn exact_closures_telescope_to_the_finest_solve() {
    let p = SlabProblem::<f64>::test2(0.1);
    let h = GridHierarchy::build(&p, 8, 2, 3).unwrap();
    let fine = GridHierarchy::single(&p, 64 * 8).unwrap();
    let af = sn_solve(&p, fine.level(0), Quadrature::DoubleGauss, 16, 1e-12).unwrap();
    for method in [Method::Hqd, Method::Hsm] {
        let m = Mlht {
            problem: &p,
            hierarchy: &h,
            source: ClosureSource::Exact(&af),
            method,
            functional: FunctionalSpec::AllCoarseCells,
            seed: 0,
            tag: 0,
        };
        let sol = m.run(&[1, 1, 1, 1]).unwrap();
        let g = h.finest();
        let (direct, _) = solve_with_tallies(&p, g, method, &af.moments(g.cells(), 3).unwrap()).unwrap();
        for (a, b) in sol.flux().iter().zip(&direct.phi) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
        // functional corrections telescope the same way
        let total: Vec<f64> = (0..8)
            .map(|k| sol.levels.iter().map(|e| e.mean_df()[k]).sum())
            .collect();
        let direct_f = FunctionalSpec::AllCoarseCells.evaluate(&h, 3, &direct.phi).unwrap();
        for (a, b) in total.iter().zip(&direct_f) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn multilevel_mean_matches_single_grid_mean() {
    let p = SlabProblem::<f64>::test1();
    let h = GridHierarchy::build(&p, 4, 2, 2).unwrap();
    let t = Transport::new(&p, &h).unwrap();
    let k = [2_000; 3];
    let ml = mlht(&p, &h, &t, &k, Method::Hqd, 11).run(&[60, 30, 20]).unwrap();
    let (mut mean, mut var) = (0.0, 0.0);
    for e in &ml.levels {
        mean += e.mean_df()[0];
        var += e.var_df()[0] / e.samples() as f64;
    }

    let single = GridHierarchy::single(&p, 16).unwrap();
    let ts = Transport::new(&p, &single).unwrap();
    let s = mlht(&p, &single, &ts, &k, Method::Hqd, 12).run(&[60]).unwrap();
    let e = &s.levels[0];
    let (m1, v1) = (e.mean_df()[0], e.var_df()[0] / 60.0);
    let z = (mean - m1) / (var + v1).sqrt();
    assert!(z.abs() < 4.0, "{mean} vs {m1}, z = {z}");
}

#[test]
fn partial_sum_errors_fall_by_level() {
    let p = SlabProblem::<f64>::test1();
    let h = GridHierarchy::build(&p, 16, 2, 3).unwrap();
    let t = Transport::new(&p, &h).unwrap();
    let k = [10_000; 4];
    let reference = aitken_reference(&p, 128, &ReferenceSettings::default()).unwrap();
    let sol = mlht(&p, &h, &t, &k, Method::Hsm, 3).run(&[100, 50, 25, 10]).unwrap();
    let e = partial_sum_errors(&sol.partial, &reference).unwrap();
    // level 0 is dominated by the O(dx^2) error of G_0
    assert!((e[0] - 2.02e-2).abs() < 1.5e-3, "{e:?}");
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert!((2.5e-3..5.5e-3).contains(&e[3]), "{e:?}");
}

#[test]
fn flipped_correction_fails_the_consistency_check() {
    let p = SlabProblem::<f64>::test1();
    let h = GridHierarchy::build(&p, 4, 2, 2).unwrap();
    let t = Transport::new(&p, &h).unwrap();
    let k = [5_000; 3];
    let r = run_mlmc(&mlht(&p, &h, &t, &k, Method::Hsm, 5), &MlmcSettings::default())
        .unwrap()
        .result;
    assert!(r.eta_pass, "{}", r.max_abs_eta());
    let (l0, l1) = (&r.levels[0], &r.levels[1]);
    let est = |mean, variance, samples| Estimate {
        mean,
        variance,
        samples,
    };
    let eta = consistency_check(
        est(l0.mean_f[0], l0.var_f[0], l0.samples),
        est(l1.mean_f[0], l1.var_f[0], l1.samples),
        est(-l1.mean_df[0], l1.var_df[0], l1.samples),
    );
    assert!(eta.abs() >= 1.0, "{eta}");
}

#[test]
fn sample_allocation_scaling() {
    let v = [4.0e-5, 3.0e-10, 1.0e-11, 6.0e-12];
    let c = [1.5e5, 2.6e5, 4.7e5, 9.0e5];
    let eps = 1e-3;
    let base = optimal_samples_raw(&v, &c, eps);
    // homogeneous of degree one in V and of degree -2 in eps
    let scaled_v: Vec<f64> = v.iter().map(|x| 3.0 * x).collect();
    for (a, b) in optimal_samples_raw(&scaled_v, &c, eps).iter().zip(&base) {
        assert!((a / b - 3.0).abs() < 1e-12);
    }
    for (a, b) in optimal_samples_raw(&v, &c, eps / 2.0).iter().zip(&base) {
        assert!((a / b - 4.0).abs() < 1e-12);
    }
    let scaled_c: Vec<f64> = c.iter().map(|x| 1e-7 * x).collect();
    assert_eq!(optimal_samples(&v, &scaled_c, eps), optimal_samples(&v, &c, eps));
    // the allocation meets the variance budget
    let n = optimal_samples(&v, &c, eps);
    let budget: f64 = v.iter().zip(&n).map(|(v, &n)| v / n as f64).sum();
    assert!(budget <= eps * eps / 2.0 * (1.0 + 1e-12));
}

#[test]
fn vector_allocation_dominates_every_component() {
    let v = vec![
        vec![1.0e-5, 4.0e-5, 2.0e-6],
        vec![3.0e-10, 1.0e-11, 8.0e-10],
        vec![2.0e-11, 5.0e-12, 1.0e-12],
    ];
    let c = [1.0, 2.0, 4.0];
    let eps = 1e-3;
    for rule in [VectorRule::PerComponentMax, VectorRule::MaxVariance] {
        let n = vector_mode_samples(&v, &c, eps, rule);
        for i in 0..3 {
            let vi: Vec<f64> = v.iter().map(|row| row[i]).collect();
            let budget: f64 = vi.iter().zip(&n).map(|(v, &n)| v / n as f64).sum();
            assert!(budget <= eps * eps / 2.0 * (1.0 + 1e-12), "{rule:?} component {i}");
            if rule == VectorRule::PerComponentMax {
                let ni = optimal_samples(&vi, &c, eps);
                assert!(n.iter().zip(&ni).all(|(a, b)| a >= b));
            }
        }
    }
}

#[test]
fn normal_samples_have_kurtosis_three() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(2.0, 0.5).unwrap();
    let x: Vec<f64> = (0..200_000).map(|_| normal.sample(&mut rng)).collect();
    let k = kurtosis(&x).unwrap();
    assert!((k - 3.0).abs() < 0.05, "{k}");
}
