use nalgebra::DMatrix;
use proptest::prelude::*;

use covrecon::config::ExperimentConfig;
use covrecon::csvio::{matrix_to_csv, parse_matrix_csv};
use covrecon::estimators::{optimal_taper, taper_estimate, taper_weight, CovarianceEstimate, EstimatorKind};
use covrecon::experiments::{fit_loglog, random_spd, random_symmetric};
use covrecon::fem::{BasisKind, FemSpace};
use covrecon::lambert::{lambert_w, lambert_w_m1};
use covrecon::planner::{plan_parameters, verify_plan, PlanInputs, Regime};
use covrecon::spectral::{decompose_in_space, fix_signs, sampling_error_norm, weyl_check, Provenance};

fn space(dim: usize, n: usize, orth: bool) -> FemSpace {
    let basis = if orth { BasisKind::L2Orthonormal } else { BasisKind::Nodal };
    FemSpace::new(dim, n, basis).unwrap()
}

fn estimate(m: DMatrix<f64>) -> CovarianceEstimate {
    CovarianceEstimate {
        matrix: m,
        kind: EstimatorKind::Sample,
        tau: None,
        samples: 10,
        alpha: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvectors_are_mass_orthonormal(n in 2usize..24, orth: bool, seed: u64) {
        let s = space(1, n, orth);
        let sigma = random_spd(n + 1, seed, 0.01);
        let sys = decompose_in_space(&s, &sigma, Provenance::Exact).unwrap();
        let gram = sys.vectors.transpose() * &s.mass().matrix * &sys.vectors;
        prop_assert!((gram - DMatrix::identity(n + 1, n + 1)).amax() < 1e-8);
        prop_assert!(sys.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!((sys.reconstruct(n + 1) - sigma).amax() < 1e-9);
    }

    #[test]
    fn weyl_and_bracket(n in 2usize..5, dim in 1usize..=2, orth: bool, seed: u64, scale in -6.0f64..0.0) {
        let s = space(dim, n, orth);
        let k = s.dof_count();
        let sigma = random_spd(k, seed, 0.1);
        let hat = &sigma + random_symmetric(k, seed ^ 1, 10f64.powf(scale));
        let ex = decompose_in_space(&s, &sigma, Provenance::Exact).unwrap();
        let sa = decompose_in_space(&s, &hat, Provenance::Sampled).unwrap();
        let e = sampling_error_norm(&sigma, &hat, s.mass()).unwrap();
        prop_assert!(e.in_bracket());
        prop_assert!(weyl_check(&ex, &sa, e.value).unwrap().pass);
    }

    #[test]
    fn sign_fix_is_idempotent(n in 2usize..16, seed: u64) {
        let s = space(1, n, false);
        let sigma = random_spd(n + 1, seed, 0.1);
        let hat = &sigma + random_symmetric(n + 1, seed ^ 2, 1e-3);
        let ex = decompose_in_space(&s, &sigma, Provenance::Exact).unwrap();
        let sa = decompose_in_space(&s, &hat, Provenance::Sampled).unwrap();
        let once = fix_signs(&ex, &sa).unwrap();
        prop_assert_eq!(fix_signs(&ex, &once).unwrap(), once.clone());
        for j in 0..=n {
            prop_assert!(ex.reduced.column(j).dot(&once.reduced.column(j)) >= 0.0);
        }
    }

    #[test]
    fn taper_is_symmetric_contraction(n in 1usize..30, half_tau in 1usize..20, seed: u64) {
        let sigma = random_spd(n, seed, 0.0);
        let t = taper_estimate(&estimate(sigma.clone()), 2 * half_tau).unwrap();
        prop_assert_eq!(t.matrix.clone(), t.matrix.transpose());
        for (a, b) in t.matrix.iter().zip(sigma.iter()) {
            prop_assert!(a.abs() <= b.abs());
        }
        // diagonal and lags below τ/2 are untouched, lags ≥ τ vanish
        for i in 0..n {
            for j in 0..n {
                let lag = i.abs_diff(j);
                if lag <= half_tau {
                    prop_assert_eq!(t.matrix[(i, j)], sigma[(i, j)]);
                } else if lag >= 2 * half_tau {
                    prop_assert_eq!(t.matrix[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn taper_weights_in_unit_interval(k in 0usize..500, kp in 0usize..500, half_tau in 1usize..100) {
        let w = taper_weight(k, kp, 2 * half_tau).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
    }

    #[test]
    fn optimal_taper_even_and_clamped(m in 2usize..1_000_000, alpha in 0.1f64..4.0, n in 1usize..400) {
        let t = optimal_taper(m, alpha, Some(n)).unwrap();
        prop_assert!(t.is_multiple_of(2) && t >= 2 && t <= 2 * n.max(1));
    }

    #[test]
    fn csv_round_trip(rows in 1usize..8, cols in 1usize..8, seed: u64) {
        let m = random_symmetric(rows.max(cols), seed, 1e3).view((0, 0), (rows, cols)).into_owned();
        let text = matrix_to_csv(&m, Some(&[("k", "v".to_string())]));
        let (meta, back) = parse_matrix_csv(&text).unwrap();
        prop_assert_eq!(back, m);
        prop_assert_eq!(meta.get("k").map(String::as_str), Some("v"));
    }

    #[test]
    fn lambert_residuals(x in -0.3678794411714423f64..1e6) {
        let w = lambert_w(x).unwrap();
        prop_assert!(w >= -1.0);
        prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0));
        if x < 0.0 {
            let v = lambert_w_m1(x).unwrap();
            prop_assert!(v <= -1.0);
            prop_assert!((v * v.exp() - x).abs() <= 1e-12 * x.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn plans_verify(eps in 0.005f64..0.5, alpha in 0.5f64..3.0, beta in 0.5f64..2.0) {
        let mut inputs = PlanInputs::brownian(eps);
        inputs.alpha = alpha;
        inputs.beta = beta;
        for regime in Regime::ALL {
            let plan = plan_parameters(&inputs, regime).unwrap();
            prop_assert!(verify_plan(&inputs, &plan).unwrap());
            prop_assert!(plan.h_lo <= plan.h_hi || plan.vacuous);
        }
    }

    #[test]
    fn loglog_recovers_power(slope in -3.0f64..3.0, c in 0.1f64..10.0) {
        let x = [1.0, 3.0, 9.0, 27.0, 81.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| c * v.powf(slope)).collect();
        let fit = fit_loglog(&x, &y).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!(fit.r2 > 1.0 - 1e-10);
    }

    #[test]
    fn config_describe_round_trips(n in 2usize..64, l in 1usize..3, m in 2usize..10_000, seed: u64) {
        let cfg = ExperimentConfig { n, l, m, seed, ..ExperimentConfig::default() };
        let back = ExperimentConfig::parse(&cfg.describe()).unwrap();
        prop_assert_eq!(back, ExperimentConfig { l_gen: Some(cfg.l_gen()), ..cfg });
    }
}
