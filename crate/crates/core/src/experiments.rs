//! End-to-end reconstruction runs, convergence studies and the invariant
//! suite behind the command-line interface.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::analysis::decomposition::{
    error_decomposition, gap_condition_check, success_probability, truncation_error_e1, ErrorReport,
};
use crate::analysis::functionals::{closed_form_functionals, model_functionals};
use crate::analysis::mercer::{covariance_l2_distance, kernel_l2_distance, MercerKernel};
use crate::config::{ExperimentConfig, TauPolicy};
use crate::error::{invalid, Error, Result};
use crate::estimators::{self, covariance_of_rows, optimal_taper, taper_estimate};
use crate::fem::{FemSpace, MassMatrix};
use crate::field::{self, normal_block, SpectrumModel};
use crate::lambert::lambert_w;
use crate::linalg;
use crate::planner::{plan_parameters, verify_plan, PlanInputs, Regime};
use crate::spectral::{
    self, continuous_gap, davis_kahan_diagnostic, fix_signs, generalized_eigendecomposition,
    sampling_error_norm, weyl_check, EigenSystem, Provenance,
};

/// Independent per-replicate seed (SplitMix64 finalizer of `seed ⊕ r`).
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    let mut z = seed ^ replicate.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Quantities shared by every replicate of a reconstruction run.
pub struct Pipeline {
    pub model: Arc<SpectrumModel>,
    pub space: Arc<FemSpace>,
    /// `P Λ Pᵀ` with the generator truncation.
    pub sigma: DMatrix<f64>,
    pub exact: EigenSystem,
    pub generator_residual: f64,
    pub reference_lambda: Vec<f64>,
    pub g: f64,
    pub h_functional: f64,
}

impl Pipeline {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let model = Arc::new(SpectrumModel::by_name(&cfg.model)?);
        let space = Arc::new(FemSpace::new(cfg.d, cfg.n, cfg.basis)?);
        let l_gen = cfg.l_gen();
        let sigma = field::true_coefficient_covariance(&model, &space, l_gen)?;
        let sigma_inf = field::projected_covariance_exact(&model, &space)?;
        let generator_residual = covariance_l2_distance(&space, &sigma_inf, &sigma);
        let exact = spectral::decompose_in_space(&space, &sigma, Provenance::Exact)?;
        let reference_lambda = model.eigenvalues(cfg.l + 1)?;
        let f = model_functionals(&model, cfg.l)?;
        Ok(Self {
            model,
            space,
            sigma,
            exact,
            generator_residual,
            reference_lambda,
            g: f.g.value,
            h_functional: f.h.value,
        })
    }

    /// Coefficient covariance estimate for one replicate and the τ used.
    pub fn estimate(&self, cfg: &ExperimentConfig, replicate: u64) -> Result<(DMatrix<f64>, Option<usize>)> {
        if cfg.exact_covariance {
            return Ok((self.sigma.clone(), None));
        }
        let seed = replicate_seed(cfg.seed, replicate);
        let samples = field::sample_field(&self.model, &self.space, cfg.l_gen(), cfg.m, seed)?;
        let cov = estimators::sample_covariance(&samples)?;
        let n_h = cov.dim();
        let tau = match cfg.tau {
            TauPolicy::None => return Ok((cov.matrix, None)),
            TauPolicy::Optimal => optimal_taper(cfg.m, cfg.alpha, Some(n_h))?,
            TauPolicy::Fixed(t) => t,
        };
        Ok((taper_estimate(&cov, tau)?.matrix, Some(tau)))
    }

    pub fn replicate(&self, cfg: &ExperimentConfig, replicate: u64) -> Result<ErrorReport> {
        let (sigma_hat, tau) = self.estimate(cfg, replicate)?;
        let mut sampled = spectral::decompose_in_space(&self.space, &sigma_hat, Provenance::Sampled)?;
        if cfg.psd_clip {
            sampled = sampled.clip_negative();
        }
        let sampled = fix_signs(&self.exact, &sampled)?;
        let mut report = error_decomposition(
            self.model.clone(),
            self.space.clone(),
            &self.exact,
            &sampled,
            cfg.l,
        )?;
        let e = sampling_error_norm(&self.sigma, &sigma_hat, self.space.mass())?;
        let gaps = (1..=cfg.l)
            .map(|l| continuous_gap(&self.reference_lambda, l))
            .collect::<Result<Vec<_>>>()?;
        report.gap_flags = gap_condition_check(
            &gaps,
            &self.reference_lambda,
            self.space.h(),
            self.model.smoothness(),
            cfg.c1,
            e.value,
            cfg.l,
        )?;
        report.sampling_error = Some(e.value);
        report.g = Some(self.g);
        report.h_functional = Some(self.h_functional);
        report.p0 = Some(success_probability(
            cfg.m as f64,
            self.space.dof_count(),
            tau.unwrap_or(0),
            cfg.rho1,
            self.h_functional,
            self.space.mass().lambda_max,
        ));
        report.generator_residual = Some(self.generator_residual);
        report.params.m = cfg.m;
        report.params.tau = tau;
        report.params.alpha = Some(cfg.alpha);
        report.params.seed = replicate_seed(cfg.seed, replicate);
        Ok(report)
    }
}

/// One report per replicate, in replicate order.
pub fn run_reconstruct(cfg: &ExperimentConfig) -> Result<Vec<ErrorReport>> {
    cfg.validate()?;
    let pipeline = Pipeline::new(cfg)?;
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| pipeline.replicate(cfg, r))
        .collect()
}

pub fn reports_csv(reports: &[ErrorReport]) -> String {
    let mut s = String::from(ErrorReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Truncation,
    Fem,
    Sampling,
    SamplingUntapered,
    EndToEnd,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncation" => Ok(Axis::Truncation),
            "fem" => Ok(Axis::Fem),
            "sampling" => Ok(Axis::Sampling),
            "sampling-untapered" => Ok(Axis::SamplingUntapered),
            "end2end" => Ok(Axis::EndToEnd),
            other => Err(Error::Config {
                field: "axis".into(),
                reason: format!("unknown axis `{other}`"),
            }),
        }
    }
}

impl Axis {
    pub fn as_str(&self) -> &'static str {
        match self {
            Axis::Truncation => "truncation",
            Axis::Fem => "fem",
            Axis::Sampling => "sampling",
            Axis::SamplingUntapered => "sampling-untapered",
            Axis::EndToEnd => "end2end",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares on `(log x, log y)`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(invalid("sweep", "slope fit needs at least 4 points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(invalid("sweep", "slope fit needs positive finite values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("sweep", "degenerate sweep: all points equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|b| (b - my) * (b - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(SlopeFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub value: f64,
    pub replicate: usize,
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub axis: Axis,
    pub rows: Vec<StudyRow>,
    /// `(swept value, mean, sample std)`.
    pub summary: Vec<(f64, f64, f64)>,
    /// Fit of the mean against the regressor (`h = 1/n` on the fem axis,
    /// the swept value otherwise).
    pub fit: SlopeFit,
}

impl StudyResult {
    pub fn to_csv(&self) -> String {
        let f = crate::csvio::fmt;
        let mut s = format!(
            "# axis={}\n# slope={}\n# intercept={}\n# r2={}\nvalue,replicate,metric,mean,std\n",
            self.axis.as_str(),
            f(self.fit.slope),
            f(self.fit.intercept),
            f(self.fit.r2)
        );
        for r in &self.rows {
            let (_, mean, std) = self
                .summary
                .iter()
                .copied()
                .find(|s| s.0 == r.value)
                .unwrap_or((r.value, f64::NAN, f64::NAN));
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                f(r.value),
                r.replicate,
                f(r.metric),
                f(mean),
                f(std)
            ));
        }
        s
    }
}

fn summarize(sweep: &[f64], rows: &[StudyRow]) -> Vec<(f64, f64, f64)> {
    sweep
        .iter()
        .map(|&v| {
            let vals: Vec<f64> = rows.iter().filter(|r| r.value == v).map(|r| r.metric).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (v, mean, var.sqrt())
        })
        .collect()
}

/// `(1 + |k − k'|)^{−(α+2)}`, a member of the decay class with exponent α.
pub fn synthetic_decay_covariance(n: usize, alpha: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| (1.0 + i.abs_diff(j) as f64).powf(-(alpha + 2.0)))
}

/// `M` Gaussian rows with covariance `L Lᵀ`.
pub fn gaussian_rows(lower: &DMatrix<f64>, m: usize, seed: u64) -> DMatrix<f64> {
    normal_block(seed, 0, m, lower.nrows()) * lower.transpose()
}

/// `‖Σ̂ − Σ‖₂` for one synthetic replicate; tapered with the optimal width
/// unless `tapered` is false.
pub fn synthetic_sampling_error(
    sigma: &DMatrix<f64>,
    lower: &DMatrix<f64>,
    m: usize,
    alpha: f64,
    tapered: bool,
    seed: u64,
) -> Result<f64> {
    let rows = gaussian_rows(lower, m, seed);
    let mut est = covariance_of_rows(&rows)?;
    if tapered {
        let tau = optimal_taper(m, alpha, Some(sigma.nrows()))?;
        est = taper_estimate(&est, tau)?;
    }
    Ok(estimators::operator_norm_error(&est.matrix, sigma))
}

/// `|λ_ℓ − λ_ℓ^{(h)}|` for ℓ = 1..=count, with the Galerkin eigenvalues of
/// the exactly projected kernel on a uniform mesh of `n` elements.
pub fn galerkin_eigenvalue_errors(model: &SpectrumModel, n: usize, count: usize) -> Result<Vec<f64>> {
    let space = FemSpace::new(model.dimension(), n, crate::fem::BasisKind::Nodal)?;
    let sigma = field::projected_covariance_exact(model, &space)?;
    let sys = spectral::decompose_in_space(&space, &sigma, Provenance::Exact)?;
    let lam = model.eigenvalues(count)?;
    Ok((0..count).map(|j| (lam[j] - sys.values[j]).abs()).collect())
}

pub fn run_converge(cfg: &ExperimentConfig, axis: Axis, sweep: &[f64]) -> Result<StudyResult> {
    if sweep.len() < 4 {
        return Err(invalid("sweep", "need at least 4 sweep points"));
    }
    let as_count = |v: f64| -> Result<usize> {
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(invalid("sweep", format!("expected a positive integer, got {v}")))
        }
    };
    let model = SpectrumModel::by_name(&cfg.model)?;
    let mut rows = Vec::new();
    let mut regressor: Vec<f64> = sweep.to_vec();
    match axis {
        Axis::Truncation => {
            for &v in sweep {
                rows.push(StudyRow {
                    value: v,
                    replicate: 0,
                    metric: truncation_error_e1(&model, as_count(v)?)?,
                });
            }
        }
        Axis::Fem => {
            for &v in sweep {
                let errs = galerkin_eigenvalue_errors(&model, as_count(v)?, 5)?;
                for (j, e) in errs.into_iter().enumerate() {
                    rows.push(StudyRow {
                        value: v,
                        replicate: j + 1,
                        metric: e,
                    });
                }
            }
            regressor = sweep.iter().map(|n| 1.0 / n).collect();
        }
        Axis::Sampling | Axis::SamplingUntapered => {
            let sigma = synthetic_decay_covariance(cfg.synthetic_dim, cfg.alpha);
            let lower = linalg::cholesky_lower(&sigma)?;
            let tapered = axis == Axis::Sampling;
            for &v in sweep {
                let m = as_count(v)?;
                let errs = (0..cfg.replicates)
                    .into_par_iter()
                    .map(|r| {
                        let seed = replicate_seed(cfg.seed ^ (m as u64).rotate_left(32), r as u64);
                        synthetic_sampling_error(&sigma, &lower, m, cfg.alpha, tapered, seed)
                    })
                    .collect::<Result<Vec<_>>>()?;
                for (r, e) in errs.into_iter().enumerate() {
                    rows.push(StudyRow {
                        value: v,
                        replicate: r,
                        metric: e,
                    });
                }
            }
        }
        Axis::EndToEnd => {
            for &v in sweep {
                let mut c = cfg.clone();
                c.m = as_count(v)?;
                for (r, rep) in run_reconstruct(&c)?.into_iter().enumerate() {
                    rows.push(StudyRow {
                        value: v,
                        replicate: r,
                        metric: rep.total,
                    });
                }
            }
        }
    }
    let summary = summarize(sweep, &rows);
    let means: Vec<f64> = summary.iter().map(|s| s.1).collect();
    let fit = fit_loglog(&regressor, &means)?;
    Ok(StudyResult {
        axis,
        rows,
        summary,
        fit,
    })
}

/// Random SPD matrix `G Gᵀ / n + shift·I` from a seeded normal stream.
pub fn random_spd(n: usize, seed: u64, shift: f64) -> DMatrix<f64> {
    let g = normal_block(seed, 0, n, n);
    linalg::symmetrize(&((&g * g.transpose()) / n as f64 + DMatrix::identity(n, n) * shift))
}

/// Random symmetric perturbation with entries of size `scale`.
pub fn random_symmetric(n: usize, seed: u64, scale: f64) -> DMatrix<f64> {
    let g = normal_block(seed, 0, n, n);
    linalg::symmetrize(&g) * scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    /// Seed of the first failing trial.
    pub first_failure_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub results: Vec<InvariantResult>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("module,invariant,status,trials,failures,first_failure_seed\n");
        for r in &self.results {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.module,
                r.name,
                if r.passed { "pass" } else { "FAIL" },
                r.trials,
                r.failures,
                r.first_failure_seed.map(|v| v.to_string()).unwrap_or_default()
            ));
        }
        s
    }
}

struct Tally {
    module: &'static str,
    name: &'static str,
    trials: usize,
    failures: usize,
    first: Option<u64>,
}

impl Tally {
    fn new(module: &'static str, name: &'static str) -> Self {
        Self {
            module,
            name,
            trials: 0,
            failures: 0,
            first: None,
        }
    }

    fn record(&mut self, ok: bool, seed: u64) {
        self.trials += 1;
        if !ok {
            self.failures += 1;
            self.first.get_or_insert(seed);
        }
    }

    fn finish(self) -> InvariantResult {
        InvariantResult {
            module: self.module,
            name: self.name,
            passed: self.failures == 0,
            trials: self.trials,
            failures: self.failures,
            first_failure_seed: self.first,
        }
    }
}

/// Mass matrix whose Cholesky factor no longer matches the matrix.
fn corrupt(mass: &MassMatrix) -> MassMatrix {
    let mut bad = mass.clone();
    bad.lower[(0, 0)] *= 1.5;
    if bad.lower.nrows() > 1 {
        bad.lower[(1, 0)] += 0.25 * bad.lower[(1, 1)];
    }
    bad
}

/// Run the invariant battery at small sizes.
pub fn run_check_invariants(cfg: &ExperimentConfig) -> Result<InvariantReport> {
    let mut results = Vec::new();
    let base = cfg.seed;
    let spaces = [
        FemSpace::new(1, 8, crate::fem::BasisKind::Nodal)?,
        FemSpace::new(1, 8, crate::fem::BasisKind::L2Orthonormal)?,
        FemSpace::new(2, 3, crate::fem::BasisKind::Nodal)?,
    ];

    // spectral: ordering, mass-orthonormality, Weyl, Davis–Kahan, signs
    let mut ortho = Tally::new("spectral_solver", "mass-orthonormality");
    let mut order = Tally::new("spectral_solver", "eigenvalue-ordering");
    let mut weyl = Tally::new("spectral_solver", "weyl");
    let mut dk = Tally::new("spectral_solver", "davis-kahan");
    let mut signs = Tally::new("spectral_solver", "sign-fix-idempotent");
    let mut bracket = Tally::new("spectral_solver", "sampling-error-bracket");
    for (si, space) in spaces.iter().enumerate() {
        let true_mass = space.mass();
        let mass = if cfg.corrupt_mass { corrupt(true_mass) } else { true_mass.clone() };
        let n = space.dof_count();
        for t in 0..40u64 {
            let seed = replicate_seed(base, 1000 * si as u64 + t);
            let sigma = random_spd(n, seed, 0.1);
            let pert = random_symmetric(n, seed ^ 0xABCD, 1e-3 * (1 + t % 5) as f64);
            let sigma_hat = linalg::symmetrize(&(&sigma + &pert));
            let ex = generalized_eigendecomposition(&sigma, &mass, Provenance::Exact)?;
            let sa = generalized_eigendecomposition(&sigma_hat, &mass, Provenance::Sampled)?;
            let gram = ex.vectors.transpose() * &true_mass.matrix * &ex.vectors;
            ortho.record((gram - DMatrix::identity(n, n)).amax() <= 1e-8, seed);
            order.record(ex.values.windows(2).all(|w| w[0] >= w[1]), seed);
            let e = sampling_error_norm(&sigma, &sigma_hat, true_mass)?;
            bracket.record(e.in_bracket(), seed);
            weyl.record(weyl_check(&ex, &sa, e.value)?.pass, seed);
            let fixed = fix_signs(&ex, &sa)?;
            signs.record(fix_signs(&ex, &fixed)? == fixed, seed);
            let entries = davis_kahan_diagnostic(&ex, &fixed, e.value, None, n)?;
            dk.record(entries.iter().all(|d| d.holds), seed);
        }
    }
    results.extend([ortho, order, weyl, dk, signs, bracket].map(Tally::finish));

    // estimators
    let mut taper_sym = Tally::new("cov_estimators", "taper-symmetry-and-contraction");
    let mut weights = Tally::new("cov_estimators", "weight-range");
    for t in 0..20u64 {
        let seed = replicate_seed(base, 5000 + t);
        let sigma = random_spd(12, seed, 0.0);
        let est = estimators::CovarianceEstimate {
            matrix: sigma.clone(),
            kind: estimators::EstimatorKind::Sample,
            tau: None,
            samples: 10,
            alpha: None,
        };
        let tau = 2 * (1 + (t as usize % 6));
        let tap = taper_estimate(&est, tau)?;
        let ok = linalg::max_asymmetry(&tap.matrix) == 0.0
            && tap.matrix.iter().zip(sigma.iter()).all(|(a, b)| a.abs() <= b.abs());
        taper_sym.record(ok, seed);
        let wok = (0..30).all(|lag| {
            let w = estimators::taper_weight(0, lag, tau).unwrap_or(f64::NAN);
            (0.0..=1.0).contains(&w) && (lag != 0 || w == 1.0)
        });
        weights.record(wok, seed);
    }
    results.extend([taper_sym, weights].map(Tally::finish));

    // field models
    let mut det = Tally::new("field_models", "sampling-determinism");
    let model = SpectrumModel::by_name("brownian-1d")?;
    let space = FemSpace::new(1, 8, crate::fem::BasisKind::Nodal)?;
    for t in 0..3u64 {
        let seed = replicate_seed(base, 7000 + t);
        let a = field::sample_field(&model, &space, 32, 16, seed)?;
        let b = field::sample_field(&model, &space, 32, 16, seed)?;
        det.record(a == b, seed);
    }
    let mut csv = Tally::new("field_models", "csv-round-trip");
    let a = field::sample_field(&model, &space, 32, 4, base)?;
    csv.record(crate::csvio::parse_samples(&crate::csvio::matrix_to_csv(&a.data, Some(&crate::csvio::sample_meta(&a))))? == a, base);
    results.extend([det, csv].map(Tally::finish));

    // error analysis
    let model = Arc::new(model);
    let mut self_dist = Tally::new("error_analysis", "self-distance-zero");
    let mut e1 = Tally::new("error_analysis", "e1-parseval");
    let mut gh = Tally::new("error_analysis", "g-h-closed-form");
    let mut triangle = Tally::new("error_analysis", "triangle-inequality");
    let k = crate::analysis::mercer::truncate_model(model.clone(), 5)?;
    self_dist.record(kernel_l2_distance(&k, &k)? <= 1e-12, base);
    e1.record((truncation_error_e1(&model, 0)? - (1.0f64 / 6.0).sqrt()).abs() < 1e-12, base);
    for l in 1..=20 {
        let num = model_functionals(&model, l)?;
        let cf = closed_form_functionals(&model, l);
        let ok = (num.g.value - cf.g.value).abs() <= 1e-10 * cf.g.value
            && (num.h.value - cf.h.value).abs() <= 1e-10 * cf.h.value;
        gh.record(ok, l as u64);
    }
    let small = ExperimentConfig {
        n: 16,
        l: 4,
        m: 256,
        replicates: 3,
        seed: base,
        ..ExperimentConfig::default()
    };
    for rep in run_reconstruct(&small)? {
        triangle.record(rep.triangle_holds(), rep.params.seed);
    }
    let complete = MercerKernel::complete(model.clone());
    self_dist.record(kernel_l2_distance(&complete, &complete)? == 0.0, base);
    results.extend([self_dist, e1, gh, triangle].map(Tally::finish));

    // planner
    let mut plans = Tally::new("planner", "plan-self-consistency");
    for (i, eps) in [0.2, 0.1, 0.05, 0.02, 0.01].into_iter().enumerate() {
        let inputs = PlanInputs::brownian(eps);
        for regime in Regime::ALL {
            let plan = plan_parameters(&inputs, regime)?;
            plans.record(verify_plan(&inputs, &plan)?, i as u64);
        }
    }
    let mut lambert = Tally::new("planner", "lambert-residual");
    for i in 0..200 {
        let x = -1.0 / std::f64::consts::E + 1e-6 + (i as f64 / 199.0 * (1e6f64).ln()).exp() - 1.0;
        let w = lambert_w(x)?;
        lambert.record((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0), i as u64);
    }
    results.extend([plans, lambert].map(Tally::finish));

    Ok(InvariantReport { results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_exact_power() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(fit_loglog(&x[..3], &y[..3]).is_err());
    }

    #[test]
    fn replicate_seeds_differ() {
        assert_ne!(replicate_seed(0, 0), replicate_seed(0, 1));
        assert_ne!(replicate_seed(0, 1), replicate_seed(1, 0));
    }

    #[test]
    fn synthetic_covariance_is_spd() {
        let s = synthetic_decay_covariance(50, 1.0);
        assert!(linalg::cholesky_lower(&s).is_ok());
    }
}
