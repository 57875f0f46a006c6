use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covrecon::config::{parse_sweep, ExperimentConfig, TauPolicy};
use covrecon::csvio::{self, fmt};
use covrecon::estimators::{self, optimal_taper, taper_estimate};
use covrecon::experiments::{self, Axis};
use covrecon::fem::FemSpace;
use covrecon::field::{self, SpectrumModel};
use covrecon::planner::{brownian_plan, plan_parameters, verify_plan, PlanInputs, Regime, DEFAULT_CAP};
use covrecon::spectral::{self, Provenance};
use covrecon::Error;

#[derive(Parser)]
#[command(name = "covrecon", version, about = "Covariance reconstruction experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Galerkin eigenvalues next to the analytic spectrum.
    Spectrum {
        /// Also write mass-orthonormal eigenvectors to this file.
        #[arg(long)]
        vectors: Option<PathBuf>,
    },
    /// Draw `M` coefficient samples.
    Sample,
    /// Sample or tapered covariance from a sample file (or fresh samples).
    Estimate {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// One error report row per replicate.
    Reconstruct,
    /// Convergence study along one axis.
    Converge {
        /// truncation | fem | sampling | sampling-untapered | end2end
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated sweep values.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Sufficient (L, M, h) for a grid of target accuracies.
    Plan {
        /// Comma-separated ε values (defaults to the config `eps`).
        #[arg(long)]
        eps: Option<String>,
        /// case-1 | case-2 | case-3 | all
        #[arg(long, default_value = "all")]
        regime: String,
        /// Use the closed-form Brownian-motion plan instead.
        #[arg(long)]
        closed_form: bool,
    },
    /// Run the invariant suite at small sizes.
    CheckInvariants,
}

enum Failure {
    Lib(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            field: kv.clone(),
            reason: "expected KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(r) = common.replicates {
        cfg.replicates = r;
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn header(cfg: &ExperimentConfig) -> String {
    cfg.describe().lines().map(|l| format!("# {l}\n")).collect()
}

fn emit(cfg: &ExperimentConfig, text: &str) -> Result<(), Error> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn space_and_model(cfg: &ExperimentConfig) -> Result<(SpectrumModel, FemSpace), Error> {
    Ok((SpectrumModel::by_name(&cfg.model)?, FemSpace::new(cfg.d, cfg.n, cfg.basis)?))
}

fn cmd_spectrum(cfg: &ExperimentConfig, vectors: Option<PathBuf>) -> Result<(), Failure> {
    let (model, space) = space_and_model(cfg)?;
    let sigma = field::projected_covariance_exact(&model, &space)?;
    let sys = spectral::decompose_in_space(&space, &sigma, Provenance::Exact)?;
    let count = cfg.l.min(sys.len());
    let exact = model.eigenvalues(count)?;
    let mut s = header(cfg);
    s.push_str("index,lambda,lambda_h,abs_error\n");
    for j in 0..count {
        s.push_str(&format!(
            "{},{},{},{}\n",
            j + 1,
            fmt(exact[j]),
            fmt(sys.values[j]),
            fmt((exact[j] - sys.values[j]).abs())
        ));
    }
    if let Some(path) = vectors {
        std::fs::write(&path, sys.vectors_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    emit(cfg, &s)?;
    Ok(())
}

fn cmd_sample(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let (model, space) = space_and_model(cfg)?;
    let samples = field::sample_field(&model, &space, cfg.l_gen(), cfg.m, cfg.seed)?;
    let meta = csvio::sample_meta(&samples);
    emit(cfg, &csvio::matrix_to_csv(&samples.data, Some(&meta)))?;
    Ok(())
}

fn cmd_estimate(cfg: &ExperimentConfig, input: Option<PathBuf>) -> Result<(), Failure> {
    let samples = match input {
        Some(path) => csvio::read_samples(&path)?,
        None => {
            let (model, space) = space_and_model(cfg)?;
            field::sample_field(&model, &space, cfg.l_gen(), cfg.m, cfg.seed)?
        }
    };
    let cov = estimators::sample_covariance(&samples)?;
    let m = samples.rows();
    let est = match cfg.tau {
        TauPolicy::None => cov,
        TauPolicy::Optimal => taper_estimate(&cov, optimal_taper(m, cfg.alpha, Some(cov.dim()))?)?,
        TauPolicy::Fixed(t) => taper_estimate(&cov, t)?,
    };
    let decay = estimators::decay_class_check(&est.matrix, cfg.alpha)?.to_key_value();
    let mut meta = vec![
        ("kind", est.kind.as_str().to_string()),
        ("samples", m.to_string()),
        ("tau", est.tau.map(|t| t.to_string()).unwrap_or_else(|| "none".into())),
    ];
    for line in decay.lines() {
        if let Some((k, v)) = line.split_once('=') {
            meta.push((k.trim(), v.trim().to_string()));
        }
    }
    emit(cfg, &csvio::matrix_to_csv(&est.matrix, Some(&meta)))?;
    Ok(())
}

fn cmd_reconstruct(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let reports = experiments::run_reconstruct(cfg)?;
    emit(cfg, &(header(cfg) + &experiments::reports_csv(&reports)))?;
    if let Some(r) = reports.iter().find(|r| !r.triangle_holds()) {
        return Err(Failure::Invariant(format!(
            "triangle inequality violated for seed {}",
            r.params.seed
        )));
    }
    Ok(())
}

fn cmd_converge(cfg: &ExperimentConfig, axis: Option<String>, sweep: Option<String>) -> Result<(), Failure> {
    let axis: Axis = axis.as_deref().unwrap_or(&cfg.axis).parse()?;
    let sweep = match sweep {
        Some(s) => parse_sweep(&s)?,
        None => cfg.sweep.clone(),
    };
    let study = experiments::run_converge(cfg, axis, &sweep)?;
    emit(cfg, &(header(cfg) + &study.to_csv()))?;
    Ok(())
}

fn cmd_plan(cfg: &ExperimentConfig, eps: Option<String>, regime: &str, closed_form: bool) -> Result<(), Failure> {
    let grid = match eps {
        Some(s) => parse_sweep(&s)?,
        None => vec![cfg.eps],
    };
    let regimes: Vec<Regime> = if regime == "all" {
        Regime::ALL.to_vec()
    } else {
        vec![regime.parse()?]
    };
    let (_, space) = space_and_model(cfg)?;
    let mut s = String::from("eps,regime,L_eps,M_eps,h_lo,h_hi,h_eps,vacuous,capped,verified,flags\n");
    let mut unverified = Vec::new();
    for &e in &grid {
        let rows = if closed_form {
            vec![(brownian_plan(e, cfg.beta, cfg.rho1, cfg.h0)?, true)]
        } else {
            let inputs = PlanInputs {
                eps: e,
                s: cfg.s,
                d: cfg.d,
                alpha: cfg.alpha,
                gamma: cfg.gamma,
                beta: cfg.beta,
                rho1: cfg.rho1,
                h0: cfg.h0,
                lambda_max_mass: space.mass().lambda_max,
                constant: cfg.plan_constant,
                cap: DEFAULT_CAP,
                functionals: covrecon::planner::FunctionalSource::Brownian,
            };
            regimes
                .iter()
                .map(|&r| {
                    let plan = plan_parameters(&inputs, r)?;
                    let ok = verify_plan(&inputs, &plan)?;
                    Ok((plan, ok))
                })
                .collect::<Result<Vec<_>, Error>>()?
        };
        for (plan, ok) in rows {
            if !ok {
                unverified.push(format!("eps={e} {}", plan.regime.as_str()));
            }
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                fmt(e),
                plan.regime.as_str(),
                plan.l_eps,
                fmt(plan.m_eps),
                fmt(plan.h_lo),
                fmt(plan.h_hi),
                fmt(plan.h_eps),
                plan.vacuous,
                plan.capped,
                ok,
                plan.flags.join(";")
            ));
        }
    }
    emit(cfg, &s)?;
    if !unverified.is_empty() {
        return Err(Failure::Invariant(format!("plan failed verification: {}", unverified.join(", "))));
    }
    Ok(())
}

fn cmd_check(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let report = experiments::run_check_invariants(cfg)?;
    emit(cfg, &(header(cfg) + &report.render()))?;
    if !report.passed() {
        let failed: Vec<String> = report
            .results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| format!("{}/{}", r.module, r.name))
            .collect();
        return Err(Failure::Invariant(format!("invariants failed: {}", failed.join(", "))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("covrecon: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Spectrum { vectors } => cmd_spectrum(&cfg, vectors),
        Command::Sample => cmd_sample(&cfg),
        Command::Estimate { input } => cmd_estimate(&cfg, input),
        Command::Reconstruct => cmd_reconstruct(&cfg),
        Command::Converge { axis, sweep } => cmd_converge(&cfg, axis, sweep),
        Command::Plan {
            eps,
            regime,
            closed_form,
        } => cmd_plan(&cfg, eps, &regime, closed_form),
        Command::CheckInvariants => cmd_check(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("covrecon: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("covrecon: {msg}");
            ExitCode::from(2)
        }
    }
}
