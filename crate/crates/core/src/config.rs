//! Flat `key = value` experiment configuration with strict key checking.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::BasisKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauPolicy {
    Optimal,
    Fixed(usize),
    /// Plain sample covariance.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: String,
    pub d: usize,
    pub n: usize,
    pub basis: BasisKind,
    pub l: usize,
    /// `None` means `max(4 L, 256)`.
    pub l_gen: Option<usize>,
    pub m: usize,
    pub alpha: f64,
    pub tau: TauPolicy,
    pub replicates: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub c1: f64,
    pub rho1: f64,
    pub h0: f64,
    pub dk_constant: f64,
    /// Use the exact coefficient covariance in place of the estimate.
    pub exact_covariance: bool,
    pub psd_clip: bool,
    // planner
    pub eps: f64,
    pub s: f64,
    pub beta: f64,
    pub gamma: f64,
    pub plan_constant: f64,
    // convergence studies
    pub axis: String,
    pub sweep: Vec<f64>,
    /// Dimension of the synthetic matrix for the sampling axis.
    pub synthetic_dim: usize,
    /// Fault injection for the invariant suite.
    pub corrupt_mass: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: "brownian-1d".into(),
            d: 1,
            n: 64,
            basis: BasisKind::Nodal,
            l: 10,
            l_gen: None,
            m: 4096,
            alpha: 1.0,
            tau: TauPolicy::Optimal,
            replicates: 10,
            seed: 0,
            out: None,
            c1: 1.0,
            rho1: 1.0,
            h0: 1.0,
            dk_constant: crate::spectral::C_DK,
            exact_covariance: false,
            psd_clip: false,
            eps: 0.1,
            s: 0.5,
            beta: 1.0,
            gamma: 1.5,
            plan_constant: 1.0,
            axis: "truncation".into(),
            sweep: vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            synthetic_dim: 200,
            corrupt_mass: false,
        }
    }
}

pub const KEYS: &[&str] = &[
    "model",
    "d",
    "n",
    "basis",
    "L",
    "L_gen",
    "M",
    "alpha",
    "tau",
    "replicates",
    "seed",
    "out",
    "C1",
    "rho1",
    "h0",
    "dk_constant",
    "exact_covariance",
    "psd_clip",
    "eps",
    "s",
    "beta",
    "gamma",
    "plan_constant",
    "axis",
    "sweep",
    "synthetic_dim",
    "corrupt_mass",
];

fn cfg_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| cfg_err(key, format!("cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(key, format!("expected true/false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    pub fn l_gen(&self) -> usize {
        self.l_gen.unwrap_or_else(|| (4 * self.l).max(256))
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "model" => self.model = v.to_string(),
            "d" => self.d = parse_num(key, v)?,
            "n" => self.n = parse_num(key, v)?,
            "basis" => self.basis = v.parse().map_err(|_| cfg_err(key, format!("unknown basis `{v}`")))?,
            "L" => self.l = parse_num(key, v)?,
            "L_gen" => {
                self.l_gen = if v == "auto" { None } else { Some(parse_num(key, v)?) }
            }
            "M" => self.m = parse_num(key, v)?,
            "alpha" => self.alpha = parse_num(key, v)?,
            "tau" => {
                self.tau = match v {
                    "optimal" => TauPolicy::Optimal,
                    "none" => TauPolicy::None,
                    _ => TauPolicy::Fixed(parse_num(key, v)?),
                }
            }
            "replicates" => self.replicates = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "C1" => self.c1 = parse_num(key, v)?,
            "rho1" => self.rho1 = parse_num(key, v)?,
            "h0" => self.h0 = parse_num(key, v)?,
            "dk_constant" => self.dk_constant = parse_num(key, v)?,
            "exact_covariance" => self.exact_covariance = parse_bool(key, v)?,
            "psd_clip" => self.psd_clip = parse_bool(key, v)?,
            "eps" => self.eps = parse_num(key, v)?,
            "s" => self.s = parse_num(key, v)?,
            "beta" => self.beta = parse_num(key, v)?,
            "gamma" => self.gamma = parse_num(key, v)?,
            "plan_constant" => self.plan_constant = parse_num(key, v)?,
            "axis" => self.axis = v.to_string(),
            "sweep" => self.sweep = parse_sweep(v)?,
            "synthetic_dim" => self.synthetic_dim = parse_num(key, v)?,
            "corrupt_mass" => self.corrupt_mass = parse_bool(key, v)?,
            other => return Err(cfg_err(other, "unknown key")),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            // `[section]` headers group keys visually and carry no meaning
            if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(&format!("line {}", i + 1), "expected `key = value`"))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(cfg_err(k, "duplicate key"));
            }
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.model.as_str(), "brownian-1d" | "brownian" | "brownian-sheet" | "brownian-2d") {
            return Err(cfg_err("model", format!("unknown model `{}`", self.model)));
        }
        let model_d = if self.model.contains("sheet") || self.model.ends_with("2d") { 2 } else { 1 };
        if self.d != model_d {
            return Err(cfg_err("d", format!("model `{}` lives in dimension {model_d}", self.model)));
        }
        if self.n < 2 {
            return Err(cfg_err("n", "need at least 2 elements per axis"));
        }
        let dofs = (self.n + 1).pow(self.d as u32);
        if dofs > crate::fem::MAX_DENSE_DOFS {
            return Err(cfg_err("n", format!("{dofs} dofs exceed the dense limit")));
        }
        if self.l == 0 || self.l > dofs {
            return Err(cfg_err("L", format!("must lie in 1..={dofs}")));
        }
        if self.l_gen() < self.l {
            return Err(cfg_err("L_gen", "must be at least L"));
        }
        if self.m < 2 {
            return Err(cfg_err("M", "need at least 2 samples"));
        }
        if !(self.alpha > 0.0) {
            return Err(cfg_err("alpha", "must be positive"));
        }
        if let TauPolicy::Fixed(t) = self.tau {
            if t == 0 || t % 2 == 1 {
                return Err(cfg_err("tau", "must be a positive even integer, `optimal` or `none`"));
            }
        }
        if self.replicates == 0 {
            return Err(cfg_err("replicates", "must be at least 1"));
        }
        for (name, v) in [("C1", self.c1), ("rho1", self.rho1), ("h0", self.h0), ("dk_constant", self.dk_constant)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(cfg_err(name, "must be positive"));
            }
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(cfg_err("eps", "must lie in (0, 1)"));
        }
        if self.synthetic_dim == 0 {
            return Err(cfg_err("synthetic_dim", "must be at least 1"));
        }
        Ok(())
    }

    /// `key = value` lines documenting every effective setting.
    pub fn describe(&self) -> String {
        let tau = match self.tau {
            TauPolicy::Optimal => "optimal".to_string(),
            TauPolicy::None => "none".to_string(),
            TauPolicy::Fixed(t) => t.to_string(),
        };
        let sweep: Vec<String> = self.sweep.iter().map(|v| v.to_string()).collect();
        let pairs = [
            ("model", self.model.clone()),
            ("d", self.d.to_string()),
            ("n", self.n.to_string()),
            ("basis", self.basis.as_str().to_string()),
            ("L", self.l.to_string()),
            ("L_gen", self.l_gen().to_string()),
            ("M", self.m.to_string()),
            ("alpha", self.alpha.to_string()),
            ("tau", tau),
            ("replicates", self.replicates.to_string()),
            ("seed", self.seed.to_string()),
            ("C1", self.c1.to_string()),
            ("rho1", self.rho1.to_string()),
            ("h0", self.h0.to_string()),
            ("dk_constant", self.dk_constant.to_string()),
            ("exact_covariance", self.exact_covariance.to_string()),
            ("psd_clip", self.psd_clip.to_string()),
            ("eps", self.eps.to_string()),
            ("s", self.s.to_string()),
            ("beta", self.beta.to_string()),
            ("gamma", self.gamma.to_string()),
            ("plan_constant", self.plan_constant.to_string()),
            ("axis", self.axis.clone()),
            ("sweep", sweep.join(",")),
            ("synthetic_dim", self.synthetic_dim.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn parse_sweep(v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|t| parse_num::<f64>("sweep", t.trim()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty() {
        let c = ExperimentConfig::parse("# nothing\n\n[reconstruct]\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.l_gen(), 256);
    }

    #[test]
    fn unknown_key_names_field() {
        match ExperimentConfig::parse("n = 8\nbogus = 1\n") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "bogus"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn values_parsed() {
        let c = ExperimentConfig::parse("n = 16 # mesh\ntau = 6\nM = 100\nexact_covariance = true\nsweep = 1,2,4,8").unwrap();
        assert_eq!(c.n, 16);
        assert_eq!(c.tau, TauPolicy::Fixed(6));
        assert!(c.exact_covariance);
        assert_eq!(c.sweep, vec![1.0, 2.0, 4.0, 8.0]);
        assert!(ExperimentConfig::parse("tau = 3").is_err());
        assert!(ExperimentConfig::parse("n = 8\nn = 9").is_err());
    }
}
