//! Run configuration: a TOML file merged with command-line overrides and
//! resolved into concrete [`Settings`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use nlfc::fc2d::{FcParams, NormalEvaluation};
use nlfc::geometry::BoundaryCurve;
use nlfc::harness::{build_manufactured, CaseId};
use nlfc::multipliers::KernelParams;
use nlfc::nlops::ExtensionDomain;
use nlfc::solvers::GmresConfig;
use serde::{Deserialize, Serialize};

use crate::expr::Expr;

/// Invalid configuration, reported with the offending key. Exit code 2.
#[derive(Debug)]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, msg: impl fmt::Display) -> Self {
        ConfigError {
            key: key.into(),
            msg: msg.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.key, self.msg)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub case: Option<CaseId>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub domain: DomainSection,
    pub kernel: KernelSection,
    pub fc: FcSection,
    pub gmres: GmresSection,
    pub time: TimeSection,
    pub problem: ProblemSection,
    pub study: StudySection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub curve: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSection {
    pub delta: Option<f64>,
    pub betas: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FcSection {
    pub d: Option<usize>,
    pub m: Option<usize>,
    pub c: Option<usize>,
    pub n_r: Option<usize>,
    pub h: Option<f64>,
    /// Shorthand for `h = 2 / n1d`.
    pub n1d: Option<usize>,
    pub evaluation: Option<NormalEvaluation>,
    pub extension: Option<ExtensionDomain>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmresSection {
    pub tol: Option<f64>,
    pub restart: Option<usize>,
    pub max_iter: Option<usize>,
    pub precondition: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub tau: Option<f64>,
    pub t_final: Option<f64>,
    pub snapshots: Option<Vec<f64>>,
}

/// User data as expressions in `x`, `y` (and `t` for diffusion).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    /// Function to continue (`fc`): `benchmark`, `demo` or an expression.
    pub function: Option<String>,
    pub load: Option<String>,
    pub collar: Option<String>,
    pub exact: Option<String>,
    pub initial: Option<String>,
    pub source: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub n1d: Option<Vec<usize>>,
    pub h: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| ConfigError::new(path.display().to_string(), e).into())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($a:ident).+) => {
                if over.$($a).+.is_some() {
                    self.$($a).+ = over.$($a).+;
                }
            };
        }
        take!(case);
        take!(output);
        take!(threads);
        take!(domain.curve);
        self.domain.params.extend(over.domain.params);
        take!(kernel.delta);
        take!(kernel.betas);
        take!(fc.d);
        take!(fc.m);
        take!(fc.c);
        take!(fc.n_r);
        if over.fc.h.is_some() || over.fc.n1d.is_some() {
            self.fc.h = over.fc.h;
            self.fc.n1d = over.fc.n1d;
        }
        take!(fc.evaluation);
        take!(fc.extension);
        take!(gmres.tol);
        take!(gmres.restart);
        take!(gmres.max_iter);
        take!(gmres.precondition);
        take!(time.tau);
        take!(time.t_final);
        take!(time.snapshots);
        take!(problem.function);
        take!(problem.load);
        take!(problem.collar);
        take!(problem.exact);
        take!(problem.initial);
        take!(problem.source);
        if over.study.n1d.is_some() || over.study.h.is_some() {
            self.study = over.study;
        }
        self
    }
}

/// Resolution sweep: counts (`h = 2/N`) or explicit step sizes.
#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    N1d(Vec<usize>),
    H(Vec<f64>),
}

impl Sweep {
    /// `(resolution column, h)` pairs.
    pub fn points(&self) -> Vec<(f64, f64)> {
        match self {
            Sweep::N1d(ns) => ns.iter().map(|&n| (n as f64, 2.0 / n as f64)).collect(),
            Sweep::H(hs) => hs.iter().map(|&h| (h, h)).collect(),
        }
    }
}

/// Fully resolved, validated settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub case: Option<CaseId>,
    pub output: PathBuf,
    pub threads: Option<usize>,
    pub curve_name: String,
    pub curve_params: BTreeMap<String, f64>,
    pub delta: f64,
    pub betas: Vec<f64>,
    pub fc: FcParams,
    pub h: f64,
    pub extension: ExtensionDomain,
    pub gmres: GmresConfig,
    pub tau: Option<f64>,
    pub t_final: Option<f64>,
    pub snapshots: Vec<f64>,
    pub problem: ProblemSection,
    pub sweep: Option<Sweep>,
}

pub const DEFAULT_OUTPUT: &str = "nlfc-out";
pub const DEFAULT_H: f64 = 0.01;

/// Built-in functions for `fc`.
pub const FC_BUILTINS: [&str; 2] = ["benchmark", "demo"];

fn default_curve(cfg: &RunConfig) -> &'static str {
    match cfg.problem.function.as_deref() {
        Some("benchmark") => "disk",
        Some("demo") => "star5",
        _ => "kite",
    }
}

fn check_expr(key: &str, src: &Option<String>) -> Result<(), ConfigError> {
    if let Some(s) = src {
        if FC_BUILTINS.contains(&s.as_str()) && key == "problem.function" {
            return Ok(());
        }
        Expr::parse(s).map_err(|e| ConfigError::new(key, e))?;
    }
    Ok(())
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Settings, ConfigError> {
        let case_data = match self.case {
            Some(id) => Some(build_manufactured(id, id.betas()[0]).map_err(|e| ConfigError::new("case", e))?),
            None => None,
        };
        let curve_name = match (&case_data, &self.domain.curve) {
            (Some(c), Some(name)) if rebuild_name(name, &self.domain.params) != c.curve.name() => {
                return Err(ConfigError::new(
                    "domain.curve",
                    format!("case `{}` is posed on {}", self.case.unwrap(), c.curve.name()),
                ));
            }
            (_, Some(name)) => name.clone(),
            (Some(c), None) => catalog_name(&c.curve).to_string(),
            (None, None) => default_curve(self).to_string(),
        };
        let params: Vec<(&str, f64)> = self.domain.params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        BoundaryCurve::from_catalog(&curve_name, &params).map_err(|e| ConfigError::new("domain.curve", e))?;

        let delta = match (self.case, self.kernel.delta) {
            (Some(id), Some(d)) if d != id.delta() => {
                return Err(ConfigError::new("kernel.delta", format!("case `{id}` fixes δ = {}", id.delta())));
            }
            (Some(id), _) => id.delta(),
            (None, Some(d)) => d,
            (None, None) => 0.3,
        };
        let betas = match (&self.kernel.betas, self.case) {
            (Some(b), _) if b.is_empty() => return Err(ConfigError::new("kernel.betas", "empty list")),
            (Some(b), _) => b.clone(),
            (None, Some(id)) => id.betas().to_vec(),
            (None, None) => vec![2.0],
        };
        for &b in &betas {
            KernelParams::new(delta, b).map_err(|e| ConfigError::new("kernel", e))?;
        }

        let demo = self.problem.function.as_deref() == Some("demo");
        let d = self.fc.d.unwrap_or(4);
        let mut fc = FcParams::with_order(d);
        if let Some(m) = self.fc.m {
            fc.m = m;
        }
        if let Some(c) = self.fc.c {
            fc.c = c;
        }
        if let Some(n) = self.fc.n_r {
            fc.n_r = n;
        }
        if let Some(e) = self.fc.evaluation {
            fc.evaluation = e;
        }
        fc.validate().map_err(|e| ConfigError::new("fc", e))?;
        let h = match (self.fc.h, self.fc.n1d) {
            (Some(_), Some(_)) => return Err(ConfigError::new("fc.h", "set either h or n1d, not both")),
            (Some(h), None) => h,
            (None, Some(0)) => return Err(ConfigError::new("fc.n1d", "must be positive")),
            (None, Some(n)) => 2.0 / n as f64,
            (None, None) if demo => 0.01,
            (None, None) => DEFAULT_H,
        };
        if !(h > 0.0 && h < 1.0) {
            return Err(ConfigError::new("fc.h", format!("{h} outside (0, 1)")));
        }

        let defaults = GmresConfig::default();
        let gmres = GmresConfig {
            tol: self.gmres.tol.unwrap_or(defaults.tol),
            restart: self.gmres.restart.unwrap_or(defaults.restart),
            max_iter: self.gmres.max_iter.unwrap_or(defaults.max_iter),
            precondition: self.gmres.precondition.unwrap_or(defaults.precondition),
        };
        gmres.validate().map_err(|e| ConfigError::new("gmres", e))?;

        let tau = self.time.tau.or(case_data.as_ref().filter(|c| c.tau > 0.0).map(|c| c.tau));
        let t_final = self.time.t_final.or(case_data.as_ref().filter(|c| c.t_final > 0.0).map(|c| c.t_final));
        if let Some(t) = tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::new("time.tau", format!("{t} is not a positive step")));
            }
        }
        if let Some(t) = t_final {
            if !(t > 0.0 && t.is_finite()) {
                return Err(ConfigError::new("time.t_final", format!("{t} is not a positive time")));
            }
        }
        let snapshots = match &self.time.snapshots {
            Some(s) => s.clone(),
            None => case_data.as_ref().map(|c| c.snapshots.clone()).unwrap_or_default(),
        };
        if let Some(bad) = snapshots.iter().find(|&&s| s < 0.0 || t_final.is_some_and(|t| s > t * (1.0 + 1e-12))) {
            return Err(ConfigError::new("time.snapshots", format!("{bad} outside [0, t_final]")));
        }

        check_expr("problem.function", &self.problem.function)?;
        check_expr("problem.load", &self.problem.load)?;
        check_expr("problem.collar", &self.problem.collar)?;
        check_expr("problem.exact", &self.problem.exact)?;
        check_expr("problem.initial", &self.problem.initial)?;
        check_expr("problem.source", &self.problem.source)?;

        let sweep = match (&self.study.n1d, &self.study.h) {
            (Some(_), Some(_)) => return Err(ConfigError::new("study", "set either n1d or h, not both")),
            (Some(n), None) => {
                if n.len() < 2 || n.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ConfigError::new("study.n1d", "need at least two increasing counts"));
                }
                Some(Sweep::N1d(n.clone()))
            }
            (None, Some(hs)) => {
                if hs.len() < 2 || hs.windows(2).any(|w| w[1] >= w[0]) || hs.iter().any(|&h| h <= 0.0) {
                    return Err(ConfigError::new("study.h", "need at least two decreasing positive steps"));
                }
                Some(Sweep::H(hs.clone()))
            }
            (None, None) => None,
        };
        if self.threads == Some(0) {
            return Err(ConfigError::new("threads", "must be positive"));
        }

        Ok(Settings {
            case: self.case,
            output: self.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
            threads: self.threads,
            curve_name,
            curve_params: self.domain.params.clone(),
            delta,
            betas,
            fc,
            h,
            extension: self.fc.extension.unwrap_or_default(),
            gmres,
            tau,
            t_final,
            snapshots,
            problem: self.problem.clone(),
            sweep,
        })
    }
}

fn catalog_name(curve: &BoundaryCurve) -> &str {
    let name = curve.name();
    name.split('(').next().unwrap_or(name)
}

fn rebuild_name(name: &str, params: &BTreeMap<String, f64>) -> String {
    let p: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    BoundaryCurve::from_catalog(name, &p).map(|c| c.name().to_string()).unwrap_or_default()
}

impl Settings {
    pub fn curve(&self) -> BoundaryCurve {
        let params: Vec<(&str, f64)> = self.curve_params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        BoundaryCurve::from_catalog(&self.curve_name, &params).expect("validated during resolution")
    }

    pub fn kernel(&self, beta: f64) -> KernelParams {
        KernelParams::new(self.delta, beta).expect("validated during resolution")
    }

    /// Explicit configuration that resolves back to `self`.
    pub fn to_config(&self) -> RunConfig {
        let (h, n1d) = (Some(self.h), None);
        let study = match &self.sweep {
            Some(Sweep::N1d(n)) => StudySection {
                n1d: Some(n.clone()),
                h: None,
            },
            Some(Sweep::H(hs)) => StudySection {
                n1d: None,
                h: Some(hs.clone()),
            },
            None => StudySection::default(),
        };
        RunConfig {
            case: self.case,
            output: Some(self.output.clone()),
            threads: self.threads,
            domain: DomainSection {
                curve: Some(self.curve_name.clone()),
                params: self.curve_params.clone(),
            },
            kernel: KernelSection {
                delta: Some(self.delta),
                betas: Some(self.betas.clone()),
            },
            fc: FcSection {
                d: Some(self.fc.d),
                m: Some(self.fc.m),
                c: Some(self.fc.c),
                n_r: Some(self.fc.n_r),
                h,
                n1d,
                evaluation: Some(self.fc.evaluation),
                extension: Some(self.extension),
            },
            gmres: GmresSection {
                tol: Some(self.gmres.tol),
                restart: Some(self.gmres.restart),
                max_iter: Some(self.gmres.max_iter),
                precondition: Some(self.gmres.precondition),
            },
            time: TimeSection {
                tau: self.tau,
                t_final: self.t_final,
                snapshots: Some(self.snapshots.clone()),
            },
            problem: self.problem.clone(),
            study,
        }
    }
}
