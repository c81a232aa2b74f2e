//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "hypotheses": [[0.5, 0.5], [0.45, 0.55]],
//!   "budgets": { "normalized": 0.001 },
//!   "utility": "kl",
//!   "grid": { "resolution": 0.001, "refine_rounds": 3 },
//!   "sweep": { "log_range": { "start": 1e-4, "stop": 0.2, "points": 12 } },
//!   "seed": 7
//! }
//! ```
//!
//! Budgets are either explicit (bits, one per hypothesis) or a fraction of
//! `min_k H(p_k)` in `(0, 0.2]`. Sweep values are always such fractions.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use privhyp::{Distribution, EitProblem, GridSpec, ReferenceOutput, UtilityKind};

use crate::error::{CliError, Result};

/// Largest normalized budget accepted.
pub const MAX_NORMALIZED: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Budgets {
    Explicit(Vec<f64>),
    Normalized(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    Values(Vec<f64>),
    LogRange(LogRange),
}

impl Sweep {
    /// Normalized budgets in ascending order.
    pub fn points(&self) -> Vec<f64> {
        let mut v = match self {
            Sweep::Values(v) => v.clone(),
            Sweep::LogRange(r) => match r.points {
                0 => Vec::new(),
                1 => vec![r.start],
                n => {
                    let (a, b) = (r.start.ln(), r.stop.ln());
                    (0..n)
                        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                        .collect()
                }
            },
        };
        v.sort_by(f64::total_cmp);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: f64,
    pub refine_rounds: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            resolution: g.resolution,
            refine_rounds: g.refine_rounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Mechanism file; designed from the config when absent.
    #[serde(default)]
    pub mechanism: Option<PathBuf>,
    pub n: u64,
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    /// Allowed relative gap between the finite-n exponent and the divergence.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Monte Carlo trials for mechanisms with more than two outputs.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_deltas() -> Vec<f64> {
    vec![0.05, 0.2]
}

fn default_tolerance() -> f64 {
    0.15
}

fn default_trials() -> usize {
    2000
}

fn default_utility() -> String {
    "kl".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hypotheses: Vec<Vec<f64>>,
    #[serde(default)]
    pub budgets: Option<Budgets>,
    /// `kl` or `renyi:<alpha>`.
    #[serde(default = "default_utility")]
    pub utility: String,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub seed: u64,
    /// Reference output distribution `w0`; uniform over two outputs if absent.
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid_step: Option<f64>,
    pub utility: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Read and validate a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(v) = cfg.verify.as_mut() {
            if let Some(m) = v.mechanism.as_mut() {
                if m.is_relative() {
                    *m = base.join(&*m);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(g) = o.grid_step {
            self.grid.resolution = g;
        }
        if let Some(u) = &o.utility {
            self.utility = u.clone();
        }
        self.validate()
    }

    /// Check everything that can be checked without solving.
    pub fn validate(&self) -> Result<()> {
        let problem = self.problem_with(0.0)?;
        self.utility_kind()?;
        self.grid_spec()?;
        match &self.budgets {
            Some(Budgets::Normalized(x)) => check_fraction("budgets.normalized", *x)?,
            Some(Budgets::Explicit(v)) => {
                if v.len() != problem.m() {
                    return Err(CliError::Validation(format!(
                        "budgets.explicit has {} entries for {} hypotheses",
                        v.len(),
                        problem.m()
                    )));
                }
                problem.with_budgets(v.clone())?;
            }
            None => {}
        }
        if let Some(s) = &self.sweep {
            if let Sweep::LogRange(r) = s {
                if r.points > 0 && !(r.start > 0.0 && r.stop >= r.start) {
                    return Err(CliError::Validation(format!(
                        "sweep.log_range needs 0 < start <= stop, got {} .. {}",
                        r.start, r.stop
                    )));
                }
            }
            for x in s.points() {
                check_fraction("sweep", x)?;
            }
        }
        if let Some(v) = &self.verify {
            if v.n == 0 {
                return Err(CliError::Validation("verify.n must be positive".into()));
            }
            if v.deltas.is_empty() || v.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                return Err(CliError::Validation(format!(
                    "verify.deltas must be nonempty and lie in (0, 1), got {:?}",
                    v.deltas
                )));
            }
            if !(v.tolerance >= 0.0) {
                return Err(CliError::Validation("verify.tolerance must be >= 0".into()));
            }
        }
        Ok(())
    }

    fn hypotheses(&self) -> Result<Vec<Distribution>> {
        if self.hypotheses.len() < 2 {
            return Err(CliError::Validation(format!(
                "need at least two hypotheses, got {}",
                self.hypotheses.len()
            )));
        }
        self.hypotheses
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Distribution::new(p.clone())
                    .map_err(|e| CliError::Validation(format!("hypotheses[{k}]: {e}")))
            })
            .collect()
    }

    pub fn reference(&self) -> Result<ReferenceOutput> {
        Ok(match &self.reference {
            Some(w0) => ReferenceOutput::new(w0.clone())
                .map_err(|e| CliError::Validation(format!("reference: {e}")))?,
            None => ReferenceOutput::uniform(2)?,
        })
    }

    /// Problem with every budget equal to `eps` bits.
    pub fn problem_with(&self, eps: f64) -> Result<EitProblem> {
        let hyps = self.hypotheses()?;
        let m = hyps.len();
        Ok(EitProblem::new(hyps, vec![eps; m], self.reference()?)?)
    }

    /// Problem with the configured budgets.
    pub fn problem(&self) -> Result<EitProblem> {
        let base = self.problem_with(0.0)?;
        match &self.budgets {
            Some(Budgets::Explicit(v)) => Ok(base.with_budgets(v.clone())?),
            Some(Budgets::Normalized(x)) => Ok(base.with_budgets(vec![x * base.min_entropy(); base.m()])?),
            None => Err(CliError::Validation("budgets are required for this command".into())),
        }
    }

    pub fn utility_kind(&self) -> Result<UtilityKind> {
        Ok(self.utility.parse()?)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec::new(self.grid.resolution, self.grid.refine_rounds)?)
    }
}

fn check_fraction(what: &str, x: f64) -> Result<()> {
    if x > 0.0 && x <= MAX_NORMALIZED {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{what}: normalized budget must lie in (0, {MAX_NORMALIZED}], got {x}"
        )))
    }
}
