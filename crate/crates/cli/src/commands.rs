use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use privhyp::{
    build_sdp, compare_protocol, effective_leakage, mechanism_exponent_check, mechanism_utility,
    mutual_information, output_size, reconstruct, relative_entropy, solve_binary,
    solve_binary_source_mary, solve_sdp, BinarySolution, CompareRow, Distribution, Mechanism,
    ReferenceOutput,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// CSV header written by [`write_csv`].
pub const CSV_COLUMNS: [&str; 7] = [
    "eps_tilde",
    "eps_effective",
    "eps_norm",
    "util_eit",
    "util_oracle",
    "ratio",
    "utility_kind",
];

/// On-disk mechanism: one row per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismFile {
    pub rows: Vec<Vec<f64>>,
}

impl MechanismFile {
    pub fn from_mechanism(w: &Mechanism) -> Self {
        Self { rows: w.to_rows() }
    }

    pub fn to_mechanism(&self) -> Result<Mechanism> {
        Mechanism::from_rows(&self.rows).map_err(|e| CliError::Validation(format!("mechanism: {e}")))
    }
}

/// Load a mechanism file, or the `mechanism` entry of a design report.
pub fn load_mechanism(path: &Path) -> Result<Mechanism> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let json = |source| CliError::Json {
        path: path.to_path_buf(),
        source,
    };
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(json)?;
    if value.get("rows").is_none() {
        if let Some(inner) = value.get_mut("mechanism") {
            value = inner.take();
        }
    }
    let file: MechanismFile = serde_json::from_value(value).map_err(json)?;
    file.to_mechanism()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub complementary_slackness: f64,
    pub primal_feasibility: f64,
    pub dual_feasibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    /// `binary`, `collinear` or `sdp`.
    pub method: String,
    pub note: Option<String>,
    /// Active constraint set, two-hypothesis and collinear designs.
    pub case: Option<String>,
    /// Rank of the SDP solution.
    pub rank: Option<usize>,
    pub budgets: Vec<f64>,
    pub utility_kind: String,
    /// Second-order relative-entropy utility, bits.
    pub predicted_utility: f64,
    /// Exact `min_k U(p_k W || p_1 W)` for the configured utility, bits.
    pub exact_utility: f64,
    /// Exact `I(p_k, W)` per hypothesis, bits.
    pub leakage: Vec<f64>,
    pub kkt: Option<KktReport>,
    /// Multipliers of the leakage constraints.
    pub multipliers: Vec<f64>,
    pub sdp_gap: Option<f64>,
    pub mechanism: MechanismFile,
}

fn binary_report(method: &str, note: Option<String>, sol: &BinarySolution) -> DesignReport {
    DesignReport {
        method: method.to_string(),
        note,
        case: Some(sol.case.to_string()),
        rank: None,
        budgets: Vec::new(),
        utility_kind: String::new(),
        predicted_utility: sol.predicted_utility,
        exact_utility: 0.0,
        leakage: Vec::new(),
        kkt: Some(KktReport {
            stationarity: sol.kkt.stationarity,
            complementary_slackness: sol.kkt.complementary_slackness,
            primal_feasibility: sol.kkt.primal_feasibility,
            dual_feasibility: sol.kkt.dual_feasibility,
        }),
        multipliers: sol.eta.clone(),
        sdp_gap: None,
        mechanism: MechanismFile::from_mechanism(&sol.mechanism),
    }
}

/// Design a mechanism: closed form for two hypotheses, the collinear
/// reduction for binary sources, the SDP otherwise.
pub fn design(cfg: &ExperimentConfig) -> Result<(DesignReport, Mechanism)> {
    let problem = cfg.problem()?;
    let utility = cfg.utility_kind()?;
    let (mut report, w) = if problem.m() == 2 {
        let sol = solve_binary(&problem)?;
        (binary_report("binary", None, &sol), sol.mechanism)
    } else if problem.dim() == 2 {
        let sol = solve_binary_source_mary(&problem)?;
        let k = privhyp::closest_hypothesis(&problem);
        let note = format!("collinear differences: design driven by hypothesis {k}, closest to hypothesis 0");
        (binary_report("collinear", Some(note), &sol), sol.mechanism)
    } else {
        let sol = solve_sdp(&build_sdp(&problem))?;
        let n = output_size(&sol);
        let w0 = match &cfg.reference {
            Some(_) => problem.reference().clone(),
            None => ReferenceOutput::uniform(n)?,
        };
        if w0.len() != n {
            return Err(CliError::Validation(format!(
                "reference has {} outputs, the SDP design of rank {} needs {n}",
                w0.len(),
                sol.rank
            )));
        }
        let rec = reconstruct(&sol, &w0)?;
        let report = DesignReport {
            method: "sdp".to_string(),
            note: None,
            case: None,
            rank: Some(sol.rank),
            budgets: Vec::new(),
            utility_kind: String::new(),
            predicted_utility: sol.utility_bits(),
            exact_utility: 0.0,
            leakage: Vec::new(),
            kkt: None,
            multipliers: sol.duals.clone(),
            sdp_gap: Some(sol.gap),
            mechanism: MechanismFile::from_mechanism(&rec.mechanism),
        };
        (report, rec.mechanism)
    };
    report.budgets = problem.budgets().to_vec();
    report.utility_kind = utility.to_string();
    report.exact_utility = mechanism_utility(&problem, &w, utility)?;
    report.leakage = problem
        .hypotheses()
        .iter()
        .map(|p| mutual_information(p, &w))
        .collect::<privhyp::Result<_>>()?;
    Ok((report, w))
}

/// Comparison rows for the configured sweep, ascending in the budget.
pub fn compare(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    let problem = cfg.problem_with(0.0)?;
    if problem.dim() != 2 {
        return Err(CliError::Validation(format!(
            "compare needs binary sources, got {} symbols",
            problem.dim()
        )));
    }
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("compare needs a sweep".into()))?;
    let h = problem.min_entropy();
    let eps: Vec<f64> = sweep.points().iter().map(|x| x * h).collect();
    Ok(compare_protocol(&problem, &eps, cfg.utility_kind()?, &cfg.grid_spec()?)?)
}

/// Write rows with a fixed column order and 12 significant digits.
pub fn write_csv<W: Write>(rows: &[CompareRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        let num = |x: f64| format!("{x:.11e}");
        w.write_record([
            num(r.eps_tilde),
            num(r.eps_effective),
            num(r.eps_norm),
            num(r.util_eit),
            num(r.util_oracle),
            num(r.ratio),
            r.utility.to_string(),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCheck {
    /// Index `k >= 1` of the alternative hypothesis.
    pub hypothesis: usize,
    pub n: u64,
    pub delta: f64,
    /// `exact` or `monte_carlo`.
    pub method: String,
    /// `-(1/n) log2 beta2`, bits per sample.
    pub exponent: f64,
    /// `D(p_k W || p_0 W)`, bits.
    pub divergence: f64,
    /// `|exponent - D| / D`, absent when `D = 0`.
    pub relative_gap: Option<f64>,
    /// 95% interval on `beta2`, simulated checks only.
    pub confidence: Option<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub tolerance: f64,
    /// Exact `max_k I(p_k, W)`, bits.
    pub leakage: f64,
    pub checks: Vec<ExponentCheck>,
    pub passed: bool,
}

/// Finite-n Neyman-Pearson exponents of the mechanism against the
/// divergences they should approach.
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let v = cfg
        .verify
        .as_ref()
        .ok_or_else(|| CliError::Validation("verify section is required".into()))?;
    let problem = cfg.problem_with(0.0)?;
    let w = match &v.mechanism {
        Some(path) => load_mechanism(path)?,
        None => design(cfg)?.1,
    };
    if w.inputs() != problem.dim() {
        return Err(CliError::Validation(format!(
            "mechanism has {} inputs, hypotheses have {} symbols",
            w.inputs(),
            problem.dim()
        )));
    }
    let p0 = problem.hypothesis(0);
    let q0 = p0.push_through(&w)?;
    let mut checks = Vec::new();
    for k in 1..problem.m() {
        let pk = problem.hypothesis(k);
        let divergence = relative_entropy(&pk.push_through(&w)?, &q0)?;
        for &delta in &v.deltas {
            let r = mechanism_exponent_check(p0, pk, &w, v.n, delta, v.trials, cfg.seed)?;
            checks.push(exponent_check(k, &r, divergence, v.tolerance));
        }
    }
    let passed = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        tolerance: v.tolerance,
        leakage: effective_leakage(&problem, &w)?,
        checks,
        passed,
    })
}

fn exponent_check(k: usize, r: &privhyp::TestResult, divergence: f64, tol: f64) -> ExponentCheck {
    let n = r.n as f64;
    let (pass, gap) = if divergence == 0.0 {
        // identical outputs: beta2 = 1 - delta
        (r.exponent <= -(1.0 - r.delta).log2() / n + 1e-12, None)
    } else {
        let gap = (r.exponent - divergence).abs() / divergence;
        let pass = match r.confidence {
            None => gap <= tol,
            Some((lo, hi)) => {
                let fastest = if lo > 0.0 { -lo.log2() / n } else { f64::INFINITY };
                let slowest = -hi.log2() / n;
                slowest <= divergence * (1.0 + tol) && fastest >= divergence * (1.0 - tol)
            }
        };
        (pass, Some(gap))
    };
    ExponentCheck {
        hypothesis: k,
        n: r.n,
        delta: r.delta,
        method: if r.confidence.is_some() { "monte_carlo" } else { "exact" }.to_string(),
        exponent: r.exponent,
        divergence,
        relative_gap: gap,
        confidence: r.confidence,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureReport {
    pub entropy_p: f64,
    pub entropy_q: Option<f64>,
    pub relative_entropy: Option<f64>,
    pub chi_squared: Option<f64>,
    pub alpha: Option<f64>,
    pub renyi: Option<f64>,
    pub hellinger: Option<f64>,
    /// `I(p, W)` when a mechanism is given.
    pub mutual_information: Option<f64>,
}

/// Divergences between `p` and `q` (bits) and the leakage of `w` under `p`.
pub fn measure(p: &[f64], q: Option<&[f64]>, alpha: Option<f64>, w: Option<&Mechanism>) -> Result<MeasureReport> {
    let dist = |name: &str, v: &[f64]| {
        Distribution::new(v.to_vec()).map_err(|e| CliError::Validation(format!("{name}: {e}")))
    };
    let p = dist("p", p)?;
    let order = alpha.map(privhyp::RenyiOrder::new).transpose()?;
    let mut report = MeasureReport {
        entropy_p: p.entropy(),
        entropy_q: None,
        relative_entropy: None,
        chi_squared: None,
        alpha,
        renyi: None,
        hellinger: None,
        mutual_information: None,
    };
    if let Some(q) = q {
        let q = dist("q", q)?;
        report.entropy_q = Some(q.entropy());
        report.relative_entropy = Some(relative_entropy(&p, &q)?);
        report.chi_squared = Some(privhyp::chi_squared_divergence(&p, &q)?);
        if let Some(o) = order {
            report.renyi = Some(privhyp::renyi_divergence(&p, &q, o)?);
            report.hellinger = Some(privhyp::hellinger_divergence(&p, &q, o)?);
        }
    }
    if let Some(w) = w {
        report.mutual_information = Some(mutual_information(&p, w)?);
    }
    Ok(report)
}

