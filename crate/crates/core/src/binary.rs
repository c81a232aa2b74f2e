//! Optimal mechanisms for two hypotheses in the high-privacy regime.
//!
//! The problem reduces to the vector program
//!
//! ```text
//! maximize    1/2 lambda_p (a . v_p)^2
//! subject to  1/2 sum_i p_ki a_i^2 <= eps_k,   k = 1, 2
//! ```
//!
//! with `lambda_p = ||p_2 - p_1||^2` and `v_p` the unit difference direction.
//! The optimal perturbation is `A = a^T v` for any unit `v` orthogonal to
//! `sqrt(w0)`, so a binary output alphabet suffices.

use crate::error::{Error, Result};
use crate::measures::{
    bits_to_nats, nats_to_bits, relative_entropy, renyi_divergence, Distribution, Mechanism,
    RenyiOrder,
};
use crate::mechanism::{
    assemble, canonical_sign, perfect_mechanism, EitProblem, Perturbation, ReferenceOutput,
};

/// Relative tolerance of the strict case-selection inequalities.
pub const CASE_TOL: f64 = 1e-12;

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 100;
const DUAL_RESIDUAL_TOL: f64 = 1e-10;

/// Which leakage constraints are active at the optimum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActiveCase {
    FirstActive,
    SecondActive,
    BothActive,
    /// `p_1 = p_2` or a zero budget: the only solution is `a = 0`.
    Degenerate,
    /// Active constraint indices for more than two hypotheses.
    Subset(Vec<usize>),
}

impl std::fmt::Display for ActiveCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActiveCase::FirstActive => write!(f, "FirstActive"),
            ActiveCase::SecondActive => write!(f, "SecondActive"),
            ActiveCase::BothActive => write!(f, "BothActive"),
            ActiveCase::Degenerate => write!(f, "Degenerate"),
            ActiveCase::Subset(s) => {
                let ids: Vec<String> = s.iter().map(|k| (k + 1).to_string()).collect();
                write!(f, "Active{{{}}}", ids.join(","))
            }
        }
    }
}

/// Residuals of the KKT system, each dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `max_i |1/2 lambda v_i - (sum_k eta_k p_ki) a_i| / (lambda / 2)`
    pub stationarity: f64,
    /// `max_k eta_k |eps_k - g_k(a)| / sum_j eta_j eps_j`
    pub complementary_slackness: f64,
    /// `max_k (g_k(a) - eps_k)^+ / eps_k`
    pub primal_feasibility: f64,
    /// `max_k (-eta_k)^+`
    pub dual_feasibility: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.complementary_slackness)
            .max(self.primal_feasibility)
            .max(self.dual_feasibility)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    /// Signed perturbation magnitudes, first nonzero entry positive.
    pub a_star: Vec<f64>,
    /// Unit direction orthogonal to `sqrt(w0)`.
    pub v: Vec<f64>,
    pub lambda_p: f64,
    pub v_p: Vec<f64>,
    /// One multiplier per hypothesis.
    pub eta: Vec<f64>,
    pub case: ActiveCase,
    /// `1/2 lambda_p (a . v_p)^2` in bits.
    pub predicted_utility: f64,
    pub mechanism: Mechanism,
    pub kkt: KktResiduals,
}

/// Relative-entropy solution evaluated under an order-`alpha` Rényi utility.
#[derive(Debug, Clone, PartialEq)]
pub struct RenyiSolution {
    pub solution: BinarySolution,
    pub order: RenyiOrder,
    /// Exact `D_alpha(p_2 W || p_1 W)` in bits.
    pub renyi_utility: f64,
    /// Exact `D(p_2 W || p_1 W)` in bits.
    pub kl_utility: f64,
    /// `(1 - alpha) D / (2^((1 - alpha) D_alpha) - 1)`, undefined when
    /// `D_alpha = 0`.
    pub ratio: Option<f64>,
}

/// First unit vector orthogonal to `sqrt(w0)`; for `N = 2` this is the only
/// one up to sign.
pub fn choose_direction(w0: &ReferenceOutput) -> Result<Vec<f64>> {
    if w0.len() < 2 {
        return Err(Error::InvalidInput(
            "output alphabet must have at least two symbols".into(),
        ));
    }
    Ok(w0.orthonormal_complement().remove(0))
}

/// `(||q - p||^2, (q - p) / ||q - p||)`; the direction is zero when `p = q`.
pub(crate) fn difference(p: &[f64], q: &[f64]) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    let lambda: f64 = diff.iter().map(|x| x * x).sum();
    if lambda == 0.0 {
        return (0.0, vec![0.0; diff.len()]);
    }
    let n = lambda.sqrt();
    (lambda, diff.into_iter().map(|x| x / n).collect())
}

/// `sum_i v_i^2 num_i / den_i^2`
fn weighted(v: &[f64], num: &[f64], den: &[f64]) -> f64 {
    v.iter()
        .zip(num)
        .zip(den)
        .map(|((vi, ni), di)| vi * vi * ni / (di * di))
        .sum()
}

/// `1/2 sum_i p_i a_i^2`
pub(crate) fn quadratic_leakage(p: &[f64], a: &[f64]) -> f64 {
    0.5 * p.iter().zip(a).map(|(pi, ai)| pi * ai * ai).sum::<f64>()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Optimum with only constraint `p` (budget `eps` nats) active:
/// `a = sqrt(2 eps / sum v^2/p) v / p` and its multiplier.
pub(crate) fn single_active(p: &[f64], eps: f64, lambda: f64, v: &[f64]) -> (Vec<f64>, f64) {
    let s: f64 = v.iter().zip(p).map(|(vi, pi)| vi * vi / pi).sum();
    let scale = (2.0 * eps / s).sqrt();
    let a = v.iter().zip(p).map(|(vi, pi)| scale * vi / pi).collect();
    (a, (lambda * lambda * s / (8.0 * eps)).sqrt())
}

/// `a = (lambda / 2) v / (eta_1 p_1 + eta_2 p_2)`
pub(crate) fn both_active_a(p1: &[f64], p2: &[f64], eta: (f64, f64), lambda: f64, v: &[f64]) -> Vec<f64> {
    v.iter()
        .enumerate()
        .map(|(i, vi)| 0.5 * lambda * vi / (eta.0 * p1[i] + eta.1 * p2[i]))
        .collect()
}

/// Multipliers `(eta_1, eta_2)` when both budgets are tight. Budgets in bits.
pub fn solve_dual_eta(
    p1: &Distribution,
    p2: &Distribution,
    eps1: f64,
    eps2: f64,
    lambda_p: f64,
    v_p: &[f64],
) -> Result<(f64, f64)> {
    if p1.len() != p2.len() || v_p.len() != p1.len() {
        return Err(Error::DimensionMismatch {
            expected: p1.len(),
            found: if p2.len() != p1.len() { p2.len() } else { v_p.len() },
        });
    }
    if !(eps1 > 0.0 && eps2 > 0.0 && lambda_p > 0.0) {
        return Err(Error::InvalidInput(
            "dual solve needs positive budgets and distinct hypotheses".into(),
        ));
    }
    dual_eta_nats(
        p1.probs(),
        p2.probs(),
        bits_to_nats(eps1),
        bits_to_nats(eps2),
        lambda_p,
        v_p,
    )
}

/// `F_k = lambda^2 / (8 eps_k) * sum v^2 p_k / D^2 - 1`
fn dual_residual(p1: &[f64], p2: &[f64], e: (f64, f64), lambda: f64, v: &[f64], eta: (f64, f64)) -> (f64, f64) {
    let den: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| eta.0 * a + eta.1 * b).collect();
    let c = lambda * lambda / 8.0;
    (
        c * weighted(v, p1, &den) / e.0 - 1.0,
        c * weighted(v, p2, &den) / e.1 - 1.0,
    )
}

pub(crate) fn dual_eta_nats(
    p1: &[f64],
    p2: &[f64],
    e1: f64,
    e2: f64,
    lambda: f64,
    v: &[f64],
) -> Result<(f64, f64)> {
    let eta = newton_dual(p1, p2, e1, e2, lambda, v).or_else(|| bracketed_dual(p1, p2, e1, e2, lambda, v));
    let Some(eta) = eta else {
        let (f1, f2) = dual_residual(p1, p2, (e1, e2), lambda, v, (1.0, 1.0));
        return Err(Error::NoConvergence {
            what: "dual multipliers",
            iterations: NEWTON_MAX_ITER,
            residual: f1.abs().max(f2.abs()),
        });
    };
    let (f1, f2) = dual_residual(p1, p2, (e1, e2), lambda, v, eta);
    let residual = f1.abs().max(f2.abs());
    if residual > DUAL_RESIDUAL_TOL || eta.0 < 0.0 || eta.1 < 0.0 {
        return Err(Error::NoConvergence {
            what: "dual multipliers",
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    Ok(eta)
}

/// Damped Newton in `(ln eta_1, ln eta_2)`, started at half the
/// single-active multipliers.
fn newton_dual(p1: &[f64], p2: &[f64], e1: f64, e2: f64, lambda: f64, v: &[f64]) -> Option<(f64, f64)> {
    let c = lambda * lambda / 8.0;
    let eval = |x: [f64; 2]| {
        let eta = (x[0].exp(), x[1].exp());
        let den: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| eta.0 * a + eta.1 * b).collect();
        let f = [c * weighted(v, p1, &den) / e1 - 1.0, c * weighted(v, p2, &den) / e2 - 1.0];
        let mut jac = [[0.0; 2]; 2];
        let ps = [p1, p2];
        let es = [e1, e2];
        let etas = [eta.0, eta.1];
        for k in 0..2 {
            for j in 0..2 {
                let s: f64 = (0..v.len())
                    .map(|i| v[i] * v[i] * ps[k][i] * ps[j][i] / den[i].powi(3))
                    .sum();
                jac[k][j] = -2.0 * c * s * etas[j] / es[k];
            }
        }
        (f, jac)
    };
    let (_, h1) = single_active(p1, e1, lambda, v);
    let (_, h2) = single_active(p2, e2, lambda, v);
    let mut x = [(0.5 * h1).ln(), (0.5 * h2).ln()];
    let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
    let (mut f, mut jac) = eval(x);
    for _ in 0..NEWTON_MAX_ITER {
        if norm(f) <= NEWTON_TOL {
            return Some((x[0].exp(), x[1].exp()));
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det == 0.0 {
            return None;
        }
        let dx = [
            -(jac[1][1] * f[0] - jac[0][1] * f[1]) / det,
            -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det,
        ];
        let mut step = 1.0;
        loop {
            let trial = [x[0] + step * dx[0], x[1] + step * dx[1]];
            let (ft, jt) = eval(trial);
            if ft[0].is_finite() && ft[1].is_finite() && norm(ft) < (1.0 - 1e-4 * step) * norm(f) {
                x = trial;
                f = ft;
                jac = jt;
                break;
            }
            step *= 0.5;
            if step < 1e-10 {
                return None;
            }
        }
        // a multiplier heading to zero means the case was misread
        if x[0] < -600.0 || x[1] < -600.0 {
            return None;
        }
    }
    None
}

/// Bisection on the mixing weight `t` of `q = (1 - t) p_1 + t p_2`, where
/// `eta = s (1 - t, t)`; tight for both constraints iff
/// `eps_2 S_1(t) = eps_1 S_2(t)`.
fn bracketed_dual(p1: &[f64], p2: &[f64], e1: f64, e2: f64, lambda: f64, v: &[f64]) -> Option<(f64, f64)> {
    let sums = |t: f64| {
        let q: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        (weighted(v, p1, &q), weighted(v, p2, &q))
    };
    let h = |t: f64| {
        let (s1, s2) = sums(t);
        e2 * s1 - e1 * s2
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (h_lo, h_hi) = (h(lo), h(hi));
    let t = if h_lo >= 0.0 {
        0.0
    } else if h_hi <= 0.0 {
        1.0
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (s1, _) = sums(t);
    let s = (lambda * lambda * s1 / (8.0 * e1)).sqrt();
    Some((s * (1.0 - t), s * t))
}

/// KKT residuals of the vector program for an arbitrary set of constraints.
/// Budgets in nats.
pub(crate) fn kkt_residuals(
    ps: &[&[f64]],
    eps: &[f64],
    eta: &[f64],
    lambda: f64,
    v_p: &[f64],
    a: &[f64],
) -> KktResiduals {
    let proj = dot(a, v_p);
    let sign = if proj < 0.0 { -1.0 } else { 1.0 };
    let mut stationarity: f64 = 0.0;
    for i in 0..a.len() {
        let d: f64 = ps.iter().zip(eta).map(|(p, e)| e * p[i]).sum();
        let r = 0.5 * lambda * v_p[i] - d * sign * a[i];
        stationarity = stationarity.max(r.abs() / (0.5 * lambda));
    }
    let weight: f64 = eta.iter().zip(eps).map(|(e, b)| e * b).sum();
    let mut cs: f64 = 0.0;
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for ((p, &b), &e) in ps.iter().zip(eps).zip(eta) {
        let g = quadratic_leakage(p, a);
        primal = primal.max((g - b).max(0.0) / b);
        if weight > 0.0 {
            cs = cs.max(e * (b - g).abs() / weight);
        }
        dual = dual.max((-e).max(0.0));
    }
    KktResiduals {
        stationarity,
        complementary_slackness: cs,
        primal_feasibility: primal,
        dual_feasibility: dual,
    }
}

pub(crate) fn degenerate_solution(problem: &EitProblem, v: Vec<f64>, lambda: f64, v_p: Vec<f64>) -> BinarySolution {
    BinarySolution {
        a_star: vec![0.0; problem.dim()],
        v,
        lambda_p: lambda,
        v_p,
        eta: vec![0.0; problem.m()],
        case: ActiveCase::Degenerate,
        predicted_utility: 0.0,
        mechanism: perfect_mechanism(problem.reference(), problem.dim()),
        kkt: KktResiduals::default(),
    }
}

/// Closed-form optimal mechanism for two hypotheses.
pub fn solve_binary(problem: &EitProblem) -> Result<BinarySolution> {
    if problem.m() != 2 {
        return Err(Error::InvalidInput(format!(
            "two hypotheses expected, got {}",
            problem.m()
        )));
    }
    let w0 = problem.reference();
    let v = choose_direction(w0)?;
    let p1 = problem.hypothesis(0).probs();
    let p2 = problem.hypothesis(1).probs();
    let (lambda, v_p) = difference(p1, p2);
    let e1 = bits_to_nats(problem.budgets()[0]);
    let e2 = bits_to_nats(problem.budgets()[1]);
    if lambda == 0.0 || e1 == 0.0 || e2 == 0.0 {
        return Ok(degenerate_solution(problem, v, lambda, v_p));
    }

    // s_jk = sum v^2 p_j / p_k^2
    let s11 = weighted(&v_p, p1, p1);
    let s21 = weighted(&v_p, p2, p1);
    let s22 = weighted(&v_p, p2, p2);
    let s12 = weighted(&v_p, p1, p2);

    let (case, mut a, eta) = if s21 * e1 < e2 * s11 * (1.0 - CASE_TOL) {
        let (a, h) = single_active(p1, e1, lambda, &v_p);
        (ActiveCase::FirstActive, a, vec![h, 0.0])
    } else if s12 * e2 < e1 * s22 * (1.0 - CASE_TOL) {
        let (a, h) = single_active(p2, e2, lambda, &v_p);
        (ActiveCase::SecondActive, a, vec![0.0, h])
    } else {
        let eta = dual_eta_nats(p1, p2, e1, e2, lambda, &v_p)?;
        let a = both_active_a(p1, p2, eta, lambda, &v_p);
        (ActiveCase::BothActive, a, vec![eta.0, eta.1])
    };
    canonical_sign(&mut a);

    let kkt = kkt_residuals(&[p1, p2], &[e1, e2], &eta, lambda, &v_p, &a);
    let proj = dot(&a, &v_p);
    let predicted_utility = nats_to_bits(0.5 * lambda * proj * proj);
    let mechanism = assemble(w0, &Perturbation::rank_one(&a, &v, w0)?)?;
    Ok(BinarySolution {
        a_star: a,
        v,
        lambda_p: lambda,
        v_p,
        eta,
        case,
        predicted_utility,
        mechanism,
        kkt,
    })
}

/// The relative-entropy mechanism, scored under the Rényi utility. In the
/// high-privacy limit both utilities share the same optimizer.
pub fn solve_binary_renyi(problem: &EitProblem, order: RenyiOrder) -> Result<RenyiSolution> {
    let solution = solve_binary(problem)?;
    let q1 = problem.hypothesis(0).push_through(&solution.mechanism)?;
    let q2 = problem.hypothesis(1).push_through(&solution.mechanism)?;
    let renyi_utility = renyi_divergence(&q2, &q1, order)?;
    let kl_utility = relative_entropy(&q2, &q1)?;
    let ratio = renyi_ratio(kl_utility, renyi_utility, order);
    Ok(RenyiSolution {
        solution,
        order,
        renyi_utility,
        kl_utility,
        ratio,
    })
}

/// `(1 - alpha) D / (2^((1 - alpha) D_alpha) - 1)`.
pub fn renyi_ratio(kl: f64, renyi: f64, order: RenyiOrder) -> Option<f64> {
    let b = 1.0 - order.alpha();
    let den = (b * bits_to_nats(renyi)).exp_m1();
    (den > 0.0).then(|| b * kl / den)
}
