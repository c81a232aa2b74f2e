//! Binary sources with any number of hypotheses.
//!
//! For `M = 2` every difference `p_k - p_1` lies on one line, so the
//! max-min utility is set by the closest hypothesis and the problem becomes
//! the vector program of the two-hypothesis case with `m` leakage
//! constraints. Maximizing `|a . v_p|` over an intersection of ellipses is a
//! convex program whose optimum has at most two active constraints, so the
//! active set is found by enumerating single constraints and pairs.

use crate::binary::{
    both_active_a, choose_direction, degenerate_solution, difference, dot, dual_eta_nats,
    kkt_residuals, quadratic_leakage, single_active, solve_binary, ActiveCase, BinarySolution,
};
use crate::error::{Error, Result};
use crate::measures::{bits_to_nats, nats_to_bits};
use crate::mechanism::{assemble, canonical_sign, EitProblem, Perturbation};

const FEASIBILITY_TOL: f64 = 1e-10;
const TIE_TOL: f64 = 1e-12;

/// Index `k >= 1` minimizing `||p_k - p_1||`, smallest index on ties.
pub fn closest_hypothesis(problem: &EitProblem) -> usize {
    let p1 = problem.hypothesis(0).probs();
    let mut best = (1, f64::INFINITY);
    for k in 1..problem.m() {
        let (lambda, _) = difference(p1, problem.hypothesis(k).probs());
        if lambda < best.1 * (1.0 - TIE_TOL) {
            best = (k, lambda);
        }
    }
    best.0
}

struct Candidate {
    subset: Vec<usize>,
    a: Vec<f64>,
    eta: Vec<f64>,
    value: f64,
}

pub fn solve_binary_source_mary(problem: &EitProblem) -> Result<BinarySolution> {
    if problem.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "binary-source solver needs M = 2, got M = {}",
            problem.dim()
        )));
    }
    if problem.m() == 2 {
        return solve_binary(problem);
    }
    let m = problem.m();
    let w0 = problem.reference();
    let v = choose_direction(w0)?;
    let ps: Vec<&[f64]> = problem.hypotheses().iter().map(|p| p.probs()).collect();
    let eps: Vec<f64> = problem.budgets().iter().map(|&e| bits_to_nats(e)).collect();
    let k_star = closest_hypothesis(problem);
    let (lambda, v_p) = difference(ps[0], ps[k_star]);
    if lambda == 0.0 || eps.iter().any(|&e| e == 0.0) {
        return Ok(degenerate_solution(problem, v, lambda, v_p));
    }

    let feasible = |a: &[f64]| {
        ps.iter()
            .zip(&eps)
            .all(|(p, &e)| quadratic_leakage(p, a) <= e * (1.0 + FEASIBILITY_TOL))
    };
    let mut best: Option<Candidate> = None;
    let mut consider = |c: Candidate| {
        if best.as_ref().map_or(true, |b| c.value > b.value * (1.0 + 1e-12)) {
            best = Some(c);
        }
    };
    for j in 0..m {
        let (a, h) = single_active(ps[j], eps[j], lambda, &v_p);
        if feasible(&a) {
            let mut eta = vec![0.0; m];
            eta[j] = h;
            let value = 0.5 * lambda * dot(&a, &v_p).powi(2);
            consider(Candidate { subset: vec![j], a, eta, value });
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let Ok(h) = dual_eta_nats(ps[i], ps[j], eps[i], eps[j], lambda, &v_p) else {
                continue;
            };
            let a = both_active_a(ps[i], ps[j], h, lambda, &v_p);
            if feasible(&a) {
                let mut eta = vec![0.0; m];
                eta[i] = h.0;
                eta[j] = h.1;
                let value = 0.5 * lambda * dot(&a, &v_p).powi(2);
                consider(Candidate { subset: vec![i, j], a, eta, value });
            }
        }
    }
    let Some(Candidate { subset, mut a, eta, value }) = best else {
        return Err(Error::NumericalFailure("no feasible active set".into()));
    };
    canonical_sign(&mut a);
    let kkt = kkt_residuals(&ps, &eps, &eta, lambda, &v_p, &a);
    let mechanism = assemble(w0, &Perturbation::rank_one(&a, &v, w0)?)?;
    Ok(BinarySolution {
        a_star: a,
        v,
        lambda_p: lambda,
        v_p,
        eta,
        case: ActiveCase::Subset(subset),
        predicted_utility: nats_to_bits(value),
        mechanism,
        kkt,
    })
}
