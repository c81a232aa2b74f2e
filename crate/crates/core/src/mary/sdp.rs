//! Log-det barrier solver for the small dense SDP
//!
//! ```text
//! maximize    t
//! subject to  1/2 Tr(P_k B) >= t          k = 2..m,  P_k = (p_k - p_1)^T (p_k - p_1)
//!             1/2 Tr([p_k] B) <= eps_k    k = 1..m
//!             B >= 0
//! ```
//!
//! Variables are the upper triangle of `B` plus `t`. Budgets and utility
//! matrices are rescaled to order one before iterating.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::{bits_to_nats, nats_to_bits};
use crate::mechanism::EitProblem;

use super::eigen::jacobi_eigen;

/// Eigenvalues below `RANK_TOL * lambda_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;
/// Largest accepted duality gap, in nats.
pub const GAP_TOL: f64 = 1e-7;

const TARGET_GAP: f64 = 1e-12;
const INNER_TOL: f64 = 1e-14;
const MAX_INNER: usize = 200;
const MAX_OUTER: usize = 40;

/// Data of the SDP built from a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Sdp {
    /// `P_k` for `k = 2..m`.
    pub utility: Vec<DMatrix<f64>>,
    /// `p_k` for `k = 1..m`; the trace constraint uses `[p_k]`.
    pub trace: Vec<Vec<f64>>,
    /// Budgets in nats.
    pub budgets: Vec<f64>,
}

impl Sdp {
    pub fn dim(&self) -> usize {
        self.trace[0].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub b: DMatrix<f64>,
    /// `min_k 1/2 Tr(P_k B)` in nats.
    pub t: f64,
    /// Numerical rank `l`.
    pub rank: usize,
    /// The `l` leading eigenvalues.
    pub eigvals: Vec<f64>,
    /// Matching `M x l` orthonormal eigenvectors.
    pub u: DMatrix<f64>,
    /// Multipliers of the trace constraints.
    pub duals: Vec<f64>,
    /// Duality gap bound in nats.
    pub gap: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn utility_bits(&self) -> f64 {
        nats_to_bits(self.t)
    }
}

pub fn build_sdp(problem: &EitProblem) -> Sdp {
    let p1 = problem.hypothesis(0).probs();
    let utility = problem.hypotheses()[1..]
        .iter()
        .map(|pk| {
            let d = DVector::from_iterator(p1.len(), pk.probs().iter().zip(p1).map(|(a, b)| a - b));
            &d * d.transpose()
        })
        .collect();
    Sdp {
        utility,
        trace: problem.hypotheses().iter().map(|p| p.probs().to_vec()).collect(),
        budgets: problem.budgets().iter().map(|&e| bits_to_nats(e)).collect(),
    }
}

/// Upper-triangle index pairs, row-major.
fn pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

/// Coefficients `c` with `Tr(C B) = c . x`.
fn trace_coeffs(c: &DMatrix<f64>, idx: &[(usize, usize)]) -> DVector<f64> {
    DVector::from_iterator(
        idx.len(),
        idx.iter().map(|&(i, j)| if i == j { c[(i, i)] } else { c[(i, j)] + c[(j, i)] }),
    )
}

fn unpack(x: &DVector<f64>, idx: &[(usize, usize)], n: usize) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, n);
    for (k, &(i, j)) in idx.iter().enumerate() {
        b[(i, j)] = x[k];
        b[(j, i)] = x[k];
    }
    b
}

struct Barrier {
    n: usize,
    idx: Vec<(usize, usize)>,
    /// rows `a` of the affine slacks `s = a . z + c`, `z = (x, t)`
    rows: Vec<DVector<f64>>,
    consts: Vec<f64>,
}

impl Barrier {
    fn slacks(&self, z: &DVector<f64>) -> Vec<f64> {
        self.rows.iter().zip(&self.consts).map(|(a, c)| a.dot(z) + c).collect()
    }

    /// `f = -tau t - log det B - sum log s`, or `None` outside the domain.
    fn value(&self, z: &DVector<f64>, tau: f64) -> Option<f64> {
        let nx = self.idx.len();
        let b = unpack(&z.rows(0, nx).into_owned(), &self.idx, self.n);
        let chol = b.cholesky()?;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let mut f = -tau * z[nx] - logdet;
        for s in self.slacks(z) {
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        Some(f)
    }

    fn grad_hess(&self, z: &DVector<f64>, tau: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let nx = self.idx.len();
        let dim = nx + 1;
        let b = unpack(&z.rows(0, nx).into_owned(), &self.idx, self.n);
        let g = b.cholesky()?.inverse();
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        grad[nx] = -tau;
        for (a, &(i, j)) in self.idx.iter().enumerate() {
            grad[a] = -if i == j { g[(i, i)] } else { 2.0 * g[(i, j)] };
            for (c, &(k, l)) in self.idx.iter().enumerate().skip(a) {
                // Tr(G E_ij G E_kl), E_ij = e_i e_j^T + e_j e_i^T off the diagonal
                let h = if i == j && k == l {
                    g[(i, k)] * g[(i, k)]
                } else if i == j {
                    2.0 * g[(i, k)] * g[(l, i)]
                } else if k == l {
                    2.0 * g[(k, i)] * g[(j, k)]
                } else {
                    2.0 * (g[(j, k)] * g[(l, i)] + g[(j, l)] * g[(k, i)])
                };
                hess[(a, c)] = h;
                hess[(c, a)] = h;
            }
        }
        for (row, s) in self.rows.iter().zip(self.slacks(z)) {
            grad -= row / s;
            hess += (row * row.transpose()) / (s * s);
        }
        Some((grad, hess))
    }
}

/// Solve `H d = -g` after symmetric diagonal equilibration.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / hess[(i, i)].abs().sqrt().max(1e-300)).collect();
    let hs = DMatrix::from_fn(n, n, |i, j| hess[(i, j)] * scale[i] * scale[j]);
    let gs = DVector::from_fn(n, |i, _| -grad[i] * scale[i]);
    let y = hs.cholesky()?.solve(&gs);
    Some(DVector::from_fn(n, |i, _| y[i] * scale[i]))
}

fn trivial_solution(n: usize, m: usize) -> SdpSolution {
    SdpSolution {
        b: DMatrix::zeros(n, n),
        t: 0.0,
        rank: 0,
        eigvals: Vec::new(),
        u: DMatrix::zeros(n, 0),
        duals: vec![0.0; m],
        gap: 0.0,
        iterations: 0,
    }
}

pub fn solve_sdp(sdp: &Sdp) -> Result<SdpSolution> {
    let n = sdp.dim();
    let m = sdp.trace.len();
    if sdp.budgets.iter().any(|&e| e <= 0.0) || sdp.utility.iter().any(|p| p.amax() == 0.0) {
        return Ok(trivial_solution(n, m));
    }
    let eps_max = sdp.budgets.iter().cloned().fold(0.0, f64::max);
    let p_max = sdp.utility.iter().map(|p| p.trace()).fold(0.0, f64::max);
    let idx = pairs(n);
    let nx = idx.len();

    let mut rows = Vec::new();
    let mut consts = Vec::new();
    for p in &sdp.utility {
        let mut r = DVector::zeros(nx + 1);
        r.rows_mut(0, nx).copy_from(&(trace_coeffs(&(p / p_max), &idx) * 0.5));
        r[nx] = -1.0;
        rows.push(r);
        consts.push(0.0);
    }
    for (p, &e) in sdp.trace.iter().zip(&sdp.budgets) {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(p));
        let mut r = DVector::zeros(nx + 1);
        r.rows_mut(0, nx).copy_from(&(trace_coeffs(&d, &idx) * -0.5));
        rows.push(r);
        consts.push(e / eps_max);
    }
    let barrier = Barrier { n, idx, rows, consts };
    let nu = (n + sdp.utility.len() + m) as f64;

    // strictly feasible start: B = s I, t below every utility
    let s0 = 0.5 * sdp.budgets.iter().map(|e| e / eps_max).fold(f64::INFINITY, f64::min);
    let mut z = DVector::zeros(nx + 1);
    for (k, &(i, j)) in barrier.idx.iter().enumerate() {
        if i == j {
            z[k] = s0;
        }
    }
    let t0 = sdp
        .utility
        .iter()
        .map(|p| 0.5 * s0 * p.trace() / p_max)
        .fold(f64::INFINITY, f64::min);
    z[nx] = t0 - 1.0;

    let mut tau = 1.0;
    let mut iterations = 0;
    for _ in 0..MAX_OUTER {
        for _ in 0..MAX_INNER {
            let (grad, hess) = barrier
                .grad_hess(&z, tau)
                .ok_or_else(|| Error::NumericalFailure("iterate left the PSD cone".into()))?;
            let dz = newton_direction(&grad, &hess)
                .ok_or_else(|| Error::NumericalFailure("singular barrier Hessian".into()))?;
            iterations += 1;
            let decrement = -grad.dot(&dz);
            if decrement < 0.0 {
                return Err(Error::NumericalFailure(format!(
                    "non-descent Newton step (decrement {decrement:e})"
                )));
            }
            if decrement * 0.5 <= INNER_TOL {
                break;
            }
            let f0 = barrier.value(&z, tau).unwrap();
            let mut step = 1.0;
            loop {
                let trial = &z + &dz * step;
                if let Some(f) = barrier.value(&trial, tau) {
                    if f <= f0 - 0.25 * step * decrement {
                        z = trial;
                        break;
                    }
                }
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
            if step < 1e-16 {
                break;
            }
        }
        if nu / tau <= TARGET_GAP {
            break;
        }
        tau *= 10.0;
    }

    let gap = nu / tau * eps_max * p_max;
    if gap > GAP_TOL {
        return Err(Error::NumericalFailure(format!("barrier stalled with gap {gap:e}")));
    }
    let slacks = barrier.slacks(&z);
    let duals = slacks[sdp.utility.len()..]
        .iter()
        .map(|s| p_max / (tau * s))
        .collect();
    let b = unpack(&z.rows(0, nx).into_owned(), &barrier.idx, n) * eps_max;
    finish(sdp, b, duals, gap, iterations)
}

fn finish(sdp: &Sdp, b: DMatrix<f64>, duals: Vec<f64>, gap: f64, iterations: usize) -> Result<SdpSolution> {
    let eig = jacobi_eigen(&b)?;
    let top = eig.values[0].max(0.0);
    let rank = eig.values.iter().filter(|&&l| l > RANK_TOL * top && l > 0.0).count();
    let eigvals: Vec<f64> = eig.values[..rank].to_vec();
    let u = eig.vectors.columns(0, rank).into_owned();
    // keep only the retained spectrum so that B = U diag(l) U^T exactly
    let b = &u * DMatrix::from_diagonal(&DVector::from_column_slice(&eigvals)) * u.transpose();
    let b = (&b + b.transpose()) * 0.5;
    let t = sdp
        .utility
        .iter()
        .map(|p| 0.5 * (p * &b).trace())
        .fold(f64::INFINITY, f64::min);
    Ok(SdpSolution {
        b,
        t,
        rank,
        eigvals,
        u,
        duals,
        gap,
        iterations,
    })
}

/// `1/2 Tr([p_k] B)` for each hypothesis, in nats.
pub fn trace_leakage(sdp: &Sdp, b: &DMatrix<f64>) -> Vec<f64> {
    sdp.trace
        .iter()
        .map(|p| 0.5 * p.iter().enumerate().map(|(i, pi)| pi * b[(i, i)]).sum::<f64>())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary::solve_binary;
    use crate::measures::Distribution;
    use crate::mechanism::ReferenceOutput;
    use approx::assert_relative_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    fn problem(ps: &[&[f64]], eps: &[f64]) -> EitProblem {
        EitProblem::new(
            ps.iter().map(|p| d(p)).collect(),
            eps.to_vec(),
            ReferenceOutput::uniform(2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn structure() {
        let s = build_sdp(&problem(&[&[0.5, 0.5], &[0.45, 0.55]], &[1e-3, 1e-3]));
        assert_eq!((s.utility.len(), s.trace.len()), (1, 2));
        assert_relative_eq!(s.utility[0][(0, 1)], -0.0025, max_relative = 1e-12);
        let s = build_sdp(&problem(&[&[0.5, 0.5], &[0.45, 0.55], &[0.55, 0.45]], &[1e-3; 3]));
        assert_eq!((s.utility.len(), s.trace.len()), (2, 3));
    }

    #[test]
    fn trivial_instances() {
        let s = solve_sdp(&build_sdp(&problem(&[&[0.5, 0.5], &[0.45, 0.55]], &[0.0, 0.0]))).unwrap();
        assert_eq!(s.t, 0.0);
        assert_eq!(s.b, DMatrix::zeros(2, 2));
        let s = solve_sdp(&build_sdp(&problem(&[&[0.3, 0.7], &[0.3, 0.7]], &[1e-3, 1e-3]))).unwrap();
        assert_eq!((s.t, s.rank), (0.0, 0));
    }

    #[test]
    fn two_hypotheses_match_closed_form() {
        for (p1, p2, e1, e2) in [
            ([0.5, 0.5], [0.45, 0.55], 1e-3, 1e-3),
            ([0.55, 0.45], [0.95, 0.05], 1e-4, 1e-2),
            ([0.3, 0.7], [0.6, 0.4], 1e-3, 2e-3),
        ] {
            let pr = problem(&[&p1, &p2], &[e1, e2]);
            let sol = solve_sdp(&build_sdp(&pr)).unwrap();
            let closed = solve_binary(&pr).unwrap();
            assert_eq!(sol.rank, 1);
            assert!((sol.utility_bits() - closed.predicted_utility).abs() <= 1e-6 * closed.predicted_utility);
            assert!(sol.gap <= GAP_TOL);
        }
    }

    #[test]
    fn three_symbol_feasibility() {
        let pr = EitProblem::new(
            vec![d(&[0.2, 0.3, 0.5]), d(&[0.3, 0.3, 0.4]), d(&[0.25, 0.4, 0.35])],
            vec![1e-3, 2e-3, 1.5e-3],
            ReferenceOutput::uniform(2).unwrap(),
        )
        .unwrap();
        let sdp = build_sdp(&pr);
        let sol = solve_sdp(&sdp).unwrap();
        for (g, e) in trace_leakage(&sdp, &sol.b).iter().zip(&sdp.budgets) {
            assert!(*g <= e + 1e-9);
        }
        for p in &sdp.utility {
            assert!(0.5 * (p * &sol.b).trace() >= sol.t - 1e-9);
        }
        let eig = jacobi_eigen(&sol.b).unwrap();
        assert!(*eig.values.last().unwrap() >= -1e-9 * eig.values[0]);

        // scaling every budget by c scales t by c
        let scaled = pr.with_budgets(pr.budgets().iter().map(|e| 3.0 * e).collect()).unwrap();
        let s3 = solve_sdp(&build_sdp(&scaled)).unwrap();
        assert_relative_eq!(s3.t / sol.t, 3.0, max_relative = 1e-6);
        // enlarging budgets never lowers t
        let looser = pr.with_budgets(vec![1e-3, 3e-3, 1.5e-3]).unwrap();
        assert!(solve_sdp(&build_sdp(&looser)).unwrap().t >= sol.t * (1.0 - 1e-9));
    }
}
