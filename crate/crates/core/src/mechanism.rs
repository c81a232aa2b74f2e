//! Perturbation model around a perfect-privacy mechanism.
//!
//! A mechanism close to the rank-1 matrix `W0` (every row `w0`) is written as
//! `W = W0 + A [sqrt(w0)]`, where each row of `A` is orthogonal to `sqrt(w0)`.
//! In that neighbourhood relative entropy and mutual information are quadratic
//! forms in `A`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::{
    entropy, mutual_information, nats_to_bits, Distribution, Mechanism, NORMALIZATION_TOL,
};

/// Entries of an assembled mechanism above `-ASSEMBLE_TOL` are accepted
/// (slightly negative ones are set to zero).
pub const ASSEMBLE_TOL: f64 = 1e-12;

/// Largest tolerated `|A sqrt(w0)|` per row.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Strictly positive output distribution shared by every row of `W0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOutput {
    w0: Vec<f64>,
    sqrt_w0: Vec<f64>,
}

impl ReferenceOutput {
    pub fn new(w0: Vec<f64>) -> Result<Self> {
        let d = Distribution::new(w0)?;
        if let Some((index, &value)) = d.probs().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::NotInterior { index, value });
        }
        let w0 = d.probs().to_vec();
        let sqrt_w0 = w0.iter().map(|x| x.sqrt()).collect();
        Ok(Self { w0, sqrt_w0 })
    }

    /// Uniform reference over `n` outputs.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(Distribution::uniform(n)?.probs().to_vec())
    }

    pub fn len(&self) -> usize {
        self.w0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.w0
    }

    pub fn sqrt(&self) -> &[f64] {
        &self.sqrt_w0
    }

    /// Orthonormal basis of the complement of `sqrt(w0)`, obtained by
    /// Gram-Schmidt over the standard basis. Each vector has its first
    /// nonzero entry positive.
    pub fn orthonormal_complement(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut basis: Vec<Vec<f64>> = vec![self.sqrt_w0.clone()];
        let mut out = Vec::with_capacity(n.saturating_sub(1));
        for e in 0..n {
            if out.len() + 1 == n {
                break;
            }
            let mut c = vec![0.0; n];
            c[e] = 1.0;
            // two passes keep the basis orthogonal to working precision
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = c.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (ci, bi) in c.iter_mut().zip(b) {
                        *ci -= dot * bi;
                    }
                }
            }
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            c.iter_mut().for_each(|x| *x /= norm);
            canonical_sign(&mut c);
            basis.push(c.clone());
            out.push(c);
        }
        out
    }
}

/// Flip `v` so that its first entry with magnitude above `1e-15` is positive.
pub fn canonical_sign(v: &mut [f64]) {
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-15) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Normalized perturbation `A` (M x N) with its neighbourhood radius
/// `rho = max |A_ij| / sqrt(w0_j)`, so that `|Theta_ij| <= rho w0_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    a: DMatrix<f64>,
    rho: f64,
}

impl Perturbation {
    pub fn new(a: DMatrix<f64>, w0: &ReferenceOutput) -> Result<Self> {
        if a.ncols() != w0.len() {
            return Err(Error::DimensionMismatch {
                expected: w0.len(),
                found: a.ncols(),
            });
        }
        if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let s = w0.sqrt();
        let scale = a.amax().max(1.0);
        let mut residual: f64 = 0.0;
        for row in a.row_iter() {
            let r: f64 = row.iter().zip(s).map(|(x, y)| x * y).sum();
            residual = residual.max(r.abs());
        }
        if residual > ORTHOGONALITY_TOL * scale {
            return Err(Error::NotOrthogonal { residual });
        }
        let mut rho: f64 = 0.0;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                rho = rho.max(a[(i, j)].abs() / s[j]);
            }
        }
        Ok(Self { a, rho })
    }

    /// Zero perturbation of shape `m x w0.len()`.
    pub fn zero(m: usize, w0: &ReferenceOutput) -> Self {
        Self {
            a: DMatrix::zeros(m, w0.len()),
            rho: 0.0,
        }
    }

    /// Rank-1 perturbation `a^T v`.
    pub fn rank_one(a: &[f64], v: &[f64], w0: &ReferenceOutput) -> Result<Self> {
        Self::new(DMatrix::from_fn(a.len(), v.len(), |i, j| a[i] * v[j]), w0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `Theta = A [sqrt(w0)]`.
    pub fn theta(&self, w0: &ReferenceOutput) -> DMatrix<f64> {
        let s = w0.sqrt();
        DMatrix::from_fn(self.a.nrows(), self.a.ncols(), |i, j| self.a[(i, j)] * s[j])
    }
}

/// Instance of the approximate privacy-utility problem: hypotheses
/// `p_1, ..., p_m` (the first is the reference hypothesis), leakage budgets
/// in bits, and the reference output `w0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EitProblem {
    hypotheses: Vec<Distribution>,
    budgets: Vec<f64>,
    reference: ReferenceOutput,
}

impl EitProblem {
    pub fn new(
        hypotheses: Vec<Distribution>,
        budgets: Vec<f64>,
        reference: ReferenceOutput,
    ) -> Result<Self> {
        if hypotheses.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two hypotheses, got {}",
                hypotheses.len()
            )));
        }
        if budgets.len() != hypotheses.len() {
            return Err(Error::DimensionMismatch {
                expected: hypotheses.len(),
                found: budgets.len(),
            });
        }
        let dim = hypotheses[0].len();
        for p in &hypotheses {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if let Some((index, &value)) = p.probs().iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(Error::NotInterior { index, value });
            }
        }
        for (k, (&b, p)) in budgets.iter().zip(&hypotheses).enumerate() {
            if !b.is_finite() {
                return Err(Error::NonFinite { index: k, value: b });
            }
            if b < 0.0 {
                return Err(Error::NegativeBudget {
                    hypothesis: k,
                    budget: b,
                });
            }
            let h = entropy(p);
            if b > h + NORMALIZATION_TOL {
                return Err(Error::BudgetExceedsEntropy {
                    hypothesis: k,
                    budget: b,
                    entropy: h,
                });
            }
        }
        Ok(Self {
            hypotheses,
            budgets,
            reference,
        })
    }

    /// Same budget `eps` for every hypothesis, uniform binary reference.
    pub fn with_equal_budgets(hypotheses: Vec<Distribution>, eps: f64) -> Result<Self> {
        let m = hypotheses.len();
        Self::new(hypotheses, vec![eps; m], ReferenceOutput::uniform(2)?)
    }

    pub fn hypotheses(&self) -> &[Distribution] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, k: usize) -> &Distribution {
        &self.hypotheses[k]
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn reference(&self) -> &ReferenceOutput {
        &self.reference
    }

    /// Number of hypotheses `m`.
    pub fn m(&self) -> usize {
        self.hypotheses.len()
    }

    /// Source alphabet size `M`.
    pub fn dim(&self) -> usize {
        self.hypotheses[0].len()
    }

    pub fn min_entropy(&self) -> f64 {
        self.hypotheses
            .iter()
            .map(entropy)
            .fold(f64::INFINITY, f64::min)
    }

    /// Copy of the problem with new budgets.
    pub fn with_budgets(&self, budgets: Vec<f64>) -> Result<Self> {
        Self::new(self.hypotheses.clone(), budgets, self.reference.clone())
    }

    /// Copy of the problem with a different reference output.
    pub fn with_reference(&self, reference: ReferenceOutput) -> Self {
        Self {
            hypotheses: self.hypotheses.clone(),
            budgets: self.budgets.clone(),
            reference,
        }
    }
}

/// Rank-1 mechanism with every row equal to `w0`.
pub fn perfect_mechanism(w0: &ReferenceOutput, m: usize) -> Mechanism {
    let p = w0.probs();
    Mechanism::from_matrix_unchecked(DMatrix::from_fn(m, p.len(), |_, j| p[j]))
}

/// `W = W0 + A [sqrt(w0)]`.
pub fn assemble(w0: &ReferenceOutput, a: &Perturbation) -> Result<Mechanism> {
    let n = w0.len();
    if a.matrix().ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.matrix().ncols(),
        });
    }
    let theta = a.theta(w0);
    let p = w0.probs();
    let mut w = DMatrix::from_fn(theta.nrows(), n, |i, j| p[j] + theta[(i, j)]);
    for i in 0..w.nrows() {
        for j in 0..n {
            let value = w[(i, j)];
            if value < -ASSEMBLE_TOL {
                return Err(Error::NegativeEntry { row: i, col: j, value });
            }
            if value < 0.0 {
                w[(i, j)] = 0.0;
            }
        }
        let sum = w.row(i).sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::RowNotNormalized { row: i, sum });
        }
    }
    Ok(Mechanism::from_matrix_unchecked(w))
}

/// `A = (W - W0) [w0^(-1/2)]`.
pub fn decompose(w0: &ReferenceOutput, w: &Mechanism) -> Result<Perturbation> {
    if w.outputs() != w0.len() {
        return Err(Error::DimensionMismatch {
            expected: w0.len(),
            found: w.outputs(),
        });
    }
    let (p, s) = (w0.probs(), w0.sqrt());
    let a = DMatrix::from_fn(w.inputs(), w.outputs(), |i, j| (w.get(i, j) - p[j]) / s[j]);
    Perturbation::new(a, w0)
}

fn check_rows(p: &Distribution, a: &Perturbation) -> Result<()> {
    if a.matrix().nrows() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: a.matrix().nrows(),
            found: p.len(),
        });
    }
    Ok(())
}

/// `1/2 ||(p_k - p_1) A||^2`, in bits.
pub fn approx_relative_entropy(pk: &Distribution, p1: &Distribution, a: &Perturbation) -> Result<f64> {
    check_rows(pk, a)?;
    check_rows(p1, a)?;
    let m = a.matrix();
    let mut total = 0.0;
    for j in 0..m.ncols() {
        let c: f64 = (0..m.nrows())
            .map(|i| (pk.probs()[i] - p1.probs()[i]) * m[(i, j)])
            .sum();
        total += c * c;
    }
    Ok(nats_to_bits(0.5 * total))
}

/// `1/2 sum_i p_ki ||A_i||^2`, in bits.
pub fn approx_mutual_information(pk: &Distribution, a: &Perturbation) -> Result<f64> {
    check_rows(pk, a)?;
    let m = a.matrix();
    let total: f64 = m
        .row_iter()
        .zip(pk.probs())
        .map(|(row, &p)| p * row.norm_squared())
        .sum();
    Ok(nats_to_bits(0.5 * total))
}

/// Largest exact leakage `max_k I(p_k, W)` over the hypotheses.
pub fn effective_leakage(problem: &EitProblem, w: &Mechanism) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in problem.hypotheses() {
        worst = worst.max(mutual_information(p, w)?);
    }
    Ok(worst)
}
