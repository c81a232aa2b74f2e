//! Mechanism from an SDP optimum: `A* = U_l diag(sqrt(lambda)) V_l^T`,
//! where `V` is orthonormal with last column `sqrt(w0)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::Mechanism;
use crate::mechanism::{assemble, Perturbation, ReferenceOutput};

use super::sdp::SdpSolution;

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// `M x (l + 1)` perturbation.
    pub a_star: DMatrix<f64>,
    /// `(l + 1) x (l + 1)` orthonormal basis, last column `sqrt(w0)`.
    pub v: DMatrix<f64>,
    pub rank: usize,
    pub mechanism: Mechanism,
}

/// Output alphabet size used by [`reconstruct`]: `max(l, 1) + 1`.
pub fn output_size(solution: &SdpSolution) -> usize {
    solution.rank.max(1) + 1
}

/// Rebuild the mechanism over `N = max(l, 1) + 1` outputs; `w0` must have
/// exactly that many entries.
pub fn reconstruct(solution: &SdpSolution, w0: &ReferenceOutput) -> Result<Reconstruction> {
    let l = solution.rank.max(1);
    let n = l + 1;
    if w0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w0.len(),
        });
    }
    let m = solution.b.nrows();
    let mut v = DMatrix::zeros(n, n);
    for (c, col) in w0.orthonormal_complement().into_iter().enumerate() {
        for (r, x) in col.into_iter().enumerate() {
            v[(r, c)] = x;
        }
    }
    for (r, &s) in w0.sqrt().iter().enumerate() {
        v[(r, n - 1)] = s;
    }
    let mut a = DMatrix::zeros(m, n);
    for k in 0..solution.rank {
        let scale = solution.eigvals[k].sqrt();
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] += solution.u[(i, k)] * scale * v[(j, k)];
            }
        }
    }
    let mechanism = assemble(w0, &Perturbation::new(a.clone(), w0)?)?;
    Ok(Reconstruction {
        a_star: a,
        v,
        rank: solution.rank,
        mechanism,
    })
}

/// [`reconstruct`] with a uniform reference output.
pub fn reconstruct_uniform(solution: &SdpSolution) -> Result<Reconstruction> {
    reconstruct(solution, &ReferenceOutput::uniform(output_size(solution))?)
}
