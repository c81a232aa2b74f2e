//! Information measures on finite alphabets.
//!
//! Everything here reports bits. Terms are evaluated in forms that stay
//! accurate when the two arguments are close, since the high-privacy regime
//! lives entirely in that corner: relative entropy sums the nonnegative terms
//! `p ln(p/q) - p + q`, and the Rényi/Hellinger family goes through
//! `expm1`/`ln_1p`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `log2(e)`, the nats-to-bits factor.
pub const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// Tolerance on `sum(p) = 1` for distributions and mechanism rows.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[inline]
pub fn nats_to_bits(x: f64) -> f64 {
    x * LOG2_E
}

#[inline]
pub fn bits_to_nats(x: f64) -> f64 {
    x * std::f64::consts::LN_2
}

/// A probability vector over `M` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    /// Uniform distribution over `len` symbols.
    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty);
        }
        Ok(Self {
            probs: vec![1.0 / len as f64; len],
        })
    }

    /// Bernoulli-style distribution `(1 - q, q)`.
    pub fn binary(q: f64) -> Result<Self> {
        Self::new(vec![1.0 - q, q])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// All entries strictly positive.
    pub fn is_interior(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.probs)
    }

    /// Output distribution `p W` induced by a mechanism.
    pub fn push_through(&self, w: &Mechanism) -> Result<Distribution> {
        if w.inputs() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: w.inputs(),
                found: self.len(),
            });
        }
        let out = w.matrix().tr_mul(&self.as_vector());
        Ok(Distribution {
            probs: out.iter().map(|&x| x.max(0.0)).collect(),
        })
    }

    #[cfg(test)]
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }
}

/// Row-stochastic `M x N` matrix of conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    rows: DMatrix<f64>,
}

impl Mechanism {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::Empty);
        }
        for (row, r) in rows.row_iter().enumerate() {
            for &value in r.iter() {
                if !value.is_finite() {
                    return Err(Error::NonFinite { index: row, value });
                }
                if value < 0.0 {
                    return Err(Error::NegativeProbability { index: row, value });
                }
            }
            let sum = r.sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::RowNotNormalized { row, sum });
            }
        }
        Ok(Self { rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Empty);
        }
        let n = rows[0].len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
    }

    pub(crate) fn from_matrix_unchecked(rows: DMatrix<f64>) -> Self {
        Self { rows }
    }

    /// Identity channel on `m` symbols.
    pub fn identity(m: usize) -> Self {
        Self {
            rows: DMatrix::identity(m, m),
        }
    }

    pub fn inputs(&self) -> usize {
        self.rows.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.inputs()).map(|i| self.row(i)).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[(i, j)]
    }
}

/// Order `alpha` in (0, 1) of a Rényi or Hellinger divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenyiOrder {
    alpha: f64,
}

impl RenyiOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidOrder(alpha));
        }
        Ok(Self { alpha })
    }

    /// From the Lagrange weight `beta = alpha / (1 - alpha)`.
    pub fn from_beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidOrder(beta / (1.0 + beta)));
        }
        Self::new(beta / (1.0 + beta))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }
}

fn ensure_same_len(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    Ok(())
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub fn entropy(p: &Distribution) -> f64 {
    -p.probs
        .iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.log2())
        .sum::<f64>()
}

/// Below this `|r|` the per-term kernels switch to their Taylor series.
const SERIES_CUTOFF: f64 = 1e-3;

/// `(1 + r) ln(1 + r) - r >= 0`, with `t = 1 + r = p / q`.
fn kl_kernel(p: f64, q: f64) -> f64 {
    let r = (p - q) / q;
    if r.abs() < SERIES_CUTOFF {
        // sum_{k>=2} (-1)^k r^k / (k (k - 1))
        let mut term = r * r;
        let mut total = 0.0;
        for k in 2..10 {
            total += term / (k * (k - 1)) as f64;
            term *= -r;
        }
        total
    } else if r.abs() < 0.5 {
        (1.0 + r) * r.ln_1p() - r
    } else {
        let t = p / q;
        t * t.ln() - r
    }
}

/// `(1 + r)^alpha - 1 - alpha r <= 0` for `alpha` in (0, 1).
fn alpha_kernel(p: f64, q: f64, alpha: f64) -> f64 {
    let r = (p - q) / q;
    if r.abs() < SERIES_CUTOFF {
        // sum_{k>=2} binom(alpha, k) r^k
        let mut coef = alpha;
        let mut power = r;
        let mut total = 0.0;
        for k in 2..10 {
            coef *= (alpha - (k - 1) as f64) / k as f64;
            power *= r;
            total += coef * power;
        }
        total
    } else if r.abs() < 0.5 {
        (alpha * r.ln_1p()).exp_m1() - alpha * r
    } else {
        (p / q).powf(alpha) - 1.0 - alpha * r
    }
}

/// `D(p || q)` in nats as `sum_i q_i [(1 + r_i) ln(1 + r_i) - r_i]`,
/// `r_i = p_i / q_i - 1`. Every term is nonnegative; the form equals
/// `sum p ln(p / q)` for normalized inputs.
pub(crate) fn kl_nats(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            total += qi;
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuityViolated { index, p: pi });
        }
        total += qi * kl_kernel(pi, qi);
    }
    Ok(total)
}

/// Relative entropy `D(p || q)` in bits.
pub fn relative_entropy(p: &Distribution, q: &Distribution) -> Result<f64> {
    ensure_same_len(p, q)?;
    Ok(nats_to_bits(kl_nats(&p.probs, &q.probs)?))
}

/// Mutual information `I(p, W)` in bits.
pub fn mutual_information(p: &Distribution, w: &Mechanism) -> Result<f64> {
    let out = p.push_through(w)?;
    let mut total = 0.0;
    for (i, &pi) in p.probs.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let row = w.row(i);
        total += pi * kl_nats(&row, &out.probs)?;
    }
    Ok(nats_to_bits(total))
}

/// `sum_i p_i^alpha q_i^(1 - alpha) - 1` as a sum of nonpositive terms
/// `q_i [(1 + r_i)^alpha - 1 - alpha r_i]`, exact for normalized inputs.
fn alpha_moment_minus_one(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    let mut s = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(Error::AbsoluteContinuityViolated { index, p: pi });
            }
            continue;
        }
        if pi == 0.0 {
            s -= (1.0 - alpha) * qi;
            continue;
        }
        s += qi * alpha_kernel(pi, qi, alpha);
    }
    Ok(s)
}

/// Order-`alpha` Rényi divergence `D_alpha(p || q)` in bits.
pub fn renyi_divergence(p: &Distribution, q: &Distribution, order: RenyiOrder) -> Result<f64> {
    ensure_same_len(p, q)?;
    renyi_bits(&p.probs, &q.probs, order.alpha())
}

/// Rényi divergence in bits over raw slices. Caller guarantees equal length.
pub(crate) fn renyi_bits(p: &[f64], q: &[f64], alpha: f64) -> Result<f64> {
    let s = alpha_moment_minus_one(p, q, alpha)?;
    Ok(nats_to_bits(s.ln_1p() / (alpha - 1.0)))
}

/// Order-`alpha` Hellinger divergence, the f-divergence with
/// `f(t) = (t^alpha - 1) / (alpha - 1)`.
pub fn hellinger_divergence(
    p: &Distribution,
    q: &Distribution,
    order: RenyiOrder,
) -> Result<f64> {
    ensure_same_len(p, q)?;
    let a = order.alpha();
    Ok(alpha_moment_minus_one(&p.probs, &q.probs, a)? / (a - 1.0))
}

/// Half-scaled chi-squared divergence `1/2 sum (p_i - q_i)^2 / q_i`.
///
/// `0^2 / 0` counts as zero; a positive `p_i` over a zero `q_i` is an error.
pub fn chi_squared_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    ensure_same_len(p, q)?;
    let mut total = 0.0;
    for (index, (&pi, &qi)) in p.probs.iter().zip(&q.probs).enumerate() {
        if qi == 0.0 {
            if pi > 0.0 {
                return Err(Error::AbsoluteContinuityViolated { index, p: pi });
            }
            continue;
        }
        total += (pi - qi).powi(2) / qi;
    }
    Ok(0.5 * total)
}

/// Width of the guard band around `t = 1` in [`kappa`].
pub const KAPPA_GUARD: f64 = 1e-6;

/// Bound function relating relative entropy (bits) to the order-`alpha`
/// Hellinger divergence:
///
/// ```text
/// kappa_a(t) = (1 - a) [t log t + (1 - t) log e] / (1 - a + a t - t^a)
/// kappa_a(1) = log(e) / a,   kappa_a(0) = log e
/// ```
pub fn kappa(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidOrder(alpha));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("kappa argument must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(LOG2_E);
    }
    let u = t - 1.0;
    if u.abs() < KAPPA_GUARD {
        return Ok(LOG2_E / alpha);
    }
    let l = if u.abs() < 0.5 { u.ln_1p() } else { t.ln() };
    // t ln t + 1 - t and 1 - a + a t - t^a, both O(u^2) near t = 1
    let num = (1.0 + u) * l - u;
    let den = alpha * u - (alpha * l).exp_m1();
    Ok((1.0 - alpha) * nats_to_bits(num) / den)
}

/// Likelihood-ratio extremes `(beta1, beta2)` for the kappa sandwich:
/// `beta1 = 1 / max_i p_i / q_i`, `beta2 = 1 / max_i q_i / p_i`.
pub fn kappa_betas(p: &Distribution, q: &Distribution) -> Result<(f64, f64)> {
    ensure_same_len(p, q)?;
    if let Some((index, &value)) = p.probs.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NotInterior { index, value });
    }
    if let Some((index, &value)) = q.probs.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NotInterior { index, value });
    }
    let max_pq = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| a / b)
        .fold(f64::MIN, f64::max);
    let max_qp = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| b / a)
        .fold(f64::MIN, f64::max);
    Ok((1.0 / max_pq, 1.0 / max_qp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    // Reference values below were evaluated with 50-digit arithmetic
    // (mpmath, direct summation of the defining series).
    const H_095: f64 = 0.286_396_957_115_956_13;
    const D_HALF_QUARTER: f64 = 0.207_518_749_639_421_9;
    const MI_BSC_01: f64 = 0.531_004_406_410_718_8;
    const RENYI_HALF: f64 = 0.003_620_338_505_283_833;
    const HELLINGER_HALF: f64 = 0.002_507_853_779_334_653_4;
    const KAPPA_HALF_2: f64 = 3.248_211_340_438_332;

    /// Direct summation with a different evaluation path from the library.
    fn naive_kl_bits(p: &[f64], q: &[f64]) -> f64 {
        p.iter()
            .zip(q)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, b)| a * (a / b).ln() / std::f64::consts::LN_2)
            .sum()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&d(&[0.5, 0.5])), 1.0);
        assert_eq!(entropy(&d(&[1.0, 0.0])), 0.0);
        assert_relative_eq!(entropy(&d(&[0.95, 0.05])), H_095, max_relative = 1e-13);
    }

    #[test]
    fn relative_entropy_examples() {
        let p = d(&[0.3, 0.7]);
        assert_eq!(relative_entropy(&p, &p).unwrap(), 0.0);
        let v = relative_entropy(&d(&[0.5, 0.5]), &d(&[0.25, 0.75])).unwrap();
        assert_relative_eq!(v, D_HALF_QUARTER, max_relative = 1e-13);
        assert_relative_eq!(v, naive_kl_bits(&[0.5, 0.5], &[0.25, 0.75]), max_relative = 1e-13);
        let err = relative_entropy(&d(&[0.5, 0.5]), &d(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::AbsoluteContinuityViolated { index: 0, .. }));
    }

    #[test]
    fn mutual_information_examples() {
        let p = d(&[0.5, 0.5]);
        let same = Mechanism::from_rows(&[vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert!(mutual_information(&p, &same).unwrap().abs() < 1e-15);
        assert_relative_eq!(
            mutual_information(&p, &Mechanism::identity(2)).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        let bsc = Mechanism::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        assert_relative_eq!(mutual_information(&p, &bsc).unwrap(), MI_BSC_01, max_relative = 1e-13);
        let bad = Mechanism::identity(3);
        assert!(matches!(
            mutual_information(&p, &bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn renyi_and_hellinger_examples() {
        let half = RenyiOrder::new(0.5).unwrap();
        let p = d(&[0.3, 0.7]);
        let q = d(&[0.6, 0.4]);
        assert_eq!(renyi_divergence(&p, &p, half).unwrap(), 0.0);
        assert_relative_eq!(
            renyi_divergence(&p, &q, half).unwrap(),
            renyi_divergence(&q, &p, half).unwrap(),
            max_relative = 1e-13
        );
        let p = d(&[0.45, 0.55]);
        let q = d(&[0.5, 0.5]);
        assert_relative_eq!(renyi_divergence(&p, &q, half).unwrap(), RENYI_HALF, max_relative = 1e-12);
        assert_relative_eq!(
            hellinger_divergence(&p, &q, half).unwrap(),
            HELLINGER_HALF,
            max_relative = 1e-12
        );
        assert_eq!(hellinger_divergence(&q, &q, half).unwrap(), 0.0);
    }

    #[test]
    fn renyi_order_bounds() {
        assert!(RenyiOrder::new(0.0).is_err());
        assert!(RenyiOrder::new(1.0).is_err());
        assert!(RenyiOrder::new(f64::NAN).is_err());
        let o = RenyiOrder::from_beta(3.0).unwrap();
        assert_relative_eq!(o.alpha(), 0.75);
        assert_relative_eq!(o.beta(), 3.0, max_relative = 1e-15);
    }

    #[test]
    fn kappa_examples() {
        assert_relative_eq!(kappa(0.5, 1.0).unwrap(), 2.0 * LOG2_E);
        assert_relative_eq!(kappa(0.5, 0.0).unwrap(), LOG2_E);
        assert_relative_eq!(kappa(0.5, 2.0).unwrap(), KAPPA_HALF_2, max_relative = 1e-13);
        assert!(kappa(1.5, 0.5).is_err());
        assert!(kappa(0.5, -1.0).is_err());
    }

    #[test]
    fn kappa_is_continuous_at_guard_edges() {
        for &a in &[0.1, 0.5, 0.9] {
            let at_one = kappa(a, 1.0).unwrap();
            for &t in &[1.0 - 2e-6, 1.0 + 2e-6, 1.0 - 1e-4, 1.0 + 1e-4] {
                assert_relative_eq!(kappa(a, t).unwrap(), at_one, max_relative = 1e-3);
            }
            assert_relative_eq!(kappa(a, 1e-200).unwrap(), LOG2_E, max_relative = 1e-9);
            assert!((kappa(a, 1e-8).unwrap() - LOG2_E).abs() < (kappa(a, 1e-4).unwrap() - LOG2_E).abs());
        }
    }

    #[test]
    fn chi_squared_examples() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        assert_eq!(chi_squared_divergence(&q, &q).unwrap(), 0.0);
        let expected = 0.5 * (0.0625 / 0.25 + 0.0625 / 0.75);
        assert_relative_eq!(chi_squared_divergence(&p, &q).unwrap(), expected, max_relative = 1e-15);
        assert!(chi_squared_divergence(&p, &d(&[1.0, 0.0])).is_err());
        assert_eq!(chi_squared_divergence(&d(&[1.0, 0.0]), &d(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn kl_minus_chi_squared_shrinks_cubically() {
        // p_s = q + s * r, |D ln 2 - chi2| = O(s^3)
        let q = [0.2, 0.5, 0.3];
        let r = [0.1, -0.15, 0.05];
        let gap = |s: f64| {
            let p: Vec<f64> = q.iter().zip(&r).map(|(a, b)| a + s * b).collect();
            let (p, qd) = (Distribution::new(p).unwrap(), d(&q));
            let kl = relative_entropy(&p, &qd).unwrap() * std::f64::consts::LN_2;
            (kl - chi_squared_divergence(&p, &qd).unwrap()).abs()
        };
        let mut prev = gap(0.1);
        for k in 2..5 {
            let g = gap(10f64.powi(-k));
            let ratio = prev / g;
            assert!(ratio > 900.0 && ratio < 1100.0, "ratio {ratio} at 1e-{k}");
            prev = g;
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(matches!(Distribution::new(vec![]), Err(Error::Empty)));
        assert!(matches!(
            Distribution::new(vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Distribution::new(vec![1.5, -0.5]),
            Err(Error::NegativeProbability { .. })
        ));
        assert!(!d(&[1.0, 0.0]).is_interior());
        assert!(d(&[0.4, 0.6]).is_interior());
        assert!(Mechanism::from_rows(&[vec![0.5, 0.6]]).is_err());
        assert!(Mechanism::from_rows(&[vec![0.5, 0.5], vec![1.0]]).is_err());
    }

    #[test]
    fn nearly_identical_distributions_keep_relative_precision() {
        for delta in [1e-4, 1e-6, 1e-7] {
            let x: f64 = 2.0 * delta;
            let p = d(&[0.5 + delta, 0.5 - delta]);
            let q = d(&[0.5, 0.5]);
            // (x^2 + x^4 / 6) / 2 nats
            let expected = nats_to_bits((x * x + x.powi(4) / 6.0) / 2.0);
            assert_relative_eq!(relative_entropy(&p, &q).unwrap(), expected, max_relative = 1e-9);
            // D_alpha ~ alpha D near q
            let r = renyi_divergence(&p, &q, RenyiOrder::new(0.5).unwrap()).unwrap();
            assert_relative_eq!(r / expected, 0.5, max_relative = 1e-6);
        }
    }

    #[test]
    fn kernels_are_continuous_at_the_series_cutoff() {
        for side in [-1.0, 1.0] {
            let below = 1.0 + side * SERIES_CUTOFF * (1.0 - 1e-9);
            let above = 1.0 + side * SERIES_CUTOFF * (1.0 + 1e-9);
            assert_relative_eq!(kl_kernel(below, 1.0), kl_kernel(above, 1.0), max_relative = 1e-7);
            assert_relative_eq!(alpha_kernel(below, 1.0, 0.3), alpha_kernel(above, 1.0, 0.3), max_relative = 1e-7);
        }
    }

    #[test]
    fn kl_with_vanishing_mass_stays_finite() {
        let x = 2f64.powi(-60);
        let w = Mechanism::from_rows(&[vec![1.0 - x, x], vec![0.0, 1.0]]).unwrap();
        let mi = mutual_information(&d(&[0.55, 0.45]), &w).unwrap();
        assert_relative_eq!(mi, d(&[0.55, 0.45]).entropy(), max_relative = 1e-12);
    }

    fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.05f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..7).prop_flat_map(|m| (simplex(m), simplex(m)))
    }

    fn renorm(v: Vec<f64>) -> Distribution {
        // exact normalization up to an ulp
        let s: f64 = v.iter().sum();
        Distribution::from_raw(v.into_iter().map(|x| x / s).collect())
    }

    proptest! {
        #[test]
        fn divergences_nonnegative((p, q) in pair(), alpha in 0.05f64..0.95) {
            let (p, q) = (renorm(p), renorm(q));
            let order = RenyiOrder::new(alpha).unwrap();
            prop_assert!(relative_entropy(&p, &q).unwrap() >= -1e-10);
            prop_assert!(renyi_divergence(&p, &q, order).unwrap() >= -1e-10);
            prop_assert!(hellinger_divergence(&p, &q, order).unwrap() >= -1e-10);
            prop_assert!(chi_squared_divergence(&p, &q).unwrap() >= -1e-10);
            prop_assert!(relative_entropy(&p, &p).unwrap().abs() <= 1e-10);
            prop_assert!(renyi_divergence(&q, &q, order).unwrap().abs() <= 1e-10);
            prop_assert!(hellinger_divergence(&q, &q, order).unwrap().abs() <= 1e-10);
        }

        #[test]
        fn kl_matches_direct_summation((p, q) in pair()) {
            let (p, q) = (renorm(p), renorm(q));
            let lib = relative_entropy(&p, &q).unwrap();
            let naive = naive_kl_bits(p.probs(), q.probs());
            prop_assert!((lib - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
        }

        #[test]
        fn renyi_hellinger_identity((p, q) in pair(), alpha in 0.05f64..0.95) {
            let (p, q) = (renorm(p), renorm(q));
            let order = RenyiOrder::new(alpha).unwrap();
            let h = hellinger_divergence(&p, &q, order).unwrap();
            let lhs = renyi_divergence(&p, &q, order).unwrap();
            let rhs = (1.0 + (alpha - 1.0) * h).log2() / (alpha - 1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn kappa_sandwich((p, q) in pair(), alpha in 0.05f64..0.95) {
            let (p, q) = (renorm(p), renorm(q));
            prop_assume!(p.probs().iter().zip(q.probs()).any(|(a, b)| (a - b).abs() > 1e-6));
            let order = RenyiOrder::new(alpha).unwrap();
            let (b1, b2) = kappa_betas(&p, &q).unwrap();
            let ratio = relative_entropy(&p, &q).unwrap()
                / hellinger_divergence(&p, &q, order).unwrap();
            let lo = kappa(alpha, b2).unwrap();
            let hi = kappa(alpha, 1.0 / b1).unwrap();
            prop_assert!(lo <= ratio * (1.0 + 1e-9), "{lo} <= {ratio}");
            prop_assert!(ratio <= hi * (1.0 + 1e-9), "{ratio} <= {hi}");
        }

        #[test]
        fn mi_bounded_by_entropies(p in simplex(4), rows in prop::collection::vec(simplex(3), 4)) {
            let p = renorm(p);
            let w = Mechanism::from_rows(&rows.into_iter().map(|r| renorm(r).probs().to_vec()).collect::<Vec<_>>()).unwrap();
            let i = mutual_information(&p, &w).unwrap();
            prop_assert!(i >= -1e-12);
            prop_assert!(i <= entropy(&p) + 1e-12);
            prop_assert!(i <= 3f64.log2() + 1e-12);
        }

        #[test]
        fn identical_rows_leak_nothing(p in simplex(5), row in simplex(4)) {
            let p = renorm(p);
            let row = renorm(row).probs().to_vec();
            let w = Mechanism::from_rows(&vec![row; 5]).unwrap();
            prop_assert!(mutual_information(&p, &w).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn renyi_kl_ratio_tends_to_log_e_over_alpha() {
        let q = d(&[0.2, 0.5, 0.3]);
        let r = [0.6, 0.1, 0.3];
        for &alpha in &[0.25, 0.5, 0.75] {
            let order = RenyiOrder::new(alpha).unwrap();
            let dev = |t: f64| {
                let p = renorm(q.probs().iter().zip(&r).map(|(a, b)| (1.0 - t) * a + t * b).collect());
                let kl = relative_entropy(&p, &q).unwrap();
                let ra = renyi_divergence(&p, &q, order).unwrap();
                let ratio = (1.0 - alpha) * kl / ((1.0 - alpha) * ra * std::f64::consts::LN_2).exp_m1();
                (ratio - LOG2_E / alpha).abs()
            };
            let mut t = 1e-2;
            while t > 1e-5 {
                assert!(dev(t / 2.0) < dev(t), "alpha {alpha} t {t}");
                t /= 2.0;
            }
        }
    }
}
