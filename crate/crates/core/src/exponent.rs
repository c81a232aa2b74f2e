//! Finite-sample Neyman-Pearson error probabilities.
//!
//! With `n` i.i.d. samples from `q_1` or `q_2`, the test keeps the error
//! under `q_2` at most `delta` and minimizes the error `beta_2` under `q_1`.
//! As `n` grows `-(1/n) log2 beta_2` tends to `D(q_2 || q_1)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial as BinomialSampler, Distribution as _};
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::measures::{Distribution, Mechanism};

/// Largest sample count accepted by [`exact_np_binary`].
pub const MAX_EXACT_N: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub n: u64,
    pub delta: f64,
    /// Missed-detection probability, possibly underflowed to zero.
    pub beta2: f64,
    /// `log2 beta2`, finite even when `beta2` underflows.
    pub log2_beta2: f64,
    /// `-(1/n) log2 beta2`, bits per sample.
    pub exponent: f64,
    /// 95% Wilson interval on `beta2` for simulated results.
    pub confidence: Option<(f64, f64)>,
}

impl TestResult {
    fn from_log2(n: u64, delta: f64, log2_beta2: f64, confidence: Option<(f64, f64)>) -> Self {
        let log2_beta2 = log2_beta2.min(0.0);
        Self {
            n,
            delta,
            beta2: log2_beta2.exp2(),
            log2_beta2,
            exponent: -log2_beta2 / n as f64,
            confidence,
        }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln sum exp(x_i)` by pairwise reduction.
fn log_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NEG_INFINITY,
        1 => xs[0],
        n if n <= 8 => {
            let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        }
        n => log_add(log_sum(&xs[..n / 2]), log_sum(&xs[n / 2..])),
    }
}

fn check_binary(q: &Distribution) -> Result<()> {
    if q.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: q.len(),
        });
    }
    if let Some((index, &value)) = q.probs().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NotInterior { index, value });
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Exact randomized Neyman-Pearson test on `n` samples over two symbols.
pub fn exact_np_binary(q1: &Distribution, q2: &Distribution, n: u64, delta: f64) -> Result<TestResult> {
    check_binary(q1)?;
    check_binary(q2)?;
    check_delta(delta)?;
    if n == 0 || n > MAX_EXACT_N {
        return Err(Error::InvalidInput(format!(
            "sample count must lie in 1..={MAX_EXACT_N}, got {n}"
        )));
    }
    // log-likelihood ratio is slope * K + const in the count K of symbol 1
    let slope = (q2.probs()[1] / q1.probs()[1]).ln() - (q2.probs()[0] / q1.probs()[0]).ln();
    if slope == 0.0 {
        return Ok(TestResult::from_log2(n, delta, (1.0 - delta).log2(), None));
    }
    // orient so that large counts favour q2
    let sym = if slope > 0.0 { 1 } else { 0 };
    let b1 = Binomial::new(q1.probs()[sym], n).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let b2 = Binomial::new(q2.probs()[sym], n).map_err(|e| Error::NumericalFailure(e.to_string()))?;
    let lp1: Vec<f64> = (0..=n).map(|k| b1.ln_pmf(k)).collect();
    let lp2: Vec<f64> = (0..=n).map(|k| b2.ln_pmf(k)).collect();
    let ln_delta = delta.ln();

    // largest c with P_2(K < c) <= delta
    let (mut lo, mut hi) = (0usize, n as usize + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if log_sum(&lp2[..mid]) <= ln_delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = lo;
    let below = log_sum(&lp2[..c]).exp();
    // decide q2 with probability gamma at K = c
    let keep = ((delta - below) / lp2[c].exp()).clamp(0.0, 1.0);
    let gamma = 1.0 - keep;
    let upper = log_sum(&lp1[c + 1..]);
    let ln_beta2 = if gamma > 0.0 {
        log_add(upper, gamma.ln() + lp1[c])
    } else {
        upper
    };
    Ok(TestResult::from_log2(n, delta, ln_beta2 / std::f64::consts::LN_2, None))
}

/// 95% Wilson score interval for a proportion `p_hat` out of `trials`.
pub fn wilson_interval(p_hat: f64, trials: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let t = trials as f64;
    let denom = 1.0 + z * z / t;
    let centre = (p_hat + z * z / (2.0 * t)) / denom;
    let half = z * ((p_hat * (1.0 - p_hat) + z * z / (4.0 * t)) / t).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Multinomial counts via sequential binomials.
fn sample_counts(q: &[f64], n: u64, rng: &mut ChaCha8Rng) -> Result<Vec<u64>> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(q.len());
    for (i, &p) in q.iter().enumerate() {
        if i + 1 == q.len() {
            out.push(left);
            break;
        }
        let prob = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let k = BinomialSampler::new(left, prob)
            .map_err(|e| Error::NumericalFailure(e.to_string()))?
            .sample(rng);
        out.push(k);
        left -= k;
        mass -= p;
    }
    Ok(out)
}

/// Neyman-Pearson test estimated by simulation over any output alphabet.
/// The threshold is the empirical `delta`-quantile of the log-likelihood
/// ratio under `q2`; `beta2` is then estimated under `q1`.
pub fn simulate_np(
    q1: &Distribution,
    q2: &Distribution,
    n: u64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<TestResult> {
    check_delta(delta)?;
    if q1.len() != q2.len() {
        return Err(Error::DimensionMismatch {
            expected: q1.len(),
            found: q2.len(),
        });
    }
    if n == 0 || trials == 0 {
        return Err(Error::InvalidInput("sample and trial counts must be positive".into()));
    }
    let weights: Vec<f64> = q1
        .probs()
        .iter()
        .zip(q2.probs())
        .map(|(&a, &b)| match (a > 0.0, b > 0.0) {
            (true, true) => (b / a).ln(),
            (true, false) => f64::NEG_INFINITY,
            (false, true) => f64::INFINITY,
            (false, false) => 0.0,
        })
        .collect();
    let llr = |counts: &[u64]| -> f64 {
        counts
            .iter()
            .zip(&weights)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, w)| c as f64 * w)
            .sum()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut under2 = Vec::with_capacity(trials);
    for _ in 0..trials {
        under2.push(llr(&sample_counts(q2.probs(), n, &mut rng)?));
    }
    under2.sort_by(f64::total_cmp);
    let cut = ((delta * trials as f64).floor() as usize).min(trials - 1);
    let threshold = under2[cut];
    let below = under2.iter().filter(|&&x| x < threshold).count() as f64;
    let at = under2.iter().filter(|&&x| x == threshold).count() as f64;
    let gamma = 1.0 - ((delta * trials as f64 - below) / at).clamp(0.0, 1.0);

    let mut hits = 0.0;
    for _ in 0..trials {
        let s = llr(&sample_counts(q1.probs(), n, &mut rng)?);
        if s > threshold {
            hits += 1.0;
        } else if s == threshold {
            hits += gamma;
        }
    }
    let p_hat = hits / trials as f64;
    let ci = wilson_interval(p_hat, trials);
    Ok(TestResult::from_log2(n, delta, p_hat.log2(), Some(ci)))
}

/// Exponent of the test between `p_1 W` and `p_2 W`: exact for two outputs,
/// simulated otherwise.
pub fn mechanism_exponent_check(
    p1: &Distribution,
    p2: &Distribution,
    w: &Mechanism,
    n: u64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<TestResult> {
    let q1 = p1.push_through(w)?;
    let q2 = p2.push_through(w)?;
    if w.outputs() == 2 && q1.is_interior() && q2.is_interior() {
        exact_np_binary(&q1, &q2, n, delta)
    } else {
        simulate_np(&q1, &q2, n, delta, trials, seed)
    }
}
