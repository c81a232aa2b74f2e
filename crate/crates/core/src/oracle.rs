//! Brute-force reference solvers used to check the closed forms.

use rayon::prelude::*;

use crate::binary::{dot, quadratic_leakage, solve_binary};
use crate::error::{Error, Result};
use crate::mary::solve_binary_source_mary;
use crate::measures::{bits_to_nats, kl_nats, nats_to_bits, renyi_bits, Mechanism, RenyiOrder};
use crate::mechanism::{effective_leakage, EitProblem};

/// Largest source alphabet accepted by [`grid_qcqp`].
pub const QCQP_MAX_DIM: usize = 4;

/// Candidates carried from the coarse grid into refinement.
const MULTI_START: usize = 8;
/// Refinement window, in steps of the previous round.
const WINDOW: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Step of the initial grid, in (0, 1).
    pub resolution: f64,
    /// Each round shrinks the step by 10 around the incumbent.
    pub refine_rounds: usize,
}

impl GridSpec {
    pub fn new(resolution: f64, refine_rounds: usize) -> Result<Self> {
        if !(resolution > 0.0 && resolution < 1.0) {
            return Err(Error::InvalidInput(format!(
                "grid resolution must lie in (0, 1), got {resolution}"
            )));
        }
        Ok(Self {
            resolution,
            refine_rounds,
        })
    }

    /// Step after the last refinement round.
    pub fn final_step(&self) -> f64 {
        self.resolution * 10f64.powi(-(self.refine_rounds as i32))
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 1e-3,
            refine_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityKind {
    RelativeEntropy,
    Renyi(RenyiOrder),
}

impl std::fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UtilityKind::RelativeEntropy => write!(f, "kl"),
            UtilityKind::Renyi(o) => write!(f, "renyi:{}", o.alpha()),
        }
    }
}

impl std::str::FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "kl" {
            return Ok(UtilityKind::RelativeEntropy);
        }
        if let Some(rest) = s.strip_prefix("renyi:") {
            let alpha: f64 = rest
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad Rényi order '{rest}'")))?;
            return Ok(UtilityKind::Renyi(RenyiOrder::new(alpha)?));
        }
        Err(Error::InvalidInput(format!(
            "utility must be 'kl' or 'renyi:<alpha>', got '{s}'"
        )))
    }
}

/// Utility of a mechanism: `min_k U(p_k W || p_1 W)` over `k >= 2`, bits.
pub fn mechanism_utility(problem: &EitProblem, w: &Mechanism, utility: UtilityKind) -> Result<f64> {
    let q1 = problem.hypothesis(0).push_through(w)?;
    let mut worst = f64::INFINITY;
    for p in &problem.hypotheses()[1..] {
        let qk = p.push_through(w)?;
        let u = match utility {
            UtilityKind::RelativeEntropy => nats_to_bits(kl_nats(qk.probs(), q1.probs())?),
            UtilityKind::Renyi(o) => renyi_bits(qk.probs(), q1.probs(), o.alpha())?,
        };
        worst = worst.min(u);
    }
    Ok(worst)
}

/// Best 2x2 mechanism found by the grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct PutSolution {
    /// `[[1 - x, x], [y, 1 - y]]`
    pub mechanism: Mechanism,
    pub x: f64,
    pub y: f64,
    /// Utility in bits.
    pub value: f64,
}

struct Put2x2<'a> {
    ps: Vec<[f64; 2]>,
    eps: &'a [f64],
    utility: UtilityKind,
}

impl Put2x2<'_> {
    /// Utility at `(x, y)`, or `None` if some leakage exceeds its budget.
    fn eval(&self, x: f64, y: f64) -> Option<f64> {
        let w = [[1.0 - x, x], [y, 1.0 - y]];
        let out = |p: &[f64; 2]| [p[0] * w[0][0] + p[1] * w[1][0], p[0] * w[0][1] + p[1] * w[1][1]];
        let mut outs = Vec::with_capacity(self.ps.len());
        for (p, &e) in self.ps.iter().zip(self.eps) {
            let q = out(p);
            let mi = p[0] * kl_nats(&w[0], &q).ok()? + p[1] * kl_nats(&w[1], &q).ok()?;
            if !(nats_to_bits(mi) <= e) {
                return None;
            }
            outs.push(q);
        }
        let mut worst = f64::INFINITY;
        for q in &outs[1..] {
            let u = match self.utility {
                UtilityKind::RelativeEntropy => nats_to_bits(kl_nats(q, &outs[0]).ok()?),
                UtilityKind::Renyi(o) => renyi_bits(q, &outs[0], o.alpha()).ok()?,
            };
            worst = worst.min(u);
        }
        Some(worst)
    }
}

/// Which coordinate is gridded; the other is found on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Axis {
    X,
    Y,
}

/// Boundary point reached from the grid coordinate `s`.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    x: f64,
    y: f64,
    axis: Axis,
    /// `false` walks towards 0, `true` towards 1.
    up: bool,
    s: f64,
}

const BISECT_ITER: usize = 200;

impl Put2x2<'_> {
    fn feasible(&self, x: f64, y: f64) -> bool {
        self.eval(x, y).is_some()
    }

    /// Walk from the identical-rows line towards `target` along the free
    /// coordinate and stop at the last feasible point.
    fn boundary(&self, axis: Axis, s: f64, up: bool) -> Candidate {
        let point = |t: f64| match axis {
            Axis::X => (s, t),
            Axis::Y => (t, s),
        };
        let start = 1.0 - s;
        let target = if up { 1.0 } else { 0.0 };
        let (x, y) = point(target);
        let t = if self.feasible(x, y) {
            target
        } else {
            let (mut lo, mut hi) = (start, target);
            for _ in 0..BISECT_ITER {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                let (x, y) = point(mid);
                if self.feasible(x, y) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let (x, y) = point(t);
        let value = self.eval(x, y).unwrap_or(0.0).max(0.0);
        Candidate { value, x, y, axis, up, s }
    }
}

/// Best first: larger value, then lexicographically smaller `(x, y)`.
fn better(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.value
        .total_cmp(&a.value)
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
}

/// Boundary points for `count + 1` grid values `origin + k h` on `axis`.
fn scan(put: &Put2x2, axes: &[(Axis, bool)], origin: f64, count: usize, h: f64) -> Vec<Candidate> {
    let mut found: Vec<Candidate> = (0..=count)
        .into_par_iter()
        .flat_map_iter(|k| {
            let s = (origin + k as f64 * h).clamp(0.0, 1.0);
            axes.iter()
                .map(move |&(axis, up)| put.boundary(axis, s, up))
        })
        .collect();
    found.sort_by(better);
    found
}

/// Exact privacy-utility optimum over 2x2 mechanisms
/// `[[1 - x, x], [y, 1 - y]]`.
///
/// The feasible set is convex in `(x, y)` and the utility is quasi-convex,
/// so the optimum lies on the feasibility boundary. One coordinate is
/// gridded, the other is bisected onto the boundary on both sides of the
/// identical-rows line, for both choices of gridded coordinate. The best
/// candidates are refined by shrinking the step by 10 per round.
pub fn exact_put_2x2(problem: &EitProblem, grid: &GridSpec, utility: UtilityKind) -> Result<PutSolution> {
    if problem.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "2x2 oracle needs M = 2, got M = {}",
            problem.dim()
        )));
    }
    let put = Put2x2 {
        ps: problem
            .hypotheses()
            .iter()
            .map(|p| [p.probs()[0], p.probs()[1]])
            .collect(),
        eps: problem.budgets(),
        utility,
    };
    if put.eps.iter().any(|&e| e <= 0.0) {
        // only identical rows leak nothing
        let mechanism = Mechanism::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]])?;
        return Ok(PutSolution { mechanism, x: 0.0, y: 1.0, value: 0.0 });
    }
    let all = [(Axis::X, false), (Axis::X, true), (Axis::Y, false), (Axis::Y, true)];
    let h0 = grid.resolution;
    let k = (1.0 / h0).round() as usize;
    let mut coarse = scan(&put, &all, 0.0, k, h0);
    coarse.truncate(MULTI_START);
    let mut best = coarse[0];
    for start in coarse {
        let mut inc = start;
        let mut h = h0;
        for _ in 0..grid.refine_rounds {
            let fine = h / 10.0;
            let span = (2.0 * WINDOW * h / fine).round() as usize;
            let fam = [(inc.axis, inc.up)];
            if let Some(&cand) = scan(&put, &fam, inc.s - WINDOW * h, span, fine).first() {
                if better(&cand, &inc).is_lt() {
                    inc = cand;
                }
            }
            h = fine;
        }
        if better(&inc, &best).is_lt() {
            best = inc;
        }
    }
    let Candidate { value, x, y, .. } = best;
    let mechanism = Mechanism::from_rows(&[vec![1.0 - x, x], vec![y, 1.0 - y]])?;
    Ok(PutSolution { mechanism, x, y, value })
}

/// Grid search over the vector program `max min_k 1/2 (a . (p_k - p_1))^2`
/// subject to `1/2 sum_i p_ki a_i^2 <= eps_k`. Each grid point is used as a
/// direction and scaled onto the feasibility boundary. Returns `a` and the
/// value in bits.
pub fn grid_qcqp(problem: &EitProblem, grid: &GridSpec) -> Result<(Vec<f64>, f64)> {
    let dim = problem.dim();
    if dim > QCQP_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim,
            max: QCQP_MAX_DIM,
        });
    }
    let ps: Vec<&[f64]> = problem.hypotheses().iter().map(|p| p.probs()).collect();
    let eps: Vec<f64> = problem.budgets().iter().map(|&e| bits_to_nats(e)).collect();
    let diffs: Vec<Vec<f64>> = ps[1..]
        .iter()
        .map(|p| p.iter().zip(ps[0]).map(|(a, b)| a - b).collect())
        .collect();
    if eps.iter().any(|&e| e == 0.0) || diffs.iter().any(|d| d.iter().all(|&x| x == 0.0)) {
        return Ok((vec![0.0; dim], 0.0));
    }
    let bound: Vec<f64> = (0..dim)
        .map(|i| {
            ps.iter()
                .zip(&eps)
                .map(|(p, e)| (2.0 * e / p[i]).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // value after scaling a onto the boundary of the feasible set
    let value = |a: &[f64]| -> f64 {
        let s2 = ps
            .iter()
            .zip(&eps)
            .map(|(p, e)| e / quadratic_leakage(p, a))
            .fold(f64::INFINITY, f64::min);
        if !s2.is_finite() {
            return 0.0;
        }
        let obj = diffs
            .iter()
            .map(|d| 0.5 * dot(a, d).powi(2))
            .fold(f64::INFINITY, f64::min);
        s2 * obj
    };
    let search = |center: &[f64], half: &[f64], counts: &[usize], first_nonneg: bool| -> (f64, Vec<f64>) {
        let total: usize = counts.iter().map(|c| c + 1).product();
        (0..total)
            .into_par_iter()
            .map(|mut flat| {
                let mut a = vec![0.0; dim];
                for i in (0..dim).rev() {
                    let c = counts[i] + 1;
                    let k = flat % c;
                    flat /= c;
                    let lo = if i == 0 && first_nonneg { center[0].max(0.0) } else { center[i] - half[i] };
                    let hi = center[i] + half[i];
                    a[i] = if counts[i] == 0 { lo } else { lo + (hi - lo) * k as f64 / counts[i] as f64 };
                }
                (value(&a), a)
            })
            .reduce(
                || (f64::NEG_INFINITY, vec![0.0; dim]),
                |x, y| {
                    // ties go to the lexicographically smaller point
                    match x.0.total_cmp(&y.0) {
                        std::cmp::Ordering::Greater => x,
                        std::cmp::Ordering::Less => y,
                        std::cmp::Ordering::Equal => {
                            if y.1.iter().zip(&x.1).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne())
                                == Some(std::cmp::Ordering::Less)
                            {
                                y
                            } else {
                                x
                            }
                        }
                    }
                },
            )
    };
    let steps = (1.0 / grid.resolution).round() as usize;
    let mut counts = vec![2 * steps; dim];
    counts[0] = steps;
    let center = vec![0.0; dim];
    let (mut best, mut a) = search(&center, &bound, &counts, true);
    let mut step: Vec<f64> = bound.iter().map(|b| b * grid.resolution).collect();
    for _ in 0..grid.refine_rounds {
        let half: Vec<f64> = step.iter().map(|s| WINDOW * s).collect();
        let fine = vec![(2.0 * WINDOW * 10.0) as usize; dim];
        let (v, cand) = search(&a, &half, &fine, false);
        if v > best {
            best = v;
            a = cand;
        }
        step.iter_mut().for_each(|s| *s /= 10.0);
    }
    let s = ps
        .iter()
        .zip(&eps)
        .map(|(p, e)| e / quadratic_leakage(p, &a))
        .fold(f64::INFINITY, f64::min)
        .sqrt();
    let a: Vec<f64> = a.iter().map(|x| x * s).collect();
    Ok((a, nats_to_bits(best)))
}

/// One point of the comparison between the designed and the brute-force
/// mechanisms at matched leakage.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    /// Design budget in bits.
    pub eps_tilde: f64,
    /// `max_k I(p_k, W')` in bits.
    pub eps_effective: f64,
    /// `eps_effective / min_k H(p_k)`.
    pub eps_norm: f64,
    pub util_eit: f64,
    pub util_oracle: f64,
    /// `util_eit / util_oracle`.
    pub ratio: f64,
    pub utility: UtilityKind,
}

/// Design `W'` at each budget `eps_tilde` (bits, shared by every
/// hypothesis), then compare its exact utility with the 2x2 optimum at the
/// leakage `W'` actually incurs.
pub fn compare_protocol(
    problem: &EitProblem,
    eps_tilde: &[f64],
    utility: UtilityKind,
    grid: &GridSpec,
) -> Result<Vec<CompareRow>> {
    if problem.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "comparison needs M = 2, got M = {}",
            problem.dim()
        )));
    }
    let min_h = problem.min_entropy();
    eps_tilde
        .par_iter()
        .map(|&e| {
            let designed = problem.with_budgets(vec![e; problem.m()])?;
            let sol = if problem.m() == 2 {
                solve_binary(&designed)?
            } else {
                solve_binary_source_mary(&designed)?
            };
            let eps_effective = effective_leakage(problem, &sol.mechanism)?;
            let util_eit = mechanism_utility(problem, &sol.mechanism, utility)?;
            let matched = problem.with_budgets(vec![eps_effective; problem.m()])?;
            let util_oracle = exact_put_2x2(&matched, grid, utility)?.value;
            let ratio = if util_oracle > 0.0 {
                util_eit / util_oracle
            } else if util_eit == 0.0 {
                1.0
            } else {
                f64::INFINITY
            };
            Ok(CompareRow {
                eps_tilde: e,
                eps_effective,
                eps_norm: eps_effective / min_h,
                util_eit,
                util_oracle,
                ratio,
                utility,
            })
        })
        .collect()
}
