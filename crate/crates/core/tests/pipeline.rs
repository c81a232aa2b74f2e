use approx::assert_relative_eq;

use privhyp::exponent::simulate_np;
use privhyp::{
    build_sdp, decompose, effective_leakage, exact_np_binary, mechanism_exponent_check,
    mutual_information, perfect_mechanism, reconstruct_uniform, relative_entropy, solve_binary,
    solve_binary_source_mary, solve_sdp, Distribution, EitProblem, Mechanism, ReferenceOutput,
};

fn d(v: &[f64]) -> Distribution {
    Distribution::new(v.to_vec()).unwrap()
}

fn normalized(hyps: &[&[f64]], frac: f64) -> EitProblem {
    let hyps: Vec<Distribution> = hyps.iter().map(|p| d(p)).collect();
    let h = hyps.iter().map(|p| p.entropy()).fold(f64::INFINITY, f64::min);
    EitProblem::with_equal_budgets(hyps, frac * h).unwrap()
}

// Optima of the quadratic program at budget 1e-3 min H, multi-start SLSQP.
const PAIR_OPTIMA: [(&[f64], &[f64], f64); 4] = [
    (&[0.55, 0.45], &[0.95, 0.05], 1.851_455_076_306_582_2e-4),
    (&[0.95, 0.05], &[0.05, 0.95], 9.279_261_410_565_384e-4),
    (&[0.5, 0.5], &[0.45, 0.55], 9.927_744_539_886_05e-6),
    (&[0.10, 0.90], &[0.05, 0.95], 7.955_471_031_001_612e-6),
];
const TRIPLE2_OPTIMUM: f64 = 7.328_056_149_837_756_5e-6;
const TRIPLE2: [&[f64]; 3] = [&[0.15, 0.85], &[0.10, 0.90], &[0.20, 0.80]];

#[test]
fn closed_form_matches_independent_optimizer() {
    for (p1, p2, expected) in PAIR_OPTIMA {
        let problem = normalized(&[p1, p2], 1e-3);
        let sol = solve_binary(&problem).unwrap();
        assert_relative_eq!(sol.predicted_utility, expected, max_relative = 1e-9);
        let sdp = solve_sdp(&build_sdp(&problem)).unwrap();
        assert_relative_eq!(sdp.utility_bits(), expected, max_relative = 1e-9);
    }
}

#[test]
fn triple2_collinear_and_sdp_match_independent_optimizer() {
    let problem = normalized(&TRIPLE2, 1e-3);
    let col = solve_binary_source_mary(&problem).unwrap();
    assert_relative_eq!(col.predicted_utility, TRIPLE2_OPTIMUM, max_relative = 1e-9);
    let sdp = solve_sdp(&build_sdp(&problem)).unwrap();
    assert_relative_eq!(sdp.utility_bits(), TRIPLE2_OPTIMUM, max_relative = 1e-9);
    assert_eq!(sdp.rank, 1);
}

#[test]
fn sdp_design_round_trips_through_the_perturbation_model() {
    let problem = normalized(&[&[0.2, 0.3, 0.5], &[0.3, 0.3, 0.4], &[0.25, 0.4, 0.35]], 1e-3);
    let sol = solve_sdp(&build_sdp(&problem)).unwrap();
    let rec = reconstruct_uniform(&sol).unwrap();
    let n = rec.mechanism.outputs();
    assert!(n <= problem.dim() + 1);
    let w0 = ReferenceOutput::uniform(n).unwrap();
    let back = decompose(&w0, &rec.mechanism).unwrap();
    assert!((back.matrix() - &rec.a_star).amax() < 1e-12);
    // exact leakage is the budget up to third-order terms
    for (p, &eps) in problem.hypotheses().iter().zip(problem.budgets()) {
        let mi = mutual_information(p, &rec.mechanism).unwrap();
        assert!(mi <= eps * 1.05, "{mi} vs {eps}");
    }
    assert!(effective_leakage(&problem, &rec.mechanism).unwrap() > 0.0);
}

#[test]
fn perfect_mechanism_has_zero_exponent() {
    let (p1, p2) = (d(&[0.5, 0.5]), d(&[0.45, 0.55]));
    let w0 = perfect_mechanism(&ReferenceOutput::uniform(2).unwrap(), 2);
    for delta in [0.05, 0.2] {
        let r = mechanism_exponent_check(&p1, &p2, &w0, 10_000, delta, 100, 1).unwrap();
        assert!((r.beta2 - (1.0 - delta)).abs() < 1e-12);
    }
}

#[test]
fn permutation_exponent_approaches_source_divergence() {
    let (p1, p2) = (d(&[0.5, 0.5]), d(&[0.25, 0.75]));
    let swap = Mechanism::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let target = relative_entropy(&p2, &p1).unwrap();
    let gaps: Vec<f64> = [100, 1000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let r = mechanism_exponent_check(&p1, &p2, &swap, n, 0.1, 100, 1).unwrap();
            (r.exponent - target).abs()
        })
        .collect();
    // the finite-n correction decays like 1 / sqrt(n)
    assert!(gaps.windows(2).all(|g| g[1] < 0.5 * g[0]), "{gaps:?}");
    assert!(gaps[3] < 0.02 * target, "{gaps:?} {target}");
}

#[test]
fn designed_mechanism_exponent_tends_to_its_utility() {
    let problem = normalized(&[&[0.55, 0.45], &[0.95, 0.05]], 0.1);
    let w = solve_binary(&problem).unwrap().mechanism;
    let q1 = problem.hypothesis(0).push_through(&w).unwrap();
    let q2 = problem.hypothesis(1).push_through(&w).unwrap();
    let target = relative_entropy(&q2, &q1).unwrap();
    let r4 = exact_np_binary(&q1, &q2, 10_000, 0.2).unwrap();
    let r5 = exact_np_binary(&q1, &q2, 100_000, 0.2).unwrap();
    assert!((r5.exponent - target).abs() < (r4.exponent - target).abs());
    assert!((r5.exponent - target).abs() < 0.05 * target);
}

#[test]
fn simulation_brackets_exact_error() {
    let (q1, q2) = (d(&[0.5, 0.5]), d(&[0.3, 0.7]));
    let exact = exact_np_binary(&q1, &q2, 30, 0.1).unwrap();
    let sim = simulate_np(&q1, &q2, 30, 0.1, 20_000, 11).unwrap();
    let (lo, hi) = sim.confidence.unwrap();
    assert!(lo <= exact.beta2 && exact.beta2 <= hi, "{lo} {} {hi}", exact.beta2);
    assert_eq!(sim, simulate_np(&q1, &q2, 30, 0.1, 20_000, 11).unwrap());
}
