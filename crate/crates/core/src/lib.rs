//! Privacy mechanisms for hypothesis testing under mutual-information
//! leakage constraints, designed in the high-privacy (local, second-order)
//! regime around a perfect-privacy mechanism.
//!
//! - [`measures`]: entropy, relative entropy, mutual information, Rényi and
//!   Hellinger divergences.
//! - [`mechanism`]: the perturbation model `W = W0 + A [sqrt(w0)]`.
//! - [`binary`]: closed-form optimal mechanisms for two hypotheses.
//! - [`mary`]: SDP-based design for more than two hypotheses.
//! - [`oracle`]: brute-force reference solvers.
//! - [`exponent`]: finite-sample Neyman-Pearson error exponents.

pub mod binary;
pub mod error;
pub mod exponent;
pub mod mary;
pub mod measures;
pub mod mechanism;
pub mod oracle;

pub use binary::{
    choose_direction, solve_binary, solve_binary_renyi, solve_dual_eta, ActiveCase,
    BinarySolution, KktResiduals, RenyiSolution,
};
pub use error::{Error, Result};
pub use exponent::{exact_np_binary, mechanism_exponent_check, simulate_np, wilson_interval, TestResult};
pub use mary::{
    build_sdp, closest_hypothesis, output_size, reconstruct, reconstruct_uniform,
    solve_binary_source_mary, solve_sdp, Reconstruction, Sdp, SdpSolution,
};
pub use measures::{
    chi_squared_divergence, entropy, hellinger_divergence, kappa, mutual_information,
    relative_entropy, renyi_divergence, Distribution, Mechanism, RenyiOrder,
};
pub use mechanism::{
    approx_mutual_information, approx_relative_entropy, assemble, decompose, effective_leakage,
    perfect_mechanism, EitProblem, Perturbation, ReferenceOutput,
};
pub use oracle::{
    compare_protocol, exact_put_2x2, grid_qcqp, mechanism_utility, CompareRow, GridSpec,
    PutSolution, UtilityKind,
};
