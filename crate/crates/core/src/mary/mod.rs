//! Mechanism design for more than two hypotheses.

pub mod collinear;
pub mod eigen;
pub mod reconstruct;
pub mod sdp;

pub use collinear::{closest_hypothesis, solve_binary_source_mary};
pub use eigen::{jacobi_eigen, SymmetricEigen};
pub use reconstruct::{output_size, reconstruct, reconstruct_uniform, Reconstruction};
pub use sdp::{build_sdp, solve_sdp, trace_leakage, Sdp, SdpSolution};
