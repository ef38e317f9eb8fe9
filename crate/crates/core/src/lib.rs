//! Quantum-kernel support vector machines on tabular omics-style data.
//!
//! The crate covers the full pipeline: ridge-based feature ranking and rank
//! groups, log + min-max normalization and PCA, statevector simulation of
//! amplitude, angle and ZZ embeddings, fidelity and projected quantum
//! kernels next to RBF and polynomial baselines, an SMO dual solver with
//! class weights, and a cross-validated AUC experiment runner.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! pin the common types to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data_pipeline;
pub mod error;
pub mod experiment_runner;
pub mod feature_ranking;
pub mod kernel_engine;
pub mod label;
pub mod linalg;
pub mod quantum_state;
pub mod scalar;
pub mod svm_solver;

pub use error::{Error, Result};
pub use label::Label;
pub use scalar::Real;

pub type StateVectorF64 = quantum_state::StateVector<f64>;
pub type KernelSpecF64 = kernel_engine::KernelSpec<f64>;
pub type GramMatrixF64 = kernel_engine::GramMatrix<f64>;
pub type SvmProblemF64 = svm_solver::SvmProblem<f64>;
pub type SvmModelF64 = svm_solver::SvmModel<f64>;
pub type RidgeModelF64 = feature_ranking::RidgeModel<f64>;
pub type DatasetF64 = data_pipeline::Dataset<f64>;

pub type StateVectorF32 = quantum_state::StateVector<f32>;
pub type KernelSpecF32 = kernel_engine::KernelSpec<f32>;
