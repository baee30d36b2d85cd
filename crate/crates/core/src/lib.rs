//! Simulation and analytics for the α-Heston stochastic volatility model.
//!
//! The variance follows an α-CIR process
//! `dV = a(b - V)dt + σ√V dW + σ_N V^{1/α} dZ` driven by a spectrally positive
//! α-stable Lévy process `Z`, and the asset is `dS/S = r dt + √V dB` with
//! `d⟨B, W⟩ = ρ dt`. The crate provides path simulation, the affine transform
//! (generalized Riccati) layer, tail and wing asymptotics, Monte Carlo option
//! pricing with implied volatility inversion, the Esscher change of measure,
//! and the jump-cluster decomposition of `V`.
//!
//! Numerical code is generic over [`Real`] (`f32`, `f64`); `f64` aliases are
//! exported at the crate root.

// `!(x > 0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod clusters;
pub mod error;
pub mod experiment;
pub mod levy;
pub mod mc;
pub mod measure;
pub mod numerics;
pub mod pricing;
pub mod real;
pub mod riccati;
pub mod rng;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
pub use real::Real;
pub use rng::RandomStream;

pub type StabilityIndexF64 = levy::StabilityIndex<f64>;
pub type BranchingParamsF64 = levy::BranchingParams<f64>;
pub type JumpThresholdF64 = levy::JumpThreshold<f64>;
pub type ModelParamsF64 = sde::ModelParams<f64>;
pub type SimGridF64 = sde::SimGrid<f64>;
pub type VPathF64 = sde::VPath<f64>;
pub type JointPathF64 = sde::JointPath<f64>;






pub type FreqTripleF64 = riccati::FreqTriple<f64>;
pub type RiccatiSolutionF64 = riccati::RiccatiSolution<f64>;
pub type EsscherParamsF64 = measure::EsscherParams<f64>;
pub type PhysicalModelF64 = measure::PhysicalModel<f64>;
pub type ClusterConfigF64 = clusters::ClusterConfig<f64>;
pub type DecompositionF64 = clusters::Decomposition<f64>;
