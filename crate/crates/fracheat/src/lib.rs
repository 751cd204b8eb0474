//! Numerical toolkit for the fully fractional heat operator `(∂t − Δ)^s`
//! with `s ∈ (0, 1)` on periodic desk-scale grids.
//!
//! The operator is realised two independent ways:
//!
//! * a **spectral route** ([`operator::apply_spectral`]) that multiplies
//!   space-time Fourier modes by the principal-branch symbol
//!   `(iω + |ξ|²)^s`, and
//! * a **singular-integral route** ([`operator::apply_quadrature`]) that
//!   evaluates the defining history integral
//!   `C_{n,s} ∫_{-∞}^{t} ∫ [u(x,t) − u(y,τ)] (t−τ)^{-n/2-1-s}
//!   e^{-|x−y|²/4(t−τ)} dy dτ`
//!   by panelled quadrature with an analytically integrated near-field
//!   Taylor correction.
//!
//! On top of the operator sit a mild-solution solver for
//! `(∂t − Δ)^s u = a(x) f(u)` (per-mode relaxation/forcing multipliers plus
//! Picard iteration, [`solver`]), moving-plane symmetry and monotonicity
//! diagnostics ([`planes`]), and critical-exponent / blow-up machinery
//! ([`criticality`]).
//!
//! Everything is deterministic for a fixed seed: randomised suites take an
//! explicit RNG and reports serialise to stable JSON.

#![forbid(unsafe_code)]

pub mod config;
pub mod criticality;
pub mod error;
pub mod field;
pub mod fft;
pub mod grid;
pub mod io;
pub mod nonlin;
pub mod operator;
pub mod planes;
pub mod report;
pub mod solver;
pub mod special;
pub mod synth;
pub mod weight;

pub use error::Error;
pub use field::Field;
pub use grid::GridSpec;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
