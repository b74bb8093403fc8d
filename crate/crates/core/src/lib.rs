//! Numerical toolkit for the Riesz liquid-drop functional
//! `F(E) = P(E) + gamma * ∫_E ∫_E |x - y|^(-alpha) dx dy` in `R^N`.
//!
//! The crate computes the second-variation spectrum of the ball, the local
//! minimality thresholds it implies, energies of disjoint ball clusters, and
//! the ball-cluster ground-state landscape. Every closed form has an
//! independent numerical route (quadrature or Monte Carlo) next to it.

pub mod ballmodel;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod landscape;
pub mod numerics;
pub mod stability;

pub use ballmodel::{Ball, BallConfiguration, EnergyBreakdown};
pub use coefficients::{ModelParams, RieszCoefficients};
pub use error::{Error, Result};
pub use landscape::{LandscapeTable, PartitionResult};
pub use numerics::{QuadratureSpec, SampleStream, Scheme};
pub use stability::{HarmonicPerturbation, StabilityReport, Verdict};

/// Version string recorded in output file headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
