//! Sampling and exact densities for `Z = B⁻¹X` with rotation-invariant
//! random matrices, Girko's linear-system law and its stable extension.

pub mod densities;
pub mod ensembles;
pub mod experiment;
pub mod girko;
pub mod matcore;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use ensembles::{EnsembleSpec, Field, PartitionSpec, RadialLaw};
pub use experiment::{run, ExperimentConfig, ExperimentKind, RunReport};
pub use matcore::{ComplexMatrix, MatError, Matrix, RealMatrix};
pub use rng::RngStream;
