//! Simulation and verification of the averaging principle for diffusions on
//! a simplex whose dominant noise vanishes exactly at the vertices.
//!
//! The fast pure-noise process is absorbed at the vertices with probabilities
//! given by the barycentric coordinates, so as the time-scale separation `γ`
//! grows the slow dynamics collapse onto a continuous-time Markov chain on
//! the vertex set. The crate simulates both sides and measures the gap.

pub mod jump;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sde;
pub mod scenario;
pub mod simplex;

pub use model::{AffineDrift, CoefficientModel, MatrixField, VectorField};
pub use simplex::{AffineFunction, Simplex};
