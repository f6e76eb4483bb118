//! Toolkit for boson sampling with ultracold atoms in optical lattices:
//! Fock-basis bookkeeping, interferometer decomposition into local
//! tunnelling pulses, permanent-based output statistics, loss and rate
//! models, exact lossy time evolution and two-atom interference analysis.

pub mod error;
pub mod exactsim;
pub mod fock;
pub mod hom;
pub mod interferometer;
pub mod lossmodel;
pub mod permanent;
pub mod seed;

pub use error::{Error, Result};
pub use fock::{FockBasis, FockState};
pub use interferometer::{CircuitPlan, LocalCoupling, ModeUnitary};
pub use lossmodel::{ClassicalScenario, LossScenario, PhotonicScenario, RateScenario};
pub use permanent::OutputDistribution;
