//! Exact sampling and analysis of boxed plane partitions (lozenge tilings of
//! an a x b x c hexagon) under Hahn / Racah / q-Hahn / q-Racah / elliptic
//! weight families: perfect sampling through size-changing Markov chains,
//! determinantal correlation kernels, bulk-limit formulas, and elliptic
//! product identities.

pub mod elliptic;
pub mod error;
pub mod sampler;
pub mod kernel;
pub mod linalg;
pub mod numerics;
pub mod asymptotics;
pub mod chains;
pub mod oracle;
pub mod weights;

pub use error::{Error, Result};
