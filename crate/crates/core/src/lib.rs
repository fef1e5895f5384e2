pub mod cli;
pub mod corr;
pub mod eigen;
pub mod error;
pub mod exact;
pub mod influence;
pub mod matrix;
pub mod randgen;
pub mod resample;
pub mod sim;
pub mod special;
pub mod stats;
pub mod sum;

pub use corr::{CoefficientEstimate, CorrelationKind, KendallVariant, PairedSample, RankVector};
pub use error::{Error, Result};
pub use matrix::SquareMatrix;
