pub mod error;
pub mod experiments;
pub mod kernels;
pub mod mc;
pub mod mmca;
pub mod network;
pub mod seeding;
pub mod threshold;

pub use error::{Error, Result};
