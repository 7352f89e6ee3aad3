pub mod chaos;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod mlf;
pub mod quad;
pub mod regimes;
pub mod sim;
pub mod special;
pub mod tail;
pub mod verify;

pub use error::{Error, Result};
