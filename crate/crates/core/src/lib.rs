pub mod boolfn;
pub mod boost;
pub mod compress;
pub mod concepts;
pub mod design;
pub mod distrib;
pub mod error;
pub mod exact;
pub mod harness;
pub mod learner;
pub mod norm;
pub mod oracle;
pub mod protocol;

pub use error::{Error, Result};
