pub mod attention;
pub mod backslice;
pub mod codeviews;
pub mod corpus;
pub mod error;
pub mod maskgen;
pub mod metrics;
pub mod syntax;

pub use error::{Error, Result};
