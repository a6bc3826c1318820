pub mod analytics;
pub mod context;
pub mod corpus;
pub mod error;
pub mod fsutil;
mod http;
pub mod intent;
pub mod retry;
pub mod registry;

pub use error::{Error, Result};
