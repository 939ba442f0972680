//! Service layer for gasketlab: the `/api` HTTP interface, the search
//! session it hosts, and the operations shared with the command line.

pub mod api;
pub mod cli;
pub mod error;
pub mod ops;
pub mod session;

pub use api::{router, AppState};
pub use error::ServiceError;

/// Environment variable naming the default catalog file.
pub const CATALOG_ENV: &str = "GASKETLAB_CATALOG";
/// Catalog path used when neither a flag nor the environment names one.
pub const DEFAULT_CATALOG: &str = "catalog.jsonl";
