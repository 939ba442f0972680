//! Random-walk exploration of three-map lattice systems and the catalog of
//! what it finds.

pub mod canonical;
pub mod catalog;
pub mod config;
pub mod engine;
pub mod gate;
pub mod mutation;

pub use canonical::{canonical_key, CanonicalKey};
pub use catalog::{
    Catalog, CatalogEntry, CatalogError, CatalogHeader, CatalogQuery, QueryError, QueryPage, RangeFilter,
    SortOrder,
};
pub use config::{parse_filters, ConfigError, Filter, SearchConfig};
pub use engine::{
    Checkpoint, Clock, CounterSnapshot, Counters, FixedClock, Search, SearchControl, SearchError, SearchSummary,
    SystemClock,
};
pub use gate::{complexity_gate, GateDecision};
pub use mutation::{mutate, Coord, Mutation};
