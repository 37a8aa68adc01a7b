//! Research data management core: a typed, journaled object repository
//! with provenance links, instrument metadata extraction, content-addressed
//! blob storage, provenance graphs, previews and analysis workflows.

pub mod deck;
pub mod error;
pub mod extract;
pub mod graph;
pub mod model;
pub mod par;
pub mod previews;
pub mod store;
pub mod workflows;

pub use error::{Error, ErrorCode, Result};
