//! Content-addressed blob storage and linked dataset registration.

mod blob;
mod dataset;

pub use blob::{
    sha256_hex, BlobBackend, BlobRef, BlobStore, FsBackend, MemoryBackend, StoreStats,
};
pub use dataset::{
    check_consistency, collect_garbage, register_linked_dataset, regenerate_preview,
    ConsistencyReport, DatasetRecord, Derivation, GcReport, Registration,
};
