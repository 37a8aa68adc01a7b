use std::collections::BTreeMap;
use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Content address of a stored blob.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlobRef {
    /// Lowercase hex SHA-256.
    pub content_hash: String,
    pub size_bytes: u64,
}

impl BlobRef {
    pub fn of(bytes: &[u8]) -> BlobRef {
        BlobRef {
            content_hash: sha256_hex(bytes),
            size_bytes: bytes.len() as u64,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_hash(hash: &str) -> Result<()> {
    let ok = hash.len() == 64 && hash.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
    if ok {
        Ok(())
    } else {
        Err(Error::Parse(format!("`{hash}` is not a SHA-256 hex digest")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub blob_count: u64,
    pub total_bytes: u64,
}

/// Where blob bytes physically live. Keys are already-verified hashes.
pub trait BlobBackend: Send + Sync {
    /// Stores `bytes` under `hash`; returns `false` if it was already there.
    fn put(&self, hash: &str, bytes: &[u8]) -> Result<bool>;
    fn get(&self, hash: &str) -> Result<Option<Vec<u8>>>;
    fn delete(&self, hash: &str) -> Result<bool>;
    /// Every stored `(hash, size)`.
    fn list(&self) -> Result<Vec<(String, u64)>>;
}

/// Blobs at `<root>/<first two hex>/<hash>`, written via temp file + rename.
#[derive(Debug)]
pub struct FsBackend {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

impl FsBackend {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)
            .map_err(|e| Error::io(format!("creating blob root {}", root.display()), e))?;
        Ok(FsBackend {
            root,
            tmp_counter: AtomicU64::new(0),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.root.join(&hash[..2]).join(hash)
    }
}

impl BlobBackend for FsBackend {
    fn put(&self, hash: &str, bytes: &[u8]) -> Result<bool> {
        let path = self.path_for(hash);
        if path.exists() {
            return Ok(false);
        }
        let dir = path.parent().expect("blob path has a parent");
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".tmp-{hash}-{}-{n}", std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        };
        if let Err(e) = write() {
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(format!("writing blob {}", path.display()), e));
        }
        Ok(true)
    }

    fn get(&self, hash: &str) -> Result<Option<Vec<u8>>> {
        let path = self.path_for(hash);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(format!("reading blob {}", path.display()), e)),
        }
    }

    fn delete(&self, hash: &str) -> Result<bool> {
        let path = self.path_for(hash);
        match fs::remove_file(&path) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(false),
            Err(e) => Err(Error::io(format!("deleting blob {}", path.display()), e)),
        }
    }

    fn list(&self) -> Result<Vec<(String, u64)>> {
        let ctx = |p: &Path| format!("listing {}", p.display());
        let mut out = Vec::new();
        for shard in fs::read_dir(&self.root).map_err(|e| Error::io(ctx(&self.root), e))? {
            let shard = shard.map_err(|e| Error::io(ctx(&self.root), e))?;
            if !shard.file_type().map(|t| t.is_dir()).unwrap_or(false) {
                continue;
            }
            let dir = shard.path();
            for entry in fs::read_dir(&dir).map_err(|e| Error::io(ctx(&dir), e))? {
                let entry = entry.map_err(|e| Error::io(ctx(&dir), e))?;
                let name = entry.file_name().to_string_lossy().into_owned();
                if check_hash(&name).is_err() {
                    continue;
                }
                let len = entry.metadata().map_err(|e| Error::io(ctx(&dir), e))?.len();
                out.push((name, len));
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Process-local backend, for tests and throwaway repositories.
#[derive(Debug, Default)]
pub struct MemoryBackend {
    blobs: Mutex<BTreeMap<String, Vec<u8>>>,
}

impl MemoryBackend {
    /// Overwrites stored bytes without rehashing (simulates bit rot).
    pub fn tamper(&self, hash: &str, bytes: Vec<u8>) {
        self.blobs.lock().unwrap().insert(hash.to_string(), bytes);
    }
}

impl BlobBackend for MemoryBackend {
    fn put(&self, hash: &str, bytes: &[u8]) -> Result<bool> {
        let mut blobs = self.blobs.lock().unwrap();
        if blobs.contains_key(hash) {
            return Ok(false);
        }
        blobs.insert(hash.to_string(), bytes.to_vec());
        Ok(true)
    }

    fn get(&self, hash: &str) -> Result<Option<Vec<u8>>> {
        Ok(self.blobs.lock().unwrap().get(hash).cloned())
    }

    fn delete(&self, hash: &str) -> Result<bool> {
        Ok(self.blobs.lock().unwrap().remove(hash).is_some())
    }

    fn list(&self) -> Result<Vec<(String, u64)>> {
        Ok(self
            .blobs
            .lock()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.len() as u64))
            .collect())
    }
}

/// Content-addressed store over a backend.
#[derive(Clone)]
pub struct BlobStore {
    backend: Arc<dyn BlobBackend>,
}

impl std::fmt::Debug for BlobStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlobStore").finish_non_exhaustive()
    }
}

impl BlobStore {
    pub fn new(backend: Arc<dyn BlobBackend>) -> Self {
        BlobStore { backend }
    }

    pub fn open_dir(root: impl Into<PathBuf>) -> Result<Self> {
        Ok(BlobStore::new(Arc::new(FsBackend::new(root)?)))
    }

    pub fn in_memory() -> Self {
        BlobStore::new(Arc::new(MemoryBackend::default()))
    }

    pub fn backend(&self) -> &Arc<dyn BlobBackend> {
        &self.backend
    }

    /// Idempotent: identical bytes give an identical ref and are stored once.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<BlobRef> {
        let r = BlobRef::of(bytes);
        self.backend.put(&r.content_hash, bytes)?;
        Ok(r)
    }

    /// Reads and verifies a blob.
    pub fn get_blob(&self, r: &BlobRef) -> Result<Vec<u8>> {
        check_hash(&r.content_hash)?;
        let bytes = self
            .backend
            .get(&r.content_hash)?
            .ok_or_else(|| Error::NotFound(format!("blob {}", r.content_hash)))?;
        if bytes.len() as u64 != r.size_bytes || sha256_hex(&bytes) != r.content_hash {
            return Err(Error::Corrupt(r.content_hash.clone()));
        }
        Ok(bytes)
    }

    /// Looks a blob up by hash alone.
    pub fn get_by_hash(&self, hash: &str) -> Result<Vec<u8>> {
        check_hash(hash)?;
        let bytes = self
            .backend
            .get(hash)?
            .ok_or_else(|| Error::NotFound(format!("blob {hash}")))?;
        if sha256_hex(&bytes) != hash {
            return Err(Error::Corrupt(hash.to_string()));
        }
        Ok(bytes)
    }

    pub fn delete(&self, hash: &str) -> Result<bool> {
        check_hash(hash)?;
        self.backend.delete(hash)
    }

    pub fn list(&self) -> Result<Vec<(String, u64)>> {
        self.backend.list()
    }

    pub fn stats(&self) -> Result<StoreStats> {
        let list = self.backend.list()?;
        Ok(StoreStats {
            blob_count: list.len() as u64,
            total_bytes: list.iter().map(|(_, n)| n).sum(),
        })
    }
}
