//! Orchestrator-owned file store shared by the agents of one benchmark.
//!
//! Every stage gets a private copy of its benchmark's namespace, works on it,
//! and syncs new or changed files back. Mutations of one namespace are
//! serialized by a per-namespace lock; different namespaces never touch.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::TempDir;
use thiserror::Error;
use walkdir::WalkDir;

use crate::fsutil::write_atomic;

const MANIFEST_DIR: &str = ".manifests";

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("invalid namespace `{0}`: use letters, digits, `.`, `_` and `-`, not starting with `.`")]
    BadNamespace(String),
    #[error("invalid repository path `{0}`")]
    BadPath(String),
    #[error("workspace was provisioned for `{workspace}`, not `{requested}`")]
    WrongNamespace { workspace: String, requested: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("corrupt manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RepositoryError + '_ {
    move |source| RepositoryError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Relative path (with `/` separators) to content hash.
pub type Manifest = BTreeMap<String, String>;

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_namespace(ns: &str) -> Result<(), RepositoryError> {
    let ok = !ns.is_empty()
        && !ns.starts_with('.')
        && ns
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'));
    if ok {
        Ok(())
    } else {
        Err(RepositoryError::BadNamespace(ns.to_string()))
    }
}

/// Rejects absolute paths and any `..`, `.` or empty component.
fn check_rel(rel: &str) -> Result<(), RepositoryError> {
    let bad = rel.is_empty()
        || rel.starts_with('/')
        || rel.contains('\\')
        || rel.split('/').any(|c| c.is_empty() || c == "." || c == "..");
    if bad {
        Err(RepositoryError::BadPath(rel.to_string()))
    } else {
        Ok(())
    }
}

fn scan(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, RepositoryError> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| RepositoryError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(dir)
            .expect("walkdir stays under its root")
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = fs::read(entry.path()).map_err(io_err(entry.path()))?;
        out.insert(rel, bytes);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncSummary {
    pub added: usize,
    pub modified: usize,
    pub unchanged: usize,
    /// Paths changed in the repository after provisioning and overwritten
    /// by this sync.
    pub conflicts: Vec<String>,
}

/// A private copy of one namespace. The directory is removed on drop.
#[derive(Debug)]
pub struct Workspace {
    namespace: String,
    dir: TempDir,
    baseline: Manifest,
}

impl Workspace {
    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Hashes of the files as they were copied in.
    pub fn baseline(&self) -> &Manifest {
        &self.baseline
    }

    pub fn read(&self, rel: &str) -> Result<Option<String>, RepositoryError> {
        check_rel(rel)?;
        let p = self.path().join(rel);
        match fs::read_to_string(&p) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&p)(e)),
        }
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<(), RepositoryError> {
        check_rel(rel)?;
        let p = self.path().join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&p, contents).map_err(io_err(&p))
    }

    pub fn exists(&self, rel: &str) -> bool {
        check_rel(rel).is_ok() && self.path().join(rel).is_file()
    }
}

#[derive(Debug)]
pub struct SharedRepository {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SharedRepository {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, RepositoryError> {
        let root = root.into();
        fs::create_dir_all(root.join(MANIFEST_DIR)).map_err(io_err(&root))?;
        Ok(Self {
            root,
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn namespace_dir(&self, ns: &str) -> PathBuf {
        self.root.join(ns)
    }

    fn manifest_path(&self, ns: &str) -> PathBuf {
        self.root.join(MANIFEST_DIR).join(format!("{ns}.json"))
    }

    fn lock(&self, ns: &str) -> Arc<Mutex<()>> {
        let mut map = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(ns.to_string()).or_default().clone()
    }

    /// Stored manifest, or one computed from disk when none was written yet.
    fn load_manifest(&self, ns: &str) -> Result<Manifest, RepositoryError> {
        let path = self.manifest_path(ns);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| RepositoryError::Manifest {
                path: path.clone(),
                source,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(scan(&self.namespace_dir(ns))?
                .into_iter()
                .map(|(k, v)| (k, content_hash(&v)))
                .collect()),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    fn store_manifest(&self, ns: &str, manifest: &Manifest) -> Result<(), RepositoryError> {
        let path = self.manifest_path(ns);
        let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
        write_atomic(&path, &json).map_err(io_err(&path))
    }

    pub fn manifest(&self, ns: &str) -> Result<Manifest, RepositoryError> {
        check_namespace(ns)?;
        let lock = self.lock(ns);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        self.load_manifest(ns)
    }

    /// Reads one file straight from the repository.
    pub fn read(&self, ns: &str, rel: &str) -> Result<Option<Vec<u8>>, RepositoryError> {
        check_namespace(ns)?;
        check_rel(rel)?;
        let p = self.namespace_dir(ns).join(rel);
        match fs::read(&p) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&p)(e)),
        }
    }

    /// Copies the namespace into a fresh temporary directory.
    pub fn provision(&self, ns: &str) -> Result<Workspace, RepositoryError> {
        check_namespace(ns)?;
        let lock = self.lock(ns);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let dir = tempfile::Builder::new()
            .prefix(&format!("ws-{ns}-"))
            .tempdir()
            .map_err(io_err(&self.root))?;
        let mut baseline = Manifest::new();
        for (rel, bytes) in scan(&self.namespace_dir(ns))? {
            let dest = dir.path().join(&rel);
            if let Some(parent) = dest.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::write(&dest, &bytes).map_err(io_err(&dest))?;
            baseline.insert(rel, content_hash(&bytes));
        }
        Ok(Workspace {
            namespace: ns.to_string(),
            dir,
            baseline,
        })
    }

    /// Copies back files that are new or differ from what was provisioned,
    /// then rewrites the namespace manifest. A path that also changed in the
    /// repository since provisioning is overwritten (last writer wins) and
    /// reported as a conflict. Files deleted in the workspace are left alone.
    pub fn sync(&self, ns: &str, ws: &Workspace) -> Result<SyncSummary, RepositoryError> {
        check_namespace(ns)?;
        if ws.namespace != ns {
            return Err(RepositoryError::WrongNamespace {
                workspace: ws.namespace.clone(),
                requested: ns.to_string(),
            });
        }
        let lock = self.lock(ns);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut manifest = self.load_manifest(ns)?;
        let mut summary = SyncSummary::default();
        let base = self.namespace_dir(ns);
        for (rel, bytes) in scan(ws.path())? {
            let hash = content_hash(&bytes);
            let provisioned = ws.baseline.get(&rel);
            if provisioned == Some(&hash) {
                summary.unchanged += 1;
                continue;
            }
            let current = manifest.get(&rel);
            if current != provisioned && current != Some(&hash) {
                tracing::warn!(namespace = ns, path = %rel, "repository file changed since provisioning; overwriting");
                summary.conflicts.push(rel.clone());
            }
            match provisioned {
                None => summary.added += 1,
                Some(_) => summary.modified += 1,
            }
            let dest = base.join(&rel);
            write_atomic(&dest, &bytes).map_err(io_err(&dest))?;
            manifest.insert(rel, hash);
        }
        self.store_manifest(ns, &manifest)?;
        Ok(summary)
    }

    /// True when the stored manifest describes exactly the files on disk.
    pub fn verify(&self, ns: &str) -> Result<bool, RepositoryError> {
        let manifest = self.manifest(ns)?;
        let disk: Manifest = scan(&self.namespace_dir(ns))?
            .into_iter()
            .map(|(k, v)| (k, content_hash(&v)))
            .collect();
        Ok(manifest == disk)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provision_and_sync() {
        let root = tempfile::tempdir().unwrap();
        let repo = SharedRepository::open(root.path()).unwrap();
        let ws = repo.provision("b1").unwrap();
        assert!(ws.baseline().is_empty());
        ws.write("constraints/x.xmlish", "c").unwrap();
        let s = repo.sync("b1", &ws).unwrap();
        assert_eq!((s.added, s.modified, s.unchanged), (1, 0, 0));

        let ws2 = repo.provision("b1").unwrap();
        assert_eq!(ws2.read("constraints/x.xmlish").unwrap().as_deref(), Some("c"));
        let s = repo.sync("b1", &ws2).unwrap();
        assert_eq!((s.added, s.modified, s.unchanged), (0, 0, 1));
        assert!(repo.verify("b1").unwrap());
        assert!(repo.provision("b2").unwrap().baseline().is_empty());
    }

    #[test]
    fn last_writer_wins() {
        let root = tempfile::tempdir().unwrap();
        let repo = SharedRepository::open(root.path()).unwrap();
        let a = repo.provision("b").unwrap();
        let b = repo.provision("b").unwrap();
        a.write("f", "from a").unwrap();
        b.write("f", "from b").unwrap();
        assert!(repo.sync("b", &a).unwrap().conflicts.is_empty());
        assert_eq!(repo.sync("b", &b).unwrap().conflicts, vec!["f".to_string()]);
        assert_eq!(repo.read("b", "f").unwrap().unwrap(), b"from b");
        assert!(repo.verify("b").unwrap());
    }

    #[test]
    fn rejects_bad_names() {
        let root = tempfile::tempdir().unwrap();
        let repo = SharedRepository::open(root.path()).unwrap();
        assert!(repo.provision("../x").is_err());
        assert!(repo.provision(".manifests").is_err());
        let ws = repo.provision("ok").unwrap();
        assert!(ws.write("../escape", "x").is_err());
        assert!(repo.sync("other", &ws).is_err());
    }
}
