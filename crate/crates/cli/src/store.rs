//! Output directory handling: exclusive lock, staging area for run
//! outputs, content-addressed cache, atomic file writes.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const LOCK_FILE: &str = ".lock";
pub const CACHE_DIR: &str = "cache";
const STAGING_DIR: &str = ".staging";

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Hex SHA-256 of the canonical JSON of `value`.
pub fn json_digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("key material serializes");
    format!("{:x}", Sha256::digest(&bytes))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Exclusive ownership of an output directory for the lifetime of the
/// value. Outputs are written to a staging area and moved into the
/// directory by [`OutputDir::commit`]; dropping without committing removes
/// them.
pub struct OutputDir {
    root: PathBuf,
    staging: PathBuf,
}

impl OutputDir {
    pub fn acquire(root: &Path) -> CliResult<Self> {
        let io_err = |e: io::Error| CliError::data("output", format!("{}: {e}", root.display()));
        fs::create_dir_all(root).map_err(io_err)?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(CliError::config(
                    "output",
                    format!("{} is locked by another run (remove {} if stale)", root.display(), lock.display()),
                ));
            }
            Err(e) => return Err(io_err(e)),
        }
        let staging = root.join(STAGING_DIR);
        let _ = fs::remove_dir_all(&staging);
        let out = OutputDir {
            root: root.to_path_buf(),
            staging,
        };
        fs::create_dir_all(&out.staging).map_err(io_err)?;
        fs::create_dir_all(out.cache_dir()).map_err(io_err)?;
        Ok(out)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join(CACHE_DIR)
    }

    /// Final location of a run output.
    pub fn final_path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Stages a run output; it becomes visible on commit.
    pub fn stage(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.staging.join(name), bytes).map_err(|e| CliError::io("output", e))
    }

    /// Moves staged outputs into place.
    pub fn commit(self) -> CliResult<()> {
        let entries = fs::read_dir(&self.staging).map_err(|e| CliError::io("output", e))?;
        let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        names.sort();
        for src in names {
            let dst = self.root.join(src.file_name().expect("staged file has a name"));
            fs::rename(&src, &dst).map_err(|e| CliError::io("output", e))?;
        }
        Ok(())
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_dir_all(&self.staging);
        let _ = fs::remove_file(self.root.join(LOCK_FILE));
    }
}

/// Content-addressed artifacts under `<out>/cache`.
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: PathBuf) -> Self {
        Cache { dir }
    }

    pub fn path(&self, stage: &str, key: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stage}-{}.{ext}", &key[..16.min(key.len())]))
    }

    pub fn read(&self, stage: &str, key: &str, ext: &str) -> Option<Vec<u8>> {
        fs::read(self.path(stage, key, ext)).ok()
    }

    pub fn write(&self, stage: &str, key: &str, ext: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.path(stage, key, ext), bytes).map_err(|e| CliError::io(stage, e))
    }
}
