//! Output directory management: tracked artifact writes, the resolved-config
//! echo, and a checksum manifest.
//!
//! Every command writes through an [`ArtifactDir`] so each run directory ends
//! with `config_resolved.toml` (the inputs after defaulting and overrides)
//! and `manifest.csv` listing the SHA-256 of every other file.

use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub struct ArtifactDir {
    root: PathBuf,
    /// (file name, hex digest) in write order.
    entries: Vec<(String, String)>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| io_at(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            entries: Vec::new(),
        })
    }

    /// Write one artifact and record its checksum.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).map_err(|e| io_at(&path, e))?;
        let digest = Sha256::digest(contents.as_bytes());
        self.entries.push((name.to_string(), hex(&digest)));
        Ok(())
    }

    /// Write `manifest.csv` and consume the tracker. The manifest lists every
    /// tracked file sorted by name; it has no row for itself.
    pub fn finish(self) -> Result<()> {
        let mut rows = self.entries;
        rows.sort();
        let mut out = String::from("file,sha256\n");
        for (name, digest) in &rows {
            out.push_str(name);
            out.push(',');
            out.push_str(digest);
            out.push('\n');
        }
        let path = self.root.join("manifest.csv");
        std::fs::write(&path, out).map_err(|e| io_at(&path, e))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn io_at(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}
