//! Run directories, CSV files and the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip text of a float, in exponent form for very large or
/// very small magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub timestamp: String,
    pub verdict: String,
    pub reports: Vec<ReportEntry>,
    pub files: Vec<FileEntry>,
}

/// An append-only run directory. Files are written once and recorded for the
/// manifest.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    header: String,
    files: Vec<FileEntry>,
}

impl RunDir {
    /// Creates the next free `run-NNNN` directory under `base`.
    pub fn create(base: &Path, seed: u64, config_hash: &str) -> Result<Self> {
        fs::create_dir_all(base).map_err(|e| CliError::io(base, e))?;
        for i in 1.. {
            let path = base.join(format!("run-{i:04}"));
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        header: format!("# seed={seed} config={}", &config_hash[..8]),
                        files: Vec::new(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(CliError::io(&path, e)),
            }
        }
        unreachable!("run index space is unbounded")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// The `# seed=… config=…` line heading every CSV.
    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path.join(name);
        if path.exists() || name == MANIFEST {
            return Err(CliError::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::AlreadyExists, "run files are written once"),
            ));
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes an SVG with the seed/config line embedded as a comment.
    pub fn write_svg(&mut self, name: &str, svg: &str) -> Result<PathBuf> {
        let comment = format!("<!-- {} -->\n", self.header.trim_start_matches("# "));
        let text = match svg.find('\n') {
            Some(i) => format!("{}{comment}{}", &svg[..=i], &svg[i + 1..]),
            None => format!("{svg}\n{comment}"),
        };
        self.write_text(name, &text)
    }

    pub fn write_csv<I>(&mut self, name: &str, headers: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut buf = format!("{}\n", self.header).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let path = self.path.join(name);
            let wrap = |e: csv::Error| CliError::Csv {
                path: path.clone(),
                row: 0,
                reason: e.to_string(),
            };
            w.write_record(headers).map_err(wrap)?;
            for row in rows {
                w.write_record(&row).map_err(wrap)?;
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
        }
        self.write_bytes(name, &buf)
    }

    /// Audits the directory for orphans and writes the manifest, last.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf> {
        let mut files = self.files;
        files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = files;
        check_inventory(&self.path, &manifest)?;
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Audit {
            dir: self.path.clone(),
            reason: e.to_string(),
        })?;
        let path = self.path.join(MANIFEST);
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(self.path)
    }
}

fn check_inventory(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let fail = |reason: String| CliError::Audit {
        dir: dir.to_path_buf(),
        reason,
    };
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST {
            continue;
        }
        if !manifest.files.iter().any(|f| f.path == name) {
            return Err(fail(format!("orphan file {name} is not in the manifest")));
        }
    }
    for f in &manifest.files {
        let path = dir.join(&f.path);
        let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
        if sha256_hex(&bytes) != f.sha256 {
            return Err(fail(format!("{} does not match its recorded hash", f.path)));
        }
    }
    Ok(())
}

/// Checks a finished run directory: manifest present, no orphans, hashes intact.
pub fn audit(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|_| CliError::Audit {
        dir: dir.to_path_buf(),
        reason: "no manifest; the run is incomplete".into(),
    })?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::Audit {
        dir: dir.to_path_buf(),
        reason: format!("unreadable manifest: {e}"),
    })?;
    check_inventory(dir, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text() {
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_f64(2.5e20), "2.5e20");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
