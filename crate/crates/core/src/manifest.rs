//! Provenance record written next to every output.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Hex SHA-256 and size of a file, or of every file below a directory
/// (sorted by relative path, each contributing its relative path and content).
pub fn digest_path(path: &Path) -> Result<(String, u64)> {
    let mut hasher = Sha256::new();
    let mut bytes = 0u64;
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        for rel in files {
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0u8]);
            bytes += hash_file(&path.join(&rel), &mut hasher)?;
        }
    } else {
        bytes = hash_file(path, &mut hasher)?;
    }
    Ok((hex::encode(hasher.finalize()), bytes))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))? {
        let entry = entry.map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
        let p = entry.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else {
            out.push(p.strip_prefix(root).expect("below root").to_path_buf());
        }
    }
    Ok(())
}

fn hash_file(path: &Path, hasher: &mut Sha256) -> Result<u64> {
    let mut f = fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if n == 0 {
            return Ok(total);
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
}

/// Everything needed to replay a run: what ran, with which resolved
/// parameters, on which exact inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: Option<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(subcommand: &str, parameters: &impl Serialize, seed: Option<u64>) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: subcommand.to_owned(),
            parameters: serde_json::to_value(parameters).map_err(|e| Error::Runtime(e.to_string()))?,
            inputs: Vec::new(),
            seed,
            started_at: now(),
            finished_at: None,
        })
    }

    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let (sha256, bytes) = digest_path(path).map_err(|e| e.context(format!("{role} input")))?;
        self.inputs.push(InputDigest {
            role: role.to_owned(),
            path: path.display().to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }

    /// Stamps the finish time and writes the manifest as pretty JSON.
    pub fn finish(mut self, path: &Path) -> Result<Self> {
        self.finished_at = Some(now());
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let body = serde_json::to_string_pretty(&self).map_err(|e| Error::Runtime(e.to_string()))?;
        fs::write(path, body + "\n").map_err(|e| Error::io(path, e))?;
        Ok(self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&body).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    /// Recomputes every input digest and lists the ones that no longer match.
    pub fn stale_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|d| digest_path(Path::new(&d.path)).map(|(h, _)| h != d.sha256).unwrap_or(true))
            .map(|d| d.path.clone())
            .collect()
    }
}

/// `<file>.manifest.json` next to a single-file output.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_digest_matches_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        fs::write(&p, "abc").unwrap();
        let (h, n) = digest_path(&p).unwrap();
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(n, 3);
    }

    #[test]
    fn directory_digest_depends_on_names_and_contents() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a"), "1").unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub").join("b"), "2").unwrap();
        let (h1, n) = digest_path(dir.path()).unwrap();
        assert_eq!(n, 2);
        fs::write(dir.path().join("sub").join("b"), "3").unwrap();
        assert_ne!(digest_path(dir.path()).unwrap().0, h1);
    }

    #[test]
    fn manifest_round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.tsv");
        fs::write(&input, "u\tt\t1\n").unwrap();
        let mut m = RunManifest::start("factorize", &serde_json::json!({"rank": 8}), Some(3)).unwrap();
        m.add_input("triplets", &input).unwrap();
        let out = dir.path().join("out").join(MANIFEST_FILE);
        let m = m.finish(&out).unwrap();
        let back = RunManifest::read(&out).unwrap();
        assert_eq!(back, m);
        assert!(back.stale_inputs().is_empty());
        fs::write(&input, "changed").unwrap();
        assert_eq!(back.stale_inputs(), vec![input.display().to_string()]);
        assert!(RunManifest::start("x", &(), None).unwrap().add_input("missing", &dir.path().join("nope")).is_err());
    }

    #[test]
    fn sidecar_naming() {
        assert_eq!(sidecar_path(Path::new("/a/b/emb.tsv")), PathBuf::from("/a/b/emb.tsv.manifest.json"));
    }
}
