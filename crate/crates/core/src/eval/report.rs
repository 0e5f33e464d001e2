use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EvalError;

pub const MANIFEST_FILE: &str = "manifest.sha256";

/// Named text artifacts; file names are relative to the report directory.
pub type Artifacts = BTreeMap<String, String>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// File name to sha256 hex digest.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        self.files.iter().map(|(name, sum)| format!("{sum}  {name}\n")).collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact under `dir` and a manifest listing each file with
/// its checksum. Output depends only on `artifacts`.
pub fn emit_report(dir: &Path, artifacts: &Artifacts) -> Result<Manifest, EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::Unwritable {
        path: dir.display().to_string(),
        source: e,
    })?;
    let mut manifest = Manifest::default();
    for (name, content) in artifacts {
        if name == MANIFEST_FILE || name.contains("..") || Path::new(name).is_absolute() {
            return Err(EvalError::InvalidArtifact(name.clone()));
        }
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| EvalError::Unwritable {
                path: parent.display().to_string(),
                source: e,
            })?;
        }
        fs::write(&path, content).map_err(|e| EvalError::Unwritable {
            path: path.display().to_string(),
            source: e,
        })?;
        manifest.files.insert(name.clone(), sha256_hex(content.as_bytes()));
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_text()).map_err(|e| EvalError::Unwritable {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rerun_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let arts = Artifacts::from([
            ("curve.csv".to_owned(), "x,y\n1,2\n".to_owned()),
            ("sub/summary.txt".to_owned(), "ok\n".to_owned()),
        ]);
        let m1 = emit_report(a.path(), &arts).unwrap();
        let m2 = emit_report(b.path(), &arts).unwrap();
        assert_eq!(m1, m2);
        for f in ["curve.csv", "sub/summary.txt", MANIFEST_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        assert_eq!(m1.files.len(), 2);
    }

    #[test]
    fn unwritable_destination() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let arts = Artifacts::from([("a.csv".to_owned(), String::new())]);
        assert!(matches!(emit_report(&file, &arts), Err(EvalError::Unwritable { .. })));
        let bad = Artifacts::from([("../a.csv".to_owned(), String::new())]);
        assert!(matches!(emit_report(dir.path(), &bad), Err(EvalError::InvalidArtifact(_))));
    }
}
