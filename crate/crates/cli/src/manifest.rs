//! Stage manifests: what produced an artifact, from what, under which
//! configuration.
//!
//! Every stage writes `<output>/<stage>/manifest.json`. The `lineage` map
//! names the run fingerprint of the stage itself and of every stage it was
//! derived from; a stage reading several upstream artifacts refuses to mix
//! two that disagree about a shared ancestor.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    /// External input files, by path, with their content hashes.
    pub inputs: BTreeMap<String, String>,
    /// Artifacts relative to the output directory.
    pub outputs: BTreeMap<String, String>,
    pub lineage: BTreeMap<String, String>,
    pub fingerprint: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a value's canonical JSON (object keys sorted).
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes");
    sha256_hex(
        serde_json::to_string(&v)
            .expect("value serializes")
            .as_bytes(),
    )
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

/// Content hash of a file, or of a directory's files with their relative
/// names.
pub fn hash_path(path: &Path) -> io::Result<String> {
    if !path.is_dir() {
        return Ok(sha256_hex(&fs::read(path)?));
    }
    let mut files = Vec::new();
    collect_files(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(sha256_hex(&fs::read(path.join(&f))?).as_bytes());
        h.update([0]);
    }
    Ok(hex::encode(h.finalize()))
}

fn manifest_path(output: &Path, stage: &str) -> PathBuf {
    output.join(stage).join(MANIFEST)
}

fn read_manifest(output: &Path, stage: &str) -> Option<Manifest> {
    let text = fs::read_to_string(manifest_path(output, stage)).ok()?;
    serde_json::from_str(&text).ok()
}

fn outputs_intact(output: &Path, m: &Manifest) -> io::Result<bool> {
    for (rel, hash) in &m.outputs {
        let p = output.join(rel);
        if !p.exists() || hash_path(&p)? != *hash {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Manifest of a finished upstream stage whose artifacts are still as it
/// wrote them.
pub fn load_upstream(output: &Path, stage: &str) -> Result<Manifest, CliError> {
    let m = read_manifest(output, stage).ok_or_else(|| CliError::missing(stage))?;
    if !outputs_intact(output, &m)? {
        return Err(CliError::Upstream(format!(
            "{stage} artifacts were modified after they were written; re-run `contrarag {stage}`"
        )));
    }
    Ok(m)
}

/// Union of upstream lineages; two artifacts derived from different runs of
/// the same stage are rejected.
pub fn merge_lineage(upstream: &[&Manifest]) -> Result<BTreeMap<String, String>, CliError> {
    let mut merged: BTreeMap<String, (String, &str)> = BTreeMap::new();
    for m in upstream {
        for (stage, fp) in &m.lineage {
            match merged.get(stage) {
                Some((seen, via)) if seen != fp => {
                    return Err(CliError::Upstream(format!(
                        "{} and {} artifacts come from different {stage} runs (config or inputs changed); \
                         re-run the stages after {stage}",
                        via, m.stage
                    )))
                }
                Some(_) => {}
                None => {
                    merged.insert(stage.clone(), (fp.clone(), &m.stage));
                }
            }
        }
    }
    Ok(merged.into_iter().map(|(k, (v, _))| (k, v)).collect())
}

/// Input contents without their paths, so the same files reached from
/// another working directory count as the same inputs.
fn input_digests(inputs: &BTreeMap<String, String>) -> Vec<&str> {
    let mut v: Vec<&str> = inputs.values().map(String::as_str).collect();
    v.sort_unstable();
    v
}

/// A stage about to run.
pub struct StageRun {
    pub stage: String,
    pub output: PathBuf,
    config_hash: String,
    inputs: BTreeMap<String, String>,
    upstream: BTreeMap<String, String>,
}

impl StageRun {
    pub fn new(
        output: &Path,
        stage: &str,
        config_hash: String,
        upstream: &[&Manifest],
        external: &[PathBuf],
    ) -> Result<Self, CliError> {
        let upstream = merge_lineage(upstream)?;
        let mut inputs = BTreeMap::new();
        for p in external {
            if !p.exists() {
                return Err(CliError::Config(format!(
                    "input {} does not exist",
                    p.display()
                )));
            }
            inputs.insert(p.display().to_string(), hash_path(p)?);
        }
        Ok(StageRun {
            stage: stage.to_string(),
            output: output.to_path_buf(),
            config_hash,
            inputs,
            upstream,
        })
    }

    pub fn dir(&self) -> PathBuf {
        self.output.join(&self.stage)
    }

    /// Whether an earlier run with the same configuration and inputs left
    /// intact artifacts.
    pub fn up_to_date(&self) -> io::Result<bool> {
        let Some(m) = read_manifest(&self.output, &self.stage) else {
            return Ok(false);
        };
        let mut lineage = m.lineage.clone();
        lineage.remove(&self.stage);
        Ok(m.config_hash == self.config_hash
            && input_digests(&m.inputs) == input_digests(&self.inputs)
            && lineage == self.upstream
            && outputs_intact(&self.output, &m)?)
    }

    /// Start from an empty stage directory.
    pub fn prepare(&self) -> io::Result<PathBuf> {
        let dir = self.dir();
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Prepare while keeping existing artifacts (resumable stages).
    pub fn prepare_keep(&self) -> io::Result<PathBuf> {
        let dir = self.dir();
        let _ = fs::remove_file(dir.join(MANIFEST));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Record the artifacts (paths inside the stage directory) and write
    /// the manifest.
    pub fn finish(self, artifacts: &[&str]) -> Result<Manifest, CliError> {
        let mut outputs = BTreeMap::new();
        for a in artifacts {
            let rel = format!("{}/{a}", self.stage);
            outputs.insert(rel.clone(), hash_path(&self.output.join(&rel))?);
        }
        let fingerprint = config_hash(&(
            &self.stage,
            &self.config_hash,
            input_digests(&self.inputs),
            &outputs,
            &self.upstream,
        ));
        let mut lineage = self.upstream;
        lineage.insert(self.stage.clone(), fingerprint.clone());
        let m = Manifest {
            stage: self.stage,
            config_hash: self.config_hash,
            inputs: self.inputs,
            outputs,
            lineage,
            fingerprint,
        };
        let mut json = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Other(e.into()))?;
        json.push(b'\n');
        fs::write(manifest_path(&self.output, &m.stage), json)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(out: &Path, stage: &str, cfg: &str, up: &[&Manifest], body: &str) -> Manifest {
        let r = StageRun::new(out, stage, config_hash(&cfg), up, &[]).unwrap();
        let dir = r.prepare().unwrap();
        fs::write(dir.join("a.txt"), body).unwrap();
        r.finish(&["a.txt"]).unwrap()
    }

    #[test]
    fn unchanged_stage_is_up_to_date() {
        let tmp = tempfile::tempdir().unwrap();
        let a = run(tmp.path(), "select", "x", &[], "1");
        let again = StageRun::new(tmp.path(), "select", config_hash(&"x"), &[], &[]).unwrap();
        assert!(again.up_to_date().unwrap());
        let changed = StageRun::new(tmp.path(), "select", config_hash(&"y"), &[], &[]).unwrap();
        assert!(!changed.up_to_date().unwrap());
        assert_eq!(a.lineage["select"], a.fingerprint);
    }

    #[test]
    fn tampered_outputs_are_detected() {
        let tmp = tempfile::tempdir().unwrap();
        run(tmp.path(), "select", "x", &[], "1");
        fs::write(tmp.path().join("select/a.txt"), "2").unwrap();
        assert!(matches!(
            load_upstream(tmp.path(), "select"),
            Err(CliError::Upstream(_))
        ));
        assert!(
            matches!(load_upstream(tmp.path(), "embed"), Err(CliError::Upstream(m)) if m.contains("embed artifacts missing"))
        );
    }

    #[test]
    fn mixed_lineage_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let s1 = run(tmp.path(), "select", "x", &[], "1");
        let rank = run(tmp.path(), "rank", "r", &[&s1], "r");
        let s2 = run(tmp.path(), "select", "y", &[], "2");
        let con = run(tmp.path(), "contradict", "c", &[&s2], "c");
        assert!(matches!(
            merge_lineage(&[&rank, &con]),
            Err(CliError::Upstream(_))
        ));
        let con1 = run(tmp.path(), "contradict", "c", &[&s1], "c");
        assert!(merge_lineage(&[&rank, &con1]).is_ok());
    }
}
