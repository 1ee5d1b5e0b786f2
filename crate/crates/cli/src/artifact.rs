//! Reading inputs, staging outputs and writing run manifests.
//!
//! Outputs are rendered fully in memory, written to temporary files in the
//! destination directory and renamed into place only once every output of
//! the run has been staged, so a failed run leaves no partial artifact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use newevent_core::corpus::{load_gold, GoldIndex};
use newevent_core::extract::CandidateIndex;
use newevent_core::{jsonl, Corpus, EventCandidate, GoldRecord, Narrative};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Parsed configuration, defaults included.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Inputs read and outputs staged by one command run.
#[derive(Default)]
pub struct Run {
    inputs: Vec<FileDigest>,
    outputs: Vec<(String, PathBuf, Vec<u8>)>,
}

impl Run {
    /// Reads an input file and records its digest. Unreadable paths are
    /// usage errors.
    pub fn read(&mut self, role: &str, path: &Path) -> Result<String, Failure> {
        let bytes = std::fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(FileDigest { role: role.into(), path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        String::from_utf8(bytes).map_err(|_| Failure::Integrity(format!("{} is not UTF-8", path.display())))
    }

    pub fn records<T: DeserializeOwned>(&mut self, role: &str, path: &Path) -> Result<Vec<T>, Failure> {
        let text = self.read(role, path)?;
        jsonl::parse_records(&text).map_err(|e| Failure::Integrity(format!("{}: {e}", path.display())))
    }

    pub fn corpus(&mut self, path: &Path) -> Result<Corpus, Failure> {
        let narratives: Vec<Narrative> = self.records("corpus", path)?;
        Corpus::new(narratives).map_err(|e| Failure::Integrity(format!("{}: {e}", path.display())))
    }

    /// Loads candidate lists and checks that each one belongs to a corpus
    /// sentence and has unique ids.
    pub fn candidates(&mut self, path: &Path, corpus: &Corpus) -> Result<CandidateIndex, Failure> {
        let records: Vec<EventCandidate> = self.records("candidates", path)?;
        let mut seen = std::collections::BTreeSet::new();
        for candidate in &records {
            let integrity =
                |m: String| Failure::Integrity(format!("{}: candidate {}: {m}", path.display(), candidate.id));
            let sentence = corpus
                .sentence(&candidate.key())
                .ok_or_else(|| integrity(format!("sentence {} is not in the corpus", candidate.key())))?;
            if candidate.all_tokens().iter().any(|&t| t == 0 || t > sentence.len()) {
                return Err(integrity("token index outside the sentence".into()));
            }
            if !seen.insert(candidate.id.clone()) {
                return Err(integrity("duplicate id".into()));
            }
        }
        Ok(CandidateIndex::from_candidates(records))
    }

    pub fn gold(&mut self, role: &str, path: &Path, corpus: &Corpus) -> Result<GoldIndex, Failure> {
        let records: Vec<GoldRecord> = self.records(role, path)?;
        load_gold(records, corpus).map_err(|e| Failure::Integrity(format!("{}: {e}", path.display())))
    }

    pub fn stage_records<'a, T: Serialize + 'a>(
        &mut self,
        role: &str,
        path: &Path,
        records: impl IntoIterator<Item = &'a T>,
    ) -> Result<(), Failure> {
        let text = jsonl::to_string(records).map_err(|e| Failure::Integrity(e.to_string()))?;
        self.outputs.push((role.into(), path.to_path_buf(), text.into_bytes()));
        Ok(())
    }

    /// Writes every staged output and then the manifest next to the first
    /// output.
    pub fn commit(self, command: &str, args: &[String], config: &impl Serialize) -> Result<Manifest, Failure> {
        let manifest = Manifest {
            tool: env!("CARGO_BIN_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args: args.to_vec(),
            config: serde_json::to_value(config).map_err(|e| Failure::Integrity(e.to_string()))?,
            inputs: self.inputs,
            outputs: self
                .outputs
                .iter()
                .map(|(role, path, bytes)| FileDigest {
                    role: role.clone(),
                    path: path.clone(),
                    sha256: sha256_hex(bytes),
                })
                .collect(),
        };
        let Some((_, primary, _)) = self.outputs.first() else {
            return Ok(manifest);
        };
        let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| Failure::Integrity(e.to_string()))?;
        manifest_bytes.push(b'\n');
        let mut files: Vec<(&Path, &[u8])> = self.outputs.iter().map(|(_, p, b)| (p.as_path(), b.as_slice())).collect();
        let manifest_file = manifest_path(primary);
        files.push((&manifest_file, &manifest_bytes));
        write_all_atomic(&files)?;
        Ok(manifest)
    }
}

fn write_all_atomic(files: &[(&Path, &[u8])]) -> Result<(), Failure> {
    let io = |path: &Path, e: std::io::Error| Failure::Usage(format!("cannot write {}: {e}", path.display()));
    let mut staged = Vec::new();
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(path, e))?;
        tmp.write_all(bytes).and_then(|_| tmp.as_file().sync_all()).map_err(|e| io(path, e))?;
        staged.push((tmp, *path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| io(path, e.error))?;
    }
    Ok(())
}

/// Map from role to digest, for comparing two runs.
pub fn digests_by_role(digests: &[FileDigest]) -> BTreeMap<&str, &str> {
    digests.iter().map(|d| (d.role.as_str(), d.sha256.as_str())).collect()
}
