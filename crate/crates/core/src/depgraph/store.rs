//! Directory of converged outcomes, one JSON file per outcome, named by a
//! digest of the choices that produced it.

use crate::fib::{ConvergedRun, ForwardingGraph};
use crate::netmodel::{LinkId, NodeId};
use crate::rpvp::Choice;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("outcome store I/O at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt outcome {path}: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
    #[error("no outcomes stored for group {0}")]
    MissingGroup(usize),
}

/// One nondeterministic pick: which node stepped in which run and what it took.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pick {
    /// Index into the group's run list.
    pub run: usize,
    pub node: NodeId,
    pub choice: Choice,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChoiceLog {
    /// Sorted failed links.
    pub failures: Vec<LinkId>,
    /// Record ids of the dependency outcomes this run was combined with.
    pub dependencies: Vec<String>,
    pub picks: Vec<Pick>,
}

impl ChoiceLog {
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("choice log serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergedOutcome {
    pub scc: usize,
    pub choices: ChoiceLog,
    /// Converged runs per class.
    pub runs: BTreeMap<usize, Vec<ConvergedRun>>,
    pub forwarding: BTreeMap<usize, ForwardingGraph>,
}

impl ConvergedOutcome {
    pub fn id(&self) -> String {
        self.choices.digest()
    }
}

#[derive(Debug, Clone)]
pub struct OutcomeStore {
    root: PathBuf,
}

impl OutcomeStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutcomeStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
        move |source| StoreError::Io { path: path.to_path_buf(), source }
    }

    /// Creates the directory for a group so dependents can tell an empty
    /// result from a group that never ran.
    pub fn open_group(&self, scc: usize) -> Result<PathBuf, StoreError> {
        let dir = self.root.join(scc.to_string());
        std::fs::create_dir_all(&dir).map_err(Self::io(&dir))?;
        Ok(dir)
    }

    /// Writes the outcome atomically; storing the same choices twice keeps one file.
    pub fn store(&self, outcome: &ConvergedOutcome) -> Result<String, StoreError> {
        let dir = self.open_group(outcome.scc)?;
        let id = outcome.id();
        let path = dir.join(format!("{id}.json"));
        if path.exists() {
            return Ok(id);
        }
        let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(Self::io(&dir))?;
        serde_json::to_writer(&mut tmp, outcome)
            .map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
        tmp.flush().map_err(Self::io(&path))?;
        tmp.persist(&path).map_err(|e| StoreError::Io { path: path.clone(), source: e.error })?;
        Ok(id)
    }

    /// Outcomes of group `scc` recorded under exactly `failures`, ordered by id.
    pub fn load_matching(
        &self,
        scc: usize,
        failures: &[LinkId],
    ) -> Result<Vec<ConvergedOutcome>, StoreError> {
        let dir = self.root.join(scc.to_string());
        if !dir.is_dir() {
            return Err(StoreError::MissingGroup(scc));
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(Self::io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map_or(false, |x| x == "json"))
            .collect();
        paths.sort();
        let mut out = Vec::new();
        for p in paths {
            let text = std::fs::read(&p).map_err(Self::io(&p))?;
            let o: ConvergedOutcome = serde_json::from_slice(&text)
                .map_err(|source| StoreError::Corrupt { path: p.clone(), source })?;
            if o.choices.failures == failures {
                out.push(o);
            }
        }
        Ok(out)
    }
}

pub fn store_outcome(outcome: &ConvergedOutcome, root: &Path) -> Result<String, StoreError> {
    OutcomeStore::new(root).store(outcome)
}

pub fn load_matching_outcomes(
    scc: usize,
    failures: &[LinkId],
    root: &Path,
) -> Result<Vec<ConvergedOutcome>, StoreError> {
    OutcomeStore::new(root).load_matching(scc, failures)
}
