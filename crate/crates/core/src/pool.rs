//! The persisted data pool: users, per-user state graphs, derived input
//! sequences with their owners, and the outputs recorded for them.
//!
//! On disk a pool is a directory of JSON files plus a copy of the target
//! configuration, so a `test` run needs nothing but the pool directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collector::graph::StateGraph;
use crate::error::PoolError;
use crate::model::{InputSequence, OutputSequence, Page, User};

pub const USERS_FILE: &str = "users.json";
pub const GRAPHS_FILE: &str = "graphs.json";
pub const INPUTS_FILE: &str = "inputs.json";
pub const OUTPUTS_FILE: &str = "outputs.json";
pub const TARGET_FILE: &str = "target.toml";

/// Everything collected from one target.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DataPool {
    pub users: Vec<User>,
    /// State graph per username.
    pub graphs: BTreeMap<String, StateGraph>,
    /// All derived or ingested input sequences, in collection order
    /// (users in configuration order, then derivation order).
    pub sequences: Vec<InputSequence>,
    /// Sequence id → username it was collected for.
    pub owners: BTreeMap<String, String>,
    /// Sequence id → the output recorded when the sequence was collected.
    pub outputs: BTreeMap<String, OutputSequence>,
}

#[derive(Serialize, Deserialize)]
struct InputsFile {
    sequences: Vec<InputSequence>,
    owners: BTreeMap<String, String>,
}

impl DataPool {
    /// Adds one collected sequence with its recorded output.
    pub fn record(&mut self, user: &str, seq: InputSequence, output: OutputSequence) {
        self.owners.insert(seq.id.clone(), user.to_string());
        self.outputs.insert(seq.id.clone(), output);
        self.sequences.push(seq);
    }

    pub fn user(&self, username: &str) -> Option<&User> {
        self.users.iter().find(|u| u.username == username)
    }

    /// URLs (query stripped) on the edges of `username`'s graph.
    pub fn reachable_urls(&self, username: &str) -> BTreeSet<String> {
        self.graphs
            .get(username)
            .map(|g| g.reachable_urls())
            .unwrap_or_default()
    }

    /// Every page ever recorded for `username`'s sequences.
    pub fn pages_for(&self, username: &str) -> Vec<&Page> {
        self.sequences
            .iter()
            .filter(|s| self.owners.get(&s.id).map(String::as_str) == Some(username))
            .filter_map(|s| self.outputs.get(&s.id))
            .flat_map(|o| o.pages.iter())
            .collect()
    }

    /// The recorded output for a sequence, if any.
    pub fn output_of(&self, seq_id: &str) -> Option<&OutputSequence> {
        self.outputs.get(seq_id)
    }

    /// Distinct non-empty session ids observed in recorded outputs, each
    /// with the owning user, in first-observation order.
    pub fn sessions(&self) -> Vec<crate::model::Session> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for seq in &self.sequences {
            let Some(output) = self.outputs.get(&seq.id) else {
                continue;
            };
            for page in &output.pages {
                if page.session_id.is_empty() || !seen.insert(page.session_id.clone()) {
                    continue;
                }
                out.push(crate::model::Session {
                    id: page.session_id.clone(),
                    owner: self.owners.get(&seq.id).cloned(),
                });
            }
        }
        out
    }

    /// Writes the pool into `dir`, which must be empty or absent. The
    /// target configuration text is stored alongside so the pool is
    /// self-contained.
    pub fn save(&self, dir: &Path, target_toml: &str) -> Result<(), PoolError> {
        if dir.exists() {
            let occupied = fs::read_dir(dir)?.next().is_some();
            if occupied {
                return Err(PoolError::NotEmpty(dir.display().to_string()));
            }
        } else {
            fs::create_dir_all(dir)?;
        }
        fs::write(dir.join(USERS_FILE), serde_json::to_vec_pretty(&self.users)?)?;
        fs::write(
            dir.join(GRAPHS_FILE),
            serde_json::to_vec_pretty(&self.graphs)?,
        )?;
        let inputs = InputsFile {
            sequences: self.sequences.clone(),
            owners: self.owners.clone(),
        };
        fs::write(dir.join(INPUTS_FILE), serde_json::to_vec_pretty(&inputs)?)?;
        fs::write(
            dir.join(OUTPUTS_FILE),
            serde_json::to_vec_pretty(&self.outputs)?,
        )?;
        fs::write(dir.join(TARGET_FILE), target_toml)?;
        Ok(())
    }

    /// Loads a pool saved by [`DataPool::save`].
    pub fn load(dir: &Path) -> Result<Self, PoolError> {
        let users = serde_json::from_slice(&fs::read(dir.join(USERS_FILE))?)?;
        let graphs = serde_json::from_slice(&fs::read(dir.join(GRAPHS_FILE))?)?;
        let inputs: InputsFile = serde_json::from_slice(&fs::read(dir.join(INPUTS_FILE))?)?;
        let outputs = serde_json::from_slice(&fs::read(dir.join(OUTPUTS_FILE))?)?;
        Ok(DataPool {
            users,
            graphs,
            sequences: inputs.sequences,
            owners: inputs.owners,
            outputs,
        })
    }

    /// Reads the stored target configuration text.
    pub fn load_target_toml(dir: &Path) -> Result<String, PoolError> {
        Ok(fs::read_to_string(dir.join(TARGET_FILE))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Action;

    fn sample_pool() -> DataPool {
        let mut pool = DataPool {
            users: vec![User::new("tester", "pw", "tester")],
            ..DataPool::default()
        };
        let mut graph = StateGraph::new(
            "tester",
            Page::new(b"root page".to_vec(), 200, "", "text/html", "http://t/").unwrap(),
        );
        let s1 = graph.add_state(
            Page::new(b"inner page".to_vec(), 200, "u-tester", "text/html", "http://t/a").unwrap(),
        );
        graph.add_edge(0, s1, Action::request("GET", "http://t/a?x=1").unwrap());
        pool.graphs.insert("tester".to_string(), graph.clone());

        for seq in graph.derive_inputs() {
            let output = OutputSequence {
                input: seq.id.clone(),
                pages: vec![Page::new(
                    b"inner page".to_vec(),
                    200,
                    "u-tester",
                    "text/html",
                    "http://t/a",
                )
                .unwrap()],
            };
            pool.record("tester", seq, output);
        }
        pool
    }

    #[test]
    fn save_load_roundtrip() {
        let pool = sample_pool();
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("pool");
        pool.save(&target, "base_url = \"http://t/\"\n").unwrap();

        let loaded = DataPool::load(&target).unwrap();
        assert_eq!(loaded.users.len(), 1);
        assert_eq!(loaded.sequences.len(), pool.sequences.len());
        assert_eq!(loaded.owners, pool.owners);
        assert_eq!(
            loaded.outputs.keys().collect::<Vec<_>>(),
            pool.outputs.keys().collect::<Vec<_>>()
        );
        assert_eq!(
            DataPool::load_target_toml(&target).unwrap(),
            "base_url = \"http://t/\"\n"
        );
        assert!(loaded.reachable_urls("tester").contains("http://t/a"));
    }

    #[test]
    fn save_refuses_occupied_directory() {
        let pool = sample_pool();
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("stray.txt"), "x").unwrap();
        let err = pool.save(dir.path(), "").unwrap_err();
        assert!(matches!(err, PoolError::NotEmpty(_)));
    }

    #[test]
    fn sessions_deduplicate_and_keep_owner() {
        let pool = sample_pool();
        let sessions = pool.sessions();
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].id, "u-tester");
        assert_eq!(sessions[0].owner.as_deref(), Some("tester"));
    }

    #[test]
    fn pages_for_flattens_recorded_outputs() {
        let pool = sample_pool();
        assert_eq!(pool.pages_for("tester").len(), 1);
        assert!(pool.pages_for("devel").is_empty());
    }
}
