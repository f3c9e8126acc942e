//! The per-user state graph produced by crawling, and the derivation of
//! replayable input sequences from it.

use serde::{Deserialize, Serialize};

use crate::model::{Action, InputSequence, Page, Provenance};

/// One node: a distinct system state, represented by the page that first
/// revealed it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateNode {
    pub id: usize,
    pub page: Page,
}

/// One edge: the action that took the crawler from one state to another.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub action: Action,
}

/// The crawl result for one user. States are page-distinct under the
/// edit-distance criterion; edges are recorded in discovery order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateGraph {
    pub user: String,
    pub root: usize,
    pub states: Vec<StateNode>,
    pub edges: Vec<Edge>,
}

impl StateGraph {
    pub fn new(user: &str, root_page: Page) -> Self {
        StateGraph {
            user: user.to_string(),
            root: 0,
            states: vec![StateNode {
                id: 0,
                page: root_page,
            }],
            edges: Vec::new(),
        }
    }

    pub fn add_state(&mut self, page: Page) -> usize {
        let id = self.states.len();
        self.states.push(StateNode { id, page });
        id
    }

    pub fn add_edge(&mut self, from: usize, to: usize, action: Action) {
        self.edges.push(Edge { from, to, action });
    }

    /// Outgoing edge indices of `state`, in insertion order.
    fn outgoing(&self, state: usize) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.from == state)
            .map(|(i, _)| i)
            .collect()
    }

    /// Derives the source input sequences: every maximal root-to-leaf path,
    /// visiting children in edge insertion order and using each edge at
    /// most once per path. Sequence ids are `<user>-s<k>` in derivation
    /// order.
    pub fn derive_inputs(&self) -> Vec<InputSequence> {
        let mut sequences = Vec::new();
        let mut path: Vec<usize> = Vec::new();
        self.derive_from(self.root, &mut path, &mut sequences);
        sequences
            .into_iter()
            .enumerate()
            .map(|(k, actions)| {
                InputSequence::new(
                    &format!("{}-s{}", self.user, k + 1),
                    actions,
                    Provenance::Crawled,
                    None,
                )
                .expect("paths are nonempty by construction")
            })
            .collect()
    }

    fn derive_from(&self, state: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<Action>>) {
        let mut extended = false;
        for edge_idx in self.outgoing(state) {
            if path.contains(&edge_idx) {
                continue;
            }
            extended = true;
            path.push(edge_idx);
            self.derive_from(self.edges[edge_idx].to, path, out);
            path.pop();
        }
        if !extended && !path.is_empty() {
            out.push(path.iter().map(|&i| self.edges[i].action.clone()).collect());
        }
    }

    /// URLs (without query strings) of all edge actions.
    /// URLs this user can reach through the interface: every edge action
    /// plus every state's landing URL, queries stripped. State URLs cover
    /// pages entered by redirect and the crawl entry point itself, which
    /// never appears as an edge.
    pub fn reachable_urls(&self) -> std::collections::BTreeSet<String> {
        let mut urls: std::collections::BTreeSet<String> = self
            .edges
            .iter()
            .map(|e| e.action.normalized_url())
            .collect();
        for state in &self.states {
            if let Ok(mut url) = url::Url::parse(&state.page.final_url) {
                url.set_query(None);
                url.set_fragment(None);
                urls.insert(url.to_string());
            }
        }
        urls
    }
}
