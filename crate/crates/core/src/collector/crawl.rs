//! Breadth-first crawler. For each user it logs in through the GUI,
//! follows every same-host link and form once per state, and groups the
//! pages it lands on into states by body similarity. The resulting state
//! graphs yield the source input sequences of the data pool.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use url::Url;

use crate::collector::distance::bodies_similar;
use crate::collector::graph::StateGraph;
use crate::collector::html;
use crate::config::TargetConfig;
use crate::error::CrawlError;
use crate::executor::{HttpExecutor, SequenceExecutor};
use crate::model::{Action, InputSequence, Page, Provenance};
use crate::pool::DataPool;

/// Crawls the target as `username` with a fresh HTTP client.
pub fn crawl(config: &TargetConfig, username: &str) -> Result<StateGraph, CrawlError> {
    let executor = HttpExecutor::new(config.clone())?;
    crawl_with(config, &executor, username)
}

fn probe(
    executor: &dyn SequenceExecutor,
    n: usize,
    actions: Vec<Action>,
) -> Result<Option<Page>, CrawlError> {
    let seq = InputSequence::new(&format!("probe-{n}"), actions, Provenance::Crawled, None)?;
    let out = executor.execute(&seq, true);
    Ok(out.pages.last().cloned())
}

/// Crawls with a caller-provided executor. The graph is returned as-is
/// when a crawl limit cuts exploration short; only an unreachable root is
/// an error.
pub fn crawl_with(
    config: &TargetConfig,
    executor: &dyn SequenceExecutor,
    username: &str,
) -> Result<StateGraph, CrawlError> {
    let user = config
        .users()
        .into_iter()
        .find(|u| u.username == username)
        .ok_or_else(|| CrawlError::UnknownUser(username.to_string()))?;
    let rules = config.rules()?;

    let root_action = Action::request("GET", &config.base_url)?;
    let root_page = probe(executor, 0, vec![root_action])?
        .filter(|p| p.status != 0)
        .ok_or_else(|| CrawlError::RootUnreachable(config.base_url.clone()))?;

    let mut graph = StateGraph::new(username, root_page);
    // Discovery path (edge actions only) per state, indexed like states.
    let mut paths: Vec<Vec<Action>> = vec![Vec::new()];
    let mut queue: VecDeque<usize> = VecDeque::from([graph.root]);
    let started = Instant::now();
    let budget = Duration::from_secs(config.crawl.budget_secs);
    let mut probes = 0;

    while let Some(state) = queue.pop_front() {
        let page = graph.states[state].page.clone();
        let Ok(base) = Url::parse(&page.final_url) else { continue };
        let mut candidates =
            html::extract_actions(&page.body_text(), &base, &user, &rules, &config.forms);
        candidates.truncate(config.crawl.max_actions_per_state);

        for candidate in candidates {
            if started.elapsed() >= budget {
                return Ok(graph);
            }
            if graph
                .edges
                .iter()
                .any(|e| e.from == state && e.action == candidate)
            {
                continue;
            }
            probes += 1;
            let mut actions = paths[state].clone();
            actions.push(candidate.clone());
            let Some(landed) = probe(executor, probes, actions.clone())? else { continue };
            if landed.status == 0 {
                continue;
            }
            let to = match find_state(&graph, &landed, config.state_threshold) {
                Some(id) => id,
                None => {
                    if graph.states.len() >= config.crawl.max_states {
                        continue;
                    }
                    let id = graph.add_state(landed);
                    paths.push(actions);
                    queue.push_back(id);
                    id
                }
            };
            graph.add_edge(state, to, candidate);
        }
    }
    Ok(graph)
}

/// First state (in insertion order) whose page body is similar to `page`.
fn find_state(graph: &StateGraph, page: &Page, threshold: f64) -> Option<usize> {
    graph
        .states
        .iter()
        .find(|s| bodies_similar(&s.page.body, &page.body, threshold))
        .map(|s| s.id)
}

/// Crawls every configured user and executes the derived sequences once,
/// producing the complete data pool for a target.
pub fn collect(config: &TargetConfig) -> Result<DataPool, CrawlError> {
    let executor = HttpExecutor::new(config.clone())?;
    collect_with(config, &executor)
}

pub fn collect_with(
    config: &TargetConfig,
    executor: &dyn SequenceExecutor,
) -> Result<DataPool, CrawlError> {
    let mut pool = DataPool::default();
    pool.users = config.users();
    for user in pool.users.clone() {
        let graph = crawl_with(config, executor, &user.username)?;
        for seq in graph.derive_inputs() {
            let output = executor.execute(&seq, true);
            pool.record(&user.username, seq, output);
        }
        pool.graphs.insert(user.username.clone(), graph);
    }
    Ok(pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{serve, SiteConfig};

    fn fixture_config() -> (crate::fixture::FixtureHandle, TargetConfig) {
        let handle = serve(SiteConfig::patched(), 0, 0).expect("fixture binds");
        let mut config =
            TargetConfig::for_tests(&format!("https://127.0.0.1:{}/", handle.secure_port));
        config.insecure_port = handle.insecure_port;
        config.secure_port = handle.secure_port;
        (handle, config)
    }

    fn urls_of(graph: &StateGraph) -> Vec<String> {
        graph
            .edges
            .iter()
            .map(|e| {
                format!(
                    "{} {}",
                    e.action.method,
                    e.action.url.path()
                )
            })
            .collect()
    }

    #[test]
    fn tester_crawl_finds_the_expected_states_and_edges() {
        let (_handle, config) = fixture_config();
        let graph = crawl(&config, "tester").unwrap();

        assert_eq!(graph.states.len(), 7, "states: {:?}", urls_of(&graph));
        assert_eq!(graph.edges.len(), 7, "edges: {:?}", urls_of(&graph));

        let edges = urls_of(&graph);
        for expected in [
            "POST /login",
            "GET /signup",
            "GET /stats",
            "GET /dashboard/tester",
            "GET /download",
            "POST /signup",
        ] {
            assert!(
                edges.iter().any(|e| e == expected),
                "missing edge {expected} in {edges:?}"
            );
        }
        assert!(
            !edges.iter().any(|e| e.contains("startSlave")),
            "tester must not see the admin agent page"
        );

        let sequences = graph.derive_inputs();
        assert_eq!(sequences.len(), 5);
        assert!(sequences.iter().all(|s| s.id.starts_with("tester-s")));
        // The full signup flow behind a login is among the sequences.
        assert!(sequences.iter().any(|s| {
            s.actions.len() == 3
                && s.actions[0].is_login
                && s.actions[1].url.path() == "/signup"
                && s.actions[2].is_signup
        }));
    }

    #[test]
    fn admin_crawl_reaches_the_agent_and_manual_pages() {
        let (_handle, config) = fixture_config();
        let graph = crawl(&config, "admin").unwrap();
        assert_eq!(graph.states.len(), 9, "states: {:?}", urls_of(&graph));
        let edges = urls_of(&graph);
        assert!(edges.iter().any(|e| e == "GET /admin/startSlave"), "{edges:?}");
        let sequences = graph.derive_inputs();
        assert_eq!(sequences.len(), 7);
    }

    #[test]
    fn collect_builds_the_full_pool() {
        let (_handle, config) = fixture_config();
        let pool = collect(&config).unwrap();
        assert_eq!(pool.users.len(), 3);
        assert_eq!(pool.graphs.len(), 3);
        assert_eq!(pool.sequences.len(), 17);
        assert!(pool
            .sequences
            .iter()
            .all(|s| pool.output_of(&s.id).is_some()));
        // Reachability is per user: only the admin navigates to the
        // agent-control page.
        let admin = pool.reachable_urls("admin");
        let tester = pool.reachable_urls("tester");
        assert!(admin.iter().any(|u| u.ends_with("/admin/startSlave")));
        assert!(!tester.iter().any(|u| u.ends_with("/admin/startSlave")));
        assert!(tester.iter().any(|u| u.ends_with("/download")));
        // Sessions were observed for each user.
        let sessions = pool.sessions();
        assert!(sessions.iter().any(|s| s.id == "u-tester"));
        assert!(sessions.iter().any(|s| s.owner.as_deref() == Some("admin")));
    }

    #[test]
    fn unknown_user_and_unreachable_root_are_reported() {
        let (_handle, mut config) = fixture_config();
        assert!(matches!(
            crawl(&config, "nobody"),
            Err(CrawlError::UnknownUser(_))
        ));
        config.base_url = "https://127.0.0.1:1/".to_string();
        config.secure_port = 1;
        config.connect_timeout_secs = 1;
        assert!(matches!(
            crawl(&config, "tester"),
            Err(CrawlError::RootUnreachable(_))
        ));
    }

    #[test]
    fn state_limit_caps_exploration() {
        let (_handle, mut config) = fixture_config();
        config.crawl.max_states = 3;
        let graph = crawl(&config, "tester").unwrap();
        assert_eq!(graph.states.len(), 3);
        assert!(!graph.derive_inputs().is_empty());
    }
}
