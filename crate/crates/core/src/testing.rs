//! Shared unit-test helpers: an in-memory executor and a harness wiring
//! pool, provider and context together for single-run evaluations.

use std::cell::RefCell;

use crate::config::{DetectionRules, TargetConfig};
use crate::engine::provider::DataProvider;
use crate::error::EvalError;
use crate::exec::context::ExecutionContext;
use crate::exec::interp::CompiledRelation;
use crate::executor::SequenceExecutor;
use crate::model::{Action, InputSequence, OutputSequence, Page, Provenance, User};
use crate::pool::DataPool;

/// Executor that fabricates one 200 page per action, with the method and
/// URL as the body, and counts how many sequences it executed.
#[derive(Default)]
pub(crate) struct StubExecutor {
    calls: RefCell<Vec<String>>,
}

impl StubExecutor {
    pub(crate) fn calls(&self) -> usize {
        self.calls.borrow().len()
    }
}

impl SequenceExecutor for StubExecutor {
    fn execute(&self, seq: &InputSequence, _fresh_session: bool) -> OutputSequence {
        self.calls.borrow_mut().push(seq.id.clone());
        let pages = seq
            .actions
            .iter()
            .map(|a| {
                let body = format!("{} {}", a.method, a.url).into_bytes();
                Page::new(body, 200, "stub-sid", "text/html", a.url.as_str())
                    .expect("valid stub page")
            })
            .collect();
        OutputSequence {
            input: seq.id.clone(),
            pages,
        }
    }
}

pub(crate) fn seq(id: &str, urls: &[&str]) -> InputSequence {
    let actions = urls
        .iter()
        .map(|u| Action::request("GET", u).expect("valid test url"))
        .collect();
    InputSequence::new(id, actions, Provenance::Crawled, None).expect("non-empty sequence")
}

pub(crate) fn compile_src(src: &str) -> CompiledRelation {
    let relations = crate::dsl::parser::parse(src).expect("test source parses");
    CompiledRelation::compile(relations.into_iter().next().expect("one relation"))
}

pub(crate) struct Harness {
    pub pool: DataPool,
    pub config: TargetConfig,
    pub rules: DetectionRules,
}

impl Harness {
    pub(crate) fn new(seqs: Vec<InputSequence>) -> Self {
        let mut pool = DataPool::default();
        pool.users = vec![
            User::new("u1", "pw1", "role"),
            User::new("u2", "pw2", "role"),
        ];
        pool.sequences = seqs;
        let config = TargetConfig::for_tests("https://h.test/");
        let rules = config.rules().expect("default rules compile");
        Harness {
            pool,
            config,
            rules,
        }
    }

    pub(crate) fn run(&self, rel: &CompiledRelation) -> Result<bool, EvalError> {
        let exec = StubExecutor::default();
        self.run_with(rel, &exec)
    }

    pub(crate) fn run_with(
        &self,
        rel: &CompiledRelation,
        exec: &StubExecutor,
    ) -> Result<bool, EvalError> {
        let provider =
            DataProvider::build(&self.pool, &self.config, &rel.referenced_input_types, 42)
                .expect("provider builds");
        let mut ctx =
            ExecutionContext::new(&self.pool, &provider, exec, &self.rules, &self.config, 42);
        rel.run(&mut ctx)
    }
}
