//! Mutable state threaded through one evaluation of a relation: the
//! current provider views, designator bindings, memoized outputs and the
//! follow-up sequences synthesized along the way.

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{DetectionRules, TargetConfig};
use crate::engine::provider::DataProvider;
use crate::error::EvalError;
use crate::exec::value::{designator_key, Value};
use crate::executor::SequenceExecutor;
use crate::model::{InputSequence, OutputSequence, Provenance};
use crate::pool::DataPool;

/// Inputs and outputs involved in a failing statement, captured before
/// bindings are cleared.
#[derive(Debug, Clone, Default)]
pub struct FailureContext {
    pub sources: Vec<InputSequence>,
    pub follow_ups: Vec<InputSequence>,
    pub outputs: Vec<OutputSequence>,
}

pub struct ExecutionContext<'a> {
    pub pool: &'a DataPool,
    pub provider: &'a DataProvider,
    pub executor: &'a dyn SequenceExecutor,
    pub rules: &'a DetectionRules,
    pub config: &'a TargetConfig,
    pub page_eq_threshold: f64,
    pub rng: ChaCha8Rng,
    /// EQUAL-bound designators, keyed like `Input(2)`.
    bindings: BTreeMap<String, Value>,
    /// Designators already served by the provider in this run.
    used: BTreeSet<String>,
    /// Source input sequences read from the provider in this run.
    sources_read: BTreeMap<String, InputSequence>,
    /// Outputs obtained in this run, keyed by input sequence id.
    output_cache: BTreeMap<String, OutputSequence>,
    follow_up_counter: usize,
    failure: Option<FailureContext>,
}

impl<'a> ExecutionContext<'a> {
    pub fn new(
        pool: &'a DataPool,
        provider: &'a DataProvider,
        executor: &'a dyn SequenceExecutor,
        rules: &'a DetectionRules,
        config: &'a TargetConfig,
        campaign_seed: u64,
    ) -> Self {
        // A RandomValue pool, when referenced, contributes per-view seed
        // material so each view draws a distinct but reproducible stream.
        let seed = provider.random_value_seed().unwrap_or(campaign_seed);
        ExecutionContext {
            pool,
            provider,
            executor,
            rules,
            config,
            page_eq_threshold: config.page_eq_threshold,
            rng: ChaCha8Rng::seed_from_u64(seed),
            bindings: BTreeMap::new(),
            used: BTreeSet::new(),
            sources_read: BTreeMap::new(),
            output_cache: BTreeMap::new(),
            follow_up_counter: 0,
            failure: None,
        }
    }

    pub fn next_follow_up_id(&mut self) -> String {
        self.follow_up_counter += 1;
        format!("fu-{}", self.follow_up_counter)
    }

    /// Reads the `index`th item of the current view of `ty` from the
    /// provider, marking the designator as used.
    pub fn read_source(&mut self, ty: &str, index: usize) -> Result<Value, EvalError> {
        let value = self.provider.view_item(ty, index)?;
        self.used.insert(designator_key(ty, index));
        if let Value::Input(seq) = &value {
            self.sources_read
                .entry(designator_key(ty, index))
                .or_insert_with(|| seq.clone());
        }
        Ok(value)
    }

    pub fn binding(&self, key: &str) -> Option<&Value> {
        self.bindings.get(key)
    }

    pub fn bind(&mut self, key: &str, value: Value) {
        self.bindings.insert(key.to_string(), value);
    }

    pub fn is_used(&self, key: &str) -> bool {
        self.used.contains(key)
    }

    /// Clears EQUAL bindings. Called after every expression statement;
    /// the used set and read sources persist for the whole run.
    pub fn clear_bindings(&mut self) {
        self.bindings.clear();
    }

    /// The output of executing `seq`, memoized per run. Sequences already
    /// executed at collection time reuse the recorded output; follow-ups
    /// always execute live, with a fresh session.
    pub fn output_of(&mut self, seq: &InputSequence) -> OutputSequence {
        if let Some(out) = self.output_cache.get(&seq.id) {
            return out.clone();
        }
        let out = match (seq.provenance, self.pool.output_of(&seq.id)) {
            (Provenance::FollowUp, _) | (_, None) => self.executor.execute(seq, true),
            (_, Some(recorded)) => recorded.clone(),
        };
        self.output_cache.insert(seq.id.clone(), out.clone());
        out
    }

    /// Snapshots the sequences behind the failing statement: bound
    /// follow-ups, every source read so far, and all outputs obtained.
    pub fn capture_failure(&mut self) {
        let mut follow_ups: Vec<InputSequence> = self
            .bindings
            .values()
            .filter_map(|v| match v {
                Value::Input(seq) if seq.provenance == Provenance::FollowUp => Some(seq.clone()),
                _ => None,
            })
            .collect();
        follow_ups.sort_by(|a, b| a.id.cmp(&b.id));
        follow_ups.dedup_by(|a, b| a.id == b.id);
        self.failure = Some(FailureContext {
            sources: self.sources_read.values().cloned().collect(),
            follow_ups,
            outputs: self.output_cache.values().cloned().collect(),
        });
    }

    pub fn take_failure(&mut self) -> Option<FailureContext> {
        self.failure.take()
    }

    pub fn bodies_similar(&self, a: &[u8], b: &[u8]) -> bool {
        crate::collector::distance::bodies_similar(a, b, self.page_eq_threshold)
    }

    pub fn pages_equal(&self, a: &crate::model::Page, b: &crate::model::Page) -> bool {
        crate::collector::distance::pages_equal(a, b, self.page_eq_threshold)
    }
}
