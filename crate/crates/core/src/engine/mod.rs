//! The testing engine: drives a compiled relation across every
//! combination of data-pool views, counts violations and deduplicates
//! them by request fingerprints.

pub mod provider;
pub mod report;

use std::collections::BTreeSet;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crate::config::{DetectionRules, TargetConfig};
use crate::error::EngineError;
use crate::exec::context::{ExecutionContext, FailureContext};
use crate::exec::interp::CompiledRelation;
use crate::executor::{record_requests, SequenceExecutor};
use crate::model::{FailureRecord, RequestFingerprint};
use crate::pool::DataPool;
use provider::DataProvider;
use report::{CampaignReport, RelationReport};

#[derive(Debug, Clone)]
pub struct EngineOptions {
    pub budget: Duration,
    pub seed: u64,
    /// Overrides the config threshold when set.
    pub page_eq_threshold: Option<f64>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            budget: Duration::from_secs(24 * 60 * 60),
            seed: 42,
            page_eq_threshold: None,
        }
    }
}

/// The result of driving one relation over all view combinations.
#[derive(Debug, Clone)]
pub struct RelationOutcome {
    pub name: String,
    pub runs: u64,
    pub raw_failures: u64,
    pub reported: Vec<FailureRecord>,
    pub truncated: bool,
}

impl RelationOutcome {
    pub fn into_report(self) -> RelationReport {
        RelationReport {
            name: self.name,
            runs: self.runs,
            raw_failures: self.raw_failures,
            reported_failures: self.reported.len() as u64,
            truncated: self.truncated,
            failures: self.reported,
        }
    }
}

enum Flow {
    Continue,
    Stop,
}

struct RelationRun<'a> {
    relation: &'a CompiledRelation,
    pool: &'a DataPool,
    config: &'a TargetConfig,
    rules: &'a DetectionRules,
    executor: &'a dyn SequenceExecutor,
    provider: DataProvider,
    seed: u64,
    page_eq_threshold: f64,
    deadline: Instant,
    runs: u64,
    raw_failures: u64,
    truncated: bool,
    /// Fingerprints of every reported failure so far, as full sets.
    seen: BTreeSet<RequestFingerprint>,
    reported: Vec<FailureRecord>,
}

impl RelationRun<'_> {
    /// Depth-first view iteration: advance the pool of `types[i]` through
    /// all of its views, running once per innermost advance, then restore
    /// it so the enclosing pool sees a fresh iteration.
    fn iterate(&mut self, types: &[String], i: usize) -> Result<Flow, EngineError> {
        while self.provider.has_more_views(&types[i])? {
            self.provider.next_view(&types[i])?;
            let flow = if i + 1 < types.len() {
                self.iterate(types, i + 1)?
            } else {
                self.run_once()?
            };
            if matches!(flow, Flow::Stop) {
                return Ok(Flow::Stop);
            }
        }
        self.provider.reset_views(&types[i])?;
        Ok(Flow::Continue)
    }

    fn run_once(&mut self) -> Result<Flow, EngineError> {
        if Instant::now() >= self.deadline {
            self.truncated = true;
            return Ok(Flow::Stop);
        }
        self.runs += 1;
        let verdict;
        let failure;
        {
            let mut ctx = ExecutionContext::new(
                self.pool,
                &self.provider,
                self.executor,
                self.rules,
                self.config,
                self.seed,
            );
            ctx.page_eq_threshold = self.page_eq_threshold;
            verdict = self
                .relation
                .run(&mut ctx)
                .map_err(|source| EngineError::Eval {
                    relation: self.relation.qualified_name.clone(),
                    source,
                })?;
            failure = ctx.take_failure();
        }
        if !verdict {
            self.raw_failures += 1;
            self.add_failure(failure.unwrap_or_default());
        }
        Ok(Flow::Continue)
    }

    /// Deduplicates by request fingerprints. A failure identifies itself
    /// by the requests of its bound follow-ups, falling back to the
    /// sources it read; it is reported only when it contributes at least
    /// one request no previously reported failure contained.
    fn add_failure(&mut self, failure: FailureContext) {
        let fingerprints_of = |seqs: &[crate::model::InputSequence]| {
            seqs.iter()
                .flat_map(record_requests)
                .collect::<BTreeSet<RequestFingerprint>>()
        };
        let mut fingerprints = fingerprints_of(&failure.follow_ups);
        if fingerprints.is_empty() {
            fingerprints = fingerprints_of(&failure.sources);
        }
        let novel: BTreeSet<RequestFingerprint> =
            fingerprints.difference(&self.seen).cloned().collect();
        if novel.is_empty() {
            return;
        }
        self.seen.extend(fingerprints);
        if let Some(record) = FailureRecord::new(
            &self.relation.qualified_name,
            failure.sources,
            failure.follow_ups,
            failure.outputs,
            self.provider.view_offsets(),
            novel,
        ) {
            self.reported.push(record);
        }
    }

    fn finish(self) -> RelationOutcome {
        RelationOutcome {
            name: self.relation.qualified_name.clone(),
            runs: self.runs,
            raw_failures: self.raw_failures,
            reported: self.reported,
            truncated: self.truncated,
        }
    }
}

fn run_until(
    relation: &CompiledRelation,
    pool: &DataPool,
    config: &TargetConfig,
    rules: &DetectionRules,
    executor: &dyn SequenceExecutor,
    opts: &EngineOptions,
    deadline: Instant,
) -> Result<RelationOutcome, EngineError> {
    let provider = DataProvider::build(pool, config, &relation.referenced_input_types, opts.seed)?;
    let types = relation.source_types();
    let mut run = RelationRun {
        relation,
        pool,
        config,
        rules,
        executor,
        provider,
        seed: opts.seed,
        page_eq_threshold: opts.page_eq_threshold.unwrap_or(config.page_eq_threshold),
        deadline,
        runs: 0,
        raw_failures: 0,
        truncated: false,
        seen: BTreeSet::new(),
        reported: Vec::new(),
    };
    if types.is_empty() {
        run.run_once()?;
    } else {
        run.iterate(&types, 0)?;
    }
    Ok(run.finish())
}

/// Drives one relation over the full cartesian product of views of the
/// input types it references.
pub fn run_relation(
    relation: &CompiledRelation,
    pool: &DataPool,
    config: &TargetConfig,
    executor: &dyn SequenceExecutor,
    opts: &EngineOptions,
) -> Result<RelationOutcome, EngineError> {
    let rules = config.rules()?;
    run_until(
        relation,
        pool,
        config,
        &rules,
        executor,
        opts,
        Instant::now() + opts.budget,
    )
}

/// Runs a set of relations under one shared budget and assembles the
/// campaign report.
pub fn run_campaign(
    relations: &[CompiledRelation],
    pool: &DataPool,
    config: &TargetConfig,
    executor: &dyn SequenceExecutor,
    opts: &EngineOptions,
) -> Result<CampaignReport, EngineError> {
    let rules = config.rules()?;
    let started = Instant::now();
    let deadline = started + opts.budget;
    let mut reports = Vec::with_capacity(relations.len());
    for relation in relations {
        let outcome = run_until(relation, pool, config, &rules, executor, opts, deadline)?;
        reports.push(outcome.into_report());
    }
    Ok(CampaignReport {
        target: config.base_url.clone(),
        seed: opts.seed,
        page_eq_threshold: opts.page_eq_threshold.unwrap_or(config.page_eq_threshold),
        budget_secs: opts.budget.as_secs(),
        generated_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0),
        duration_ms: started.elapsed().as_millis() as u64,
        relations: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{compile_src, seq, Harness, StubExecutor};

    fn opts() -> EngineOptions {
        EngineOptions::default()
    }

    #[test]
    fn runs_the_product_of_view_counts() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/1"]),
            seq("b", &["https://h.test/2"]),
            seq("c", &["https://h.test/3"]),
        ]);
        // Statically references Input up to index 3 and User up to 2; the
        // false antecedent keeps every run green.
        let rel = compile_src(
            "MR t { IMPLIES(FALSE(), AND(isError(Output(Input(3), 1)), \
             cannotReachThroughGUI(User(2), \"https://h.test/x\"))); }",
        );
        let exec = StubExecutor::default();
        let outcome = run_relation(&rel, &h.pool, &h.config, &exec, &opts()).unwrap();
        assert_eq!(outcome.runs, 3 * 2);
        assert_eq!(outcome.raw_failures, 0);
        assert!(!outcome.truncated);
        assert!(outcome.reported.is_empty());
    }

    #[test]
    fn relation_without_sources_runs_once() {
        let h = Harness::new(vec![seq("a", &["https://h.test/1"])]);
        let rel = compile_src("MR t { TRUE(); }");
        let exec = StubExecutor::default();
        let outcome = run_relation(&rel, &h.pool, &h.config, &exec, &opts()).unwrap();
        assert_eq!(outcome.runs, 1);
    }

    #[test]
    fn first_view_is_rotated_and_last_is_the_original_ordering() {
        let h = Harness::new(vec![
            seq("a", &["https://h.test/a1"]),
            seq("b", &["https://h.test/b1"]),
        ]);
        // Fails exactly when Input(1) is sequence b, which the rotation
        // serves on the first of the two runs.
        let rel = compile_src(
            "MR t { for (var a : Input(1).actions) { NOT(a.url == \"https://h.test/b1\"); } }",
        );
        let exec = StubExecutor::default();
        let outcome = run_relation(&rel, &h.pool, &h.config, &exec, &opts()).unwrap();
        assert_eq!(outcome.runs, 2);
        assert_eq!(outcome.raw_failures, 1);
        assert_eq!(outcome.reported.len(), 1);
        let record = &outcome.reported[0];
        assert_eq!(record.view_indices.get("Input"), Some(&1));
        assert_eq!(record.source_inputs.len(), 1);
        assert_eq!(record.source_inputs[0].id, "b");
        assert_eq!(record.relation, "t");
    }

    #[test]
    fn failures_with_known_fingerprints_are_not_reported_again() {
        // Rotation order serves x, y, z: x and y share their request set,
        // z adds one novel request.
        let h = Harness::new(vec![
            seq("z", &["https://h.test/shared", "https://h.test/extra"]),
            seq("x", &["https://h.test/shared"]),
            seq("y", &["https://h.test/shared"]),
        ]);
        let rel = compile_src("MR t { for (var a : Input(1).actions) { FALSE(); } }");
        let exec = StubExecutor::default();
        let outcome = run_relation(&rel, &h.pool, &h.config, &exec, &opts()).unwrap();
        assert_eq!(outcome.runs, 3);
        assert_eq!(outcome.raw_failures, 3);
        assert_eq!(outcome.reported.len(), 2);
        assert_eq!(outcome.reported[0].source_inputs[0].id, "x");
        assert_eq!(outcome.reported[0].novel_requests.len(), 1);
        assert_eq!(outcome.reported[1].source_inputs[0].id, "z");
        assert_eq!(outcome.reported[1].novel_requests.len(), 1);
        let novel_urls: Vec<String> = outcome.reported[1]
            .novel_requests
            .iter()
            .map(|f| f.url.clone())
            .collect();
        assert_eq!(novel_urls, vec!["https://h.test/extra".to_string()]);
    }

    #[test]
    fn zero_budget_truncates_before_the_first_run() {
        let h = Harness::new(vec![seq("a", &["https://h.test/1"])]);
        let rel = compile_src("MR t { OR(isError(Output(Input(1), 1)), TRUE()); }");
        let exec = StubExecutor::default();
        let options = EngineOptions {
            budget: Duration::ZERO,
            ..opts()
        };
        let outcome = run_relation(&rel, &h.pool, &h.config, &exec, &options).unwrap();
        assert_eq!(outcome.runs, 0);
        assert!(outcome.truncated);
        assert_eq!(exec.calls(), 0);
    }

    #[test]
    fn random_value_pools_drive_one_run_per_view() {
        let mut h = Harness::new(vec![seq("a", &["https://h.test/1"])]);
        h.config.paths.views = 3;
        let rel = compile_src("MR t { OR(RandomValue(\"boolean\"), TRUE()); }");
        let exec = StubExecutor::default();
        let outcome = run_relation(&rel, &h.pool, &h.config, &exec, &opts()).unwrap();
        assert_eq!(outcome.runs, 3);
        assert_eq!(outcome.raw_failures, 0);
    }

    #[test]
    fn campaign_reports_cover_every_relation() {
        let h = Harness::new(vec![seq("a", &["https://h.test/1"])]);
        let relations = vec![
            compile_src("MR first { TRUE(); }"),
            compile_src("MR second { FALSE(); }"),
        ];
        let exec = StubExecutor::default();
        let report = run_campaign(&relations, &h.pool, &h.config, &exec, &opts()).unwrap();
        assert_eq!(report.relations.len(), 2);
        assert_eq!(report.relations[0].name, "first");
        assert_eq!(report.relations[0].raw_failures, 0);
        assert_eq!(report.relations[1].name, "second");
        assert_eq!(report.relations[1].raw_failures, 1);
        // A failure that never touched the provider has no fingerprints
        // to report under.
        assert_eq!(report.relations[1].reported_failures, 0);
        assert_eq!(report.total_reported(), 0);
        let summary = report.render_summary();
        assert!(summary.contains("first"));
        assert!(summary.contains("second"));
    }
}
