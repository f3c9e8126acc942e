//! Benchmarks for the paths the engine leans on: body edit distance for
//! page comparison, relation parsing, and data-view rotation.

use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smrl_core::catalog;
use smrl_core::collector::{bodies_similar, levenshtein};
use smrl_core::dsl;
use smrl_core::engine::provider::DataProvider;
use smrl_core::model::{Action, InputSequence, Provenance, User};
use smrl_core::{DataPool, TargetConfig};

/// Two same-length bodies differing in `edits` scattered bytes.
fn body_pair(len: usize, edits: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<u8> = (0..len).map(|_| rng.gen_range(b'a'..=b'z')).collect();
    let mut b = a.clone();
    for _ in 0..edits {
        let at = rng.gen_range(0..len);
        b[at] = rng.gen_range(b'a'..=b'z');
    }
    (a, b)
}

fn bench_edit_distance(c: &mut Criterion) {
    let mut group = c.benchmark_group("edit_distance");
    for len in [512usize, 2048] {
        let (a, b) = body_pair(len, len / 20, 7);
        group.bench_with_input(BenchmarkId::new("levenshtein", len), &len, |bench, _| {
            bench.iter(|| levenshtein(black_box(&a), black_box(&b)))
        });
        group.bench_with_input(
            BenchmarkId::new("bodies_similar_5pct", len),
            &len,
            |bench, _| bench.iter(|| bodies_similar(black_box(&a), black_box(&b), 0.05)),
        );
    }
    group.finish();
}

fn bench_parse_catalog(c: &mut Criterion) {
    c.bench_function("parse_shipped_catalog", |bench| {
        bench.iter(|| {
            for (_, source) in catalog::SOURCES {
                black_box(dsl::parse(black_box(source)).expect("catalog parses"));
            }
        })
    });
}

fn stub_pool(sequences: usize) -> DataPool {
    let mut pool = DataPool::default();
    for n in 0..sequences {
        let action = Action::request("GET", &format!("https://t.example/page/{n}"))
            .expect("valid URL");
        let seq = InputSequence::new(&format!("seq-{n}"), vec![action], Provenance::Crawled, None)
            .expect("valid sequence");
        pool.sequences.push(seq);
    }
    for name in ["admin", "devel", "tester"] {
        pool.users.push(User::new(name, "pw", name));
    }
    pool
}

/// Builds the provider and walks every circular view of a 20-sequence,
/// 3-user pool, touching both items per view like a relation would.
fn bench_view_rotation(c: &mut Criterion) {
    let pool = stub_pool(20);
    let config = TargetConfig::for_tests("https://t.example/");
    let mut types = BTreeMap::new();
    types.insert("Input".to_string(), 2usize);
    types.insert("User".to_string(), 2usize);

    c.bench_function("view_rotation_20x3", |bench| {
        bench.iter(|| {
            let mut provider =
                DataProvider::build(&pool, &config, &types, 42).expect("provider builds");
            for ty in ["Input", "User"] {
                loop {
                    black_box(provider.view_item(ty, 1).expect("item"));
                    black_box(provider.view_item(ty, 2).expect("item"));
                    if !provider.has_more_views(ty).expect("pool known") {
                        break;
                    }
                    provider.next_view(ty).expect("advances");
                }
                provider.reset_views(ty).expect("resets");
            }
        })
    });
}

criterion_group!(
    benches,
    bench_edit_distance,
    bench_parse_catalog,
    bench_view_rotation
);
criterion_main!(benches);
