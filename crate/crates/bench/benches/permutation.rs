use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::hint::black_box;
use viscom_core::align::DEFAULT_WINDOW;
use viscom_core::pipeline::{analyze_corpus, assemble_corpus};
use viscom_core::stats::permutation_test;
use viscom_core::{synth_generate, AnalysisParams, SynthSpec};

const SPEC: &str = r#"
schema_version = 1
bin_width_s = 5.0

[[videos]]
id = "v01"
duration_s = 300.0
sessions = 300
textual_rate = 0.3
infovis_rate = 0.3
no_play_fraction = 0.05
effects = [{ action = "pause", modality = "T", probability = 0.6 }]
"#;

fn bench_permutation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("permutation_test");
    for n_perm in [500usize, 5000] {
        let a: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n_perm), &n_perm, |bench, &n| {
            bench.iter(|| permutation_test("v", black_box(&a), black_box(&b), n, DEFAULT_WINDOW, 7).unwrap())
        });
    }
    group.finish();

    let out = synth_generate(&SynthSpec::from_toml(SPEC).unwrap(), 1).unwrap();
    let corpus = assemble_corpus(out.sessions, out.annotations, &BTreeMap::new());
    let params = AnalysisParams {
        n_perm: 500,
        n_boot: 1000,
        ..AnalysisParams::default()
    };
    let mut group = c.benchmark_group("analyze");
    group.sample_size(10);
    group.bench_function("one_video_36_cells", |bench| {
        bench.iter(|| analyze_corpus(black_box(&corpus), &params).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_permutation);
criterion_main!(benches);
