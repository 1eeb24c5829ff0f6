use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use leakage_bench::{gaussian_pair, toy};
use leakage_core::data::SplitKind;
use leakage_core::estimators::{kl_entropy, ksg_mi, EstimatorConfig, NeighborSearch};
use leakage_core::scores::{evaluate_report, ConceptData, ReportOptions};
use ndarray::Array2;

fn mutual_information(c: &mut Criterion) {
    let mut g = c.benchmark_group("ksg_mi");
    g.sample_size(10);
    for (n, d) in [(1_000, 1), (10_000, 1), (10_000, 4)] {
        let (x, y) = gaussian_pair(n, d);
        g.bench_with_input(BenchmarkId::new("auto", format!("n{n}-d{d}")), &(x, y), |b, (x, y)| {
            b.iter(|| ksg_mi(x, y, &EstimatorConfig::default()).unwrap())
        });
    }
    let (x, y) = gaussian_pair(2_000, 2);
    for search in [NeighborSearch::BruteForce, NeighborSearch::KdTree] {
        let cfg = EstimatorConfig { neighbor_search: search, ..EstimatorConfig::default() };
        g.bench_function(BenchmarkId::new(format!("{search:?}"), "n2000-d2"), |b| b.iter(|| ksg_mi(&x, &y, &cfg).unwrap()));
    }
    g.finish();
}

fn entropy(c: &mut Criterion) {
    let (x, _) = gaussian_pair(10_000, 4);
    c.bench_function("kl_entropy/n10000-d4", |b| b.iter(|| kl_entropy(&x, &EstimatorConfig::default()).unwrap()));
}

fn leakage_report(c: &mut Criterion) {
    let test = toy(10_000).split(SplitKind::Test);
    let noisy: Array2<f64> = test.concepts.mapv(|v| 0.8 * v + 0.1);
    let data = ConceptData::new(test.concepts.clone(), noisy, test.labels.clone()).unwrap();
    let mut g = c.benchmark_group("report");
    g.sample_size(10);
    g.bench_function("ctl_icl/n1000-k3-5repeats", |b| b.iter(|| evaluate_report(&data, &ReportOptions::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, mutual_information, entropy, leakage_report);
criterion_main!(benches);
