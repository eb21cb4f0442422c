use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dsec_core::analysis::{
    agglomerative_ward, fisher_exact, hierarchical_enrichment, kmeans_restarts, ContingencyTable, HierarchyConfig,
};
use dsec_core::cohort::{generate_synthetic_cohort, prepare_cohort, FilterThresholds, SplitSpec, SyntheticSpec};
use dsec_core::eval::{forest_predict, forest_train, roc_auc, ForestConfig};
use dsec_core::model::{run_dsec, soft_assign, ClusterHead, EncoderSpec, Method, TrainingSchedule};
use dsec_core::{Matrix, Rng};

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

fn ward(c: &mut Criterion) {
    let mut g = c.benchmark_group("ward");
    for n in [250, 1000, 2000] {
        let x = random(n, 3, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| agglomerative_ward(x).unwrap())
        });
    }
    g.finish();
}

fn statistics(c: &mut Criterion) {
    let tables: Vec<ContingencyTable> = (0..100)
        .map(|i| ContingencyTable::new(i % 50, 50 - i % 50, (i * 7) % 40, 60 - (i * 7) % 40))
        .collect();
    c.bench_function("fisher/100 tables", |b| {
        b.iter(|| tables.iter().map(|t| fisher_exact(t).unwrap().1).sum::<f64>())
    });
    let mut rng = Rng::new(2);
    let scores: Vec<f64> = (0..5000).map(|_| rng.normal()).collect();
    let labels: Vec<u8> = (0..5000).map(|i| (i % 3 == 0) as u8).collect();
    c.bench_function("roc_auc/5000", |b| b.iter(|| roc_auc(&scores, &labels).unwrap().auc));
}

fn clustering(c: &mut Criterion) {
    let z = random(1500, 3, 3);
    c.bench_function("kmeans/1500x3 k=2, 10 restarts", |b| {
        b.iter(|| kmeans_restarts(&z, 2, 10, &mut Rng::new(4)).unwrap().inertia)
    });
    let head = ClusterHead::new(random(2, 3, 5), 1.0).unwrap();
    c.bench_function("soft_assign/1500x3 k=2", |b| b.iter(|| soft_assign(&z, &head).unwrap()));
}

fn forest(c: &mut Criterion) {
    let x = random(1500, 3, 6);
    let y: Vec<u8> = (0..1500).map(|i| (x[(i, 0)] + 0.5 * x[(i, 1)] > 0.0) as u8).collect();
    let cfg = ForestConfig::default();
    let mut g = c.benchmark_group("forest");
    g.sample_size(10);
    g.bench_function("train/1500x3, 100 trees", |b| {
        b.iter(|| forest_train(&x, &y, &cfg, &Rng::new(7)).unwrap())
    });
    let model = forest_train(&x, &y, &cfg, &Rng::new(7)).unwrap();
    g.bench_function("predict/1500", |b| b.iter(|| forest_predict(&model, &x).unwrap()));
    g.finish();
}

fn training(c: &mut Criterion) {
    let cohort = generate_synthetic_cohort(&SyntheticSpec::default_preset(0)).unwrap();
    let p = prepare_cohort(&cohort.matrix, &FilterThresholds::default(), &SplitSpec::default()).unwrap();
    let spec = EncoderSpec::desk_scale(Method::Dsec);
    let short = TrainingSchedule {
        pretrain_epochs: 5,
        transfer_epochs: 2,
        cluster_epochs: 10,
        ..Default::default()
    };
    let mut g = c.benchmark_group("dsec");
    g.sample_size(10);
    g.bench_function("5/2/10 epochs on 1500 patients", |b| {
        b.iter(|| run_dsec(&p.train.features, &p.train.labels, &spec, &short, 2, &Rng::new(0)).unwrap())
    });
    let model = run_dsec(&p.train.features, &p.train.labels, &spec, &short, 2, &Rng::new(0))
        .unwrap()
        .model;
    let z = model.embed(&p.all.features).unwrap();
    let tree = agglomerative_ward(&z).unwrap();
    g.bench_function("hierarchical enrichment, depth 4", |b| {
        b.iter(|| hierarchical_enrichment(&tree, &p.all.codes, &HierarchyConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, ward, statistics, clustering, forest, training);
criterion_main!(benches);
