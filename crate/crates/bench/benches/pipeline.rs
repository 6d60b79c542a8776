use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pdt_disasm::{
    build_cfg, build_pdt, build_pdt_par, detect_violations, prune, superset_decode,
    truth_from_scores, PropagationMode, Region, Tbc1,
};
use pdt_disasm_bench::{synthetic_region, synthetic_scores};
use std::hint::black_box;

const SIZES: [usize; 3] = [1 << 14, 1 << 17, 1 << 20];

fn bench_pdt(c: &mut Criterion) {
    let mut group = c.benchmark_group("pdt");
    group.sample_size(10);
    for &len in &SIZES {
        let region = Region::new(synthetic_region(len, 1));
        let cfg = build_cfg(&superset_decode(&Tbc1, &region), len);
        group.throughput(Throughput::Bytes(len as u64));
        group.bench_with_input(BenchmarkId::new("decode+cfg", len), &region, |b, r| {
            b.iter(|| build_cfg(&superset_decode(&Tbc1, black_box(r)), r.len()))
        });
        group.bench_with_input(BenchmarkId::new("build", len), &cfg, |b, cfg| {
            b.iter(|| build_pdt(black_box(cfg)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("build_par", len), &cfg, |b, cfg| {
            b.iter(|| build_pdt_par(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn bench_detect_prune(c: &mut Criterion) {
    let mut group = c.benchmark_group("detect_prune");
    group.sample_size(10);
    for &len in &SIZES {
        let region = Region::new(synthetic_region(len, 2));
        let cfg = build_cfg(&superset_decode(&Tbc1, &region), len);
        let forest = build_pdt(&cfg).unwrap();
        let scores = synthetic_scores(len, 2);
        let truth = truth_from_scores(&scores, &cfg).unwrap();
        group.throughput(Throughput::Bytes(len as u64));
        group.bench_function(BenchmarkId::new("detect", len), |b| {
            b.iter(|| detect_violations(&forest, &cfg, black_box(&truth)).unwrap())
        });
        for mode in [PropagationMode::Faithful, PropagationMode::Exact] {
            group.bench_function(BenchmarkId::new(format!("prune_{mode}"), len), |b| {
                b.iter(|| prune(&forest, &cfg, black_box(&scores), mode).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_pdt, bench_detect_prune);
criterion_main!(benches);
