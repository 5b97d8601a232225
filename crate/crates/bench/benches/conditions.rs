use criterion::{criterion_group, criterion_main, Criterion};
use jumpsde::{build_registry, check_condition, CheckParams, ConditionId, SampleGrid};

fn check(c: &mut Criterion) {
    let model = build_registry().build_default("section4").unwrap();
    let params = CheckParams::for_model(&model);
    let grid = SampleGrid::low_discrepancy(2, 10.0, 10_000, 10_000).unwrap();
    let mut group = c.benchmark_group("check_condition");
    group.sample_size(20);
    for id in [ConditionId::C9, ConditionId::C5, ConditionId::C8] {
        group.bench_function(id.as_str(), |b| b.iter(|| check_condition(id, &model, &params, &grid).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, check);
criterion_main!(benches);
