use criterion::{black_box, criterion_group, criterion_main, Criterion};
use thoraxseg::dataset::{parse_jsrt_image, preprocess, serialize_jsrt_image};
use thoraxseg_bench::radiograph;

fn bench(c: &mut Criterion) {
    let image = radiograph();
    let raw = serialize_jsrt_image(&image);
    let mut group = c.benchmark_group("preprocess");
    group.sample_size(20);
    group.bench_function("parse_jsrt_2048", |b| b.iter(|| parse_jsrt_image("b", black_box(&raw), true).unwrap()));
    group.bench_function("preprocess_2048_to_224", |b| b.iter(|| preprocess(black_box(&image)).unwrap()));
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
