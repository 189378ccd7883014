use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use palmvein_core::enhance::{clahe, histogram_equalize, median_filter};
use palmvein_core::pipeline::{self, PipelineConfig};
use palmvein_core::retinex::{convolve_separable, single_scale_retinex, GaussianKernel};
use palmvein_core::segmentation::{label_components, thin};
use palmvein_core::synthetic::{vein_scene, SceneConfig};
use palmvein_core::Connectivity;

fn kernels(c: &mut Criterion) {
    let scene = vein_scene(&SceneConfig::default());
    let image = &scene.image;

    let mut group = c.benchmark_group("convolve_360x657");
    for sigma in [1.0, 5.0, 25.0] {
        let kernel = GaussianKernel::new(sigma).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(sigma), &kernel, |b, k| {
            b.iter(|| convolve_separable(black_box(image), k))
        });
    }
    group.finish();

    let kernel = GaussianKernel::new(25.0).unwrap();
    c.bench_function("ssr_360x657", |b| {
        b.iter(|| single_scale_retinex(black_box(image), &kernel, 1e-4).unwrap())
    });
    c.bench_function("he_360x657", |b| {
        b.iter(|| histogram_equalize(black_box(image)))
    });
    c.bench_function("median3_360x657", |b| {
        b.iter(|| median_filter(black_box(image), 3).unwrap())
    });
    c.bench_function("clahe_360x657", |b| {
        b.iter(|| clahe(black_box(image), (8, 8), 2.0).unwrap())
    });

    c.bench_function("label8_veins", |b| {
        b.iter(|| label_components(black_box(&scene.veins), Connectivity::Eight))
    });
    c.bench_function("thin_veins", |b| b.iter(|| thin(black_box(&scene.veins))));

    let cfg = PipelineConfig::default();
    c.bench_function("extract_360x657", |b| {
        b.iter(|| pipeline::extract(black_box(image), &cfg).unwrap())
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
