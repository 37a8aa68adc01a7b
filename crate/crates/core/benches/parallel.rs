use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use rdm_core::extract::fixtures::{demo_metadata, write_vendor_file};
use rdm_core::extract::{parse_many, VendorFormat};
use rdm_core::par::{self, Strategy};
use rdm_core::previews::{demo_ebsd_map, ipf_z_map_with, thumbnail_with, RgbImage};
use rdm_core::workflows::{
    demo_load_rows, parse_load_csv, stress_strain, write_load_csv, PillarGeometry,
};

const STRATEGIES: [(&str, Strategy); 2] =
    [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn ipf(c: &mut Criterion) {
    let map = demo_ebsd_map(400, 300);
    let mut g = c.benchmark_group("ipf_z_map");
    for (name, s) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| ipf_z_map_with(black_box(&map), s))
        });
    }
    g.finish();
}

fn thumbnails(c: &mut Criterion) {
    let mut img = RgbImage::new(2048, 1536);
    for y in 0..img.height() {
        for x in 0..img.width() {
            img.set(x, y, [(x & 0xff) as u8, (y & 0xff) as u8, ((x ^ y) & 0xff) as u8]);
        }
    }
    let mut g = c.benchmark_group("thumbnail");
    for (name, s) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| thumbnail_with(black_box(&img), 256, s))
        });
    }
    g.finish();
}

fn parsing(c: &mut Criterion) {
    let meta = demo_metadata();
    let files: Vec<Vec<u8>> = (0..64)
        .map(|i| write_vendor_file(VendorFormat::PARSEABLE[i % 3], &meta))
        .collect();
    let mut g = c.benchmark_group("parse_many");
    for (name, s) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| parse_many(black_box(&files), s))
        });
    }
    g.finish();
}

fn curves(c: &mut Criterion) {
    let files: Vec<String> = (0..32)
        .map(|i| write_load_csv(&demo_load_rows(2000, 0.01 + i as f64 * 1e-3, 1.5)))
        .collect();
    let geom = PillarGeometry::new("MP1", 1e-6, 2e-6).unwrap();
    let mut g = c.benchmark_group("stress_strain");
    for (name, s) in STRATEGIES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &s, |b, &s| {
            b.iter(|| {
                par::map(s, &files, |csv| {
                    let series = parse_load_csv(csv.as_bytes()).unwrap();
                    stress_strain(&series, &geom).unwrap()
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, ipf, thumbnails, parsing, curves);
criterion_main!(benches);
