//! Rayon pool against a single-thread pool on the hot paths.
//!
//! Built without the `parallel` feature, only the sequential loops run:
//! `cargo bench --no-default-features`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use varembed::fv::FiniteVolume;
use varembed::mesh::generate::{cartesian, triangulated_square, TriPattern};
use varembed::mesh::CenteredMesh;
use varembed::mfd::{InnerProductMode, Mimetic};
use varembed::problem::{Diffusivity, ScalarField};
use varembed::study::{self, RunConfig, Scheme};

/// Runs `f` once per available execution mode.
fn modes(mut f: impl FnMut(&str, &dyn Fn(&mut (dyn FnMut() + Send)))) {
    #[cfg(feature = "parallel")]
    {
        f("rayon", &|body| body());
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        f("single_thread", &move |body| single.install(&mut *body));
    }
    #[cfg(not(feature = "parallel"))]
    f("sequential", &|body| body());
}

fn fd_coherence(c: &mut Criterion) {
    let mut group = c.benchmark_group("fd_coherence");
    group.sample_size(10);
    for n in [16, 32] {
        let mut cfg = RunConfig::new(Scheme::Fd, 3);
        cfg.probes = 4;
        modes(|name, run| {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, &n| {
                b.iter(|| run(&mut || drop(black_box(study::coherence(&cfg, n).unwrap()))))
            });
        });
    }
    group.finish();
}

fn mfd_assemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("mfd_assemble");
    group.sample_size(10);
    let f = ScalarField::new(|x| x[0] * x[1]);
    for n in [16, 48] {
        let mesh = CenteredMesh::centroidal(triangulated_square(n, TriPattern::CrissCross).unwrap()).unwrap();
        modes(|name, run| {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    run(&mut || {
                        let m = Mimetic::new(mesh.clone(), Diffusivity::identity(2), InnerProductMode::Rt0Lifting).unwrap();
                        black_box(m.assemble(&f));
                    })
                })
            });
        });
    }
    group.finish();
}

fn sparse_matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("sparse_matvec");
    for n in [64, 256] {
        let fv = FiniteVolume::new(CenteredMesh::centroidal(cartesian(n, n).unwrap()).unwrap()).unwrap();
        let a = fv.matrix();
        let x: Vec<f64> = (0..a.cols()).map(|i| (i as f64).sin()).collect();
        let mut y = vec![0.0; a.rows()];
        modes(|name, run| {
            group.bench_with_input(BenchmarkId::new(name, n * n), &n, |b, _| {
                b.iter(|| run(&mut || a.mul_vec_into(black_box(&x), &mut y)))
            });
        });
    }
    group.finish();
}

criterion_group!(benches, fd_coherence, mfd_assemble, sparse_matvec);
criterion_main!(benches);
