//! Point-sweep throughput with the data-parallel path on and off.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use coiso::connection::curvature_decomposition;
use coiso::embedding::{certify_closed, CoisotropicEmbedding};
use coiso::models::ed::build_lattice_ed;
use coiso::models::lattice::Grid;
use coiso::models::monopole::build_monopole;
use coiso::presympl::constant_rank_certificate;
use coiso::sweep;

const POINTS: usize = 32;

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", true), ("sequential", false)]
}

fn lattice_ed(c: &mut Criterion) {
    let b = build_lattice_ed(Grid::new([3, 3, 3]).unwrap()).unwrap();
    let pts = b.model.sample_points(POINTS, 1);
    let e = CoisotropicEmbedding::build(&b.structure, &b.connection, &pts[0]).unwrap();
    let zs: Vec<Vec<f64>> = pts.iter().map(|x| e.with_mu(x, &vec![0.3; e.r])).collect();

    let mut g = c.benchmark_group("lattice_ed_3x3x3");
    g.sample_size(10);
    for (label, on) in modes() {
        sweep::set_parallel(on);
        g.bench_with_input(BenchmarkId::new("rank_certificate", label), &pts, |bch, p| {
            bch.iter(|| constant_rank_certificate(&b.structure, p).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("curvature", label), &pts, |bch, p| {
            bch.iter(|| curvature_decomposition(&b.connection, p, None).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("closedness", label), &zs, |bch, z| {
            bch.iter(|| certify_closed(&e, z).unwrap())
        });
    }
    g.finish();
    sweep::set_parallel(true);
}

fn monopole(c: &mut Criterion) {
    let b = build_monopole(1.0, true).unwrap();
    let pts = b.model.sample_points(4 * POINTS, 2);
    let mut g = c.benchmark_group("monopole");
    for (label, on) in modes() {
        sweep::set_parallel(on);
        g.bench_with_input(BenchmarkId::new("curvature", label), &pts, |bch, p| {
            bch.iter(|| curvature_decomposition(&b.connection, p, None).unwrap())
        });
    }
    g.finish();
    sweep::set_parallel(true);
}

criterion_group!(benches, lattice_ed, monopole);
criterion_main!(benches);
