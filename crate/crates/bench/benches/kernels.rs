use criterion::{criterion_group, criterion_main, Criterion};
use gaugeforge::derham::{self, AffineVariety};
use gaugeforge::phi_crystal as pc;
use gaugeforge::zip_display::FiniteAlgebra;
use gaugeforge::{cris, linalg};
use gaugeforge_bench as fx;
use std::hint::black_box;

fn witt(c: &mut Criterion) {
    let r = fx::ring(3, 2, 3);
    let s = r.size() as u32;
    c.bench_function("witt mul W_3(F_9), all pairs of a stride", |b| {
        b.iter(|| {
            let mut acc = 0u32;
            for x in (0..s).step_by(97) {
                for y in (0..s).step_by(89) {
                    acc = r.add(acc, r.mul(x, y));
                }
            }
            black_box(acc)
        })
    });
}

fn smith(c: &mut Criterion) {
    let r = fx::ring(2, 1, 4);
    let a = fx::square(&r, 12);
    c.bench_function("smith form 12x12 over W_4(F_2)", |b| b.iter(|| black_box(linalg::smith(&r, black_box(&a)))));
}

fn gauges(c: &mut Criterion) {
    let cr = fx::crystal(2, 3);
    c.bench_function("standard construction rank 3, n = 2", |b| b.iter(|| black_box(pc::standard_construction(&cr, 2).unwrap())));
    let r = fx::ring(2, 1, 2);
    let g = fx::free_phi_gauge(&r, 3, 2);
    c.bench_function("freeness of a rank 3 gauge on [0, 2]", |b| b.iter(|| black_box(pc::is_free_w_gauge(&g.gauge).free)));
}

fn models(c: &mut Criterion) {
    c.bench_function("divided power model p = 2, d = 2, R = 6", |b| {
        b.iter(|| {
            let m = cris::build_model(2, 2, 1, 6).unwrap();
            black_box(cris::assemble_generalized_fzip(&m).unwrap())
        })
    });
    c.bench_function("H_g^1 of A^1 over F_2, D = 8", |b| {
        b.iter(|| {
            let g = derham::de_rham_gauge(AffineVariety::affine_space(2, 1, 1).unwrap(), 8).unwrap();
            black_box(derham::hg_gauge(&g, 1).unwrap())
        })
    });
    let a = FiniteAlgebra::monomial_quotient(2, &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1]]).unwrap();
    c.bench_function("perfect core of a staircase algebra", |b| b.iter(|| black_box(gaugeforge::zip_display::perfect_core(&a).unwrap())));
}

criterion_group!(benches, witt, smith, gauges, models);
criterion_main!(benches);
