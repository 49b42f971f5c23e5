use ccphase_bench::default_device;
use ccphase_core::{
    eigensolve, eigensolve_sectors, render, CMatrix, DragPulseSpec, FluxPulseSpec, RenderConfig, Segment, Stepper,
};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn eigen(c: &mut Criterion) {
    let (_, _, h) = default_device();
    c.bench_function("eigensolve_full", |b| b.iter(|| eigensolve(&h, black_box(4.5)).unwrap()));
    c.bench_function("eigensolve_sectors", |b| b.iter(|| eigensolve_sectors(&h, black_box(4.5)).unwrap()));
}

fn stepper(c: &mut Criterion) {
    let (_, _, h) = default_device();
    let psi = CMatrix::identity_columns(h.dim(), 8);
    let mut st = Stepper::new(&h, 1.0 / 30.0);
    c.bench_function("stepper_tick_8_columns", |b| {
        b.iter(|| st.step(black_box(4.7), [0.0; 3], &psi).unwrap())
    });
    let mut st = Stepper::new(&h, 1.0 / 30.0);
    c.bench_function("stepper_tick_driven", |b| {
        b.iter(|| st.step(black_box(5.8), [0.05, 0.0, 0.0], &psi).unwrap())
    });
}

fn rendering(c: &mut Criterion) {
    let cfg = RenderConfig::default();
    let segs = [
        Segment::flux(2.0, FluxPulseSpec::new(5.8, 4.5, 60.0, 5.0)),
        Segment::drag(64.0, DragPulseSpec::pi(0)),
    ];
    c.bench_function("render_flux_and_drag", |b| b.iter(|| render(black_box(&segs), 86.0, &cfg).unwrap()));
}

criterion_group!(benches, eigen, stepper, rendering);
criterion_main!(benches);
