//! Microbenchmarks for the pipeline's hot paths: dense layers at reference
//! width, the gated progressive train step, the twin-view loss, latent
//! interpolation, and the finite-volume solver step.
//!
//! ```text
//! cargo bench -p progrom-bench
//! ```

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ndarray::Array2;

use progrom::column::{Column, ColumnArch, Component};
use progrom::datagen::transport::{Boundary, BoundarySet, Simulation};
use progrom::latent::{fit_rbf, predict_latent_batch};
use progrom::loss::{twin_loss_with_grads, DEFAULT_LAMBDA};
use progrom::net::{Activation, DenseLayer, SeededRng};
use progrom::progressive::{attach_child, InitMode};

const BATCH: usize = 64;

fn bench_dense_layer(c: &mut Criterion) {
    let mut rng = SeededRng::new(1);
    let mut layer = DenseLayer::new(1503, 751, Activation::LeakyRelu { slope: 0.2 }, &mut rng);
    let x = Array2::from_shape_fn((BATCH, 1503), |_| rng.uniform(-1.0, 1.0));

    c.bench_function("dense_forward_1503x751_b64", |b| {
        b.iter(|| black_box(layer.forward(black_box(&x).view())))
    });

    let y = layer.forward(x.view());
    c.bench_function("dense_backward_1503x751_b64", |b| {
        b.iter(|| black_box(layer.backward(black_box(&y)).unwrap()))
    });
}

fn bench_progressive_encoder(c: &mut Criterion) {
    let dof = 1503;
    let parents: Vec<Column> = (0..2)
        .map(|j| {
            let mut col = Column::from_arch(ColumnArch::halving(dof, 16, 64).unwrap(), 10 + j);
            col.freeze();
            col
        })
        .collect();
    let mut stack = attach_child(parents, dof, 16, 64, 20, InitMode::Scratch).unwrap();
    let mut rng = SeededRng::new(2);
    let x = Array2::from_shape_fn((BATCH, dof), |_| rng.uniform(0.0, 1.0));

    c.bench_function("encoder_train_step_2_parents_dof1503_b64", |b| {
        b.iter(|| {
            let (y, trace) = stack.forward_component_train(Component::Encoder, black_box(&x).view());
            black_box(stack.backward_component(Component::Encoder, &y, trace).unwrap())
        })
    });

    c.bench_function("encode_infer_2_parents_dof1503_b64", |b| {
        b.iter(|| black_box(stack.encode(black_box(&x).view()).unwrap()))
    });
}

fn bench_twin_loss(c: &mut Criterion) {
    let mut rng = SeededRng::new(3);
    let pa = Array2::from_shape_fn((BATCH, 64), |_| rng.uniform(-1.0, 1.0));
    let pb = Array2::from_shape_fn((BATCH, 64), |_| rng.uniform(-1.0, 1.0));

    c.bench_function("twin_loss_with_grads_b64_d64", |b| {
        b.iter(|| {
            black_box(twin_loss_with_grads(black_box(&pa).view(), black_box(&pb).view(), DEFAULT_LAMBDA).unwrap())
        })
    });
}

fn bench_latent_interpolant(c: &mut Criterion) {
    let mut rng = SeededRng::new(4);
    let inputs = Array2::from_shape_fn((200, 3), |_| rng.uniform(0.0, 1.0));
    let latents = Array2::from_shape_fn((200, 16), |_| rng.uniform(-1.0, 1.0));

    c.bench_function("fit_rbf_n200_d3_q16", |b| {
        b.iter(|| black_box(fit_rbf(black_box(&inputs).view(), latents.view(), 1e-10).unwrap()))
    });

    let model = fit_rbf(inputs.view(), latents.view(), 1e-10).unwrap();
    let queries = Array2::from_shape_fn((50, 3), |_| rng.uniform(0.0, 1.0));
    c.bench_function("predict_latent_n200_q50", |b| {
        b.iter(|| black_box(predict_latent_batch(&model, black_box(&queries).view()).unwrap()))
    });
}

fn bench_solver_step(c: &mut Criterion) {
    let (nx, ny) = (48, 32);
    let bc = BoundarySet {
        left: Boundary::Dirichlet(1.0),
        right: Boundary::ZeroGradient,
        bottom: Boundary::ZeroGradient,
        top: Boundary::ZeroGradient,
    };
    let mut sim = Simulation::new(
        nx,
        ny,
        2.0 / nx as f64,
        1.0 / ny as f64,
        Array2::from_elem((nx + 1, ny), 10.0),
        Array2::zeros((nx, ny + 1)),
        0.5,
        bc,
        0.0,
    )
    .unwrap();
    let dt = sim.stable_dt(0.9).unwrap();

    c.bench_function("solver_step_48x32", |b| {
        b.iter(|| {
            sim.step(black_box(dt));
            black_box(sim.total())
        })
    });
}

criterion_group!(
    benches,
    bench_dense_layer,
    bench_progressive_encoder,
    bench_twin_loss,
    bench_latent_interpolant,
    bench_solver_step
);
criterion_main!(benches);
