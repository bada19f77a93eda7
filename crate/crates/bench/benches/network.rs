use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use exploresim::agent::{Architecture, PolicyNetwork};

fn input(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 37) % 101) as f64 / 101.0).collect()
}

fn network(c: &mut Criterion) {
    let net = PolicyNetwork::init(Architecture::default(), 7);
    let x = input(net.architecture().input);
    c.bench_function("policy/forward", |b| b.iter(|| black_box(net.forward(black_box(&x)))));

    let mut grad = vec![0.0; net.num_params()];
    c.bench_function("policy/forward_backward", |b| {
        b.iter(|| {
            let cache = net.forward_cached(&x);
            net.backward(&cache, &[0.3, -0.1, -0.2], 0.5, &mut grad);
            black_box(&grad);
        })
    });
}

criterion_group!(benches, network);
criterion_main!(benches);
