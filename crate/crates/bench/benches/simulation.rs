use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use exploresim::env::{EnvConfig, ExplorationEnv};
use exploresim::harness::eval::trial_start;
use exploresim::mapping::OccupancyGrid;
use exploresim::sensor::{scan, LidarConfig};
use exploresim::world::{bundled_world, ActionCommand};

fn lidar(c: &mut Criterion) {
    let cfg = LidarConfig::default();
    for name in ["test_a", "test_c"] {
        let world = bundled_world(name).unwrap();
        let poses: Vec<_> = (0..64).map(|s| trial_start(&world, 0.1, s)).collect();
        c.bench_function(&format!("scan_360/{name}"), |b| {
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % poses.len();
                black_box(scan(&poses[i], &world, &cfg))
            })
        });
    }
}

fn mapping(c: &mut Criterion) {
    let world = bundled_world("test_b").unwrap();
    let pose = world.start;
    let s = scan(&pose, &world, &LidarConfig::default());
    c.bench_function("integrate_scan/fresh_grid", |b| {
        b.iter_batched(
            || OccupancyGrid::for_world(&world, 0.05),
            |mut grid| black_box(grid.integrate_scan(&pose, &s)),
            BatchSize::SmallInput,
        )
    });
}

fn env_step(c: &mut Criterion) {
    let world = Arc::new(bundled_world("test_a").unwrap());
    let cfg = EnvConfig::default();
    let mut env = ExplorationEnv::new(world.clone(), cfg).unwrap();
    env.reset(world.start, 0).unwrap();
    let mut t = 0usize;
    c.bench_function("env_step/test_a", |b| {
        b.iter(|| {
            t += 1;
            // short forward bursts between turns keep the robot mostly clear of walls
            let action = if t % 6 < 2 { ActionCommand::Forward } else { ActionCommand::TurnLeft };
            let info = env.step(action).unwrap();
            if info.done.is_some() {
                env.reset(world.start, t as u64).unwrap();
            }
            black_box(info)
        })
    });
}

criterion_group!(benches, lidar, mapping, env_step);
criterion_main!(benches);
