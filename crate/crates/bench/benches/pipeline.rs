use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use scenecmd_bench::{cues, scene, words, RESPONSE};
use scenecmd_core::capture::{serialize_time, TaskMode};
use scenecmd_core::gateway::{render_system_prompt, SYSTEM_TASK2};
use scenecmd_core::runtime::{parse_line, CommandRuntime};
use scenecmd_core::voice::{normalize, parse_command, SelectionState};
use scenecmd_core::{avg_corner_distance, Orientation, OrientedBox, Vec3};

fn runtime(c: &mut Criterion) {
    let lines: Vec<&str> = RESPONSE.lines().collect();
    c.bench_function("parse_line x29", |b| {
        b.iter(|| {
            for l in &lines {
                let _ = black_box(parse_line(black_box(l)));
            }
        })
    });
    let base = scene();
    c.bench_function("execute furnished-room response", |b| {
        b.iter_batched(
            || base.clone(),
            |mut s| CommandRuntime::new(TaskMode::Task2).execute_all(&mut s, lines.iter().copied()),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn geometry(c: &mut Criterion) {
    let a = OrientedBox::axis_aligned(Vec3::new(5.0, 0.5, 5.0), Vec3::new(0.5, 1.0, 0.5));
    let b = OrientedBox::new(
        Vec3::new(5.1, 0.5, 4.9),
        Vec3::new(0.5, 1.0, 0.5),
        Orientation::facing(Vec3::new(1.0, 0.0, 1.0), true).unwrap(),
    );
    c.bench_function("avg_corner_distance", |bench| {
        bench.iter(|| avg_corner_distance(black_box(&a), black_box(&b)))
    });
}

fn capture(c: &mut Criterion) {
    let w = words();
    let (points, lines) = cues();
    c.bench_function("serialize_time", |b| {
        b.iter(|| serialize_time(black_box(&w), &points, &lines))
    });
    let s = scene();
    c.bench_function("render system prompt", |b| {
        b.iter(|| render_system_prompt(SYSTEM_TASK2, black_box(&s)))
    });
}

fn voice(c: &mut Criterion) {
    let s = scene();
    let sel = SelectionState {
        selected: vec!["-23780".into()],
        last_point: None,
    };
    c.bench_function("voice normalize+parse", |b| {
        b.iter(|| {
            let t = normalize(black_box("um could you move this forward twenty centimeters please"));
            parse_command(&t, &s, &sel)
        })
    });
}

criterion_group!(benches, runtime, geometry, capture, voice);
criterion_main!(benches);
