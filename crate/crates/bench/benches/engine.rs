//! Hot-path benchmarks: forward passes at both sensor scales, a full BPTT
//! update over a capture-length episode, and raw environment stepping.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use emrl_core::activation::ActivationSpec;
use emrl_core::env::{make_task, CaptureConfig, SensorPreset, TaskConfig};
use emrl_core::net::{init_random, EpisodeTrace, RecurrentInit, RnnState, StepTarget, TraceStep};
use emrl_core::rl::HybridAction;

fn rnn(input: usize, hidden: usize, output: usize, seed: u64) -> emrl_core::NetworkWeights {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    init_random(
        &[input, hidden, output],
        Some(RecurrentInit::IdentityFeedback { gain: 1.0 }),
        ActivationSpec::symmetric_sigmoid(),
        0.5,
        &mut rng,
    )
    .unwrap()
}

fn bench_forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("rnn_step");
    for (name, input) in [("desk_80", 80usize), ("full_832", 832)] {
        let net = rnn(input, 40, 4, 7);
        let state = RnnState::zeros(40);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let obs: Vec<f64> = (0..input).map(|_| rng.random_range(0.0..1.0)).collect();
        group.bench_function(name, |b| {
            b.iter(|| net.rnn_step(&state, &obs).unwrap());
        });
    }
    group.finish();
}

fn bench_bptt(c: &mut Criterion) {
    let net = rnn(80, 40, 4, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut trace = EpisodeTrace::new();
    let mut state = RnnState::zeros(40);
    for _ in 0..40 {
        let obs: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
        let (next, outputs) = net.rnn_step(&state, &obs).unwrap();
        trace.push(TraceStep {
            input: obs,
            hidden_before: state.hidden().to_vec(),
            outputs,
            target: Some(StepTarget {
                values: vec![0.1, -0.1, 0.2, -0.2],
                mask: vec![true, true, true, true],
            }),
        });
        state = next;
    }
    c.bench_function("bptt_40_step_episode", |b| {
        b.iter_batched(
            || net.clone(),
            |mut n| n.bptt_train(&trace, 0.05, None).unwrap(),
            BatchSize::SmallInput,
        );
    });
}

fn bench_env(c: &mut Criterion) {
    let mut group = c.benchmark_group("capture_env");
    for (name, preset) in [("desk", SensorPreset::Desk), ("full", SensorPreset::Full)] {
        let task = TaskConfig::Capture(CaptureConfig {
            sensors: preset,
            ..CaptureConfig::default()
        });
        let mut env = make_task(&task).unwrap();
        let action = HybridAction::Continuous(vec![0.1, -0.1]);
        group.bench_function(name, |b| {
            let mut seed = 0u64;
            env.reset(seed).unwrap();
            b.iter(|| {
                let out = env.step(&action).unwrap();
                if out.done() {
                    seed += 1;
                    env.reset(seed).unwrap();
                }
            });
        });
    }
    group.finish();
}

criterion_group!(benches, bench_forward, bench_bptt, bench_env);
criterion_main!(benches);
