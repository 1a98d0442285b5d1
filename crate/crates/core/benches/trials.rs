use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hetnet_tr::channel::{draw_channel_set, place_nodes, ProfileCatalog, ScenarioConfig};
use hetnet_tr::harness::{map_trials, map_trials_sequential, trial_rng};
use hetnet_tr::power::{solve_proposed, StepSchedule};

fn one_trial(cfg: &ScenarioConfig, catalog: &ProfileCatalog, t: u64) -> f64 {
    let mut rng = trial_rng(7, t);
    let geometry = place_nodes(cfg, &mut rng);
    let ch = draw_channel_set(cfg, catalog, &geometry, &mut rng).expect("channel draw");
    let gm = vec![cfg.gamma_m(); cfg.network.macro_users];
    let gf = vec![cfg.gamma_f(); cfg.network.femto_users];
    solve_proposed(&ch, &gm, &gf, cfg.p_tol(), cfg.noise(), &StepSchedule::default())
        .map(|r| r.total_power)
        .unwrap_or(f64::NAN)
}

fn bench_trials(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let catalog = ProfileCatalog::builtin();
    let mut group = c.benchmark_group("power_compare_trials");
    group.sample_size(20);
    for trials in [16u64, 64] {
        group.bench_with_input(BenchmarkId::new("parallel", trials), &trials, |b, &n| {
            b.iter(|| black_box(map_trials(n, |t| one_trial(&cfg, &catalog, t))))
        });
        group.bench_with_input(BenchmarkId::new("sequential", trials), &trials, |b, &n| {
            b.iter(|| black_box(map_trials_sequential(n, |t| one_trial(&cfg, &catalog, t))))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_trials);
criterion_main!(benches);
