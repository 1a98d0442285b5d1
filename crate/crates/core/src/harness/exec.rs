//! Trial scheduling. Each trial owns an RNG stream derived from
//! `(seed, trial)`, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HETNET_TR_THREADS";

/// Worker cap from the environment, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
}

/// RNG for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `f` for every trial id in `0..trials`, results in trial order.
#[cfg(feature = "parallel")]
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let run = || (0..trials).into_par_iter().map(&f).collect();
    match thread_cap() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                run()
            }
        },
        None => run(),
    }
}

/// Runs `f` for every trial id in `0..trials`, results in trial order.
#[cfg(not(feature = "parallel"))]
pub fn map_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).map(f).collect()
}

/// Sequential reference used by benchmarks and tests.
pub fn map_trials_sequential<T, F>(trials: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..trials).map(f).collect()
}
