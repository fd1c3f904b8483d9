//! Multi-threaded power studies.

use std::thread;

use multivariance_core::simulate::{power_study, run_rng, PowerConfig, PowerRow};
use multivariance_core::{Error, Result, Scenario};

/// [`power_study`] spread over `workers` threads. Every run keeps its own
/// derived random stream, so the table is identical for any worker count.
pub fn power_study_parallel(
    scenario: &Scenario,
    config: &PowerConfig,
    sizes: &[usize],
    runs: usize,
    seed: u64,
    shared_null: bool,
    workers: usize,
) -> Result<Vec<PowerRow>> {
    if runs == 0 {
        return Err(Error::Usage("power studies need at least one run".into()));
    }
    let workers = workers.max(1).min(runs);
    if workers == 1 {
        return power_study(scenario, config, sizes, runs, seed, shared_null);
    }
    scenario.validate()?;
    config.validate(shared_null)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for (point, &samples) in sizes.iter().enumerate() {
        let shared = if shared_null { Some(config.shared_null(scenario, samples, seed, point)?) } else { None };
        let shared = shared.as_deref();
        let counts: Vec<Result<usize>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut rejections = 0;
                        for run in (w..runs).step_by(workers) {
                            let mut rng = run_rng(seed, point, run);
                            if config.run(scenario, samples, &mut rng, shared)? {
                                rejections += 1;
                            }
                        }
                        Ok(rejections)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        let mut rejections = 0;
        for c in counts {
            rejections += c?;
        }
        rows.push(PowerRow::new(samples, runs, rejections));
    }
    Ok(rows)
}
