//! Certificate-probability sweep spread over a rayon pool.

use gne_core::experiments::{run_trial, SweepConfig, SweepCounts, SweepRow};
use rayon::prelude::*;

/// Same table as the serial sweep in `gne_core`, for any thread count.
/// Work is split by (grid point, trial) and only counts are merged.
pub fn parallel_sweep(cfg: &SweepConfig, threads: Option<usize>) -> anyhow::Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let jobs = cfg.proximity_grid.len() * cfg.trials;
    let counts = pool.install(|| {
        (0..jobs)
            .into_par_iter()
            .try_fold(
                || SweepCounts::new(cfg),
                |mut acc, job| {
                    let (g, trial) = (job / cfg.trials, job % cfg.trials);
                    acc.add(g, &run_trial(cfg, g, trial)?);
                    Ok::<_, gne_core::Error>(acc)
                },
            )
            .try_reduce(|| SweepCounts::new(cfg), |a, b| Ok(a.merge(&b)))
    })?;
    Ok(counts.rows(cfg))
}
