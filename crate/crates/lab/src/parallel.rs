//! Deterministic parallel ensembles: fixed chunks, reassembled in trajectory order.

use rayon::prelude::*;
use shrinktarget_core::mcstats::{simulate_chunk, summarize, EnsemblePlan, EnsembleSummary};

/// Trajectories per work unit; independent of the thread count.
pub const CHUNK: usize = 64;

pub fn thread_pool(threads: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?)
}

pub fn hardware_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Hit counts for every trajectory of the plan, row-major as in [`simulate_chunk`].
pub fn simulate(plan: &EnsemblePlan, pool: &rayon::ThreadPool) -> shrinktarget_core::Result<Vec<u32>> {
    let m = plan.trajectories();
    let chunks: Vec<_> = (0..m).step_by(CHUNK).map(|a| a..(a + CHUNK).min(m)).collect();
    let parts = pool.install(|| {
        chunks.into_par_iter().map(|r| simulate_chunk(plan, r)).collect::<shrinktarget_core::Result<Vec<Vec<u32>>>>()
    })?;
    Ok(parts.concat())
}

pub fn run_ensemble(plan: &EnsemblePlan, pool: &rayon::ThreadPool) -> shrinktarget_core::Result<EnsembleSummary> {
    summarize(plan, simulate(plan, pool)?)
}
