//! Episode batches: data-parallel with rayon when the `parallel` feature is
//! on, sequential otherwise. Results keep the input order.

use crate::error::Result;
use crate::model::WrapperConfig;
use crate::sim::{run_episode, EpisodeConfig, EpisodeRecord};

/// Runs every episode on the calling thread.
pub fn run_sequential(episodes: &[EpisodeConfig], wcfg: &WrapperConfig) -> Result<Vec<EpisodeRecord>> {
    episodes.iter().map(|e| run_episode(e, wcfg)).collect()
}

/// Runs episodes across the current rayon pool.
#[cfg(feature = "parallel")]
pub fn run_parallel(episodes: &[EpisodeConfig], wcfg: &WrapperConfig) -> Result<Vec<EpisodeRecord>> {
    use rayon::prelude::*;
    episodes.par_iter().map(|e| run_episode(e, wcfg)).collect()
}

/// Runs a batch with `jobs` workers (`0` picks the rayon default). Without
/// the `parallel` feature the batch is sequential whatever `jobs` says.
pub fn run_batch(episodes: &[EpisodeConfig], wcfg: &WrapperConfig, jobs: usize) -> Result<Vec<EpisodeRecord>> {
    #[cfg(feature = "parallel")]
    {
        if jobs == 1 {
            return run_sequential(episodes, wcfg);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| crate::error::PpcError::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| run_parallel(episodes, wcfg))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        run_sequential(episodes, wcfg)
    }
}
