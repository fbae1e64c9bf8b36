use follower_core::sim::{ChunkedEstimator, SimEstimate};
use rayon::prelude::*;

/// Run the chunks on the rayon pool. Chunks are merged in index order, so the
/// result equals the sequential one bit for bit.
pub fn run_parallel<E: ChunkedEstimator>(est: &E) -> follower_core::Result<SimEstimate> {
    let parts: Vec<E::Acc> = (0..est.chunks()).into_par_iter().map(|i| est.run_chunk(i)).collect();
    est.finalize(parts)
}
