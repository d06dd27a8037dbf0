//! Deterministic fan-out of Monte Carlo replicas.
//!
//! Replica `k` always draws from `rng.replica(k)`. Replicas are grouped in
//! fixed-size blocks, blocks run on the rayon pool, and block results are
//! merged in index order, so output is independent of the thread count.

use rayon::prelude::*;

use crate::samplers::RngStream;

pub(crate) const BLOCK: usize = 256;

/// Runs `body` once per replica, folding into one accumulator per block,
/// then merges the blocks left to right.
pub(crate) fn fold_replicas<A, F, M>(rng: &RngStream, replicas: usize, init: impl Fn() -> A + Sync, body: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, &mut RngStream) + Sync,
    M: Fn(&mut A, A),
{
    let blocks = replicas.div_ceil(BLOCK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let hi = ((b + 1) * BLOCK).min(replicas);
            for k in b * BLOCK..hi {
                let mut stream = rng.replica(k as u64);
                body(&mut acc, &mut stream);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// One value per replica, in replica order.
pub(crate) fn collect_replicas<T, F>(rng: &RngStream, replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    fold_replicas(rng, replicas, Vec::new, |v, r| v.push(f(r)), |a, mut b| a.append(&mut b))
}
