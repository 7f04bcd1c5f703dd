//! Bounded worker fan-out for per-image stage work.
//!
//! `FUNDUS_THREADS` caps the worker count. Results land in input order, so
//! output artifacts are identical no matter how many workers run.

pub fn worker_count(items: usize) -> usize {
    let configured = std::env::var("FUNDUS_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(std::num::NonZeroUsize::get)
                .unwrap_or(1)
        });
    configured.min(items.max(1))
}

/// Applies `f` to every item on up to `worker_count` scoped threads; the
/// result vector matches the input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = worker_count(items.len());
    if workers <= 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (worker, out_chunk) in results.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let start = worker * chunk;
                for (k, slot) in out_chunk.iter_mut().enumerate() {
                    *slot = Some(f(start + k, &items[start + k]));
                }
            });
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("worker filled slot"))
        .collect()
}
