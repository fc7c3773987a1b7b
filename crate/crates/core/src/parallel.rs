//! Worker-count plumbing.
//!
//! Operators may split work across threads, but every output element is
//! produced by exactly one task with a fixed internal accumulation order, so
//! results are bit-identical for any worker count. The count is a process
//! setting: `INXT_THREADS` provides the default, [`set_threads`] overrides it
//! (the CLI maps `--threads` here).

use std::sync::atomic::{AtomicUsize, Ordering};

// 0 means "not yet resolved".
static THREADS: AtomicUsize = AtomicUsize::new(0);

fn default_threads() -> usize {
    if let Ok(v) = std::env::var("INXT_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Set the worker count for subsequent operator calls; `0` restores the
/// environment/hardware default.
pub fn set_threads(n: usize) {
    let n = if n == 0 { default_threads() } else { n };
    THREADS.store(n, Ordering::Relaxed);
}

/// Current worker count.
pub fn threads() -> usize {
    let t = THREADS.load(Ordering::Relaxed);
    if t != 0 {
        return t;
    }
    let t = default_threads();
    THREADS.store(t, Ordering::Relaxed);
    t
}

/// Run `worker(slab_index, slab)` for every consecutive `slab_len` chunk of
/// `data`, distributing contiguous runs of slabs over the configured workers.
///
/// `data.len()` must be a multiple of `slab_len`. Each slab is written by one
/// task only.
pub(crate) fn par_slabs<T, F>(data: &mut [T], slab_len: usize, worker: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert!(slab_len > 0 && data.len() % slab_len == 0);
    let n_slabs = data.len() / slab_len;
    let t = threads().min(n_slabs).max(1);
    if t <= 1 {
        for (i, slab) in data.chunks_mut(slab_len).enumerate() {
            worker(i, slab);
        }
        return;
    }
    let per = n_slabs.div_ceil(t);
    std::thread::scope(|scope| {
        for (chunk_idx, chunk) in data.chunks_mut(per * slab_len).enumerate() {
            let worker = &worker;
            scope.spawn(move || {
                for (j, slab) in chunk.chunks_mut(slab_len).enumerate() {
                    worker(chunk_idx * per + j, slab);
                }
            });
        }
    });
}
