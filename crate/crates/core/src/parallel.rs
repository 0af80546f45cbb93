//! Minimal fork-join helper.
//!
//! All numeric code is single-threaded unless the `USBF_THREADS` environment
//! variable requests more workers. Work is split into fixed chunks whose
//! boundaries do not depend on the worker count, and every output element is
//! written by exactly one worker, so results are bit-identical regardless of
//! how many threads run.

use std::env;
use std::sync::Mutex;

/// Number of worker threads to use (defaults to 1).
pub fn worker_count() -> usize {
    env::var("USBF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Runs `job(chunk_index, chunk)` over contiguous chunks of `data` of length
/// `chunk_len` (the final chunk may be shorter). Chunk boundaries depend only
/// on `chunk_len`, never on the worker count, and each chunk is written by
/// exactly one worker.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, job: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    assert!(chunk_len > 0, "chunk_len must be positive");
    let workers = worker_count();
    if workers <= 1 || data.len() <= chunk_len {
        for (idx, chunk) in data.chunks_mut(chunk_len).enumerate() {
            job(idx, chunk);
        }
        return;
    }
    let queue: Mutex<Vec<(usize, &mut [T])>> =
        Mutex::new(data.chunks_mut(chunk_len).enumerate().collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                match item {
                    Some((idx, chunk)) => job(idx, chunk),
                    None => break,
                }
            });
        }
    });
}
