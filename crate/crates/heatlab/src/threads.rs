//! Process-wide cap on worker threads for the row-parallel kernels.
//! Outputs are identical for every cap: workers own disjoint row chunks and
//! no reduction depends on scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};

static THREAD_CAP: AtomicUsize = AtomicUsize::new(1);

pub fn set_thread_cap(cap: usize) {
    THREAD_CAP.store(cap.max(1), Ordering::Relaxed);
}

pub fn thread_cap() -> usize {
    THREAD_CAP.load(Ordering::Relaxed)
}

/// Runs `work(start_row, chunk)` over disjoint consecutive chunks of `rows`,
/// on up to `thread_cap()` scoped workers.
pub fn for_row_chunks<T: Send>(
    rows: &mut [T],
    width: usize,
    work: impl Fn(usize, &mut [T]) + Sync,
) {
    let cap = thread_cap();
    let n_rows = rows.len() / width.max(1);
    if cap <= 1 || n_rows < 2 * cap {
        work(0, rows);
        return;
    }
    let chunk_rows = n_rows.div_ceil(cap);
    std::thread::scope(|scope| {
        for (k, chunk) in rows.chunks_mut(chunk_rows * width).enumerate() {
            let work = &work;
            scope.spawn(move || work(k * chunk_rows, chunk));
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking_is_cap_independent() {
        let width = 7;
        let fill = |start_row: usize, chunk: &mut [f64]| {
            for (r, row) in chunk.chunks_mut(width).enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = ((start_row + r) * 31 + c) as f64 * 0.5;
                }
            }
        };
        let mut a = vec![0.0; 23 * width];
        set_thread_cap(1);
        for_row_chunks(&mut a, width, fill);
        let mut b = vec![0.0; 23 * width];
        set_thread_cap(4);
        for_row_chunks(&mut b, width, fill);
        set_thread_cap(1);
        assert_eq!(a, b);
    }
}
