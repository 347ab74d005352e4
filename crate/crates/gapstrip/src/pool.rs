//! Parallel driver for the dispersion sweep. Grid points are handed out
//! through an atomic counter; columns are put back in grid order, and the
//! first failure in grid order is reported, so the result never depends on
//! scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use gapstrip_core::bands::{Column, DispersionDataset, SweepContext, SweepOptions};
use gapstrip_core::geometry::CellSpec;
use gapstrip_core::Error;

pub fn worker_count(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

pub fn solve_all(ctx: &SweepContext, workers: usize) -> Result<Vec<Column>, Error> {
    let n = ctx.len();
    let workers = worker_count(workers).min(n.max(1));
    let mut slots: Vec<Option<Result<Column, Error>>> = (0..n).map(|_| None).collect();
    if workers <= 1 {
        for (i, slot) in slots.iter_mut().enumerate() {
            *slot = Some(ctx.solve_at(i));
        }
    } else {
        let next = AtomicUsize::new(0);
        let parts: Vec<Vec<(usize, Result<Column, Error>)>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut out = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::Relaxed);
                            if i >= n {
                                break out;
                            }
                            out.push((i, ctx.solve_at(i)));
                        }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
        });
        for (i, r) in parts.into_iter().flatten() {
            slots[i] = Some(r);
        }
    }
    slots.into_iter().map(|s| s.expect("every grid point solved")).collect()
}

pub fn sweep(spec: &CellSpec, opts: &SweepOptions, workers: usize) -> Result<DispersionDataset, Error> {
    let ctx = SweepContext::new(spec, opts)?;
    let columns = solve_all(&ctx, workers)?;
    Ok(ctx.assemble(columns))
}
