//! Scoped worker pool for independent report cells.
//!
//! Jobs are pure functions of their index; workers stride over the index
//! space and results are merged back in index order, so the output is
//! identical for every thread count.

pub fn resolve_threads(flag: Option<usize>) -> usize {
    if let Ok(value) = std::env::var("NETFLOW_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    if let Some(n) = flag {
        return n.max(1);
    }
    std::thread::available_parallelism()
        .map(std::num::NonZeroUsize::get)
        .unwrap_or(1)
}

pub fn parallel_map<T, F>(jobs: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = threads.min(jobs).max(1);
    if workers == 1 {
        return (0..jobs).map(f).collect();
    }
    let mut collected: Vec<(usize, T)> = Vec::with_capacity(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || {
                    let mut local = Vec::new();
                    let mut i = w;
                    while i < jobs {
                        local.push((i, f(i)));
                        i += workers;
                    }
                    local
                })
            })
            .collect();
        for handle in handles {
            collected.extend(handle.join().expect("worker panicked"));
        }
    });
    collected.sort_by_key(|&(i, _)| i);
    collected.into_iter().map(|(_, v)| v).collect()
}
