//! Deterministic indexed parallelism: results depend only on the index,
//! never on the worker count or scheduling.

/// Map `f` over `0..n` using up to `jobs` threads; output order is by
/// index regardless of how work is scheduled.
pub fn par_map_indexed<T, F>(jobs: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let jobs = jobs.min(n);
    let chunk = n.div_ceil(jobs);
    let mut chunks: Vec<(usize, Vec<T>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                let f = &f;
                let start = w * chunk;
                let end = ((w + 1) * chunk).min(n);
                scope.spawn(move || (start, (start..end).map(f).collect::<Vec<T>>()))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    chunks.sort_by_key(|(start, _)| *start);
    chunks.into_iter().flat_map(|(_, v)| v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_is_index_ordered_for_any_job_count() {
        let serial = par_map_indexed(1, 101, |i| i * i);
        for jobs in [2, 3, 8, 64] {
            assert_eq!(par_map_indexed(jobs, 101, |i| i * i), serial);
        }
    }

    #[test]
    fn empty_and_single_inputs() {
        assert_eq!(par_map_indexed(4, 0, |i| i), Vec::<usize>::new());
        assert_eq!(par_map_indexed(4, 1, |i| i + 7), vec![7]);
    }
}
