use rayon::prelude::*;

/// How independent runs are dispatched. Output order is the index order either way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

pub fn map_runs<T, F>(count: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Parallel => (0..count).into_par_iter().map(f).collect(),
        Execution::Serial => (0..count).map(f).collect(),
    }
}
