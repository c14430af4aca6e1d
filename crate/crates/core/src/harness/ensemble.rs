//! Data-parallel map over trajectory indices.
//!
//! Results come back in index order and the first error by index wins, so
//! the parallel and sequential paths give identical output.

use crate::error::Result;

#[cfg(feature = "parallel")]
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

pub fn map_trajectories_sequential<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_trajectories_parallel<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    first_error((0..count).into_par_iter().map(f).collect())
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn map_trajectories<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_trajectories_parallel(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_trajectories_sequential(count, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn order_and_errors_are_by_index() {
        let out = map_trajectories(100, |i| Ok(i * i)).unwrap();
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        let err = map_trajectories(100, |i| if i % 30 == 29 { Err(Error::Parse(format!("{i}"))) } else { Ok(i) })
            .unwrap_err();
        assert_eq!(err.to_string(), "malformed input: 29");
    }
}
