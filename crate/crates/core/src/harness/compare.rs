use std::io::Write;

use super::io::TrajectoryTable;
use crate::error::{Error, Result};
use crate::qops::trace_distance;

/// Trace distance between two trajectories at each shared snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

impl Comparison {
    pub fn max_distance(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "trace_distance"])?;
        for (t, d) in self.times.iter().zip(&self.distances) {
            w.serialize((t, d))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fails with [`Error::GridMismatch`] unless both tables share dimension and time grid.
pub fn compare_trajectories(a: &TrajectoryTable, b: &TrajectoryTable) -> Result<Comparison> {
    if a.dim != b.dim {
        return Err(Error::GridMismatch(format!("state dimensions {} and {}", a.dim.get(), b.dim.get())));
    }
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} and {} snapshots", a.len(), b.len())));
    }
    for (k, (ta, tb)) in a.times.iter().zip(&b.times).enumerate() {
        if (ta - tb).abs() > 1e-9 * ta.abs().max(1.0) {
            return Err(Error::GridMismatch(format!("snapshot {k} at t = {ta} and t = {tb}")));
        }
    }
    let distances = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| trace_distance(&x.to_operator(), &y.to_operator()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Comparison { times: a.times.clone(), distances })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{two_level, Hermitian, HilbertDim};

    fn table(times: &[f64], states: &[[f64; 3]]) -> TrajectoryTable {
        let mut t = TrajectoryTable::new(HilbertDim::new(2).unwrap(), "counts");
        for (time, b) in times.iter().zip(states) {
            t.push(*time, Hermitian::from_operator(&two_level::from_bloch(*b)), 0.0);
        }
        t
    }

    #[test]
    fn distances_and_mismatch() {
        let a = table(&[0.0, 0.5], &[[0.0, 0.0, -1.0], [0.0, 0.0, 0.0]]);
        let b = table(&[0.0, 0.5], &[[0.0, 0.0, -1.0], [0.0, 0.0, 0.6]]);
        let c = compare_trajectories(&a, &b).unwrap();
        assert!(c.distances[0] < 1e-15);
        assert!((c.max_distance() - 0.3).abs() < 1e-12);
        let shifted = table(&[0.0, 0.6], &[[0.0, 0.0, -1.0], [0.0, 0.0, 0.0]]);
        assert!(matches!(compare_trajectories(&a, &shifted), Err(Error::GridMismatch(_))));
        let short = table(&[0.0], &[[0.0, 0.0, -1.0]]);
        assert!(matches!(compare_trajectories(&a, &short), Err(Error::GridMismatch(_))));
    }
}
