use super::io::{state_columns, state_values};
use crate::error::Result;
use crate::qops::{trace_distance, Hermitian, HilbertDim, Operator};

/// Mean and standard error across trajectories at each snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub dim: HilbertDim,
    pub trajectories: usize,
    pub observable_name: String,
    pub times: Vec<f64>,
    /// Ensemble-averaged conditioned state per snapshot.
    pub mean_states: Vec<Operator>,
    /// Per snapshot: (mean, standard error) of each state column, purity and the observable.
    pub columns: Vec<Vec<(f64, f64)>>,
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl SummaryStats {
    /// `rows[i]` holds trajectory i's snapshots as produced by
    /// [`Engine::sampled_snapshots`](super::Engine::sampled_snapshots).
    /// Sums run in trajectory order, so the result is reproducible bit for bit.
    pub fn from_snapshots(dim: HilbertDim, observable_name: &str, times: &[f64], rows: &[Vec<f64>]) -> Self {
        let n2 = dim.get().pow(2);
        let width = n2 + 2;
        let mut mean_states = Vec::with_capacity(times.len());
        let mut columns = Vec::with_capacity(times.len());
        for b in 0..times.len() {
            let bin = |r: &Vec<f64>| r[b * width..(b + 1) * width].to_vec();
            let snaps: Vec<Vec<f64>> = rows.iter().map(bin).collect();
            let mut acc = vec![0.0; n2];
            for s in &snaps {
                acc.iter_mut().zip(&s[..n2]).for_each(|(a, x)| *a += x);
            }
            acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
            mean_states.push(Hermitian::from_coords(dim, acc).to_operator());

            let shown: Vec<Vec<f64>> =
                snaps.iter().map(|s| state_values(&Hermitian::from_coords(dim, s[..n2].to_vec()))).collect();
            let mut col: Vec<(f64, f64)> =
                (0..shown[0].len()).map(|c| mean_se(shown.iter().map(move |v| v[c]))).collect();
            col.push(mean_se(snaps.iter().map(|s| s[n2])));
            col.push(mean_se(snaps.iter().map(|s| s[n2 + 1])));
            columns.push(col);
        }
        Self {
            dim,
            trajectories: rows.len(),
            observable_name: observable_name.into(),
            times: times.to_vec(),
            mean_states,
            columns,
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let mut names = state_columns(self.dim.get());
        names.push("purity".into());
        names.push(self.observable_name.clone());
        for c in names {
            h.push(format!("{c}_se"));
            h.insert(h.len() - 1, c);
        }
        h
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.times
            .iter()
            .zip(&self.columns)
            .map(|(t, cols)| std::iter::once(*t).chain(cols.iter().flat_map(|(m, s)| [*m, *s])).collect())
            .collect()
    }

    /// Largest trace distance between the ensemble mean and `reference` over all snapshots.
    pub fn max_distance_to(&self, reference: &[Operator]) -> Result<f64> {
        self.mean_states
            .iter()
            .zip(reference)
            .map(|(a, b)| trace_distance(a, b))
            .try_fold(0.0, |m, d| Ok(f64::max(m, d?)))
    }
}

/// Rows `t, <state columns>, purity` for a series of states.
pub fn state_series_rows(times: &[f64], states: &[Operator]) -> (Vec<String>, Vec<Vec<f64>>) {
    let n = states.first().map_or(2, Operator::n);
    let mut header = vec!["t".to_string()];
    header.extend(state_columns(n));
    header.push("purity".into());
    let rows = times
        .iter()
        .zip(states)
        .map(|(t, s)| {
            let h = Hermitian::from_operator(s);
            std::iter::once(*t).chain(state_values(&h)).chain([h.purity()]).collect()
        })
        .collect();
    (header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::two_level;

    #[test]
    fn means_and_errors() {
        let dim = HilbertDim::new(2).unwrap();
        let a = Hermitian::from_operator(&two_level::ground());
        let b = Hermitian::from_operator(&two_level::excited());
        let row = |h: &Hermitian, o: f64| {
            let mut r = h.coords().to_vec();
            r.push(h.purity());
            r.push(o);
            r
        };
        let rows = vec![row(&a, 0.0), row(&b, 2.0)];
        let s = SummaryStats::from_snapshots(dim, "counts", &[0.0], &rows);
        assert!(s.mean_states[0].max_abs_diff(&two_level::maximally_mixed()) < 1e-15);
        let bz = s.columns[0][2];
        assert_eq!(bz.0, 0.0);
        assert!((bz.1 - 1.0).abs() < 1e-15);
        assert_eq!(s.columns[0][4], (1.0, 1.0));
        assert_eq!(
            s.header(),
            ["t", "bx", "bx_se", "by", "by_se", "bz", "bz_se", "purity", "purity_se", "counts", "counts_se"]
        );
        assert_eq!(s.rows()[0].len(), 11);
    }
}
