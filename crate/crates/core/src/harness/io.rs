use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::qops::{two_level, Hermitian, HilbertDim};
use crate::receiver::read_voltage_record;

pub const HASH_PREFIX: &str = "# config_sha256: ";

/// Column names for a state: the Bloch vector for two-level systems,
/// otherwise populations `p_i` and coherences `re_i_j`, `im_i_j` (i < j).
pub fn state_columns(n: usize) -> Vec<String> {
    if n == 2 {
        return vec!["bx".into(), "by".into(), "bz".into()];
    }
    let mut cols: Vec<String> = (0..n).map(|i| format!("p_{i}")).collect();
    for i in 0..n {
        for j in i + 1..n {
            cols.push(format!("re_{i}_{j}"));
            cols.push(format!("im_{i}_{j}"));
        }
    }
    cols
}

pub fn state_values(h: &Hermitian) -> Vec<f64> {
    let n = h.dim().get();
    if n == 2 {
        return two_level::bloch_vector(&h.to_operator()).to_vec();
    }
    let c = h.coords();
    let mut out: Vec<f64> = (0..n).map(|i| c[i * n + i]).collect();
    for i in 0..n {
        for j in i + 1..n {
            out.push(c[i * n + j]);
            out.push(c[j * n + i]);
        }
    }
    out
}

pub fn state_from_values(dim: HilbertDim, values: &[f64]) -> Hermitian {
    let n = dim.get();
    if n == 2 {
        return Hermitian::from_operator(&two_level::from_bloch([values[0], values[1], values[2]]));
    }
    let mut coords = vec![0.0; n * n];
    for i in 0..n {
        coords[i * n + i] = values[i];
    }
    let mut k = n;
    for i in 0..n {
        for j in i + 1..n {
            coords[i * n + j] = values[k];
            coords[j * n + i] = values[k + 1];
            k += 2;
        }
    }
    Hermitian::from_coords(dim, coords)
}

/// Dimension whose state column count is `cols`.
fn dim_for_columns(cols: usize) -> Option<HilbertDim> {
    if cols == 3 {
        return HilbertDim::new(2).ok();
    }
    (1..=64).find(|&n| n * n == cols && n != 2).and_then(|n| HilbertDim::new(n).ok())
}

/// Conditioned states at snapshot times along one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub dim: HilbertDim,
    pub observable_name: String,
    pub times: Vec<f64>,
    pub states: Vec<Hermitian>,
    pub observables: Vec<f64>,
}

impl TrajectoryTable {
    pub fn new(dim: HilbertDim, observable_name: &str) -> Self {
        Self { dim, observable_name: observable_name.into(), times: vec![], states: vec![], observables: vec![] }
    }

    pub fn push(&mut self, t: f64, state: Hermitian, observable: f64) {
        self.times.push(t);
        self.states.push(state);
        self.observables.push(observable);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `t, <state columns>, purity, <observable>` with an optional config hash line.
    pub fn write_csv(&self, mut out: impl Write, hash: Option<&str>) -> Result<()> {
        if let Some(h) = hash {
            writeln!(out, "{HASH_PREFIX}{h}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(state_columns(self.dim.get()));
        header.push("purity".into());
        header.push(self.observable_name.clone());
        w.write_record(&header)?;
        for ((t, s), o) in self.times.iter().zip(&self.states).zip(&self.observables) {
            let mut row = vec![*t];
            row.extend(state_values(s));
            row.push(s.purity());
            row.push(*o);
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 4 || header[0] != "t" || header[header.len() - 2] != "purity" {
            return Err(Error::Parse(format!("not a trajectory table header: {header:?}")));
        }
        let cols = header.len() - 3;
        let dim = dim_for_columns(cols).ok_or_else(|| Error::Parse(format!("{cols} state columns")))?;
        if header[1..1 + cols] != state_columns(dim.get())[..] {
            return Err(Error::Parse(format!("unexpected state columns {:?}", &header[1..1 + cols])));
        }
        let mut table = Self::new(dim, &header[header.len() - 1]);
        for row in r.deserialize() {
            let row: Vec<f64> = row?;
            table.push(row[0], state_from_values(dim, &row[1..1 + cols]), row[row.len() - 1]);
        }
        Ok(table)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(BufReader::new(File::open(path)?))
    }
}

/// Writes a per-step record as `step,record` under a config hash line.
pub fn write_record(path: &Path, hash: &str, values: &[f64]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{HASH_PREFIX}{hash}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "record"])?;
    for (k, v) in values.iter().enumerate() {
        w.serialize((k as u64, *v))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_record(path: &Path) -> Result<Vec<f64>> {
    read_voltage_record(BufReader::new(File::open(path)?))
}

/// Config hash recorded in the first line of an output file, if any.
pub fn read_hash(path: &Path) -> Result<Option<String>> {
    let mut line = String::new();
    BufReader::new(File::open(path)?).read_line(&mut line)?;
    Ok(line.trim_end().strip_prefix(HASH_PREFIX).map(str::to_string))
}

/// Writes rows of numbers under a header (and an optional hash line).
pub fn write_table(path: &Path, hash: Option<&str>, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    if let Some(h) = hash {
        writeln!(out, "{HASH_PREFIX}{h}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::testutil::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2usize, 3] {
            let dim = HilbertDim::new(n).unwrap();
            let mut t = TrajectoryTable::new(dim, "counts");
            for k in 0..5 {
                t.push(k as f64 * 0.1, Hermitian::from_operator(&random_density(dim, &mut rng)), k as f64);
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf, Some("abc")).unwrap();
            assert!(String::from_utf8_lossy(&buf).starts_with("# config_sha256: abc\nt,"));
            let back = TrajectoryTable::read_csv(&buf[..]).unwrap();
            assert_eq!(back.times, t.times);
            assert_eq!(back.observable_name, "counts");
            for (a, b) in back.states.iter().zip(&t.states) {
                assert!(a.to_operator().max_abs_diff(&b.to_operator()) < 1e-15);
            }
        }
    }

    #[test]
    fn record_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let values = vec![0.1 + 0.2, -1e-300, 7.0, f64::MIN_POSITIVE];
        write_record(&path, "h", &values).unwrap();
        assert_eq!(read_record(&path).unwrap(), values);
        assert_eq!(read_hash(&path).unwrap().as_deref(), Some("h"));
    }
}
