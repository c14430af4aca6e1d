use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integration step; `dt · rate < cap` is enforced by [`StepSize::check_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StepSize(f64);

impl StepSize {
    pub const DEFAULT_RATE_CAP: f64 = 0.1;

    pub fn new(dt: f64) -> Result<Self> {
        if dt > 0.0 && dt.is_finite() {
            Ok(Self(dt))
        } else {
            Err(Error::InvalidParameter(format!("step size {dt} must be positive")))
        }
    }

    /// Step size that is also fine enough for events at `max_rate`.
    pub fn with_rate(dt: f64, max_rate: f64, cap: f64) -> Result<Self> {
        let s = Self::new(dt)?;
        s.check_rate(max_rate, cap)?;
        Ok(s)
    }

    pub fn check_rate(self, max_rate: f64, cap: f64) -> Result<()> {
        if self.0 * max_rate >= cap {
            return Err(Error::InvalidParameter(format!(
                "dt = {} too coarse for rate {max_rate} (dt·rate must stay below {cap})",
                self.0
            )));
        }
        Ok(())
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for StepSize {
    type Error = Error;
    fn try_from(dt: f64) -> Result<Self> {
        Self::new(dt)
    }
}

impl From<StepSize> for f64 {
    fn from(s: StepSize) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    Sampled,
    External,
}

/// Per-step photocount flags.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpNoise {
    pub dt: f64,
    pub flags: Vec<bool>,
    pub source: NoiseSource,
}

/// Per-step Wiener increments (units √time).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveNoise {
    pub dt: f64,
    pub increments: Vec<f64>,
    pub source: NoiseSource,
}

fn write_rows<T: Serialize + Copy>(dt: f64, values: &[T], header: &str, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["t", header])?;
    for (k, v) in values.iter().enumerate() {
        w.serialize((k as f64 * dt, *v))?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(input: impl Read) -> Result<(f64, Vec<T>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let mut ts = Vec::new();
    let mut values = Vec::new();
    for row in r.deserialize::<(f64, T)>() {
        let (t, v) = row?;
        ts.push(t);
        values.push(v);
    }
    let dt = if ts.len() > 1 { ts[1] - ts[0] } else { 0.0 };
    for (k, t) in ts.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::Parse(format!("non-uniform time column at row {k}")));
        }
    }
    Ok((dt, values))
}

impl JumpNoise {
    pub fn external(dt: f64, flags: Vec<bool>) -> Self {
        Self { dt, flags, source: NoiseSource::External }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let v: Vec<u8> = self.flags.iter().map(|&f| f as u8).collect();
        write_rows(self.dt, &v, "dN", out)
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let (dt, v) = read_rows::<u8>(input)?;
        let flags = v
            .into_iter()
            .map(|x| match x {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::Parse(format!("dN must be 0 or 1, got {other}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self::external(dt, flags))
    }
}

impl DiffusiveNoise {
    /// `steps` i.i.d. Normal(0, dt) increments.
    pub fn sample(dt: StepSize, steps: usize, rng: &mut impl Rng) -> Self {
        let sd = dt.get().sqrt();
        let increments = (0..steps).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
        Self { dt: dt.get(), increments, source: NoiseSource::Sampled }
    }

    pub fn external(dt: f64, increments: Vec<f64>) -> Self {
        Self { dt, increments, source: NoiseSource::External }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_rows(self.dt, &self.increments, "dW", out)
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let (dt, increments) = read_rows::<f64>(input)?;
        Ok(Self::external(dt, increments))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_size_guards() {
        assert!(StepSize::new(0.0).is_err());
        assert!(StepSize::new(f64::NAN).is_err());
        assert!(StepSize::with_rate(1e-3, 50.0, 0.1).is_ok());
        assert!(StepSize::with_rate(1e-2, 50.0, 0.1).is_err());
    }

    #[test]
    fn increment_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dt = StepSize::new(0.01).unwrap();
        let m = 200_000;
        let n = DiffusiveNoise::sample(dt, m, &mut rng);
        let mean = n.increments.iter().sum::<f64>() / m as f64;
        let var = n.increments.iter().map(|x| x * x).sum::<f64>() / m as f64;
        // E[dW] = 0, E[dW²] = dt
        assert!(mean.abs() < 3.0 * (0.01f64 / m as f64).sqrt());
        let var_se = 0.01 * (2.0 / m as f64).sqrt();
        assert!((var - 0.01).abs() < 3.0 * var_se);
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = DiffusiveNoise::sample(StepSize::new(0.5).unwrap(), 10, &mut rng);
        let mut buf = Vec::new();
        n.write_csv(&mut buf).unwrap();
        let back = DiffusiveNoise::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.increments, n.increments);
        assert_eq!(back.dt, 0.5);

        let j = JumpNoise::external(0.25, vec![false, true, false]);
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        assert_eq!(JumpNoise::read_csv(buf.as_slice()).unwrap(), j);
    }

    #[test]
    fn bad_flag_rejected() {
        let text = "t,dN\n0,0\n0.1,2\n";
        assert!(JumpNoise::read_csv(text.as_bytes()).is_err());
    }
}
