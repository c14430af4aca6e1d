//! `{"dim": n, "re": [[...]], "im": [[...]]}` matrix files.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::{HilbertDim, Operator};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&Operator> for MatrixJson {
    fn from(op: &Operator) -> Self {
        let n = op.n();
        let re = (0..n).map(|i| (0..n).map(|j| op.get(i, j).re).collect()).collect();
        let im = (0..n).map(|i| (0..n).map(|j| op.get(i, j).im).collect()).collect();
        Self { dim: n, re, im }
    }
}

impl TryFrom<MatrixJson> for Operator {
    type Error = Error;
    fn try_from(m: MatrixJson) -> Result<Self> {
        let dim = HilbertDim::new(m.dim)?;
        let ok = m.re.len() == m.dim && m.im.len() == m.dim && m.re.iter().chain(&m.im).all(|row| row.len() == m.dim);
        if !ok {
            return Err(Error::Parse(format!("matrix rows do not match dim = {}", m.dim)));
        }
        Ok(Operator::from_fn(dim, |i, j| Complex64::new(m.re[i][j], m.im[i][j])))
    }
}

pub fn to_json(op: &Operator) -> String {
    serde_json::to_string(&MatrixJson::from(op)).expect("matrix serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<Operator> {
    let m: MatrixJson = serde_json::from_str(text)?;
    Operator::try_from(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::operator::two_level::*;

    #[test]
    fn round_trip() {
        let op = sigma_y();
        let back = from_json(&to_json(&op)).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn literal_format() {
        let text = r#"{"dim": 2, "re": [[0, 1], [0, 0]], "im": [[0, 0], [0, 0]]}"#;
        assert_eq!(from_json(text).unwrap(), sigma_minus());
    }

    #[test]
    fn ragged_rejected() {
        let text = r#"{"dim": 2, "re": [[0, 1]], "im": [[0, 0], [0, 0]]}"#;
        assert!(matches!(from_json(text), Err(Error::Parse(_))));
    }
}
