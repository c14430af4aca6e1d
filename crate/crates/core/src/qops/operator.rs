use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOL_HERM: f64 = 1e-10;
pub const TOL_POS: f64 = 1e-8;
pub const TOL_TR: f64 = 1e-9;
pub const TOL_JUMP_TRACE: f64 = 1e-14;

pub const MAX_DIM: usize = 64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dimension of the system Hilbert space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct HilbertDim(usize);

impl HilbertDim {
    pub fn new(n: usize) -> Result<Self> {
        if (1..=MAX_DIM).contains(&n) {
            Ok(Self(n))
        } else {
            Err(Error::InvalidDimension(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for HilbertDim {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<HilbertDim> for usize {
    fn from(d: HilbertDim) -> usize {
        d.0
    }
}

/// Dense complex operator on an n-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<Complex64>,
}

impl Operator {
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch { expected: mat.nrows(), got: mat.ncols() });
        }
        HilbertDim::new(mat.nrows())?;
        Ok(Self { mat })
    }

    pub(crate) fn from_matrix_unchecked(mat: DMatrix<Complex64>) -> Self {
        Self { mat }
    }

    pub fn zeros(dim: HilbertDim) -> Self {
        Self { mat: DMatrix::zeros(dim.0, dim.0) }
    }

    pub fn identity(dim: HilbertDim) -> Self {
        Self { mat: DMatrix::identity(dim.0, dim.0) }
    }

    /// Row-major construction from nested rows of complex entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        HilbertDim::new(n)?;
        Ok(Self { mat: DMatrix::from_fn(n, n, |i, j| rows[i][j]) })
    }

    pub fn from_fn(dim: HilbertDim, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        Self { mat: DMatrix::from_fn(dim.0, dim.0, f) }
    }

    /// Projector |k⟩⟨k| onto a basis state.
    pub fn basis_projector(dim: HilbertDim, k: usize) -> Self {
        let mut op = Self::zeros(dim);
        op.mat[(k, k)] = Complex64::new(1.0, 0.0);
        op
    }

    /// Annihilation operator truncated to `dim` Fock states.
    pub fn annihilation(dim: HilbertDim) -> Self {
        Self::from_fn(
            dim,
            |i, j| {
                if j == i + 1 {
                    Complex64::new((j as f64).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
        )
    }

    pub fn dim(&self) -> HilbertDim {
        HilbertDim(self.mat.nrows())
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.mat[(i, j)] = value;
    }

    pub fn dagger(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { mat: &self.mat * s }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Operator plus a multiple of the identity (e.g. c + μ).
    pub fn shifted(&self, mu: Complex64) -> Self {
        let mut out = self.clone();
        for k in 0..self.n() {
            out.mat[(k, k)] += mu;
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self { mat: &self.mat * &other.mat - &other.mat * &self.mat }
    }

    pub fn expectation(&self, rho: &Self) -> Complex64 {
        (&self.mat * &rho.mat).trace()
    }

    pub fn hermitian_part(&self) -> Self {
        Self { mat: (&self.mat + self.mat.adjoint()) * Complex64::new(0.5, 0.0) }
    }

    /// Largest |A_ij − conj(A_ji)|.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.hermitian_part().mat.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// ½‖A‖₁ for Hermitian A.
    pub fn half_trace_norm(&self) -> f64 {
        0.5 * self.eigenvalues().iter().map(|e| e.abs()).sum::<f64>()
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Validates the density-operator role: Hermitian, positive, and trace near `target`.
    pub fn check_density(&self, target_trace: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > TOL_HERM {
            return Err(Error::InvalidParameter(format!("operator is not Hermitian (error {herm:e})")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -TOL_POS {
            return Err(Error::InvalidParameter(format!("operator is not positive (min eigenvalue {min_ev:e})")));
        }
        let tr = self.trace().re;
        if (tr - target_trace).abs() > TOL_TR {
            return Err(Error::InvalidParameter(format!("trace {tr} differs from {target_trace}")));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.mat - &other.mat).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn ensure_same_dim(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: other.n() });
        }
        Ok(())
    }
}

/// Trace distance ½‖a − b‖₁.
pub fn trace_distance(a: &Operator, b: &Operator) -> Result<f64> {
    a.ensure_same_dim(b)?;
    Ok((a - b).half_trace_norm())
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat + &rhs.mat }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat - &rhs.mat }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { mat: &self.mat * &rhs.mat }
    }
}

/// Two-level operators in the basis {|g⟩ = 0, |e⟩ = 1}.
pub mod two_level {
    use super::*;

    fn dim2() -> HilbertDim {
        HilbertDim(2)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// σ₋ = |g⟩⟨e|.
    pub fn sigma_minus() -> Operator {
        Operator::from_fn(dim2(), |i, j| if i == 0 && j == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    pub fn sigma_plus() -> Operator {
        sigma_minus().dagger()
    }

    /// x quadrature σ₋ + σ₊.
    pub fn sigma_x() -> Operator {
        &sigma_minus() + &sigma_plus()
    }

    /// y quadrature −i(σ₋ − σ₊).
    pub fn sigma_y() -> Operator {
        (&sigma_minus() - &sigma_plus()).scale(-I)
    }

    /// |e⟩⟨e| − |g⟩⟨g|.
    pub fn sigma_z() -> Operator {
        &excited() - &ground()
    }

    pub fn ground() -> Operator {
        Operator::basis_projector(dim2(), 0)
    }

    pub fn excited() -> Operator {
        Operator::basis_projector(dim2(), 1)
    }

    /// |+⟩⟨+| with |+⟩ = (|g⟩ + |e⟩)/√2, the +1 eigenstate of σ_x.
    pub fn plus_x() -> Operator {
        Operator::from_fn(dim2(), |_, _| c(0.5, 0.0))
    }

    pub fn maximally_mixed() -> Operator {
        Operator::identity(dim2()).scale_re(0.5)
    }

    /// Density operator with the given Bloch vector.
    pub fn from_bloch(r: [f64; 3]) -> Operator {
        let mut rho = Operator::identity(dim2());
        rho = &rho + &sigma_x().scale_re(r[0]);
        rho = &rho + &sigma_y().scale_re(r[1]);
        rho = &rho + &sigma_z().scale_re(r[2]);
        rho.scale_re(0.5)
    }

    /// (⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩) of a two-level operator.
    pub fn bloch_vector(rho: &Operator) -> [f64; 3] {
        [sigma_x().expectation(rho).re, sigma_y().expectation(rho).re, sigma_z().expectation(rho).re]
    }
}

#[cfg(test)]
mod tests {
    use super::two_level::*;
    use super::*;

    #[test]
    fn dimension_bounds() {
        assert!(HilbertDim::new(0).is_err());
        assert!(HilbertDim::new(1).is_ok());
        assert!(HilbertDim::new(64).is_ok());
        assert!(matches!(HilbertDim::new(65), Err(Error::InvalidDimension(65))));
    }

    #[test]
    fn rejects_ragged_rows() {
        let rows = vec![vec![Complex64::new(1.0, 0.0)], vec![]];
        assert!(Operator::from_rows(&rows).is_err());
    }

    #[test]
    fn pauli_algebra() {
        let sx = sigma_x();
        let sy = sigma_y();
        let sz = sigma_z();
        // σz is |e⟩⟨e| − |g⟩⟨g| with |g⟩ first, so [σx, σy] = −2iσz
        let comm = sx.commutator(&sy);
        assert!(comm.max_abs_diff(&sz.scale(Complex64::new(0.0, -2.0))) < 1e-15);
        assert!(sy.is_hermitian(0.0));
    }

    #[test]
    fn bloch_round_trip() {
        let r = [0.3, -0.4, 0.5];
        let rho = from_bloch(r);
        let back = bloch_vector(&rho);
        for k in 0..3 {
            assert!((back[k] - r[k]).abs() < 1e-15);
        }
        assert_eq!(bloch_vector(&excited()), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn trace_distance_of_orthogonal_states_is_one() {
        let d = trace_distance(&excited(), &ground()).unwrap();
        assert!((d - 1.0).abs() < 1e-14);
        assert_eq!(trace_distance(&excited(), &excited()).unwrap(), 0.0);
    }

    #[test]
    fn density_check() {
        assert!(plus_x().check_density(1.0).is_ok());
        assert!(sigma_z().check_density(0.0).is_err());
        assert!(ground().scale_re(2.0).check_density(1.0).is_err());
    }

    #[test]
    fn annihilation_matches_sigma_minus_for_two_levels() {
        let a = Operator::annihilation(HilbertDim::new(2).unwrap());
        assert_eq!(a, sigma_minus());
    }
}
