//! Real coordinates for Hermitian operators and real-linear maps between them.
//!
//! An n×n Hermitian operator is stored as n² reals: slot `i*n+i` holds ρ_ii,
//! slot `i*n+j` (i < j) holds Re ρ_ij and slot `j*n+i` holds Im ρ_ij. Every
//! Hermiticity-preserving superoperator is then a real n²×n² matrix, which is
//! what the trajectory steppers apply on their hot paths. Hermiticity of a
//! stepped state is structural in this representation.

use num_complex::Complex64;

use super::operator::{HilbertDim, Operator};

/// Above this Hilbert-space dimension maps are applied term-by-term instead
/// of through a dense n²×n² matrix.
const DENSE_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian {
    n: usize,
    coords: Vec<f64>,
}

impl Hermitian {
    pub fn zeros(dim: HilbertDim) -> Self {
        let n = dim.get();
        Self { n, coords: vec![0.0; n * n] }
    }

    pub fn from_coords(dim: HilbertDim, coords: Vec<f64>) -> Self {
        assert_eq!(coords.len(), dim.get() * dim.get());
        Self { n: dim.get(), coords }
    }

    /// Coordinates of the Hermitian part of `op`.
    pub fn from_operator(op: &Operator) -> Self {
        let n = op.n();
        let mut coords = vec![0.0; n * n];
        write_coords(op, &mut coords);
        Self { n, coords }
    }

    pub fn to_operator(&self) -> Operator {
        coords_to_operator(self.n, &self.coords)
    }

    pub fn dim(&self) -> HilbertDim {
        HilbertDim::new(self.n).expect("dimension validated on construction")
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn trace(&self) -> f64 {
        trace_of(self.n, &self.coords)
    }

    /// Tr[ρ²].
    pub fn purity(&self) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = self.coords[i * n + j];
                acc += if i == j { x * x } else { 2.0 * x * x };
            }
        }
        acc
    }

    pub fn scale(&mut self, s: f64) {
        self.coords.iter_mut().for_each(|x| *x *= s);
    }

    pub fn set_zero(&mut self) {
        self.coords.iter_mut().for_each(|x| *x = 0.0);
    }

    /// self += s · other
    pub fn axpy(&mut self, s: f64, other: &Hermitian) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.coords.iter_mut().zip(&other.coords) {
            *a += s * b;
        }
    }

    pub fn copy_from(&mut self, other: &Hermitian) {
        self.coords.copy_from_slice(&other.coords);
    }

    /// Divides by the trace; returns the trace that was removed.
    pub fn normalize(&mut self) -> f64 {
        let tr = self.trace();
        self.scale(1.0 / tr);
        tr
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn trace_of(n: usize, coords: &[f64]) -> f64 {
    (0..n).map(|i| coords[i * n + i]).sum()
}

pub(crate) fn write_coords(op: &Operator, coords: &mut [f64]) {
    let n = op.n();
    for i in 0..n {
        coords[i * n + i] = op.get(i, i).re;
        for j in i + 1..n {
            let avg = (op.get(i, j) + op.get(j, i).conj()) * 0.5;
            coords[i * n + j] = avg.re;
            coords[j * n + i] = avg.im;
        }
    }
}

pub(crate) fn coords_to_operator(n: usize, coords: &[f64]) -> Operator {
    let dim = HilbertDim::new(n).expect("valid dimension");
    Operator::from_fn(dim, |i, j| {
        if i == j {
            Complex64::new(coords[i * n + i], 0.0)
        } else if i < j {
            Complex64::new(coords[i * n + j], coords[j * n + i])
        } else {
            Complex64::new(coords[j * n + i], -coords[i * n + j])
        }
    })
}

/// Hermitian operator whose coordinate vector is the unit vector `slot`.
fn basis_element(n: usize, slot: usize) -> Operator {
    let mut coords = vec![0.0; n * n];
    coords[slot] = 1.0;
    coords_to_operator(n, &coords)
}

/// One term `coef · L ρ R†` of a linear map.
#[derive(Debug, Clone)]
pub struct SandwichTerm {
    pub coef: f64,
    pub left: Operator,
    pub right: Operator,
}

impl SandwichTerm {
    pub fn new(coef: f64, left: Operator, right: Operator) -> Self {
        Self { coef, left, right }
    }

    /// coef · B ρ B†
    pub fn jump(coef: f64, b: Operator) -> Self {
        Self::new(coef, b.clone(), b)
    }
}

/// Real-linear, Hermiticity-preserving map on Hermitian coordinates.
///
/// Defined by a sum of sandwich terms Σ coef·LρR†; the defining sum must be
/// Hermiticity-preserving (results are projected onto their Hermitian part).
#[derive(Debug, Clone)]
pub struct Superop {
    n: usize,
    terms: Vec<SandwichTerm>,
    dense: Option<Vec<f64>>,
}

impl Superop {
    pub fn from_terms(dim: HilbertDim, terms: Vec<SandwichTerm>) -> Self {
        let n = dim.get();
        for t in &terms {
            assert_eq!(t.left.n(), n);
            assert_eq!(t.right.n(), n);
        }
        let mut s = Self { n, terms, dense: None };
        if n <= DENSE_LIMIT {
            s.dense = Some(s.build_dense());
        }
        s
    }

    /// Multiple of the identity map.
    pub fn scalar(dim: HilbertDim, s: f64) -> Self {
        Self::from_terms(dim, vec![SandwichTerm::new(s, Operator::identity(dim), Operator::identity(dim))])
    }

    /// Sum of two maps (terms concatenated).
    pub fn plus(&self, other: &Superop) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.dim(), terms)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|t| SandwichTerm::new(t.coef * s, t.left.clone(), t.right.clone())).collect();
        Self::from_terms(self.dim(), terms)
    }

    pub fn dim(&self) -> HilbertDim {
        HilbertDim::new(self.n).expect("valid dimension")
    }

    /// Row-major n²×n² matrix, when the map is small enough to be stored densely.
    pub(crate) fn dense(&self) -> Option<&[f64]> {
        self.dense.as_deref()
    }

    fn apply_terms_op(&self, rho: &Operator) -> Operator {
        let mut acc = Operator::zeros(self.dim());
        for t in &self.terms {
            let piece = &(&t.left * rho) * &t.right.dagger();
            acc = &acc + &piece.scale_re(t.coef);
        }
        acc
    }

    fn build_dense(&self) -> Vec<f64> {
        let m = self.n * self.n;
        let mut dense = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        for slot in 0..m {
            let image = self.apply_terms_op(&basis_element(self.n, slot));
            write_coords(&image, &mut col);
            for row in 0..m {
                dense[row * m + slot] = col[row];
            }
        }
        dense
    }

    /// out = S x
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.apply_add(1.0, x, out);
    }

    /// out += s · S x
    pub fn apply_add(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let m = self.n * self.n;
        debug_assert_eq!(x.len(), m);
        debug_assert_eq!(out.len(), m);
        match &self.dense {
            Some(d) if m == 4 => {
                for (row, o) in out.iter_mut().enumerate() {
                    let r = &d[row * 4..row * 4 + 4];
                    *o += s * (r[0] * x[0] + r[1] * x[1] + r[2] * x[2] + r[3] * x[3]);
                }
            }
            Some(d) => {
                for (row, o) in out.iter_mut().enumerate() {
                    let r = &d[row * m..(row + 1) * m];
                    let dot: f64 = r.iter().zip(x).map(|(a, b)| a * b).sum();
                    *o += s * dot;
                }
            }
            None => {
                let image = self.apply_terms_op(&coords_to_operator(self.n, x));
                let mut tmp = vec![0.0; m];
                write_coords(&image, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += s * t;
                }
            }
        }
    }

    pub fn apply(&self, x: &Hermitian) -> Hermitian {
        let mut out = Hermitian::zeros(x.dim());
        self.apply_into(x.coords(), out.coords_mut());
        out
    }

    pub fn apply_op(&self, rho: &Operator) -> Operator {
        self.apply_terms_op(rho).hermitian_part()
    }

    /// Trace functional Tr[S x] as a coordinate weight vector.
    pub fn trace_functional(&self) -> Vec<f64> {
        let m = self.n * self.n;
        let mut w = vec![0.0; m];
        let mut img = vec![0.0; m];
        let mut unit = vec![0.0; m];
        for slot in 0..m {
            unit.iter_mut().for_each(|u| *u = 0.0);
            unit[slot] = 1.0;
            self.apply_into(&unit, &mut img);
            w[slot] = trace_of(self.n, &img);
        }
        w
    }
}

/// Σ w_i x_i
#[inline]
pub fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::operator::two_level::*;
    use crate::qops::superops::{apply_d, apply_j};
    use crate::qops::testutil::random_density;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coordinate_round_trip() {
        let dim = HilbertDim::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(dim, &mut rng);
        let h = Hermitian::from_operator(&rho);
        assert!(h.to_operator().max_abs_diff(&rho) < 1e-15);
        assert!((h.trace() - 1.0).abs() < 1e-14);
        assert!((h.purity() - rho.purity()).abs() < 1e-14);
    }

    #[test]
    fn dense_and_term_application_agree() {
        for n in [2usize, 3, 9] {
            let dim = HilbertDim::new(n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let c = crate::qops::testutil::random_operator(dim, &mut rng);
            // D[c] as sandwich terms
            let cdc = &c.dagger() * &c;
            let id = Operator::identity(dim);
            let map = Superop::from_terms(
                dim,
                vec![
                    SandwichTerm::jump(1.0, c.clone()),
                    SandwichTerm::new(-0.5, cdc.clone(), id.clone()),
                    SandwichTerm::new(-0.5, id, cdc),
                ],
            );
            let rho = random_density(dim, &mut rng);
            let got = map.apply(&Hermitian::from_operator(&rho)).to_operator();
            let want = apply_d(&c, &rho).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn trace_functional_of_jump_map() {
        let map = Superop::from_terms(HilbertDim::new(2).unwrap(), vec![SandwichTerm::jump(1.0, sigma_minus())]);
        let w = map.trace_functional();
        let rho = from_bloch([0.2, 0.1, 0.4]);
        let want = apply_j(&sigma_minus(), &rho).unwrap().trace().re;
        assert!((dot(&w, Hermitian::from_operator(&rho).coords()) - want).abs() < 1e-15);
    }
}
