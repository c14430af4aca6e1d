use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::lindblad::LindbladModel;
use super::operator::{HilbertDim, Operator};

fn gauss(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Operator with i.i.d. complex Gaussian entries.
pub fn random_operator(dim: HilbertDim, rng: &mut impl Rng) -> Operator {
    Operator::from_fn(dim, |_, _| Complex64::new(gauss(rng), gauss(rng)))
}

/// Full-rank density operator G G† / Tr.
pub fn random_density(dim: HilbertDim, rng: &mut impl Rng) -> Operator {
    let g = random_operator(dim, rng);
    let rho = (&g * &g.dagger()).hermitian_part();
    let tr = rho.trace().re;
    rho.scale_re(1.0 / tr)
}

pub fn random_hermitian(dim: HilbertDim, rng: &mut impl Rng) -> Operator {
    random_operator(dim, rng).hermitian_part()
}

pub fn random_model(dim: HilbertDim, rng: &mut impl Rng) -> LindbladModel {
    let h = random_hermitian(dim, rng);
    let c = random_operator(dim, rng).scale_re(0.5);
    LindbladModel::without_lo(h, c, 0.0).unwrap()
}
