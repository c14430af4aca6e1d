use std::io::{Read, Write};

use super::sde::SdeModel;
use crate::error::{Error, Result};

/// Probability density on K uniform cells spanning [x_min, x_max]; p_k is the
/// density at the cell centre x_min + (k + ½)Δx.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDistribution {
    x_min: f64,
    x_max: f64,
    p: Vec<f64>,
}

const TOL_NEG: f64 = 1e-12;
const DIFFUSION_LIMIT: f64 = 0.5;

impl GridDistribution {
    pub fn new(x_min: f64, x_max: f64, p: Vec<f64>) -> Result<Self> {
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!("grid range [{x_min}, {x_max}]")));
        }
        if p.len() < 3 {
            return Err(Error::InvalidParameter("grid needs at least 3 cells".into()));
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite() || **v < -TOL_NEG) {
            return Err(Error::InvalidParameter(format!("invalid density value {bad}")));
        }
        Ok(Self { x_min, x_max, p })
    }

    /// Normalized Gaussian restricted to the grid.
    pub fn gaussian(x_min: f64, x_max: f64, cells: usize, mean: f64, sd: f64) -> Result<Self> {
        let mut g = Self::new(x_min, x_max, vec![0.0; cells.max(3)])?;
        if !(sd > 0.0) {
            return Err(Error::InvalidParameter(format!("standard deviation {sd}")));
        }
        for k in 0..g.p.len() {
            let z = (g.x(k) - mean) / sd;
            g.p[k] = (-0.5 * z * z).exp();
        }
        g.normalize()?;
        Ok(g)
    }

    /// Stand-in for a point mass: Gaussian of width 3Δx.
    pub fn narrow(x_min: f64, x_max: f64, cells: usize, at: f64) -> Result<Self> {
        let dx = (x_max - x_min) / cells as f64;
        Self::gaussian(x_min, x_max, cells, at, 3.0 * dx)
    }

    pub fn uniform(x_min: f64, x_max: f64, cells: usize) -> Result<Self> {
        let w = 1.0 / (x_max - x_min);
        Self::new(x_min, x_max, vec![w; cells])
    }

    pub fn cells(&self) -> usize {
        self.p.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.p.len() as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + (k as f64 + 0.5) * self.dx()
    }

    pub fn density(&self) -> &[f64] {
        &self.p
    }

    pub fn mass(&self) -> f64 {
        self.p.iter().sum::<f64>() * self.dx()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::ZeroEvidence);
        }
        self.p.iter_mut().for_each(|v| *v /= m);
        Ok(m)
    }

    pub fn mean(&self) -> f64 {
        let dx = self.dx();
        (0..self.cells()).map(|k| self.x(k) * self.p[k]).sum::<f64>() * dx / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let dx = self.dx();
        let mu = self.mean();
        (0..self.cells()).map(|k| (self.x(k) - mu).powi(2) * self.p[k]).sum::<f64>() * dx / self.mass()
    }

    pub fn min_density(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// ∫|p − q| dx on a shared grid.
    pub fn l1_distance(&self, other: &GridDistribution) -> Result<f64> {
        self.ensure_same_grid(other)?;
        Ok(self.p.iter().zip(&other.p).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.dx())
    }

    pub fn ensure_same_grid(&self, other: &GridDistribution) -> Result<()> {
        if self.cells() != other.cells() || self.x_min != other.x_min || self.x_max != other.x_max {
            return Err(Error::GridMismatch(format!(
                "{} cells on [{}, {}] vs {} cells on [{}, {}]",
                self.cells(),
                self.x_min,
                self.x_max,
                other.cells(),
                other.x_min,
                other.x_max
            )));
        }
        Ok(())
    }

    /// Writes `x,p` rows.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "p"])?;
        for k in 0..self.cells() {
            w.serialize((self.x(k), self.p[k]))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut xs = Vec::new();
        let mut p = Vec::new();
        for row in r.deserialize::<(f64, f64)>() {
            let (x, v) = row?;
            xs.push(x);
            p.push(v);
        }
        if xs.len() < 3 {
            return Err(Error::Parse("grid CSV needs at least 3 rows".into()));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        Self::new(xs[0] - 0.5 * dx, xs[xs.len() - 1] + 0.5 * dx, p)
    }
}

/// Conservative transport with cell displacements `w` (x units per step) and
/// diffusion number `nu` = D dt / Δx². The result is the central-difference
/// update, with fluxes blended toward a positive local Lax–Friedrichs update
/// (sub-stepped when the displacement exceeds a cell) only where a cell would
/// otherwise go negative.
fn transport(p: &mut [f64], w: &[f64], nu: f64, dx: f64) {
    let k = p.len();
    let central: Vec<f64> =
        (0..k - 1).map(|i| 0.5 * (w[i] * p[i] + w[i + 1] * p[i + 1]) - 0.5 * nu * dx * (p[i + 1] - p[i])).collect();
    if w.iter().all(|&v| v == 0.0) {
        apply_fluxes(p, &central, dx);
        return;
    }
    let max_shift = w.iter().fold(0.0f64, |a, b| a.max(b.abs())) / dx;
    let n = substeps(max_shift, nu);
    let (ws, nus) = (1.0 / n as f64, nu / n as f64);
    let mut low = p.to_vec();
    let mut low_flux = vec![0.0; k - 1];
    let mut f = vec![0.0; k - 1];
    for _ in 0..n {
        for i in 0..k - 1 {
            let (a, b) = (w[i] * ws, w[i + 1] * ws);
            let speed = a.abs().max(b.abs());
            f[i] = 0.5 * (a * low[i] + b * low[i + 1]) - 0.5 * (nus * dx + speed) * (low[i + 1] - low[i]);
            low_flux[i] += f[i];
        }
        apply_fluxes(&mut low, &f, dx);
    }
    let anti: Vec<f64> = central.iter().zip(&low_flux).map(|(c, l)| c - l).collect();
    let mut ratio = vec![1.0; k];
    for i in 0..k {
        let right = if i + 1 < k { anti[i].max(0.0) } else { 0.0 };
        let left = if i > 0 { -anti[i - 1].min(0.0) } else { 0.0 };
        let out = (right + left) / dx;
        if out > low[i].max(0.0) {
            ratio[i] = low[i].max(0.0) / out;
        }
    }
    let limited: Vec<f64> =
        anti.iter().enumerate().map(|(i, &a)| a * if a >= 0.0 { ratio[i] } else { ratio[i + 1] }).collect();
    apply_fluxes(&mut low, &limited, dx);
    p.copy_from_slice(&low);
}

/// p_i −= (F_{i+½} − F_{i−½}) / Δx with zero flux through the outer edges.
fn apply_fluxes(p: &mut [f64], flux: &[f64], dx: f64) {
    let k = p.len();
    for i in 0..k {
        let right = if i + 1 < k { flux[i] } else { 0.0 };
        let left = if i > 0 { flux[i - 1] } else { 0.0 };
        p[i] -= (right - left) / dx;
    }
}

fn check_diffusion(nu: f64) -> Result<()> {
    if nu > DIFFUSION_LIMIT {
        return Err(Error::CflViolation { number: nu, limit: DIFFUSION_LIMIT });
    }
    Ok(())
}

/// Number of sub-steps that keeps the low-order update positive.
fn substeps(max_shift: f64, nu: f64) -> usize {
    let courant = max_shift + nu;
    if courant <= 1.0 {
        1
    } else {
        courant.ceil() as usize + 1
    }
}

/// Jump amplitude as a whole number of cells.
fn jump_cells(e: f64, dx: f64) -> Result<i64> {
    let cells = e / dx;
    let rounded = cells.round();
    if (cells - rounded).abs() > 1e-9 * rounded.abs().max(1.0) {
        return Err(Error::JumpNotGridAligned { amplitude: e, dx });
    }
    Ok(rounded as i64)
}

/// Translates by `s` cells; mass pushed past an edge collects in the edge cell.
fn shift(p: &mut [f64], s: i64) {
    if s == 0 {
        return;
    }
    let k = p.len() as i64;
    let mut out = vec![0.0; p.len()];
    for (i, &v) in p.iter().enumerate() {
        let target = (i as i64 + s).clamp(0, k - 1);
        out[target as usize] += v;
    }
    p.copy_from_slice(&out);
}

/// One step of the stochastic differential Chapman–Kolmogorov equation
/// given the noise increments `dw` and `dn`.
pub fn sdcke_step(m: &SdeModel, dist: &GridDistribution, dw: f64, dn: bool, dt: f64) -> Result<GridDistribution> {
    let dx = dist.dx();
    let cells = jump_cells(m.jump(), dx)?;
    let nu = m.diffusion() * dt / (dx * dx);
    check_diffusion(nu)?;
    let noise = m.diffusion().sqrt() * dw;
    let w: Vec<f64> = (0..dist.cells()).map(|k| m.drift(dist.x(k)) * dt + noise).collect();
    let mut out = dist.clone();
    transport(&mut out.p, &w, nu, dx);
    if dn {
        shift(&mut out.p, cells);
    }
    Ok(out)
}

/// One step of the averaged (deterministic) Chapman–Kolmogorov equation.
/// Jumps that would leave the grid are suppressed.
pub fn dcke_step(m: &SdeModel, dist: &GridDistribution, dt: f64) -> Result<GridDistribution> {
    let dx = dist.dx();
    let cells = jump_cells(m.jump(), dx)?;
    let nu = m.diffusion() * dt / (dx * dx);
    check_diffusion(nu)?;
    let w: Vec<f64> = (0..dist.cells()).map(|k| m.drift(dist.x(k)) * dt).collect();
    let max_shift = w.iter().fold(0.0f64, |a, b| a.max(b.abs())) / dx;
    if max_shift + nu > 1.0 {
        return Err(Error::CflViolation { number: max_shift + nu, limit: 1.0 });
    }
    let mut out = dist.clone();
    transport(&mut out.p, &w, nu, dx);
    if cells != 0 {
        let k = dist.cells() as i64;
        let before = out.p.clone();
        for i in 0..k {
            let target = i + cells;
            if target < 0 || target >= k {
                continue;
            }
            let g = m.rate(dist.x(i as usize));
            if g < 0.0 || g * dt > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "jump rate {g} at x = {} outside [0, 1/dt]",
                    dist.x(i as usize)
                )));
            }
            let moved = g * dt * before[i as usize];
            out.p[i as usize] -= moved;
            out.p[target as usize] += moved;
        }
    }
    Ok(out)
}

/// Posterior ∝ likelihood(x)·prior(x). A likelihood that does not depend on
/// x returns the prior unchanged.
pub fn bayes_update(dist: &GridDistribution, likelihood: impl Fn(f64) -> f64) -> Result<GridDistribution> {
    let weights: Vec<f64> = (0..dist.cells()).map(|k| likelihood(dist.x(k))).collect();
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidParameter(format!("likelihood value {bad}")));
    }
    if weights.iter().all(|w| *w == weights[0]) && weights[0] > 0.0 {
        return Ok(dist.clone());
    }
    let mut post = dist.clone();
    for (p, w) in post.p.iter_mut().zip(&weights) {
        *p *= w;
    }
    let evidence = post.mass();
    if !(evidence > 1e-300) {
        return Err(Error::ZeroEvidence);
    }
    post.p.iter_mut().for_each(|p| *p /= evidence);
    Ok(post)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_translation_by_jump() {
        let m = SdeModel::new(|_| 0.0, 0.0, 0.5, |_| 1.0).unwrap();
        let g = GridDistribution::gaussian(-5.0, 5.0, 100, -1.0, 0.3).unwrap();
        let out = sdcke_step(&m, &g, 0.0, true, 1e-3).unwrap();
        for k in 0..94 {
            assert_eq!(out.density()[k + 5], g.density()[k]);
        }
        assert!((out.mean() - g.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn misaligned_jump_rejected() {
        let m = SdeModel::new(|_| 0.0, 0.0, 0.33, |_| 1.0).unwrap();
        let g = GridDistribution::uniform(-5.0, 5.0, 100).unwrap();
        assert!(matches!(sdcke_step(&m, &g, 0.0, true, 1e-3), Err(Error::JumpNotGridAligned { .. })));
    }

    #[test]
    fn diffusion_limit_enforced() {
        let m = SdeModel::ornstein_uhlenbeck(1.0, 1.0).unwrap();
        let g = GridDistribution::uniform(-1.0, 1.0, 100).unwrap();
        assert!(matches!(dcke_step(&m, &g, 1e-3), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn heat_kernel_variance_growth() {
        let d = 0.5;
        let m = SdeModel::new(|_| 0.0, d, 0.0, |_| 0.0).unwrap();
        let mut g = GridDistribution::gaussian(-10.0, 10.0, 400, 0.0, 0.5).unwrap();
        let v0 = g.variance();
        let dx = g.dx();
        let dt = 0.2 * dx * dx / d;
        let steps = (1.0 / dt).round() as usize;
        for _ in 0..steps {
            g = sdcke_step(&m, &g, 0.0, false, dt).unwrap();
        }
        let grown = g.variance() - v0;
        let expect = d * steps as f64 * dt;
        assert!((grown - expect).abs() < 0.01 * expect);
    }

    #[test]
    fn csv_round_trip() {
        let g = GridDistribution::gaussian(-2.0, 3.0, 50, 0.5, 0.7).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = GridDistribution::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.cells(), 50);
        assert!((back.dx() - g.dx()).abs() < 1e-12);
        assert_eq!(back.density(), g.density());
    }

    #[test]
    fn flat_likelihood_leaves_prior_untouched() {
        let g = GridDistribution::gaussian(-2.0, 3.0, 50, 0.5, 0.7).unwrap();
        assert_eq!(bayes_update(&g, |_| 0.37).unwrap(), g);
    }

    #[test]
    fn zero_evidence_reported() {
        let g = GridDistribution::gaussian(-2.0, 3.0, 50, 0.5, 0.7).unwrap();
        assert!(matches!(bayes_update(&g, |x| if x > 100.0 { 1.0 } else { 0.0 }), Err(Error::ZeroEvidence)));
    }

    #[test]
    fn gaussian_likelihood_on_uniform_prior() {
        let g = GridDistribution::uniform(-5.0, 5.0, 200).unwrap();
        let post = bayes_update(&g, |x| (-0.5 * (x - 1.0f64).powi(2) / 0.25).exp()).unwrap();
        assert!((post.mass() - 1.0).abs() < 1e-12);
        assert!((post.mean() - 1.0).abs() < 1e-6);
        assert!((post.variance() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn sequential_updates_compose() {
        let g = GridDistribution::gaussian(-4.0, 4.0, 128, 0.0, 1.0).unwrap();
        let l1 = |x: f64| (-(x - 0.3).powi(2)).exp();
        let l2 = |x: f64| 1.0 / (1.0 + x * x);
        let two = bayes_update(&bayes_update(&g, l1).unwrap(), l2).unwrap();
        let one = bayes_update(&g, |x| l1(x) * l2(x)).unwrap();
        assert!(two.l1_distance(&one).unwrap() < 1e-12);
    }
}
