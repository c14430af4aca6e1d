use std::io::Write;

use serde::{Deserialize, Serialize};

use super::filter::Stencil;
use crate::error::{Error, Result};
use crate::qops::hermitian::{coords_to_operator, trace_of, write_coords};
use crate::qops::operator::{two_level, HilbertDim, Operator, TOL_HERM, TOL_POS};

/// Largest probability weight tolerated in the outer 5% of the cells
/// (2.5% on each side) before the grid is declared too small.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

const DEFAULT_CELLS: usize = 256;

/// Symmetric, cell-centred grid over the dimensionless voltage [−v_max, v_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageGrid {
    pub cells: usize,
    pub v_max: f64,
}

impl VoltageGrid {
    pub fn new(cells: usize, v_max: f64) -> Result<Self> {
        if cells < 20 {
            return Err(Error::InvalidParameter(format!("voltage grid needs at least 20 cells, got {cells}")));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("voltage range {v_max} must be positive")));
        }
        Ok(Self { cells, v_max })
    }

    /// 256 cells spanning ±8 standard deviations of the vacuum voltage
    /// distribution. The conditioned density follows the true voltage, which
    /// itself wanders over a few standard deviations, so the grid needs room
    /// beyond the stationary spread.
    pub fn for_noise_power(noise_power: f64) -> Result<Self> {
        Self::with_cells(DEFAULT_CELLS, noise_power)
    }

    pub fn with_cells(cells: usize, noise_power: f64) -> Result<Self> {
        Self::new(cells, 8.0 * (0.5 / noise_power).sqrt())
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.cells as f64
    }

    pub fn v(&self, k: usize) -> f64 {
        -self.v_max + (k as f64 + 0.5) * self.dv()
    }

    /// Number of cells in each outer 2.5% band.
    pub fn edge_cells(&self) -> usize {
        (self.cells as f64 * 0.025).ceil() as usize
    }

    /// Largest stable step for filter rate γ and noise power N, capped at 1e−3.
    pub fn default_dt(&self, filter_rate: f64, noise_power: f64) -> f64 {
        (0.4 * self.dv().powi(2) * noise_power / filter_rate).min(1e-3)
    }
}

/// ρ(v) sampled at the cell centres of a [`VoltageGrid`].
///
/// Cell k holds the Hermitian coordinates of ρ(v_k); the normalization is
/// Σ_k Tr ρ(v_k) Δv = 1.
#[derive(Debug, Clone)]
pub struct ReceiverSupersystem {
    grid: VoltageGrid,
    n: usize,
    pub(crate) rho: Vec<f64>,
    pub(crate) step: u64,
    /// Scratch buffers reused by the filter.
    pub(crate) work: Vec<f64>,
    pub(crate) flux: Vec<f64>,
    pub(crate) jumped: Vec<f64>,
    pub(crate) stencil: Option<Stencil>,
}

impl ReceiverSupersystem {
    /// ρ ⊗ P(v) for an arbitrary non-negative profile `density`, normalized
    /// on the grid.
    pub fn product(grid: VoltageGrid, rho: &Operator, density: impl Fn(f64) -> f64) -> Result<Self> {
        rho.check_density(1.0)?;
        let n = rho.n();
        let m = n * n;
        let mut coords = vec![0.0; m];
        write_coords(rho, &mut coords);
        let mut out = vec![0.0; grid.cells * m];
        let mut total = 0.0;
        for k in 0..grid.cells {
            let p = density(grid.v(k));
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidParameter(format!("voltage density {p} at v = {}", grid.v(k))));
            }
            total += p;
            for s in 0..m {
                out[k * m + s] = p * coords[s];
            }
        }
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("voltage density vanishes on the grid".into()));
        }
        let scale = 1.0 / (total * grid.dv());
        out.iter_mut().for_each(|x| *x *= scale);
        Ok(Self { grid, n, rho: out, step: 0, work: Vec::new(), flux: Vec::new(), jumped: Vec::new(), stencil: None })
    }

    /// ρ ⊗ (Gaussian of the given mean and variance).
    pub fn gaussian(grid: VoltageGrid, rho: &Operator, mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::InvalidParameter(format!("variance {variance} must be positive")));
        }
        Self::product(grid, rho, |v| (-(v - mean).powi(2) / (2.0 * variance)).exp())
    }

    /// ρ ⊗ (vacuum-input stationary voltage distribution, variance 1/(2N)).
    pub fn stationary(grid: VoltageGrid, rho: &Operator, noise_power: f64) -> Result<Self> {
        Self::gaussian(grid, rho, 0.0, 0.5 / noise_power)
    }

    pub fn grid(&self) -> &VoltageGrid {
        &self.grid
    }

    pub fn dim(&self) -> HilbertDim {
        HilbertDim::new(self.n).expect("valid dimension")
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    fn cell_coords(&self, k: usize) -> &[f64] {
        let m = self.n * self.n;
        &self.rho[k * m..(k + 1) * m]
    }

    /// ρ(v_k), unnormalized.
    pub fn cell(&self, k: usize) -> Operator {
        coords_to_operator(self.n, self.cell_coords(k))
    }

    /// Tr ρ(v_k) for every cell: the voltage probability density.
    pub fn weights(&self) -> Vec<f64> {
        self.rho.chunks_exact(self.n * self.n).map(|c| trace_of(self.n, c)).collect()
    }

    /// Σ_k Tr ρ(v_k) Δv.
    pub fn total_weight(&self) -> f64 {
        self.weights().iter().sum::<f64>() * self.grid.dv()
    }

    /// Weight in the outer 2.5% of cells on each side, combined.
    pub fn boundary_mass(&self) -> f64 {
        let e = self.grid.edge_cells();
        let k = self.grid.cells;
        let edge: f64 = (0..e).chain(k - e..k).map(|i| trace_of(self.n, self.cell_coords(i))).sum();
        edge * self.grid.dv()
    }

    /// Variance of v under the voltage marginal.
    pub fn voltage_variance(&self) -> f64 {
        let w = self.weights();
        let total: f64 = w.iter().sum();
        let mean = mean_voltage(self);
        w.iter().enumerate().map(|(k, p)| p * (self.grid.v(k) - mean).powi(2)).sum::<f64>() / total
    }

    pub fn check_invariants(&self) -> Result<()> {
        let total = self.total_weight();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("total weight {total} differs from 1")));
        }
        for (k, w) in self.weights().iter().enumerate() {
            if *w < -1e-12 {
                return Err(Error::InvalidParameter(format!("negative weight {w:e} in cell {k}")));
            }
        }
        if self.rho.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite grid entry".into()));
        }
        for k in 0..self.grid.cells {
            let cell = self.cell(k);
            let herm = cell.hermiticity_error();
            if herm > TOL_HERM {
                return Err(Error::InvalidParameter(format!("cell {k} not Hermitian (error {herm:e})")));
            }
            let min_ev = cell.min_eigenvalue();
            if min_ev < -TOL_POS {
                return Err(Error::InvalidParameter(format!("cell {k} not positive (min eigenvalue {min_ev:e})")));
            }
        }
        let edge = self.boundary_mass();
        if edge > BOUNDARY_MASS_LIMIT {
            return Err(Error::GridMassLeak { mass: edge });
        }
        Ok(())
    }

    /// Writes `v,weight` plus `bx,by,bz` (Bloch vector of the normalized cell
    /// state, empty when the cell has no weight) for two-level systems.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let bloch = self.n == 2;
        if bloch {
            writeln!(out, "v,weight,bx,by,bz")?;
        } else {
            writeln!(out, "v,weight")?;
        }
        for (k, w) in self.weights().iter().enumerate() {
            write!(out, "{},{}", self.grid.v(k), w)?;
            if bloch {
                if *w > 0.0 {
                    let b = two_level::bloch_vector(&self.cell(k).scale_re(1.0 / w));
                    write!(out, ",{},{},{}", b[0], b[1], b[2])?;
                } else {
                    write!(out, ",,,")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// ∫ρ(v)dv as a normalized state (midpoint rule on the cell centres).
pub fn marginal_state(s: &ReceiverSupersystem) -> Operator {
    let m = s.n * s.n;
    let mut acc = vec![0.0; m];
    for k in 0..s.grid.cells {
        for (a, x) in acc.iter_mut().zip(s.cell_coords(k)) {
            *a += x;
        }
    }
    let tr = trace_of(s.n, &acc);
    acc.iter_mut().for_each(|a| *a /= tr);
    coords_to_operator(s.n, &acc)
}

/// ⟨v⟩ = ∫ v Tr ρ(v) dv.
pub fn mean_voltage(s: &ReceiverSupersystem) -> f64 {
    let w = s.weights();
    let total: f64 = w.iter().sum();
    w.iter().enumerate().map(|(k, p)| p * s.grid.v(k)).sum::<f64>() / total
}
