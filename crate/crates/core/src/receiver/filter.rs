use super::grid::{ReceiverSupersystem, VoltageGrid, BOUNDARY_MASS_LIMIT};
use super::params::ReceiverParams;
use crate::error::{Error, Result};
use crate::ideal::{no_count_kraus, StepSize};
use crate::qops::hermitian::{SandwichTerm, Superop};
use crate::qops::operator::Operator;
use crate::qops::LindbladModel;

const DIFFUSION_LIMIT: f64 = 0.5;

type Rows4 = [[f64; 4]; 4];

/// Filter for ρ(v) conditioned on the output voltage record.
///
/// Each step is split into a conservative finite-volume update of
///
/// ```text
/// dρ(v) = dt [L + (γ/2N)∂²_v + γ∂_v v] ρ(v) + dt √(γη/N) ∂_v [c_Φ ρ(v) + ρ(v) c_Φ†]
/// ```
///
/// followed by the Bayesian factor 1 + γ dt (𝒱 − ⟨v⟩)(v − ⟨v⟩) and
/// renormalization. The voltage terms use central fluxes with zero flux
/// through the grid edges, arranged as in [`Spread`] so that every cell stays
/// positive.
#[derive(Debug, Clone)]
pub struct ReceiverFilter {
    params: ReceiverParams,
    dt: f64,
    /// ρ ↦ KρK† with K = 1 − (iH + ½c†c)dt
    kraus: Superop,
    /// ρ ↦ c_Φ ρ c_Φ†
    jump: Superop,
    /// ρ ↦ c_Φ ρ + ρ c_Φ†
    kick: Superop,
    /// Whether the photocurrent moves the voltage (η > 0 and c ≠ 0).
    coupled: bool,
    n: usize,
    two_level: Option<Box<TwoLevelMaps>>,
}

#[derive(Debug, Clone)]
struct TwoLevelMaps {
    kraus: Rows4,
    jump: Rows4,
    kick: Rows4,
}

/// The part of a source cell ρ sent to one target cell:
/// `scalar`·ρ + `kick`·(c_Φρ + ρc_Φ†) + `jump`·c_Φρc_Φ†.
///
/// With jump = kick²/scalar this is (√a + κc_Φ/√a) ρ (√a + κc_Φ/√a)† for
/// a = scalar and κ = kick, which is positive.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Share {
    scalar: f64,
    kick: f64,
    jump: f64,
}

impl Share {
    fn new(scalar: f64, kick: f64) -> Self {
        let jump = if kick == 0.0 { 0.0 } else { kick * kick / scalar };
        Self { scalar, kick, jump }
    }
}

/// How one cell's content is divided during the voltage update.
///
/// The central-flux stencil is regrouped into positive [`Share`]s for the
/// cell itself and its two neighbours. The jump terms of the shares come out
/// of the cell's own dt c ρ c† term, which leaves `kept_jump` ≥ 0 for the
/// cell and changes the update by O(dt Δv²). Where the jump term would not
/// cover them the edge diffusion is raised by O(Δv²).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Spread {
    down: Share,
    stay: Share,
    up: Share,
    kept_jump: f64,
}

/// Per-cell coefficients of the voltage update for one grid, cached on the
/// supersystem between steps.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    key: (ReceiverParams, f64, bool),
    spreads: Vec<Spread>,
    /// For two-level systems, K·K† + kept_jump · c_Φ·c_Φ† per cell as one map.
    settle: Vec<Rows4>,
}

impl ReceiverFilter {
    pub fn new(model: &LindbladModel, params: ReceiverParams, dt: StepSize) -> Result<Self> {
        params.validate()?;
        if model.lo_amplitude().norm() > 0.0 {
            return Err(Error::InvalidParameter(
                "the photoreceiver supplies its own local oscillator; use a model with mu = 0".into(),
            ));
        }
        let dt = dt.get();
        let dim = model.dim();
        let b = model.collapse().scale(num_complex::Complex64::from_polar(1.0, -params.phase));
        let id = Operator::identity(dim);
        let kraus = Superop::from_terms(dim, vec![SandwichTerm::jump(1.0, no_count_kraus(model, 0.0, dt))]);
        let jump = Superop::from_terms(dim, vec![SandwichTerm::jump(1.0, b.clone())]);
        let kick = Superop::from_terms(
            dim,
            vec![SandwichTerm::new(1.0, b.clone(), id.clone()), SandwichTerm::new(1.0, id, b)],
        );
        let two_level = match (kraus.dense(), jump.dense(), kick.dense()) {
            (Some(a), Some(j), Some(k)) if dim.get() == 2 => {
                Some(Box::new(TwoLevelMaps { kraus: rows4(a), jump: rows4(j), kick: rows4(k) }))
            }
            _ => None,
        };
        let coupled = params.efficiency > 0.0 && model.collapse().frobenius_norm() > 0.0;
        Ok(Self { params, dt, kraus, jump, kick, coupled, n: dim.get(), two_level })
    }

    pub fn params(&self) -> &ReceiverParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// (γ/2N) dt / Δv² on the grid of `s`.
    pub fn diffusion_number(&self, s: &ReceiverSupersystem) -> f64 {
        let p = &self.params;
        p.filter_rate / (2.0 * p.noise_power) * self.dt / s.grid().dv().powi(2)
    }

    /// Fails with [`Error::CflViolation`] when this step size is too large
    /// for `grid`.
    pub fn check_grid(&self, grid: &VoltageGrid) -> Result<()> {
        self.spreads(grid).map(drop)
    }

    fn stencil(&self, grid: &VoltageGrid) -> Result<Stencil> {
        let spreads = self.spreads(grid)?;
        let settle = match &self.two_level {
            Some(maps) => spreads
                .iter()
                .map(|sp| {
                    std::array::from_fn(|r| std::array::from_fn(|c| maps.kraus[r][c] + sp.kept_jump * maps.jump[r][c]))
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(Stencil { key: (self.params, self.dt, self.coupled), spreads, settle })
    }

    fn spreads(&self, grid: &VoltageGrid) -> Result<Vec<Spread>> {
        let p = &self.params;
        let dv = grid.dv();
        let nu = p.filter_rate / (2.0 * p.noise_power) * self.dt / dv.powi(2);
        if nu > DIFFUSION_LIMIT {
            return Err(Error::CflViolation { number: nu, limit: DIFFUSION_LIMIT });
        }
        let lambda = self.dt / dv;
        let kick =
            if self.coupled { 0.5 * lambda * (p.filter_rate * p.efficiency / p.noise_power).sqrt() } else { 0.0 };
        let drift = |k: usize| 0.5 * lambda * p.filter_rate * grid.v(k);
        // smallest diffusion on both edges of cell k that keeps its jump budget
        let floor = |k: usize| {
            if kick == 0.0 {
                nu
            } else {
                let en = p.efficiency * nu;
                0.5 * (en + (en * en + 4.0 * drift(k).powi(2)).sqrt())
            }
        };
        let cells = grid.cells;
        let edge: Vec<f64> = (0..cells - 1).map(|e| nu.max(floor(e)).max(floor(e + 1))).collect();
        let mut out = Vec::with_capacity(cells);
        for k in 0..cells {
            let s = drift(k);
            let down = if k > 0 { Share::new(edge[k - 1] + s, kick) } else { Share::default() };
            let up = if k + 1 < cells { Share::new(edge[k] - s, -kick) } else { Share::default() };
            // the share that would cross a grid edge stays behind
            let stay = if k == 0 {
                Share::new(1.0 - edge[0] + s, kick)
            } else if k + 1 == cells {
                Share::new(1.0 - edge[k - 1] - s, -kick)
            } else {
                Share::new(1.0 - edge[k - 1] - edge[k], 0.0)
            };
            let budget = down.jump + stay.jump + up.jump;
            if !(stay.scalar >= 0.0 && budget <= self.dt * (1.0 + 1e-9)) {
                let number = (1.0 - stay.scalar).max(budget / self.dt);
                return Err(Error::CflViolation { number, limit: 1.0 });
            }
            out.push(Spread { down, stay, up, kept_jump: (self.dt - budget).max(0.0) });
        }
        Ok(out)
    }

    /// Advances `s` by one step given the voltage sample `record`; returns the
    /// innovation d𝒲_J = √γ dt (𝒱 − ⟨v⟩).
    pub fn step(&self, s: &mut ReceiverSupersystem, record: f64) -> Result<f64> {
        if !record.is_finite() {
            return Err(Error::NonfiniteInnovation { step: s.step });
        }
        self.predict(s)?;
        let innovation = self.update(s, record)?;
        s.step += 1;
        let edge = s.boundary_mass();
        if edge > BOUNDARY_MASS_LIMIT {
            return Err(Error::GridMassLeak { mass: edge });
        }
        Ok(innovation)
    }

    /// Deterministic part of the step: Liouvillian, amplifier drift and
    /// diffusion, and the photocurrent coupling. Conserves total weight to
    /// O(dt²).
    pub fn predict(&self, s: &mut ReceiverSupersystem) -> Result<()> {
        if s.dim().get() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: s.dim().get() });
        }
        let stencil = match s.stencil.take() {
            Some(st) if st.key == (self.params, self.dt, self.coupled) => st,
            _ => self.stencil(s.grid())?,
        };
        let len = s.rho.len();
        let mut next = std::mem::take(&mut s.work);
        let mut kicked = std::mem::take(&mut s.flux);
        let mut jumped = std::mem::take(&mut s.jumped);
        for buf in [&mut next, &mut kicked, &mut jumped] {
            buf.resize(len, 0.0);
        }
        match &self.two_level {
            Some(maps) => transport_two_level(maps, &stencil, &s.rho, &mut next, &mut kicked, &mut jumped),
            None => self.transport(&stencil.spreads, &s.rho, &mut next, &mut kicked, &mut jumped),
        }
        s.work = std::mem::replace(&mut s.rho, next);
        s.flux = kicked;
        s.jumped = jumped;
        s.stencil = Some(stencil);
        Ok(())
    }

    /// Bayesian conditioning on `record`; returns the innovation.
    pub fn update(&self, s: &mut ReceiverSupersystem, record: f64) -> Result<f64> {
        let grid = *s.grid();
        let (v0, dv) = (grid.v(0), grid.dv());
        let m = self.n * self.n;
        let gamma = self.params.filter_rate;
        let weights = s.weights();
        let (mut total, mut first) = (0.0, 0.0);
        for (k, w) in weights.iter().enumerate() {
            total += w;
            first += w * (v0 + k as f64 * dv);
        }
        let mean = first / total;
        let residual = record - mean;
        let gain = gamma * self.dt * residual;
        if !(gain.is_finite() && total > 0.0) {
            return Err(Error::NonfiniteInnovation { step: s.step });
        }
        // the linear factor only goes negative where the weight is negligible
        let factor = |k: usize| (1.0 + gain * (v0 + k as f64 * dv - mean)).max(0.0);
        let norm: f64 = weights.iter().enumerate().map(|(k, w)| factor(k) * w).sum();
        let scale = 1.0 / (norm * dv);
        if !scale.is_finite() {
            return Err(Error::NonfiniteInnovation { step: s.step });
        }
        for (k, cell) in s.rho.chunks_exact_mut(m).enumerate() {
            let f = factor(k) * scale;
            cell.iter_mut().for_each(|x| *x *= f);
        }
        Ok(gamma.sqrt() * self.dt * residual)
    }

    /// next_k = K ρ'_k K† + kept_jump_k · c_Φ ρ'_k c_Φ†, where ρ'_k collects
    /// the shares sent to cell k.
    fn transport(&self, spreads: &[Spread], rho: &[f64], next: &mut [f64], kicked: &mut [f64], jumped: &mut [f64]) {
        let m = self.n * self.n;
        for ((r, kr), jr) in rho.chunks_exact(m).zip(kicked.chunks_exact_mut(m)).zip(jumped.chunks_exact_mut(m)) {
            self.kick.apply_into(r, kr);
            self.jump.apply_into(r, jr);
        }
        let mut gathered = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        for (k, out) in next.chunks_exact_mut(m).enumerate() {
            gathered.fill(0.0);
            for (share, j) in sources(spreads, k) {
                let range = j * m..(j + 1) * m;
                for (((g, r), kr), jr) in
                    gathered.iter_mut().zip(&rho[range.clone()]).zip(&kicked[range.clone()]).zip(&jumped[range])
                {
                    *g += share.scalar * r + share.kick * kr + share.jump * jr;
                }
            }
            self.kraus.apply_into(&gathered, out);
            self.jump.apply_into(&gathered, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += spreads[k].kept_jump * t;
            }
        }
    }
}

fn rows4(d: &[f64]) -> [[f64; 4]; 4] {
    std::array::from_fn(|r| std::array::from_fn(|c| d[r * 4 + c]))
}

/// The shares that land in cell k and the cells they come from.
fn sources(spreads: &[Spread], k: usize) -> impl Iterator<Item = (&Share, usize)> {
    let below = k.checked_sub(1).map(|j| (&spreads[j].up, j));
    let above = spreads.get(k + 1).map(|s| (&s.down, k + 1));
    std::iter::once((&spreads[k].stay, k)).chain(below).chain(above)
}

/// Same update as [`ReceiverFilter::transport`] with the 4×4 maps of a
/// two-level system unrolled.
fn transport_two_level(
    maps: &TwoLevelMaps,
    stencil: &Stencil,
    rho: &[f64],
    next: &mut [f64],
    kicked: &mut [f64],
    jumped: &mut [f64],
) {
    let spreads = &stencil.spreads;
    let (rho, _) = rho.as_chunks::<4>();
    let (next, _) = next.as_chunks_mut::<4>();
    let (kicked, _) = kicked.as_chunks_mut::<4>();
    let (jumped, _) = jumped.as_chunks_mut::<4>();
    let mat = |a: &Rows4, x: &[f64; 4]| -> [f64; 4] {
        std::array::from_fn(|r| a[r][0] * x[0] + a[r][1] * x[1] + a[r][2] * x[2] + a[r][3] * x[3])
    };
    for ((r, kr), jr) in rho.iter().zip(kicked.iter_mut()).zip(jumped.iter_mut()) {
        *kr = mat(&maps.kick, r);
        *jr = mat(&maps.jump, r);
    }
    for (k, out) in next.iter_mut().enumerate() {
        let mut gathered = [0.0; 4];
        for (share, j) in sources(spreads, k) {
            for s in 0..4 {
                gathered[s] += share.scalar * rho[j][s] + share.kick * kicked[j][s] + share.jump * jumped[j][s];
            }
        }
        *out = mat(&stencil.settle[k], &gathered);
    }
}

/// One filter step conditioned on the voltage sample `record`.
pub fn receiver_skse_step(
    model: &LindbladModel,
    p: &ReceiverParams,
    s: &ReceiverSupersystem,
    record: f64,
    dt: f64,
) -> Result<ReceiverSupersystem> {
    let f = ReceiverFilter::new(model, *p, StepSize::new(dt)?)?;
    let mut out = s.clone();
    f.step(&mut out, record)?;
    Ok(out)
}
