use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::apd::{ApdFilter, ApdForm, ApdParams, ApdVariant};
use crate::error::{Error, Result};
use crate::ideal::{DiffusiveScheme, HomodyneUnraveling, JumpUnraveling, StepSize};
use crate::qops::lindblad::ModelPreset;
use crate::qops::{two_level, HilbertDim, LindbladModel, Operator};
use crate::receiver::{NoiseOnlyPipeline, ReceiverFilter, ReceiverParams, VoltageGrid};

/// Nested rows of `[re, im]` pairs.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

fn literal_to_operator(m: &MatrixLiteral) -> Result<Operator> {
    let rows: Vec<Vec<Complex64>> =
        m.iter().map(|r| r.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()).collect();
    Operator::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub detector: DetectorSpec,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Either a named preset (with `omega`, `decay`) or explicit `h` and `c`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<ModelPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<MatrixLiteral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<MatrixLiteral>,
    /// LO amplitude as `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default)]
    pub initial: InitialState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    #[default]
    Ground,
    Excited,
    PlusX,
    MaximallyMixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(NamedState),
    Matrix(MatrixLiteral),
}

impl Default for InitialState {
    fn default() -> Self {
        Self::Named(NamedState::Ground)
    }
}

impl InitialState {
    /// Named states live in the span of the first two basis vectors.
    pub fn to_operator(&self, dim: HilbertDim) -> Result<Operator> {
        let n = dim.get();
        let named = |s: NamedState| -> Result<Operator> {
            if n < 2 && s != NamedState::Ground && s != NamedState::MaximallyMixed {
                return Err(Error::InvalidParameter(format!("{s:?} needs dimension ≥ 2")));
            }
            Ok(match s {
                NamedState::Ground => Operator::basis_projector(dim, 0),
                NamedState::Excited => Operator::basis_projector(dim, 1),
                NamedState::PlusX => {
                    Operator::from_fn(dim, |i, j| Complex64::new(if i < 2 && j < 2 { 0.5 } else { 0.0 }, 0.0))
                }
                NamedState::MaximallyMixed => Operator::identity(dim).scale_re(1.0 / n as f64),
            })
        };
        let rho = match self {
            // the two-level presets use |g⟩ = index 0
            InitialState::Named(s) if n == 2 => match s {
                NamedState::Ground => two_level::ground(),
                NamedState::Excited => two_level::excited(),
                NamedState::PlusX => two_level::plus_x(),
                NamedState::MaximallyMixed => two_level::maximally_mixed(),
            },
            InitialState::Named(s) => named(*s)?,
            InitialState::Matrix(m) => literal_to_operator(m)?,
        };
        rho.ensure_same_dim(&Operator::zeros(dim))?;
        rho.check_density(1.0)?;
        Ok(rho)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    IdealJump {
        efficiency: f64,
    },
    IdealHomodyne {
        efficiency: f64,
        #[serde(default)]
        scheme: DiffusiveScheme,
    },
    Apd(ApdParams),
    /// APD with the primed state eliminated.
    ApdNo1(ApdParams),
    /// APD without dead time.
    ApdNo2(ApdParams),
    /// APD reduced to an ideal counter (γ_r → ∞, no dead time).
    ApdIdeal(ApdParams),
    Receiver(ReceiverSpec),
    /// Photoreceiver without filtering capacitance.
    ReceiverNoiseOnly(ReceiverParams),
}

impl DetectorSpec {
    pub fn apd_variant(&self) -> Option<(ApdParams, ApdVariant)> {
        match self {
            DetectorSpec::Apd(p) => Some((*p, ApdVariant::Full)),
            DetectorSpec::ApdNo1(p) => Some((*p, ApdVariant::NoState1)),
            DetectorSpec::ApdNo2(p) => Some((*p, ApdVariant::NoDeadTime)),
            DetectorSpec::ApdIdeal(p) => Some((*p, ApdVariant::IdealLimit)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetectorSpec::IdealJump { .. } => "ideal_jump",
            DetectorSpec::IdealHomodyne { .. } => "ideal_homodyne",
            DetectorSpec::Apd(_) => "apd",
            DetectorSpec::ApdNo1(_) => "apd_no1",
            DetectorSpec::ApdNo2(_) => "apd_no2",
            DetectorSpec::ApdIdeal(_) => "apd_ideal",
            DetectorSpec::Receiver(_) => "receiver",
            DetectorSpec::ReceiverNoiseOnly(_) => "receiver_noise_only",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub efficiency: f64,
    pub filter_rate: f64,
    pub noise_power: f64,
    #[serde(default)]
    pub phase: f64,
    /// Voltage grid size; defaults to 256.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    /// Half-width of the voltage grid; defaults to 8 stationary standard deviations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
}

impl ReceiverSpec {
    pub fn params(&self) -> Result<ReceiverParams> {
        ReceiverParams::new(self.efficiency, self.filter_rate, self.noise_power, self.phase)
    }

    pub fn grid(&self) -> Result<VoltageGrid> {
        let default = VoltageGrid::with_cells(self.cells.unwrap_or(256), self.noise_power)?;
        VoltageGrid::new(default.cells, self.v_max.unwrap_or(default.v_max))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Simulate hidden truth and detector; write the measurement record.
    Generate,
    /// Condition on a measurement record read from disk.
    Filter,
    /// Many sampled trajectories; write ensemble statistics.
    Ensemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "one")]
    pub trajectories: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Steps between snapshots; defaults to about 200 snapshots per run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Output directory; falls back to `$REALTRAJ_OUT_DIR`, then the config's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Measurement record: written in generate mode, read in filter mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<PathBuf>,
}

pub const OUT_DIR_ENV: &str = "REALTRAJ_OUT_DIR";

/// Line (1-based) of `key = …` inside table `[section]`.
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// The `[detector]` key an error message is about, matched on the key's first word.
fn detector_key_in(src: &str, message: &str) -> Option<String> {
    let mut in_detector = false;
    for line in src.lines() {
        let t = line.trim();
        if t.starts_with('[') {
            in_detector = t == "[detector]";
            continue;
        }
        if let (true, Some((k, _))) = (in_detector, t.split_once('=')) {
            let k = k.trim();
            let word = k.split('_').next().unwrap_or(k);
            let named = message.contains(k) || message.contains(&k.replace('_', " "));
            if k != "kind" && (named || (word.len() >= 4 && message.contains(word))) {
                return Some(k.to_string());
            }
        }
    }
    None
}

/// A checked configuration with everything needed to step trajectories.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub config: RunConfig,
    pub model: LindbladModel,
    pub initial: Operator,
    pub steps: usize,
    pub snapshot_every: usize,
    pub hash: String,
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let src = std::fs::read_to_string(path)?;
        Ok((Self::from_toml(&src)?, src))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn model(&self) -> Result<LindbladModel> {
        let m = &self.model;
        let mu = m.mu.map(|[re, im]| Complex64::new(re, im)).unwrap_or_default();
        let model = match (m.preset, &m.h, &m.c) {
            (Some(preset), None, None) => {
                let decay = m.decay.unwrap_or(1.0);
                if !(decay >= 0.0) {
                    return Err(Error::InvalidParameter(format!("decay {decay} must be ≥ 0")));
                }
                let base = match preset {
                    ModelPreset::Tla => LindbladModel::tla(decay),
                    ModelPreset::DrivenTla => LindbladModel::driven_tla(m.omega.unwrap_or(1.0), decay),
                };
                let base = base.with_lo(mu);
                match m.phi {
                    Some(phi) => base.with_phase(phi)?,
                    None => base,
                }
            }
            (None, Some(h), Some(c)) => {
                if m.omega.is_some() || m.decay.is_some() {
                    return Err(Error::InvalidParameter("omega/decay only apply to presets".into()));
                }
                let phi = m.phi.unwrap_or(if mu.norm() > 0.0 { mu.arg() } else { 0.0 });
                LindbladModel::new(literal_to_operator(h)?, literal_to_operator(c)?, mu, phi)?
            }
            _ => return Err(Error::InvalidParameter("give either a preset or both h and c matrices".into())),
        };
        Ok(model)
    }

    /// Full validation. With the source text, errors name the offending line.
    pub fn validate(&self, src: Option<&str>) -> Result<RunSetup> {
        let at = |section: &str, key: &str, e: Error| -> Error {
            let msg = match e {
                Error::InvalidParameter(m) | Error::Config(m) => m,
                other => other.to_string(),
            };
            match src.and_then(|s| locate(s, section, key).or_else(|| locate(s, section, ""))) {
                Some(line) => Error::Config(format!("line {line}: [{section}] {key}: {msg}")),
                None => Error::Config(format!("[{section}] {key}: {msg}")),
            }
        };
        let model = self.model().map_err(|e| at("model", "preset", e))?;
        let initial = self.model.initial.to_operator(model.dim()).map_err(|e| at("model", "initial", e))?;

        let r = &self.run;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(at("run", "dt", Error::InvalidParameter(format!("dt = {} must be positive", r.dt))));
        }
        if !(r.t_final >= 0.0 && r.t_final.is_finite()) {
            return Err(at("run", "t_final", Error::InvalidParameter("t_final must be ≥ 0".into())));
        }
        let ratio = r.t_final / r.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return Err(at(
                "run",
                "t_final",
                Error::InvalidParameter(format!("t_final = {} is not a multiple of dt = {}", r.t_final, r.dt)),
            ));
        }
        let steps = steps as usize;
        if r.trajectories == 0 {
            return Err(at("run", "trajectories", Error::InvalidParameter("need at least one trajectory".into())));
        }
        if r.mode != Mode::Ensemble && r.trajectories != 1 {
            return Err(at(
                "run",
                "trajectories",
                Error::InvalidParameter("generate and filter modes run a single trajectory".into()),
            ));
        }
        if r.mode == Mode::Filter && self.output.record.is_none() {
            return Err(at("output", "record", Error::InvalidParameter("filter mode needs a record file".into())));
        }
        if r.snapshot_every == Some(0) {
            return Err(at("run", "snapshot_every", Error::InvalidParameter("must be ≥ 1".into())));
        }
        let snapshot_every = r.snapshot_every.unwrap_or((steps / 200).max(1));

        self.validate_detector(&model, r.dt).map_err(|e| {
            let key = src.and_then(|s| detector_key_in(s, &e.to_string())).unwrap_or_else(|| "kind".into());
            at("detector", &key, e)
        })?;
        Ok(RunSetup { config: self.clone(), model, initial, steps, snapshot_every, hash: self.hash() })
    }

    fn validate_detector(&self, model: &LindbladModel, dt: f64) -> Result<()> {
        let step = StepSize::new(dt)?;
        match &self.detector {
            DetectorSpec::IdealJump { efficiency } => JumpUnraveling::new(model, *efficiency, step).map(drop),
            DetectorSpec::IdealHomodyne { efficiency, scheme } => {
                HomodyneUnraveling::new(model, *efficiency, step, *scheme).map(drop)
            }
            DetectorSpec::Receiver(spec) => {
                let p = spec.params()?;
                let grid = spec.grid()?;
                let filter = ReceiverFilter::new(model, p, step)?;
                filter.check_grid(&grid).map_err(|e| match e {
                    Error::CflViolation { number, limit } => Error::InvalidParameter(format!(
                        "dt too large for the voltage grid (stability number {number:.3} > {limit}); use dt ≤ {:e}",
                        grid.default_dt(p.filter_rate, p.noise_power)
                    )),
                    e => e,
                })
            }
            DetectorSpec::ReceiverNoiseOnly(p) => NoiseOnlyPipeline::new(
                model,
                *p,
                step,
                &Operator::identity(model.dim()).scale_re(1.0 / model.dim().get() as f64),
            )
            .map(drop),
            other => {
                let (p, variant) = other.apd_variant().expect("remaining detectors are APDs");
                ApdFilter::new(model, p, step, variant, ApdForm::Normalized).map(drop)
            }
        }
    }

    /// Output directory: the configured one, else `$REALTRAJ_OUT_DIR`, else `base`.
    pub fn output_dir(&self, base: &Path) -> PathBuf {
        match (&self.output.dir, std::env::var_os(OUT_DIR_ENV)) {
            (Some(d), _) => base.join(d),
            (None, Some(env)) => PathBuf::from(env),
            (None, None) => base.to_path_buf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const APD: &str = r#"
[model]
preset = "driven_tla"
omega = 1.0
decay = 1.0

[detector]
kind = "apd"
efficiency = 0.8
dark_rate = 0.1
response_rate = 10.0
dead_time = 0.5

[run]
mode = "ensemble"
dt = 0.001
t_final = 20.0
trajectories = 2000
master_seed = 7
"#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_toml(APD).unwrap();
        let s = c.validate(Some(APD)).unwrap();
        assert_eq!(s.steps, 20_000);
        assert_eq!(s.snapshot_every, 100);
        assert_eq!(c.detector.name(), "apd");
        assert!(s.initial.max_abs_diff(&two_level::ground()) == 0.0);
        // canonical form round-trips
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = APD.replace("t_final = 20.0", "t_final = 20.0005");
        let err = RunConfig::from_toml(&bad).unwrap().validate(Some(&bad)).unwrap_err().to_string();
        assert!(err.contains("line 17"), "{err}");
        let bad = APD.replace("dead_time = 0.5", "dead_time = 0.0005");
        let err = RunConfig::from_toml(&bad).unwrap().validate(Some(&bad)).unwrap_err().to_string();
        assert!(err.contains("line 12") && err.contains("dead time"), "{err}");
        // syntax errors come from the parser with their position
        let err = RunConfig::from_toml("[run]\nmode = \n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = RunConfig::from_toml(&APD.replace("dark_rate", "dark_rte")).unwrap_err().to_string();
        assert!(err.contains("dark_rte"), "{err}");
    }

    #[test]
    fn matrix_literals() {
        let src = r#"
[model]
h = [[[0.0, 0.0], [0.5, 0.0]], [[0.5, 0.0], [0.0, 0.0]]]
c = [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]
initial = [[[0.5, 0.0], [0.5, 0.0]], [[0.5, 0.0], [0.5, 0.0]]]

[detector]
kind = "ideal_homodyne"
efficiency = 1.0

[run]
mode = "generate"
dt = 0.01
t_final = 1.0
"#;
        let c = RunConfig::from_toml(src).unwrap();
        let s = c.validate(Some(src)).unwrap();
        let preset = LindbladModel::driven_tla(1.0, 1.0);
        assert!(s.model.hamiltonian().max_abs_diff(preset.hamiltonian()) < 1e-15);
        assert!(s.model.collapse().max_abs_diff(preset.collapse()) < 1e-15);
        assert!(s.initial.max_abs_diff(&two_level::plus_x()) < 1e-15);
        let non_herm = src.replace("[0.5, 0.0]], [[0.5, 0.0], [0.0, 0.0]]]", "[0.5, 0.0]], [[0.4, 0.0], [0.0, 0.0]]]");
        let err = RunConfig::from_toml(&non_herm).unwrap().validate(Some(&non_herm)).unwrap_err();
        assert!(err.to_string().contains("Hermitian"), "{err}");
    }

    #[test]
    fn mode_constraints() {
        let gen = APD.replace("mode = \"ensemble\"", "mode = \"generate\"");
        assert!(RunConfig::from_toml(&gen).unwrap().validate(None).is_err());
        let filt = APD.replace("mode = \"ensemble\"", "mode = \"filter\"").replace("trajectories = 2000", "");
        let err = RunConfig::from_toml(&filt).unwrap().validate(None).unwrap_err();
        assert!(err.to_string().contains("record"));
    }

    #[test]
    fn receiver_grid_guard() {
        let src = r#"
[model]
preset = "driven_tla"

[detector]
kind = "receiver"
efficiency = 0.8
filter_rate = 20.0
noise_power = 0.1

[run]
mode = "ensemble"
dt = 0.001
t_final = 1.0
"#;
        let err = RunConfig::from_toml(src).unwrap().validate(Some(src)).unwrap_err().to_string();
        assert!(err.contains("stability number"), "{err}");
        let ok = src.replace("dt = 0.001", "dt = 0.00003125");
        RunConfig::from_toml(&ok).unwrap().validate(None).unwrap();
    }

    #[test]
    fn all_detector_kinds_parse() {
        for (kind, body) in [
            ("ideal_jump", "efficiency = 1.0"),
            ("ideal_homodyne", "efficiency = 1.0\nscheme = \"euler_maruyama\""),
            ("apd_no1", "efficiency = 1.0\ndark_rate = 0.0\nresponse_rate = 10.0\ndead_time = 0.1"),
            ("apd_no2", "efficiency = 1.0\ndark_rate = 0.0\nresponse_rate = 10.0\ndead_time = 0.0"),
            ("apd_ideal", "efficiency = 1.0\ndark_rate = 0.0\nresponse_rate = 10.0\ndead_time = 0.0"),
            ("receiver_noise_only", "efficiency = 0.8\nfilter_rate = 1.0\nnoise_power = 0.25"),
        ] {
            let src = format!(
                "[model]\npreset = \"tla\"\n[detector]\nkind = \"{kind}\"\n{body}\n[run]\nmode = \"ensemble\"\ndt = 0.01\nt_final = 0.1\n"
            );
            let c = RunConfig::from_toml(&src).unwrap_or_else(|e| panic!("{kind}: {e}"));
            assert_eq!(c.detector.name(), kind);
            c.validate(Some(&src)).unwrap();
        }
    }
}
