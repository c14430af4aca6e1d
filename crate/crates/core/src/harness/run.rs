use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::config::{Mode, RunConfig, RunSetup};
use super::ensemble::map_trajectories;
use super::io::{read_record, write_record, write_table, TrajectoryTable};
use super::rng::seed_stream;
use super::stats::{state_series_rows, SummaryStats};
use super::trajectory::{Engine, Trajectory};
use crate::error::{Error, Result};
use crate::qops::MePropagator;
use crate::receiver::{welch_periodogram, ReceiverSupersystem};

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Single-trajectory modes: the conditioned trajectory.
    pub trajectory: Option<TrajectoryTable>,
    /// Generate mode: the simulated record.
    pub record: Option<Vec<f64>>,
    /// Ensemble mode.
    pub summary: Option<SummaryStats>,
    /// Ensemble mode: largest trace distance between the ensemble mean and the master equation.
    pub me_distance: Option<f64>,
}

/// Loads, validates and runs a config file. Relative paths resolve against its directory.
pub fn run_file(path: &Path) -> Result<RunReport> {
    let (config, src) = RunConfig::load(path)?;
    let setup = config.validate(Some(&src))?;
    let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    run(&setup, &base)
}

pub fn run(setup: &RunSetup, base: &Path) -> Result<RunReport> {
    let engine = Engine::new(setup)?;
    let config = &setup.config;
    let out_dir = config.output_dir(base);
    fs::create_dir_all(&out_dir)?;
    let mut report = RunReport::default();
    match config.run.mode {
        Mode::Generate => {
            let mut rng = seed_stream(config.run.master_seed, 0);
            let mut tr = engine.start(true, &mut rng)?;
            let mut record = Vec::with_capacity(engine.steps());
            let table = follow(&engine, &mut tr, |tr| tr.advance_sampled(&mut rng).map(|v| record.push(v)))?;
            let record_path =
                config.output.record.as_ref().map_or_else(|| out_dir.join("record.csv"), |p| base.join(p));
            write_record(&record_path, &setup.hash, &record)?;
            report.files.push(record_path);
            if tr.receiver_grid().is_some() && record.len() >= 64 {
                // Welch periodogram of the output voltage, for the bandwidth figure
                let segment = (record.len() / 8).next_power_of_two().clamp(32, 4096);
                let spec = welch_periodogram(&record, engine.dt(), segment)?;
                let rows: Vec<Vec<f64>> = spec.omega.iter().zip(&spec.power).map(|(w, p)| vec![*w, *p]).collect();
                let path = out_dir.join("spectrum.csv");
                write_table(&path, Some(&setup.hash), &["omega".into(), "power".into()], &rows)?;
                report.files.push(path);
            }
            finish_single(setup, &out_dir, &tr, table, &mut report)?;
            report.record = Some(record);
        }
        Mode::Filter => {
            let record_path = base.join(config.output.record.as_ref().expect("validated: filter mode has a record"));
            let record = read_record(&record_path)?;
            if record.len() != engine.steps() {
                return Err(Error::GridMismatch(format!(
                    "record has {} steps but the run needs {}",
                    record.len(),
                    engine.steps()
                )));
            }
            let mut rng = seed_stream(config.run.master_seed, 0);
            let mut tr = engine.start(false, &mut rng)?;
            let mut values = record.iter();
            let table = follow(&engine, &mut tr, |tr| tr.advance_recorded(*values.next().expect("length checked")))?;
            finish_single(setup, &out_dir, &tr, table, &mut report)?;
        }
        Mode::Ensemble => {
            let rows = map_trajectories(config.run.trajectories, |i| engine.sampled_snapshots(i))?;
            let name = engine.start(false, &mut seed_stream(0, 0))?.observable_name();
            let times = engine.times();
            let summary = SummaryStats::from_snapshots(engine.model().dim(), name, &times, &rows);
            let path = out_dir.join("summary.csv");
            write_table(&path, Some(&setup.hash), &summary.header(), &summary.rows())?;
            report.files.push(path);

            let me = MePropagator::new(engine.model()).series(engine.initial(), &times)?;
            let (header, rows) = state_series_rows(&times, &me);
            let path = out_dir.join("me_reference.csv");
            write_table(&path, Some(&setup.hash), &header, &rows)?;
            report.files.push(path);
            report.me_distance = Some(summary.max_distance_to(&me)?);
            report.summary = Some(summary);
        }
    }
    Ok(report)
}

/// Steps a trajectory to the end, taking snapshots on the engine's schedule.
fn follow<'a>(
    engine: &'a Engine,
    tr: &mut Trajectory<'a>,
    mut advance: impl FnMut(&mut Trajectory<'a>) -> Result<()>,
) -> Result<TrajectoryTable> {
    let mut table = TrajectoryTable::new(engine.model().dim(), tr.observable_name());
    let mut k = 0;
    for mark in engine.snapshot_steps() {
        while k < mark {
            advance(tr)?;
            k += 1;
        }
        table.push(mark as f64 * engine.dt(), tr.state_coords(), tr.observable());
    }
    Ok(table)
}

fn finish_single(
    setup: &RunSetup,
    out_dir: &Path,
    tr: &Trajectory<'_>,
    table: TrajectoryTable,
    report: &mut RunReport,
) -> Result<()> {
    let path = out_dir.join("trajectory.csv");
    table.write_csv(BufWriter::new(File::create(&path)?), Some(&setup.hash))?;
    report.files.push(path);
    if let Some(grid) = tr.receiver_grid() {
        report.files.push(write_grid(out_dir, grid)?);
    }
    report.trajectory = Some(table);
    Ok(())
}

fn write_grid(out_dir: &Path, grid: &ReceiverSupersystem) -> Result<PathBuf> {
    let path = out_dir.join("grid_final.csv");
    grid.write_csv(BufWriter::new(File::create(&path)?))?;
    Ok(path)
}
