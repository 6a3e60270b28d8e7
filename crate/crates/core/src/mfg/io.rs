use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::torus::{self, TorusGrid};

use super::Trajectory;

fn level_file(dir: &Path, prefix: &str, k: usize) -> std::path::PathBuf {
    dir.join(format!("{prefix}_{k:05}.txt"))
}

/// Writes `meta` plus one torus-field file per time level into `dir`.
pub fn save_trajectory(dir: &Path, cfg: &ModelConfig, traj: &Trajectory, value: f64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = BufWriter::new(File::create(dir.join("meta"))?);
    writeln!(meta, "# mfglab trajectory v1")?;
    writeln!(meta, "dim = {}", traj.grid.dim())?;
    writeln!(meta, "n = {}", traj.grid.points_per_axis())?;
    writeln!(meta, "t0 = {}", traj.t0)?;
    writeln!(meta, "dt = {}", traj.dt)?;
    writeln!(meta, "steps = {}", traj.steps())?;
    writeln!(meta, "horizon = {}", traj.horizon())?;
    writeln!(meta, "model_hash = {}", cfg.fingerprint())?;
    writeln!(meta, "value = {value}")?;
    writeln!(meta, "fp_residual = {}", traj.fp_residual)?;
    writeln!(meta, "has_u = {}", traj.u.is_some())?;
    meta.flush()?;
    for (k, m) in traj.m.iter().enumerate() {
        torus::write_measure(BufWriter::new(File::create(level_file(dir, "m", k))?), m)?;
    }
    for (k, a) in traj.alpha.iter().enumerate() {
        torus::write_vector(BufWriter::new(File::create(level_file(dir, "alpha", k))?), a)?;
    }
    for (k, u) in traj.u.iter().flatten().enumerate() {
        torus::write_field(BufWriter::new(File::create(level_file(dir, "u", k))?), u)?;
    }
    Ok(())
}

/// Reads a trajectory written by [`save_trajectory`] together with its meta entries.
pub fn load_trajectory(dir: &Path) -> Result<(Trajectory, BTreeMap<String, String>)> {
    let text = fs::read_to_string(dir.join("meta"))?;
    let meta: BTreeMap<String, String> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())))
        .collect();
    let get = |k: &str| {
        meta.get(k)
            .ok_or_else(|| Error::Format(format!("meta lacks `{k}`")))
    };
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|e| Error::Format(format!("{k}: {e}"))) };
    let steps = num("steps")? as usize;
    let grid = TorusGrid::new(num("dim")? as usize, num("n")? as usize)?;
    let open = |p: std::path::PathBuf| -> Result<BufReader<File>> { Ok(BufReader::new(File::open(p)?)) };
    let m = (0..=steps)
        .map(|k| {
            let (h, v) = torus::read_text(open(level_file(dir, "m", k))?)?;
            if h.grid != grid {
                return Err(Error::GridMismatch(format!("level {k}")));
            }
            // solver output may carry round-off below zero, so no validation here
            Ok(crate::torus::ProbMeasure::from_solver(grid, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let alpha = (0..steps)
        .map(|k| torus::read_vector(open(level_file(dir, "alpha", k))?))
        .collect::<Result<Vec<_>>>()?;
    let u = if get("has_u")? == "true" {
        Some(
            (0..=steps)
                .map(|k| torus::read_field(open(level_file(dir, "u", k))?))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let mut traj = Trajectory::from_parts(num("t0")?, num("dt")?, m, alpha, u)?;
    traj.fp_residual = num("fp_residual")?;
    Ok((traj, meta))
}
