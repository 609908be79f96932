//! File formats: measurement/profile/history CSVs, the plain-text grid
//! format, JSON reports, and atomic writes.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`) so every value
//! round-trips bit-exactly through its file.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use spxt_core::forward::MeasurementSet;
use spxt_core::phantom::{RadialMap, RadialProfile, VoxelGrid};
use spxt_core::solver::IterStats;

use crate::error::CliError;

/// Full-precision float formatting: 17 significant digits round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes bytes via a temp file in the same directory plus a rename, so
/// other processes never observe partial files.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = path.to_path_buf();
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("invalid path {}", path.display())))?
        .to_string_lossy()
        .to_string();
    tmp.set_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Measurement CSV: `source_id,x,y,z,clean,noisy`, one row per source.
pub fn measurements_to_csv(m: &MeasurementSet) -> String {
    let mut out = String::from("source_id,x,y,z,clean,noisy\n");
    for (i, pos) in m.positions.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i,
            fmt_f64(pos[0]),
            fmt_f64(pos[1]),
            fmt_f64(pos[2]),
            fmt_f64(m.clean[i]),
            fmt_f64(m.noisy[i]),
        ));
    }
    out
}

pub fn write_measurements(path: &Path, m: &MeasurementSet) -> Result<(), CliError> {
    atomic_write(path, measurements_to_csv(m).as_bytes())
}

/// Reads a measurement CSV. The noise level and seed are not part of the
/// file format; they are reported as zero and only positions/values are
/// meaningful on the read side.
pub fn read_measurements(path: &Path) -> Result<MeasurementSet, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::InputMismatch(format!("{}: empty file", path.display())))?;
    if header.trim() != "source_id,x,y,z,clean,noisy" {
        return Err(CliError::InputMismatch(format!(
            "{}: unexpected header \"{header}\"",
            path.display()
        )));
    }
    let mut positions = Vec::new();
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::InputMismatch(format!(
                "{}:{}: expected 6 fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.trim().parse().map_err(|e| {
                CliError::InputMismatch(format!("{}:{}: {e}", path.display(), lineno + 2))
            })
        };
        positions.push([parse(fields[1])?, parse(fields[2])?, parse(fields[3])?]);
        clean.push(parse(fields[4])?);
        noisy.push(parse(fields[5])?);
    }
    Ok(MeasurementSet { positions, clean, noisy, noise_level: 0.0, seed: 0 })
}

/// Profile CSV: `class_index,sq_dist_key,radius,value`.
pub fn profile_to_csv(profile: &RadialProfile, map: &RadialMap) -> String {
    let mut out = String::from("class_index,sq_dist_key,radius,value\n");
    for (c, v) in profile.values().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c,
            map.class_keys()[c],
            fmt_f64(map.class_radius(c)),
            fmt_f64(*v),
        ));
    }
    out
}

pub fn write_profile(path: &Path, profile: &RadialProfile, map: &RadialMap) -> Result<(), CliError> {
    atomic_write(path, profile_to_csv(profile, map).as_bytes())
}

/// History CSV: `iter,J,F,G,step_norm`.
pub fn history_to_csv(history: &[IterStats]) -> String {
    let mut out = String::from("iter,J,F,G,step_norm\n");
    for s in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.iter,
            fmt_f64(s.objective),
            fmt_f64(s.data_term),
            fmt_f64(s.tv_term),
            fmt_f64(s.step_norm),
        ));
    }
    out
}

pub fn write_history(path: &Path, history: &[IterStats]) -> Result<(), CliError> {
    atomic_write(path, history_to_csv(history).as_bytes())
}

/// Grid file: header `n=<int>`, then n³ values in i-fastest order, one
/// i-row per line.
pub fn grid_to_text(grid: &VoxelGrid) -> String {
    let n = grid.n();
    let mut out = format!("n={n}\n");
    for (idx, v) in grid.values().iter().enumerate() {
        out.push_str(&fmt_f64(*v));
        if (idx + 1) % n == 0 {
            out.push('\n');
        } else {
            out.push(' ');
        }
    }
    out
}

pub fn write_grid(path: &Path, grid: &VoxelGrid) -> Result<(), CliError> {
    atomic_write(path, grid_to_text(grid).as_bytes())
}

pub fn read_grid(path: &Path) -> Result<VoxelGrid, CliError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::InputMismatch(format!("{}: empty file", path.display())))?;
    let n: usize = header
        .trim()
        .strip_prefix("n=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| {
            CliError::InputMismatch(format!("{}: expected header n=<int>", path.display()))
        })?;
    let mut values = Vec::with_capacity(n * n * n);
    for line in lines {
        for token in line.split_whitespace() {
            let v: f64 = token.parse().map_err(|e| {
                CliError::InputMismatch(format!("{}: bad value \"{token}\": {e}", path.display()))
            })?;
            values.push(v);
        }
    }
    VoxelGrid::from_values(n, values)
        .map_err(|e| CliError::InputMismatch(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}
