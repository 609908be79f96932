//! The six commands behind the `spxt` binary. Every command writes its
//! outputs plus a fully resolved config echo into the output directory, and
//! is byte-reproducible given (config, seed).

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;
use spxt_core::forward::{apply_noise, MeasurementSet};
use spxt_core::metrics::{compare_measurements, rmse, ssim};
use spxt_core::phantom::{build_radial_map, embed_profile, reduce_to_profile, voxelize, RadialProfile};
use spxt_core::solver::reconstruct_with;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::formats;
use crate::par::{build_path_matrices, clean_values, ChunkedKData};

fn write_echo(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    formats::atomic_write(&out.join("config.toml"), config.to_toml()?.as_bytes())
}

/// Voxelizes the configured phantom and writes the grid and its radial
/// profile.
pub fn cmd_phantom(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let phantom = config.build_phantom()?;
    let n = config.grid.n;
    let grid = voxelize(&phantom, n)?;
    let map = build_radial_map(n)?;
    let profile = reduce_to_profile(&grid, &map)?;

    fs::create_dir_all(out)?;
    write_echo(config, out)?;
    formats::write_grid(&out.join("phantom.grid"), &grid)?;
    formats::write_profile(&out.join("phantom_profile.csv"), &profile, &map)?;
    println!(
        "phantom: n={n}, {} shells, {} radial classes -> {}",
        phantom.shells().len(),
        map.class_count(),
        out.display()
    );
    Ok(())
}

/// Simulates a measurement set for the configured phantom and geometry.
pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let measurements = simulate_in_memory(config)?;
    fs::create_dir_all(out)?;
    write_echo(config, out)?;
    formats::write_measurements(&out.join("measurements.csv"), &measurements)?;
    println!(
        "simulate: {} sources, noise {}%, seed {} -> {}",
        measurements.len(),
        config.noise.level * 100.0,
        config.noise.seed,
        out.display()
    );
    Ok(())
}

/// The simulation pipeline shared by `simulate`, `sweep`, and the tests:
/// identical arithmetic to the sequential reference, parallel per source.
pub fn simulate_in_memory(config: &ExperimentConfig) -> Result<MeasurementSet, CliError> {
    let phantom = config.build_phantom()?;
    let sources = config.source_set()?;
    let detector = config.detector_spec()?;
    let n_sim = config.simulation_n();

    let map = build_radial_map(n_sim)?;
    let grid = voxelize(&phantom, n_sim)?;
    let profile = reduce_to_profile(&grid, &map)?;
    let paths = build_path_matrices(sources.positions(), &detector, &map)?;
    let clean = clean_values(&profile, &paths)?;
    let noisy = if config.noise.level == 0.0 {
        clean.clone()
    } else {
        apply_noise(&clean, config.noise.level, config.noise.seed)
    };
    Ok(MeasurementSet {
        positions: sources.positions().to_vec(),
        clean,
        noisy,
        noise_level: config.noise.level,
        seed: config.noise.seed,
    })
}

/// Validates that a measurement file matches the geometry the config
/// declares: source positions must agree bit-for-bit, and when a config echo
/// sits next to the measurement file, its sources/detector sections must
/// match as well.
fn validate_measurement_geometry(
    config: &ExperimentConfig,
    measurements: &MeasurementSet,
    measurements_path: &Path,
) -> Result<(), CliError> {
    let expected = config.source_set()?;
    if expected.positions() != measurements.positions.as_slice() {
        return Err(CliError::InputMismatch(format!(
            "{}: source positions do not match sources.count={} radius={}",
            measurements_path.display(),
            config.sources.count,
            config.sources.radius
        )));
    }
    if let Some(dir) = measurements_path.parent() {
        let echo_path = dir.join("config.toml");
        if echo_path.exists() {
            let echo = ExperimentConfig::load(&echo_path, &[], None)?;
            if echo.sources != config.sources || echo.detector != config.detector {
                return Err(CliError::InputMismatch(format!(
                    "{}: geometry differs from the reconstruction config",
                    echo_path.display()
                )));
            }
        }
    }
    Ok(())
}

/// Reconstructs a radial profile from a measurement file.
pub fn cmd_reconstruct(
    config: &ExperimentConfig,
    measurements_path: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let measurements = formats::read_measurements(measurements_path)?;
    validate_measurement_geometry(config, &measurements, measurements_path)?;

    let n = config.grid.n;
    let detector = config.detector_spec()?;
    let map = build_radial_map(n)?;
    let paths = build_path_matrices(&measurements.positions, &detector, &map)?;
    let data = ChunkedKData::new(&paths, &measurements.noisy, map.class_count())?;
    let params = config.dr_params();
    let (f, history) = reconstruct_with(&data, &params)?;
    let profile = RadialProfile::new(f);
    let grid = embed_profile(&profile, &map)?;

    fs::create_dir_all(out)?;
    write_echo(config, out)?;
    formats::write_profile(&out.join("profile.csv"), &profile, &map)?;
    formats::write_history(&out.join("history.csv"), &history)?;
    formats::write_grid(&out.join("recon.grid"), &grid)?;
    let last = history.last();
    println!(
        "reconstruct: {} iterations, final J {} -> {}",
        history.len(),
        last.map_or_else(|| "n/a".to_string(), |s| format!("{:.6e}", s.objective)),
        out.display()
    );
    Ok(())
}

/// One sweep cell result.
#[derive(Debug, Clone, Copy)]
struct SweepCell {
    noise: f64,
    alpha: f64,
    ssim: f64,
    rmse: f64,
}

fn sweep_cell_csv(cell: &SweepCell) -> String {
    format!(
        "{},{},{},{}\n",
        formats::fmt_f64(cell.noise),
        formats::fmt_f64(cell.alpha),
        formats::fmt_f64(cell.ssim),
        formats::fmt_f64(cell.rmse),
    )
}

/// Runs the noise × alpha grid: each cell simulates with its own derived
/// seed, reconstructs, and scores SSIM/RMSE against the discretized model.
/// Cells run in a worker pool; partial results are flushed per cell.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    noise_list: &[f64],
    alpha_list: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    if noise_list.is_empty() || alpha_list.is_empty() {
        return Err(CliError::Config("sweep lists must be non-empty".into()));
    }
    fs::create_dir_all(out)?;
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir)?;
    write_echo(config, out)?;

    let jobs: Vec<(usize, usize)> = (0..noise_list.len())
        .flat_map(|ni| (0..alpha_list.len()).map(move |ai| (ni, ai)))
        .collect();

    let results: Vec<Result<SweepCell, CliError>> = jobs
        .par_iter()
        .map(|&(ni, ai)| {
            let cell_index = (ni * alpha_list.len() + ai) as u64;
            let mut cell_config = config.clone();
            cell_config.noise.level = noise_list[ni];
            cell_config.solver.alpha = alpha_list[ai];
            cell_config.noise.seed = config.noise.seed.wrapping_add(cell_index);
            let (score, err) = run_sweep_cell(&cell_config)?;
            let cell = SweepCell {
                noise: noise_list[ni],
                alpha: alpha_list[ai],
                ssim: score,
                rmse: err,
            };
            formats::atomic_write(
                &cells_dir.join(format!("cell_{ni}_{ai}.csv")),
                format!("noise,alpha,ssim,rmse\n{}", sweep_cell_csv(&cell)).as_bytes(),
            )?;
            eprintln!(
                "sweep cell noise={} alpha={}: ssim {:.4}, rmse {:.4}",
                cell.noise, cell.alpha, cell.ssim, cell.rmse
            );
            Ok(cell)
        })
        .collect();

    let mut table = String::from("noise,alpha,ssim,rmse\n");
    for r in results {
        table.push_str(&sweep_cell_csv(&r?));
    }
    formats::atomic_write(&out.join("sweep.csv"), table.as_bytes())?;
    println!(
        "sweep: {} x {} cells -> {}",
        noise_list.len(),
        alpha_list.len(),
        out.join("sweep.csv").display()
    );
    Ok(())
}

/// Simulate + reconstruct + evaluate for one sweep cell, all in memory.
pub fn run_sweep_cell(config: &ExperimentConfig) -> Result<(f64, f64), CliError> {
    let measurements = simulate_in_memory(config)?;
    let n = config.grid.n;
    let detector = config.detector_spec()?;
    let map = build_radial_map(n)?;
    let paths = build_path_matrices(&measurements.positions, &detector, &map)?;
    let data = ChunkedKData::new(&paths, &measurements.noisy, map.class_count())?;
    let (f, _history) = reconstruct_with(&data, &config.dr_params())?;
    let recon = embed_profile(&RadialProfile::new(f), &map)?;

    let model = voxelize(&config.build_phantom()?, n)?;
    let score = ssim(&model, &recon, &config.ssim_params())?;
    let err = rmse(&model, &recon)?;
    Ok((score, err))
}

/// Compares two grid files and writes an SSIM/RMSE report with the
/// parameters and input digests.
pub fn cmd_evaluate(
    config: &ExperimentConfig,
    reference: &Path,
    candidate: &Path,
    out: &Path,
) -> Result<(), CliError> {
    let ref_grid = formats::read_grid(reference)?;
    let cand_grid = formats::read_grid(candidate)?;
    let params = config.ssim_params();
    let score = ssim(&ref_grid, &cand_grid, &params)?;
    let err = rmse(&ref_grid, &cand_grid)?;

    let report = json!({
        "ssim": score,
        "rmse": err,
        "parameters": {
            "k1": params.k1,
            "k2": params.k2,
            "window": params.window,
            "sigma": params.sigma,
            "data_range": params.data_range,
        },
        "inputs": {
            "reference": {
                "path": reference.display().to_string(),
                "sha256": formats::sha256_file(reference)?,
            },
            "candidate": {
                "path": candidate.display().to_string(),
                "sha256": formats::sha256_file(candidate)?,
            },
        },
    });
    fs::create_dir_all(out)?;
    formats::write_json(&out.join("metrics.json"), &report)?;
    println!("evaluate: ssim {score:.6}, rmse {err:.6} -> {}", out.join("metrics.json").display());
    Ok(())
}

/// Compares two measurement files within a tolerance and writes the verdict.
pub fn cmd_verify(a_path: &Path, b_path: &Path, tol: f64, out: &Path) -> Result<(), CliError> {
    let a = formats::read_measurements(a_path)?;
    let b = formats::read_measurements(b_path)?;
    let verdict = compare_measurements(&a, &b, tol)?;

    let report = json!({
        "accept": verdict.accept,
        "max_deviation": verdict.max_deviation,
        "worst_source": verdict.worst_source,
        "tolerance": tol,
        "inputs": {
            "a": { "path": a_path.display().to_string(), "sha256": formats::sha256_file(a_path)? },
            "b": { "path": b_path.display().to_string(), "sha256": formats::sha256_file(b_path)? },
        },
    });
    fs::create_dir_all(out)?;
    formats::write_json(&out.join("verdict.json"), &report)?;
    println!(
        "verify: {} (max deviation {:.6e}, tolerance {:.6e}) -> {}",
        if verdict.accept { "ACCEPT" } else { "REJECT" },
        verdict.max_deviation,
        tol,
        out.join("verdict.json").display()
    );
    Ok(())
}
