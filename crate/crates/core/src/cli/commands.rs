use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::RunConfig;
use super::format::{
    append_profile_csv, render_pgm, ChannelDataFile, EnvelopeFile, FormatError, PREVIEW_DYNAMIC_RANGE_DB,
    PROFILE_CSV_HEADER,
};
use super::CliError;
use crate::beamformers::{reconstruct, reconstruct_methods, Method};
use crate::geometry::{ImageGrid, SensorArray};
use crate::metrics::{depth_sweep_report, lateral_profile, MethodImage};
use crate::phantom::{default_phantom, required_duration, simulate as forward, Acquisition, PointAbsorber};
use crate::signal::{add_noise_at_snr, analytic_signal, envelope};

pub const CHANNEL_FILE: &str = "channels.pabf";
pub const CONFIG_FILE: &str = "config.json";
pub const REPORT_FILE: &str = "report.json";
pub const PROFILES_FILE: &str = "profiles.csv";
pub const BENCH_CSV: &str = "bench.csv";
pub const BENCH_JSON: &str = "bench.json";

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    RunConfig::from_json(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn read_input<T>(path: &Path, parse: impl FnOnce(&[u8]) -> Result<T, FormatError>) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse(&bytes).map_err(|e| match e {
        FormatError::Io(e) => CliError::io(path, e),
        FormatError::Malformed(m) => CliError::malformed(path, m),
    })
}

/// Simulates the configured phantom; returns the channel file path.
pub fn simulate(
    config: Option<&Path>,
    snr_db: Option<Option<f64>>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<PathBuf, CliError> {
    let mut cfg = match config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(snr) = snr_db {
        cfg.noise_snr_db = snr;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.output_dir = out.to_path_buf();
    }
    cfg.validate()?;

    let array = cfg.sensor_array()?;
    let clean = forward(&cfg.phantom.absorbers, &array, &cfg.phantom.pulse, cfg.acquisition())?;
    let data = match cfg.noise_snr_db {
        Some(snr) => add_noise_at_snr(&clean, snr, cfg.seed)?,
        None => clean,
    };
    let mut bytes = Vec::new();
    ChannelDataFile { pitch: array.pitch(), data }
        .write_to(&mut bytes)
        .expect("writing to memory");

    create_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(CHANNEL_FILE);
    write_file(&path, &bytes)?;
    write_file(&cfg.output_dir.join(CONFIG_FILE), cfg.to_json().as_bytes())?;
    log::info!("simulated {} channels to {}", array.element_count(), path.display());
    Ok(path)
}

/// Reconstructs a channel file with one method or the configured list.
///
/// Returns `(method, flagged pixels, envelope path)` per method.
pub fn beamform(
    input: &Path,
    method: Option<Method>,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<Vec<(Method, usize, PathBuf)>, CliError> {
    let sidecar = input.parent().map(|d| d.join(CONFIG_FILE)).filter(|p| p.is_file());
    let mut cfg = match config.map(Path::to_path_buf).or(sidecar) {
        Some(p) => load_config(&p)?,
        None => RunConfig::default(),
    };
    let file = read_input(input, ChannelDataFile::from_bytes)?;
    cfg.array.element_count = file.data.channel_count();
    cfg.array.pitch = file.pitch;
    if let Some(m) = method {
        cfg.methods = vec![m];
    }
    if let Some(out) = out {
        cfg.output_dir = out.to_path_buf();
    }
    cfg.validate()?;

    let array = cfg.sensor_array()?;
    let analytic = analytic_signal(&file.data)?;
    let recons = reconstruct_methods(&analytic, &cfg.grid, &array, &cfg.beamformer_config(), &cfg.methods)?;

    let mut artifacts = Vec::with_capacity(recons.len());
    for r in recons {
        let env = EnvelopeFile {
            method: r.method,
            flagged_pixels: r.flagged_pixels,
            image: envelope(&r.image)?,
        };
        let mut raster = Vec::new();
        env.write_to(&mut raster).expect("writing to memory");
        let pgm = render_pgm(&env.image, PREVIEW_DYNAMIC_RANGE_DB);
        artifacts.push((r.method, r.flagged_pixels, raster, pgm));
    }

    create_dir(&cfg.output_dir)?;
    let mut written = Vec::with_capacity(artifacts.len());
    for (m, flagged, raster, pgm) in artifacts {
        let path = cfg.output_dir.join(format!("{m}_envelope.f32"));
        write_file(&path, &raster)?;
        write_file(&cfg.output_dir.join(format!("{m}.pgm")), &pgm)?;
        written.push((m, flagged, path));
    }
    Ok(written)
}

/// Writes a JSON report and a profile CSV for a set of envelope rasters.
///
/// `depths` are in millimetres and default to the phantom targets.
pub fn metrics(inputs: &[PathBuf], depths: Option<&[f64]>, out: Option<&Path>) -> Result<PathBuf, CliError> {
    if inputs.is_empty() {
        return Err(CliError::usage("no envelope files given"));
    }
    let files = inputs
        .iter()
        .map(|p| read_input(p, EnvelopeFile::from_bytes))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = &files[0].image.grid;
    if let Some((i, _)) = files.iter().enumerate().find(|(_, f)| &f.image.grid != grid) {
        return Err(CliError {
            code: CliError::GRID_MISMATCH,
            message: format!(
                "{} and {} are on different grids",
                inputs[0].display(),
                inputs[i].display()
            ),
        });
    }
    let depths_mm: Vec<f64> = match depths {
        Some(d) => d.to_vec(),
        None => default_phantom().iter().map(|a| a.axial * 1e3).collect(),
    };
    let depths_m: Vec<f64> = depths_mm.iter().map(|d| d * 1e-3).collect();

    let images: Vec<MethodImage<'_>> = files
        .iter()
        .map(|f| MethodImage {
            method: f.method,
            image: &f.image,
            flagged_pixels: f.flagged_pixels,
        })
        .collect();
    let mut report = depth_sweep_report(&images, &depths_m)?;
    report.config = Some(serde_json::json!({
        "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "depths_mm": depths_mm,
    }));

    let mut csv = String::from(PROFILE_CSV_HEADER);
    for f in &files {
        for &d in &depths_m {
            match lateral_profile(&f.image, d) {
                Ok(p) => append_profile_csv(&mut csv, f.method, &p),
                Err(e) => log::warn!("{} at {:.2} mm: {e}", f.method, d * 1e3),
            }
        }
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");

    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    create_dir(&dir)?;
    let path = dir.join(REPORT_FILE);
    write_file(&path, json.as_bytes())?;
    write_file(&dir.join(PROFILES_FILE), csv.as_bytes())?;
    Ok(path)
}

/// Median per-pixel reconstruction time of one method at one element count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub element_count: usize,
    pub method: Method,
    pub reps: usize,
    pub pixels: usize,
    pub median_seconds_per_pixel: f64,
    pub min_seconds_per_pixel: f64,
    pub max_seconds_per_pixel: f64,
}

const BENCH_TARGET_DEPTH: f64 = 30e-3;

fn bench_grid() -> ImageGrid {
    ImageGrid {
        lateral_min: -0.2e-3,
        lateral_max: 0.2e-3,
        lateral_count: 16,
        axial_min: BENCH_TARGET_DEPTH - 0.1e-3,
        axial_max: BENCH_TARGET_DEPTH + 0.1e-3,
        axial_count: 16,
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Times DAS, MV and D-MV on a small grid around one target for each
/// element count in `sweep`, writing a CSV and a JSON summary.
pub fn bench(
    sweep: &[usize],
    config: Option<&Path>,
    reps: usize,
    out: Option<&Path>,
) -> Result<Vec<BenchRow>, CliError> {
    if sweep.is_empty() || sweep.iter().any(|&m| m < 8) {
        return Err(CliError::usage("sweep needs element counts of at least 8"));
    }
    if reps < 5 {
        return Err(CliError::usage("at least 5 repetitions are required"));
    }
    let cfg = match config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    cfg.phantom.pulse.validate()?;
    let grid = bench_grid();
    let target = [PointAbsorber {
        lateral: 0.0,
        axial: BENCH_TARGET_DEPTH,
        amplitude: 1.0,
        radius: 0.1e-3,
    }];

    let mut setups = Vec::with_capacity(sweep.len());
    for &m in sweep {
        let array = SensorArray::new(m, cfg.array.pitch)?;
        let bf = cfg.beamformer.resolve(m);
        bf.validate_strict(m)?;
        setups.push((array, bf));
    }

    let mut rows = Vec::new();
    for (array, bf) in &setups {
        let needed = required_duration(&target, array, &cfg.phantom.pulse, bf.sound_speed);
        let acq = Acquisition {
            sound_speed: bf.sound_speed,
            sampling_rate: cfg.phantom.sampling_rate,
            duration: needed * 1.1,
        };
        let clean = forward(&target, array, &cfg.phantom.pulse, acq)?;
        let data = match cfg.noise_snr_db {
            Some(snr) => add_noise_at_snr(&clean, snr, cfg.seed)?,
            None => clean,
        };
        let analytic = analytic_signal(&data)?;
        for method in Method::ALL {
            let mut times: Vec<f64> = (0..reps)
                .map(|_| {
                    let start = Instant::now();
                    let r = reconstruct(&analytic, &grid, array, bf, method);
                    let t = start.elapsed().as_secs_f64();
                    r.map(|_| t / grid.pixel_count() as f64)
                })
                .collect::<Result<_, _>>()?;
            times.sort_by(f64::total_cmp);
            rows.push(BenchRow {
                element_count: array.element_count(),
                method,
                reps,
                pixels: grid.pixel_count(),
                median_seconds_per_pixel: median(&times),
                min_seconds_per_pixel: times[0],
                max_seconds_per_pixel: times[times.len() - 1],
            });
        }
    }

    let mut csv = String::from("element_count,method,reps,pixels,median_s_per_pixel,min_s_per_pixel,max_s_per_pixel\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{:e},{:e},{:e}\n",
            r.element_count,
            r.method,
            r.reps,
            r.pixels,
            r.median_seconds_per_pixel,
            r.min_seconds_per_pixel,
            r.max_seconds_per_pixel
        ));
    }
    let slopes: serde_json::Map<String, serde_json::Value> = if sweep.len() >= 2 {
        Method::ALL
            .iter()
            .map(|&m| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.method == m)
                    .map(|r| (r.element_count as f64, r.median_seconds_per_pixel))
                    .collect();
                (m.to_string(), serde_json::json!(log_log_slope(&pts)))
            })
            .collect()
    } else {
        serde_json::Map::new()
    };
    let summary = serde_json::json!({
        "config": cfg,
        "grid": grid,
        "rows": rows,
        "log_log_slopes": slopes,
    });

    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    create_dir(&dir)?;
    write_file(&dir.join(BENCH_CSV), csv.as_bytes())?;
    write_file(
        &dir.join(BENCH_JSON),
        serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes(),
    )?;
    Ok(rows)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
