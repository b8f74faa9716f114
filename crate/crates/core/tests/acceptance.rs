//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use common::*;
use num_complex::Complex64;
use pa_beamform::beamformers::{
    apply_diagonal_loading, estimate_covariance, mv_output, mv_weights, reconstruct_methods, subarray_outputs,
    BeamformerConfig, Method, SnapshotBuffer,
};
use pa_beamform::cli::{self, RunConfig};
use pa_beamform::geometry::{ImageGrid, SensorArray};
use pa_beamform::metrics::{depth_sweep_report, MethodImage, MetricsReport};
use pa_beamform::phantom::{default_phantom, simulate, PointAbsorber, PulseModel};
use pa_beamform::signal::{add_noise_at_snr, analytic_signal, envelope};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. Algebraic identities

fn algebraic_identities() -> Check {
    const DRAWS: usize = 1000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_aw, mut worst_sum, mut worst_cov, mut worst_w) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for draw in 0..DRAWS {
        let m = rng.gen_range(4..=16);
        let l = rng.gen_range(1..=m);
        let k = rng.gen_range(0..=3);
        let delta = rng.gen_range(1e-3..0.9) / l as f64;
        let rows = random_rows(2 * k + 1, m, &mut rng);
        let buffer = SnapshotBuffer::from_rows(m, &rows).map_err(|e| e.to_string())?;

        let r = estimate_covariance(&buffer, l).map_err(|e| e.to_string())?;
        worst_cov = worst_cov.max(rel_err(r.entries(), &covariance_oracle(&rows, l)));

        let loaded = apply_diagonal_loading(&r, delta).map_err(|e| e.to_string())?;
        let w = mv_weights(&loaded).map_err(|e| e.to_string())?;
        worst_aw = worst_aw.max((w.steering_response() - Complex64::new(1.0, 0.0)).norm());
        worst_w = worst_w.max(rel_err(w.as_slice(), &weights_oracle(loaded.entries(), l)));

        let p = subarray_outputs(&w, buffer.centre()).map_err(|e| e.to_string())?;
        let direct = direct_output(w.as_slice(), buffer.centre());
        worst_sum = worst_sum.max((mv_output(&p) - direct).norm() / direct.norm());

        // Second stage on the p rows of the same draw.
        let p_rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|x| subarray_outputs(&w, x).map(|p| p.into_vec()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let md = m - l + 1;
        let ld = rng.gen_range(1..=md);
        let pbuf = SnapshotBuffer::from_rows(md, &p_rows).map_err(|e| e.to_string())?;
        let rd = estimate_covariance(&pbuf, ld).map_err(|e| e.to_string())?;
        let rd = apply_diagonal_loading(&rd, 0.5 / ld as f64).map_err(|e| e.to_string())?;
        let wd = mv_weights(&rd).map_err(|e| format!("draw {draw}: {e}"))?;
        worst_aw = worst_aw.max((wd.steering_response() - Complex64::new(1.0, 0.0)).norm());
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{DRAWS} draws in {secs:.2} s; max |aᴴw−1| {worst_aw:.1e}, Σp vs direct {worst_sum:.1e}, \
         covariance {worst_cov:.1e}, weights {worst_w:.1e}"
    );
    ensure(
        worst_aw < 1e-10 && worst_sum < 1e-12 && worst_cov < 1e-13 && worst_w < 1e-10 && secs < 10.0,
        || detail.clone(),
    )?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// Phantom sweeps shared by criteria 2-5

const SWEEP_SEED: u64 = 1;

fn sweep_grid() -> ImageGrid {
    ImageGrid::new((-5e-3, 5e-3), 1001, (22.5e-3, 67.5e-3), 451).unwrap()
}

fn phantom_sweep(snr_db: f64, k: usize, kd: usize, depths: &[f64]) -> Result<MetricsReport, String> {
    let cfg = RunConfig::default();
    let array = cfg.sensor_array().map_err(|e| e.to_string())?;
    let clean = simulate(&default_phantom(), &array, &PulseModel::default(), cfg.acquisition())
        .map_err(|e| e.to_string())?;
    let noisy = add_noise_at_snr(&clean, snr_db, SWEEP_SEED).map_err(|e| e.to_string())?;
    let analytic = analytic_signal(&noisy).map_err(|e| e.to_string())?;
    let mut bf = BeamformerConfig::with_defaults(array.element_count(), cfg.beamformer.sound_speed);
    bf.temporal_half_window = k;
    bf.second_stage_temporal_half_window = kd;
    bf.validate_strict(array.element_count()).map_err(|e| e.to_string())?;

    let recon = reconstruct_methods(&analytic, &sweep_grid(), &array, &bf, &Method::ALL).map_err(|e| e.to_string())?;
    let envelopes: Vec<_> = recon
        .iter()
        .map(|r| envelope(&r.image))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let images: Vec<MethodImage<'_>> = recon
        .iter()
        .zip(&envelopes)
        .map(|(r, e)| MethodImage {
            method: r.method,
            image: e,
            flagged_pixels: r.flagged_pixels,
        })
        .collect();
    depth_sweep_report(&images, depths).map_err(|e| e.to_string())
}

fn target_depths() -> Vec<f64> {
    default_phantom().iter().map(|a| a.axial).collect()
}

fn low_noise_sweep() -> Result<&'static MetricsReport, String> {
    static REPORT: OnceLock<Result<MetricsReport, String>> = OnceLock::new();
    REPORT
        .get_or_init(|| phantom_sweep(50.0, 3, 0, &target_depths()))
        .as_ref()
        .map_err(Clone::clone)
}

fn widths(report: &MetricsReport, m: Method) -> Result<Vec<f64>, String> {
    let r = report.method(m).ok_or_else(|| format!("{m} missing"))?;
    r.targets
        .iter()
        .map(|t| t.fwhm_um.ok_or_else(|| format!("{m} FWHM undefined at {} mm: {:?}", t.depth_mm, t.flags)))
        .collect()
}

fn snrs(report: &MetricsReport, m: Method) -> Result<Vec<f64>, String> {
    let r = report.method(m).ok_or_else(|| format!("{m} missing"))?;
    r.targets
        .iter()
        .map(|t| t.snr_db.ok_or_else(|| format!("{m} SNR undefined at {} mm: {:?}", t.depth_mm, t.flags)))
        .collect()
}

fn spread(report: &MetricsReport, m: Method) -> Result<f64, String> {
    report
        .method(m)
        .and_then(|r| r.fwhm_spread_um)
        .ok_or_else(|| format!("{m} spread undefined"))
}

fn fmt_row(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>().join("/")
}

fn strictly_ordered(a: &[f64], b: &[f64], c: &[f64]) -> bool {
    a.iter().zip(b).zip(c).all(|((a, b), c)| a > b && b > c)
}

fn fwhm_ordering(report: &MetricsReport, check_das_growth: bool) -> Check {
    let das = widths(report, Method::Das)?;
    let mv = widths(report, Method::Mv)?;
    let dmv = widths(report, Method::Dmv)?;
    let detail = format!(
        "FWHM μm DAS {} | MV {} | DMV {}",
        fmt_row(&das),
        fmt_row(&mv),
        fmt_row(&dmv)
    );
    ensure(strictly_ordered(&das, &mv, &dmv), || format!("ordering violated: {detail}"))?;
    if check_das_growth {
        ensure(das.windows(2).all(|w| w[1] > w[0]), || {
            format!("DAS FWHM not monotonic in depth: {detail}")
        })?;
    }
    Ok(detail)
}

fn spread_ordering(report: &MetricsReport) -> Check {
    let (d, m, x) = (
        spread(report, Method::Das)?,
        spread(report, Method::Mv)?,
        spread(report, Method::Dmv)?,
    );
    let detail = format!("FWHM spread μm DAS {d:.1} > MV {m:.1} > DMV {x:.1}");
    ensure(d > m && m > x, || format!("ordering violated: {detail}"))?;
    Ok(detail)
}

fn snr_ordering(report: &MetricsReport) -> Check {
    let das = snrs(report, Method::Das)?;
    let mv = snrs(report, Method::Mv)?;
    let dmv = snrs(report, Method::Dmv)?;
    let detail = format!("SNR dB DAS {} | MV {} | DMV {}", fmt_row(&das), fmt_row(&mv), fmt_row(&dmv));
    ensure(strictly_ordered(&dmv, &mv, &das), || format!("ordering violated: {detail}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 2-5

fn resolution_trend() -> Check {
    fwhm_ordering(low_noise_sweep()?, true)
}

fn depth_stability() -> Check {
    spread_ordering(low_noise_sweep()?)
}

fn snr_trend() -> Check {
    snr_ordering(low_noise_sweep()?)
}

fn high_noise_robustness() -> Check {
    let report = phantom_sweep(10.0, 0, 0, &[30e-3, 45e-3, 55e-3])?;
    let a = fwhm_ordering(&report, false)?;
    let b = spread_ordering(&report)?;
    let c = snr_ordering(&report)?;
    Ok(format!("{a}; {b}; {c}"))
}

// ---------------------------------------------------------------------------
// 6. Noise calibration

fn noise_calibration() -> Check {
    let cfg = RunConfig::default();
    let array = cfg.sensor_array().map_err(|e| e.to_string())?;
    let clean = simulate(&default_phantom(), &array, &PulseModel::default(), cfg.acquisition())
        .map_err(|e| e.to_string())?;
    let signal: f64 = clean.samples().iter().map(|v| v * v).sum();
    let mut parts = Vec::new();
    for target in [50.0, 10.0, 0.0] {
        let noisy = add_noise_at_snr(&clean, target, SWEEP_SEED).map_err(|e| e.to_string())?;
        let noise: f64 = noisy
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(n, c)| (n - c) * (n - c))
            .sum();
        let measured = 10.0 * (signal / noise).log10();
        parts.push(format!("{target} dB → {measured:.3} dB"));
        ensure((measured - target).abs() <= 0.5, || parts.join(", "))?;
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------------------
// 7. Localization
//
// Off-axis targets sit on a pixel centre: their point-spread function is
// tilted along the arc of constant range, so when no grid row passes through
// the target the brightest pixel of the nearest row slides along that arc.
// On-axis targets have an untilted response and are placed off-grid.

fn peak_offsets(target: PointAbsorber, grid: &ImageGrid, cfg: &RunConfig) -> Result<Vec<(Method, i64, i64)>, String> {
    let array: SensorArray = cfg.sensor_array().map_err(|e| e.to_string())?;
    let clean = simulate(&[target], &array, &PulseModel::default(), cfg.acquisition()).map_err(|e| e.to_string())?;
    let analytic = analytic_signal(&clean).map_err(|e| e.to_string())?;
    let want_i = ((target.lateral - grid.lateral_min) / grid.lateral_step()).round() as i64;
    let want_j = ((target.axial - grid.axial_min) / grid.axial_step()).round() as i64;
    reconstruct_methods(&analytic, grid, &array, &cfg.beamformer_config(), &Method::ALL)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|r| {
            let (i, j) = envelope(&r.image).map_err(|e| e.to_string())?.argmax();
            Ok((r.method, i as i64 - want_i, j as i64 - want_j))
        })
        .collect()
}

fn localization() -> Check {
    let cfg = RunConfig::default();
    let point = |x: f64, z: f64| PointAbsorber {
        lateral: x,
        axial: z,
        amplitude: 1.0,
        radius: 0.1e-3,
    };
    let mut cases = Vec::new();
    for (x, z) in [(0.0, 25e-3), (1.23e-3, 40.07e-3), (-2.31e-3, 58.62e-3), (2.0e-3, 45.0e-3)] {
        let step = 50e-6;
        let grid = ImageGrid::new((x - 17.0 * step, x + 23.0 * step), 41, (z - 23.0 * step, z + 17.0 * step), 41)
            .map_err(|e| e.to_string())?;
        cases.push((point(x, z), grid));
    }
    for (z, (fx, fz)) in [(25e-3, (0.31, -0.42)), (38.137e-3, (-0.18, 0.27)), (51.9e-3, (0.44, 0.11)), (65e-3, (-0.36, -0.23))] {
        let (sl, sa) = (10e-6, 100e-6);
        let (cx, cz) = (fx * sl, z + fz * sa);
        let grid = ImageGrid::new((cx - 20.0 * sl, cx + 20.0 * sl), 41, (cz - 10.0 * sa, cz + 10.0 * sa), 21)
            .map_err(|e| e.to_string())?;
        cases.push((point(0.0, z), grid));
    }
    let mut worst = 0;
    for (target, grid) in &cases {
        for (method, di, dj) in peak_offsets(*target, grid, &cfg)? {
            ensure(di.abs() <= 1 && dj.abs() <= 1, || {
                format!(
                    "{method} at ({:.3}, {:.3}) mm: peak off by ({di}, {dj}) pixels",
                    target.lateral * 1e3,
                    target.axial * 1e3
                )
            })?;
            worst = worst.max(di.abs()).max(dj.abs());
        }
    }
    Ok(format!("{} targets × 3 methods, worst offset {worst} pixel(s)", cases.len()))
}

// ---------------------------------------------------------------------------
// 8. Benchmark

fn benchmark() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sweep = [32, 64, 128];
    let rows = cli::bench(&sweep, None, 5, Some(dir.path())).map_err(|e| e.to_string())?;
    let time = |m: usize, method: Method| {
        rows.iter()
            .find(|r| r.element_count == m && r.method == method)
            .map(|r| r.median_seconds_per_pixel)
            .unwrap()
    };
    let mut parts = Vec::new();
    for m in sweep {
        let (d, v, x) = (time(m, Method::Das), time(m, Method::Mv), time(m, Method::Dmv));
        parts.push(format!("M={m}: {d:.2e}/{v:.2e}/{x:.2e} s"));
        ensure(x > v && v > d, || format!("ordering violated: {}", parts.join(", ")))?;
    }
    let slope = cli::log_log_slope(&sweep.map(|m| (m as f64, time(m, Method::Mv))));
    let detail = format!("{}; MV slope {slope:.2}", parts.join(", "));
    ensure(slope > 1.5, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// 9. Determinism

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::default();
    cfg.grid = ImageGrid::new((-2e-3, 2e-3), 41, (29e-3, 31e-3), 21).map_err(|e| e.to_string())?;
    let config_path = dir.path().join("run.json");
    fs::write(&config_path, cfg.to_json()).map_err(|e| e.to_string())?;

    let run = |name: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let out = dir.path().join(name);
        let pabf = |args: &[&str]| -> Result<(), String> {
            let status = Command::new(env!("CARGO_BIN_EXE_pabf"))
                .args(args)
                .env("RUST_LOG", "error")
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || String::from_utf8_lossy(&status.stderr).into_owned())
        };
        let out_s = out.to_str().unwrap();
        pabf(&["simulate", "--config", config_path.to_str().unwrap(), "--out", out_s])?;
        pabf(&["beamform", out.join("channels.pabf").to_str().unwrap()])?;
        ["channels.pabf", "das_envelope.f32", "mv_envelope.f32", "dmv_envelope.f32"]
            .iter()
            .map(|f| read(&out.join(f)).map(|b| (f.to_string(), b)))
            .collect()
    };
    let a = run("first")?;
    let b = run("second")?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} files bit-identical", a.len()))
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("algebraic identity suite", algebraic_identities),
        ("FWHM ordering and DAS growth at 50 dB", resolution_trend),
        ("FWHM depth spread ordering", depth_stability),
        ("SNR ordering at 50 dB", snr_trend),
        ("orderings at 10 dB, K = K_D = 0", high_noise_robustness),
        ("noise calibration within 0.5 dB", noise_calibration),
        ("single-target localization", localization),
        ("benchmark ordering and MV scaling", benchmark),
        ("determinism of simulate + beamform", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
