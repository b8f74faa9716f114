//! Reconstructs the nine-target phantom with all three beamformers and
//! prints per-depth FWHM and SNR.
//!
//! ```text
//! cargo run --release --example depth_sweep -- [snr_db] [pitch_mm] [K] [K_D] [lateral_step_mm] [half_width_mm]
//! ```

use std::time::Instant;

use pa_beamform::beamformers::{reconstruct_methods, BeamformerConfig, Method};
use pa_beamform::geometry::{ImageGrid, SensorArray, DEFAULT_PITCH};
use pa_beamform::metrics::{depth_sweep_report, MethodImage};
use pa_beamform::phantom::{default_phantom, simulate, Acquisition, PulseModel, DEFAULT_SAMPLING_RATE};
use pa_beamform::signal::{add_noise_at_snr, analytic_signal, envelope};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let snr_db = args.first().copied().unwrap_or(50.0);
    let pitch = args.get(1).map_or(DEFAULT_PITCH, |p| p * 1e-3);
    let sound_speed = 1540.0;

    let array = SensorArray::new(128, pitch)?;
    let phantom = default_phantom();
    let acq = Acquisition {
        sound_speed,
        sampling_rate: DEFAULT_SAMPLING_RATE,
        duration: 60e-6,
    };
    let raw = simulate(&phantom, &array, &PulseModel::default(), acq)?;
    let noisy = add_noise_at_snr(&raw, snr_db, 1)?;
    let analytic = analytic_signal(&noisy)?;

    let mut config = BeamformerConfig::with_defaults(128, sound_speed);
    if let Some(&k) = args.get(2) {
        config.temporal_half_window = k as usize;
    }
    if let Some(&kd) = args.get(3) {
        config.second_stage_temporal_half_window = kd as usize;
    }
    let lat_step = args.get(4).copied().unwrap_or(0.01) * 1e-3;
    let half_width = args.get(5).copied().unwrap_or(5.0) * 1e-3;
    let lat_count = (2.0 * half_width / lat_step).round() as usize + 1;
    let grid = ImageGrid::new((-half_width, half_width), lat_count, (22.5e-3, 67.5e-3), 451)?;
    let start = Instant::now();
    let recon = reconstruct_methods(&analytic, &grid, &array, &config, &Method::ALL)?;
    eprintln!("reconstruction: {:.1} s", start.elapsed().as_secs_f64());

    let envelopes: Vec<_> = recon.iter().map(|r| envelope(&r.image)).collect::<Result<_, _>>()?;
    let entries: Vec<MethodImage> = recon
        .iter()
        .zip(&envelopes)
        .map(|(r, e)| MethodImage { method: r.method, image: e, flagged_pixels: r.flagged_pixels })
        .collect();
    let depths: Vec<f64> = phantom.iter().map(|a| a.axial).collect();
    let report = depth_sweep_report(&entries, &depths)?;

    println!("depth_mm  fwhm_um(das mv dmv)        snr_db(das mv dmv)");
    for (i, d) in depths.iter().enumerate() {
        let row: Vec<_> = report.methods.iter().map(|m| &m.targets[i]).collect();
        println!(
            "{:6.1}  {:9.1} {:7.1} {:7.1}   {:6.2} {:6.2} {:6.2}",
            d * 1e3,
            row[0].fwhm_um.unwrap_or(f64::NAN),
            row[1].fwhm_um.unwrap_or(f64::NAN),
            row[2].fwhm_um.unwrap_or(f64::NAN),
            row[0].snr_db.unwrap_or(f64::NAN),
            row[1].snr_db.unwrap_or(f64::NAN),
            row[2].snr_db.unwrap_or(f64::NAN),
        );
    }
    for m in &report.methods {
        println!(
            "{}: spread {:.1} um, fallbacks {:?}",
            m.method,
            m.fwhm_spread_um.unwrap_or(f64::NAN),
            recon.iter().find(|r| r.method == m.method).unwrap().fallbacks
        );
    }
    Ok(())
}
