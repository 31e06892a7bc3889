//! Explicit per-bin simulation of a narrow band: complex Gaussian voltages
//! per element, powers thresholded against the mean noise power.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::rng::{domain, substream};
use crate::error::{Error, Result};
use crate::firstlevel::{db_to_linear, FrameEvents, PulseEvent};
use crate::phasecal::wrap;

/// Widest band the explicit simulator accepts.
pub const DENSE_BAND_MAX_HZ: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenseBandConfig {
    pub band_start_hz: f64,
    pub band_width_hz: f64,
    pub fft_bin_bw_hz: f64,
    pub integration_s: f64,
    pub n_frames: u64,
    pub snr_threshold_db: f64,
    /// Actual noise power per bin; SNR is measured against a unit reference.
    pub noise_power: f64,
    pub seed: u64,
    pub start_mjd: f64,
    /// Keep the per-frame events, not just the counts.
    pub keep_events: bool,
}

impl Default for DenseBandConfig {
    fn default() -> Self {
        Self {
            band_start_hz: 1420e6,
            band_width_hz: 9_990.0,
            fft_bin_bw_hz: 3.7,
            integration_s: 0.27,
            n_frames: 100_000,
            snr_threshold_db: 8.5,
            noise_power: 1.0,
            seed: 0,
            start_mjd: 60400.0,
            keep_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseBandOutput {
    pub n_bins: u64,
    pub n_frames: u64,
    /// Element-bin trials (`2 * n_bins * n_frames`).
    pub element_trials: u64,
    pub element_exceedances: u64,
    /// Bin-frames where at least one element crossed.
    pub composite_events: u64,
    pub frames: Vec<FrameEvents>,
}

impl DenseBandOutput {
    pub fn element_rate(&self) -> f64 {
        self.element_exceedances as f64 / self.element_trials as f64
    }
}

pub fn dense_band_validation(cfg: &DenseBandConfig) -> Result<DenseBandOutput> {
    if cfg.band_width_hz > DENSE_BAND_MAX_HZ {
        return Err(Error::ResourceGuard(format!(
            "dense simulation limited to {DENSE_BAND_MAX_HZ} Hz, asked for {} Hz",
            cfg.band_width_hz
        )));
    }
    if !(cfg.band_width_hz > 0.0 && cfg.fft_bin_bw_hz > 0.0 && cfg.noise_power >= 0.0) {
        return Err(Error::invalid("band, bin width and noise power must be positive"));
    }
    let n_bins = (cfg.band_width_hz / cfg.fft_bin_bw_hz).floor() as u64;
    let threshold = db_to_linear(cfg.snr_threshold_db);
    // complex Gaussian with E|z|^2 = noise_power
    let amp = (cfg.noise_power / 2.0).sqrt();
    let frame_days = cfg.integration_s / 86_400.0;
    let mut out = DenseBandOutput {
        n_bins,
        n_frames: cfg.n_frames,
        element_trials: 2 * n_bins * cfg.n_frames,
        element_exceedances: 0,
        composite_events: 0,
        frames: Vec::new(),
    };
    for frame in 0..cfg.n_frames {
        let mut rng = substream(cfg.seed, frame, domain::DENSE);
        let mjd = cfg.start_mjd + (frame as f64 + 0.5) * frame_days;
        let mut events = Vec::new();
        for bin in 0..n_bins {
            let mut draw = || {
                let re: f64 = rng.sample::<f64, _>(StandardNormal) * amp;
                let im: f64 = rng.sample::<f64, _>(StandardNormal) * amp;
                (re, im)
            };
            let (er, ei) = draw();
            let (wr, wi) = draw();
            let pe = er * er + ei * ei;
            let pw = wr * wr + wi * wi;
            let (ce, cw) = (pe >= threshold, pw >= threshold);
            out.element_exceedances += u64::from(ce) + u64::from(cw);
            if !(ce || cw) {
                continue;
            }
            out.composite_events += 1;
            if cfg.keep_events {
                let to_db = |p: f64| 10.0 * p.max(1e-300).log10();
                // East times conjugate West
                let phase = wrap((ei * wr - er * wi).atan2(er * wr + ei * wi));
                events.push(PulseEvent {
                    mjd,
                    rf_frequency_hz: cfg.band_start_hz + (bin as f64 + 0.5) * cfg.fft_bin_bw_hz,
                    snr_east_db: to_db(pe),
                    snr_west_db: to_db(pw),
                    composite_snr_db: to_db(pe.max(pw)),
                    ew_phase_rad: phase,
                    p954_east_db: 0.0,
                    p954_west_db: 0.0,
                    p50m_east_db: 0.0,
                    p50m_west_db: 0.0,
                    rfi_margin_hit: false,
                    edge_of_window: false,
                });
            }
        }
        if cfg.keep_events {
            out.frames.push(FrameEvents {
                frame_index: frame,
                mjd,
                lst_hours: 0.0,
                edge_of_window: false,
                events,
            });
        }
    }
    Ok(out)
}
