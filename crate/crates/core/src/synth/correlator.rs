//! Continuum-band correlator output over a day, with the geometric delay
//! left uncompensated so the fringe rotates as sources cross the beam.

use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fit::{linear_fit, unwrap};
use super::rng::{domain, substream};
use super::{beam_gain, Scenario, CONTINUUM_BAND_HZ};
use crate::error::{Error, Result};
use crate::geometry::SkyDirection;
use crate::sky::{hour_angle_rad, local_sidereal_time_hours};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    pub sample_interval_s: f64,
    /// Noise on each correlator quadrature and on the power channel, in
    /// units of system noise. Defaults to the radiometer value.
    pub noise_rms: Option<f64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            sample_interval_s: 10.0,
            noise_rms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSample {
    pub mjd: f64,
    pub lst_hours: f64,
    pub re: f64,
    pub im: f64,
    /// Total power relative to system noise.
    pub power: f64,
}

impl CorrelatorSample {
    pub fn amplitude(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn phase_rad(&self) -> f64 {
        self.im.atan2(self.re)
    }
}

/// One solar day of correlator samples starting at `mjd`.
pub fn generate_correlator_trace(scenario: &Scenario, mjd: f64, cfg: &TraceConfig) -> Result<Vec<CorrelatorSample>> {
    scenario.validate()?;
    if !(cfg.sample_interval_s > 0.0) {
        return Err(Error::InvalidConfig("sample_interval_s must be > 0".into()));
    }
    let sigma = cfg
        .noise_rms
        .unwrap_or_else(|| 1.0 / (CONTINUUM_BAND_HZ * cfg.sample_interval_s).sqrt());
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let geom = &scenario.geometry;
    let n = (86_400.0 / cfg.sample_interval_s).floor() as u64;
    let day_index = mjd.floor() as u64;
    let mut rng = substream(scenario.seed, day_index, domain::CORRELATOR);
    let mut out = Vec::with_capacity(n as usize);
    for i in 0..n {
        let t = mjd + (i as f64 * cfg.sample_interval_s) / 86_400.0;
        let lst = local_sidereal_time_hours(t, scenario.observer_longitude_deg);
        let beam = SkyDirection::new(lst, geom.declination_deg);
        let (mut re, mut im, mut excess) = (0.0, 0.0, 0.0);
        for c in &scenario.continuum_sources {
            let a = c.peak_power_ratio * beam_gain(scenario, c, &beam);
            let h = hour_angle_rad(lst, c.direction.ra_hours);
            let phase = TAU
                * geom.reference_frequency_hz
                * geom.with_declination(c.direction.dec_degrees).geometric_delay(h);
            re += a * phase.cos();
            im += a * phase.sin();
            excess += a;
        }
        out.push(CorrelatorSample {
            mjd: t,
            lst_hours: lst,
            re: re + noise.sample(&mut rng),
            im: im + noise.sample(&mut rng),
            power: 1.0 + excess + noise.sample(&mut rng),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub period_ra_hours: f64,
    /// LST of peak correlated amplitude.
    pub centre_ra_hours: f64,
    pub n_samples: usize,
}

/// Fringe period from the unwrapped phase slope across the strongest beam
/// crossing, using samples above `min_amplitude_fraction` of the peak.
pub fn fit_fringe_period(samples: &[CorrelatorSample], min_amplitude_fraction: f64) -> Result<FringeFit> {
    let (peak_idx, peak) = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (i, s.amplitude()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::invalid("empty correlator trace"))?;
    let floor = peak * min_amplitude_fraction;
    let mut lo = peak_idx;
    while lo > 0 && samples[lo - 1].amplitude() >= floor {
        lo -= 1;
    }
    let mut hi = peak_idx;
    while hi + 1 < samples.len() && samples[hi + 1].amplitude() >= floor {
        hi += 1;
    }
    let seg = &samples[lo..=hi];
    if seg.len() < 8 {
        return Err(Error::invalid("too few samples across the beam crossing"));
    }
    let lst: Vec<f64> = seg.iter().map(|s| s.lst_hours).collect();
    let lst = unwrap_hours(&lst);
    let phase = unwrap(&seg.iter().map(|s| s.phase_rad()).collect::<Vec<_>>());
    let (_, slope) = linear_fit(&lst, &phase)?;
    if slope == 0.0 {
        return Err(Error::invalid("no fringe rotation in trace"));
    }
    Ok(FringeFit {
        period_ra_hours: TAU / slope.abs(),
        centre_ra_hours: samples[peak_idx].lst_hours,
        n_samples: seg.len(),
    })
}

fn unwrap_hours(h: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(h.len());
    let mut offset = 0.0;
    for (i, &v) in h.iter().enumerate() {
        if i > 0 && v - h[i - 1] < -12.0 {
            offset += 24.0;
        }
        out.push(v + offset);
    }
    out
}
