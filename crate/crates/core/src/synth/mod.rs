//! Synthetic observations: threshold crossings from noise, celestial
//! transmitters and terrestrial RFI, plus continuum side channels.
//!
//! Full-band runs sample threshold crossings analytically (Poisson counts,
//! exponential power tail). [`dense`] simulates every FFT bin explicitly and
//! serves as the oracle for that shortcut.

pub mod correlator;
pub mod dense;
pub mod fit;
pub mod rng;

use std::f64::consts::{LN_2, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Normal, Poisson, StandardNormal};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firstlevel::{db_to_linear, FrameEvents, PulseEvent};
use crate::geometry::{BaselineGeometry, SkyDirection};
use crate::pairing::default_rf_bands_hz;
use crate::phasecal::{instrumental_phase, phase_noise_budget, wrap, DEFAULT_TAU_RESIDUAL_CAP};
use crate::sky::{hour_angle_rad, local_sidereal_time_hours, RaBinning, SOLAR_SECONDS_PER_SIDEREAL_HOUR};

use rng::{domain, substream};

/// FFT bins averaged for the 954 Hz side channel (954 / 3.7).
pub const SIDE_CHANNEL_BINS: usize = 258;

/// Bandwidth of the continuum power channel.
pub const CONTINUUM_BAND_HZ: f64 = 50e6;

/// Pair formation is quadratic in events per frame; the analytic rate over
/// the full band (tens of thousands) is far beyond desk scale.
pub const MAX_BACKGROUND_RATE_PER_FRAME: f64 = 200.0;

/// Expected threshold crossings per frame per element for `n_bins` bins.
pub fn false_alarm_rate(n_bins: f64, snr_threshold_db: f64) -> f64 {
    n_bins.max(0.0) * (-db_to_linear(snr_threshold_db)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Transmitter {
    pub direction: SkyDirection,
    /// Expected pairs per daily transit at beam centre.
    pub pair_rate_per_transit: f64,
    /// Pair spacing drawn uniformly from this range.
    pub delta_f_range_hz: (f64, f64),
    /// Per-element SNR drawn uniformly from this range.
    pub snr_range_db: (f64, f64),
    /// Fraction of days on which the transmitter is active.
    pub duty: f64,
    /// Standard deviation of the corrected pair phase. Defaults to the
    /// analytic budget.
    pub phase_noise_rad: Option<f64>,
    /// Rate in each of the two alias bins, relative to the primary bin.
    /// Leaked pairs carry the phases of a source at the alias RA.
    pub alias_fraction: f64,
}

impl Default for Transmitter {
    fn default() -> Self {
        Self {
            direction: SkyDirection::new(5.25, -4.3),
            pair_rate_per_transit: 2.0,
            delta_f_range_hz: (1.0, 7e6),
            snr_range_db: (8.5, 10.0),
            duty: 1.0,
            phase_noise_rad: None,
            alias_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RfiKind {
    PersistentCarrier,
    IntermittentBurst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfiSource {
    pub kind: RfiKind,
    pub rf_frequency_hz: f64,
    pub drift_hz_per_day: f64,
    /// Fixed terrestrial East-West delay.
    pub fixed_delay_s: f64,
    /// Active MJD intervals; empty means always on.
    pub activity_mjd: Vec<(f64, f64)>,
    pub strength_snr_db: f64,
    /// Expected events per frame for each tone.
    pub events_per_frame: f64,
    pub tone_count: u32,
    pub tone_spacing_hz: f64,
    pub phase_noise_rad: f64,
}

impl Default for RfiSource {
    fn default() -> Self {
        Self {
            kind: RfiKind::PersistentCarrier,
            rf_frequency_hz: 1410e6,
            drift_hz_per_day: 0.0,
            fixed_delay_s: 30e-9,
            activity_mjd: Vec::new(),
            strength_snr_db: 9.0,
            events_per_frame: 0.01,
            tone_count: 1,
            tone_spacing_hz: 0.0,
            phase_noise_rad: 0.0,
        }
    }
}

impl RfiSource {
    pub fn active_at(&self, mjd: f64) -> bool {
        self.activity_mjd.is_empty() || self.activity_mjd.iter().any(|&(a, b)| mjd >= a && mjd < b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuumSource {
    pub direction: SkyDirection,
    /// Peak excess power over system noise, seen at beam centre.
    pub peak_power_ratio: f64,
    pub angular_fwhm_deg: f64,
}

impl Default for ContinuumSource {
    fn default() -> Self {
        Self {
            direction: SkyDirection::new(12.67, -4.3),
            peak_power_ratio: 10.0,
            angular_fwhm_deg: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub start_mjd: f64,
    pub duration_days: f64,
    /// Observed LST range each day, start to end, wrapping when start > end.
    pub daily_ra_window_hours: (f64, f64),
    pub rf_band_hz: Vec<(f64, f64)>,
    pub fft_bin_bw_hz: f64,
    pub integration_s: f64,
    pub snr_threshold_db: f64,
    pub geometry: BaselineGeometry,
    pub observer_longitude_deg: f64,
    pub beam_fwhm_deg: f64,
    pub seed: u64,
    /// Composite background events per frame. When absent the rate follows
    /// from the band width and threshold.
    pub background_rate_per_frame: Option<f64>,
    pub ra_bin_width_hours: f64,
    /// Constant East-West detector phase added to every pulse.
    pub phase_detector_offset_rad: f64,
    pub transmitters: Vec<Transmitter>,
    pub rfi_sources: Vec<RfiSource>,
    pub continuum_sources: Vec<ContinuumSource>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            start_mjd: 60400.0,
            duration_days: 10.0,
            daily_ra_window_hours: (0.0, 15.5),
            rf_band_hz: default_rf_bands_hz(),
            fft_bin_bw_hz: 3.7,
            integration_s: 0.27,
            snr_threshold_db: 8.5,
            geometry: BaselineGeometry::default(),
            observer_longitude_deg: 0.0,
            beam_fwhm_deg: 5.3,
            seed: 0,
            background_rate_per_frame: None,
            ra_bin_width_hours: 0.0075,
            phase_detector_offset_rad: 0.0,
            transmitters: Vec::new(),
            rfi_sources: Vec::new(),
            continuum_sources: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if !(self.duration_days.is_finite() && self.duration_days >= 0.0) {
            return bad(format!("duration_days must be >= 0, got {}", self.duration_days));
        }
        if !(self.fft_bin_bw_hz > 0.0 && self.integration_s > 0.0) {
            return bad("fft_bin_bw_hz and integration_s must be > 0".into());
        }
        let tb = self.integration_s * self.fft_bin_bw_hz;
        if (tb - 1.0).abs() > 0.02 {
            return bad(format!("integration_s x fft_bin_bw_hz = {tb:.4}, expected 1 within 2%"));
        }
        let (s, e) = self.daily_ra_window_hours;
        if !(0.0..=24.0).contains(&s) || !(0.0..=24.0).contains(&e) {
            return bad("daily_ra_window_hours must lie in [0, 24]".into());
        }
        if self.rf_band_hz.is_empty() {
            return bad("rf_band_hz is empty".into());
        }
        let mut bands = self.rf_band_hz.clone();
        bands.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(lo, hi) in &bands {
            if !(lo > 0.0 && hi > lo) {
                return bad(format!("band ({lo}, {hi}) must satisfy 0 < low < high"));
            }
        }
        if bands.windows(2).any(|w| w[1].0 < w[0].1) {
            return bad("rf_band_hz intervals overlap".into());
        }
        if let Some(r) = self.background_rate_per_frame {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("background_rate_per_frame must be >= 0, got {r}"));
            }
        }
        if !(self.beam_fwhm_deg > 0.0) {
            return bad("beam_fwhm_deg must be > 0".into());
        }
        self.geometry
            .validate()
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        RaBinning::new(self.ra_bin_width_hours).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        for (k, t) in self.transmitters.iter().enumerate() {
            let (dlo, dhi) = t.delta_f_range_hz;
            let (slo, shi) = t.snr_range_db;
            if !(t.pair_rate_per_transit >= 0.0 && (0.0..=1.0).contains(&t.duty) && t.alias_fraction >= 0.0) {
                return bad(format!("transmitter {k}: rates must be >= 0 and duty in [0, 1]"));
            }
            if !(dlo >= 1.0 && dhi >= dlo && dhi <= 7e6) {
                return bad(format!("transmitter {k}: delta_f_range_hz must lie within [1, 7e6]"));
            }
            if !(shi >= slo && slo.is_finite()) {
                return bad(format!("transmitter {k}: snr_range_db is empty"));
            }
            if t.phase_noise_rad.is_some_and(|s| !(s >= 0.0)) {
                return bad(format!("transmitter {k}: phase_noise_rad must be >= 0"));
            }
        }
        for (k, r) in self.rfi_sources.iter().enumerate() {
            if !(r.events_per_frame >= 0.0 && r.rf_frequency_hz > 0.0 && r.fixed_delay_s.is_finite()) {
                return bad(format!("rfi source {k}: invalid frequency, rate or delay"));
            }
            if r.kind == RfiKind::IntermittentBurst && r.activity_mjd.is_empty() {
                return bad(format!("rfi source {k}: a burst needs activity intervals"));
            }
        }
        for (k, c) in self.continuum_sources.iter().enumerate() {
            if !(c.peak_power_ratio >= 0.0 && c.angular_fwhm_deg >= 0.0) {
                return bad(format!("continuum source {k}: peak ratio and width must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn binning(&self) -> Result<RaBinning> {
        RaBinning::new(self.ra_bin_width_hours)
    }

    pub fn total_band_hz(&self) -> f64 {
        self.rf_band_hz.iter().map(|&(lo, hi)| hi - lo).sum()
    }

    pub fn n_fft_bins(&self) -> f64 {
        (self.total_band_hz() / self.fft_bin_bw_hz).floor()
    }

    /// Composite (either element) threshold crossings expected per frame.
    pub fn analytic_background_rate(&self) -> f64 {
        let q = (-db_to_linear(self.snr_threshold_db)).exp();
        self.n_fft_bins() * (1.0 - (1.0 - q) * (1.0 - q))
    }

    pub fn background_rate(&self) -> f64 {
        self.background_rate_per_frame
            .unwrap_or_else(|| self.analytic_background_rate())
    }

    pub fn in_window(&self, lst_hours: f64) -> bool {
        let (s, e) = self.daily_ra_window_hours;
        if s < e {
            lst_hours >= s && lst_hours < e
        } else if s > e {
            lst_hours >= s || lst_hours < e
        } else {
            false
        }
    }

    /// Frames per sidereal transit of one RA bin.
    pub fn frames_per_bin_transit(&self) -> f64 {
        self.ra_bin_width_hours * SOLAR_SECONDS_PER_SIDEREAL_HOUR / self.integration_s
    }
}

/// Where a synthetic event came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventOrigin {
    Background,
    Transmitter(usize),
    Rfi(usize),
}

/// Ground truth for one injected pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedPair {
    pub transmitter: usize,
    pub frame_index: u64,
    /// Indices into the frame's events, lower frequency first.
    pub first: usize,
    pub second: usize,
    pub alias_offset_bins: i64,
    /// Noise realised on the corrected pair phase.
    pub pair_phase_noise_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame {
    pub frame: FrameEvents,
    pub origins: Vec<EventOrigin>,
    pub injected: Vec<InjectedPair>,
}

#[derive(Debug, Clone)]
struct PreparedTransmitter {
    spec: Transmitter,
    bin: usize,
    geometry: BaselineGeometry,
    per_frame_rate: f64,
    sigma: f64,
    alias_bins: [(usize, i64); 2],
    delta_f: rand_distr::Uniform<f64>,
}

/// Frame-by-frame event generator for a validated scenario.
#[derive(Debug, Clone)]
pub struct Generator {
    scenario: Scenario,
    binning: RaBinning,
    band_edges: Vec<(f64, f64, f64)>,
    total_band: f64,
    background: Option<Poisson<f64>>,
    p_both: f64,
    threshold_linear: f64,
    transmitters: Vec<PreparedTransmitter>,
    side_gamma: Gamma<f64>,
    continuum_noise: Normal<f64>,
    frame_days: f64,
    n_frames: u64,
}

impl Generator {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let binning = scenario.binning()?;
        let mut bands = scenario.rf_band_hz.clone();
        bands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        let band_edges = bands
            .iter()
            .map(|&(lo, hi)| {
                let start = acc;
                acc += hi - lo;
                (start, lo, hi)
            })
            .collect();
        let rate = scenario.background_rate();
        if rate > MAX_BACKGROUND_RATE_PER_FRAME {
            return Err(Error::ResourceGuard(format!(
                "{rate:.0} background events per frame would need ~{:.0e} pair checks per frame; \
                 set background_rate_per_frame to at most {MAX_BACKGROUND_RATE_PER_FRAME}",
                rate * rate / 2.0
            )));
        }
        let background = (rate > 0.0)
            .then(|| Poisson::new(rate))
            .transpose()
            .map_err(|e| Error::InvalidScenario(e.to_string()))?;
        let q = (-db_to_linear(scenario.snr_threshold_db)).exp();
        let p_both = q * q / (1.0 - (1.0 - q) * (1.0 - q));

        let windows = scenario.geometry.alias_bin_offsets(scenario.ra_bin_width_hours)?;
        let budget = phase_noise_budget(windows.bins_per_period, 10.0, 7e6, 1e-9, DEFAULT_TAU_RESIDUAL_CAP)?;
        let frames_per_bin = scenario.frames_per_bin_transit();
        let transmitters = scenario
            .transmitters
            .iter()
            .map(|t| {
                let bin = binning.bin_of_ra(t.direction.ra_hours);
                let alias = |o: i64| (binning.shift(bin, o), o);
                Ok(PreparedTransmitter {
                    spec: t.clone(),
                    bin,
                    geometry: scenario.geometry.with_declination(t.direction.dec_degrees),
                    per_frame_rate: t.pair_rate_per_transit / frames_per_bin,
                    sigma: t.phase_noise_rad.unwrap_or(budget.rss),
                    alias_bins: [alias(windows.offsets[0]), alias(windows.offsets[1])],
                    delta_f: rand_distr::Uniform::new_inclusive(t.delta_f_range_hz.0, t.delta_f_range_hz.1)
                        .map_err(|e| Error::InvalidScenario(e.to_string()))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let frame_days = scenario.integration_s / 86_400.0;
        let n_frames = (scenario.duration_days / frame_days).floor() as u64;
        Ok(Self {
            binning,
            band_edges,
            total_band: acc,
            background,
            p_both,
            threshold_linear: db_to_linear(scenario.snr_threshold_db),
            transmitters,
            side_gamma: Gamma::new((SIDE_CHANNEL_BINS - 1) as f64, 1.0).expect("valid shape"),
            continuum_noise: Normal::new(0.0, 1.0 / (CONTINUUM_BAND_HZ * scenario.integration_s).sqrt())
                .expect("valid sigma"),
            frame_days,
            n_frames,
            scenario,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn binning(&self) -> RaBinning {
        self.binning
    }

    /// Frame slots over the whole duration, observed or not.
    pub fn n_frame_slots(&self) -> u64 {
        self.n_frames
    }

    pub fn frame_mjd(&self, index: u64) -> f64 {
        self.scenario.start_mjd + (index as f64 + 0.5) * self.frame_days
    }

    pub fn frame_lst(&self, index: u64) -> f64 {
        local_sidereal_time_hours(self.frame_mjd(index), self.scenario.observer_longitude_deg)
    }

    /// Default standard deviation of injected corrected pair phases.
    pub fn transmitter_sigma(&self, k: usize) -> Option<f64> {
        self.transmitters.get(k).map(|t| t.sigma)
    }

    /// The frame at `index`, or `None` when it falls outside the RA window.
    pub fn frame(&self, index: u64) -> Option<SyntheticFrame> {
        if index >= self.n_frames {
            return None;
        }
        let mjd = self.frame_mjd(index);
        let lst = local_sidereal_time_hours(mjd, self.scenario.observer_longitude_deg);
        if !self.scenario.in_window(lst) {
            return None;
        }
        Some(self.build_frame(index, mjd, lst))
    }

    pub fn frames(&self) -> impl Iterator<Item = SyntheticFrame> + '_ {
        (0..self.n_frames).filter_map(move |i| self.frame(i))
    }

    fn edge_of_window(&self, lst: f64) -> bool {
        let (s, e) = self.scenario.daily_ra_window_hours;
        let w = self.binning.bin_width_hours;
        let near = |edge: f64| {
            let d = (lst - edge).rem_euclid(24.0);
            d < w || 24.0 - d <= w
        };
        near(s) || near(e)
    }

    fn build_frame(&self, index: u64, mjd: f64, lst: f64) -> SyntheticFrame {
        let s = &self.scenario;
        let edge = self.edge_of_window(lst);
        let continuum = self.continuum_excess(lst);
        let mut events = Vec::new();
        let mut origins = Vec::new();
        let mut injected = Vec::new();

        if let Some(poisson) = &self.background {
            let mut rng = substream(s.seed, index, domain::BACKGROUND);
            let n = poisson.sample(&mut rng) as usize;
            for _ in 0..n {
                let f = self.quantize(self.uniform_frequency(&mut rng));
                let (east, west) = self.background_snrs(&mut rng);
                let phase = wrap(rng.random::<f64>() * TAU - PI);
                events.push(self.event(&mut rng, mjd, f, east, west, phase, continuum, edge));
                origins.push(EventOrigin::Background);
            }
        }

        let bin = self.binning.bin_of_ra(lst);
        for (k, t) in self.transmitters.iter().enumerate() {
            let offset = if bin == t.bin {
                Some(0)
            } else {
                t.alias_bins.iter().find(|(b, _)| *b == bin).map(|&(_, o)| o)
            };
            let Some(offset) = offset else { continue };
            let relative = if offset == 0 { 1.0 } else { t.spec.alias_fraction };
            if relative <= 0.0 || t.spec.pair_rate_per_transit <= 0.0 {
                continue;
            }
            if t.spec.duty < 1.0 {
                let mut day_rng = substream(s.seed, mjd.floor() as u64, domain::DUTY + k as u64);
                if day_rng.random::<f64>() >= t.spec.duty {
                    continue;
                }
            }
            let beam_centre = SkyDirection::new(lst, s.geometry.declination_deg);
            let sep = beam_centre.separation_deg(&t.spec.direction);
            if sep > s.beam_fwhm_deg {
                continue;
            }
            let gain = (-4.0 * LN_2 * (sep / s.beam_fwhm_deg).powi(2)).exp();
            let rate = t.per_frame_rate * relative * gain;
            let mut rng = substream(s.seed, index, domain::TRANSMITTER + k as u64);
            let n = if rate > 0.0 {
                Poisson::new(rate).map_or(0, |p| p.sample(&mut rng) as usize)
            } else {
                0
            };
            // leakage responds as if the source sat at the alias RA
            let apparent_ra = t.spec.direction.ra_hours + offset as f64 * s.ra_bin_width_hours;
            let hour_angle = hour_angle_rad(lst, apparent_ra);
            for _ in 0..n {
                let (f1, f2) = self.pair_frequencies(&mut rng, &t.delta_f);
                let half = t.sigma / std::f64::consts::SQRT_2;
                let n1: f64 = rng.sample::<f64, _>(StandardNormal) * half;
                let n2: f64 = rng.sample::<f64, _>(StandardNormal) * half;
                let phase = |f: f64, noise: f64| {
                    wrap(
                        t.geometry.expected_ew_phase(f, hour_angle)
                            + instrumental_phase(
                                f,
                                s.geometry.tau_int_s,
                                s.geometry.reference_frequency_hz,
                                s.phase_detector_offset_rad,
                            )
                            + noise,
                    )
                };
                let (slo, shi) = t.spec.snr_range_db;
                let mut snr = || slo + (shi - slo) * rng.random::<f64>();
                let (e1, w1, e2, w2) = (snr(), snr(), snr(), snr());
                let ev1 = self.event(&mut rng, mjd, f1, e1, w1, phase(f1, n1), continuum, edge);
                let ev2 = self.event(&mut rng, mjd, f2, e2, w2, phase(f2, n2), continuum, edge);
                injected.push(InjectedPair {
                    transmitter: k,
                    frame_index: index,
                    first: events.len(),
                    second: events.len() + 1,
                    alias_offset_bins: offset,
                    pair_phase_noise_rad: n2 - n1,
                });
                events.push(ev1);
                events.push(ev2);
                origins.push(EventOrigin::Transmitter(k));
                origins.push(EventOrigin::Transmitter(k));
            }
        }

        for (k, r) in s.rfi_sources.iter().enumerate() {
            if r.events_per_frame <= 0.0 || !r.active_at(mjd) {
                continue;
            }
            let mut rng = substream(s.seed, index, domain::RFI + k as u64);
            let Ok(poisson) = Poisson::new(r.events_per_frame) else { continue };
            let base = r.rf_frequency_hz + r.drift_hz_per_day * (mjd - s.start_mjd);
            for tone in 0..r.tone_count.max(1) {
                let f = self.quantize(base + tone as f64 * r.tone_spacing_hz);
                let n = poisson.sample(&mut rng) as usize;
                for _ in 0..n {
                    let noise = if r.phase_noise_rad > 0.0 {
                        rng.sample::<f64, _>(StandardNormal) * r.phase_noise_rad
                    } else {
                        0.0
                    };
                    let phase = wrap(
                        TAU * f * r.fixed_delay_s
                            + instrumental_phase(
                                f,
                                s.geometry.tau_int_s,
                                s.geometry.reference_frequency_hz,
                                s.phase_detector_offset_rad,
                            )
                            + noise,
                    );
                    let snr = r.strength_snr_db;
                    events.push(self.event(&mut rng, mjd, f, snr, snr, phase, continuum, edge));
                    origins.push(EventOrigin::Rfi(k));
                }
            }
        }

        SyntheticFrame {
            frame: FrameEvents {
                frame_index: index,
                mjd,
                lst_hours: lst,
                edge_of_window: edge,
                events,
            },
            origins,
            injected,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn event(
        &self,
        rng: &mut Pcg64Mcg,
        mjd: f64,
        f: f64,
        east_db: f64,
        west_db: f64,
        phase: f64,
        continuum: f64,
        edge: bool,
    ) -> PulseEvent {
        let mut side = |snr_db: f64| {
            let rest = self.side_gamma.sample(rng);
            10.0 * ((rest + db_to_linear(snr_db)) / SIDE_CHANNEL_BINS as f64).log10()
        };
        let (p954_east_db, p954_west_db) = (side(east_db), side(west_db));
        let mut wide = || {
            let p = 1.0 + continuum + self.continuum_noise.sample(rng);
            10.0 * p.max(f64::MIN_POSITIVE).log10()
        };
        let (p50m_east_db, p50m_west_db) = (wide(), wide());
        PulseEvent {
            mjd,
            rf_frequency_hz: f,
            snr_east_db: east_db,
            snr_west_db: west_db,
            composite_snr_db: east_db.max(west_db),
            ew_phase_rad: phase,
            p954_east_db,
            p954_west_db,
            p50m_east_db,
            p50m_west_db,
            rfi_margin_hit: false,
            edge_of_window: edge,
        }
    }

    /// Per-element SNRs of a composite crossing: at least one element above
    /// threshold, the other either also above or drawn from noise below it.
    fn background_snrs(&self, rng: &mut Pcg64Mcg) -> (f64, f64) {
        let t = self.threshold_linear;
        let above = |rng: &mut Pcg64Mcg| t + rng.sample::<f64, _>(Exp1);
        let below = |rng: &mut Pcg64Mcg| {
            // inverse CDF of Exp(1) truncated to [0, t)
            let u: f64 = rng.random();
            (-(1.0 - u * (1.0 - (-t).exp())).ln()).max(1e-300)
        };
        let to_db = |x: f64| 10.0 * x.log10();
        if rng.random::<f64>() < self.p_both {
            (to_db(above(rng)), to_db(above(rng)))
        } else if rng.random::<bool>() {
            (to_db(above(rng)), to_db(below(rng)))
        } else {
            (to_db(below(rng)), to_db(above(rng)))
        }
    }

    fn uniform_frequency(&self, rng: &mut Pcg64Mcg) -> f64 {
        let x = rng.random::<f64>() * self.total_band;
        let &(start, lo, hi) = self
            .band_edges
            .iter()
            .rev()
            .find(|(start, _, _)| x >= *start)
            .unwrap_or(&self.band_edges[0]);
        (lo + (x - start)).min(hi)
    }

    fn in_band(&self, f: f64) -> bool {
        self.band_edges.iter().any(|&(_, lo, hi)| f >= lo && f <= hi)
    }

    fn quantize(&self, f: f64) -> f64 {
        (f / self.scenario.fft_bin_bw_hz).round() * self.scenario.fft_bin_bw_hz
    }

    fn pair_frequencies(&self, rng: &mut Pcg64Mcg, delta_f: &rand_distr::Uniform<f64>) -> (f64, f64) {
        let mut last = (0.0, 0.0);
        for _ in 0..64 {
            let f1 = self.quantize(self.uniform_frequency(rng));
            let f2 = self.quantize(f1 + delta_f.sample(rng));
            last = (f1, f2);
            if f2 > f1 && self.in_band(f2) && self.in_band(f1) {
                return last;
            }
        }
        last
    }

    /// Continuum power above system noise at beam centre for this LST.
    pub fn continuum_excess(&self, lst: f64) -> f64 {
        continuum_excess(&self.scenario, lst)
    }
}

/// Summed continuum excess seen by the meridian beam at `lst_hours`.
pub fn continuum_excess(scenario: &Scenario, lst_hours: f64) -> f64 {
    let beam = SkyDirection::new(lst_hours, scenario.geometry.declination_deg);
    scenario
        .continuum_sources
        .iter()
        .map(|c| c.peak_power_ratio * beam_gain(scenario, c, &beam))
        .sum()
}

/// Response to a continuum source, normalised to 1 when centred.
pub(crate) fn beam_gain(scenario: &Scenario, c: &ContinuumSource, beam: &SkyDirection) -> f64 {
    let width2 = scenario.beam_fwhm_deg.powi(2) + c.angular_fwhm_deg.powi(2);
    let sep = beam.separation_deg(&c.direction);
    (-4.0 * LN_2 * sep * sep / width2).exp()
}
