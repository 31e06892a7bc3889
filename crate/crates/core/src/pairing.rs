//! Simultaneous (same-frame) pulse-pair formation and second-level filters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::firstlevel::{composite_pair_likelihood, PulseEvent};
use crate::phasecal::{correct_pair_phase, wrap};
use crate::sky::{local_sidereal_time_hours, RaBinning};

/// 1 Hz to 7 MHz.
pub const DEFAULT_DELTA_F_RANGE_HZ: (f64, f64) = (1.0, 7.0e6);

/// 500 x 954 Hz.
pub const DEFAULT_RFI_MARGIN_HZ: f64 = 500.0 * 954.0;

pub fn default_rf_bands_hz() -> Vec<(f64, f64)> {
    vec![(1398.0e6, 1424.0e6), (1426.0e6, 1451.0e6)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulsePair {
    pub id: u64,
    /// Lower-frequency pulse.
    pub first: PulseEvent,
    pub second: PulseEvent,
    pub delta_f_hz: f64,
    /// `wrap(second.ew_phase - first.ew_phase)`.
    pub measured_pair_phase_rad: f64,
    pub corrected_pair_phase_rad: f64,
    pub pair_likelihood: f64,
    pub ra_bin: usize,
    pub mjd: f64,
}

impl PulsePair {
    /// Same pair with the delay correction redone for another `tau_int`.
    pub fn recorrected(&self, tau_int_s: f64) -> Self {
        Self {
            corrected_pair_phase_rad: correct_pair_phase(
                self.measured_pair_phase_rad,
                self.delta_f_hz,
                tau_int_s,
            ),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcisionConfig {
    /// Distinct days on which a frequency cell must be hot.
    pub min_days: usize,
    /// Events per cell per day above which the cell is hot on that day.
    pub count_threshold: u64,
    pub grid_hz: f64,
}

impl Default for ExcisionConfig {
    fn default() -> Self {
        Self {
            min_days: 5,
            count_threshold: 50,
            grid_hz: 1_000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub ew_phase_window_rad: f64,
    pub ew_phase_offset_rad: f64,
    pub pair_phase_window_rad: f64,
    pub pulse_likelihood_min: f64,
    pub pair_likelihood_min: f64,
    pub rfi_margin_hz: f64,
    pub rf_bands_hz: Vec<(f64, f64)>,
    pub delta_f_range_hz: (f64, f64),
    pub excision: ExcisionConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            ew_phase_window_rad: 0.1,
            ew_phase_offset_rad: 0.0,
            pair_phase_window_rad: 0.8,
            pulse_likelihood_min: -1.6,
            pair_likelihood_min: -2.7,
            rfi_margin_hz: DEFAULT_RFI_MARGIN_HZ,
            rf_bands_hz: default_rf_bands_hz(),
            delta_f_range_hz: DEFAULT_DELTA_F_RANGE_HZ,
            excision: ExcisionConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ew_phase_window_rad > 0.0 && self.pair_phase_window_rad > 0.0) {
            return Err(Error::InvalidConfig("phase windows must be > 0".into()));
        }
        let (lo, hi) = self.delta_f_range_hz;
        if !(lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidConfig("delta_f_range_hz must satisfy 0 <= lo < hi".into()));
        }
        if !(self.rfi_margin_hz >= 0.0) {
            return Err(Error::InvalidConfig("rfi_margin_hz must be >= 0".into()));
        }
        if self.rf_bands_hz.iter().any(|&(a, b)| !(b > a)) {
            return Err(Error::InvalidConfig("rf band intervals must have high > low".into()));
        }
        if !(self.excision.grid_hz > 0.0) {
            return Err(Error::InvalidConfig("excision grid must be > 0".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn passes_ew_window(&self, event: &PulseEvent) -> bool {
        wrap(event.ew_phase_rad - self.ew_phase_offset_rad).abs() <= self.ew_phase_window_rad
    }

    #[inline]
    pub fn passes_pair_window(&self, corrected_pair_phase: f64) -> bool {
        corrected_pair_phase.abs() <= self.pair_phase_window_rad
    }

    pub fn in_bands(&self, f: f64) -> bool {
        self.rf_bands_hz.iter().any(|&(lo, hi)| f >= lo && f <= hi)
    }

    /// Every filter except the corrected pair-phase window.
    pub fn passes_candidate(&self, pair: &PulsePair, exclusions: &Exclusions) -> bool {
        self.passes_static(pair)
            && !exclusions.contains(pair.first.rf_frequency_hz)
            && !exclusions.contains(pair.second.rf_frequency_hz)
    }

    /// Filters that need no global (multi-day) information.
    pub fn passes_static(&self, pair: &PulsePair) -> bool {
        let (lo, hi) = self.delta_f_range_hz;
        pair.delta_f_hz >= lo
            && pair.delta_f_hz <= hi
            && self.passes_ew_window(&pair.first)
            && pair.pair_likelihood >= self.pair_likelihood_min
            && self.in_bands(pair.first.rf_frequency_hz)
            && self.in_bands(pair.second.rf_frequency_hz)
    }

    pub fn passes_all(&self, pair: &PulsePair, exclusions: &Exclusions) -> bool {
        self.passes_candidate(pair, exclusions) && self.passes_pair_window(pair.corrected_pair_phase_rad)
    }
}

/// Builds pairs from the events of one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFormer {
    pub tau_int_s: f64,
    pub delta_f_range_hz: (f64, f64),
    pub reference_snr_db: f64,
    pub binning: RaBinning,
    pub observer_longitude_deg: f64,
}

impl PairFormer {
    pub fn assign_ra_bin(&self, mjd: f64) -> usize {
        self.binning
            .bin_of_ra(local_sidereal_time_hours(mjd, self.observer_longitude_deg))
    }

    /// All unordered pairs with spacing inside `delta_f_range_hz`, lower
    /// frequency first. Ids are left at zero for the caller to assign.
    pub fn form_pairs(&self, events: &[PulseEvent]) -> Vec<PulsePair> {
        if events.len() < 2 {
            return Vec::new();
        }
        debug_assert!(events.windows(2).all(|w| w[0].mjd == w[1].mjd));
        let mjd = events[0].mjd;
        let ra_bin = self.assign_ra_bin(mjd);
        self.pair_indices(events)
            .into_iter()
            .map(|(i, j)| self.make_pair(&events[i], &events[j], ra_bin))
            .collect()
    }

    /// Index pairs `(lower, higher)` in the order `form_pairs` emits them.
    pub fn pair_indices(&self, events: &[PulseEvent]) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..events.len()).collect();
        order.sort_by(|&a, &b| {
            events[a]
                .rf_frequency_hz
                .total_cmp(&events[b].rf_frequency_hz)
        });
        let (lo, hi) = self.delta_f_range_hz;
        let mut out = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            for &j in &order[k + 1..] {
                let delta_f = events[j].rf_frequency_hz - events[i].rf_frequency_hz;
                if delta_f > hi {
                    break;
                }
                if delta_f >= lo {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn make_pair(&self, first: &PulseEvent, second: &PulseEvent, ra_bin: usize) -> PulsePair {
        let delta_f = second.rf_frequency_hz - first.rf_frequency_hz;
        let measured = wrap(second.ew_phase_rad - first.ew_phase_rad);
        PulsePair {
            id: 0,
            first: *first,
            second: *second,
            delta_f_hz: delta_f,
            measured_pair_phase_rad: measured,
            corrected_pair_phase_rad: correct_pair_phase(measured, delta_f, self.tau_int_s),
            pair_likelihood: composite_pair_likelihood(first, second, self.reference_snr_db),
            ra_bin,
            mjd: first.mjd,
        }
    }
}

/// Frequencies removed for persistent RFI, each with a symmetric margin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Exclusions {
    pub centers_hz: Vec<f64>,
    pub margin_hz: f64,
}

impl Exclusions {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.centers_hz.is_empty()
    }

    pub fn contains(&self, f: f64) -> bool {
        if self.centers_hz.is_empty() {
            return false;
        }
        let idx = self.centers_hz.partition_point(|&c| c < f);
        let near = |i: usize| (self.centers_hz[i] - f).abs() <= self.margin_hz;
        (idx < self.centers_hz.len() && near(idx)) || (idx > 0 && near(idx - 1))
    }

    pub fn flag(&self, event: &mut PulseEvent) {
        if self.contains(event.rf_frequency_hz) {
            event.rfi_margin_hit = true;
        }
    }
}

/// Streaming per-(frequency cell, day) event counter.
#[derive(Debug, Clone, Default)]
pub struct ExcisionCounter {
    grid_hz: f64,
    counts: HashMap<(i64, i64), u64>,
}

impl ExcisionCounter {
    pub fn new(grid_hz: f64) -> Self {
        Self {
            grid_hz,
            counts: HashMap::new(),
        }
    }

    pub fn add(&mut self, event: &PulseEvent) {
        let cell = (event.rf_frequency_hz / self.grid_hz).round() as i64;
        let day = event.mjd.floor() as i64;
        *self.counts.entry((cell, day)).or_default() += 1;
    }

    pub fn merge(&mut self, other: &ExcisionCounter) {
        for (&k, &n) in &other.counts {
            *self.counts.entry(k).or_default() += n;
        }
    }

    /// Cells hot (count above threshold) on at least `min_days` distinct days.
    pub fn finish(&self, cfg: &ExcisionConfig, margin_hz: f64) -> Exclusions {
        let mut hot_days: HashMap<i64, usize> = HashMap::new();
        for (&(cell, _day), &n) in &self.counts {
            if n > cfg.count_threshold {
                *hot_days.entry(cell).or_default() += 1;
            }
        }
        let mut cells: Vec<i64> = hot_days
            .into_iter()
            .filter(|&(_, d)| d >= cfg.min_days)
            .map(|(c, _)| c)
            .collect();
        cells.sort_unstable();
        Exclusions {
            centers_hz: cells.into_iter().map(|c| c as f64 * self.grid_hz).collect(),
            margin_hz,
        }
    }
}

/// Persistent-RFI exclusion list over an event collection spanning many days.
pub fn persistent_rfi_excision<'a, I>(events: I, cfg: &FilterConfig) -> Exclusions
where
    I: IntoIterator<Item = &'a PulseEvent>,
{
    let mut counter = ExcisionCounter::new(cfg.excision.grid_hz);
    for e in events {
        counter.add(e);
    }
    counter.finish(&cfg.excision, cfg.rfi_margin_hz)
}

/// Pairs satisfying every second-level filter, in input order.
pub fn apply_filters(pairs: &[PulsePair], cfg: &FilterConfig, exclusions: &Exclusions) -> Vec<PulsePair> {
    pairs
        .iter()
        .filter(|p| cfg.passes_all(p, exclusions))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(f: f64, phase: f64, snr: f64) -> PulseEvent {
        PulseEvent {
            mjd: 60500.25,
            rf_frequency_hz: f,
            snr_east_db: snr,
            snr_west_db: snr,
            composite_snr_db: snr,
            ew_phase_rad: phase,
            p954_east_db: 0.0,
            p954_west_db: 0.0,
            p50m_east_db: 0.0,
            p50m_west_db: 0.0,
            rfi_margin_hit: false,
            edge_of_window: false,
        }
    }

    fn former() -> PairFormer {
        PairFormer {
            tau_int_s: -82e-9,
            delta_f_range_hz: DEFAULT_DELTA_F_RANGE_HZ,
            reference_snr_db: 8.5,
            binning: RaBinning::default(),
            observer_longitude_deg: 0.0,
        }
    }

    fn pair_with(corrected: f64, first_phase: f64) -> PulsePair {
        let mut p = former().form_pairs(&[ev(1400e6, first_phase, 9.0), ev(1401e6, 0.0, 9.0)])[0].clone();
        p.corrected_pair_phase_rad = corrected;
        p
    }

    #[test]
    fn pair_count_examples() {
        let f = former();
        assert!(f.form_pairs(&[]).is_empty());
        assert!(f.form_pairs(&[ev(1400e6, 0.0, 9.0)]).is_empty());
        let three = [ev(1400e6, 0.0, 9.0), ev(1402e6, 0.0, 9.0), ev(1404e6, 0.0, 9.0)];
        assert_eq!(f.form_pairs(&three).len(), 3);
        assert!(f.form_pairs(&[ev(1400e6, 0.0, 9.0), ev(1408e6, 0.0, 9.0)]).is_empty());
    }

    #[test]
    fn pairs_are_ordered_and_corrected() {
        let f = former();
        let pairs = f.form_pairs(&[ev(1405e6, 0.3, 9.0), ev(1400e6, -0.2, 9.0)]);
        assert_eq!(pairs.len(), 1);
        let p = &pairs[0];
        assert_eq!(p.first.rf_frequency_hz, 1400e6);
        assert_eq!(p.delta_f_hz, 5e6);
        assert_eq!(p.measured_pair_phase_rad, wrap(0.5));
        assert_eq!(
            p.corrected_pair_phase_rad,
            correct_pair_phase(p.measured_pair_phase_rad, 5e6, -82e-9)
        );
    }

    #[test]
    fn window_boundaries() {
        let cfg = FilterConfig::default();
        let none = Exclusions::none();
        assert!(cfg.passes_all(&pair_with(0.79, 0.0), &none));
        assert!(!cfg.passes_all(&pair_with(0.81, 0.0), &none));
        assert!(!cfg.passes_all(&pair_with(-0.81, 0.0), &none));
        assert!(!cfg.passes_all(&pair_with(0.0, 0.15), &none));
        assert!(cfg.passes_all(&pair_with(0.0, -0.09), &none));
    }

    #[test]
    fn ew_window_offset_wraps() {
        let cfg = FilterConfig {
            ew_phase_offset_rad: 3.1,
            ..FilterConfig::default()
        };
        assert!(cfg.passes_ew_window(&ev(1400e6, -3.1, 9.0)));
        assert!(!cfg.passes_ew_window(&ev(1400e6, 0.0, 9.0)));
    }

    #[test]
    fn pair_likelihood_threshold_enforced() {
        let cfg = FilterConfig::default();
        let mut p = pair_with(0.0, 0.0);
        p.pair_likelihood = -2.69;
        assert!(cfg.passes_all(&p, &Exclusions::none()));
        p.pair_likelihood = -2.71;
        assert!(!cfg.passes_all(&p, &Exclusions::none()));
    }

    #[test]
    fn band_edges_and_notch() {
        let cfg = FilterConfig::default();
        assert!(cfg.in_bands(1398e6));
        assert!(!cfg.in_bands(1425e6));
        assert!(!cfg.in_bands(1452e6));
        let p = former().form_pairs(&[ev(1423e6, 0.0, 9.0), ev(1425.5e6, 0.0, 9.0)]);
        assert!(apply_filters(&p, &cfg, &Exclusions::none()).is_empty());
    }

    #[test]
    fn carrier_is_excised_with_margin() {
        let cfg = FilterConfig::default();
        let mut events = Vec::new();
        for day in 0..20 {
            for k in 0..100 {
                let mut e = ev(1_410.000_2e6, 0.0, 12.0);
                e.mjd = 60500.0 + day as f64 + k as f64 * 1e-4;
                events.push(e);
            }
        }
        let ex = persistent_rfi_excision(&events, &cfg);
        assert_eq!(ex.centers_hz, vec![1410.0e6]);
        assert_eq!(ex.margin_hz, 477_000.0);
        let mut near = ev(1410.0e6 + 400e3, 0.0, 9.0);
        ex.flag(&mut near);
        assert!(near.rfi_margin_hit);
        let mut far = ev(1410.0e6 + 500e3, 0.0, 9.0);
        ex.flag(&mut far);
        assert!(!far.rfi_margin_hit);
    }

    #[test]
    fn short_lived_carrier_is_kept() {
        let cfg = FilterConfig::default();
        let events: Vec<_> = (0..3)
            .flat_map(|day| {
                (0..200).map(move |k| {
                    let mut e = ev(1410e6, 0.0, 12.0);
                    e.mjd = 60500.0 + day as f64 + k as f64 * 1e-4;
                    e
                })
            })
            .collect();
        assert!(persistent_rfi_excision(&events, &cfg).is_empty());
    }

    #[test]
    fn exclusion_lookup() {
        let ex = Exclusions {
            centers_hz: vec![1400e6, 1420e6],
            margin_hz: 1e3,
        };
        assert!(ex.contains(1400e6 - 999.0));
        assert!(ex.contains(1420e6 + 1000.0));
        assert!(!ex.contains(1410e6));
        assert!(!Exclusions::none().contains(1400e6));
    }

    fn brute_force_count(freqs: &[f64]) -> usize {
        let mut n = 0;
        for i in 0..freqs.len() {
            for j in i + 1..freqs.len() {
                let d = (freqs[i] - freqs[j]).abs();
                if (1.0..=7e6).contains(&d) {
                    n += 1;
                }
            }
        }
        n
    }

    proptest! {
        #[test]
        fn pair_count_matches_brute_force(freqs in proptest::collection::vec(1398e6f64..1420e6, 0..40)) {
            let events: Vec<_> = freqs.iter().map(|&f| ev(f, 0.0, 9.0)).collect();
            let pairs = former().form_pairs(&events);
            prop_assert_eq!(pairs.len(), brute_force_count(&freqs));
            for p in &pairs {
                prop_assert!(p.first.rf_frequency_hz < p.second.rf_frequency_hz);
            }
        }

        #[test]
        fn filtering_is_order_independent(
            phases in proptest::collection::vec((-3.1f64..3.1, -0.3f64..0.3, 1398e6f64..1450e6), 2..30),
            seed in any::<u64>(),
        ) {
            let cfg = FilterConfig::default();
            let events: Vec<_> = phases.iter().map(|&(_, ph, f)| ev(f, ph, 9.0)).collect();
            let mut pairs = former().form_pairs(&events);
            for (p, &(c, _, _)) in pairs.iter_mut().zip(phases.iter().cycle()) {
                p.corrected_pair_phase_rad = c;
            }
            let kept = apply_filters(&pairs, &cfg, &Exclusions::none());
            for p in &kept {
                prop_assert!(cfg.passes_ew_window(&p.first));
                prop_assert!(p.corrected_pair_phase_rad.abs() <= 0.8);
                prop_assert!(p.pair_likelihood >= -2.7);
                prop_assert!(cfg.in_bands(p.first.rf_frequency_hz) && cfg.in_bands(p.second.rf_frequency_hz));
            }
            let mut shuffled = pairs.clone();
            let n = shuffled.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let mut a: Vec<_> = kept.iter().map(|p| (p.first.rf_frequency_hz.to_bits(), p.second.rf_frequency_hz.to_bits())).collect();
            let mut b: Vec<_> = apply_filters(&shuffled, &cfg, &Exclusions::none())
                .iter().map(|p| (p.first.rf_frequency_hz.to_bits(), p.second.rf_frequency_hz.to_bits())).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }
}
