//! Fast paths checked against their brute-force counterparts: the prefix
//! scan against full recounts, and the analytic threshold-crossing rate
//! against the explicit dense-band simulator.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::discovery::discovery_scan;
use crate::discovery::oracle::{brute_force_final_d, brute_force_per_event_d};
use crate::error::Result;
use crate::firstlevel::{db_to_linear, PulseEvent};
use crate::pairing::PulsePair;
use crate::synth::dense::{dense_band_validation, DenseBandConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCheck {
    pub instances: u64,
    pub mismatches: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseCheck {
    pub bins: u64,
    pub frames: u64,
    pub rate: f64,
    pub expected: f64,
    /// Deviation in binomial standard errors.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelftestReport {
    pub prefix_scan: ScanCheck,
    pub dense_band: DenseCheck,
}

impl SelftestReport {
    pub fn pass(&self) -> bool {
        self.prefix_scan.pass && self.dense_band.pass
    }
}

/// Random scan instance of up to 500 pairs. Coarse values force ties in
/// every sort key.
pub fn random_scan_instance(rng: &mut impl Rng) -> (Vec<PulsePair>, Vec<f64>) {
    let n = rng.random_range(0..=500u64);
    let n_bins = rng.random_range(1..=40usize);
    let mut w: Vec<f64> = (0..n_bins).map(|_| rng.random_range(0.0..1.0)).collect();
    if rng.random_bool(0.3) {
        w[0] = 0.0;
    }
    w[n_bins - 1] += 0.01;
    let total: f64 = w.iter().sum();
    let p = w.iter().map(|x| x / total).collect();
    let pairs = (0..n)
        .map(|id| {
            let mjd = 60400.0 + rng.random_range(0..5) as f64;
            let first = PulseEvent {
                mjd,
                rf_frequency_hz: 1400e6 + rng.random_range(0..3) as f64,
                snr_east_db: 9.0,
                snr_west_db: 9.0,
                composite_snr_db: 9.0,
                ew_phase_rad: 0.0,
                p954_east_db: 0.0,
                p954_west_db: 0.0,
                p50m_east_db: 0.0,
                p50m_west_db: 0.0,
                rfi_margin_hit: false,
                edge_of_window: false,
            };
            let mut second = first;
            second.rf_frequency_hz += 1e6;
            let phase = rng.random_range(-8i32..8) as f64 * 0.1;
            PulsePair {
                id,
                first,
                second,
                delta_f_hz: 1e6,
                measured_pair_phase_rad: phase,
                corrected_pair_phase_rad: phase,
                pair_likelihood: -3.0,
                ra_bin: rng.random_range(0..n_bins),
                mjd,
            }
        })
        .collect();
    (pairs, p)
}

pub fn check_prefix_scan(seed: u64, instances: u64) -> Result<ScanCheck> {
    let mut rng = Pcg64Mcg::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..instances {
        let (pairs, p) = random_scan_instance(&mut rng);
        let scan = discovery_scan(&pairs, &p)?;
        let stream: Vec<(u64, f64)> = scan.events.iter().map(|e| (e.pair_id, e.d)).collect();
        let finals: Vec<(usize, f64)> = scan.ledgers.iter().map(|l| (l.bin_index, l.cohen_d_final)).collect();
        if stream != brute_force_per_event_d(&pairs, &p) || finals != brute_force_final_d(&pairs, &p) {
            mismatches += 1;
        }
    }
    Ok(ScanCheck {
        instances,
        mismatches,
        pass: mismatches == 0,
    })
}

/// Element exceedance rate of the dense simulator against `exp(-10^(thr/10))`,
/// passing within 3 binomial standard errors.
pub fn check_dense_band(cfg: &DenseBandConfig) -> Result<DenseCheck> {
    let out = dense_band_validation(cfg)?;
    let expected = (-db_to_linear(cfg.snr_threshold_db) / cfg.noise_power).exp();
    let se = (expected * (1.0 - expected) / out.element_trials as f64).sqrt();
    let z = (out.element_rate() - expected) / se;
    Ok(DenseCheck {
        bins: out.n_bins,
        frames: out.n_frames,
        rate: out.element_rate(),
        expected,
        z,
        pass: z.abs() <= 3.0,
    })
}

pub fn run_selftest(seed: u64, dense_frames: u64) -> Result<SelftestReport> {
    Ok(SelftestReport {
        prefix_scan: check_prefix_scan(seed, 200)?,
        dense_band: check_dense_band(&DenseBandConfig {
            n_frames: dense_frames,
            seed,
            ..DenseBandConfig::default()
        })?,
    })
}
