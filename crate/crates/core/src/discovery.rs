//! Single-step discovery: rank kept pairs by |corrected pair phase|, insert
//! them one at a time into their RA bins, and measure each bin's count
//! against the binomial noise-only model in units of its standard deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BaselineGeometry;
use crate::pairing::{FilterConfig, PulsePair};
use crate::sky::RaBinning;

/// Probability clamp keeping the binomial sigma nonzero.
pub const P_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoveryConfig {
    /// Final d at or above which a bin is reported as a flagged direction.
    pub report_threshold_d: f64,
    /// Bins whose count exceeds this are listed in the count note.
    pub count_note_threshold: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            report_threshold_d: 5.0,
            count_note_threshold: 13,
        }
    }
}

/// `p_i = frames_i / sum(frames)`.
pub fn event_probability(coverage_per_bin: &[u64]) -> Result<Vec<f64>> {
    let total: u64 = coverage_per_bin.iter().sum();
    if total == 0 {
        return Err(Error::ZeroCoverage);
    }
    let total = total as f64;
    Ok(coverage_per_bin.iter().map(|&c| c as f64 / total).collect())
}

#[inline]
fn clamp_p(p: f64) -> f64 {
    p.clamp(P_EPSILON, 1.0 - P_EPSILON)
}

/// `(count - n p) / sqrt(n p (1 - p))` with `p` clamped.
#[inline]
pub fn binomial_d(count: u64, n: u64, p: f64) -> f64 {
    let p = clamp_p(p);
    let n = n as f64;
    (count as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RABinLedger {
    pub bin_index: usize,
    pub p_event: f64,
    pub count: u64,
    pub mean: f64,
    pub sigma: f64,
    pub cohen_d_final: f64,
    pub cohen_d_max_during_scan: f64,
    /// `(pair id, d at insertion)` in insertion order.
    pub per_event_d: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanEvent {
    pub pair_id: u64,
    /// 1-based insertion rank.
    pub rank: u64,
    pub ra_bin: usize,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub n_pairs: u64,
    /// One entry per bin with nonzero probability or nonzero count, by index.
    pub ledgers: Vec<RABinLedger>,
    /// Insertion stream in scan order.
    pub events: Vec<ScanEvent>,
}

impl ScanResult {
    pub fn ledger(&self, bin: usize) -> Option<&RABinLedger> {
        self.ledgers
            .binary_search_by_key(&bin, |l| l.bin_index)
            .ok()
            .map(|i| &self.ledgers[i])
    }

    pub fn max_final_d(&self) -> Option<&RABinLedger> {
        self.ledgers
            .iter()
            .max_by(|a, b| a.cohen_d_final.total_cmp(&b.cohen_d_final))
    }
}

/// Canonical scan order: `|corrected phase|`, then mjd, then frequencies, then id.
pub fn scan_order(pairs: &[PulsePair]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&pairs[a], &pairs[b]);
        pa.corrected_pair_phase_rad
            .abs()
            .total_cmp(&pb.corrected_pair_phase_rad.abs())
            .then(pa.mjd.total_cmp(&pb.mjd))
            .then(pa.first.rf_frequency_hz.total_cmp(&pb.first.rf_frequency_hz))
            .then(pa.second.rf_frequency_hz.total_cmp(&pb.second.rf_frequency_hz))
            .then(pa.id.cmp(&pb.id))
    });
    order
}

/// Prefix scan over kept pairs. `p_event` is indexed by RA bin.
pub fn discovery_scan(pairs: &[PulsePair], p_event: &[f64]) -> Result<ScanResult> {
    if let Some(bad) = pairs.iter().find(|p| p.ra_bin >= p_event.len()) {
        return Err(Error::invalid(format!(
            "pair {} has RA bin {} outside {} bins",
            bad.id,
            bad.ra_bin,
            p_event.len()
        )));
    }
    let n_bins = p_event.len();
    let mut counts = vec![0u64; n_bins];
    let mut max_d = vec![f64::NEG_INFINITY; n_bins];
    let mut per_event: Vec<Vec<(u64, f64)>> = vec![Vec::new(); n_bins];
    let mut events = Vec::with_capacity(pairs.len());

    for (k, idx) in scan_order(pairs).into_iter().enumerate() {
        let pair = &pairs[idx];
        let bin = pair.ra_bin;
        let rank = k as u64 + 1;
        counts[bin] += 1;
        let d = binomial_d(counts[bin], rank, p_event[bin]);
        max_d[bin] = max_d[bin].max(d);
        per_event[bin].push((pair.id, d));
        events.push(ScanEvent {
            pair_id: pair.id,
            rank,
            ra_bin: bin,
            d,
        });
    }

    let n = pairs.len() as u64;
    let ledgers = (0..n_bins)
        .filter(|&b| p_event[b] > 0.0 || counts[b] > 0)
        .map(|b| {
            let p = clamp_p(p_event[b]);
            let mean = n as f64 * p;
            let sigma = (mean * (1.0 - p)).sqrt();
            let d_final = if n == 0 { 0.0 } else { binomial_d(counts[b], n, p_event[b]) };
            RABinLedger {
                bin_index: b,
                p_event: p_event[b],
                count: counts[b],
                mean,
                sigma,
                cohen_d_final: d_final,
                cohen_d_max_during_scan: if per_event[b].is_empty() { d_final } else { max_d[b] },
                per_event_d: std::mem::take(&mut per_event[b]),
            }
        })
        .collect();

    Ok(ScanResult {
        n_pairs: n,
        ledgers,
        events,
    })
}

/// Recompute with from-scratch counting, for testing the prefix scan.
pub mod oracle {
    use super::*;

    /// Per-event d in scan order, each recomputed over the first k pairs.
    pub fn brute_force_per_event_d(pairs: &[PulsePair], p_event: &[f64]) -> Vec<(u64, f64)> {
        let order = scan_order(pairs);
        (0..order.len())
            .map(|k| {
                let pair = &pairs[order[k]];
                let count = order[..=k]
                    .iter()
                    .filter(|&&i| pairs[i].ra_bin == pair.ra_bin)
                    .count() as u64;
                (pair.id, binomial_d(count, k as u64 + 1, p_event[pair.ra_bin]))
            })
            .collect()
    }

    /// Final d per bin from a direct count over all pairs.
    pub fn brute_force_final_d(pairs: &[PulsePair], p_event: &[f64]) -> Vec<(usize, f64)> {
        let n = pairs.len() as u64;
        (0..p_event.len())
            .filter(|&b| p_event[b] > 0.0 || pairs.iter().any(|p| p.ra_bin == b))
            .map(|b| {
                let count = pairs.iter().filter(|p| p.ra_bin == b).count() as u64;
                (b, if n == 0 { 0.0 } else { binomial_d(count, n, p_event[b]) })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasBin {
    pub bin_index: usize,
    pub count: u64,
    pub cohen_d_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasWindowReport {
    pub offset_bins: i64,
    pub bins: Vec<AliasBin>,
    pub window_count: u64,
    pub max_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedDirection {
    pub bin_index: usize,
    pub ra_hours: f64,
    pub count: u64,
    pub cohen_d_final: f64,
    pub cohen_d_max_during_scan: f64,
    pub aliases: Vec<AliasWindowReport>,
}

/// Flagged bins with the counts inside their alias windows.
pub fn alias_report(
    scan: &ScanResult,
    geometry: &BaselineGeometry,
    binning: &RaBinning,
    report_threshold_d: f64,
) -> Result<Vec<FlaggedDirection>> {
    let windows = geometry.alias_bin_offsets(binning.bin_width_hours)?;
    Ok(scan
        .ledgers
        .iter()
        .filter(|l| l.cohen_d_final >= report_threshold_d)
        .map(|l| FlaggedDirection {
            bin_index: l.bin_index,
            ra_hours: binning.bin_start_hours(l.bin_index),
            count: l.count,
            cohen_d_final: l.cohen_d_final,
            cohen_d_max_during_scan: l.cohen_d_max_during_scan,
            aliases: windows
                .offsets
                .iter()
                .map(|&off| alias_window(scan, &windows, l.bin_index, off, binning.n_bins))
                .collect(),
        })
        .collect())
}

fn alias_window(
    scan: &ScanResult,
    windows: &crate::geometry::AliasWindows,
    primary: usize,
    offset: i64,
    n_bins: usize,
) -> AliasWindowReport {
    let bins: Vec<AliasBin> = windows
        .window_bins(primary, offset, n_bins)
        .into_iter()
        .map(|b| {
            let (count, d) = scan
                .ledger(b)
                .map_or((0, f64::NAN), |l| (l.count, l.cohen_d_final));
            AliasBin {
                bin_index: b,
                count,
                cohen_d_final: d,
            }
        })
        .collect();
    AliasWindowReport {
        offset_bins: offset,
        window_count: bins.iter().map(|b| b.count).sum(),
        max_d: bins
            .iter()
            .map(|b| b.cohen_d_final)
            .filter(|d| d.is_finite())
            .fold(f64::NEG_INFINITY, f64::max),
        bins,
    }
}

/// Chance of an adjacent high-count bin: `n_candidate_bins / range_bins`.
pub fn adjacency_likelihood(n_candidate_bins: f64, window_bins: f64, range_bins: f64) -> Result<f64> {
    if !(range_bins > 0.0) {
        return Err(Error::invalid(format!("range_bins must be > 0, got {range_bins}")));
    }
    if !(n_candidate_bins >= 0.0 && window_bins >= 0.0) {
        return Err(Error::invalid("bin counts must be >= 0"));
    }
    Ok(n_candidate_bins / range_bins)
}

/// Redo the delay correction with `tau_int_override`, reapply the pair-phase
/// window and rescan. `candidates` are pairs that passed every other filter.
pub fn ablation_scan(
    candidates: &[PulsePair],
    p_event: &[f64],
    tau_int_override: f64,
    filters: &FilterConfig,
) -> Result<ScanResult> {
    let kept = recorrect_and_window(candidates, tau_int_override, filters);
    discovery_scan(&kept, p_event)
}

pub fn recorrect_and_window(candidates: &[PulsePair], tau_int_s: f64, filters: &FilterConfig) -> Vec<PulsePair> {
    candidates
        .iter()
        .map(|p| p.recorrected(tau_int_s))
        .filter(|p| filters.passes_pair_window(p.corrected_pair_phase_rad))
        .collect()
}
