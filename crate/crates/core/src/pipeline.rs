//! End-to-end orchestration, in memory or through the on-disk formats.
//!
//! Second-level processing is two-phase: the first pass forms pairs frame by
//! frame, keeping those that pass every local filter while counting events
//! for persistent-RFI excision; the second pass drops pairs touching an
//! excluded frequency.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::discovery::{discovery_scan, event_probability, recorrect_and_window, ScanResult};
use crate::error::{Error, Result};
use crate::firstlevel::{passes_storage_floor, validate_and_persist, Coverage, PersistSummary, PulseEvent};
use crate::io::{
    build_report, list_first_level_files, read_coverage, read_first_level_path, read_pairs, write_coverage,
    write_pairs, write_plot_csvs, write_report, DirectorySink, DiscoveryReport, ReportContext,
};
use crate::pairing::{ExcisionCounter, Exclusions, FilterConfig, PairFormer, PulsePair};
use crate::phasecal::{correct_pair_phase, wrap};
use crate::synth::{Generator, SyntheticFrame};

pub const FIRST_LEVEL_DIR: &str = "firstlevel";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const EXCLUSIONS_FILE: &str = "exclusions.json";
pub const REPORT_FILE: &str = "report.json";
pub const PLOTS_DIR: &str = "plots";

/// First pass of second-level processing.
#[derive(Debug, Clone)]
pub struct SecondLevel {
    former: PairFormer,
    filters: FilterConfig,
    counter: ExcisionCounter,
    pairs: Vec<PulsePair>,
    pub pairs_formed: u64,
}

impl SecondLevel {
    pub fn new(former: PairFormer, filters: FilterConfig) -> Self {
        Self {
            counter: ExcisionCounter::new(filters.excision.grid_hz),
            former,
            filters,
            pairs: Vec::new(),
            pairs_formed: 0,
        }
    }

    /// Add one frame's persisted events. Returns, for each locally kept pair,
    /// its event indices and its position in the kept list.
    pub fn add_frame(&mut self, events: &[PulseEvent]) -> Vec<(usize, usize, usize)> {
        for e in events {
            self.counter.add(e);
        }
        if events.len() < 2 {
            return Vec::new();
        }
        let ra_bin = self.former.assign_ra_bin(events[0].mjd);
        let mut kept = Vec::new();
        for (i, j) in self.former.pair_indices(events) {
            self.pairs_formed += 1;
            let mut pair = self.former.make_pair(&events[i], &events[j], ra_bin);
            if self.filters.passes_static(&pair) {
                pair.id = self.pairs.len() as u64;
                kept.push((i, j, self.pairs.len()));
                self.pairs.push(pair);
            }
        }
        kept
    }

    fn absorb(&mut self, other: SecondLevel) {
        self.counter.merge(&other.counter);
        self.pairs_formed += other.pairs_formed;
        let base = self.pairs.len() as u64;
        self.pairs.extend(other.pairs.into_iter().map(|mut p| {
            p.id += base;
            p
        }));
    }

    /// Exclusion list and the pairs that survive it.
    pub fn finish(self) -> (Exclusions, Vec<PulsePair>) {
        let exclusions = self.counter.finish(&self.filters.excision, self.filters.rfi_margin_hz);
        let candidates = self
            .pairs
            .into_iter()
            .filter(|p| self.filters.passes_candidate(p, &exclusions))
            .collect();
        (exclusions, candidates)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub frames_observed: u64,
    pub events_generated: u64,
    pub events_persisted: u64,
    pub pairs_formed: u64,
    pub candidates: u64,
    pub kept: u64,
    pub injected_pairs: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub counts: RunCounts,
    pub coverage: Coverage,
    pub exclusions: Exclusions,
    /// Pairs passing every filter except the corrected pair-phase window.
    pub candidates: Vec<PulsePair>,
    pub kept: Vec<PulsePair>,
    pub p_event: Vec<f64>,
    pub scan: ScanResult,
    /// Corrected phase of every injected pair as generated, before any filter.
    pub injected_corrected_phases: Vec<f64>,
    /// Candidate ids that are injected pairs, ascending.
    pub injected_candidate_ids: Vec<u64>,
}

impl RunOutput {
    pub fn kept_injected(&self) -> usize {
        self.kept
            .iter()
            .filter(|p| self.injected_candidate_ids.binary_search(&p.id).is_ok())
            .count()
    }
}

struct Chunk {
    coverage: Coverage,
    second: SecondLevel,
    counts: RunCounts,
    injected_phases: Vec<f64>,
    injected_local: Vec<u64>,
}

fn process_frames<I>(cfg: &RunConfig, frames: I) -> Result<Chunk>
where
    I: Iterator<Item = SyntheticFrame>,
{
    let binning = cfg.binning()?;
    let s = &cfg.scenario;
    let mut chunk = Chunk {
        coverage: Coverage::new(binning),
        second: SecondLevel::new(cfg.pair_former()?, cfg.filters.clone()),
        counts: RunCounts::default(),
        injected_phases: Vec::new(),
        injected_local: Vec::new(),
    };
    let mut persisted = Vec::new();
    let mut index_map = Vec::new();
    for sf in frames {
        let frame = &sf.frame;
        chunk.counts.frames_observed += 1;
        chunk.coverage.record_frame(frame.mjd, frame.lst_hours);
        chunk.counts.events_generated += frame.events.len() as u64;
        persisted.clear();
        index_map.clear();
        for (k, ev) in frame.events.iter().enumerate() {
            ev.validate()?;
            if passes_storage_floor(ev, s.snr_threshold_db, cfg.filters.pulse_likelihood_min) {
                index_map.push(k);
                persisted.push(*ev);
            }
        }
        chunk.counts.events_persisted += persisted.len() as u64;
        for inj in &sf.injected {
            let (a, b) = (&frame.events[inj.first], &frame.events[inj.second]);
            let df = b.rf_frequency_hz - a.rf_frequency_hz;
            chunk.injected_phases.push(correct_pair_phase(
                wrap(b.ew_phase_rad - a.ew_phase_rad),
                df,
                s.geometry.tau_int_s,
            ));
        }
        chunk.counts.injected_pairs += sf.injected.len() as u64;
        let kept = chunk.second.add_frame(&persisted);
        if !sf.injected.is_empty() {
            for (i, j, pos) in kept {
                let (oi, oj) = (index_map[i], index_map[j]);
                if sf
                    .injected
                    .iter()
                    .any(|p| (p.first == oi && p.second == oj) || (p.first == oj && p.second == oi))
                {
                    chunk.injected_local.push(pos as u64);
                }
            }
        }
    }
    Ok(chunk)
}

/// Generate, persist (in memory), pair, filter and scan.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    run_with_threads(cfg, 1)
}

/// As [`run`], generating frames on up to `threads` workers. The result does
/// not depend on the thread count.
pub fn run_with_threads(cfg: &RunConfig, threads: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let generator = Generator::new(cfg.scenario.clone())?;
    let n = generator.n_frame_slots();
    let threads = threads.clamp(1, 64) as u64;
    let bounds: Vec<(u64, u64)> = (0..threads).map(|t| (n * t / threads, n * (t + 1) / threads)).collect();
    let chunks: Vec<Result<Chunk>> = if threads == 1 {
        vec![process_frames(cfg, generator.frames())]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = bounds
                .iter()
                .map(|&(a, b)| {
                    let g = &generator;
                    scope.spawn(move || process_frames(cfg, (a..b).filter_map(|i| g.frame(i))))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::invalid("worker panicked"))))
                .collect()
        })
    };

    let mut merged: Option<Chunk> = None;
    for chunk in chunks {
        let mut chunk = chunk?;
        match merged.as_mut() {
            None => merged = Some(chunk),
            Some(m) => {
                let base = m.second.pairs.len() as u64;
                m.coverage.merge(&chunk.coverage);
                m.injected_phases.append(&mut chunk.injected_phases);
                m.injected_local.extend(chunk.injected_local.iter().map(|i| i + base));
                let c = &chunk.counts;
                m.counts.frames_observed += c.frames_observed;
                m.counts.events_generated += c.events_generated;
                m.counts.events_persisted += c.events_persisted;
                m.counts.injected_pairs += c.injected_pairs;
                m.second.absorb(chunk.second);
            }
        }
    }
    let Chunk {
        coverage,
        second,
        mut counts,
        injected_phases,
        injected_local,
    } = merged.expect("at least one chunk");
    counts.pairs_formed = second.pairs_formed;
    let (exclusions, candidates) = second.finish();
    let tau = cfg.scenario.geometry.tau_int_s;
    let (kept, p_event, scan) = discover(&candidates, &coverage.per_bin(), tau, &cfg.filters)?;
    counts.candidates = candidates.len() as u64;
    counts.kept = kept.len() as u64;
    let mut injected_candidate_ids: Vec<u64> = injected_local
        .into_iter()
        .filter(|id| candidates.binary_search_by_key(id, |p| p.id).is_ok())
        .collect();
    injected_candidate_ids.sort_unstable();
    Ok(RunOutput {
        counts,
        coverage,
        exclusions,
        candidates,
        kept,
        p_event,
        scan,
        injected_corrected_phases: injected_phases,
        injected_candidate_ids,
    })
}

/// Pair-phase window and prefix scan with the given delay.
pub fn discover(
    candidates: &[PulsePair],
    coverage_per_bin: &[u64],
    tau_int_s: f64,
    filters: &FilterConfig,
) -> Result<(Vec<PulsePair>, Vec<f64>, ScanResult)> {
    let p_event = event_probability(coverage_per_bin)?;
    let kept = recorrect_and_window(candidates, tau_int_s, filters);
    let scan = discovery_scan(&kept, &p_event)?;
    Ok((kept, p_event, scan))
}

pub fn report_for(
    cfg: &RunConfig,
    coverage_per_bin: &[u64],
    tau_int_s: f64,
    kept: &[PulsePair],
    scan: &ScanResult,
) -> Result<DiscoveryReport> {
    let hash = cfg.scenario_hash()?;
    let geometry = cfg.scenario.geometry.with_tau_int(tau_int_s);
    let binning = cfg.binning()?;
    let ctx = ReportContext {
        scenario_hash: &hash,
        geometry: &geometry,
        tau_int_used_s: tau_int_s,
        filters: &cfg.filters,
        discovery: &cfg.discovery,
        binning: &binning,
        coverage_per_bin,
        reference_snr_db: cfg.scenario.snr_threshold_db,
    };
    build_report(&ctx, scan, kept)
}

/// Scenario to first-level files plus a coverage table under `out`.
pub fn synth_stage(cfg: &RunConfig, out: &Path) -> Result<PersistSummary> {
    synth_stage_with_threads(cfg, out, 1)
}

/// Frames per block handed out to workers by [`synth_stage_with_threads`].
const SYNTH_BLOCK_FRAMES: u64 = 8192;

/// As [`synth_stage`], generating each block of frames on up to `threads`
/// workers. Files are identical for any thread count.
pub fn synth_stage_with_threads(cfg: &RunConfig, out: &Path, threads: usize) -> Result<PersistSummary> {
    cfg.validate()?;
    let generator = Generator::new(cfg.scenario.clone())?;
    let mut sink = DirectorySink::new(out.join(FIRST_LEVEL_DIR))?;
    let threads = threads.clamp(1, 64) as u64;
    let n = generator.n_frame_slots();
    let g = &generator;
    let blocks = (0..n.div_ceil(SYNTH_BLOCK_FRAMES)).flat_map(move |blk| {
        let (lo, hi) = (blk * SYNTH_BLOCK_FRAMES, ((blk + 1) * SYNTH_BLOCK_FRAMES).min(n));
        if threads == 1 {
            return (lo..hi).filter_map(|i| g.frame(i)).map(|f| f.frame).collect::<Vec<_>>();
        }
        let span = hi - lo;
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let (a, b) = (lo + span * t / threads, lo + span * (t + 1) / threads);
                    scope.spawn(move || (a..b).filter_map(|i| g.frame(i)).map(|f| f.frame).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("frame worker panicked"))
                .collect::<Vec<_>>()
        })
    });
    let summary = validate_and_persist(
        blocks,
        &cfg.header_template()?,
        generator.binning(),
        &mut sink,
    )?;
    write_coverage(&summary.coverage, &out.join(COVERAGE_FILE))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub files_read: usize,
    pub events_read: u64,
    pub pairs_formed: u64,
    pub candidates: u64,
    pub exclusions: Exclusions,
}

/// First-level files in `input` to candidate pairs under `out`.
pub fn pair_stage(cfg: &RunConfig, input: &Path, out: &Path) -> Result<PairSummary> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let files = list_first_level_files(&input.join(FIRST_LEVEL_DIR))?;
    let expected_hash = cfg.scenario_hash()?;
    let mut second = SecondLevel::new(cfg.pair_former()?, cfg.filters.clone());
    let mut events_read = 0u64;
    for path in &files {
        let file = read_first_level_path(path)?;
        if file.header.scenario_hash != expected_hash {
            return Err(Error::Header {
                file: path.display().to_string(),
                message: "scenario hash does not match the configuration".into(),
            });
        }
        events_read += file.events.len() as u64;
        for frame in file.events.chunk_by(|a, b| a.mjd == b.mjd) {
            second.add_frame(frame);
        }
    }
    let pairs_formed = second.pairs_formed;
    let (exclusions, candidates) = second.finish();
    write_pairs(&candidates, &out.join(CANDIDATES_FILE))?;
    fs::write(out.join(EXCLUSIONS_FILE), serde_json::to_string_pretty(&exclusions)?)?;
    let binning = cfg.binning()?;
    let coverage = read_coverage(&input.join(COVERAGE_FILE), binning)?;
    write_coverage(&coverage, &out.join(COVERAGE_FILE))?;
    Ok(PairSummary {
        files_read: files.len(),
        events_read,
        pairs_formed,
        candidates: candidates.len() as u64,
        exclusions,
    })
}

/// Candidate pairs and coverage in `input` to a report and plot tables
/// under `out`. `tau_override` replaces the configured delay.
pub fn discover_stage(
    cfg: &RunConfig,
    input: &Path,
    out: &Path,
    tau_override: Option<f64>,
) -> Result<(DiscoveryReport, Vec<PathBuf>)> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let candidates = read_pairs(&input.join(CANDIDATES_FILE))?;
    let coverage = read_coverage(&input.join(COVERAGE_FILE), cfg.binning()?)?;
    let per_bin = coverage.per_bin();
    let tau = tau_override.unwrap_or(cfg.scenario.geometry.tau_int_s);
    let (kept, _, scan) = discover(&candidates, &per_bin, tau, &cfg.filters)?;
    let report = report_for(cfg, &per_bin, tau, &kept, &scan)?;
    write_report(&report, &out.join(REPORT_FILE))?;
    let mut written = vec![out.join(REPORT_FILE)];
    written.extend(write_plot_csvs(&report, &out.join(PLOTS_DIR))?);
    Ok((report, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{Scenario, Transmitter};

    fn cfg() -> RunConfig {
        RunConfig {
            scenario: Scenario {
                duration_days: 2.0,
                daily_ra_window_hours: (4.0, 6.0),
                background_rate_per_frame: Some(2.0),
                transmitters: vec![Transmitter {
                    pair_rate_per_transit: 40.0,
                    ..Transmitter::default()
                }],
                seed: 11,
                ..Scenario::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let a = run(&cfg()).unwrap();
        let b = run_with_threads(&cfg(), 3).unwrap();
        assert_eq!(a.candidates, b.candidates);
        assert_eq!(a.scan, b.scan);
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.injected_candidate_ids, b.injected_candidate_ids);
        assert_eq!(a.coverage, b.coverage);
    }

    #[test]
    fn file_stages_match_memory() {
        let c = cfg();
        let dir = tempfile::tempdir().unwrap();
        let synth_dir = dir.path().join("synth");
        let pair_dir = dir.path().join("pairs");
        let disc_dir = dir.path().join("disc");
        let persisted = synth_stage(&c, &synth_dir).unwrap();
        let mem = run(&c).unwrap();
        assert_eq!(persisted.persisted, mem.counts.events_persisted);
        assert_eq!(persisted.coverage, mem.coverage);
        let ps = pair_stage(&c, &synth_dir, &pair_dir).unwrap();
        assert_eq!(ps.candidates, mem.candidates.len() as u64);
        assert_eq!(read_pairs(&pair_dir.join(CANDIDATES_FILE)).unwrap(), mem.candidates);
        let (report, _) = discover_stage(&c, &pair_dir, &disc_dir, None).unwrap();
        let expected = report_for(&c, &mem.coverage.per_bin(), -82e-9, &mem.kept, &mem.scan).unwrap();
        assert_eq!(report, expected);
        assert_eq!(report.events.len() as u64, mem.counts.kept);
    }

    #[test]
    fn threaded_synth_writes_identical_files() {
        let c = cfg();
        let dir = tempfile::tempdir().unwrap();
        let (one, four) = (dir.path().join("one"), dir.path().join("four"));
        synth_stage(&c, &one).unwrap();
        synth_stage_with_threads(&c, &four, 4).unwrap();
        let files = list_first_level_files(&one.join(FIRST_LEVEL_DIR)).unwrap();
        assert!(!files.is_empty());
        for f in files {
            let twin = four.join(FIRST_LEVEL_DIR).join(f.file_name().unwrap());
            assert_eq!(fs::read(&f).unwrap(), fs::read(twin).unwrap());
        }
        assert_eq!(
            fs::read(one.join(COVERAGE_FILE)).unwrap(),
            fs::read(four.join(COVERAGE_FILE)).unwrap()
        );
    }

    #[test]
    fn wrong_scenario_hash_rejected() {
        let c = cfg();
        let dir = tempfile::tempdir().unwrap();
        synth_stage(&c, dir.path()).unwrap();
        let mut other = c.clone();
        other.scenario.seed += 1;
        let err = pair_stage(&other, dir.path(), &dir.path().join("p")).unwrap_err();
        assert_eq!(err.class(), "header");
    }
}
