//! On-disk formats: first-level event files, coverage, candidate pairs,
//! discovery reports and plot tables.
//!
//! Rows are CSV and structured headers are JSON. Floats are written in
//! shortest round-trip form, so reading back is bit-exact.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discovery::{alias_report, DiscoveryConfig, FlaggedDirection, ScanResult};
use crate::error::{Error, Result};
use crate::firstlevel::{
    pulse_likelihood, Coverage, CoverageRecord, FirstLevelSink, PulseEvent, FILE_SPAN_DAYS,
};
use crate::geometry::BaselineGeometry;
use crate::pairing::{FilterConfig, PulsePair};
use crate::sky::RaBinning;

pub const FIRST_LEVEL_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

const SPAN_TOLERANCE_DAYS: f64 = 1e-9;

const EVENT_COLUMNS: [&str; 12] = [
    "mjd",
    "rf_frequency_hz",
    "snr_east_db",
    "snr_west_db",
    "composite_snr_db",
    "ew_phase_rad",
    "p954_east_db",
    "p954_west_db",
    "p50m_east_db",
    "p50m_west_db",
    "rfi_margin_hit",
    "edge_of_window",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstLevelHeader {
    pub schema_version: u32,
    pub scenario_hash: String,
    pub geometry: BaselineGeometry,
    pub snr_threshold_db: f64,
    pub pulse_likelihood_floor: f64,
    pub mjd_start: f64,
    pub mjd_end: f64,
}

impl FirstLevelHeader {
    fn check(&self, file: &str) -> Result<()> {
        if self.schema_version != FIRST_LEVEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                file: file.into(),
                expected: FIRST_LEVEL_SCHEMA_VERSION,
                found: self.schema_version,
            });
        }
        let span = self.mjd_end - self.mjd_start;
        if !(span >= 0.0) {
            return Err(Error::Header {
                file: file.into(),
                message: format!("mjd_end {} precedes mjd_start {}", self.mjd_end, self.mjd_start),
            });
        }
        if span > FILE_SPAN_DAYS + SPAN_TOLERANCE_DAYS {
            return Err(Error::Header {
                file: file.into(),
                message: format!("span of {:.4} h exceeds 4 h", span * 24.0),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstLevelFile {
    pub header: FirstLevelHeader,
    pub events: Vec<PulseEvent>,
}

impl FirstLevelFile {
    /// Conventional file name, keyed by the 4-hour unit index.
    pub fn file_name(&self) -> String {
        format!("fl_{:08}.csv", (self.header.mjd_start * 6.0).round() as i64)
    }
}

/// Line 1 is `#` followed by the JSON header; the rest is CSV with a column row.
pub fn write_first_level<W: Write>(file: &FirstLevelFile, mut out: W) -> Result<()> {
    out.write_all(b"#")?;
    serde_json::to_writer(&mut out, &file.header)?;
    out.write_all(b"\n")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(EVENT_COLUMNS).map_err(csv_io)?;
    for ev in &file.events {
        w.serialize(ev).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_first_level<R: Read>(input: R, name: &str) -> Result<FirstLevelFile> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let json = first.trim_end().strip_prefix('#').ok_or_else(|| Error::Parse {
        file: name.into(),
        line: 1,
        message: "expected '#' followed by a JSON header".into(),
    })?;
    let header: FirstLevelHeader = serde_json::from_str(json).map_err(|e| {
        // a header with a different schema may not deserialize at all; try to
        // surface the version mismatch first
        match serde_json::from_str::<serde_json::Value>(json)
            .ok()
            .and_then(|v| v.get("schema_version").and_then(|s| s.as_u64()))
        {
            Some(found) if found != u64::from(FIRST_LEVEL_SCHEMA_VERSION) => Error::SchemaVersion {
                file: name.into(),
                expected: FIRST_LEVEL_SCHEMA_VERSION,
                found: found as u32,
            },
            _ => Error::Parse {
                file: name.into(),
                line: 1,
                message: e.to_string(),
            },
        }
    })?;
    header.check(name)?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let columns = rdr.headers().map_err(|e| csv_parse(name, &e, 1))?.clone();
    if !columns.is_empty() && columns.iter().ne(EVENT_COLUMNS) {
        return Err(Error::Parse {
            file: name.into(),
            line: 2,
            message: format!("unexpected columns {:?}", columns.iter().collect::<Vec<_>>()),
        });
    }
    let mut events = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_parse(name, &e, 1))?;
        let line = record.position().map_or(0, |p| p.line()) + 1;
        let ev: PulseEvent = record.deserialize(Some(&columns)).map_err(|e| Error::Parse {
            file: name.into(),
            line,
            message: e.to_string(),
        })?;
        ev.validate().map_err(|e| Error::Parse {
            file: name.into(),
            line,
            message: e.to_string(),
        })?;
        if ev.mjd < previous {
            return Err(Error::TimeOrder {
                file: name.into(),
                row,
                mjd: ev.mjd,
                previous,
            });
        }
        if ev.mjd < header.mjd_start - SPAN_TOLERANCE_DAYS || ev.mjd > header.mjd_end + SPAN_TOLERANCE_DAYS {
            return Err(Error::Header {
                file: name.into(),
                message: format!(
                    "row at line {line} has mjd {} outside [{}, {}]",
                    ev.mjd, header.mjd_start, header.mjd_end
                ),
            });
        }
        previous = ev.mjd;
        events.push(ev);
    }
    Ok(FirstLevelFile { header, events })
}

pub fn write_first_level_path(file: &FirstLevelFile, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_first_level(file, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_first_level_path(path: &Path) -> Result<FirstLevelFile> {
    read_first_level(File::open(path)?, &path.display().to_string())
}

/// Writes each accepted file into a directory.
#[derive(Debug)]
pub struct DirectorySink {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl DirectorySink {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }
}

impl FirstLevelSink for DirectorySink {
    fn accept(&mut self, file: FirstLevelFile) -> Result<()> {
        let path = self.dir.join(file.file_name());
        write_first_level_path(&file, &path)?;
        self.written.push(path);
        Ok(())
    }
}

/// First-level files in a directory, in name (hence time) order.
pub fn list_first_level_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("fl_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn write_coverage(coverage: &Coverage, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    for rec in coverage.records() {
        w.serialize(rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_coverage(path: &Path, binning: RaBinning) -> Result<Coverage> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_parse(&name, &e, 0))?;
    let mut coverage = Coverage::new(binning);
    for rec in rdr.deserialize::<CoverageRecord>() {
        let rec = rec.map_err(|e| csv_parse(&name, &e, 0))?;
        if rec.ra_bin_index >= binning.n_bins {
            return Err(Error::Parse {
                file: name,
                line: 0,
                message: format!("RA bin {} outside {} bins", rec.ra_bin_index, binning.n_bins),
            });
        }
        coverage.add_record(rec);
    }
    Ok(coverage)
}

/// Flat CSV form of a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PairRow {
    id: u64,
    mjd: f64,
    ra_bin: usize,
    delta_f_hz: f64,
    measured_pair_phase_rad: f64,
    corrected_pair_phase_rad: f64,
    pair_likelihood: f64,
    first_rf_frequency_hz: f64,
    first_snr_east_db: f64,
    first_snr_west_db: f64,
    first_composite_snr_db: f64,
    first_ew_phase_rad: f64,
    first_p954_east_db: f64,
    first_p954_west_db: f64,
    first_p50m_east_db: f64,
    first_p50m_west_db: f64,
    first_rfi_margin_hit: bool,
    first_edge_of_window: bool,
    second_rf_frequency_hz: f64,
    second_snr_east_db: f64,
    second_snr_west_db: f64,
    second_composite_snr_db: f64,
    second_ew_phase_rad: f64,
    second_p954_east_db: f64,
    second_p954_west_db: f64,
    second_p50m_east_db: f64,
    second_p50m_west_db: f64,
    second_rfi_margin_hit: bool,
    second_edge_of_window: bool,
}

impl From<&PulsePair> for PairRow {
    fn from(p: &PulsePair) -> Self {
        let (a, b) = (&p.first, &p.second);
        Self {
            id: p.id,
            mjd: p.mjd,
            ra_bin: p.ra_bin,
            delta_f_hz: p.delta_f_hz,
            measured_pair_phase_rad: p.measured_pair_phase_rad,
            corrected_pair_phase_rad: p.corrected_pair_phase_rad,
            pair_likelihood: p.pair_likelihood,
            first_rf_frequency_hz: a.rf_frequency_hz,
            first_snr_east_db: a.snr_east_db,
            first_snr_west_db: a.snr_west_db,
            first_composite_snr_db: a.composite_snr_db,
            first_ew_phase_rad: a.ew_phase_rad,
            first_p954_east_db: a.p954_east_db,
            first_p954_west_db: a.p954_west_db,
            first_p50m_east_db: a.p50m_east_db,
            first_p50m_west_db: a.p50m_west_db,
            first_rfi_margin_hit: a.rfi_margin_hit,
            first_edge_of_window: a.edge_of_window,
            second_rf_frequency_hz: b.rf_frequency_hz,
            second_snr_east_db: b.snr_east_db,
            second_snr_west_db: b.snr_west_db,
            second_composite_snr_db: b.composite_snr_db,
            second_ew_phase_rad: b.ew_phase_rad,
            second_p954_east_db: b.p954_east_db,
            second_p954_west_db: b.p954_west_db,
            second_p50m_east_db: b.p50m_east_db,
            second_p50m_west_db: b.p50m_west_db,
            second_rfi_margin_hit: b.rfi_margin_hit,
            second_edge_of_window: b.edge_of_window,
        }
    }
}

impl From<PairRow> for PulsePair {
    fn from(r: PairRow) -> Self {
        let first = PulseEvent {
            mjd: r.mjd,
            rf_frequency_hz: r.first_rf_frequency_hz,
            snr_east_db: r.first_snr_east_db,
            snr_west_db: r.first_snr_west_db,
            composite_snr_db: r.first_composite_snr_db,
            ew_phase_rad: r.first_ew_phase_rad,
            p954_east_db: r.first_p954_east_db,
            p954_west_db: r.first_p954_west_db,
            p50m_east_db: r.first_p50m_east_db,
            p50m_west_db: r.first_p50m_west_db,
            rfi_margin_hit: r.first_rfi_margin_hit,
            edge_of_window: r.first_edge_of_window,
        };
        let second = PulseEvent {
            mjd: r.mjd,
            rf_frequency_hz: r.second_rf_frequency_hz,
            snr_east_db: r.second_snr_east_db,
            snr_west_db: r.second_snr_west_db,
            composite_snr_db: r.second_composite_snr_db,
            ew_phase_rad: r.second_ew_phase_rad,
            p954_east_db: r.second_p954_east_db,
            p954_west_db: r.second_p954_west_db,
            p50m_east_db: r.second_p50m_east_db,
            p50m_west_db: r.second_p50m_west_db,
            rfi_margin_hit: r.second_rfi_margin_hit,
            edge_of_window: r.second_edge_of_window,
        };
        PulsePair {
            id: r.id,
            first,
            second,
            delta_f_hz: r.delta_f_hz,
            measured_pair_phase_rad: r.measured_pair_phase_rad,
            corrected_pair_phase_rad: r.corrected_pair_phase_rad,
            pair_likelihood: r.pair_likelihood,
            ra_bin: r.ra_bin,
            mjd: r.mjd,
        }
    }
}

pub fn write_pairs(pairs: &[PulsePair], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    for p in pairs {
        w.serialize(PairRow::from(p)).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<PulsePair>> {
    let name = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_parse(&name, &e, 0))?;
    rdr.deserialize::<PairRow>()
        .map(|r| r.map(PulsePair::from).map_err(|e| csv_parse(&name, &e, 0)))
        .collect()
}

/// Run parameters echoed at the top of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBlock {
    pub scenario_hash: String,
    pub geometry: BaselineGeometry,
    pub tau_int_used_s: f64,
    pub filters: FilterConfig,
    pub discovery: DiscoveryConfig,
    pub ra_bin_width_hours: f64,
    pub n_ra_bins: usize,
    pub fringe_period_ra_hours: f64,
    pub bins_per_alias_period: f64,
    pub total_coverage_frames: u64,
    pub observed_bins: usize,
    pub kept_pairs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub bin_index: usize,
    pub ra_hours: f64,
    pub p_event: f64,
    pub count: u64,
    pub mean: f64,
    pub sigma: f64,
    pub cohen_d_final: f64,
    pub cohen_d_max_during_scan: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub pair_id: u64,
    pub rank: u64,
    pub ra_bin: usize,
    pub ra_hours: f64,
    pub cohen_d: f64,
    pub corrected_pair_phase_rad: f64,
    pub measured_pair_phase_rad: f64,
    pub first_ew_phase_rad: f64,
    pub delta_f_hz: f64,
    pub mjd: f64,
    pub pair_likelihood: f64,
    pub first_likelihood: f64,
    pub second_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub schema_version: u32,
    pub parameters: ParameterBlock,
    pub ledgers: Vec<LedgerRow>,
    pub flagged: Vec<FlaggedDirection>,
    /// Bins whose count exceeds the configured count-note threshold.
    pub high_count_bins: Vec<usize>,
    pub events: Vec<EventRow>,
}

impl DiscoveryReport {
    pub fn max_final_d(&self) -> f64 {
        self.ledgers
            .iter()
            .map(|l| l.cohen_d_final)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Everything a report needs besides the scan itself.
#[derive(Debug, Clone)]
pub struct ReportContext<'a> {
    pub scenario_hash: &'a str,
    pub geometry: &'a BaselineGeometry,
    pub tau_int_used_s: f64,
    pub filters: &'a FilterConfig,
    pub discovery: &'a DiscoveryConfig,
    pub binning: &'a RaBinning,
    pub coverage_per_bin: &'a [u64],
    pub reference_snr_db: f64,
}

pub fn build_report(ctx: &ReportContext<'_>, scan: &ScanResult, kept: &[PulsePair]) -> Result<DiscoveryReport> {
    let windows = ctx.geometry.alias_bin_offsets(ctx.binning.bin_width_hours)?;
    let parameters = ParameterBlock {
        scenario_hash: ctx.scenario_hash.to_owned(),
        geometry: *ctx.geometry,
        tau_int_used_s: ctx.tau_int_used_s,
        filters: ctx.filters.clone(),
        discovery: *ctx.discovery,
        ra_bin_width_hours: ctx.binning.bin_width_hours,
        n_ra_bins: ctx.binning.n_bins,
        fringe_period_ra_hours: ctx.geometry.fringe_period_ra_hours()?,
        bins_per_alias_period: windows.bins_per_period,
        total_coverage_frames: ctx.coverage_per_bin.iter().sum(),
        observed_bins: ctx.coverage_per_bin.iter().filter(|&&c| c > 0).count(),
        kept_pairs: scan.n_pairs,
    };
    let ledgers = scan
        .ledgers
        .iter()
        .map(|l| LedgerRow {
            bin_index: l.bin_index,
            ra_hours: ctx.binning.bin_start_hours(l.bin_index),
            p_event: l.p_event,
            count: l.count,
            mean: l.mean,
            sigma: l.sigma,
            cohen_d_final: l.cohen_d_final,
            cohen_d_max_during_scan: l.cohen_d_max_during_scan,
        })
        .collect();
    let by_id: std::collections::HashMap<u64, &PulsePair> = kept.iter().map(|p| (p.id, p)).collect();
    let mut events = Vec::with_capacity(scan.events.len());
    for e in &scan.events {
        let p = by_id
            .get(&e.pair_id)
            .ok_or_else(|| Error::invalid(format!("scan references unknown pair {}", e.pair_id)))?;
        events.push(EventRow {
            pair_id: e.pair_id,
            rank: e.rank,
            ra_bin: e.ra_bin,
            ra_hours: ctx.binning.bin_start_hours(e.ra_bin),
            cohen_d: e.d,
            corrected_pair_phase_rad: p.corrected_pair_phase_rad,
            measured_pair_phase_rad: p.measured_pair_phase_rad,
            first_ew_phase_rad: p.first.ew_phase_rad,
            delta_f_hz: p.delta_f_hz,
            mjd: p.mjd,
            pair_likelihood: p.pair_likelihood,
            first_likelihood: pulse_likelihood(&p.first, ctx.reference_snr_db),
            second_likelihood: pulse_likelihood(&p.second, ctx.reference_snr_db),
        });
    }
    Ok(DiscoveryReport {
        schema_version: REPORT_SCHEMA_VERSION,
        parameters,
        ledgers,
        flagged: alias_report(scan, ctx.geometry, ctx.binning, ctx.discovery.report_threshold_d)?,
        high_count_bins: scan
            .ledgers
            .iter()
            .filter(|l| l.count > ctx.discovery.count_note_threshold)
            .map(|l| l.bin_index)
            .collect(),
        events,
    })
}

pub fn report_to_json(report: &DiscoveryReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

pub fn write_report(report: &DiscoveryReport, path: &Path) -> Result<()> {
    fs::write(path, report_to_json(report)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<DiscoveryReport> {
    let report: DiscoveryReport = serde_json::from_str(&fs::read_to_string(path)?)?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            file: path.display().to_string(),
            expected: REPORT_SCHEMA_VERSION,
            found: report.schema_version,
        });
    }
    Ok(report)
}

pub const PLOT_FILES: [&str; 7] = [
    "d_vs_ra.csv",
    "delta_f_vs_ra.csv",
    "phase_vs_ra.csv",
    "likelihood_vs_ra.csv",
    "mjd_vs_ra.csv",
    "count_per_bin.csv",
    "p_per_bin.csv",
];

/// One CSV per plot family. Returns the paths written.
pub fn write_plot_csvs(report: &DiscoveryReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let paths: Vec<PathBuf> = PLOT_FILES.iter().map(|f| dir.join(f)).collect();
    let ev = &report.events;
    table(&paths[0], &["ra_hours", "ra_bin", "pair_id", "cohen_d"], ev.iter().map(|e| {
        vec![e.ra_hours.to_string(), e.ra_bin.to_string(), e.pair_id.to_string(), e.cohen_d.to_string()]
    }))?;
    table(&paths[1], &["ra_hours", "pair_id", "delta_f_hz"], ev.iter().map(|e| {
        vec![e.ra_hours.to_string(), e.pair_id.to_string(), e.delta_f_hz.to_string()]
    }))?;
    table(
        &paths[2],
        &["ra_hours", "pair_id", "corrected_pair_phase_rad", "measured_pair_phase_rad", "first_ew_phase_rad"],
        ev.iter().map(|e| {
            vec![
                e.ra_hours.to_string(),
                e.pair_id.to_string(),
                e.corrected_pair_phase_rad.to_string(),
                e.measured_pair_phase_rad.to_string(),
                e.first_ew_phase_rad.to_string(),
            ]
        }),
    )?;
    table(
        &paths[3],
        &["ra_hours", "pair_id", "pair_likelihood", "first_likelihood", "second_likelihood"],
        ev.iter().map(|e| {
            vec![
                e.ra_hours.to_string(),
                e.pair_id.to_string(),
                e.pair_likelihood.to_string(),
                e.first_likelihood.to_string(),
                e.second_likelihood.to_string(),
            ]
        }),
    )?;
    table(&paths[4], &["ra_hours", "pair_id", "mjd"], ev.iter().map(|e| {
        vec![e.ra_hours.to_string(), e.pair_id.to_string(), e.mjd.to_string()]
    }))?;
    table(&paths[5], &["ra_bin", "ra_hours", "count"], report.ledgers.iter().map(|l| {
        vec![l.bin_index.to_string(), l.ra_hours.to_string(), l.count.to_string()]
    }))?;
    table(&paths[6], &["ra_bin", "ra_hours", "p_event"], report.ledgers.iter().map(|l| {
        vec![l.bin_index.to_string(), l.ra_hours.to_string(), l.p_event.to_string()]
    }))?;
    Ok(paths)
}

fn table<I>(path: &Path, columns: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(columns).map_err(csv_io)?;
    for row in rows {
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

fn csv_parse(file: &str, e: &csv::Error, line_offset: u64) -> Error {
    let line = e.position().map_or(0, |p| p.line()) + line_offset;
    Error::Parse {
        file: file.into(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(start: f64, end: f64) -> FirstLevelHeader {
        FirstLevelHeader {
            schema_version: FIRST_LEVEL_SCHEMA_VERSION,
            scenario_hash: "abc".into(),
            geometry: BaselineGeometry::default(),
            snr_threshold_db: 8.5,
            pulse_likelihood_floor: -1.6,
            mjd_start: start,
            mjd_end: end,
        }
    }

    fn ev(mjd: f64, f: f64) -> PulseEvent {
        PulseEvent {
            mjd,
            rf_frequency_hz: f,
            snr_east_db: 8.7,
            snr_west_db: -3.25,
            composite_snr_db: 8.7,
            ew_phase_rad: -0.123_456_789_012,
            p954_east_db: 0.01,
            p954_west_db: -0.02,
            p50m_east_db: 0.0003,
            p50m_west_db: 1e-5,
            rfi_margin_hit: false,
            edge_of_window: true,
        }
    }

    fn round_trip(file: &FirstLevelFile) -> Result<FirstLevelFile> {
        let mut buf = Vec::new();
        write_first_level(file, &mut buf).unwrap();
        read_first_level(buf.as_slice(), "mem")
    }

    #[test]
    fn empty_file_round_trips() {
        let f = FirstLevelFile {
            header: header(60000.0, 60000.0 + 4.0 / 24.0),
            events: vec![],
        };
        assert_eq!(round_trip(&f).unwrap(), f);
    }

    #[test]
    fn events_round_trip_bit_exact() {
        let f = FirstLevelFile {
            header: header(60000.0, 60000.1),
            events: vec![ev(60000.01, 1_400_000_123.456), ev(60000.05, 1_433_333_333.3)],
        };
        assert_eq!(round_trip(&f).unwrap(), f);
    }

    #[test]
    fn long_span_rejected() {
        let f = FirstLevelFile {
            header: header(60000.0, 60000.0 + 4.5 / 24.0),
            events: vec![],
        };
        assert_eq!(round_trip(&f).unwrap_err().class(), "header");
    }

    #[test]
    fn schema_mismatch_rejected() {
        let mut f = FirstLevelFile {
            header: header(60000.0, 60000.1),
            events: vec![],
        };
        f.header.schema_version = 7;
        let err = round_trip(&f).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 7, .. }));
    }

    #[test]
    fn malformed_row_is_positioned() {
        let f = FirstLevelFile {
            header: header(60000.0, 60000.1),
            events: vec![ev(60000.01, 1.4e9), ev(60000.02, 1.4e9)],
        };
        let mut buf = Vec::new();
        write_first_level(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("1400000000", "14OOOOOOOO", 2);
        match read_first_level(text.as_bytes(), "bad.csv").unwrap_err() {
            Error::Parse { line, file, .. } => {
                assert_eq!(file, "bad.csv");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_order_rows_rejected() {
        let f = FirstLevelFile {
            header: header(60000.0, 60000.1),
            events: vec![ev(60000.05, 1.4e9), ev(60000.01, 1.4e9)],
        };
        assert_eq!(round_trip(&f).unwrap_err().class(), "time-order");
    }

    #[test]
    fn pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let pair = PulsePair {
            id: 42,
            first: ev(60000.01, 1.40e9),
            second: ev(60000.01, 1.401e9),
            delta_f_hz: 1e6,
            measured_pair_phase_rad: 0.25,
            corrected_pair_phase_rad: -0.265,
            pair_likelihood: -0.5,
            ra_bin: 700,
            mjd: 60000.01,
        };
        write_pairs(std::slice::from_ref(&pair), &path).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), vec![pair]);
    }

    #[test]
    fn coverage_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coverage.csv");
        let binning = RaBinning::default();
        let mut cov = Coverage::new(binning);
        cov.record_frame(60000.2, 5.0);
        cov.record_frame(60000.2, 5.001);
        cov.record_frame(60001.2, 7.0);
        write_coverage(&cov, &path).unwrap();
        assert_eq!(read_coverage(&path, binning).unwrap(), cov);
    }

    #[test]
    fn hash_is_stable() {
        let a = content_hash(&BaselineGeometry::default()).unwrap();
        assert_eq!(a, content_hash(&BaselineGeometry::default()).unwrap());
        assert_eq!(a.len(), 64);
        assert_ne!(a, content_hash(&BaselineGeometry::default().with_declination(0.0)).unwrap());
    }
}
