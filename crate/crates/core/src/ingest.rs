//! Measurement parsing and rasterization onto the angular grid.
//!
//! Input files are UTF-8 text. The first non-comment line is a header naming
//! the columns `time`, `az`, `el`, `dbm` (any order, case-insensitive, extra
//! columns ignored); `#` starts a comment line; fields are separated by a
//! comma or by runs of whitespace. Angles are degrees, levels dBm.
//!
//! Rasterization bins each record to its nearest pixel and averages whatever
//! lands on the same pixel. Per-pixel sums go through the exact accumulator,
//! so the result is bitwise independent of record order; the mean is clamped
//! into the hull of the binned values to keep the boundedness guarantee even
//! when the final rounding would escape it by an ulp.

use std::io::BufRead;

use thiserror::Error;

use crate::field::{InpaintingMask, SignalField};
use crate::grid::{AngularGrid, PixelIndex};
use crate::reduce::ReproAcc;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("i/o error reading records: {0}")]
    Io(#[from] std::io::Error),
    #[error("no header line found")]
    MissingHeader,
    #[error("header is missing the required column `{0}`")]
    MissingColumn(&'static str),
    #[error("header names the column `{0}` more than once")]
    DuplicateColumn(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("power must be strictly positive to convert to dBm, got {0} mW")]
    NonPositivePower(f64),
}

/// One timestamped antenna sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementRecord {
    /// Seconds; epoch or contact-relative, the pipeline only carries it.
    pub timestamp: f64,
    /// Degrees in [0, 360).
    pub azimuth_deg: f64,
    /// Degrees in [0, 90].
    pub elevation_deg: f64,
    pub level_dbm: f64,
}

/// A line that could not be turned into a record, with its 1-based line
/// number. Collected, never silently dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Good records plus the diagnostics for the lines that failed.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<MeasurementRecord>,
    pub line_errors: Vec<LineError>,
}

/// Converts a power in milliwatts to a level in dBm.
pub fn power_to_dbm(power_mw: f64) -> Result<f64, IngestError> {
    if !power_mw.is_finite() || power_mw <= 0.0 {
        return Err(IngestError::NonPositivePower(power_mw));
    }
    Ok(10.0 * power_mw.log10())
}

const REQUIRED: [&str; 4] = ["time", "az", "el", "dbm"];

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses records in file order. Malformed data lines become [`LineError`]s;
/// a missing or unusable header fails the whole stream.
pub fn parse_records<R: BufRead>(reader: R) -> Result<ParseOutcome, ParseError> {
    let mut columns: Option<[usize; 4]> = None;
    let mut outcome = ParseOutcome::default();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);

        let cols = match &columns {
            Some(c) => c,
            None => {
                let mut map = [usize::MAX; 4];
                for (pos, name) in fields.iter().enumerate() {
                    let lower = name.to_ascii_lowercase();
                    if let Some(slot) = REQUIRED.iter().position(|&r| r == lower) {
                        if map[slot] != usize::MAX {
                            return Err(ParseError::DuplicateColumn(lower));
                        }
                        map[slot] = pos;
                    }
                }
                for (slot, name) in REQUIRED.iter().enumerate() {
                    if map[slot] == usize::MAX {
                        return Err(ParseError::MissingColumn(name));
                    }
                }
                columns = Some(map);
                continue;
            }
        };

        let get = |slot: usize, name: &str| -> Result<f64, String> {
            let pos = cols[slot];
            let raw = fields
                .get(pos)
                .ok_or_else(|| format!("missing field `{name}` (column {})", pos + 1))?;
            raw.parse::<f64>()
                .map_err(|_| format!("cannot parse `{raw}` as a number for `{name}`"))
        };

        let parsed = (|| -> Result<MeasurementRecord, String> {
            let timestamp = get(0, "time")?;
            let azimuth_deg = get(1, "az")?;
            let elevation_deg = get(2, "el")?;
            let level_dbm = get(3, "dbm")?;
            if !timestamp.is_finite() {
                return Err(format!("time {timestamp} is not finite"));
            }
            if !(0.0..360.0).contains(&azimuth_deg) {
                return Err(format!("azimuth {azimuth_deg} is outside [0, 360)"));
            }
            if !(0.0..=90.0).contains(&elevation_deg) {
                return Err(format!("elevation {elevation_deg} is outside [0, 90]"));
            }
            if !level_dbm.is_finite() {
                return Err(format!("level {level_dbm} dBm is not finite"));
            }
            Ok(MeasurementRecord {
                timestamp,
                azimuth_deg,
                elevation_deg,
                level_dbm,
            })
        })();

        match parsed {
            Ok(r) => outcome.records.push(r),
            Err(message) => outcome.line_errors.push(LineError { line: line_no, message }),
        }
    }

    if columns.is_none() {
        return Err(ParseError::MissingHeader);
    }
    Ok(outcome)
}

/// Nearest-pixel binning: azimuth rounds and wraps, elevation rounds and
/// clamps to the zenith row.
pub fn bin_record(grid: &AngularGrid, r: &MeasurementRecord) -> PixelIndex {
    let az_spacing = 360.0 / grid.width() as f64;
    let el_spacing = 90.0 / (grid.height() - 1) as f64;
    let col = (r.azimuth_deg / az_spacing).round() as usize % grid.width();
    let row = ((r.elevation_deg / el_spacing).round() as usize).min(grid.height() - 1);
    PixelIndex::new(row, col)
}

/// Streaming per-pixel running sums and sample counts.
#[derive(Debug, Clone)]
pub struct Accumulator {
    grid: AngularGrid,
    sum: Vec<f64>,
    count: Vec<u32>,
}

impl Accumulator {
    pub fn new(grid: AngularGrid) -> Self {
        Self {
            grid,
            sum: vec![0.0; grid.len()],
            count: vec![0; grid.len()],
        }
    }

    pub fn add(&mut self, p: PixelIndex, level_dbm: f64) {
        let i = self.grid.linear(p);
        self.sum[i] += level_dbm;
        self.count[i] += 1;
    }

    pub fn add_record(&mut self, r: &MeasurementRecord) {
        self.add(bin_record(&self.grid, r), r.level_dbm);
    }

    pub fn counts(&self) -> &[u32] {
        &self.count
    }

    /// Field of running means (`sum / count` where hit, 0 elsewhere) and the
    /// mask of hit pixels.
    pub fn finalize(self) -> (SignalField, InpaintingMask) {
        let mut values = vec![0.0; self.grid.len()];
        let mut known = vec![false; self.grid.len()];
        for i in 0..self.grid.len() {
            if self.count[i] > 0 {
                values[i] = self.sum[i] / self.count[i] as f64;
                known[i] = true;
            }
        }
        (
            SignalField::from_values(self.grid, values).expect("sized above"),
            InpaintingMask::from_flags(self.grid, known).expect("sized above"),
        )
    }
}

/// Per-pixel sample statistics of one rasterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterStats {
    pub record_count: usize,
    pub known_pixels: usize,
    pub min_samples: u32,
    pub max_samples: u32,
    pub mean_samples: f64,
}

/// Bins all records and averages overlaps. Unknown pixels hold 0. The output
/// is bitwise independent of the record order.
pub fn rasterize(grid: AngularGrid, records: &[MeasurementRecord]) -> (SignalField, InpaintingMask) {
    let (field, mask, _) = rasterize_with_stats(grid, records);
    (field, mask)
}

/// [`rasterize`] plus overlap statistics.
pub fn rasterize_with_stats(
    grid: AngularGrid,
    records: &[MeasurementRecord],
) -> (SignalField, InpaintingMask, RasterStats) {
    let n = grid.len();
    let mut count = vec![0u32; n];
    let mut pixel_of = Vec::with_capacity(records.len());
    for r in records {
        let i = grid.linear(bin_record(&grid, r));
        count[i] += 1;
        pixel_of.push(i);
    }

    // Group the levels by pixel with a counting scatter.
    let mut offset = vec![0usize; n + 1];
    for i in 0..n {
        offset[i + 1] = offset[i] + count[i] as usize;
    }
    let mut grouped = vec![0.0f64; records.len()];
    let mut cursor = offset.clone();
    for (r, &i) in records.iter().zip(&pixel_of) {
        grouped[cursor[i]] = r.level_dbm;
        cursor[i] += 1;
    }

    let mut values = vec![0.0; n];
    let mut known = vec![false; n];
    let mut known_pixels = 0usize;
    let mut min_samples = u32::MAX;
    let mut max_samples = 0u32;
    for i in 0..n {
        let c = count[i];
        if c == 0 {
            continue;
        }
        let samples = &grouped[offset[i]..offset[i + 1]];
        let mut acc = ReproAcc::new();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in samples {
            acc.add(v);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        values[i] = (acc.round() / c as f64).clamp(lo, hi);
        known[i] = true;
        known_pixels += 1;
        min_samples = min_samples.min(c);
        max_samples = max_samples.max(c);
    }

    let stats = RasterStats {
        record_count: records.len(),
        known_pixels,
        min_samples: if known_pixels == 0 { 0 } else { min_samples },
        max_samples,
        mean_samples: if known_pixels == 0 {
            0.0
        } else {
            records.len() as f64 / known_pixels as f64
        },
    };
    (
        SignalField::from_values(grid, values).expect("sized above"),
        InpaintingMask::from_flags(grid, known).expect("sized above"),
        stats,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn record(az: f64, el: f64, dbm: f64) -> MeasurementRecord {
        MeasurementRecord {
            timestamp: 0.0,
            azimuth_deg: az,
            elevation_deg: el,
            level_dbm: dbm,
        }
    }

    #[test]
    fn dbm_conversion() {
        assert_eq!(power_to_dbm(1.0).unwrap(), 0.0);
        assert_eq!(power_to_dbm(100.0).unwrap(), 20.0);
        assert!((power_to_dbm(0.5).unwrap() - (-3.0102999566398120)).abs() < 1e-12);
        assert_eq!(power_to_dbm(0.0).unwrap_err(), IngestError::NonPositivePower(0.0));
        assert!(power_to_dbm(-1.0).is_err());
        assert!(power_to_dbm(f64::NAN).is_err());
    }

    #[test]
    fn parses_the_canonical_format() {
        let text = "time,az,el,dbm\n39120,180.0,45.0,-95.5\n";
        let out = parse_records(Cursor::new(text)).unwrap();
        assert!(out.line_errors.is_empty());
        assert_eq!(
            out.records,
            vec![MeasurementRecord {
                timestamp: 39120.0,
                azimuth_deg: 180.0,
                elevation_deg: 45.0,
                level_dbm: -95.5,
            }]
        );
    }

    #[test]
    fn header_only_is_an_empty_success() {
        let out = parse_records(Cursor::new("time,az,el,dbm\n")).unwrap();
        assert!(out.records.is_empty());
        assert!(out.line_errors.is_empty());
    }

    #[test]
    fn out_of_range_elevation_names_the_line() {
        let text = "time,az,el,dbm\n1,10.0,95.0,-90.0\n2,10.0,45.0,-90.0\n";
        let out = parse_records(Cursor::new(text)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.line_errors.len(), 1);
        assert_eq!(out.line_errors[0].line, 2);
        assert!(out.line_errors[0].message.contains("elevation"));
    }

    #[test]
    fn missing_column_is_a_format_error() {
        let err = parse_records(Cursor::new("time,az,el\n")).unwrap_err();
        assert!(matches!(err, ParseError::MissingColumn("dbm")));
        let err = parse_records(Cursor::new("")).unwrap_err();
        assert!(matches!(err, ParseError::MissingHeader));
    }

    #[test]
    fn accepts_whitespace_comments_and_extra_columns() {
        let text = "# contact 10439\n\nel  dbm  az  time  extra\n45.0 -95.5 180.0 39120 junk\n# trailing comment\n";
        let out = parse_records(Cursor::new(text)).unwrap();
        assert!(out.line_errors.is_empty(), "{:?}", out.line_errors);
        assert_eq!(out.records[0].azimuth_deg, 180.0);
        assert_eq!(out.records[0].level_dbm, -95.5);
    }

    #[test]
    fn unparseable_numbers_are_line_errors() {
        let text = "time,az,el,dbm\nx,10.0,45.0,-90.0\n1,10.0,45.0\n";
        let out = parse_records(Cursor::new(text)).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.line_errors.len(), 2);
        assert!(out.line_errors[0].message.contains("cannot parse"));
        assert!(out.line_errors[1].message.contains("missing field"));
    }

    #[test]
    fn binning_examples() {
        let big = AngularGrid::new(3600, 901).unwrap();
        assert_eq!(bin_record(&big, &record(359.97, 0.0, -90.0)), PixelIndex::new(0, 0));
        assert_eq!(bin_record(&big, &record(180.0, 90.0, -90.0)), PixelIndex::new(900, 1800));
        let small = AngularGrid::new(4, 5).unwrap();
        assert_eq!(bin_record(&small, &record(44.0, 50.0, -90.0)), PixelIndex::new(2, 0));
    }

    #[test]
    fn rasterize_averages_overlaps() {
        let g = AngularGrid::new(4, 5).unwrap();
        let (field, mask) = rasterize(g, &[record(0.0, 0.0, -100.0), record(0.0, 0.0, -90.0)]);
        let p = PixelIndex::new(0, 0);
        assert!(mask.is_known(p));
        assert_eq!(field.at(p), -95.0);
        assert_eq!(mask.count_known(), 1);
    }

    #[test]
    fn rasterize_singleton_and_empty() {
        let g = AngularGrid::new(4, 5).unwrap();
        let (field, mask) = rasterize(g, &[record(90.0, 22.5, -87.25)]);
        assert_eq!(mask.count_known(), 1);
        assert_eq!(field.at(PixelIndex::new(1, 1)), -87.25);
        let (_, empty_mask, stats) = rasterize_with_stats(g, &[]);
        assert_eq!(empty_mask.count_known(), 0);
        assert_eq!(stats.known_pixels, 0);
        assert_eq!(stats.min_samples, 0);
    }

    #[test]
    fn overlap_stats_count_samples() {
        let g = AngularGrid::new(4, 5).unwrap();
        let recs = [
            record(0.0, 0.0, -100.0),
            record(0.0, 0.0, -90.0),
            record(0.0, 0.0, -95.0),
            record(90.0, 45.0, -80.0),
        ];
        let (_, _, stats) = rasterize_with_stats(g, &recs);
        assert_eq!(stats.record_count, 4);
        assert_eq!(stats.known_pixels, 2);
        assert_eq!(stats.min_samples, 1);
        assert_eq!(stats.max_samples, 3);
        assert_eq!(stats.mean_samples, 2.0);
    }

    #[test]
    fn accumulator_matches_its_contract() {
        let g = AngularGrid::new(4, 5).unwrap();
        let mut acc = Accumulator::new(g);
        acc.add(PixelIndex::new(1, 2), -100.0);
        acc.add(PixelIndex::new(1, 2), -90.0);
        assert_eq!(acc.counts()[g.linear(PixelIndex::new(1, 2))], 2);
        let (field, mask) = acc.finalize();
        assert_eq!(field.at(PixelIndex::new(1, 2)), -95.0);
        assert_eq!(mask.count_known(), 1);
    }

    fn arb_record() -> impl Strategy<Value = MeasurementRecord> {
        (0f64..360.0, 0f64..=90.0, -150f64..0.0, 0f64..1e6).prop_map(|(az, el, dbm, t)| {
            MeasurementRecord {
                timestamp: t,
                azimuth_deg: az,
                elevation_deg: el,
                level_dbm: dbm,
            }
        })
    }

    proptest! {
        #[test]
        fn rasterization_is_permutation_invariant(
            mut recs in proptest::collection::vec(arb_record(), 0..60),
            seed in any::<u64>(),
        ) {
            let g = AngularGrid::new(8, 5).unwrap();
            let (f1, m1) = rasterize(g, &recs);
            let mut state = seed | 1;
            for i in (1..recs.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                recs.swap(i, j);
            }
            let (f2, m2) = rasterize(g, &recs);
            prop_assert_eq!(m1, m2);
            for (a, b) in f1.values().iter().zip(f2.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn means_stay_in_the_hull_and_mask_marks_hits(
            recs in proptest::collection::vec(arb_record(), 1..80),
        ) {
            let g = AngularGrid::new(6, 4).unwrap();
            let (field, mask) = rasterize(g, &recs);
            let mut hulls: Vec<Option<(f64, f64)>> = vec![None; g.len()];
            for r in &recs {
                let i = g.linear(bin_record(&g, r));
                let h = hulls[i].get_or_insert((f64::INFINITY, f64::NEG_INFINITY));
                h.0 = h.0.min(r.level_dbm);
                h.1 = h.1.max(r.level_dbm);
            }
            for i in 0..g.len() {
                match hulls[i] {
                    Some((lo, hi)) => {
                        prop_assert!(mask.flags()[i]);
                        prop_assert!(field.values()[i] >= lo && field.values()[i] <= hi);
                    }
                    None => prop_assert!(!mask.flags()[i]),
                }
            }
        }

        #[test]
        fn duplicating_every_record_leaves_means_unchanged(
            recs in proptest::collection::vec(arb_record(), 0..40),
        ) {
            let g = AngularGrid::new(8, 5).unwrap();
            let (f1, m1) = rasterize(g, &recs);
            let doubled: Vec<_> = recs.iter().chain(&recs).copied().collect();
            let (f2, m2) = rasterize(g, &doubled);
            prop_assert_eq!(m1, m2);
            for (a, b) in f1.values().iter().zip(f2.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
