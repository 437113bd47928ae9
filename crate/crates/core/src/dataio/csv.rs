//! The household CSV schema.
//!
//! One UTF-8 file per household, named `<source_id>.csv`, with header
//! `timestamp,aggregate[,<appliance>...]`. Timestamps are ISO-8601 UTC and
//! strictly increasing; values are decimal watts; an empty field is a missing
//! reading. Survey-style datasets add a `survey.csv` sidecar with header
//! `source_id,<appliance>...` and 0/1 cells.
//!
//! Rows are bucketed onto a regular grid at ingestion: sources sampled
//! faster than once a minute are averaged per minute, coarser sources keep
//! their native interval.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;

use super::{HouseholdRecord, BASE_INTERVAL_S, SURVEY_FILE};
use crate::error::{Error, Result};
use crate::series::{Label, TimeSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemaKind {
    /// Appliance ground truth from per-appliance sub-metered channels.
    Nilm,
    /// Appliance ground truth from a per-household questionnaire sidecar.
    Survey,
}

impl std::str::FromStr for SchemaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nilm" => Ok(SchemaKind::Nilm),
            "survey" => Ok(SchemaKind::Survey),
            other => Err(Error::validation(format!("unknown schema kind '{other}'"))),
        }
    }
}

#[derive(Debug)]
struct ParsedFile {
    aggregate: TimeSeries,
    channels: BTreeMap<String, TimeSeries>,
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_value(field: &str, line: usize) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    let v: f64 = field
        .parse()
        .map_err(|_| Error::parse(line, format!("'{field}' is not a decimal number")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::parse(line, format!("'{field}' is not a finite non-negative power value")));
    }
    Ok(Some(v))
}

fn parse_timestamp(field: &str, line: usize) -> Result<i64> {
    DateTime::parse_from_rfc3339(field.trim())
        .map(|t| t.with_timezone(&Utc).timestamp())
        .map_err(|e| Error::parse(line, format!("bad timestamp '{field}': {e}")))
}

fn source_id_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::validation(format!("cannot derive a source id from {}", path.display())))
}

fn parse_household(path: &Path, text: &str, allowed: Option<&BTreeSet<String>>) -> Result<ParsedFile> {
    let source_id = source_id_of(path)?;
    let mut rows = lines(text);
    let (_, header) = rows.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "timestamp" || columns[1] != "aggregate" {
        return Err(Error::parse(1, "header must start with 'timestamp,aggregate'"));
    }
    let appliances: Vec<String> = columns[2..].iter().map(|c| c.to_string()).collect();
    let mut seen = BTreeSet::new();
    for name in &appliances {
        if name.is_empty() || !seen.insert(name) {
            return Err(Error::parse(1, format!("empty or duplicate appliance column '{name}'")));
        }
        if let Some(allowed) = allowed {
            if !allowed.contains(name) {
                return Err(Error::validation(format!(
                    "{}: unknown appliance column '{name}' (not declared in {SURVEY_FILE})",
                    path.display()
                )));
            }
        }
    }

    let width = columns.len();
    let mut stamps: Vec<i64> = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); width - 1];
    for (line, row) in rows {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != width {
            return Err(Error::parse(line, format!("expected {width} fields, found {}", fields.len())));
        }
        let ts = parse_timestamp(fields[0], line)?;
        if let Some(&prev) = stamps.last() {
            if ts <= prev {
                return Err(Error::validation(format!(
                    "{}: line {line}: timestamps must be strictly increasing",
                    path.display()
                )));
            }
        }
        stamps.push(ts);
        for (c, field) in fields[1..].iter().enumerate() {
            cols[c].push(parse_value(field, line)?);
        }
    }
    if stamps.is_empty() {
        return Err(Error::parse(2, "no data rows"));
    }

    let interval = stamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .min()
        .map_or(BASE_INTERVAL_S as i64, |d| d.max(BASE_INTERVAL_S as i64));
    let anchor = stamps[0].div_euclid(interval) * interval;
    let n = ((stamps[stamps.len() - 1] - anchor) / interval + 1) as usize;
    let bucket: Vec<usize> = stamps.iter().map(|&t| ((t - anchor) / interval) as usize).collect();

    let grid = |raw: &[Option<f64>]| -> Vec<Option<f64>> {
        let mut sum = vec![0.0; n];
        let mut count = vec![0u32; n];
        for (&b, v) in bucket.iter().zip(raw) {
            if let Some(v) = v {
                sum[b] += v;
                count[b] += 1;
            }
        }
        sum.into_iter()
            .zip(count)
            .map(|(s, c)| (c > 0).then(|| if c == 1 { s } else { s / c as f64 }))
            .collect()
    };

    let start = DateTime::from_timestamp(anchor, 0)
        .ok_or_else(|| Error::validation("timestamp out of range"))?;
    let interval_s = u32::try_from(interval).map_err(|_| Error::validation("sampling interval too large"))?;
    let aggregate = TimeSeries::new(start, interval_s, grid(&cols[0]), source_id.clone())?;
    let mut channels = BTreeMap::new();
    for (name, raw) in appliances.into_iter().zip(&cols[1..]) {
        channels.insert(name, TimeSeries::new(start, interval_s, grid(raw), source_id.clone())?);
    }
    Ok(ParsedFile { aggregate, channels })
}

fn read_survey(path: &Path) -> Result<(Vec<String>, BTreeMap<String, BTreeMap<String, Label>>)> {
    let text = fs::read_to_string(path)?;
    let mut rows = lines(&text);
    let (_, header) = rows.next().ok_or_else(|| Error::parse(1, "empty survey file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.first() != Some(&"source_id") || columns.len() < 2 {
        return Err(Error::parse(1, "survey header must be 'source_id,<appliance>...'"));
    }
    let appliances: Vec<String> = columns[1..].iter().map(|c| c.to_string()).collect();
    let mut labels = BTreeMap::new();
    for (line, row) in rows {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(line, format!("expected {} fields, found {}", columns.len(), fields.len())));
        }
        let mut house = BTreeMap::new();
        for (name, cell) in appliances.iter().zip(&fields[1..]) {
            let label = match *cell {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::parse(line, format!("survey cell '{other}' is not 0 or 1"))),
            };
            house.insert(name.clone(), label);
        }
        if labels.insert(fields[0].to_string(), house).is_some() {
            return Err(Error::parse(line, format!("duplicate survey row for '{}'", fields[0])));
        }
    }
    Ok((appliances, labels))
}

/// Reads a single household file in NILM form (channels from the header).
pub fn read_household_csv(path: impl AsRef<Path>) -> Result<HouseholdRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let parsed = parse_household(path, &text, None)?;
    HouseholdRecord::new(parsed.aggregate, parsed.channels, BTreeMap::new())
}

/// Reads the aggregate column of a household file, ignoring other columns.
pub(crate) fn read_aggregate_csv(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path)?;
    Ok(parse_household(path, &text, None)?.aggregate)
}

/// Writes a bare `timestamp,aggregate` file.
pub(crate) fn write_aggregate_csv(series: &TimeSeries, path: &Path) -> Result<()> {
    let mut out = String::from("timestamp,aggregate\n");
    for j in 0..series.len() {
        let _ = write!(out, "{},", series.timestamp(j).format("%Y-%m-%dT%H:%M:%SZ"));
        fmt_value(&mut out, series.values()[j]);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn household_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .filter(|p| p.file_name().is_some_and(|n| n != SURVEY_FILE))
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every household of a dataset directory (or a single NILM file).
///
/// Files are parsed in parallel and returned in filename order.
pub fn read_csv_dataset(path: impl AsRef<Path>, schema: SchemaKind) -> Result<Vec<HouseholdRecord>> {
    let path = path.as_ref();
    if path.is_file() {
        return match schema {
            SchemaKind::Nilm => Ok(vec![read_household_csv(path)?]),
            SchemaKind::Survey => Err(Error::validation("survey datasets must be directories")),
        };
    }
    let files = household_files(path)?;
    if files.is_empty() {
        return Err(Error::validation(format!("no household CSV files in {}", path.display())));
    }
    let survey = match schema {
        SchemaKind::Nilm => None,
        SchemaKind::Survey => Some(read_survey(&path.join(SURVEY_FILE))?),
    };
    let allowed: Option<BTreeSet<String>> = survey.as_ref().map(|(a, _)| a.iter().cloned().collect());

    files
        .par_iter()
        .map(|file| {
            let text = fs::read_to_string(file)?;
            let parsed = parse_household(file, &text, allowed.as_ref())?;
            let labels = match &survey {
                None => BTreeMap::new(),
                Some((_, rows)) => rows.get(parsed.aggregate.source_id()).cloned().ok_or_else(|| {
                    Error::validation(format!(
                        "household {} has no row in {SURVEY_FILE}",
                        parsed.aggregate.source_id()
                    ))
                })?,
            };
            HouseholdRecord::new(parsed.aggregate, parsed.channels, labels)
        })
        .collect()
}

fn fmt_value(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        // `Display` for f64 is the shortest text that parses back to the same bits.
        let _ = write!(out, "{v}");
    }
}

/// Writes one household file; every sample becomes a row.
pub fn write_household_csv(record: &HouseholdRecord, path: impl AsRef<Path>) -> Result<()> {
    let agg = record.aggregate();
    let channels: Vec<(&String, &TimeSeries)> = record.appliance_channels().iter().collect();
    let mut out = String::from("timestamp,aggregate");
    for (name, _) in &channels {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..agg.len() {
        let _ = write!(out, "{}", agg.timestamp(j).format("%Y-%m-%dT%H:%M:%SZ"));
        out.push(',');
        fmt_value(&mut out, agg.values()[j]);
        for (_, ch) in &channels {
            out.push(',');
            fmt_value(&mut out, ch.values()[j]);
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes a dataset directory; a survey sidecar is added when records carry
/// survey labels.
pub fn write_dataset(dir: impl AsRef<Path>, records: &[HouseholdRecord]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    records
        .par_iter()
        .try_for_each(|r| write_household_csv(r, dir.join(format!("{}.csv", r.source_id()))))?;

    if records.iter().all(|r| r.survey_labels().is_empty()) {
        return Ok(());
    }
    let names: Vec<&String> = records[0].survey_labels().keys().collect();
    let mut out = String::from("source_id");
    for name in &names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in records {
        if r.survey_labels().keys().collect::<Vec<_>>() != names {
            return Err(Error::validation(format!(
                "household {} has a different survey appliance set",
                r.source_id()
            )));
        }
        out.push_str(r.source_id());
        for l in r.survey_labels().values() {
            let _ = write!(out, ",{l}");
        }
        out.push('\n');
    }
    fs::write(dir.join(SURVEY_FILE), out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ParsedFile> {
        parse_household(Path::new("house_1.csv"), text, None)
    }

    #[test]
    fn direct_parse() {
        let f = parse("timestamp,aggregate,kettle\n2014-01-01T00:00:00Z,230.5,0.0\n").unwrap();
        assert_eq!(f.aggregate.values(), &[Some(230.5)]);
        assert_eq!(f.channels["kettle"].values(), &[Some(0.0)]);
        assert_eq!(f.aggregate.source_id(), "house_1");
    }

    #[test]
    fn empty_fields_are_missing() {
        let f = parse("timestamp,aggregate,kettle\n2014-01-01T00:00:00Z,1,2\n2014-01-01T00:30:00Z,,\n").unwrap();
        assert_eq!(f.aggregate.interval_s(), 1800);
        assert_eq!(f.aggregate.values(), &[Some(1.0), None]);
        assert_eq!(f.channels["kettle"].values(), &[Some(2.0), None]);
    }

    #[test]
    fn non_monotonic_names_the_line() {
        let err = parse(
            "timestamp,aggregate\n2014-01-01T00:00:00Z,1\n2014-01-01T00:30:00Z,1\n2014-01-01T00:29:00Z,1\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("line 4")), "{err}");
    }

    #[test]
    fn malformed_fields_report_line_numbers() {
        let err = parse("timestamp,aggregate\n2014-01-01T00:00:00Z,1\nyesterday,3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("timestamp,aggregate\n2014-01-01T00:00:00Z,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("timestamp,aggregate\n2014-01-01T00:00:00Z,-4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse("time,aggregate\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn fast_sources_are_averaged_per_minute() {
        let mut text = String::from("timestamp,aggregate\n");
        // 8 s readings: 00:00:00 .. 00:01:52, values 0..14
        for i in 0..15 {
            text.push_str(&format!("2014-01-01T00:{:02}:{:02}Z,{i}\n", (i * 8) / 60, (i * 8) % 60));
        }
        let f = parse(&text).unwrap();
        assert_eq!(f.aggregate.interval_s(), 60);
        // minute 0 holds i = 0..=7 (0..56 s), minute 1 holds 8..=14
        assert_eq!(f.aggregate.values(), &[Some(3.5), Some(11.0)]);
    }

    #[test]
    fn gaps_in_rows_become_missing_samples() {
        let f = parse("timestamp,aggregate\n2014-01-01T00:00:00Z,1\n2014-01-01T00:03:00Z,4\n2014-01-01T00:04:00Z,5\n")
            .unwrap();
        assert_eq!(f.aggregate.values(), &[Some(1.0), None, None, Some(4.0), Some(5.0)]);
    }
}
