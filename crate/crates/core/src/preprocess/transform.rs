//! Per-series transforms: bucket-mean resampling, gap interpolation, day
//! slicing and run-length labelling.

use std::collections::BTreeMap;

use chrono::{DateTime, Timelike, Utc};
use log::warn;

use crate::dataio::HouseholdRecord;
use crate::error::{Error, Result};
use crate::series::{Label, TimeSeries};

pub const DAY_S: u32 = 86_400;

/// Downsamples by averaging consecutive buckets of `target / interval`
/// samples. A bucket with any missing input is missing; a trailing partial
/// bucket is dropped.
pub fn resample(series: &TimeSeries, target_interval_s: u32) -> Result<TimeSeries> {
    let from = series.interval_s();
    if target_interval_s < from {
        return Err(Error::validation(format!(
            "cannot upsample from {from}s to {target_interval_s}s"
        )));
    }
    if target_interval_s % from != 0 {
        return Err(Error::validation(format!(
            "target interval {target_interval_s}s is not a multiple of {from}s"
        )));
    }
    let k = (target_interval_s / from) as usize;
    if k == 1 {
        return Ok(series.clone());
    }
    let n = series.len() / k;
    if n == 0 {
        return Err(Error::validation(format!(
            "series of {} samples is shorter than one {target_interval_s}s bucket",
            series.len()
        )));
    }
    if series.len() % k != 0 {
        warn!(
            "{}: dropping {} trailing samples when resampling to {target_interval_s}s",
            series.source_id(),
            series.len() % k
        );
    }
    let values = series.values()[..n * k]
        .chunks_exact(k)
        .map(|bucket| {
            bucket
                .iter()
                .try_fold(0.0, |acc, v| v.map(|v| acc + v))
                .map(|sum| sum / k as f64)
        })
        .collect();
    TimeSeries::new(series.start(), target_interval_s, values, series.source_id())
}

/// Fills every run of missing samples spanning at most `max_gap_s` that has
/// present neighbours on both sides by linear interpolation. Longer runs and
/// runs touching either end stay missing.
pub fn interpolate_gaps(series: &TimeSeries, max_gap_s: u64) -> TimeSeries {
    let mut values = series.values().to_vec();
    let step = series.interval_s() as u64;
    let mut j = 0;
    while j < values.len() {
        if values[j].is_some() {
            j += 1;
            continue;
        }
        let run_start = j;
        while j < values.len() && values[j].is_none() {
            j += 1;
        }
        let run = j - run_start;
        if run_start == 0 || j == values.len() || run as u64 * step > max_gap_s {
            continue;
        }
        let (left, right) = (values[run_start - 1].unwrap(), values[j].unwrap());
        let span = (run + 1) as f64;
        for (offset, v) in values[run_start..j].iter_mut().enumerate() {
            let frac = (offset + 1) as f64 / span;
            *v = Some(left + (right - left) * frac);
        }
    }
    series
        .with_values(values)
        .expect("interpolation between valid readings stays valid")
}

fn seconds_into_day(t: DateTime<Utc>) -> u32 {
    t.num_seconds_from_midnight()
}

/// Complete UTC days of a series: `(first sample index, day start)`.
pub fn day_windows(series: &TimeSeries) -> Result<Vec<(usize, DateTime<Utc>)>> {
    let step = series.interval_s();
    if DAY_S % step != 0 {
        return Err(Error::validation(format!("interval {step}s does not divide one day")));
    }
    let per_day = (DAY_S / step) as usize;
    let offset = seconds_into_day(series.start());
    let skip = if offset == 0 {
        0
    } else if offset % step != 0 {
        return Err(Error::validation(format!(
            "series start {} is not on the {step}s grid",
            series.start()
        )));
    } else {
        ((DAY_S - offset) / step) as usize
    };
    let mut out = Vec::new();
    let mut first = skip;
    while first + per_day <= series.len() {
        out.push((first, series.timestamp(first)));
        first += per_day;
    }
    Ok(out)
}

/// One calendar day of a household.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySlice {
    pub aggregate: TimeSeries,
    pub appliances: BTreeMap<String, TimeSeries>,
}

/// Cuts a record into complete days at its own sampling interval. Days whose
/// aggregate has any missing reading are dropped; appliance days are
/// returned as-is.
pub fn slice_days(record: &HouseholdRecord, interval_s: u32) -> Result<Vec<DaySlice>> {
    let agg = record.aggregate();
    if agg.interval_s() != interval_s {
        return Err(Error::validation(format!(
            "record {} is sampled every {}s, not {interval_s}s",
            record.source_id(),
            agg.interval_s()
        )));
    }
    let per_day = (DAY_S / interval_s.max(1)) as usize;
    let mut out = Vec::new();
    for (first, _) in day_windows(agg)? {
        let day = agg.slice(first, first + per_day)?;
        if day.has_missing() {
            continue;
        }
        let appliances = record
            .appliance_channels()
            .iter()
            .map(|(name, ch)| Ok((name.clone(), ch.slice(first, first + per_day)?)))
            .collect::<Result<_>>()?;
        out.push(DaySlice { aggregate: day, appliances });
    }
    Ok(out)
}

/// `1` iff some run of at least `on_min_samples` consecutive readings all
/// exceed `on_threshold_w`.
pub fn assign_label(appliance: &[f64], on_threshold_w: f64, on_min_samples: usize) -> Label {
    let need = on_min_samples.max(1);
    let mut run = 0;
    for &v in appliance {
        if v > on_threshold_w {
            run += 1;
            if run >= need {
                return 1;
            }
        } else {
            run = 0;
        }
    }
    0
}
