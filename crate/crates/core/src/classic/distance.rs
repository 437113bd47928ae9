//! Point-wise and elastic distances between series.

use crate::error::{Error, Result};

/// Default Sakoe-Chiba band as a fraction of the series length.
pub const DEFAULT_DTW_BAND: f64 = 0.1;

pub fn euclid_dist(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dimension(a.len(), b.len()));
    }
    Ok(squared_euclid(a, b, f64::INFINITY).sqrt())
}

/// Squared distance; stops early once the partial sum exceeds `cutoff`.
pub(crate) fn squared_euclid(a: &[f64], b: &[f64], cutoff: f64) -> f64 {
    let mut acc = 0.0;
    for (chunk_a, chunk_b) in a.chunks(64).zip(b.chunks(64)) {
        for (x, y) in chunk_a.iter().zip(chunk_b) {
            let d = x - y;
            acc += d * d;
        }
        if acc > cutoff {
            return acc;
        }
    }
    acc
}

fn band_radius(n: usize, m: usize, band: Option<f64>) -> Result<usize> {
    let longest = n.max(m);
    let radius = match band {
        None => longest,
        Some(b) if (0.0..=1.0).contains(&b) => (b * longest as f64).floor() as usize,
        Some(b) => return Err(Error::validation(format!("DTW band must lie in [0, 1], got {b}"))),
    };
    Ok(radius.max(n.abs_diff(m)))
}

/// Dynamic time warping with squared point costs, match / insert / delete
/// steps and an optional Sakoe-Chiba band (fraction of the longer length).
pub fn dtw_dist(a: &[f64], b: &[f64], band: Option<f64>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("DTW needs non-empty series"));
    }
    let radius = band_radius(a.len(), b.len(), band)?;
    Ok(squared_dtw(a, b, radius, f64::INFINITY).sqrt())
}

/// Banded squared DTW cost; returns `+inf` once every cell of a row
/// exceeds `cutoff`.
pub(crate) fn squared_dtw(a: &[f64], b: &[f64], radius: usize, cutoff: f64) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        let lo = i.saturating_sub(radius).max(1);
        let hi = (i + radius).min(m);
        cur.fill(f64::INFINITY);
        let mut row_min = f64::INFINITY;
        for j in lo..=hi {
            let d = a[i - 1] - b[j - 1];
            let best = prev[j - 1].min(prev[j]).min(cur[j - 1]);
            let v = d * d + best;
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > cutoff {
            return f64::INFINITY;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m]
}

pub(crate) fn dtw_radius(len: usize, band: Option<f64>) -> Result<usize> {
    band_radius(len, len, band)
}
