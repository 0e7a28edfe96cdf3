//! Timestamped heart-rate series, their two-column CSV form, and
//! nearest-neighbor alignment of an estimate series against a reference.

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("csv line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("timestamps must be strictly increasing (line {line})")]
    NonMonotonic { line: usize },
    #[error("bpm {bpm} outside (0, 300) at line {line}")]
    BpmOutOfRange { bpm: f64, line: usize },
    #[error("series is empty")]
    Empty,
    #[error("no estimate falls within the alignment tolerance of the reference")]
    NoOverlap,
    #[error("io error: {0}")]
    Io(String),
}

/// A sequence of (timestamp_s, bpm) points with strictly increasing
/// timestamps and bpm in (0, 300).
#[derive(Debug, Clone, PartialEq)]
pub struct HrSeries {
    points: Vec<(f64, f64)>,
}

impl HrSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, SeriesError> {
        if points.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (i, &(t, bpm)) in points.iter().enumerate() {
            if !(bpm > 0.0 && bpm < 300.0) {
                return Err(SeriesError::BpmOutOfRange { bpm, line: i + 1 });
            }
            if !t.is_finite() || (i > 0 && t <= points[i - 1].0) {
                return Err(SeriesError::NonMonotonic { line: i + 1 });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Two-column CSV with a `timestamp_s,bpm` header. Values use the
    /// shortest representation that round-trips.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("timestamp_s,bpm\n");
        for &(t, bpm) in &self.points {
            out.push_str(&format!("{t},{bpm}\n"));
        }
        out
    }

    /// Parse the two-column CSV; the header line is optional.
    pub fn from_csv_str(text: &str) -> Result<Self, SeriesError> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 && line.starts_with("timestamp_s") {
                continue;
            }
            let (t_str, bpm_str) = line.split_once(',').ok_or_else(|| SeriesError::Parse {
                line: line_no,
                msg: "expected two comma-separated columns".into(),
            })?;
            let parse = |v: &str| -> Result<f64, SeriesError> {
                v.trim().parse().map_err(|_| SeriesError::Parse {
                    line: line_no,
                    msg: format!("invalid number `{}`", v.trim()),
                })
            };
            let t = parse(t_str)?;
            let bpm = parse(bpm_str)?;
            if !(bpm > 0.0 && bpm < 300.0) {
                return Err(SeriesError::BpmOutOfRange { bpm, line: line_no });
            }
            if let Some(&(prev, _)) = points.last() {
                if !t.is_finite() || t <= prev {
                    return Err(SeriesError::NonMonotonic { line: line_no });
                }
            } else if !t.is_finite() {
                return Err(SeriesError::NonMonotonic { line: line_no });
            }
            points.push((t, bpm));
        }
        Self::new(points)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SeriesError> {
        fs::write(path, self.to_csv_string()).map_err(|e| SeriesError::Io(e.to_string()))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, SeriesError> {
        let text = fs::read_to_string(path).map_err(|e| SeriesError::Io(e.to_string()))?;
        Self::from_csv_str(&text)
    }
}

/// Result of aligning an estimate series against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Aligned {
    /// (estimate_bpm, reference_bpm) pairs, in estimate order.
    pub pairs: Vec<(f64, f64)>,
    /// Estimates with no reference within the tolerance.
    pub dropped: usize,
}

/// Pair each estimate with the reference value nearest in time, within
/// `max_dt_s` (typically half the stride). Unpaired estimates are dropped
/// and counted.
pub fn align(est: &HrSeries, reference: &HrSeries, max_dt_s: f64) -> Result<Aligned, SeriesError> {
    let ref_points = reference.points();
    let mut pairs = Vec::new();
    let mut dropped = 0usize;
    for &(t, bpm) in est.points() {
        let idx = ref_points.partition_point(|&(rt, _)| rt < t);
        let mut best: Option<(f64, f64)> = None;
        for cand in [idx.wrapping_sub(1), idx] {
            if let Some(&(rt, rbpm)) = ref_points.get(cand) {
                let dt = (rt - t).abs();
                if dt <= max_dt_s && best.map_or(true, |(bdt, _)| dt < bdt) {
                    best = Some((dt, rbpm));
                }
            }
        }
        match best {
            Some((_, rbpm)) => pairs.push((bpm, rbpm)),
            None => dropped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(SeriesError::NoOverlap);
    }
    Ok(Aligned { pairs, dropped })
}
