//! Fixed-width bin series and the preprocessing applied to them.
//!
//! Per video and per analysis cell the pipeline runs
//! bin → trim edges → normalize by active sessions (responses) →
//! z-normalize → detrend (responses).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complexity::{ComplexityEvent, ModalityFilter};
use crate::ingest::{EventKind, Session};

pub const DEFAULT_BIN_WIDTH: f64 = 5.0;
pub const DEFAULT_TRIM: usize = 2;

/// Below this population standard deviation a series is treated as constant.
pub const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("event at {time} s lies outside [0, {duration}] s")]
    EventOutOfRange { time: f64, duration: f64 },
    #[error("series of length {len} is too short (need at least {min})")]
    SeriesTooShort { len: usize, min: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bin width and duration must be positive and finite")]
    InvalidGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Stimulus,
    Response,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeriesAction {
    Pause,
    Dropout,
    RewindFrom,
    RewindTo,
    SkipFrom,
    SkipTo,
    Complexity,
    /// Denominator series for active-session normalization.
    ActiveSessions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    Binary,
    VisCom,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Binary, Condition::VisCom];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    Binned,
    Trimmed { bins: usize },
    ActiveNormalized,
    ZNormalized { degenerate: bool },
    Detrended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub role: Role,
    pub action: SeriesAction,
    pub modality: Option<ModalityFilter>,
    pub condition: Option<Condition>,
    pub stages: Vec<Stage>,
}

impl SeriesMeta {
    pub fn response(action: SeriesAction) -> Self {
        Self {
            role: Role::Response,
            action,
            modality: None,
            condition: None,
            stages: Vec::new(),
        }
    }

    pub fn stimulus(modality: ModalityFilter, condition: Condition) -> Self {
        Self {
            role: Role::Stimulus,
            action: SeriesAction::Complexity,
            modality: Some(modality),
            condition: Some(condition),
            stages: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSeries {
    pub video_id: String,
    pub bin_width: f64,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl BinSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True once z-normalization found the series constant.
    pub fn is_degenerate(&self) -> bool {
        self.meta
            .stages
            .iter()
            .any(|s| matches!(s, Stage::ZNormalized { degenerate: true }))
    }

    fn with_values(&self, values: Vec<f64>, stage: Stage) -> Self {
        let mut meta = self.meta.clone();
        meta.stages.push(stage);
        Self {
            video_id: self.video_id.clone(),
            bin_width: self.bin_width,
            values,
            meta,
        }
    }
}

/// Number of bins covering `[0, duration]`, the last one possibly partial.
pub fn bin_count(duration: f64, bin_width: f64) -> Result<usize, SeriesError> {
    if !(bin_width > 0.0 && bin_width.is_finite() && duration > 0.0 && duration.is_finite()) {
        return Err(SeriesError::InvalidGrid);
    }
    Ok((duration / bin_width).ceil() as usize)
}

/// Bin index of `time`; `time == duration` falls into the last bin.
fn bin_index(time: f64, duration: f64, bin_width: f64, n: usize) -> Result<usize, SeriesError> {
    if !(0.0..=duration).contains(&time) {
        return Err(SeriesError::EventOutOfRange { time, duration });
    }
    Ok(((time / bin_width).floor() as usize).min(n - 1))
}

/// Counts distinct sessions with at least one event in each bin.
pub fn bin_unique_sessions<'a, I>(
    video_id: &str,
    events: I,
    duration: f64,
    bin_width: f64,
    meta: SeriesMeta,
) -> Result<BinSeries, SeriesError>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let n = bin_count(duration, bin_width)?;
    let mut hits: Vec<(usize, &str)> = Vec::new();
    for (session, time) in events {
        hits.push((bin_index(time, duration, bin_width, n)?, session));
    }
    hits.sort_unstable();
    hits.dedup();
    let mut values = vec![0.0; n];
    for (bin, _) in hits {
        values[bin] += 1.0;
    }
    let mut meta = meta;
    meta.stages.push(Stage::Binned);
    Ok(BinSeries {
        video_id: video_id.to_string(),
        bin_width,
        values,
        meta,
    })
}

/// Sums complexity counts per bin.
pub fn bin_complexity(
    video_id: &str,
    events: &[ComplexityEvent],
    duration: f64,
    bin_width: f64,
    meta: SeriesMeta,
) -> Result<BinSeries, SeriesError> {
    let n = bin_count(duration, bin_width)?;
    let mut values = vec![0.0; n];
    for e in events {
        values[bin_index(e.timestamp, duration, bin_width, n)?] += f64::from(e.count);
    }
    let mut meta = meta;
    meta.stages.push(Stage::Binned);
    Ok(BinSeries {
        video_id: video_id.to_string(),
        bin_width,
        values,
        meta,
    })
}

/// A reconstructed stretch of playback `[start, end)` in video time.
/// `start == end` marks playback that was open when the log ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayInterval {
    pub start: f64,
    pub end: f64,
}

/// Rebuilds playing intervals from a time-ordered event list. Returns the
/// intervals and the number of events that did not fit the play/pause state
/// machine (for example a pause while already paused).
pub fn playing_intervals(session: &Session) -> (Vec<PlayInterval>, usize) {
    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    let mut inconsistent = 0;
    let close = |start: f64, end: f64, out: &mut Vec<PlayInterval>| {
        let (start, end) = if end < start { (end, start) } else { (start, end) };
        out.push(PlayInterval { start, end });
    };
    for event in &session.events {
        match event.kind {
            EventKind::Play => {
                if let Some(start) = open {
                    close(start, event.position, &mut intervals);
                }
                open = Some(event.position);
            }
            EventKind::Pause | EventKind::End => match open.take() {
                Some(start) => close(start, event.position, &mut intervals),
                None => inconsistent += 1,
            },
            EventKind::Seek { to } => {
                if let Some(start) = open {
                    close(start, event.position, &mut intervals);
                    open = Some(to);
                }
            }
        }
    }
    if let Some(start) = open {
        intervals.push(PlayInterval { start, end: start });
    }
    (intervals, inconsistent)
}

/// Counts, per bin, the sessions whose playback touches that bin.
pub fn active_sessions_per_bin(
    video_id: &str,
    sessions: &[Session],
    duration: f64,
    bin_width: f64,
) -> Result<BinSeries, SeriesError> {
    let n = bin_count(duration, bin_width)?;
    let mut values = vec![0.0; n];
    let mut active = vec![false; n];
    for session in sessions {
        let (intervals, inconsistent) = playing_intervals(session);
        if inconsistent > 0 {
            log::debug!(
                "session {} on {}: {inconsistent} events out of play/pause order",
                session.session_id,
                session.video_id
            );
        }
        active.iter_mut().for_each(|a| *a = false);
        for iv in intervals {
            let first = bin_index(iv.start, duration, bin_width, n)?;
            let last = if iv.end > iv.start {
                bin_index(iv.end, duration, bin_width, n)?;
                // half-open: an interval ending exactly on a boundary stops short of the next bin
                (((iv.end / bin_width).ceil() as usize).saturating_sub(1)).min(n - 1)
            } else {
                first
            };
            for a in &mut active[first..=last.max(first)] {
                *a = true;
            }
        }
        for (v, &a) in values.iter_mut().zip(&active) {
            if a {
                *v += 1.0;
            }
        }
    }
    Ok(BinSeries {
        video_id: video_id.to_string(),
        bin_width,
        values,
        meta: SeriesMeta {
            role: Role::Response,
            action: SeriesAction::ActiveSessions,
            modality: None,
            condition: None,
            stages: vec![Stage::Binned],
        },
    })
}

/// Removes `n` bins from each end.
pub fn trim_edges(series: &BinSeries, n: usize) -> Result<BinSeries, SeriesError> {
    if series.len() <= 2 * n {
        return Err(SeriesError::SeriesTooShort {
            len: series.len(),
            min: 2 * n + 1,
        });
    }
    let values = series.values[n..series.len() - n].to_vec();
    Ok(series.with_values(values, Stage::Trimmed { bins: n }))
}

/// Divides each response bin by the number of active sessions in it; bins
/// without active sessions become 0.
pub fn normalize_by_active(
    response: &BinSeries,
    active: &BinSeries,
) -> Result<BinSeries, SeriesError> {
    if response.len() != active.len() {
        return Err(SeriesError::LengthMismatch(response.len(), active.len()));
    }
    let values = response
        .values
        .iter()
        .zip(&active.values)
        .map(|(&r, &a)| if a > 0.0 { r / a } else { 0.0 })
        .collect();
    Ok(response.with_values(values, Stage::ActiveNormalized))
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Standardizes to zero mean and unit population standard deviation. A
/// constant series maps to all zeros and is flagged degenerate.
pub fn z_normalize(series: &BinSeries) -> Result<BinSeries, SeriesError> {
    if series.len() < 2 {
        return Err(SeriesError::SeriesTooShort {
            len: series.len(),
            min: 2,
        });
    }
    let (mean, std) = mean_std(&series.values);
    if std < DEGENERATE_STD {
        let zeros = vec![0.0; series.len()];
        return Ok(series.with_values(zeros, Stage::ZNormalized { degenerate: true }));
    }
    let values = series.values.iter().map(|v| (v - mean) / std).collect();
    Ok(series.with_values(values, Stage::ZNormalized { degenerate: false }))
}

/// Subtracts the least-squares line through `(index, value)`.
pub fn detrend_linear(series: &BinSeries) -> Result<BinSeries, SeriesError> {
    if series.len() < 2 {
        return Err(SeriesError::SeriesTooShort {
            len: series.len(),
            min: 2,
        });
    }
    Ok(series.with_values(detrend_values(&series.values), Stage::Detrended))
}

fn detrend_values(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    values
        .iter()
        .enumerate()
        .map(|(i, &y)| y - (y_mean + slope * (i as f64 - x_mean)))
        .collect()
}
