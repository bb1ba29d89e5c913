//! Session log parsing and cleaning.
//!
//! The log format is a CSV file with the header
//! `session_id,video_id,wall_time_ms,kind,position_s[,seek_to_s]` where
//! `kind` is one of `play`, `pause`, `seek`, `end`. A seek row carries its
//! source position in `position_s` and its target in `seek_to_s`.

use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LOG_HEADER: [&str; 6] = [
    "session_id",
    "video_id",
    "wall_time_ms",
    "kind",
    "position_s",
    "seek_to_s",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("line {line}: negative playback position {value}")]
    NegativePosition { line: u64, value: f64 },
    #[error("line {line}: unknown event kind `{kind}`")]
    UnknownEventKind { line: u64, kind: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Play,
    Pause,
    /// Seek from `position` to `to`.
    Seek { to: f64 },
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub wall_time_ms: i64,
    #[serde(flatten)]
    pub kind: EventKind,
    /// Video time in seconds. For seeks this is the source position.
    pub position: f64,
}

impl InteractionEvent {
    /// Playback position once the event has taken effect.
    pub fn resulting_position(&self) -> f64 {
        match self.kind {
            EventKind::Seek { to } => to,
            _ => self.position,
        }
    }
}

/// A seek split into its two ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeekSpan {
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub video_id: String,
    pub events: Vec<InteractionEvent>,
}

impl Session {
    pub fn has_play(&self) -> bool {
        self.events.iter().any(|e| e.kind == EventKind::Play)
    }

    fn seeks(&self) -> impl Iterator<Item = SeekSpan> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Seek { to } => Some(SeekSpan {
                from: e.position,
                to,
            }),
            _ => None,
        })
    }

    /// Backward seeks.
    pub fn rewinds(&self) -> Vec<SeekSpan> {
        self.seeks().filter(|s| s.to < s.from).collect()
    }

    /// Forward seeks.
    pub fn skips(&self) -> Vec<SeekSpan> {
        self.seeks().filter(|s| s.to > s.from).collect()
    }

    pub fn pauses(&self) -> impl Iterator<Item = f64> + '_ {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Pause)
            .map(|e| e.position)
    }

    pub fn max_position(&self) -> f64 {
        self.events
            .iter()
            .flat_map(|e| [e.position, e.resulting_position()])
            .fold(0.0, f64::max)
    }
}

fn parse_position(line: u64, raw: &str, field: &str) -> Result<f64, IngestError> {
    let value: f64 = raw.trim().parse().map_err(|_| IngestError::MalformedRecord {
        line,
        reason: format!("{field} `{raw}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(IngestError::MalformedRecord {
            line,
            reason: format!("{field} `{raw}` is not finite"),
        });
    }
    if value < 0.0 {
        return Err(IngestError::NegativePosition { line, value });
    }
    Ok(value)
}

/// Parses a session log into one [`Session`] per `(session_id, video_id)`
/// pair, in order of first appearance. Events are stably sorted by wall
/// time. Seeks whose target equals their source are dropped.
pub fn parse_session_log<R: Read>(input: R) -> Result<Vec<Session>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);

    let mut groups: IndexMap<(String, String), Vec<InteractionEvent>> = IndexMap::new();
    let mut saw_header = false;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if !saw_header {
            saw_header = true;
            if record.get(0) == Some(LOG_HEADER[0]) {
                let expected = &LOG_HEADER[..record.len().min(6)];
                if record.len() < 5 || record.iter().ne(expected.iter().copied()) {
                    return Err(IngestError::MalformedRecord {
                        line,
                        reason: "unexpected header".into(),
                    });
                }
                continue;
            }
        }
        if record.len() < 5 || record.len() > 6 {
            return Err(IngestError::MalformedRecord {
                line,
                reason: format!("expected 5 or 6 fields, found {}", record.len()),
            });
        }
        let session_id = record[0].to_string();
        let video_id = record[1].to_string();
        if session_id.is_empty() || video_id.is_empty() {
            return Err(IngestError::MalformedRecord {
                line,
                reason: "empty session_id or video_id".into(),
            });
        }
        let wall_time_ms: i64 = record[2].parse().map_err(|_| IngestError::MalformedRecord {
            line,
            reason: format!("wall_time_ms `{}` is not an integer", &record[2]),
        })?;
        let position = parse_position(line, &record[4], "position_s")?;
        let seek_to = record.get(5).filter(|s| !s.is_empty());
        let kind = match record[3].to_ascii_lowercase().as_str() {
            "play" => EventKind::Play,
            "pause" => EventKind::Pause,
            "end" => EventKind::End,
            "seek" => {
                let raw = seek_to.ok_or_else(|| IngestError::MalformedRecord {
                    line,
                    reason: "seek without seek_to_s".into(),
                })?;
                EventKind::Seek {
                    to: parse_position(line, raw, "seek_to_s")?,
                }
            }
            other => {
                return Err(IngestError::UnknownEventKind {
                    line,
                    kind: other.to_string(),
                })
            }
        };
        if seek_to.is_some() && !matches!(kind, EventKind::Seek { .. }) {
            return Err(IngestError::MalformedRecord {
                line,
                reason: "seek_to_s set on a non-seek event".into(),
            });
        }
        if let EventKind::Seek { to } = kind {
            if to == position {
                log::debug!("line {line}: dropping no-op seek at {position}");
                continue;
            }
        }
        groups
            .entry((session_id, video_id))
            .or_default()
            .push(InteractionEvent {
                wall_time_ms,
                kind,
                position,
            });
    }

    Ok(groups
        .into_iter()
        .map(|((session_id, video_id), mut events)| {
            events.sort_by_key(|e| e.wall_time_ms);
            Session {
                session_id,
                video_id,
                events,
            }
        })
        .collect())
}

/// Writes sessions in the log format accepted by [`parse_session_log`].
pub fn write_session_log<W: Write>(sessions: &[Session], out: W) -> Result<(), IngestError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(LOG_HEADER)?;
    for session in sessions {
        for event in &session.events {
            let (kind, to) = match event.kind {
                EventKind::Play => ("play", String::new()),
                EventKind::Pause => ("pause", String::new()),
                EventKind::End => ("end", String::new()),
                EventKind::Seek { to } => ("seek", to.to_string()),
            };
            writer.write_record([
                session.session_id.as_str(),
                session.video_id.as_str(),
                &event.wall_time_ms.to_string(),
                kind,
                &event.position.to_string(),
                &to,
            ])?;
        }
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanReport {
    pub retained: usize,
    pub removed: usize,
}

/// Drops sessions that never started playback.
pub fn clean_sessions(sessions: Vec<Session>) -> (Vec<Session>, CleanReport) {
    let before = sessions.len();
    let kept: Vec<Session> = sessions.into_iter().filter(Session::has_play).collect();
    let report = CleanReport {
        retained: kept.len(),
        removed: before - kept.len(),
    };
    (kept, report)
}

/// Position at which a session was abandoned, if it was.
///
/// A session counts as completed when it contains an `End` event or its
/// last known position lies within `bin_width` of the end of the video.
pub fn derive_dropout(session: &Session, duration: f64, bin_width: f64) -> Option<f64> {
    if session.events.iter().any(|e| e.kind == EventKind::End) {
        return None;
    }
    let last = session.events.last()?.resulting_position();
    if last >= duration - bin_width {
        None
    } else {
        Some(last)
    }
}
