//! Visual complexity from tracked object annotations.
//!
//! Complexity at a frame is the number of tracking IDs present in that frame
//! but absent from the previous one, restricted to a set of modalities.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ANNOTATION_SCHEMA_VERSION: u32 = 1;

const TEXTUAL_CLASSES: [&str; 6] = [
    "Text Object",
    "Title",
    "Line of Text",
    "Scientific Expressions",
    "Systems of Equations",
    "Terms",
];

const INFOVIS_CLASSES: [&str; 15] = [
    "Information Visualization",
    "Image Object",
    "Informative Image",
    "Technical Drawing",
    "Structural Object",
    "Barchart",
    "Linechart",
    "Scatterplot",
    "Diagram Component",
    "Axis",
    "Data Visualization",
    "Chemical Structure",
    "Table",
    "Row",
    "Column",
];

#[derive(Debug, Error)]
pub enum ComplexityError {
    #[error("frame at {next} s does not follow frame at {prev} s")]
    UnsortedFrames { prev: f64, next: f64 },
    #[error("modality filter is empty")]
    EmptyFilter,
    #[error("tracking id {id} appears twice in the frame at {t} s")]
    DuplicateTrackingId { id: u64, t: f64 },
    #[error("annotation json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported annotation schema_version {0}")]
    SchemaVersion(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    Textual,
    InfoVis,
    Other,
}

pub fn classify_modality(class_label: &str) -> Modality {
    if TEXTUAL_CLASSES.contains(&class_label) {
        Modality::Textual
    } else if INFOVIS_CLASSES.contains(&class_label) {
        Modality::InfoVis
    } else {
        Modality::Other
    }
}

/// Class labels of one modality, in taxonomy order.
pub fn class_labels(modality: Modality) -> &'static [&'static str] {
    match modality {
        Modality::Textual => &TEXTUAL_CLASSES,
        Modality::InfoVis => &INFOVIS_CLASSES,
        Modality::Other => &[],
    }
}

/// The modality groups an analysis series can be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModalityFilter {
    #[serde(rename = "T")]
    Textual,
    #[serde(rename = "V")]
    InfoVis,
    #[serde(rename = "T+V")]
    Both,
}

impl ModalityFilter {
    pub const ALL: [ModalityFilter; 3] = [Self::Textual, Self::InfoVis, Self::Both];

    pub fn admits(self, modality: Modality) -> bool {
        match self {
            Self::Textual => modality == Modality::Textual,
            Self::InfoVis => modality == Modality::InfoVis,
            Self::Both => matches!(modality, Modality::Textual | Modality::InfoVis),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Textual => "T",
            Self::InfoVis => "V",
            Self::Both => "T+V",
        }
    }
}

impl fmt::Display for ModalityFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModalityFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t" | "textual" => Ok(Self::Textual),
            "v" | "infovis" => Ok(Self::InfoVis),
            "t+v" | "both" => Ok(Self::Both),
            other => Err(format!("unknown modality `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualObject {
    pub id: u64,
    #[serde(rename = "class")]
    pub class_label: String,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFrame {
    #[serde(rename = "t_s")]
    pub timestamp: f64,
    pub objects: Vec<VisualObject>,
}

/// Contents of one `annotations.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotations {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    pub frames: Vec<AnnotationFrame>,
}

fn default_schema_version() -> u32 {
    ANNOTATION_SCHEMA_VERSION
}

impl VideoAnnotations {
    pub fn from_reader<R: Read>(input: R) -> Result<Self, ComplexityError> {
        let parsed: Self = serde_json::from_reader(input)?;
        if parsed.schema_version != ANNOTATION_SCHEMA_VERSION {
            return Err(ComplexityError::SchemaVersion(parsed.schema_version));
        }
        validate_frames(&parsed.frames)?;
        Ok(parsed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEvent {
    pub timestamp: f64,
    pub count: u32,
}

fn validate_frames(frames: &[AnnotationFrame]) -> Result<(), ComplexityError> {
    for pair in frames.windows(2) {
        if pair[1].timestamp.partial_cmp(&pair[0].timestamp) != Some(std::cmp::Ordering::Greater) {
            return Err(ComplexityError::UnsortedFrames {
                prev: pair[0].timestamp,
                next: pair[1].timestamp,
            });
        }
    }
    for frame in frames {
        let mut seen = BTreeSet::new();
        for object in &frame.objects {
            if !seen.insert(object.id) {
                return Err(ComplexityError::DuplicateTrackingId {
                    id: object.id,
                    t: frame.timestamp,
                });
            }
        }
    }
    Ok(())
}

/// One event per frame counting tracking IDs that are new relative to the
/// previous frame. Only objects admitted by `filter` take part on either
/// side of the comparison.
pub fn complexity_events(
    frames: &[AnnotationFrame],
    filter: &[ModalityFilter],
) -> Result<Vec<ComplexityEvent>, ComplexityError> {
    if filter.is_empty() {
        return Err(ComplexityError::EmptyFilter);
    }
    validate_frames(frames)?;
    let admitted = |o: &&VisualObject| {
        let m = classify_modality(&o.class_label);
        filter.iter().any(|f| f.admits(m))
    };

    let mut previous: BTreeSet<u64> = BTreeSet::new();
    let mut events = Vec::with_capacity(frames.len());
    for frame in frames {
        let current: BTreeSet<u64> = frame.objects.iter().filter(admitted).map(|o| o.id).collect();
        let count = current.difference(&previous).count() as u32;
        events.push(ComplexityEvent {
            timestamp: frame.timestamp,
            count,
        });
        previous = current;
    }
    Ok(events)
}

pub fn binarize(events: &[ComplexityEvent]) -> Vec<ComplexityEvent> {
    events
        .iter()
        .map(|e| ComplexityEvent {
            timestamp: e.timestamp,
            count: u32::from(e.count >= 1),
        })
        .collect()
}
