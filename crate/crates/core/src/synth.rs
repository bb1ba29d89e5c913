//! Synthetic corpora with planted stimulus-response effects.
//!
//! Each video gets annotation frames whose textual and visualization
//! changes occur independently per bin, and a population of sessions that
//! watch forward from the start. Background pauses, rewinds, skips and
//! dropouts happen at uniform random positions. A planted effect makes a
//! session react to a change of one modality with a given probability,
//! uniformly within a lag of up to `max_lag_bins` bins.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::Action;
use crate::complexity::{
    class_labels, AnnotationFrame, Modality, ModalityFilter, VideoAnnotations, VisualObject,
    ANNOTATION_SCHEMA_VERSION,
};
use crate::ingest::{self, EventKind, InteractionEvent, Session};
use crate::rng::{derive_seed, stream_rng};
use crate::series::DEFAULT_BIN_WIDTH;

pub const SYNTH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_schema() -> u32 {
    SYNTH_SCHEMA_VERSION
}
fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}
fn default_max_lag() -> usize {
    2
}

/// Background behavior, as per-session per-bin probabilities unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub pause_rate: f64,
    #[serde(default)]
    pub rewind_rate: f64,
    #[serde(default)]
    pub skip_rate: f64,
    /// Probability that a session is abandoned at a uniform position.
    #[serde(default)]
    pub dropout_probability: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            pause_rate: 0.02,
            rewind_rate: 0.005,
            skip_rate: 0.005,
            dropout_probability: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectSpec {
    pub action: Action,
    pub modality: ModalityFilter,
    /// Chance that a session reacts to one change of `modality`.
    pub probability: f64,
    #[serde(default = "default_max_lag")]
    pub max_lag_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSpec {
    pub id: String,
    pub duration_s: f64,
    pub sessions: usize,
    /// Probability of a textual change frame in each bin.
    pub textual_rate: f64,
    /// Probability of a visualization change frame in each bin.
    pub infovis_rate: f64,
    /// Fraction of sessions that never start playback.
    #[serde(default)]
    pub no_play_fraction: f64,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub effects: Vec<EffectSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default = "default_bin_width")]
    pub bin_width_s: f64,
    pub videos: Vec<VideoSpec>,
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: SynthSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.schema_version != SYNTH_SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if !(self.bin_width_s > 0.0 && self.bin_width_s.is_finite()) {
            return bad("bin_width_s must be positive".into());
        }
        if self.videos.is_empty() {
            return bad("no videos".into());
        }
        let mut ids: Vec<&str> = self.videos.iter().map(|v| v.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate video id".into());
        }
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        for v in &self.videos {
            if v.id.is_empty() || v.id.contains([',', '/', '\\']) {
                return bad(format!("video id `{}` is not usable as a file name", v.id));
            }
            if !(v.duration_s > 2.0 * self.bin_width_s && v.duration_s.is_finite()) {
                return bad(format!("video {}: duration must exceed two bins", v.id));
            }
            let rates = [
                v.textual_rate,
                v.infovis_rate,
                v.no_play_fraction,
                v.noise.pause_rate,
                v.noise.rewind_rate,
                v.noise.skip_rate,
                v.noise.dropout_probability,
            ];
            if !rates.into_iter().all(prob) {
                return bad(format!("video {}: rates must lie in [0, 1]", v.id));
            }
            for e in &v.effects {
                if !prob(e.probability) {
                    return bad(format!("video {}: effect probability outside [0, 1]", v.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    pub duration_s: f64,
    pub sessions: usize,
    pub textual_changes: usize,
    pub infovis_changes: usize,
    pub effects: Vec<EffectSpec>,
}

/// An (action, modality) pair the generator planted an effect for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub action: Action,
    pub modality: ModalityFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub seed: u64,
    pub bin_width_s: f64,
    pub videos: Vec<VideoManifest>,
    /// Effects planted in every video; these are the expected findings.
    pub planted: Vec<PlantedEffect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub sessions: Vec<Session>,
    pub annotations: Vec<VideoAnnotations>,
    pub manifest: Manifest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Change {
    t: f64,
    modality: Modality,
}

fn stimulus_changes(v: &VideoSpec, w: f64, rng: &mut ChaCha8Rng) -> Vec<Change> {
    let bins = (v.duration_s / w).ceil() as usize;
    let mut changes = Vec::new();
    for b in 0..bins {
        let start = b as f64 * w;
        let end = (start + w).min(v.duration_s);
        for (modality, rate) in [(Modality::Textual, v.textual_rate), (Modality::InfoVis, v.infovis_rate)] {
            if rng.random::<f64>() < rate {
                changes.push(Change {
                    t: rng.random_range(start..end),
                    modality,
                });
            }
        }
    }
    changes.sort_by(|a, b| a.t.total_cmp(&b.t));
    changes
}

fn annotation_frames(changes: &[Change], rng: &mut ChaCha8Rng) -> Vec<AnnotationFrame> {
    // id 0 is a presenter box present throughout; its class is outside both modalities
    let presenter = VisualObject {
        id: 0,
        class_label: "Speaker".into(),
        bbox: [1600.0, 700.0, 300.0, 380.0],
    };
    let mut scene: Vec<VisualObject> = Vec::new();
    let mut next_id = 1u64;
    let mut frames: Vec<AnnotationFrame> = Vec::new();
    for c in changes {
        if rng.random::<f64>() < 0.3 {
            scene.retain(|o| crate::complexity::classify_modality(&o.class_label) != c.modality);
        }
        let labels = class_labels(c.modality);
        for _ in 0..rng.random_range(1..=3) {
            scene.push(VisualObject {
                id: next_id,
                class_label: labels[rng.random_range(0..labels.len())].to_string(),
                bbox: [
                    rng.random_range(0.0..1500.0f64).round(),
                    rng.random_range(0.0..900.0f64).round(),
                    rng.random_range(40.0..400.0f64).round(),
                    rng.random_range(20.0..200.0f64).round(),
                ],
            });
            next_id += 1;
        }
        let mut objects = vec![presenter.clone()];
        objects.extend(scene.iter().cloned());
        // two changes at the same instant share a frame
        match frames.last_mut() {
            Some(last) if last.timestamp >= c.t => last.objects = objects,
            _ => frames.push(AnnotationFrame {
                timestamp: c.t,
                objects,
            }),
        }
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Planned {
    Pause,
    Rewind,
    Skip,
}

fn simulate_session(
    v: &VideoSpec,
    w: f64,
    changes: &[Change],
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Session {
    let session_id = format!("{}-s{index:05}", v.id);
    let d = v.duration_s;
    let mut wall: i64 = rng.random_range(0..86_400_000);
    let mut events = Vec::new();
    let mut emit = |wall: i64, kind: EventKind, position: f64| {
        events.push(InteractionEvent {
            wall_time_ms: wall,
            kind,
            position,
        })
    };

    if rng.random::<f64>() < v.no_play_fraction {
        emit(wall, EventKind::Pause, 0.0);
        return Session {
            session_id,
            video_id: v.id.clone(),
            events,
        };
    }

    let bins = (d / w).ceil() as usize;
    let latest = (d - w).max(0.0);
    let mut plan: Vec<(f64, Planned)> = Vec::new();
    let mut dropout = (rng.random::<f64>() < v.noise.dropout_probability)
        .then(|| rng.random_range(0.0..latest));
    for b in 0..bins {
        let start = b as f64 * w;
        let end = (start + w).min(d);
        for (kind, rate) in [
            (Planned::Pause, v.noise.pause_rate),
            (Planned::Rewind, v.noise.rewind_rate),
            (Planned::Skip, v.noise.skip_rate),
        ] {
            if rng.random::<f64>() < rate {
                plan.push((rng.random_range(start..end), kind));
            }
        }
    }
    for effect in &v.effects {
        for c in changes.iter().filter(|c| effect.modality.admits(c.modality)) {
            if rng.random::<f64>() >= effect.probability {
                continue;
            }
            let lag = effect.max_lag_bins as f64 * w;
            let at = c.t + if lag > 0.0 { rng.random_range(0.0..lag) } else { 0.0 };
            match effect.action {
                Action::Pause if at < d => plan.push((at, Planned::Pause)),
                Action::Rewind if at < d => plan.push((at, Planned::Rewind)),
                Action::Skip if at < d => plan.push((at, Planned::Skip)),
                Action::Dropout if at < latest => {
                    dropout = Some(dropout.map_or(at, |x: f64| x.min(at)));
                }
                _ => {}
            }
        }
    }
    plan.sort_by(|a, b| a.0.total_cmp(&b.0));

    let advance = |wall: &mut i64, from: f64, to: f64| {
        *wall += ((to - from).max(0.0) * 1000.0).round() as i64 + 1;
    };
    let mut pos = 0.0;
    emit(wall, EventKind::Play, 0.0);
    for (at, kind) in plan {
        if at < pos {
            continue;
        }
        if let Some(x) = dropout {
            if x < pos {
                dropout = None;
            } else if x < at {
                break;
            }
        }
        advance(&mut wall, pos, at);
        match kind {
            Planned::Pause => {
                emit(wall, EventKind::Pause, at);
                wall += rng.random_range(1_000..30_000);
                emit(wall, EventKind::Play, at);
                pos = at;
            }
            Planned::Rewind => {
                let to = (at - rng.random_range(5.0..30.0)).max(0.0);
                emit(wall, EventKind::Seek { to }, at);
                pos = to;
            }
            Planned::Skip => {
                let to = (at + rng.random_range(5.0..30.0)).min(d - 0.5);
                if to <= at {
                    pos = at;
                    continue;
                }
                emit(wall, EventKind::Seek { to }, at);
                pos = to;
            }
        }
    }
    match dropout {
        Some(x) if x >= pos => {
            advance(&mut wall, pos, x);
            emit(wall, EventKind::Pause, x);
        }
        _ => {
            advance(&mut wall, pos, d);
            emit(wall, EventKind::End, d);
        }
    }
    Session {
        session_id,
        video_id: v.id.clone(),
        events,
    }
}

/// Generates sessions, annotations and a manifest. Identical inputs give
/// identical output.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let w = spec.bin_width_s;
    let mut sessions = Vec::new();
    let mut annotations = Vec::new();
    let mut videos = Vec::new();
    for v in &spec.videos {
        let mut rng = stream_rng(derive_seed(seed, &[&v.id, "stimulus"]), 0);
        let changes = stimulus_changes(v, w, &mut rng);
        let frames = annotation_frames(&changes, &mut rng);
        annotations.push(VideoAnnotations {
            schema_version: ANNOTATION_SCHEMA_VERSION,
            video_id: v.id.clone(),
            duration_s: Some(v.duration_s),
            frames,
        });
        let session_seed = derive_seed(seed, &[&v.id, "sessions"]);
        for k in 0..v.sessions {
            let mut rng = stream_rng(session_seed, k as u64);
            sessions.push(simulate_session(v, w, &changes, k, &mut rng));
        }
        let count = |m: Modality| changes.iter().filter(|c| c.modality == m).count();
        videos.push(VideoManifest {
            video_id: v.id.clone(),
            duration_s: v.duration_s,
            sessions: v.sessions,
            textual_changes: count(Modality::Textual),
            infovis_changes: count(Modality::InfoVis),
            effects: v.effects.clone(),
        });
    }
    let mut planted: Vec<PlantedEffect> = spec.videos[0]
        .effects
        .iter()
        .filter(|e| e.probability > 0.0)
        .map(|e| PlantedEffect {
            action: e.action,
            modality: e.modality,
        })
        .filter(|p| {
            spec.videos.iter().all(|v| {
                v.effects
                    .iter()
                    .any(|e| e.probability > 0.0 && e.action == p.action && e.modality == p.modality)
            })
        })
        .collect();
    planted.sort();
    planted.dedup();
    Ok(SynthOutput {
        sessions,
        annotations,
        manifest: Manifest {
            schema_version: SYNTH_SCHEMA_VERSION,
            seed,
            bin_width_s: w,
            videos,
            planted,
        },
    })
}

/// Writes `sessions.csv`, `annotations/<video>.json`, `manifest.json` and a
/// ready-to-run `analyze.toml` into `dir`.
pub fn write_synth(output: &SynthOutput, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir.join("annotations"))?;
    let file = fs::File::create(dir.join("sessions.csv"))?;
    ingest::write_session_log(&output.sessions, std::io::BufWriter::new(file))?;
    for ann in &output.annotations {
        let text = serde_json::to_string_pretty(ann)? + "\n";
        fs::write(dir.join("annotations").join(format!("{}.json", ann.video_id)), text)?;
    }
    let manifest = serde_json::to_string_pretty(&output.manifest)? + "\n";
    fs::write(dir.join("manifest.json"), manifest)?;
    let config = format!(
        "schema_version = 1\nsessions = \"sessions.csv\"\nannotations = [\"annotations\"]\n\
         output_dir = \"out\"\nbin_width = {:?}\nseed = {}\n",
        output.manifest.bin_width_s, output.manifest.seed
    );
    fs::write(dir.join("analyze.toml"), config)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{bin_count, trim_edges, BinSeries, SeriesMeta, SeriesAction};

    fn spec(effects: Vec<EffectSpec>) -> SynthSpec {
        SynthSpec {
            schema_version: 1,
            bin_width_s: 5.0,
            videos: vec![VideoSpec {
                id: "v1".into(),
                duration_s: 120.0,
                sessions: 40,
                textual_rate: 0.3,
                infovis_rate: 0.2,
                no_play_fraction: 0.1,
                noise: NoiseSpec::default(),
                effects,
            }],
        }
    }

    #[test]
    fn deterministic() {
        let s = spec(vec![]);
        assert_eq!(synth_generate(&s, 5).unwrap(), synth_generate(&s, 5).unwrap());
        assert_ne!(
            synth_generate(&s, 5).unwrap().sessions,
            synth_generate(&s, 6).unwrap().sessions
        );
    }

    #[test]
    fn sessions_are_well_formed() {
        let out = synth_generate(
            &spec(vec![EffectSpec {
                action: Action::Pause,
                modality: ModalityFilter::Textual,
                probability: 0.6,
                max_lag_bins: 2,
            }]),
            1,
        )
        .unwrap();
        assert_eq!(out.sessions.len(), 40);
        for s in &out.sessions {
            assert!(s.events.windows(2).all(|w| w[0].wall_time_ms < w[1].wall_time_ms));
            for e in &s.events {
                assert!((0.0..=120.0).contains(&e.position));
                assert!((0.0..=120.0).contains(&e.resulting_position()));
            }
            if s.has_play() {
                let (_, bad) = crate::series::playing_intervals(s);
                assert_eq!(bad, 0, "{s:?}");
            }
        }
        let (kept, report) = ingest::clean_sessions(out.sessions.clone());
        assert!(report.removed > 0);
        assert!(kept.iter().all(Session::has_play));
        assert_eq!(
            out.manifest.planted,
            vec![PlantedEffect { action: Action::Pause, modality: ModalityFilter::Textual }]
        );
        // round trip through the on-disk format
        let mut buf = Vec::new();
        ingest::write_session_log(&out.sessions, &mut buf).unwrap();
        assert_eq!(ingest::parse_session_log(buf.as_slice()).unwrap(), out.sessions);
    }

    #[test]
    fn sixty_second_video_gives_eight_analysis_bins() {
        let n = bin_count(60.0, 5.0).unwrap();
        let s = BinSeries {
            video_id: "v".into(),
            bin_width: 5.0,
            values: vec![0.0; n],
            meta: SeriesMeta::response(SeriesAction::Pause),
        };
        assert_eq!(trim_edges(&s, 2).unwrap().len(), 8);
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(vec![]);
        s.videos[0].textual_rate = 1.5;
        assert!(matches!(synth_generate(&s, 0), Err(SynthError::InvalidSpec(_))));
        let mut s = spec(vec![]);
        s.videos.push(s.videos[0].clone());
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        assert!(SynthSpec::from_toml("videos = []").is_err());
        assert!(SynthSpec::from_toml("bogus = 1\nvideos = []").is_err());
    }
}
