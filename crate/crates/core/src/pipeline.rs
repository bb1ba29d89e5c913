//! Corpus loading and the end-to-end analysis over every cell.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::DEFAULT_WINDOW;
use crate::cell::{Action, Cell};
use crate::complexity::{self, ComplexityError, ModalityFilter, VideoAnnotations};
use crate::ingest::{self, IngestError, Session};
use crate::report::{self, ReportFormat, ReportRow};
use crate::rng::derive_seed;
use crate::series::{
    self, BinSeries, Condition, SeriesAction, SeriesError, SeriesMeta, DEFAULT_BIN_WIDTH,
    DEFAULT_TRIM,
};
use crate::stats::{self, AggregateResult, StatsError, TestResult, DEFAULT_N_BOOT, DEFAULT_N_PERM};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("{path}: {source}")]
    Annotations {
        path: PathBuf,
        source: ComplexityError,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("corpus contains no analyzable video")]
    EmptyCorpus,
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_bin_width() -> f64 {
    DEFAULT_BIN_WIDTH
}
fn default_trim() -> usize {
    DEFAULT_TRIM
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_n_perm() -> usize {
    DEFAULT_N_PERM
}
fn default_n_boot() -> usize {
    DEFAULT_N_BOOT
}
fn default_actions() -> Vec<Action> {
    Action::ALL.to_vec()
}
fn default_modalities() -> Vec<ModalityFilter> {
    ModalityFilter::ALL.to_vec()
}
fn default_conditions() -> Vec<Condition> {
    Condition::ALL.to_vec()
}

/// Analysis parameters, independent of where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisParams {
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_trim")]
    pub trim: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_n_perm")]
    pub n_perm: usize,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_actions")]
    pub actions: Vec<Action>,
    #[serde(default = "default_modalities")]
    pub modalities: Vec<ModalityFilter>,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<Condition>,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub threads: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            bin_width: DEFAULT_BIN_WIDTH,
            trim: DEFAULT_TRIM,
            window: DEFAULT_WINDOW,
            n_perm: DEFAULT_N_PERM,
            n_boot: DEFAULT_N_BOOT,
            seed: 0,
            actions: default_actions(),
            modalities: default_modalities(),
            conditions: default_conditions(),
            threads: 0,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return bad("bin_width must be positive");
        }
        if self.n_perm == 0 || self.n_boot == 0 {
            return bad("n_perm and n_boot must be positive");
        }
        if self.actions.is_empty() || self.modalities.is_empty() || self.conditions.is_empty() {
            return bad("actions, modalities and conditions must be nonempty");
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        Cell::grid(&self.actions, &self.modalities, &self.conditions)
    }
}

/// Contents of an `analyze` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub sessions: PathBuf,
    /// Annotation files, or directories scanned for `*.json`.
    pub annotations: Vec<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Durations in seconds overriding `duration_s` in the annotation files.
    #[serde(default)]
    pub durations: BTreeMap<String, f64>,
    #[serde(flatten)]
    pub params: AnalysisParams,
}

impl RunConfig {
    /// Reads a TOML config; relative paths are taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported schema_version {}",
                config.schema_version
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.sessions);
        config.annotations.iter_mut().for_each(resolve);
        if let Some(out) = config.output_dir.as_mut() {
            resolve(out);
        }
        Ok(config)
    }
}

/// Everything known about one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoData {
    pub video_id: String,
    pub duration: f64,
    pub sessions: Vec<Session>,
    pub annotations: VideoAnnotations,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub videos: Vec<VideoData>,
    pub warnings: Vec<String>,
}

fn annotation_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(path)
                .map_err(io_err(path))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

/// Groups cleaned sessions and annotations by video. Videos lacking either a
/// duration or any retained session are dropped with a warning.
pub fn assemble_corpus(
    sessions: Vec<Session>,
    annotations: Vec<VideoAnnotations>,
    durations: &BTreeMap<String, f64>,
) -> Corpus {
    let mut warnings = Vec::new();
    let (sessions, report) = ingest::clean_sessions(sessions);
    if report.removed > 0 {
        log::info!("removed {} sessions without a play event", report.removed);
    }
    let mut by_video: BTreeMap<String, Vec<Session>> = BTreeMap::new();
    for s in sessions {
        by_video.entry(s.video_id.clone()).or_default().push(s);
    }
    let mut annotations = annotations;
    annotations.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut videos = Vec::new();
    for ann in annotations {
        let Some(duration) = durations.get(&ann.video_id).copied().or(ann.duration_s) else {
            warnings.push(format!("video {}: no duration known, skipped", ann.video_id));
            continue;
        };
        let Some(sessions) = by_video.remove(&ann.video_id) else {
            warnings.push(format!("video {}: no sessions with playback, skipped", ann.video_id));
            continue;
        };
        videos.push(VideoData {
            video_id: ann.video_id.clone(),
            duration,
            sessions,
            annotations: ann,
        });
    }
    for video_id in by_video.keys() {
        warnings.push(format!("video {video_id}: sessions without annotations, skipped"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Corpus { videos, warnings }
}

pub fn load_corpus(config: &RunConfig) -> Result<Corpus, PipelineError> {
    let file = fs::File::open(&config.sessions).map_err(io_err(&config.sessions))?;
    let sessions = ingest::parse_session_log(std::io::BufReader::new(file)).map_err(|source| {
        PipelineError::Ingest {
            path: config.sessions.clone(),
            source,
        }
    })?;
    let mut annotations = Vec::new();
    for path in annotation_files(&config.annotations)? {
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let ann = VideoAnnotations::from_reader(std::io::BufReader::new(file))
            .map_err(|source| PipelineError::Annotations { path, source })?;
        annotations.push(ann);
    }
    Ok(assemble_corpus(sessions, annotations, &config.durations))
}

/// Raw (binned, untrimmed) series of one video.
#[derive(Debug, Clone)]
pub struct VideoSeries {
    pub video_id: String,
    pub active: BinSeries,
    pub responses: BTreeMap<SeriesAction, BinSeries>,
    pub stimuli: BTreeMap<(ModalityFilter, Condition), BinSeries>,
}

#[derive(Debug, Error)]
pub enum VideoError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Complexity(#[from] ComplexityError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub fn video_series(
    video: &VideoData,
    params: &AnalysisParams,
) -> Result<VideoSeries, VideoError> {
    let (id, d, w) = (video.video_id.as_str(), video.duration, params.bin_width);
    let mut events: BTreeMap<SeriesAction, Vec<(&str, f64)>> = BTreeMap::new();
    for s in &video.sessions {
        let sid = s.session_id.as_str();
        let mut push = |a: SeriesAction, t: f64| events.entry(a).or_default().push((sid, t));
        for t in s.pauses() {
            push(SeriesAction::Pause, t);
        }
        for r in s.rewinds() {
            push(SeriesAction::RewindFrom, r.from);
            push(SeriesAction::RewindTo, r.to);
        }
        for k in s.skips() {
            push(SeriesAction::SkipFrom, k.from);
            push(SeriesAction::SkipTo, k.to);
        }
        if let Some(t) = ingest::derive_dropout(s, d, w) {
            push(SeriesAction::Dropout, t);
        }
    }
    let mut responses = BTreeMap::new();
    for action in [
        SeriesAction::Pause,
        SeriesAction::Dropout,
        SeriesAction::RewindFrom,
        SeriesAction::RewindTo,
        SeriesAction::SkipFrom,
        SeriesAction::SkipTo,
    ] {
        let ev = events.remove(&action).unwrap_or_default();
        let series = series::bin_unique_sessions(id, ev, d, w, SeriesMeta::response(action))?;
        responses.insert(action, series);
    }
    let mut stimuli = BTreeMap::new();
    for &modality in &params.modalities {
        let raw = complexity::complexity_events(&video.annotations.frames, &[modality])?;
        for &condition in &params.conditions {
            let ev = match condition {
                Condition::VisCom => raw.clone(),
                Condition::Binary => complexity::binarize(&raw),
            };
            let meta = SeriesMeta::stimulus(modality, condition);
            stimuli.insert((modality, condition), series::bin_complexity(id, &ev, d, w, meta)?);
        }
    }
    Ok(VideoSeries {
        video_id: video.video_id.clone(),
        active: series::active_sessions_per_bin(id, &video.sessions, d, w)?,
        responses,
        stimuli,
    })
}

/// Preprocessed `(stimulus, response)` pair for one cell.
pub fn cell_series(
    raw: &VideoSeries,
    cell: &Cell,
    params: &AnalysisParams,
) -> Result<(BinSeries, BinSeries), SeriesError> {
    let stimulus = &raw.stimuli[&(cell.modality, cell.condition)];
    let response = &raw.responses[&cell.response_action()];
    let stimulus = series::z_normalize(&series::trim_edges(stimulus, params.trim)?)?;
    let active = series::trim_edges(&raw.active, params.trim)?;
    let response = series::trim_edges(response, params.trim)?;
    let response = series::normalize_by_active(&response, &active)?;
    let response = series::detrend_linear(&series::z_normalize(&response)?)?;
    Ok((stimulus, response))
}

pub fn test_seed(master: u64, video_id: &str, cell: &Cell) -> u64 {
    derive_seed(master, &[video_id, &cell.key()])
}

pub fn bootstrap_seed(master: u64, cell: &Cell) -> u64 {
    derive_seed(master, &[&cell.key(), "bootstrap"])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub aggregates: Vec<AggregateResult>,
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

impl PipelineOutput {
    /// Partial when any video or cell had to be left out.
    pub fn is_partial(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Runs every cell over every video of an already loaded corpus.
pub fn analyze_corpus(
    corpus: &Corpus,
    params: &AnalysisParams,
) -> Result<PipelineOutput, PipelineError> {
    params.validate()?;
    if corpus.videos.is_empty() {
        return Err(PipelineError::EmptyCorpus);
    }
    let run = || analyze_inner(corpus, params);
    if params.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(params.threads)
            .build()?
            .install(run)
    } else {
        run()
    }
}

fn analyze_inner(corpus: &Corpus, params: &AnalysisParams) -> Result<PipelineOutput, PipelineError> {
    let mut warnings = corpus.warnings.clone();
    let raw: Vec<Result<VideoSeries, VideoError>> = corpus
        .videos
        .par_iter()
        .map(|v| video_series(v, params))
        .collect();
    let mut prepared = Vec::new();
    for (video, r) in corpus.videos.iter().zip(raw) {
        match r {
            Ok(s) => prepared.push(s),
            Err(e) => warnings.push(format!("video {}: {e}; skipped", video.video_id)),
        }
    }

    let cells = params.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..prepared.len()).map(move |v| (c, v)))
        .collect();
    let outcomes: Vec<Result<TestResult, VideoError>> = jobs
        .par_iter()
        .map(|&(c, v)| {
            let (cell, raw) = (&cells[c], &prepared[v]);
            let (stimulus, response) = cell_series(raw, cell, params)?;
            Ok(stats::permutation_test(
                &raw.video_id,
                &stimulus.values,
                &response.values,
                params.n_perm,
                params.window,
                test_seed(params.seed, &raw.video_id, cell),
            )?)
        })
        .collect();

    let mut per_cell: Vec<Vec<TestResult>> = vec![Vec::new(); cells.len()];
    for (&(c, v), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => per_cell[c].push(r),
            Err(e) => warnings.push(format!(
                "cell {} video {}: {e}; excluded",
                cells[c].key(),
                prepared[v].video_id
            )),
        }
    }

    let mut aggregates = Vec::new();
    for (cell, results) in cells.iter().zip(per_cell) {
        if results.is_empty() {
            warnings.push(format!("cell {}: no video could be tested", cell.key()));
            continue;
        }
        match stats::aggregate(*cell, results, params.n_boot, bootstrap_seed(params.seed, cell)) {
            Ok(a) => aggregates.push(a),
            Err(e) => warnings.push(format!("cell {}: {e}", cell.key())),
        }
    }
    for w in &warnings[corpus.warnings.len()..] {
        log::warn!("{w}");
    }
    let rows = aggregates.iter().map(ReportRow::from).collect();
    Ok(PipelineOutput {
        aggregates,
        rows,
        warnings,
    })
}

/// Loads the corpus named by `config`, analyzes it, and writes artifacts
/// when an output directory is configured.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    config.params.validate()?;
    let corpus = load_corpus(config)?;
    let output = analyze_corpus(&corpus, &config.params)?;
    if let Some(dir) = &config.output_dir {
        write_artifacts(dir, &corpus, &output, &config.params)?;
    }
    Ok(output)
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Writes the report in all formats, full per-video results, and the
/// preprocessed series of every cell.
pub fn write_artifacts(
    dir: &Path,
    corpus: &Corpus,
    output: &PipelineOutput,
    params: &AnalysisParams,
) -> Result<(), PipelineError> {
    for (format, name) in [
        (ReportFormat::Json, "report.json"),
        (ReportFormat::Csv, "report.csv"),
        (ReportFormat::Markdown, "report.md"),
    ] {
        write_file(&dir.join(name), &report::emit_report(&output.rows, format))?;
    }
    let results = serde_json::to_string_pretty(&serde_json::json!({
        "schema_version": report::REPORT_SCHEMA_VERSION,
        "cells": output.aggregates,
    }))?;
    write_file(&dir.join("results.json"), &(results + "\n"))?;
    for video in &corpus.videos {
        let Ok(raw) = video_series(video, params) else {
            continue;
        };
        for cell in params.cells() {
            let Ok((stimulus, response)) = cell_series(&raw, &cell, params) else {
                continue;
            };
            let mut csv = String::from("bin,stimulus,response\n");
            for (k, (s, r)) in stimulus.values.iter().zip(&response.values).enumerate() {
                csv.push_str(&format!("{},{s},{r}\n", k + params.trim));
            }
            let path = dir
                .join("series")
                .join(&video.video_id)
                .join(format!("{}.csv", cell.key()));
            write_file(&path, &csv)?;
        }
    }
    Ok(())
}
