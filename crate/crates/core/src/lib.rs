//! Stimulus-response analysis of educational video interaction logs.
//!
//! Session logs and object annotations are turned into per-video bin
//! series, aligned with a causally constrained DTW, and tested for
//! association with a permutation test whose per-video results are combined
//! across videos.

pub mod align;
pub mod cell;
pub mod complexity;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod series;
pub mod stats;
pub mod synth;

pub use align::{constrained_dtw, AlignError, AlignmentResult, BandedDtw};
pub use cell::{Action, Cell, TimeRole};
pub use complexity::{ComplexityEvent, Modality, ModalityFilter, VideoAnnotations};
pub use ingest::{InteractionEvent, Session};
pub use series::{BinSeries, Condition};
pub use stats::{AggregateResult, TestResult};
pub use pipeline::{run_pipeline, AnalysisParams, PipelineOutput, RunConfig};
pub use report::{emit_report, ReportFormat, ReportRow};
pub use synth::{synth_generate, SynthSpec};
