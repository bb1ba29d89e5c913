use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use viscom_core::complexity::{self, ModalityFilter, VideoAnnotations};
use viscom_core::ingest;
use viscom_core::pipeline::{self, AnalysisParams, PipelineError, RunConfig};
use viscom_core::report::{self, ReportFormat};
use viscom_core::series::DEFAULT_BIN_WIDTH;
use viscom_core::synth::{self, SynthSpec};
use viscom_core::{align, stats};

const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(name = "viscom", version, about = "Visual complexity vs. viewer interaction analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a session log for one video and summarize it.
    Ingest {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        video: String,
        #[arg(long)]
        duration: f64,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        bin: f64,
    },
    /// Print per-frame complexity events of an annotation file as CSV.
    Complexity {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value = "both")]
        modality: ModalityFilter,
        #[arg(long)]
        binary: bool,
    },
    /// Build and dump the preprocessed series of every cell.
    Series {
        #[arg(long)]
        sessions: PathBuf,
        /// Annotation file or directory of annotation files.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        bin: f64,
        #[arg(long, default_value_t = 2)]
        trim: usize,
        #[arg(long)]
        dump: PathBuf,
    },
    /// Align two series with the constrained DTW and print the result as JSON.
    Dtw {
        #[arg(long)]
        s1: PathBuf,
        #[arg(long)]
        s2: PathBuf,
        #[arg(long, default_value_t = align::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long)]
        emit_path: bool,
        /// Column to read when the files have a header.
        #[arg(long)]
        column: Option<String>,
    },
    /// Permutation test of one stimulus/response pair; prints JSON.
    Test {
        #[arg(long)]
        viscom: PathBuf,
        #[arg(long)]
        userint: PathBuf,
        #[arg(long, default_value_t = stats::DEFAULT_N_PERM)]
        n_perm: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = align::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value = "video")]
        video_id: String,
    },
    /// Run the full analysis described by a config file.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured worker thread count.
        #[arg(long)]
        threads: Option<usize>,
        /// Format printed to stdout.
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
    /// Generate a synthetic corpus with planted effects.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a JSON report in another format.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}

fn print(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Ingest {
            sessions,
            video,
            duration,
            bin,
        } => ingest_summary(&sessions, &video, duration, bin),
        Command::Complexity {
            annotations,
            modality,
            binary,
        } => {
            let ann = read_annotations(&annotations)?;
            let mut events = complexity::complexity_events(&ann.frames, &[modality])?;
            if binary {
                events = complexity::binarize(&events);
            }
            let mut text = String::from("t_s,count\n");
            for e in events {
                text.push_str(&format!("{},{}\n", e.timestamp, e.count));
            }
            print(&text)?;
            Ok(0)
        }
        Command::Series {
            sessions,
            annotations,
            bin,
            trim,
            dump,
        } => dump_series(sessions, annotations, bin, trim, &dump),
        Command::Dtw {
            s1,
            s2,
            window,
            emit_path,
            column,
        } => {
            let s1 = read_series(&s1, column.as_deref())?;
            let s2 = read_series(&s2, column.as_deref())?;
            let r = align::constrained_dtw(&s1, &s2, window)?;
            let mut json = serde_json::json!({
                "total_cost": r.total_cost,
                "terminal_cost": r.terminal_cost,
                "path_length": r.path_length,
                "window": r.window,
            });
            if emit_path {
                json["path"] = serde_json::to_value(&r.path)?;
            }
            print(&(serde_json::to_string_pretty(&json)? + "\n"))?;
            Ok(0)
        }
        Command::Test {
            viscom,
            userint,
            n_perm,
            seed,
            window,
            video_id,
        } => {
            let v = read_series(&viscom, None)?;
            let u = read_series(&userint, None)?;
            let r = stats::permutation_test(&video_id, &v, &u, n_perm, window, seed)?;
            print(&(serde_json::to_string_pretty(&r)? + "\n"))?;
            Ok(0)
        }
        Command::Analyze {
            config,
            threads,
            format,
        } => analyze(&config, threads, format),
        Command::Synth { spec, seed, out } => {
            let text = fs::read_to_string(&spec).with_context(|| spec.display().to_string())?;
            let spec = SynthSpec::from_toml(&text)?;
            let output = synth::synth_generate(&spec, seed)?;
            synth::write_synth(&output, &out)?;
            eprintln!(
                "wrote {} sessions over {} videos to {}",
                output.sessions.len(),
                output.annotations.len(),
                out.display()
            );
            Ok(0)
        }
        Command::Report { input, format } => {
            let text = fs::read_to_string(&input).with_context(|| input.display().to_string())?;
            let rows = report::parse_report_json(&text)?;
            print(&report::emit_report(&rows, format))?;
            Ok(0)
        }
    }
}

fn ingest_summary(path: &Path, video: &str, duration: f64, bin: f64) -> Result<u8> {
    let file = fs::File::open(path).with_context(|| path.display().to_string())?;
    let sessions: Vec<_> = ingest::parse_session_log(BufReader::new(file))?
        .into_iter()
        .filter(|s| s.video_id == video)
        .collect();
    let total = sessions.len();
    let (kept, report) = ingest::clean_sessions(sessions);
    let out_of_range = kept
        .iter()
        .flat_map(|s| &s.events)
        .filter(|e| e.position > duration || e.resulting_position() > duration)
        .count();
    let summary = serde_json::json!({
        "video_id": video,
        "sessions": total,
        "retained": report.retained,
        "removed": report.removed,
        "events": kept.iter().map(|s| s.events.len()).sum::<usize>(),
        "pauses": kept.iter().map(|s| s.pauses().count()).sum::<usize>(),
        "rewinds": kept.iter().map(|s| s.rewinds().len()).sum::<usize>(),
        "skips": kept.iter().map(|s| s.skips().len()).sum::<usize>(),
        "dropouts": kept.iter().filter(|s| ingest::derive_dropout(s, duration, bin).is_some()).count(),
        "events_beyond_duration": out_of_range,
    });
    print(&(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(if out_of_range > 0 { EXIT_PARTIAL } else { 0 })
}

fn read_annotations(path: &Path) -> Result<VideoAnnotations> {
    let file = fs::File::open(path).with_context(|| path.display().to_string())?;
    VideoAnnotations::from_reader(BufReader::new(file)).with_context(|| path.display().to_string())
}

/// Reads numbers from a one-column file, or from `column` of a CSV with a
/// header. Without `column`, a header's last column is used.
fn read_series(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    let first = lines.peek().copied().unwrap_or_default();
    let has_header = first.split(',').any(|f| f.trim().parse::<f64>().is_err());
    let index = if has_header {
        let header: Vec<&str> = first.split(',').map(str::trim).collect();
        lines.next();
        match column {
            Some(name) => header
                .iter()
                .position(|h| *h == name)
                .with_context(|| format!("{}: no column `{name}`", path.display()))?,
            None => header.len() - 1,
        }
    } else {
        0
    };
    let mut values = Vec::new();
    for (k, line) in lines.enumerate() {
        let field = line.split(',').nth(index).map(str::trim).unwrap_or_default();
        let v: f64 = field
            .parse()
            .with_context(|| format!("{}: bad value `{field}` on data row {}", path.display(), k + 1))?;
        values.push(v);
    }
    Ok(values)
}

fn dump_series(sessions: PathBuf, annotations: PathBuf, bin: f64, trim: usize, dump: &Path) -> Result<u8> {
    let config = RunConfig {
        schema_version: pipeline::CONFIG_SCHEMA_VERSION,
        sessions,
        annotations: vec![annotations],
        output_dir: None,
        durations: Default::default(),
        params: AnalysisParams {
            bin_width: bin,
            trim,
            ..AnalysisParams::default()
        },
    };
    let corpus = pipeline::load_corpus(&config)?;
    let params = &config.params;
    let mut partial = !corpus.warnings.is_empty();
    for video in &corpus.videos {
        let raw = match pipeline::video_series(video, params) {
            Ok(raw) => raw,
            Err(e) => {
                log::warn!("video {}: {e}", video.video_id);
                partial = true;
                continue;
            }
        };
        let dir = dump.join(&video.video_id);
        fs::create_dir_all(&dir)?;
        let mut text = String::from("bin,active");
        let mut columns = vec![&raw.active.values];
        for (action, s) in &raw.responses {
            text.push_str(&format!(",{action:?}"));
            columns.push(&s.values);
        }
        for ((modality, condition), s) in &raw.stimuli {
            text.push_str(&format!(",{modality}_{condition:?}"));
            columns.push(&s.values);
        }
        text.push('\n');
        for b in 0..raw.active.len() {
            text.push_str(&b.to_string());
            for c in &columns {
                text.push_str(&format!(",{}", c[b]));
            }
            text.push('\n');
        }
        fs::write(dir.join("raw.csv"), text)?;
        for cell in params.cells() {
            match pipeline::cell_series(&raw, &cell, params) {
                Ok((stimulus, response)) => {
                    let mut text = String::from("bin,stimulus,response\n");
                    for (k, (s, r)) in stimulus.values.iter().zip(&response.values).enumerate() {
                        text.push_str(&format!("{},{s},{r}\n", k + trim));
                    }
                    fs::write(dir.join(format!("{}.csv", cell.key())), text)?;
                }
                Err(e) => {
                    log::warn!("video {} cell {}: {e}", video.video_id, cell.key());
                    partial = true;
                }
            }
        }
    }
    eprintln!("dumped {} videos to {}", corpus.videos.len(), dump.display());
    Ok(if partial { EXIT_PARTIAL } else { 0 })
}

fn analyze(path: &Path, threads: Option<usize>, format: ReportFormat) -> Result<u8> {
    let mut config = RunConfig::from_file(path)?;
    if let Some(t) = threads {
        config.params.threads = t;
    }
    match pipeline::run_pipeline(&config) {
        Ok(output) => {
            print(&report::emit_report(&output.rows, format))?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            Ok(if output.is_partial() { EXIT_PARTIAL } else { 0 })
        }
        Err(PipelineError::EmptyCorpus) => {
            print(&report::emit_report(&[], format))?;
            if let Some(dir) = &config.output_dir {
                fs::create_dir_all(dir)?;
                fs::write(dir.join("report.json"), report::emit_report(&[], ReportFormat::Json))?;
            }
            eprintln!("error: corpus contains no analyzable video");
            Ok(EXIT_FATAL)
        }
        Err(e) => bail!(e),
    }
}
