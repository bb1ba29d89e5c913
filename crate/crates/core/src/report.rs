//! Report rows and their CSV, JSON and Markdown renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cell::{Action, TimeRole};
use crate::complexity::ModalityFilter;
use crate::series::Condition;
use crate::stats::{AggregateResult, ALPHA};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub action: Action,
    pub time_role: TimeRole,
    pub modality: ModalityFilter,
    pub condition: Condition,
    pub p: f64,
    pub pes: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub significant: bool,
    pub n_videos: usize,
}

impl From<&AggregateResult> for ReportRow {
    fn from(a: &AggregateResult) -> Self {
        Self {
            action: a.cell.action,
            time_role: a.cell.time_role,
            modality: a.cell.modality,
            condition: a.cell.condition,
            p: a.fisher_p,
            pes: a.mean_pes,
            ci_lo: a.ci.0,
            ci_hi: a.ci.1,
            significant: a.significant,
            n_videos: a.per_video.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Json => emit_json(rows),
        ReportFormat::Markdown => emit_markdown(rows),
    }
}

pub fn parse_report_json(text: &str) -> Result<Vec<ReportRow>, serde_json::Error> {
    let report: Report = serde_json::from_str(text)?;
    Ok(report.rows)
}

fn emit_json(rows: &[ReportRow]) -> String {
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        rows: rows.to_vec(),
    };
    // rows hold only plain data; serialization cannot fail
    serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
}

fn emit_csv(rows: &[ReportRow]) -> String {
    let mut out =
        String::from("action,time_role,modality,condition,p,pes,ci_lo,ci_hi,significant,n_videos\n");
    for r in rows {
        let condition = match r.condition {
            Condition::Binary => "Binary",
            Condition::VisCom => "VisCom",
        };
        let role = match r.time_role {
            TimeRole::None => "n/a",
            other => other.label(),
        };
        let _ = writeln!(
            out,
            "{},{role},{},{condition},{},{},{},{},{},{}",
            r.action, r.modality, r.p, r.pes, r.ci_lo, r.ci_hi, r.significant, r.n_videos
        );
    }
    out
}

fn markdown_cells(row: Option<&ReportRow>) -> [String; 3] {
    let Some(r) = row else {
        return ["".into(), "".into(), "".into()];
    };
    let p = format!("{:.3}", r.p);
    let pes = format!("{:.2}", r.pes);
    let ci = format!("[{:.2}, {:.2}]", r.ci_lo, r.ci_hi);
    if r.significant {
        [format!("**<u>{p}</u>**"), format!("**<u>{pes}</u>**"), ci]
    } else if r.p < ALPHA {
        [format!("**{p}**"), pes, ci]
    } else {
        [p, pes, ci]
    }
}

/// One line per (action, time, modality) with Binary and VisCom column
/// blocks. Bold marks p < 0.05; bold and underlined marks cells that are
/// jointly significant.
fn emit_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str("| action | time | mod | Binary p | Binary PES | Binary CI | VisCom p | VisCom PES | VisCom CI |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    let mut lines: BTreeMap<(Action, TimeRole, ModalityFilter), [Option<&ReportRow>; 2]> =
        BTreeMap::new();
    for r in rows {
        let slot = lines.entry((r.action, r.time_role, r.modality)).or_default();
        let k = match r.condition {
            Condition::Binary => 0,
            Condition::VisCom => 1,
        };
        slot[k] = Some(r);
    }
    let mut previous: Option<(Action, TimeRole)> = None;
    for ((action, role, modality), [binary, viscom]) in lines {
        let (a, t) = match previous {
            Some((pa, pt)) if pa == action && pt == role => (String::new(), String::new()),
            Some((pa, _)) if pa == action => (String::new(), role.label().to_string()),
            _ => (action.to_string(), role.label().to_string()),
        };
        previous = Some((action, role));
        let [bp, bpes, bci] = markdown_cells(binary);
        let [vp, vpes, vci] = markdown_cells(viscom);
        let _ = writeln!(
            out,
            "| {a} | {t} | {modality} | {bp} | {bpes} | {bci} | {vp} | {vpes} | {vci} |"
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(action: Action, role: TimeRole, m: ModalityFilter, c: Condition, p: f64) -> ReportRow {
        ReportRow {
            action,
            time_role: role,
            modality: m,
            condition: c,
            p,
            pes: 0.891_234,
            ci_lo: 0.39,
            ci_hi: 1.28,
            significant: p < 0.05,
            n_videos: 3,
        }
    }

    #[test]
    fn markdown_marks_significance() {
        let rows = vec![row(Action::Pause, TimeRole::None, ModalityFilter::Textual, Condition::VisCom, 0.0002)];
        let md = emit_report(&rows, ReportFormat::Markdown);
        assert!(md.contains("| pause |  | T |  |  |  | **<u>0.000</u>** | **<u>0.89</u>** | [0.39, 1.28] |"), "{md}");
    }

    #[test]
    fn markdown_bold_without_ci() {
        let mut r = row(Action::Skip, TimeRole::To, ModalityFilter::InfoVis, Condition::Binary, 0.014);
        r.significant = false;
        let md = emit_report(&[r], ReportFormat::Markdown);
        assert!(md.contains("| skip | to | V | **0.014** | 0.89 |"), "{md}");
    }

    #[test]
    fn markdown_groups_lines() {
        let rows: Vec<_> = [TimeRole::From, TimeRole::To]
            .into_iter()
            .flat_map(|t| {
                ModalityFilter::ALL.into_iter().flat_map(move |m| {
                    Condition::ALL.into_iter().map(move |c| row(Action::Rewind, t, m, c, 0.5))
                })
            })
            .collect();
        let md = emit_report(&rows, ReportFormat::Markdown);
        let body: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(body.len(), 6);
        assert!(body[0].starts_with("| rewind | from | T |"));
        assert!(body[1].starts_with("|  |  | V |"));
        assert!(body[3].starts_with("|  | to | T |"));
    }

    #[test]
    fn empty_reports_are_header_only() {
        assert_eq!(emit_report(&[], ReportFormat::Markdown).lines().count(), 2);
        assert_eq!(emit_report(&[], ReportFormat::Csv).lines().count(), 1);
        assert!(parse_report_json(&emit_report(&[], ReportFormat::Json)).unwrap().is_empty());
    }

    #[test]
    fn csv_full_precision() {
        let rows = vec![row(Action::Dropout, TimeRole::None, ModalityFilter::Both, Condition::Binary, 0.123_456_789_012_345)];
        let csv = emit_report(&rows, ReportFormat::Csv);
        assert!(csv.contains("dropout,n/a,T+V,Binary,0.123456789012345,0.891234,0.39,1.28,false,3"), "{csv}");
    }

    proptest! {
        #[test]
        fn json_round_trip(p in 1e-6f64..1.0, pes in -5.0f64..5.0, lo in -5.0f64..0.0, hi in 0.0f64..5.0, sig: bool) {
            let rows = vec![ReportRow {
                action: Action::Skip,
                time_role: TimeRole::From,
                modality: ModalityFilter::Both,
                condition: Condition::VisCom,
                p, pes, ci_lo: lo, ci_hi: hi, significant: sig, n_videos: 25,
            }];
            let back = parse_report_json(&emit_report(&rows, ReportFormat::Json)).unwrap();
            prop_assert_eq!(back, rows);
        }
    }
}
