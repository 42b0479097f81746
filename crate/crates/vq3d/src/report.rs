//! Rendering of evaluation summaries and registration reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use vq3d_core::evaluation::{percent, EvaluationSummary, MetricThresholds, QueryRow, Space};
use vq3d_core::geometry::rotation_to_wxyz;
use vq3d_core::registration::{Method, RegistrationError, RegistrationReport};
use vq3d_core::{FrameId, SimilarityTransform};

use crate::error::{Error, Location, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

fn space_name(s: Space) -> &'static str {
    match s {
        Space::World => "world",
        Space::QueryFrame => "query_frame",
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn thresholds_line(t: &MetricThresholds) -> String {
    format!("thresholds: l2_max={} m, angle_max={} rad, space={}", t.l2_max, t.angle_max, space_name(t.space))
}

/// Per-query table, then the metric table, then the thresholds used. With no
/// queries both tables are header-only.
pub fn render_text(s: &EvaluationSummary) -> String {
    let mut out = String::new();
    let id_w = s.rows.iter().map(|r| r.query_id.len()).max().unwrap_or(0).max("query_id".len());
    let _ = writeln!(out, "{:<id_w$}  {:>8}  {:>10}  {:>8}  {:>7}", "query_id", "has_pose", "l2", "angle", "success");
    for r in &s.rows {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "{:<id_w$}  {:>8}  {:>10}  {:>8}  {:>7}", r.query_id, r.has_pose, f(r.l2), f(r.angle), r.success);
    }
    out.push('\n');
    let _ = writeln!(out, "{:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>6}", "QwP", "Succ*", "Succ", "L2", "angle", "n");
    if s.n_queries > 0 {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>6}",
            percent(s.qwp),
            percent(s.succ_star),
            percent(s.succ),
            f(s.mean_l2),
            f(s.mean_angle),
            s.n_queries
        );
    }
    out.push('\n');
    out.push_str(&thresholds_line(&s.thresholds));
    out.push_str(" (defaults are placeholders, not challenge values)\n");
    out
}

const CSV_HEADER: &str = "query_id,has_pose,l2,angle,success";

/// A `#` line with the thresholds, then one row per query. Aggregates are
/// recomputed on parse.
pub fn render_csv(s: &EvaluationSummary) -> String {
    let t = &s.thresholds;
    let mut out = format!("# l2_max={},angle_max={},space={}\n", t.l2_max, t.angle_max, space_name(t.space));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("vec write");
    for r in &s.rows {
        w.write_record([r.query_id.clone(), r.has_pose.to_string(), opt(r.l2), opt(r.angle), r.success.to_string()])
            .expect("vec write");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("vec write")).expect("utf8 in, utf8 out"));
    out
}

pub fn parse_csv(file: &str, text: &str) -> Result<EvaluationSummary> {
    let bad = |line: usize, why: String| Error::parse(file, Location::Line(line), why);
    let (first, rest) = text.split_once('\n').ok_or_else(|| bad(1, "missing thresholds line".into()))?;
    let mut thresholds = MetricThresholds::default();
    let kv = first.strip_prefix("# ").ok_or_else(|| bad(1, "missing thresholds line".into()))?;
    for pair in kv.split(',') {
        let (k, v) = pair.split_once('=').ok_or_else(|| bad(1, format!("bad field `{pair}`")))?;
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(1, format!("bad number `{v}`")));
        match k {
            "l2_max" => thresholds.l2_max = num(v)?,
            "angle_max" => thresholds.angle_max = num(v)?,
            "space" => {
                thresholds.space = match v {
                    "world" => Space::World,
                    "query_frame" => Space::QueryFrame,
                    _ => return Err(bad(1, format!("unknown space `{v}`"))),
                }
            }
            _ => return Err(bad(1, format!("unknown key `{k}`"))),
        }
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let header = rdr.headers().map_err(|e| bad(2, e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(bad(2, format!("expected header `{CSV_HEADER}`")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let flag = |v: &str| v.parse::<bool>().map_err(|_| bad(line, format!("bad flag `{v}`")));
        let num = |v: &str| -> Result<Option<f64>> {
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse().map(Some).map_err(|_| bad(line, format!("bad number `{v}`")))
            }
        };
        if rec.len() != 5 {
            return Err(bad(line, format!("expected 5 fields, found {}", rec.len())));
        }
        rows.push(QueryRow {
            query_id: rec[0].to_string(),
            has_pose: flag(&rec[1])?,
            l2: num(&rec[2])?,
            angle: num(&rec[3])?,
            success: flag(&rec[4])?,
        });
    }
    Ok(EvaluationSummary::from_rows(rows, thresholds))
}

pub fn render_json(s: &EvaluationSummary) -> String {
    crate::formats::to_json(s)
}

pub fn parse_json(file: &str, text: &str) -> Result<EvaluationSummary> {
    serde_json::from_str(text).map_err(|e| crate::error::json_error(file, e))
}

pub fn render_summary(s: &EvaluationSummary, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(s),
        ReportFormat::Csv => render_csv(s),
        ReportFormat::Json => render_json(s),
    }
}

// ---------------------------------------------------------------- registration

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformRecord {
    pub scale: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
}

impl TransformRecord {
    pub fn from_transform(t: &SimilarityTransform) -> Self {
        let [qw, qx, qy, qz] = rotation_to_wxyz(&t.rotation);
        Self { scale: t.scale(), qw, qx, qy, qz, tx: t.translation.x, ty: t.translation.y, tz: t.translation.z }
    }

    pub fn to_transform(&self) -> Result<SimilarityTransform> {
        let r = vq3d_core::geometry::rotation_from_wxyz(self.qw, self.qx, self.qy, self.qz)
            .map_err(|e| Error::Data(e.to_string()))?;
        SimilarityTransform::new(self.scale, r, vq3d_core::Vec3::new(self.tx, self.ty, self.tz))
            .map_err(|e| Error::Data(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualRecord {
    pub frame: FrameId,
    pub translation: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmapReport {
    pub label: String,
    pub status: SubmapStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub input_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_frame: Option<FrameId>,
    pub common_frames: Vec<FrameId>,
    pub residuals: Vec<ResidualRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmapStatus {
    Registered,
    Unregistrable,
}

impl SubmapReport {
    pub fn new(label: &str, input_frames: usize, result: &std::result::Result<RegistrationReport, RegistrationError>) -> Self {
        match result {
            Ok(r) => Self {
                label: label.to_string(),
                status: SubmapStatus::Registered,
                reason: None,
                input_frames,
                transform: Some(TransformRecord::from_transform(&r.transform)),
                chosen_frame: r.chosen_frame,
                common_frames: r.common_frames.clone(),
                residuals: r
                    .residuals
                    .iter()
                    .map(|x| ResidualRecord { frame: x.frame, translation: x.translation, rotation: x.rotation })
                    .collect(),
                mean_error: Some(r.mean_error),
            },
            Err(e) => Self {
                label: label.to_string(),
                status: SubmapStatus::Unregistrable,
                reason: Some(e.to_string()),
                input_frames,
                transform: None,
                chosen_frame: None,
                common_frames: Vec::new(),
                residuals: Vec::new(),
                mean_error: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationFileReport {
    pub clip_id: String,
    pub method: Method,
    pub lambda: f64,
    /// `None` when filtering is disabled.
    pub filter_threshold: Option<f64>,
    pub anchor_frames: usize,
    pub anchor_frames_kept: usize,
    pub posed_frames: usize,
    pub submaps: Vec<SubmapReport>,
}

// ---------------------------------------------------------------- bench

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchRow {
    pub dropout: f64,
    pub center_noise: f64,
    pub rotation_noise: f64,
    pub depth_noise: f64,
    pub filter_threshold: Option<f64>,
    pub seeds: Vec<u64>,
    pub n_queries: usize,
    pub posed_frames: usize,
    pub qwp: f64,
    pub succ: f64,
    pub succ_star: f64,
    pub mean_l2: Option<f64>,
    pub mean_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub thresholds: MetricThresholds,
    pub rows: Vec<BenchRow>,
}

fn threshold_name(t: Option<f64>) -> String {
    t.map(|t| t.to_string()).unwrap_or_else(|| "none".into())
}

pub fn render_bench(r: &BenchReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => crate::formats::to_json(r),
        ReportFormat::Csv => {
            let mut out = String::from(
                "dropout,center_noise,rotation_noise,depth_noise,filter_threshold,n_queries,posed_frames,qwp,succ,succ_star,mean_l2,mean_angle\n",
            );
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    row.dropout,
                    row.center_noise,
                    row.rotation_noise,
                    row.depth_noise,
                    threshold_name(row.filter_threshold),
                    row.n_queries,
                    row.posed_frames,
                    row.qwp,
                    row.succ,
                    row.succ_star,
                    opt(row.mean_l2),
                    opt(row.mean_angle)
                );
            }
            out
        }
        ReportFormat::Text => {
            let mut out = format!(
                "{:>7}  {:>8}  {:>8}  {:>8}  {:>7}  {:>6}  {:>6}  {:>7}  {:>7}  {:>7}  {:>10}\n",
                "dropout", "c_noise", "r_noise", "d_noise", "filter", "n", "posed", "QwP", "Succ*", "Succ", "L2"
            );
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "{:>7}  {:>8}  {:>8}  {:>8}  {:>7}  {:>6}  {:>6}  {:>7}  {:>7}  {:>7}  {:>10}",
                    row.dropout,
                    row.center_noise,
                    row.rotation_noise,
                    row.depth_noise,
                    threshold_name(row.filter_threshold),
                    row.n_queries,
                    row.posed_frames,
                    percent(row.qwp),
                    percent(row.succ_star),
                    percent(row.succ),
                    row.mean_l2.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into())
                );
            }
            out.push('\n');
            out.push_str(&thresholds_line(&r.thresholds));
            out.push('\n');
            out
        }
    }
}
