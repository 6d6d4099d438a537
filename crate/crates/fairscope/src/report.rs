//! JSON and markdown outputs.

use std::time::Duration;

use fairscope_core::concepts::{rank_by_score, CssRecord};
use fairscope_core::fairness::FairnessReport;
use fairscope_core::pipeline::Evaluation;
use fairscope_core::data::VideoSample;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    #[serde(flatten)]
    pub frame: FairnessReport,
    pub video: FairnessReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub video_id: String,
    pub frame: usize,
    pub label: usize,
    pub group: usize,
    pub score: f64,
}

pub fn frame_scores(videos: &[VideoSample], eval: &Evaluation) -> Vec<FrameScore> {
    let mut frame_in_video = 0;
    let mut last = usize::MAX;
    eval.frames
        .iter()
        .zip(&eval.video_of)
        .map(|(r, &v)| {
            frame_in_video = if v == last { frame_in_video + 1 } else { 0 };
            last = v;
            FrameScore { video_id: videos[v].id.clone(), frame: frame_in_video, label: r.label.index(), group: r.group, score: r.score }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

pub const METRICS_HEADER: &str = "| Run | Level | F_FPR | F_TPR | F_EO | AUC | F1 |\n|---|---|---|---|---|---|---|\n";

pub fn metrics_row(run: &str, level: &str, r: &FairnessReport) -> String {
    format!(
        "| {run} | {level} | {} | {} | {} | {} | {:.4} |\n",
        cell(r.f_fpr),
        cell(r.f_tpr),
        cell(r.f_eo),
        cell(r.auc),
        r.f1
    )
}

pub fn metrics_markdown(run: &str, m: &MetricsFile) -> String {
    let mut out = String::from(METRICS_HEADER);
    out += &metrics_row(run, "frame", &m.frame);
    out += &metrics_row(run, "video", &m.video);
    out += "\n| Group | Level | Real | Fake | FPR | TPR |\n|---|---|---|---|---|---|\n";
    for (level, r) in [("frame", &m.frame), ("video", &m.video)] {
        for g in &r.groups {
            out += &format!("| {} | {level} | {} | {} | {} | {} |\n", g.a, g.n_real, g.n_fake, cell(g.fpr), cell(g.tpr));
        }
    }
    for u in m.frame.undefined.iter().chain(&m.video.undefined) {
        out += &format!("\n{}: {}\n", u.metric, u.reason);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CssEntry {
    pub concept: String,
    #[serde(rename = "S_l")]
    pub score: f64,
    #[serde(rename = "y'_l")]
    pub class: usize,
    pub rank: usize,
}

/// Concepts by descending score, rank 1 first.
pub fn css_report(records: &[CssRecord]) -> Vec<CssEntry> {
    rank_by_score(records)
        .into_iter()
        .enumerate()
        .map(|(i, l)| CssEntry { concept: records[l].concept.clone(), score: records[l].score, class: records[l].class, rank: i + 1 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDumpEntry {
    pub video_id: String,
    pub frame: usize,
    pub class: usize,
    pub cluster: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub phase1: f64,
    pub phase2: f64,
    pub phase3: f64,
    pub phase4: f64,
    pub total: f64,
}

impl PhaseTimings {
    pub fn secs(d: Duration) -> f64 {
        d.as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub phase1: Vec<f64>,
    pub phase4: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub timings: PhaseTimings,
    pub loss_history: LossHistory,
    /// Report on the validation split.
    pub validation: Option<FairnessReport>,
    pub top_css: Vec<CssEntry>,
    pub phase1_sha256: String,
    pub artifacts: Vec<String>,
}
