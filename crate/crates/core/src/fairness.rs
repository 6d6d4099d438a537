//! Group fairness gaps, AUC and F1 over thresholded predictions.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    /// Probability of the fake class.
    pub score: f64,
    pub predicted: Label,
    pub label: Label,
    pub group: usize,
    pub threshold: f64,
}

impl PredictionRecord {
    pub fn new(score: f64, label: Label, group: usize, threshold: f64) -> Self {
        let predicted = if score >= threshold { Label::Fake } else { Label::Real };
        PredictionRecord { score, predicted, label, group, threshold }
    }
}

/// Rate of fake predictions among records with `label`, overall and per group.
/// Groups without such records are left out.
fn positive_rates(records: &[PredictionRecord], label: Label) -> Option<(f64, BTreeMap<usize, f64>)> {
    let mut per_group: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let (mut hits, mut total) = (0, 0);
    for r in records.iter().filter(|r| r.label == label) {
        let hit = (r.predicted == Label::Fake) as usize;
        let e = per_group.entry(r.group).or_default();
        e.0 += hit;
        e.1 += 1;
        hits += hit;
        total += 1;
    }
    if total == 0 {
        return None;
    }
    let rates = per_group.into_iter().map(|(a, (h, n))| (a, h as f64 / n as f64)).collect();
    Some((hits as f64 / total as f64, rates))
}

/// `max_a (rate_a - rate)` for one conditioning label, signed as written.
fn max_gap(records: &[PredictionRecord], label: Label, metric: &str) -> Result<f64> {
    let (overall, rates) = positive_rates(records, label)
        .ok_or_else(|| Error::UndefinedMetric(format!("{metric}: no {} samples", label_name(label))))?;
    Ok(rates.values().map(|r| r - overall).fold(f64::NEG_INFINITY, f64::max))
}

fn label_name(label: Label) -> &'static str {
    match label {
        Label::Real => "real",
        Label::Fake => "fake",
    }
}

pub fn f_fpr(records: &[PredictionRecord]) -> Result<f64> {
    max_gap(records, Label::Real, "F_FPR")
}

pub fn f_tpr(records: &[PredictionRecord]) -> Result<f64> {
    max_gap(records, Label::Fake, "F_TPR")
}

pub fn f_eo(records: &[PredictionRecord]) -> Result<f64> {
    Ok(f_fpr(records)?.max(f_tpr(records)?))
}

/// Probability that a random fake outscores a random real, ties counting half,
/// via midranks.
pub fn auc(records: &[PredictionRecord]) -> Result<f64> {
    if records.iter().any(|r| r.score.is_nan()) {
        return Err(Error::UndefinedMetric("AUC: NaN score".into()));
    }
    let n_pos = records.iter().filter(|r| r.label == Label::Fake).count();
    let n_neg = records.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC: both classes must be present".into()));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].score.total_cmp(&records[b].score));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && records[order[j + 1]].score == records[order[i]].score {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| records[k].label == Label::Fake).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

pub fn f1(records: &[PredictionRecord], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for r in records {
        match (r.score >= threshold, r.label) {
            (true, Label::Fake) => tp += 1,
            (true, Label::Real) => fp += 1,
            (false, Label::Fake) => fneg += 1,
            (false, Label::Real) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub a: usize,
    pub n_real: usize,
    pub n_fake: usize,
    pub fpr: Option<f64>,
    pub tpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UndefinedMetric {
    pub metric: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub f_fpr: Option<f64>,
    pub f_tpr: Option<f64>,
    pub f_eo: Option<f64>,
    pub auc: Option<f64>,
    pub f1: f64,
    pub threshold: f64,
    pub count: usize,
    pub groups: Vec<GroupRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<UndefinedMetric>,
}

pub fn group_report(records: &[PredictionRecord]) -> Result<FairnessReport> {
    let first = records.first().ok_or_else(|| Error::invalid("fairness report over no records"))?;
    let threshold = first.threshold;
    if records.iter().any(|r| r.threshold != threshold) {
        return Err(Error::invalid("records were thresholded differently"));
    }
    let mut undefined = Vec::new();
    let mut keep = |metric: &str, value: Result<f64>| match value {
        Ok(v) => Some(v),
        Err(e) => {
            undefined.push(UndefinedMetric { metric: metric.into(), reason: format!("{e}") });
            None
        }
    };
    let f_fpr_v = keep("f_fpr", f_fpr(records));
    let f_tpr_v = keep("f_tpr", f_tpr(records));
    let f_eo_v = match (f_fpr_v, f_tpr_v) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => keep("f_eo", f_eo(records)),
    };
    let auc_v = keep("auc", auc(records));

    let mut counts: BTreeMap<usize, [usize; 2]> = BTreeMap::new();
    for r in records {
        counts.entry(r.group).or_default()[r.label.index()] += 1;
    }
    let fpr = positive_rates(records, Label::Real).map(|(_, m)| m).unwrap_or_default();
    let tpr = positive_rates(records, Label::Fake).map(|(_, m)| m).unwrap_or_default();
    let groups = counts
        .into_iter()
        .map(|(a, [n_real, n_fake])| GroupRow { a, n_real, n_fake, fpr: fpr.get(&a).copied(), tpr: tpr.get(&a).copied() })
        .collect();

    Ok(FairnessReport {
        f_fpr: f_fpr_v,
        f_tpr: f_tpr_v,
        f_eo: f_eo_v,
        auc: auc_v,
        f1: f1(records, threshold),
        threshold,
        count: records.len(),
        groups,
        undefined,
    })
}

/// Averages frame scores per video and re-thresholds. `videos[i]` is the
/// video of `frames[i]`; output follows first appearance.
pub fn video_records(frames: &[PredictionRecord], videos: &[usize]) -> Result<Vec<PredictionRecord>> {
    if frames.len() != videos.len() {
        return Err(Error::invalid("one video index per frame record"));
    }
    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut acc: Vec<(f64, usize, PredictionRecord)> = Vec::new();
    for (r, &v) in frames.iter().zip(videos) {
        let next = acc.len();
        let s = *slot.entry(v).or_insert(next);
        if s == next {
            acc.push((0.0, 0, *r));
        }
        let (sum, n, first) = &mut acc[s];
        if first.label != r.label || first.group != r.group {
            return Err(Error::invalid(format!("video {v} mixes labels or groups across frames")));
        }
        *sum += r.score;
        *n += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(sum, n, r)| PredictionRecord::new(sum / n as f64, r.label, r.group, r.threshold))
        .collect())
}
