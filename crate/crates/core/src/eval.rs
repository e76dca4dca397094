//! Event matching, AUROC and seasonal scenarios.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::extract::{is_sorted_disjoint, EventSegment};

/// Road surface of a recording. Dry is the only normal class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceLabel {
    Dry,
    Slush,
    Snow,
    Wet,
}

impl SurfaceLabel {
    pub const ALL: [SurfaceLabel; 4] = [
        SurfaceLabel::Dry,
        SurfaceLabel::Slush,
        SurfaceLabel::Snow,
        SurfaceLabel::Wet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceLabel::Dry => "dry",
            SurfaceLabel::Slush => "slush",
            SurfaceLabel::Snow => "snow",
            SurfaceLabel::Wet => "wet",
        }
    }

    pub fn is_normal(self) -> bool {
        self == SurfaceLabel::Dry
    }
}

impl fmt::Display for SurfaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurfaceLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SurfaceLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown surface label {s:?}")))
    }
}

/// Which labels count as normal and which as anomalous for one AUROC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub normal: Vec<SurfaceLabel>,
    pub anomalous: Vec<SurfaceLabel>,
}

impl Scenario {
    /// Dry against wet only.
    pub fn summer() -> Self {
        Self {
            name: "summer".into(),
            normal: vec![SurfaceLabel::Dry],
            anomalous: vec![SurfaceLabel::Wet],
        }
    }

    /// Dry against slush, snow and wet.
    pub fn winter() -> Self {
        Self {
            name: "winter".into(),
            normal: vec![SurfaceLabel::Dry],
            anomalous: vec![SurfaceLabel::Slush, SurfaceLabel::Snow, SurfaceLabel::Wet],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.normal.is_empty() || self.anomalous.is_empty() {
            return Err(invalid(format!("scenario {} needs both classes", self.name)));
        }
        if self.normal.iter().any(|l| self.anomalous.contains(l)) {
            return Err(invalid(format!(
                "scenario {} lists a label as both normal and anomalous",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub driving_count: usize,
    pub other_count: usize,
    pub missed_count: usize,
}

/// Greedy one-to-one matching by descending IoU.
///
/// Detections matched at `iou >= iou_min` are driving events, the rest are
/// other events; unmatched truths are missed.
pub fn match_events(detected: &[EventSegment], truth: &[EventSegment], iou_min: f64) -> Result<MatchCounts> {
    if !is_sorted_disjoint(detected) || !is_sorted_disjoint(truth) {
        return Err(invalid("event lists must be sorted and non-overlapping"));
    }
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(invalid("iou_min must lie in (0, 1]"));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    // both lists are sorted, so only overlapping windows need checking
    let mut first_truth = 0;
    for (d, det) in detected.iter().enumerate() {
        while first_truth < truth.len() && truth[first_truth].end_sample < det.start_sample {
            first_truth += 1;
        }
        for (t, tr) in truth.iter().enumerate().skip(first_truth) {
            if tr.start_sample > det.end_sample {
                break;
            }
            let iou = det.iou(tr);
            if iou >= iou_min {
                pairs.push((iou, d, t));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detected.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matched = 0;
    for (_, d, t) in pairs {
        if !det_used[d] && !truth_used[t] {
            det_used[d] = true;
            truth_used[t] = true;
            matched += 1;
        }
    }
    Ok(MatchCounts {
        driving_count: matched,
        other_count: detected.len() - matched,
        missed_count: truth.len() - matched,
    })
}

fn check_scores(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(invalid(format!("{what} scores are empty")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(invalid(format!("{what} scores contain NaN")));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (normal, anomalous) pairs in which the anomalous score is higher, ties
/// counting one half.
///
/// Computed from mid-ranks of the pooled scores; every intermediate value is
/// a multiple of 1/2, so the result equals the pair count exactly.
pub fn auroc(normal_scores: &[f64], anomalous_scores: &[f64]) -> Result<f64> {
    check_scores(normal_scores, "normal")?;
    check_scores(anomalous_scores, "anomalous")?;
    let mut pooled: Vec<(f64, bool)> = normal_scores
        .iter()
        .map(|&s| (s, false))
        .chain(anomalous_scores.iter().map(|&s| (s, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // -0.0 and 0.0 tie
    let mut rank_sum_anomalous = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let mid_rank = (i + j + 2) as f64 / 2.0;
        let anomalous_in_group = pooled[i..=j].iter().filter(|p| p.1).count();
        rank_sum_anomalous += mid_rank * anomalous_in_group as f64;
        i = j + 1;
    }
    let n_a = anomalous_scores.len() as f64;
    let n_n = normal_scores.len() as f64;
    let u = rank_sum_anomalous - n_a * (n_a + 1.0) / 2.0;
    Ok(u / (n_a * n_n))
}

/// AUROC of `scores` split by the scenario's label sets; labels in neither
/// set are ignored.
pub fn run_scenario(scores: &[(SurfaceLabel, f64)], scenario: &Scenario) -> Result<f64> {
    scenario.validate()?;
    let (normal, anomalous) = partition(scores, scenario);
    if normal.is_empty() || anomalous.is_empty() {
        return Err(Error::InsufficientData(format!(
            "scenario {} has {} normal and {} anomalous scores",
            scenario.name,
            normal.len(),
            anomalous.len()
        )));
    }
    auroc(&normal, &anomalous)
}

pub fn partition(scores: &[(SurfaceLabel, f64)], scenario: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let normal = scores
        .iter()
        .filter(|(l, _)| scenario.normal.contains(l))
        .map(|&(_, s)| s)
        .collect();
    let anomalous = scores
        .iter()
        .filter(|(l, _)| scenario.anomalous.contains(l))
        .map(|&(_, s)| s)
        .collect();
    (normal, anomalous)
}

/// One operating point: scores `>= threshold` are called anomalous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC curve from the strictest threshold (`+inf`, nothing flagged) down
/// through every distinct score.
pub fn roc_points(normal_scores: &[f64], anomalous_scores: &[f64]) -> Result<Vec<RocPoint>> {
    check_scores(normal_scores, "normal")?;
    check_scores(anomalous_scores, "anomalous")?;
    let mut pooled: Vec<(f64, bool)> = normal_scores
        .iter()
        .map(|&s| (s, false))
        .chain(anomalous_scores.iter().map(|&s| (s, true)))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (n_n, n_a) = (normal_scores.len() as f64, anomalous_scores.len() as f64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < pooled.len() {
        let t = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == t {
            if pooled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_n,
            tpr: tp as f64 / n_a,
            threshold: t,
        });
    }
    Ok(points)
}

/// Relative change in percent, rounded half away from zero.
pub fn improvement_percent(before: f64, after: f64) -> Option<i64> {
    if before == 0.0 || !before.is_finite() || !after.is_finite() {
        return None;
    }
    Some(libm::round((after - before) / before * 100.0) as i64)
}
