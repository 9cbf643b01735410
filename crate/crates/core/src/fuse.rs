//! Confusion statistics, classification metrics, and the weighted-sum
//! combination of two ground classifiers into one traversability map.

use std::fmt::Write as _;
use std::io::Write;
use std::ops::AddAssign;

use crate::error::{Error, Result};
pub use crate::map::{Label, PatchLabel, TraversabilityMap};

/// Counts with ground as the positive class. Unknown predictions (or
/// unknown truth) are counted apart and never enter the four cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
    pub unknown: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self {
            tp,
            fp,
            tn,
            fn_,
            unknown: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
        self.unknown += o.unknown;
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::param(format!(
            "prediction/truth length mismatch: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pred.iter().zip(truth) {
        match (p.is_ground(), t.is_ground()) {
            (Some(true), Some(true)) => cm.tp += 1,
            (Some(true), Some(false)) => cm.fp += 1,
            (Some(false), Some(false)) => cm.tn += 1,
            (Some(false), Some(true)) => cm.fn_ += 1,
            _ => cm.unknown += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Classification metrics; `None` marks an undefined value (zero
/// denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub precision: Option<f64>,
    pub rejection_precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

pub fn metrics(cm: &ConfusionMatrix) -> MetricReport {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    MetricReport {
        precision,
        rejection_precision: ratio(cm.tn, cm.tn + cm.fn_),
        recall,
        specificity: ratio(cm.tn, cm.tn + cm.fp),
        accuracy: cm.accuracy(),
        f1,
    }
}

impl MetricReport {
    pub fn rows(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("Precision", self.precision),
            ("Rejection Precision", self.rejection_precision),
            ("Recall", self.recall),
            ("Specificity", self.specificity),
            ("Accuracy", self.accuracy),
            ("F1-score", self.f1),
        ]
    }

    /// Two-column text table, values in percent.
    pub fn table(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<22}{title} (%)", "");
        for (name, v) in self.rows() {
            match v {
                Some(v) => {
                    let _ = writeln!(s, "{name:<22}{:.1}", v * 100.0);
                }
                None => {
                    let _ = writeln!(s, "{name:<22}n/a");
                }
            }
        }
        s
    }
}

/// Per-sensor fusion weights: precision P (used when the sensor labels a
/// cell ground) and rejection precision RP (used for non-ground).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierWeights {
    pub p: f64,
    pub rp: f64,
}

impl ClassifierWeights {
    /// Field-calibrated LIDAR rates.
    pub const LIDAR_DEFAULT: ClassifierWeights = ClassifierWeights { p: 0.973, rp: 0.836 };
    /// Field-calibrated stereo rates.
    pub const STEREO_DEFAULT: ClassifierWeights = ClassifierWeights { p: 0.969, rp: 0.826 };

    pub fn new(p: f64, rp: f64) -> Result<Self> {
        let w = Self { p, rp };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.rp) {
            return Err(Error::param(format!(
                "weights must lie in [0, 1], got p={} rp={}",
                self.p, self.rp
            )));
        }
        Ok(())
    }

    pub fn for_label(&self, label: Label) -> f64 {
        match label {
            Label::Ground => self.p,
            _ => self.rp,
        }
    }
}

pub fn weights_from_groundtruth(cm: &ConfusionMatrix) -> Result<ClassifierWeights> {
    let p = ratio(cm.tp, cm.tp + cm.fp)
        .ok_or_else(|| Error::InsufficientGroundTruth("TP + FP = 0".into()))?;
    let rp = ratio(cm.tn, cm.tn + cm.fn_)
        .ok_or_else(|| Error::InsufficientGroundTruth("TN + FN = 0".into()))?;
    Ok(ClassifierWeights { p, rp })
}

/// Weighted mean of the two classifier scores, each weighted by the rate
/// matching the label that classifier assigned.
pub fn fused_score(
    score_l: f64,
    label_l: Label,
    score_s: f64,
    label_s: Label,
    weights_l: ClassifierWeights,
    weights_s: ClassifierWeights,
) -> Result<f64> {
    let wl = weights_l.for_label(label_l);
    let ws = weights_s.for_label(label_s);
    let sum = wl + ws;
    if !(sum > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok((wl * score_l + ws * score_s) / sum)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    pub weights_l: ClassifierWeights,
    pub weights_s: ClassifierWeights,
    /// Decision threshold on the fused score.
    pub threshold: f64,
}

impl FusionParams {
    /// Threshold set to the mean of the two single-sensor thresholds.
    pub fn new(weights_l: ClassifierWeights, weights_s: ClassifierWeights, threshold_l: f64, threshold_s: f64) -> Self {
        Self {
            weights_l,
            weights_s,
            threshold: 0.5 * (threshold_l + threshold_s),
        }
    }
}

pub fn fuse_scores(
    (score_l, label_l): (f64, Label),
    (score_s, label_s): (f64, Label),
    params: &FusionParams,
) -> Result<PatchLabel> {
    let m = fused_score(score_l, label_l, score_s, label_s, params.weights_l, params.weights_s)?;
    let label = if m <= params.threshold {
        Label::Ground
    } else {
        Label::NonGround
    };
    Ok(PatchLabel::new(label, m))
}

/// Fuses two single-sensor maps. Cells seen by both are fused; cells seen by
/// one keep that sensor's label; cells seen by neither stay unknown.
pub fn fuse_maps(map_l: &TraversabilityMap, map_s: &TraversabilityMap, params: &FusionParams) -> Result<TraversabilityMap> {
    if map_l.geometry != map_s.geometry || map_l.cells.len() != map_s.cells.len() {
        return Err(Error::param("fused maps must share grid geometry"));
    }
    let mut out = TraversabilityMap::unknown(map_l.geometry);
    for i in 0..out.cells.len() {
        let (a, b) = (map_l.cells[i], map_s.cells[i]);
        out.observed[i] = map_l.observed[i] | map_s.observed[i];
        out.cells[i] = match (a.score, b.score) {
            (Some(sa), Some(sb)) if a.label != Label::Unknown && b.label != Label::Unknown => {
                fuse_scores((sa, a.label), (sb, b.label), params)?
            }
            _ if a.label != Label::Unknown => a,
            _ if b.label != Label::Unknown => b,
            _ => PatchLabel::UNKNOWN,
        };
    }
    Ok(out)
}

/// Indices of cells labelled by both maps.
pub fn co_observed(a: &TraversabilityMap, b: &TraversabilityMap) -> Vec<usize> {
    (0..a.cells.len().min(b.cells.len()))
        .filter(|&i| a.cells[i].label != Label::Unknown && b.cells[i].label != Label::Unknown)
        .collect()
}

/// Confusion counts restricted to a subset of cells.
pub fn confusion_on(pred: &TraversabilityMap, truth: &[Label], cells: &[usize]) -> Result<ConfusionMatrix> {
    let p: Vec<Label> = cells.iter().map(|&i| pred.cells[i].label).collect();
    let t: Vec<Label> = cells.iter().map(|&i| truth[i]).collect();
    confusion(&p, &t)
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map(crate::textio::fmt17).unwrap_or_else(|| "NA".into())
}

/// Per-frame confusion rows with an aggregate footer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<(String, ConfusionMatrix)>,
}

impl MetricsTable {
    pub fn push(&mut self, frame: impl Into<String>, cm: ConfusionMatrix) {
        self.rows.push((frame.into(), cm));
    }

    pub fn aggregate(&self) -> ConfusionMatrix {
        let mut total = ConfusionMatrix::default();
        for (_, cm) in &self.rows {
            total += *cm;
        }
        total
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "frame,tp,fp,tn,fn,unknown,precision,rejection_precision,recall,specificity,accuracy,f1"
        )?;
        let line = |name: &str, cm: &ConfusionMatrix| {
            let m = metrics(cm);
            format!(
                "{name},{},{},{},{},{},{},{},{},{},{},{}",
                cm.tp,
                cm.fp,
                cm.tn,
                cm.fn_,
                cm.unknown,
                fmt_metric(m.precision),
                fmt_metric(m.rejection_precision),
                fmt_metric(m.recall),
                fmt_metric(m.specificity),
                fmt_metric(m.accuracy),
                fmt_metric(m.f1)
            )
        };
        for (name, cm) in &self.rows {
            writeln!(w, "{}", line(name, cm))?;
        }
        writeln!(w, "{}", line("all", &self.aggregate()))?;
        Ok(())
    }
}
