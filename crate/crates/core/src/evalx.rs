//! Training loop and evaluation metrics: confusion matrix, accuracy, per-class
//! and averaged F1, and one-vs-rest ROC curves with trapezoidal AUC.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{predict_from_logits, Model, Prediction};
use crate::nn::{Optimizer, OptimizerKind, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the per-batch losses.
    pub loss: f64,
    /// Accuracy of the training-mode predictions made during the epoch.
    pub train_accuracy: f64,
    pub steps: usize,
}

/// Mini-batch training. The batch order of every epoch is drawn from
/// `cfg.seed`, so two runs from the same initial model are identical.
pub fn train(
    model: &mut Model,
    images: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::Argument("training set is empty".into()));
    }
    if images.dims()[0] != n {
        return Err(Error::shape(&[n], &images.dims()[..1]));
    }
    let classes = model.config().num_classes;
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::LabelRange {
            row,
            label,
            num_classes: classes,
        });
    }
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    model.zero_grad();
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = images.gather_outer(chunk)?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (logits, saved) = model.forward_saving(&batch)?;
            let (loss, grad) = crate::nn::softmax_cross_entropy(&logits, &batch_labels)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { step, loss });
            }
            let pred = predict_from_logits(logits.data(), logits.dims()[1], classes);
            correct += pred
                .classes
                .iter()
                .zip(&batch_labels)
                .filter(|(p, t)| p == t)
                .count();
            model.backward(&grad, saved)?;
            opt.step(&mut model.params_mut())?;
            loss_sum += loss;
            batches += 1;
            step += 1;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / n as f64,
            steps: batches,
        };
        progress(&stats);
        trace.push(stats);
    }
    Ok(trace)
}

/// Predictions over `images` in batches, evaluated in parallel on the
/// current rayon pool. Results are independent of the pool size.
pub fn predict_batched(model: &Model, images: &Tensor, batch_size: usize) -> Result<Prediction> {
    let n = images.dims()[0];
    let batch_size = batch_size.max(1);
    let starts: Vec<usize> = (0..n).step_by(batch_size).collect();
    let parts: Vec<Prediction> = starts
        .par_iter()
        .map(|&s| model.predict(&images.slice_outer(s, batch_size.min(n - s))?))
        .collect::<Result<_>>()?;
    let num_classes = model.config().num_classes;
    let mut classes = Vec::with_capacity(n);
    let mut probabilities = Vec::with_capacity(n * num_classes);
    for p in parts {
        classes.extend(p.classes);
        probabilities.extend(p.probabilities);
    }
    Ok(Prediction {
        classes,
        probabilities,
        num_classes,
    })
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(&[truth.len()], &[predicted.len()]));
        }
        let mut counts = vec![0u64; classes * classes];
        for (row, (&t, &p)) in truth.iter().zip(predicted).enumerate() {
            if t >= classes || p >= classes {
                return Err(Error::LabelRange {
                    row,
                    label: t.max(p),
                    num_classes: classes,
                });
            }
            counts[t * classes + p] += 1;
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        (0..self.classes).map(|p| self.get(class, p)).sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, class)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            total => self.trace() as f64 / total as f64,
        }
    }

    /// Adds another matrix's counts, e.g. from a different shard of a test set.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape(&[self.classes], &[other.classes]));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 per class; 0/0 cases are 0.
pub fn class_metrics(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.classes)
        .map(|k| {
            let tp = cm.get(k, k);
            let fp = cm.predicted_count(k) - tp;
            let fn_ = cm.support(k) - tp;
            ClassMetrics {
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                // 2PR/(P+R) with P = tp/(tp+fp), R = tp/(tp+fn)
                f1: ratio(2 * tp, 2 * tp + fp + fn_),
                support: cm.support(k),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Exact stepwise ROC over every distinct score, from threshold `+∞` (point
/// (0, 0)) down to `−∞` (point (1, 1)). A sample counts as positive when its
/// score is at least the threshold. Returns `None` when either class is absent.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Option<RocCurve> {
    assert_eq!(scores.len(), positive.len());
    let pos = positive.iter().filter(|&&p| p).count() as u64;
    let neg = positive.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let point = |fp: u64, tp: u64, threshold: f64| RocPoint {
        fpr: fp as f64 / neg as f64,
        tpr: tp as f64 / pos as f64,
        threshold,
    };
    let mut points = vec![point(0, 0, f64::INFINITY)];
    // twice the area in units of 1/(pos·neg), accumulated exactly
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - prev_fp) as u128 * (tp + prev_tp) as u128;
        points.push(point(fp, tp, threshold));
    }
    points.push(point(fp, tp, f64::NEG_INFINITY));
    let auc = area2 as f64 / (2 * pos as u128 * neg as u128) as f64;
    Some(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub per_class: Vec<ClassMetrics>,
    /// One-vs-rest curve per class; `None` when the class has no positive or
    /// no negative sample in the evaluated set.
    pub roc: Vec<Option<RocCurve>>,
    /// Classes absent from both truth and predictions, left out of macro F1.
    pub excluded_from_macro: Vec<usize>,
}

/// Builds the report from true labels and a batch prediction.
pub fn report_from_prediction(truth: &[usize], pred: &Prediction) -> Result<EvalReport> {
    let k = pred.num_classes;
    if truth.is_empty() {
        return Err(Error::Argument("evaluation set is empty".into()));
    }
    if pred.classes.len() != truth.len() || pred.probabilities.len() != truth.len() * k {
        return Err(Error::shape(
            &[truth.len(), k],
            &[pred.classes.len(), pred.probabilities.len()],
        ));
    }
    let confusion = ConfusionMatrix::from_labels(truth, &pred.classes, k)?;
    let per_class = class_metrics(&confusion);

    let mut excluded = Vec::new();
    let mut macro_sum = 0.0;
    for (c, m) in per_class.iter().enumerate() {
        if confusion.support(c) == 0 && confusion.predicted_count(c) == 0 {
            log::warn!("class {c} absent from truth and predictions; excluded from macro F1");
            excluded.push(c);
        } else {
            macro_sum += m.f1;
        }
    }
    let counted = k - excluded.len();
    let f1_macro = if counted == 0 {
        0.0
    } else {
        macro_sum / counted as f64
    };
    let total = confusion.total();
    let f1_weighted = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total as f64;

    let roc = (0..k)
        .map(|c| {
            let scores: Vec<f64> = (0..truth.len()).map(|i| pred.row(i)[c]).collect();
            let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            roc_curve(&scores, &positive)
        })
        .collect();

    Ok(EvalReport {
        accuracy: confusion.accuracy(),
        confusion,
        f1_macro,
        f1_weighted,
        per_class,
        roc,
        excluded_from_macro: excluded,
    })
}

pub fn evaluate(
    model: &Model,
    images: &Tensor,
    labels: &[usize],
    batch_size: usize,
) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::Argument("evaluation set is empty".into()));
    }
    if images.dims()[0] != labels.len() {
        return Err(Error::shape(&[labels.len()], &images.dims()[..1]));
    }
    let pred = predict_batched(model, images, batch_size)?;
    report_from_prediction(labels, &pred)
}

fn fmt_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{t:.9}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Flat `key=value` summary of a report.
pub fn metrics_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let cm = &report.confusion;
    let _ = writeln!(s, "samples={}", cm.total());
    let _ = writeln!(s, "num_classes={}", cm.classes());
    let _ = writeln!(s, "accuracy={:.6}", report.accuracy);
    let _ = writeln!(s, "f1_macro={:.6}", report.f1_macro);
    let _ = writeln!(s, "f1_weighted={:.6}", report.f1_weighted);
    for (c, m) in report.per_class.iter().enumerate() {
        let _ = writeln!(s, "precision_class_{c}={:.6}", m.precision);
        let _ = writeln!(s, "recall_class_{c}={:.6}", m.recall);
        let _ = writeln!(s, "f1_class_{c}={:.6}", m.f1);
        let _ = writeln!(s, "support_class_{c}={}", m.support);
        match &report.roc[c] {
            Some(r) => {
                let _ = writeln!(s, "auc_class_{c}={:.6}", r.auc);
            }
            None => {
                let _ = writeln!(s, "auc_class_{c}=undefined");
            }
        }
    }
    for row in 0..cm.classes() {
        let cells: Vec<String> = (0..cm.classes())
            .map(|p| cm.get(row, p).to_string())
            .collect();
        let _ = writeln!(s, "confusion_row_{row}={}", cells.join(" "));
    }
    s
}

/// Writes `metrics.txt`, `confusion.csv` and one `roc_class_<k>.csv` per class.
pub fn export_report(report: &EvalReport, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("metrics.txt"), &metrics_text(report))?;

    let cm = &report.confusion;
    let k = cm.classes();
    let mut csv = String::from("true");
    for p in 0..k {
        let _ = write!(csv, ",pred_{p}");
    }
    csv.push('\n');
    for t in 0..k {
        let _ = write!(csv, "{t}");
        for p in 0..k {
            let _ = write!(csv, ",{}", cm.get(t, p));
        }
        csv.push('\n');
    }
    write_file(&dir.join("confusion.csv"), &csv)?;

    for (c, roc) in report.roc.iter().enumerate() {
        let mut csv = String::from("fpr,tpr,threshold\n");
        if let Some(r) = roc {
            for p in &r.points {
                let _ = writeln!(
                    csv,
                    "{:.9},{:.9},{}",
                    p.fpr,
                    p.tpr,
                    fmt_threshold(p.threshold)
                );
            }
        }
        write_file(&dir.join(format!("roc_class_{c}.csv")), &csv)?;
    }
    Ok(())
}

/// Writes `loss_trace.csv`.
pub fn export_trace(trace: &[EpochStats], out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut csv = String::from("epoch,loss,train_accuracy,steps\n");
    for s in trace {
        let _ = writeln!(
            csv,
            "{},{:.9},{:.6},{}",
            s.epoch, s.loss, s.train_accuracy, s.steps
        );
    }
    write_file(&dir.join("loss_trace.csv"), &csv)
}
