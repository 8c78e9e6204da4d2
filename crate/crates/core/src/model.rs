//! Verdict classifier: feature fusion, focal-loss training, evaluation and
//! significance testing.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::Label;
use crate::sampler::{ContextSet, EmbeddingStore};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite logits")]
    NonFinite,
    #[error("training set contains only {0}; set focal_alpha explicitly")]
    SingleClass(Label),
    #[error("empty dataset")]
    Empty,
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("no embedding for context item {0}")]
    MissingEmbedding(String),
    #[error("significance test needs at least two samples per side")]
    TooFewSamples,
    #[error("model file checksum mismatch")]
    Checksum,
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `[post ‖ mean context]`, stored fused. `d` is the per-part width.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    d: usize,
    fused: Vec<f32>,
}

impl FeatureVector {
    pub fn new(post_part: &[f32], context_part: &[f32]) -> Result<Self, ModelError> {
        if post_part.len() != context_part.len() {
            return Err(ModelError::DimMismatch {
                expected: post_part.len(),
                got: context_part.len(),
            });
        }
        Ok(FeatureVector {
            d: post_part.len(),
            fused: [post_part, context_part].concat(),
        })
    }

    pub fn post_part(&self) -> &[f32] {
        &self.fused[..self.d]
    }
    pub fn context_part(&self) -> &[f32] {
        &self.fused[self.d..]
    }
    pub fn fused(&self) -> &[f32] {
        &self.fused
    }
    pub fn len(&self) -> usize {
        self.fused.len()
    }
    pub fn is_empty(&self) -> bool {
        self.fused.is_empty()
    }
}

/// Mean of the context item embeddings next to the post embedding. The mean
/// is renormalized to unit length when the item embeddings are normalized.
pub fn build_features(post_emb: &[f32], context: &ContextSet, store: &EmbeddingStore) -> Result<FeatureVector, ModelError> {
    let d = store.dim();
    if post_emb.len() != d {
        return Err(ModelError::DimMismatch {
            expected: d,
            got: post_emb.len(),
        });
    }
    let mut acc = vec![0f64; d];
    let mut normalized = true;
    for item in &context.items {
        let row = store
            .item_row(&item.item_id)
            .ok_or_else(|| ModelError::MissingEmbedding(item.item_id.clone()))?;
        normalized &= (row.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt() - 1.0).abs() <= 1e-6;
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += x as f64;
        }
    }
    if !context.items.is_empty() {
        let n = context.items.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        if normalized {
            let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                acc.iter_mut().for_each(|a| *a /= norm);
            }
        }
    }
    let ctx: Vec<f32> = acc.into_iter().map(|x| x as f32).collect();
    FeatureVector::new(post_emb, &ctx)
}

fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Focal loss `-α_t (1-p_t)^γ log p_t` over a two-class softmax, with its
/// gradient with respect to the logits.
pub fn focal_loss(logits: [f64; 2], label: usize, gamma: f64, alpha: [f64; 2]) -> Result<(f64, [f64; 2]), ModelError> {
    if !logits.iter().all(|z| z.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    assert!(label < 2, "label index");
    let p = softmax(logits);
    let other = 1 - label;
    let m = logits[0].max(logits[1]);
    let log_pt = logits[label] - m - ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    let pt = p[label];
    // 1 - p_t, taken from the other class to avoid cancellation
    let q = p[other];
    let a = alpha[label];
    let loss = -a * q.powf(gamma) * log_pt;
    let coef = if q == 0.0 {
        0.0
    } else {
        let focus = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) * pt * log_pt };
        a * (focus - q.powf(gamma))
    };
    let mut grad = [0.0; 2];
    for (j, g) in grad.iter_mut().enumerate() {
        let delta = if j == label { 1.0 } else { 0.0 };
        *g = coef * (delta - p[j]);
    }
    Ok((loss.max(0.0), grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub focal_gamma: f64,
    /// Per-class weights indexed YTA, NTA. `None` derives N / (2 N_c).
    pub focal_alpha: Option<[f64; 2]>,
    pub batch_size: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 1e-3,
            focal_gamma: 2.0,
            focal_alpha: None,
            batch_size: 32,
            runs: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.focal_gamma.is_nan() || self.focal_gamma < 0.0 {
            return bad("focal_gamma must be non-negative");
        }
        if let Some(a) = self.focal_alpha {
            if !a.iter().all(|x| *x > 0.0 && x.is_finite()) {
                return bad("focal_alpha entries must be positive");
            }
        }
        if self.batch_size == 0 || self.runs == 0 {
            return bad("batch_size and runs must be positive");
        }
        Ok(())
    }
}

pub type Example = (FeatureVector, Label);

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    /// Row-major 2 × dim, row 0 scores YTA.
    pub weights: Vec<f64>,
    pub bias: [f64; 2],
    pub alpha: [f64; 2],
    pub config: TrainConfig,
    /// Mean training loss per epoch; empty for loaded models.
    pub epoch_losses: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dim: usize, config: TrainConfig) -> Self {
        ModelParams {
            dim,
            weights: vec![0.0; 2 * dim],
            bias: [0.0; 2],
            alpha: [1.0, 1.0],
            config,
            epoch_losses: Vec::new(),
        }
    }

    fn logits(&self, x: &[f32]) -> [f64; 2] {
        let (w0, w1) = self.weights.split_at(self.dim);
        let mut z = self.bias;
        for ((&a, &b), &v) in w0.iter().zip(w1).zip(x) {
            z[0] += a * v as f64;
            z[1] += b * v as f64;
        }
        z
    }
}

/// Resolves the class weights, deriving inverse class frequency if unset.
pub fn resolve_alpha(data: &[Example], cfg: &TrainConfig) -> Result<[f64; 2], ModelError> {
    if let Some(a) = cfg.focal_alpha {
        return Ok(a);
    }
    let mut counts = [0usize; 2];
    data.iter().for_each(|(_, y)| counts[y.index()] += 1);
    let n = data.len() as f64;
    for l in Label::ALL {
        if counts[l.index()] == 0 {
            return Err(ModelError::SingleClass(Label::from_index(1 - l.index())));
        }
    }
    Ok([n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64)])
}

/// Mini-batch Adam on the focal loss from zero-initialized parameters.
pub fn train(data: &[Example], cfg: &TrainConfig) -> Result<ModelParams, ModelError> {
    cfg.validate()?;
    let first = data.first().ok_or(ModelError::Empty)?;
    let dim = first.0.len();
    if let Some((f, _)) = data.iter().find(|(f, _)| f.len() != dim) {
        return Err(ModelError::DimMismatch { expected: dim, got: f.len() });
    }
    let alpha = resolve_alpha(data, cfg)?;
    let mut params = ModelParams::zeros(dim, cfg.clone());
    params.alpha = alpha;
    let np = 2 * dim + 2;
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
    let mut m = vec![0f64; np];
    let mut v = vec![0f64; np];
    let mut grad = vec![0f64; np];
    let mut t = 0i32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (f, y) = &data[i];
                let x = f.fused();
                let (loss, gz) = focal_loss(params.logits(x), y.index(), cfg.focal_gamma, alpha)?;
                epoch_loss += loss;
                let (g0, rest) = grad.split_at_mut(dim);
                let (g1, gb) = rest.split_at_mut(dim);
                for ((a, b), &xv) in g0.iter_mut().zip(g1.iter_mut()).zip(x) {
                    *a += gz[0] * xv as f64;
                    *b += gz[1] * xv as f64;
                }
                gb[0] += gz[0];
                gb[1] += gz[1];
            }
            let scale = 1.0 / batch.len() as f64;
            t += 1;
            let c1 = 1.0 - b1.powi(t);
            let c2 = 1.0 - b2.powi(t);
            for k in 0..np {
                let g = grad[k] * scale;
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                let step = cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                if k < 2 * dim {
                    params.weights[k] -= step;
                } else {
                    params.bias[k - 2 * dim] -= step;
                }
            }
        }
        let mean = epoch_loss / data.len() as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        params.epoch_losses.push(mean);
    }
    Ok(params)
}

/// Trains `cfg.runs` models with seeds `cfg.seed + run`.
pub fn train_runs(data: &[Example], cfg: &TrainConfig) -> Result<Vec<ModelParams>, ModelError> {
    (0..cfg.runs)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(r as u64);
            train(data, &c)
        })
        .collect()
}

/// Softmax probabilities indexed YTA, NTA and the argmax label; exact ties
/// go to NTA.
pub fn predict(params: &ModelParams, f: &FeatureVector) -> Result<(Label, [f64; 2]), ModelError> {
    if f.len() != params.dim {
        return Err(ModelError::DimMismatch {
            expected: params.dim,
            got: f.len(),
        });
    }
    let p = softmax(params.logits(f.fused()));
    let label = if p[0] > p[1] { Label::Yta } else { Label::Nta };
    Ok((label, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Indexed YTA, NTA.
    pub per_class: [ClassMetrics; 2],
    pub n: usize,
    /// `confusion[truth][predicted]`.
    pub confusion: [[usize; 2]; 2],
    pub correct: Vec<bool>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

/// Metrics from parallel prediction/truth lists. Undefined ratios count as 0.
pub fn eval_predictions(pred: &[Label], truth: &[Label]) -> EvalReport {
    assert_eq!(pred.len(), truth.len(), "prediction/truth length");
    assert!(!truth.is_empty(), "empty evaluation set");
    let mut cm = [[0usize; 2]; 2];
    for (p, t) in pred.iter().zip(truth) {
        cm[t.index()][p.index()] += 1;
    }
    let per_class = [0, 1].map(|c| {
        let tp = cm[c][c];
        let predicted = cm[0][c] + cm[1][c];
        let actual = cm[c][0] + cm[c][1];
        if predicted == 0 && actual == 0 {
            log::warn!("class {} absent from predictions and truth; F1 counted as 0", Label::from_index(c));
        }
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, actual);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        ClassMetrics {
            precision,
            recall,
            f1,
            support: actual,
        }
    });
    let correct: Vec<bool> = pred.iter().zip(truth).map(|(p, t)| p == t).collect();
    EvalReport {
        accuracy: ratio(cm[0][0] + cm[1][1], truth.len()),
        macro_f1: (per_class[0].f1 + per_class[1].f1) / 2.0,
        per_class,
        n: truth.len(),
        confusion: cm,
        correct,
    }
}

pub fn evaluate(params: &ModelParams, test: &[Example]) -> Result<EvalReport, ModelError> {
    if test.is_empty() {
        return Err(ModelError::Empty);
    }
    let pred = test
        .iter()
        .map(|(f, _)| predict(params, f).map(|p| p.0))
        .collect::<Result<Vec<_>, _>>()?;
    let truth: Vec<Label> = test.iter().map(|(_, y)| *y).collect();
    Ok(eval_predictions(&pred, &truth))
}

/// Runs of one experimental condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub runs: Vec<EvalReport>,
    pub mean_accuracy: f64,
    pub mean_macro_f1: f64,
}

impl ConditionReport {
    pub fn new(condition: impl Into<String>, runs: Vec<EvalReport>) -> Self {
        let n = runs.len().max(1) as f64;
        ConditionReport {
            condition: condition.into(),
            mean_accuracy: runs.iter().map(|r| r.accuracy).sum::<f64>() / n,
            mean_macro_f1: runs.iter().map(|r| r.macro_f1).sum::<f64>() / n,
            runs,
        }
    }

    /// Per-example correctness by majority over runs; ties count as
    /// incorrect.
    pub fn majority_correct(&self) -> Vec<bool> {
        let n = self.runs.first().map_or(0, |r| r.correct.len());
        (0..n)
            .map(|i| {
                let hits = self.runs.iter().filter(|r| r.correct[i]).count();
                2 * hits > self.runs.len()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(x: &[bool]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().filter(|&&b| b).count() as f64 / n;
    let v = x.iter().map(|&b| (b as u8 as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's two-sample t-test on correctness indicators, two-sided.
pub fn significance_test(a: &[bool], b: &[bool]) -> Result<TTest, ModelError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(ModelError::TooFewSamples);
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 == 0.0 {
        let (t, p) = if ma == mb { (0.0, 1.0) } else { ((ma - mb).signum() * f64::INFINITY, 0.0) };
        return Ok(TTest { t, df: f64::NAN, p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    dim: usize,
    gamma: f64,
    alpha: [f64; 2],
    seed: u64,
    epochs: usize,
    lr: f64,
    batch_size: usize,
}

impl ModelParams {
    /// JSON header line, then weights and bias as little-endian f64, then
    /// the first 8 bytes of a SHA-256 over everything before.
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        let header = ModelHeader {
            dim: self.dim,
            gamma: self.config.focal_gamma,
            alpha: self.alpha,
            seed: self.config.seed,
            epochs: self.config.epochs,
            lr: self.config.learning_rate,
            batch_size: self.config.batch_size,
        };
        let mut buf = serde_json::to_vec(&header).map_err(|e| ModelError::Format(e.to_string()))?;
        buf.push(b'\n');
        for x in self.weights.iter().chain(&self.bias) {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let sum = Sha256::digest(&buf);
        buf.extend_from_slice(&sum[..8]);
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<ModelParams, ModelError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 8 {
            return Err(ModelError::Checksum);
        }
        let (body, sum) = bytes.split_at(bytes.len() - 8);
        if Sha256::digest(body)[..8] != *sum {
            return Err(ModelError::Checksum);
        }
        let nl = body
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ModelError::Format("missing header".into()))?;
        let h: ModelHeader = serde_json::from_slice(&body[..nl]).map_err(|e| ModelError::Format(e.to_string()))?;
        let payload = &body[nl + 1..];
        if payload.len() != (2 * h.dim + 2) * 8 {
            return Err(ModelError::Format(format!("payload of {} bytes for dim {}", payload.len(), h.dim)));
        }
        let vals: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ModelParams {
            dim: h.dim,
            weights: vals[..2 * h.dim].to_vec(),
            bias: [vals[2 * h.dim], vals[2 * h.dim + 1]],
            alpha: h.alpha,
            config: TrainConfig {
                epochs: h.epochs,
                learning_rate: h.lr,
                focal_gamma: h.gamma,
                focal_alpha: Some(h.alpha),
                batch_size: h.batch_size,
                runs: 1,
                seed: h.seed,
            },
            epoch_losses: Vec::new(),
        })
    }
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub report: ConditionReport,
    pub five_plus_pct: Option<f64>,
    pub baseline: Option<String>,
    pub p_value: Option<f64>,
}

pub fn write_report_tsv<W: Write>(rows: &[ReportRow], mut w: W) -> std::io::Result<()> {
    let runs = rows.iter().map(|r| r.report.runs.len()).max().unwrap_or(0);
    let mut head = vec!["condition".to_string(), "5+%".into(), "accuracy".into(), "macro_f1".into()];
    for i in 0..runs {
        head.push(format!("acc_run{}", i + 1));
        head.push(format!("f1_run{}", i + 1));
    }
    head.extend(["baseline".to_string(), "p_vs_baseline".into()]);
    writeln!(w, "{}", head.join("\t"))?;
    for r in rows {
        let mut cols = vec![
            r.report.condition.clone(),
            r.five_plus_pct.map(|x| format!("{x:.2}")).unwrap_or_default(),
            format!("{:.4}", r.report.mean_accuracy),
            format!("{:.4}", r.report.mean_macro_f1),
        ];
        for i in 0..runs {
            match r.report.runs.get(i) {
                Some(e) => {
                    cols.push(format!("{:.4}", e.accuracy));
                    cols.push(format!("{:.4}", e.macro_f1));
                }
                None => cols.extend([String::new(), String::new()]),
            }
        }
        cols.push(r.baseline.clone().unwrap_or_default());
        cols.push(r.p_value.map(|p| format!("{p:.3e}")).unwrap_or_default());
        writeln!(w, "{}", cols.join("\t"))?;
    }
    w.flush()
}
