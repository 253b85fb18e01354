use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{decide, Classifier, ClassifierSpec, ModelError, PredictionRecord, Task, HAS_ISSUE, NO_ISSUE_BINARY};
use crate::lex::{lex, TokenKind};
use crate::transform::{FormattedSample, InputFormat};

pub const DEFAULT_DIMS_LOG2: u32 = 18;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub epochs: usize,
    pub l2: f64,
    pub dims_log2: u32,
    pub threshold: f64,
    /// Training stops once an epoch lowers the loss by less than this
    /// fraction.
    pub tol: f64,
    pub bigrams: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            epochs: 300,
            l2: 1e-4,
            dims_log2: DEFAULT_DIMS_LOG2,
            threshold: super::DEFAULT_THRESHOLD,
            tol: 1e-7,
            bigrams: true,
        }
    }
}

impl Hyperparams {
    /// Defaults overridden by whatever keys `map` sets.
    pub fn from_map(map: &BTreeMap<String, Value>) -> Result<Self, ModelError> {
        let mut base = serde_json::to_value(Hyperparams::default())?;
        let obj = base.as_object_mut().expect("struct serializes to an object");
        for (k, v) in map {
            if !obj.contains_key(k) {
                return Err(ModelError::Spec(format!("unknown hyperparameter {k}")));
            }
            obj.insert(k.clone(), v.clone());
        }
        let hp: Hyperparams = serde_json::from_value(base)?;
        if !(1..=30).contains(&hp.dims_log2) {
            return Err(ModelError::Spec("dims_log2 must be in 1..=30".into()));
        }
        if !(0.0..=1.0).contains(&hp.threshold) || hp.l2 < 0.0 {
            return Err(ModelError::Spec("threshold must be in [0, 1] and l2 non-negative".into()));
        }
        Ok(hp)
    }

    pub fn to_map(&self) -> BTreeMap<String, Value> {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        }
    }
}

/// Maps method text to hashed token counts.
///
/// Code tokens are features as they are, plus adjacent-pair features.
/// Comments and string literals contribute their words under a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureHasher {
    pub dims_log2: u32,
    pub bigrams: bool,
}

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in *p {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

impl FeatureHasher {
    fn bucket(&self, parts: &[&[u8]]) -> u32 {
        (fnv1a(parts) & ((1u64 << self.dims_log2) - 1)) as u32
    }

    pub fn counts(&self, text: &str) -> BTreeMap<u32, u32> {
        let mut out = BTreeMap::new();
        let mut add = |b: u32| *out.entry(b).or_insert(0) += 1;
        let mut prev: Option<&str> = None;
        let words = |s: &str| -> Vec<String> {
            s.split(|c: char| !c.is_alphanumeric() && c != '_')
                .filter(|w| !w.is_empty())
                .map(str::to_lowercase)
                .collect()
        };
        match lex(text) {
            Ok(tokens) => {
                for t in &tokens {
                    let prefix: &[u8] = match t.kind {
                        TokenKind::Whitespace => continue,
                        TokenKind::LineComment | TokenKind::BlockComment | TokenKind::Javadoc => b"c:",
                        TokenKind::StringLit | TokenKind::CharLit => b"s:",
                        _ => {
                            add(self.bucket(&[t.text.as_bytes()]));
                            if self.bigrams {
                                if let Some(p) = prev {
                                    add(self.bucket(&[p.as_bytes(), t.text.as_bytes()]));
                                }
                            }
                            prev = Some(&t.text);
                            continue;
                        }
                    };
                    for w in words(&t.text) {
                        add(self.bucket(&[prefix, w.as_bytes()]));
                    }
                }
            }
            // truncated or odd text still gets whitespace-split features
            Err(_) => {
                for w in text.split_whitespace() {
                    add(self.bucket(&[w.as_bytes()]));
                }
            }
        }
        out
    }
}

type Row = Vec<(u32, f64)>;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_loss: Option<f64>,
    /// Binary accuracy, or exact-match accuracy for multi-label.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochReport>,
    pub features: usize,
    pub learning_rate: f64,
}

/// Per-label logistic scorers over hashed TF-IDF features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub spec: ClassifierSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    /// Hash buckets seen in training, ascending; position is the feature index.
    buckets: Vec<u32>,
    idf: Vec<f64>,
    /// One weight vector per scorer. Binary trains a single `has-issue`
    /// scorer; multi-label trains one per label id.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

struct Features {
    index: HashMap<u32, u32>,
    idf: Vec<f64>,
}

impl Features {
    fn row(&self, counts: &BTreeMap<u32, u32>) -> Row {
        let mut row: Row = counts
            .iter()
            .filter_map(|(b, &c)| {
                self.index
                    .get(b)
                    .map(|&i| (i, (1.0 + f64::from(c).ln()) * self.idf[i as usize]))
            })
            .collect();
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|(_, v)| *v /= norm);
        }
        row
    }
}

/// Largest eigenvalue of the mean Gram matrix of `rows` with a bias column,
/// by power iteration.
fn gram_top_eigenvalue(rows: &[Row], dims: usize) -> f64 {
    let n = rows.len() as f64;
    let mut v = vec![1.0 / ((dims + 1) as f64).sqrt(); dims + 1];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mut out = vec![0.0; dims + 1];
        for r in rows {
            let dot = r.iter().map(|&(i, x)| x * v[i as usize]).sum::<f64>() + v[dims];
            for &(i, x) in r {
                out[i as usize] += x * dot / n;
            }
            out[dims] += dot / n;
        }
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v = out.into_iter().map(|x| x / norm).collect();
    }
    lambda
}

struct Scorer<'a> {
    rows: &'a [Row],
    y: Vec<f64>,
    w: Vec<f64>,
    b: f64,
    z: Vec<f64>,
    lr: f64,
    l2: f64,
}

impl Scorer<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(i, x)| w[i as usize] * x).sum::<f64>() + b)
            .collect()
    }

    fn loss_of(&self, z: &[f64], w: &[f64]) -> f64 {
        let n = z.len() as f64;
        let data: f64 = z.iter().zip(&self.y).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / n;
        data + 0.5 * self.l2 * w.iter().map(|x| x * x).sum::<f64>()
    }

    fn loss(&self) -> f64 {
        self.loss_of(&self.z, &self.w)
    }

    /// One gradient step, halving the step until the loss does not rise.
    fn step(&mut self) -> f64 {
        let n = self.rows.len() as f64;
        let current = self.loss();
        let mut gw: Vec<f64> = self.w.iter().map(|w| self.l2 * w).collect();
        let mut gb = 0.0;
        for ((r, &z), &y) in self.rows.iter().zip(&self.z).zip(&self.y) {
            let d = (sigmoid(z) - y) / n;
            gb += d;
            for &(i, x) in r {
                gw[i as usize] += d * x;
            }
        }
        for _ in 0..60 {
            let w: Vec<f64> = self.w.iter().zip(&gw).map(|(w, g)| w - self.lr * g).collect();
            let b = self.b - self.lr * gb;
            let z = self.margins(&w, b);
            let next = self.loss_of(&z, &w);
            if next <= current {
                self.w = w;
                self.b = b;
                self.z = z;
                return next;
            }
            self.lr *= 0.5;
        }
        current
    }
}

impl BaselineModel {
    pub fn hasher(&self) -> FeatureHasher {
        FeatureHasher {
            dims_log2: self.hyperparams.dims_log2,
            bigrams: self.hyperparams.bigrams,
        }
    }

    fn features(&self) -> Features {
        Features {
            index: self.buckets.iter().enumerate().map(|(i, &b)| (b, i as u32)).collect(),
            idf: self.idf.clone(),
        }
    }

    /// Fits the scorers by full-batch gradient descent on the mean logistic
    /// loss plus an L2 penalty. `labels` are issue labels per sample (empty
    /// for a method without issues). Deterministic; `seed` is recorded.
    pub fn train(
        spec: ClassifierSpec,
        train: &[(FormattedSample, BTreeSet<String>)],
        val: &[(FormattedSample, BTreeSet<String>)],
        seed: u64,
    ) -> Result<(BaselineModel, TrainingReport), ModelError> {
        spec.validate()?;
        if train.is_empty() {
            return Err(ModelError::EmptyTrainingSet);
        }
        let hp = Hyperparams::from_map(&spec.hyperparams)?;
        let hasher = FeatureHasher {
            dims_log2: hp.dims_log2,
            bigrams: hp.bigrams,
        };
        let targets: Vec<BTreeSet<String>> = train
            .iter()
            .map(|(s, l)| spec.targets(&s.method_id, l))
            .collect::<Result<_, _>>()?;
        let counts: Vec<BTreeMap<u32, u32>> = train.par_iter().map(|(s, _)| hasher.counts(&s.text)).collect();

        let mut df: BTreeMap<u32, usize> = BTreeMap::new();
        for c in &counts {
            for &b in c.keys() {
                *df.entry(b).or_insert(0) += 1;
            }
        }
        let n = train.len() as f64;
        let buckets: Vec<u32> = df.keys().copied().collect();
        let idf: Vec<f64> = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        let mut model = BaselineModel {
            format: train.first().map(|(s, _)| s.format),
            hyperparams: hp.clone(),
            seed,
            buckets,
            idf,
            weights: Vec::new(),
            bias: Vec::new(),
            spec,
        };
        let feats = model.features();
        let rows: Vec<Row> = counts.par_iter().map(|c| feats.row(c)).collect();
        let dims = model.buckets.len();
        let lipschitz = 0.25 * gram_top_eigenvalue(&rows, dims) + hp.l2;
        let lr = 1.0 / lipschitz.max(1e-12);
        debug!("{} samples, {dims} features, step {lr:.3}", rows.len());

        let scored: Vec<&str> = match model.spec.task {
            Task::Binary => vec![HAS_ISSUE],
            Task::MultiLabel => model.spec.label_ids.iter().map(String::as_str).collect(),
        };
        let mut scorers: Vec<Scorer> = scored
            .iter()
            .map(|label| Scorer {
                rows: &rows,
                y: targets.iter().map(|t| f64::from(u8::from(t.contains(*label)))).collect(),
                w: vec![0.0; dims],
                b: 0.0,
                z: vec![0.0; rows.len()],
                lr,
                l2: hp.l2,
            })
            .collect();

        let val_counts: Vec<BTreeMap<u32, u32>> = val.par_iter().map(|(s, _)| hasher.counts(&s.text)).collect();
        let val_rows: Vec<Row> = val_counts.iter().map(|c| feats.row(c)).collect();
        let val_targets: Vec<BTreeSet<String>> = val
            .iter()
            .map(|(s, l)| model.spec.targets(&s.method_id, l))
            .collect::<Result<_, _>>()?;

        let mut report = TrainingReport {
            epochs: Vec::new(),
            features: dims,
            learning_rate: lr,
        };
        let mut prev = scorers.iter().map(Scorer::loss).sum::<f64>();
        for epoch in 1..=hp.epochs {
            let loss: f64 = scorers.iter_mut().map(Scorer::step).sum();
            model.weights = scorers.iter().map(|s| s.w.clone()).collect();
            model.bias = scorers.iter().map(|s| s.b).collect();
            let (val_loss, val_accuracy) = if val.is_empty() {
                (None, None)
            } else {
                let (l, a) = model.evaluate_rows(&val_rows, &val_targets);
                (Some(l), Some(a))
            };
            report.epochs.push(EpochReport {
                epoch,
                train_loss: loss,
                val_loss,
                val_accuracy,
            });
            if prev - loss <= hp.tol * prev.abs() {
                break;
            }
            prev = loss;
        }
        if model.weights.is_empty() {
            model.weights = scorers.iter().map(|s| s.w.clone()).collect();
            model.bias = scorers.iter().map(|s| s.b).collect();
        }
        Ok((model, report))
    }

    fn raw_scores(&self, row: &Row) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| sigmoid(row.iter().map(|&(i, x)| w[i as usize] * x).sum::<f64>() + b))
            .collect()
    }

    fn score_map(&self, row: &Row) -> BTreeMap<String, f64> {
        let raw = self.raw_scores(row);
        match self.spec.task {
            Task::Binary => BTreeMap::from([
                (HAS_ISSUE.to_string(), raw[0]),
                (NO_ISSUE_BINARY.to_string(), 1.0 - raw[0]),
            ]),
            Task::MultiLabel => self.spec.label_ids.iter().cloned().zip(raw).collect(),
        }
    }

    fn evaluate_rows(&self, rows: &[Row], targets: &[BTreeSet<String>]) -> (f64, f64) {
        let mut loss = 0.0;
        let mut correct = 0usize;
        for (r, t) in rows.iter().zip(targets) {
            let scores = self.score_map(r);
            for (label, &p) in &scores {
                if self.spec.task == Task::Binary && label != HAS_ISSUE {
                    continue;
                }
                let p = p.clamp(1e-15, 1.0 - 1e-15);
                loss -= if t.contains(label) { p.ln() } else { (1.0 - p).ln() };
            }
            if decide(self.spec.task, &scores, self.hyperparams.threshold) == *t {
                correct += 1;
            }
        }
        let n = rows.len().max(1) as f64;
        (loss / n, correct as f64 / n)
    }

    /// sha256 over all weights and biases.
    pub fn weights_hash(&self) -> String {
        let mut h = Sha256::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            for x in w {
                h.update(x.to_bits().to_le_bytes());
            }
            h.update(b.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let raw = serde_json::to_vec(self)?;
        std::fs::write(path, raw).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let raw = std::fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        let model: BaselineModel = serde_json::from_slice(&raw)?;
        model.spec.validate()?;
        let scorers = if model.spec.task == Task::Binary { 1 } else { model.spec.label_ids.len() };
        if model.weights.len() != scorers
            || model.bias.len() != scorers
            || model.idf.len() != model.buckets.len()
            || model.weights.iter().any(|w| w.len() != model.buckets.len())
        {
            return Err(ModelError::Spec(format!("{}: inconsistent model dimensions", path.display())));
        }
        Ok(model)
    }
}

impl Classifier for BaselineModel {
    fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    fn predict(&self, samples: &[FormattedSample]) -> Result<Vec<PredictionRecord>, ModelError> {
        let hasher = self.hasher();
        let feats = self.features();
        Ok(samples
            .par_iter()
            .map(|s| {
                let row = feats.row(&hasher.counts(&s.text));
                PredictionRecord::new(self.spec.task, s.method_id.clone(), self.score_map(&row), self.hyperparams.threshold)
            })
            .collect())
    }
}
