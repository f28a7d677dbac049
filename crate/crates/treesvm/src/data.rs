//! Dataset ingestion: LIBSVM-format parsing, [0,1] scaling, shuffled
//! train/test splits, and synthetic blob generation.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Labeled feature vectors with a label alphabet. The universal input
/// currency of the toolkit: every feature vector is dense with dimension
/// `d`, and every label appears in `label_alphabet` (distinct labels in
/// first-appearance order).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<i32>,
    label_alphabet: Vec<i32>,
    d: usize,
}

impl Dataset {
    /// Build a dataset from parallel feature/label sequences, validating the
    /// structural invariants (nonempty, equal lengths, uniform dimension).
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<i32>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyInput);
        }
        if features.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features[0].len();
        for (i, x) in features.iter().enumerate() {
            if x.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "instance {i} has dimension {}, expected {d}",
                    x.len()
                )));
            }
        }
        let mut label_alphabet = Vec::new();
        for &l in &labels {
            if !label_alphabet.contains(&l) {
                label_alphabet.push(l);
            }
        }
        Ok(Self {
            features,
            labels,
            label_alphabet,
            d,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Distinct labels in first-appearance order.
    pub fn label_alphabet(&self) -> &[i32] {
        &self.label_alphabet
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn label(&self, i: usize) -> i32 {
        self.labels[i]
    }

    /// Number of instances carrying `label`.
    pub fn count_label(&self, label: i32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// New dataset containing the instances at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let features = indices.iter().map(|&i| self.features[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::new(features, labels)
    }

    /// New dataset keeping only instances whose label is in `keep`.
    pub fn filter_labels(&self, keep: &[i32]) -> Result<Self> {
        let indices: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(&self.labels[i]))
            .collect();
        self.select(&indices)
    }

    /// New dataset with the same features and labels remapped through `f`.
    pub fn relabel(&self, f: impl Fn(i32) -> i32) -> Result<Self> {
        let labels = self.labels.iter().map(|&l| f(l)).collect();
        Self::new(self.features.clone(), labels)
    }
}

/// Parse the LIBSVM sparse text format: each nonempty line is
/// `label idx:val idx:val ...` with strictly increasing 1-based indices.
/// Missing indices densify to 0.0; `d` is the maximum index seen anywhere.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut rows: Vec<(i32, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label_val: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("non-numeric label `{label_tok}`"),
        })?;
        if label_val.fract() != 0.0 || !label_val.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("non-integer label `{label_tok}`"),
            });
        }
        let label = label_val as i32;

        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got `{tok}`"),
            })?;
            let idx: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric index `{idx_s}`"),
            })?;
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("non-numeric value `{val_s}`"),
            })?;
            if idx == 0 || idx <= prev_index {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("index {idx} not strictly increasing from {prev_index}"),
                });
            }
            prev_index = idx;
            max_index = max_index.max(idx);
            entries.push((idx, val));
        }
        rows.push((label, entries));
    }

    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (label, entries) in rows {
        let mut x = vec![0.0; max_index];
        for (idx, val) in entries {
            x[idx - 1] = val;
        }
        features.push(x);
        labels.push(label);
    }
    Dataset::new(features, labels)
}

/// Serialize to the LIBSVM text format. Every feature is written, zeros
/// included, so the dimension survives a parse round trip.
pub fn write_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..ds.len() {
        let _ = write!(out, "{}", ds.label(i));
        for (j, v) in ds.feature(i).iter().enumerate() {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}

/// Read and parse a LIBSVM file from disk.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text)
}

/// Per-feature min/max recorded on a training set, mapping it into [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Scaler {
    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Persist as a two-row CSV: min line, then max line.
    pub fn to_csv(&self) -> String {
        let row = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!("{}\n{}\n", row(&self.min), row(&self.max))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        msg: format!("non-numeric scaler entry `{t}`"),
                    })
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        if rows.len() != 2 || rows[0].len() != rows[1].len() || rows[0].is_empty() {
            return Err(Error::ModelFormat(
                "scaler CSV must hold a min row and a max row of equal length".into(),
            ));
        }
        let (min, max) = (rows.remove(0), rows.remove(0));
        for j in 0..min.len() {
            if min[j] > max[j] {
                return Err(Error::ModelFormat(format!(
                    "scaler min[{j}] > max[{j}]"
                )));
            }
        }
        Ok(Self { min, max })
    }
}

/// Compute per-feature min/max over a training set.
pub fn fit_scaler(train: &Dataset) -> Scaler {
    let d = train.dim();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for x in train.features() {
        for j in 0..d {
            min[j] = min[j].min(x[j]);
            max[j] = max[j].max(x[j]);
        }
    }
    Scaler { min, max }
}

/// Map features through `(v - min) / (max - min)` and clamp to [0,1].
/// Constant features (min == max) scale to 0.0.
pub fn apply_scaler(s: &Scaler, ds: &Dataset) -> Result<Dataset> {
    if ds.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: ds.dim(),
        });
    }
    let features = ds
        .features()
        .iter()
        .map(|x| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| {
                    let range = s.max[j] - s.min[j];
                    if range > 0.0 {
                        ((v - s.min[j]) / range).clamp(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Dataset::new(features, ds.labels().to_vec())
}

/// Train/test split parameters: fraction of instances that go to training
/// (first `ceil(train_fraction * n)` after the seeded shuffle) and the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train_fraction must lie in (0,1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            seed,
        })
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 2.0 / 3.0,
            seed: 0,
        }
    }
}

/// Shuffle deterministically under the seed and split; both partitions are
/// kept nonempty. A partition left with fewer than two distinct labels is
/// reported through `log::warn!` but does not abort the split.
pub fn shuffle_split(ds: &Dataset, cfg: &SplitConfig) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 instances to split".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);

    let n_train = ((cfg.train_fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let train = ds.select(&perm[..n_train])?;
    let test = ds.select(&perm[n_train..])?;

    for (name, part) in [("train", &train), ("test", &test)] {
        if part.label_alphabet().len() < 2 {
            log::warn!(
                "{name} partition holds fewer than 2 distinct labels; training may be degenerate"
            );
        }
    }
    Ok((train, test))
}

/// Deterministic Gaussian blobs: one cluster per class, centers on a unit
/// lattice so any two centers are at least distance 1 apart.
pub fn synth_blobs(
    n_classes: usize,
    per_class: usize,
    d: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes < 2 || per_class < 1 || d < 1 {
        return Err(Error::InvalidParameter(format!(
            "synth_blobs needs n_classes >= 2, per_class >= 1, d >= 1 \
             (got {n_classes}, {per_class}, {d})"
        )));
    }
    if !(spread > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spread must be positive, got {spread}"
        )));
    }

    // Smallest lattice side that fits n_classes points in d dimensions.
    let mut side = 1usize;
    while (side as f64).powi(d as i32) < n_classes as f64 {
        side += 1;
    }
    let center = |class: usize| -> Vec<f64> {
        let mut c = vec![0.0; d];
        let mut rem = class;
        for slot in c.iter_mut() {
            *slot = (rem % side) as f64;
            rem /= side;
        }
        c
    };

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_classes * per_class);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for class in 0..n_classes {
        let c = center(class);
        for _ in 0..per_class {
            // Box-Muller on ChaCha uniforms keeps the stream stable across
            // rand_distr versions.
            let x: Vec<f64> = c
                .iter()
                .map(|&cj| {
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                    cj + spread * z
                })
                .collect();
            features.push(x);
            labels.push(class as i32);
        }
    }
    Dataset::new(features, labels)
}
