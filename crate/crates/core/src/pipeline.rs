// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Reservoir features and the one-layer classifier trained on them.
//!
//! An encoded state `ψ` is evolved by the reservoir `U` and measured in the
//! computational basis; the outcome distribution `p_z = |⟨z|U|ψ⟩|²` is the
//! feature vector. A softmax layer `softmax(W p + b)` is then trained by
//! minibatch SGD on mean cross-entropy.

use std::io::Write;
use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EncodedData, EncodedSample, EncodedSet, NUM_CLASSES};
use crate::linalg::{LinalgError, RandomSeed, UnitaryMatrix};
use crate::reservoir::{FeatureMapSpec, ReservoirError};

const STATES_PER_CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("epoch window [{start}, {end}] is not inside 1..={epochs}")]
    WindowOutOfRange {
        start: usize,
        end: usize,
        epochs: usize,
    },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("ensembles need a random model, got {0}")]
    NotRandom(String),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Measurement distribution over the `2^L` basis states.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub probs: Array1<f64>,
}

impl FeatureVector {
    pub fn total(&self) -> f64 {
        self.probs.sum()
    }
}

/// Exact outcome probabilities of `U|ψ⟩`.
pub fn feature_vector(
    u: &UnitaryMatrix,
    s: &EncodedSample,
) -> Result<FeatureVector, PipelineError> {
    if u.dim() != s.state.len() {
        return Err(PipelineError::DimensionMismatch {
            expected: u.dim(),
            actual: s.state.len(),
        });
    }
    let amp = u.as_array().dot(&s.state);
    Ok(FeatureVector {
        probs: amp.mapv(|z| z.norm_sqr()),
    })
}

/// Feature vectors of every sample of `set`, one per row.
pub fn feature_matrix(u: &UnitaryMatrix, set: &EncodedSet) -> Result<Array2<f64>, PipelineError> {
    feature_rows(u, set, 0..set.len())
}

/// Feature vectors of samples `range`.
pub fn feature_rows(
    u: &UnitaryMatrix,
    set: &EncodedSet,
    range: Range<usize>,
) -> Result<Array2<f64>, PipelineError> {
    let n = set.dim();
    if u.dim() != n {
        return Err(PipelineError::DimensionMismatch {
            expected: u.dim(),
            actual: n,
        });
    }
    let ut = u.as_array().t();
    let mut out = Array2::zeros((range.len(), n));
    let base = range.start;
    let mut start = range.start;
    while start < range.end {
        let end = (start + STATES_PER_CHUNK).min(range.end);
        // Rows of states · U^T are the evolved states U ψ.
        let evolved = set.states(start..end).dot(&ut);
        out.slice_mut(s![start - base..end - base, ..])
            .zip_mut_with(&evolved, |p, z: &Complex64| *p = z.norm_sqr());
        start = end;
    }
    Ok(out)
}

/// Empirical frequencies from `shots` projective measurements.
pub fn sample_shots(
    fv: &FeatureVector,
    shots: u64,
    seed: RandomSeed,
) -> Result<FeatureVector, PipelineError> {
    if shots == 0 {
        return Err(PipelineError::InvalidConfig(
            "shots must be positive".into(),
        ));
    }
    let mut rng = seed.rng();
    let mut cdf = Vec::with_capacity(fv.probs.len());
    let mut acc = 0.0;
    for &p in &fv.probs {
        acc += p;
        cdf.push(acc);
    }
    let mut counts = vec![0u64; cdf.len()];
    for _ in 0..shots {
        let r = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
        counts[k] += 1;
    }
    Ok(FeatureVector {
        probs: counts.iter().map(|&c| c as f64 / shots as f64).collect(),
    })
}

/// Applies [`sample_shots`] to every row, with a sub-seed per row.
pub fn sample_shot_matrix(
    features: &Array2<f64>,
    shots: u64,
    seed: RandomSeed,
) -> Result<Array2<f64>, PipelineError> {
    let mut out = Array2::zeros(features.raw_dim());
    for (i, (row, mut dst)) in features.rows().into_iter().zip(out.rows_mut()).enumerate() {
        let fv = FeatureVector {
            probs: row.to_owned(),
        };
        dst.assign(&sample_shots(&fv, shots, seed.derive(i as u64))?.probs);
    }
    Ok(out)
}

/// How feature vectors are scaled before entering the classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputScale {
    /// Raw probabilities.
    Unit,
    /// Probabilities multiplied by the Hilbert-space dimension, so a uniform
    /// distribution maps to all ones.
    Dimension,
}

/// SGD settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: RandomSeed,
    /// 1-based inclusive epoch range used for the reported statistics.
    pub window: (usize, usize),
    pub input_scale: InputScale,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 100,
            learning_rate: 0.003,
            seed: RandomSeed(0),
            window: (250, 300),
            input_scale: InputScale::Dimension,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        check_window(self.window, self.epochs)
    }

    /// Multiplier applied to features of dimension `dim`.
    pub fn scale_for(&self, dim: usize) -> f64 {
        match self.input_scale {
            InputScale::Unit => 1.0,
            InputScale::Dimension => dim as f64,
        }
    }
}

fn check_window((start, end): (usize, usize), epochs: usize) -> Result<(), PipelineError> {
    if start == 0 || start > end || end > epochs {
        return Err(PipelineError::WindowOutOfRange { start, end, epochs });
    }
    Ok(())
}

/// Weights and bias of the softmax layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnnParams {
    /// `classes x features`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl OnnParams {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            weights: Array2::zeros((classes, features)),
            bias: Array1::zeros(classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    /// `x W^T + b` for a batch of rows.
    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        z
    }

    /// Predicted class of every row; ties go to the lowest class index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<usize> {
        self.logits(x)
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(0, |best, (k, &v)| if v > r[best] { k } else { best })
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

/// Row-wise softmax, shifted by the row maximum.
fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Mean cross-entropy of a batch and its gradient.
pub fn loss_and_gradient(
    params: &OnnParams,
    x: ArrayView2<f64>,
    labels: &[u8],
) -> (f64, OnnParams) {
    let b = x.nrows() as f64;
    let mut p = params.logits(x);
    softmax_rows(&mut p);
    let mut loss = 0.0;
    for (mut row, &y) in p.rows_mut().into_iter().zip(labels) {
        loss -= row[y as usize].max(f64::MIN_POSITIVE).ln();
        row[y as usize] -= 1.0;
    }
    p /= b;
    let grad_w = p.t().dot(&x);
    let grad_b = p.sum_axis(Axis(0));
    (
        loss / b,
        OnnParams {
            weights: grad_w,
            bias: grad_b,
        },
    )
}

/// Per-epoch accuracies and the final classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_acc: Vec<f64>,
    pub test_acc: Vec<f64>,
    pub params: OnnParams,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.train_acc.len()
    }

    /// Writes `epoch,train_acc,test_acc` rows, epochs counted from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,train_acc,test_acc")?;
        for (i, (a, b)) in self.train_acc.iter().zip(&self.test_acc).enumerate() {
            writeln!(out, "{},{a:.6},{b:.6}", i + 1)?;
        }
        Ok(())
    }
}

/// Fraction of rows whose predicted class matches the label.
pub fn accuracy(params: &OnnParams, x: ArrayView2<f64>, labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut correct = 0usize;
    for start in (0..x.nrows()).step_by(STATES_PER_CHUNK * 4) {
        let end = (start + STATES_PER_CHUNK * 4).min(x.nrows());
        let pred = params.predict(x.slice(s![start..end, ..]));
        correct += pred
            .iter()
            .zip(&labels[start..end])
            .filter(|(p, &y)| **p == y as usize)
            .count();
    }
    correct as f64 / labels.len() as f64
}

/// Trains the softmax layer from zero initialization. Features are used as
/// given; apply any input scaling beforehand.
pub fn train_onn(
    features: ArrayView2<f64>,
    labels: &[u8],
    test_features: ArrayView2<f64>,
    test_labels: &[u8],
    cfg: &TrainConfig,
) -> Result<TrainHistory, PipelineError> {
    train_onn_classes(
        features,
        labels,
        test_features,
        test_labels,
        cfg,
        NUM_CLASSES,
    )
}

/// [`train_onn`] with an explicit class count.
pub fn train_onn_classes(
    features: ArrayView2<f64>,
    labels: &[u8],
    test_features: ArrayView2<f64>,
    test_labels: &[u8],
    cfg: &TrainConfig,
    classes: usize,
) -> Result<TrainHistory, PipelineError> {
    cfg.validate()?;
    if features.nrows() != labels.len() {
        return Err(PipelineError::DimensionMismatch {
            expected: features.nrows(),
            actual: labels.len(),
        });
    }
    if test_features.nrows() != test_labels.len() {
        return Err(PipelineError::DimensionMismatch {
            expected: test_features.nrows(),
            actual: test_labels.len(),
        });
    }
    if test_features.ncols() != features.ncols() {
        return Err(PipelineError::DimensionMismatch {
            expected: features.ncols(),
            actual: test_features.ncols(),
        });
    }
    if features.nrows() == 0 {
        return Err(PipelineError::InvalidConfig("empty training set".into()));
    }
    if let Some(&y) = labels
        .iter()
        .chain(test_labels)
        .find(|&&y| y as usize >= classes)
    {
        return Err(PipelineError::InvalidConfig(format!(
            "label {y} outside 0..{classes}"
        )));
    }

    let n = features.nrows();
    let d = features.ncols();
    let mut params = OnnParams::zeros(classes, d);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = cfg.seed.rng();
    let mut batch = Array2::<f64>::zeros((cfg.batch_size, d));
    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    let mut train_acc = Vec::with_capacity(cfg.epochs);
    let mut test_acc = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch_labels.clear();
            for (r, &i) in chunk.iter().enumerate() {
                batch.row_mut(r).assign(&features.row(i));
                batch_labels.push(labels[i]);
            }
            let xb = batch.slice(s![..chunk.len(), ..]);
            let (_, grad) = loss_and_gradient(&params, xb, &batch_labels);
            params.weights.scaled_add(-cfg.learning_rate, &grad.weights);
            params.bias.scaled_add(-cfg.learning_rate, &grad.bias);
        }
        train_acc.push(accuracy(&params, features, labels));
        test_acc.push(accuracy(&params, test_features, test_labels));
    }
    Ok(TrainHistory {
        train_acc,
        test_acc,
        params,
    })
}

/// Window statistics of a training history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub test_mean: f64,
    pub test_std: f64,
    pub train_mean: f64,
    pub train_std: f64,
    pub delta_acc: f64,
}

/// Means and population standard deviations over the 1-based inclusive
/// epoch `window`.
pub fn accuracy_report(
    h: &TrainHistory,
    window: (usize, usize),
) -> Result<AccuracyReport, PipelineError> {
    check_window(window, h.epochs())?;
    let range = window.0 - 1..window.1;
    let (test_mean, test_std) = mean_std(&h.test_acc[range.clone()]);
    let (train_mean, train_std) = mean_std(&h.train_acc[range]);
    Ok(AccuracyReport {
        test_mean,
        test_std,
        train_mean,
        train_std,
        delta_acc: train_mean - test_mean,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Result of one reservoir + classifier run.
#[derive(Clone, Debug)]
pub struct ModelRun {
    pub spec: FeatureMapSpec,
    pub cfg: TrainConfig,
    pub history: TrainHistory,
    pub report: AccuracyReport,
}

/// Optional measurement noise for [`run_model`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Replace exact probabilities by frequencies from this many shots.
    pub shots: Option<u64>,
}

/// Scaled train and test features for a reservoir.
pub fn reservoir_features(
    u: &UnitaryMatrix,
    data: &EncodedData,
    scale: f64,
    options: FeatureOptions,
    seed: RandomSeed,
) -> Result<(Array2<f64>, Array2<f64>), PipelineError> {
    let mut train = feature_matrix(u, &data.train)?;
    let mut test = feature_matrix(u, &data.test)?;
    if let Some(shots) = options.shots {
        train = sample_shot_matrix(&train, shots, seed.derive(1))?;
        test = sample_shot_matrix(&test, shots, seed.derive(2))?;
    }
    if scale != 1.0 {
        train *= scale;
        test *= scale;
    }
    Ok((train, test))
}

/// Builds the reservoir, extracts features and trains the classifier.
pub fn run_model(
    spec: &FeatureMapSpec,
    data: &EncodedData,
    cfg: &TrainConfig,
) -> Result<ModelRun, PipelineError> {
    run_model_with(spec, data, cfg, FeatureOptions::default())
}

pub fn run_model_with(
    spec: &FeatureMapSpec,
    data: &EncodedData,
    cfg: &TrainConfig,
    options: FeatureOptions,
) -> Result<ModelRun, PipelineError> {
    cfg.validate()?;
    let u = spec.build()?;
    run_with_unitary(&u, spec, data, cfg, options)
}

/// [`run_model_with`] for a reservoir that is already built from `spec`.
pub fn run_with_unitary(
    u: &UnitaryMatrix,
    spec: &FeatureMapSpec,
    data: &EncodedData,
    cfg: &TrainConfig,
    options: FeatureOptions,
) -> Result<ModelRun, PipelineError> {
    cfg.validate()?;
    let (train, test) = reservoir_features(u, data, cfg.scale_for(u.dim()), options, cfg.seed)?;
    let history = train_onn(
        train.view(),
        &data.train.labels,
        test.view(),
        &data.test.labels,
        cfg,
    )?;
    let report = accuracy_report(&history, cfg.window)?;
    Ok(ModelRun {
        spec: spec.clone(),
        cfg: cfg.clone(),
        history,
        report,
    })
}

/// Realization-averaged statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub n_realizations: usize,
    pub test_mean: f64,
    pub test_std: f64,
    pub train_mean: f64,
    pub train_std: f64,
    pub delta_acc: f64,
    pub delta_std: f64,
    pub realizations: Vec<Realization>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub model_seed: RandomSeed,
    pub train_seed: RandomSeed,
    pub report: AccuracyReport,
}

/// Combines per-realization reports; standard deviations are across
/// realizations (population convention).
pub fn summarize_ensemble(realizations: Vec<Realization>) -> EnsembleReport {
    let pick = |f: fn(&AccuracyReport) -> f64| -> Vec<f64> {
        realizations.iter().map(|r| f(&r.report)).collect()
    };
    let (test_mean, test_std) = mean_std(&pick(|r| r.test_mean));
    let (train_mean, train_std) = mean_std(&pick(|r| r.train_mean));
    let (delta_acc, delta_std) = mean_std(&pick(|r| r.delta_acc));
    EnsembleReport {
        n_realizations: realizations.len(),
        test_mean,
        test_std,
        train_mean,
        train_std,
        delta_acc,
        delta_std,
        realizations,
    }
}

/// Runs realizations `k = 1..=n` with model seed `spec.seed + k` and
/// training seed `cfg.seed + k`. `on_done` sees each finished run.
pub fn ensemble_report(
    spec: &FeatureMapSpec,
    n_realizations: usize,
    cfg: &TrainConfig,
    data: &EncodedData,
    mut on_done: impl FnMut(usize, &ModelRun),
) -> Result<EnsembleReport, PipelineError> {
    let base = spec
        .seed()
        .ok_or_else(|| PipelineError::NotRandom(spec.kind().to_string()))?;
    if n_realizations == 0 {
        return Err(PipelineError::InvalidConfig(
            "n_realizations must be positive".into(),
        ));
    }
    let mut realizations = Vec::with_capacity(n_realizations);
    for k in 1..=n_realizations as u64 {
        let model_seed = base.offset(k);
        let train_seed = cfg.seed.offset(k);
        let run_cfg = TrainConfig {
            seed: train_seed,
            ..cfg.clone()
        };
        let run = run_model(&spec.with_seed(model_seed), data, &run_cfg)?;
        on_done(k as usize, &run);
        realizations.push(Realization {
            model_seed,
            train_seed,
            report: run.report,
        });
    }
    Ok(summarize_ensemble(realizations))
}

/// Probabilities in one row sum to one and are nonnegative.
pub fn check_distribution(p: ArrayView1<f64>, tol: f64) -> bool {
    p.iter().all(|&v| v >= 0.0) && (p.sum() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::product_state;
    use crate::linalg::haar_unitary;

    fn hadamard_all(l: usize) -> UnitaryMatrix {
        let n = 1usize << l;
        let h = 1.0 / (n as f64).sqrt();
        UnitaryMatrix::new(Array2::from_shape_fn((n, n), |(x, y)| {
            let sign = if (x & y).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            Complex64::new(sign * h, 0.0)
        }))
        .unwrap()
    }

    fn sample(angles: Vec<f64>) -> EncodedSample {
        EncodedSample {
            state: product_state(&angles),
            angles,
            label: 0,
        }
    }

    #[test]
    fn identity_reservoir_gives_point_mass() {
        let fv = feature_vector(&UnitaryMatrix::identity(8), &sample(vec![0.0; 6])).unwrap();
        assert_eq!(fv.probs[0], 1.0);
        assert_eq!(fv.total(), 1.0);
    }

    #[test]
    fn hadamard_reservoir_gives_uniform() {
        let fv = feature_vector(&hadamard_all(3), &sample(vec![0.0; 6])).unwrap();
        assert!(fv.probs.iter().all(|p| (p - 0.125).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            feature_vector(&UnitaryMatrix::identity(4), &sample(vec![0.0; 6])),
            Err(PipelineError::DimensionMismatch { .. })
        ));
    }

    fn random_set(l: usize, n: usize, seed: u64) -> EncodedSet {
        let mut rng = RandomSeed(seed).rng();
        let angles = Array2::from_shape_simple_fn((n, 2 * l), || 6.0 * rng.random::<f64>());
        EncodedSet {
            qubits: l,
            angles,
            labels: (0..n).map(|i| (i % 10) as u8).collect(),
        }
    }

    #[test]
    fn batched_features_match_brute_force() {
        let u = haar_unitary(16, RandomSeed(1)).unwrap();
        let set = random_set(4, 5, 2);
        let m = feature_matrix(&u, &set).unwrap();
        for i in 0..set.len() {
            let psi = set.sample(i).state;
            for z in 0..16 {
                let amp: Complex64 = (0..16).map(|k| u.as_array()[[z, k]] * psi[k]).sum();
                assert!((m[[i, z]] - amp.norm_sqr()).abs() < 1e-12);
            }
            assert!(check_distribution(m.row(i), 1e-10));
        }
        let part = feature_rows(&u, &set, 2..4).unwrap();
        assert_eq!(part.row(0), m.row(2));
    }

    #[test]
    fn shots_converge_to_probabilities() {
        let u = haar_unitary(8, RandomSeed(3)).unwrap();
        let fv = feature_vector(&u, &sample(vec![0.3, 1.0, 2.0, 0.1, 1.5, 4.0])).unwrap();
        let est = sample_shots(&fv, 200_000, RandomSeed(4)).unwrap();
        assert!((est.total() - 1.0).abs() < 1e-12);
        for (p, q) in fv.probs.iter().zip(&est.probs) {
            assert!((p - q).abs() < 5.0 * (p * (1.0 - p) / 200_000.0).sqrt() + 1e-9);
        }
        assert_eq!(est, sample_shots(&fv, 200_000, RandomSeed(4)).unwrap());
        assert!(sample_shots(&fv, 0, RandomSeed(4)).is_err());
    }

    fn toy_params(classes: usize, d: usize, seed: u64) -> OnnParams {
        let mut rng = RandomSeed(seed).rng();
        OnnParams {
            weights: Array2::from_shape_simple_fn((classes, d), || rng.random::<f64>() - 0.5),
            bias: Array1::from_shape_simple_fn(classes, || rng.random::<f64>() - 0.5),
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (classes, d, n) = (10, 6, 10);
        let params = toy_params(classes, d, 7);
        let mut rng = RandomSeed(8).rng();
        let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
        let labels: Vec<u8> = (0..n).map(|i| (i * 3 % classes) as u8).collect();
        let (_, grad) = loss_and_gradient(&params, x.view(), &labels);
        let h = 1e-5;
        let fd = |perturb: &dyn Fn(&mut OnnParams, f64)| {
            let mut p = params.clone();
            perturb(&mut p, h);
            let up = loss_and_gradient(&p, x.view(), &labels).0;
            let mut p = params.clone();
            perturb(&mut p, -h);
            let down = loss_and_gradient(&p, x.view(), &labels).0;
            (up - down) / (2.0 * h)
        };
        for c in 0..classes {
            for j in 0..d {
                let num = fd(&|p, e| p.weights[[c, j]] += e);
                let ana = grad.weights[[c, j]];
                assert!(
                    (num - ana).abs() <= 1e-6 * ana.abs().max(1e-3),
                    "w[{c},{j}]: {num} vs {ana}"
                );
            }
            let num = fd(&|p, e| p.bias[c] += e);
            assert!((num - grad.bias[c]).abs() <= 1e-6 * grad.bias[c].abs().max(1e-3));
        }
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        // Class 0 puts its mass on the first two simplex coordinates, class 1 on the last two.
        let mut rng = RandomSeed(9).rng();
        let n = 200;
        let mut x = Array2::zeros((n, 4));
        let mut labels = vec![0u8; n];
        for i in 0..n {
            let a = 0.7 + 0.3 * rng.random::<f64>();
            let split = rng.random::<f64>();
            let (hi, lo) = if i % 2 == 0 { (0, 2) } else { (2, 0) };
            x[[i, hi]] = a * split;
            x[[i, hi + 1]] = a * (1.0 - split);
            x[[i, lo]] = (1.0 - a) / 2.0;
            x[[i, lo + 1]] = (1.0 - a) / 2.0;
            labels[i] = (i % 2) as u8;
        }
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 10,
            window: (41, 50),
            ..TrainConfig::default()
        };
        let h = train_onn_classes(x.view(), &labels, x.view(), &labels, &cfg, 2).unwrap();
        assert_eq!(*h.train_acc.last().unwrap(), 1.0);
        assert!(h.params.is_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let set = random_set(3, 60, 10);
        let u = haar_unitary(8, RandomSeed(11)).unwrap();
        let x = feature_matrix(&u, &set).unwrap() * 8.0;
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 7,
            window: (1, 5),
            seed: RandomSeed(12),
            ..TrainConfig::default()
        };
        let a = train_onn(x.view(), &set.labels, x.view(), &set.labels, &cfg).unwrap();
        let b = train_onn(x.view(), &set.labels, x.view(), &set.labels, &cfg).unwrap();
        assert_eq!(a, b);
        let other = TrainConfig {
            seed: RandomSeed(13),
            ..cfg
        };
        let c = train_onn(x.view(), &set.labels, x.view(), &set.labels, &other).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn training_rejects_bad_shapes_and_configs() {
        let x = Array2::<f64>::zeros((4, 3));
        let cfg = TrainConfig {
            epochs: 2,
            window: (1, 2),
            ..TrainConfig::default()
        };
        assert!(train_onn(x.view(), &[0, 1, 2], x.view(), &[0, 1, 2, 3], &cfg).is_err());
        assert!(train_onn(x.view(), &[0, 1, 2, 11], x.view(), &[0, 1, 2, 3], &cfg).is_err());
        let bad = TrainConfig {
            window: (1, 3),
            ..cfg.clone()
        };
        assert!(matches!(
            bad.validate(),
            Err(PipelineError::WindowOutOfRange { .. })
        ));
        let bad = TrainConfig {
            learning_rate: -1.0,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    fn history(train: Vec<f64>, test: Vec<f64>) -> TrainHistory {
        TrainHistory {
            train_acc: train,
            test_acc: test,
            params: OnnParams::zeros(10, 1),
        }
    }

    #[test]
    fn report_of_constant_history() {
        let h = history(vec![0.95; 10], vec![0.9; 10]);
        let r = accuracy_report(&h, (1, 10)).unwrap();
        assert!((r.test_mean - 0.9).abs() < 1e-15);
        assert!(r.test_std < 1e-15);
        assert!((r.delta_acc - 0.05).abs() < 1e-15);
    }

    #[test]
    fn report_of_alternating_history() {
        let test: Vec<f64> = (0..10)
            .map(|i| if i % 2 == 0 { 0.9 } else { 1.0 })
            .collect();
        let r = accuracy_report(&history(test.clone(), test), (1, 10)).unwrap();
        assert!((r.test_mean - 0.95).abs() < 1e-12);
        assert!((r.test_std - 0.05).abs() < 1e-12);
        assert_eq!(r.delta_acc, 0.0);
    }

    #[test]
    fn report_window_checks() {
        let h = history(vec![0.5; 300], vec![0.5; 300]);
        assert!(accuracy_report(&h, (250, 300)).is_ok());
        for w in [(0, 10), (250, 301), (20, 10)] {
            assert!(matches!(
                accuracy_report(&h, w),
                Err(PipelineError::WindowOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn single_realization_ensemble_matches_its_report() {
        let r = AccuracyReport {
            test_mean: 0.96,
            test_std: 0.001,
            train_mean: 0.99,
            train_std: 0.0005,
            delta_acc: 0.03,
        };
        let e = summarize_ensemble(vec![Realization {
            model_seed: RandomSeed(1),
            train_seed: RandomSeed(1),
            report: r,
        }]);
        assert_eq!(e.test_mean, r.test_mean);
        assert_eq!(e.train_mean, r.train_mean);
        assert_eq!(e.delta_acc, r.delta_acc);
        assert_eq!(e.test_std, 0.0);
    }

    #[test]
    fn csv_history() {
        let mut buf = Vec::new();
        history(vec![0.5, 0.75], vec![0.25, 0.5])
            .write_csv(&mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_acc,test_acc\n1,0.500000,0.250000\n2,0.750000,0.500000\n"
        );
    }
}
