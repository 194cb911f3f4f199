// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! MNIST ingestion, PCA compression and product-state encoding.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lapack;
use crate::linalg::LinalgError;

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const NUM_CLASSES: usize = 10;

/// Human-readable statement of the encoding map, stored in every manifest.
pub const ENCODING_CONVENTION: &str = "pixels/255; PCA on train covariance; u_j = clip((p_j - min_j)/(max_j - min_j), 0, 1) with train min/max; \
qubit l (1-based) gets theta_l = pi*u_(2l-1), phi_l = 2*pi*u_(2l), state (cos(theta/2), e^(i phi) sin(theta/2)); \
qubit 1 is the most significant bit of the basis index";

const ROWS_PER_CHUNK: usize = 4096;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: bad magic number {found} (expected {expected})")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: file truncated ({actual} bytes, expected {expected})")]
    TruncatedFile {
        path: PathBuf,
        actual: usize,
        expected: usize,
    },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label {label} at index {index} is not a digit")]
    BadLabel { index: usize, label: u8 },
    #[error("covariance has only {positive} positive eigenvalues, need {needed}")]
    RankDeficient { positive: usize, needed: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cache at {path} is unusable: {reason}")]
    BadCache { path: PathBuf, reason: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Canonical `(images, labels)` file names.
    pub fn file_names(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }
}

/// Images as rows of pixel intensities in `[0, 1]`.
#[derive(Clone, Debug)]
pub struct MnistSet {
    pub images: Array2<f64>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl MnistSet {
    pub fn new(images: Array2<f64>, labels: Vec<u8>, split: Split) -> Result<Self, DatasetError> {
        if images.nrows() != labels.len() {
            return Err(DatasetError::CountMismatch {
                images: images.nrows(),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_CLASSES)
        {
            return Err(DatasetError::BadLabel { index, label });
        }
        Ok(Self {
            images,
            labels,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.images.ncols()
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>, DatasetError> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(DatasetError::TruncatedFile {
            path: path.into(),
            actual: bytes.len(),
            expected: need,
        });
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(DatasetError::BadMagic {
            path: path.into(),
            found,
            expected: magic,
        });
    }
    Ok((0..dims)
        .map(|i| be_u32(bytes, 4 + 4 * i) as usize)
        .collect())
}

/// Reads an IDX image file and its label file.
pub fn load_mnist(
    images_path: &Path,
    labels_path: &Path,
    split: Split,
) -> Result<MnistSet, DatasetError> {
    let img = read_file(images_path)?;
    let dims = header(images_path, &img, IMAGE_MAGIC, 3)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    let expected = 16 + count * pixels;
    if img.len() < expected {
        return Err(DatasetError::TruncatedFile {
            path: images_path.into(),
            actual: img.len(),
            expected,
        });
    }

    let lab = read_file(labels_path)?;
    let n_labels = header(labels_path, &lab, LABEL_MAGIC, 1)?[0];
    let expected = 8 + n_labels;
    if lab.len() < expected {
        return Err(DatasetError::TruncatedFile {
            path: labels_path.into(),
            actual: lab.len(),
            expected,
        });
    }
    if n_labels != count {
        return Err(DatasetError::CountMismatch {
            images: count,
            labels: n_labels,
        });
    }

    let images = Array2::from_shape_vec(
        (count, pixels),
        img[16..16 + count * pixels]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect(),
    )
    .expect("buffer length checked against header");
    MnistSet::new(images, lab[8..8 + count].to_vec(), split)
}

/// Loads one split from a directory holding the canonical file names.
pub fn load_split(dir: &Path, split: Split) -> Result<MnistSet, DatasetError> {
    let (images, labels) = split.file_names();
    load_mnist(&dir.join(images), &dir.join(labels), split)
}

/// Projection onto the leading principal axes plus the training min/max of
/// each projected coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// One unit vector per row, by decreasing explained variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    fn component_matrix(&self) -> Array2<f64> {
        let (k, d) = (self.k(), self.input_dim());
        Array2::from_shape_fn((d, k), |(i, j)| self.components[j][i])
    }

    /// Raw projections `(x − mean) · components^T`, one row per input row.
    pub fn project(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, DatasetError> {
        if x.ncols() != self.input_dim() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let mean = ArrayView1::from(&self.mean);
        let comps = self.component_matrix();
        let mut out = Array2::zeros((x.nrows(), self.k()));
        for (start, chunk) in row_chunks(x) {
            let centered = &chunk - &mean;
            out.slice_mut(s![start..start + chunk.nrows(), ..])
                .assign(&centered.dot(&comps));
        }
        Ok(out)
    }

    /// Min-max scaled projections clipped into `[0, 1]`.
    pub fn scaled(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, DatasetError> {
        let mut p = self.project(x)?;
        for mut row in p.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                let (lo, hi) = (self.feature_min[j], self.feature_max[j]);
                *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0);
            }
        }
        Ok(p)
    }

    /// SHA-256 over the little-endian bytes of every stored number.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self
            .mean
            .iter()
            .chain(self.components.iter().flatten())
            .chain(&self.feature_min)
            .chain(&self.feature_max)
        {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn row_chunks(x: ArrayView2<f64>) -> impl Iterator<Item = (usize, ArrayView2<f64>)> {
    let n = x.nrows();
    (0..n).step_by(ROWS_PER_CHUNK).map(move |start| {
        let end = (start + ROWS_PER_CHUNK).min(n);
        (start, x.slice_move(s![start..end, ..]))
    })
}

/// PCA of the training images.
pub fn fit_pca(train: &MnistSet, k: usize) -> Result<PcaModel, DatasetError> {
    fit_pca_matrix(train.images.view(), k)
}

/// PCA of the rows of `x`, keeping `k` components.
pub fn fit_pca_matrix(x: ArrayView2<f64>, k: usize) -> Result<PcaModel, DatasetError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(DatasetError::InvalidArgument("empty training set".into()));
    }
    if k == 0 || k > d {
        return Err(DatasetError::InvalidArgument(format!(
            "k = {k} must lie in 1..={d}"
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("n > 0");
    let mut cov = Array2::<f64>::zeros((d, d));
    for (_, chunk) in row_chunks(x) {
        let centered = &chunk - &mean;
        ndarray::linalg::general_mat_mul(1.0, &centered.t(), &centered, 1.0, &mut cov);
    }
    cov /= n as f64;
    // Restore exact symmetry lost to rounding in the accumulation.
    let cov = Array2::from_shape_fn((d, d), |(i, j)| 0.5 * (cov[[i, j]] + cov[[j, i]]));

    let (eigvals, eigvecs) = lapack::symmetric_eigen(&cov)?;
    let largest = eigvals.last().copied().unwrap_or(0.0).max(0.0);
    let floor = largest * 1e-12 * d as f64;
    let positive = eigvals.iter().filter(|&&l| l > floor && l > 0.0).count();
    if positive < k {
        return Err(DatasetError::RankDeficient {
            positive,
            needed: k,
        });
    }

    let mut components = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    for idx in (d - k..d).rev() {
        let mut v: Vec<f64> = eigvecs.column(idx).to_vec();
        let pivot = v.iter().enumerate().fold(
            0,
            |best, (i, x)| if x.abs() > v[best].abs() { i } else { best },
        );
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained.push(eigvals[idx]);
    }

    let mut model = PcaModel {
        mean: mean.to_vec(),
        components,
        explained_variance: explained,
        feature_min: vec![f64::INFINITY; k],
        feature_max: vec![f64::NEG_INFINITY; k],
    };
    let proj = model.project(x)?;
    for row in proj.rows() {
        for (j, &v) in row.iter().enumerate() {
            model.feature_min[j] = model.feature_min[j].min(v);
            model.feature_max[j] = model.feature_max[j].max(v);
        }
    }
    if let Some(j) = (0..k).find(|&j| model.feature_min[j] >= model.feature_max[j]) {
        return Err(DatasetError::RankDeficient {
            positive: j,
            needed: k,
        });
    }
    Ok(model)
}

/// Rotation angles of one image and the product state they prepare.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSample {
    /// `θ_1, φ_1, θ_2, φ_2, …`.
    pub angles: Vec<f64>,
    pub state: Array1<Complex64>,
    pub label: u8,
}

/// Angles for qubit `l` from scaled features `u`.
fn qubit_angles(u: &[f64], l: usize) -> (f64, f64) {
    (
        std::f64::consts::PI * u[2 * l],
        2.0 * std::f64::consts::PI * u[2 * l + 1],
    )
}

/// `(cos θ/2, e^{iφ} sin θ/2)`.
pub fn qubit_state(theta: f64, phi: f64) -> [Complex64; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [Complex64::new(c, 0.0), Complex64::from_polar(s, phi)]
}

/// Kronecker product of the single-qubit states, qubit 1 leftmost.
pub fn product_state(angles: &[f64]) -> Array1<Complex64> {
    let mut state = vec![Complex64::new(1.0, 0.0)];
    for pair in angles.chunks_exact(2) {
        let q = qubit_state(pair[0], pair[1]);
        state = state.iter().flat_map(|a| [a * q[0], a * q[1]]).collect();
    }
    Array1::from(state)
}

/// Encodes one image with `qubits` qubits.
pub fn encode(
    image: ArrayView1<f64>,
    pca: &PcaModel,
    label: u8,
    qubits: usize,
) -> Result<EncodedSample, DatasetError> {
    if pca.k() != 2 * qubits {
        return Err(DatasetError::DimensionMismatch {
            expected: 2 * qubits,
            actual: pca.k(),
        });
    }
    let row = image.insert_axis(Axis(0));
    let u = pca.scaled(row)?;
    let angles = angles_from_scaled(u.row(0).as_slice().expect("standard layout"), qubits);
    Ok(EncodedSample {
        state: product_state(&angles),
        angles,
        label,
    })
}

fn angles_from_scaled(u: &[f64], qubits: usize) -> Vec<f64> {
    (0..qubits)
        .flat_map(|l| {
            let (t, p) = qubit_angles(u, l);
            [t, p]
        })
        .collect()
}

/// Encoded angles for a whole split. States are rebuilt on demand since a
/// 60000 x 1024 complex matrix would cost close to 1 GB.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSet {
    pub qubits: usize,
    /// One row of `2L` angles per sample.
    pub angles: Array2<f64>,
    pub labels: Vec<u8>,
}

impl EncodedSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn sample(&self, i: usize) -> EncodedSample {
        let angles = self.angles.row(i).to_vec();
        EncodedSample {
            state: product_state(&angles),
            angles,
            label: self.labels[i],
        }
    }

    /// Product states of samples `range` as matrix rows.
    pub fn states(&self, range: std::ops::Range<usize>) -> Array2<Complex64> {
        let mut out = Array2::zeros((range.len(), self.dim()));
        for (mut row, i) in out.rows_mut().into_iter().zip(range) {
            row.assign(&product_state(
                self.angles.row(i).as_slice().expect("standard layout"),
            ));
        }
        out
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> EncodedSet {
        let n = n.min(self.len());
        EncodedSet {
            qubits: self.qubits,
            angles: self.angles.slice(s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
        }
    }
}

/// Encodes every image of `set`.
pub fn encode_set(
    set: &MnistSet,
    pca: &PcaModel,
    qubits: usize,
) -> Result<EncodedSet, DatasetError> {
    if pca.k() != 2 * qubits {
        return Err(DatasetError::DimensionMismatch {
            expected: 2 * qubits,
            actual: pca.k(),
        });
    }
    let u = pca.scaled(set.images.view())?;
    let mut angles = Array2::zeros((set.len(), 2 * qubits));
    for (mut out, row) in angles.rows_mut().into_iter().zip(u.rows()) {
        let a = angles_from_scaled(row.as_slice().expect("standard layout"), qubits);
        out.assign(&ArrayView1::from(&a));
    }
    Ok(EncodedSet {
        qubits,
        angles,
        labels: set.labels.clone(),
    })
}

/// Train and test encodings sharing one PCA model.
#[derive(Clone, Debug)]
pub struct EncodedData {
    pub pca: PcaModel,
    pub train: EncodedSet,
    pub test: EncodedSet,
}

impl EncodedData {
    /// Loads both splits from `dir`, fits PCA with `2L` components on the
    /// training split and encodes both.
    pub fn prepare(dir: &Path, qubits: usize) -> Result<Self, DatasetError> {
        let train = load_split(dir, Split::Train)?;
        let pca = fit_pca(&train, 2 * qubits)?;
        let train_enc = encode_set(&train, &pca, qubits)?;
        drop(train);
        let test = load_split(dir, Split::Test)?;
        let test_enc = encode_set(&test, &pca, qubits)?;
        Ok(Self {
            pca,
            train: train_enc,
            test: test_enc,
        })
    }

    /// Like [`prepare`](Self::prepare) but reuses a cache in `cache_dir` when
    /// one with the same qubit count exists, and writes one otherwise.
    pub fn prepare_cached(
        dir: &Path,
        qubits: usize,
        cache_dir: &Path,
    ) -> Result<Self, DatasetError> {
        match Self::load_cache(cache_dir) {
            Ok(d) if d.train.qubits == qubits => return Ok(d),
            _ => {}
        }
        let d = Self::prepare(dir, qubits)?;
        d.save_cache(cache_dir)?;
        Ok(d)
    }

    pub fn save_cache(&self, dir: &Path) -> Result<(), DatasetError> {
        let io_err = |source| DatasetError::Io {
            path: dir.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(io_err)?;
        let mut manifest = CacheManifest {
            qubits: self.train.qubits,
            train_samples: self.train.len(),
            test_samples: self.test.len(),
            pca_sha256: self.pca.fingerprint(),
            feature_min: self.pca.feature_min.clone(),
            feature_max: self.pca.feature_max.clone(),
            encoding: ENCODING_CONVENTION.to_string(),
            angles_sha256: String::new(),
            pca: self.pca.clone(),
        };
        let mut blob = Vec::new();
        for set in [&self.train, &self.test] {
            blob.extend(set.angles.iter().flat_map(|v| v.to_le_bytes()));
            blob.extend(&set.labels);
        }
        manifest.angles_sha256 = hex::encode(Sha256::digest(&blob));
        write_atomic(&dir.join(CACHE_BLOB), &blob).map_err(io_err)?;
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        write_atomic(&dir.join(CACHE_MANIFEST), &json).map_err(io_err)
    }

    pub fn load_cache(dir: &Path) -> Result<Self, DatasetError> {
        let bad = |reason: String| DatasetError::BadCache {
            path: dir.to_path_buf(),
            reason,
        };
        let json = read_file(&dir.join(CACHE_MANIFEST))?;
        let m: CacheManifest = serde_json::from_slice(&json).map_err(|e| bad(e.to_string()))?;
        let blob = read_file(&dir.join(CACHE_BLOB))?;
        if hex::encode(Sha256::digest(&blob)) != m.angles_sha256 {
            return Err(bad("angle data does not match manifest hash".into()));
        }
        if m.pca.fingerprint() != m.pca_sha256 {
            return Err(bad("PCA model does not match manifest hash".into()));
        }
        let width = 2 * m.qubits;
        let mut at = 0;
        let mut take = |n: usize| -> Result<EncodedSet, DatasetError> {
            let nbytes = n * width * 8;
            if blob.len() < at + nbytes + n {
                return Err(bad("angle file is truncated".into()));
            }
            let vals: Vec<f64> = blob[at..at + nbytes]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            at += nbytes;
            let labels = blob[at..at + n].to_vec();
            at += n;
            let angles = Array2::from_shape_vec((n, width), vals).expect("length checked");
            Ok(EncodedSet {
                qubits: m.qubits,
                angles,
                labels,
            })
        };
        let train = take(m.train_samples)?;
        let test = take(m.test_samples)?;
        Ok(Self {
            pca: m.pca,
            train,
            test,
        })
    }
}

const CACHE_BLOB: &str = "encoded.bin";
const CACHE_MANIFEST: &str = "encoded.json";

#[derive(Debug, Serialize, Deserialize)]
struct CacheManifest {
    qubits: usize,
    train_samples: usize,
    test_samples: usize,
    pca_sha256: String,
    angles_sha256: String,
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
    encoding: String,
    pca: PcaModel,
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
