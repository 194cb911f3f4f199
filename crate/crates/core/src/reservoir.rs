// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Feature-map unitaries for the reservoir.
//!
//! The driven Ising chain alternates two half periods,
//!
//! ```text
//! H1 = g(1 − ε) Σ_l σx_l                                  t ∈ [0, T/2)
//! H2 = Σ_{l<m} J0/|l − m|^α σz_l σz_m + Σ_l D_l σz_l       t ∈ [T/2, T)
//! ```
//!
//! and the Floquet operator is `F = exp(−i H2 T/2) exp(−i H1 T/2)`. The
//! stroboscopic evolution after `n` periods is `F^n`.
//!
//! Conventions: qubit 1 is the most significant bit of a basis index, bit
//! value 0 maps to `z = +1`, and the coupling sum visits each unordered pair
//! once.

use std::collections::HashSet;
use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    cauchy_unitary, exp_neg_i, haar_unitary, matrix_power, principal_log_unitary, HermitianMatrix,
    LinalgError, RandomSeed, UnitaryMatrix,
};

/// Number of generator entries overwritten by the tailed-Haar model.
pub const TAIL_ENTRIES: usize = 10;
/// Real and imaginary parts of injected tail entries are uniform in `[lo, hi)`.
pub const TAIL_RANGE: (f64, f64) = (0.2, 2.0);
/// Extra Haar draws attempted when a sample has an eigenvalue at −1.
pub const TAILED_HAAR_RETRIES: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReservoirError {
    #[error("invalid reservoir parameters: {0}")]
    InvalidParams(String),
    #[error("no usable Haar sample after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u64, last: LinalgError },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Parameters of the driven chain, in units where every energy is
/// multiplied by the drive period `T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtcParams {
    /// Number of qubits `L`.
    pub qubits: usize,
    /// Rotation strength times period, `gT`.
    pub g_t: f64,
    /// Rotation error `ε`.
    pub epsilon: f64,
    /// Coupling scale times period, `J0·T`.
    pub j0_t: f64,
    /// Power-law exponent of the coupling decay.
    pub alpha: f64,
    /// Per-qubit longitudinal field times period, `D_l·T`.
    pub disorder_t: Vec<f64>,
}

impl Default for DtcParams {
    /// `L = 10`, `gT = π`, `ε = 0.03`, `J0T = 0.12`, `α = 1.51`, no disorder.
    fn default() -> Self {
        Self::clean(10, PI, 0.03, 0.12, 1.51)
    }
}

impl DtcParams {
    /// Parameters with every `D_l·T = 0`.
    pub fn clean(qubits: usize, g_t: f64, epsilon: f64, j0_t: f64, alpha: f64) -> Self {
        Self {
            qubits,
            g_t,
            epsilon,
            j0_t,
            alpha,
            disorder_t: vec![0.0; qubits],
        }
    }

    /// The same chain with default couplings and `L` qubits.
    pub fn with_qubits(qubits: usize) -> Self {
        Self {
            qubits,
            disorder_t: vec![0.0; qubits],
            ..Self::default()
        }
    }

    pub fn with_disorder(mut self, disorder_t: Vec<f64>) -> Self {
        self.disorder_t = disorder_t;
        self
    }

    pub fn dim(&self) -> usize {
        1usize << self.qubits
    }

    pub fn validate(&self) -> Result<(), ReservoirError> {
        let bad = |msg: String| Err(ReservoirError::InvalidParams(msg));
        if self.qubits < 2 {
            return bad(format!("need at least 2 qubits, got {}", self.qubits));
        }
        if self.qubits > 16 {
            return bad(format!("{} qubits is beyond dense simulation", self.qubits));
        }
        for (name, v) in [
            ("g_t", self.g_t),
            ("epsilon", self.epsilon),
            ("j0_t", self.j0_t),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if self.alpha <= 0.0 {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.disorder_t.len() != self.qubits {
            return bad(format!(
                "disorder_t has {} entries, expected {}",
                self.disorder_t.len(),
                self.qubits
            ));
        }
        if self.disorder_t.iter().any(|d| !d.is_finite()) {
            return bad("disorder_t must be finite".into());
        }
        Ok(())
    }

    /// `J_lm·T` for 0-based qubit indices `l != m`.
    pub fn coupling_t(&self, l: usize, m: usize) -> f64 {
        let d = l.abs_diff(m) as f64;
        self.j0_t / d.powf(self.alpha)
    }

    /// `z_l ∈ {+1, −1}` of 0-based qubit `l` in basis state `x`.
    pub fn spin(&self, x: usize, l: usize) -> f64 {
        if (x >> (self.qubits - 1 - l)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Diagonal energy `⟨x|H2|x⟩·T` of basis state `x`.
    pub fn h2_energy_t(&self, x: usize) -> f64 {
        let l_count = self.qubits;
        let mut e = 0.0;
        for l in 0..l_count {
            let zl = self.spin(x, l);
            for m in (l + 1)..l_count {
                e += self.coupling_t(l, m) * zl * self.spin(x, m);
            }
            e += self.disorder_t[l] * zl;
        }
        e
    }
}

/// `exp(−i H1 T/2) = ⊗_l exp(−iθσx)` with `θ = gT(1−ε)/2`.
pub fn h1_half_step(params: &DtcParams) -> Result<UnitaryMatrix, ReservoirError> {
    params.validate()?;
    let theta = h1_angle(params);
    let (s, c) = theta.sin_cos();
    let n = params.dim();
    let l_count = params.qubits as i32;
    // Each factor contributes cos θ on the diagonal and −i sin θ off it, so an
    // entry only depends on how many bits differ between row and column.
    let minus_i_sin = Complex64::new(0.0, -s);
    let by_flips: Vec<Complex64> = (0..=l_count)
        .map(|d| Complex64::new(c.powi(l_count - d), 0.0) * minus_i_sin.powi(d))
        .collect();
    let u = Array2::from_shape_fn((n, n), |(x, y)| by_flips[(x ^ y).count_ones() as usize]);
    Ok(UnitaryMatrix::from_trusted(u))
}

/// Single-qubit rotation angle of the first half period.
pub fn h1_angle(params: &DtcParams) -> f64 {
    params.g_t * (1.0 - params.epsilon) / 2.0
}

/// Diagonal of `exp(−i H2 T/2)`.
pub fn h2_phases(params: &DtcParams) -> Result<Vec<Complex64>, ReservoirError> {
    params.validate()?;
    Ok((0..params.dim())
        .map(|x| Complex64::from_polar(1.0, -params.h2_energy_t(x) / 2.0))
        .collect())
}

/// `exp(−i H2 T/2)` as a dense diagonal unitary.
pub fn h2_half_step(params: &DtcParams) -> Result<UnitaryMatrix, ReservoirError> {
    let phases = h2_phases(params)?;
    let n = phases.len();
    let mut u = Array2::zeros((n, n));
    for (i, p) in phases.into_iter().enumerate() {
        u[[i, i]] = p;
    }
    Ok(UnitaryMatrix::from_trusted(u))
}

/// One-period Floquet operator `F = exp(−i H2 T/2) · exp(−i H1 T/2)`.
pub fn floquet_operator(params: &DtcParams) -> Result<UnitaryMatrix, ReservoirError> {
    let phases = h2_phases(params)?;
    let mut f = h1_half_step(params)?.into_array();
    for (mut row, p) in f.rows_mut().into_iter().zip(&phases) {
        row.mapv_inplace(|z| z * p);
    }
    Ok(UnitaryMatrix::from_trusted(f))
}

/// `D_l·T` drawn independently and uniformly from `[0, 2π)`.
pub fn sample_disorder(qubits: usize, seed: RandomSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..qubits)
        .map(|_| loop {
            let d = 2.0 * PI * rng.random::<f64>();
            if d < 2.0 * PI {
                break d;
            }
        })
        .collect()
}

/// A Haar unitary whose generator carries injected large off-diagonal entries.
#[derive(Clone, Debug)]
pub struct TailedHaar {
    pub unitary: UnitaryMatrix,
    /// The modified generator, `unitary = exp(−i·generator)`. Its spectrum
    /// usually leaves `(−π, π]`, so it is not the principal log of `unitary`.
    pub generator: HermitianMatrix,
    /// 0-based `(i, j)` with `i < j`, in draw order.
    pub pairs: Vec<(usize, usize)>,
    /// The complex value written to `G[i][j]` for each pair.
    pub values: Vec<Complex64>,
}

/// Tailed-Haar model with [`TAIL_ENTRIES`] injected entries.
pub fn tailed_haar_unitary(n: usize, seed: RandomSeed) -> Result<TailedHaar, ReservoirError> {
    tailed_haar_with(n, seed, TAIL_ENTRIES)
}

/// Tailed-Haar construction with `count` injected entries. `count = 0`
/// reproduces `haar_unitary(n, seed)` up to log/exp round-off.
pub fn tailed_haar_with(
    n: usize,
    seed: RandomSeed,
    count: usize,
) -> Result<TailedHaar, ReservoirError> {
    let available = n.saturating_mul(n.saturating_sub(1)) / 2;
    if count > available {
        return Err(ReservoirError::InvalidParams(format!(
            "cannot choose {count} distinct off-diagonal pairs in dimension {n}"
        )));
    }
    let generator = haar_generator_with_retries(n, seed)?;
    let mut g = generator.into_array();

    let mut rng = seed.derive(u64::MAX).rng();
    let (lo, hi) = TAIL_RANGE;
    let values: Vec<Complex64> = (0..count)
        .map(|_| {
            let re = lo + (hi - lo) * rng.random::<f64>();
            let im = lo + (hi - lo) * rng.random::<f64>();
            Complex64::new(re, im)
        })
        .collect();
    let mut seen = HashSet::with_capacity(count);
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let k = rng.random_range(0..available);
        if seen.insert(k) {
            pairs.push(upper_pair(n, k));
        }
    }
    for (&(i, j), &z) in pairs.iter().zip(&values) {
        g[[i, j]] = z;
        g[[j, i]] = z.conj();
    }
    let generator = HermitianMatrix::new(g)?;
    let unitary = exp_neg_i(&generator)?;
    Ok(TailedHaar {
        unitary,
        generator,
        pairs,
        values,
    })
}

fn haar_generator_with_retries(
    n: usize,
    seed: RandomSeed,
) -> Result<HermitianMatrix, ReservoirError> {
    let mut last = None;
    for attempt in 0..=TAILED_HAAR_RETRIES {
        let s = if attempt == 0 {
            seed
        } else {
            seed.derive(attempt)
        };
        let u = haar_unitary(n, s)?;
        match principal_log_unitary(&u) {
            Ok(g) => return Ok(g),
            Err(e @ LinalgError::NegativeRealEigenvalue { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(ReservoirError::RetriesExhausted {
        attempts: TAILED_HAAR_RETRIES + 1,
        last: last.expect("loop ran at least once"),
    })
}

/// Maps a linear index over `{(i, j) : i < j}` in row order to the pair.
fn upper_pair(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row_len = n - 1 - i;
        if k < row_len {
            return (i, i + 1 + k);
        }
        k -= row_len;
        i += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Dtc,
    DisorderedDtc,
    Haar,
    TailedHaar,
    Cauchy,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Haar,
        ModelKind::TailedHaar,
        ModelKind::Cauchy,
        ModelKind::Dtc,
        ModelKind::DisorderedDtc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dtc => "dtc",
            ModelKind::DisorderedDtc => "disordered-dtc",
            ModelKind::Haar => "haar",
            ModelKind::TailedHaar => "tailed-haar",
            ModelKind::Cauchy => "cauchy",
        }
    }

    pub fn is_random(self) -> bool {
        !matches!(self, ModelKind::Dtc)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown model kind `{s}`"))
    }
}

/// A fully specified feature map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureMapSpec {
    Dtc {
        params: DtcParams,
        n_periods: u64,
    },
    /// `params.disorder_t` is ignored and resampled from `seed`.
    DisorderedDtc {
        params: DtcParams,
        n_periods: u64,
        seed: RandomSeed,
    },
    Haar {
        dim: usize,
        seed: RandomSeed,
    },
    TailedHaar {
        dim: usize,
        seed: RandomSeed,
    },
    Cauchy {
        dim: usize,
        gamma: f64,
        seed: RandomSeed,
    },
}

impl FeatureMapSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            FeatureMapSpec::Dtc { .. } => ModelKind::Dtc,
            FeatureMapSpec::DisorderedDtc { .. } => ModelKind::DisorderedDtc,
            FeatureMapSpec::Haar { .. } => ModelKind::Haar,
            FeatureMapSpec::TailedHaar { .. } => ModelKind::TailedHaar,
            FeatureMapSpec::Cauchy { .. } => ModelKind::Cauchy,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMapSpec::Dtc { params, .. } | FeatureMapSpec::DisorderedDtc { params, .. } => {
                params.dim()
            }
            FeatureMapSpec::Haar { dim, .. }
            | FeatureMapSpec::TailedHaar { dim, .. }
            | FeatureMapSpec::Cauchy { dim, .. } => *dim,
        }
    }

    pub fn seed(&self) -> Option<RandomSeed> {
        match self {
            FeatureMapSpec::Dtc { .. } => None,
            FeatureMapSpec::DisorderedDtc { seed, .. }
            | FeatureMapSpec::Haar { seed, .. }
            | FeatureMapSpec::TailedHaar { seed, .. }
            | FeatureMapSpec::Cauchy { seed, .. } => Some(*seed),
        }
    }

    pub fn n_periods(&self) -> Option<u64> {
        match self {
            FeatureMapSpec::Dtc { n_periods, .. }
            | FeatureMapSpec::DisorderedDtc { n_periods, .. } => Some(*n_periods),
            _ => None,
        }
    }

    /// The same model with a different seed; a no-op for the clean DTC.
    pub fn with_seed(&self, new_seed: RandomSeed) -> Self {
        let mut out = self.clone();
        match &mut out {
            FeatureMapSpec::Dtc { .. } => {}
            FeatureMapSpec::DisorderedDtc { seed, .. }
            | FeatureMapSpec::Haar { seed, .. }
            | FeatureMapSpec::TailedHaar { seed, .. }
            | FeatureMapSpec::Cauchy { seed, .. } => *seed = new_seed,
        }
        out
    }

    /// The same DTC model at a different period count; a no-op for random models.
    pub fn with_periods(&self, n: u64) -> Self {
        let mut out = self.clone();
        if let FeatureMapSpec::Dtc { n_periods, .. }
        | FeatureMapSpec::DisorderedDtc { n_periods, .. } = &mut out
        {
            *n_periods = n;
        }
        out
    }

    /// DTC parameters after disorder sampling, for the DTC kinds.
    pub fn effective_dtc_params(&self) -> Option<DtcParams> {
        match self {
            FeatureMapSpec::Dtc { params, .. } => Some(params.clone()),
            FeatureMapSpec::DisorderedDtc { params, seed, .. } => Some(
                params
                    .clone()
                    .with_disorder(sample_disorder(params.qubits, *seed)),
            ),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ReservoirError> {
        match self {
            FeatureMapSpec::Dtc { params, n_periods }
            | FeatureMapSpec::DisorderedDtc {
                params, n_periods, ..
            } => {
                if *n_periods == 0 {
                    return Err(ReservoirError::InvalidParams(
                        "n_periods must be at least 1".into(),
                    ));
                }
                if let FeatureMapSpec::DisorderedDtc { .. } = self {
                    // Disorder is resampled, so only the length-independent fields matter.
                    params
                        .clone()
                        .with_disorder(vec![0.0; params.qubits])
                        .validate()
                } else {
                    params.validate()
                }
            }
            FeatureMapSpec::Haar { dim, .. } | FeatureMapSpec::TailedHaar { dim, .. }
                if *dim == 0 =>
            {
                Err(ReservoirError::InvalidParams(
                    "dimension must be at least 1".into(),
                ))
            }
            FeatureMapSpec::Cauchy { dim, gamma, .. } => {
                if *dim == 0 {
                    Err(ReservoirError::InvalidParams(
                        "dimension must be at least 1".into(),
                    ))
                } else if !(*gamma > 0.0 && gamma.is_finite()) {
                    Err(ReservoirError::InvalidParams(format!(
                        "gamma must be positive, got {gamma}"
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Builds the feature-map unitary.
    pub fn build(&self) -> Result<UnitaryMatrix, ReservoirError> {
        self.validate()?;
        match self {
            FeatureMapSpec::Dtc { .. } | FeatureMapSpec::DisorderedDtc { .. } => {
                stroboscopic_unitary(self)
            }
            FeatureMapSpec::Haar { dim, seed } => Ok(haar_unitary(*dim, *seed)?),
            FeatureMapSpec::TailedHaar { dim, seed } => {
                Ok(tailed_haar_unitary(*dim, *seed)?.unitary)
            }
            FeatureMapSpec::Cauchy { dim, gamma, seed } => Ok(cauchy_unitary(*dim, *gamma, *seed)?),
        }
    }

    /// The unitary together with the generator whose weights describe the
    /// model: the constructed one for tailed Haar, the principal log otherwise.
    pub fn build_with_generator(&self) -> Result<(UnitaryMatrix, HermitianMatrix), ReservoirError> {
        if let FeatureMapSpec::TailedHaar { dim, seed } = self {
            self.validate()?;
            let t = tailed_haar_unitary(*dim, *seed)?;
            return Ok((t.unitary, t.generator));
        }
        let u = self.build()?;
        let g = principal_log_unitary(&u)?;
        Ok((u, g))
    }
}

/// `F^n` for a DTC-kind spec.
pub fn stroboscopic_unitary(spec: &FeatureMapSpec) -> Result<UnitaryMatrix, ReservoirError> {
    let (params, n) = match (spec.effective_dtc_params(), spec.n_periods()) {
        (Some(p), Some(n)) => (p, n),
        _ => {
            return Err(ReservoirError::InvalidParams(format!(
                "stroboscopic evolution needs a DTC model, got {}",
                spec.kind()
            )))
        }
    };
    if n == 0 {
        return Err(ReservoirError::InvalidParams(
            "n_periods must be at least 1".into(),
        ));
    }
    let f = floquet_operator(&params)?;
    Ok(matrix_power(&f, n)?)
}
