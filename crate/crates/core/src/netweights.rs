// Copyright 2026 The QERC Lab Authors
// SPDX-License-Identifier: Apache-2.0

//! Weighted-network view of a unitary.
//!
//! A Hermitian generator `G` is expanded in the generalized Gell-Mann basis,
//!
//! ```text
//! G = Σ_{l<m} a_lm λx_lm + Σ_{l<m} b_lm λy_lm + Σ_k c_k λz_k
//! ```
//!
//! with `λx_lm = E_lm + E_ml`, `λy_lm = −iE_lm + iE_ml`,
//! `λz_k = sqrt(2/(k(k+1))) (Σ_{j≤k} E_jj − k E_{k+1,k+1})` for `k < N` and
//! `λz_N = I`. The coefficients play the role of edge and vertex weights.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{principal_log_unitary, HermitianMatrix, LinalgError, UnitaryMatrix};

pub const DEFAULT_BINS: usize = 100;
/// Populated bins needed before a Gaussian fit is attempted.
pub const MIN_FIT_BINS: usize = 5;
/// Tail threshold in units of the reference width.
pub const TAIL_SIGMAS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightsError {
    #[error("all {count} values equal {value}; no histogram range")]
    DegenerateRange { value: f64, count: usize },
    #[error("need at least {needed} values, got {actual}")]
    TooFewValues { needed: usize, actual: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("only {populated} populated bins; a fit needs at least {needed}")]
    InsufficientSupport { populated: usize, needed: usize },
    #[error("log-density is not concave (quadratic coefficient {c2:e})")]
    NonConcaveFit { c2: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("weight set has inconsistent lengths for dimension {dim}")]
    MalformedWeightSet { dim: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
    Z,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::X, Component::Y, Component::Z];

    pub fn name(self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Y => "y",
            Component::Z => "z",
        }
    }
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Gell-Mann coefficients of an `N x N` Hermitian matrix.
///
/// `a` and `b` list pairs `(l, m)`, `l < m`, in row order: `(0,1), (0,2), …,
/// (0,N−1), (1,2), …`. `c[N−1]` is the identity coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl WeightSet {
    pub fn zeros(dim: usize) -> Self {
        let p = pair_count(dim);
        Self {
            dim,
            a: vec![0.0; p],
            b: vec![0.0; p],
            c: vec![0.0; dim],
        }
    }

    pub fn validate(&self) -> Result<(), WeightsError> {
        let p = pair_count(self.dim);
        if self.dim == 0 || self.a.len() != p || self.b.len() != p || self.c.len() != self.dim {
            return Err(WeightsError::MalformedWeightSet { dim: self.dim });
        }
        if self
            .a
            .iter()
            .chain(&self.b)
            .chain(&self.c)
            .any(|v| !v.is_finite())
        {
            return Err(WeightsError::NonFinite);
        }
        Ok(())
    }

    /// Position of pair `(l, m)` in `a` and `b`.
    pub fn pair_index(&self, l: usize, m: usize) -> usize {
        assert!(
            l < m && m < self.dim,
            "pair ({l}, {m}) out of range for dim {}",
            self.dim
        );
        l * self.dim - l * (l + 1) / 2 + (m - l - 1)
    }

    pub fn a_at(&self, l: usize, m: usize) -> f64 {
        self.a[self.pair_index(l, m)]
    }

    pub fn b_at(&self, l: usize, m: usize) -> f64 {
        self.b[self.pair_index(l, m)]
    }

    /// Identity coefficient `c_N = Tr G / N`.
    pub fn identity_coefficient(&self) -> f64 {
        self.c[self.dim - 1]
    }

    /// Coefficients of one component. The z component leaves out the identity
    /// coefficient unless `include_identity` is set.
    pub fn component(&self, component: Component, include_identity: bool) -> &[f64] {
        match component {
            Component::X => &self.a,
            Component::Y => &self.b,
            Component::Z if include_identity => &self.c,
            Component::Z => &self.c[..self.dim - 1],
        }
    }
}

pub fn pair_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

fn z_norm(k: usize) -> f64 {
    (2.0 / (k * (k + 1)) as f64).sqrt()
}

/// Gell-Mann coefficients of `G`.
pub fn decompose(g: &HermitianMatrix) -> WeightSet {
    let arr = g.as_array();
    let n = g.dim();
    let mut a = Vec::with_capacity(pair_count(n));
    let mut b = Vec::with_capacity(pair_count(n));
    for l in 0..n {
        for m in (l + 1)..n {
            let z = arr[[l, m]];
            a.push(z.re);
            b.push(-z.im);
        }
    }
    let diag: Vec<f64> = (0..n).map(|j| arr[[j, j]].re).collect();
    let mut c = vec![0.0; n];
    let mut prefix = 0.0;
    for k in 1..n {
        prefix += diag[k - 1];
        // Tr(G λz_k)/2 with the first k diagonal entries weighted +1 and entry k by −k.
        c[k - 1] = z_norm(k) * (prefix - k as f64 * diag[k]) / 2.0;
    }
    c[n - 1] = diag.iter().sum::<f64>() / n as f64;
    WeightSet { dim: n, a, b, c }
}

/// Weights of `i·log U` for the principal branch.
pub fn decompose_unitary(u: &UnitaryMatrix) -> Result<WeightSet, WeightsError> {
    Ok(decompose(&principal_log_unitary(u)?))
}

/// Inverse of [`decompose`].
pub fn reconstruct(w: &WeightSet) -> Result<HermitianMatrix, WeightsError> {
    w.validate()?;
    let n = w.dim;
    let mut g = Array2::<Complex64>::zeros((n, n));
    let mut idx = 0;
    for l in 0..n {
        for m in (l + 1)..n {
            let z = Complex64::new(w.a[idx], -w.b[idx]);
            g[[l, m]] = z;
            g[[m, l]] = z.conj();
            idx += 1;
        }
    }
    // G_jj = c_N + Σ_{k>j} s_k c_k − j s_j c_j, with s_k the λz_k normalization.
    let mut suffix = 0.0;
    for j in (0..n).rev() {
        let own = if j >= 1 {
            j as f64 * z_norm(j) * w.c[j - 1]
        } else {
            0.0
        };
        g[[j, j]] = Complex64::new(w.c[n - 1] + suffix - own, 0.0);
        if j >= 1 {
            suffix += z_norm(j) * w.c[j - 1];
        }
    }
    Ok(HermitianMatrix::hermitize(g)?)
}

/// Equal-width histogram over `[min, max]` of the values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightHistogram {
    pub component: Option<Component>,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
}

impl WeightHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| 0.5 * (e[0] + e[1]))
            .collect()
    }

    pub fn range(&self) -> (f64, f64) {
        (
            self.bin_edges[0],
            *self.bin_edges.last().expect("at least one edge"),
        )
    }

    pub fn with_component(mut self, component: Component) -> Self {
        self.component = Some(component);
        self
    }

    /// Writes `bin_center,count,density` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_center,count,density")?;
        for ((x, n), d) in self
            .bin_centers()
            .iter()
            .zip(&self.counts)
            .zip(&self.density)
        {
            writeln!(out, "{x:.12e},{n},{d:.12e}")?;
        }
        Ok(())
    }
}

/// Bins `values` into `bins` equal windows spanning their range. Every
/// window is `(e_i, e_{i+1}]` except the first, which also holds `e_0`.
pub fn histogram(values: &[f64], bins: usize) -> Result<WeightHistogram, WeightsError> {
    if bins == 0 {
        return Err(WeightsError::InvalidArgument(
            "bins must be positive".into(),
        ));
    }
    if values.is_empty() {
        return Err(WeightsError::TooFewValues {
            needed: 2,
            actual: 0,
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if !v.is_finite() {
            return Err(WeightsError::NonFinite);
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        return Err(WeightsError::DegenerateRange {
            value: lo,
            count: values.len(),
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    edges[bins] = hi;

    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[bin_of(&edges, v)] += 1;
    }
    let density = densities(&edges, &counts);
    Ok(WeightHistogram {
        component: None,
        bin_edges: edges,
        counts,
        density,
    })
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let guess = ((v - lo) / (hi - lo) * bins as f64).ceil() as isize - 1;
    let mut i = guess.clamp(0, bins as isize - 1) as usize;
    // Settle rounding at the edges against the stored edge values.
    while i > 0 && v <= edges[i] {
        i -= 1;
    }
    while i + 1 < bins && v > edges[i + 1] {
        i += 1;
    }
    i
}

fn densities(edges: &[f64], counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| {
            if total == 0 {
                0.0
            } else {
                c as f64 / (total as f64 * (e[1] - e[0]))
            }
        })
        .collect()
}

/// Gaussian parameters from a quadratic fit of log-density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu: f64,
    pub sigma: f64,
    /// RMS misfit of log-density over the fitted bins.
    pub residual: f64,
}

/// Fits `ln ρ(s) ≈ c0 + c1 s + c2 s²` by least squares, weighting each bin by
/// its count (the inverse variance of its log-density under Poisson noise),
/// and reads off `σ = sqrt(−1/(2 c2))`, `μ = −c1/(2 c2)`.
///
/// Only the run of populated bins around the fullest bin enters the fit;
/// isolated outliers past an empty bin belong to the tail, not the bulk.
pub fn gaussian_fit(h: &WeightHistogram) -> Result<GaussianFit, WeightsError> {
    let centers = h.bin_centers();
    let (lo, hi) = core_run(&h.counts);
    let pts: Vec<(f64, f64, f64)> = (lo..hi)
        .map(|i| (centers[i], h.density[i].ln(), h.counts[i] as f64))
        .collect();
    if pts.len() < MIN_FIT_BINS {
        return Err(WeightsError::InsufficientSupport {
            populated: pts.len(),
            needed: MIN_FIT_BINS,
        });
    }
    // Work in a centred, scaled coordinate t = (s − s0)/scale for conditioning.
    let wsum: f64 = pts.iter().map(|p| p.2).sum();
    let s0 = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum;
    let scale = pts
        .iter()
        .map(|p| (p.0 - s0).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for &(x, y, w) in &pts {
        let t = (x - s0) / scale;
        let basis = [1.0, t, t * t];
        for r in 0..3 {
            aty[r] += w * basis[r] * y;
            for c in 0..3 {
                ata[r][c] += w * basis[r] * basis[c];
            }
        }
    }
    let coef = solve3(ata, aty)
        .ok_or_else(|| WeightsError::InvalidArgument("singular fit system".into()))?;
    let (k1, k2) = (coef[1], coef[2]);
    if k2 >= 0.0 {
        return Err(WeightsError::NonConcaveFit {
            c2: k2 / (scale * scale),
        });
    }
    let c2 = k2 / (scale * scale);
    let sigma = (-1.0 / (2.0 * c2)).sqrt();
    let mu = s0 - k1 * scale / (2.0 * k2);
    let sq: f64 = pts
        .iter()
        .map(|&(x, y, _)| {
            let t = (x - s0) / scale;
            let model = coef[0] + k1 * t + k2 * t * t;
            (y - model).powi(2)
        })
        .sum();
    let residual = (sq / pts.len() as f64).sqrt();
    Ok(GaussianFit {
        mu,
        sigma,
        residual,
    })
}

/// Half-open index range of the nonzero bins contiguous with the fullest one.
fn core_run(counts: &[u64]) -> (usize, usize) {
    let Some(mode) = (0..counts.len()).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))) else {
        return (0, 0);
    };
    if counts[mode] == 0 {
        return (0, 0);
    }
    let mut lo = mode;
    while lo > 0 && counts[lo - 1] > 0 {
        lo -= 1;
    }
    let mut hi = mode + 1;
    while hi < counts.len() && counts[hi] > 0 {
        hi += 1;
    }
    (lo, hi)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = ((row + 1)..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailMetrics {
    pub max_abs: f64,
    pub count_beyond_5sigma: u64,
    pub fraction_beyond_5sigma: f64,
}

/// Size of the tail beyond `5·sigma_ref`.
pub fn tail_metrics(values: &[f64], sigma_ref: f64) -> Result<TailMetrics, WeightsError> {
    if !(sigma_ref > 0.0 && sigma_ref.is_finite()) {
        return Err(WeightsError::InvalidArgument(format!(
            "sigma_ref must be positive, got {sigma_ref}"
        )));
    }
    let threshold = TAIL_SIGMAS * sigma_ref;
    let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let count = values.iter().filter(|v| v.abs() > threshold).count() as u64;
    let fraction = if values.is_empty() {
        0.0
    } else {
        count as f64 / values.len() as f64
    };
    Ok(TailMetrics {
        max_abs,
        count_beyond_5sigma: count,
        fraction_beyond_5sigma: fraction,
    })
}

/// Total-variation distance after spreading both histograms onto a shared
/// grid of [`DEFAULT_BINS`] bins over the union of their ranges. Mass moves
/// in proportion to overlap, i.e. uniformly within each source bin.
pub fn histogram_distance(h1: &WeightHistogram, h2: &WeightHistogram) -> Result<f64, WeightsError> {
    let (lo1, hi1) = h1.range();
    let (lo2, hi2) = h2.range();
    let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
    if !(hi > lo) {
        return Err(WeightsError::DegenerateRange {
            value: lo,
            count: (h1.total() + h2.total()) as usize,
        });
    }
    let bins = DEFAULT_BINS;
    let width = (hi - lo) / bins as f64;
    let grid: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let p = rebin(h1, &grid);
    let q = rebin(h2, &grid);
    Ok(0.5 * p.iter().zip(&q).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

fn rebin(h: &WeightHistogram, grid: &[f64]) -> Vec<f64> {
    let bins = grid.len() - 1;
    let (lo, hi) = (grid[0], grid[bins]);
    let width = (hi - lo) / bins as f64;
    let total = h.total() as f64;
    let mut out = vec![0.0; bins];
    if total == 0.0 {
        return out;
    }
    for (e, &n) in h.bin_edges.windows(2).zip(&h.counts) {
        if n == 0 {
            continue;
        }
        let mass = n as f64 / total;
        let (a, b) = (e[0], e[1]);
        let span = b - a;
        let first = (((a - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        let last = (((b - lo) / width).ceil() as isize - 1).clamp(0, bins as isize - 1) as usize;
        for (k, slot) in out.iter_mut().enumerate().take(last + 1).skip(first) {
            let overlap = (b.min(grid[k + 1]) - a.max(grid[k])).max(0.0);
            *slot += mass * overlap / span;
        }
    }
    out
}

/// Per-component statistics of a weight set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSummary {
    pub component: Component,
    pub count: usize,
    pub fit: Option<GaussianFit>,
    /// Why the fit failed, when it did.
    pub fit_error: Option<String>,
    pub tail: TailMetrics,
    pub sigma_ref: f64,
}

/// Histogram, fit and tail metrics for one component. The tail uses
/// `sigma_ref` if given, else the fitted width.
pub fn summarize_component(
    w: &WeightSet,
    component: Component,
    include_identity: bool,
    bins: usize,
    sigma_ref: Option<f64>,
) -> Result<(WeightHistogram, ComponentSummary), WeightsError> {
    let values = w.component(component, include_identity);
    let h = histogram(values, bins)?.with_component(component);
    let (fit, fit_error) = match gaussian_fit(&h) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let sigma = match (sigma_ref, fit) {
        (Some(s), _) => s,
        (None, Some(f)) => f.sigma,
        (None, None) => population_std(values).max(f64::MIN_POSITIVE),
    };
    let tail = tail_metrics(values, sigma)?;
    let summary = ComponentSummary {
        component,
        count: values.len(),
        fit,
        fit_error,
        tail,
        sigma_ref: sigma,
    };
    Ok((h, summary))
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, random_hermitian, RandomSeed};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_x_generator() {
        let mut g = Array2::zeros((4, 4));
        g[[0, 1]] = c(1.0, 0.0);
        g[[1, 0]] = c(1.0, 0.0);
        let w = decompose(&HermitianMatrix::new(g).unwrap());
        assert_eq!(w.a_at(0, 1), 1.0);
        assert_eq!(w.a.iter().filter(|&&v| v != 0.0).count(), 1);
        assert!(w.b.iter().chain(&w.c).all(|&v| v == 0.0));
    }

    #[test]
    fn pauli_z_coefficient() {
        let mut g = Array2::zeros((2, 2));
        g[[0, 0]] = c(1.0, 0.0);
        g[[1, 1]] = c(-1.0, 0.0);
        let w = decompose(&HermitianMatrix::new(g).unwrap());
        assert_eq!(w.c, vec![1.0, 0.0]);
        assert_eq!(w.a, vec![0.0]);
        assert_eq!(w.b, vec![0.0]);
    }

    #[test]
    fn y_generator_sign() {
        // λy_01 has −i above the diagonal, so G_01 = −i·b gives b = −Im G_01.
        let mut g = Array2::zeros((3, 3));
        g[[0, 2]] = c(0.0, -0.7);
        g[[2, 0]] = c(0.0, 0.7);
        let w = decompose(&HermitianMatrix::new(g).unwrap());
        assert!((w.b_at(0, 2) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_trivial_sets() {
        assert!(reconstruct(&WeightSet::zeros(4)).unwrap().max_abs() == 0.0);
        let mut w = WeightSet::zeros(4);
        w.c[3] = 1.0;
        let g = reconstruct(&w).unwrap();
        assert!(g.max_abs_diff(&HermitianMatrix::new(Array2::eye(4)).unwrap()) < 1e-15);
    }

    #[test]
    fn pair_index_matches_row_order() {
        let w = WeightSet::zeros(6);
        let mut k = 0;
        for l in 0..6 {
            for m in (l + 1)..6 {
                assert_eq!(w.pair_index(l, m), k);
                k += 1;
            }
        }
    }

    /// Explicit generator matrices for small `N`.
    fn basis(
        n: usize,
    ) -> (
        Vec<Array2<Complex64>>,
        Vec<Array2<Complex64>>,
        Vec<Array2<Complex64>>,
    ) {
        let (mut xs, mut ys, mut zs) = (vec![], vec![], vec![]);
        for l in 0..n {
            for m in (l + 1)..n {
                let mut x = Array2::zeros((n, n));
                x[[l, m]] = c(1.0, 0.0);
                x[[m, l]] = c(1.0, 0.0);
                let mut y = Array2::zeros((n, n));
                y[[l, m]] = c(0.0, -1.0);
                y[[m, l]] = c(0.0, 1.0);
                xs.push(x);
                ys.push(y);
            }
        }
        for k in 1..n {
            let mut z = Array2::zeros((n, n));
            let s = (2.0 / (k * (k + 1)) as f64).sqrt();
            for j in 0..k {
                z[[j, j]] = c(s, 0.0);
            }
            z[[k, k]] = c(-(k as f64) * s, 0.0);
            zs.push(z);
        }
        zs.push(Array2::eye(n));
        (xs, ys, zs)
    }

    fn tr(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
        a.dot(b).diag().sum()
    }

    #[test]
    fn basis_orthogonality() {
        for n in [2usize, 3, 5, 8] {
            let (xs, ys, zs) = basis(n);
            for x in &xs {
                for y in &ys {
                    assert!(tr(x, y).norm() < 1e-14);
                }
            }
            for (i, a) in zs[..n - 1].iter().enumerate() {
                for (j, b) in zs[..n - 1].iter().enumerate() {
                    let expected = if i == j { 2.0 } else { 0.0 };
                    assert!((tr(a, b) - c(expected, 0.0)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn reconstruction_matches_explicit_generator_sum() {
        let n = 16;
        let g = random_hermitian(n, 2.0, RandomSeed(31));
        let w = decompose(&g);
        let (xs, ys, zs) = basis(n);
        let mut sum = Array2::<Complex64>::zeros((n, n));
        for (coef, m) in
            w.a.iter()
                .zip(&xs)
                .chain(w.b.iter().zip(&ys))
                .chain(w.c.iter().zip(&zs))
        {
            sum.scaled_add(c(*coef, 0.0), m);
        }
        assert!(crate::linalg::max_abs_diff(&sum, g.as_array()) < 1e-12);
        // The z coefficients agree with Tr(G λz_k)/2.
        for (k, z) in zs[..n - 1].iter().enumerate() {
            assert!((tr(g.as_array(), z).re / 2.0 - w.c[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_generator_round_trip() {
        let u = haar_unitary(64, RandomSeed(2)).unwrap();
        let w = decompose_unitary(&u).unwrap();
        let g = reconstruct(&w).unwrap();
        let w2 = decompose(&g);
        let diff =
            w.a.iter()
                .chain(&w.b)
                .chain(&w.c)
                .zip(w2.a.iter().chain(&w2.b).chain(&w2.c));
        assert!(diff.map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) < 1e-12);
        assert_eq!(w.a.len() + w.b.len() + w.c.len(), 64 * 64);
    }

    #[test]
    fn malformed_weight_sets_are_rejected() {
        let mut w = WeightSet::zeros(4);
        w.a.pop();
        assert!(reconstruct(&w).is_err());
        let mut w = WeightSet::zeros(4);
        w.c[0] = f64::NAN;
        assert!(matches!(reconstruct(&w), Err(WeightsError::NonFinite)));
    }

    #[test]
    fn component_views() {
        let w = WeightSet::zeros(5);
        assert_eq!(w.component(Component::X, false).len(), 10);
        assert_eq!(w.component(Component::Z, false).len(), 4);
        assert_eq!(w.component(Component::Z, true).len(), 5);
    }

    #[test]
    fn small_histogram() {
        let h = histogram(&[0.0, 0.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![3, 1]);
        assert_eq!(h.bin_edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(h.density, vec![1.5, 0.5]);
    }

    #[test]
    fn histogram_windows_are_right_closed() {
        let h = histogram(&[0.0, 0.5, 0.5000001, 1.0], 2).unwrap();
        assert_eq!(h.counts, vec![2, 2]);
    }

    #[test]
    fn degenerate_and_bad_histograms() {
        assert_eq!(
            histogram(&[0.3, 0.3], 10).unwrap_err(),
            WeightsError::DegenerateRange {
                value: 0.3,
                count: 2
            }
        );
        assert!(histogram(&[], 10).is_err());
        assert!(histogram(&[0.0, f64::NAN], 10).is_err());
        assert!(histogram(&[0.0, 1.0], 0).is_err());
    }

    fn normal_samples(n: usize, mu: f64, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = RandomSeed(seed).rng();
        let mut v = Vec::with_capacity(n);
        while v.len() < n {
            let (a, b) = crate::linalg::random::box_muller(&mut rng);
            v.push(mu + sigma * a);
            v.push(mu + sigma * b);
        }
        v.truncate(n);
        v
    }

    #[test]
    fn fit_recovers_synthetic_gaussians() {
        let h = histogram(&normal_samples(1_000_000, 0.0, 0.04, 1), 100).unwrap();
        let f = gaussian_fit(&h).unwrap();
        assert!((0.038..=0.042).contains(&f.sigma), "sigma {}", f.sigma);
        assert!((f.sigma / 0.04 - 1.0).abs() < 0.05);

        let h = histogram(&normal_samples(200_000, 0.5, 0.1, 2), 100).unwrap();
        let f = gaussian_fit(&h).unwrap();
        assert!((0.48..=0.52).contains(&f.mu), "mu {}", f.mu);
    }

    #[test]
    fn fit_rejects_flat_and_sparse_histograms() {
        // Density proportional to |s|: convex in log scale.
        let v_shape: Vec<f64> = (0..20_000)
            .map(|i| {
                let r = ((i / 2) as f64 + 0.5) / 10_000.0;
                if i % 2 == 0 {
                    r.sqrt()
                } else {
                    -r.sqrt()
                }
            })
            .collect();
        let h = histogram(&v_shape, 50).unwrap();
        assert!(matches!(
            gaussian_fit(&h),
            Err(WeightsError::NonConcaveFit { .. })
        ));
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 100).unwrap();
        assert!(matches!(
            gaussian_fit(&h),
            Err(WeightsError::InsufficientSupport { populated: 1, .. })
        ));
    }

    #[test]
    fn isolated_outliers_do_not_move_the_fit() {
        let mut values = normal_samples(200_000, 0.0, 0.04, 21);
        values.extend([0.5, 0.9, 1.3, 1.7, 1.95]);
        let fit = gaussian_fit(&histogram(&values, 100).unwrap()).unwrap();
        assert!((fit.sigma - 0.04).abs() < 0.004, "{fit:?}");
    }

    #[test]
    fn tails() {
        let t = tail_metrics(&[0.01, -0.02, 0.03], 0.04).unwrap();
        assert_eq!(t.count_beyond_5sigma, 0);
        assert_eq!(t.max_abs, 0.03);
        let t = tail_metrics(&[0.0, 0.5, -0.3, 0.1], 0.04).unwrap();
        assert_eq!(t.count_beyond_5sigma, 2);
        assert_eq!(t.fraction_beyond_5sigma, 0.5);
        assert!(tail_metrics(&[1.0], 0.0).is_err());
    }

    #[test]
    fn distance_extremes() {
        let a = histogram(&normal_samples(10_000, 0.0, 1.0, 3), 100).unwrap();
        assert!(histogram_distance(&a, &a).unwrap() < 1e-12);
        let b = histogram(&[0.0, 0.5, 1.0], 10).unwrap();
        let c2 = histogram(&[2.0, 2.5, 3.0], 10).unwrap();
        assert!((histogram_distance(&b, &c2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_orders_shifted_gaussians() {
        let base = histogram(&normal_samples(50_000, 0.0, 1.0, 4), 100).unwrap();
        let near = histogram(&normal_samples(50_000, 0.2, 1.0, 5), 100).unwrap();
        let far = histogram(&normal_samples(50_000, 1.5, 1.0, 6), 100).unwrap();
        let dn = histogram_distance(&base, &near).unwrap();
        let df = histogram_distance(&base, &far).unwrap();
        assert!(dn < df && df <= 1.0);
    }

    #[test]
    fn csv_export() {
        let h = histogram(&[0.0, 0.0, 0.0, 1.0], 2).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "bin_center,count,density");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(",3,"));
    }
}
