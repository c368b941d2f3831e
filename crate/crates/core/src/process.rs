//! The generator side of the game: white-noise batches, filtered processes
//! `g_α(Z) = α ⋆ Z`, their covariances and power spectra, and the set of
//! filters whose power spectrum matches the empirical spectrum ratio.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sym_eigenvalues, sym_spectral_norm};
use crate::rng::SeedTag;
use crate::spectral::{circular_convolve_slices, DftPlan, RealSignal};

/// Default tolerance on `min_ω |α̂(ω)|` below which a filter is degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Generator parameters: a real filter `α ∈ ℝᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Filter(RealSignal);

impl Filter {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        Ok(Self(RealSignal::new(alpha)?))
    }

    /// The identity filter `(1, 0, …, 0)`.
    pub fn identity(d: usize) -> Self {
        Self(RealSignal::delta(d, 0))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn signal(&self) -> &RealSignal {
        &self.0
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        DftPlan::new(self.len()).forward_real(self.as_slice())
    }

    /// `|α̂(ω)|²` on the grid; the eigenvalues of the exact covariance.
    pub fn power_spectrum(&self) -> Vec<f64> {
        self.spectrum().iter().map(|c| c.norm_sqr()).collect()
    }
}

/// `n` sample paths of length `d`, with their transforms cached row-wise.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    n: usize,
    d: usize,
    paths: Vec<f64>,
    spectra: Vec<Complex64>,
    seed_tag: Option<SeedTag>,
}

impl SampleBatch {
    /// Builds a batch from row-major paths, computing the spectra.
    pub fn from_paths(d: usize, paths: Vec<f64>, seed_tag: Option<SeedTag>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
        }
        if paths.is_empty() || !paths.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(format!(
                "{} values do not form a non-empty batch of rows of length {d}",
                paths.len()
            )));
        }
        if paths.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample value".into()));
        }
        let n = paths.len() / d;
        let plan = DftPlan::new(d);
        let mut spectra = vec![Complex64::new(0.0, 0.0); n * d];
        for (row, out) in paths.chunks_exact(d).zip(spectra.chunks_exact_mut(d)) {
            plan.forward_real_into(row, out);
        }
        Ok(Self { n, d, paths, spectra, seed_tag })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed_tag(&self) -> Option<SeedTag> {
        self.seed_tag
    }

    pub fn paths(&self) -> &[f64] {
        &self.paths
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.paths[i * self.d..(i + 1) * self.d]
    }

    pub fn spectrum_row(&self, i: usize) -> &[Complex64] {
        &self.spectra[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.paths.chunks_exact(self.d)
    }

    pub fn spectrum_rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.spectra.chunks_exact(self.d)
    }
}

/// `𝔼_n |X̂(ω)|²` on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSpectrum(Vec<f64>);

impl EmpiricalSpectrum {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A `d × d` symmetric positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigenvalues(&self.0)
    }

    /// `‖self − other‖` in spectral norm.
    pub fn distance(&self, other: &CovarianceMatrix) -> f64 {
        sym_spectral_norm(&(&self.0 - &other.0))
    }
}

/// `n` i.i.d. `N(0, I_d)` vectors drawn from the stream named by `tag`.
pub fn sample_white_noise(n: usize, d: usize, tag: SeedTag) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidInput("sample count must be at least 1".into()));
    }
    let mut rng = tag.rng();
    let paths: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    SampleBatch::from_paths(d, paths, Some(tag))
}

/// Rows `α ⋆ z_i`; spectra are `α̂ · ẑ_i`.
pub fn generate(alpha: &Filter, noise: &SampleBatch) -> Result<SampleBatch> {
    check_dim(noise.d(), alpha.len())?;
    let d = noise.d();
    let a = alpha.as_slice();
    let ah = alpha.spectrum();
    let mut paths = Vec::with_capacity(noise.n() * d);
    let mut spectra = Vec::with_capacity(noise.n() * d);
    for (row, spec) in noise.rows().zip(noise.spectrum_rows()) {
        paths.extend(circular_convolve_slices(a, row));
        spectra.extend(spec.iter().zip(&ah).map(|(z, a)| z * a));
    }
    Ok(SampleBatch { n: noise.n(), d, paths, spectra, seed_tag: noise.seed_tag() })
}

/// `Σ_α(u, u') = Σ_v α(u − v) α(u' − v)`.
pub fn exact_covariance(alpha: &Filter) -> CovarianceMatrix {
    let d = alpha.len();
    let a = alpha.as_slice();
    let m = DMatrix::from_fn(d, d, |u, w| (0..d).map(|v| a[(u + d - v) % d] * a[(w + d - v) % d]).sum());
    CovarianceMatrix(m)
}

/// `(1/n) Σ_i x_i x_iᵀ`.
pub fn empirical_covariance(batch: &SampleBatch) -> CovarianceMatrix {
    let d = batch.d();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for row in batch.rows() {
        for i in 0..d {
            let ri = row[i];
            for j in i..d {
                m[(i, j)] += ri * row[j];
            }
        }
    }
    let inv_n = 1.0 / batch.n() as f64;
    for i in 0..d {
        for j in i..d {
            let v = m[(i, j)] * inv_n;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CovarianceMatrix(m)
}

/// `max_ω | |α̂(ω)|² − |ᾱ̂(ω)|² |`, equal to `‖Σ_α − Σ_ᾱ‖`.
pub fn generator_error(alpha: &Filter, alpha_bar: &Filter) -> Result<f64> {
    check_dim(alpha_bar.len(), alpha.len())?;
    Ok(alpha.power_spectrum().iter().zip(alpha_bar.power_spectrum()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `(1/n) Σ_i |x̂_i(ω)|²`.
pub fn empirical_spectrum(batch: &SampleBatch) -> EmpiricalSpectrum {
    let d = batch.d();
    let mut acc = vec![0.0; d];
    for spec in batch.spectrum_rows() {
        for (a, s) in acc.iter_mut().zip(spec) {
            *a += s.norm_sqr();
        }
    }
    let inv_n = 1.0 / batch.n() as f64;
    acc.iter_mut().for_each(|a| *a *= inv_n);
    EmpiricalSpectrum(acc)
}

/// `𝔼_n|X̂(ω)|² / 𝔼_n|Ẑ(ω)|²`, the squared spectrum shared by every filter
/// in the consistent set.
pub fn spectrum_ratio(data: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    check_dim(noise.len(), data.len())?;
    if let Some(l) = noise.iter().position(|&p| p <= 0.0 || !p.is_finite()) {
        return Err(Error::Degenerate(format!("noise spectrum vanishes at frequency index {l}")));
    }
    Ok(data.iter().zip(noise).map(|(x, z)| x / z).collect())
}

/// The real filter whose transform is `√(spectrum ratio)`.
///
/// The ratio is real, nonnegative and even on the grid, so the inverse
/// transform is real; residual imaginary parts below `1e-10·‖α‖` are dropped.
pub fn canonical_filter_from_spectra(data: &[f64], noise: &[f64]) -> Result<Filter> {
    let ratio = spectrum_ratio(data, noise)?;
    let d = ratio.len();
    let amp: Vec<Complex64> = ratio.iter().map(|r| Complex64::new(r.sqrt(), 0.0)).collect();
    let time = DftPlan::new(d).inverse(&amp);
    let norm = time.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
    let max_im = time.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if max_im > 1e-10 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Consistency(format!(
            "inverse transform has imaginary residue {max_im:e} for filter norm {norm:e}"
        )));
    }
    Filter::new(time.iter().map(|c| c.re).collect())
}

/// The canonical element of the consistent set for this data/noise pair.
pub fn canonical_consistent_filter(data: &SampleBatch, noise: &SampleBatch) -> Result<Filter> {
    check_dim(data.d(), noise.d())?;
    canonical_filter_from_spectra(empirical_spectrum(data).as_slice(), empirical_spectrum(noise).as_slice())
}

/// `max_ω | |α̂(ω)|² − 𝔼_n|X̂(ω)|²/𝔼_n|Ẑ(ω)|² |` from precomputed spectra.
pub fn epsilon_alpha_from_spectra(alpha: &[f64], data: &[f64], noise: &[f64]) -> Result<f64> {
    check_dim(data.len(), alpha.len())?;
    let ratio = spectrum_ratio(data, noise)?;
    let spec = DftPlan::new(alpha.len()).forward_real(alpha);
    Ok(spec.iter().zip(&ratio).map(|(a, r)| (a.norm_sqr() - r).abs()).fold(0.0, f64::max))
}

/// Distance of `|α̂|²` from the empirical spectrum ratio; zero exactly on
/// the consistent set.
pub fn epsilon_alpha(alpha: &Filter, data: &SampleBatch, noise: &SampleBatch) -> Result<f64> {
    check_dim(data.d(), noise.d())?;
    epsilon_alpha_from_spectra(
        alpha.as_slice(),
        empirical_spectrum(data).as_slice(),
        empirical_spectrum(noise).as_slice(),
    )
}

/// Whether `min_ω |α̂(ω)| ≤ tol`.
pub fn is_degenerate(alpha: &Filter, tol: f64) -> bool {
    alpha.spectrum().iter().any(|c| c.norm() <= tol)
}

/// Shares batches across game states without copying.
pub type SharedBatch = Arc<SampleBatch>;
