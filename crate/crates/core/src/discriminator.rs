//! Discriminator families, the finite-sample game value `V_n` and its
//! analytic gradients.
//!
//! All three families only see second moments of the data, so a game is
//! evaluated from four sufficient statistics computed once per batch pair:
//! the empirical covariances of data and noise and their empirical power
//! spectra. Evaluation cost is then independent of `n`.
//!
//! * Real: one feature `r = βᵀ(Σ_n − Σ_{α,n})β`.
//! * Complex-Fourier: `r_ℓ = 𝔼_n|⟨β_ℓ,X⟩|² − 𝔼_n|⟨β_ℓ,α⋆Z⟩|²` with
//!   `β_ℓ = a_ℓ + i b_ℓ`, so `r_ℓ = a_ℓᵀ A a_ℓ + b_ℓᵀ A b_ℓ`.
//! * Convolutional: `r_ℓ = d⁻¹ Σ_ω (𝔼_n|X̂|² − |α̂|² 𝔼_n|Ẑ|²) |β̂_ℓ|²`.
//!
//! `V_n = Σ_ℓ r_ℓ²` in every case.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::process::{empirical_covariance, empirical_spectrum, CovarianceMatrix, Filter, SampleBatch, SharedBatch};
use crate::spectral::{circular_convolve_slices, reverse, DftPlan, RealSignal};

/// Slack allowed on the real-family norm constraint.
pub const RADIUS_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Real,
    ComplexFourier,
    Convolutional,
}

impl Family {
    pub fn tag(self) -> &'static str {
        match self {
            Family::Real => "real",
            Family::ComplexFourier => "complex",
            Family::Convolutional => "conv",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "real" => Some(Family::Real),
            "complex" | "complex-fourier" => Some(Family::ComplexFourier),
            "conv" | "convolutional" => Some(Family::Convolutional),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Family plus dimensions; enough to interpret a flat parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub family: Family,
    pub d: usize,
    pub m: usize,
}

impl Shape {
    /// Length of the flattened β vector.
    pub fn param_count(&self) -> usize {
        match self.family {
            Family::Real => self.d,
            Family::ComplexFourier => 2 * self.d * self.m,
            Family::Convolutional => self.d * self.m,
        }
    }
}

/// Discriminator parameters.
///
/// Flat layout: real `β`; complex `[re(β_0), im(β_0), re(β_1), …]`;
/// convolutional `[β_0, β_1, …]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Discriminator {
    Real { beta: RealSignal, radius: f64 },
    ComplexFourier { re: Vec<Vec<f64>>, im: Vec<Vec<f64>> },
    Convolutional { betas: Vec<Vec<f64>> },
}

impl Discriminator {
    /// Real discriminator on the unit ball.
    pub fn real(beta: Vec<f64>) -> Result<Self> {
        let beta = RealSignal::new(beta)?;
        if beta.norm() > 1.0 + RADIUS_SLACK {
            return Err(Error::InvalidInput(format!("real discriminator norm {} exceeds radius 1", beta.norm())));
        }
        Ok(Discriminator::Real { beta, radius: 1.0 })
    }

    pub fn complex(re: Vec<Vec<f64>>, im: Vec<Vec<f64>>) -> Result<Self> {
        if re.is_empty() || re.len() != im.len() {
            return Err(Error::InvalidInput("complex discriminator needs m ≥ 1 matching re/im parts".into()));
        }
        let d = re[0].len();
        check_rows(&re, d)?;
        check_rows(&im, d)?;
        Ok(Discriminator::ComplexFourier { re, im })
    }

    pub fn convolutional(betas: Vec<Vec<f64>>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidInput("convolutional discriminator needs m ≥ 1".into()));
        }
        let d = betas[0].len();
        check_rows(&betas, d)?;
        Ok(Discriminator::Convolutional { betas })
    }

    pub fn family(&self) -> Family {
        match self {
            Discriminator::Real { .. } => Family::Real,
            Discriminator::ComplexFourier { .. } => Family::ComplexFourier,
            Discriminator::Convolutional { .. } => Family::Convolutional,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Discriminator::Real { beta, .. } => beta.len(),
            Discriminator::ComplexFourier { re, .. } => re[0].len(),
            Discriminator::Convolutional { betas } => betas[0].len(),
        }
    }

    /// Feature count.
    pub fn m(&self) -> usize {
        match self {
            Discriminator::Real { .. } => 1,
            Discriminator::ComplexFourier { re, .. } => re.len(),
            Discriminator::Convolutional { betas } => betas.len(),
        }
    }

    pub fn shape(&self) -> Shape {
        Shape { family: self.family(), d: self.d(), m: self.m() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            Discriminator::Real { beta, .. } => beta.as_slice().to_vec(),
            Discriminator::ComplexFourier { re, im } => {
                re.iter().zip(im).flat_map(|(r, i)| r.iter().chain(i.iter()).copied()).collect()
            }
            Discriminator::Convolutional { betas } => betas.concat(),
        }
    }

    /// Rebuilds a discriminator of `shape` from a flat parameter vector.
    /// The real family gets the unit radius and is not norm-checked here.
    pub fn from_flat(shape: Shape, flat: &[f64]) -> Result<Self> {
        check_dim(shape.param_count(), flat.len())?;
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite discriminator parameter".into()));
        }
        let d = shape.d;
        Ok(match shape.family {
            Family::Real => Discriminator::Real { beta: RealSignal::new(flat.to_vec())?, radius: 1.0 },
            Family::ComplexFourier => {
                let (mut re, mut im) = (Vec::new(), Vec::new());
                for chunk in flat.chunks_exact(2 * d) {
                    re.push(chunk[..d].to_vec());
                    im.push(chunk[d..].to_vec());
                }
                Discriminator::ComplexFourier { re, im }
            }
            Family::Convolutional => {
                Discriminator::Convolutional { betas: flat.chunks_exact(d).map(<[f64]>::to_vec).collect() }
            }
        })
    }

    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        Self::from_flat(self.shape(), flat)
    }
}

fn check_rows(rows: &[Vec<f64>], d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("feature length must be at least 2, got {d}")));
    }
    for r in rows {
        check_dim(d, r.len())?;
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite discriminator parameter".into()));
        }
    }
    Ok(())
}

/// `β_ℓ(u) = e^{i2πℓu/d}` for `ℓ < d`, so `⟨β_ℓ, x⟩ = x̂(2πℓ/d)`.
pub fn fourier_basis_discriminator(d: usize) -> Result<Discriminator> {
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
    }
    let plan = DftPlan::new(d);
    let mut re = Vec::with_capacity(d);
    let mut im = Vec::with_capacity(d);
    for l in 0..d {
        let row: Vec<Complex64> = (0..d).map(|u| plan.twiddle(l, u).conj()).collect();
        re.push(row.iter().map(|c| c.re).collect());
        im.push(row.iter().map(|c| c.im).collect());
    }
    Discriminator::complex(re, im)
}

/// Matrix whose column `ℓ` is `|β̂_ℓ|^{∘2}`.
pub fn squared_spectra_matrix(betas: &[Vec<f64>]) -> DMatrix<f64> {
    let d = betas[0].len();
    let plan = DftPlan::new(d);
    let mut m = DMatrix::zeros(d, betas.len());
    for (l, b) in betas.iter().enumerate() {
        for (w, c) in plan.forward_real(b).iter().enumerate() {
            m[(w, l)] = c.norm_sqr();
        }
    }
    m
}

/// `(d_β, m_β)` for a convolutional discriminator with `m = d`.
///
/// `m_β` is the minimum entry of `B`, the matrix whose column `ℓ` is
/// `|β̂_ℓ|^{∘2}`. Real filters have even squared spectra, so rows `ω` and
/// `d − ω` of `B` coincide and `det B` vanishes for `d ≥ 3`. `d_β` is
/// therefore the volume `sqrt(det(B_r B_rᵀ))` spanned over the
/// `⌊d/2⌋ + 1` distinct frequencies, which is positive iff the squared
/// spectra span every even spectrum. For `d = 2` it equals `|det B|`.
pub fn d_beta_m_beta(disc: &Discriminator) -> Result<(f64, f64)> {
    let Discriminator::Convolutional { betas } = disc else {
        return Err(Error::InvalidInput(format!(
            "spectral certificate needs a convolutional discriminator, got {}",
            disc.family()
        )));
    };
    let d = betas[0].len();
    if betas.len() != d {
        return Err(Error::InvalidInput(format!(
            "squared-spectra matrix is not square: m = {} but d = {d}",
            betas.len()
        )));
    }
    let b = squared_spectra_matrix(betas);
    let min = b.iter().copied().fold(f64::INFINITY, f64::min);
    let reduced = b.rows(0, d / 2 + 1).into_owned();
    let gram = &reduced * reduced.transpose();
    Ok((gram.determinant().max(0.0).sqrt(), min))
}

/// Second-moment statistics that fully determine `V_n` and its gradients.
#[derive(Clone, Debug)]
pub struct MomentStats {
    d: usize,
    /// `Σ_n = 𝔼_n XXᵀ`, row-major.
    sigma_data: Vec<f64>,
    /// `𝔼_n ZZᵀ`, row-major.
    sigma_noise: Vec<f64>,
    spec_data: Vec<f64>,
    spec_noise: Vec<f64>,
}

impl MomentStats {
    pub fn from_batches(data: &SampleBatch, noise: &SampleBatch) -> Result<Self> {
        check_dim(data.d(), noise.d())?;
        let flat = |c: CovarianceMatrix| {
            let m = c.into_matrix();
            let d = m.nrows();
            (0..d * d).map(|k| m[(k / d, k % d)]).collect::<Vec<_>>()
        };
        Ok(Self {
            d: data.d(),
            sigma_data: flat(empirical_covariance(data)),
            sigma_noise: flat(empirical_covariance(noise)),
            spec_data: empirical_spectrum(data).into_vec(),
            spec_noise: empirical_spectrum(noise).into_vec(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn spec_data(&self) -> &[f64] {
        &self.spec_data
    }

    pub fn spec_noise(&self) -> &[f64] {
        &self.spec_noise
    }

    pub fn sigma_data(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.sigma_data)
    }

    pub fn sigma_noise(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.sigma_noise)
    }

    /// `Σ_{α,n} = C_α (𝔼_n ZZᵀ) C_αᵀ` with `C_α(u, v) = α(u − v)`.
    pub fn generated_covariance(&self, alpha: &[f64]) -> DMatrix<f64> {
        let mut out = vec![0.0; self.d * self.d];
        let mut tmp = vec![0.0; self.d * self.d];
        generated_covariance_into(self.d, &self.sigma_noise, alpha, &mut tmp, &mut out);
        DMatrix::from_row_slice(self.d, self.d, &out)
    }

    /// `A = Σ_n − Σ_{α,n}`.
    pub fn covariance_gap(&self, alpha: &[f64]) -> DMatrix<f64> {
        self.sigma_data() - self.generated_covariance(alpha)
    }

    /// `S_β` from noise moments: `S(v,v') = Σ_{u,u'} β(u)β(u') Σ⁰(u−v, u'−v')`.
    pub fn s_matrix(&self, beta: &[f64]) -> DMatrix<f64> {
        let d = self.d;
        let s0 = &self.sigma_noise;
        DMatrix::from_fn(d, d, |v, w| {
            let mut acc = 0.0;
            for (u, &bu) in beta.iter().enumerate() {
                let i = (u + d - v) % d;
                for (u2, &bu2) in beta.iter().enumerate() {
                    acc += bu * bu2 * s0[i * d + (u2 + d - w) % d];
                }
            }
            acc
        })
    }
}

fn generated_covariance_into(d: usize, s0: &[f64], alpha: &[f64], tmp: &mut [f64], out: &mut [f64]) {
    // tmp = C_α Σ⁰
    for u in 0..d {
        for w in 0..d {
            let mut acc = 0.0;
            for v in 0..d {
                acc += alpha[(u + d - v) % d] * s0[v * d + w];
            }
            tmp[u * d + w] = acc;
        }
    }
    // out = tmp C_αᵀ
    for u in 0..d {
        for u2 in 0..d {
            let mut acc = 0.0;
            for w in 0..d {
                acc += tmp[u * d + w] * alpha[(u2 + d - w) % d];
            }
            out[u * d + u2] = acc;
        }
    }
}

/// Evaluates `V_n` and gradients for one discriminator shape on fixed
/// statistics. Holds scratch space, so it is cheap to call in a loop.
#[derive(Clone, Debug)]
pub struct GameModel {
    shape: Shape,
    stats: Arc<MomentStats>,
    plan: DftPlan,
    scratch: Scratch,
}

#[derive(Clone, Debug, Default)]
struct Scratch {
    residuals: Vec<f64>,
    cplx: Vec<Complex64>,
    spec_a: Vec<Complex64>,
    h: Vec<f64>,
    weight: Vec<f64>,
    b2: Vec<f64>,
    bh: Vec<Complex64>,
    gap: Vec<f64>,
    tmp: Vec<f64>,
    y: Vec<f64>,
    sy: Vec<f64>,
}

impl GameModel {
    pub fn new(shape: Shape, stats: Arc<MomentStats>) -> Result<Self> {
        check_dim(stats.d(), shape.d)?;
        if shape.m == 0 || (shape.family == Family::Real && shape.m != 1) {
            return Err(Error::InvalidInput(format!("invalid feature count {}", shape.m)));
        }
        let (d, m) = (shape.d, shape.m);
        let z = Complex64::new(0.0, 0.0);
        let scratch = Scratch {
            residuals: vec![0.0; m],
            cplx: vec![z; d],
            spec_a: vec![z; d],
            h: vec![0.0; d],
            weight: vec![0.0; d],
            b2: vec![0.0; d * m],
            bh: vec![z; d * m],
            gap: vec![0.0; d * d],
            tmp: vec![0.0; d * d],
            y: vec![0.0; d],
            sy: vec![0.0; d],
        };
        Ok(Self { shape, stats, plan: DftPlan::new(d), scratch })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn stats(&self) -> &Arc<MomentStats> {
        &self.stats
    }

    /// Residuals `r_ℓ` at `(α, β)`.
    pub fn residuals(&mut self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        self.compute_residuals(alpha, beta);
        self.scratch.residuals.clone()
    }

    pub fn value(&mut self, alpha: &[f64], beta: &[f64]) -> f64 {
        self.compute_residuals(alpha, beta);
        self.scratch.residuals.iter().map(|r| r * r).sum()
    }

    /// Writes `∇_α V_n` and `∇_β V_n` and returns `V_n`.
    pub fn gradients(&mut self, alpha: &[f64], beta: &[f64], grad_alpha: &mut [f64], grad_beta: &mut [f64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.shape.d);
        debug_assert_eq!(beta.len(), self.shape.param_count());
        self.compute_residuals(alpha, beta);
        match self.shape.family {
            Family::Convolutional => self.conv_gradients(grad_alpha, grad_beta),
            Family::Real | Family::ComplexFourier => self.quadratic_gradients(alpha, beta, grad_alpha, grad_beta),
        }
        self.scratch.residuals.iter().map(|r| r * r).sum()
    }

    fn compute_residuals(&mut self, alpha: &[f64], beta: &[f64]) {
        match self.shape.family {
            Family::Convolutional => self.conv_residuals(alpha, beta),
            Family::Real | Family::ComplexFourier => self.quadratic_residuals(alpha, beta),
        }
    }

    fn conv_residuals(&mut self, alpha: &[f64], beta: &[f64]) {
        let d = self.shape.d;
        let st = &self.stats;
        let s = &mut self.scratch;
        self.plan.forward_real_into(alpha, &mut s.spec_a);
        for w in 0..d {
            s.h[w] = st.spec_data[w] - s.spec_a[w].norm_sqr() * st.spec_noise[w];
        }
        let inv_d = 1.0 / d as f64;
        for (l, b) in beta.chunks_exact(d).enumerate() {
            let bh = &mut s.bh[l * d..(l + 1) * d];
            self.plan.forward_real_into(b, bh);
            let b2 = &mut s.b2[l * d..(l + 1) * d];
            let mut r = 0.0;
            for w in 0..d {
                b2[w] = bh[w].norm_sqr();
                r += s.h[w] * b2[w];
            }
            s.residuals[l] = r * inv_d;
        }
    }

    fn conv_gradients(&mut self, grad_alpha: &mut [f64], grad_beta: &mut [f64]) {
        let d = self.shape.d;
        let st = &self.stats;
        let s = &mut self.scratch;
        // ∇_α V = 2 Σ_ℓ r_ℓ ∇_α r_ℓ with ∇_α r_ℓ = −2 Re idft(|β̂_ℓ|² 𝔼|Ẑ|² α̂).
        s.weight.iter_mut().for_each(|w| *w = 0.0);
        for (l, &r) in s.residuals.iter().enumerate() {
            for w in 0..d {
                s.weight[w] += r * s.b2[l * d + w];
            }
        }
        for w in 0..d {
            s.cplx[w] = s.spec_a[w] * (s.weight[w] * st.spec_noise[w]);
        }
        self.plan.inverse_real_into(&s.cplx, grad_alpha);
        grad_alpha.iter_mut().for_each(|g| *g *= -4.0);
        // ∇_{β_ℓ} V = 2 r_ℓ · 2 Re idft(h β̂_ℓ).
        for (l, gb) in grad_beta.chunks_exact_mut(d).enumerate() {
            let r = s.residuals[l];
            for w in 0..d {
                s.cplx[w] = s.bh[l * d + w] * s.h[w];
            }
            self.plan.inverse_real_into(&s.cplx, gb);
            gb.iter_mut().for_each(|g| *g *= 4.0 * r);
        }
    }

    fn feature_vectors<'a>(&self, beta: &'a [f64], l: usize) -> (&'a [f64], Option<&'a [f64]>) {
        let d = self.shape.d;
        match self.shape.family {
            Family::Real => (beta, None),
            _ => {
                let chunk = &beta[l * 2 * d..(l + 1) * 2 * d];
                (&chunk[..d], Some(&chunk[d..]))
            }
        }
    }

    fn quadratic_residuals(&mut self, alpha: &[f64], beta: &[f64]) {
        let d = self.shape.d;
        {
            let st = &self.stats;
            let s = &mut self.scratch;
            generated_covariance_into(d, &st.sigma_noise, alpha, &mut s.tmp, &mut s.gap);
            for (g, sd) in s.gap.iter_mut().zip(&st.sigma_data) {
                *g = sd - *g;
            }
        }
        for l in 0..self.shape.m {
            let (a, b) = self.feature_vectors(beta, l);
            let gap = &self.scratch.gap;
            let mut r = quad_form(gap, a);
            if let Some(b) = b {
                r += quad_form(gap, b);
            }
            self.scratch.residuals[l] = r;
        }
    }

    fn quadratic_gradients(&mut self, alpha: &[f64], beta: &[f64], grad_alpha: &mut [f64], grad_beta: &mut [f64]) {
        let d = self.shape.d;
        grad_alpha.iter_mut().for_each(|g| *g = 0.0);
        let per_feature = match self.shape.family {
            Family::Real => d,
            _ => 2 * d,
        };
        for l in 0..self.shape.m {
            let r = self.scratch.residuals[l];
            let (a, b) = self.feature_vectors(beta, l);
            let gb = &mut grad_beta[l * per_feature..(l + 1) * per_feature];
            // ∇_a r = 2 A a, so ∇_a V contribution is 4 r A a.
            mat_vec(&self.scratch.gap, a, &mut gb[..d]);
            gb[..d].iter_mut().for_each(|g| *g *= 4.0 * r);
            if let Some(b) = b {
                mat_vec(&self.scratch.gap, b, &mut gb[d..]);
                gb[d..].iter_mut().for_each(|g| *g *= 4.0 * r);
            }
            // ∇_α r = −2 M α with M = S_a + S_b; accumulated as 2 r ∇_α r.
            self.accumulate_alpha_pullback(alpha, a, -4.0 * r, grad_alpha);
            if let Some(b) = b {
                self.accumulate_alpha_pullback(alpha, b, -4.0 * r, grad_alpha);
            }
        }
    }

    /// Adds `scale · S_a α` to `out` without forming `S_a`:
    /// `(S_a α)(k) = Σ_v (Σ⁰ y)(v) a(k + v)` with `y(v) = Σ_u α(u − v) a(u)`.
    fn accumulate_alpha_pullback(&mut self, alpha: &[f64], a: &[f64], scale: f64, out: &mut [f64]) {
        let d = self.shape.d;
        let s = &mut self.scratch;
        for v in 0..d {
            let mut acc = 0.0;
            for (u, &au) in a.iter().enumerate() {
                acc += alpha[(u + d - v) % d] * au;
            }
            s.y[v] = acc;
        }
        mat_vec(&self.stats.sigma_noise, &s.y, &mut s.sy);
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for v in 0..d {
                acc += s.sy[v] * a[(k + v) % d];
            }
            *o += scale * acc;
        }
    }
}

fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[i * d + j] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

fn mat_vec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let d = x.len();
    for i in 0..d {
        out[i] = (0..d).map(|j| m[i * d + j] * x[j]).sum();
    }
}

/// One realization of the finite-sample game: a point `(α, β)` plus the
/// frozen data and noise batches.
#[derive(Clone, Debug)]
pub struct GameState {
    pub alpha: Filter,
    pub disc: Discriminator,
    data: SharedBatch,
    noise: SharedBatch,
    stats: Arc<MomentStats>,
}

impl GameState {
    pub fn new(alpha: Filter, disc: Discriminator, data: SharedBatch, noise: SharedBatch) -> Result<Self> {
        check_dim(data.d(), noise.d())?;
        check_dim(data.d(), alpha.len())?;
        check_dim(data.d(), disc.d())?;
        if let (Some(x), Some(z)) = (data.seed_tag(), noise.seed_tag()) {
            if x == z {
                return Err(Error::InvalidInput(
                    "data and noise batches were drawn from the same random stream".into(),
                ));
            }
        }
        let stats = Arc::new(MomentStats::from_batches(&data, &noise)?);
        Ok(Self { alpha, disc, data, noise, stats })
    }

    /// Same batches, new point.
    pub fn with_point(&self, alpha: Filter, disc: Discriminator) -> Result<Self> {
        check_dim(self.d(), alpha.len())?;
        check_dim(self.d(), disc.d())?;
        Ok(Self { alpha, disc, data: self.data.clone(), noise: self.noise.clone(), stats: self.stats.clone() })
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn data(&self) -> &SharedBatch {
        &self.data
    }

    pub fn noise(&self) -> &SharedBatch {
        &self.noise
    }

    pub fn stats(&self) -> &Arc<MomentStats> {
        &self.stats
    }

    pub fn model(&self) -> GameModel {
        GameModel::new(self.disc.shape(), self.stats.clone()).expect("state dimensions validated at construction")
    }

    pub fn residuals(&self) -> ResidualVector {
        ResidualVector(self.model().residuals(self.alpha.as_slice(), &self.disc.to_flat()))
    }

    pub fn value(&self) -> f64 {
        self.model().value(self.alpha.as_slice(), &self.disc.to_flat())
    }

    /// `(∇_α V_n, ∇_β V_n, V_n)`.
    pub fn gradients(&self) -> (Vec<f64>, Vec<f64>, f64) {
        let shape = self.disc.shape();
        let mut ga = vec![0.0; shape.d];
        let mut gb = vec![0.0; shape.param_count()];
        let v = self.model().gradients(self.alpha.as_slice(), &self.disc.to_flat(), &mut ga, &mut gb);
        (ga, gb, v)
    }
}

/// Per-feature residuals; `V_n` is their squared norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualVector(pub Vec<f64>);

impl ResidualVector {
    pub fn value(&self) -> f64 {
        self.0.iter().map(|r| r * r).sum()
    }
}

pub fn residuals(state: &GameState) -> ResidualVector {
    state.residuals()
}

pub fn value(state: &GameState) -> f64 {
    state.value()
}

pub fn grad_alpha(state: &GameState) -> RealSignal {
    RealSignal::new(state.gradients().0).expect("gradient of a finite state is finite")
}

/// Flat `∇_β V_n` in the discriminator's layout.
pub fn grad_beta(state: &GameState) -> Vec<f64> {
    state.gradients().1
}

/// `S_β(v,v') = (1/n) Σ_i (β ⋆ z̃_i)(v) (β ⋆ z̃_i)(v')`, computed from the
/// samples; `αᵀ S_β α = βᵀ Σ_{α,n} β`.
pub fn s_matrix(beta: &RealSignal, noise: &SampleBatch) -> Result<CovarianceMatrix> {
    check_dim(noise.d(), beta.len())?;
    let d = noise.d();
    let mut m = DMatrix::zeros(d, d);
    for row in noise.rows() {
        let y = circular_convolve_slices(beta.as_slice(), &reverse(row));
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] += y[i] * y[j];
            }
        }
    }
    Ok(CovarianceMatrix::from_matrix(m / noise.n() as f64))
}
