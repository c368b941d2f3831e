//! Equilibrium detection: joint gradient, finite-difference Jacobian,
//! Nash necessary conditions, and the real-family best responses.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::discriminator::{Family, GameModel, GameState, MomentStats, Shape};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{sym_eigenvalues, symmetric_part};
use crate::process::{Filter, SampleBatch};
use crate::spectral::RealSignal;

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_EIG_TOL: f64 = 1e-7;
pub const DEFAULT_POWER_ITERS: usize = 1000;
pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_BR_ITERS: usize = 10_000;
pub const DEFAULT_BR_TOL: f64 = 1e-8;

/// `1e-8 · (1 + |V_n|)`.
pub fn default_grad_tol(value: f64) -> f64 {
    1e-8 * (1.0 + value.abs())
}

/// A two-player game over a flat point `x = (α, β)`.
pub trait Game {
    fn alpha_dim(&self) -> usize;
    fn beta_dim(&self) -> usize;
    /// Writes `(∇_α V, ∇_β V)` into `grad` and returns `V`.
    fn value_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl Game for GameModel {
    fn alpha_dim(&self) -> usize {
        self.shape().d
    }

    fn beta_dim(&self) -> usize {
        self.shape().param_count()
    }

    fn value_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.shape().d;
        let (ga, gb) = grad.split_at_mut(d);
        self.gradients(&x[..d], &x[d..], ga, gb)
    }
}

/// `V(α, β) = (αᵀa)(βᵀb)`, whose Jacobian is constant.
#[derive(Clone, Debug)]
pub struct BilinearGame {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl BilinearGame {
    /// `[[0, a bᵀ], [−b aᵀ, 0]]`.
    pub fn exact_jacobian(&self) -> DMatrix<f64> {
        let (p, q) = (self.a.len(), self.b.len());
        let mut j = DMatrix::zeros(p + q, p + q);
        for i in 0..p {
            for k in 0..q {
                j[(i, p + k)] = self.a[i] * self.b[k];
                j[(p + k, i)] = -self.b[k] * self.a[i];
            }
        }
        j
    }
}

impl Game for BilinearGame {
    fn alpha_dim(&self) -> usize {
        self.a.len()
    }

    fn beta_dim(&self) -> usize {
        self.b.len()
    }

    fn value_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        let p = self.a.len();
        let sa: f64 = x[..p].iter().zip(&self.a).map(|(x, a)| x * a).sum();
        let sb: f64 = x[p..].iter().zip(&self.b).map(|(x, b)| x * b).sum();
        for (g, a) in grad[..p].iter_mut().zip(&self.a) {
            *g = a * sb;
        }
        for (g, b) in grad[p..].iter_mut().zip(&self.b) {
            *g = b * sa;
        }
        sa * sb
    }
}

/// `(∇_α V_n, −∇_β V_n)`: descent on α, ascent on β.
#[derive(Clone, Debug, PartialEq)]
pub struct JointGradient {
    pub g_alpha: Vec<f64>,
    pub g_beta_negated: Vec<f64>,
}

impl JointGradient {
    pub fn norm(&self) -> f64 {
        self.g_alpha.iter().chain(&self.g_beta_negated).map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.g_alpha.iter().chain(&self.g_beta_negated).copied().collect()
    }
}

pub fn joint_gradient(state: &GameState) -> JointGradient {
    let (ga, gb, _) = state.gradients();
    JointGradient { g_alpha: ga, g_beta_negated: gb.into_iter().map(|g| -g).collect() }
}

/// Derivative of the joint gradient:
/// `[[∇²_αα V, ∇²_αβ V], [−∇²_βα V, −∇²_ββ V]]`.
#[derive(Clone, Debug)]
pub struct JacobianMatrix {
    pub entries: DMatrix<f64>,
    pub alpha_dim: usize,
}

impl JacobianMatrix {
    fn beta_dim(&self) -> usize {
        self.entries.nrows() - self.alpha_dim
    }

    /// `∇²_αα V`.
    pub fn alpha_block(&self) -> DMatrix<f64> {
        self.entries.view((0, 0), (self.alpha_dim, self.alpha_dim)).into_owned()
    }

    /// `∇²_ββ V` (sign restored).
    pub fn hessian_beta(&self) -> DMatrix<f64> {
        let (a, b) = (self.alpha_dim, self.beta_dim());
        -self.entries.view((a, a), (b, b)).into_owned()
    }

    /// `∇²_αβ V`.
    pub fn cross_alpha_beta(&self) -> DMatrix<f64> {
        self.entries.view((0, self.alpha_dim), (self.alpha_dim, self.beta_dim())).into_owned()
    }

    /// `∇²_βα V` (sign restored).
    pub fn cross_beta_alpha(&self) -> DMatrix<f64> {
        -self.entries.view((self.alpha_dim, 0), (self.beta_dim(), self.alpha_dim)).into_owned()
    }

    pub fn symmetric_part(&self) -> DMatrix<f64> {
        symmetric_part(&self.entries)
    }
}

/// Central differences of the joint gradient of any [`Game`].
pub fn jacobian_of<G: Game>(game: &mut G, x: &[f64], fd_step: f64) -> Result<JacobianMatrix> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidInput(format!("fd_step must be positive, got {fd_step}")));
    }
    let (p, q) = (game.alpha_dim(), game.beta_dim());
    check_dim(p + q, x.len())?;
    let dim = p + q;
    let mut j = DMatrix::zeros(dim, dim);
    let mut xp = x.to_vec();
    let (mut gp, mut gm) = (vec![0.0; dim], vec![0.0; dim]);
    for c in 0..dim {
        xp[c] = x[c] + fd_step;
        game.value_and_gradient(&xp, &mut gp);
        xp[c] = x[c] - fd_step;
        game.value_and_gradient(&xp, &mut gm);
        xp[c] = x[c];
        for r in 0..dim {
            let sign = if r < p { 1.0 } else { -1.0 };
            j[(r, c)] = sign * (gp[r] - gm[r]) / (2.0 * fd_step);
        }
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite Jacobian entry".into()));
    }
    Ok(JacobianMatrix { entries: j, alpha_dim: p })
}

pub fn jacobian(state: &GameState, fd_step: f64) -> Result<JacobianMatrix> {
    let x: Vec<f64> = state.alpha.as_slice().iter().copied().chain(state.disc.to_flat()).collect();
    jacobian_of(&mut state.model(), &x, fd_step)
}

/// Gauss-Newton part `2 Σ_ℓ ∇_β r_ℓ ∇_β r_ℓᵀ` of `∇²_ββ V_n`; this is the
/// whole Hessian wherever every residual vanishes.
pub fn gauss_newton_beta(state: &GameState) -> DMatrix<f64> {
    let shape = state.disc.shape();
    let grads = residual_beta_gradients(shape, state.stats(), state.alpha.as_slice(), &state.disc.to_flat());
    let p = shape.param_count();
    let mut h = DMatrix::zeros(p, p);
    for g in &grads {
        let v = DVector::from_column_slice(g);
        h += 2.0 * &v * v.transpose();
    }
    h
}

/// Per-feature `∇_β r_ℓ` as full-length flat vectors.
fn residual_beta_gradients(shape: Shape, stats: &MomentStats, alpha: &[f64], beta: &[f64]) -> Vec<Vec<f64>> {
    let d = shape.d;
    let p = shape.param_count();
    match shape.family {
        Family::Convolutional => {
            let plan = crate::spectral::DftPlan::new(d);
            let pa: Vec<f64> = plan.forward_real(alpha).iter().map(|c| c.norm_sqr()).collect();
            let h: Vec<f64> = (0..d).map(|w| stats.spec_data()[w] - pa[w] * stats.spec_noise()[w]).collect();
            (0..shape.m)
                .map(|l| {
                    let mut g = vec![0.0; p];
                    let bh = plan.forward_real(&beta[l * d..(l + 1) * d]);
                    let prod: Vec<_> = bh.iter().zip(&h).map(|(b, h)| b * *h).collect();
                    plan.inverse_real_into(&prod, &mut g[l * d..(l + 1) * d]);
                    g[l * d..(l + 1) * d].iter_mut().for_each(|v| *v *= 2.0);
                    g
                })
                .collect()
        }
        Family::Real | Family::ComplexFourier => {
            let gap = stats.covariance_gap(alpha);
            let width = if shape.family == Family::Real { d } else { 2 * d };
            (0..shape.m)
                .map(|l| {
                    let mut g = vec![0.0; p];
                    for (k, chunk) in beta[l * width..(l + 1) * width].chunks_exact(d).enumerate() {
                        let v = &gap * DVector::from_column_slice(chunk) * 2.0;
                        g[l * width + k * d..l * width + (k + 1) * d].copy_from_slice(v.as_slice());
                    }
                    g
                })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    NotEquilibrium,
    NashCandidate,
    NonNash,
    Inconclusive,
}

impl Classification {
    pub fn tag(self) -> &'static str {
        match self {
            Classification::NotEquilibrium => "not-equilibrium",
            Classification::NashCandidate => "nash-candidate",
            Classification::NonNash => "non-nash",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub grad_tol: f64,
    pub eig_tol: f64,
    pub fd_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub n: usize,
    pub d: usize,
    pub family: Family,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub value: f64,
    pub grad_norm: f64,
    /// Ascending eigenvalues of the symmetrized `∇²_αα V_n`.
    pub eig_alpha: Vec<f64>,
    /// Ascending eigenvalues of the symmetrized `∇²_ββ V_n`.
    pub eig_beta: Vec<f64>,
    pub classification: Classification,
    pub tolerances: Tolerances,
    pub provenance: Provenance,
}

impl EquilibriumReport {
    pub fn min_eig_alpha(&self) -> f64 {
        self.eig_alpha.first().copied().unwrap_or(0.0)
    }

    pub fn max_eig_beta(&self) -> f64 {
        self.eig_beta.last().copied().unwrap_or(0.0)
    }
}

/// Applies the second-order necessary conditions for a Nash equilibrium.
/// `NashCandidate` means they hold within `eig_tol`, not that the point
/// is a Nash equilibrium.
pub fn classify_equilibrium(state: &GameState, grad_tol: f64, eig_tol: f64) -> Result<EquilibriumReport> {
    classify_with_step(state, grad_tol, eig_tol, DEFAULT_FD_STEP)
}

pub fn classify_with_step(state: &GameState, grad_tol: f64, eig_tol: f64, fd_step: f64) -> Result<EquilibriumReport> {
    if !(grad_tol > 0.0 && eig_tol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let value = state.value();
    let grad_norm = joint_gradient(state).norm();
    let j = jacobian(state, fd_step)?;
    let eig_alpha = sym_eigenvalues(&j.alpha_block());
    let eig_beta = sym_eigenvalues(&j.hessian_beta());
    let max_beta = eig_beta.last().copied().unwrap_or(0.0);
    let min_alpha = eig_alpha.first().copied().unwrap_or(0.0);
    let classification = if !(grad_norm <= grad_tol) {
        Classification::NotEquilibrium
    } else if max_beta > eig_tol {
        Classification::NonNash
    } else if min_alpha >= -eig_tol {
        Classification::NashCandidate
    } else {
        Classification::Inconclusive
    };
    Ok(EquilibriumReport {
        value,
        grad_norm,
        eig_alpha,
        eig_beta,
        classification,
        tolerances: Tolerances { grad_tol, eig_tol, fd_step },
        provenance: Provenance {
            seed: state.data().seed_tag().map(|t| t.master_seed),
            n: state.n(),
            d: state.d(),
            family: state.disc.family(),
            m: state.disc.m(),
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerResult {
    /// Unit-norm discriminator.
    pub beta: RealSignal,
    /// `(βᵀAβ)²`.
    pub value: f64,
    /// Rayleigh quotient of `A²` settled and `β` is an eigenvector of `A`.
    /// A tie `λ = −λ'` in magnitude leaves `β` in a mixed eigenspace of
    /// `A²`, which shows up here as `false`.
    pub converged: bool,
    pub iterations: usize,
}

/// Power iteration on `A²` for a symmetric `A`.
pub fn dominant_eigvec_of_square<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    max_iters: usize,
    rel_tol: f64,
    rng: &mut R,
) -> Result<PowerResult> {
    let d = a.nrows();
    if a.ncols() != d || d == 0 {
        return Err(Error::InvalidInput("power method needs a square matrix".into()));
    }
    if a.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("covariance gap is zero".into()));
    }
    let mut v = loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            break v / n;
        }
    };
    let mut rayleigh = f64::NAN;
    let mut settled = false;
    let mut iterations = 0;
    for it in 1..=max_iters {
        iterations = it;
        let av = a * &v;
        let q = av.norm_squared();
        let w = a * av;
        let norm = w.norm();
        if norm == 0.0 {
            // Start orthogonal to the range of A.
            return Err(Error::Degenerate("power iterate collapsed to zero".into()));
        }
        v = w / norm;
        if (q - rayleigh).abs() <= rel_tol * q {
            settled = true;
            break;
        }
        rayleigh = q;
    }
    let av = a * &v;
    let quad = v.dot(&av);
    let value = quad * quad;
    let aligned = av.norm_squared() - value <= rel_tol.sqrt() * av.norm_squared();
    Ok(PowerResult { beta: RealSignal::new(v.as_slice().to_vec())?, value, converged: settled && aligned, iterations })
}

/// Best real discriminator against `α`: the unit eigenvector of
/// `A = Σ_n − Σ_{α,n}` with the largest `|λ|`, found on `A²`.
pub fn optimal_real_discriminator<R: Rng + ?Sized>(
    alpha: &Filter,
    data: &SampleBatch,
    noise: &SampleBatch,
    max_iters: usize,
    rel_tol: f64,
    rng: &mut R,
) -> Result<PowerResult> {
    check_dim(data.d(), alpha.len())?;
    let stats = MomentStats::from_batches(data, noise)?;
    let gap = stats.covariance_gap(alpha.as_slice());
    dominant_eigvec_of_square(&gap, max_iters, rel_tol, rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponse {
    pub alpha: Filter,
    pub value: f64,
    pub iterations: usize,
}

/// Constant step `10⁻²·d / trace(S_β)`.
///
/// Descent moves along `S_βα` only, so iterates track the flow curve
/// `exp(τS_β)α₀`; the limit is insensitive to the step once it is stable.
pub fn default_best_response_step(s: &DMatrix<f64>) -> f64 {
    let tr = s.trace();
    if tr > 0.0 {
        1e-2 * s.nrows() as f64 / tr
    } else {
        1.0
    }
}

/// Gradient descent on `α ↦ V_n(α, β) = (βᵀΣ_nβ − αᵀS_βα)²` with a
/// constant step. `step = None` uses [`default_best_response_step`].
pub fn best_response_alpha(
    beta: &RealSignal,
    data: &SampleBatch,
    noise: &SampleBatch,
    alpha0: &Filter,
    step: Option<f64>,
    max_iters: usize,
    rel_tol: f64,
) -> Result<BestResponse> {
    check_dim(data.d(), beta.len())?;
    check_dim(data.d(), alpha0.len())?;
    let stats = MomentStats::from_batches(data, noise)?;
    let b = DVector::from_column_slice(beta.as_slice());
    let target = (b.transpose() * stats.sigma_data() * &b)[(0, 0)];
    let s = stats.s_matrix(beta.as_slice());
    let step = step.unwrap_or_else(|| default_best_response_step(&s));
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    descend(&s, target, alpha0.as_slice(), step, max_iters, rel_tol)
}

/// The descent loop on precomputed `S` and target `c = βᵀΣ_nβ`.
pub fn descend(
    s: &DMatrix<f64>,
    target: f64,
    alpha0: &[f64],
    step: f64,
    max_iters: usize,
    rel_tol: f64,
) -> Result<BestResponse> {
    let mut alpha = DVector::from_column_slice(alpha0);
    let residual = |a: &DVector<f64>, sa: &DVector<f64>| target - a.dot(sa);
    let mut sa = s * &alpha;
    let mut r = residual(&alpha, &sa);
    let mut loss = r * r;
    let mut iterations = 0;
    while iterations < max_iters && loss > 0.0 {
        // ∇ = −4 r S α
        let next = &alpha + &sa * (4.0 * step * r);
        let next_sa = s * &next;
        let next_r = residual(&next, &next_sa);
        let next_loss = next_r * next_r;
        iterations += 1;
        if !next_loss.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        let decrease = (loss - next_loss) / loss;
        if decrease < 0.0 {
            break;
        }
        alpha = next;
        sa = next_sa;
        r = next_r;
        loss = next_loss;
        if decrease < rel_tol {
            break;
        }
    }
    let _ = r;
    Ok(BestResponse { alpha: Filter::new(alpha.as_slice().to_vec())?, value: loss, iterations })
}

/// Constructive zero of `α ↦ V_n(α, β)`: `α = c·h` with `(λ, h)` the top
/// eigenpair of `S_β` and `c = sqrt(βᵀΣ_nβ / λ)`.
pub fn zero_value_filter(beta: &RealSignal, data: &SampleBatch, noise: &SampleBatch) -> Result<Filter> {
    let stats = MomentStats::from_batches(data, noise)?;
    let b = DVector::from_column_slice(beta.as_slice());
    let target = (b.transpose() * stats.sigma_data() * &b)[(0, 0)];
    let eig = stats.s_matrix(beta.as_slice()).symmetric_eigen();
    let (k, lambda) = eig.eigenvalues.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, v)| {
        if v > best.1 {
            (i, v)
        } else {
            best
        }
    });
    if !(lambda > 0.0) {
        return Err(Error::Degenerate("S_β has no positive eigenvalue".into()));
    }
    let c = (target / lambda).sqrt();
    Filter::new(eig.eigenvectors.column(k).iter().map(|h| c * h).collect())
}
