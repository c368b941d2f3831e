//! Gradient descent-ascent: simultaneous discrete steps and RK4 on the
//! continuous-time vector field `(α', β') = (−∇_α V_n, ∇_β V_n)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::discriminator::{d_beta_m_beta, fourier_basis_discriminator, Discriminator, Family, GameState};
use crate::equilibrium::Game;
use crate::error::{check_dim, Error, Result};
use crate::process::{epsilon_alpha_from_spectra, generator_error, Filter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Discrete,
    Rk4,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Discrete => "discrete",
            Mode::Rk4 => "rk4",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "discrete" => Some(Mode::Discrete),
            "rk4" | "continuous" => Some(Mode::Rk4),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdaConfig {
    pub eta: f64,
    pub iters: usize,
    pub mode: Mode,
    pub log_stride: usize,
    /// Perturbation scale for starts near an equilibrium.
    pub sigma: f64,
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self { eta: 1e-3, iters: 10_000, mode: Mode::Rk4, log_stride: 10, sigma: 1e-3 }
    }
}

impl GdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {}", self.eta)));
        }
        if self.iters == 0 || self.log_stride == 0 {
            return Err(Error::InvalidInput("iters and log_stride must be at least 1".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        Ok(())
    }

    /// 10 for runs up to 10⁴ iterations, 10³ beyond.
    pub fn default_stride(iters: usize) -> usize {
        if iters > 10_000 {
            1000
        } else {
            10
        }
    }
}

/// Autonomous vector field `x' = F(x)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&mut self, x: &[f64], out: &mut [f64]);
}

/// GDA field of a game: descent on α, ascent on β.
#[derive(Clone, Debug)]
pub struct GdaField<G> {
    pub game: G,
    value: f64,
}

impl<G: Game> GdaField<G> {
    pub fn new(game: G) -> Self {
        Self { game, value: f64::NAN }
    }

    /// `V` at the last evaluated point.
    pub fn last_value(&self) -> f64 {
        self.value
    }
}

impl<G: Game> VectorField for GdaField<G> {
    fn dim(&self) -> usize {
        self.game.alpha_dim() + self.game.beta_dim()
    }

    fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        self.value = self.game.value_and_gradient(x, out);
        out[..self.game.alpha_dim()].iter_mut().for_each(|g| *g = -*g);
    }
}

/// `x' = M x`.
#[derive(Clone, Debug)]
pub struct LinearField {
    pub m: DMatrix<f64>,
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn eval(&mut self, x: &[f64], out: &mut [f64]) {
        let y = &self.m * DVector::from_column_slice(x);
        out.copy_from_slice(y.as_slice());
    }
}

/// Stage buffers for one integrator.
#[derive(Clone, Debug)]
pub struct Stepper {
    mode: Mode,
    eta: f64,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Stepper {
    pub fn new(mode: Mode, eta: f64, dim: usize) -> Self {
        Self { mode, eta, k: std::array::from_fn(|_| vec![0.0; dim]), tmp: vec![0.0; dim] }
    }

    /// Advances `x` in place. Returns `false` if the new point is not finite;
    /// `x` is then left at the non-finite value.
    pub fn step<F: VectorField>(&mut self, field: &mut F, x: &mut [f64]) -> bool {
        let eta = self.eta;
        match self.mode {
            Mode::Discrete => {
                field.eval(x, &mut self.k[0]);
                for (xi, ki) in x.iter_mut().zip(&self.k[0]) {
                    *xi += eta * ki;
                }
            }
            Mode::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                field.eval(x, k1);
                stage(&mut self.tmp, x, k1, 0.5 * eta);
                field.eval(&self.tmp, k2);
                stage(&mut self.tmp, x, k2, 0.5 * eta);
                field.eval(&self.tmp, k3);
                stage(&mut self.tmp, x, k3, eta);
                field.eval(&self.tmp, k4);
                let h = eta / 6.0;
                for i in 0..x.len() {
                    x[i] += h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        x.iter().all(|v| v.is_finite())
    }
}

fn stage(out: &mut [f64], x: &[f64], k: &[f64], h: f64) {
    for i in 0..x.len() {
        out[i] = x[i] + h * k[i];
    }
}

/// The point moved to a non-finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NanAbort;

fn flat_point(state: &GameState) -> Vec<f64> {
    state.alpha.as_slice().iter().copied().chain(state.disc.to_flat()).collect()
}

fn state_from_flat(state: &GameState, x: &[f64]) -> std::result::Result<GameState, NanAbort> {
    let d = state.d();
    let alpha = Filter::new(x[..d].to_vec()).map_err(|_| NanAbort)?;
    let disc = state.disc.with_flat(&x[d..]).map_err(|_| NanAbort)?;
    state.with_point(alpha, disc).map_err(|_| NanAbort)
}

fn step_state(state: &GameState, mode: Mode, eta: f64) -> std::result::Result<GameState, NanAbort> {
    let mut x = flat_point(state);
    let mut field = GdaField::new(state.model());
    if !Stepper::new(mode, eta, x.len()).step(&mut field, &mut x) {
        return Err(NanAbort);
    }
    state_from_flat(state, &x)
}

/// Simultaneous step: both gradients are taken at the current point.
pub fn gda_step_discrete(state: &GameState, eta: f64) -> std::result::Result<GameState, NanAbort> {
    step_state(state, Mode::Discrete, eta)
}

pub fn gda_step_rk4(state: &GameState, eta: f64) -> std::result::Result<GameState, NanAbort> {
    step_state(state, Mode::Rk4, eta)
}

/// Adds i.i.d. `N(0, σ²)` to every α and β coordinate.
pub fn perturb_equilibrium<R: Rng + ?Sized>(
    alpha_star: &Filter,
    disc_star: &Discriminator,
    sigma: f64,
    rng: &mut R,
) -> Result<(Filter, Discriminator)> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("sigma must be non-negative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok((alpha_star.clone(), disc_star.clone()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let alpha: Vec<f64> = alpha_star.as_slice().iter().map(|a| a + normal.sample(rng)).collect();
    let beta: Vec<f64> = disc_star.to_flat().iter().map(|b| b + normal.sample(rng)).collect();
    Ok((Filter::new(alpha)?, disc_star.with_flat(&beta)?))
}

/// `sqrt(Σ_ℓ ‖β_ℓ − β̇_ℓ‖²)` over the flat parameters.
pub fn epsilon_beta(disc: &Discriminator, disc_star: &Discriminator) -> Result<f64> {
    if disc.shape() != disc_star.shape() {
        return Err(Error::InvalidInput("discriminator shapes differ".into()));
    }
    Ok(disc.to_flat().iter().zip(disc_star.to_flat()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    NanAbort,
}

impl PointStatus {
    pub fn tag(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::NanAbort => "nan_abort",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub value: f64,
    pub eps_alpha: f64,
    pub eps_beta: Option<f64>,
    pub d_beta: Option<f64>,
    pub m_beta: Option<f64>,
    pub gen_error: f64,
    pub status: PointStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub points: Vec<TrajectoryPoint>,
    /// Iteration at which the point became non-finite.
    pub nan_abort: Option<usize>,
    /// Last finite point `(α, β)`.
    pub final_alpha: Vec<f64>,
    pub final_beta: Vec<f64>,
}

pub const CSV_HEADER: &str = "t,V_n,eps_alpha,eps_beta,d_beta,m_beta,gen_error,status";

impl TrajectoryRecord {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("a trajectory logs its start")
    }

    /// Last point with finite metrics.
    pub fn last_finite(&self) -> &TrajectoryPoint {
        self.points.iter().rev().find(|p| p.status == PointStatus::Ok).expect("start is finite")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.t,
                p.value,
                p.eps_alpha,
                opt(p.eps_beta),
                opt(p.d_beta),
                opt(p.m_beta),
                p.gen_error,
                p.status.tag()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Runs GDA from `initial`, logging every `log_stride` iterations plus the
/// start and the final iterate. `reference` is the β̇ used for `ε_β`; with
/// `None`, a complex family with `m = d` is measured against the Fourier
/// basis and other families log no `ε_β`.
pub fn run_trajectory(
    initial: &GameState,
    config: &GdaConfig,
    alpha_bar: &Filter,
    reference: Option<&Discriminator>,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    check_dim(initial.d(), alpha_bar.len())?;
    let shape = initial.disc.shape();
    let fourier;
    let reference = match reference {
        Some(r) => {
            if r.shape() != shape {
                return Err(Error::InvalidInput("reference discriminator shape differs".into()));
            }
            Some(r)
        }
        None if shape.family == Family::ComplexFourier && shape.m == shape.d => {
            fourier = fourier_basis_discriminator(shape.d)?;
            Some(&fourier)
        }
        None => None,
    };
    let stats = initial.stats().clone();
    let d = shape.d;
    let metrics = |x: &[f64], value: f64, t: usize| -> Result<TrajectoryPoint> {
        let alpha = Filter::new(x[..d].to_vec())?;
        let disc = Discriminator::from_flat(shape, &x[d..])?;
        let (d_beta, m_beta) = if shape.family == Family::Convolutional && shape.m == d {
            let (db, mb) = d_beta_m_beta(&disc)?;
            (Some(db), Some(mb))
        } else {
            (None, None)
        };
        Ok(TrajectoryPoint {
            t,
            value,
            eps_alpha: epsilon_alpha_from_spectra(&x[..d], stats.spec_data(), stats.spec_noise())?,
            eps_beta: reference.map(|r| epsilon_beta(&disc, r)).transpose()?,
            d_beta,
            m_beta,
            gen_error: generator_error(&alpha, alpha_bar)?,
            status: PointStatus::Ok,
        })
    };

    let mut x = flat_point(initial);
    let mut field = GdaField::new(initial.model());
    let mut stepper = Stepper::new(config.mode, config.eta, x.len());
    let mut points = vec![metrics(&x, initial.value(), 0)?];
    let mut last_good = x.clone();
    let mut nan_abort = None;
    let mut model = initial.model();
    for t in 1..=config.iters {
        let finite = stepper.step(&mut field, &mut x);
        let value = if finite { model.value(&x[..d], &x[d..]) } else { f64::NAN };
        if !value.is_finite() {
            nan_abort = Some(t);
            points.push(TrajectoryPoint {
                t,
                value: f64::NAN,
                eps_alpha: f64::NAN,
                eps_beta: reference.map(|_| f64::NAN),
                d_beta: points[0].d_beta.map(|_| f64::NAN),
                m_beta: points[0].m_beta.map(|_| f64::NAN),
                gen_error: f64::NAN,
                status: PointStatus::NanAbort,
            });
            break;
        }
        if t % config.log_stride == 0 || t == config.iters {
            points.push(metrics(&x, value, t)?);
            last_good.copy_from_slice(&x);
        }
    }
    if nan_abort.is_none() {
        last_good.copy_from_slice(&x);
    }
    Ok(TrajectoryRecord {
        points,
        nan_abort,
        final_alpha: last_good[..d].to_vec(),
        final_beta: last_good[d..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discriminator::GameModel;
    use crate::equilibrium::BilinearGame;
    use crate::process::{canonical_consistent_filter, generate, sample_white_noise, SharedBatch};
    use crate::rng::{Role, SeedTag};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn batches(n: usize, d: usize, seed: u64) -> (SharedBatch, SharedBatch) {
        let zbar = sample_white_noise(n, d, SeedTag::simple(seed, Role::Data)).unwrap();
        let x = generate(&Filter::identity(d), &zbar).unwrap();
        let z = sample_white_noise(n, d, SeedTag::simple(seed, Role::Noise)).unwrap();
        (Arc::new(x), Arc::new(z))
    }

    fn rvec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn discrete_bilinear_expands_radius() {
        let mut field = GdaField::new(BilinearGame { a: vec![1.0], b: vec![1.0] });
        let eta = 0.05;
        let mut st = Stepper::new(Mode::Discrete, eta, 2);
        let mut x = [0.3, -0.4];
        for _ in 0..10 {
            let r0 = x[0] * x[0] + x[1] * x[1];
            let prev = x;
            st.step(&mut field, &mut x);
            assert!((x[0] - (prev[0] - eta * prev[1])).abs() < 1e-15);
            assert!((x[1] - (prev[1] + eta * prev[0])).abs() < 1e-15);
            let r1 = x[0] * x[0] + x[1] * x[1];
            assert!((r1 / r0 - (1.0 + eta * eta)).abs() < 1e-13);
        }
    }

    #[test]
    fn rk4_matches_taylor_polynomial_on_linear_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let x0: Vec<f64> = rvec(&mut rng, 5);
        let eta = 0.1;
        let mut field = LinearField { m: m.clone() };
        let mut x = x0.clone();
        Stepper::new(Mode::Rk4, eta, 5).step(&mut field, &mut x);
        let hm = &m * eta;
        let mut term = DMatrix::identity(5, 5);
        let mut taylor = DMatrix::identity(5, 5);
        for k in 1..=4 {
            term = &term * &hm / k as f64;
            taylor += &term;
        }
        let expected = taylor * DVector::from_vec(x0);
        for (a, b) in x.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_order_on_rotation() {
        let horizon = 1.0;
        let error = |eta: f64| {
            let mut field = LinearField { m: DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]) };
            let mut st = Stepper::new(Mode::Rk4, eta, 2);
            let mut x = [1.0, 0.0];
            for _ in 0..(horizon / eta).round() as usize {
                st.step(&mut field, &mut x);
            }
            ((x[0] - horizon.cos()).powi(2) + (x[1] - horizon.sin()).powi(2)).sqrt()
        };
        let (e1, e2) = (error(0.1), error(0.05));
        let order = (e1 / e2).log2();
        assert!(order >= 3.7, "{order}");
        // Radius drift per step is O(η⁵) against η² for the discrete step.
        let mut field = GdaField::new(BilinearGame { a: vec![1.0], b: vec![1.0] });
        let mut x = [1.0, 0.0];
        Stepper::new(Mode::Rk4, 0.01, 2).step(&mut field, &mut x);
        assert!((x[0] * x[0] + x[1] * x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fixed_points_are_preserved() {
        let (x, z) = batches(100, 4, 72);
        let canon = canonical_consistent_filter(&x, &z).unwrap();
        let st = GameState::new(canon, fourier_basis_discriminator(4).unwrap(), x, z).unwrap();
        for mode in [Mode::Discrete, Mode::Rk4] {
            let next = step_state(&st, mode, 1e-3).unwrap();
            let diff = flat_point(&next).iter().zip(flat_point(&st)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-12, "{diff}");
        }
        let cfg = GdaConfig { eta: 1e-3, iters: 200, mode: Mode::Rk4, log_stride: 10, sigma: 0.0 };
        let rec = run_trajectory(&st, &cfg, &Filter::identity(4), None).unwrap();
        assert!(rec.nan_abort.is_none());
        assert_eq!(rec.points.len(), 21);
        for p in &rec.points {
            assert!(p.value <= 1e-12 && p.eps_alpha <= 1e-12 && p.eps_beta.unwrap() <= 1e-12);
        }
    }

    #[test]
    fn discrete_step_is_simultaneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let (x, z) = batches(20, 4, 73);
        let disc = Discriminator::convolutional((0..4).map(|_| rvec(&mut rng, 4)).collect()).unwrap();
        let st = GameState::new(Filter::new(rvec(&mut rng, 4)).unwrap(), disc, x, z).unwrap();
        let eta = 1e-2;
        let next = gda_step_discrete(&st, eta).unwrap();

        let (ga, gb, _) = st.gradients();
        let alpha: Vec<f64> = st.alpha.as_slice().iter().zip(&ga).map(|(a, g)| a - eta * g).collect();
        let beta: Vec<f64> = st.disc.to_flat().iter().zip(&gb).map(|(b, g)| b + eta * g).collect();
        assert_eq!(next.alpha.as_slice(), &alpha[..]);
        assert_eq!(next.disc.to_flat(), beta);

        // Sequential variant: β's gradient taken after α moved.
        let moved = st.with_point(Filter::new(alpha.clone()).unwrap(), st.disc.clone()).unwrap();
        let (_, gb_seq, _) = moved.gradients();
        let beta_seq: Vec<f64> = st.disc.to_flat().iter().zip(&gb_seq).map(|(b, g)| b + eta * g).collect();
        let gap = beta_seq.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-10);
    }

    #[test]
    fn perturbation_statistics_and_reproducibility() {
        let alpha = Filter::identity(4);
        let disc = fourier_basis_discriminator(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let (a0, d0) = perturb_equilibrium(&alpha, &disc, 0.0, &mut rng).unwrap();
        assert_eq!((a0, d0), (alpha.clone(), disc.clone()));

        let sigma = 0.1;
        let trials = 2000;
        let mut mean = 0.0;
        for _ in 0..trials {
            let (a, b) = perturb_equilibrium(&alpha, &disc, sigma, &mut rng).unwrap();
            let da: f64 = a.as_slice().iter().zip(alpha.as_slice()).map(|(x, y)| (x - y).powi(2)).sum();
            mean += (da + epsilon_beta(&b, &disc).unwrap().powi(2)) / trials as f64;
        }
        let expected = sigma * sigma * 36.0;
        assert!((mean - expected).abs() < 0.05 * expected, "{mean} vs {expected}");

        let run = |seed| perturb_equilibrium(&alpha, &disc, sigma, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn epsilon_beta_cases() {
        let disc = fourier_basis_discriminator(4).unwrap();
        assert_eq!(epsilon_beta(&disc, &disc).unwrap(), 0.0);
        let mut flat = disc.to_flat();
        flat[9] += 1.0;
        assert!((epsilon_beta(&disc.with_flat(&flat).unwrap(), &disc).unwrap() - 1.0).abs() < 1e-15);
        let conv = Discriminator::convolutional(vec![vec![1.0, 0.0, 0.0, 0.0]; 4]).unwrap();
        assert!(epsilon_beta(&conv, &disc).is_err());
    }

    #[test]
    fn trajectories_are_deterministic_and_abort_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(75);
        let (x, z) = batches(100, 4, 75);
        let small = |rng: &mut ChaCha8Rng| rvec(rng, 4).iter().map(|v| 0.4 * v).collect::<Vec<_>>();
        let disc = Discriminator::convolutional((0..4).map(|_| small(&mut rng)).collect()).unwrap();
        let st = GameState::new(Filter::new(small(&mut rng)).unwrap(), disc, x, z).unwrap();
        let cfg = GdaConfig { eta: 1e-3, iters: 500, mode: Mode::Rk4, log_stride: 50, sigma: 0.0 };
        let a = run_trajectory(&st, &cfg, &Filter::identity(4), None).unwrap();
        let b = run_trajectory(&st, &cfg, &Filter::identity(4), None).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        assert!(a.points.iter().all(|p| p.d_beta.is_some() && p.eps_beta.is_none()));
        let csv = a.to_csv_string();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 12);

        // A huge step blows up quickly.
        let cfg = GdaConfig { eta: 50.0, iters: 1000, mode: Mode::Discrete, log_stride: 1, sigma: 0.0 };
        let rec = run_trajectory(&st, &cfg, &Filter::identity(4), None).unwrap();
        let t = rec.nan_abort.expect("diverges");
        assert_eq!(rec.last().status, PointStatus::NanAbort);
        assert_eq!(rec.last().t, t);
        assert!(rec.final_alpha.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn gda_field_matches_game_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(76);
        let (x, z) = batches(30, 4, 76);
        let disc = fourier_basis_discriminator(4).unwrap();
        let st = GameState::new(Filter::new(rvec(&mut rng, 4)).unwrap(), disc, x, z).unwrap();
        let model: GameModel = st.model();
        let mut field = GdaField::new(model);
        let p = flat_point(&st);
        let mut out = vec![0.0; p.len()];
        field.eval(&p, &mut out);
        let (ga, gb, v) = st.gradients();
        assert_eq!(field.last_value(), v);
        assert!(out[..4].iter().zip(&ga).all(|(o, g)| *o == -g));
        assert!(out[4..].iter().zip(&gb).all(|(o, g)| o == g));
    }
}
