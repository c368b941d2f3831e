//! Seeded Monte-Carlo drivers for the tables and trajectory figures.
//!
//! Every simulation draws from its own [`SeedTag`] stream, so results do
//! not depend on scheduling and reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::discriminator::{fourier_basis_discriminator, Discriminator, Family, GameState, MomentStats};
use crate::dynamics::{perturb_equilibrium, run_trajectory, GdaConfig, Mode, TrajectoryRecord};
use crate::equilibrium::{
    best_response_alpha, optimal_real_discriminator, DEFAULT_BR_ITERS, DEFAULT_BR_TOL, DEFAULT_POWER_ITERS,
    DEFAULT_POWER_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::sym_spectral_norm;
use crate::process::{
    canonical_consistent_filter, empirical_covariance, exact_covariance, generate, generator_error, is_degenerate,
    sample_white_noise, Filter, SampleBatch, DEGENERACY_TOL,
};
use crate::rng::{Role, SeedTag};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Relative agreement required between the power-method value and the
/// dense `‖Σ_n − Σ_{α₀,n}‖²` for a table-1 simulation to be kept.
pub const POWER_FILTER_TOL: f64 = 1e-4;
pub const BEST_RESPONSE_STEP_RULE: &str = "1e-2*d/trace(S_beta)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Table1Random,
    Table1Truth,
    Table2,
    Fig1ComplexLocal,
    Fig2ConvGlobal,
    Fig3Long,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Table1Random,
        Scenario::Table1Truth,
        Scenario::Table2,
        Scenario::Fig1ComplexLocal,
        Scenario::Fig2ConvGlobal,
        Scenario::Fig3Long,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Table1Random => "table1-random",
            Scenario::Table1Truth => "table1-truth",
            Scenario::Table2 => "table2",
            Scenario::Fig1ComplexLocal => "fig1-complex-local",
            Scenario::Fig2ConvGlobal => "fig2-conv-global",
            Scenario::Fig3Long => "fig3-long",
        }
    }

    /// Accepts the full id or the short `fig1`/`fig2`/`fig3` forms.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fig1" => Some(Scenario::Fig1ComplexLocal),
            "fig2" => Some(Scenario::Fig2ConvGlobal),
            "fig3" => Some(Scenario::Fig3Long),
            _ => Scenario::ALL.into_iter().find(|sc| sc.id() == s),
        }
    }

    fn code(self) -> u8 {
        Scenario::ALL.iter().position(|s| *s == self).unwrap() as u8 + 1
    }

    pub fn is_figure(self) -> bool {
        matches!(self, Scenario::Fig1ComplexLocal | Scenario::Fig2ConvGlobal | Scenario::Fig3Long)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub d: usize,
    pub alpha_bar: Vec<f64>,
    pub ns: Vec<usize>,
    pub sims: usize,
    /// Table 1 only: simulations tried to fill `sims` kept ones.
    pub attempts: usize,
    pub master_seed: u64,
    pub gda: GdaConfig,
    /// Figure families; empty for the tables.
    pub families: Vec<Family>,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let d = 4;
        let mut alpha_bar = vec![0.0; d];
        alpha_bar[0] = 1.0;
        let base = GdaConfig::default();
        let (ns, sims, gda, families) = match scenario {
            Scenario::Table1Random | Scenario::Table1Truth => (vec![10, 100, 1000, 10_000, 100_000], 100, base, vec![]),
            Scenario::Table2 => (
                vec![10, 100, 1000, 10_000],
                100,
                GdaConfig { log_stride: 10_000, ..base },
                vec![Family::Convolutional],
            ),
            Scenario::Fig1ComplexLocal => {
                (vec![100, 1000, 10_000], 10, GdaConfig { mode: Mode::Discrete, ..base }, vec![Family::ComplexFourier])
            }
            Scenario::Fig2ConvGlobal => (vec![100, 1000, 10_000], 10, base, vec![Family::Convolutional]),
            Scenario::Fig3Long => (
                vec![10_000],
                10,
                GdaConfig { iters: 1_000_000, log_stride: 1000, sigma: 1e-5, ..base },
                vec![Family::ComplexFourier, Family::Convolutional],
            ),
        };
        Self { scenario, d, alpha_bar, ns, sims, attempts: 2 * sims, master_seed: 0, gda, families }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidInput(format!("d must be at least 2, got {}", self.d)));
        }
        if self.alpha_bar.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "alpha_bar has {} entries but d = {}",
                self.alpha_bar.len(),
                self.d
            )));
        }
        if self.sims == 0 || self.ns.is_empty() || self.ns.contains(&0) {
            return Err(Error::InvalidInput("sims and every n must be at least 1".into()));
        }
        if self.ns.iter().any(|n| *n > 0xFF_FFFF) {
            return Err(Error::InvalidInput("n must be below 2^24".into()));
        }
        if matches!(self.scenario, Scenario::Table1Random | Scenario::Table1Truth) {
            if !self.d.is_multiple_of(2) {
                return Err(Error::InvalidInput(format!("table1 needs an even d, got {}", self.d)));
            }
            if self.attempts < self.sims {
                return Err(Error::InvalidInput("attempts must be at least sims".into()));
            }
        }
        let abar = Filter::new(self.alpha_bar.clone())?;
        if is_degenerate(&abar, DEGENERACY_TOL) {
            return Err(Error::InvalidInput("alpha_bar has a vanishing spectral coefficient".into()));
        }
        if (self.scenario == Scenario::Fig1ComplexLocal || self.families.contains(&Family::ComplexFourier))
            && !self.d.is_multiple_of(2)
        {
            return Err(Error::InvalidInput(format!("complex-family scenarios need an even d, got {}", self.d)));
        }
        if self.scenario.is_figure() && self.families.is_empty() {
            return Err(Error::InvalidInput("figure scenario needs at least one family".into()));
        }
        if self.families.contains(&Family::Real) {
            return Err(Error::InvalidInput("trajectory figures support complex and conv families".into()));
        }
        self.gda.validate()
    }

    pub fn alpha_bar(&self) -> Filter {
        Filter::new(self.alpha_bar.clone()).expect("validated")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn tag(&self, n: usize, sim: usize, role: Role) -> SeedTag {
        SeedTag::new(self.master_seed, self.scenario.code(), n, sim, role)
    }

    /// Data `X = ᾱ ⋆ Z̄` and noise `Z` from disjoint streams.
    pub fn batches(&self, n: usize, sim: usize) -> Result<(Arc<SampleBatch>, Arc<SampleBatch>)> {
        let zbar = sample_white_noise(n, self.d, self.tag(n, sim, Role::Data))?;
        let x = generate(&self.alpha_bar(), &zbar)?;
        let z = sample_white_noise(n, self.d, self.tag(n, sim, Role::Noise))?;
        Ok((Arc::new(x), Arc::new(z)))
    }
}

/// Applies `key=value` lines (`#` comments allowed) onto `config`.
/// Keys: scenario, d, n, sims, attempts, seed, eta, iters, mode, sigma,
/// log_stride, alpha_bar, family.
pub fn parse_config_text(text: &str, config: &mut ScenarioConfig) -> Result<BTreeMap<String, String>> {
    let mut extra = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("config line {}: expected key=value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !apply_setting(config, k, v)? {
            extra.insert(k.to_string(), v.to_string());
        }
    }
    Ok(extra)
}

/// Sets one config field from text; returns `false` for keys that are not
/// scenario settings (left to the caller).
pub fn apply_setting(config: &mut ScenarioConfig, key: &str, value: &str) -> Result<bool> {
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| Error::InvalidInput(format!("invalid value {v:?} for {key}")))
    }
    fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
        v.split(',').map(|s| num(key, s.trim())).collect()
    }
    match key {
        "scenario" => {
            let sc =
                Scenario::parse(value).ok_or_else(|| Error::InvalidInput(format!("unknown scenario {value:?}")))?;
            if sc != config.scenario {
                let keep_seed = config.master_seed;
                *config = ScenarioConfig::defaults(sc);
                config.master_seed = keep_seed;
            }
        }
        "d" => {
            let d: usize = num(key, value)?;
            if d != config.d {
                config.d = d;
                config.alpha_bar = (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
            }
        }
        "n" => config.ns = list::<f64>(key, value)?.into_iter().map(|x| x as usize).collect(),
        "sims" => {
            config.sims = num(key, value)?;
            config.attempts = 2 * config.sims;
        }
        "attempts" => config.attempts = num(key, value)?,
        "seed" => config.master_seed = num(key, value)?,
        "eta" => config.gda.eta = num(key, value)?,
        "iters" => {
            config.gda.iters = num::<f64>(key, value)? as usize;
            if config.scenario == Scenario::Table2 {
                config.gda.log_stride = config.gda.iters.max(1);
            } else {
                config.gda.log_stride = GdaConfig::default_stride(config.gda.iters);
            }
        }
        "log_stride" => config.gda.log_stride = num(key, value)?,
        "mode" => {
            config.gda.mode =
                Mode::from_tag(value).ok_or_else(|| Error::InvalidInput(format!("unknown mode {value:?}")))?
        }
        "sigma" => config.gda.sigma = num(key, value)?,
        "alpha_bar" => config.alpha_bar = list(key, value)?,
        "family" => {
            config.families = value
                .split(',')
                .map(|f| Family::from_tag(f.trim()).ok_or_else(|| Error::InvalidInput(format!("unknown family {f:?}"))))
                .collect::<Result<_>>()?
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Mean and sample standard deviation (divides by `len − 1`).
pub fn aggregate(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!("standard deviation needs at least 2 values, got {}", values.len())));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub attempted: usize,
    pub kept: usize,
    pub excluded: usize,
    pub exclusions: BTreeMap<String, usize>,
    /// Kept values in seed order.
    pub values: Vec<f64>,
}

impl AggregateRow {
    fn new(n: usize, values: Vec<f64>, exclusions: BTreeMap<String, usize>) -> Self {
        let excluded = exclusions.values().sum();
        let (mean, std) = match aggregate(&values) {
            Ok((m, s)) => (Some(m), Some(s)),
            Err(_) => (values.first().copied(), None),
        };
        Self { n, mean, std, attempted: values.len() + excluded, kept: values.len(), excluded, exclusions, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub label: String,
    pub rows: Vec<AggregateRow>,
}

pub const AGGREGATE_CSV_HEADER: &str = "n,mean,std,attempted,kept,excluded,exclusions";

impl AggregateResult {
    pub fn row(&self, n: usize) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{AGGREGATE_CSV_HEADER}\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let reasons: Vec<String> = r.exclusions.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.n,
                opt(r.mean),
                opt(r.std),
                r.attempted,
                r.kept,
                r.excluded,
                reasons.join(";")
            );
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Table1Variant {
    RandomAlpha0,
    TruthAlpha0,
}

impl Table1Variant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random" | "random-alpha0" => Some(Table1Variant::RandomAlpha0),
            "truth" | "truth-alpha0" => Some(Table1Variant::TruthAlpha0),
            _ => None,
        }
    }

    pub fn scenario(self) -> Scenario {
        match self {
            Table1Variant::RandomAlpha0 => Scenario::Table1Random,
            Table1Variant::TruthAlpha0 => Scenario::Table1Truth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario: Scenario,
    pub master_seed: u64,
    pub config_hash: String,
}

impl Provenance {
    fn of(config: &ScenarioConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            scenario: config.scenario,
            master_seed: config.master_seed,
            config_hash: config.hash(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Result {
    pub provenance: Provenance,
    pub config: ScenarioConfig,
    pub variant: Table1Variant,
    pub best_response_step_rule: String,
    /// Generator error difference after minus before the best response.
    pub difference: AggregateResult,
    /// Best-response values `V_n(α̇, β̇)` of the kept simulations, per n.
    pub final_values: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

enum Table1Outcome {
    Kept { diff: f64, value: f64 },
    Excluded(&'static str),
}

fn gaussian_vec<R: Rng>(rng: &mut R, len: usize, sd: f64) -> Vec<f64> {
    (0..len).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn table1_sim(config: &ScenarioConfig, variant: Table1Variant, n: usize, sim: usize) -> Result<Table1Outcome> {
    let d = config.d;
    let abar = config.alpha_bar();
    let alpha0 = match variant {
        Table1Variant::TruthAlpha0 => abar.clone(),
        Table1Variant::RandomAlpha0 => {
            let mut rng = config.tag(n, sim, Role::Init).rng();
            Filter::new(gaussian_vec(&mut rng, d, (1.0 / d as f64).sqrt()))?
        }
    };
    let (x, z) = config.batches(n, sim)?;
    let mut rng = config.tag(n, sim, Role::PowerStart).rng();
    let power = match optimal_real_discriminator(&alpha0, &x, &z, DEFAULT_POWER_ITERS, DEFAULT_POWER_TOL, &mut rng) {
        Ok(p) => p,
        Err(Error::Degenerate(_)) => return Ok(Table1Outcome::Excluded("degenerate-gap")),
        Err(e) => return Err(e),
    };
    let gap = MomentStats::from_batches(&x, &z)?.covariance_gap(alpha0.as_slice());
    let dense = sym_spectral_norm(&gap).powi(2);
    if !(((power.value - dense) / dense).abs() < POWER_FILTER_TOL) {
        return Ok(Table1Outcome::Excluded("power-mismatch"));
    }
    let br = match best_response_alpha(&power.beta, &x, &z, &alpha0, None, DEFAULT_BR_ITERS, DEFAULT_BR_TOL) {
        Ok(br) => br,
        Err(Error::Divergence { .. }) => return Ok(Table1Outcome::Excluded("divergence")),
        Err(e) => return Err(e),
    };
    let diff = generator_error(&br.alpha, &abar)? - generator_error(&alpha0, &abar)?;
    Ok(Table1Outcome::Kept { diff, value: br.value })
}

/// Keeps the first `sims` simulations (in seed order, out of `attempts`)
/// whose power-method value passes the dense check, then records the
/// generator-error change caused by the best response.
pub fn run_table1(config: &ScenarioConfig, variant: Table1Variant) -> Result<Table1Result> {
    config.validate()?;
    let mut rows = Vec::new();
    let mut final_values = Vec::new();
    let mut warnings = Vec::new();
    for &n in &config.ns {
        let mut values = Vec::new();
        let mut finals = Vec::new();
        let mut exclusions = BTreeMap::new();
        let mut next = 0;
        while values.len() < config.sims && next < config.attempts {
            let batch = (config.sims - values.len()).min(config.attempts - next);
            let outcomes: Vec<Result<Table1Outcome>> =
                (next..next + batch).into_par_iter().map(|sim| table1_sim(config, variant, n, sim)).collect();
            next += batch;
            for o in outcomes {
                match o? {
                    Table1Outcome::Kept { diff, value } => {
                        values.push(diff);
                        finals.push(value);
                    }
                    Table1Outcome::Excluded(reason) => *exclusions.entry(reason.to_string()).or_insert(0) += 1,
                }
            }
        }
        if values.len() < config.sims {
            warnings.push(format!(
                "n={n}: only {} of {} simulations kept after {} attempts",
                values.len(),
                config.sims,
                next
            ));
        }
        rows.push(AggregateRow::new(n, values, exclusions));
        final_values.push(finals);
    }
    Ok(Table1Result {
        provenance: Provenance::of(config),
        config: config.clone(),
        variant,
        best_response_step_rule: BEST_RESPONSE_STEP_RULE.to_string(),
        difference: AggregateResult { label: "generator-error-difference".into(), rows },
        final_values,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2Result {
    pub provenance: Provenance,
    pub config: ScenarioConfig,
    /// `‖Σ − Σ_{α^(T)}‖` at the last iterate.
    pub gda_error: AggregateResult,
    /// `‖Σ − Σ_n‖` on the same data batches.
    pub empirical_error: AggregateResult,
}

/// `α` entries `N(0, 1/d)`; each `β_ℓ` drawn the same way, then scaled to
/// unit norm.
pub fn random_conv_start(config: &ScenarioConfig, n: usize, sim: usize) -> Result<(Filter, Discriminator)> {
    let d = config.d;
    let sd = (1.0 / d as f64).sqrt();
    let mut rng = config.tag(n, sim, Role::Init).rng();
    let alpha = Filter::new(gaussian_vec(&mut rng, d, sd))?;
    let betas = (0..d)
        .map(|_| {
            let v = gaussian_vec(&mut rng, d, sd);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    Ok((alpha, Discriminator::convolutional(betas)?))
}

enum Table2Outcome {
    Kept { gda: f64, empirical: f64 },
    NanAbort,
}

fn table2_sim(config: &ScenarioConfig, n: usize, sim: usize) -> Result<Table2Outcome> {
    let abar = config.alpha_bar();
    let (x, z) = config.batches(n, sim)?;
    let empirical = empirical_covariance(&x).distance(&exact_covariance(&abar));
    let (alpha, disc) = random_conv_start(config, n, sim)?;
    let state = GameState::new(alpha, disc, x, z)?;
    let gda = GdaConfig { log_stride: config.gda.iters, ..config.gda.clone() };
    let rec = run_trajectory(&state, &gda, &abar, None)?;
    if rec.nan_abort.is_some() {
        return Ok(Table2Outcome::NanAbort);
    }
    Ok(Table2Outcome::Kept { gda: rec.last().gen_error, empirical })
}

/// GDA generator error after `iters` steps from a random start, against the
/// empirical covariance error on the same data. Aborted runs are excluded
/// from both aggregates and counted.
pub fn run_table2(config: &ScenarioConfig) -> Result<Table2Result> {
    config.validate()?;
    let mut gda_rows = Vec::new();
    let mut emp_rows = Vec::new();
    for &n in &config.ns {
        let outcomes: Vec<Result<Table2Outcome>> =
            (0..config.sims).into_par_iter().map(|sim| table2_sim(config, n, sim)).collect();
        let (mut g, mut e) = (Vec::new(), Vec::new());
        let mut exclusions = BTreeMap::new();
        for o in outcomes {
            match o? {
                Table2Outcome::Kept { gda, empirical } => {
                    g.push(gda);
                    e.push(empirical);
                }
                Table2Outcome::NanAbort => *exclusions.entry("nan-abort".to_string()).or_insert(0) += 1,
            }
        }
        gda_rows.push(AggregateRow::new(n, g, exclusions.clone()));
        emp_rows.push(AggregateRow::new(n, e, exclusions));
    }
    Ok(Table2Result {
        provenance: Provenance::of(config),
        config: config.clone(),
        gda_error: AggregateResult { label: "gda-generator-error".into(), rows: gda_rows },
        empirical_error: AggregateResult { label: "empirical-error".into(), rows: emp_rows },
    })
}

/// Start of one figure trajectory: a σ-perturbation of the Fourier-basis
/// equilibrium for the complex family, a random start for conv.
pub fn figure_start(config: &ScenarioConfig, family: Family, n: usize, sim: usize) -> Result<GameState> {
    let (x, z) = config.batches(n, sim)?;
    match family {
        Family::ComplexFourier => {
            let canon = canonical_consistent_filter(&x, &z)?;
            let star = fourier_basis_discriminator(config.d)?;
            let mut rng = config.tag(n, sim, Role::Perturbation).rng();
            let (alpha, disc) = perturb_equilibrium(&canon, &star, config.gda.sigma, &mut rng)?;
            GameState::new(alpha, disc, x, z)
        }
        Family::Convolutional => {
            let (alpha, disc) = random_conv_start(config, n, sim)?;
            GameState::new(alpha, disc, x, z)
        }
        Family::Real => Err(Error::InvalidInput("no trajectory figure for the real family".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub file: String,
    pub family: Family,
    pub n: usize,
    pub sim: usize,
    pub seed_stream: u64,
    pub nan_abort: Option<usize>,
    pub final_t: usize,
    pub final_value: f64,
    pub final_eps_alpha: f64,
    pub final_eps_beta: Option<f64>,
    pub initial_gen_error: f64,
    pub final_gen_error: f64,
    /// Largest and smallest `gen_error(t) / gen_error(0)` over logged points.
    pub max_gen_error_ratio: f64,
    pub min_gen_error_ratio: f64,
    pub min_d_beta: Option<f64>,
    pub min_m_beta: Option<f64>,
}

fn summarize(
    file: String,
    family: Family,
    n: usize,
    sim: usize,
    stream: u64,
    rec: &TrajectoryRecord,
) -> TrajectorySummary {
    let ok: Vec<_> = rec.points.iter().filter(|p| p.status == crate::dynamics::PointStatus::Ok).collect();
    let last = rec.last_finite();
    let g0 = ok[0].gen_error;
    let ratio = |p: &&crate::dynamics::TrajectoryPoint| p.gen_error / g0;
    let fold_min =
        |f: fn(&crate::dynamics::TrajectoryPoint) -> Option<f64>| ok.iter().filter_map(|p| f(p)).reduce(f64::min);
    TrajectorySummary {
        file,
        family,
        n,
        sim,
        seed_stream: stream,
        nan_abort: rec.nan_abort,
        final_t: last.t,
        final_value: last.value,
        final_eps_alpha: last.eps_alpha,
        final_eps_beta: last.eps_beta,
        initial_gen_error: g0,
        final_gen_error: last.gen_error,
        max_gen_error_ratio: ok.iter().map(ratio).fold(f64::NEG_INFINITY, f64::max),
        min_gen_error_ratio: ok.iter().map(ratio).fold(f64::INFINITY, f64::min),
        min_d_beta: fold_min(|p| p.d_beta),
        min_m_beta: fold_min(|p| p.m_beta),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureManifest {
    pub provenance: Provenance,
    pub config: ScenarioConfig,
    pub csv_header: String,
    pub trajectories: Vec<TrajectorySummary>,
}

/// Runs every (family, n, seed) trajectory of a figure scenario and writes
/// one CSV per trajectory under `out_dir`, plus `manifest.json`. Paths in
/// the manifest are relative to `out_dir`.
pub fn run_figure(config: &ScenarioConfig, out_dir: &Path) -> Result<FigureManifest> {
    config.validate()?;
    if !config.scenario.is_figure() {
        return Err(Error::InvalidInput(format!("{} is not a figure scenario", config.scenario.id())));
    }
    let mut jobs = Vec::new();
    for &family in &config.families {
        for &n in &config.ns {
            for sim in 0..config.sims {
                jobs.push((family, n, sim));
            }
        }
    }
    let abar = config.alpha_bar();
    let results: Vec<Result<(String, String, TrajectorySummary)>> = jobs
        .into_par_iter()
        .map(|(family, n, sim)| {
            let state = figure_start(config, family, n, sim)?;
            let rec = run_trajectory(&state, &config.gda, &abar, None)?;
            let file = format!("{}/n{}/seed{:02}.csv", family.tag(), n, sim);
            let stream = config.tag(n, sim, Role::Data).stream;
            let summary = summarize(file.clone(), family, n, sim, stream, &rec);
            Ok((file, rec.to_csv_string(), summary))
        })
        .collect();
    let mut trajectories = Vec::new();
    for r in results {
        let (file, csv, summary) = r?;
        let path = out_dir.join(&file);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, csv)?;
        trajectories.push(summary);
    }
    let manifest = FigureManifest {
        provenance: Provenance::of(config),
        config: config.clone(),
        csv_header: crate::dynamics::CSV_HEADER.to_string(),
        trajectories,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Versioned trajectory thresholds shipped with the crate.
pub const TRAJECTORY_EXPECTATIONS: &str = include_str!("../expectations/trajectories.v1.txt");

#[derive(Clone, Debug, PartialEq)]
pub struct Expectations {
    values: BTreeMap<String, f64>,
}

impl Expectations {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("expectations line {}: expected key=value", i + 1)))?;
            let v: f64 =
                v.trim().parse().map_err(|_| Error::Format(format!("expectations line {}: not a number", i + 1)))?;
            values.insert(k.trim().to_string(), v);
        }
        Ok(Self { values })
    }

    pub fn builtin() -> Self {
        Self::parse(TRAJECTORY_EXPECTATIONS).expect("bundled expectations parse")
    }

    pub fn get(&self, key: &str) -> Result<f64> {
        self.values.get(key).copied().ok_or_else(|| Error::Format(format!("missing expectation {key:?}")))
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// `--out`, else `NASH_SPECTRA_OUT`, else `./out`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("NASH_SPECTRA_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// The equilibrium point examined by the classifier for each family:
/// canonical `α̇` with the Fourier basis (complex), a random unit-norm
/// conv `β` (conv), or the power-method `β` (real).
pub fn equilibrium_point(family: Family, d: usize, n: usize, seed: u64) -> Result<GameState> {
    let mut config = ScenarioConfig::defaults(Scenario::Table2);
    config.d = d;
    config.alpha_bar = (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    config.master_seed = seed;
    let (x, z) = config.batches(n, 0)?;
    let canon = canonical_consistent_filter(&x, &z)?;
    let disc = match family {
        Family::ComplexFourier => fourier_basis_discriminator(d)?,
        Family::Convolutional => random_conv_start(&config, n, 0)?.1,
        Family::Real => {
            let mut rng = config.tag(n, 0, Role::PowerStart).rng();
            let p = optimal_real_discriminator(&canon, &x, &z, DEFAULT_POWER_ITERS, DEFAULT_POWER_TOL, &mut rng)?;
            Discriminator::real(p.beta.into_vec())?
        }
    };
    GameState::new(canon, disc, x, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_cases() {
        assert_eq!(aggregate(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, s) = aggregate(&[0.0, 2.0]).unwrap();
        assert_eq!(m, 1.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert!(aggregate(&[1.0]).is_err());
        let mut rng = SeedTag::simple(9, Role::Aux).rng();
        let v = gaussian_vec(&mut rng, 10_000, 1.0);
        let (m, s) = aggregate(&v).unwrap();
        assert!(m.abs() < 0.05 && (s - 1.0).abs() < 0.05);
    }

    #[test]
    fn config_text_and_validation() {
        let mut c = ScenarioConfig::defaults(Scenario::Table1Truth);
        let extra = parse_config_text("# comment\nn = 10,1e3\nsims=5\nseed=7\nout=/tmp/x\n", &mut c).unwrap();
        assert_eq!(c.ns, vec![10, 1000]);
        assert_eq!((c.sims, c.attempts, c.master_seed), (5, 10, 7));
        assert_eq!(extra.get("out").map(String::as_str), Some("/tmp/x"));
        assert!(parse_config_text("nonsense", &mut c).is_err());
        assert!(parse_config_text("d=abc", &mut c).is_err());

        let mut odd = c.clone();
        apply_setting(&mut odd, "d", "5").unwrap();
        assert!(odd.validate().is_err());
        let mut degenerate = c.clone();
        degenerate.alpha_bar = vec![1.0, 1.0, 1.0, 1.0];
        assert!(degenerate.validate().is_err());
        assert!(c.validate().is_ok());
        assert_ne!(c.hash(), ScenarioConfig::defaults(Scenario::Table1Truth).hash());
        assert_eq!(Scenario::parse("fig2"), Some(Scenario::Fig2ConvGlobal));
    }

    #[test]
    fn table1_small_run_accounts_for_every_attempt() {
        let mut c = ScenarioConfig::defaults(Scenario::Table1Truth);
        c.ns = vec![100];
        c.sims = 5;
        c.attempts = 10;
        let r = run_table1(&c, Table1Variant::TruthAlpha0).unwrap();
        let row = &r.difference.rows[0];
        assert_eq!(row.attempted, row.kept + row.excluded);
        assert_eq!(row.kept, 5);
        assert!(r.final_values[0].iter().all(|v| *v < 1e-8));
        assert!(row.values.iter().all(|v| *v > 0.0));
        let again = run_table1(&c, Table1Variant::TruthAlpha0).unwrap();
        assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn table2_small_run() {
        let mut c = ScenarioConfig::defaults(Scenario::Table2);
        c.ns = vec![1000];
        c.sims = 3;
        c.gda.iters = 2000;
        c.gda.log_stride = 2000;
        let r = run_table2(&c).unwrap();
        let (g, e) = (&r.gda_error.rows[0], &r.empirical_error.rows[0]);
        assert_eq!(g.attempted, 3);
        assert_eq!(g.kept, e.kept);
        assert!(r.gda_error.to_csv().starts_with(AGGREGATE_CSV_HEADER));
    }

    #[test]
    fn batches_use_disjoint_streams() {
        let c = ScenarioConfig::defaults(Scenario::Table2);
        let (x, z) = c.batches(10, 3).unwrap();
        assert_ne!(x.seed_tag(), z.seed_tag());
        let (x2, _) = c.batches(10, 4).unwrap();
        assert_ne!(x.paths(), x2.paths());
    }

    #[test]
    fn bundled_expectations() {
        let e = Expectations::builtin();
        assert_eq!(e.get("version").unwrap(), 1.0);
        assert_eq!(e.get("fig2_min_seeds").unwrap(), 8.0);
        assert!(e.get("nope").is_err());
        assert!(Expectations::parse("a = b").is_err());
    }

    #[test]
    fn classifier_points() {
        use crate::equilibrium::{classify_equilibrium, default_grad_tol, Classification, DEFAULT_EIG_TOL};
        let st = equilibrium_point(Family::ComplexFourier, 4, 10_000, 3).unwrap();
        let rep = classify_equilibrium(&st, default_grad_tol(st.value()), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(rep.classification, Classification::NonNash);
        let st = equilibrium_point(Family::Convolutional, 4, 100, 3).unwrap();
        let rep = classify_equilibrium(&st, default_grad_tol(st.value()), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(rep.classification, Classification::NashCandidate);
    }
}
