//! Moment-matching games between a convolutional generator and quadratic
//! discriminators on circular stationary Gaussian processes.
//!
//! The crate covers the spectral primitives, the data model, three
//! discriminator families with analytic gradients, equilibrium
//! classification, gradient descent-ascent dynamics and the experiment
//! drivers used by the `nash-spectra` CLI.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod discriminator;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod process;
pub mod rng;
pub mod spectral;

pub use discriminator::{
    d_beta_m_beta, fourier_basis_discriminator, grad_alpha, grad_beta, residuals, s_matrix, value, Discriminator,
    Family, GameModel, GameState, MomentStats, ResidualVector, Shape,
};
pub use dynamics::{
    gda_step_discrete, gda_step_rk4, perturb_equilibrium, run_trajectory, GdaConfig, Mode, PointStatus,
    TrajectoryPoint, TrajectoryRecord,
};
pub use equilibrium::{
    best_response_alpha, classify_equilibrium, jacobian, optimal_real_discriminator, BestResponse, Classification,
    EquilibriumReport, JacobianMatrix, PowerResult,
};
pub use error::{Error, Result};
pub use experiments::{
    aggregate, run_figure, run_table1, run_table2, AggregateResult, AggregateRow, Scenario, ScenarioConfig,
    Table1Variant,
};
pub use process::{
    canonical_consistent_filter, empirical_covariance, empirical_spectrum, epsilon_alpha, exact_covariance, generate,
    generator_error, sample_white_noise, CovarianceMatrix, EmpiricalSpectrum, Filter, SampleBatch, SharedBatch,
};
pub use rng::{Role, SeedTag};
pub use spectral::{circular_convolve, dft, dft_real, idft, ComplexSignal, DftPlan, RealSignal};
