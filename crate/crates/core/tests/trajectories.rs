//! Figure scenarios checked against the bundled expectations file.

use nash_spectra::experiments::{run_figure, Expectations, FigureManifest, Scenario, ScenarioConfig};
use nash_spectra::Family;

fn run(scenario: Scenario, n: usize, families: Option<Vec<Family>>) -> FigureManifest {
    let mut config = ScenarioConfig::defaults(scenario);
    config.ns = vec![n];
    if let Some(f) = families {
        config.families = f;
    }
    let dir = tempfile::tempdir().unwrap();
    run_figure(&config, dir.path()).unwrap()
}

#[test]
fn conv_gda_converges_from_random_starts() {
    let e = Expectations::builtin();
    let m = run(Scenario::Fig2ConvGlobal, e.get("fig2_n").unwrap() as usize, None);
    let (vmax, emax) = (e.get("fig2_final_value_max").unwrap(), e.get("fig2_final_eps_alpha_max").unwrap());
    let good = m
        .trajectories
        .iter()
        .filter(|t| t.nan_abort.is_none() && t.final_value < vmax && t.final_eps_alpha < emax)
        .count();
    assert!(good >= e.get("fig2_min_seeds").unwrap() as usize, "{good}/10");
    for t in &m.trajectories {
        assert!(t.min_d_beta.unwrap() > e.get("fig2_min_d_beta").unwrap());
        assert!(t.min_m_beta.unwrap() > e.get("fig2_min_m_beta").unwrap());
    }
}

#[test]
fn discrete_gda_blows_up_near_the_fourier_point_at_small_n() {
    let e = Expectations::builtin();
    let m = run(Scenario::Fig1ComplexLocal, e.get("fig1_n").unwrap() as usize, None);
    let aborted = m.trajectories.iter().filter(|t| t.nan_abort.is_some()).count();
    assert!(aborted >= e.get("fig1_min_nan_seeds").unwrap() as usize);
    for t in m.trajectories.iter().filter(|t| t.nan_abort.is_some()) {
        assert!(t.final_t < t.nan_abort.unwrap());
    }
}

#[test]
fn generator_error_is_flat_on_long_runs_near_the_fourier_point() {
    let e = Expectations::builtin();
    let m = run(Scenario::Fig3Long, e.get("fig3_n").unwrap() as usize, Some(vec![Family::ComplexFourier]));
    let r = e.get("fig3_max_ratio").unwrap();
    let flat = m.trajectories.iter().filter(|t| t.max_gen_error_ratio <= r && t.min_gen_error_ratio >= 1.0 / r).count();
    assert!(flat >= e.get("fig3_min_seeds").unwrap() as usize, "{flat}/10");
}
