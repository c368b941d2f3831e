//! Command-line front end for the `nash-spectra` experiment drivers.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on
//! numerical failures (including a failing `check`).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nash_spectra::checks;
use nash_spectra::equilibrium::{classify_equilibrium, default_grad_tol, DEFAULT_EIG_TOL};
use nash_spectra::experiments::{
    apply_setting, equilibrium_point, output_root, parse_config_text, run_figure, run_table1, run_table2, write_json,
    AggregateResult, Scenario, ScenarioConfig, Table1Variant,
};
use nash_spectra::{Error, Family};

#[derive(Debug, Parser)]
#[command(
    name = "nash-spectra",
    version,
    about = "Moment-matching GAN games on circular stationary Gaussian processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Best-response generator error after the optimal real discriminator.
    Table1(CommonArgs),
    /// Generator error of continuous-time GDA on the convolutional family.
    Table2(CommonArgs),
    /// Trajectory CSVs and a manifest for one figure scenario.
    Fig(CommonArgs),
    /// Equilibrium report at the canonical point of one family.
    Classify(CommonArgs),
    /// Runs the invariant suite.
    Check(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Process dimension.
    #[arg(long)]
    d: Option<String>,
    /// Sample size, or a comma-separated list (scientific notation accepted).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    sims: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    /// discrete or rk4.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// Output root; defaults to $NASH_SPECTRA_OUT, then ./out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// table1-random, table1-truth, table2, fig1, fig2 or fig3.
    #[arg(long)]
    scenario: Option<String>,
    /// key=value settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// random or truth (table1; both when omitted).
    #[arg(long)]
    variant: Option<String>,
    /// real, complex or conv.
    #[arg(long)]
    family: Option<String>,
    /// Adds the n = 1e5 row to table2.
    #[arg(long)]
    full: bool,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::Divergence { .. } | Error::Degenerate(_) | Error::Consistency(_) => 2,
        _ => 1,
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Resolved {
    config: ScenarioConfig,
    out: PathBuf,
    n_given: bool,
}

/// Defaults for `scenario`, then the config file, then flags.
fn resolve(args: &CommonArgs, scenario: Scenario) -> nash_spectra::Result<Resolved> {
    let mut config = ScenarioConfig::defaults(scenario);
    let mut out = None;
    let mut n_given = false;
    if let Some(path) = &args.config {
        let text =
            fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        for (k, v) in parse_config_text(&text, &mut config)? {
            match k.as_str() {
                "out" => out = Some(PathBuf::from(v)),
                _ => return Err(usage(format!("unknown config key {k:?}"))),
            }
        }
        n_given = text.lines().filter_map(|l| l.split('#').next()?.split_once('=')).any(|(k, _)| k.trim() == "n");
        if config.scenario != scenario && !scenario.is_figure() {
            return Err(usage(format!("config scenario {} does not match this command", config.scenario.id())));
        }
    }
    let flags = [
        ("d", &args.d),
        ("n", &args.n),
        ("sims", &args.sims),
        ("seed", &args.seed),
        ("eta", &args.eta),
        ("iters", &args.iters),
        ("mode", &args.mode),
        ("sigma", &args.sigma),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            apply_setting(&mut config, key, v)?;
        }
    }
    if let (Some(f), true) = (&args.family, scenario.is_figure()) {
        apply_setting(&mut config, "family", f)?;
    }
    n_given |= args.n.is_some();
    let out = output_root(args.out.as_deref().or(out.as_deref()));
    Ok(Resolved { config, out, n_given })
}

fn dispatch(command: Command) -> nash_spectra::Result<i32> {
    match command {
        Command::Table1(args) => table1(&args),
        Command::Table2(args) => table2(&args),
        Command::Fig(args) => fig(&args),
        Command::Classify(args) => classify(&args),
        Command::Check(args) => check(&args),
    }
}

fn print_aggregate(title: &str, result: &AggregateResult) {
    println!("{title}");
    println!("{:>8} {:>10} {:>10} {:>6} {:>9}", "n", "mean", "std", "kept", "attempted");
    for r in &result.rows {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!("{:>8} {:>10} {:>10} {:>6} {:>9}", r.n, f(r.mean), f(r.std), r.kept, r.attempted);
    }
}

fn table1(args: &CommonArgs) -> nash_spectra::Result<i32> {
    let variants = match args.variant.as_deref() {
        None => vec![Table1Variant::TruthAlpha0, Table1Variant::RandomAlpha0],
        Some(v) => vec![Table1Variant::parse(v).ok_or_else(|| usage(format!("unknown variant {v:?}")))?],
    };
    if args.scenario.is_some() {
        return Err(usage("table1 takes --variant, not --scenario"));
    }
    for variant in variants {
        let r = resolve(args, variant.scenario())?;
        let result = run_table1(&r.config, variant)?;
        let stem = r.config.scenario.id();
        write_json(&r.out.join(format!("{stem}.json")), &result)?;
        write_file(&r.out.join(format!("{stem}.csv")), &result.difference.to_csv())?;
        print_aggregate(stem, &result.difference);
        for w in &result.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(0)
}

fn table2(args: &CommonArgs) -> nash_spectra::Result<i32> {
    if args.scenario.is_some() || args.variant.is_some() {
        return Err(usage("table2 takes neither --scenario nor --variant"));
    }
    if args.family.as_deref().is_some_and(|f| Family::from_tag(f) != Some(Family::Convolutional)) {
        return Err(usage("table2 runs the conv family only"));
    }
    let mut r = resolve(args, Scenario::Table2)?;
    if args.full && !r.n_given && !r.config.ns.contains(&100_000) {
        r.config.ns.push(100_000);
    }
    let result = run_table2(&r.config)?;
    write_json(&r.out.join("table2.json"), &result)?;
    write_file(&r.out.join("table2-gda.csv"), &result.gda_error.to_csv())?;
    write_file(&r.out.join("table2-empirical.csv"), &result.empirical_error.to_csv())?;
    print_aggregate("table2 gda error", &result.gda_error);
    print_aggregate("table2 empirical error", &result.empirical_error);
    Ok(0)
}

fn fig(args: &CommonArgs) -> nash_spectra::Result<i32> {
    let from_config = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let mut probe = ScenarioConfig::defaults(Scenario::Fig2ConvGlobal);
            parse_config_text(&text, &mut probe)?;
            text.contains("scenario").then_some(probe.scenario)
        }
        None => None,
    };
    let scenario = match args.scenario.as_deref() {
        Some(s) => Scenario::parse(s).ok_or_else(|| usage(format!("unknown scenario {s:?}")))?,
        None => from_config.ok_or_else(|| usage("fig needs --scenario fig1, fig2 or fig3"))?,
    };
    if !scenario.is_figure() {
        return Err(usage(format!("{} is not a figure scenario", scenario.id())));
    }
    let r = resolve(args, scenario)?;
    if r.config.scenario != scenario {
        return Err(usage("config file scenario conflicts with --scenario"));
    }
    let dir = r.out.join(scenario.id());
    let manifest = run_figure(&r.config, &dir)?;
    let aborted = manifest.trajectories.iter().filter(|t| t.nan_abort.is_some()).count();
    println!(
        "{}: {} trajectories ({} aborted), manifest {}/manifest.json",
        scenario.id(),
        manifest.trajectories.len(),
        aborted,
        scenario.id()
    );
    Ok(0)
}

fn classify(args: &CommonArgs) -> nash_spectra::Result<i32> {
    let family = match args.family.as_deref() {
        Some(f) => Family::from_tag(f).ok_or_else(|| usage(format!("unknown family {f:?}")))?,
        None => return Err(usage("classify needs --family real, complex or conv")),
    };
    let r = resolve(args, Scenario::Table2)?;
    let n = match (r.n_given, r.config.ns.as_slice()) {
        (false, _) => 100,
        (true, [n]) => *n,
        (true, _) => return Err(usage("classify takes a single --n")),
    };
    if family == Family::ComplexFourier && r.config.d % 2 != 0 {
        return Err(usage("the complex family needs an even d"));
    }
    let seed = r.config.master_seed;
    let state = equilibrium_point(family, r.config.d, n, seed)?;
    let report = classify_equilibrium(&state, default_grad_tol(state.value()), DEFAULT_EIG_TOL)?;
    write_json(&r.out.join(format!("classify-{}-n{}-seed{}.json", family.tag(), n, seed)), &report)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    print!("{json}");
    Ok(0)
}

fn check(args: &CommonArgs) -> nash_spectra::Result<i32> {
    let r = resolve(args, Scenario::Table2)?;
    let outcomes = checks::run_all(r.config.master_seed)?;
    for o in &outcomes {
        println!("{}", o.line());
    }
    write_json(&r.out.join("check.json"), &outcomes)?;
    Ok(if outcomes.iter().all(|o| o.passed) { 0 } else { 2 })
}

fn write_file(path: &Path, contents: &str) -> nash_spectra::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}
