//! `rdspread`: simulate, predict and verify spreading of reaction-diffusion
//! fronts from indicator initial data.
//!
//! `RDSPREAD_THREADS` fixes the worker count. `RDSPREAD_DETERMINISTIC=1`
//! drops wall-clock times from the written reports so that reruns are
//! byte-identical.

mod manifest;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::BoolishValueParser;
use clap::{Args, Parser, Subcommand};
use rdspread_core::config::{load_config, parse_value};
use rdspread_core::error::{Error, Result};
use rdspread_core::experiments::{aggregate, atomic_write, execute, lag_fit, ExperimentReport, LagProbe, LagScenario};
use rdspread_core::frontspeed::{min_speed, terrace_speeds, TerraceVerdict};
use rdspread_core::geometry::{check_hypothesis_u, direction_sets, predicted_speed, unit, LadderConfig, SupportSpec};
use rdspread_core::preview::write_preview;
use rdspread_core::reaction::{ReactionClass, ReactionTerm};
use rdspread_core::solver::{run_with, write_snapshot, Mode};
use rdspread_core::suite::{run_suite, suite};

#[derive(Parser)]
#[command(name = "rdspread", version, about = "Spreading of reaction-diffusion fronts from indicator data")]
struct Cli {
    /// Worker threads; all cores when unset.
    #[arg(long, global = true, env = "RDSPREAD_THREADS")]
    threads: Option<usize>,
    /// Leave wall-clock times out of written reports.
    #[arg(long, global = true, env = "RDSPREAD_DETERMINISTIC", value_parser = BoolishValueParser::new())]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured simulation and store its snapshots.
    Simulate(SimulateArgs),
    /// Minimal front speed and profile of a reaction term.
    Speed(SpeedArgs),
    /// Direction sets of a support and the predicted speeds w(e).
    Geometry(GeometryArgs),
    /// Run a configured experiment or a named suite and check its criteria.
    Verify(VerifyArgs),
    /// Fit the logarithmic lag on a stored simulation.
    Lag(LagArgs),
    /// Summarize the reports under a directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; `<output>/<scenario>` from the config by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a PGM preview per snapshot of a plane run.
    #[arg(long)]
    preview: bool,
}

#[derive(Args)]
struct SpeedArgs {
    /// Kind name or inline table, e.g. `{ kind = "bistable", alpha = 0.25 }`.
    #[arg(long, default_value = "kpp_logistic")]
    reaction: String,
    /// Write the profile as CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct GeometryArgs {
    /// Kind name or inline table, e.g. `{ kind = "ball_union", dim = 2, centers = [[0.0, 0.0]], radii = [3.0] }`.
    #[arg(long)]
    support: String,
    #[arg(long, default_value = "kpp_logistic")]
    reaction: String,
    /// Number of directions in the printed table.
    #[arg(long, default_value_t = 64)]
    directions: usize,
    /// Interior depth for the hypothesis check.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Write the table as CSV instead of printing it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Target {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `acceptance`, `quick` or a single scenario id.
    #[arg(long)]
    suite: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    target: Target,
    /// Report directory; the config's `output` or `out` by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LagArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// `planar`, or `curved` with the dimension in `--dim`.
    #[arg(long, default_value = "planar")]
    scenario: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Follow the column at this x' instead of the ray along e_N.
    #[arg(long)]
    column: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Speed(a) => speed(a),
        Command::Geometry(a) => geometry(a),
        Command::Verify(a) => verify(a, cli.deterministic),
        Command::Lag(a) => lag(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn simulate(a: &SimulateArgs) -> Result<bool> {
    let cfg = load_config(&a.config)?;
    let out = a.out.clone().unwrap_or_else(|| cfg.output.join(&cfg.scenario));
    create_dir(&out)?;
    let hash = cfg.hash();
    let toml = format!("# config_hash={hash}\n{}", cfg.to_toml()?);
    atomic_write(&out.join("config.toml"), toml.as_bytes())?;
    let mut rows = Vec::new();
    let summary = run_with(&cfg.run_config()?, |s| {
        let k = rows.len();
        let file = format!("snap_{k:04}.rdf");
        let tmp = out.join(format!("{file}.tmp"));
        write_snapshot(&tmp, &s.field)?;
        std::fs::rename(&tmp, out.join(&file)).map_err(|e| Error::io(&tmp, e))?;
        if a.preview && s.field.grid.mode == Mode::Plane {
            write_preview(&s.field, &out.join(format!("snap_{k:04}.pgm")))?;
        }
        rows.push(manifest::Row {
            time: s.field.t,
            file,
            contaminated: s.contaminated,
            boundary_deviation: s.boundary_deviation,
        });
        Ok(())
    })?;
    atomic_write(&out.join("manifest.csv"), manifest::render(&rows, &hash).as_bytes())?;
    println!("snapshots: {} in {}", rows.len(), out.display());
    println!("dt: {}  steps: {}", summary.dt, summary.steps);
    for w in &summary.warnings {
        println!("warning: {w:?}");
    }
    match summary.contaminated_at {
        Some(t) => {
            println!("contaminated from t = {t}");
            Ok(false)
        }
        None => Ok(true),
    }
}

fn speed(a: &SpeedArgs) -> Result<bool> {
    let f: ReactionTerm = parse_value(&a.reaction)?;
    println!("class: {:?}", f.class());
    if f.class() == ReactionClass::Tristable {
        let t = terrace_speeds(&f)?;
        println!("beta: {}", t.beta);
        println!("c1 (beta to 0): {}", t.c1.map_or("none".into(), |c| c.to_string()));
        println!("c2 (1 to beta): {}", t.c2.map_or("none".into(), |c| c.to_string()));
        println!("verdict: {:?}", t.verdict);
        if t.verdict != TerraceVerdict::Hypothesis2Holds {
            return Ok(true);
        }
    }
    let sol = min_speed(&f)?;
    println!("c*: {}", sol.speed);
    println!("method: {:?}", sol.method);
    println!("profile residual: {:e}", sol.residual);
    if let Some(path) = &a.profile {
        let mut csv = String::from("z,phi,psi\n");
        for k in 0..sol.profile.z.len() {
            let _ = writeln!(csv, "{},{},{}", sol.profile.z[k], sol.profile.phi[k], sol.profile.psi[k]);
        }
        atomic_write(path, csv.as_bytes())?;
    }
    Ok(true)
}

fn geometry(a: &GeometryArgs) -> Result<bool> {
    let u: SupportSpec = parse_value(&a.support)?;
    let f: ReactionTerm = parse_value(&a.reaction)?;
    let c_star = min_speed(&f)?.speed;
    let cfg = LadderConfig::default();
    let hyp = check_hypothesis_u(&u, a.rho, &cfg)?;
    println!("c*: {c_star}");
    println!("hypothesis on U holds: {}", hyp.holds);
    if !hyp.holds {
        println!(
            "failing directions: {} (uncertain: {})",
            hyp.missing_dirs.len(),
            hyp.uncertain
        );
    }
    let dirs = direction_sets(&u, &cfg)?;
    let mut csv = String::from("angle,e_prime,e_n,w\n");
    let n = if u.dim == 1 { 2 } else { a.directions.max(1) };
    for k in 0..n {
        let angle = if u.dim == 1 {
            k as f64 * std::f64::consts::PI
        } else {
            -std::f64::consts::PI + k as f64 * std::f64::consts::TAU / n as f64
        };
        let e = unit(angle);
        let w = predicted_speed(e, &dirs, c_star)?;
        let _ = writeln!(csv, "{angle:.6},{:.6},{:.6},{w}", e[0], e[1]);
    }
    match &a.out {
        Some(path) => atomic_write(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(hyp.holds)
}

fn write_reports(reports: &mut [ExperimentReport], out: &Path, deterministic: bool) -> Result<bool> {
    create_dir(out)?;
    for r in reports.iter_mut() {
        println!(
            "{:<28} {}  ({:.1} s)",
            r.scenario,
            if r.passed() { "PASS" } else { "FAIL" },
            r.runtime_s
        );
        if deterministic {
            r.runtime_s = 0.0;
        }
        r.write_to(out)?;
    }
    for r in reports.iter().filter(|r| !r.passed()) {
        print!("{}", r.summary());
    }
    Ok(reports.iter().all(|r| r.passed()))
}

fn verify(a: &VerifyArgs, deterministic: bool) -> Result<bool> {
    match (&a.target.config, &a.target.suite) {
        (Some(path), _) => {
            let cfg = load_config(path)?;
            let (report, _) = execute(&cfg)?;
            let out = a.out.clone().unwrap_or_else(|| cfg.output.clone());
            write_reports(&mut [report], &out, deterministic)
        }
        (None, Some(name)) => {
            let mut reports = run_suite(&suite(name)?)?;
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            write_reports(&mut reports, &out, deterministic)
        }
        (None, None) => unreachable!("clap requires one target"),
    }
}

fn lag(a: &LagArgs) -> Result<bool> {
    let cfg_path = a.dir.join("config.toml");
    let cfg = load_config(&cfg_path)?;
    let (snaps, hash) = manifest::load_snapshots(&a.dir)?;
    if hash != cfg.hash() {
        return Err(Error::Validation(format!(
            "manifest hash {hash} does not match {}",
            cfg_path.display()
        )));
    }
    let scenario = match a.scenario.as_str() {
        "planar" => LagScenario::Planar,
        "curved" => LagScenario::Curved { n: a.dim },
        other => return Err(Error::InvalidInput(format!("unknown lag scenario {other:?}"))),
    };
    let probe = match a.column {
        Some(x) => LagProbe::Column { x_prime: x },
        None => LagProbe::Ray {
            origin: [0.0, 0.0],
            e: [0.0, 1.0],
        },
    };
    let c_star = min_speed(&cfg.reaction)?.speed;
    let fit = lag_fit(&snaps, a.lambda, probe, c_star, scenario)?;
    println!("config_hash: {hash}");
    println!("window: [{}, {}]", fit.window.0, fit.window.1);
    println!("k: {}  (predicted {})", fit.k_hat, fit.k_pred);
    println!("intercept: {}", fit.intercept);
    println!("residual rms: {}", fit.residual_rms);
    Ok(true)
}

fn report(a: &ReportArgs) -> Result<bool> {
    let entries = std::fs::read_dir(&a.dir).map_err(|e| Error::io(&a.dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("report.json"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidInput(format!("no reports under {}", a.dir.display())));
    }
    let reports = paths
        .iter()
        .map(|p| ExperimentReport::read_from(p))
        .collect::<Result<Vec<_>>>()?;
    let rows = aggregate(&reports)?;
    let mut csv = format!("# suite_hash={}\nscenario,passed,failed_criteria,runtime_s\n", reports[0].suite_hash);
    for r in &rows {
        println!("{:<28} {}", r.scenario, if r.passed { "PASS" } else { "FAIL" });
        for c in &r.failed_criteria {
            println!("    failed: {c}");
        }
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            r.scenario,
            r.passed as u8,
            r.failed_criteria.join(";").replace(',', " "),
            r.runtime_s
        );
    }
    atomic_write(&a.dir.join("summary.csv"), csv.as_bytes())?;
    let passed = rows.iter().filter(|r| r.passed).count();
    println!("{passed}/{} scenarios passed", rows.len());
    Ok(passed == rows.len())
}
