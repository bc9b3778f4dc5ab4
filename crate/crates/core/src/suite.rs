//! Named scenario lists. The acceptance suite checks the spreading laws on
//! concrete runs, one report per criterion; runs shared by several
//! criteria are computed once per suite.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{config_hash, Tolerances};
use crate::error::{Error, Result};
use crate::experiments::{
    estimate_speed, flattening_series, hausdorff_convergence, lag_fit, planted_sigma2_baseline, symmetry_report,
    terrace_detect, unfold, verify_fg, Basis, Criterion, ExperimentReport, FgOptions, HausdorffMode, HausdorffOptions,
    LagProbe, LagScenario, Series, TerraceVerdictKind,
};
use crate::frontspeed::{min_speed, terrace_speeds, TerraceVerdict};
use crate::geometry::{
    catalog, check_hypothesis_u, direction_sets, distance_transform, norm, predicted_speed_pair, sub, unit, Gamma,
    LadderConfig, RasterMask, SupportKind, SupportSpec, Window,
};
use crate::levelsets::{ray_position, RayMode};
use crate::reaction::ReactionTerm;
use crate::solver::{comparison_check, run, Face, Field, Grid, RunConfig, Snapshot, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScenarioInfo {
    pub id: &'static str,
    pub title: &'static str,
    /// Runs long enough to be left out of quick passes.
    pub slow: bool,
}

const fn info(id: &'static str, title: &'static str, slow: bool) -> ScenarioInfo {
    ScenarioInfo { id, title, slow }
}

pub const ACCEPTANCE: [ScenarioInfo; 14] = [
    info("c01_bistable_speed", "bistable front speed against (1 - 2a)/sqrt 2", false),
    info("c02_kpp_speed", "1D logistic spreading speed", false),
    info("c03_cone_fg", "cone support, measured speeds against the variational formula", false),
    info("c04_half_space", "half-space law w(e) = c*/e_N", false),
    info("c05_half_space_hausdorff", "scaled level sets against U/t + B_c*", false),
    info("c06_ball_hausdorff", "scaled level sets of a ball against the envelope", false),
    info("c07_lag_line", "logarithmic lag of planar fronts", false),
    info("c08_lag_radial", "logarithmic lag of radial fronts in the plane", false),
    info("c09_lag_log_decay", "lag of a subgraph sinking like -3 ln(1 + |x'|)", true),
    info("c10_annuli", "annuli: hypothesis fails and R(t)/t oscillates", false),
    info("c11_flattening", "flattening of level sets and the tilted control", false),
    info("c12_symmetry", "one-dimensional symmetry, V-shaped control, sigma_2 baseline", false),
    info("c13_terrace", "tristable terrace of two fronts", false),
    info("c14_properties", "scheme soundness properties", false),
];

pub fn suite(name: &str) -> Result<Vec<ScenarioInfo>> {
    match name {
        "acceptance" => Ok(ACCEPTANCE.to_vec()),
        "quick" => Ok(ACCEPTANCE.iter().copied().filter(|s| !s.slow).collect()),
        _ => match ACCEPTANCE.iter().find(|s| s.id == name) {
            Some(s) => Ok(vec![*s]),
            None => Err(Error::InvalidInput(format!(
                "unknown suite or scenario {name:?}; suites are acceptance and quick"
            ))),
        },
    }
}

/// Simulation runs used by the scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
enum RunKey {
    KppLine,
    Cone,
    HalfSpace,
    Ball,
    LagLine,
    LagRadial,
    LogDecay,
    Annuli,
    Parabola,
    Tilted,
    Terrace,
}

fn run_config(key: RunKey) -> Result<RunConfig> {
    let logistic = ReactionTerm::logistic();
    let half_line = SupportSpec::half_space(1, [0.0, 1.0], 0.0)?;
    let lag_dt = |h: f64| h * h / 24.0;
    Ok(match key {
        RunKey::KppLine => RunConfig::new(half_line, logistic, Grid::line(-50.0, 450.0, 0.1)?, 150.0)
            .with_even_snapshots(16)
            .with_faces(&[Face::Top]),
        // half of the symmetric window [-200, 200] x [-100, 300]
        RunKey::Cone => RunConfig::new(
            SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 1.0 })?,
            logistic,
            Grid::plane([0.0, 200.0], [-100.0, 300.0], 0.25)?,
            60.0,
        )
        .with_even_snapshots(16)
        .with_faces(&[Face::Bottom, Face::Top])
        .with_sentinel_region(Window::new([0.0, -100.0], [100.0, 300.0])),
        RunKey::HalfSpace => RunConfig::new(
            SupportSpec::half_space(2, [0.0, 1.0], 0.0)?,
            logistic,
            Grid::plane([0.0, 224.0], [-64.0, 192.0], 0.25)?,
            60.0,
        )
        .with_even_snapshots(16)
        .with_faces(&[Face::Bottom, Face::Top]),
        // quarter of the window [-416, 416]^2; sigma_2 of a round front
        // decays only like 1/t
        RunKey::Ball => RunConfig::new(
            SupportSpec::ball(2, [0.0, 0.0], 5.0)?,
            logistic,
            Grid::plane([0.0, 416.0], [0.0, 416.0], 0.25)?,
            200.0,
        )
        .with_even_snapshots(10)
        .with_faces(&[Face::Top, Face::Right]),
        RunKey::LagLine => RunConfig::new(half_line, logistic, Grid::line(-50.0, 450.0, 0.1)?, 200.0)
            .with_even_snapshots(100)
            .with_dt(lag_dt(0.1))
            .with_faces(&[Face::Top]),
        RunKey::LagRadial => RunConfig::new(
            SupportSpec::ball(2, [0.0, 0.0], 5.0)?,
            logistic,
            Grid::radial(2, 450.0, 0.1)?,
            200.0,
        )
        .with_even_snapshots(100)
        .with_dt(lag_dt(0.1))
        .with_faces(&[Face::Top]),
        RunKey::LogDecay => RunConfig::new(
            SupportSpec::subgraph(2, Gamma::LogDecay { kappa: 3.0 })?,
            logistic,
            Grid::plane([0.0, 64.0], [-30.0, 420.0], 0.25)?,
            200.0,
        )
        .with_even_snapshots(100)
        .with_dt(lag_dt(0.25))
        .with_faces(&[Face::Bottom, Face::Top]),
        RunKey::Annuli => RunConfig::new(SupportSpec::annuli(2)?, logistic, Grid::radial(2, 800.0, 0.25)?, 60.0)
            .with_even_snapshots(48)
            .with_faces(&[Face::Top]),
        RunKey::Parabola => RunConfig::new(
            SupportSpec::subgraph(2, Gamma::NegQuadratic { a: 0.25 })?,
            logistic,
            Grid::plane([0.0, 64.0], [-200.0, 180.0], 0.25)?,
            80.0,
        )
        .with_even_snapshots(16)
        .with_faces(&[Face::Top]),
        RunKey::Tilted => RunConfig::new(
            SupportSpec::subgraph(2, Gamma::Tilted { slope: 1.0 })?,
            logistic,
            Grid::plane([0.0, 160.0], [-20.0, 280.0], 0.25)?,
            80.0,
        )
        .with_even_snapshots(16)
        .with_faces(&[Face::Bottom, Face::Top])
        .with_sentinel_region(Window::new([0.0, -20.0], [30.0, 280.0])),
        RunKey::Terrace => RunConfig::new(
            SupportSpec::ball(1, [0.0, 0.0], 10.0)?,
            terrace_reaction()?,
            Grid::line(0.0, 200.0, 0.1)?,
            200.0,
        )
        .with_even_snapshots(16)
        .with_faces(&[Face::Top]),
    })
}

fn terrace_reaction() -> Result<ReactionTerm> {
    ReactionTerm::new(crate::reaction::ReactionKind::Tristable {
        alpha: 0.02,
        beta: 0.5,
        gamma: 0.65,
        scale: 4.0,
    })
}

fn runs_of(id: &str) -> Vec<RunKey> {
    match id {
        "c02_kpp_speed" => vec![RunKey::KppLine],
        "c03_cone_fg" => vec![RunKey::Cone],
        "c04_half_space" | "c05_half_space_hausdorff" => vec![RunKey::HalfSpace],
        "c06_ball_hausdorff" => vec![RunKey::Ball],
        "c07_lag_line" => vec![RunKey::LagLine],
        "c08_lag_radial" => vec![RunKey::LagRadial],
        "c09_lag_log_decay" => vec![RunKey::LogDecay],
        "c10_annuli" => vec![RunKey::Annuli],
        "c11_flattening" => vec![RunKey::Parabola, RunKey::Tilted],
        "c12_symmetry" => vec![RunKey::Ball, RunKey::Cone],
        "c13_terrace" => vec![RunKey::Terrace],
        _ => vec![],
    }
}

/// Seed of the randomized property suite.
pub const PROPERTY_SEED: u64 = 20240617;

/// Hash of a scenario: its run configurations, tolerances and seed.
pub fn scenario_hash(id: &str) -> Result<String> {
    let runs = runs_of(id)
        .into_iter()
        .map(run_config)
        .collect::<Result<Vec<_>>>()?;
    Ok(config_hash(&(id, runs, Tolerances::default(), PROPERTY_SEED)))
}

pub fn suite_hash(scenarios: &[ScenarioInfo]) -> Result<String> {
    let hashes = scenarios
        .iter()
        .map(|s| Ok((s.id, scenario_hash(s.id)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(config_hash(&hashes))
}

type Shared = Arc<Vec<Snapshot>>;
type Slot = Arc<OnceLock<std::result::Result<Shared, String>>>;

/// Runs computed once per suite and shared by the scenarios.
#[derive(Default)]
pub struct RunCache {
    slots: Mutex<HashMap<RunKey, Slot>>,
}

impl RunCache {
    fn get(&self, key: RunKey) -> Result<Shared> {
        let slot = self.slots.lock().unwrap().entry(key).or_default().clone();
        slot.get_or_init(|| {
            let start = Instant::now();
            let out = run_config(key)
                .and_then(|c| run(&c))
                .map(|(s, _)| Arc::new(s))
                .map_err(|e| e.to_string());
            log::info!("run {key:?} took {:.1} s", start.elapsed().as_secs_f64());
            out
        })
        .clone()
        .map_err(|e| Error::Consistency(format!("run {key:?} failed: {e}")))
    }
}

/// Runs the scenarios of a suite concurrently; each report carries the
/// suite hash.
pub fn run_suite(scenarios: &[ScenarioInfo]) -> Result<Vec<ExperimentReport>> {
    let hash = suite_hash(scenarios)?;
    let cache = RunCache::default();
    scenarios
        .par_iter()
        .map(|s| {
            let mut r = run_scenario(s.id, &cache)?;
            r.suite_hash = hash.clone();
            Ok(r)
        })
        .collect()
}

/// One scenario; failures of the checks are reported, not raised.
pub fn run_scenario(id: &str, cache: &RunCache) -> Result<ExperimentReport> {
    let info = ACCEPTANCE
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::InvalidInput(format!("unknown scenario {id:?}")))?;
    let start = Instant::now();
    let mut r = ExperimentReport::new(info.id, info.title);
    r.config_hash = scenario_hash(id)?;
    r.suite_hash = r.config_hash.clone();
    let tol = Tolerances::default();
    let outcome = match id {
        "c01_bistable_speed" => c01(&mut r),
        "c02_kpp_speed" => c02(&mut r, cache),
        "c03_cone_fg" => c03(&mut r, cache, &tol),
        "c04_half_space" => c04(&mut r, cache),
        "c05_half_space_hausdorff" => c05(&mut r, cache, &tol),
        "c06_ball_hausdorff" => c06(&mut r, cache, &tol),
        "c07_lag_line" => lag(&mut r, cache, RunKey::LagLine, LagScenario::Planar, &tol),
        "c08_lag_radial" => lag(&mut r, cache, RunKey::LagRadial, LagScenario::Curved { n: 2 }, &tol),
        "c09_lag_log_decay" => lag(&mut r, cache, RunKey::LogDecay, LagScenario::Curved { n: 2 }, &tol),
        "c10_annuli" => c10(&mut r, cache, &tol),
        "c11_flattening" => c11(&mut r, cache, &tol),
        "c12_symmetry" => c12(&mut r, cache, &tol),
        "c13_terrace" => c13(&mut r, cache, &tol),
        "c14_properties" => c14(&mut r),
        _ => unreachable!(),
    };
    if let Err(e) = outcome {
        r.push(Criterion::holds("scenario completed", false, Basis::Trivial));
        r.note(format!("error: {e}"));
    }
    r.runtime_s = start.elapsed().as_secs_f64();
    let budget = match id {
        "c01_bistable_speed" => Some(5.0),
        "c02_kpp_speed" => Some(60.0),
        "c07_lag_line" | "c08_lag_radial" => Some(120.0),
        "c09_lag_log_decay" => Some(900.0),
        "c14_properties" => Some(300.0),
        _ => None,
    };
    if let Some(b) = budget {
        r.push(Criterion::at_most("runtime in seconds", r.runtime_s, b, Basis::Trivial));
    }
    Ok(r)
}

fn c_star() -> f64 {
    ReactionTerm::logistic().f_prime_at_zero().sqrt() * 2.0
}

fn c01(r: &mut ExperimentReport) -> Result<()> {
    let alpha = 0.25;
    let sol = min_speed(&ReactionTerm::bistable(alpha)?)?;
    let closed = (1.0 - 2.0 * alpha) / 2f64.sqrt();
    r.push(Criterion::within("c*", sol.speed, closed - 1e-3, closed + 1e-3, Basis::Published));
    let residual = sol.profile.residual(&ReactionTerm::bistable(alpha)?, sol.speed);
    r.push(Criterion::at_most("profile substitution residual", residual, 1e-4, Basis::Derived));
    Ok(())
}

fn c02(r: &mut ExperimentReport, cache: &RunCache) -> Result<()> {
    let snaps = cache.get(RunKey::KppLine)?;
    let est = estimate_speed(&snaps, [0.0, 0.0], [0.0, 1.0], 0.5, RayMode::Furthest)?;
    speed_series(r, "position", &est.samples);
    r.push(Criterion::within("w(e_N)", est.w_hat.unwrap_or(f64::NAN), 1.90, 2.02, Basis::Published));
    Ok(())
}

fn speed_series(r: &mut ExperimentReport, name: &str, samples: &[(f64, crate::levelsets::RayPosition)]) {
    let mut s = Series::new(name, &["t", "r", "window_limited"]);
    for (t, p) in samples {
        s.push(vec![*t, p.r, p.window_limited as u8 as f64]);
    }
    r.series.push(s);
}

fn c03(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let snaps = unfold(&cache.get(RunKey::Cone)?, &[Face::Left]);
    let u = SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 1.0 })?;
    let opts = FgOptions {
        fan: vec![0.0, 0.1, 0.2, 0.3],
        rel_tol: tol.speed_rel,
        ..FgOptions::default()
    };
    let fg = verify_fg(&snaps, &u, &ReactionTerm::logistic(), &opts)?;
    r.note(format!("smallest inside probe in direction {:.4} rad", fg.inside_argmin));
    r.hypotheses_hold = Some(fg.hypotheses_hold);
    r.push(Criterion::holds("hypotheses on U hold", fg.hypotheses_hold, Basis::Published));
    let mut s = Series::new("fan", &["angle", "predicted", "measured"]);
    for f in &fg.fan {
        s.push(vec![f.angle, f.predicted, f.estimate.w_hat.unwrap_or(f64::NAN)]);
    }
    r.series.push(s);
    r.push(Criterion::relative(
        "w(e_N) against 2 sqrt 2",
        fg.fan[0].estimate.w_hat.unwrap_or(f64::NAN),
        2.0 * 2f64.sqrt(),
        tol.speed_rel,
        Basis::Published,
    ));
    for c in fg.criteria(tol.speed_rel) {
        r.push(c);
    }
    Ok(())
}

fn c04(r: &mut ExperimentReport, cache: &RunCache) -> Result<()> {
    let snaps = cache.get(RunKey::HalfSpace)?;
    let c = c_star();
    for e_n in [1.0f64, 0.8, 0.5] {
        let theta = e_n.acos();
        let est = estimate_speed(&snaps, [0.0, 0.0], unit(theta), 0.5, RayMode::Furthest)?;
        speed_series(r, &format!("ray_{e_n}"), &est.samples);
        r.push(Criterion::relative(
            format!("w(e) e_N at e_N = {e_n}"),
            est.w_hat.map_or(f64::NAN, |w| w * e_n),
            c,
            0.1,
            Basis::Published,
        ));
    }
    // directions with e_N <= 0 stay inside the invaded region
    let down = estimate_speed(&snaps, [0.0, 0.0], [0.0, -1.0], 0.5, RayMode::Furthest)?;
    r.push(Criterion::holds("w(-e_N) window-limited", down.window_limited, Basis::Published));
    Ok(())
}

fn hausdorff_series(r: &mut ExperimentReport, points: &[(f64, f64)]) {
    let mut s = Series::new("hausdorff", &["t", "d"]);
    for p in points {
        s.push(vec![p.0, p.1]);
    }
    r.series.push(s);
}

fn c05(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let snaps = cache.get(RunKey::HalfSpace)?;
    let u = SupportSpec::half_space(2, [0.0, 1.0], 0.0)?;
    let opts = HausdorffOptions::new(HausdorffMode::UDilated).mirrored(&[Face::Left, Face::Right]);
    let s = hausdorff_convergence(&snaps, &u, c_star(), &opts)?;
    hausdorff_series(r, &s.points);
    r.push(Criterion::holds("decreasing over [T/2, T]", s.decreasing, Basis::Derived));
    r.push(Criterion::at_most("final distance", s.final_d, tol.hausdorff * c_star(), Basis::Derived));
    Ok(())
}

fn c06(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let snaps = cache.get(RunKey::Ball)?;
    let u = SupportSpec::ball(2, [0.0, 0.0], 5.0)?;
    let opts = HausdorffOptions::new(HausdorffMode::WLocal { radius: 2.0 * c_star() }).mirrored(&[Face::Left, Face::Bottom]);
    let s = hausdorff_convergence(&snaps, &u, c_star(), &opts)?;
    hausdorff_series(r, &s.points);
    r.push(Criterion::holds("decreasing over [T/2, T]", s.decreasing, Basis::Derived));
    r.push(Criterion::at_most("final distance", s.final_d, tol.hausdorff * c_star(), Basis::Derived));
    Ok(())
}

fn lag(r: &mut ExperimentReport, cache: &RunCache, key: RunKey, scenario: LagScenario, tol: &Tolerances) -> Result<()> {
    let snaps = cache.get(key)?;
    let probe = match key {
        RunKey::LogDecay => LagProbe::Column { x_prime: 0.0 },
        _ => LagProbe::Ray {
            origin: [0.0, 0.0],
            e: [0.0, 1.0],
        },
    };
    let fit = lag_fit(&snaps, 0.5, probe, c_star(), scenario)?;
    let mut s = Series::new("lag", &["t", "lag"]);
    for p in &fit.samples {
        s.push(vec![p.0, p.1]);
    }
    r.series.push(s);
    r.note(format!(
        "fit on t in [{}, {}]: intercept {:.4}, residual rms {:.4}",
        fit.window.0, fit.window.1, fit.intercept, fit.residual_rms
    ));
    let rel = match scenario {
        LagScenario::Planar => tol.lag_rel,
        _ => 0.25,
    };
    r.push(Criterion::relative("lag slope k", fit.k_hat, fit.k_pred, rel, Basis::Published));
    Ok(())
}

fn c10(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let u = SupportSpec::annuli(2)?;
    let hyp = check_hypothesis_u(&u, 1.0, &LadderConfig::default())?;
    r.hypotheses_hold = Some(hyp.holds);
    r.push(Criterion::holds("hypothesis check fails", !hyp.holds, Basis::Published));
    let snaps = cache.get(RunKey::Annuli)?;
    let t_end = snaps.last().unwrap().field.t;
    let mut s = Series::new("ratio", &["t", "r", "r_over_t"]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for snap in snaps.iter().filter(|s| s.field.t > 0.0) {
        if snap.contaminated {
            return Err(Error::Contaminated {
                t: snap.field.t,
                deviation: snap.boundary_deviation,
            });
        }
        let p = ray_position(&snap.field, [0.0, 0.0], [0.0, 1.0], 0.5, RayMode::FirstExit)?;
        if p.window_limited {
            return Err(Error::WindowGuard(format!("front left the window at t = {}", snap.field.t)));
        }
        let t = snap.field.t;
        s.push(vec![t, p.r, p.r / t]);
        if t >= 0.5 * t_end - 1e-9 {
            lo = lo.min(p.r / t);
            hi = hi.max(p.r / t);
        }
    }
    r.series.push(s);
    r.push(Criterion::at_least(
        "max - min of R(t)/t over [T/2, T]",
        hi - lo,
        tol.oscillation * c_star(),
        Basis::Derived,
    ));
    Ok(())
}

fn c11(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let parabola = unfold(&cache.get(RunKey::Parabola)?, &[Face::Left]);
    let s = flattening_series(&parabola, &[0.5], 0.0, 5.0)?;
    let mut series = Series::new("flattening", &["t", "max_slope"]);
    for (t, v) in &s.points {
        series.push(vec![*t, v[0]]);
    }
    r.series.push(series);
    r.push(Criterion::holds("parabola: slope decreasing", s.decreasing[0], Basis::Derived));
    r.push(Criterion::at_most("parabola: final max slope", s.final_max[0], tol.flat, Basis::Derived));
    let tilted = cache.get(RunKey::Tilted)?;
    let n = flattening_series(&tilted, &[0.5], 20.0, 5.0)?;
    let mut series = Series::new("tilted", &["t", "max_slope"]);
    for (t, v) in &n.points {
        series.push(vec![*t, v[0]]);
    }
    r.series.push(series);
    r.push(Criterion::holds("tilted: slope not decreasing to zero", !(n.decreasing[0] && n.final_max[0] <= tol.flat), Basis::Published));
    r.push(Criterion::at_least("tilted: final max slope", n.final_max[0], tol.persistent, Basis::Published));
    Ok(())
}

fn c12(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let f = ReactionTerm::logistic();
    let ball = cache.get(RunKey::Ball)?;
    let t_end = ball.last().map_or(0.0, |s| s.field.t);
    let late: Vec<Snapshot> = ball.iter().filter(|s| s.field.t >= 0.5 * t_end - 1e-9).cloned().collect();
    let ball = unfold(&late, &[Face::Left, Face::Bottom]);
    let angles: Vec<f64> = (0..8).map(|k| k as f64 * FRAC_PI_4).collect();
    let pos = symmetry_report(&ball, [0.0, 0.0], &angles, 0.5, 3.0)?;
    let mut s = Series::new("sigma2_ball", &["t", "sup_sigma2"]);
    for p in &pos.sigma2 {
        s.push(vec![p.0, p.1]);
    }
    r.series.push(s);
    r.push(Criterion::at_most("ball: planarity defect", pos.final_defect, tol.defect, Basis::Derived));
    let h = ball[0].field.grid.h;
    let patch = Grid::plane([-20.0, 20.0], [-20.0, 20.0], h)?;
    let base = planted_sigma2_baseline(&patch, &f, &[PI / 8.0, PI / 6.0, FRAC_PI_4])?;
    r.note(format!(
        "planted sup|sigma2| {:.3e}, floor {:.3e}, ball final {:.3e}",
        base.sup_sigma2, base.floor, pos.final_sigma2
    ));
    r.push(Criterion::at_most(
        "planted baseline over floor",
        base.sup_sigma2 / base.floor,
        tol.sigma2_factor,
        Basis::Derived,
    ));
    r.push(Criterion::at_most(
        "ball: final sup sigma2 over baseline",
        pos.final_sigma2 / base.sup_sigma2,
        tol.sigma2_factor,
        Basis::Derived,
    ));
    let cone = unfold(&cache.get(RunKey::Cone)?, &[Face::Left]);
    let neg = symmetry_report(&cone, [0.0, 0.0], &[0.0], 0.5, 3.0)?;
    r.push(Criterion::at_least(
        "V-shaped: planarity defect on the axis",
        neg.final_defect,
        tol.defect_persistent,
        Basis::Published,
    ));
    Ok(())
}

fn c13(r: &mut ExperimentReport, cache: &RunCache, tol: &Tolerances) -> Result<()> {
    let f = terrace_reaction()?;
    let speeds = terrace_speeds(&f)?;
    r.push(Criterion::holds(
        "terrace predicted (c1 > c2)",
        speeds.verdict == TerraceVerdict::TerraceExpected,
        Basis::Derived,
    ));
    let (Some(c1), Some(c2)) = (speeds.c1, speeds.c2) else {
        return Err(Error::InvalidInput("terrace sub-problems have no front speed".into()));
    };
    let snaps = cache.get(RunKey::Terrace)?;
    let t = terrace_detect(&snaps, speeds.beta, [0.0, 0.0], [0.0, 1.0])?;
    r.note(format!("predicted c1 = {c1:.5}, c2 = {c2:.5}"));
    r.push(Criterion::holds("terrace detected", t.verdict == TerraceVerdictKind::Terrace, Basis::Published));
    r.push(Criterion::relative("upper front speed", t.c_low.unwrap_or(f64::NAN), c2, tol.terrace_rel, Basis::Derived));
    r.push(Criterion::relative("lower front speed", t.c_high.unwrap_or(f64::NAN), c1, tol.terrace_rel, Basis::Derived));
    r.push(Criterion::at_most("plateau deviation from beta", t.plateau_deviation, tol.plateau, Basis::Published));
    Ok(())
}

fn c14(r: &mut ExperimentReport) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(PROPERTY_SEED);
    // ordered random masks stay ordered
    let g = Grid::plane([-3.0, 3.0], [-3.0, 3.0], 0.25)?;
    let mut ordered = 0;
    for _ in 0..50 {
        let mut small = g.empty_mask();
        small.cells.iter_mut().for_each(|c| *c = rng.gen_bool(0.3));
        let mut big = small.clone();
        big.cells.iter_mut().for_each(|c| *c = *c || rng.gen_bool(0.3));
        let mk = |m: RasterMask| -> Result<RunConfig> {
            Ok(RunConfig::new(SupportSpec::new(2, SupportKind::Mask(m))?, ReactionTerm::bistable(0.3)?, g, 1.0)
                .with_even_snapshots(5))
        };
        ordered += comparison_check(&mk(small)?, &mk(big)?)? as usize;
    }
    r.push(Criterion::within("ordered pairs preserved (of 50)", ordered as f64, 50.0, 50.0, Basis::Trivial));
    r.push(Criterion::at_most("heat kernel relative error", heat_kernel_error()?, 0.02, Basis::Trivial));
    let mut exact = 0;
    for _ in 0..100 {
        let (nx, ny) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let p = rng.gen_range(0.05..0.95);
        let mut m = RasterMask::empty([0.0, 0.0], 1.0, nx, ny)?;
        m.cells.iter_mut().for_each(|c| *c = rng.gen_bool(p));
        let fast = distance_transform(&m);
        exact += (fast.iter().zip(brute_distance(&m)).all(|(a, b)| *a == b || (a - b).abs() < 1e-9)) as usize;
    }
    r.push(Criterion::within("distance transform equals brute force (of 100)", exact as f64, 100.0, 100.0, Basis::Trivial));
    let (mut agree, mut total) = (0, 0);
    for (_, u) in catalog() {
        let d = direction_sets(&u, &LadderConfig::default())?;
        for k in 0..256 {
            let e = unit(-PI + (k as f64 + 0.37) * 2.0 * PI / 256.0);
            agree += predicted_speed_pair(e, &d, 1.0).consistent as usize;
            total += 1;
        }
    }
    r.push(Criterion::within(
        "speed formula pairs agreeing",
        agree as f64,
        total as f64,
        total as f64,
        Basis::Trivial,
    ));
    Ok(())
}

/// Relative sup error of a point mass against the heat kernel at `t = 1`.
pub fn heat_kernel_error() -> Result<f64> {
    let h = 0.05;
    let g = Grid::plane([-4.0, 4.0], [-4.0, 4.0], h)?;
    let mut f = Field::constant(g, 0.0);
    let (ci, cj) = (g.nx / 2, g.ny / 2);
    let mass = 1e-3;
    for (i, j) in [(ci - 1, cj - 1), (ci, cj - 1), (ci - 1, cj), (ci, cj)] {
        f.values[j * g.nx + i] = mass / (4.0 * h * h);
    }
    let dt = g.cfl_bound(0.9);
    let mut s = Solver::new(f, ReactionTerm::zero(), dt)?;
    s.advance((1.0 / dt).round() as u64)?;
    let t = s.t();
    let out = s.field();
    let (mut err, mut peak) = (0.0f64, 0.0f64);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = g.center(i, j);
            let k = mass * (-(p[0] * p[0] + p[1] * p[1]) / (4.0 * t)).exp() / (4.0 * PI * t);
            err = err.max((out.get(i, j) - k).abs());
            peak = peak.max(k);
        }
    }
    Ok(err / peak)
}

fn brute_distance(m: &RasterMask) -> Vec<f64> {
    let on: Vec<_> = (0..m.ny)
        .flat_map(|j| (0..m.nx).map(move |i| (i, j)))
        .filter(|&(i, j)| m.get(i, j))
        .map(|(i, j)| m.center(i, j))
        .collect();
    (0..m.ny)
        .flat_map(|j| (0..m.nx).map(move |i| (i, j)))
        .map(|(i, j)| {
            let p = m.center(i, j);
            on.iter().map(|q| norm(sub(p, *q))).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_and_hashes() {
        assert_eq!(suite("acceptance").unwrap().len(), 14);
        assert_eq!(suite("quick").unwrap().len(), 13);
        assert_eq!(suite("c02_kpp_speed").unwrap()[0].id, "c02_kpp_speed");
        assert!(suite("nope").is_err());
        let a = scenario_hash("c04_half_space").unwrap();
        assert_eq!(a, scenario_hash("c04_half_space").unwrap());
        assert_ne!(a, scenario_hash("c05_half_space_hausdorff").unwrap());
    }

    #[test]
    fn cheap_scenarios_pass() {
        let cache = RunCache::default();
        for id in ["c01_bistable_speed", "c14_properties"] {
            let r = run_scenario(id, &cache).unwrap();
            assert!(r.passed(), "{}", r.summary());
        }
    }
}
