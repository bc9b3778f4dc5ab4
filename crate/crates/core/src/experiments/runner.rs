use std::time::Instant;

use super::report::{Basis, Criterion, ExperimentReport, Series};
use super::{
    estimate_speed, flattening_series, hausdorff_convergence, lag_fit, planted_sigma2_baseline, symmetry_report,
    terrace_detect, verify_fg, FgOptions, HausdorffMode, HausdorffOptions, LagScenario, TerraceVerdictKind,
};
use crate::config::{Diagnostic, Expectation, ExperimentConfig, HausdorffKind, RayModeSpec};
use crate::error::{Error, Result};
use crate::frontspeed::{min_speed, terrace_speeds};
use crate::geometry::{direction_sets, predicted_speed, unit, LadderConfig};
use crate::levelsets::RayMode;
use crate::solver::{run, Face, Grid, Snapshot};

/// Runs the configured simulation and evaluates its diagnostics.
pub fn execute(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<Snapshot>)> {
    let start = Instant::now();
    let (snaps, summary) = run(&cfg.run_config()?)?;
    let mut report = evaluate(cfg, &snaps)?;
    if let Some(t) = summary.contaminated_at {
        report.note(format!("boundary contamination from t = {t}"));
    }
    report.runtime_s = start.elapsed().as_secs_f64();
    Ok((report, snaps))
}

/// Snapshots doubled across the mirrored left and bottom faces.
pub fn unfold(snaps: &[Snapshot], mirrored: &[Face]) -> Vec<Snapshot> {
    snaps
        .iter()
        .map(|s| {
            let mut f = s.field.clone();
            if mirrored.contains(&Face::Left) {
                f = f.unfold_left();
            }
            if mirrored.contains(&Face::Bottom) {
                f = f.unfold_bottom();
            }
            Snapshot { field: f, ..s.clone() }
        })
        .collect()
}

/// Evaluates the diagnostics of `cfg` on finished snapshots.
pub fn evaluate(cfg: &ExperimentConfig, snaps: &[Snapshot]) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::new(&cfg.scenario, &cfg.description);
    report.config_hash = cfg.hash();
    report.suite_hash = report.config_hash.clone();
    let tol = &cfg.tolerances;
    let c_star = min_speed(&cfg.reaction)?.speed;
    let mirrored = &cfg.boundary.mirrored;
    let needs_unfold = cfg
        .diagnostics
        .iter()
        .any(|d| matches!(d, Diagnostic::Flattening { .. } | Diagnostic::Symmetry { .. }));
    let unfolded = if needs_unfold && !mirrored.is_empty() {
        unfold(snaps, mirrored)
    } else {
        Vec::new()
    };
    let full: &[Snapshot] = if unfolded.is_empty() { snaps } else { &unfolded };
    for d in &cfg.diagnostics {
        match d {
            Diagnostic::Speed {
                angles,
                lambda,
                origin,
                expected,
                ray,
            } => {
                let mode = match ray {
                    RayModeSpec::Furthest => RayMode::Furthest,
                    RayModeSpec::FirstExit => RayMode::FirstExit,
                };
                let dirs = match (expected, cfg.support.dim) {
                    (None, 2) => Some(direction_sets(&cfg.support, &LadderConfig::default())?),
                    _ => None,
                };
                let mut series = Series::new("speed", &["angle", "w_hat", "predicted"]);
                for &a in angles {
                    let e = unit(a);
                    let target = match (expected, &dirs) {
                        (Some(w), _) => *w,
                        (None, Some(ds)) => predicted_speed(e, ds, c_star)?,
                        (None, None) => c_star,
                    };
                    let est = estimate_speed(snaps, *origin, e, *lambda, mode)?;
                    let name = format!("w at {a:.3} rad");
                    series.push(vec![a, est.w_hat.unwrap_or(f64::NAN), target]);
                    report.push(match est.w_hat {
                        Some(w) if target.is_finite() => Criterion::relative(name, w, target, tol.speed_rel, Basis::Published),
                        None => Criterion::holds(name + " window-limited", !target.is_finite(), Basis::Published),
                        Some(_) => Criterion::holds(name + " window-limited", false, Basis::Published),
                    });
                }
                report.series.push(series);
            }
            Diagnostic::Fg { fan, lambda, origin } => {
                let opts = FgOptions {
                    lambda: *lambda,
                    fan: fan.clone(),
                    rel_tol: tol.speed_rel,
                    origin: *origin,
                    ..FgOptions::default()
                };
                let fg = verify_fg(snaps, &cfg.support, &cfg.reaction, &opts)?;
                report.hypotheses_hold = Some(fg.hypotheses_hold);
                if !fg.hypotheses_hold {
                    report.note("hypotheses violated, deviations expected");
                }
                for c in fg.criteria(tol.speed_rel) {
                    report.push(c);
                }
            }
            Diagnostic::Hausdorff { mode, radius, lambda } => {
                let m = match mode {
                    HausdorffKind::WLocal => HausdorffMode::WLocal {
                        radius: radius.unwrap_or(2.0 * c_star),
                    },
                    HausdorffKind::UDilated => HausdorffMode::UDilated,
                };
                let mut opts = HausdorffOptions::new(m).mirrored(mirrored);
                opts.lambda = *lambda;
                let s = hausdorff_convergence(snaps, &cfg.support, c_star, &opts)?;
                let mut series = Series::new("hausdorff", &["t", "d"]);
                for p in &s.points {
                    series.push(vec![p.0, p.1]);
                }
                report.series.push(series);
                report.push(Criterion::holds("Hausdorff distance decreasing", s.decreasing, Basis::Published));
                report.push(Criterion::at_most(
                    "final Hausdorff distance",
                    s.final_d,
                    tol.hausdorff * c_star,
                    Basis::Derived,
                ));
            }
            Diagnostic::Lag {
                lambda,
                probe,
                scenario,
            } => {
                let fit = lag_fit(snaps, *lambda, *probe, c_star, *scenario)?;
                let mut series = Series::new("lag", &["t", "lag"]);
                for p in &fit.samples {
                    series.push(vec![p.0, p.1]);
                }
                report.series.push(series);
                report.note(format!(
                    "lag fit k = {:.4}, intercept {:.4}, residual {:.4}",
                    fit.k_hat, fit.intercept, fit.residual_rms
                ));
                report.push(match scenario {
                    LagScenario::Sigma { .. } => {
                        Criterion::at_most("lag slope", fit.k_hat, fit.k_pred * (1.0 + tol.lag_rel), Basis::Published)
                    }
                    _ => Criterion::relative("lag slope", fit.k_hat, fit.k_pred, tol.lag_rel, Basis::Published),
                });
            }
            Diagnostic::Flattening {
                lambdas,
                center,
                radius,
                expect,
            } => {
                let s = flattening_series(full, lambdas, *center, *radius)?;
                let mut header = vec!["t".to_string()];
                header.extend(lambdas.iter().map(|l| format!("grad_{l}")));
                let mut series = Series {
                    name: "flattening".into(),
                    header,
                    rows: Vec::new(),
                };
                for (t, row) in &s.points {
                    let mut r = vec![*t];
                    r.extend(row);
                    series.push(r);
                }
                report.series.push(series);
                for (k, l) in lambdas.iter().enumerate() {
                    let name = format!("max slope of level {l}");
                    report.push(match expect {
                        Expectation::Vanishing => Criterion::at_most(name, s.final_max[k], tol.flat, Basis::Derived),
                        Expectation::Persistent => {
                            Criterion::at_least(name, s.final_max[k], tol.persistent, Basis::Published)
                        }
                    });
                }
            }
            Diagnostic::Symmetry {
                origin,
                angles,
                lambda,
                radius,
                expect,
            } => {
                let s = symmetry_report(full, *origin, angles, *lambda, *radius)?;
                let mut series = Series::new("sigma2", &["t", "sup_sigma2"]);
                for p in &s.sigma2 {
                    series.push(vec![p.0, p.1]);
                }
                report.series.push(series);
                match expect {
                    Expectation::Vanishing => {
                        report.push(Criterion::at_most("planarity defect", s.final_defect, tol.defect, Basis::Derived));
                        let g = full.last().unwrap().field.grid;
                        let patch = Grid::plane([-20.0, 20.0], [-20.0, 20.0], g.h)?;
                        let quarter = std::f64::consts::FRAC_PI_4;
                        let base = planted_sigma2_baseline(&patch, &cfg.reaction, &[quarter / 2.0, quarter * 4.0 / 6.0, quarter])?;
                        report.push(Criterion::at_most(
                            "final sup sigma2 over planted baseline",
                            s.final_sigma2 / base.sup_sigma2,
                            tol.sigma2_factor,
                            Basis::Derived,
                        ));
                    }
                    Expectation::Persistent => report.push(Criterion::at_least(
                        "planarity defect",
                        s.final_defect,
                        tol.defect_persistent,
                        Basis::Published,
                    )),
                }
            }
            Diagnostic::Terrace { origin, e } => {
                let speeds = terrace_speeds(&cfg.reaction)?;
                let (Some(c1), Some(c2)) = (speeds.c1, speeds.c2) else {
                    return Err(Error::InvalidInput("terrace sub-problems have no front speed".into()));
                };
                let t = terrace_detect(snaps, speeds.beta, *origin, *e)?;
                report.push(Criterion::holds(
                    "terrace detected",
                    t.verdict == TerraceVerdictKind::Terrace,
                    Basis::Published,
                ));
                report.push(Criterion::relative(
                    "speed of the upper front",
                    t.c_low.unwrap_or(f64::NAN),
                    c2,
                    tol.terrace_rel,
                    Basis::Derived,
                ));
                report.push(Criterion::relative(
                    "speed of the lower front",
                    t.c_high.unwrap_or(f64::NAN),
                    c1,
                    tol.terrace_rel,
                    Basis::Derived,
                ));
                report.push(Criterion::at_most(
                    "plateau deviation",
                    t.plateau_deviation,
                    tol.plateau,
                    Basis::Published,
                ));
            }
        }
    }
    Ok(report)
}
