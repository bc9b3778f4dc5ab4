use serde::Serialize;

use super::report::{Basis, Criterion};
use super::{require_clean, tail};
use crate::error::{Error, Result};
use crate::frontspeed::min_speed;
use crate::geometry::{check_hypothesis_u, direction_sets, predicted_speed, unit, LadderConfig, Point, SupportSpec};
use crate::levelsets::{ray_position, RayMode, RayPosition};
use crate::numerics::{fit_line, LineFit};
use crate::reaction::ReactionTerm;
use crate::solver::Snapshot;

pub const MIN_SNAPSHOTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedEstimate {
    /// Slope of `R_λ(t)` over `[T/2, T]`; `None` when window-limited.
    pub w_hat: Option<f64>,
    pub window_limited: bool,
    pub fit: Option<LineFit>,
    pub samples: Vec<(f64, RayPosition)>,
}

/// Least-squares slope of the ray position over the last half of the run.
pub fn estimate_speed(snaps: &[Snapshot], origin: Point, e: Point, lambda: f64, mode: RayMode) -> Result<SpeedEstimate> {
    if snaps.len() < MIN_SNAPSHOTS {
        return Err(Error::InvalidInput(format!(
            "speed estimates need at least {MIN_SNAPSHOTS} snapshots, got {}",
            snaps.len()
        )));
    }
    let last = snaps.last().unwrap().field.t;
    require_clean(snaps, last)?;
    let samples = snaps
        .iter()
        .filter(|s| s.field.t > 0.0)
        .map(|s| Ok((s.field.t, ray_position(&s.field, origin, e, lambda, mode)?)))
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<(f64, RayPosition)> = tail(snaps, 0.5)
        .iter()
        .map(|s| *samples.iter().find(|p| p.0 == s.field.t).unwrap())
        .collect();
    if used.len() < 3 {
        return Err(Error::InvalidInput("fewer than three snapshots in [T/2, T]".into()));
    }
    if used.iter().any(|p| p.1.window_limited) {
        return Ok(SpeedEstimate {
            w_hat: None,
            window_limited: true,
            fit: None,
            samples,
        });
    }
    let ts: Vec<f64> = used.iter().map(|p| p.0).collect();
    let rs: Vec<f64> = used.iter().map(|p| p.1.r).collect();
    let fit = fit_line(&ts, &rs);
    Ok(SpeedEstimate {
        w_hat: fit.map(|f| f.slope),
        window_limited: false,
        fit,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FgOptions {
    pub lambda: f64,
    /// Fan of directions, as angles from `e_N`.
    pub fan: Vec<f64>,
    pub rel_tol: f64,
    pub origin: Point,
    pub ladder: LadderConfig,
    /// Interior depth used by the hypothesis check.
    pub rho: f64,
    /// Directions used for the compact-set probes at the final time.
    pub probe_dirs: usize,
    /// Probes sit at `inner w T` and `outer w T`. The lag behind `w t` grows
    /// like `ln t`, so `inner` must leave a few front widths at moderate `T`.
    pub inner: f64,
    pub outer: f64,
}

impl Default for FgOptions {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            fan: vec![0.0],
            rel_tol: 0.08,
            origin: [0.0, 0.0],
            ladder: LadderConfig::default(),
            rho: 1.0,
            probe_dirs: 64,
            inner: 0.8,
            outer: 1.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FanResult {
    pub angle: f64,
    /// Infinite when `e` lies in the closed cone of unbounded directions.
    pub predicted: f64,
    pub estimate: SpeedEstimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FgReport {
    pub c_star: f64,
    pub hypotheses_hold: bool,
    pub fan: Vec<FanResult>,
    /// `min u(T, T x)` over in-window probes inside the envelope.
    pub inside_min: f64,
    /// Direction of the smallest inside probe.
    pub inside_argmin: f64,
    /// `max u(T, T x)` over in-window probes outside its closure.
    pub outside_max: f64,
    pub probes: usize,
}

impl FgReport {
    pub fn criteria(&self, rel_tol: f64) -> Vec<Criterion> {
        let mut out: Vec<Criterion> = self
            .fan
            .iter()
            .map(|f| {
                let name = format!("w at {:.3} rad", f.angle);
                match (f.predicted.is_finite(), f.estimate.w_hat) {
                    (true, Some(w)) => Criterion::relative(name, w, f.predicted, rel_tol, Basis::Published),
                    (false, _) => Criterion::holds(name + " window-limited", f.passed, Basis::Published),
                    (true, None) => Criterion::holds(name + " measured", false, Basis::Published),
                }
            })
            .collect();
        if self.probes > 0 {
            out.push(Criterion::at_least("min u inside envelope", self.inside_min, 0.9, Basis::Published));
            out.push(Criterion::at_most("max u outside envelope", self.outside_max, 0.1, Basis::Published));
        }
        out
    }
}

/// Measured speeds on a fan against the predicted `w(e)`, with the
/// compact-set form checked at the final snapshot.
pub fn verify_fg(snaps: &[Snapshot], u: &SupportSpec, f: &ReactionTerm, opts: &FgOptions) -> Result<FgReport> {
    let c_star = min_speed(f)?.speed;
    let hyp = check_hypothesis_u(u, opts.rho, &opts.ladder)?;
    if !hyp.holds {
        log::warn!("hypotheses on the support fail; deviations from w(e) are expected");
    }
    let dirs = direction_sets(u, &opts.ladder)?;
    let last = snaps
        .last()
        .ok_or_else(|| Error::InvalidInput("no snapshots".into()))?;
    let t = last.field.t;
    let mut fan = Vec::new();
    for &angle in &opts.fan {
        let e = unit(angle);
        let predicted = predicted_speed(e, &dirs, c_star)?;
        let estimate = estimate_speed(snaps, opts.origin, e, opts.lambda, RayMode::Furthest)?;
        let passed = if predicted.is_finite() {
            estimate
                .w_hat
                .is_some_and(|w| (w / predicted - 1.0).abs() <= opts.rel_tol)
        } else {
            // a supercritical point must already be invaded
            let p = [opts.origin[0] + 2.0 * c_star * t * e[0], opts.origin[1] + 2.0 * c_star * t * e[1]];
            estimate.window_limited && last.field.sample(p).is_none_or(|v| v >= 0.9)
        };
        fan.push(FanResult {
            angle,
            predicted,
            estimate,
            passed,
        });
    }
    let (mut inside_min, mut outside_max, mut probes) = (1.0f64, 0.0f64, 0);
    let mut inside_argmin = f64::NAN;
    for k in 0..opts.probe_dirs {
        let angle = -std::f64::consts::PI + k as f64 * std::f64::consts::TAU / opts.probe_dirs as f64;
        let e = unit(angle);
        let w = predicted_speed(e, &dirs, c_star)?;
        let at = |r: f64| last.field.sample([opts.origin[0] + r * t * e[0], opts.origin[1] + r * t * e[1]]);
        let inner = if w.is_finite() { opts.inner * w } else { 2.0 * c_star };
        if let Some(v) = at(inner) {
            if v < inside_min {
                inside_min = v;
                inside_argmin = angle;
            }
            probes += 1;
        }
        if w.is_finite() {
            if let Some(v) = at(opts.outer * w) {
                outside_max = outside_max.max(v);
                probes += 1;
            }
        }
    }
    Ok(FgReport {
        c_star,
        hypotheses_hold: hyp.holds,
        fan,
        inside_min,
        inside_argmin,
        outside_max,
        probes,
    })
}
