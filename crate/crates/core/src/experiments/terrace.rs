use serde::Serialize;

use super::speed::estimate_speed;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::levelsets::{ray_position, RayMode};
use crate::solver::Snapshot;

/// Relative gap below which two measured speeds count as one front.
pub const SAME_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerraceVerdictKind {
    Terrace,
    NoTerrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerraceReport {
    pub beta: f64,
    /// Speed of the `(1 + β)/2` level.
    pub c_low: Option<f64>,
    /// Speed of the `β/2` level.
    pub c_high: Option<f64>,
    /// `max |u - β|` on the middle half between the two levels at the end.
    pub plateau_deviation: f64,
    pub verdict: TerraceVerdictKind,
}

/// Speeds of the levels `β/2` and `(1 + β)/2` along `origin + r e`, and the
/// flatness of the stretch between them.
pub fn terrace_detect(snaps: &[Snapshot], beta: f64, origin: Point, e: Point) -> Result<TerraceReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain {
            value: beta,
            domain: "(0, 1)",
        });
    }
    let (lo_level, hi_level) = (beta / 2.0, (1.0 + beta) / 2.0);
    let outer = estimate_speed(snaps, origin, e, lo_level, RayMode::Furthest)?;
    let inner = estimate_speed(snaps, origin, e, hi_level, RayMode::Furthest)?;
    let last = &snaps.last().unwrap().field;
    let r_out = ray_position(last, origin, e, lo_level, RayMode::Furthest)?.r;
    let r_in = ray_position(last, origin, e, hi_level, RayMode::Furthest)?.r;
    let (a, b) = (r_in + 0.25 * (r_out - r_in), r_out - 0.25 * (r_out - r_in));
    let mut dev: f64 = 0.0;
    if b > a {
        let n = ((b - a) / (last.grid.h / 2.0)).ceil() as usize + 1;
        for k in 0..n {
            let r = a + (b - a) * k as f64 / (n - 1) as f64;
            if let Some(v) = last.sample([origin[0] + r * e[0], origin[1] + r * e[1]]) {
                dev = dev.max((v - beta).abs());
            }
        }
    } else {
        dev = f64::INFINITY;
    }
    let verdict = match (inner.w_hat, outer.w_hat) {
        (Some(lo), Some(hi)) if hi > lo * (1.0 + SAME_SPEED) => TerraceVerdictKind::Terrace,
        _ => TerraceVerdictKind::NoTerrace,
    };
    Ok(TerraceReport {
        beta,
        c_low: inner.w_hat,
        c_high: outer.w_hat,
        plateau_deviation: dev,
        verdict,
    })
}
