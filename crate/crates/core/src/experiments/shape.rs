use serde::Serialize;

use super::{decreasing, tail};
use crate::error::{Error, Result};
use crate::frontspeed::{min_speed, Profile};
use crate::geometry::{unit, Point};
use crate::levelsets::{grad_graph, planarity_defect, ray_position, sigma_k_sup, Planarity, RayMode, DEFAULT_G_MIN};
use crate::reaction::ReactionTerm;
use crate::solver::{Field, Grid, Mode, Snapshot};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatteningSeries {
    pub lambdas: Vec<f64>,
    /// `(t, max |∇X_λ|)` for each level, in the order of `lambdas`.
    pub points: Vec<(f64, Vec<f64>)>,
    pub final_max: Vec<f64>,
    /// Per level, decreasing over `[T/2, T]`.
    pub decreasing: Vec<bool>,
    /// Column samples with a monotonicity or window flag.
    pub flagged: usize,
}

/// `max |∇_{x'} X_λ|` over the columns with `|x' - center| <= radius`.
pub fn flattening_series(snaps: &[Snapshot], lambdas: &[f64], center: f64, radius: f64) -> Result<FlatteningSeries> {
    let mut points = Vec::new();
    let mut flagged = 0;
    for s in snaps.iter().filter(|s| s.field.t > 0.0) {
        let g = &s.field.grid;
        if g.mode != Mode::Plane {
            return Err(Error::InvalidInput("flattening needs plane fields".into()));
        }
        let cols: Vec<f64> = (0..g.nx)
            .map(|i| g.center(i, 0)[0])
            .filter(|x| (x - center).abs() <= radius)
            .collect();
        let mut row = Vec::with_capacity(lambdas.len());
        for &l in lambdas {
            let samples = grad_graph(&s.field, l, &cols)?;
            flagged += samples.iter().filter(|q| !q.flag.is_clean()).count();
            row.push(samples.iter().fold(0.0f64, |m, q| m.max(q.slope.abs())));
        }
        points.push((s.field.t, row));
    }
    let late: Vec<f64> = tail(snaps, 0.5).iter().map(|s| s.field.t).collect();
    let decreasing = (0..lambdas.len())
        .map(|k| {
            let series: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| late.contains(&p.0))
                .map(|p| (p.0, p.1[k]))
                .collect();
            decreasing(&series, 1e-3).0
        })
        .collect();
    Ok(FlatteningSeries {
        lambdas: lambdas.to_vec(),
        final_max: points.last().map(|p| p.1.clone()).unwrap_or_default(),
        points,
        decreasing,
        flagged,
    })
}

/// Points of the `λ` level set on rays from `origin`, skipping rays that
/// leave the window above `λ`.
pub fn level_set_probes(field: &Field, origin: Point, angles: &[f64], lambda: f64) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for &a in angles {
        let e = unit(a);
        let r = ray_position(field, origin, e, lambda, RayMode::Furthest)?;
        if !r.window_limited && r.r > 0.0 {
            out.push([origin[0] + r.r * e[0], origin[1] + r.r * e[1]]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub sigma2: Vec<(f64, f64)>,
    pub defects: Vec<(f64, Vec<(Point, Planarity)>)>,
    pub final_sigma2: f64,
    /// Largest defect over the probes at the final time.
    pub final_defect: f64,
    pub sigma2_decreasing: bool,
}

/// `sup |σ_2|` and planarity defects in windows of `radius` centered on the
/// level set `λ` seen from `origin` along `angles`.
pub fn symmetry_report(
    snaps: &[Snapshot],
    origin: Point,
    angles: &[f64],
    lambda: f64,
    radius: f64,
) -> Result<SymmetryReport> {
    let mut sigma2 = Vec::new();
    let mut defects = Vec::new();
    for s in snaps.iter().filter(|s| s.field.t > 0.0) {
        let f = &s.field;
        sigma2.push((f.t, sigma_k_sup(f, 2)?));
        let mut row = Vec::new();
        for p in level_set_probes(f, origin, angles, lambda)? {
            match planarity_defect(f, p, radius, DEFAULT_G_MIN) {
                Ok(d) => row.push((p, d)),
                Err(Error::WindowGuard(_)) => {}
                Err(e) => return Err(e),
            }
        }
        defects.push((f.t, row));
    }
    let late: Vec<f64> = tail(snaps, 0.5).iter().map(|s| s.field.t).collect();
    let late_sigma: Vec<(f64, f64)> = sigma2.iter().copied().filter(|p| late.contains(&p.0)).collect();
    let final_defect = defects
        .last()
        .map_or(0.0, |(_, r)| r.iter().fold(0.0f64, |m, (_, d)| m.max(d.defect)));
    if defects.last().is_some_and(|(_, r)| r.is_empty()) {
        return Err(Error::WindowGuard("no planarity window fits at the final time".into()));
    }
    Ok(SymmetryReport {
        final_sigma2: sigma2.last().map_or(0.0, |p| p.1),
        sigma2_decreasing: decreasing(&late_sigma, 0.0).0,
        sigma2,
        defects,
        final_defect,
    })
}

/// Profile value with exponential tails past the sampled range.
fn profile_at(p: &Profile, z: f64) -> f64 {
    let n = p.z.len();
    let step = p.z[1] - p.z[0];
    if z <= p.z[0] {
        let (v, d) = (1.0 - p.phi[0], -p.psi[0]);
        return 1.0 - v * (d / v * (z - p.z[0])).exp();
    }
    if z >= p.z[n - 1] {
        let (v, d) = (p.phi[n - 1], p.psi[n - 1]);
        return v * (d / v * (z - p.z[n - 1])).exp();
    }
    let k = (((z - p.z[0]) / step) as usize).min(n - 2);
    let a = (z - p.z[k]) / step;
    // cubic Hermite with the sampled slopes
    let (y0, y1, d0, d1) = (p.phi[k], p.phi[k + 1], p.psi[k] * step, p.psi[k + 1] * step);
    let (a2, a3) = (a * a, a * a * a);
    (2.0 * a3 - 3.0 * a2 + 1.0) * y0 + (a3 - 2.0 * a2 + a) * d0 + (-2.0 * a3 + 3.0 * a2) * y1 + (a3 - a2) * d1
}

/// Leading truncation size of the discrete `σ_2` of a planted planar
/// front `φ(x·e)`: the stencils give `-(h²/4) φ'' φ'''' e_1² e_2²`, at most
/// `(h²/16) sup |φ'' φ''''|` over directions.
pub fn sigma2_floor(f: &ReactionTerm, h: f64) -> Result<f64> {
    let sol = min_speed(f)?;
    let c = sol.speed;
    let d2f = |s: f64| {
        let d = 1e-5;
        (f.derivative((s + d).min(1.0)) - f.derivative((s - d).max(0.0))) / ((s + d).min(1.0) - (s - d).max(0.0))
    };
    let mut sup: f64 = 0.0;
    for (phi, p1) in sol.profile.phi.iter().zip(&sol.profile.psi) {
        let p2 = -c * p1 - f.value(*phi);
        let p3 = -c * p2 - f.derivative(*phi) * p1;
        let p4 = -c * p3 - d2f(*phi) * p1 * p1 - f.derivative(*phi) * p2;
        sup = sup.max((p2 * p4).abs());
    }
    Ok(h * h / 16.0 * sup)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedBaseline {
    /// `(angle, sup |σ_2|)` per planted direction.
    pub per_angle: Vec<(f64, f64)>,
    pub sup_sigma2: f64,
    pub floor: f64,
}

/// `sup |σ_2|` of exact planar fronts `φ(x·e - s)` sampled on `grid`, with
/// the front through the middle of the window.
pub fn planted_sigma2_baseline(grid: &Grid, f: &ReactionTerm, angles: &[f64]) -> Result<PlantedBaseline> {
    let profile = min_speed(f)?.profile;
    let mid = [
        grid.origin[0] + grid.nx as f64 * grid.h / 2.0,
        grid.origin[1] + grid.ny as f64 * grid.h / 2.0,
    ];
    let mut per_angle = Vec::new();
    for &a in angles {
        let e = unit(a);
        let mut field = Field::constant(*grid, 0.0);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p = grid.center(i, j);
                let z = (p[0] - mid[0]) * e[0] + (p[1] - mid[1]) * e[1];
                field.values[j * grid.nx + i] = profile_at(&profile, z);
            }
        }
        per_angle.push((a, sigma_k_sup(&field, 2)?));
    }
    Ok(PlantedBaseline {
        sup_sigma2: per_angle.iter().fold(0.0, |m, p| m.max(p.1)),
        per_angle,
        floor: sigma2_floor(f, grid.h)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Gamma, SupportSpec};
    use crate::solver::{run, RunConfig};

    #[test]
    fn planted_baseline_matches_truncation_estimate() {
        let g = Grid::plane([-10.0, 10.0], [-10.0, 10.0], 0.25).unwrap();
        let b = planted_sigma2_baseline(&g, &ReactionTerm::logistic(), &[0.0, 0.3, std::f64::consts::FRAC_PI_4]).unwrap();
        assert!(b.per_angle[0].1 < 1e-12, "{b:?}");
        let ratio = b.per_angle[2].1 / b.floor;
        assert!(ratio > 0.5 && ratio < 2.0, "{b:?}");
    }

    #[test]
    fn flat_start_stays_flat() {
        let u = SupportSpec::subgraph(2, Gamma::Flat { level: 0.0 }).unwrap();
        let g = Grid::plane([-8.0, 8.0], [-8.0, 16.0], 0.25).unwrap();
        let cfg = RunConfig::new(u, ReactionTerm::logistic(), g, 4.0).with_even_snapshots(4);
        let (snaps, _) = run(&cfg).unwrap();
        let s = flattening_series(&snaps, &[0.3, 0.5], 0.0, 5.0).unwrap();
        assert!(s.final_max.iter().all(|v| *v < 1e-9), "{s:?}");
        assert_eq!(s.flagged, 0);
        let sym = symmetry_report(&snaps, [0.0, 0.0], &[0.0], 0.5, 3.0).unwrap();
        assert!(sym.final_defect < 1e-9 && sym.final_sigma2 < 1e-12, "{sym:?}");
    }
}
