//! Level-set geometry of fields: upper level sets, graph positions
//! `X_λ(t, x')`, ray positions, Hessian symmetric functions and planarity.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{angle_between, norm, Point, RasterMask};
use crate::solver::{Field, Mode};

/// Gradient floor below which cells are ignored by `planarity_defect`.
pub const DEFAULT_G_MIN: f64 = 1e-4;
/// Increases smaller than this do not count as monotonicity violations.
const MONOTONE_TOL: f64 = 1e-12;

fn check_level(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            value: lambda,
            domain: "(0, 1)",
        })
    }
}

/// `E_λ = {u > λ}` on the field's cells.
pub fn upper_level_set(field: &Field, lambda: f64) -> Result<RasterMask> {
    check_level(lambda)?;
    let mut m = field.grid.empty_mask();
    for (c, v) in m.cells.iter_mut().zip(&field.values) {
        *c = *v > lambda;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum ColumnFlag {
    Monotone,
    /// Largest increase of `u` going up the column.
    NonMonotone { violation: f64 },
    /// `u > λ` up to the top of the window.
    AboveToTop,
    /// `u <= λ` on the whole column.
    NowhereAbove,
}

impl ColumnFlag {
    pub fn is_clean(&self) -> bool {
        matches!(self, ColumnFlag::Monotone)
    }

    fn worse(self, other: Self) -> Self {
        match (self, other) {
            (ColumnFlag::Monotone, o) => o,
            (s, ColumnFlag::Monotone) => s,
            (ColumnFlag::NonMonotone { violation: a }, ColumnFlag::NonMonotone { violation: b }) => {
                ColumnFlag::NonMonotone {
                    violation: a.max(b),
                }
            }
            (ColumnFlag::NonMonotone { .. }, o) => o,
            (s, _) => s,
        }
    }
}

/// `X_λ` on one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphPosition {
    pub x_prime: f64,
    pub position: f64,
    pub flag: ColumnFlag,
}

fn column_position(field: &Field, i: usize, lambda: f64) -> (f64, ColumnFlag) {
    let g = &field.grid;
    let y = |j: usize| g.origin[1] + (j as f64 + 0.5) * g.h;
    let violation = (1..g.ny)
        .map(|j| field.get(i, j) - field.get(i, j - 1))
        .fold(0.0, f64::max);
    let mut flag = if violation > MONOTONE_TOL {
        ColumnFlag::NonMonotone { violation }
    } else {
        ColumnFlag::Monotone
    };
    let top = g.ny - 1;
    if field.get(i, top) > lambda {
        return (y(top), flag.worse(ColumnFlag::AboveToTop));
    }
    for j in (0..top).rev() {
        let (a, b) = (field.get(i, j), field.get(i, j + 1));
        if a > lambda {
            return (y(j) + g.h * (a - lambda) / (a - b), flag);
        }
    }
    flag = flag.worse(ColumnFlag::NowhereAbove);
    (y(0), flag)
}

/// Topmost crossing of `λ` above `x'`, linear in `x_N` within a column and
/// linear in `x'` between the two nearest columns.
pub fn graph_position(field: &Field, lambda: f64, x_prime: f64) -> Result<GraphPosition> {
    check_level(lambda)?;
    let g = &field.grid;
    if g.mode != Mode::Plane {
        return Err(Error::InvalidInput("graph positions need a plane field".into()));
    }
    let fi = (x_prime - g.origin[0]) / g.h - 0.5;
    if !(fi >= -0.5 && fi <= g.nx as f64 - 0.5) {
        return Err(Error::InvalidInput(format!("column x' = {x_prime} is outside the window")));
    }
    // constant next to the faces, as for the mirror ghosts
    let fi = fi.clamp(0.0, (g.nx - 1) as f64);
    let i0 = (fi.floor() as usize).min(g.nx - 2);
    let a = fi - i0 as f64;
    let (p0, f0) = column_position(field, i0, lambda);
    let (p1, f1) = column_position(field, i0 + 1, lambda);
    Ok(GraphPosition {
        x_prime,
        position: (1.0 - a) * p0 + a * p1,
        flag: f0.worse(f1),
    })
}

/// `X_λ` and its `x'` derivative at one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphSample {
    pub x_prime: f64,
    pub position: f64,
    pub slope: f64,
    pub flag: ColumnFlag,
}

/// Centered differences of `X_λ` with step `h` around each requested column.
pub fn grad_graph(field: &Field, lambda: f64, columns: &[f64]) -> Result<Vec<GraphSample>> {
    let h = field.grid.h;
    columns
        .iter()
        .map(|&x| {
            let mid = graph_position(field, lambda, x)?;
            let lo = graph_position(field, lambda, x - h)?;
            let hi = graph_position(field, lambda, x + h)?;
            Ok(GraphSample {
                x_prime: x,
                position: mid.position,
                slope: (hi.position - lo.position) / (2.0 * h),
                flag: mid.flag.worse(lo.flag).worse(hi.flag),
            })
        })
        .collect()
}

/// How a ray position is read off the samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayMode {
    /// `sup {r : u(t, o + r e) > λ}`.
    Furthest,
    /// `inf {r : u(t, o + r e) <= λ}`.
    FirstExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayPosition {
    pub r: f64,
    /// The answer is only a lower bound set by the window.
    pub window_limited: bool,
}

/// Position of the level `λ` along the ray `origin + r e`, sampled every
/// half cell with linear interpolation at the crossing.
pub fn ray_position(field: &Field, origin: Point, e: Point, lambda: f64, mode: RayMode) -> Result<RayPosition> {
    check_level(lambda)?;
    let n = norm(e);
    if !(n > 0.0) {
        return Err(Error::InvalidInput("ray direction must be nonzero".into()));
    }
    let e = [e[0] / n, e[1] / n];
    let ds = field.grid.h / 2.0;
    let at = |r: f64| field.sample([origin[0] + r * e[0], origin[1] + r * e[1]]);
    let Some(mut prev) = at(0.0) else {
        return Err(Error::InvalidInput("ray origin is outside the window".into()));
    };
    if mode == RayMode::FirstExit && prev <= lambda {
        return Ok(RayPosition {
            r: 0.0,
            window_limited: false,
        });
    }
    let mut last_above = if prev > lambda { Some((0.0, prev)) } else { None };
    let mut crossing: Option<f64> = None;
    let mut k = 1usize;
    let mut r_prev = 0.0;
    while let Some(v) = at(k as f64 * ds) {
        let r = k as f64 * ds;
        match mode {
            RayMode::FirstExit => {
                if v <= lambda {
                    return Ok(RayPosition {
                        r: r_prev + ds * (prev - lambda) / (prev - v),
                        window_limited: false,
                    });
                }
            }
            RayMode::Furthest => {
                if v > lambda {
                    last_above = Some((r, v));
                    crossing = None;
                } else if prev > lambda {
                    crossing = Some(r_prev + ds * (prev - lambda) / (prev - v));
                }
            }
        }
        prev = v;
        r_prev = r;
        k += 1;
    }
    match (mode, last_above, crossing) {
        (RayMode::Furthest, _, Some(r)) => Ok(RayPosition {
            r,
            window_limited: false,
        }),
        (RayMode::Furthest, None, None) => Ok(RayPosition {
            r: 0.0,
            window_limited: false,
        }),
        _ => Ok(RayPosition {
            r: r_prev,
            window_limited: true,
        }),
    }
}

/// Elementary symmetric polynomial of degree `k` of `values`.
fn elementary(values: &[f64], k: usize) -> f64 {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &v in values {
        for j in (1..=k).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[k]
}

/// `σ_k(D²u)` on interior cells; the one-cell margin is zero. Plane fields
/// use the five-point second differences and the four-point cross term;
/// radial fields use the eigenvalues `u_rr` and `u_r / r` (`N - 1` times).
pub fn sigma_k_field(field: &Field, k: usize) -> Result<Vec<f64>> {
    let g = &field.grid;
    let n = g.mode.dimension();
    if k < 2 || k > n {
        return Err(Error::InvalidInput(format!("sigma_k needs 2 <= k <= {n}, got {k}")));
    }
    let h2 = g.h * g.h;
    let mut out = vec![0.0; g.len()];
    match g.mode {
        Mode::Plane => {
            for j in 1..g.ny - 1 {
                for i in 1..g.nx - 1 {
                    let u = |di: isize, dj: isize| {
                        field.get((i as isize + di) as usize, (j as isize + dj) as usize)
                    };
                    let c = u(0, 0);
                    let uxx = (u(1, 0) - 2.0 * c + u(-1, 0)) / h2;
                    let uyy = (u(0, 1) - 2.0 * c + u(0, -1)) / h2;
                    let uxy = (u(1, 1) - u(1, -1) - u(-1, 1) + u(-1, -1)) / (4.0 * h2);
                    out[j * g.nx + i] = uxx * uyy - uxy * uxy;
                }
            }
        }
        Mode::Radial { .. } => {
            let mut eig = vec![0.0; n];
            for j in 1..g.ny - 1 {
                let r = (j as f64 + 0.5) * g.h;
                let (a, c, b) = (field.get(0, j - 1), field.get(0, j), field.get(0, j + 1));
                eig[0] = (a - 2.0 * c + b) / h2;
                let ur = (b - a) / (2.0 * g.h);
                eig[1..].iter_mut().for_each(|e| *e = ur / r);
                out[j] = elementary(&eig, k);
            }
        }
        Mode::Line => unreachable!("k <= 1 was rejected"),
    }
    Ok(out)
}

/// `sup |σ_k|` over interior cells.
pub fn sigma_k_sup(field: &Field, k: usize) -> Result<f64> {
    Ok(sigma_k_field(field, k)?.iter().fold(0.0, |a, v| a.max(v.abs())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Planarity {
    /// Largest angle between two gradient directions in the window.
    pub defect: f64,
    /// Cells with `|∇u| >= g_min`.
    pub cells: usize,
    pub near_constant: bool,
}

/// Largest pairwise angle among directions given by their angles.
fn max_pairwise_angle(angles: &mut [f64]) -> f64 {
    use std::f64::consts::{PI, TAU};
    if angles.len() < 2 {
        return 0.0;
    }
    angles.iter_mut().for_each(|a| *a = a.rem_euclid(TAU));
    angles.sort_by(f64::total_cmp);
    let mut best: f64 = 0.0;
    for &a in angles.iter() {
        // the partner farthest from a is the one nearest to its antipode
        let target = (a + PI).rem_euclid(TAU);
        let k = angles.partition_point(|x| *x < target);
        for idx in [k % angles.len(), (k + angles.len() - 1) % angles.len()] {
            best = best.max(angle_between(a, angles[idx]));
        }
    }
    best
}

/// Gradient-direction coherence on the cells within `radius` of `center`.
/// Gradients use centered differences, so the window keeps a one-cell margin.
pub fn planarity_defect(field: &Field, center: Point, radius: f64, g_min: f64) -> Result<Planarity> {
    let g = &field.grid;
    if g.mode != Mode::Plane {
        return Err(Error::InvalidInput("planarity defect needs a plane field".into()));
    }
    let (ci, cj) = field.cell_coords(center);
    let reach = radius / g.h;
    let inside = |f: f64, n: usize| f - reach >= 1.0 && f + reach <= (n - 2) as f64;
    if !(inside(ci, g.nx) && inside(cj, g.ny)) {
        return Err(Error::WindowGuard(format!(
            "planarity window of radius {radius} around {center:?} leaves the grid"
        )));
    }
    let mut angles = Vec::new();
    let (i0, i1) = ((ci - reach).ceil() as usize, (ci + reach).floor() as usize);
    let (j0, j1) = ((cj - reach).ceil() as usize, (cj + reach).floor() as usize);
    for j in j0..=j1 {
        for i in i0..=i1 {
            let p = g.center(i, j);
            if (p[0] - center[0]).hypot(p[1] - center[1]) > radius {
                continue;
            }
            let gx = (field.get(i + 1, j) - field.get(i - 1, j)) / (2.0 * g.h);
            let gy = (field.get(i, j + 1) - field.get(i, j - 1)) / (2.0 * g.h);
            if gx.hypot(gy) >= g_min {
                angles.push(gy.atan2(gx));
            }
        }
    }
    let cells = angles.len();
    Ok(Planarity {
        defect: max_pairwise_angle(&mut angles),
        cells,
        near_constant: cells == 0,
    })
}

/// Writes `t,x_prime,position,slope,flag` rows.
pub fn write_graph_csv<W: Write>(out: &mut W, t: f64, samples: &[GraphSample]) -> std::io::Result<()> {
    for s in samples {
        let flag = match s.flag {
            ColumnFlag::Monotone => "ok".to_string(),
            ColumnFlag::NonMonotone { violation } => format!("non_monotone:{violation:e}"),
            ColumnFlag::AboveToTop => "above_to_top".into(),
            ColumnFlag::NowhereAbove => "nowhere_above".into(),
        };
        writeln!(out, "{t},{},{},{},{flag}", s.x_prime, s.position, s.slope)?;
    }
    Ok(())
}

/// Writes `t,angle,r,window_limited` rows; `angle` is measured from `e_N`.
pub fn write_ray_csv<W: Write>(out: &mut W, rows: &[(f64, f64, RayPosition)]) -> std::io::Result<()> {
    for (t, angle, p) in rows {
        writeln!(out, "{t},{angle},{},{}", p.r, p.window_limited)?;
    }
    Ok(())
}

/// Writes `t,value` rows, for `sup |σ_2|` series.
pub fn write_series_csv<W: Write>(out: &mut W, rows: &[(f64, f64)]) -> std::io::Result<()> {
    for (t, v) in rows {
        writeln!(out, "{t},{v}")?;
    }
    Ok(())
}

/// Writes `t,cx,cy,defect,cells` rows.
pub fn write_defect_csv<W: Write>(out: &mut W, rows: &[(f64, Point, Planarity)]) -> std::io::Result<()> {
    for (t, c, p) in rows {
        writeln!(out, "{t},{},{},{},{}", c[0], c[1], p.defect, p.cells)?;
    }
    Ok(())
}
