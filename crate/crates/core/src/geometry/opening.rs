use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{
    add, angle_of, direction_sets, dot, norm, scale, sub, unit, DirClass, LadderConfig, Point,
    SupportKind, SupportSpec,
};
use crate::error::{Error, Result};

/// `O(x)` together with the projections of `x` onto the closure of `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    /// In `[-1, 1]`, or `-inf` for an empty or singleton `U`.
    pub value: f64,
    pub projections: Vec<Point>,
    /// The sup over `y` was truncated and may be larger.
    pub lower_bound_only: bool,
}

const CIRCLE_SAMPLES: usize = 1024;
const GRAPH_SAMPLES: usize = 2048;
const NEAR_ANGLES: usize = 720;
const NEAR_RADII: usize = 40;

fn is_singleton(u: &SupportSpec) -> bool {
    match &u.kind {
        SupportKind::BallUnion { centers, radii } => {
            !centers.is_empty()
                && radii.iter().all(|r| *r == 0.0)
                && centers.iter().all(|c| u.pt(*c) == u.pt(centers[0]))
        }
        SupportKind::Mask(m) => m.count() == 1,
        _ => false,
    }
}

fn mask_touches_edge(u: &SupportSpec) -> bool {
    let SupportKind::Mask(m) = &u.kind else {
        return false;
    };
    (0..m.ny).any(|j| m.get(0, j) || m.get(m.nx - 1, j))
        || (0..m.nx).any(|i| m.get(i, 0) || m.get(i, m.ny - 1))
}

/// Golden-section refinement of a local minimum of `g` in `[a, b]`.
fn golden<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, g: F) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..50 {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    if gc < gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// Nearest points of the closure of `U` to `x` (sampled), and `dist(x, U)`.
pub(crate) fn projections(u: &SupportSpec, x: Point) -> (f64, Vec<Point>) {
    let x = u.pt(x);
    match &u.kind {
        SupportKind::HalfSpace { normal, offset } => {
            let e = dot(x, *normal) - offset;
            return (e.max(0.0), vec![sub(x, scale(*normal, e.max(0.0)))]);
        }
        SupportKind::VShaped { first, second } => {
            let mut out: Vec<(f64, Point)> = Vec::new();
            for h in [first, second] {
                let e = h.excess(x).max(0.0);
                out.push((e, sub(x, scale(h.normal, e))));
            }
            let d = out[0].0.min(out[1].0);
            let pts = out
                .into_iter()
                .filter(|(e, _)| *e <= d + 1e-12 * (1.0 + d))
                .map(|(_, p)| p)
                .collect();
            return (d, pts);
        }
        SupportKind::BallUnion { centers, radii } => {
            let gaps: Vec<f64> = centers
                .iter()
                .zip(radii)
                .map(|(c, r)| (norm(sub(x, u.pt(*c))) - r).max(0.0))
                .collect();
            let d = gaps.iter().copied().fold(f64::INFINITY, f64::min);
            let pts = centers
                .iter()
                .zip(radii)
                .zip(&gaps)
                .filter(|(_, g)| **g <= d + 1e-12 * (1.0 + d))
                .map(|((c, r), _)| {
                    let c = u.pt(*c);
                    let v = sub(x, c);
                    let n = norm(v);
                    if n == 0.0 {
                        c
                    } else {
                        add(c, scale(v, r / n))
                    }
                })
                .collect();
            return (d, pts);
        }
        SupportKind::Mask(m) => {
            let d = m.distance_to_occupied(x);
            let mut pts: Vec<Point> = Vec::new();
            let mut seen: Vec<i64> = Vec::new();
            for j in 0..m.ny {
                for i in 0..m.nx {
                    if !m.get(i, j) {
                        continue;
                    }
                    let c = m.center(i, j);
                    if norm(sub(x, c)) <= d + 0.5 * m.h {
                        let key = (angle_of(sub(x, c)) * 100.0).round() as i64;
                        if !seen.contains(&key) {
                            seen.push(key);
                            pts.push(c);
                        }
                    }
                }
            }
            return (d, pts);
        }
        SupportKind::Subgraph { gamma } if u.dim == 2 => {
            let d0 = (x[1] - gamma.value(x[0])).max(0.0);
            if d0 == 0.0 {
                return (0.0, vec![x]);
            }
            let g = |y: f64| (x[0] - y).hypot((x[1] - gamma.value(y)).max(0.0));
            let step = 2.0 * d0 / GRAPH_SAMPLES as f64;
            let vals: Vec<f64> = (0..=GRAPH_SAMPLES)
                .map(|k| g(x[0] - d0 + k as f64 * step))
                .collect();
            let mut mins: Vec<(f64, f64)> = Vec::new();
            for k in 0..=GRAPH_SAMPLES {
                let left = if k == 0 { f64::INFINITY } else { vals[k - 1] };
                let right = if k == GRAPH_SAMPLES { f64::INFINITY } else { vals[k + 1] };
                if vals[k] <= left && vals[k] <= right {
                    let y = x[0] - d0 + k as f64 * step;
                    mins.push(golden(y - step, y + step, g));
                }
            }
            let d = mins.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
            let tol = 1e-7 * (1.0 + d);
            let mut pts: Vec<Point> = Vec::new();
            for (y, v) in mins {
                if v <= d + tol {
                    let p = [y, gamma.value(y)];
                    if pts.iter().all(|q| norm(sub(*q, p)) > 1e-6 * (1.0 + d)) {
                        pts.push(p);
                    }
                }
            }
            return (d, pts);
        }
        _ => {}
    }
    let d = u.distance(x);
    if d == 0.0 {
        return (0.0, vec![x]);
    }
    if u.dim == 1 {
        let pts = [[0.0, x[1] + d], [0.0, x[1] - d]]
            .into_iter()
            .filter(|p| u.distance(*p) <= 1e-9 * (1.0 + d))
            .collect();
        return (d, pts);
    }
    let m = CIRCLE_SAMPLES;
    let dphi = 2.0 * PI / m as f64;
    let tol = 4.0 * d * (1.0 - dphi.cos()) + 1e-9 * (1.0 + d);
    let vals: Vec<f64> = (0..m)
        .map(|k| u.distance(add(x, scale(unit(k as f64 * dphi), d))))
        .collect();
    let hit: Vec<bool> = vals.iter().map(|v| *v <= tol).collect();
    let mut pts = Vec::new();
    if hit.iter().all(|h| *h) {
        for k in (0..m).step_by(8) {
            pts.push(add(x, scale(unit(k as f64 * dphi), d)));
        }
        return (d, pts);
    }
    let start = hit.iter().position(|h| !*h).unwrap_or(0);
    let mut run: Vec<usize> = Vec::new();
    for s in 1..=m {
        let k = (start + s) % m;
        if hit[k] {
            run.push(k);
        } else if !run.is_empty() {
            let best = *run
                .iter()
                .min_by(|a, b| vals[**a].partial_cmp(&vals[**b]).unwrap())
                .unwrap();
            pts.push(add(x, scale(unit(best as f64 * dphi), d)));
            for k in run.iter().step_by(8) {
                if *k != best {
                    pts.push(add(x, scale(unit(*k as f64 * dphi), d)));
                }
            }
            run.clear();
        }
    }
    (d, pts)
}

/// `sup_{v . n <= 0} nu . v` over unit `v`.
fn half_plane_sup(nu: Point, n: Point) -> f64 {
    if dot(nu, n) <= 0.0 {
        return 1.0;
    }
    // |sin| of the angle between nu and n; snapped to 0 when parallel
    let s = (nu[0] * n[1] - nu[1] * n[0]).abs();
    if s < 1e-12 {
        0.0
    } else {
        s
    }
}

/// Directions in which `U` is unbounded in the liminf sense; these are the
/// limits of `(y - xi) / |y - xi|` as `|y|` grows.
pub(crate) fn far_directions(u: &SupportSpec) -> Result<Vec<Point>> {
    if u.is_bounded() {
        return Ok(Vec::new());
    }
    let cfg = LadderConfig::default();
    let dirs = direction_sets(u, &cfg)?;
    Ok(dirs
        .samples
        .iter()
        .filter(|s| s.class == DirClass::Unbounded || s.min <= dirs.eps)
        .map(|s| s.e())
        .collect())
}

fn near_field(u: &SupportSpec, xi: Point, nu: Point, reach: f64, mut best: f64) -> f64 {
    let dirs: Vec<Point> = if u.dim == 1 {
        vec![[0.0, 1.0], [0.0, -1.0]]
    } else {
        (0..NEAR_ANGLES)
            .map(|k| unit(k as f64 * 2.0 * PI / NEAR_ANGLES as f64))
            .collect()
    };
    let r0 = 1e-3;
    let ratio = (reach / r0).powf(1.0 / (NEAR_RADII - 1) as f64);
    for v in dirs {
        let c = dot(nu, v);
        if c <= best {
            continue;
        }
        let mut r = r0;
        for _ in 0..NEAR_RADII {
            if u.contains(add(xi, scale(v, r))) {
                best = c;
                break;
            }
            r *= ratio;
        }
    }
    best
}

fn opening_with(u: &SupportSpec, x: Point, far: &[Point]) -> Opening {
    if u.is_empty() || is_singleton(u) {
        return Opening {
            value: f64::NEG_INFINITY,
            projections: Vec::new(),
            lower_bound_only: false,
        };
    }
    let x = u.pt(x);
    let (d, pts) = projections(u, x);
    let mut value = f64::NEG_INFINITY;
    for xi in &pts {
        let nu = scale(sub(x, *xi), 1.0 / norm(sub(x, *xi)));
        let v = match &u.kind {
            SupportKind::HalfSpace { normal, .. } => half_plane_sup(nu, *normal),
            SupportKind::VShaped { first, second } => {
                half_plane_sup(nu, first.normal).max(half_plane_sup(nu, second.normal))
            }
            _ => {
                let far_sup = far.iter().map(|v| dot(nu, *v)).fold(-1.0, f64::max);
                near_field(u, *xi, nu, 16.0 * (d + 1.0), far_sup)
            }
        };
        value = value.max(v);
    }
    Opening {
        value: value.clamp(-1.0, 1.0),
        projections: pts,
        lower_bound_only: mask_touches_edge(u),
    }
}

/// Opening function at `x`, which must lie outside the closure of `U`.
pub fn opening(u: &SupportSpec, x: Point) -> Result<Opening> {
    if !u.is_empty() && u.distance(x) <= 0.0 {
        return Err(Error::InvalidInput(
            "opening needs a point outside the closure of U".into(),
        ));
    }
    let far = far_directions(u)?;
    Ok(opening_with(u, x, &far))
}

/// A point of `U` to cast rays from, preferring deep interior points.
fn core_point(u: &SupportSpec) -> Option<Point> {
    match &u.kind {
        SupportKind::BallUnion { centers, .. } => return centers.first().map(|c| u.pt(*c)),
        SupportKind::HalfSpace { normal, offset } => return Some(scale(*normal, offset - 1.0)),
        SupportKind::Mask(m) => {
            let d = super::distance_transform(&{
                let mut c = m.clone();
                c.cells.iter_mut().for_each(|v| *v = !*v);
                c
            });
            let (k, _) = d
                .iter()
                .enumerate()
                .filter(|(k, _)| m.cells[*k])
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
            return Some(m.center(k % m.nx, k / m.nx));
        }
        _ => {}
    }
    let mut best: Option<(f64, Point)> = None;
    for j in -20..=20 {
        for i in -20..=20 {
            let p = u.pt([i as f64, j as f64]);
            let s = u.signed_distance(p);
            if s <= 0.0 && best.is_none_or(|b| s < b.0 - 1e-12 || (s <= b.0 && norm(p) < norm(b.1))) {
                best = Some((s, p));
            }
        }
    }
    best.map(|b| b.1)
}

/// Points of `{dist(x, U) = R}` found along `n_rays` rays from a core point
/// of `U`. For masks only points inside the mask window count.
pub fn level_set_points(u: &SupportSpec, r: f64, n_rays: usize) -> Vec<Point> {
    let Some(core) = core_point(u) else {
        return Vec::new();
    };
    let window = match &u.kind {
        SupportKind::Mask(m) => Some(m.window()),
        _ => None,
    };
    let angles: Vec<f64> = if u.dim == 1 {
        vec![0.0, PI]
    } else {
        (0..n_rays).map(|k| -PI + (k as f64 + 0.5) * 2.0 * PI / n_rays as f64).collect()
    };
    let t_max = 8.0 * r + 4.0 * norm(core) + 200.0;
    let step = (r / 4.0).max(0.05);
    angles
        .par_iter()
        .flat_map_iter(|&a| {
            let e = unit(a);
            let at = |t: f64| add(core, scale(e, t));
            let g = |t: f64| u.distance(at(t)) - r;
            let mut out = Vec::new();
            let mut t = 0.0;
            let mut gt = g(0.0);
            while t < t_max {
                let t1 = t + step;
                if let Some(w) = &window {
                    if !w.contains(at(t1)) {
                        break;
                    }
                }
                let g1 = g(t1);
                if (gt < 0.0) != (g1 < 0.0) {
                    let (mut lo, mut hi) = (t, t1);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if (g(mid) < 0.0) == (gt < 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    out.push(at(0.5 * (lo + hi)));
                }
                t = t1;
                gt = g1;
            }
            out
        })
        .collect()
}

/// `R -> sup{O(x) : dist(x, U) = R}` and the verdict on its limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallconeProfile {
    pub radii: Vec<f64>,
    /// `-inf` where no level-set point was found.
    pub values: Vec<f64>,
    pub lower_bound_only: bool,
    pub nonincreasing: bool,
    /// Nonincreasing with last value at most `eps`.
    pub holds: bool,
}

/// Slack allowed for sampling noise when checking monotonicity.
const PROFILE_SLACK: f64 = 0.02;

pub fn ballcone_profile(u: &SupportSpec, radii: &[f64], eps: f64) -> Result<BallconeProfile> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 0.0 {
        return Err(Error::InvalidInput(
            "ballcone radii must be positive and increasing".into(),
        ));
    }
    let far = far_directions(u)?;
    let mut values = Vec::with_capacity(radii.len());
    let mut lower = false;
    for &r in radii {
        let pts = level_set_points(u, r, 128);
        let ops: Vec<Opening> = pts.par_iter().map(|p| opening_with(u, *p, &far)).collect();
        lower |= ops.iter().any(|o| o.lower_bound_only);
        values.push(ops.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max));
    }
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] + PROFILE_SLACK);
    let last = *values.last().unwrap();
    Ok(BallconeProfile {
        radii: radii.to_vec(),
        values,
        lower_bound_only: lower,
        nonincreasing,
        holds: nonincreasing && last <= eps,
    })
}

/// Sampled accumulation directions of `(x - xi) / |x - xi|` for far points
/// `x`, binned on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDirections {
    pub dim: usize,
    pub bins: Vec<bool>,
    /// No far points were found: `U` is relatively dense or the window is
    /// too small.
    pub relatively_dense: bool,
}

impl ProjectionDirections {
    pub fn bin_width(&self) -> f64 {
        2.0 * PI / self.bins.len() as f64
    }

    fn bin_of(&self, angle: f64) -> usize {
        let n = self.bins.len();
        (((angle + PI) / self.bin_width()).round() as i64).rem_euclid(n as i64) as usize
    }

    /// Center angle of every occupied bin.
    pub fn angles(&self) -> Vec<f64> {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(k, _)| -PI + k as f64 * self.bin_width())
            .collect()
    }

    pub fn contains(&self, angle: f64) -> bool {
        self.bins[self.bin_of(angle)]
    }

    pub fn count(&self) -> usize {
        self.bins.iter().filter(|b| **b).count()
    }

    pub fn is_full(&self) -> bool {
        self.bins.iter().all(|b| *b)
    }
}

const DIRECTION_BINS: usize = 32;

pub fn monotonicity_directions(u: &SupportSpec, r_far: f64) -> Result<ProjectionDirections> {
    if !(r_far >= 100.0) {
        return Err(Error::InvalidInput(format!(
            "R_far must be at least 100, got {r_far}"
        )));
    }
    let pts = level_set_points(u, r_far, 512);
    let mut out = ProjectionDirections {
        dim: u.dim,
        bins: vec![false; if u.dim == 1 { 2 } else { DIRECTION_BINS }],
        relatively_dense: pts.is_empty(),
    };
    let dirs: Vec<Vec<f64>> = pts
        .par_iter()
        .map(|x| {
            let (_, xis) = projections(u, *x);
            xis.iter()
                .map(|xi| angle_of(sub(u.pt(*x), *xi)))
                .collect()
        })
        .collect();
    for a in dirs.into_iter().flatten() {
        let k = out.bin_of(a);
        out.bins[k] = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{Gamma, RasterMask};
    use super::*;

    #[test]
    fn convex_sets_have_nonpositive_opening() {
        let h = SupportSpec::half_space(2, [0.3, 1.0], 0.5).unwrap();
        for x in [[0.0, 3.0], [5.0, 2.0], [-4.0, 9.0]] {
            assert!(opening(&h, x).unwrap().value <= 0.0);
        }
        let b = SupportSpec::ball(2, [1.0, 1.0], 2.0).unwrap();
        for x in [[5.0, 1.0], [-3.0, -3.0]] {
            let o = opening(&b, x).unwrap();
            assert!(o.value <= 0.0 && o.value > -0.05, "{}", o.value);
            assert_eq!(o.projections.len(), 1);
        }
    }

    #[test]
    fn singleton_and_empty_sets() {
        let p = SupportSpec::ball(2, [0.0, 0.0], 0.0).unwrap();
        assert_eq!(opening(&p, [1.0, 1.0]).unwrap().value, f64::NEG_INFINITY);
        let e = SupportSpec::new(
            2,
            SupportKind::BallUnion {
                centers: vec![],
                radii: vec![],
            },
        )
        .unwrap();
        assert_eq!(opening(&e, [1.0, 1.0]).unwrap().value, f64::NEG_INFINITY);
    }

    #[test]
    fn right_v_opening_is_one_at_every_distance() {
        let v = SupportSpec::right_v().unwrap();
        for a in [0.5, 3.0, 40.0] {
            let o = opening(&v, [0.0, a]).unwrap();
            assert_eq!(o.projections.len(), 2);
            assert!((o.value - 1.0).abs() < 1e-12, "{}", o.value);
        }
        // the same set as a cone subgraph, through the sampled path
        let c = SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 1.0 }).unwrap();
        let o = opening(&c, [0.0, 3.0]).unwrap();
        assert!(o.value > 0.99, "{}", o.value);
    }

    #[test]
    fn dense_oracle_for_v_shape() {
        // brute force over a dense sample of U around the projection
        let v = SupportSpec::right_v().unwrap();
        let x = [0.0, 2.0];
        let xi = [1.0, 1.0];
        let nu = scale(sub(x, xi), 1.0 / norm(sub(x, xi)));
        let mut best: f64 = -1.0;
        for i in -400..=400 {
            for j in -400..=400 {
                let y = [i as f64 * 0.5, j as f64 * 0.5];
                if v.contains(y) && norm(sub(y, xi)) > 1e-9 {
                    best = best.max(dot(nu, scale(sub(y, xi), 1.0 / norm(sub(y, xi)))));
                }
            }
        }
        let o = opening(&v, x).unwrap();
        assert!(best <= o.value + 1e-12 && best > 0.99, "{best}");
    }

    #[test]
    fn ballcone_profiles() {
        let b = SupportSpec::ball(2, [0.0, 0.0], 1.0).unwrap();
        let p = ballcone_profile(&b, &[1.0, 4.0, 16.0], 1e-2).unwrap();
        assert!(p.holds, "{:?}", p.values);
        let v = SupportSpec::right_v().unwrap();
        let p = ballcone_profile(&v, &[1.0, 4.0, 16.0], 1e-2).unwrap();
        assert!(!p.holds);
        assert!(p.values.iter().all(|x| *x >= (PI / 4.0).cos()));
        assert!(p.nonincreasing);
    }

    #[test]
    fn projection_directions() {
        let b = SupportSpec::ball(2, [0.0, 0.0], 2.0).unwrap();
        assert!(monotonicity_directions(&b, 100.0).unwrap().is_full());
        let g = SupportSpec::subgraph(2, Gamma::Bounded { amplitude: 1.0, decay: 0.1 }).unwrap();
        let e = monotonicity_directions(&g, 100.0).unwrap();
        assert_eq!(e.angles(), vec![0.0]);
        let mut full = RasterMask::empty([-20.0, -20.0], 1.0, 41, 41).unwrap();
        full.cells.iter_mut().for_each(|c| *c = true);
        let u = SupportSpec::new(2, SupportKind::Mask(full)).unwrap();
        let e = monotonicity_directions(&u, 100.0).unwrap();
        assert!(e.relatively_dense && e.count() == 0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn opening_range(x in -20.0f64..20.0, y in 1.0f64..20.0) {
            let specs = [
                SupportSpec::subgraph(2, Gamma::NegQuadratic { a: 0.25 }).unwrap(),
                SupportSpec::ball(2, [0.0, -3.0], 2.0).unwrap(),
                SupportSpec::right_v().unwrap(),
            ];
            for u in &specs {
                if u.distance([x, y]) > 1e-6 {
                    let o = opening(u, [x, y]).unwrap();
                    proptest::prop_assert!(o.value >= -1.0 && o.value <= 1.0);
                }
            }
        }
    }
}
