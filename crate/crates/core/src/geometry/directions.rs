use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{angle_between, angle_of, dot, norm, rho_interior, scale, unit, Point, SupportKind, SupportSpec};
use crate::error::{Error, Result};

/// Classification of a sampled direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirClass {
    Bounded,
    Unbounded,
    Uncertain,
}

impl DirClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DirClass::Bounded => "bounded",
            DirClass::Unbounded => "unbounded",
            DirClass::Uncertain => "uncertain",
        }
    }
}

/// One sampled direction. `margin` is the extrapolated limit of
/// `dist(tau e, U) / tau`; `min` and `max` range over the top of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub angle: f64,
    pub margin: f64,
    pub min: f64,
    pub max: f64,
    pub class: DirClass,
}

impl DirectionSample {
    pub fn e(&self) -> Point {
        unit(self.angle)
    }
}

/// Ladder and threshold settings for [`direction_sets`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub tau_max: f64,
    pub n_dirs: usize,
    pub eps: f64,
    /// Extra rungs spread over the top octave, used for min and max only.
    pub dense: usize,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            tau_max: 1000.0,
            n_dirs: 256,
            eps: 1e-2,
            dense: 64,
        }
    }
}

impl LadderConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.tau_max >= 100.0) {
            return Err(Error::InvalidInput(format!(
                "tau_max must be at least 100, got {}",
                self.tau_max
            )));
        }
        if dim == 2 && self.n_dirs < 64 {
            return Err(Error::InvalidInput(format!(
                "need at least 64 directions, got {}",
                self.n_dirs
            )));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidInput("eps must lie in (0, 0.5)".into()));
        }
        Ok(())
    }

    fn rungs(&self) -> Vec<f64> {
        let mut taus = Vec::new();
        let mut t = 10.0;
        while t <= self.tau_max * (1.0 + 1e-12) {
            taus.push(t);
            t *= 2.0;
        }
        taus
    }
}

/// Sampled `B(U)` and `U(U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dim: usize,
    pub eps: f64,
    pub samples: Vec<DirectionSample>,
}

impl DirectionSet {
    /// Angular spacing between samples; zero on the line.
    pub fn spacing(&self) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            2.0 * PI / self.samples.len() as f64
        }
    }

    pub fn unbounded(&self) -> impl Iterator<Item = &DirectionSample> {
        self.samples.iter().filter(|s| s.class == DirClass::Unbounded)
    }

    pub fn has_unbounded(&self) -> bool {
        self.unbounded().next().is_some()
    }

    pub fn all_bounded(&self) -> bool {
        self.samples.iter().all(|s| s.class == DirClass::Bounded)
    }

    /// Sample nearest to `angle`.
    pub fn nearest(&self, angle: f64) -> &DirectionSample {
        self.samples
            .iter()
            .min_by(|a, b| {
                angle_between(a.angle, angle)
                    .partial_cmp(&angle_between(b.angle, angle))
                    .unwrap()
            })
            .expect("direction set is never empty")
    }

    /// Maximal runs of consecutive unbounded samples as closed angle
    /// intervals `[lo, hi]`, `hi >= lo`. The whole circle is `[-pi, pi]`.
    pub fn arcs(&self) -> Vec<[f64; 2]> {
        let n = self.samples.len();
        let unb: Vec<bool> = self.samples.iter().map(|s| s.class == DirClass::Unbounded).collect();
        if self.dim == 1 {
            return self
                .samples
                .iter()
                .filter(|s| s.class == DirClass::Unbounded)
                .map(|s| [s.angle, s.angle])
                .collect();
        }
        if unb.iter().all(|u| *u) {
            return vec![[-PI, PI]];
        }
        let start = unb.iter().position(|u| !*u).unwrap();
        let step = self.spacing();
        let mut arcs = Vec::new();
        let mut run: Option<(f64, usize)> = None;
        for k in 1..=n {
            let i = (start + k) % n;
            if unb[i] {
                match &mut run {
                    Some((_, len)) => *len += 1,
                    None => run = Some((self.samples[i].angle, 1)),
                }
            } else if let Some((lo, len)) = run.take() {
                arcs.push([lo, lo + (len - 1) as f64 * step]);
            }
        }
        arcs
    }
}

fn direction_angles(dim: usize, n: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![0.0, PI];
    }
    (0..n).map(|k| -PI + k as f64 * 2.0 * PI / n as f64).collect()
}

fn sample_direction(u: &SupportSpec, angle: f64, cfg: &LadderConfig, rungs: &[f64]) -> DirectionSample {
    let e = unit(angle);
    let ratio = |t: f64| (u.distance(scale(e, t)) / t).min(1.0);
    let ladder: Vec<f64> = rungs.iter().map(|&t| ratio(t)).collect();
    let k = ladder.len();
    let (last, prev) = (ladder[k - 1], ladder[k - 2]);
    let margin = (2.0 * last - prev).clamp(0.0, 1.0);
    // dense sweep of the top octave to expose oscillating limits
    let top = rungs[k - 1];
    let mut sweep = vec![prev];
    for j in 1..cfg.dense {
        sweep.push(ratio(top * 0.5 * 2f64.powf(j as f64 / cfg.dense as f64)));
    }
    sweep.push(last);
    let min = sweep.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sweep.iter().copied().fold(0.0, f64::max);
    let variation: f64 = sweep.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let eps = cfg.eps;
    let by_value = |m: f64| {
        if m <= eps {
            DirClass::Unbounded
        } else if m >= 2.0 * eps {
            DirClass::Bounded
        } else {
            DirClass::Uncertain
        }
    };
    let oscillating = variation - (last - prev).abs() > 0.1 * max.max(eps);
    let class = if oscillating {
        if min >= 2.0 * eps {
            DirClass::Bounded
        } else if max <= eps {
            DirClass::Unbounded
        } else {
            DirClass::Uncertain
        }
    } else {
        let c = by_value(margin);
        let unsettled = (last - prev).abs() > 0.1 * last.max(prev).max(eps);
        if unsettled && c != by_value(last) {
            DirClass::Uncertain
        } else {
            c
        }
    };
    DirectionSample {
        angle,
        margin,
        min,
        max,
        class,
    }
}

/// Samples `dist(tau e, U) / tau` on the ladder `tau = 10 2^k <= tau_max`
/// for `n_dirs` directions (both directions of the line when `dim = 1`).
pub fn direction_sets(u: &SupportSpec, cfg: &LadderConfig) -> Result<DirectionSet> {
    cfg.validate(u.dim)?;
    let rungs = cfg.rungs();
    if rungs.len() < 2 {
        return Err(Error::InvalidInput("ladder needs two rungs".into()));
    }
    let samples = direction_angles(u.dim, cfg.n_dirs)
        .into_par_iter()
        .map(|a| sample_direction(u, a, cfg, &rungs))
        .collect();
    Ok(DirectionSet {
        dim: u.dim,
        eps: cfg.eps,
        samples,
    })
}

/// The two evaluations of the speed formula and their agreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedPair {
    /// Sup over sampled unbounded directions.
    pub sup_formula: f64,
    /// `c* / dist(e, R^+ U(U))` with arcs widened by half a spacing.
    pub distance_formula: f64,
    /// Allowed disagreement from the angular resolution.
    pub bound: f64,
    pub value: f64,
    pub consistent: bool,
}

fn in_arc(theta: f64, lo: f64, hi: f64) -> bool {
    (theta - lo).rem_euclid(2.0 * PI) <= (hi - lo) + 1e-12
}

pub fn predicted_speed_pair(e: Point, dirs: &DirectionSet, c_star: f64) -> SpeedPair {
    let n = norm(e);
    let e = scale(e, 1.0 / n);
    let theta = angle_of(e);
    let arcs = dirs.arcs();
    if arcs.iter().any(|a| in_arc(theta, a[0], a[1])) {
        return SpeedPair {
            sup_formula: f64::INFINITY,
            distance_formula: f64::INFINITY,
            bound: 0.0,
            value: f64::INFINITY,
            consistent: true,
        };
    }
    let mut sup = c_star;
    for s in dirs.unbounded() {
        let c = dot(e, s.e());
        if c >= 0.0 {
            let v = if c >= 1.0 - 1e-15 {
                f64::INFINITY
            } else {
                c_star / (1.0 - c * c).sqrt()
            };
            sup = sup.max(v);
        }
    }
    let half = 0.5 * dirs.spacing();
    let mut gap = f64::INFINITY;
    let mut covered = false;
    for a in &arcs {
        let (lo, hi) = (a[0] - half, a[1] + half);
        if in_arc(theta, lo, hi) {
            covered = true;
        }
        gap = gap.min(angle_between(theta, lo)).min(angle_between(theta, hi));
    }
    let (dist_formula, bound) = if covered {
        (f64::INFINITY, f64::INFINITY)
    } else if gap >= PI / 2.0 {
        (c_star, half * c_star)
    } else {
        let s = gap.sin();
        (c_star / s, half * c_star * gap.cos() / (s * s) + 1e-12 * c_star)
    };
    let consistent = if dist_formula.is_infinite() {
        covered
    } else {
        (sup - dist_formula).abs() <= bound * (1.0 + 1e-9)
    };
    SpeedPair {
        sup_formula: sup,
        distance_formula: dist_formula,
        bound,
        value: sup,
        consistent,
    }
}

/// Spreading speed `w(e)` from the sampled direction sets; infinite on
/// sampled arcs of unbounded directions.
pub fn predicted_speed(e: Point, dirs: &DirectionSet, c_star: f64) -> Result<f64> {
    if !(c_star > 0.0) {
        return Err(Error::Domain {
            value: c_star,
            domain: "(0, inf)",
        });
    }
    if !(norm(e) > 0.0) {
        return Err(Error::InvalidInput("direction must be nonzero".into()));
    }
    let p = predicted_speed_pair(e, dirs, c_star);
    if !p.consistent {
        return Err(Error::Consistency(format!(
            "speed formulas disagree at angle {:.4}: {} vs {} (bound {})",
            angle_of(e),
            p.sup_formula,
            p.distance_formula,
            p.bound
        )));
    }
    Ok(p.value)
}

/// `R^+ U(U) + B_{c*}` as a support.
pub fn envelope_w(dirs: &DirectionSet, c_star: f64) -> Result<SupportSpec> {
    if !(c_star > 0.0) {
        return Err(Error::Domain {
            value: c_star,
            domain: "(0, inf)",
        });
    }
    SupportSpec::new(
        dirs.dim,
        SupportKind::Envelope {
            arcs: dirs.arcs(),
            radius: c_star,
        },
    )
}

/// Outcome of checking that every direction is bounded for `U` or
/// unbounded for its rho-interior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    pub rho: f64,
    /// Angles of directions that fail or are uncertain.
    pub missing_dirs: Vec<f64>,
    /// Some failure comes from an uncertain classification.
    pub uncertain: bool,
}

pub fn check_hypothesis_u(u: &SupportSpec, rho: f64, cfg: &LadderConfig) -> Result<HypothesisCheck> {
    let inner = rho_interior(u, rho)?;
    let outer = direction_sets(u, cfg)?;
    let inner_dirs = direction_sets(&inner.set, cfg)?;
    let mut missing = Vec::new();
    let mut uncertain = false;
    for (a, b) in outer.samples.iter().zip(&inner_dirs.samples) {
        // a settled positive liminf counts as bounded even inside the
        // (eps, 2 eps) band that the classifier leaves uncertain
        let bounded = a.class == DirClass::Bounded || a.min > outer.eps;
        if bounded || b.class == DirClass::Unbounded {
            continue;
        }
        if a.class == DirClass::Uncertain || b.class == DirClass::Uncertain {
            uncertain = true;
        }
        missing.push(a.angle);
    }
    Ok(HypothesisCheck {
        holds: missing.is_empty(),
        rho,
        missing_dirs: missing,
        uncertain,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Gamma;
    use super::*;

    fn cfg() -> LadderConfig {
        LadderConfig::default()
    }

    #[test]
    fn half_space_directions() {
        let u = SupportSpec::half_space(2, [0.0, 1.0], 0.0).unwrap();
        let d = direction_sets(&u, &cfg()).unwrap();
        for s in &d.samples {
            let en = s.e()[1];
            if en <= 0.0 {
                assert_eq!(s.class, DirClass::Unbounded, "{}", s.angle);
            } else if en >= 0.02 {
                assert_eq!(s.class, DirClass::Bounded, "{}", s.angle);
                assert!((s.margin - en).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cone_subgraph_directions_and_speed() {
        let u = SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 1.0 }).unwrap();
        let d = direction_sets(&u, &cfg()).unwrap();
        for s in &d.samples {
            let e = s.e();
            let excess = e[1] - e[0].abs();
            if excess <= 0.0 {
                assert_eq!(s.class, DirClass::Unbounded, "{}", s.angle);
            } else if excess > 0.03 {
                assert_eq!(s.class, DirClass::Bounded, "{}", s.angle);
            }
        }
        let w = predicted_speed([0.0, 1.0], &d, 2.0).unwrap();
        assert!((w - 2.0 * 2f64.sqrt()).abs() < 1e-9, "{w}");
        assert_eq!(predicted_speed([1.0, 0.0], &d, 2.0).unwrap(), f64::INFINITY);
        let env = envelope_w(&d, 2.0).unwrap();
        // boundary x_N = |x'| + c* sqrt 2 at x' = 0
        assert!(env.contains([0.0, 2.0 * 2f64.sqrt() - 0.01]));
        assert!(!env.contains([0.0, 2.0 * 2f64.sqrt() + 0.01]));
    }

    #[test]
    fn bounded_set_has_no_unbounded_directions() {
        let u = SupportSpec::ball(2, [1.0, 2.0], 3.0).unwrap();
        let d = direction_sets(&u, &cfg()).unwrap();
        assert!(d.all_bounded());
        for k in 0..16 {
            let e = unit(k as f64 * 0.4);
            assert_eq!(predicted_speed(e, &d, 1.5).unwrap(), 1.5);
        }
        let env = envelope_w(&d, 2.0).unwrap();
        assert!(env.contains([0.0, 1.99]) && !env.contains([2.01, 0.0]));
    }

    #[test]
    fn half_space_law() {
        let u = SupportSpec::subgraph(2, Gamma::Flat { level: 0.0 }).unwrap();
        let d = direction_sets(&u, &cfg()).unwrap();
        for en in [1.0, 0.8, 0.5, 0.2] {
            let e = [(1.0f64 - en * en).sqrt(), en];
            let w = predicted_speed(e, &d, 2.0).unwrap();
            assert!((w * en - 2.0).abs() < 1e-9, "{en}: {w}");
        }
        assert_eq!(predicted_speed([0.0, -1.0], &d, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn line_directions() {
        let u = SupportSpec::half_space(1, [0.0, 1.0], 0.0).unwrap();
        let d = direction_sets(&u, &cfg()).unwrap();
        assert_eq!(d.samples.len(), 2);
        assert_eq!(d.samples[0].class, DirClass::Bounded);
        assert_eq!(d.samples[1].class, DirClass::Unbounded);
        assert_eq!(predicted_speed([0.0, 1.0], &d, 2.0).unwrap(), 2.0);
        assert_eq!(predicted_speed([0.0, -1.0], &d, 2.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn annuli_oscillate() {
        let u = SupportSpec::annuli(2).unwrap();
        let d = direction_sets(&u, &cfg()).unwrap();
        for s in &d.samples {
            assert!(s.min <= d.eps && s.max > 0.2, "{s:?}");
            assert_eq!(s.class, DirClass::Uncertain);
        }
        let chk = check_hypothesis_u(&u, 0.5, &cfg()).unwrap();
        assert!(!chk.holds && chk.uncertain);
        assert_eq!(chk.missing_dirs.len(), d.samples.len());
    }

    #[test]
    fn hypothesis_holds_for_cones_and_balls() {
        for alpha in [0.0, 0.5, 2.0] {
            let u = SupportSpec::subgraph(2, Gamma::LinearCone { alpha }).unwrap();
            let chk = check_hypothesis_u(&u, 1.0, &cfg()).unwrap();
            assert!(chk.holds, "alpha {alpha}: {:?}", chk.missing_dirs);
        }
        let ball = SupportSpec::ball(2, [0.0, 0.0], 2.0).unwrap();
        assert!(check_hypothesis_u(&ball, 0.5, &cfg()).unwrap().holds);
    }

    #[test]
    fn formula_pair_agrees_on_catalog() {
        for (_, u) in &crate::geometry::catalog() {
            let d = direction_sets(u, &cfg()).unwrap();
            for k in 0..256 {
                let e = unit(-PI + (k as f64 + 0.37) * 2.0 * PI / 256.0);
                let p = predicted_speed_pair(e, &d, 1.0);
                assert!(p.consistent, "{:?} {:?}", u.kind, p);
                assert!(p.value >= 1.0);
            }
        }
    }

    #[test]
    fn envelope_invariant_under_bounded_perturbation() {
        let a = SupportSpec::subgraph(2, Gamma::Bounded { amplitude: 1.0, decay: 0.1 }).unwrap();
        let b = SupportSpec::half_space(2, [0.0, 1.0], 0.0).unwrap();
        let da = direction_sets(&a, &cfg()).unwrap();
        let db = direction_sets(&b, &cfg()).unwrap();
        assert_eq!(da.arcs(), db.arcs());
    }
}
