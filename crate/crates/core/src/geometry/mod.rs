//! Initial supports `U` and the set geometry built on them: direction sets,
//! interiors, the spreading envelope, raster masks, Hausdorff distances and
//! the opening function.
//!
//! Points are `[x', x_N]`. In dimension 1 only the second coordinate is used
//! and `x'` is ignored.

mod directions;
mod interior;
mod opening;
mod raster;

pub use directions::{
    check_hypothesis_u, direction_sets, envelope_w, predicted_speed, predicted_speed_pair,
    DirClass, DirectionSample, DirectionSet, HypothesisCheck, LadderConfig, SpeedPair,
};
pub use interior::{rho_interior, RhoInterior};
pub use opening::{
    ballcone_profile, level_set_points, monotonicity_directions, opening, BallconeProfile,
    Opening, ProjectionDirections,
};
pub use raster::{distance_transform, hausdorff, minkowski_dilate, RasterMask, Window};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn scale(a: Point, s: f64) -> Point {
    [a[0] * s, a[1] * s]
}

/// Unit vector at angle `theta` measured from `e_N` towards `+x'`.
#[inline]
pub fn unit(theta: f64) -> Point {
    [theta.sin(), theta.cos()]
}

/// Angle of `p` measured from `e_N`, in `(-pi, pi]`.
#[inline]
pub fn angle_of(p: Point) -> f64 {
    p[0].atan2(p[1])
}

/// Absolute angular separation in `[0, pi]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Graph `x_N = gamma(x')` bounding a subgraph support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Gamma {
    /// `alpha |x'|`
    LinearCone { alpha: f64 },
    /// `-a |x'|^2`
    NegQuadratic {
        #[serde(default = "quarter")]
        a: f64,
    },
    /// `-kappa ln(1 + |x'|)`
    LogDecay { kappa: f64 },
    /// `a sqrt|x'|`
    SqrtGrowth {
        #[serde(default = "one")]
        a: f64,
    },
    /// `amplitude sin(x') / (1 + decay |x'|)`
    Bounded {
        amplitude: f64,
        #[serde(default)]
        decay: f64,
    },
    Flat {
        #[serde(default)]
        level: f64,
    },
    /// `slope x'`
    Tilted { slope: f64 },
    /// `-ell sqrt(x'^2 + width^2)`, a smoothed `-ell |x'|`.
    AbsSmoothed {
        ell: f64,
        #[serde(default = "one")]
        width: f64,
    },
    /// Piecewise linear through the knots, extended linearly.
    Custom { x: Vec<f64>, y: Vec<f64> },
    /// Inward offset of `base` by `rho` along the normal, to first order.
    Eroded { base: Box<Gamma>, rho: f64 },
}

fn one() -> f64 {
    1.0
}

fn quarter() -> f64 {
    0.25
}

impl Gamma {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Gamma::LinearCone { alpha } => alpha * x.abs(),
            Gamma::NegQuadratic { a } => -a * x * x,
            Gamma::LogDecay { kappa } => -kappa * x.abs().ln_1p(),
            Gamma::SqrtGrowth { a } => a * x.abs().sqrt(),
            Gamma::Bounded { amplitude, decay } => amplitude * x.sin() / (1.0 + decay * x.abs()),
            Gamma::Flat { level } => *level,
            Gamma::Tilted { slope } => slope * x,
            Gamma::AbsSmoothed { ell, width } => -ell * x.hypot(*width),
            Gamma::Custom { x: xs, y: ys } => {
                let n = xs.len();
                if n == 1 {
                    return ys[0];
                }
                let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                ys[k] + t * (ys[k + 1] - ys[k])
            }
            Gamma::Eroded { base, rho } => {
                let s = base.slope(x);
                base.value(x) - rho * (1.0 + s * s).sqrt()
            }
        }
    }

    /// `gamma'(x')`; one-sided at kinks, capped where it blows up.
    pub fn slope(&self, x: f64) -> f64 {
        const CAP: f64 = 1e6;
        let sgn = if x < 0.0 { -1.0 } else { 1.0 };
        match self {
            Gamma::LinearCone { alpha } => alpha * sgn,
            Gamma::NegQuadratic { a } => -2.0 * a * x,
            Gamma::LogDecay { kappa } => -kappa * sgn / (1.0 + x.abs()),
            Gamma::SqrtGrowth { a } => {
                let r = x.abs().sqrt();
                if r == 0.0 {
                    CAP
                } else {
                    (a * sgn / (2.0 * r)).clamp(-CAP, CAP)
                }
            }
            Gamma::Bounded { amplitude, decay } => {
                let den = 1.0 + decay * x.abs();
                amplitude * (x.cos() * den - x.sin() * decay * sgn) / (den * den)
            }
            Gamma::Flat { .. } => 0.0,
            Gamma::Tilted { slope } => *slope,
            Gamma::AbsSmoothed { ell, width } => -ell * x / x.hypot(*width),
            Gamma::Custom { x: xs, y: ys } => {
                let n = xs.len();
                if n == 1 {
                    return 0.0;
                }
                let k = xs.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
                (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k])
            }
            Gamma::Eroded { base, .. } => base.slope(x),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        match self {
            Gamma::Custom { x, y } => {
                if x.is_empty() || x.len() != y.len() || x.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("custom gamma needs matching, strictly increasing knots");
                }
            }
            Gamma::AbsSmoothed { width, .. } if *width <= 0.0 => {
                return bad("abs_smoothed width must be positive")
            }
            Gamma::Eroded { base, rho } => {
                if *rho < 0.0 {
                    return bad("erosion radius must be nonnegative");
                }
                base.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Half-space `{x : x . normal <= offset}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfPlane {
    pub normal: Point,
    #[serde(default)]
    pub offset: f64,
}

impl HalfPlane {
    fn unit(self) -> Self {
        let n = norm(self.normal);
        Self {
            normal: scale(self.normal, 1.0 / n),
            offset: self.offset / n,
        }
    }

    #[inline]
    fn excess(&self, p: Point) -> f64 {
        dot(p, self.normal) - self.offset
    }
}

/// Catalog of supports `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportKind {
    /// `{x_N <= gamma(x')}`.
    Subgraph { gamma: Gamma },
    BallUnion { centers: Vec<Point>, radii: Vec<f64> },
    /// Union over `n >= first` of closed annuli with radii
    /// `base^n -+ (width - shrink)`.
    AnnuliUnion {
        #[serde(default = "two")]
        base: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        shrink: f64,
        #[serde(default = "one_u32")]
        first: u32,
    },
    HalfSpace {
        normal: Point,
        #[serde(default)]
        offset: f64,
    },
    /// Union of two half-spaces with non-parallel boundaries.
    VShaped { first: HalfPlane, second: HalfPlane },
    /// Points whose angle to `axis` seen from `vertex` is at most `half_angle`.
    Cone {
        vertex: Point,
        axis: Point,
        half_angle: f64,
    },
    /// `{|x_N| <= e^{-|x'|^2}}`, thinned by `shrink` along the normal.
    GaussianTube {
        #[serde(default)]
        shrink: f64,
    },
    /// `R^+ K + B_radius` where `K` is a union of closed arcs of directions
    /// given as angle intervals from `e_N`.
    Envelope { arcs: Vec<[f64; 2]>, radius: f64 },
    /// Open dilation `{dist(x, base) < radius}`.
    Dilated { base: Box<SupportSpec>, radius: f64 },
    Mask(RasterMask),
}

fn two() -> f64 {
    2.0
}

fn one_u32() -> u32 {
    1
}

/// A support `U` in dimension 1 or 2. Serialized as the kind's table with
/// an optional `dim` key (default 2).
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSpec {
    pub dim: usize,
    pub kind: SupportKind,
}

impl Serialize for SupportSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let mut v = serde_json::to_value(&self.kind).map_err(S::Error::custom)?;
        if let Some(map) = v.as_object_mut() {
            map.insert("dim".into(), self.dim.into());
        }
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SupportSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut v = serde_json::Value::deserialize(d)?;
        let dim = match v.as_object_mut().and_then(|m| m.remove("dim")) {
            None => 2,
            Some(x) => x
                .as_u64()
                .ok_or_else(|| D::Error::custom("dim must be 1 or 2"))? as usize,
        };
        let kind = SupportKind::deserialize(v).map_err(D::Error::custom)?;
        SupportSpec::new(dim, kind).map_err(D::Error::custom)
    }
}

/// Samples across the search interval of the sampled distance evaluators.
const SEARCH_SAMPLES: usize = 256;

impl SupportSpec {
    pub fn new(dim: usize, kind: SupportKind) -> Result<Self> {
        let spec = Self { dim, kind };
        spec.validate()?;
        Ok(spec.normalized())
    }

    pub fn half_space(dim: usize, normal: Point, offset: f64) -> Result<Self> {
        Self::new(dim, SupportKind::HalfSpace { normal, offset })
    }

    pub fn subgraph(dim: usize, gamma: Gamma) -> Result<Self> {
        Self::new(dim, SupportKind::Subgraph { gamma })
    }

    pub fn ball(dim: usize, center: Point, radius: f64) -> Result<Self> {
        Self::new(
            dim,
            SupportKind::BallUnion {
                centers: vec![center],
                radii: vec![radius],
            },
        )
    }

    pub fn annuli(dim: usize) -> Result<Self> {
        Self::new(
            dim,
            SupportKind::AnnuliUnion {
                base: 2.0,
                width: 1.0,
                shrink: 0.0,
                first: 1,
            },
        )
    }

    /// Right-angle V `{x_N <= x'} U {x_N <= -x'}` opening downward.
    pub fn right_v() -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(
            2,
            SupportKind::VShaped {
                first: HalfPlane {
                    normal: [-s, s],
                    offset: 0.0,
                },
                second: HalfPlane {
                    normal: [s, s],
                    offset: 0.0,
                },
            },
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.dim == 1 || self.dim == 2) {
            return bad(format!("support dimension must be 1 or 2, got {}", self.dim));
        }
        let planar_only = matches!(
            self.kind,
            SupportKind::VShaped { .. } | SupportKind::Cone { .. } | SupportKind::GaussianTube { .. }
        );
        if planar_only && self.dim != 2 {
            return bad("this support kind needs dimension 2".into());
        }
        match &self.kind {
            SupportKind::Subgraph { gamma } => gamma.validate()?,
            SupportKind::BallUnion { centers, radii } => {
                if centers.len() != radii.len() || radii.iter().any(|r| !(*r >= 0.0)) {
                    return bad("ball_union needs one nonnegative radius per center".into());
                }
            }
            SupportKind::AnnuliUnion {
                base,
                width,
                shrink,
                ..
            } => {
                if !(*base > 1.0 && *width > 0.0 && *shrink >= 0.0) {
                    return bad("annuli_union needs base > 1, width > 0, shrink >= 0".into());
                }
            }
            SupportKind::HalfSpace { normal, .. } => {
                if !(norm(*normal) > 0.0) {
                    return bad("half_space normal must be nonzero".into());
                }
                if self.dim == 1 && normal[0] != 0.0 {
                    return bad("in dimension 1 the normal is [0, +-1]".into());
                }
            }
            SupportKind::VShaped { first, second } => {
                if !(norm(first.normal) > 0.0 && norm(second.normal) > 0.0) {
                    return bad("v_shaped normals must be nonzero".into());
                }
                let (a, b) = (first.unit(), second.unit());
                let cross = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
                if cross.abs() < 1e-12 {
                    return bad("v_shaped boundaries must not be parallel".into());
                }
            }
            SupportKind::Cone {
                axis, half_angle, ..
            } => {
                if !(norm(*axis) > 0.0 && *half_angle > 0.0 && *half_angle < PI) {
                    return bad("cone needs a nonzero axis and half_angle in (0, pi)".into());
                }
            }
            SupportKind::GaussianTube { shrink } => {
                if !(*shrink >= 0.0) {
                    return bad("gaussian_tube shrink must be nonnegative".into());
                }
            }
            SupportKind::Envelope { radius, .. } => {
                if !(*radius > 0.0) {
                    return bad("envelope radius must be positive".into());
                }
            }
            SupportKind::Dilated { base, radius } => {
                if !(*radius >= 0.0) {
                    return bad("dilation radius must be nonnegative".into());
                }
                base.validate()?;
            }
            SupportKind::Mask(m) => m.validate()?,
        }
        Ok(())
    }

    fn normalized(mut self) -> Self {
        match &mut self.kind {
            SupportKind::HalfSpace { normal, offset } => {
                let n = norm(*normal);
                *normal = scale(*normal, 1.0 / n);
                *offset /= n;
            }
            SupportKind::VShaped { first, second } => {
                *first = first.unit();
                *second = second.unit();
            }
            SupportKind::Cone { axis, .. } => {
                *axis = scale(*axis, 1.0 / norm(*axis));
            }
            _ => {}
        }
        self
    }

    /// Projects onto the line in dimension 1.
    #[inline]
    fn pt(&self, p: Point) -> Point {
        if self.dim == 1 {
            [0.0, p[1]]
        } else {
            p
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        let p = self.pt(p);
        match &self.kind {
            SupportKind::Subgraph { gamma } => p[1] <= gamma.value(p[0]),
            SupportKind::BallUnion { centers, radii } => centers
                .iter()
                .zip(radii)
                .any(|(c, r)| norm(sub(p, self.pt(*c))) <= *r),
            SupportKind::AnnuliUnion { .. } => self.annulus_gap(p) == 0.0,
            SupportKind::HalfSpace { normal, offset } => dot(p, *normal) <= *offset,
            SupportKind::VShaped { first, second } => {
                first.excess(p) <= 0.0 || second.excess(p) <= 0.0
            }
            SupportKind::Cone { .. } => self.cone_distance(p) == 0.0,
            SupportKind::GaussianTube { shrink } => {
                let g = tube_half(p[0], *shrink);
                g >= 0.0 && p[1].abs() <= g
            }
            SupportKind::Envelope { arcs, radius } => envelope_core_distance(arcs, p) < *radius,
            SupportKind::Dilated { base, radius } => base.distance(p) < *radius,
            SupportKind::Mask(m) => m.contains_point(p),
        }
    }

    /// `dist(x, U)`; zero on `U`.
    pub fn distance(&self, p: Point) -> f64 {
        let p = self.pt(p);
        match &self.kind {
            SupportKind::Subgraph { gamma } => {
                let top = gamma.value(p[0]);
                if p[1] <= top {
                    return 0.0;
                }
                if self.dim == 1 {
                    return p[1] - top;
                }
                let d0 = p[1] - top;
                sampled_min(p[0], d0, |y| {
                    let g = gamma.value(y);
                    if p[1] <= g {
                        (p[0] - y).abs()
                    } else {
                        (p[0] - y).hypot(p[1] - g)
                    }
                })
            }
            SupportKind::BallUnion { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| (norm(sub(p, self.pt(*c))) - r).max(0.0))
                .fold(f64::INFINITY, f64::min),
            SupportKind::AnnuliUnion { .. } => self.annulus_gap(p),
            SupportKind::HalfSpace { normal, offset } => (dot(p, *normal) - offset).max(0.0),
            SupportKind::VShaped { first, second } => {
                first.excess(p).max(0.0).min(second.excess(p).max(0.0))
            }
            SupportKind::Cone { .. } => self.cone_distance(p),
            SupportKind::GaussianTube { shrink } => tube_distance(p, *shrink),
            SupportKind::Envelope { arcs, radius } => {
                (envelope_core_distance(arcs, p) - radius).max(0.0)
            }
            SupportKind::Dilated { base, radius } => (base.distance(p) - radius).max(0.0),
            SupportKind::Mask(m) => m.distance_to_occupied(p),
        }
    }

    /// `dist(x, R^N \ U)`; zero off `U`.
    pub fn interior_distance(&self, p: Point) -> f64 {
        let p = self.pt(p);
        if !self.contains(p) {
            return 0.0;
        }
        match &self.kind {
            SupportKind::Subgraph { gamma } => {
                let top = gamma.value(p[0]);
                if self.dim == 1 {
                    return top - p[1];
                }
                let d0 = top - p[1];
                sampled_min(p[0], d0, |y| {
                    let g = gamma.value(y);
                    if p[1] >= g {
                        (p[0] - y).abs()
                    } else {
                        (p[0] - y).hypot(g - p[1])
                    }
                })
            }
            SupportKind::BallUnion { centers, radii } => centers
                .iter()
                .zip(radii)
                .map(|(c, r)| r - norm(sub(p, self.pt(*c))))
                .fold(0.0, f64::max),
            SupportKind::AnnuliUnion { .. } => self.annulus_depth(p),
            SupportKind::HalfSpace { normal, offset } => (offset - dot(p, *normal)).max(0.0),
            SupportKind::VShaped { first, second } => wedge_distance(p, first, second),
            SupportKind::Cone {
                vertex,
                axis,
                half_angle,
            } => {
                let d = sub(p, *vertex);
                let r = norm(d);
                if r == 0.0 {
                    return 0.0;
                }
                let phi = (dot(d, *axis) / r).clamp(-1.0, 1.0).acos();
                let slack = half_angle - phi;
                if slack >= PI / 2.0 {
                    r
                } else {
                    r * slack.sin()
                }
            }
            SupportKind::GaussianTube { shrink } => tube_depth(p, *shrink),
            SupportKind::Envelope { arcs, radius } => radius - envelope_core_distance(arcs, p),
            SupportKind::Dilated { base, radius } => {
                radius - base.distance(p) + base.interior_distance(p)
            }
            SupportKind::Mask(m) => m.distance_to_vacant(p),
        }
    }

    /// Negative inside, positive outside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        let d = self.distance(p);
        if d > 0.0 {
            d
        } else {
            -self.interior_distance(p)
        }
    }

    /// Whether `U` is bounded, when this follows from the kind alone.
    pub fn is_bounded(&self) -> bool {
        match &self.kind {
            SupportKind::BallUnion { .. } | SupportKind::Mask(_) => true,
            SupportKind::GaussianTube { shrink } => *shrink > 0.0,
            SupportKind::Envelope { arcs, .. } => arcs.is_empty(),
            SupportKind::Dilated { base, .. } => base.is_bounded(),
            _ => false,
        }
    }

    /// Emptiness for kinds where it is decidable in closed form.
    pub fn is_empty(&self) -> bool {
        match &self.kind {
            SupportKind::BallUnion { centers, .. } => centers.is_empty(),
            SupportKind::AnnuliUnion { width, shrink, .. } => shrink > width,
            SupportKind::GaussianTube { shrink } => *shrink > 1.0,
            SupportKind::Mask(m) => m.count() == 0,
            SupportKind::Dilated { base, .. } => base.is_empty(),
            _ => false,
        }
    }

    fn annulus_params(&self) -> (f64, f64, i32) {
        match &self.kind {
            SupportKind::AnnuliUnion {
                base,
                width,
                shrink,
                first,
            } => (*base, width - shrink, *first as i32),
            _ => unreachable!("annulus helper on another kind"),
        }
    }

    /// Merged radial intervals of the annuli that can matter at radius `r`.
    fn annulus_intervals(&self, r: f64) -> Vec<(f64, f64)> {
        let (base, half, first) = self.annulus_params();
        let mut out: Vec<(f64, f64)> = Vec::new();
        if half < 0.0 {
            return out;
        }
        let mut n = first;
        loop {
            let c = base.powi(n);
            let (lo, hi) = ((c - half).max(0.0), c + half);
            match out.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
            if lo > 2.0 * r + 4.0 || n > first + 1100 {
                break;
            }
            n += 1;
        }
        out
    }

    fn annulus_gap(&self, p: Point) -> f64 {
        let r = norm(p);
        self.annulus_intervals(r)
            .iter()
            .map(|&(lo, hi)| {
                if r < lo {
                    lo - r
                } else if r > hi {
                    r - hi
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn annulus_depth(&self, p: Point) -> f64 {
        let r = norm(p);
        for (lo, hi) in self.annulus_intervals(r) {
            if r >= lo && r <= hi {
                // an interval starting at 0 has no inner boundary
                let inner = if lo <= 0.0 { f64::INFINITY } else { r - lo };
                return inner.min(hi - r);
            }
        }
        0.0
    }

    fn cone_distance(&self, p: Point) -> f64 {
        let SupportKind::Cone {
            vertex,
            axis,
            half_angle,
        } = &self.kind
        else {
            unreachable!("cone helper on another kind")
        };
        let d = sub(p, *vertex);
        let r = norm(d);
        if r == 0.0 {
            return 0.0;
        }
        let phi = (dot(d, *axis) / r).clamp(-1.0, 1.0).acos();
        let excess = phi - half_angle;
        if excess <= 0.0 {
            0.0
        } else if excess >= PI / 2.0 {
            r
        } else {
            r * excess.sin()
        }
    }
}

/// Minimum of `dist(y)` over `y` in `[x - d0, x + d0]`, sampled and then
/// refined around the best sample by golden-section search.
fn sampled_min<F: Fn(f64) -> f64>(x: f64, d0: f64, dist: F) -> f64 {
    if d0 <= 0.0 {
        return 0.0;
    }
    let n = SEARCH_SAMPLES;
    let step = 2.0 * d0 / n as f64;
    let mut best = (dist(x), x);
    for k in 0..=n {
        let y = x - d0 + k as f64 * step;
        let v = dist(y);
        if v < best.0 {
            best = (v, y);
        }
    }
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (dist(c), dist(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = dist(d);
        }
        if (b - a).abs() < 1e-12 * (1.0 + x.abs()) {
            break;
        }
    }
    best.0.min(fc).min(fd)
}

/// Half-thickness of the Gaussian tube at `x'`; negative where it vanishes.
fn tube_half(x: f64, shrink: f64) -> f64 {
    let g = (-x * x).exp();
    if shrink == 0.0 {
        return g;
    }
    let slope = -2.0 * x * g;
    g - shrink * (1.0 + slope * slope).sqrt()
}

/// Extent in `x'` outside which the thinned tube is empty.
fn tube_extent(shrink: f64) -> f64 {
    if shrink <= 0.0 {
        return f64::INFINITY;
    }
    if shrink > 1.0 {
        return 0.0;
    }
    // g > shrink requires |x'| < sqrt(-ln shrink)
    (-shrink.ln()).max(0.0).sqrt()
}

fn tube_distance(p: Point, shrink: f64) -> f64 {
    let seg = |y: f64| {
        let g = tube_half(y, shrink);
        if g < 0.0 {
            return f64::INFINITY;
        }
        let dy = (p[1].abs() - g).max(0.0);
        (p[0] - y).hypot(dy)
    };
    let g0 = tube_half(p[0], shrink);
    if g0 >= 0.0 && p[1].abs() <= g0 {
        return 0.0;
    }
    if shrink <= 0.0 {
        return sampled_min(p[0], p[1].abs() - g0, seg);
    }
    let ext = tube_extent(shrink);
    if ext == 0.0 {
        return if shrink == 1.0 {
            norm(p)
        } else {
            f64::INFINITY
        };
    }
    sampled_min(0.0, ext, seg)
}

fn tube_depth(p: Point, shrink: f64) -> f64 {
    let g0 = tube_half(p[0], shrink);
    let d0 = g0 - p[1].abs();
    if d0 <= 0.0 {
        return 0.0;
    }
    sampled_min(p[0], d0, |y| {
        let g = tube_half(y, shrink).max(0.0);
        let dy = (g - p[1].abs()).max(0.0);
        (p[0] - y).hypot(dy)
    })
}

/// Distance from `p` to the closed wedge `{x . n1 >= o1} n {x . n2 >= o2}`.
fn wedge_distance(p: Point, a: &HalfPlane, b: &HalfPlane) -> f64 {
    let (ea, eb) = (a.excess(p), b.excess(p));
    if ea >= 0.0 && eb >= 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    // projection onto each boundary line, if it lies on the wedge side of the other
    for (h, g, e) in [(a, b, ea), (b, a, eb)] {
        let q = sub(p, scale(h.normal, e));
        if g.excess(q) >= -1e-12 {
            best = best.min(e.abs());
        }
    }
    let det = a.normal[0] * b.normal[1] - a.normal[1] * b.normal[0];
    if det.abs() > 1e-15 {
        let apex = [
            (a.offset * b.normal[1] - b.offset * a.normal[1]) / det,
            (a.normal[0] * b.offset - b.normal[0] * a.offset) / det,
        ];
        best = best.min(norm(sub(p, apex)));
    }
    best
}

/// `dist(p, R^+ K)` for `K` a union of closed arcs of unit directions.
fn envelope_core_distance(arcs: &[[f64; 2]], p: Point) -> f64 {
    let r = norm(p);
    if r == 0.0 {
        return 0.0;
    }
    let theta = angle_of(p);
    let mut best = r;
    for arc in arcs {
        let (lo, hi) = (arc[0], arc[1]);
        let width = hi - lo;
        let rel = (theta - lo).rem_euclid(2.0 * PI);
        if rel <= width + 1e-15 {
            return 0.0;
        }
        for end in [lo, hi] {
            let e = unit(end);
            let t = dot(p, e).max(0.0);
            best = best.min(norm(sub(p, scale(e, t))));
        }
    }
    best
}

/// One representative of each planar support kind with a closed form.
pub fn catalog() -> Vec<(&'static str, SupportSpec)> {
    let sub = |g: Gamma| SupportSpec::subgraph(2, g).expect("catalog gamma");
    let mut out = vec![
        ("linear_cone", sub(Gamma::LinearCone { alpha: 1.0 })),
        ("neg_quadratic", sub(Gamma::NegQuadratic { a: 0.25 })),
        ("log_decay", sub(Gamma::LogDecay { kappa: 3.0 })),
        ("sqrt_growth", sub(Gamma::SqrtGrowth { a: 1.0 })),
        ("bounded", sub(Gamma::Bounded { amplitude: 1.0, decay: 0.1 })),
        ("flat", sub(Gamma::Flat { level: 0.0 })),
        ("tilted", sub(Gamma::Tilted { slope: 1.0 })),
        ("abs_smoothed", sub(Gamma::AbsSmoothed { ell: 1.0, width: 1.0 })),
    ];
    let more = [
        ("ball", SupportSpec::ball(2, [0.0, 0.0], 3.0)),
        (
            "two_balls",
            SupportSpec::new(
                2,
                SupportKind::BallUnion {
                    centers: vec![[-5.0, 0.0], [5.0, 2.0]],
                    radii: vec![2.0, 1.0],
                },
            ),
        ),
        ("annuli", SupportSpec::annuli(2)),
        ("half_space", SupportSpec::half_space(2, [0.0, 1.0], 0.0)),
        ("v_shaped", SupportSpec::right_v()),
        (
            "cone",
            SupportSpec::new(
                2,
                SupportKind::Cone {
                    vertex: [0.0, 0.0],
                    axis: [0.0, -1.0],
                    half_angle: 0.5,
                },
            ),
        ),
        ("gaussian_tube", SupportSpec::new(2, SupportKind::GaussianTube { shrink: 0.0 })),
        (
            "envelope",
            SupportSpec::new(
                2,
                SupportKind::Envelope {
                    arcs: vec![[2.5, 3.5]],
                    radius: 2.0,
                },
            ),
        ),
    ];
    out.extend(more.into_iter().map(|(n, s)| (n, s.expect("catalog support"))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn half_space_distances() {
        let u = SupportSpec::half_space(2, [0.0, 2.0], 0.0).unwrap();
        assert!(u.contains([5.0, -1.0]));
        assert_eq!(u.distance([3.0, 2.5]), 2.5);
        assert_eq!(u.interior_distance([3.0, -1.5]), 1.5);
        assert_eq!(u.signed_distance([0.0, -1.5]), -1.5);
    }

    #[test]
    fn cone_subgraph_distance_matches_geometry() {
        // distance from (0, s) to {x_N <= |x'|} is s / sqrt 2
        let u = SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 1.0 }).unwrap();
        for s in [0.5, 3.0, 100.0] {
            assert!(approx(u.distance([0.0, s]), s / 2f64.sqrt(), 1e-9), "{s}");
        }
        let v = SupportSpec::right_v().unwrap();
        for p in [[0.3, 2.0], [-4.0, 1.0], [0.0, -3.0], [2.0, -7.0]] {
            assert!(approx(u.distance(p), v.distance(p), 1e-9));
            assert!(approx(u.interior_distance(p), v.interior_distance(p), 1e-9), "{p:?}");
        }
    }

    #[test]
    fn annuli_membership_and_gaps() {
        let u = SupportSpec::annuli(2).unwrap();
        // radii [1,3] U [3,5] U [7,9] U [15,17] ...
        assert!(u.contains([0.0, 2.0]));
        assert!(u.contains([4.0, 0.0]));
        assert!(!u.contains([0.0, 6.0]));
        assert!(approx(u.distance([6.0, 0.0]), 1.0, 1e-12));
        assert!(approx(u.distance([0.0, 12.0]), 3.0, 1e-12));
        assert!(approx(u.distance([0.0, 0.5]), 0.5, 1e-12));
        assert!(approx(u.interior_distance([0.0, 8.5]), 0.5, 1e-12));
        assert!(approx(u.interior_distance([3.0, 0.0]), 2.0, 1e-12));
        assert!(!u.is_bounded());
    }

    #[test]
    fn cone_kind_distances() {
        let u = SupportSpec::new(
            2,
            SupportKind::Cone {
                vertex: [0.0, 0.0],
                axis: [0.0, 1.0],
                half_angle: PI / 4.0,
            },
        )
        .unwrap();
        assert!(u.contains([0.5, 1.0]));
        assert!(approx(u.distance([1.0, 0.0]), (PI / 4.0).sin(), 1e-12));
        assert!(approx(u.distance([0.0, -2.0]), 2.0, 1e-12));
        assert!(approx(u.interior_distance([0.0, 2.0]), 2.0 * (PI / 4.0).sin(), 1e-12));
    }

    #[test]
    fn gaussian_tube_thin_far_out() {
        let u = SupportSpec::new(2, SupportKind::GaussianTube { shrink: 0.0 }).unwrap();
        assert!(u.contains([0.0, 0.9]));
        assert!(!u.contains([3.0, 0.01]));
        assert!(u.contains([3.0, 0.0]));
        assert!(approx(u.distance([0.0, 2.0]), 1.0, 1e-6));
        let eroded = SupportSpec::new(2, SupportKind::GaussianTube { shrink: 0.5 }).unwrap();
        assert!(eroded.is_bounded());
        assert!(!eroded.contains([2.0, 0.0]));
        assert!(eroded.contains([0.0, 0.0]));
    }

    #[test]
    fn one_dimensional_supports_ignore_x_prime() {
        let u = SupportSpec::half_space(1, [0.0, 1.0], 0.0).unwrap();
        assert_eq!(u.distance([7.0, 3.0]), 3.0);
        let s = SupportSpec::subgraph(1, Gamma::Flat { level: 2.0 }).unwrap();
        assert_eq!(s.distance([9.0, 3.0]), 1.0);
        assert!(SupportSpec::half_space(1, [1.0, 0.0], 0.0).is_err());
        assert!(SupportSpec::new(1, SupportKind::GaussianTube { shrink: 0.0 }).is_err());
    }

    #[test]
    fn envelope_distances() {
        // R^+{-e_N} + B_2: a downward half-cylinder with a round cap
        let w = SupportSpec::new(
            2,
            SupportKind::Envelope {
                arcs: vec![[PI, PI]],
                radius: 2.0,
            },
        )
        .unwrap();
        assert!(w.contains([1.9, -50.0]));
        assert!(!w.contains([2.1, -50.0]));
        assert!(w.contains([0.0, 1.9]));
        assert!(!w.contains([0.0, 2.1]));
        assert!(approx(w.distance([0.0, 5.0]), 3.0, 1e-12));
        let ball = SupportSpec::new(
            2,
            SupportKind::Envelope {
                arcs: vec![],
                radius: 2.0,
            },
        )
        .unwrap();
        assert!(ball.is_bounded());
        assert!(approx(ball.distance([3.0, 4.0]), 3.0, 1e-12));
    }

    #[test]
    fn serde_round_trip() {
        let u = SupportSpec::subgraph(2, Gamma::LogDecay { kappa: 3.0 }).unwrap();
        let text = serde_json::to_string(&u).unwrap();
        let back: SupportSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(u, back);
        let bad = r#"{"kind":"half_space","normal":[0,1],"ofset":1}"#;
        assert!(serde_json::from_str::<SupportSpec>(bad).is_err());
    }

    proptest::proptest! {
        #[test]
        fn membership_consistent_with_distance(x in -30.0f64..30.0, y in -30.0f64..30.0) {
            let specs = [
                SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 0.7 }).unwrap(),
                SupportSpec::subgraph(2, Gamma::Bounded { amplitude: 1.0, decay: 0.1 }).unwrap(),
                SupportSpec::subgraph(2, Gamma::NegQuadratic { a: 0.25 }).unwrap(),
                SupportSpec::ball(2, [1.0, -2.0], 4.0).unwrap(),
                SupportSpec::annuli(2).unwrap(),
                SupportSpec::right_v().unwrap(),
                SupportSpec::new(2, SupportKind::GaussianTube { shrink: 0.0 }).unwrap(),
            ];
            for u in &specs {
                let p = [x, y];
                let d = u.distance(p);
                if u.contains(p) {
                    proptest::prop_assert!(d <= 1e-9, "{:?} at {:?}: {}", u.kind, p, d);
                }
                if d > 1e-9 {
                    proptest::prop_assert!(!u.contains(p));
                }
                // distance is 1-Lipschitz
                let q = [x + 0.3, y - 0.2];
                proptest::prop_assert!((u.distance(q) - d).abs() <= norm([0.3, 0.2]) + 1e-6);
            }
        }
    }
}
