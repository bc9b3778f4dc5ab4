//! Reaction terms `f` on `[0, 1]` with `f(0) = f(1) = 0`.
//!
//! Every built-in kind has a closed form; tabulated terms are interpolated
//! with a monotone cubic so that sign patterns between knots are preserved.
//! Sign conditions are checked on a uniform sample of step `1e-3` plus the
//! interval endpoints, with midpoints used to detect sign changes that a
//! single sample step cannot resolve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate, Pchip};

/// Uniform sampling step for sign and integral conditions.
pub const SAMPLE_STEP: f64 = 1e-3;
const DOMAIN_TOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-12;
/// Integrals at or below this magnitude are not counted as positive.
const POSITIVE_FLOOR: f64 = 1e-10;

/// The closed-form family a reaction term belongs to, as written in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionKind {
    /// `rate * s * (1 - s)`.
    KppLogistic {
        #[serde(default = "one")]
        rate: f64,
    },
    /// `s^p * (1 - s)`.
    MonostablePower { p: f64 },
    /// `(s - alpha) * (1 - s)` above `alpha`, zero below.
    Ignition { alpha: f64 },
    /// `s * (1 - s) * (s - alpha)`.
    Bistable { alpha: f64 },
    /// Piecewise cubic: `scale * s * (beta - s) * (s - alpha)` on `[0, beta]`
    /// and `scale * (s - beta) * (1 - s) * (s - gamma)` on `[beta, 1]`.
    Tristable {
        alpha: f64,
        beta: f64,
        gamma: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Knot values interpolated by a monotone cubic.
    Tabulated { s: Vec<f64>, f: Vec<f64> },
    /// `base(lo + (hi - lo) s) / (hi - lo)`: the profile equation of a front
    /// between `hi` and `lo`, mapped onto `[0, 1]`.
    Rescaled {
        base: Box<ReactionKind>,
        lo: f64,
        hi: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Sign-pattern family of a reaction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionClass {
    /// Positive on `(0,1)` with `f(s)/s` nonincreasing.
    Kpp,
    /// Positive on `(0,1)`.
    Monostable,
    /// Zero on `[0, alpha]`, positive on `(alpha, 1)`.
    Ignition,
    /// Negative then positive.
    Bistable,
    /// Negative, positive, negative, positive.
    Tristable,
    Other,
}

/// A validated reaction term.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionTerm {
    kind: ReactionKind,
    table: Option<Pchip>,
    f_prime_at_zero: f64,
    class: ReactionClass,
    theta: Option<f64>,
    notes: String,
}

/// Result of checking the invasion hypothesis through its two equivalent
/// conditions: positivity on `[theta, 1)` and positivity of the tail
/// integrals `int_t^1 f`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvasionVerdict {
    pub holds: bool,
    /// Smallest sampled `theta` with `f > 0` on `[theta, 1)`.
    pub theta: Option<f64>,
    pub hair_trigger: bool,
    /// A sign change was found strictly between two samples of equal sign.
    pub indeterminate: bool,
    /// Smallest sampled tail integral over `t in [0, 1)`.
    pub min_tail_integral: f64,
}

impl ReactionKind {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        let finite = |v: f64| v.is_finite();
        match self {
            ReactionKind::KppLogistic { rate } => {
                if !finite(*rate) || *rate <= 0.0 {
                    return bad("kpp_logistic rate must be positive");
                }
            }
            ReactionKind::MonostablePower { p } => {
                if !finite(*p) || *p < 1.0 {
                    return bad("monostable_power exponent must be >= 1");
                }
            }
            ReactionKind::Ignition { alpha } | ReactionKind::Bistable { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return bad("alpha must lie in (0, 1)");
                }
            }
            ReactionKind::Tristable {
                alpha,
                beta,
                gamma,
                scale,
            } => {
                if !(0.0 < *alpha && alpha < beta && beta < gamma && *gamma < 1.0) {
                    return bad("tristable zeros must satisfy 0 < alpha < beta < gamma < 1");
                }
                if !finite(*scale) || *scale <= 0.0 {
                    return bad("tristable scale must be positive");
                }
            }
            ReactionKind::Tabulated { s, f } => {
                if s.len() != f.len() || s.len() < 2 {
                    return bad("tabulated reaction needs matching s and f arrays of length >= 2");
                }
                if s.first() != Some(&0.0) || s.last() != Some(&1.0) {
                    return bad("tabulated knots must start at 0 and end at 1");
                }
                if f[0] != 0.0 || f[f.len() - 1] != 0.0 {
                    return bad("tabulated values must vanish at s = 0 and s = 1");
                }
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("tabulated knots must be strictly increasing");
                }
                if f.iter().any(|v| !v.is_finite()) {
                    return bad("tabulated values must be finite");
                }
            }
            ReactionKind::Rescaled { base, lo, hi } => {
                base.validate()?;
                if !(0.0 <= *lo && lo < hi && *hi <= 1.0) {
                    return bad("rescaled interval must satisfy 0 <= lo < hi <= 1");
                }
            }
        }
        Ok(())
    }

    /// Closed-form value; tabulated kinds use the supplied interpolant.
    fn value(&self, s: f64, table: Option<&Pchip>) -> f64 {
        match self {
            ReactionKind::KppLogistic { rate } => rate * s * (1.0 - s),
            ReactionKind::MonostablePower { p } => s.powf(*p) * (1.0 - s),
            ReactionKind::Ignition { alpha } => {
                if s > *alpha {
                    (s - alpha) * (1.0 - s)
                } else {
                    0.0
                }
            }
            ReactionKind::Bistable { alpha } => s * (1.0 - s) * (s - alpha),
            ReactionKind::Tristable {
                alpha,
                beta,
                gamma,
                scale,
            } => {
                if s <= *beta {
                    scale * s * (beta - s) * (s - alpha)
                } else {
                    scale * (s - beta) * (1.0 - s) * (s - gamma)
                }
            }
            ReactionKind::Tabulated { .. } => table.map_or(0.0, |t| t.eval(s)),
            ReactionKind::Rescaled { base, lo, hi } => {
                let w = hi - lo;
                base.value(lo + w * s, table) / w
            }
        }
    }

    fn derivative(&self, s: f64, table: Option<&Pchip>) -> f64 {
        match self {
            ReactionKind::KppLogistic { rate } => rate * (1.0 - 2.0 * s),
            ReactionKind::MonostablePower { p } => {
                if s == 0.0 {
                    if *p == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    p * s.powf(p - 1.0) * (1.0 - s) - s.powf(*p)
                }
            }
            ReactionKind::Ignition { alpha } => {
                if s > *alpha {
                    1.0 + alpha - 2.0 * s
                } else {
                    0.0
                }
            }
            ReactionKind::Bistable { alpha } => {
                // d/ds [ -s^3 + (1+a) s^2 - a s ]
                -3.0 * s * s + 2.0 * (1.0 + alpha) * s - alpha
            }
            ReactionKind::Tristable {
                alpha,
                beta,
                gamma,
                scale,
            } => {
                // product rule on the active cubic piece
                if s <= *beta {
                    scale
                        * ((beta - s) * (s - alpha) - s * (s - alpha) + s * (beta - s))
                } else {
                    scale
                        * ((1.0 - s) * (s - gamma) - (s - beta) * (s - gamma)
                            + (s - beta) * (1.0 - s))
                }
            }
            ReactionKind::Tabulated { .. } => {
                table.map_or(0.0, |t| t.eval_with_derivative(s).1)
            }
            ReactionKind::Rescaled { base, lo, hi } => base.derivative(lo + (hi - lo) * s, table),
        }
    }

    fn table(&self) -> Option<Pchip> {
        match self {
            ReactionKind::Tabulated { s, f } => Pchip::new(s.clone(), f.clone()),
            ReactionKind::Rescaled { base, .. } => base.table(),
            _ => None,
        }
    }
}

impl Serialize for ReactionTerm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReactionTerm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kind = ReactionKind::deserialize(d)?;
        ReactionTerm::new(kind).map_err(serde::de::Error::custom)
    }
}

impl ReactionTerm {
    pub fn new(kind: ReactionKind) -> Result<Self> {
        kind.validate()?;
        let table = kind.table();
        let mut term = Self {
            f_prime_at_zero: kind.derivative(0.0, table.as_ref()),
            kind,
            table,
            class: ReactionClass::Other,
            theta: None,
            notes: String::new(),
        };
        for s in [0.0, 1.0] {
            let v = term.value(s);
            if v.abs() > 1e-14 {
                return Err(Error::InvalidInput(format!(
                    "reaction must vanish at s = {s}, got {v:e}"
                )));
            }
        }
        term.class = term.classify_samples();
        term.theta = term.theta_sample();
        term.notes = format!("class {:?} from sign pattern at step {SAMPLE_STEP}", term.class);
        Ok(term)
    }

    pub fn logistic() -> Self {
        Self::new(ReactionKind::KppLogistic { rate: 1.0 }).expect("logistic is valid")
    }

    /// `f = 0`, for pure diffusion runs.
    pub fn zero() -> Self {
        Self::new(ReactionKind::Tabulated {
            s: vec![0.0, 1.0],
            f: vec![0.0, 0.0],
        })
        .expect("zero table is valid")
    }

    pub fn bistable(alpha: f64) -> Result<Self> {
        Self::new(ReactionKind::Bistable { alpha })
    }

    pub fn kind(&self) -> &ReactionKind {
        &self.kind
    }

    pub fn class(&self) -> ReactionClass {
        self.class
    }

    pub fn f_prime_at_zero(&self) -> f64 {
        self.f_prime_at_zero
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn notes(&self) -> &str {
        &self.notes
    }

    /// `f(s)` with a domain check.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&s) {
            return Err(Error::Domain {
                value: s,
                domain: "[0, 1]",
            });
        }
        Ok(self.value(s.clamp(0.0, 1.0)))
    }

    /// Unchecked evaluation for hot loops; callers keep `s` in `[0, 1]`.
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        self.kind.value(s, self.table.as_ref())
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.kind.derivative(s, self.table.as_ref())
    }

    /// Largest `|f'|` over the sample grid; used in the monotonicity bound of
    /// the explicit scheme.
    pub fn lipschitz(&self) -> f64 {
        samples()
            .map(|s| self.derivative(s).abs())
            .fold(0.0, f64::max)
    }

    /// `sup f(s)/s` over the sample grid, with `f'(0)` at the origin.
    pub fn sup_growth_rate(&self) -> f64 {
        samples()
            .skip(1)
            .map(|s| self.value(s) / s)
            .fold(self.f_prime_at_zero.max(0.0), f64::max)
    }

    /// `int_t^1 f(s) ds` to absolute accuracy well below `1e-10`.
    pub fn tail_integral(&self, t: f64) -> Result<f64> {
        if !(-DOMAIN_TOL..1.0).contains(&t) {
            return Err(Error::Domain {
                value: t,
                domain: "[0, 1)",
            });
        }
        let t = t.max(0.0);
        Ok(self.integral(t, 1.0))
    }

    /// Interior points where `f'` jumps.
    pub fn kinks(&self) -> Vec<f64> {
        self.breakpoints(false)
    }

    fn breakpoints(&self, knots: bool) -> Vec<f64> {
        // `lo`, `hi` map coordinates of `kind` onto those of the outer term
        fn collect(kind: &ReactionKind, out: &mut Vec<f64>, lo: f64, hi: f64, knots: bool) {
            let map = |x: f64| (x - lo) / (hi - lo);
            match kind {
                ReactionKind::Ignition { alpha } => out.push(map(*alpha)),
                ReactionKind::Tristable { beta, .. } => out.push(map(*beta)),
                ReactionKind::Tabulated { s, .. } if knots => {
                    out.extend(s.iter().map(|x| map(*x)))
                }
                ReactionKind::Rescaled { base, lo: l, hi: h } => {
                    collect(base, out, l + (h - l) * lo, l + (h - l) * hi, knots)
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        collect(&self.kind, &mut out, 0.0, 1.0, knots);
        out.retain(|x| *x > 0.0 && *x < 1.0);
        out
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let mut breaks = vec![a, b];
        breaks.extend(self.breakpoints(true));
        breaks.retain(|x| *x >= a && *x <= b);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            .map(|w| integrate(|s| self.value(s), w[0], w[1], QUAD_TOL))
            .sum()
    }

    /// Positive on every interior sample and `f(s)/s` nonincreasing on the
    /// sample grid.
    pub fn is_kpp(&self) -> bool {
        if self.class != ReactionClass::Kpp {
            return false;
        }
        self.f_prime_at_zero > 0.0
    }

    fn classify_samples(&self) -> ReactionClass {
        let values: Vec<(f64, f64)> = samples().map(|s| (s, self.value(s))).collect();
        let interior = &values[1..values.len() - 1];
        let zero = 1e-15;
        let mut pattern: Vec<i8> = Vec::new();
        for &(_, v) in interior {
            let sign = if v > zero {
                1
            } else if v < -zero {
                -1
            } else {
                0
            };
            if pattern.last() != Some(&sign) {
                pattern.push(sign);
            }
        }
        match pattern.as_slice() {
            [1] => {
                let mut ratio_prev = self.f_prime_at_zero;
                let nonincreasing = interior.iter().all(|&(s, v)| {
                    let r = v / s;
                    let ok = r <= ratio_prev + 1e-12 * ratio_prev.abs().max(1.0);
                    ratio_prev = r;
                    ok
                });
                if nonincreasing {
                    ReactionClass::Kpp
                } else {
                    ReactionClass::Monostable
                }
            }
            [0, 1] => ReactionClass::Ignition,
            [-1, 1] | [-1, 0, 1] => ReactionClass::Bistable,
            [-1, 1, -1, 1] | [-1, 0, 1, 0, -1, 0, 1] => ReactionClass::Tristable,
            p if p.iter().filter(|&&x| x != 0).eq([-1, 1, -1, 1].iter()) => {
                ReactionClass::Tristable
            }
            _ => ReactionClass::Other,
        }
    }

    fn theta_sample(&self) -> Option<f64> {
        let grid: Vec<f64> = samples().collect();
        // last sample below 1 where f <= 0
        let last_bad = grid[..grid.len() - 1]
            .iter()
            .rposition(|&s| self.value(s) <= 0.0);
        let idx = match last_bad {
            None => 0,
            Some(k) => k + 1,
        };
        if idx >= grid.len() - 1 {
            None
        } else {
            Some(grid[idx])
        }
    }

    /// Checks the invasion hypothesis; `dim` enters only the hair-trigger
    /// estimate through the exponent `1 + 2/dim`.
    pub fn check_invasion(&self, dim: usize) -> InvasionVerdict {
        let grid: Vec<f64> = samples().collect();
        let mut indeterminate = false;
        for w in grid.windows(2) {
            let (a, b) = (self.value(w[0]), self.value(w[1]));
            let m = self.value(0.5 * (w[0] + w[1]));
            let sa = a.partial_cmp(&0.0);
            let sm = m.partial_cmp(&0.0);
            if sa == b.partial_cmp(&0.0) && a != 0.0 && sa != sm {
                indeterminate = true;
            }
        }

        // tail integrals accumulated from s = 1 downwards on the sample grid
        let mut tail = 0.0;
        let mut min_tail = f64::INFINITY;
        for w in grid.windows(2).rev() {
            tail += self.integral(w[0], w[1]);
            min_tail = min_tail.min(tail);
        }
        let intf = min_tail > POSITIVE_FLOOR;
        let theta = self.theta;
        let holds = !indeterminate && intf && theta.is_some();

        let interior_positive = grid[1..grid.len() - 1]
            .iter()
            .all(|&s| self.value(s) > 0.0);
        let exponent = 1.0 + 2.0 / dim.max(1) as f64;
        let ratios: Vec<f64> = (10..=50)
            .map(|k| {
                let s = 2f64.powi(-k);
                self.value(s) / s.powf(exponent)
            })
            .collect();
        let tail_min = ratios[10..].iter().copied().fold(f64::INFINITY, f64::min);
        // geometric decay of the ratio means the liminf vanishes
        let decay = (ratios[ratios.len() - 1] / ratios[10]).log2() / (ratios.len() - 11) as f64;
        let hair_trigger =
            holds && interior_positive && tail_min > 0.0 && !(decay < -0.05) && decay.is_finite();

        InvasionVerdict {
            holds,
            theta,
            hair_trigger,
            indeterminate,
            min_tail_integral: min_tail,
        }
    }

    /// The same equation restricted to `[lo, hi]` and mapped onto `[0, 1]`.
    pub fn rescaled(&self, lo: f64, hi: f64) -> Result<Self> {
        Self::new(ReactionKind::Rescaled {
            base: Box::new(self.kind.clone()),
            lo,
            hi,
        })
    }
}

/// The uniform sample grid `0, 1e-3, ..., 1`.
pub fn samples() -> impl Iterator<Item = f64> + Clone {
    let n = (1.0 / SAMPLE_STEP).round() as usize;
    (0..=n).map(move |k| k as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bistable(alpha: f64) -> ReactionTerm {
        ReactionTerm::bistable(alpha).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = ReactionTerm::logistic();
        assert_eq!(f.eval(0.5).unwrap(), 0.25);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert_eq!(bistable(0.25).eval(0.25).unwrap(), 0.0);
        assert!(matches!(f.eval(1.1), Err(Error::Domain { .. })));
        assert!(f.eval(1.0 + 1e-13).is_ok());
        assert!(f.eval(-1e-11).is_err());
    }

    #[test]
    fn endpoints_vanish_for_builtin_kinds() {
        let kinds = vec![
            ReactionKind::KppLogistic { rate: 3.0 },
            ReactionKind::MonostablePower { p: 2.5 },
            ReactionKind::Ignition { alpha: 0.3 },
            ReactionKind::Bistable { alpha: 0.4 },
            ReactionKind::Tristable {
                alpha: 0.1,
                beta: 0.5,
                gamma: 0.7,
                scale: 20.0,
            },
            ReactionKind::Tabulated {
                s: vec![0.0, 0.5, 1.0],
                f: vec![0.0, 0.2, 0.0],
            },
        ];
        for kind in kinds {
            let f = ReactionTerm::new(kind).unwrap();
            assert_eq!(f.eval(0.0).unwrap(), 0.0);
            assert_eq!(f.eval(1.0).unwrap().abs(), 0.0);
        }
    }

    #[test]
    fn kinks_follow_rescaling() {
        let ign = ReactionTerm::new(ReactionKind::Ignition { alpha: 0.3 }).unwrap();
        assert_eq!(ign.kinks(), vec![0.3]);
        let sub = ign.rescaled(0.2, 1.0).unwrap();
        assert!((sub.kinks()[0] - 0.125).abs() < 1e-15);
        let twice = sub.rescaled(0.1, 1.0).unwrap();
        assert!((twice.kinks()[0] - 0.025 / 0.9).abs() < 1e-12);
        assert!(ReactionTerm::logistic().kinks().is_empty());
    }

    #[test]
    fn tail_integral_examples() {
        let f = ReactionTerm::logistic();
        assert!((f.tail_integral(0.0).unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!(bistable(0.5).tail_integral(0.0).unwrap().abs() < 1e-12);
        // independent closed form of int_0^1 s(1-s)(s-1/4) ds
        let closed: f64 = (1.0 / 3.0 - 1.0 / 4.0) - 0.25 * (1.0 / 2.0 - 1.0 / 3.0);
        assert!((closed - 1.0 / 24.0).abs() < 1e-15);
        assert!((bistable(0.25).tail_integral(0.0).unwrap() - closed).abs() < 1e-12);
        assert!(f.tail_integral(1.0).is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(ReactionTerm::logistic().class(), ReactionClass::Kpp);
        assert!(ReactionTerm::logistic().is_kpp());
        let power = ReactionTerm::new(ReactionKind::MonostablePower { p: 2.0 }).unwrap();
        assert_eq!(power.class(), ReactionClass::Monostable);
        assert!(!power.is_kpp());
        assert_eq!(bistable(0.25).class(), ReactionClass::Bistable);
        let ign = ReactionTerm::new(ReactionKind::Ignition { alpha: 0.3 }).unwrap();
        assert_eq!(ign.class(), ReactionClass::Ignition);
        let tri = ReactionTerm::new(ReactionKind::Tristable {
            alpha: 0.1,
            beta: 0.5,
            gamma: 0.7,
            scale: 1.0,
        })
        .unwrap();
        assert_eq!(tri.class(), ReactionClass::Tristable);
    }

    #[test]
    fn bistable_sign_pattern_on_samples() {
        let f = bistable(0.25);
        for s in samples() {
            let v = f.value(s);
            if s > 0.0 && s < 0.25 {
                assert!(v < 0.0);
            } else if s > 0.25 && s < 1.0 {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn invasion_examples() {
        let v = ReactionTerm::logistic().check_invasion(2);
        assert!(v.holds && v.hair_trigger);
        assert_eq!(v.theta, Some(0.001));
        let v = bistable(0.25).check_invasion(2);
        assert!(v.holds);
        assert!(!v.hair_trigger);
        assert!((v.theta.unwrap() - 0.251).abs() < 1e-12);
        assert!(!bistable(0.5).check_invasion(2).holds);
        assert!(!bistable(0.7).check_invasion(1).holds);
    }

    #[test]
    fn hair_trigger_depends_on_dimension_and_power() {
        let p2 = ReactionTerm::new(ReactionKind::MonostablePower { p: 2.0 }).unwrap();
        assert!(p2.check_invasion(2).hair_trigger);
        let p3 = ReactionTerm::new(ReactionKind::MonostablePower { p: 3.0 }).unwrap();
        assert!(!p3.check_invasion(2).hair_trigger);
        assert!(p3.check_invasion(1).hair_trigger);
    }

    #[test]
    fn unresolved_sign_change_is_indeterminate() {
        // a negative dip narrower than one sample step around s = 0.5005
        let s = vec![0.0, 0.5, 0.5004, 0.5005, 0.5006, 0.501, 1.0];
        let f = vec![0.0, 0.2, 0.01, -0.05, 0.01, 0.2, 0.0];
        let term = ReactionTerm::new(ReactionKind::Tabulated { s, f }).unwrap();
        let v = term.check_invasion(1);
        assert!(v.indeterminate);
        assert!(!v.holds);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let kinds = vec![
            ReactionKind::KppLogistic { rate: 2.0 },
            ReactionKind::Bistable { alpha: 0.3 },
            ReactionKind::Tristable {
                alpha: 0.1,
                beta: 0.45,
                gamma: 0.7,
                scale: 5.0,
            },
            ReactionKind::MonostablePower { p: 2.0 },
        ];
        for kind in kinds {
            let f = ReactionTerm::new(kind).unwrap();
            for s in [0.1, 0.33, 0.5, 0.77, 0.9] {
                let h = 1e-6;
                let fd = (f.value(s + h) - f.value(s - h)) / (2.0 * h);
                assert!((fd - f.derivative(s)).abs() < 1e-7, "{:?} at {s}", f.kind());
            }
        }
    }

    #[test]
    fn rescaled_restriction_is_bistable() {
        let tri = ReactionTerm::new(ReactionKind::Tristable {
            alpha: 0.1,
            beta: 0.5,
            gamma: 0.7,
            scale: 1.0,
        })
        .unwrap();
        let lower = tri.rescaled(0.0, 0.5).unwrap();
        let upper = tri.rescaled(0.5, 1.0).unwrap();
        assert_eq!(lower.class(), ReactionClass::Bistable);
        assert_eq!(upper.class(), ReactionClass::Bistable);
        assert!((lower.value(0.5) - tri.value(0.25) / 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ReactionTerm::bistable(1.5).is_err());
        assert!(ReactionTerm::new(ReactionKind::Tabulated {
            s: vec![0.0, 1.0],
            f: vec![0.0, 0.1]
        })
        .is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn tail_integral_is_lipschitz(t in 0.0f64..0.99, h in 1e-4f64..1e-2, alpha in 0.05f64..0.95) {
                let f = ReactionTerm::bistable(alpha).unwrap();
                let sup = samples().map(|s| f.value(s).abs()).fold(0.0, f64::max);
                let a = f.tail_integral(t).unwrap();
                let b = f.tail_integral((t + h).min(0.999_999)).unwrap();
                prop_assert!((a - b).abs() <= sup * h + 1e-10);
            }

            #[test]
            fn kpp_ratio_nonincreasing(rate in 0.1f64..10.0) {
                let f = ReactionTerm::new(ReactionKind::KppLogistic { rate }).unwrap();
                let mut prev = f64::INFINITY;
                for s in samples().skip(1) {
                    let r = f.value(s) / s;
                    prop_assert!(r <= prev + 1e-12);
                    prev = r;
                }
            }
        }
    }
}
