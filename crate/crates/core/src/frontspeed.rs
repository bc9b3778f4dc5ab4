//! Traveling fronts `u = phi(x.e - c t)` of `phi'' + c phi' + f(phi) = 0`
//! connecting 1 to 0, their minimal speed and the two terrace speeds of a
//! tristable term.
//!
//! Shooting works in the phase plane with `E = psi^2 / 2`, `psi = phi'`, as a
//! function of `phi`: `dE/dphi = c sqrt(2E) - f(phi)`. The right side stays
//! bounded where `psi` vanishes, so overshoots show up as `E` reaching zero.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{dopri_scalar, rk4_planar, Stop};
use crate::reaction::{ReactionClass, ReactionTerm};

/// Offset from the rest state 1 where the unstable manifold is entered.
const START_OFFSET: f64 = 1e-8;
/// `phi` at which the approach to 0 is classified.
const END_PHI: f64 = 1e-8;
/// Matching point for saddle-type rest states at 0.
const MATCH_PHI: f64 = 0.5;
/// Tolerance on `psi` for a connection.
const CONNECT_TOL: f64 = 1e-8;
const RTOL: f64 = 1e-12;
const ATOL: f64 = 1e-30;
const MAX_STEPS: usize = 400_000;
/// Absolute tolerance on the bisected speed.
pub const SPEED_TOL: f64 = 1e-4;
/// Profiles are kept where `phi` lies in `[CLIP, 1 - CLIP]`.
pub const CLIP: f64 = 1e-3;
/// Bound on the centered-difference defect of a returned profile.
pub const RESIDUAL_BOUND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontMethod {
    ClosedFormKpp,
    ShootingBisection,
}

/// Fate of the trajectory leaving `(1, 0)` at a given speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shot {
    /// `phi` reaches 0 with `psi` bounded away from 0 (speed too small).
    Undershoot,
    /// `psi` returns to 0 before `phi` does (speed too large).
    Overshoot,
    Connect,
}

/// Sampled front profile on a uniform increasing `z` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontSolution {
    pub speed: f64,
    pub profile: Profile,
    pub method: FrontMethod,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerraceVerdict {
    /// `c1 < c2`: a single front from 1 to 0 exists.
    Hypothesis2Holds,
    /// `c1 >= c2`: the solution splits into two fronts.
    TerraceExpected,
    /// One of the sub-problems has no positive speed.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerraceSpeeds {
    /// Middle stable zero separating the two sub-problems.
    pub beta: f64,
    /// Speed of the front from `beta` down to 0.
    pub c1: Option<f64>,
    /// Speed of the front from 1 down to `beta`.
    pub c2: Option<f64>,
    pub verdict: TerraceVerdict,
}

/// Linear type of the rest state 0 at speed `c`.
#[derive(Debug, Clone, Copy)]
enum Rest {
    /// Complex roots: every trajectory crosses `phi = 0`.
    Spiral,
    /// Both roots nonpositive; connecting orbits satisfy `psi/phi >= mu_fast`
    /// near `phi = end`.
    Node { mu_fast: f64, end: f64 },
    /// One stable direction with slope `mu`.
    Saddle { mu: f64 },
}

fn rest_state(f: &ReactionTerm, c: f64) -> Rest {
    let g0 = f.f_prime_at_zero();
    if g0 > 1e-12 {
        let d = c * c - 4.0 * g0;
        if d < 0.0 {
            Rest::Spiral
        } else {
            Rest::Node {
                mu_fast: 0.5 * (-c - d.sqrt()),
                end: END_PHI,
            }
        }
    } else if g0 < -1e-12 {
        Rest::Saddle {
            mu: 0.5 * (-c - (c * c - 4.0 * g0).sqrt()),
        }
    } else if f.value(1e-6) > 0.0 {
        // degenerate node with roots -c and 0; slow orbits have psi = o(phi),
        // which makes the energy form stiff, so classify further from 0
        Rest::Node {
            mu_fast: -c,
            end: 1e-4,
        }
    } else {
        Rest::Saddle { mu: -c }
    }
}

fn energy_rhs(f: &ReactionTerm, c: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    move |phi: f64, e: f64| c * (2.0 * e.max(0.0)).sqrt() - f.value(phi.clamp(0.0, 1.0))
}

enum Leg {
    /// `E` at the requested stopping point.
    Reached(f64),
    /// `psi` vanished at this `phi`.
    Vanished(f64),
}

/// Follows the unstable manifold of `(1, 0)` down to `phi_stop`.
fn from_one(f: &ReactionTerm, c: f64, phi_stop: f64) -> Result<Leg> {
    let f1 = f.derivative(1.0);
    if f1 >= 0.0 {
        return Err(Error::InvalidInput(format!(
            "rest state 1 is not linearly stable (f'(1) = {f1:e})"
        )));
    }
    let mu = 0.5 * (-c + (c * c - 4.0 * f1).sqrt());
    let e0 = 0.5 * (mu * START_OFFSET).powi(2);
    let (x, e, stop) = dopri_scalar(
        energy_rhs(f, c),
        1.0 - START_OFFSET,
        e0,
        phi_stop,
        RTOL,
        ATOL,
        MAX_STEPS,
        |_, e| e <= 0.0,
        |_, _| {},
    );
    match stop {
        Stop::Reached => Ok(Leg::Reached(e)),
        Stop::Event => Ok(Leg::Vanished(x)),
        Stop::Budget => Err(Error::Inconclusive(format!(
            "shooting from 1 at c = {c} exhausted its step budget near phi = {x}"
        ))),
    }
}

/// Follows the stable manifold of `(0, 0)` upward to `phi_stop`.
fn from_zero(f: &ReactionTerm, c: f64, mu: f64, phi_stop: f64) -> Result<Leg> {
    let e0 = 0.5 * (mu * END_PHI).powi(2);
    if e0 <= 0.0 {
        return Ok(Leg::Vanished(END_PHI));
    }
    let (x, e, stop) = dopri_scalar(
        energy_rhs(f, c),
        END_PHI,
        e0,
        phi_stop,
        RTOL,
        ATOL,
        MAX_STEPS,
        |_, e| e <= 0.0,
        |_, _| {},
    );
    match stop {
        Stop::Reached => Ok(Leg::Reached(e)),
        Stop::Event => Ok(Leg::Vanished(x)),
        Stop::Budget => Err(Error::Inconclusive(format!(
            "shooting from 0 at c = {c} exhausted its step budget near phi = {x}"
        ))),
    }
}

/// Classifies the trajectory leaving `(1, 0)` at speed `c`.
pub fn shoot(f: &ReactionTerm, c: f64) -> Result<Shot> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain {
            value: c,
            domain: "[0, inf)",
        });
    }
    match rest_state(f, c) {
        Rest::Spiral => Ok(Shot::Undershoot),
        Rest::Node { mu_fast, end } => match from_one(f, c, end)? {
            Leg::Vanished(_) => Ok(Shot::Overshoot),
            Leg::Reached(e) => {
                let q = -(2.0 * e).sqrt() / end;
                if q >= mu_fast - 1e-6 * mu_fast.abs().max(1.0) {
                    Ok(Shot::Connect)
                } else {
                    Ok(Shot::Undershoot)
                }
            }
        },
        Rest::Saddle { mu } => {
            let (phi_m, psi0) = match from_zero(f, c, mu, MATCH_PHI)? {
                Leg::Reached(e) => (MATCH_PHI, -(2.0 * e).sqrt()),
                Leg::Vanished(x) => (x, 0.0),
            };
            match from_one(f, c, phi_m)? {
                Leg::Vanished(_) => Ok(Shot::Overshoot),
                Leg::Reached(e) => {
                    let gap = -(2.0 * e).sqrt() - psi0;
                    if gap.abs() <= CONNECT_TOL {
                        Ok(Shot::Connect)
                    } else if gap > 0.0 {
                        Ok(Shot::Overshoot)
                    } else {
                        Ok(Shot::Undershoot)
                    }
                }
            }
        }
    }
}

/// Whether a decreasing front from 1 to 0 with speed `c` exists.
pub fn front_exists(f: &ReactionTerm, c: f64) -> Result<bool> {
    Ok(shoot(f, c)? == Shot::Connect)
}

/// `2 sqrt(f'(0))` for reaction terms of KPP type.
pub fn kpp_min_speed(f: &ReactionTerm) -> Result<f64> {
    if !f.is_kpp() {
        return Err(Error::NotKpp(format!(
            "class {:?}, f'(0) = {}",
            f.class(),
            f.f_prime_at_zero()
        )));
    }
    Ok(2.0 * f.f_prime_at_zero().sqrt())
}

/// Minimal front speed by bisection on the shooting outcome, with the profile.
pub fn min_speed(f: &ReactionTerm) -> Result<FrontSolution> {
    let hi0 = 2.0 * f.sup_growth_rate().max(0.0).sqrt() + 1.0;
    let admissible = |c: f64| -> Result<bool> { Ok(shoot(f, c)? != Shot::Undershoot) };
    if !admissible(hi0)? {
        return Err(Error::NoFrontSpeed(format!(
            "no front up to c = {hi0:.4}"
        )));
    }
    let (mut lo, mut hi) = (0.0, hi0);
    if admissible(lo)? {
        return Err(Error::NoFrontSpeed(
            "fronts are admissible at c = 0, the speed is not positive".into(),
        ));
    }
    while hi - lo > 0.05 * SPEED_TOL {
        let mid = 0.5 * (lo + hi);
        if admissible(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let speed = 0.5 * (lo + hi);
    if speed < SPEED_TOL {
        return Err(Error::NoFrontSpeed(format!("speed {speed:e} is not positive")));
    }
    // the admissible end of the bracket carries a front for monostable terms
    let profile_speed = match rest_state(f, speed) {
        Rest::Saddle { .. } => speed,
        _ => hi,
    };
    solution(f, speed, profile_speed, FrontMethod::ShootingBisection)
}

/// The KPP front at `2 sqrt(f'(0))`.
pub fn kpp_front(f: &ReactionTerm) -> Result<FrontSolution> {
    let c = kpp_min_speed(f)?;
    solution(f, c, c, FrontMethod::ClosedFormKpp)
}

fn solution(
    f: &ReactionTerm,
    speed: f64,
    profile_speed: f64,
    method: FrontMethod,
) -> Result<FrontSolution> {
    let profile = front_profile(f, profile_speed)?;
    let residual = profile.residual(f, profile_speed);
    Ok(FrontSolution {
        speed,
        profile,
        method,
        residual,
    })
}

/// Grid spacing in `z`; steeper terms get finer grids.
fn profile_step(f: &ReactionTerm) -> f64 {
    2e-3 / f.lipschitz().max(1.0)
}

/// Where the sampled profile starts, just inside the upper clip level.
const PROFILE_TOP: f64 = 1.0 - 1e-4;

/// Profile at speed `c`, translated so that `phi` crosses 1/2 at `z = 0`.
pub fn front_profile(f: &ReactionTerm, c: f64) -> Result<Profile> {
    let e = match from_one(f, c, PROFILE_TOP)? {
        Leg::Reached(e) => e,
        Leg::Vanished(x) => {
            return Err(Error::NoFrontSpeed(format!(
                "trajectory at c = {c} turns back at phi = {x}"
            )))
        }
    };
    let start = [PROFILE_TOP, -(2.0 * e).sqrt()];
    let mut dz = profile_step(f);
    let mut profile = Profile::integrate(f, c, 0.0, start, dz)?;
    // kinks of f make the centered defect first order in dz; refine there
    if !f.kinks().is_empty() {
        for _ in 0..3 {
            let r = profile.residual(f, c);
            if r <= 0.5 * RESIDUAL_BOUND {
                break;
            }
            dz *= (0.4 * RESIDUAL_BOUND / r).max(0.02);
            profile = Profile::integrate(f, c, 0.0, start, dz)?;
        }
    }
    let k = profile.phi.partition_point(|&v| v > 0.5);
    if k == 0 || k >= profile.len() {
        return Err(Error::Inconclusive(format!(
            "profile at c = {c} does not cross 1/2"
        )));
    }
    let (z0, z1, p0, p1) = (profile.z[k - 1], profile.z[k], profile.phi[k - 1], profile.phi[k]);
    let mid = z0 + (p0 - 0.5) / (p0 - p1) * (z1 - z0);
    profile.z.iter_mut().for_each(|z| *z -= mid);
    Ok(profile)
}

impl Profile {
    /// Integrates the front ODE forward from `state` at `z0` with step `dz`
    /// until `phi` falls below the clip level or the slope vanishes.
    fn integrate(f: &ReactionTerm, c: f64, z0: f64, state: [f64; 2], dz: f64) -> Result<Self> {
        let rhs = |y: [f64; 2]| [y[1], -c * y[1] - f.value(y[0].clamp(0.0, 1.0))];
        let budget = 5_000_000usize;
        let (mut z, mut phi, mut psi) = (vec![z0], vec![state[0]], vec![state[1]]);
        let mut y = state;
        while y[0] > CLIP {
            y = rk4_planar(&rhs, y, dz);
            if !(y[1] < 0.0) {
                // slope vanished before the clip level: keep the monotone part
                break;
            }
            if z.len() > budget {
                return Err(Error::Inconclusive(format!(
                    "profile at c = {c} does not reach the clip level"
                )));
            }
            z.push(z0 + z.len() as f64 * dz);
            phi.push(y[0]);
            psi.push(y[1]);
        }
        if z.len() < 3 {
            return Err(Error::Inconclusive(format!("profile at c = {c} is too short")));
        }
        Ok(Self { z, phi, psi })
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    /// `max |phi'' + c phi' + f(phi)|` by centered differences at interior
    /// samples.
    pub fn residual(&self, f: &ReactionTerm, c: f64) -> f64 {
        let h = self.step();
        self.phi
            .windows(3)
            .map(|w| {
                let d2 = (w[2] - 2.0 * w[1] + w[0]) / (h * h);
                let d1 = (w[2] - w[0]) / (2.0 * h);
                (d2 + c * d1 + f.value(w[1].clamp(0.0, 1.0))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Hermite interpolation of `(phi, psi)` at `z`, using `psi = phi'`.
    pub fn state_at(&self, f: &ReactionTerm, c: f64, z: f64) -> [f64; 2] {
        let h = self.step();
        let k = (((z - self.z[0]) / h).floor().max(0.0) as usize).min(self.len() - 2);
        let t = (z - self.z[k]) / h;
        let (p0, p1, d0, d1) = (self.phi[k], self.phi[k + 1], self.psi[k], self.psi[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let phi = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * h * d1;
        // psi' = -c psi - f(phi) gives the second derivative at both ends
        let a0 = -c * d0 - f.value(p0.clamp(0.0, 1.0));
        let a1 = -c * d1 - f.value(p1.clamp(0.0, 1.0));
        let psi = (2.0 * t3 - 3.0 * t2 + 1.0) * d0
            + (t3 - 2.0 * t2 + t) * h * a0
            + (-2.0 * t3 + 3.0 * t2) * d1
            + (t3 - t2) * h * a1;
        [phi, psi]
    }

    /// The same front resampled on the grid shifted by `offset`.
    pub fn shifted(&self, f: &ReactionTerm, c: f64, offset: f64) -> Result<Self> {
        let anchor = self.z[1] + offset.rem_euclid(self.step());
        let state = self.state_at(f, c, anchor);
        Self::integrate(f, c, anchor, state, self.step())
    }
}

/// The three interior zeros `alpha < beta < gamma` of a tristable term.
pub fn tristable_zeros(f: &ReactionTerm) -> Result<(f64, f64, f64)> {
    if f.class() != ReactionClass::Tristable {
        return Err(Error::InvalidInput(format!(
            "terrace speeds need a tristable term, got {:?}",
            f.class()
        )));
    }
    let grid: Vec<f64> = crate::reaction::samples().collect();
    let interior = &grid[1..grid.len() - 1];
    let mut zeros = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &s in interior {
        let v = f.value(s);
        if v == 0.0 {
            zeros.push(s);
            prev = None;
            continue;
        }
        if let Some((sp, vp)) = prev {
            if vp.signum() != v.signum() {
                zeros.push(refine_zero(f, sp, s));
            }
        }
        prev = Some((s, v));
    }
    match zeros.as_slice() {
        [a, b, g] => Ok((*a, *b, *g)),
        z => Err(Error::InvalidInput(format!(
            "expected three interior zeros, found {}",
            z.len()
        ))),
    }
}

fn refine_zero(f: &ReactionTerm, mut a: f64, mut b: f64) -> f64 {
    let sa = f.value(a).signum();
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let v = f.value(m);
        if v == 0.0 {
            return m;
        }
        if v.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Speeds of the two sub-fronts of a tristable term and the verdict on
/// whether a single front from 1 to 0 can exist.
pub fn terrace_speeds(f: &ReactionTerm) -> Result<TerraceSpeeds> {
    let (_, beta, _) = tristable_zeros(f)?;
    let lower = f.rescaled(0.0, beta)?;
    let upper = f.rescaled(beta, 1.0)?;
    let c1 = sub_speed(&lower)?;
    let c2 = sub_speed(&upper)?;
    let verdict = match (c1, c2) {
        (Some(a), Some(b)) if a < b => TerraceVerdict::Hypothesis2Holds,
        (Some(_), Some(_)) => TerraceVerdict::TerraceExpected,
        _ => TerraceVerdict::Degenerate,
    };
    Ok(TerraceSpeeds {
        beta,
        c1,
        c2,
        verdict,
    })
}

fn sub_speed(f: &ReactionTerm) -> Result<Option<f64>> {
    if f.tail_integral(0.0)? <= 1e-10 {
        return Ok(None);
    }
    match min_speed(f) {
        Ok(sol) => Ok(Some(sol.speed)),
        Err(Error::NoFrontSpeed(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
