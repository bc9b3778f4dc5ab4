use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::levelsets::{graph_position, ray_position, RayMode};
use crate::numerics::fit_line;
use crate::solver::{Field, Mode, Snapshot};

/// RMS residual above which the fit is reported as unsettled.
pub const RESIDUAL_WARN: f64 = 0.2;

/// Which front position is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum LagProbe {
    /// `X_λ(t, x')` on a plane field.
    Column { x_prime: f64 },
    /// Furthest crossing along a ray; lines and radial fields.
    Ray { origin: Point, e: Point },
}

/// Expected coefficient `k` in `lag ~ (k / c*) ln t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum LagScenario {
    Planar,
    /// Compactly supported data, or subgraphs sinking fast enough, in `R^n`.
    Curved { n: usize },
    /// Upper bound `3 - sigma`.
    Sigma { sigma: f64 },
}

impl LagScenario {
    pub fn k_pred(&self) -> f64 {
        match self {
            LagScenario::Planar => 3.0,
            LagScenario::Curved { n } => *n as f64 + 2.0,
            LagScenario::Sigma { sigma } => 3.0 - sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagFit {
    pub lambda: f64,
    pub c_star: f64,
    /// `(t, c* t - X_λ(t))`.
    pub samples: Vec<(f64, f64)>,
    pub window: (f64, f64),
    pub k_hat: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub k_pred: f64,
    pub sigma: Option<f64>,
    pub unsettled: bool,
}

pub fn front_position(field: &Field, lambda: f64, probe: LagProbe) -> Result<f64> {
    match (probe, field.grid.mode) {
        (LagProbe::Column { x_prime }, Mode::Plane) => {
            let g = graph_position(field, lambda, x_prime)?;
            if !g.flag.is_clean() {
                log::warn!("column at x' = {x_prime} flagged {:?} at t = {}", g.flag, field.t);
            }
            Ok(g.position)
        }
        (LagProbe::Ray { origin, e }, _) => {
            let r = ray_position(field, origin, e, lambda, RayMode::Furthest)?;
            if r.window_limited {
                return Err(Error::WindowGuard(format!("front left the window at t = {}", field.t)));
            }
            Ok(r.r)
        }
        _ => Err(Error::InvalidInput("column probes need a plane field".into())),
    }
}

/// Fits `c* t - X = (k / c*) ln t + b` on `t in [T/5, T]`.
pub fn lag_fit_series(
    positions: &[(f64, f64)],
    lambda: f64,
    c_star: f64,
    scenario: LagScenario,
) -> Result<LagFit> {
    let pos: Vec<(f64, f64)> = positions.iter().copied().filter(|p| p.0 > 0.0).collect();
    let (Some(first), Some(last)) = (pos.first(), pos.last()) else {
        return Err(Error::InvalidInput("no positive sample times".into()));
    };
    if last.0 < 10.0 * first.0 {
        return Err(Error::InvalidInput(format!(
            "samples span [{}, {}], less than a decade",
            first.0, last.0
        )));
    }
    let window = (last.0 / 5.0, last.0);
    let samples: Vec<(f64, f64)> = pos.iter().map(|(t, x)| (*t, c_star * t - x)).collect();
    let used: Vec<&(f64, f64)> = samples.iter().filter(|p| p.0 >= window.0 - 1e-9).collect();
    let xs: Vec<f64> = used.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::InvalidInput("too few samples in the fit window".into()))?;
    let unsettled = fit.rms > RESIDUAL_WARN;
    if unsettled {
        log::warn!("lag fit residual {:.3} exceeds {RESIDUAL_WARN}", fit.rms);
    }
    Ok(LagFit {
        lambda,
        c_star,
        samples,
        window,
        k_hat: c_star * fit.slope,
        intercept: fit.intercept,
        residual_rms: fit.rms,
        k_pred: scenario.k_pred(),
        sigma: match scenario {
            LagScenario::Sigma { sigma } => Some(sigma),
            _ => None,
        },
        unsettled,
    })
}

pub fn lag_fit(snaps: &[Snapshot], lambda: f64, probe: LagProbe, c_star: f64, scenario: LagScenario) -> Result<LagFit> {
    if let Some(s) = snaps.iter().find(|s| s.contaminated) {
        return Err(Error::Contaminated {
            t: s.field.t,
            deviation: s.boundary_deviation,
        });
    }
    let positions = snaps
        .iter()
        .filter(|s| s.field.t > 0.0)
        .map(|s| Ok((s.field.t, front_position(&s.field, lambda, probe)?)))
        .collect::<Result<Vec<_>>>()?;
    lag_fit_series(&positions, lambda, c_star, scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontspeed::kpp_front;
    use crate::numerics::Pchip;
    use crate::reaction::ReactionTerm;
    use crate::solver::Grid;

    #[test]
    fn planted_profile_recovers_k() {
        // u = phi(x - c* t + (k / c*) ln t), sampled on a line, no PDE
        let p = kpp_front(&ReactionTerm::logistic()).unwrap().profile;
        let (lo, hi) = (p.z[0], *p.z.last().unwrap());
        let phi = Pchip::new(p.z.clone(), p.phi.clone()).unwrap();
        let g = Grid::line(-20.0, 460.0, 0.1).unwrap();
        for k in [3.0, 4.0, 2.5] {
            let mut positions = Vec::new();
            for n in 1..=60 {
                let t = 200.0 * n as f64 / 60.0;
                let shift = 2.0 * t - (k / 2.0) * t.ln();
                let mut f = Field::constant(g, 0.0);
                f.t = t;
                for j in 0..g.ny {
                    let z = g.center(0, j)[1] - shift;
                    f.values[j] = if z <= lo { 1.0 } else if z >= hi { 0.0 } else { phi.eval(z) };
                }
                let probe = LagProbe::Ray { origin: [0.0, 0.0], e: [0.0, 1.0] };
                positions.push((t, front_position(&f, 0.5, probe).unwrap()));
            }
            let fit = lag_fit_series(&positions, 0.5, 2.0, LagScenario::Planar).unwrap();
            assert!((fit.k_hat / k - 1.0).abs() < 0.02, "{k}: {}", fit.k_hat);
            assert!(fit.residual_rms < 0.01);
        }
    }

    #[test]
    fn needs_a_decade() {
        let pos: Vec<(f64, f64)> = (1..10).map(|k| (10.0 + k as f64, 2.0 * k as f64)).collect();
        assert!(lag_fit_series(&pos, 0.5, 2.0, LagScenario::Planar).is_err());
        assert_eq!(LagScenario::Curved { n: 2 }.k_pred(), 4.0);
        assert_eq!(LagScenario::Sigma { sigma: 0.5 }.k_pred(), 2.5);
    }
}
