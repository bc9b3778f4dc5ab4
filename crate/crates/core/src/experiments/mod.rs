//! Verdicts from runs: measured speeds against the predicted `w(e)`,
//! Hausdorff convergence of scaled level sets, lag fits, flattening,
//! symmetry and terraces.

mod hausdorff;
mod lag;
mod report;
mod runner;
mod shape;
mod speed;
mod terrace;

pub use hausdorff::{hausdorff_convergence, HausdorffMode, HausdorffOptions, HausdorffSeries};
pub use lag::{front_position, lag_fit, lag_fit_series, LagFit, LagProbe, LagScenario};
pub use report::{aggregate, atomic_write, Basis, Criterion, ExperimentReport, Series, SummaryRow};
pub use runner::{evaluate, execute, unfold};
pub use shape::{
    flattening_series, level_set_probes, planted_sigma2_baseline, sigma2_floor, symmetry_report, FlatteningSeries,
    PlantedBaseline, SymmetryReport,
};
pub use speed::{estimate_speed, verify_fg, FanResult, FgOptions, FgReport, SpeedEstimate};
pub use terrace::{terrace_detect, TerraceReport, TerraceVerdictKind};

use crate::error::{Error, Result};
use crate::solver::Snapshot;

/// Refuses runs with a contaminated snapshot at or before `t_max`.
pub(crate) fn require_clean(snaps: &[Snapshot], t_max: f64) -> Result<()> {
    if let Some(s) = snaps.iter().find(|s| s.contaminated && s.field.t <= t_max + 1e-9) {
        return Err(Error::Contaminated {
            t: s.field.t,
            deviation: s.boundary_deviation,
        });
    }
    Ok(())
}

/// Snapshots with `t` in `[from * T, T]`, `T` the last time.
pub(crate) fn tail(snaps: &[Snapshot], from: f64) -> Vec<&Snapshot> {
    let t_end = snaps.last().map_or(0.0, |s| s.field.t);
    snaps
        .iter()
        .filter(|s| s.field.t > 0.0 && s.field.t >= from * t_end - 1e-9)
        .collect()
}

/// Whether a series is decreasing up to `slack`: a negative least-squares
/// slope and no single rise above `slack`.
pub(crate) fn decreasing(points: &[(f64, f64)], slack: f64) -> (bool, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let slope = crate::numerics::fit_line(&xs, &ys).map_or(f64::NAN, |f| f.slope);
    let rises_ok = ys.windows(2).all(|w| w[1] - w[0] <= slack);
    (slope < 0.0 && rises_ok, slope)
}
