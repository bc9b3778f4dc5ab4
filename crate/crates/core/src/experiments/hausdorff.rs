use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{decreasing, require_clean, tail};
use crate::error::{Error, Result};
use crate::geometry::{direction_sets, envelope_w, hausdorff, norm, LadderConfig, RasterMask, SupportSpec};
use crate::levelsets::upper_level_set;
use crate::solver::{Face, Field, Mode, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HausdorffMode {
    /// `d_H(B_R ∩ E_λ(t)/t, B_R ∩ 𝒲)`.
    WLocal { radius: f64 },
    /// `d_H(E_λ(t)/t, U/t + B_{c*})` inside the scaled window.
    UDilated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffOptions {
    pub lambda: f64,
    pub mode: HausdorffMode,
    /// Window faces that are symmetry planes of the data, not truncations.
    pub mirrored: Vec<Face>,
    pub ladder: LadderConfig,
}

impl HausdorffOptions {
    pub fn new(mode: HausdorffMode) -> Self {
        Self {
            lambda: 0.5,
            mode,
            mirrored: Vec::new(),
            ladder: LadderConfig::default(),
        }
    }

    pub fn mirrored(mut self, faces: &[Face]) -> Self {
        self.mirrored = faces.to_vec();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffSeries {
    pub mode: HausdorffMode,
    pub points: Vec<(f64, f64)>,
    /// Decreasing over `[T/2, T]` up to one scaled cell per step.
    pub decreasing: bool,
    pub trend_slope: f64,
    pub final_d: f64,
}

fn mask_where<F: Fn([f64; 2]) -> bool + Sync>(field: &Field, keep: F) -> RasterMask {
    let g = &field.grid;
    let mut m = g.empty_mask();
    m.cells.par_chunks_mut(g.nx).enumerate().for_each(|(j, row)| {
        for (i, c) in row.iter_mut().enumerate() {
            *c = keep(g.center(i, j));
        }
    });
    m
}

/// Points on the non-mirrored window faces, one per cell.
fn open_boundary(field: &Field, mirrored: &[Face]) -> Vec<[f64; 2]> {
    let g = &field.grid;
    let (lo, hi) = (g.origin, g.far_corner());
    let mut out = Vec::new();
    let xs: Vec<f64> = (0..g.nx).map(|i| g.center(i, 0)[0]).collect();
    let ys: Vec<f64> = (0..g.ny).map(|j| g.center(0, j)[1]).collect();
    if !mirrored.contains(&Face::Bottom) {
        out.extend(xs.iter().map(|x| [*x, lo[1]]));
    }
    if !mirrored.contains(&Face::Top) {
        out.extend(xs.iter().map(|x| [*x, hi[1]]));
    }
    if !mirrored.contains(&Face::Left) {
        out.extend(ys.iter().map(|y| [lo[0], *y]));
    }
    if !mirrored.contains(&Face::Right) {
        out.extend(ys.iter().map(|y| [hi[0], *y]));
    }
    out
}

/// Hausdorff distance between the scaled upper level sets and their
/// predicted limit, per snapshot. On windows cut along symmetry planes of
/// symmetric data the distance equals the one on the full plane.
pub fn hausdorff_convergence(
    snaps: &[Snapshot],
    u: &SupportSpec,
    c_star: f64,
    opts: &HausdorffOptions,
) -> Result<HausdorffSeries> {
    let Some(last) = snaps.last() else {
        return Err(Error::InvalidInput("no snapshots".into()));
    };
    if last.field.grid.mode != Mode::Plane || u.dim != 2 {
        return Err(Error::InvalidInput("Hausdorff series need plane fields".into()));
    }
    require_clean(snaps, last.field.t)?;
    let envelope = match opts.mode {
        HausdorffMode::WLocal { .. } => Some(envelope_w(&direction_sets(u, &opts.ladder)?, c_star)?),
        HausdorffMode::UDilated => None,
    };
    let mut points = Vec::new();
    for s in snaps.iter().filter(|s| s.field.t > 0.0) {
        let (f, t) = (&s.field, s.field.t);
        let e = upper_level_set(f, opts.lambda)?;
        let (a, b) = match (opts.mode, &envelope) {
            (HausdorffMode::WLocal { radius }, Some(w)) => {
                let inside = |p: [f64; 2]| norm(p) <= radius * t;
                let target = |p: [f64; 2]| inside(p) && w.contains([p[0] / t, p[1] / t]);
                if let Some(p) = open_boundary(f, &opts.mirrored).into_iter().find(|p| target(*p)) {
                    return Err(Error::WindowGuard(format!(
                        "at t = {t} the window edge point {p:?} lies in the clipped envelope"
                    )));
                }
                let mut a = e;
                for j in 0..a.ny {
                    for i in 0..a.nx {
                        if !inside(f.grid.center(i, j)) {
                            a.set(i, j, false);
                        }
                    }
                }
                (a, mask_where(f, target))
            }
            _ => {
                let b = mask_where(f, |p| u.distance(p) < c_star * t);
                let full = b.count() == b.cells.len();
                if b.count() == 0 || full {
                    return Err(Error::WindowGuard(format!(
                        "at t = {t} the dilated support {} the window",
                        if full { "covers" } else { "misses" }
                    )));
                }
                (e, b)
            }
        };
        points.push((t, hausdorff(&a, &b, None)? / t));
    }
    let h = last.field.grid.h;
    let tail_t: Vec<f64> = tail(snaps, 0.5).iter().map(|s| s.field.t).collect();
    let late: Vec<(f64, f64)> = points.iter().copied().filter(|p| tail_t.contains(&p.0)).collect();
    let slack = h / late.first().map_or(1.0, |p| p.0);
    let (dec, slope) = decreasing(&late, slack);
    Ok(HausdorffSeries {
        mode: opts.mode,
        final_d: points.last().map_or(f64::INFINITY, |p| p.1),
        points,
        decreasing: dec,
        trend_slope: slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::ReactionTerm;
    use crate::solver::{run, Grid, RunConfig};

    #[test]
    fn ball_converges_to_envelope() {
        let ball = SupportSpec::ball(2, [0.0, 0.0], 3.0).unwrap();
        let g = Grid::plane([0.0, 48.0], [0.0, 48.0], 0.25).unwrap();
        let cfg = RunConfig::new(ball.clone(), ReactionTerm::logistic(), g, 20.0)
            .with_even_snapshots(8)
            .with_faces(&[Face::Top, Face::Right]);
        let (snaps, sum) = run(&cfg).unwrap();
        assert!(sum.contaminated_at.is_none());
        let opts = HausdorffOptions::new(HausdorffMode::WLocal { radius: 4.0 }).mirrored(&[Face::Left, Face::Bottom]);
        let s = hausdorff_convergence(&snaps, &ball, 2.0, &opts).unwrap();
        assert!(s.final_d < 0.4, "{s:?}");
        // the same window without the symmetry declared is clipped
        let bare = HausdorffOptions::new(HausdorffMode::WLocal { radius: 4.0 });
        assert!(matches!(hausdorff_convergence(&snaps, &ball, 2.0, &bare), Err(Error::WindowGuard(_))));
        let d = hausdorff_convergence(&snaps, &ball, 2.0, &HausdorffOptions::new(HausdorffMode::UDilated)).unwrap();
        // the curvature lag (2 ln t + O(1)) / t is still large at t = 20
        assert!(d.decreasing && d.final_d < 0.5, "{d:?}");
    }
}
