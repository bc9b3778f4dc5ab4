use serde::{Deserialize, Serialize};

use super::{norm, sub, Gamma, HalfPlane, RasterMask, SupportKind, SupportSpec};
use crate::error::{Error, Result};

/// `U_rho = {x in U : dist(x, boundary U) >= rho}` with an estimate of
/// `d_H(U, U_rho)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoInterior {
    pub set: SupportSpec,
    pub empty: bool,
    /// Infinite when `U_rho` is empty or stays far from parts of `U`.
    pub hausdorff: f64,
}

/// Half width of the windows used for raster estimates.
const WINDOW: f64 = 50.0;
const RASTER_H: f64 = 0.25;

fn raster_window(u: &SupportSpec, half: f64) -> Result<RasterMask> {
    let n = (2.0 * half / RASTER_H).round() as usize + 1;
    let ny = n;
    let nx = if u.dim == 1 { 1 } else { n };
    let origin = if u.dim == 1 { [0.0, -half] } else { [-half, -half] };
    RasterMask::from_spec(u, origin, RASTER_H, nx, ny)
}

/// Raster estimate of `d_H(U, U_rho)` on growing windows; infinite when the
/// estimate keeps growing with the window.
fn raster_hausdorff(u: &SupportSpec, inner: &SupportSpec) -> Result<f64> {
    let mut est = [0.0; 2];
    for (k, half) in [WINDOW, 2.0 * WINDOW].into_iter().enumerate() {
        let a = raster_window(u, half)?;
        let b = raster_window(inner, half)?;
        est[k] = super::hausdorff(&a, &b, None)?;
    }
    if est[1].is_infinite() || est[1] > 1.5 * est[0] + RASTER_H {
        Ok(f64::INFINITY)
    } else {
        Ok(est[1])
    }
}

pub fn rho_interior(u: &SupportSpec, rho: f64) -> Result<RhoInterior> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Domain {
            value: rho,
            domain: "(0, inf)",
        });
    }
    let dim = u.dim;
    let (kind, exact_dh): (SupportKind, Option<f64>) = match &u.kind {
        SupportKind::HalfSpace { normal, offset } => (
            SupportKind::HalfSpace {
                normal: *normal,
                offset: offset - rho,
            },
            Some(rho),
        ),
        SupportKind::Subgraph { gamma } => {
            let gamma = match gamma {
                Gamma::Eroded { base, rho: r } => Gamma::Eroded {
                    base: base.clone(),
                    rho: r + rho,
                },
                g => Gamma::Eroded {
                    base: Box::new(g.clone()),
                    rho,
                },
            };
            (SupportKind::Subgraph { gamma }, Some(rho))
        }
        SupportKind::BallUnion { centers, radii } => {
            let kept: Vec<usize> = (0..centers.len()).filter(|&i| radii[i] >= rho).collect();
            let new_centers: Vec<_> = kept.iter().map(|&i| centers[i]).collect();
            let new_radii: Vec<_> = kept.iter().map(|&i| radii[i] - rho).collect();
            let mut dh: f64 = if centers.is_empty() { 0.0 } else { rho };
            for i in 0..centers.len() {
                if radii[i] >= rho {
                    continue;
                }
                // farthest point of a vanished ball from what remains
                let reach = kept
                    .iter()
                    .map(|&j| (norm(sub(centers[i], centers[j])) + radii[i] - (radii[j] - rho)).max(0.0))
                    .fold(f64::INFINITY, f64::min);
                dh = dh.max(reach);
            }
            (
                SupportKind::BallUnion {
                    centers: new_centers,
                    radii: new_radii,
                },
                Some(dh),
            )
        }
        SupportKind::AnnuliUnion {
            base,
            width,
            shrink,
            first,
        } => {
            let s = shrink + rho;
            let dh = if s > *width { f64::INFINITY } else { rho };
            (
                SupportKind::AnnuliUnion {
                    base: *base,
                    width: *width,
                    shrink: s,
                    first: *first,
                },
                Some(dh),
            )
        }
        SupportKind::VShaped { first, second } => {
            let shift = |h: &HalfPlane| HalfPlane {
                normal: h.normal,
                offset: h.offset - rho,
            };
            (
                SupportKind::VShaped {
                    first: shift(first),
                    second: shift(second),
                },
                Some(rho),
            )
        }
        SupportKind::Cone {
            vertex,
            axis,
            half_angle,
        } => {
            let d = rho / half_angle.sin();
            (
                SupportKind::Cone {
                    vertex: [vertex[0] + d * axis[0], vertex[1] + d * axis[1]],
                    axis: *axis,
                    half_angle: *half_angle,
                },
                Some(d),
            )
        }
        SupportKind::GaussianTube { shrink } => {
            let dh = if *shrink == 0.0 { Some(f64::INFINITY) } else { None };
            (SupportKind::GaussianTube { shrink: shrink + rho }, dh)
        }
        SupportKind::Envelope { arcs, radius } if *radius > rho => (
            SupportKind::Envelope {
                arcs: arcs.clone(),
                radius: radius - rho,
            },
            Some(rho),
        ),
        SupportKind::Dilated { base, radius } if *radius > rho => (
            SupportKind::Dilated {
                base: base.clone(),
                radius: radius - rho,
            },
            Some(rho),
        ),
        SupportKind::Mask(m) => {
            let e = m.erode(rho);
            let dh = super::hausdorff(m, &e, None)?;
            (SupportKind::Mask(e), Some(dh))
        }
        _ => {
            let mask = raster_window(u, 2.0 * WINDOW)?;
            let e = mask.erode(rho);
            (SupportKind::Mask(e), None)
        }
    };
    let set = SupportSpec::new(dim, kind)?;
    let empty = set.is_empty() || matches!(&set.kind, SupportKind::Mask(m) if m.count() == 0);
    let hausdorff = if empty && !u.is_empty() {
        f64::INFINITY
    } else {
        match exact_dh {
            Some(d) => d,
            None => raster_hausdorff(u, &set)?,
        }
    };
    Ok(RhoInterior {
        set,
        empty,
        hausdorff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_space_translates() {
        let u = SupportSpec::half_space(2, [0.0, 1.0], 0.0).unwrap();
        let r = rho_interior(&u, 1.0).unwrap();
        assert!(matches!(r.set.kind, SupportKind::HalfSpace { offset, .. } if offset == -1.0));
        assert_eq!(r.hausdorff, 1.0);
        assert!(!r.empty);
    }

    #[test]
    fn gaussian_tube_collapses() {
        let u = SupportSpec::new(2, SupportKind::GaussianTube { shrink: 0.0 }).unwrap();
        let r = rho_interior(&u, 1.0).unwrap();
        assert!(r.hausdorff.is_infinite());
        assert!(!r.set.contains([3.0, 0.0]));
    }

    #[test]
    fn annuli_keep_finite_distance() {
        let u = SupportSpec::annuli(2).unwrap();
        let r = rho_interior(&u, 0.5).unwrap();
        assert!(!r.empty);
        assert_eq!(r.hausdorff, 0.5);
        assert!(r.set.contains([0.0, 8.0]));
        assert!(!r.set.contains([0.0, 8.7]));
    }

    #[test]
    fn balls_shrink_and_vanish() {
        let u = SupportSpec::new(
            2,
            SupportKind::BallUnion {
                centers: vec![[0.0, 0.0], [5.0, 0.0]],
                radii: vec![2.0, 0.5],
            },
        )
        .unwrap();
        let r = rho_interior(&u, 1.0).unwrap();
        assert!(r.set.contains([0.9, 0.0]) && !r.set.contains([1.1, 0.0]));
        // the small ball is gone; its far edge is 5.5 - 1 from the survivor
        assert!((r.hausdorff - 4.5).abs() < 1e-12);
        let tiny = SupportSpec::ball(2, [0.0, 0.0], 0.5).unwrap();
        let r = rho_interior(&tiny, 1.0).unwrap();
        assert!(r.empty && r.hausdorff.is_infinite());
    }

    #[test]
    fn subgraph_offset_is_normal() {
        let u = SupportSpec::subgraph(2, Gamma::LinearCone { alpha: 1.0 }).unwrap();
        let r = rho_interior(&u, 1.0).unwrap();
        // interior points of U_rho sit at least rho from the complement
        for p in [[0.0, -1.5], [3.0, 1.5], [-7.0, 5.0]] {
            if r.set.contains(p) {
                assert!(u.interior_distance(p) >= 1.0 - 1e-6, "{p:?}");
            }
        }
        assert!(r.set.contains([0.0, -2f64.sqrt() - 1e-6]));
        assert!(!r.set.contains([0.0, -2f64.sqrt() + 1e-6]));
    }

    #[test]
    fn mask_erosion() {
        let ball = SupportSpec::ball(2, [0.0, 0.0], 3.0).unwrap();
        let m = RasterMask::from_spec(&ball, [-5.0, -5.0], 0.1, 101, 101).unwrap();
        let u = SupportSpec::new(2, SupportKind::Mask(m)).unwrap();
        let r = rho_interior(&u, 1.0).unwrap();
        assert!((r.hausdorff - 1.0).abs() <= 0.15, "{}", r.hausdorff);
    }
}
