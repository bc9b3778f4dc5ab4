use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{norm, sub, Point, SupportKind, SupportSpec};
use crate::error::{Error, Result};

/// Closed axis-aligned rectangle `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: Point,
    pub hi: Point,
}

impl Window {
    pub fn new(lo: Point, hi: Point) -> Self {
        Self { lo, hi }
    }

    /// Square `[-r, r]^2` around `center`.
    pub fn around(center: Point, r: f64) -> Self {
        Self {
            lo: [center[0] - r, center[1] - r],
            hi: [center[0] + r, center[1] + r],
        }
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.lo[0] && p[0] <= self.hi[0] && p[1] >= self.lo[1] && p[1] <= self.hi[1]
    }
}

/// Binary occupancy on the cell centers `origin + (i h, j h)`, stored row by
/// row (`j` slow, `i` fast).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RasterMask {
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<bool>,
}

impl RasterMask {
    pub fn empty(origin: Point, h: f64, nx: usize, ny: usize) -> Result<Self> {
        let m = Self {
            origin,
            h,
            nx,
            ny,
            cells: vec![false; nx * ny],
        };
        m.validate()?;
        Ok(m)
    }

    /// Occupancy of `spec` sampled at cell centers.
    pub fn from_spec(spec: &SupportSpec, origin: Point, h: f64, nx: usize, ny: usize) -> Result<Self> {
        let mut m = Self::empty(origin, h, nx, ny)?;
        m.cells.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, c) in row.iter_mut().enumerate() {
                *c = spec.contains([origin[0] + i as f64 * h, origin[1] + j as f64 * h]);
            }
        });
        Ok(m)
    }

    /// A mask with the same grid and occupancy given by `pred` on centers.
    pub fn map_centers<F: Fn(Point) -> bool + Sync>(&self, pred: F) -> Self {
        let mut m = self.clone();
        let (o, h, nx) = (self.origin, self.h, self.nx);
        m.cells.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, c) in row.iter_mut().enumerate() {
                *c = pred([o[0] + i as f64 * h, o[1] + j as f64 * h]);
            }
        });
        m
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) || self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidInput(
                "raster mask needs positive spacing and a nonempty window".into(),
            ));
        }
        if self.cells.len() != self.nx * self.ny {
            return Err(Error::InvalidInput(format!(
                "raster mask has {} cells, expected {}",
                self.cells.len(),
                self.nx * self.ny
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[j * self.nx + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.cells[j * self.nx + i] = v;
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    /// Window spanned by the cell centers.
    pub fn window(&self) -> Window {
        Window::new(self.origin, self.center(self.nx - 1, self.ny - 1))
    }

    /// Cell whose center is nearest to `p`, if inside the grid.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let fi = ((p[0] - self.origin[0]) / self.h).round();
        let fj = ((p[1] - self.origin[1]) / self.h).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn contains_point(&self, p: Point) -> bool {
        self.cell_of(p).is_some_and(|(i, j)| self.get(i, j))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (self.origin[0] - other.origin[0]).abs() <= 1e-9 * self.h
            && (self.origin[1] - other.origin[1]).abs() <= 1e-9 * self.h
    }

    fn occupied_centers(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).filter(move |&i| self.get(i, j)).map(move |i| self.center(i, j))
        })
    }

    /// Distance to the nearest occupied center; infinite for an empty mask.
    pub fn distance_to_occupied(&self, p: Point) -> f64 {
        if self.contains_point(p) {
            return 0.0;
        }
        self.occupied_centers()
            .map(|c| norm(sub(p, c)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to the nearest vacant center, counting the ring of centers
    /// just outside the grid as vacant.
    pub fn distance_to_vacant(&self, p: Point) -> f64 {
        if !self.contains_point(p) {
            return 0.0;
        }
        let w = self.window();
        let h = self.h;
        let mut best = (p[0] - (w.lo[0] - h))
            .min(w.hi[0] + h - p[0])
            .min(p[1] - (w.lo[1] - h))
            .min(w.hi[1] + h - p[1]);
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !self.get(i, j) {
                    best = best.min(norm(sub(p, self.center(i, j))));
                }
            }
        }
        best
    }

    fn grid_like(&self, cells: Vec<bool>) -> Self {
        Self {
            origin: self.origin,
            h: self.h,
            nx: self.nx,
            ny: self.ny,
            cells,
        }
    }

    /// Open dilation `{dist < r}` on the same grid.
    pub fn dilate(&self, r: f64) -> Self {
        let d = distance_transform(self);
        self.grid_like(d.iter().map(|v| *v < r).collect())
    }

    /// Centers at distance at least `r` from every vacant center, with the
    /// outside of the grid vacant.
    pub fn erode(&self, r: f64) -> Self {
        // pad by one vacant ring so that the window edge counts as boundary
        let (nx, ny) = (self.nx + 2, self.ny + 2);
        let mut padded = vec![true; nx * ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                padded[(j + 1) * nx + i + 1] = !self.get(i, j);
            }
        }
        let comp = Self {
            origin: [self.origin[0] - self.h, self.origin[1] - self.h],
            h: self.h,
            nx,
            ny,
            cells: padded,
        };
        let d = distance_transform(&comp);
        let mut cells = vec![false; self.nx * self.ny];
        for j in 0..self.ny {
            for i in 0..self.nx {
                cells[j * self.nx + i] = self.get(i, j) && d[(j + 1) * nx + i + 1] >= r;
            }
        }
        self.grid_like(cells)
    }

    /// Cells whose centers lie in `clip` are kept.
    pub fn clipped(&self, clip: &Window) -> Self {
        let mut m = self.clone();
        for j in 0..self.ny {
            for i in 0..self.nx {
                if !clip.contains(self.center(i, j)) {
                    m.set(i, j, false);
                }
            }
        }
        m
    }
}

const FAR: f64 = 1e30;

/// Exact squared 1D distance transform of a sampled function (lower envelope
/// of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if f[q] >= FAR {
            continue;
        }
        if f[v[0]] >= FAR {
            v[0] = q;
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    if f[v[0]] >= FAR {
        out.iter_mut().for_each(|o| *o = FAR);
        return;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Euclidean distance from each cell center to the nearest occupied center,
/// in physical units; `+inf` everywhere for an empty mask.
pub fn distance_transform(mask: &RasterMask) -> Vec<f64> {
    let (nx, ny) = (mask.nx, mask.ny);
    // columns first: squared distances in cells along j
    let mut cols = vec![0.0; nx * ny];
    let col_data: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let f: Vec<f64> = (0..ny).map(|j| if mask.get(i, j) { 0.0 } else { FAR }).collect();
            let mut out = vec![0.0; ny];
            let mut v = vec![0usize; ny];
            let mut z = vec![0.0; ny + 1];
            edt_1d(&f, &mut out, &mut v, &mut z);
            out
        })
        .collect();
    for (i, col) in col_data.iter().enumerate() {
        for j in 0..ny {
            cols[j * nx + i] = col[j];
        }
    }
    let h = mask.h;
    let mut result = vec![0.0; nx * ny];
    result
        .par_chunks_mut(nx)
        .zip(cols.par_chunks(nx))
        .for_each(|(row_out, row_in)| {
            let mut out = vec![0.0; nx];
            let mut v = vec![0usize; nx];
            let mut z = vec![0.0; nx + 1];
            edt_1d(row_in, &mut out, &mut v, &mut z);
            for (o, d2) in row_out.iter_mut().zip(&out) {
                *o = if *d2 >= FAR { f64::INFINITY } else { d2.sqrt() * h };
            }
        });
    result
}

/// Hausdorff distance between two masks on the same grid, optionally after
/// intersecting both with `clip`. Both empty gives 0, exactly one empty gives
/// `+inf`.
pub fn hausdorff(a: &RasterMask, b: &RasterMask, clip: Option<&Window>) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::InvalidInput(
            "hausdorff needs masks on the same grid".into(),
        ));
    }
    let (a, b) = match clip {
        Some(w) => (a.clipped(w), b.clipped(w)),
        None => (a.clone(), b.clone()),
    };
    let (na, nb) = (a.count(), b.count());
    if na == 0 && nb == 0 {
        return Ok(0.0);
    }
    if na == 0 || nb == 0 {
        return Ok(f64::INFINITY);
    }
    let da = distance_transform(&a);
    let db = distance_transform(&b);
    let directed = |m: &RasterMask, d: &[f64]| {
        m.cells
            .iter()
            .zip(d)
            .filter(|(c, _)| **c)
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    };
    Ok(directed(&a, &db).max(directed(&b, &da)))
}

/// `U + B_r` as an open dilation. Half-spaces and balls stay in closed form;
/// masks are dilated on their grid.
pub fn minkowski_dilate(u: &SupportSpec, r: f64) -> Result<SupportSpec> {
    if !(r >= 0.0) {
        return Err(Error::Domain {
            value: r,
            domain: "[0, inf)",
        });
    }
    let kind = match &u.kind {
        SupportKind::HalfSpace { normal, offset } => SupportKind::HalfSpace {
            normal: *normal,
            offset: offset + r,
        },
        SupportKind::Mask(m) => SupportKind::Mask(m.dilate(r)),
        _ => SupportKind::Dilated {
            base: Box::new(u.clone()),
            radius: r,
        },
    };
    SupportSpec::new(u.dim, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(mask: &RasterMask) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; mask.nx * mask.ny];
        for j in 0..mask.ny {
            for i in 0..mask.nx {
                for jj in 0..mask.ny {
                    for ii in 0..mask.nx {
                        if mask.get(ii, jj) {
                            let d = norm(sub(mask.center(i, j), mask.center(ii, jj)));
                            let o = &mut out[j * mask.nx + i];
                            *o = o.min(d);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn three_four_five() {
        let mut m = RasterMask::empty([0.0, 0.0], 1.0, 8, 8).unwrap();
        m.set(0, 0, true);
        let d = distance_transform(&m);
        assert_eq!(d[4 * 8 + 3], 5.0);
    }

    #[test]
    fn full_and_empty_masks() {
        let mut m = RasterMask::empty([0.0, 0.0], 0.5, 5, 3).unwrap();
        assert!(distance_transform(&m).iter().all(|v| v.is_infinite()));
        m.cells.iter_mut().for_each(|c| *c = true);
        assert!(distance_transform(&m).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hausdorff_conventions_and_balls() {
        let h = 0.02;
        let n = 301;
        let o = [-3.0, -3.0];
        let small = RasterMask::from_spec(&SupportSpec::ball(2, [0.0, 0.0], 1.0).unwrap(), o, h, n, n).unwrap();
        let big = RasterMask::from_spec(&SupportSpec::ball(2, [0.0, 0.0], 2.0).unwrap(), o, h, n, n).unwrap();
        let empty = RasterMask::empty(o, h, n, n).unwrap();
        assert_eq!(hausdorff(&small, &small, None).unwrap(), 0.0);
        assert_eq!(hausdorff(&small, &empty, None).unwrap(), f64::INFINITY);
        assert_eq!(hausdorff(&empty, &empty, None).unwrap(), 0.0);
        let d = hausdorff(&small, &big, None).unwrap();
        assert!((d - 1.0).abs() <= h, "{d}");
        let other = RasterMask::empty([0.0, 0.0], h, n, n).unwrap();
        assert!(hausdorff(&small, &other, None).is_err());
    }

    #[test]
    fn mask_and_analytic_dilation_agree() {
        let ball = SupportSpec::ball(2, [0.3, -0.2], 1.5).unwrap();
        let (o, h, n) = ([-4.0, -4.0], 0.05, 161);
        let mask = RasterMask::from_spec(&ball, o, h, n, n).unwrap();
        let raster = mask.dilate(1.0);
        let analytic = RasterMask::from_spec(&minkowski_dilate(&ball, 1.0).unwrap(), o, h, n, n).unwrap();
        assert!(hausdorff(&raster, &analytic, None).unwrap() <= h + 1e-12);
        let hs = minkowski_dilate(&SupportSpec::half_space(2, [0.0, 1.0], 0.0).unwrap(), 1.0).unwrap();
        assert!(matches!(hs.kind, SupportKind::HalfSpace { offset, .. } if offset == 1.0));
        let point = minkowski_dilate(&SupportSpec::ball(2, [0.0, 0.0], 0.0).unwrap(), 2.0).unwrap();
        assert!(point.contains([1.99, 0.0]) && !point.contains([2.0, 0.0]));
    }

    #[test]
    fn erosion_respects_window_edge() {
        let mut m = RasterMask::empty([0.0, 0.0], 1.0, 7, 7).unwrap();
        m.cells.iter_mut().for_each(|c| *c = true);
        let e = m.erode(3.0);
        // only the center is 4 cells from the vacant ring, the rest are closer
        assert_eq!(e.count(), 9);
        assert!(e.get(3, 3));
    }

    fn mask_strategy() -> impl Strategy<Value = RasterMask> {
        (1usize..=32, 1usize..=32, 0.05f64..0.95).prop_flat_map(|(nx, ny, p)| {
            proptest::collection::vec(proptest::bool::weighted(p), nx * ny).prop_map(move |cells| RasterMask {
                origin: [0.0, 0.0],
                h: 1.0,
                nx,
                ny,
                cells,
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn edt_matches_brute_force(m in mask_strategy()) {
            let fast = distance_transform(&m);
            let slow = brute(&m);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!(a == b || (a - b).abs() < 1e-9, "{} vs {}", a, b);
            }
        }

        #[test]
        fn hausdorff_is_a_metric(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut make = || {
                let mut m = RasterMask::empty([0.0, 0.0], 1.0, 12, 12).unwrap();
                m.cells.iter_mut().for_each(|c| *c = rng.gen_bool(0.3));
                m.set(rng.gen_range(0..12), rng.gen_range(0..12), true);
                m
            };
            let (a, b, c) = (make(), make(), make());
            let ab = hausdorff(&a, &b, None).unwrap();
            prop_assert_eq!(ab, hausdorff(&b, &a, None).unwrap());
            let bc = hausdorff(&b, &c, None).unwrap();
            let ac = hausdorff(&a, &c, None).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
