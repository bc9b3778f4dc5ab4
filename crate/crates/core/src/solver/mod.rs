//! Explicit finite differences for `u_t = Δu + f(u)` on a line, a plane or
//! the radial profile of an `N`-dimensional radial solution.
//!
//! Cells are centred: cell `(i, j)` has center `origin + ((i + 1/2) h,
//! (j + 1/2) h)`, so that the window edges are cell faces and zero-flux
//! boundaries are exact mirrors. The update is one Euler step on the full
//! right-hand side, which is monotone when
//! `dt (2 d / h^2 + L) <= 1` with `d` the dimension factor and `L` the largest
//! negative slope of `f`.

mod snapshot;

pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, MAGIC};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RasterMask, SupportKind, SupportSpec, Window};
use crate::reaction::ReactionTerm;

/// Largest tolerated excursion outside `[0, 1]` before clamping.
pub const CLAMP_TOL: f64 = 1e-12;
/// Values below this are set to zero; the linearized growth over any
/// desk-scale run cannot lift them to a visible size.
pub const FLUSH_BELOW: f64 = 1e-150;
pub const DEFAULT_SIGMA: f64 = 0.9;
pub const DEFAULT_CONTAMINATION_TOL: f64 = 1e-4;

/// Geometry of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// One row along `x_N`.
    Line,
    Plane,
    /// Radial profile `u(t, r)` of a solution in dimension `n`.
    Radial { n: usize },
}

impl Mode {
    pub fn code(self) -> u8 {
        match self {
            Mode::Line => 0,
            Mode::Plane => 1,
            Mode::Radial { .. } => 2,
        }
    }

    /// Space dimension of the underlying solution.
    pub fn dimension(self) -> usize {
        match self {
            Mode::Line => 1,
            Mode::Plane => 2,
            Mode::Radial { n } => n,
        }
    }

    /// Factor `d` in the stability bound `dt <= sigma h^2 / (2 d)`.
    pub fn dim_factor(self) -> f64 {
        match self {
            Mode::Line => 1.0,
            Mode::Plane => 2.0,
            // the center cell couples with weight N/h^2
            Mode::Radial { n } => (n as f64 / 2.0).max(1.0),
        }
    }
}

/// Cell-centred rectangular grid. Lines and radial grids have `nx = 1` and
/// run along `x_N` (the radius for radial grids, whose origin is 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(flatten)]
    pub mode: Mode,
    /// Lower-left corner of the window.
    pub origin: Point,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

fn cells(lo: f64, hi: f64, h: f64) -> Result<usize> {
    if !(hi > lo && h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "window [{lo}, {hi}] with spacing {h} is empty"
        )));
    }
    let n = ((hi - lo) / h).round();
    if !(3.0..=1e9).contains(&n) {
        return Err(Error::InvalidInput(format!(
            "window [{lo}, {hi}] with spacing {h} gives {n} cells"
        )));
    }
    Ok(n as usize)
}

impl Grid {
    pub fn line(lo: f64, hi: f64, h: f64) -> Result<Self> {
        Ok(Self {
            mode: Mode::Line,
            origin: [0.0, lo],
            h,
            nx: 1,
            ny: cells(lo, hi, h)?,
        })
    }

    /// `[x0, x1] x [y0, y1]` in `(x', x_N)`.
    pub fn plane(xs: [f64; 2], ys: [f64; 2], h: f64) -> Result<Self> {
        Ok(Self {
            mode: Mode::Plane,
            origin: [xs[0], ys[0]],
            h,
            nx: cells(xs[0], xs[1], h)?,
            ny: cells(ys[0], ys[1], h)?,
        })
    }

    pub fn radial(n: usize, r_max: f64, h: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("radial dimension must be positive".into()));
        }
        Ok(Self {
            mode: Mode::Radial { n },
            origin: [0.0, 0.0],
            h,
            nx: 1,
            ny: cells(0.0, r_max, h)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.h > 0.0
            && self.h.is_finite()
            && self.nx >= 1
            && self.ny >= 3
            && self.origin.iter().all(|v| v.is_finite());
        let shape_ok = match self.mode {
            Mode::Plane => self.nx >= 3,
            Mode::Line => self.nx == 1,
            Mode::Radial { n } => self.nx == 1 && n >= 1 && self.origin == [0.0, 0.0],
        };
        if ok && shape_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid grid {self:?}")))
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        [
            if self.mode == Mode::Plane {
                self.origin[0] + (i as f64 + 0.5) * self.h
            } else {
                0.0
            },
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Upper-right corner of the window.
    pub fn far_corner(&self) -> Point {
        [
            self.origin[0] + self.nx as f64 * self.h,
            self.origin[1] + self.ny as f64 * self.h,
        ]
    }

    /// Mask grid with the same cell centers.
    pub fn empty_mask(&self) -> RasterMask {
        let c = self.center(0, 0);
        RasterMask {
            origin: c,
            h: self.h,
            nx: self.nx,
            ny: self.ny,
            cells: vec![false; self.len()],
        }
    }

    /// Largest stable step `sigma h^2 / (2 d)`.
    pub fn cfl_bound(&self, sigma: f64) -> f64 {
        sigma * self.h * self.h / (2.0 * self.mode.dim_factor())
    }

    /// Largest step keeping the Euler update monotone for `f`.
    pub fn monotone_bound(&self, f: &ReactionTerm) -> f64 {
        let neg = crate::reaction::samples()
            .map(|s| -f.derivative(s))
            .fold(0.0, f64::max);
        1.0 / (2.0 * self.mode.dim_factor() / (self.h * self.h) + neg)
    }

    /// Measure of cell `j` in radial mode, up to the sphere area.
    fn radial_volume(&self, j: usize, n: usize) -> f64 {
        let (a, b) = (j as f64 * self.h, (j + 1) as f64 * self.h);
        (b.powi(n as i32) - a.powi(n as i32)) / n as f64
    }
}

/// A time-stamped discrete solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub t: f64,
    /// Row-major, `j` slow.
    pub values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: Grid, v: f64) -> Self {
        Self {
            grid,
            t: 0.0,
            values: vec![v; grid.len()],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[j * nx..(j + 1) * nx]
    }

    /// Values along `x_N` at column `i`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.grid.ny).map(|j| self.get(i, j)).collect()
    }

    /// Fractional cell coordinates of `p`, where cell centers are integers.
    pub fn cell_coords(&self, p: Point) -> (f64, f64) {
        let g = &self.grid;
        let fi = if g.mode == Mode::Plane {
            (p[0] - g.origin[0]) / g.h - 0.5
        } else {
            0.0
        };
        let y = match g.mode {
            Mode::Radial { .. } => p[0].hypot(p[1]),
            _ => p[1],
        };
        (fi, (y - g.origin[1]) / g.h - 0.5)
    }

    /// Whether `p` lies in the closed window.
    pub fn in_window(&self, p: Point) -> bool {
        let (fi, fj) = self.cell_coords(p);
        let g = &self.grid;
        fi >= -0.5 && fi <= g.nx as f64 - 0.5 && fj >= -0.5 && fj <= g.ny as f64 - 0.5
    }

    /// Bilinear interpolation at `p`; `None` outside the window. Between the
    /// outer cell centers and the faces the value is constant, as the mirror
    /// ghosts dictate. Radial fields are sampled at `|p|`.
    pub fn sample(&self, p: Point) -> Option<f64> {
        if !self.in_window(p) {
            return None;
        }
        let (fi, fj) = self.cell_coords(p);
        let g = &self.grid;
        let fi = fi.clamp(0.0, (g.nx - 1) as f64);
        let fj = fj.clamp(0.0, (g.ny - 1) as f64);
        let i0 = (fi.floor() as usize).min(g.nx.saturating_sub(2));
        let j0 = (fj.floor() as usize).min(g.ny - 2);
        let (a, b) = (fi - i0 as f64, fj - j0 as f64);
        if g.nx == 1 {
            return Some((1.0 - b) * self.get(0, j0) + b * self.get(0, j0 + 1));
        }
        Some(
            (1.0 - a) * (1.0 - b) * self.get(i0, j0)
                + a * (1.0 - b) * self.get(i0 + 1, j0)
                + (1.0 - a) * b * self.get(i0, j0 + 1)
                + a * b * self.get(i0 + 1, j0 + 1),
        )
    }

    /// `sum u h^N`, with the radial cell measures in radial mode (without the
    /// sphere area).
    pub fn mass(&self) -> f64 {
        let g = &self.grid;
        match g.mode {
            Mode::Line => self.values.iter().sum::<f64>() * g.h,
            Mode::Plane => self.values.iter().sum::<f64>() * g.h * g.h,
            Mode::Radial { n } => self
                .values
                .iter()
                .enumerate()
                .map(|(j, v)| v * g.radial_volume(j, n))
                .sum(),
        }
    }

    /// The field on the window doubled across its left face, for data
    /// symmetric under `x' -> 2 x'_0 - x'` with `x'_0` on that face.
    pub fn unfold_left(&self) -> Field {
        let g = self.grid;
        let nx = 2 * g.nx;
        let mut values = Vec::with_capacity(nx * g.ny);
        for j in 0..g.ny {
            let row = self.row(j);
            values.extend(row.iter().rev());
            values.extend_from_slice(row);
        }
        Field {
            grid: Grid {
                nx,
                origin: [g.origin[0] - g.nx as f64 * g.h, g.origin[1]],
                ..g
            },
            t: self.t,
            values,
        }
    }

    /// The field doubled across its bottom face.
    pub fn unfold_bottom(&self) -> Field {
        let g = self.grid;
        let mut values = Vec::with_capacity(2 * g.len());
        for j in (0..g.ny).rev() {
            values.extend_from_slice(self.row(j));
        }
        values.extend_from_slice(&self.values);
        Field {
            grid: Grid {
                ny: 2 * g.ny,
                origin: [g.origin[0], g.origin[1] - g.ny as f64 * g.h],
                ..g
            },
            t: self.t,
            values,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)))
    }
}

/// Non-fatal observations made while rasterizing initial data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterWarning {
    EmptyInWindow,
    FillsWindow,
    SubCellFeatures,
}

/// `1_U` sampled at cell centers.
pub fn rasterize_initial(u: &SupportSpec, grid: &Grid) -> Result<(Field, Vec<RasterWarning>)> {
    grid.validate()?;
    let mut field = Field::constant(*grid, 0.0);
    let nx = grid.nx;
    field.values.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            if u.contains(grid.center(i, j)) {
                *v = 1.0;
            }
        }
    });
    let mut warnings = Vec::new();
    let ones = field.values.iter().filter(|v| **v == 1.0).count();
    if ones == 0 {
        log::warn!("support does not meet the window");
        warnings.push(RasterWarning::EmptyInWindow);
    } else if ones == field.values.len() {
        log::warn!("support covers the whole window");
        warnings.push(RasterWarning::FillsWindow);
    }
    if let SupportKind::GaussianTube { shrink } = u.kind {
        // thickness 2 e^{-x^2} drops below a cell inside the window
        let reach = grid.origin[0].abs().max(grid.far_corner()[0].abs());
        if shrink == 0.0 && 2.0 * (-reach * reach).exp() < grid.h {
            log::warn!("tube is thinner than a cell in part of the window");
            warnings.push(RasterWarning::SubCellFeatures);
        }
    }
    Ok((field, warnings))
}

/// Window faces watched by the contamination check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    /// Lowest `x_N` row (the center for radial grids, never checked there).
    Bottom,
    Top,
    Left,
    Right,
}

pub const ALL_FACES: [Face; 4] = [Face::Bottom, Face::Top, Face::Left, Face::Right];

fn face_cells(grid: &Grid, faces: &[Face], region: Option<&Window>) -> Vec<usize> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = Vec::new();
    for f in faces {
        match (f, grid.mode) {
            (Face::Bottom, Mode::Radial { .. }) => {}
            (Face::Bottom, _) => out.extend(0..nx),
            (Face::Top, _) => out.extend((ny - 1) * nx..ny * nx),
            (Face::Left | Face::Right, Mode::Line | Mode::Radial { .. }) => {}
            (Face::Left, Mode::Plane) => out.extend((0..ny).map(|j| j * nx)),
            (Face::Right, Mode::Plane) => out.extend((0..ny).map(|j| j * nx + nx - 1)),
        }
    }
    if let Some(w) = region {
        out.retain(|k| w.contains(grid.center(k % nx, k / nx)));
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn default_faces() -> Vec<Face> {
    ALL_FACES.to_vec()
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

fn default_contamination() -> f64 {
    DEFAULT_CONTAMINATION_TOL
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub support: SupportSpec,
    pub reaction: ReactionTerm,
    pub grid: Grid,
    /// `None` picks the largest step allowed by both bounds times sigma.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma_cfl: f64,
    pub t_final: f64,
    /// Requested snapshot times; each is taken at the nearest step.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_contamination")]
    pub contamination_tol: f64,
    #[serde(default = "default_faces")]
    pub sentinel_faces: Vec<Face>,
    /// Only boundary cells with centers in this window are watched.
    #[serde(default)]
    pub sentinel_region: Option<Window>,
}

impl RunConfig {
    pub fn new(support: SupportSpec, reaction: ReactionTerm, grid: Grid, t_final: f64) -> Self {
        Self {
            support,
            reaction,
            grid,
            dt: None,
            sigma_cfl: DEFAULT_SIGMA,
            t_final,
            snapshots: Vec::new(),
            contamination_tol: DEFAULT_CONTAMINATION_TOL,
            sentinel_faces: default_faces(),
            sentinel_region: None,
        }
    }

    /// `count` snapshots evenly spaced on `(0, t_final]`.
    pub fn with_even_snapshots(mut self, count: usize) -> Self {
        self.snapshots = (1..=count)
            .map(|k| self.t_final * k as f64 / count as f64)
            .collect();
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_faces(mut self, faces: &[Face]) -> Self {
        self.sentinel_faces = faces.to_vec();
        self
    }

    pub fn with_sentinel_region(mut self, region: Window) -> Self {
        self.sentinel_region = Some(region);
        self
    }

    /// The step used by the run, validated against both bounds.
    pub fn time_step(&self) -> Result<f64> {
        self.grid.validate()?;
        if !(self.sigma_cfl > 0.0 && self.sigma_cfl <= 1.0) {
            return Err(Error::InvalidInput("sigma_cfl must lie in (0, 1]".into()));
        }
        let cfl = self.grid.cfl_bound(self.sigma_cfl);
        let mono = self.grid.monotone_bound(&self.reaction);
        match self.dt {
            None => Ok(cfl.min(self.sigma_cfl * mono)),
            Some(dt) => {
                if !(dt > 0.0) {
                    return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
                }
                if dt > cfl {
                    return Err(Error::Cfl { dt, bound: cfl });
                }
                if dt > mono {
                    return Err(Error::Cfl { dt, bound: mono });
                }
                Ok(dt)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.time_step()?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidInput("t_final must be positive".into()));
        }
        if self.snapshots.iter().any(|t| !(*t >= 0.0 && *t <= self.t_final)) {
            return Err(Error::InvalidInput("snapshot times must lie in [0, t_final]".into()));
        }
        if !(self.contamination_tol > 0.0) {
            return Err(Error::InvalidInput("contamination tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Explicit Euler stepper holding the current state.
pub struct Solver {
    grid: Grid,
    reaction: ReactionTerm,
    dt: f64,
    u: Vec<f64>,
    next: Vec<f64>,
    steps: u64,
    /// Radial coupling weights `dt/h^2 * A_face / V_cell` toward `j-1`, `j+1`.
    radial: Vec<(f64, f64)>,
    max_clamp: f64,
}

#[derive(Default, Clone, Copy)]
struct BandReport {
    clamp: f64,
    bad: Option<f64>,
}

impl BandReport {
    fn merge(self, o: Self) -> Self {
        Self {
            clamp: self.clamp.max(o.clamp),
            bad: self.bad.or(o.bad),
        }
    }
}

#[inline]
fn finish(v: f64, rep: &mut BandReport) -> f64 {
    if (0.0..=1.0).contains(&v) {
        return if v < FLUSH_BELOW { 0.0 } else { v };
    }
    if !(-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&v) {
        rep.bad.get_or_insert(v);
        return v;
    }
    let c = v.clamp(0.0, 1.0);
    rep.clamp = rep.clamp.max((c - v).abs());
    c
}

/// Rows per parallel band.
const BAND_ROWS: usize = 16;

impl Solver {
    pub fn new(initial: Field, reaction: ReactionTerm, dt: f64) -> Result<Self> {
        let grid = initial.grid;
        grid.validate()?;
        let radial = match grid.mode {
            Mode::Radial { n } => {
                let c = dt / (grid.h * grid.h);
                (0..grid.ny)
                    .map(|j| {
                        let vol = grid.radial_volume(j, n) / grid.h;
                        let inner = (j as f64 * grid.h).powi(n as i32 - 1);
                        let outer = if j + 1 == grid.ny {
                            0.0
                        } else {
                            ((j + 1) as f64 * grid.h).powi(n as i32 - 1)
                        };
                        (c * inner / vol, c * outer / vol)
                    })
                    .collect()
            }
            _ => Vec::new(),
        };
        let mut s = Self {
            grid,
            reaction,
            dt,
            next: vec![0.0; initial.values.len()],
            u: initial.values,
            steps: 0,
            radial,
            max_clamp: 0.0,
        };
        s.steps = (initial.t / dt).round() as u64;
        Ok(s)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn t(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    /// Largest clamp correction applied so far.
    pub fn max_clamp(&self) -> f64 {
        self.max_clamp
    }

    pub fn field(&self) -> Field {
        Field {
            grid: self.grid,
            t: self.t(),
            values: self.u.clone(),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let rep = match self.grid.mode {
            Mode::Plane => self.step_plane(),
            Mode::Line => self.step_line(),
            Mode::Radial { .. } => self.step_radial(),
        };
        std::mem::swap(&mut self.u, &mut self.next);
        self.steps += 1;
        if let Some(v) = rep.bad {
            if !v.is_finite() {
                return Err(Error::NonFinite { t: self.t() });
            }
            return Err(Error::SchemeSoundness(format!(
                "value {v:e} left [0, 1] by more than {CLAMP_TOL:e} at t = {}",
                self.t()
            )));
        }
        self.max_clamp = self.max_clamp.max(rep.clamp);
        Ok(())
    }

    pub fn advance(&mut self, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn step_plane(&mut self) -> BandReport {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let c = self.dt / (self.grid.h * self.grid.h);
        let dt = self.dt;
        let f = &self.reaction;
        let u = &self.u;
        self.next
            .par_chunks_mut(nx * BAND_ROWS)
            .enumerate()
            .map(|(b, band)| {
                let mut rep = BandReport::default();
                for (k, out) in band.chunks_mut(nx).enumerate() {
                    let j = b * BAND_ROWS + k;
                    let mid = &u[j * nx..(j + 1) * nx];
                    let dn = if j == 0 { mid } else { &u[(j - 1) * nx..j * nx] };
                    let up = if j + 1 == ny { mid } else { &u[(j + 1) * nx..(j + 2) * nx] };
                    for i in 0..nx {
                        let v = mid[i];
                        let l = if i == 0 { v } else { mid[i - 1] };
                        let r = if i + 1 == nx { v } else { mid[i + 1] };
                        let lap = l + r + up[i] + dn[i] - 4.0 * v;
                        out[i] = finish(v + c * lap + dt * f.value(v), &mut rep);
                    }
                }
                rep
            })
            .reduce(BandReport::default, BandReport::merge)
    }

    fn step_line(&mut self) -> BandReport {
        let n = self.grid.ny;
        let c = self.dt / (self.grid.h * self.grid.h);
        let dt = self.dt;
        let f = &self.reaction;
        let u = &self.u;
        let mut rep = BandReport::default();
        for j in 0..n {
            let v = u[j];
            let l = if j == 0 { v } else { u[j - 1] };
            let r = if j + 1 == n { v } else { u[j + 1] };
            self.next[j] = finish(v + c * (l + r - 2.0 * v) + dt * f.value(v), &mut rep);
        }
        rep
    }

    fn step_radial(&mut self) -> BandReport {
        let n = self.grid.ny;
        let dt = self.dt;
        let f = &self.reaction;
        let u = &self.u;
        let mut rep = BandReport::default();
        for j in 0..n {
            let v = u[j];
            let (a, b) = self.radial[j];
            let l = if j == 0 { v } else { u[j - 1] };
            let r = if j + 1 == n { v } else { u[j + 1] };
            self.next[j] = finish(v + a * (l - v) + b * (r - v) + dt * f.value(v), &mut rep);
        }
        rep
    }
}

/// A stored state with its contamination verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub field: Field,
    /// Largest `|u - u0|` over the watched boundary cells.
    pub boundary_deviation: f64,
    pub contaminated: bool,
}

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dt: f64,
    pub steps: u64,
    pub max_clamp: f64,
    /// Time of the first contaminated snapshot.
    pub contaminated_at: Option<f64>,
    pub warnings: Vec<RasterWarning>,
}

/// Integrates to `t_final`, handing each snapshot to `sink` as it is taken.
/// A snapshot at `t_final` is always emitted.
pub fn run_with<F>(config: &RunConfig, mut sink: F) -> Result<RunSummary>
where
    F: FnMut(&Snapshot) -> Result<()>,
{
    config.validate()?;
    let dt = config.time_step()?;
    let (initial, warnings) = rasterize_initial(&config.support, &config.grid)?;
    let watched = face_cells(&config.grid, &config.sentinel_faces, config.sentinel_region.as_ref());
    let start: Vec<f64> = watched.iter().map(|k| initial.values[*k]).collect();
    let mut marks: Vec<u64> = config
        .snapshots
        .iter()
        .map(|t| (t / dt).round() as u64)
        .collect();
    let last = (config.t_final / dt).round() as u64;
    marks.push(last);
    marks.sort_unstable();
    marks.dedup();
    let mut solver = Solver::new(initial, config.reaction.clone(), dt)?;
    let mut contaminated_at = None;
    for m in marks {
        solver.advance(m - solver.steps())?;
        let dev = watched
            .iter()
            .zip(&start)
            .map(|(k, u0)| (solver.values()[*k] - u0).abs())
            .fold(0.0, f64::max);
        let contaminated = dev > config.contamination_tol;
        if contaminated && contaminated_at.is_none() {
            log::warn!("boundary deviation {dev:.3e} at t = {}", solver.t());
            contaminated_at = Some(solver.t());
        }
        sink(&Snapshot {
            field: solver.field(),
            boundary_deviation: dev,
            contaminated,
        })?;
    }
    Ok(RunSummary {
        dt,
        steps: solver.steps(),
        max_clamp: solver.max_clamp(),
        contaminated_at,
        warnings,
    })
}

/// Runs `config` and keeps every snapshot.
pub fn run(config: &RunConfig) -> Result<(Vec<Snapshot>, RunSummary)> {
    let mut out = Vec::new();
    let summary = run_with(config, |s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok((out, summary))
}

/// Runs two configs that differ only in the support, with ordered initial
/// data, and checks that the order holds at every snapshot.
pub fn comparison_check(a: &RunConfig, b: &RunConfig) -> Result<bool> {
    if a.grid != b.grid
        || a.reaction != b.reaction
        || a.time_step()? != b.time_step()?
        || a.t_final != b.t_final
        || a.snapshots != b.snapshots
    {
        return Err(Error::InvalidInput(
            "comparison needs identical grid, step, reaction and schedule".into(),
        ));
    }
    let (ua, _) = rasterize_initial(&a.support, &a.grid)?;
    let (ub, _) = rasterize_initial(&b.support, &b.grid)?;
    if ua.values.iter().zip(&ub.values).any(|(x, y)| x > y) {
        return Err(Error::InvalidInput("initial data are not ordered".into()));
    }
    let dt = a.time_step()?;
    let mut sa = Solver::new(ua, a.reaction.clone(), dt)?;
    let mut sb = Solver::new(ub, b.reaction.clone(), dt)?;
    let mut marks: Vec<u64> = a.snapshots.iter().map(|t| (t / dt).round() as u64).collect();
    marks.push((a.t_final / dt).round() as u64);
    marks.sort_unstable();
    marks.dedup();
    for m in marks {
        let k = m - sa.steps();
        sa.advance(k)?;
        sb.advance(k)?;
        if sa.values().iter().zip(sb.values()).any(|(x, y)| *x > y + 1e-10) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Gamma;
    use proptest::prelude::*;

    #[test]
    fn equilibria_are_fixed() {
        let g = Grid::plane([-2.0, 2.0], [-2.0, 2.0], 0.1).unwrap();
        for v in [0.0, 1.0] {
            let mut s = Solver::new(Field::constant(g, v), ReactionTerm::logistic(), 0.002).unwrap();
            s.advance(50).unwrap();
            assert!(s.values().iter().all(|x| *x == v));
        }
    }

    #[test]
    fn rasterized_half_space_and_ball() {
        let g = Grid::plane([-5.0, 5.0], [-5.0, 5.0], 0.5).unwrap();
        let hs = SupportSpec::half_space(2, [0.0, 1.0], 0.0).unwrap();
        let (f, w) = rasterize_initial(&hs, &g).unwrap();
        assert!(w.is_empty());
        assert_eq!(f.values.iter().filter(|v| **v == 1.0).count(), g.len() / 2);
        let g = Grid::plane([-1.0, 1.0], [-1.0, 1.0], 0.01).unwrap();
        let ball = SupportSpec::ball(2, [0.0, 0.0], 0.3).unwrap();
        let (f, _) = rasterize_initial(&ball, &g).unwrap();
        let count = f.values.iter().filter(|v| **v == 1.0).count() as f64;
        assert!((count / (900.0 * std::f64::consts::PI) - 1.0).abs() < 0.02, "{count}");
        let tube = SupportSpec::new(2, SupportKind::GaussianTube { shrink: 0.0 }).unwrap();
        let coarse = Grid::plane([-10.0, 10.0], [-10.0, 10.0], 0.5).unwrap();
        let (_, w) = rasterize_initial(&tube, &coarse).unwrap();
        assert!(w.contains(&RasterWarning::SubCellFeatures));
    }

    #[test]
    fn cfl_and_monotone_bounds() {
        let g = Grid::line(0.0, 10.0, 0.1).unwrap();
        let hs = SupportSpec::half_space(1, [0.0, 1.0], 5.0).unwrap();
        let cfg = RunConfig::new(hs, ReactionTerm::logistic(), g, 1.0).with_dt(0.0051);
        assert!(matches!(cfg.time_step(), Err(Error::Cfl { .. })));
        let auto = RunConfig { dt: None, ..cfg };
        // the monotone bound 1 / (2/h^2 + 1) is the tighter one here
        assert!((auto.time_step().unwrap() - 0.9 / 201.0).abs() < 1e-12);
        let r = Grid::radial(3, 10.0, 0.1).unwrap();
        assert!((r.cfl_bound(1.0) - 0.01 / 3.0).abs() < 1e-15);
    }

    fn heat_error(h: f64) -> f64 {
        // u0 = Gaussian of variance 1 per axis, exact at t: variance 1 + 2t
        let g = Grid::plane([-8.0, 8.0], [-8.0, 8.0], h).unwrap();
        let mut f = Field::constant(g, 0.0);
        let gauss = |p: Point, s2: f64| (-(p[0] * p[0] + p[1] * p[1]) / (2.0 * s2)).exp() / s2;
        for j in 0..g.ny {
            for i in 0..g.nx {
                f.values[j * g.nx + i] = gauss(g.center(i, j), 1.0);
            }
        }
        let dt = g.cfl_bound(0.5);
        let steps = (0.5 / dt).round() as u64;
        let mut s = Solver::new(f, ReactionTerm::zero(), dt).unwrap();
        s.advance(steps).unwrap();
        let t = s.t();
        let out = s.field();
        let mut err: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                err = err.max((out.get(i, j) - gauss(g.center(i, j), 1.0 + 2.0 * t)).abs());
            }
        }
        err
    }

    #[test]
    fn second_order_in_space() {
        let (e1, e2) = (heat_error(0.2), heat_error(0.1));
        assert!(e1 / e2 >= 3.5, "{e1} {e2}");
    }

    #[test]
    fn point_mass_matches_heat_kernel() {
        // a unit mass on the center cell spreads into the sampled heat kernel
        let h = 0.05;
        let g = Grid::plane([-4.0, 4.0], [-4.0, 4.0], h).unwrap();
        let mut f = Field::constant(g, 0.0);
        // four center cells share the mass; the grid has a face at 0
        let (ci, cj) = (g.nx / 2, g.ny / 2);
        for (i, j) in [(ci - 1, cj - 1), (ci, cj - 1), (ci - 1, cj), (ci, cj)] {
            f.values[j * g.nx + i] = 1.0 / (4.0 * h * h) * 1e-3;
        }
        let dt = g.cfl_bound(0.9);
        let steps = (1.0 / dt).round() as u64;
        let mut s = Solver::new(f, ReactionTerm::zero(), dt).unwrap();
        s.advance(steps).unwrap();
        let t = s.t();
        let out = s.field();
        let mut err: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let p = g.center(i, j);
                let k = 1e-3 * (-(p[0] * p[0] + p[1] * p[1]) / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t);
                err = err.max((out.get(i, j) - k).abs());
                peak = peak.max(k);
            }
        }
        assert!(err / peak <= 0.02, "{}", err / peak);
    }

    #[test]
    fn diffusion_conserves_mass() {
        for g in [
            Grid::plane([-3.0, 3.0], [-3.0, 3.0], 0.1).unwrap(),
            Grid::line(-3.0, 3.0, 0.05).unwrap(),
            Grid::radial(3, 6.0, 0.05).unwrap(),
        ] {
            let ball = SupportSpec::ball(2, [0.0, 0.0], 1.0).unwrap();
            let (f, _) = rasterize_initial(&ball, &g).unwrap();
            let m0 = f.mass();
            let mut s = Solver::new(f, ReactionTerm::zero(), g.cfl_bound(0.9)).unwrap();
            s.advance(2000).unwrap();
            assert!((s.field().mass() / m0 - 1.0).abs() < 1e-8, "{:?}", g.mode);
        }
    }

    #[test]
    fn subgraph_data_stays_monotone_in_x_n() {
        let g = Grid::plane([-6.0, 6.0], [-6.0, 6.0], 0.2).unwrap();
        let u = SupportSpec::subgraph(2, Gamma::Bounded { amplitude: 2.0, decay: 0.0 }).unwrap();
        let (f, _) = rasterize_initial(&u, &g).unwrap();
        let mut s = Solver::new(f, ReactionTerm::logistic(), g.cfl_bound(0.9)).unwrap();
        for _ in 0..5 {
            s.advance(40).unwrap();
            let fld = s.field();
            for i in 0..g.nx {
                let col = fld.column(i);
                assert!(col.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn radial_matches_plane() {
        let h = 0.1;
        let ball = SupportSpec::ball(2, [0.0, 0.0], 3.0).unwrap();
        let plane = Grid::plane([-25.0, 25.0], [-25.0, 25.0], h).unwrap();
        let radial = Grid::radial(2, 25.0, h).unwrap();
        let dt = plane.cfl_bound(0.9);
        let steps = (10.0 / dt).round() as u64;
        let mut fields = Vec::new();
        for g in [plane, radial] {
            let (f, _) = rasterize_initial(&ball, &g).unwrap();
            let mut s = Solver::new(f, ReactionTerm::logistic(), dt).unwrap();
            s.advance(steps).unwrap();
            fields.push(s.field());
        }
        let mut err: f64 = 0.0;
        for k in 0..200 {
            let r = k as f64 * 0.1;
            for a in [0.0, 0.7, 1.3] {
                let p = [r * f64::sin(a), r * f64::cos(a)];
                err = err.max((fields[0].sample(p).unwrap() - fields[1].sample(p).unwrap()).abs());
            }
        }
        assert!(err <= 0.01, "{err}");
    }

    #[test]
    fn translation_by_whole_cells() {
        let g = Grid::plane([-5.0, 5.0], [-5.0, 5.0], 0.25).unwrap();
        let a = SupportSpec::ball(2, [-0.125, -0.125], 1.3).unwrap();
        let b = SupportSpec::ball(2, [0.375, 0.125], 1.3).unwrap();
        let run = |u: &SupportSpec| {
            let (f, _) = rasterize_initial(u, &g).unwrap();
            let mut s = Solver::new(f, ReactionTerm::logistic(), 0.01).unwrap();
            s.advance(6).unwrap();
            s.field()
        };
        let (fa, fb) = (run(&a), run(&b));
        // shift by (2, 1) cells, compared where the walls are not yet felt
        for j in 10..30 {
            for i in 10..30 {
                assert_eq!(fa.get(i, j).to_bits(), fb.get(i + 2, j + 1).to_bits());
            }
        }
    }

    #[test]
    fn unfolding_matches_full_run() {
        let ball = SupportSpec::ball(2, [0.0, 0.0], 1.5).unwrap();
        let run = |g: Grid| {
            let (f, _) = rasterize_initial(&ball, &g).unwrap();
            let mut s = Solver::new(f, ReactionTerm::logistic(), 0.01).unwrap();
            s.advance(40).unwrap();
            s.field()
        };
        let full = run(Grid::plane([-4.0, 4.0], [-4.0, 4.0], 0.25).unwrap());
        let quarter = run(Grid::plane([0.0, 4.0], [0.0, 4.0], 0.25).unwrap());
        let unfolded = quarter.unfold_left().unfold_bottom();
        assert_eq!(unfolded.grid, full.grid);
        let err = unfolded.values.iter().zip(&full.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn sentinel_region_restricts_watch() {
        let hs = SupportSpec::half_space(2, [-1.0, 1.0], 0.0).unwrap();
        let g = Grid::plane([0.0, 20.0], [0.0, 20.0], 0.25).unwrap();
        let cfg = RunConfig::new(hs, ReactionTerm::logistic(), g, 1.0).with_faces(&[Face::Top]);
        let (_, sum) = run(&cfg).unwrap();
        assert!(sum.contaminated_at.is_some());
        let region = Window::new([0.0, 0.0], [3.0, 20.0]);
        let (_, sum) = run(&cfg.with_sentinel_region(region)).unwrap();
        assert!(sum.contaminated_at.is_none());
    }

    #[test]
    fn contamination_sentinel() {
        let ball = SupportSpec::ball(1, [0.0, 0.0], 2.0).unwrap();
        let clean = RunConfig::new(ball.clone(), ReactionTerm::logistic(), Grid::line(-60.0, 60.0, 0.2).unwrap(), 10.0)
            .with_even_snapshots(4);
        let (snaps, sum) = run(&clean).unwrap();
        assert!(sum.contaminated_at.is_none());
        assert_eq!(snaps.len(), 4);
        assert!(sum.max_clamp <= CLAMP_TOL);
        let tight = RunConfig::new(ball, ReactionTerm::logistic(), Grid::line(-15.0, 15.0, 0.2).unwrap(), 10.0)
            .with_even_snapshots(4);
        let (snaps, sum) = run(&tight).unwrap();
        assert!(sum.contaminated_at.is_some());
        assert!(snaps.last().unwrap().contaminated && !snaps[0].contaminated);
    }

    #[test]
    fn comparison_identical_and_nested() {
        let g = Grid::plane([-5.0, 5.0], [-5.0, 5.0], 0.25).unwrap();
        let mk = |r: f64| {
            RunConfig::new(SupportSpec::ball(2, [0.0, 0.0], r).unwrap(), ReactionTerm::bistable(0.3).unwrap(), g, 2.0)
                .with_even_snapshots(4)
        };
        assert!(comparison_check(&mk(1.0), &mk(1.0)).unwrap());
        assert!(comparison_check(&mk(1.0), &mk(2.0)).unwrap());
        assert!(comparison_check(&mk(2.0), &mk(1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_ordered_masks_stay_ordered(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Grid::plane([-3.0, 3.0], [-3.0, 3.0], 0.25).unwrap();
            let mut small = g.empty_mask();
            small.cells.iter_mut().for_each(|c| *c = rng.gen_bool(0.3));
            let mut big = small.clone();
            big.cells.iter_mut().for_each(|c| *c = *c || rng.gen_bool(0.3));
            let mk = |m: RasterMask| {
                RunConfig::new(SupportSpec::new(2, SupportKind::Mask(m)).unwrap(), ReactionTerm::bistable(0.3).unwrap(), g, 1.0)
                    .with_even_snapshots(5)
            };
            prop_assert!(comparison_check(&mk(small), &mk(big)).unwrap());
        }
    }
}
