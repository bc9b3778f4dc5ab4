//! Shared inputs of the benchmarks.

use rdspread_core::geometry::RasterMask;
use rdspread_core::solver::{Field, Grid};

/// A logistic-like front through the middle of an `n x n` plane window.
pub fn front_field(n: usize) -> Field {
    let half = n as f64 * 0.125;
    let g = Grid::plane([-half, half], [-half, half], 0.25).unwrap();
    let mut f = Field::constant(g, 0.0);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = g.center(i, j);
            f.values[j * g.nx + i] = 1.0 / (1.0 + (p[1] - 0.3 * p[0]).exp());
        }
    }
    f
}

/// A disc in the middle of an `n x n` mask.
pub fn disc_mask(n: usize) -> RasterMask {
    let mut m = RasterMask::empty([0.0, 0.0], 1.0, n, n).unwrap();
    let c = n as f64 / 2.0;
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 + 0.5 - c, j as f64 + 0.5 - c);
            m.set(i, j, x * x + y * y < c * c / 4.0);
        }
    }
    m
}
