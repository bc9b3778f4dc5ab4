//! Grayscale previews of plane fields as binary PGM (P5).

use std::path::Path;

use crate::error::{Error, Result};
use crate::solver::{Field, Mode};

/// `u = 0` maps to 0 and `u = 1` to 255, rounding half up; row `j` of the
/// grid is image row `j`.
pub fn render_preview(field: &Field) -> Result<Vec<u8>> {
    if field.grid.mode != Mode::Plane {
        return Err(Error::InvalidInput(format!(
            "previews need a plane field, got {:?}",
            field.grid.mode
        )));
    }
    let (nx, ny) = (field.grid.nx, field.grid.ny);
    let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
    out.extend(field.values.iter().map(|v| gray(*v)));
    Ok(out)
}

pub fn gray(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn write_preview(field: &Field, path: &Path) -> Result<()> {
    let bytes = render_preview(field)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Grid;

    fn pixels(bytes: &[u8]) -> &[u8] {
        let mut lines = 0;
        let start = bytes.iter().position(|b| {
            lines += (*b == b'\n') as usize;
            lines == 3
        });
        &bytes[start.unwrap() + 1..]
    }

    #[test]
    fn constant_fields() {
        let g = Grid::plane([0.0, 4.0], [0.0, 3.0], 1.0).unwrap();
        let one = render_preview(&Field::constant(g, 1.0)).unwrap();
        assert!(one.starts_with(b"P5\n4 3\n255\n"));
        assert!(pixels(&one).iter().all(|p| *p == 255));
        assert_eq!(pixels(&one).len(), 12);
        let half = render_preview(&Field::constant(g, 0.5)).unwrap();
        assert!(pixels(&half).iter().all(|p| *p == 128));
    }

    #[test]
    fn indicator_matches_mask_in_row_order() {
        let g = Grid::plane([0.0, 3.0], [0.0, 3.0], 1.0).unwrap();
        let mut f = Field::constant(g, 0.0);
        f.values[1] = 1.0;
        f.values[5] = 1.0;
        let img = render_preview(&f).unwrap();
        assert_eq!(pixels(&img), &[0, 255, 0, 0, 0, 255, 0, 0, 0]);
        assert_eq!(render_preview(&f).unwrap(), img);
    }

    #[test]
    fn refuses_lines() {
        let g = Grid::line(0.0, 10.0, 1.0).unwrap();
        assert!(render_preview(&Field::constant(g, 0.0)).is_err());
    }
}
