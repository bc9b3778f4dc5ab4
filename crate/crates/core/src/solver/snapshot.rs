//! Binary field snapshots.
//!
//! Layout, little-endian: the six bytes `RDFLD1`, a mode byte (0 line,
//! 1 plane, 2 radial), the dimension `N` as one byte, `nx` and `ny` as `u64`,
//! the origin as two `f64`, then `h`, `t` and the `nx * ny` values, row-major.

use std::io::Write;
use std::path::Path;

use super::{Field, Grid, Mode};
use crate::error::{Error, FormatError, Result};

pub const MAGIC: &[u8; 6] = b"RDFLD1";
const HEADER: usize = 6 + 2 + 16 + 16 + 16;
/// Dimensions above this are treated as garbage.
const MAX_DIM: u64 = 1 << 32;

pub fn encode_snapshot(field: &Field) -> Vec<u8> {
    let g = &field.grid;
    let mut out = Vec::with_capacity(HEADER + 8 * field.values.len());
    out.extend_from_slice(MAGIC);
    out.push(g.mode.code());
    out.push(g.mode.dimension() as u8);
    out.extend_from_slice(&(g.nx as u64).to_le_bytes());
    out.extend_from_slice(&(g.ny as u64).to_le_bytes());
    for v in [g.origin[0], g.origin[1], g.h, field.t] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &field.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(FormatError::BadMagic.into());
    }
    if bytes.len() < HEADER {
        return Err(FormatError::Truncated {
            expected: HEADER,
            found: bytes.len(),
        }
        .into());
    }
    let (code, n) = (bytes[6], bytes[7] as usize);
    let mode = match code {
        0 => Mode::Line,
        1 => Mode::Plane,
        2 => Mode::Radial { n },
        c => return Err(FormatError::UnsupportedMode(c).into()),
    };
    let (nx, ny) = (u64_at(bytes, 8), u64_at(bytes, 16));
    if nx > MAX_DIM || ny > MAX_DIM {
        let (sx, sy) = (nx.swap_bytes(), ny.swap_bytes());
        if sx <= MAX_DIM && sy <= MAX_DIM {
            return Err(FormatError::ForeignEndian.into());
        }
        return Err(FormatError::Header(format!("dimensions {nx} x {ny}")).into());
    }
    let grid = Grid {
        mode,
        origin: [f64_at(bytes, 24), f64_at(bytes, 32)],
        h: f64_at(bytes, 40),
        nx: nx as usize,
        ny: ny as usize,
    };
    if mode.dimension() != n {
        return Err(FormatError::Header(format!("mode {code} with dimension {n}")).into());
    }
    grid.validate()
        .map_err(|e| FormatError::Header(e.to_string()))?;
    let t = f64_at(bytes, 48);
    if !(t >= 0.0 && t.is_finite()) {
        return Err(FormatError::Header(format!("time {t}")).into());
    }
    let expected = HEADER + 8 * grid.len();
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    let values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Field { grid, t, values })
}

pub fn write_snapshot(path: &Path, field: &Field) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_snapshot(field))
        .map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Field> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Field {
        let g = Grid::plane([-1.0, 1.0], [0.0, 2.0], 0.5).unwrap();
        Field {
            grid: g,
            t: 1.25,
            values: (0..g.len()).map(|k| k as f64 / 16.0).collect(),
        }
    }

    fn format_err(r: Result<Field>) -> FormatError {
        match r {
            Err(Error::Format(e)) => e,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.rdf");
        let f = sample();
        write_snapshot(&p, &f).unwrap();
        assert_eq!(read_snapshot(&p).unwrap(), f);
        assert!(matches!(read_snapshot(&dir.path().join("none")), Err(Error::Io { .. })));
    }

    #[test]
    fn corrupt_files_are_told_apart() {
        let good = encode_snapshot(&sample());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(format_err(decode_snapshot(&bad)), FormatError::BadMagic);
        assert!(matches!(
            format_err(decode_snapshot(&good[..good.len() - 3])),
            FormatError::Truncated { .. }
        ));
        assert!(matches!(format_err(decode_snapshot(&good[..20])), FormatError::Truncated { .. }));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(format_err(decode_snapshot(&long)), FormatError::TrailingBytes { .. }));
        let mut be = good.clone();
        for at in [8, 16] {
            be[at..at + 8].reverse();
        }
        assert_eq!(format_err(decode_snapshot(&be)), FormatError::ForeignEndian);
        let mut mode = good;
        mode[6] = 7;
        assert_eq!(format_err(decode_snapshot(&mode)), FormatError::UnsupportedMode(7));
    }

    proptest! {
        #[test]
        fn round_trip(n in 3usize..40, t in 0.0f64..1e3, seed in any::<u64>()) {
            let g = Grid::radial(3, n as f64 * 0.1, 0.1).unwrap();
            let values: Vec<f64> = (0..g.len())
                .map(|k| ((seed.wrapping_mul(k as u64 + 1) >> 11) as f64) / (1u64 << 53) as f64)
                .collect();
            let f = Field { grid: g, t, values };
            prop_assert_eq!(decode_snapshot(&encode_snapshot(&f)).unwrap(), f);
        }
    }
}
