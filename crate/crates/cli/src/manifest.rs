//! `manifest.csv` of a simulation directory: one row per snapshot file.

use std::fmt::Write as _;
use std::path::Path;

use rdspread_core::error::{Error, Result};
use rdspread_core::solver::{read_snapshot, Snapshot};

pub const HEADER: &str = "time,file,contaminated,boundary_deviation";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub time: f64,
    pub file: String,
    pub contaminated: bool,
    pub boundary_deviation: f64,
}

pub fn render(rows: &[Row], hash: &str) -> String {
    let mut out = format!("# config_hash={hash}\n{HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e}",
            r.time, r.file, r.contaminated as u8, r.boundary_deviation
        );
    }
    out
}

/// Rows and config hash of `dir/manifest.csv`.
pub fn read(dir: &Path) -> Result<(Vec<Row>, String)> {
    let path = dir.join("manifest.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |n: usize, what: &str| Error::Validation(format!("{}:{}: {what}", path.display(), n + 1));
    let mut hash = String::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        if let Some(h) = line.strip_prefix("# config_hash=") {
            hash = h.trim().to_string();
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line.trim() != HEADER {
                return Err(bad(n, "unexpected header"));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(bad(n, "expected 4 columns"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(n, "not a number"));
        rows.push(Row {
            time: num(cells[0])?,
            file: cells[1].trim().to_string(),
            contaminated: cells[2].trim() == "1",
            boundary_deviation: num(cells[3])?,
        });
    }
    if hash.is_empty() {
        return Err(Error::Validation(format!("{} has no config hash", path.display())));
    }
    Ok((rows, hash))
}

/// Snapshots listed in `dir/manifest.csv`, in file order.
pub fn load_snapshots(dir: &Path) -> Result<(Vec<Snapshot>, String)> {
    let (rows, hash) = read(dir)?;
    let snaps = rows
        .iter()
        .map(|r| {
            Ok(Snapshot {
                field: read_snapshot(&dir.join(&r.file))?,
                boundary_deviation: r.boundary_deviation,
                contaminated: r.contaminated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((snaps, hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows = vec![
            Row {
                time: 0.5,
                file: "snap_0000.rdf".into(),
                contaminated: false,
                boundary_deviation: 1.25e-12,
            },
            Row {
                time: 1.0,
                file: "snap_0001.rdf".into(),
                contaminated: true,
                boundary_deviation: 0.5,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest.csv"), render(&rows, "abc")).unwrap();
        let (back, hash) = read(dir.path()).unwrap();
        assert_eq!(back, rows);
        assert_eq!(hash, "abc");
    }

    #[test]
    fn missing_hash_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest.csv"), format!("{HEADER}\n")).unwrap();
        assert!(read(dir.path()).is_err());
    }
}
