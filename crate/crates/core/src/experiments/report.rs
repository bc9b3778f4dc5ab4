use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the target of a criterion comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// A number or law stated by the theory.
    Published,
    /// Computed by an independent oracle or by the run itself.
    Derived,
    Trivial,
}

/// One checked quantity with its acceptance interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    #[serde(with = "extended")]
    pub measured: f64,
    #[serde(with = "extended")]
    pub lo: f64,
    #[serde(with = "extended")]
    pub hi: f64,
    pub basis: Basis,
    pub passed: bool,
}

impl Criterion {
    pub fn within(name: impl Into<String>, measured: f64, lo: f64, hi: f64, basis: Basis) -> Self {
        Self {
            name: name.into(),
            measured,
            lo,
            hi,
            basis,
            passed: measured >= lo && measured <= hi,
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, hi: f64, basis: Basis) -> Self {
        Self::within(name, measured, f64::NEG_INFINITY, hi, basis)
    }

    pub fn at_least(name: impl Into<String>, measured: f64, lo: f64, basis: Basis) -> Self {
        Self::within(name, measured, lo, f64::INFINITY, basis)
    }

    /// A yes/no check recorded as 1 or 0.
    pub fn holds(name: impl Into<String>, ok: bool, basis: Basis) -> Self {
        Self::within(name, if ok { 1.0 } else { 0.0 }, 1.0, 1.0, basis)
    }

    /// `|measured / target - 1| <= rel`.
    pub fn relative(name: impl Into<String>, measured: f64, target: f64, rel: f64, basis: Basis) -> Self {
        let (a, b) = (target * (1.0 - rel), target * (1.0 + rel));
        Self::within(name, measured, a.min(b), a.max(b), basis)
    }

    pub fn tolerance(&self) -> String {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) if self.lo == self.hi => format!("= {}", self.lo),
            (true, true) => format!("[{:.6}, {:.6}]", self.lo, self.hi),
            (false, true) => format!("<= {:.6}", self.hi),
            (true, false) => format!(">= {:.6}", self.lo),
            (false, false) => "any".into(),
        }
    }
}

/// Extended reals in JSON: infinities and NaN as strings.
mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A named CSV table attached to a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, hash: &str) -> std::io::Result<()> {
        writeln!(out, "# config_hash={hash}")?;
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub description: String,
    /// Hash of the scenario's run configurations.
    pub config_hash: String,
    /// Hash of the suite the scenario belongs to.
    pub suite_hash: String,
    /// Whether the geometric hypotheses hold for the support, if checked.
    pub hypotheses_hold: Option<bool>,
    pub criteria: Vec<Criterion>,
    pub notes: Vec<String>,
    pub runtime_s: f64,
    #[serde(skip)]
    pub series: Vec<Series>,
}

impl ExperimentReport {
    pub fn new(scenario: &str, description: &str) -> Self {
        Self {
            scenario: scenario.into(),
            description: description.into(),
            config_hash: String::new(),
            suite_hash: String::new(),
            hypotheses_hold: None,
            criteria: Vec::new(),
            notes: Vec::new(),
            runtime_s: 0.0,
            series: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        !self.criteria.is_empty() && self.criteria.iter().all(|c| c.passed)
    }

    pub fn push(&mut self, c: Criterion) {
        self.criteria.push(c);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Plain-text summary, one line per criterion.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} [{}] {}\n",
            self.scenario,
            if self.passed() { "PASS" } else { "FAIL" },
            self.description
        );
        for c in &self.criteria {
            s += &format!(
                "  {:<4} {}: {:.6} (target {})\n",
                if c.passed { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance()
            );
        }
        for n in &self.notes {
            s += &format!("  note: {n}\n");
        }
        s
    }

    /// Writes `report.json` and one CSV per series into `dir/<scenario>`,
    /// each through a temporary file and a rename.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let sub = dir.join(&self.scenario);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        atomic_write(&sub.join("report.json"), json.as_bytes())?;
        for s in &self.series {
            let mut buf = Vec::new();
            s.write_csv(&mut buf, &self.config_hash)
                .map_err(|e| Error::io(&sub, e))?;
            atomic_write(&sub.join(format!("{}.csv", s.name)), &buf)?;
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub passed: bool,
    pub failed_criteria: Vec<String>,
    pub runtime_s: f64,
}

/// One row per report; refuses reports from different suites.
pub fn aggregate(reports: &[ExperimentReport]) -> Result<Vec<SummaryRow>> {
    let hashes: BTreeMap<&str, &str> = reports
        .iter()
        .map(|r| (r.suite_hash.as_str(), r.scenario.as_str()))
        .collect();
    if hashes.len() > 1 {
        return Err(Error::Validation(format!(
            "reports come from {} different suite configurations",
            hashes.len()
        )));
    }
    Ok(reports
        .iter()
        .map(|r| SummaryRow {
            scenario: r.scenario.clone(),
            passed: r.passed(),
            failed_criteria: r.criteria.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect(),
            runtime_s: r.runtime_s,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_intervals() {
        assert!(Criterion::relative("w", 1.95, 2.0, 0.05, Basis::Published).passed);
        assert!(!Criterion::relative("w", 1.85, 2.0, 0.05, Basis::Published).passed);
        assert!(Criterion::at_most("d", 0.1, 0.3, Basis::Derived).passed);
        assert!(!Criterion::holds("x", false, Basis::Trivial).passed);
        assert_eq!(Criterion::at_least("d", 1.0, 0.5, Basis::Derived).tolerance(), ">= 0.500000");
    }

    #[test]
    fn write_read_and_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = ExperimentReport::new("demo", "a demo");
        r.suite_hash = "abc".into();
        r.push(Criterion::at_most("d", 0.1, 0.3, Basis::Derived));
        let mut s = Series::new("d", &["t", "d"]);
        s.push(vec![1.0, 0.1]);
        r.series.push(s);
        r.write_to(dir.path()).unwrap();
        let back = ExperimentReport::read_from(&dir.path().join("demo/report.json")).unwrap();
        assert_eq!(back.criteria, r.criteria);
        assert_eq!(back.criteria[0].lo, f64::NEG_INFINITY);
        let csv = std::fs::read_to_string(dir.path().join("demo/d.csv")).unwrap();
        assert!(csv.contains("t,d\n1,0.1"));
        let rows = aggregate(std::slice::from_ref(&back)).unwrap();
        assert!(rows[0].passed);
        let mut other = back.clone();
        other.suite_hash = "def".into();
        assert!(aggregate(&[back, other]).is_err());
    }
}
