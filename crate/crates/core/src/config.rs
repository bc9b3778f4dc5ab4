//! Experiment configurations in TOML: strict keys, defaults, line and
//! column attributed errors, and a platform-stable hash.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Point, SupportSpec, Window};
use crate::reaction::ReactionTerm;
use crate::solver::{Face, Grid, RunConfig, ALL_FACES, DEFAULT_CONTAMINATION_TOL, DEFAULT_SIGMA};

/// Spatial window and spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `range` along `x_N`.
    Line { range: [f64; 2], h: f64 },
    Plane { x: [f64; 2], y: [f64; 2], h: f64 },
    Radial { n: usize, r_max: f64, h: f64 },
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<Grid> {
        match *self {
            GridSpec::Line { range, h } => Grid::line(range[0], range[1], h),
            GridSpec::Plane { x, y, h } => Grid::plane(x, y, h),
            GridSpec::Radial { n, r_max, h } => Grid::radial(n, r_max, h),
        }
    }

    fn default_for(dim: usize) -> Self {
        if dim == 1 {
            GridSpec::Line { range: [-50.0, 150.0], h: 0.1 }
        } else {
            GridSpec::Plane {
                x: [-50.0, 50.0],
                y: [-50.0, 50.0],
                h: 0.25,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Count of evenly spaced snapshots, used when `times` is empty.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_sigma")]
    pub sigma_cfl: f64,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self {
            t_final: default_t_final(),
            snapshots: default_snapshots(),
            times: Vec::new(),
            dt: None,
            sigma_cfl: DEFAULT_SIGMA,
        }
    }
}

fn default_t_final() -> f64 {
    40.0
}

fn default_snapshots() -> usize {
    16
}

fn default_sigma() -> f64 {
    DEFAULT_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Faces that are symmetry planes of the data.
    #[serde(default)]
    pub mirrored: Vec<Face>,
    /// Watched faces; defaults to every face that is not mirrored.
    #[serde(default)]
    pub sentinel: Option<Vec<Face>>,
    #[serde(default)]
    pub region: Option<Window>,
    #[serde(default = "default_contamination")]
    pub contamination_tol: f64,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            mirrored: Vec::new(),
            sentinel: None,
            region: None,
            contamination_tol: DEFAULT_CONTAMINATION_TOL,
        }
    }
}

fn default_contamination() -> f64 {
    DEFAULT_CONTAMINATION_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayModeSpec {
    Furthest,
    FirstExit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HausdorffKind {
    WLocal,
    UDilated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// The quantity is expected to vanish.
    Vanishing,
    /// Negative control: the quantity stays bounded away from zero.
    Persistent,
}

fn half() -> f64 {
    0.5
}

fn vanishing() -> Expectation {
    Expectation::Vanishing
}

/// A measurement taken from the snapshots of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diagnostic {
    /// Ray speeds at angles from `e_N`, against `expected` or the predicted `w(e)`.
    Speed {
        angles: Vec<f64>,
        #[serde(default = "half")]
        lambda: f64,
        #[serde(default)]
        origin: Point,
        #[serde(default)]
        expected: Option<f64>,
        #[serde(default = "furthest")]
        ray: RayModeSpec,
    },
    /// Fan of speeds plus the compact-set probes.
    Fg {
        fan: Vec<f64>,
        #[serde(default = "half")]
        lambda: f64,
        #[serde(default)]
        origin: Point,
    },
    Hausdorff {
        mode: HausdorffKind,
        /// Ball radius for `w_local`.
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default = "half")]
        lambda: f64,
    },
    Lag {
        #[serde(default = "half")]
        lambda: f64,
        probe: crate::experiments::LagProbe,
        scenario: crate::experiments::LagScenario,
    },
    Flattening {
        lambdas: Vec<f64>,
        #[serde(default)]
        center: f64,
        radius: f64,
        #[serde(default = "vanishing")]
        expect: Expectation,
    },
    Symmetry {
        #[serde(default)]
        origin: Point,
        angles: Vec<f64>,
        #[serde(default = "half")]
        lambda: f64,
        radius: f64,
        #[serde(default = "vanishing")]
        expect: Expectation,
    },
    Terrace {
        #[serde(default)]
        origin: Point,
        #[serde(default = "e_n")]
        e: Point,
    },
}

fn furthest() -> RayModeSpec {
    RayModeSpec::Furthest
}

fn e_n() -> Point {
    [0.0, 1.0]
}

/// Acceptance tolerances, recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub speed_rel: f64,
    /// Hausdorff threshold in units of `c*`.
    pub hausdorff: f64,
    pub lag_rel: f64,
    pub flat: f64,
    /// Lower bound a negative control must keep.
    pub persistent: f64,
    pub defect: f64,
    pub defect_persistent: f64,
    /// Allowed ratio of `sup |σ_2|` to the planted planar baseline.
    pub sigma2_factor: f64,
    pub terrace_rel: f64,
    pub plateau: f64,
    /// Oscillation of `R(t)/t` in units of `c*`.
    pub oscillation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            speed_rel: 0.08,
            hausdorff: 0.15,
            lag_rel: 0.2,
            flat: 0.05,
            persistent: 0.8,
            defect: 0.15,
            defect_persistent: 0.3,
            sigma2_factor: 10.0,
            terrace_rel: 0.1,
            plateau: 0.05,
            oscillation: 0.2,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let all = [
            ("speed_rel", self.speed_rel),
            ("hausdorff", self.hausdorff),
            ("lag_rel", self.lag_rel),
            ("flat", self.flat),
            ("persistent", self.persistent),
            ("defect", self.defect),
            ("defect_persistent", self.defect_persistent),
            ("sigma2_factor", self.sigma2_factor),
            ("terrace_rel", self.terrace_rel),
            ("plateau", self.plateau),
            ("oscillation", self.oscillation),
        ];
        for (k, v) in all {
            if !(v > 0.0 && v.is_finite()) {
                return Err((k, format!("tolerance {k} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    #[serde(deserialize_with = "shorthand")]
    pub support: SupportSpec,
    #[serde(deserialize_with = "shorthand")]
    pub reaction: ReactionTerm,
    /// Filled from the support dimension when absent.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Seed of the randomized property suites.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn expand(v: serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::String(kind) if kind == "half_space" => {
            serde_json::json!({ "kind": kind, "normal": [0.0, 1.0] })
        }
        serde_json::Value::String(kind) => serde_json::json!({ "kind": kind }),
        other => other,
    }
}

/// Accepts a bare kind name such as `"half_space"` for a table.
fn shorthand<'de, D: Deserializer<'de>, T: DeserializeOwned>(d: D) -> std::result::Result<T, D::Error> {
    use serde::de::Error as _;
    let v = serde_json::Value::deserialize(d)?;
    serde_json::from_value(expand(v)).map_err(D::Error::custom)
}

/// A support or reaction given on its own: a bare kind name such as
/// `kpp_logistic`, or an inline table such as `{ kind = "bistable", alpha = 0.25 }`.
pub fn parse_value<T: DeserializeOwned>(text: &str) -> Result<T> {
    let text = text.trim();
    let doc = if text.starts_with('{') || text.starts_with('"') {
        format!("v = {text}")
    } else {
        format!("v = \"{text}\"")
    };
    let table: toml::Table = toml::from_str(&doc).map_err(|e| Error::Validation(format!("{text}: {}", e.message())))?;
    let v = serde_json::to_value(&table["v"]).map_err(|e| Error::Validation(e.to_string()))?;
    serde_json::from_value(expand(v)).map_err(|e| Error::Validation(format!("{text}: {e}")))
}

impl ExperimentConfig {
    pub fn grid(&self) -> Result<Grid> {
        self.grid
            .unwrap_or_else(|| GridSpec::default_for(self.support.dim))
            .to_grid()
    }

    /// Solver configuration of the run.
    pub fn run_config(&self) -> Result<RunConfig> {
        let grid = self.grid()?;
        let mut rc = RunConfig::new(self.support.clone(), self.reaction.clone(), grid, self.time.t_final);
        rc.dt = self.time.dt;
        rc.sigma_cfl = self.time.sigma_cfl;
        rc = if self.time.times.is_empty() {
            rc.with_even_snapshots(self.time.snapshots)
        } else {
            RunConfig {
                snapshots: self.time.times.clone(),
                ..rc
            }
        };
        rc.contamination_tol = self.boundary.contamination_tol;
        rc.sentinel_faces = match &self.boundary.sentinel {
            Some(f) => f.clone(),
            None => ALL_FACES
                .iter()
                .copied()
                .filter(|f| !self.boundary.mirrored.contains(f))
                .collect(),
        };
        rc.sentinel_region = self.boundary.region;
        Ok(rc)
    }

    /// Hash of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        config_hash(&c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Checks that do not depend on the text; `key` names the offending entry.
    fn check(&self) -> std::result::Result<(), (Vec<&'static str>, String)> {
        let grid = self.grid().map_err(|e| (vec!["grid"], e.to_string()))?;
        let dim_ok = match grid.mode {
            crate::solver::Mode::Line => self.support.dim == 1,
            crate::solver::Mode::Plane => self.support.dim == 2,
            crate::solver::Mode::Radial { .. } => true,
        };
        if !dim_ok {
            return Err((
                vec!["grid", "mode"],
                format!("grid mode {:?} does not match a support of dimension {}", grid.mode, self.support.dim),
            ));
        }
        if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
            return Err((vec!["time", "t_final"], format!("t_final = {} must be positive", self.time.t_final)));
        }
        if let Some(t) = self.time.times.iter().find(|t| !(**t > 0.0 && **t <= self.time.t_final)) {
            return Err((vec!["time", "times"], format!("snapshot time {t} outside (0, t_final]")));
        }
        let rc = self.run_config().map_err(|e| (vec!["grid"], e.to_string()))?;
        if let Err(e) = rc.time_step() {
            let key = if self.time.dt.is_some() { "dt" } else { "sigma_cfl" };
            return Err((vec!["time", key], e.to_string()));
        }
        rc.validate().map_err(|e| (vec!["time"], e.to_string()))?;
        self.tolerances
            .validate()
            .map_err(|(k, m)| (vec!["tolerances", k], m))?;
        for d in &self.diagnostics {
            let lambdas: Vec<f64> = match d {
                Diagnostic::Speed { lambda, .. }
                | Diagnostic::Fg { lambda, .. }
                | Diagnostic::Hausdorff { lambda, .. }
                | Diagnostic::Lag { lambda, .. }
                | Diagnostic::Symmetry { lambda, .. } => vec![*lambda],
                Diagnostic::Flattening { lambdas, .. } => lambdas.clone(),
                Diagnostic::Terrace { .. } => vec![],
            };
            if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
                return Err((vec!["diagnostics"], format!("level {l} outside (0, 1)")));
            }
            if let Diagnostic::Hausdorff {
                mode: HausdorffKind::WLocal,
                radius: None,
                ..
            } = d
            {
                return Err((vec!["diagnostics"], "w_local needs a radius".into()));
            }
        }
        Ok(())
    }
}

/// Parses and validates a TOML configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Config {
            line,
            column,
            message: with_suggestion(e.message()),
        }
    })?;
    if let Err((path, message)) = cfg.check() {
        return Err(match locate(text, &path) {
            Some((line, column)) => Error::Config { line, column, message },
            None => Error::Validation(message),
        });
    }
    cfg.grid = Some(cfg.grid.unwrap_or_else(|| GridSpec::default_for(cfg.support.dim)));
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// One-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Position of the deepest key of `path` present in the document.
fn locate(text: &str, path: &[&str]) -> Option<(usize, usize)> {
    let doc = toml_edit::ImDocument::parse(text).ok()?;
    let mut table: &dyn toml_edit::TableLike = doc.as_table();
    let mut found = None;
    for key in path {
        let Some(k) = table.key(key) else { break };
        found = k.span().or(found);
        match table.get(key).and_then(|i| i.as_table_like()) {
            Some(t) => table = t,
            None => break,
        }
    }
    found.map(|s| line_col(text, s.start))
}

/// Appends "did you mean" to unknown-key and unknown-variant messages.
fn with_suggestion(message: &str) -> String {
    let message = message.trim_end().to_string();
    let grab = |prefix: &str| -> Option<String> {
        let rest = &message[message.find(prefix)? + prefix.len()..];
        Some(rest[..rest.find('`')?].to_string())
    };
    let Some(unknown) = grab("unknown field `").or_else(|| grab("unknown variant `")) else {
        return message;
    };
    let expected: Vec<&str> = message
        .split("expected")
        .nth(1)
        .map(|s| s.split('`').skip(1).step_by(2).collect())
        .unwrap_or_default();
    let best = expected
        .iter()
        .map(|c| (strsim::damerau_levenshtein(&unknown, c), *c))
        .min();
    match best {
        Some((d, c)) if d <= 2.max(unknown.len() / 3) => format!("{message}; did you mean `{c}`?"),
        _ => message,
    }
}

/// SHA-256 of the canonical JSON form: sorted keys, shortest round-trip
/// decimals.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("configs serialize to JSON");
    let mut out = String::new();
    canonical(&v, &mut out);
    hex::encode(Sha256::digest(out.as_bytes()))
}

fn canonical(v: &serde_json::Value, out: &mut String) {
    use serde_json::Value;
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push('{');
            for (n, k) in keys.into_iter().enumerate() {
                if n > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                canonical(&m[k], out);
            }
            out.push('}');
        }
        Value::Array(a) => {
            out.push('[');
            for (n, x) in a.iter().enumerate() {
                if n > 0 {
                    out.push(',');
                }
                canonical(x, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standalone_values() {
        let f: ReactionTerm = parse_value("kpp_logistic").unwrap();
        assert_eq!(f, ReactionTerm::logistic());
        let b: ReactionTerm = parse_value("{ kind = \"bistable\", alpha = 0.25 }").unwrap();
        assert_eq!(b, ReactionTerm::bistable(0.25).unwrap());
        let u: SupportSpec = parse_value("{ kind = \"ball_union\", dim = 2, centers = [[0.0, 0.0]], radii = [3.0] }").unwrap();
        assert_eq!(u, SupportSpec::ball(2, [0.0, 0.0], 3.0).unwrap());
        assert!(parse_value::<ReactionTerm>("kpp_logisitc").is_err());
    }

    const MINIMAL: &str = r#"
scenario = "half"
support = "half_space"
reaction = "kpp_logistic"
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.time.t_final, 40.0);
        assert_eq!(c.time.snapshots, 16);
        assert!(matches!(c.grid, Some(GridSpec::Plane { .. })));
        assert_eq!(c.tolerances, Tolerances::default());
        assert!(c.support.contains([3.0, -1.0]) && !c.support.contains([3.0, 1.0]));
        let rc = c.run_config().unwrap();
        assert_eq!(rc.sentinel_faces.len(), 4);
    }

    #[test]
    fn round_trip_keeps_hash() {
        let text = format!(
            "{MINIMAL}\n[grid]\nmode = \"plane\"\nx = [0, 40]\ny = [-10, 30]\nh = 0.5\n\n[boundary]\nmirrored = [\"left\"]\n\n[[diagnostics]]\nkind = \"speed\"\nangles = [0.0, 0.5]\n"
        );
        let c = parse_config(&text).unwrap();
        let back = parse_config(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 64);
        assert_eq!(c.run_config().unwrap().sentinel_faces, vec![Face::Bottom, Face::Top, Face::Right]);
        let mut other = c.clone();
        other.output = "elsewhere".into();
        assert_eq!(other.hash(), c.hash());
        other.time.t_final = 41.0;
        assert_ne!(other.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = parse_config(MINIMAL).unwrap();
        let b = parse_config("reaction = \"kpp_logistic\"\nsupport = \"half_space\"\nscenario = \"half\"\n").unwrap();
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn dt_above_cfl_names_the_bound() {
        let text = format!("{MINIMAL}\n[time]\nt_final = 10\ndt = 0.1\n");
        match parse_config(&text) {
            Err(Error::Config { line, message, .. }) => {
                assert_eq!(line, 8);
                assert!(message.contains("0.0140625"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn typo_gets_a_suggestion() {
        let text = "scenario = \"x\"\nsupport = \"half_space\"\nreactoin = \"kpp_logistic\"\n";
        match parse_config(text) {
            Err(Error::Config { line, column, message }) => {
                assert_eq!((line, column), (3, 1));
                assert!(message.contains("did you mean `reaction`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}\n[tolerances]\nspeed_rell = 0.1\n");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("did you mean `speed_rel`"), "{err}");
        let err = parse_config("scenario = \"x\"\nsupport = \"half_space\"\nreaction = \"kpp_logisitc\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("did you mean `kpp_logistic`"), "{err}");
    }

    #[test]
    fn dimension_mismatch_is_located() {
        let text = format!("{MINIMAL}\n[grid]\nmode = \"line\"\nrange = [0, 10]\nh = 0.1\n");
        assert!(matches!(parse_config(&text), Err(Error::Config { line: 7, .. })));
    }

    #[test]
    fn syntax_errors_have_positions() {
        match parse_config("scenario = \"x\"\nsupport = [\n") {
            Err(Error::Config { line, .. }) => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
    }
}
