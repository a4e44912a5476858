//! Run configuration: a line-oriented `key = value` document with dotted
//! section prefixes (the dotted-key subset of TOML), for example
//!
//! ```text
//! beam.k_keV = 500
//! beam.w0_pm = 75
//! beam.nx = 1
//! beam.ny = 0
//! scan.mode = "spectrum"
//! scan.theta_pi = [0.1]
//! scan.phi_pi = [0, 0.25, 0.5]
//! ```

use std::fmt::Write as _;
use std::path::PathBuf;

use hg_compton_core::{BeamParams, HermiteOrder, QuadratureConfig};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
}

fn invalid<T>(key: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Angular,
    Spectrum,
    Validate,
    KnReference,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::Angular,
        Mode::Spectrum,
        Mode::Validate,
        Mode::KnReference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Angular => "angular",
            Mode::Spectrum => "spectrum",
            Mode::Validate => "validate",
            Mode::KnReference => "kn-reference",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }

    fn allowed() -> String {
        Self::ALL.map(Mode::as_str).join(", ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    /// CSV plus a JSON mirror next to it.
    Both,
}

impl Format {
    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "json" => Some(Self::Json),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    /// keV^-3 sr^-1 (keV^-2 sr^-1 for Klein-Nishina tables).
    Natural,
    /// barn keV^-1 sr^-1 (barn sr^-1 for Klein-Nishina tables).
    Barn,
}

impl Units {
    pub fn as_str(self) -> &'static str {
        match self {
            Units::Natural => "natural",
            Units::Barn => "barn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "natural" => Some(Self::Natural),
            "barn" => Some(Self::Barn),
            _ => None,
        }
    }
}

/// Default output location when `output.path` is omitted.
pub const DEFAULT_OUTPUT: &str = "hg-compton.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub mode: Mode,
    /// Polar angles in units of pi.
    pub theta_pi: Vec<f64>,
    /// Azimuths in units of pi.
    pub phi_pi: Vec<f64>,
    /// Energy offsets from the Compton line for angular scans (keV).
    pub delta_e_kev: Vec<f64>,
    /// Spectrum grid as offsets from the Compton line (keV).
    pub de_min_kev: f64,
    pub de_max_kev: f64,
    pub de_step_kev: f64,
    /// Relative floor for spectral node counting.
    pub node_floor: f64,
    /// Validation: number of random instances and RNG seed.
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSpec {
    /// Fixed widths; `None` picks them per point.
    pub eta_e_kev: Option<f64>,
    pub eta_q_kev: Option<f64>,
    pub rel_tol: f64,
    /// Largest acceptable relative deviation between oracle and reduction.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: Format,
    pub units: Units,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beam: BeamParams,
    pub scan: ScanSpec,
    pub quad: QuadratureConfig,
    pub oracle: OracleSpec,
    pub output: OutputSpec,
    /// Keys whose values came from defaults, in document order.
    pub defaults_applied: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    beam: Option<RawBeam>,
    scan: Option<RawScan>,
    quad: Option<RawQuad>,
    oracle: Option<RawOracle>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeam {
    #[serde(rename = "k_keV")]
    k_kev: Option<f64>,
    w0_pm: Option<f64>,
    nx: Option<i64>,
    ny: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    mode: Option<String>,
    theta_pi: Option<Vec<f64>>,
    phi_pi: Option<Vec<f64>>,
    #[serde(rename = "delta_e_keV")]
    delta_e_kev: Option<Vec<f64>>,
    #[serde(rename = "de_min_keV")]
    de_min_kev: Option<f64>,
    #[serde(rename = "de_max_keV")]
    de_max_kev: Option<f64>,
    #[serde(rename = "de_step_keV")]
    de_step_kev: Option<f64>,
    node_floor: Option<f64>,
    samples: Option<i64>,
    seed: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuad {
    tol: Option<f64>,
    max_subdivisions: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    #[serde(rename = "eta_e_keV")]
    eta_e_kev: Option<f64>,
    #[serde(rename = "eta_q_keV")]
    eta_q_kev: Option<f64>,
    rel_tol: Option<f64>,
    max_deviation: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: Option<String>,
    format: Option<String>,
    units: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Defaults<'a>(&'a mut Vec<String>);

impl Defaults<'_> {
    fn take<T>(&mut self, key: &str, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.0.push(key.to_string());
            default
        })
    }
}

fn required<T>(key: &str, v: Option<T>) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Validation {
        key: key.to_string(),
        message: "missing required key".into(),
    })
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        invalid(key, format!("must be finite and > 0, got {v}"))
    }
}

fn order(key: &str, v: i64) -> Result<u32, ConfigError> {
    if (0..=HermiteOrder::MAX as i64).contains(&v) {
        Ok(v as u32)
    } else {
        invalid(
            key,
            format!("must lie in [0, {}], got {v}", HermiteOrder::MAX),
        )
    }
}

fn angle_list(key: &str, v: &[f64], lo: f64, hi: f64, open: bool) -> Result<(), ConfigError> {
    for &a in v {
        let ok = if open {
            a > lo && a < hi
        } else {
            a >= lo && a < hi
        };
        if !(a.is_finite() && ok) {
            let (l, r) = if open { ("(", ")") } else { ("[", ")") };
            return invalid(key, format!("{a} outside {l}{lo}, {hi}{r} (units of pi)"));
        }
    }
    Ok(())
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<String>,
    pub out: Option<PathBuf>,
    pub units: Option<String>,
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, over: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut raw: RawDoc = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    if let Some(m) = &over.mode {
        raw.scan.get_or_insert_with(Default::default).mode = Some(m.clone());
    }
    if let Some(p) = &over.out {
        raw.output.get_or_insert_with(Default::default).path =
            Some(p.to_string_lossy().into_owned());
    }
    if let Some(u) = &over.units {
        raw.output.get_or_insert_with(Default::default).units = Some(u.clone());
    }
    resolve(raw)
}

fn resolve(raw: RawDoc) -> Result<RunConfig, ConfigError> {
    let mut applied = Vec::new();
    let mut d = Defaults(&mut applied);

    let beam = raw.beam.unwrap_or_default();
    let k = positive("beam.k_keV", required("beam.k_keV", beam.k_kev)?)?;
    let w0 = positive("beam.w0_pm", required("beam.w0_pm", beam.w0_pm)?)?;
    let nx = order("beam.nx", required("beam.nx", beam.nx)?)?;
    let ny = order("beam.ny", required("beam.ny", beam.ny)?)?;
    let beam = BeamParams::new(k, w0, nx, ny).map_err(|e| ConfigError::Validation {
        key: "beam".into(),
        message: e.to_string(),
    })?;

    let scan = raw.scan.unwrap_or_default();
    let mode = match scan.mode {
        None => {
            return invalid(
                "scan.mode",
                format!("missing; allowed modes: {}", Mode::allowed()),
            )
        }
        Some(m) => Mode::parse(&m).ok_or_else(|| ConfigError::Validation {
            key: "scan.mode".into(),
            message: format!("unknown mode `{m}`; allowed modes: {}", Mode::allowed()),
        })?,
    };
    let theta_pi = match (mode, scan.theta_pi) {
        (_, Some(v)) => v,
        (Mode::KnReference, None) => d.take(
            "scan.theta_pi",
            None,
            (1..100).map(|i| i as f64 / 100.0).collect(),
        ),
        (Mode::Validate, None) => d.take("scan.theta_pi", None, vec![0.1, 0.5, 0.9]),
        (_, None) => {
            return invalid(
                "scan.theta_pi",
                "missing; required for angular and spectrum modes",
            )
        }
    };
    if theta_pi.is_empty() {
        return invalid("scan.theta_pi", "must not be empty");
    }
    angle_list("scan.theta_pi", &theta_pi, 0.0, 1.0, true)?;
    let phi_pi = match (mode, scan.phi_pi) {
        (_, Some(v)) => v,
        (Mode::Angular | Mode::Spectrum, None) => {
            return invalid(
                "scan.phi_pi",
                "missing; required for angular and spectrum modes",
            )
        }
        (_, None) => d.take("scan.phi_pi", None, vec![0.0]),
    };
    if phi_pi.is_empty() {
        return invalid("scan.phi_pi", "must not be empty");
    }
    angle_list("scan.phi_pi", &phi_pi, 0.0, 2.0, false)?;
    let delta_e_kev = d.take("scan.delta_e_keV", scan.delta_e_kev, vec![0.0]);
    if delta_e_kev.is_empty() || delta_e_kev.iter().any(|v| !v.is_finite()) {
        return invalid(
            "scan.delta_e_keV",
            "must be a non-empty list of finite values",
        );
    }
    let de_min_kev = d.take("scan.de_min_keV", scan.de_min_kev, -5.0);
    let de_max_kev = d.take("scan.de_max_keV", scan.de_max_kev, 5.0);
    let de_step_kev = positive(
        "scan.de_step_keV",
        d.take("scan.de_step_keV", scan.de_step_kev, 0.02),
    )?;
    if !(de_min_kev.is_finite() && de_max_kev.is_finite() && de_max_kev > de_min_kev) {
        return invalid(
            "scan.de_max_keV",
            format!("must exceed scan.de_min_keV ({de_min_kev})"),
        );
    }
    let node_floor = d.take("scan.node_floor", scan.node_floor, 0.02);
    if !(node_floor > 0.0 && node_floor < 0.5) {
        return invalid(
            "scan.node_floor",
            format!("must lie in (0, 0.5), got {node_floor}"),
        );
    }
    let samples = d.take("scan.samples", scan.samples, 20);
    if !(1..=100_000).contains(&samples) {
        return invalid(
            "scan.samples",
            format!("must lie in [1, 100000], got {samples}"),
        );
    }
    let seed = d.take("scan.seed", scan.seed, 1);
    if seed < 0 {
        return invalid("scan.seed", format!("must be non-negative, got {seed}"));
    }

    let quad = raw.quad.unwrap_or_default();
    let defaults = QuadratureConfig::default();
    let quad = QuadratureConfig {
        tol: d.take("quad.tol", quad.tol, defaults.tol),
        max_subdivisions: {
            let v = d.take(
                "quad.max_subdivisions",
                quad.max_subdivisions,
                defaults.max_subdivisions as i64,
            );
            if v <= 0 {
                return invalid(
                    "quad.max_subdivisions",
                    format!("must be positive, got {v}"),
                );
            }
            v as usize
        },
    };
    if !(quad.tol > 0.0 && quad.tol < 1e-2) {
        return invalid(
            "quad.tol",
            format!("must lie in (0, 1e-2), got {}", quad.tol),
        );
    }

    let oracle = raw.oracle.unwrap_or_default();
    let oracle = OracleSpec {
        eta_e_kev: oracle
            .eta_e_kev
            .map(|v| positive("oracle.eta_e_keV", v))
            .transpose()?,
        eta_q_kev: oracle
            .eta_q_kev
            .map(|v| positive("oracle.eta_q_keV", v))
            .transpose()?,
        rel_tol: d.take("oracle.rel_tol", oracle.rel_tol, 1e-6),
        max_deviation: d.take("oracle.max_deviation", oracle.max_deviation, 1e-3),
    };
    if oracle.eta_e_kev.is_some() != oracle.eta_q_kev.is_some() {
        return invalid("oracle.eta_q_keV", "set both widths or neither");
    }
    if !(oracle.rel_tol > 0.0 && oracle.rel_tol < 1e-2) {
        return invalid(
            "oracle.rel_tol",
            format!("must lie in (0, 1e-2), got {}", oracle.rel_tol),
        );
    }
    positive("oracle.max_deviation", oracle.max_deviation)?;

    let output = raw.output.unwrap_or_default();
    let path = PathBuf::from(d.take("output.path", output.path, DEFAULT_OUTPUT.to_string()));
    let format = d.take("output.format", output.format, "csv".into());
    let format = Format::parse(&format).ok_or_else(|| ConfigError::Validation {
        key: "output.format".into(),
        message: format!("`{format}` is not one of csv, json, both"),
    })?;
    let units = d.take("output.units", output.units, "natural".into());
    let units = Units::parse(&units).ok_or_else(|| ConfigError::Validation {
        key: "output.units".into(),
        message: format!("`{units}` is not one of natural, barn"),
    })?;

    Ok(RunConfig {
        beam,
        scan: ScanSpec {
            mode,
            theta_pi,
            phi_pi,
            delta_e_kev,
            de_min_kev,
            de_max_kev,
            de_step_kev,
            node_floor,
            samples: samples as usize,
            seed: seed as u64,
        },
        quad,
        oracle,
        output: OutputSpec {
            path,
            format,
            units,
        },
        defaults_applied: applied,
    })
}

fn float(v: f64) -> String {
    // Debug formatting is the shortest string that round-trips exactly.
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn floats(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| float(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

impl RunConfig {
    /// Serialises every key, one per line. `parse_config` of the result
    /// reproduces `self` up to `defaults_applied`.
    pub fn to_document(&self, include_path: bool) -> String {
        let mut s = String::new();
        let b = &self.beam;
        let sc = &self.scan;
        let _ = writeln!(s, "beam.k_keV = {}", float(b.k));
        let _ = writeln!(s, "beam.w0_pm = {}", float(b.w0_pm));
        let _ = writeln!(s, "beam.nx = {}", b.n_x);
        let _ = writeln!(s, "beam.ny = {}", b.n_y);
        let _ = writeln!(s, "scan.mode = {}", string(sc.mode.as_str()));
        let _ = writeln!(s, "scan.theta_pi = {}", floats(&sc.theta_pi));
        let _ = writeln!(s, "scan.phi_pi = {}", floats(&sc.phi_pi));
        let _ = writeln!(s, "scan.delta_e_keV = {}", floats(&sc.delta_e_kev));
        let _ = writeln!(s, "scan.de_min_keV = {}", float(sc.de_min_kev));
        let _ = writeln!(s, "scan.de_max_keV = {}", float(sc.de_max_kev));
        let _ = writeln!(s, "scan.de_step_keV = {}", float(sc.de_step_kev));
        let _ = writeln!(s, "scan.node_floor = {}", float(sc.node_floor));
        let _ = writeln!(s, "scan.samples = {}", sc.samples);
        let _ = writeln!(s, "scan.seed = {}", sc.seed);
        let _ = writeln!(s, "quad.tol = {}", float(self.quad.tol));
        let _ = writeln!(s, "quad.max_subdivisions = {}", self.quad.max_subdivisions);
        if let (Some(e), Some(q)) = (self.oracle.eta_e_kev, self.oracle.eta_q_kev) {
            let _ = writeln!(s, "oracle.eta_e_keV = {}", float(e));
            let _ = writeln!(s, "oracle.eta_q_keV = {}", float(q));
        }
        let _ = writeln!(s, "oracle.rel_tol = {}", float(self.oracle.rel_tol));
        let _ = writeln!(
            s,
            "oracle.max_deviation = {}",
            float(self.oracle.max_deviation)
        );
        if include_path {
            let _ = writeln!(
                s,
                "output.path = {}",
                string(&self.output.path.to_string_lossy())
            );
        }
        let _ = writeln!(s, "output.format = {}", string(self.output.format.as_str()));
        let _ = writeln!(s, "output.units = {}", string(self.output.units.as_str()));
        s
    }

    /// Equality ignoring which values were defaulted.
    pub fn same_settings(&self, other: &Self) -> bool {
        Self {
            defaults_applied: Vec::new(),
            ..self.clone()
        } == Self {
            defaults_applied: Vec::new(),
            ..other.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANGULAR: &str = "beam.k_keV = 500\nbeam.w0_pm = 25\nbeam.nx = 1\nbeam.ny = 0\n\
                        scan.mode = \"angular\"\nscan.theta_pi = [0.1, 0.5, 0.9]\nscan.phi_pi = [0.0, 0.5]\n";

    #[test]
    fn angular_setup() {
        let c = parse_config(ANGULAR).unwrap();
        assert_eq!(c.beam, BeamParams::new(500.0, 25.0, 1, 0).unwrap());
        assert_eq!(c.scan.mode, Mode::Angular);
        assert_eq!(c.quad, QuadratureConfig::default());
        assert!(c.defaults_applied.contains(&"quad.tol".to_string()));
        assert!(c.defaults_applied.contains(&"scan.delta_e_keV".to_string()));
    }

    #[test]
    fn negative_order_is_a_validation_error() {
        let text = ANGULAR.replace("beam.nx = 1", "beam.nx = -1");
        match parse_config(&text) {
            Err(ConfigError::Validation { key, .. }) => assert_eq!(key, "beam.nx"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_mode_lists_allowed_modes() {
        let text = ANGULAR.replace("scan.mode = \"angular\"\n", "");
        match parse_config(&text) {
            Err(ConfigError::Validation { key, message }) => {
                assert_eq!(key, "scan.mode");
                for m in ["angular", "spectrum", "validate", "kn-reference"] {
                    assert!(message.contains(m), "{message}");
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors_carry_line_numbers() {
        let text = format!("{ANGULAR}beam.colour = 3\n");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, message }) => {
                assert_eq!(line, 8, "{message}");
                assert!(message.contains("colour"));
            }
            other => panic!("{other:?}"),
        }
        let text = format!("{ANGULAR}quad.tol = = 3\n");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::Parse { line: 8, .. })
        ));
    }

    #[test]
    fn bounds_are_enforced() {
        for (from, to, key) in [
            ("beam.w0_pm = 25", "beam.w0_pm = 0", "beam.w0_pm"),
            ("beam.k_keV = 500", "beam.k_keV = -500", "beam.k_keV"),
            (
                "scan.theta_pi = [0.1, 0.5, 0.9]",
                "scan.theta_pi = [0.0]",
                "scan.theta_pi",
            ),
            (
                "scan.phi_pi = [0.0, 0.5]",
                "scan.phi_pi = [2.0]",
                "scan.phi_pi",
            ),
            ("beam.ny = 0", "beam.ny = 61", "beam.ny"),
        ] {
            match parse_config(&ANGULAR.replace(from, to)) {
                Err(ConfigError::Validation { key: k, .. }) => assert_eq!(k, key),
                other => panic!("{to}: {other:?}"),
            }
        }
        let bad_mode = ANGULAR.replace("\"angular\"", "\"movie\"");
        assert!(matches!(
            parse_config(&bad_mode),
            Err(ConfigError::Validation { .. })
        ));
    }

    #[test]
    fn round_trip_with_defaults() {
        let c = parse_config(ANGULAR).unwrap();
        let again = parse_config(&c.to_document(true)).unwrap();
        assert!(c.same_settings(&again));
        assert!(again.defaults_applied.is_empty());
    }
}
