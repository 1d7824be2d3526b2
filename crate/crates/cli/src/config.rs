//! JSON model and sweep configuration files.
//!
//! Complex numbers are written as `[re, im]` pairs and matrices as arrays of
//! rows of such pairs.

use num_complex::Complex64;
use qest_core::care::SolveOptions;
use qest_core::qsys::{make_squeezer, ModelError, QuantumSystem};
use qest_core::ComplexMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// Malformed JSON or a field of the wrong type.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}:{}: {} (at `{}`)", .line, .column, .message, .path)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Dotted key path where the error was detected, `.` for the root.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct ValidationError(pub String);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("invalid configuration: {0}")]
    Validation(#[from] ValidationError),
}

fn invalid(msg: impl Into<String>) -> ValidationError {
    ValidationError(msg.into())
}

pub type Pair = [f64; 2];
pub type RowSpec = Vec<Pair>;
pub type MatrixSpec = Vec<RowSpec>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezerSpec {
    pub gamma: f64,
    pub kappas: Vec<f64>,
    #[serde(default)]
    pub chi_re: f64,
    #[serde(default)]
    pub chi_im: f64,
    /// Require `gamma = sum(kappas)` when building the model.
    #[serde(default = "default_true")]
    pub enforce: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    #[serde(rename = "F")]
    pub f: MatrixSpec,
    #[serde(rename = "G")]
    pub g: MatrixSpec,
    #[serde(rename = "H")]
    pub h: MatrixSpec,
    #[serde(rename = "K")]
    pub k: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squeezer: Option<SqueezerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawSpec>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<RowSpec>,
}

impl ModelSpec {
    pub fn squeezer(gamma: f64, kappas: &[f64], chi: Complex64) -> Self {
        Self {
            squeezer: Some(SqueezerSpec {
                gamma,
                kappas: kappas.to_vec(),
                chi_re: chi.re,
                chi_im: chi.im,
                enforce: true,
            }),
            raw: None,
            c: None,
        }
    }

    pub fn with_cost_row(mut self, c: &[f64]) -> Self {
        self.c = Some(c.iter().map(|&x| [x, 0.0]).collect());
        self
    }

    fn validate(&self, what: &str) -> Result<(), ValidationError> {
        match (&self.squeezer, &self.raw) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(invalid(format!("{what}: exactly one of `squeezer` or `raw` is required"))),
        }
        if let Some(raw) = &self.raw {
            for (name, m) in [("F", &raw.f), ("G", &raw.g), ("H", &raw.h), ("K", &raw.k)] {
                matrix_from_spec(m).map_err(|e| invalid(format!("{what}.raw.{name}: {e}")))?;
            }
        }
        if let Some(c) = &self.c {
            row_from_spec(c).map_err(|e| invalid(format!("{what}.C: {e}")))?;
        }
        Ok(())
    }

    /// Builds the doubled system. `enforce` overrides the squeezer's own flag.
    pub fn build(&self, enforce: Option<bool>) -> Result<QuantumSystem, ModelError> {
        let sys = match (&self.squeezer, &self.raw) {
            (Some(s), _) => {
                make_squeezer(s.gamma, &s.kappas, Complex64::new(s.chi_re, s.chi_im), enforce.unwrap_or(s.enforce))?
            }
            (None, Some(r)) => {
                let conv = |m: &MatrixSpec| matrix_from_spec(m).map_err(|e| ModelError::BadParameter(e.0));
                QuantumSystem::new(conv(&r.f)?, conv(&r.g)?, conv(&r.h)?, conv(&r.k)?)?
            }
            (None, None) => return Err(ModelError::BadParameter("model has neither squeezer nor raw matrices".into())),
        };
        match &self.c {
            Some(c) => sys.with_cost_row(row_from_spec(c).map_err(|e| ModelError::BadParameter(e.0))?),
            None => Ok(sys),
        }
    }
}

fn pair(p: &Pair) -> Result<Complex64, ValidationError> {
    if p[0].is_finite() && p[1].is_finite() {
        Ok(Complex64::new(p[0], p[1]))
    } else {
        Err(invalid("entries must be finite"))
    }
}

pub fn matrix_from_spec(m: &MatrixSpec) -> Result<ComplexMatrix, ValidationError> {
    if m.is_empty() || m[0].is_empty() {
        return Err(invalid("matrix must have at least one row and one column"));
    }
    let cols = m[0].len();
    if let Some(i) = m.iter().position(|r| r.len() != cols) {
        return Err(invalid(format!("row {i} has {} entries, expected {cols}", m[i].len())));
    }
    let rows: Vec<Vec<Complex64>> =
        m.iter().map(|r| r.iter().map(pair).collect::<Result<_, _>>()).collect::<Result<_, _>>()?;
    ComplexMatrix::from_rows(&rows).map_err(|e| invalid(e.to_string()))
}

pub fn row_from_spec(r: &RowSpec) -> Result<ComplexMatrix, ValidationError> {
    matrix_from_spec(&vec![r.clone()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleGrid {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub steps: usize,
}

impl AngleGrid {
    /// Evenly spaced angles from `start_deg` to `stop_deg` inclusive.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start_deg];
        }
        let span = self.stop_deg - self.start_deg;
        let last = (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start_deg + span * i as f64 / last).collect()
    }
}

impl Default for AngleGrid {
    fn default() -> Self {
        Self { start_deg: 0.0, stop_deg: 180.0, steps: 181 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg_path: Option<PathBuf>,
}

/// Raw file contents before validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    plant: Option<ModelSpec>,
    #[serde(default)]
    controller: Option<ModelSpec>,
    #[serde(default)]
    cost_row: Option<RowSpec>,
    #[serde(default)]
    angles: Option<AngleGrid>,
    #[serde(default)]
    solver: Option<SolverSpec>,
    #[serde(default)]
    outputs: Option<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub plant: ModelSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<ModelSpec>,
    /// Cost row; falls back to the plant's `C` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_row: Option<RowSpec>,
    pub angles: AngleGrid,
    pub solver: SolverSpec,
    pub outputs: OutputSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        self.plant.validate("plant")?;
        if let Some(c) = &self.controller {
            c.validate("controller")?;
        }
        if let Some(c) = &self.cost_row {
            row_from_spec(c).map_err(|e| invalid(format!("cost_row: {e}")))?;
        }
        if self.cost_row.is_none() && self.plant.c.is_none() {
            return Err(invalid("a cost row is required (`cost_row` or `plant.C`)"));
        }
        let a = &self.angles;
        if a.steps == 0 {
            return Err(invalid("angles.steps must be at least 1"));
        }
        if !(a.start_deg.is_finite() && a.stop_deg.is_finite()) {
            return Err(invalid("angles must be finite"));
        }
        if a.start_deg > a.stop_deg {
            return Err(invalid(format!(
                "angles.start_deg ({}) exceeds angles.stop_deg ({})",
                a.start_deg, a.stop_deg
            )));
        }
        if let Some(tol) = self.solver.tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(invalid(format!("solver.tol must be positive, got {tol}")));
            }
        }
        if self.solver.max_iter == Some(0) {
            return Err(invalid("solver.max_iter must be at least 1"));
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let mut opts = SolveOptions::default();
        if let Some(tol) = self.solver.tol {
            opts.tol = tol;
        }
        if let Some(n) = self.solver.max_iter {
            opts.max_iter = n;
        }
        opts
    }

    /// Plant with the effective cost row attached.
    pub fn build_plant(&self) -> Result<QuantumSystem, ModelError> {
        let plant = self.plant.build(None)?;
        match &self.cost_row {
            Some(c) => plant.with_cost_row(row_from_spec(c).map_err(|e| ModelError::BadParameter(e.0))?),
            None => Ok(plant),
        }
    }

    pub fn build_controller(&self) -> Result<Option<QuantumSystem>, ModelError> {
        self.controller.as_ref().map(|c| c.build(None)).transpose()
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &[u8]) -> Result<T, ParseError> {
    let de = &mut serde_json::Deserializer::from_slice(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ParseError { line: inner.line(), column: inner.column(), path, message: strip_position(&inner) }
    })
}

fn strip_position(e: &serde_json::Error) -> String {
    let full = e.to_string();
    match full.rfind(" at line ") {
        Some(i) => full[..i].to_string(),
        None => full,
    }
}

pub fn parse_config(text: &[u8]) -> Result<RunConfig, ConfigError> {
    let file: RunConfigFile = parse_json(text)?;
    let plant = file.plant.ok_or_else(|| invalid("missing `plant`"))?;
    let cfg = RunConfig {
        plant,
        controller: file.controller,
        cost_row: file.cost_row,
        angles: file.angles.unwrap_or_default(),
        solver: file.solver.unwrap_or_default(),
        outputs: file.outputs.unwrap_or_default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_model(text: &[u8]) -> Result<ModelSpec, ConfigError> {
    let spec: ModelSpec = parse_json(text)?;
    spec.validate("model")?;
    Ok(spec)
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = serde_json::to_string_pretty(self).map_err(|_| fmt::Error)?;
        f.write_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "plant": {"squeezer": {"gamma": 4, "kappas": [4], "chi_re": 0, "chi_im": 0}},
        "cost_row": [[0.2, 0], [-0.2, 0]],
        "angles": {"start_deg": 0, "stop_deg": 180, "steps": 181}
    }"#;

    #[test]
    fn minimal_squeezer_config() {
        let cfg = parse_config(MINIMAL.as_bytes()).unwrap();
        assert_eq!(cfg.angles.points().len(), 181);
        assert_eq!(cfg.angles.points()[40], 40.0);
        let plant = cfg.build_plant().unwrap();
        assert_eq!(plant.modes(), 1);
        assert_eq!(plant.cost_row().unwrap(), &ComplexMatrix::from_real_rows(&[[0.2, -0.2]]).unwrap());
        assert!(cfg.build_controller().unwrap().is_none());
    }

    #[test]
    fn missing_plant_and_zero_steps_are_validation_errors() {
        let err = parse_config(br#"{"cost_row": [[1, 0]]}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)), "{err}");
        let text = MINIMAL.replace("\"steps\": 181", "\"steps\": 0");
        assert!(matches!(parse_config(text.as_bytes()), Err(ConfigError::Validation(_))));
        let text = MINIMAL.replace("\"start_deg\": 0", "\"start_deg\": 200");
        assert!(matches!(parse_config(text.as_bytes()), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn unknown_keys_report_path_and_line() {
        let text = MINIMAL.replace("\"chi_im\": 0", "\"chi_img\": 0");
        let ConfigError::Parse(e) = parse_config(text.as_bytes()).unwrap_err() else { panic!("kind") };
        assert_eq!(e.line, 2);
        assert!(e.path.starts_with("plant.squeezer"), "{}", e.path);
        assert!(e.message.contains("chi_img"));
    }

    #[test]
    fn ragged_matrices_and_double_models_are_rejected() {
        let raw = br#"{"raw": {"F": [[[1,0],[0,0]],[[0,0]]], "G": [[[1,0]]], "H": [[[1,0]]], "K": [[[1,0]]]}}"#;
        assert!(matches!(parse_model(raw), Err(ConfigError::Validation(_))));
        let both = br#"{"squeezer": {"gamma": 1, "kappas": [1]}, "raw": {"F": [], "G": [], "H": [], "K": []}}"#;
        assert!(matches!(parse_model(both), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_model(b"{}"), Err(ConfigError::Validation(_))));
        assert!(matches!(parse_model(b"[1, 2"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn raw_model_round_trip() {
        let spec = parse_model(
            br#"{"raw": {
                "F": [[[-2,0],[0,0]],[[0,0],[-2,0]]],
                "G": [[[-2,0],[0,0]],[[0,0],[-2,0]]],
                "H": [[[2,0],[0,0]],[[0,0],[2,0]]],
                "K": [[[1,0],[0,0]],[[0,0],[1,0]]]
            }, "C": [[0.2,0],[-0.2,0]]}"#,
        )
        .unwrap();
        let sys = spec.build(None).unwrap();
        let reference = make_squeezer(4.0, &[4.0], Complex64::new(0.0, 0.0), true).unwrap();
        assert_eq!(sys.f(), reference.f());
        assert_eq!(sys.g(), reference.g());
        assert!(sys.cost_row().is_some());
    }

    #[test]
    fn steps_of_one_is_the_start_angle() {
        let g = AngleGrid { start_deg: 10.0, stop_deg: 20.0, steps: 1 };
        assert_eq!(g.points(), vec![10.0]);
        let g = AngleGrid { start_deg: 0.0, stop_deg: 1.0, steps: 3 };
        assert_eq!(g.points(), vec![0.0, 0.5, 1.0]);
    }
}
