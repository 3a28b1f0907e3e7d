//! JSON system descriptions.
//!
//! ```json
//! {"dim": 2, "maps": [{"linear": [["3/5", 0], [0, "1/5"]], "translation": [0, 0]}, ...]}
//! {"preset": "harmonic-gasket"}
//! ```
//!
//! Numbers may be JSON numbers or strings of the form `p/q`, `sqrt(k)/m`,
//! `sqrt(k)`, or a decimal, with an optional leading sign.

use matgibbs::ifs::{build_system, preset_dyadic, preset_harmonic_gasket};
use matgibbs::IfsSystem;
use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    HarmonicGasket,
    Dyadic,
}

impl Preset {
    pub const NAMES: [&'static str; 2] = ["harmonic-gasket", "dyadic-1d"];

    pub fn from_name(name: &str) -> Option<Preset> {
        match name {
            "harmonic-gasket" => Some(Preset::HarmonicGasket),
            "dyadic-1d" => Some(Preset::Dyadic),
            _ => None,
        }
    }

    pub fn system(self) -> IfsSystem {
        match self {
            Preset::HarmonicGasket => preset_harmonic_gasket(),
            Preset::Dyadic => preset_dyadic(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid JSON")]
    Json(#[from] serde_json::Error),
    #[error("{field}: {message}")]
    Schema { field: String, message: String },
    #[error("unknown preset {0:?} (expected one of: harmonic-gasket, dyadic-1d)")]
    UnknownPreset(String),
    #[error(transparent)]
    System(#[from] matgibbs::Error),
}

fn schema(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema {
        field: field.into(),
        message: message.into(),
    }
}

/// A parsed system, remembering the preset it came from if any.
#[derive(Debug, Clone)]
pub struct SystemSource {
    pub system: IfsSystem,
    pub preset: Option<Preset>,
}

impl SystemSource {
    pub fn preset(p: Preset) -> Self {
        SystemSource {
            system: p.system(),
            preset: Some(p),
        }
    }
}

pub fn parse_config(document: &str) -> Result<SystemSource, ConfigError> {
    let root: Value = serde_json::from_str(document)?;
    let obj = root
        .as_object()
        .ok_or_else(|| schema("<root>", "expected an object"))?;

    if let Some(p) = obj.get("preset") {
        if obj.contains_key("maps") {
            return Err(schema("preset", "give either `preset` or `maps`, not both"));
        }
        let name = p
            .as_str()
            .ok_or_else(|| schema("preset", "expected a string"))?;
        let preset =
            Preset::from_name(name).ok_or_else(|| ConfigError::UnknownPreset(name.into()))?;
        return Ok(SystemSource::preset(preset));
    }

    let dim = obj
        .get("dim")
        .ok_or_else(|| schema("dim", "missing"))?
        .as_u64()
        .filter(|&d| d >= 1)
        .ok_or_else(|| schema("dim", "expected a positive integer"))? as usize;
    let maps = obj
        .get("maps")
        .ok_or_else(|| schema("maps", "missing"))?
        .as_array()
        .ok_or_else(|| schema("maps", "expected a list"))?;

    let raw = maps
        .iter()
        .enumerate()
        .map(|(k, m)| parse_map(m, k + 1, dim))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SystemSource {
        system: build_system(raw)?,
        preset: None,
    })
}

fn parse_map(
    value: &Value,
    index: usize,
    dim: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), ConfigError> {
    let field = format!("maps[{index}]");
    let obj: &Map<String, Value> = value
        .as_object()
        .ok_or_else(|| schema(&field, "expected an object"))?;

    let rows = obj
        .get("linear")
        .ok_or_else(|| schema(format!("{field}.linear"), "missing"))?
        .as_array()
        .ok_or_else(|| schema(format!("{field}.linear"), "expected a list of rows"))?;
    if rows.len() != dim {
        return Err(schema(
            format!("{field}.linear"),
            format!("expected {dim} rows, got {}", rows.len()),
        ));
    }
    let mut linear = DMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let row_field = format!("{field}.linear row {}", i + 1);
        let entries = row
            .as_array()
            .ok_or_else(|| schema(&row_field, "expected a list"))?;
        if entries.len() != dim {
            return Err(schema(
                &row_field,
                format!("expected {dim} entries, got {}", entries.len()),
            ));
        }
        for (j, v) in entries.iter().enumerate() {
            linear[(i, j)] = parse_number(v).map_err(|m| schema(&row_field, m))?;
        }
    }

    let translation_field = format!("{field}.translation");
    let entries = obj
        .get("translation")
        .ok_or_else(|| schema(&translation_field, "missing"))?
        .as_array()
        .ok_or_else(|| schema(&translation_field, "expected a list"))?;
    if entries.len() != dim {
        return Err(schema(
            &translation_field,
            format!("expected {dim} entries, got {}", entries.len()),
        ));
    }
    let translation = entries
        .iter()
        .map(|v| parse_number(v).map_err(|m| schema(&translation_field, m)))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok((linear, DVector::from_vec(translation)))
}

fn parse_number(value: &Value) -> Result<f64, String> {
    match value {
        Value::Number(n) => n
            .as_f64()
            .ok_or_else(|| format!("unrepresentable number {n}")),
        Value::String(s) => parse_exact(s).ok_or_else(|| format!("cannot parse number {s:?}")),
        other => Err(format!("expected a number, got {other}")),
    }
}

/// Parses `[-]num[/den]` where `num` is a decimal, `sqrt(k)`, or `c*sqrt(k)`.
pub fn parse_exact(text: &str) -> Option<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(&t)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (body, None),
    };
    let mut value = parse_factor(num)?;
    if let Some(d) = den {
        let d = parse_factor(d)?;
        if d == 0.0 {
            return None;
        }
        value /= d;
    }
    let value = sign * value;
    value.is_finite().then_some(value)
}

fn parse_factor(text: &str) -> Option<f64> {
    if let Some((c, rest)) = text.split_once('*') {
        return Some(parse_factor(c)? * parse_factor(rest)?);
    }
    if let Some(inner) = text.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let k: f64 = inner.parse().ok()?;
        return (k >= 0.0).then(|| k.sqrt());
    }
    if text.is_empty() || text.starts_with(['+', '-']) {
        return None;
    }
    text.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_strings() {
        assert_eq!(parse_exact("3/5"), Some(0.6));
        assert_eq!(parse_exact("-1/5"), Some(-0.2));
        assert_eq!(parse_exact("sqrt(3)/10"), Some(3f64.sqrt() / 10.0));
        assert_eq!(parse_exact("-sqrt(3)/10"), Some(-(3f64.sqrt() / 10.0)));
        assert_eq!(parse_exact("2*sqrt(2)"), Some(2.0 * 2f64.sqrt()));
        assert_eq!(parse_exact(" 0.25 "), Some(0.25));
        assert_eq!(parse_exact("1e-3"), Some(1e-3));
        for bad in ["", "1/0", "sqrt(-1)", "abc", "--1", "1/", "sqrt(3"] {
            assert_eq!(parse_exact(bad), None, "{bad}");
        }
    }

    #[test]
    fn preset_documents() {
        let s = parse_config(r#"{"preset": "harmonic-gasket"}"#).unwrap();
        assert_eq!(s.preset, Some(Preset::HarmonicGasket));
        assert_eq!(s.system, preset_harmonic_gasket());
        assert!(matches!(
            parse_config(r#"{"preset": "koch"}"#),
            Err(ConfigError::UnknownPreset(_))
        ));
    }

    #[test]
    fn dyadic_document() {
        let doc = r#"{"dim":1,"maps":[{"linear":[[0.5]],"translation":[0]},{"linear":[[0.5]],"translation":[0.5]}]}"#;
        let s = parse_config(doc).unwrap();
        assert_eq!(s.preset, None);
        assert_eq!(s.system, preset_dyadic());
    }

    #[test]
    fn gasket_round_trips_through_exact_strings() {
        let doc = r#"{"dim": 2, "maps": [
            {"linear": [["3/5", 0], [0, "1/5"]], "translation": [0, 0]},
            {"linear": [["3/10", "sqrt(3)/10"], ["sqrt(3)/10", "1/2"]], "translation": ["3/5", "sqrt(3)/15"]},
            {"linear": [["3/10", "-sqrt(3)/10"], ["-sqrt(3)/10", "1/2"]], "translation": ["3/5", "-sqrt(3)/15"]}
        ]}"#;
        let s = parse_config(doc).unwrap();
        let gasket = preset_harmonic_gasket();
        for (a, b) in s.system.maps().iter().zip(gasket.maps()) {
            assert!((a.linear() - b.linear()).abs().max() < 1e-15);
            assert!((a.translation() - b.translation()).abs().max() < 1e-15);
        }
    }

    #[test]
    fn contraction_violation_names_the_map() {
        let doc = r#"{"dim":2,"maps":[{"linear":[[1,0],[0,1]],"translation":[0,0]}]}"#;
        let err = parse_config(doc).unwrap_err().to_string();
        assert!(err.starts_with("map 1: not a contraction"), "{err}");
    }

    #[test]
    fn schema_errors_name_field_and_row() {
        let cases = [
            (r#"[]"#, "<root>"),
            (r#"{"maps": []}"#, "dim"),
            (r#"{"dim": 0, "maps": []}"#, "dim"),
            (r#"{"dim": 1}"#, "maps"),
            (
                r#"{"dim": 1, "maps": [{"linear": [[0.5]]}]}"#,
                "maps[1].translation",
            ),
            (
                r#"{"dim": 2, "maps": [{"linear": [[0.5, 0], [0]], "translation": [0, 0]}]}"#,
                "maps[1].linear row 2",
            ),
            (
                r#"{"dim": 1, "maps": [{"linear": [[0.5]], "translation": [0]}, {"linear": [["x"]], "translation": [0]}]}"#,
                "maps[2].linear row 1",
            ),
        ];
        for (doc, field) in cases {
            match parse_config(doc) {
                Err(ConfigError::Schema { field: f, .. }) => assert_eq!(f, field, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
        assert!(matches!(parse_config("{"), Err(ConfigError::Json(_))));
    }
}
