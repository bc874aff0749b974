//! Strict extraction of an action from free-form model output.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::types::{clamp_velocity, Action};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no JSON object found")]
    NoObject,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("sensor {sensor} outside 1..{n}")]
    SensorOutOfRange { sensor: String, n: usize },
    #[error("field `{0}` is not a valid number")]
    NonNumeric(&'static str),
}

impl ParseError {
    /// Short stable tag for logs and retry accounting.
    pub fn tag(&self) -> &'static str {
        match self {
            ParseError::NoObject => "no-object",
            ParseError::MissingField(_) => "missing-field",
            ParseError::SensorOutOfRange { .. } => "sensor-out-of-range",
            ParseError::NonNumeric(_) => "non-numeric",
        }
    }
}

/// Byte range of the balanced `{...}` starting at `open`, honouring JSON
/// string literals and escapes.
fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_str {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// First balanced span that is a valid JSON object; surrounding text and
/// braces that do not form one are skipped.
pub fn first_object(raw: &str) -> Option<Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut from = 0;
    while let Some(off) = raw[from..].find('{') {
        let open = from + off;
        if let Some(end) = balanced_end(bytes, open) {
            if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&raw[open..end]) {
                return Some(map);
            }
        }
        from = open + 1;
    }
    None
}

/// `{"sensor": <integer 1..n>, "velocity": <number>}`; the velocity is
/// clamped into `[v_min, v_max]`.
pub fn parse_action(raw: &str, n_sensors: usize, v_min: f64, v_max: f64) -> Result<Action, ParseError> {
    let obj = first_object(raw).ok_or(ParseError::NoObject)?;
    let sensor = obj.get("sensor").ok_or(ParseError::MissingField("sensor"))?;
    let velocity = obj.get("velocity").ok_or(ParseError::MissingField("velocity"))?;
    let Value::Number(num) = sensor else {
        return Err(ParseError::NonNumeric("sensor"));
    };
    let id = if let Some(i) = num.as_i64() {
        i
    } else if num.as_u64().is_some() {
        return Err(ParseError::SensorOutOfRange {
            sensor: num.to_string(),
            n: n_sensors,
        });
    } else {
        return Err(ParseError::NonNumeric("sensor"));
    };
    if id < 1 || id as u64 > n_sensors as u64 {
        return Err(ParseError::SensorOutOfRange {
            sensor: id.to_string(),
            n: n_sensors,
        });
    }
    let v = velocity
        .as_f64()
        .filter(|v| v.is_finite())
        .ok_or(ParseError::NonNumeric("velocity"))?;
    Ok(Action::new(id as usize, clamp_velocity(v, v_min, v_max)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(raw: &str) -> Result<Action, ParseError> {
        parse_action(raw, 10, 0.0, 15.0)
    }

    #[test]
    fn plain_object() {
        assert_eq!(p(r#"{"sensor": 3, "velocity": 12.5}"#), Ok(Action::new(3, 12.5)));
    }

    #[test]
    fn prose_skipped_and_velocity_clamped() {
        assert_eq!(p(r#"I choose {"sensor": 7, "velocity": 99}"#), Ok(Action::new(7, 15.0)));
        assert_eq!(p(r#"{"sensor": 7, "velocity": -3}"#), Ok(Action::new(7, 0.0)));
    }

    #[test]
    fn error_tags() {
        assert_eq!(p("sensor five please"), Err(ParseError::NoObject));
        assert_eq!(p(r#"{"velocity": 1}"#), Err(ParseError::MissingField("sensor")));
        assert_eq!(p(r#"{"sensor": 1}"#), Err(ParseError::MissingField("velocity")));
        assert!(matches!(p(r#"{"sensor": 11, "velocity": 1}"#), Err(ParseError::SensorOutOfRange { .. })));
        assert!(matches!(p(r#"{"sensor": 0, "velocity": 1}"#), Err(ParseError::SensorOutOfRange { .. })));
        assert!(matches!(
            p(r#"{"sensor": 18446744073709551615, "velocity": 1}"#),
            Err(ParseError::SensorOutOfRange { .. })
        ));
        assert_eq!(p(r#"{"sensor": "3", "velocity": 1}"#), Err(ParseError::NonNumeric("sensor")));
        assert_eq!(p(r#"{"sensor": 2.5, "velocity": 1}"#), Err(ParseError::NonNumeric("sensor")));
        assert_eq!(p(r#"{"sensor": 2, "velocity": "fast"}"#), Err(ParseError::NonNumeric("velocity")));
        assert_eq!(ParseError::NoObject.tag(), "no-object");
    }

    #[test]
    fn first_valid_object_wins() {
        assert_eq!(
            p(r#"{not json} then {"sensor": 2, "velocity": 1} and {"sensor": 4, "velocity": 2}"#),
            Ok(Action::new(2, 1.0))
        );
        // braces inside strings do not unbalance the scan
        assert_eq!(p(r#"{"note": "}{", "sensor": 5, "velocity": 0}"#), Ok(Action::new(5, 0.0)));
        assert_eq!(p("```json\n{\"sensor\": 1, \"velocity\": 7.5}\n```"), Ok(Action::new(1, 7.5)));
    }

    #[test]
    fn nested_object_is_one_object() {
        assert_eq!(
            p(r#"{"sensor": 4, "velocity": 3, "why": {"a": 1}}"#),
            Ok(Action::new(4, 3.0))
        );
        assert_eq!(p(r#"{"plan": {"sensor": 4, "velocity": 3}}"#), Err(ParseError::MissingField("sensor")));
    }

    #[test]
    fn unbalanced_or_non_utf8_safe() {
        assert_eq!(p("{{{{"), Err(ParseError::NoObject));
        assert_eq!(p("}}}{"), Err(ParseError::NoObject));
        assert_eq!(p("é{\"sensor\": 1, \"velocity\": 1}ü"), Ok(Action::new(1, 1.0)));
    }
}
