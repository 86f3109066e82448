//! Finite-only JSON emission.
//!
//! Non-finite floats never reach the output: an object field holding one is
//! written as `null` next to a `<field>_non_finite` flag (`"+inf"`, `"-inf"`
//! or `"nan"`); inside arrays the flag string replaces the value.

use serde::Serialize;
use serde_json::{Map, Number, Value};
use serde_value::Value as Raw;

fn flag(v: f64) -> Option<&'static str> {
    if v.is_nan() {
        Some("nan")
    } else if v == f64::INFINITY {
        Some("+inf")
    } else if v == f64::NEG_INFINITY {
        Some("-inf")
    } else {
        None
    }
}

fn float(raw: &Raw) -> Option<f64> {
    match raw {
        Raw::F64(v) => Some(*v),
        Raw::F32(v) => Some(*v as f64),
        Raw::Option(Some(inner)) | Raw::Newtype(inner) => float(inner),
        _ => None,
    }
}

fn key(raw: Raw) -> String {
    match raw {
        Raw::String(s) => s,
        Raw::Char(c) => c.to_string(),
        other => match convert(other, &[]) {
            Value::String(s) => s,
            v => v.to_string(),
        },
    }
}

fn convert(raw: Raw, strip: &[&str]) -> Value {
    match raw {
        Raw::Bool(b) => Value::Bool(b),
        Raw::U8(v) => Value::from(v),
        Raw::U16(v) => Value::from(v),
        Raw::U32(v) => Value::from(v),
        Raw::U64(v) => Value::from(v),
        Raw::I8(v) => Value::from(v),
        Raw::I16(v) => Value::from(v),
        Raw::I32(v) => Value::from(v),
        Raw::I64(v) => Value::from(v),
        Raw::F32(v) => finite_or_flag(v as f64),
        Raw::F64(v) => finite_or_flag(v),
        Raw::Char(c) => Value::String(c.to_string()),
        Raw::String(s) => Value::String(s),
        Raw::Unit => Value::Null,
        Raw::Option(None) => Value::Null,
        Raw::Option(Some(v)) | Raw::Newtype(v) => convert(*v, strip),
        Raw::Seq(items) => Value::Array(items.into_iter().map(|v| convert(v, strip)).collect()),
        Raw::Bytes(b) => Value::Array(b.into_iter().map(Value::from).collect()),
        Raw::Map(m) => {
            let mut out = Map::new();
            for (k, v) in m {
                let k = key(k);
                if strip.contains(&k.as_str()) {
                    continue;
                }
                if let Some(f) = float(&v).and_then(flag) {
                    out.insert(format!("{k}_non_finite"), Value::String(f.into()));
                    out.insert(k, Value::Null);
                } else {
                    out.insert(k, convert(v, strip));
                }
            }
            Value::Object(out)
        }
    }
}

fn finite_or_flag(v: f64) -> Value {
    match Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None => Value::String(flag(v).unwrap_or("nan").into()),
    }
}

/// Converts to JSON with non-finite floats flagged and the named keys removed at every depth.
pub fn to_finite_json<S: Serialize>(value: &S, strip: &[&str]) -> Value {
    match serde_value::to_value(value) {
        Ok(raw) => convert(raw, strip),
        Err(e) => Value::String(format!("serialization failed: {e}")),
    }
}

/// Object of float fields, with the same flagging as [`to_finite_json`].
pub fn numbers(fields: &[(&str, f64)]) -> Value {
    let mut out = Map::new();
    for (k, v) in fields {
        if let Some(f) = flag(*v) {
            out.insert(format!("{k}_non_finite"), Value::String(f.into()));
            out.insert((*k).to_string(), Value::Null);
        } else {
            out.insert((*k).to_string(), finite_or_flag(*v));
        }
    }
    Value::Object(out)
}

/// Merges the fields of `extra` into the object `base`.
pub fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

/// Whether every number in `v` is finite (always true for values built by [`to_finite_json`]).
pub fn all_finite(v: &Value) -> bool {
    match v {
        Value::Number(n) => n.as_f64().is_none_or(f64::is_finite),
        Value::Array(a) => a.iter().all(all_finite),
        Value::Object(o) => o.values().all(all_finite),
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: f64,
        c: Vec<f64>,
        elapsed: f64,
        t: (f64, f64),
    }

    #[test]
    fn flags_non_finite() {
        let s = Sample { a: 1.5, b: f64::INFINITY, c: vec![f64::NAN, 2.0], elapsed: 3.0, t: (f64::NEG_INFINITY, 0.0) };
        let v = to_finite_json(&s, &["elapsed"]);
        assert_eq!(v["a"], 1.5);
        assert_eq!(v["b"], Value::Null);
        assert_eq!(v["b_non_finite"], "+inf");
        assert_eq!(v["c"][0], "nan");
        assert_eq!(v["t"][0], "-inf");
        assert!(v.get("elapsed").is_none());
        assert!(all_finite(&v));
    }

    #[test]
    fn numbers_flag_non_finite_fields() {
        let v = merge(numbers(&[("x", 2.0), ("y", f64::NEG_INFINITY)]), serde_json::json!({ "k": "s" }));
        assert_eq!(v["x"], 2.0);
        assert_eq!(v["y"], Value::Null);
        assert_eq!(v["y_non_finite"], "-inf");
        assert_eq!(v["k"], "s");
    }
}
