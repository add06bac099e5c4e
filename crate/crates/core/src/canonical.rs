//! Canonical JSON output: sorted keys and floats rounded to 9 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{Error, Result};

/// Round to 9 significant digits.
///
/// The result is a fixed point: printing it with shortest round-trip
/// formatting and parsing it back yields the same value.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn canonicalize(value: Value) -> Result<Value> {
    Ok(match value {
        Value::Number(n) if n.is_f64() => {
            let f = n.as_f64().unwrap_or(f64::NAN);
            let rounded = Number::from_f64(round_sig9(f))
                .ok_or_else(|| Error::Format(format!("non-finite number {f} in output")))?;
            Value::Number(rounded)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect::<Result<Vec<_>>>()?),
        // serde_json's default map is ordered by key.
        Value::Object(map) => Value::Object(
            map.into_iter()
                .map(|(k, v)| canonicalize(v).map(|v| (k, v)))
                .collect::<Result<_>>()?,
        ),
        other => other,
    })
}

/// Serialize to canonical, pretty-printed JSON with a trailing newline.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    let value = canonicalize(serde_json::to_value(value)?)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keys_are_sorted_and_floats_rounded() {
        let v = serde_json::json!({"b": 1.0f64 / 3.0, "a": [2.5, 7], "c": {"z": 1, "y": 0.1}});
        let s = to_canonical_string(&v).unwrap();
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        let c = s.find("\"c\"").unwrap();
        assert!(a < b && b < c);
        assert!(s.contains("0.333333333"));
        assert!(!s.contains("0.3333333333"));
        assert!(s.find("\"y\"").unwrap() < s.find("\"z\"").unwrap());
    }

    #[test]
    fn non_finite_serializes_as_null() {
        // serde_json maps non-finite floats to null before canonicalization
        assert!(to_canonical_string(&vec![f64::INFINITY]).unwrap().contains("null"));
    }

    proptest! {
        #[test]
        fn rounding_is_idempotent_through_text(v in -1e12f64..1e12) {
            let r = round_sig9(v);
            prop_assert_eq!(round_sig9(r), r);
            let text = serde_json::to_string(&r).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
