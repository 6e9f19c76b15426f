//! Numeric formatting shared by CSV and record output.

/// Formats `x` with six significant digits, `%g` style: fixed notation for
/// moderate magnitudes, scientific otherwise, trailing zeros removed.
pub fn sig6(x: f64) -> String {
    format_sig(x, 6)
}

pub fn format_sig(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -4 || exp >= digits as i32 {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to six significant digits.
pub fn round6(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    sig6(x).parse().expect("sig6 output parses as f64")
}

/// Rounds every non-integer number in `value` to six significant digits.
pub fn round_json(value: &mut serde_json::Value) {
    use serde_json::Value;
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round6(n.as_f64().expect("checked is_f64"));
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Flattens a JSON document into `(dotted.path, value)` pairs in document
/// order; numbers are printed with six significant digits, nulls as empty.
pub fn flatten_json(value: &serde_json::Value) -> Vec<(String, String)> {
    fn walk(prefix: String, value: &serde_json::Value, out: &mut Vec<(String, String)>) {
        use serde_json::Value;
        let join = |key: &str| {
            if prefix.is_empty() {
                key.to_string()
            } else {
                format!("{prefix}.{key}")
            }
        };
        match value {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(join(k), v, out)),
            Value::Array(items) if !items.is_empty() => items
                .iter()
                .enumerate()
                .for_each(|(i, v)| walk(join(&i.to_string()), v, out)),
            Value::Array(_) => out.push((prefix, String::new())),
            Value::Null => out.push((prefix, String::new())),
            Value::Number(n) => {
                let text = match n.as_f64() {
                    Some(x) if n.is_f64() => sig6(x),
                    _ => n.to_string(),
                };
                out.push((prefix, text));
            }
            Value::String(s) => out.push((prefix, s.clone())),
            Value::Bool(b) => out.push((prefix, b.to_string())),
        }
    }
    let mut out = Vec::new();
    walk(String::new(), value, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_rounding_and_flattening() {
        let mut v = serde_json::json!({"a": 0.123456789, "b": [1, 2.5], "c": {"d": null}});
        round_json(&mut v);
        assert_eq!(v["a"], serde_json::json!(0.123457));
        let flat = flatten_json(&v);
        assert_eq!(
            flat,
            vec![
                ("a".to_string(), "0.123457".to_string()),
                ("b.0".to_string(), "1".to_string()),
                ("b.1".to_string(), "2.5".to_string()),
                ("c.d".to_string(), String::new()),
            ]
        );
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-6.087), "-6.087");
        assert_eq!(sig6(0.009534271), "0.00953427");
        assert_eq!(sig6(3.000000001), "3");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(0.0000123456789), "1.23457e-05");
        assert_eq!(sig6(999999.5), "1e+06");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn rounding() {
        assert_eq!(round6(0.0498132456), 0.0498132);
        assert_eq!(round6(2.0), 2.0);
    }
}
