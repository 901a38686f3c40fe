//! Lossless decimal rendering of `f64` values for the JSON outputs.

use std::str::FromStr;

/// Renders `x` with exactly 17 significant digits in positional notation,
/// e.g. `0.9051` → `"0.90510000000000002"`. Parsing the result gives back
/// the same bits.
pub fn format_sig17(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.16e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let mut out = String::with_capacity(24);
    if x.is_sign_negative() {
        out.push('-');
    }
    if exp >= 0 {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            out.push_str(".0");
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(&digits);
    }
    out
}

/// A JSON number that serializes with [`format_sig17`].
pub fn json_number(x: f64) -> serde_json::Value {
    match serde_json::Number::from_str(&format_sig17(x)) {
        Ok(n) => serde_json::Value::Number(n),
        Err(_) => serde_json::Value::Null,
    }
}

/// Reads a JSON number as `f64`, accepting any decimal rendering.
pub fn json_f64(value: &serde_json::Value) -> Option<f64> {
    match value {
        serde_json::Value::Number(n) => n.as_f64(),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_renderings() {
        assert_eq!(format_sig17(0.9051), "0.90510000000000002");
        assert_eq!(format_sig17(1.0), "1.0000000000000000");
        assert_eq!(format_sig17(0.0), "0.0000000000000000");
        assert_eq!(format_sig17(0.5), "0.50000000000000000");
        assert_eq!(format_sig17(0.00125), "0.0012500000000000000");
        assert_eq!(format_sig17(-2.5), "-2.5000000000000000");
        assert_eq!(format_sig17(123.0), "123.00000000000000");
        assert_eq!(format_sig17(1e17), "100000000000000000.0");
    }

    #[test]
    fn json_number_is_verbatim() {
        let v = serde_json::json!({ "dice": json_number(0.9051) });
        assert_eq!(v.to_string(), r#"{"dice":0.90510000000000002}"#);
        assert_eq!(json_f64(&v["dice"]), Some(0.9051));
    }

    proptest! {
        #[test]
        fn round_trips_bits(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL) {
            let s = format_sig17(x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits(), "{}", s);
        }
    }
}
