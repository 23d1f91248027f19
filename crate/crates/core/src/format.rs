//! Float formatting shared by every text output.
//!
//! All CSV and JSON floats are written the way C's `printf("%.17g")` writes
//! them, which round-trips every finite `f64`.

/// Formats `x` exactly like `printf("%.17g", x)`.
pub fn g17(x: f64) -> String {
    const PRECISION: i32 = 17;
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    // Scientific rendering with P-1 fraction digits gives the decimal
    // exponent after rounding, which decides between %e and %f style.
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = strip_fraction_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        strip_fraction_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_fraction_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A JSON number token rendered with [`g17`]; non-finite values become `null`.
pub fn json_number(x: f64) -> Box<serde_json::value::RawValue> {
    let text = if x.is_finite() {
        g17(x)
    } else {
        "null".to_string()
    };
    serde_json::value::RawValue::from_string(text).expect("valid JSON number")
}
