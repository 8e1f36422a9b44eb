//! Locale-independent number formatting shared by the CSV writers.

/// Formats `v` with 9 significant digits, following C's `%.9g`.
pub fn sig9(v: f64) -> String {
    sig_digits(v, 9)
}

/// `%.<digits>g` formatting: fixed notation when the decimal exponent lies in
/// `[-4, digits)`, scientific otherwise; trailing zeros are removed.
pub fn sig_digits(v: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // Rounding to `digits` significant digits fixes the exponent.
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
