//! Float rendering shared by the text writers.

/// Shortest decimal string that parses back to exactly `v`.
///
/// Plain notation inside `[1e-4, 1e16)`, scientific outside it, so tiny
/// magnitudes do not expand into hundreds of zeros. Never more than 17
/// significant digits.
pub fn roundtrip(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `%.<digits>g`-style rendering: `digits` significant digits, trailing zeros
/// trimmed, scientific notation when the exponent is below -4 or at least
/// `digits`.
pub fn significant(v: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
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
