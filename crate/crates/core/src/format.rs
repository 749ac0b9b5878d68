//! Locale-free float formatting shared by every CSV writer.

/// Significant digits in every emitted number.
pub const SIG_DIGITS: usize = 9;

/// Formats `v` with [`SIG_DIGITS`] significant digits in the style of C's
/// `%.9g`: fixed notation for moderate exponents, scientific otherwise,
/// trailing zeros trimmed.
pub fn sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
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

#[cfg(test)]
mod tests {
    use super::sig;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig(0.0), "0");
        assert_eq!(sig(1.0), "1");
        assert_eq!(sig(-0.5), "-0.5");
        assert_eq!(sig(0.488), "0.488");
        assert_eq!(sig(1.0 / 3.0), "0.333333333");
        assert_eq!(sig(123456789.4), "123456789");
        assert_eq!(sig(1234567890.0), "1.23456789e+09");
        assert_eq!(sig(1.5e-7), "1.5e-07");
        assert_eq!(sig(0.0001), "0.0001");
        assert_eq!(sig(f64::NAN), "nan");
        assert_eq!(sig(2.0f64.sqrt()), "1.41421356");
    }
}
