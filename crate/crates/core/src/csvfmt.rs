//! Stable numeric formatting for CSV output: C's `%.12g`, so that identical
//! runs produce byte-identical files.

/// Format with 12 significant digits, fixed or scientific as `%g` would pick,
/// trailing zeros stripped.
pub fn g12(x: f64) -> String {
    format_g(x, 12)
}

pub fn format_g(x: f64, precision: usize) -> String {
    let p = precision.max(1) as i32;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    // decimal exponent after rounding to p significant digits
    let sci = format!("{:.*e}", (p - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= p {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x))
    }
}

fn strip_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let t = s.trim_end_matches('0');
    t.trim_end_matches('.').to_string()
}

/// Write one CSV row from already-formatted fields.
pub fn csv_row(fields: &[String]) -> String {
    fields.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g_conventions() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-1.5), "-1.5");
        assert_eq!(g12(0.6358), "0.6358");
        assert_eq!(g12(1.355e-6), "1.355e-06");
        assert_eq!(g12(151.053), "151.053");
        assert_eq!(g12(6.43641e15), "6.43641e+15");
        assert_eq!(g12(1e-4), "0.0001");
        assert_eq!(g12(1e-5), "1e-05");
        assert_eq!(g12(123456789012.0), "123456789012");
        assert_eq!(g12(1234567890123.0), "1.23456789012e+12");
        assert_eq!(g12(0.1), "0.1");
        assert_eq!(g12(-0.000012345), "-1.2345e-05");
    }

    #[test]
    fn round_trips_to_full_digits() {
        for &x in &[std::f64::consts::PI, 2.0 / 3.0, 1.36, 9.01] {
            let s = g12(x);
            let back: f64 = s.parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11);
        }
    }
}
