//! Plain-text number formatting shared by the CSV writers.

/// Formats `x` with nine significant digits.
///
/// Fixed notation is used for magnitudes in `[1e-4, 1e9)`, scientific
/// otherwise; zero prints as `0`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let mag = x.abs();
    if (1e-4..1e9).contains(&mag) {
        let exp = mag.log10().floor() as i32;
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new digit (9.99999999996 -> 10.00000000).
        if s.trim_start_matches('-')
            .replace('.', "")
            .trim_start_matches('0')
            .len()
            > 9
            && decimals > 0
        {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.8e}")
    }
}

#[cfg(test)]
mod tests {
    use super::sig9;

    #[test]
    fn nine_digits() {
        assert_eq!(sig9(-22.360679775), "-22.3606798");
        assert_eq!(sig9(1.0), "1.00000000");
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(123456789.4), "123456789");
        assert_eq!(sig9(9.999999999), "10.0000000");
        assert_eq!(sig9(1.5e-7), "1.50000000e-7");
        assert_eq!(sig9(0.25), "0.250000000");
    }

    #[test]
    fn parses_back_within_precision() {
        for &x in &[
            1.23456789012345,
            -0.000123456789,
            98765.4321,
            6.02e23,
            -1e-12,
        ] {
            let y: f64 = sig9(x).parse().unwrap();
            assert!(((y - x) / x).abs() < 1e-8, "{x} -> {}", sig9(x));
        }
    }
}
