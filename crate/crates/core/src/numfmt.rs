//! Shortest-stable decimal rendering of `f64` with 17 significant digits.
//!
//! The output follows the `%.17g` convention: fixed notation for decimal
//! exponents in `[-4, 17)`, scientific otherwise, with trailing zeros removed.
//! Seventeen significant digits are enough to round-trip every finite double.

/// Formats `x` like C's `%.17g`.
pub fn g17(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    if !(-4..17).contains(&exp) {
        let frac = digits[1..].trim_end_matches('0');
        return if frac.is_empty() {
            format!("{sign}{}e{exp}", &digits[..1])
        } else {
            format!("{sign}{}.{frac}e{exp}", &digits[..1])
        };
    }

    let (int_part, frac_part) = if exp >= 0 {
        let split = exp as usize + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        ("0".to_string(), format!("{zeros}{digits}"))
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

#[cfg(test)]
mod tests {
    use super::g17;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_conventions() {
        assert_eq!(g17(7.0), "7");
        assert_eq!(g17(-5.0), "-5");
        assert_eq!(g17(0.0), "0");
        assert_eq!(g17(0.7), "0.69999999999999996");
        assert_eq!(g17(0.5), "0.5");
        assert_eq!(g17(1e-3), "0.001");
        assert_eq!(g17(1e-5), "1.0000000000000001e-5");
        assert_eq!(g17(1e20), "1e20");
        assert_eq!(g17(123456.25), "123456.25");
    }

    proptest! {
        #[test]
        fn round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let back: f64 = g17(x).parse().unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
