//! Number formatting shared by the CSV writers.

/// Formats `x` with 12 significant digits, like C's `%.12g`.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.11e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    if !(-5..12).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let tail = tail.trim_end_matches('0');
        return if tail.is_empty() { format!("{sign}{head}e{exp}") } else { format!("{sign}{head}.{tail}e{exp}") };
    }
    let body = if exp >= 0 {
        let point = exp as usize + 1;
        let (int, frac) = digits.split_at(point);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{}", digits.trim_end_matches('0'))
    };
    format!("{sign}{body}")
}

#[cfg(test)]
mod tests {
    use super::format_sig;

    #[test]
    fn matches_percent_g() {
        assert_eq!(format_sig(0.25), "0.25");
        assert_eq!(format_sig(3.0), "3");
        assert_eq!(format_sig(-1.5), "-1.5");
        assert_eq!(format_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig(123456.0), "123456");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(2.5e13), "2.5e13");
        assert_eq!(format_sig(0.00012), "0.00012");
        assert_eq!(format_sig(f64::INFINITY), "inf");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn round_trips_at_twelve_digits() {
        for &x in &[std::f64::consts::PI, 36.944012345678, 1e-3 / 7.0, 9.99999999999951] {
            let y: f64 = format_sig(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-11, "{x} -> {y}");
        }
    }
}
