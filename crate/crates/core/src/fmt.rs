/// Shortest decimal form of `v` after rounding to 15 significant digits.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.14e}").parse().unwrap_or(v);
    // -0 prints as "-0"
    format!("{}", rounded + 0.0)
}

#[cfg(test)]
mod tests {
    use super::fmt_num;

    #[test]
    fn fifteen_significant_digits() {
        assert_eq!(fmt_num(102.0), "102");
        assert_eq!(fmt_num(0.01), "0.01");
        assert_eq!(fmt_num(2.0000000000000004), "2");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333333");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
    }
}
