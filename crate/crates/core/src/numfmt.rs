//! Locale-independent numeric formatting for CSV and report output.

/// Minimum number of significant digits written for any value.
pub const MIN_SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` in scientific notation with the shortest representation that
/// round-trips exactly, zero-padded to at least [`MIN_SIGNIFICANT_DIGITS`]
/// significant digits. Padding never changes the parsed value.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:e}");
    let (mantissa, exponent) = s.split_once('e').unwrap_or((&s, "0"));
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut frac = frac_part.to_string();
    let significant = int_part.len() + frac.len();
    if significant < MIN_SIGNIFICANT_DIGITS {
        frac.push_str(&"0".repeat(MIN_SIGNIFICANT_DIGITS - significant));
    }
    format!("{sign}{int_part}.{frac}e{exponent}")
}
