//! Number formatting shared by the text serializers.

/// Formats `value` with `digits` significant digits, `%g`-style: plain
/// decimal for moderate exponents, scientific otherwise, trailing zeros
/// trimmed. The output parses back with `str::parse::<f64>`.
pub fn format_significant(value: f64, digits: usize) -> String {
    assert!(digits >= 1, "at least one significant digit");
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digit_str: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let mut out = String::with_capacity(digits + 8);
    if negative {
        out.push('-');
    }
    if exp < -5 || exp >= digits as i32 {
        out.push_str(&digit_str[..1]);
        let frac = digit_str[1..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        out.push('e');
        out.push_str(&exp.to_string());
        return out;
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digit_str.trim_end_matches('0'));
    } else {
        let int_len = exp as usize + 1;
        out.push_str(&digit_str[..int_len]);
        let frac = digit_str[int_len..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    }
    out
}

/// Fixed-point rendering that never prints a negative zero.
pub fn format_fixed(value: f64, precision: usize) -> String {
    let s = format!("{:.*}", precision, value);
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_string(),
        _ => s,
    }
}
