//! Exact rational arithmetic for weights and probability masses.
//!
//! Pro-rata weights and enumeration probabilities are carried as arbitrary
//! precision rationals so that "weights sum to 1" and "masses sum to 1" are
//! exact statements. On the wire they travel as plain decimal strings.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::Error;
use crate::money::BPS_SCALE;

pub type Rational = BigRational;

/// Parse a strict non-negative decimal string (`"0.5"`, `"1"`, `"0.125"`)
/// into an exact rational. Exponent notation and signs are rejected.
pub fn parse_decimal(text: &str) -> Result<Rational, Error> {
    let bad = || Error::BadDecimal {
        text: text.to_string(),
    };
    if text.is_empty() {
        return Err(bad());
    }
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !int_part.is_empty() && !all_digits(int_part) {
        return Err(bad());
    }
    if !frac_part.is_empty() && !all_digits(frac_part) {
        return Err(bad());
    }
    let digits: String = format!("{}{}", int_part, frac_part);
    let numerator: BigInt = digits.parse().map_err(|_| bad())?;
    let denominator = BigInt::from(10u32).pow(frac_part.len() as u32);
    Ok(Rational::new(numerator, denominator))
}

/// Render a rational as an exact decimal string.
///
/// Every rational the engine produces has a denominator of the form
/// `2^a · 5^b` (decimal inputs, basis-point hazards), so an exact finite
/// expansion always exists. Anything else falls back to `num/den` form.
pub fn to_decimal_string(value: &Rational) -> String {
    if value.is_zero() {
        return "0".to_string();
    }
    let sign = if value.is_negative() { "-" } else { "" };
    let value = value.abs();
    let numerator = value.numer().clone();
    let denominator = value.denom().clone();

    // Count factors of 2 and 5 in the denominator.
    let mut rest = denominator.clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2u32);
    let five = BigInt::from(5u32);
    while (&rest % &two).is_zero() {
        rest /= &two;
        twos += 1;
    }
    while (&rest % &five).is_zero() {
        rest /= &five;
        fives += 1;
    }
    if !rest.is_one() {
        return format!("{}{}/{}", sign, numerator, denominator);
    }

    // Scale numerator so the denominator becomes 10^digits exactly.
    let digits = twos.max(fives);
    let scale = two.pow(digits - twos) * five.pow(digits - fives);
    let scaled = numerator * scale;
    let text = scaled.to_string();
    if digits == 0 {
        return format!("{}{}", sign, text);
    }
    let digits = digits as usize;
    let (int_digits, frac_digits) = if text.len() > digits {
        let split = text.len() - digits;
        (text[..split].to_string(), text[split..].to_string())
    } else {
        ("0".to_string(), format!("{:0>width$}", text, width = digits))
    };
    let frac_digits = frac_digits.trim_end_matches('0');
    if frac_digits.is_empty() {
        format!("{}{}", sign, int_digits)
    } else {
        format!("{}{}.{}", sign, int_digits, frac_digits)
    }
}

/// Probability expressed in integer basis points, as an exact rational.
pub fn from_bps(bps: i64) -> Rational {
    Rational::new(BigInt::from(bps), BigInt::from(BPS_SCALE))
}

/// Exact sum check used by weight validation.
pub fn sums_to_one(values: &[Rational]) -> bool {
    values.iter().sum::<Rational>() == Rational::one()
}

/// Nearest double; the one lossy conversion, applied only at reporting
/// boundaries.
pub fn to_f64(value: &Rational) -> f64 {
    num::ToPrimitive::to_f64(value).unwrap_or(f64::NAN)
}
