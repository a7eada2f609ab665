//! Scalar abstraction and numeric formatting shared by the geometry and
//! graph kernels.
//!
//! All core math is generic over [`Real`] so the same kernels run on `f32`
//! or `f64`; the pipeline itself instantiates everything at `f64` (see the
//! aliases at the crate root). Output text always goes through the
//! 9-significant-digit formatter so reruns are byte-stable.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by every kernel in this crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Debug
    + Display
    + Default
    + 'static
{
    /// Lossless-enough conversion from an `f64` constant.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum<T>
        + Debug
        + Display
        + Default
        + 'static
{
}

/// Mean Earth radius in meters (IUGG mean radius R1).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// International mile in meters.
pub const METERS_PER_MILE: f64 = 1_609.344;

/// `|a - b| <= tol * max(|a|, |b|, 1)` — relative comparison that degrades
/// to absolute near zero.
pub fn approx_eq<T: Real>(a: T, b: T, tol: T) -> bool {
    let scale = a.abs().max(b.abs()).max(T::one());
    (a - b).abs() <= tol * scale
}

/// Formats a float with at most 9 significant digits, `%.9g`-style:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros trimmed. `-0.0` prints as `0`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp_str) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp_str.parse().expect("exponent digits");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 9);
    let trimmed = digits.trim_end_matches('0');
    let digits = if trimmed.is_empty() { "0" } else { trimmed };
    let sign = if neg { "-" } else { "" };

    let body = if !(-4..9).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        }
    } else if exp >= 0 {
        let int_len = (exp as usize) + 1;
        if digits.len() <= int_len {
            let mut s = digits.to_string();
            s.push_str(&"0".repeat(int_len - digits.len()));
            s
        } else {
            let (int_part, frac) = digits.split_at(int_len);
            format!("{int_part}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{digits}")
    };
    format!("{sign}{body}")
}

/// Rounds to 9 significant decimal digits. Used before handing floats to
/// the JSON serializer so every writer agrees with [`fmt_sig9`].
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("round-trip parse")
}
