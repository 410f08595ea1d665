//! Threshold scalars.
//!
//! The learner compares constituent ratios `fc / f` against a threshold and
//! walks that threshold down in fixed steps. Both operations are sensitive to
//! rounding, so the threshold type is a parameter: `f64` for everyday use and
//! [`Rational64`] when the schedule has to be exact.

use std::fmt::{Debug, Display};

use num_rational::Rational64;
use num_traits::{Num, ToPrimitive};

/// Slack used by floating-point thresholds when comparing against a ratio of
/// two counts. Counts are small integers, so genuine ratios never sit this
/// close to a threshold without being equal to it.
const FLOAT_SLACK: f64 = 1e-9;

pub trait Ratio: Num + Copy + PartialOrd + Debug + Display + Send + Sync + 'static {
    /// `num / den`. `den` is never zero at call sites.
    fn from_counts(num: u64, den: u64) -> Self;

    /// Accepts decimals (`0.75`) and fractions (`3/4`).
    fn parse_ratio(s: &str) -> Option<Self>;

    fn to_f64(self) -> f64;

    /// `self >= bound`, tolerant of representation error for floats.
    fn at_least(self, bound: Self) -> bool {
        self >= bound
    }

    /// `ceil(self * n)`.
    fn ceil_mul(self, n: u64) -> u64;

    /// Number of whole `step`s that fit into `self` (self, step > 0).
    fn whole_steps(self, step: Self) -> u64;
}

macro_rules! float_ratio {
    ($t:ty) => {
        impl Ratio for $t {
            fn from_counts(num: u64, den: u64) -> Self {
                num as $t / den as $t
            }

            fn parse_ratio(s: &str) -> Option<Self> {
                let s = s.trim();
                match s.split_once('/') {
                    Some((n, d)) => {
                        let n: $t = n.trim().parse().ok()?;
                        let d: $t = d.trim().parse().ok()?;
                        if d == 0.0 {
                            None
                        } else {
                            Some(n / d)
                        }
                    }
                    None => s.parse().ok().filter(|v: &$t| v.is_finite()),
                }
            }

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn at_least(self, bound: Self) -> bool {
                (self as f64) >= (bound as f64) - FLOAT_SLACK
            }

            fn ceil_mul(self, n: u64) -> u64 {
                let v = (self as f64) * n as f64 - FLOAT_SLACK;
                if v <= 0.0 {
                    0
                } else {
                    v.ceil() as u64
                }
            }

            fn whole_steps(self, step: Self) -> u64 {
                let v = (self as f64) / (step as f64) + FLOAT_SLACK;
                if v <= 0.0 {
                    0
                } else {
                    v.floor() as u64
                }
            }
        }
    };
}

float_ratio!(f32);
float_ratio!(f64);

impl Ratio for Rational64 {
    fn from_counts(num: u64, den: u64) -> Self {
        Rational64::new(num as i64, den as i64)
    }

    fn parse_ratio(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            return (d != 0).then(|| Rational64::new(n, d));
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 18 {
            return None;
        }
        let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
        let den = 10i64.checked_pow(frac.len() as u32)?;
        let frac: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse().ok()?
        };
        let num = int.checked_mul(den)?.checked_add(frac)?;
        Some(Rational64::new(if neg { -num } else { num }, den))
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn ceil_mul(self, n: u64) -> u64 {
        let v = (self * Rational64::from_integer(n as i64)).ceil();
        (*v.numer()).max(0) as u64
    }

    fn whole_steps(self, step: Self) -> u64 {
        let v = (self / step).floor();
        (*v.numer()).max(0) as u64
    }
}
