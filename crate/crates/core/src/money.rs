//! Exact currency amounts.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A non-negative currency amount in integer cents.
///
/// Holdings values are summed into edge weights, so they are kept exact; conversion
/// to floating point happens only when a statistic is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub u64);

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AmountError {
    #[error("negative value")]
    Negative,
    #[error("unparsable amount '{0}'")]
    Unparsable(String),
    #[error("amount overflows")]
    Overflow,
}

impl Cents {
    pub const ZERO: Cents = Cents(0);

    /// Value in whole currency units.
    pub fn as_units(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: Cents) -> Option<Cents> {
        self.0.checked_add(other.0).map(Cents)
    }
}

impl Add for Cents {
    type Output = Cents;
    fn add(self, rhs: Cents) -> Cents {
        Cents(self.0 + rhs.0)
    }
}

impl AddAssign for Cents {
    fn add_assign(&mut self, rhs: Cents) {
        self.0 += rhs.0;
    }
}

impl Sum for Cents {
    fn sum<I: Iterator<Item = Cents>>(iter: I) -> Cents {
        iter.fold(Cents::ZERO, Add::add)
    }
}

/// Parses a plain decimal amount such as `1000000`, `1234.5` or `0.07`.
/// Digits past the second decimal place are rounded half-up.
impl FromStr for Cents {
    type Err = AmountError;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let s = raw.trim();
        let unparsable = || AmountError::Unparsable(raw.to_string());
        if s.is_empty() {
            return Err(unparsable());
        }
        let (negative, body) = match s.as_bytes()[0] {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, f),
            None => (body, ""),
        };
        if (whole.is_empty() && frac.is_empty())
            || !whole.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(unparsable());
        }
        let whole_val: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| AmountError::Overflow)?
        };
        let fb = frac.as_bytes();
        let digit = |i: usize| fb.get(i).map_or(0, |b| u64::from(b - b'0'));
        let mut cents = whole_val
            .checked_mul(100)
            .and_then(|v| v.checked_add(digit(0) * 10 + digit(1)))
            .ok_or(AmountError::Overflow)?;
        if digit(2) >= 5 {
            cents = cents.checked_add(1).ok_or(AmountError::Overflow)?;
        }
        if negative && cents > 0 {
            return Err(AmountError::Negative);
        }
        Ok(Cents(cents))
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 100;
        let frac = self.0 % 100;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            write!(f, "{whole}.{frac:02}")
        }
    }
}
