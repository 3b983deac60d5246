//! Exact integer money in minor currency units.
//!
//! Every amount the engine touches (inflows, dues, payments, residuals) is a
//! signed integer number of minor units, so conservation can be asserted with
//! `==` rather than a tolerance. The only rounding anywhere in the allocation
//! layer is the half-even rounding applied when a basis-point rate meets a
//! notional.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Basis points per unit (1 = 10_000 bps).
pub const BPS_SCALE: i64 = 10_000;

/// An exact amount in minor currency units (e.g. cents).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);
    pub const MAX: Money = Money(i64::MAX);

    pub const fn from_minor(amount: i64) -> Self {
        Money(amount)
    }

    /// Raw amount in minor units.
    pub const fn minor(self) -> i64 {
        self.0
    }

    pub const fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Positive part `(x)^+ = max(x, 0)`.
    pub fn positive_part(self) -> Money {
        Money(self.0.max(0))
    }

    /// Saturating subtraction floored at zero.
    pub fn saturating_sub_at_zero(self, rhs: Money) -> Money {
        Money((self.0 - rhs.0).max(0))
    }

    /// `amount × bps / 10_000`, rounded half-even to minor units.
    ///
    /// Used for rate accruals and recovery fractions. The intermediate
    /// product is taken in 128 bits so any realistic notional survives.
    pub fn scale_bps_half_even(self, bps: i64) -> Money {
        Money(div_half_even(self.0 as i128 * bps as i128, BPS_SCALE as i128))
    }
}

/// Integer division rounded half to even (banker's rounding).
///
/// Defined for non-negative numerators and positive denominators, which is
/// all the engine ever produces.
fn div_half_even(numerator: i128, denominator: i128) -> i64 {
    debug_assert!(numerator >= 0 && denominator > 0);
    let quotient = numerator / denominator;
    let remainder = numerator % denominator;
    let twice = remainder * 2;
    let rounded = if twice > denominator || (twice == denominator && quotient % 2 != 0) {
        quotient + 1
    } else {
        quotient
    };
    i64::try_from(rounded).expect("amount exceeds 64-bit minor units")
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shorthand constructor used heavily in tests.
pub const fn money(amount: i64) -> Money {
    Money::from_minor(amount)
}
