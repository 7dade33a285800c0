use std::cmp::Ordering;
use std::fmt;

/// Element of the tropical semiring `(R+ ∪ {+inf}, min, +, +inf, 0)`.
///
/// Costs are negative natural-log probabilities, so lower is better.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weight(f64);

impl Weight {
    /// Additive identity (+inf, unreachable).
    pub const ZERO: Weight = Weight(f64::INFINITY);
    /// Multiplicative identity (zero cost).
    pub const ONE: Weight = Weight(0.0);

    #[inline]
    pub fn new(cost: f64) -> Self {
        debug_assert!(!cost.is_nan(), "NaN weight");
        Weight(cost)
    }

    /// Cost of a probability: `-ln p`, clamped at zero for `p` rounding above one.
    #[inline]
    pub fn from_prob(p: f64) -> Self {
        if p <= 0.0 {
            Weight::ZERO
        } else {
            Weight((-p.ln()).max(0.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn plus(self, other: Weight) -> Weight {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    #[inline]
    pub fn times(self, other: Weight) -> Weight {
        if self.is_zero() || other.is_zero() {
            Weight::ZERO
        } else {
            Weight(self.0 + other.0)
        }
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::INFINITY
    }

    #[inline]
    pub fn is_one(self) -> bool {
        self.0 == 0.0
    }

    pub fn approx_eq(self, other: Weight, tol: f64) -> bool {
        if self.is_zero() || other.is_zero() {
            return self.is_zero() && other.is_zero();
        }
        (self.0 - other.0).abs() <= tol
    }
}

impl Default for Weight {
    fn default() -> Self {
        Weight::ONE
    }
}

impl Eq for Weight {}

impl PartialOrd for Weight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Weight {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
