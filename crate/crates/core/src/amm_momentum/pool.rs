use std::fmt::{self, Debug, Display};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::AmmError;

pub const BPS: u32 = 10_000;
pub const DEFAULT_FEE_BPS: u32 = 30;

/// Token quantity a pool can be denominated in. `u128` floors every swap
/// output in the pool's favour; `BigRational` is exact and serves as the
/// rounding-free reference.
pub trait Amount: Clone + Ord + Debug + Display + Send + Sync {
    fn from_u128(v: u128) -> Self;
    fn to_rational(&self) -> BigRational;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    /// Saturates at zero.
    fn sub(&self, other: &Self) -> Self;
    /// `out_reserve * a * (BPS - fee) / (in_reserve * BPS + a * (BPS - fee))`
    fn swap_out(in_reserve: &Self, out_reserve: &Self, amount_in: &Self, fee_bps: u32) -> Self;
}

impl Amount for u128 {
    fn from_u128(v: u128) -> Self {
        v
    }

    fn to_rational(&self) -> BigRational {
        BigRational::from_integer((*self).into())
    }

    fn is_zero(&self) -> bool {
        *self == 0
    }

    fn add(&self, other: &Self) -> Self {
        self.checked_add(*other).expect("amount overflow")
    }

    fn sub(&self, other: &Self) -> Self {
        self.saturating_sub(*other)
    }

    fn swap_out(in_reserve: &Self, out_reserve: &Self, amount_in: &Self, fee_bps: u32) -> Self {
        let effective = BigUint::from(*amount_in) * BigUint::from(BPS - fee_bps);
        let numerator = BigUint::from(*out_reserve) * &effective;
        let denominator = BigUint::from(*in_reserve) * BigUint::from(BPS) + effective;
        let out = numerator / denominator;
        u128::try_from(out).expect("output below out_reserve fits u128")
    }
}

impl Amount for BigRational {
    fn from_u128(v: u128) -> Self {
        BigRational::from_integer(v.into())
    }

    fn to_rational(&self) -> BigRational {
        self.clone()
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn sub(&self, other: &Self) -> Self {
        if other > self {
            BigRational::zero()
        } else {
            self - other
        }
    }

    fn swap_out(in_reserve: &Self, out_reserve: &Self, amount_in: &Self, fee_bps: u32) -> Self {
        let effective = amount_in * BigRational::new((BPS - fee_bps).into(), BPS.into());
        out_reserve * &effective / (in_reserve + &effective)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    /// X in, Y out.
    Buy,
    /// Y in, X out.
    Sell,
}

impl Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Buy => "BUY",
            Direction::Sell => "SELL",
        })
    }
}

/// Two-asset constant-product pool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmmPool<A> {
    pub reserve_x: A,
    pub reserve_y: A,
    pub fee_bps: u32,
}

impl<A: Amount> AmmPool<A> {
    pub fn new(reserve_x: A, reserve_y: A, fee_bps: u32) -> Result<Self, AmmError> {
        if reserve_x.is_zero() || reserve_y.is_zero() {
            return Err(AmmError::EmptyReserve);
        }
        if fee_bps >= BPS {
            return Err(AmmError::Fee(fee_bps));
        }
        Ok(AmmPool {
            reserve_x,
            reserve_y,
            fee_bps,
        })
    }

    /// Converts the reserves to exact rationals.
    pub fn to_rational(&self) -> AmmPool<BigRational> {
        AmmPool {
            reserve_x: self.reserve_x.to_rational(),
            reserve_y: self.reserve_y.to_rational(),
            fee_bps: self.fee_bps,
        }
    }

    fn reserves(&self, direction: Direction) -> (&A, &A) {
        match direction {
            Direction::Buy => (&self.reserve_x, &self.reserve_y),
            Direction::Sell => (&self.reserve_y, &self.reserve_x),
        }
    }

    /// Spot price of Y in X.
    pub fn spot_price(&self) -> BigRational {
        self.reserve_x.to_rational() / self.reserve_y.to_rational()
    }

    pub fn product(&self) -> BigRational {
        self.reserve_x.to_rational() * self.reserve_y.to_rational()
    }

    /// Swaps `amount_in` and returns the output with the updated pool. The
    /// whole input, fee included, stays in the pool.
    pub fn swap_exact_in(
        &self,
        direction: Direction,
        amount_in: &A,
    ) -> Result<(A, AmmPool<A>), AmmError> {
        if amount_in.is_zero() {
            return Err(AmmError::ZeroInput);
        }
        let (in_reserve, out_reserve) = self.reserves(direction);
        let out = A::swap_out(in_reserve, out_reserve, amount_in, self.fee_bps);
        if out.is_zero() {
            return Err(AmmError::ZeroOutput);
        }
        let new_in = in_reserve.add(amount_in);
        let new_out = out_reserve.sub(&out);
        let pool = match direction {
            Direction::Buy => AmmPool {
                reserve_x: new_in,
                reserve_y: new_out,
                fee_bps: self.fee_bps,
            },
            Direction::Sell => AmmPool {
                reserve_x: new_out,
                reserve_y: new_in,
                fee_bps: self.fee_bps,
            },
        };
        Ok((out, pool))
    }

    /// Relative deviation of the average execution price (input paid per unit
    /// of output) from the spot price, at exact precision:
    /// `(r_in * BPS + a * (BPS - fee)) / (r_in * (BPS - fee)) - 1`.
    pub fn price_impact(&self, direction: Direction, amount_in: &A) -> BigRational {
        let (in_reserve, _) = self.reserves(direction);
        let r = in_reserve.to_rational();
        let a = amount_in.to_rational();
        let keep = BigRational::from_integer((BPS - self.fee_bps).into());
        let bps = BigRational::from_integer(BPS.into());
        (&r * bps + a * &keep) / (r * keep) - BigRational::one()
    }

    /// Whether a trade of `amount_in` stays within `max_price_impact`.
    pub fn admits(
        &self,
        direction: Direction,
        amount_in: &A,
        max_price_impact: &BigRational,
    ) -> bool {
        !amount_in.is_zero() && self.price_impact(direction, amount_in) <= *max_price_impact
    }
}
