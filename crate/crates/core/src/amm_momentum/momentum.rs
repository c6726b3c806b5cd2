use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;
use serde::Serialize;

use super::pool::{AmmPool, Amount, Direction};
use super::AmmError;
use crate::trace_model::Wei;

pub const BUILDER_BUY_ID: &str = "builder:buy";
pub const BUILDER_SELL_ID: &str = "builder:sell";

/// A pending organic transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MempoolTx<A> {
    pub tx_id: String,
    pub direction: Direction,
    pub amount_in: A,
    /// Slippage tolerance, see [`AmmPool::price_impact`].
    pub max_price_impact: BigRational,
    /// Window slot (0-based) in which the transaction becomes visible.
    pub arrival_slot_offset: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumConfig {
    /// Largest admissible price impact of the builder's own injection.
    pub max_injection_impact: BigRational,
    /// Cost of each builder transaction, in X base units.
    pub gas_per_builder_tx: u128,
}

impl Default for MomentumConfig {
    fn default() -> Self {
        MomentumConfig {
            max_injection_impact: BigRational::new(1.into(), 2.into()),
            gas_per_builder_tx: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutedTx {
    pub tx_id: String,
    pub direction: Direction,
    pub amount_in: String,
    pub amount_out: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotBlock {
    pub slot_offset: u64,
    pub txs: Vec<ExecutedTx>,
}

/// Builder holdings after each window slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Position<A> {
    pub slot_offset: u64,
    pub x_spent: A,
    pub y_held: A,
    pub x_recovered: A,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult<A> {
    /// X recovered minus capital and gas, in X base units. Integral for
    /// integer pools.
    pub profit: BigRational,
    pub blocks: Vec<SlotBlock>,
    /// Sells held back inside the window.
    pub withheld: Vec<String>,
    /// Buys that failed the slippage check or would round to nothing.
    pub rejected: Vec<String>,
    /// Transactions arriving after the window closes.
    pub outside_window: Vec<String>,
    pub positions: Vec<Position<A>>,
    /// Spot price (X per Y) at the end of each slot, offload included.
    pub spot_trace: Vec<BigRational>,
    pub final_pool: AmmPool<A>,
}

impl<A> StrategyResult<A> {
    pub fn executed_ids(&self) -> impl Iterator<Item = &str> {
        self.blocks
            .iter()
            .flat_map(|b| b.txs.iter().map(|t| t.tx_id.as_str()))
    }
}

fn executed<A: Amount>(
    tx_id: &str,
    direction: Direction,
    amount_in: &A,
    amount_out: &A,
) -> ExecutedTx {
    ExecutedTx {
        tx_id: tx_id.to_owned(),
        direction,
        amount_in: amount_in.to_string(),
        amount_out: amount_out.to_string(),
    }
}

/// The continuous momentum play over `window_k` consecutive slots: buy with
/// all capital first in slot 0, include admissible organic buys as they
/// arrive, withhold every sell, and sell the whole Y position at the end of
/// the last slot. Organic buys are checked once, when first seen.
pub fn execute_momentum<A: Amount>(
    pool: &AmmPool<A>,
    window_k: u64,
    mempool: &[MempoolTx<A>],
    builder_capital: &A,
    config: &MomentumConfig,
) -> Result<StrategyResult<A>, AmmError> {
    if window_k < 2 {
        return Err(AmmError::WindowTooShort(window_k));
    }
    if builder_capital.is_zero() {
        return Err(AmmError::ZeroInput);
    }
    let impact = pool.price_impact(Direction::Buy, builder_capital);
    if impact > config.max_injection_impact {
        return Err(AmmError::CapitalTooLarge {
            impact: format!("{impact}"),
            bound: format!("{}", config.max_injection_impact),
        });
    }

    let mut order: Vec<&MempoolTx<A>> = mempool.iter().collect();
    order.sort_by_key(|t| t.arrival_slot_offset);

    let mut pool = pool.clone();
    let mut blocks = Vec::with_capacity(window_k as usize);
    let mut withheld = Vec::new();
    let mut rejected = Vec::new();
    let mut positions = Vec::with_capacity(window_k as usize);
    let mut spot_trace = Vec::with_capacity(window_k as usize);
    let mut y_held = A::from_u128(0);
    let mut x_recovered = A::from_u128(0);
    let mut next = 0;

    for slot in 0..window_k {
        let mut txs = Vec::new();
        if slot == 0 {
            let (out, after) = pool.swap_exact_in(Direction::Buy, builder_capital)?;
            txs.push(executed(
                BUILDER_BUY_ID,
                Direction::Buy,
                builder_capital,
                &out,
            ));
            y_held = out;
            pool = after;
        }
        while next < order.len() && order[next].arrival_slot_offset <= slot {
            let tx = order[next];
            next += 1;
            match tx.direction {
                Direction::Sell => withheld.push(tx.tx_id.clone()),
                Direction::Buy => {
                    let swapped = pool
                        .admits(Direction::Buy, &tx.amount_in, &tx.max_price_impact)
                        .then(|| pool.swap_exact_in(Direction::Buy, &tx.amount_in).ok())
                        .flatten();
                    match swapped {
                        Some((out, after)) => {
                            txs.push(executed(&tx.tx_id, Direction::Buy, &tx.amount_in, &out));
                            pool = after;
                        }
                        None => rejected.push(tx.tx_id.clone()),
                    }
                }
            }
        }
        if slot + 1 == window_k {
            let (out, after) = pool.swap_exact_in(Direction::Sell, &y_held)?;
            txs.push(executed(BUILDER_SELL_ID, Direction::Sell, &y_held, &out));
            x_recovered = out;
            y_held = A::from_u128(0);
            pool = after;
        }
        positions.push(Position {
            slot_offset: slot,
            x_spent: builder_capital.clone(),
            y_held: y_held.clone(),
            x_recovered: x_recovered.clone(),
        });
        spot_trace.push(pool.spot_price());
        blocks.push(SlotBlock {
            slot_offset: slot,
            txs,
        });
    }
    let outside_window = order[next..].iter().map(|t| t.tx_id.clone()).collect();

    let gas = BigRational::from_integer((2 * config.gas_per_builder_tx).into());
    let profit = x_recovered.to_rational() - builder_capital.to_rational() - gas;
    Ok(StrategyResult {
        profit,
        blocks,
        withheld,
        rejected,
        outside_window,
        positions,
        spot_trace,
        final_pool: pool,
    })
}

/// What the strategy can afford to overpay for its window: the profit valued
/// in wei (`x_to_wei` is wei per X base unit, floored) minus everything paid
/// above the per-slot baseline. Slots paid at or below baseline count as 0.
/// Positive means the strategy beats single-block bidding.
pub fn breakeven_bid_premium(
    profit: &BigRational,
    payments: &[Wei],
    baselines: &[Wei],
    x_to_wei: &BigRational,
) -> i128 {
    let value = (profit * x_to_wei).floor().to_integer();
    let extra: BigInt = payments
        .iter()
        .zip(baselines)
        .map(|(p, b)| BigInt::from(p.0.saturating_sub(b.0)))
        .sum();
    let premium = value - extra;
    i128::try_from(&premium).unwrap_or(if premium.is_negative() {
        i128::MIN
    } else {
        i128::MAX
    })
}

/// Converts a decimal such as `0.001` or `-18.033` to an exact rational.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let t = text.trim();
    let (neg, digits) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let mantissa: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = BigInt::from(10u32).pow(frac.len() as u32);
    let r = BigRational::new(mantissa, scale);
    Some(if neg { -r } else { r })
}

/// Renders a rational with `places` decimals, rounding half away from zero.
pub fn format_decimal(value: &BigRational, places: u32) -> String {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = (value * BigRational::from_integer(scale.clone()))
        .round()
        .to_integer();
    let (q, r) = scaled.abs().div_rem(&scale);
    let sign = if scaled.is_negative() { "-" } else { "" };
    if places == 0 {
        return format!("{sign}{q}");
    }
    format!(
        "{sign}{q}.{:0>width$}",
        r.to_string(),
        width = places as usize
    )
}

/// A strategy that exploits a secured window of consecutive slots. The
/// momentum play is the continuous case; discrete plays (liquidations and
/// the like) plug in here.
pub trait WindowStrategy<A: Amount> {
    fn name(&self) -> &str;
    fn execute(
        &self,
        pool: &AmmPool<A>,
        window_k: u64,
        mempool: &[MempoolTx<A>],
    ) -> Result<StrategyResult<A>, AmmError>;
}

#[derive(Debug, Clone)]
pub struct Momentum<A> {
    pub capital: A,
    pub config: MomentumConfig,
}

impl<A: Amount> WindowStrategy<A> for Momentum<A> {
    fn name(&self) -> &str {
        "momentum"
    }

    fn execute(
        &self,
        pool: &AmmPool<A>,
        window_k: u64,
        mempool: &[MempoolTx<A>],
    ) -> Result<StrategyResult<A>, AmmError> {
        execute_momentum(pool, window_k, mempool, &self.capital, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::WEI_PER_ETH;

    fn r(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn dec(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    fn buy<A>(id: &str, amount: A, slot: u64) -> MempoolTx<A> {
        MempoolTx {
            tx_id: id.into(),
            direction: Direction::Buy,
            amount_in: amount,
            max_price_impact: r(1_000_000_000),
            arrival_slot_offset: slot,
        }
    }

    fn sell<A>(id: &str, amount: A, slot: u64) -> MempoolTx<A> {
        MempoolTx {
            direction: Direction::Sell,
            ..buy(id, amount, slot)
        }
    }

    #[test]
    fn fixture_three_steps() {
        let pool = AmmPool::new(r(1000), r(1000), 0).unwrap();
        let res = execute_momentum(
            &pool,
            2,
            &[buy("o1", r(100), 0)],
            &r(100),
            &MomentumConfig::default(),
        )
        .unwrap();
        // builder gets 1000/11, organic gets 2500/33, builder sells back
        let y_builder = r(1000) * r(100) / r(1100);
        let pool1_y = r(1000) - &y_builder;
        let y_organic = &pool1_y * r(100) / (r(1200));
        let pool2_y = pool1_y - &y_organic;
        let x_back = r(1200) * &y_builder / (pool2_y + &y_builder);
        assert_eq!(res.profit, x_back - r(100));
        assert_eq!(format_decimal(&res.profit, 3), "18.033");
        assert_eq!(res.blocks[0].txs.len(), 2);
        assert_eq!(res.blocks[0].txs[0].tx_id, BUILDER_BUY_ID);
        assert_eq!(res.blocks[1].txs[0].tx_id, BUILDER_SELL_ID);
    }

    #[test]
    fn empty_mempool_round_trip() {
        let pool = AmmPool::new(1000u128, 1000, 0).unwrap();
        let res = execute_momentum(&pool, 3, &[], &100, &MomentumConfig::default()).unwrap();
        assert!(res.profit.abs() <= r(1), "{}", res.profit);
        assert_eq!(res.positions.last().unwrap().y_held, 0);
    }

    #[test]
    fn sells_are_withheld() {
        let pool = AmmPool::new(10_000u128, 10_000, 30).unwrap();
        let mempool = [sell("s1", 50, 0), sell("s2", 70, 1)];
        let res = execute_momentum(&pool, 2, &mempool, &500, &MomentumConfig::default()).unwrap();
        assert_eq!(res.withheld, vec!["s1", "s2"]);
        assert!(res.profit <= r(0));
        assert!(res.executed_ids().all(|id| id.starts_with("builder:")));
    }

    #[test]
    fn tight_tolerance_is_rejected() {
        let pool = AmmPool::new(r(1000), r(1000), 0).unwrap();
        let mut tx = buy("o1", r(100), 1);
        tx.max_price_impact = dec("0.05");
        let res = execute_momentum(&pool, 2, &[tx], &r(10), &MomentumConfig::default()).unwrap();
        assert_eq!(res.rejected, vec!["o1"]);
    }

    #[test]
    fn late_arrivals_stay_out() {
        let pool = AmmPool::new(1000u128, 1000, 0).unwrap();
        let res = execute_momentum(
            &pool,
            2,
            &[buy("late", 10, 2)],
            &100,
            &MomentumConfig::default(),
        )
        .unwrap();
        assert_eq!(res.outside_window, vec!["late"]);
    }

    #[test]
    fn window_and_capital_checks() {
        let pool = AmmPool::new(1000u128, 1000, 0).unwrap();
        let cfg = MomentumConfig::default();
        assert_eq!(
            execute_momentum(&pool, 1, &[], &100, &cfg).unwrap_err(),
            AmmError::WindowTooShort(1)
        );
        assert!(matches!(
            execute_momentum(&pool, 2, &[], &600, &cfg),
            Err(AmmError::CapitalTooLarge { .. })
        ));
        assert!(execute_momentum(&pool, 2, &[], &500, &cfg).is_ok());
    }

    #[test]
    fn gas_hook_reduces_profit() {
        let pool = AmmPool::new(r(1000), r(1000), 0).unwrap();
        let cfg = MomentumConfig {
            gas_per_builder_tx: 2,
            ..MomentumConfig::default()
        };
        let res = execute_momentum(&pool, 2, &[], &r(100), &cfg).unwrap();
        assert_eq!(res.profit, r(-4));
    }

    #[test]
    fn premium_examples() {
        let eth = BigRational::from_integer(WEI_PER_ETH.into());
        let base = [Wei(0); 4];
        assert_eq!(breakeven_bid_premium(&r(0), &base, &base, &eth), 0);
        let paid = [Wei(3_000_000_000_000_000); 4];
        let p = breakeven_bid_premium(&dec("18.033"), &paid, &base, &eth);
        assert_eq!(p, 18_021_000_000_000_000_000);
        let paid = [Wei(12_000_000_000_000_000)];
        let p = breakeven_bid_premium(&dec("0.001"), &paid, &[Wei(0)], &eth);
        assert_eq!(p, -11_000_000_000_000_000);
        // underpaying a slot does not offset overpaying another
        let p = breakeven_bid_premium(&r(0), &[Wei(5), Wei(1)], &[Wei(3), Wei(3)], &r(1));
        assert_eq!(p, -2);
    }

    #[test]
    fn decimals() {
        assert_eq!(dec("18.033"), BigRational::new(18033.into(), 1000.into()));
        assert_eq!(dec("-0.5"), BigRational::new((-1).into(), 2.into()));
        assert_eq!(parse_decimal("1e3"), None);
        assert_eq!(parse_decimal("."), None);
        assert_eq!(format_decimal(&dec("-0.0115"), 3), "-0.012");
        assert_eq!(format_decimal(&r(7), 0), "7");
    }
}
