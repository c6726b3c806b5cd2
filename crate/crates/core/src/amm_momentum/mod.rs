//! Continuous multi-block MEV on a constant-product pool.
//!
//! A builder that controls several consecutive slots buys first, lets
//! organic buyers push the price up, holds back every sell, and unwinds at
//! the end of the window. [`execute_momentum`] replays that play against a
//! mempool and [`breakeven_bid_premium`] weighs its profit against what the
//! window cost to win.

mod momentum;
mod pool;
mod scenario;

use thiserror::Error;

pub use momentum::{
    breakeven_bid_premium, execute_momentum, format_decimal, parse_decimal, ExecutedTx, MempoolTx,
    Momentum, MomentumConfig, Position, SlotBlock, StrategyResult, WindowStrategy, BUILDER_BUY_ID,
    BUILDER_SELL_ID,
};
pub use pool::{AmmPool, Amount, Direction, BPS, DEFAULT_FEE_BPS};
pub use scenario::{
    generate_flow, run_scenario, Decimal, FlowGenerator, PoolSpec, Precision, Scenario,
    ScenarioOutcome, TxSpec,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmmError {
    #[error("swap input must be positive")]
    ZeroInput,
    #[error("swap output rounds to zero")]
    ZeroOutput,
    #[error("pool reserves must be positive")]
    EmptyReserve,
    #[error("fee of {0} bps is not below 10000")]
    Fee(u32),
    #[error("window of {0} slots is too short, need at least 2")]
    WindowTooShort(u64),
    #[error("capital moves the price by {impact}, above the bound {bound}")]
    CapitalTooLarge { impact: String, bound: String },
    #[error("scenario: {0}")]
    Scenario(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn r(n: u64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn tx_strategy() -> impl Strategy<Value = (bool, u64, u64, u64)> {
        // (is_sell, amount, slot, tolerance in per-mille)
        (any::<bool>(), 1u64..300, 0u64..5, 0u64..2000)
    }

    fn to_mempool(raw: &[(bool, u64, u64, u64)]) -> Vec<MempoolTx<u128>> {
        raw.iter()
            .enumerate()
            .map(|(i, &(is_sell, amount, slot, tol))| MempoolTx {
                tx_id: format!("t{i}"),
                direction: if is_sell {
                    Direction::Sell
                } else {
                    Direction::Buy
                },
                amount_in: amount as u128,
                max_price_impact: BigRational::new(tol.into(), 1000.into()),
                arrival_slot_offset: slot,
            })
            .collect()
    }

    proptest! {
        #[test]
        fn round_trip_loses_only_to_fees(x in 1_000u128..1_000_000, y in 1_000u128..1_000_000, a in 1u128..400, fee in prop_oneof![Just(0u32), Just(30u32)]) {
            let pool = AmmPool::new(x, y, fee).unwrap();
            let capital = a * x / 1000;
            prop_assume!(capital > 0);
            if let Ok(res) = execute_momentum(&pool, 2, &[], &capital, &MomentumConfig::default()) {
                if fee == 0 {
                    // one unit of floor loss on each leg; the Y unit is worth about (x + a) / y
                    let bound = r(1) + BigRational::new((x + capital).into(), y.into());
                    prop_assert!(res.profit <= r(0) && res.profit >= -bound, "{}", res.profit);
                    if x + capital < y {
                        prop_assert!(res.profit >= -r(1), "{}", res.profit);
                    }
                } else {
                    prop_assert!(res.profit < r(0));
                }
            }
        }

        #[test]
        fn sells_never_execute(raw in prop::collection::vec(tx_strategy(), 0..40), k in 2u64..6) {
            let pool = AmmPool::new(10_000u128, 10_000, 30).unwrap();
            let mempool = to_mempool(&raw);
            let res = execute_momentum(&pool, k, &mempool, &1_000, &MomentumConfig::default()).unwrap();
            let executed: Vec<&str> = res.executed_ids().collect();
            for t in mempool.iter().filter(|t| t.direction == Direction::Sell) {
                prop_assert!(!executed.contains(&t.tx_id.as_str()));
                let inside = t.arrival_slot_offset < k;
                prop_assert_eq!(res.withheld.contains(&t.tx_id), inside);
            }
            prop_assert_eq!(res.positions.last().unwrap().y_held, 0);
        }

        #[test]
        fn spot_rises_until_offload(raw in prop::collection::vec(tx_strategy(), 0..40), k in 2u64..6) {
            let pool = AmmPool::new(10_000u128, 10_000, 30).unwrap();
            let res = execute_momentum(&pool, k, &to_mempool(&raw), &1_000, &MomentumConfig::default()).unwrap();
            prop_assert!(res.spot_trace[0] >= pool.spot_price());
            let before_offload = &res.spot_trace[..res.spot_trace.len() - 1];
            prop_assert!(before_offload.windows(2).all(|w| w[1] >= w[0]));
        }

        #[test]
        fn more_buying_never_hurts(
            amounts in prop::collection::vec(1u64..200, 1..12),
            extra in 1u64..200,
            at in 0usize..12,
        ) {
            let pool = AmmPool::new(r(5_000), r(5_000), 0).unwrap();
            let flow = |amounts: &[u64]| -> Vec<MempoolTx<BigRational>> {
                amounts.iter().enumerate().map(|(i, &a)| MempoolTx {
                    tx_id: format!("b{i}"),
                    direction: Direction::Buy,
                    amount_in: r(a),
                    max_price_impact: r(1_000_000_000),
                    arrival_slot_offset: (i % 3) as u64,
                }).collect()
            };
            let base = execute_momentum(&pool, 3, &flow(&amounts), &r(500), &MomentumConfig::default()).unwrap();
            let mut more = amounts.clone();
            more.insert(at.min(more.len()), extra);
            let bigger = execute_momentum(&pool, 3, &flow(&more), &r(500), &MomentumConfig::default()).unwrap();
            prop_assert!(bigger.profit >= base.profit);
            prop_assert!(!Zero::is_zero(&base.profit));
        }
    }
}
