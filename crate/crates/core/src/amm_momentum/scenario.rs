//! JSON scenario files for the momentum model.
//!
//! ```json
//! {
//!   "pool": { "reserve_x": 1000, "reserve_y": 1000, "fee_bps": 0 },
//!   "window_k": 2,
//!   "builder_capital": 100,
//!   "precision": "rational",
//!   "mempool": [
//!     { "tx_id": "o1", "direction": "BUY", "amount_in": 100,
//!       "max_price_impact": "0.5", "arrival_slot_offset": 0 }
//!   ]
//! }
//! ```
//!
//! A `generator` block adds random flow on top of the listed mempool.

use std::path::Path;

use num_rational::BigRational;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Deserializer, Serialize};

use super::momentum::{
    breakeven_bid_premium, execute_momentum, format_decimal, parse_decimal, MempoolTx,
    MomentumConfig, SlotBlock, StrategyResult,
};
use super::pool::{AmmPool, Amount, Direction, DEFAULT_FEE_BPS};
use super::AmmError;
use crate::trace_model::Wei;

/// Exact decimal read from a JSON number or string.
#[derive(Debug, Clone, PartialEq)]
pub struct Decimal(pub BigRational);

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s,
            other => {
                return Err(serde::de::Error::custom(format!(
                    "expected a decimal, found {other}"
                )))
            }
        };
        parse_decimal(&text)
            .map(Decimal)
            .ok_or_else(|| serde::de::Error::custom(format!("bad decimal {text:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// Floor-rounded base units, as an on-chain pool would settle.
    #[default]
    Integer,
    /// Exact arithmetic, free of rounding.
    Rational,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub reserve_x: u128,
    pub reserve_y: u128,
    #[serde(default = "default_fee")]
    pub fee_bps: u32,
}

fn default_fee() -> u32 {
    DEFAULT_FEE_BPS
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub tx_id: String,
    pub direction: Direction,
    pub amount_in: u128,
    pub max_price_impact: Decimal,
    #[serde(default)]
    pub arrival_slot_offset: u64,
}

/// Random organic flow: Poisson counts per window slot, uniform sizes and
/// tolerances.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowGenerator {
    pub seed: u64,
    pub buys_per_slot: f64,
    #[serde(default)]
    pub sells_per_slot: f64,
    pub min_amount: u128,
    pub max_amount: u128,
    pub min_impact: Decimal,
    pub max_impact: Decimal,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub pool: PoolSpec,
    pub window_k: u64,
    pub builder_capital: u128,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default)]
    pub max_injection_impact: Option<Decimal>,
    #[serde(default)]
    pub gas_per_builder_tx: u128,
    #[serde(default)]
    pub mempool: Vec<TxSpec>,
    #[serde(default)]
    pub generator: Option<FlowGenerator>,
    /// Wei per X base unit, for the break-even premium.
    #[serde(default)]
    pub x_to_wei: Option<Decimal>,
    /// What the builder paid for each window slot, and the per-slot baseline.
    #[serde(default)]
    pub payments_wei: Vec<u128>,
    #[serde(default)]
    pub baselines_wei: Vec<u128>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, AmmError> {
        serde_json::from_str(text).map_err(|e| AmmError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Scenario, AmmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AmmError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    /// The listed transactions followed by generated ones.
    pub fn mempool(&self) -> Result<Vec<TxSpec>, AmmError> {
        let mut out = self.mempool.clone();
        if let Some(g) = &self.generator {
            out.extend(generate_flow(g, self.window_k)?);
        }
        Ok(out)
    }

    pub fn config(&self) -> MomentumConfig {
        let mut c = MomentumConfig::default();
        if let Some(Decimal(bound)) = &self.max_injection_impact {
            c.max_injection_impact = bound.clone();
        }
        c.gas_per_builder_tx = self.gas_per_builder_tx;
        c
    }
}

pub fn generate_flow(g: &FlowGenerator, window_k: u64) -> Result<Vec<TxSpec>, AmmError> {
    let bad = |m: &str| Err(AmmError::Scenario(format!("generator: {m}")));
    if g.min_amount == 0 || g.min_amount > g.max_amount {
        return bad("need 0 < min_amount <= max_amount");
    }
    if g.min_impact.0 > g.max_impact.0 {
        return bad("min_impact exceeds max_impact");
    }
    let poisson = |rate: f64| match rate {
        0.0 => Ok(None),
        r => Poisson::new(r)
            .map(Some)
            .map_err(|_| AmmError::Scenario(format!("generator: bad rate {r}"))),
    };
    let buys = poisson(g.buys_per_slot)?;
    let sells = poisson(g.sells_per_slot)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let span = &g.max_impact.0 - &g.min_impact.0;
    let mut out = Vec::new();
    for slot in 0..window_k {
        for (direction, dist) in [(Direction::Buy, &buys), (Direction::Sell, &sells)] {
            let n = dist.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as u64;
            for _ in 0..n {
                let amount_in = rng.random_range(g.min_amount..=g.max_amount);
                let step = BigRational::new(rng.random_range(0..=1000u32).into(), 1000.into());
                out.push(TxSpec {
                    tx_id: format!("g{slot}-{}", out.len()),
                    direction,
                    amount_in,
                    max_price_impact: Decimal(&g.min_impact.0 + &span * step),
                    arrival_slot_offset: slot,
                });
            }
        }
    }
    Ok(out)
}

/// Precision-independent summary of a scenario run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub precision: Precision,
    pub window_k: u64,
    pub builder_capital: String,
    /// Exact profit (`num/den` when not integral).
    pub profit: String,
    /// Profit rounded to six decimals.
    pub profit_decimal: String,
    pub withheld: Vec<String>,
    pub rejected: Vec<String>,
    pub outside_window: Vec<String>,
    pub blocks: Vec<SlotBlock>,
    /// Spot price (X per Y) after each slot, six decimals.
    pub spot_trace: Vec<String>,
    pub premium_wei: Option<String>,
    pub rational_strategy: Option<bool>,
}

fn run_generic<A: Amount>(
    scenario: &Scenario,
    lift: impl Fn(u128) -> A,
) -> Result<StrategyResult<A>, AmmError> {
    let pool = AmmPool::new(
        lift(scenario.pool.reserve_x),
        lift(scenario.pool.reserve_y),
        scenario.pool.fee_bps,
    )?;
    let mempool: Vec<MempoolTx<A>> = scenario
        .mempool()?
        .into_iter()
        .map(|t| {
            if t.amount_in == 0 {
                return Err(AmmError::Scenario(format!(
                    "tx {:?}: amount_in must be positive",
                    t.tx_id
                )));
            }
            Ok(MempoolTx {
                tx_id: t.tx_id,
                direction: t.direction,
                amount_in: lift(t.amount_in),
                max_price_impact: t.max_price_impact.0,
                arrival_slot_offset: t.arrival_slot_offset,
            })
        })
        .collect::<Result<_, _>>()?;
    execute_momentum(
        &pool,
        scenario.window_k,
        &mempool,
        &lift(scenario.builder_capital),
        &scenario.config(),
    )
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, AmmError> {
    let (profit, withheld, rejected, outside_window, blocks, spots) = match scenario.precision {
        Precision::Integer => {
            let r = run_generic(scenario, |v| v)?;
            (
                r.profit,
                r.withheld,
                r.rejected,
                r.outside_window,
                r.blocks,
                r.spot_trace,
            )
        }
        Precision::Rational => {
            let r = run_generic(scenario, <BigRational as Amount>::from_u128)?;
            (
                r.profit,
                r.withheld,
                r.rejected,
                r.outside_window,
                r.blocks,
                r.spot_trace,
            )
        }
    };
    let premium = match &scenario.x_to_wei {
        Some(Decimal(rate)) => {
            if scenario.payments_wei.len() != scenario.baselines_wei.len() {
                return Err(AmmError::Scenario(
                    "payments_wei and baselines_wei differ in length".into(),
                ));
            }
            let paid: Vec<Wei> = scenario.payments_wei.iter().map(|&w| Wei(w)).collect();
            let base: Vec<Wei> = scenario.baselines_wei.iter().map(|&w| Wei(w)).collect();
            Some(breakeven_bid_premium(&profit, &paid, &base, rate))
        }
        None => None,
    };
    Ok(ScenarioOutcome {
        precision: scenario.precision,
        window_k: scenario.window_k,
        builder_capital: scenario.builder_capital.to_string(),
        profit: profit.to_string(),
        profit_decimal: format_decimal(&profit, 6),
        withheld,
        rejected,
        outside_window,
        blocks,
        spot_trace: spots.iter().map(|s| format_decimal(s, 6)).collect(),
        premium_wei: premium.map(|p| p.to_string()),
        rational_strategy: premium.map(|p| p > 0),
    })
}
