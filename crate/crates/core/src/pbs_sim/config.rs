use std::collections::BTreeSet;
use std::path::Path;

use rand::distr::{Bernoulli, Distribution};
use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::trace_model::{synthetic_pubkey, Pubkey, Wei};

pub const DEFAULT_SLOTS_PER_EPOCH: u64 = 32;
/// Share of blocks built through PBS in the reference dataset.
pub const DEFAULT_MEVBOOST_RATE: f64 = 0.7602;
pub const DEFAULT_DELTA: f64 = 0.02;
pub const DEFAULT_K_TARGET: usize = 2;
/// 0.046 ETH, the median single-block payment of the reference dataset.
pub const DEFAULT_BASE_MEDIAN_WEI: u128 = 46_000_000_000_000_000;

/// RNG stream ids carved out of the master seed.
pub(crate) const STREAM_SCHEDULE: u64 = 0;
pub(crate) const STREAM_MARKET: u64 = 1;
pub(crate) const STREAM_GENERATOR: u64 = 2;
pub(crate) const STREAM_BUILDER_BASE: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorConfig {
    pub id: String,
    #[serde(default)]
    pub pool_id: String,
    #[serde(default = "default_stake")]
    pub stake_weight: f64,
    #[serde(default)]
    pub mevboost: bool,
    #[serde(default)]
    pub relays: BTreeSet<String>,
    /// Builders this proposer accepts; `None` accepts any.
    #[serde(default)]
    pub allowlist: Option<BTreeSet<String>>,
}

fn default_stake() -> f64 {
    32.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StrategySpec {
    /// Bid the public median estimate, perturbed by the builder's valuation
    /// noise.
    #[default]
    Naive,
    /// Commit to the longest visible window of at least `k_target`
    /// consecutive eligible proposers and bid `median * (1 + delta)^(i - 1)`
    /// at position `i`.
    SequenceTargeting {
        #[serde(default = "default_k_target")]
        k_target: usize,
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn default_k_target() -> usize {
    DEFAULT_K_TARGET
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderConfig {
    pub id: String,
    /// Entity the builder's key is attributed to; defaults to `id`.
    #[serde(default)]
    pub entity: Option<String>,
    #[serde(default)]
    pub pubkey: Option<Pubkey>,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub relays: BTreeSet<String>,
    /// Win propensity of the builder's naive bids relative to other builders.
    #[serde(default = "default_propensity")]
    pub propensity: f64,
}

fn default_propensity() -> f64 {
    1.0
}

impl BuilderConfig {
    pub fn entity_name(&self) -> &str {
        self.entity.as_deref().unwrap_or(&self.id)
    }

    pub fn resolved_pubkey(&self) -> Pubkey {
        self.pubkey
            .unwrap_or_else(|| synthetic_pubkey(self.entity_name()))
    }
}

/// Synthesises a validator set instead of listing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub validators: usize,
    #[serde(default = "default_pools")]
    pub pools: usize,
    #[serde(default = "default_mevboost_rate")]
    pub mevboost_rate: f64,
    /// Relays each MEV-boost validator subscribes to; `None` means all.
    #[serde(default)]
    pub relays_per_validator: Option<usize>,
}

fn default_pools() -> usize {
    1
}

fn default_mevboost_rate() -> f64 {
    DEFAULT_MEVBOOST_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub slots_per_epoch: u64,
    pub epochs: u64,
    pub seed: u64,
    pub relays: Vec<String>,
    pub validators: Vec<ValidatorConfig>,
    pub generate: Option<GeneratorSpec>,
    pub builders: Vec<BuilderConfig>,
    /// Centre of the public per-slot median bid estimate.
    pub base_median_wei: Wei,
    /// Log-scale spread of the per-slot median estimate across slots.
    pub market_sigma: f64,
    /// Log-scale scale of each builder's valuation noise.
    pub noise_sigma: f64,
    /// Probability that a slot's proposer misses the slot.
    pub missed_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            slots_per_epoch: DEFAULT_SLOTS_PER_EPOCH,
            epochs: 1,
            seed: 0,
            relays: Vec::new(),
            validators: Vec::new(),
            generate: None,
            builders: Vec::new(),
            base_median_wei: Wei(DEFAULT_BASE_MEDIAN_WEI),
            market_sigma: 0.0,
            noise_sigma: 0.01,
            missed_rate: 0.0,
        }
    }
}

impl SimConfig {
    pub fn total_slots(&self) -> u64 {
        self.slots_per_epoch * self.epochs
    }

    pub fn from_json(text: &str) -> Result<SimConfig, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(format!("JSON config: {e}")))
    }

    /// Loads a JSON config (`.json`) or the key = value text format.
    pub fn load(path: &Path) -> Result<SimConfig, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            Self::from_json(&text)
        } else {
            super::text_config::parse(&text)
        }
    }

    pub fn parse_text(text: &str) -> Result<SimConfig, SimError> {
        super::text_config::parse(text)
    }

    /// Explicit validators followed by generated ones.
    pub fn resolved_validators(&self) -> Result<Vec<ValidatorConfig>, SimError> {
        let mut out = self.validators.clone();
        if let Some(spec) = &self.generate {
            out.extend(generate_validators(spec, &self.relays, self.seed)?);
        }
        Ok(out)
    }

    pub fn validate(&self, validators: &[ValidatorConfig]) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.slots_per_epoch == 0 {
            return bad("slots_per_epoch must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if validators.is_empty() {
            return bad("no validators configured".into());
        }
        let relays: BTreeSet<&str> = self.relays.iter().map(String::as_str).collect();
        if relays.len() != self.relays.len() {
            return bad("duplicate relay ids".into());
        }
        let mut ids = BTreeSet::new();
        for v in validators {
            if !ids.insert(v.id.as_str()) {
                return bad(format!("duplicate validator id {:?}", v.id));
            }
            if !(v.stake_weight.is_finite() && v.stake_weight > 0.0) {
                return bad(format!(
                    "validator {:?}: stake weight must be positive",
                    v.id
                ));
            }
            if let Some(r) = v.relays.iter().find(|r| !relays.contains(r.as_str())) {
                return bad(format!("validator {:?}: unknown relay {r:?}", v.id));
            }
        }
        let mut ids = BTreeSet::new();
        for b in &self.builders {
            if !ids.insert(b.id.as_str()) {
                return bad(format!("duplicate builder id {:?}", b.id));
            }
            if b.relays.is_empty() {
                return bad(format!("builder {:?} submits to no relay", b.id));
            }
            if let Some(r) = b.relays.iter().find(|r| !relays.contains(r.as_str())) {
                return bad(format!("builder {:?}: unknown relay {r:?}", b.id));
            }
            if !(b.propensity.is_finite() && b.propensity > 0.0) {
                return bad(format!("builder {:?}: propensity must be positive", b.id));
            }
            if let StrategySpec::SequenceTargeting { k_target, delta } = b.strategy {
                if k_target == 0 {
                    return bad(format!("builder {:?}: k_target must be >= 1", b.id));
                }
                if !(delta.is_finite() && delta > -1.0) {
                    return bad(format!("builder {:?}: delta must be > -1", b.id));
                }
            }
        }
        for (name, v) in [
            ("market_sigma", self.market_sigma),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative number"));
            }
        }
        if !(0.0..=1.0).contains(&self.missed_rate) {
            return bad("missed_rate must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Validators of equal stake spread round-robin over `pools`, each running
/// MEV-boost with probability `mevboost_rate`.
pub fn generate_validators(
    spec: &GeneratorSpec,
    relays: &[String],
    seed: u64,
) -> Result<Vec<ValidatorConfig>, SimError> {
    if spec.pools == 0 {
        return Err(SimError::Config("generate.pools must be >= 1".into()));
    }
    let coin = Bernoulli::new(spec.mevboost_rate)
        .map_err(|_| SimError::Config("generate.mevboost_rate must lie in [0, 1]".into()))?;
    let per_validator = spec
        .relays_per_validator
        .unwrap_or(relays.len())
        .min(relays.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_GENERATOR);
    Ok((0..spec.validators)
        .map(|i| {
            let mevboost = coin.sample(&mut rng);
            let subscribed = if mevboost {
                sample(&mut rng, relays.len(), per_validator)
                    .into_iter()
                    .map(|j| relays[j].clone())
                    .collect()
            } else {
                BTreeSet::new()
            };
            ValidatorConfig {
                id: format!("gen{i}"),
                pool_id: format!("pool{}", i % spec.pools),
                stake_weight: default_stake(),
                mevboost,
                relays: subscribed,
                allowlist: None,
            }
        })
        .collect())
}
