//! The `key = value` config format with repeated `[validator]`, `[builder]`
//! blocks and an optional `[generate]` block:
//!
//! ```text
//! epochs = 100
//! relays = ultrasound, agnostic
//!
//! [generate]
//! validators = 1000
//! mevboost_rate = 0.7602
//!
//! [builder]
//! id = flashbots
//! strategy = naive
//! relays = ultrasound
//! ```

use std::collections::BTreeSet;
use std::str::FromStr;

use super::config::{
    BuilderConfig, GeneratorSpec, SimConfig, StrategySpec, ValidatorConfig, DEFAULT_DELTA,
    DEFAULT_K_TARGET, DEFAULT_MEVBOOST_RATE,
};
use super::SimError;
use crate::trace_model::{Pubkey, Wei};

enum Section {
    Top,
    Generate,
    Validator,
    Builder,
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

fn err(line: usize, msg: impl Into<String>) -> SimError {
    SimError::Config(format!("line {line}: {}", msg.into()))
}

fn value<T: FromStr>(e: &Entry<'_>) -> Result<T, SimError>
where
    T::Err: std::fmt::Display,
{
    e.value
        .parse()
        .map_err(|x| err(e.line, format!("bad value for `{}`: {x}", e.key)))
}

fn bool_value(e: &Entry<'_>) -> Result<bool, SimError> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(e.line, format!("bad boolean for `{}`", e.key))),
    }
}

fn list(e: &Entry<'_>) -> BTreeSet<String> {
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn unknown(e: &Entry<'_>, section: &str) -> SimError {
    err(e.line, format!("unknown key `{}` in {section}", e.key))
}

fn build_validator(start: usize, entries: &[Entry<'_>]) -> Result<ValidatorConfig, SimError> {
    let mut v = ValidatorConfig {
        id: String::new(),
        pool_id: String::new(),
        stake_weight: 32.0,
        mevboost: false,
        relays: BTreeSet::new(),
        allowlist: None,
    };
    for e in entries {
        match e.key {
            "id" => v.id = e.value.to_owned(),
            "pool" | "pool_id" => v.pool_id = e.value.to_owned(),
            "stake" | "stake_weight" => v.stake_weight = value(e)?,
            "mevboost" => v.mevboost = bool_value(e)?,
            "relays" => v.relays = list(e),
            "allowlist" => v.allowlist = Some(list(e)),
            _ => return Err(unknown(e, "[validator]")),
        }
    }
    if v.id.is_empty() {
        return Err(err(start, "[validator] needs an id"));
    }
    Ok(v)
}

fn build_builder(start: usize, entries: &[Entry<'_>]) -> Result<BuilderConfig, SimError> {
    let mut b = BuilderConfig {
        id: String::new(),
        entity: None,
        pubkey: None,
        strategy: StrategySpec::Naive,
        relays: BTreeSet::new(),
        propensity: 1.0,
    };
    let mut kind = "naive".to_string();
    let mut k_target = DEFAULT_K_TARGET;
    let mut delta = DEFAULT_DELTA;
    for e in entries {
        match e.key {
            "id" => b.id = e.value.to_owned(),
            "entity" => b.entity = Some(e.value.to_owned()),
            "pubkey" => {
                b.pubkey = Some(Pubkey::parse(e.value).map_err(|x| err(e.line, x.to_string()))?)
            }
            "strategy" => kind = e.value.to_ascii_lowercase(),
            "k_target" => k_target = value(e)?,
            "delta" => delta = value(e)?,
            "relays" => b.relays = list(e),
            "propensity" => b.propensity = value(e)?,
            _ => return Err(unknown(e, "[builder]")),
        }
    }
    b.strategy = match kind.as_str() {
        "naive" => StrategySpec::Naive,
        "sequence_targeting" => StrategySpec::SequenceTargeting { k_target, delta },
        other => return Err(err(start, format!("unknown strategy {other:?}"))),
    };
    if b.id.is_empty() {
        return Err(err(start, "[builder] needs an id"));
    }
    Ok(b)
}

fn build_generator(start: usize, entries: &[Entry<'_>]) -> Result<GeneratorSpec, SimError> {
    let mut g = GeneratorSpec {
        validators: 0,
        pools: 1,
        mevboost_rate: DEFAULT_MEVBOOST_RATE,
        relays_per_validator: None,
    };
    let mut have_count = false;
    for e in entries {
        match e.key {
            "validators" => {
                g.validators = value(e)?;
                have_count = true;
            }
            "pools" => g.pools = value(e)?,
            "mevboost_rate" => g.mevboost_rate = value(e)?,
            "relays_per_validator" => g.relays_per_validator = Some(value(e)?),
            _ => return Err(unknown(e, "[generate]")),
        }
    }
    if !have_count {
        return Err(err(start, "[generate] needs `validators`"));
    }
    Ok(g)
}

fn apply_top(config: &mut SimConfig, e: &Entry<'_>) -> Result<(), SimError> {
    match e.key {
        "slots_per_epoch" => config.slots_per_epoch = value(e)?,
        "epochs" => config.epochs = value(e)?,
        "seed" => config.seed = value(e)?,
        "relays" => config.relays = list(e).into_iter().collect(),
        "base_median_wei" => config.base_median_wei = Wei(value(e)?),
        "market_sigma" => config.market_sigma = value(e)?,
        "noise_sigma" => config.noise_sigma = value(e)?,
        "missed_rate" => config.missed_rate = value(e)?,
        _ => return Err(unknown(e, "top level")),
    }
    Ok(())
}

pub(super) fn parse(text: &str) -> Result<SimConfig, SimError> {
    let mut config = SimConfig::default();
    let mut blocks: Vec<(Section, usize, Vec<Entry<'_>>)> = vec![(Section::Top, 0, Vec::new())];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let section = match name.trim() {
                "validator" => Section::Validator,
                "builder" => Section::Builder,
                "generate" => Section::Generate,
                other => return Err(err(line, format!("unknown section [{other}]"))),
            };
            blocks.push((section, line, Vec::new()));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        let entry = Entry {
            line,
            key: key.trim(),
            value: value.trim(),
        };
        blocks.last_mut().expect("top block").2.push(entry);
    }
    for (section, start, entries) in &blocks {
        match section {
            Section::Top => {
                for e in entries {
                    apply_top(&mut config, e)?;
                }
            }
            Section::Validator => config.validators.push(build_validator(*start, entries)?),
            Section::Builder => config.builders.push(build_builder(*start, entries)?),
            Section::Generate => {
                if config.generate.is_some() {
                    return Err(err(*start, "only one [generate] block allowed"));
                }
                config.generate = Some(build_generator(*start, entries)?);
            }
        }
    }
    Ok(config)
}
