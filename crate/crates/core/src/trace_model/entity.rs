use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{Pubkey, SlotOutcome, SlotResult, TraceError};

/// Prefix of the singleton entity an unmapped pubkey resolves to.
pub const UNKNOWN_PREFIX: &str = "unknown:";

/// Pseudo-entity pooling LOCAL and MISSED slots under the all-slots
/// denominator.
pub const NON_PBS_ENTITY: &str = "non-PBS";

/// Builder entities named in the reference dataset, by volume. Nine names are
/// listed although the accompanying text speaks of eight entities.
pub const DEFAULT_BUILDER_ENTITIES: [&str; 9] = [
    "Flashbots",
    "Builder0x69",
    "Bloxroute",
    "Beaverbuild.org",
    "Blocknative",
    "Eth-builder.com",
    "x85linux",
    "Eden",
    "Manifold",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("entity map line {line}: {reason}")]
pub struct EntityMapError {
    pub line: usize,
    pub reason: String,
}

/// Attribution of builder pubkeys to the organisations running them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityMap {
    entries: BTreeMap<Pubkey, String>,
}

impl EntityMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `pubkey -> entity`. Re-adding the same pair is a no-op; mapping a
    /// key to a second entity is refused.
    pub fn insert(&mut self, pubkey: Pubkey, entity: &str) -> Result<(), String> {
        let entity = entity.trim();
        if entity.is_empty() {
            return Err("empty entity name".into());
        }
        if entity == NON_PBS_ENTITY || entity.starts_with(UNKNOWN_PREFIX) {
            return Err(format!("entity name {entity:?} is reserved"));
        }
        match self.entries.get(&pubkey) {
            Some(existing) if existing != entity => Err(format!(
                "{pubkey} already mapped to {existing:?}, cannot map to {entity:?}"
            )),
            Some(_) => Ok(()),
            None => {
                self.entries.insert(pubkey, entity.to_owned());
                Ok(())
            }
        }
    }

    /// Parses `pubkey=entity_name` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<EntityMap, EntityMapError> {
        let mut map = EntityMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, name) = content.split_once('=').ok_or_else(|| EntityMapError {
                line,
                reason: "expected `pubkey=entity_name`".into(),
            })?;
            let pubkey = Pubkey::parse(key.trim()).map_err(|e| EntityMapError {
                line,
                reason: e.to_string(),
            })?;
            map.insert(pubkey, name)
                .map_err(|reason| EntityMapError { line, reason })?;
        }
        Ok(map)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}={v}\n"));
        }
        out
    }

    /// Resolves a pubkey to its entity; unmapped keys become their own
    /// singleton entity `unknown:<pubkey>`.
    pub fn resolve<'a>(&'a self, pubkey: &Pubkey) -> Cow<'a, str> {
        match self.entries.get(pubkey) {
            Some(name) => Cow::Borrowed(name),
            None => Cow::Owned(format!("{UNKNOWN_PREFIX}{pubkey}")),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Pubkey, &str)> {
        self.entries.iter().map(|(k, v)| (k, v.as_str()))
    }

    /// The shipped default map: each default builder entity bound to the
    /// synthetic key the simulator derives for it. Real relay dumps need a map
    /// built from public builder key lists.
    pub fn default_builders() -> EntityMap {
        let mut map = EntityMap::new();
        for name in DEFAULT_BUILDER_ENTITIES {
            map.insert(synthetic_pubkey(name), name)
                .expect("default entity names are valid and distinct");
        }
        map
    }
}

/// Deterministic stand-in pubkey for a label (48 bytes of SHA-256 output).
pub fn synthetic_pubkey(label: &str) -> Pubkey {
    let first = Sha256::digest(format!("mmev-lab/pubkey/0/{label}").as_bytes());
    let second = Sha256::digest(format!("mmev-lab/pubkey/1/{label}").as_bytes());
    let mut bytes = [0u8; 48];
    bytes[..32].copy_from_slice(&first);
    bytes[32..].copy_from_slice(&second[..16]);
    Pubkey::from_bytes(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenominatorMode {
    /// Every slot in the trace, LOCAL and MISSED included.
    AllSlots,
    /// Only slots resolved through PBS.
    PbsSlots,
}

impl FromStr for DenominatorMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "all" | "all_slots" => Ok(DenominatorMode::AllSlots),
            "pbs" | "pbs_slots" => Ok(DenominatorMode::PbsSlots),
            other => Err(format!("unknown denominator {other:?} (expected all|pbs)")),
        }
    }
}

impl fmt::Display for DenominatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenominatorMode::AllSlots => "all",
            DenominatorMode::PbsSlots => "pbs",
        })
    }
}

/// Per-entity win shares. Counts are kept so shares are exact rationals until
/// read out.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketShare {
    pub mode: DenominatorMode,
    pub wins: BTreeMap<String, u64>,
    pub non_pbs_slots: u64,
    pub total_slots: u64,
}

impl MarketShare {
    pub fn denominator(&self) -> u64 {
        match self.mode {
            DenominatorMode::AllSlots => self.total_slots,
            DenominatorMode::PbsSlots => self.total_slots - self.non_pbs_slots,
        }
    }

    pub fn share(&self, entity: &str) -> f64 {
        self.wins.get(entity).copied().unwrap_or(0) as f64 / self.denominator() as f64
    }

    /// Share of the non-PBS pseudo-entity; only meaningful for `AllSlots`.
    pub fn non_pbs_share(&self) -> Option<f64> {
        match self.mode {
            DenominatorMode::AllSlots => {
                Some(self.non_pbs_slots as f64 / self.denominator() as f64)
            }
            DenominatorMode::PbsSlots => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> + '_ {
        self.wins.keys().map(|k| (k.as_str(), self.share(k)))
    }
}

pub fn market_shares(
    outcomes: &[SlotOutcome],
    entities: &EntityMap,
    mode: DenominatorMode,
) -> Result<MarketShare, TraceError> {
    if outcomes.is_empty() {
        return Err(TraceError::EmptyOutcomes);
    }
    let mut wins: BTreeMap<String, u64> = BTreeMap::new();
    let mut non_pbs = 0;
    for o in outcomes {
        match &o.result {
            SlotResult::Pbs { winner, .. } => {
                *wins
                    .entry(entities.resolve(winner).into_owned())
                    .or_default() += 1;
            }
            SlotResult::Local | SlotResult::Missed => non_pbs += 1,
        }
    }
    let share = MarketShare {
        mode,
        wins,
        non_pbs_slots: non_pbs,
        total_slots: outcomes.len() as u64,
    };
    if share.denominator() == 0 {
        return Err(TraceError::NoPbsSlots);
    }
    Ok(share)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::Wei;

    fn key(c: char) -> Pubkey {
        Pubkey::parse(&c.to_string().repeat(96)).unwrap()
    }

    #[test]
    fn resolves_known_and_unknown_keys() {
        let mut map = EntityMap::new();
        map.insert(key('a'), "Flashbots").unwrap();
        map.insert(key('c'), "X").unwrap();
        assert_eq!(map.resolve(&key('a')), "Flashbots");
        assert_eq!(map.resolve(&key('c')), "X");
        assert_eq!(
            map.resolve(&key('b')),
            format!("unknown:0x{}", "b".repeat(96))
        );
    }

    #[test]
    fn refuses_conflicting_mapping() {
        let mut map = EntityMap::new();
        map.insert(key('a'), "A").unwrap();
        map.insert(key('a'), "A").unwrap();
        assert!(map.insert(key('a'), "B").is_err());
        assert!(map.insert(key('b'), "  ").is_err());
        assert!(map.insert(key('b'), NON_PBS_ENTITY).is_err());
    }

    #[test]
    fn parses_map_file() {
        let text = format!(
            "# builders\n\n0x{}=Flashbots # main key\n{}=Bloxroute\n",
            "a".repeat(96),
            "B".repeat(96)
        );
        let map = EntityMap::parse(&text).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.resolve(&key('b')), "Bloxroute");
        assert_eq!(EntityMap::parse(&map.to_text()).unwrap(), map);

        let err = EntityMap::parse("nonsense\n").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn default_map_has_nine_entities() {
        let map = EntityMap::default_builders();
        assert_eq!(map.len(), 9);
        assert_eq!(map.resolve(&synthetic_pubkey("Eden")), "Eden");
    }

    fn outcomes(spec: &[Option<char>]) -> Vec<SlotOutcome> {
        spec.iter()
            .enumerate()
            .map(|(i, w)| match w {
                Some(c) => SlotOutcome::pbs(i as u64, key(*c), Wei(1)),
                None => SlotOutcome::local(i as u64),
            })
            .collect()
    }

    #[test]
    fn monopoly_share_is_one() {
        let mut map = EntityMap::new();
        map.insert(key('a'), "A").unwrap();
        let o = outcomes(&[Some('a'); 10]);
        for mode in [DenominatorMode::AllSlots, DenominatorMode::PbsSlots] {
            let s = market_shares(&o, &map, mode).unwrap();
            assert_eq!(s.share("A"), 1.0);
        }
    }

    #[test]
    fn shares_with_unknown_builder() {
        let mut map = EntityMap::new();
        map.insert(key('a'), "A").unwrap();
        map.insert(key('b'), "B").unwrap();
        let mut spec = vec![Some('a'); 6];
        spec.extend([Some('b'); 3]);
        spec.push(Some('c'));
        let s = market_shares(&outcomes(&spec), &map, DenominatorMode::PbsSlots).unwrap();
        assert!((s.share("A") - 0.6).abs() < 1e-12);
        assert!((s.share("B") - 0.3).abs() < 1e-12);
        assert!((s.share(&format!("unknown:0x{}", "c".repeat(96))) - 0.1).abs() < 1e-12);
        let total: f64 = s.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn denominator_modes_differ_with_local_slots() {
        let mut map = EntityMap::new();
        map.insert(key('a'), "A").unwrap();
        let mut spec = vec![Some('a'); 6];
        spec.extend([None; 4]);
        let o = outcomes(&spec);
        let all = market_shares(&o, &map, DenominatorMode::AllSlots).unwrap();
        let pbs = market_shares(&o, &map, DenominatorMode::PbsSlots).unwrap();
        assert!((all.share("A") - 0.6).abs() < 1e-12);
        assert!((pbs.share("A") - 1.0).abs() < 1e-12);
        let total = all.iter().map(|(_, p)| p).sum::<f64>() + all.non_pbs_share().unwrap();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_outcomes_error() {
        assert!(matches!(
            market_shares(&[], &EntityMap::new(), DenominatorMode::AllSlots),
            Err(TraceError::EmptyOutcomes)
        ));
        assert!(matches!(
            market_shares(
                &outcomes(&[None]),
                &EntityMap::new(),
                DenominatorMode::PbsSlots
            ),
            Err(TraceError::NoPbsSlots)
        ));
    }
}
