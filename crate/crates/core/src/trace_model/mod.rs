//! Bid and slot data model, trace ingestion and builder attribution.

mod entity;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use entity::{
    market_shares, synthetic_pubkey, DenominatorMode, EntityMap, EntityMapError, MarketShare,
    DEFAULT_BUILDER_ENTITIES, NON_PBS_ENTITY, UNKNOWN_PREFIX,
};
pub use parse::{
    parse_bid_records, parse_slot_outcomes, write_bid_records, write_slot_outcomes, LineError,
    LineErrorKind, Parsed, TraceFormat,
};

pub const WEI_PER_ETH: u128 = 1_000_000_000_000_000_000;

/// Amount of ether in wei. Kept integral end to end; decimal ETH only appears
/// when formatting reports.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Wei(pub u128);

impl Wei {
    pub const ZERO: Wei = Wei(0);

    pub fn from_eth_f64(eth: f64) -> Wei {
        Wei((eth * WEI_PER_ETH as f64).round().max(0.0) as u128)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    pub fn as_eth_f64(self) -> f64 {
        self.0 as f64 / WEI_PER_ETH as f64
    }

    /// Exact decimal rendering, e.g. `46000000000000000` -> `"0.046"`.
    pub fn to_eth_string(self) -> String {
        let whole = self.0 / WEI_PER_ETH;
        let frac = self.0 % WEI_PER_ETH;
        if frac == 0 {
            return format!("{whole}.0");
        }
        let digits = format!("{frac:018}");
        format!("{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl fmt::Display for Wei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad hex: {0}")]
pub struct PubkeyError(pub String);

/// BLS builder public key (48 bytes). Parsed from 96 hex characters with an
/// optional `0x` prefix; always rendered as `0x` + lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Pubkey([u8; 48]);

impl Pubkey {
    pub const HEX_LEN: usize = 96;

    pub fn parse(raw: &str) -> Result<Pubkey, PubkeyError> {
        let hex = raw
            .strip_prefix("0x")
            .or_else(|| raw.strip_prefix("0X"))
            .unwrap_or(raw);
        if hex.len() != Self::HEX_LEN {
            return Err(PubkeyError(format!(
                "expected {} hex characters, found {}",
                Self::HEX_LEN,
                hex.len()
            )));
        }
        let mut bytes = [0u8; 48];
        let digits = hex.as_bytes();
        for (i, b) in bytes.iter_mut().enumerate() {
            let hi = hex_digit(digits[2 * i]);
            let lo = hex_digit(digits[2 * i + 1]);
            match (hi, lo) {
                (Some(h), Some(l)) => *b = h << 4 | l,
                _ => {
                    let bad = if hi.is_none() { 2 * i } else { 2 * i + 1 };
                    let c = hex[bad..].chars().next().unwrap_or('?');
                    return Err(PubkeyError(format!("non-hex character {c:?}")));
                }
            }
        }
        Ok(Pubkey(bytes))
    }

    pub fn from_bytes(bytes: &[u8; 48]) -> Pubkey {
        Pubkey(*bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 48] {
        &self.0
    }
}

fn hex_digit(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

impl fmt::Display for Pubkey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0x")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Pubkey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pubkey({self})")
    }
}

impl FromStr for Pubkey {
    type Err = PubkeyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pubkey::parse(s)
    }
}

impl TryFrom<String> for Pubkey {
    type Error = PubkeyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Pubkey::parse(&s)
    }
}

impl From<Pubkey> for String {
    fn from(p: Pubkey) -> String {
        p.to_string()
    }
}

/// One bid submitted by a builder through a relay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidRecord {
    pub slot: u64,
    pub builder_pubkey: Pubkey,
    pub relay_id: String,
    pub value: Wei,
    pub received_at_ms: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SlotMode {
    Pbs,
    Local,
    Missed,
}

impl SlotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotMode::Pbs => "PBS",
            SlotMode::Local => "LOCAL",
            SlotMode::Missed => "MISSED",
        }
    }
}

impl fmt::Display for SlotMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SlotMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PBS" => Ok(SlotMode::Pbs),
            "LOCAL" => Ok(SlotMode::Local),
            "MISSED" => Ok(SlotMode::Missed),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

/// How a slot was resolved. Only PBS slots carry a winner and a payment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotResult {
    Pbs { winner: Pubkey, payment: Wei },
    Local,
    Missed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    pub slot: u64,
    pub result: SlotResult,
}

impl SlotOutcome {
    pub fn pbs(slot: u64, winner: Pubkey, payment: Wei) -> Self {
        SlotOutcome {
            slot,
            result: SlotResult::Pbs { winner, payment },
        }
    }

    pub fn local(slot: u64) -> Self {
        SlotOutcome {
            slot,
            result: SlotResult::Local,
        }
    }

    pub fn missed(slot: u64) -> Self {
        SlotOutcome {
            slot,
            result: SlotResult::Missed,
        }
    }

    pub fn mode(&self) -> SlotMode {
        match self.result {
            SlotResult::Pbs { .. } => SlotMode::Pbs,
            SlotResult::Local => SlotMode::Local,
            SlotResult::Missed => SlotMode::Missed,
        }
    }

    pub fn winner(&self) -> Option<&Pubkey> {
        match &self.result {
            SlotResult::Pbs { winner, .. } => Some(winner),
            _ => None,
        }
    }

    pub fn payment(&self) -> Option<Wei> {
        match self.result {
            SlotResult::Pbs { payment, .. } => Some(payment),
            _ => None,
        }
    }
}

/// Fatal ingestion and attribution errors. Per-line problems are reported as
/// [`LineError`]s instead.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unreadable input: {0}")]
    Io(#[from] std::io::Error),
    #[error("input is not valid UTF-8 near line {line}")]
    Utf8 { line: u64 },
    #[error("bad CSV header: {0}")]
    Header(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("no slot outcomes given")]
    EmptyOutcomes,
    #[error("no PBS slots to form a PBS_SLOTS denominator")]
    NoPbsSlots,
}
