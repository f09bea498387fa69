//! Network strategy scripts.
//!
//! ```json
//! {"net":   [{"ch": "ALICE/TO_LEAD", "bit": 1, "val": 100, "size": 8}],
//!  "local": {"STDIN": [null, {"val": "hi", "size": 4}]}}
//! ```
//!
//! `net` entries may set `"immediate": false` to let queued deliveries from
//! other nodes go first.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use super::ast::ChannelRef;
use crate::value::{BaseValue, SizedValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("malformed strategy: {0}")]
    Malformed(String),
    #[error("entry {index}: channel `{ch}` is not of the form NODE/NAME")]
    BadChannel { index: usize, ch: String },
    #[error("entry {index}: mode bit must be 0 or 1, found {bit}")]
    BadBit { index: usize, bit: u64 },
    #[error("{place}: value needs {actual} bytes but size is {size}")]
    Undersized { place: String, actual: usize, size: usize },
    #[error("{place}: value must be an integer or a string")]
    BadValue { place: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetMessage {
    pub ch: ChannelRef,
    pub bit: bool,
    pub value: SizedValue,
    pub immediate: bool,
}

impl NetMessage {
    pub fn genuine(ch: ChannelRef, value: SizedValue) -> NetMessage {
        NetMessage {
            ch,
            bit: true,
            value,
            immediate: true,
        }
    }

    pub fn dummy(ch: ChannelRef, value: SizedValue) -> NetMessage {
        NetMessage {
            ch,
            bit: false,
            value,
            immediate: true,
        }
    }
}

/// Scripted inputs of one node: incoming network messages in order, plus a
/// stream of optional values per local channel.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StrategyScript {
    pub net: Vec<NetMessage>,
    pub local: BTreeMap<String, Vec<Option<SizedValue>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    net: Vec<RawNet>,
    #[serde(default)]
    local: BTreeMap<String, Vec<Option<RawValue>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    ch: String,
    bit: u64,
    val: Json,
    size: usize,
    #[serde(default = "default_immediate")]
    immediate: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValue {
    val: Json,
    size: usize,
}

fn default_immediate() -> bool {
    true
}

fn sized(val: &Json, size: usize, place: String) -> Result<SizedValue, StrategyError> {
    let base = BaseValue::from_json(val).ok_or_else(|| StrategyError::BadValue { place: place.clone() })?;
    SizedValue::new(&base, size).map_err(|_| StrategyError::Undersized {
        place,
        actual: crate::value::size_of(&base),
        size,
    })
}

pub fn parse_strategy(src: &str) -> Result<StrategyScript, StrategyError> {
    let raw: RawScript = serde_json::from_str(src).map_err(|e| StrategyError::Malformed(e.to_string()))?;
    let mut net = Vec::with_capacity(raw.net.len());
    for (index, r) in raw.net.into_iter().enumerate() {
        let ch = ChannelRef::parse(&r.ch).ok_or_else(|| StrategyError::BadChannel {
            index,
            ch: r.ch.clone(),
        })?;
        let bit = match r.bit {
            0 => false,
            1 => true,
            bit => return Err(StrategyError::BadBit { index, bit }),
        };
        let value = sized(&r.val, r.size, format!("entry {index}"))?;
        net.push(NetMessage {
            ch,
            bit,
            value,
            immediate: r.immediate,
        });
    }
    let mut local = BTreeMap::new();
    for (name, stream) in raw.local {
        let mut out = Vec::with_capacity(stream.len());
        for (i, item) in stream.into_iter().enumerate() {
            out.push(match item {
                None => None,
                Some(v) => Some(sized(&v.val, v.size, format!("local {name}[{i}]"))?),
            });
        }
        local.insert(name, out);
    }
    Ok(StrategyScript { net, local })
}

impl StrategyScript {
    pub fn to_json(&self) -> Json {
        let net: Vec<Json> = self
            .net
            .iter()
            .map(|m| {
                let mut o = json!({
                    "ch": m.ch.to_string(),
                    "bit": m.bit as u8,
                    "val": m.value.base().to_json(),
                    "size": m.value.size(),
                });
                if !m.immediate {
                    o["immediate"] = Json::Bool(false);
                }
                o
            })
            .collect();
        let local: serde_json::Map<String, Json> = self
            .local
            .iter()
            .map(|(k, vs)| {
                let items = vs
                    .iter()
                    .map(|v| match v {
                        None => Json::Null,
                        Some(v) => json!({"val": v.base().to_json(), "size": v.size()}),
                    })
                    .collect();
                (k.clone(), Json::Array(items))
            })
            .collect();
        json!({"net": net, "local": local})
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("json values serialize")
    }

    pub fn is_genuine_only(&self) -> bool {
        self.net.iter().all(|m| m.bit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genuine_and_dummy() {
        let s = parse_strategy(r#"{"net":[{"ch":"ALICE/TO_LEAD","bit":1,"val":100,"size":8}],"local":{}}"#).unwrap();
        assert_eq!(s.net.len(), 1);
        assert!(s.net[0].bit);
        let s = parse_strategy(r#"{"net":[{"ch":"ALICE/TO_LEAD","bit":0,"val":0,"size":8}],"local":{}}"#).unwrap();
        assert!(!s.net[0].bit);
    }

    #[test]
    fn undersized_rejected() {
        let err = parse_strategy(r#"{"net":[{"ch":"A/B","bit":1,"val":"abcd","size":2}]}"#).unwrap_err();
        assert!(matches!(err, StrategyError::Undersized { actual: 4, size: 2, .. }));
        assert!(parse_strategy(r#"{"local":{"IN":[{"val":"abc","size":1}]}}"#).is_err());
    }

    #[test]
    fn malformed_rejected() {
        assert!(matches!(parse_strategy("{"), Err(StrategyError::Malformed(_))));
        assert!(matches!(
            parse_strategy(r#"{"net":[{"ch":"A/B","bit":2,"val":1,"size":8}]}"#),
            Err(StrategyError::BadBit { bit: 2, .. })
        ));
        assert!(matches!(
            parse_strategy(r#"{"net":[{"ch":"AB","bit":1,"val":1,"size":8}]}"#),
            Err(StrategyError::BadChannel { .. })
        ));
        assert!(parse_strategy(r#"{"net":[{"ch":"A/B","bit":1,"val":[1],"size":8}]}"#).is_err());
        assert!(parse_strategy(r#"{"nett":[]}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let src = r#"{"net":[{"ch":"A/B","bit":0,"val":"x","size":4,"immediate":false}],"local":{"IN":[null,{"val":3,"size":9}]}}"#;
        let s = parse_strategy(src).unwrap();
        assert_eq!(parse_strategy(&s.to_json_string()).unwrap(), s);
    }
}
