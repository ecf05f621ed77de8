//! What the simulator records: the eavesdropper's public trace and the
//! ground-truth event log.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::account::Role;
use crate::transfer::TransferDetails;
use crate::wire::MsgKind;
use crate::ProcessId;

/// Trace schema version written as the first JSON Lines record.
pub const TRACE_VERSION: u32 = 1;

pub fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_hex(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        from_hex(&s).ok_or_else(|| serde::de::Error::custom("invalid hex"))
    }
}

/// SHA-256 of some bytes, written as hex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub fn of(bytes: &[u8]) -> Self {
        Digest32(Sha256::digest(bytes).into())
    }
}

impl Serialize for Digest32 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_hex(&self.0))
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = hex_bytes::deserialize(d)?;
        <[u8; 32]>::try_from(v.as_slice()).map(Digest32).map_err(|_| serde::de::Error::custom("expected 32 bytes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Send,
    Broadcast,
    RaSend,
}

/// One eavesdropper observation. Receiver-anonymous sends show up with no
/// endpoints and a fixed-size blob unrelated to the private payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step: u64,
    pub channel: Channel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub src: Option<ProcessId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dst: Option<ProcessId>,
    pub kind: MsgKind,
    #[serde(with = "hex_bytes")]
    pub bytes: Vec<u8>,
}

/// Transfer descriptor in log form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TauRecord {
    pub snd: ProcessId,
    pub v: u64,
    pub rcv: ProcessId,
    pub sn: u64,
}

impl TauRecord {
    pub fn is_null(&self) -> bool {
        self.snd == self.rcv
    }

    pub fn to_details(&self) -> TransferDetails {
        TransferDetails { snd: self.snd, v: BigUint::from(self.v), rcv: self.rcv, sn: self.sn }
    }
}

impl From<&TransferDetails> for TauRecord {
    fn from(t: &TransferDetails) -> Self {
        TauRecord { snd: t.snd, v: u64::try_from(&t.v).expect("amounts fit in u64"), rcv: t.rcv, sn: t.sn }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleRecord {
    Sending,
    Receiving,
    Null,
}

impl From<Role> for RoleRecord {
    fn from(r: Role) -> Self {
        match r {
            Role::Sender => RoleRecord::Sending,
            Role::Receiver => RoleRecord::Receiving,
            Role::Null => RoleRecord::Null,
        }
    }
}

/// A certified account update: which transfer moved `issuer` to `sn`, the
/// certified payload and the payload it replaced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub issuer: ProcessId,
    pub sn: u64,
    pub tau: TauRecord,
    pub role: RoleRecord,
    pub payload: Digest32,
    pub prev: Digest32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpRecord {
    Transfer { to: ProcessId, amount: u64 },
    Balance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultRecord {
    Commit,
    Abort,
    Balance(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Invoked { pid: ProcessId, op: u64, operation: OpRecord },
    Completed { pid: ProcessId, op: u64, result: ResultRecord },
    /// Update installed by an account (correct, or a Byzantine process running honest code).
    Installed { pid: ProcessId, update: UpdateRecord },
    /// Update certified by an adversary script outside the account code.
    Certified { update: UpdateRecord },
    Answered { pid: ProcessId, prover: ProcessId, sn: u64 },
    Ignored { pid: ProcessId, reason: String },
    Halted { pid: ProcessId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        assert_eq!(to_hex(&[0, 0xab, 0x10]), "00ab10");
        assert_eq!(from_hex("00ab10").unwrap(), [0, 0xab, 0x10]);
        assert_eq!(from_hex("0"), None);
        assert_eq!(from_hex("zz"), None);
    }
}
