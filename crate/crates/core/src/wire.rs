//! Protocol messages as they appear on the network.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agreement::{AgreementProof, QuorumInit, QuorumSig};
use crate::crypto::{CommitmentDigest, Element, MembershipProof};
use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};
use crate::predicate::SenderArtifacts;
use crate::transfer::TransferDetails;

/// Sender-to-receiver notice of a committed transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferMessage {
    pub tau: TransferDetails,
    pub proof: AgreementProof,
    pub acc: Element,
    pub witness: MembershipProof,
    pub bal_c: CommitmentDigest,
}

impl TransferMessage {
    pub fn artifacts(&self) -> SenderArtifacts {
        SenderArtifacts { acc: self.acc.clone(), bal_c: self.bal_c, proof: self.proof.clone(), witness: self.witness.clone() }
    }
}

impl Encode for TransferMessage {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.tau).put(&self.proof).put(&self.acc).put(&self.witness).put(&self.bal_c);
    }
}

impl Decode for TransferMessage {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(TransferMessage { tau: r.get()?, proof: r.get()?, acc: r.get()?, witness: r.get()?, bal_c: r.get()? })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgKind {
    QuorumInit,
    QuorumSig,
    Transfer,
    /// Anything that does not start with a known tag.
    Unknown,
    /// Public shadow of a receiver-anonymous send.
    Opaque,
}

impl MsgKind {
    /// Classifies raw bytes by their leading tag, without decoding.
    pub fn of(bytes: &[u8]) -> MsgKind {
        match bytes.first() {
            Some(1) => MsgKind::QuorumInit,
            Some(2) => MsgKind::QuorumSig,
            Some(3) => MsgKind::Transfer,
            _ => MsgKind::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Init(QuorumInit),
    Sig(QuorumSig),
    Transfer(TransferMessage),
}

impl Encode for WireMessage {
    fn encode_to(&self, w: &mut Writer) {
        match self {
            WireMessage::Init(m) => w.u8(1).put(m),
            WireMessage::Sig(m) => w.u8(2).put(m),
            WireMessage::Transfer(m) => w.u8(3).put(m),
        };
    }
}

impl Decode for WireMessage {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            1 => Ok(WireMessage::Init(r.get()?)),
            2 => Ok(WireMessage::Sig(r.get()?)),
            3 => Ok(WireMessage::Transfer(r.get()?)),
            t => Err(DecodeError::UnknownTag(t)),
        }
    }
}

impl WireMessage {
    pub fn kind(&self) -> MsgKind {
        match self {
            WireMessage::Init(_) => MsgKind::QuorumInit,
            WireMessage::Sig(_) => MsgKind::QuorumSig,
            WireMessage::Transfer(_) => MsgKind::Transfer,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        self.to_bytes()
    }
}
