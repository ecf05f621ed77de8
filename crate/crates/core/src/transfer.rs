//! Transfer descriptors.

use num_bigint::BigUint;

use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};
use crate::ProcessId;

/// `(sender, amount, receiver, sender sequence number)`.
///
/// The canonical encoding is what gets hashed to a prime and accumulated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransferDetails {
    pub snd: ProcessId,
    pub v: BigUint,
    pub rcv: ProcessId,
    pub sn: u64,
}

impl TransferDetails {
    pub fn is_null(&self) -> bool {
        self.snd == self.rcv
    }
}

impl Encode for TransferDetails {
    fn encode_to(&self, w: &mut Writer) {
        w.raw(b"qaat/tau").u32(self.snd).biguint(&self.v).u32(self.rcv).u64(self.sn);
    }
}

impl Decode for TransferDetails {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        if r.raw(8)? != b"qaat/tau" {
            return Err(DecodeError::Invalid);
        }
        Ok(TransferDetails { snd: r.u32()?, v: r.biguint()?, rcv: r.u32()?, sn: r.u64()? })
    }
}
