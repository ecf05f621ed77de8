//! Canonical byte encoding.
//!
//! Every wire and storage type is written as a sequence of big-endian
//! fixed-width integers and `u32`-length-prefixed byte strings. Decoding is
//! strict: trailing bytes, truncated input and non-canonical big integers are
//! all rejected, so `decode(encode(x)) == x` and `encode(decode(b)) == b`.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::{BigInt, BigUint, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    Truncated,
    TrailingBytes,
    /// A big integer with a leading zero byte or a bad sign marker.
    NonCanonical,
    /// A tag or discriminant outside the known range.
    UnknownTag(u8),
    Invalid,
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Truncated => f.write_str("input truncated"),
            DecodeError::TrailingBytes => f.write_str("trailing bytes after value"),
            DecodeError::NonCanonical => f.write_str("non-canonical integer encoding"),
            DecodeError::UnknownTag(t) => write!(f, "unknown tag {t}"),
            DecodeError::Invalid => f.write_str("invalid field value"),
        }
    }
}

#[derive(Default, Debug, Clone)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, x: u8) -> &mut Self {
        self.buf.push(x);
        self
    }

    pub fn u32(&mut self, x: u32) -> &mut Self {
        self.buf.extend_from_slice(&x.to_be_bytes());
        self
    }

    pub fn u64(&mut self, x: u64) -> &mut Self {
        self.buf.extend_from_slice(&x.to_be_bytes());
        self
    }

    /// Length-prefixed byte string.
    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
        self
    }

    /// Raw bytes with no prefix, for fixed-width fields.
    pub fn raw(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    /// Minimal big-endian magnitude, length-prefixed; zero is the empty string.
    pub fn biguint(&mut self, x: &BigUint) -> &mut Self {
        if x == &BigUint::default() {
            self.u32(0)
        } else {
            self.bytes(&x.to_bytes_be())
        }
    }

    /// Sign byte (0 non-negative, 1 negative) followed by the magnitude.
    pub fn bigint(&mut self, x: &BigInt) -> &mut Self {
        self.u8(u8::from(x.sign() == Sign::Minus));
        self.biguint(x.magnitude())
    }

    /// Big-endian, left-padded to exactly `width` bytes. Panics if `x` does not fit.
    pub fn biguint_fixed(&mut self, x: &BigUint, width: usize) -> &mut Self {
        let b = x.to_bytes_be();
        let b: &[u8] = if b == [0] { &[] } else { &b };
        assert!(b.len() <= width, "integer wider than its fixed field");
        self.buf.extend(core::iter::repeat_n(0u8, width - b.len()));
        self.buf.extend_from_slice(b);
        self
    }

    pub fn put<T: Encode + ?Sized>(&mut self, x: &T) -> &mut Self {
        x.encode_to(self);
        self
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Takes the bytes written so far, leaving the writer empty.
    pub fn finish(&mut self) -> Vec<u8> {
        core::mem::take(&mut self.buf)
    }
}

#[derive(Debug, Clone)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8], DecodeError> {
        if self.data.len() - self.pos < k {
            return Err(DecodeError::Truncated);
        }
        let s = &self.data[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        let mut a = [0u8; 8];
        a.copy_from_slice(self.take(8)?);
        Ok(u64::from_be_bytes(a))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn raw(&mut self, k: usize) -> Result<&'a [u8], DecodeError> {
        self.take(k)
    }

    pub fn array<const K: usize>(&mut self) -> Result<[u8; K], DecodeError> {
        let mut a = [0u8; K];
        a.copy_from_slice(self.take(K)?);
        Ok(a)
    }

    pub fn biguint(&mut self) -> Result<BigUint, DecodeError> {
        let b = self.bytes()?;
        if b.first() == Some(&0) {
            return Err(DecodeError::NonCanonical);
        }
        Ok(BigUint::from_bytes_be(b))
    }

    pub fn bigint(&mut self) -> Result<BigInt, DecodeError> {
        let sign = self.u8()?;
        let mag = self.biguint()?;
        match sign {
            0 => Ok(BigInt::from(mag)),
            1 if mag != BigUint::default() => Ok(-BigInt::from(mag)),
            _ => Err(DecodeError::NonCanonical),
        }
    }

    pub fn biguint_fixed(&mut self, width: usize) -> Result<BigUint, DecodeError> {
        Ok(BigUint::from_bytes_be(self.take(width)?))
    }

    pub fn get<T: Decode>(&mut self) -> Result<T, DecodeError> {
        T::decode_from(self)
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes)
        }
    }
}

pub trait Encode {
    fn encode_to(&self, w: &mut Writer);

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_to(&mut w);
        w.finish()
    }
}

pub trait Decode: Sized {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    /// Decodes a complete value, rejecting trailing bytes.
    fn from_bytes(b: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(b);
        let x = Self::decode_from(&mut r)?;
        r.finish()?;
        Ok(x)
    }
}

impl<T: Encode> Encode for Option<T> {
    fn encode_to(&self, w: &mut Writer) {
        match self {
            None => {
                w.u8(0);
            }
            Some(x) => {
                w.u8(1).put(x);
            }
        }
    }
}

impl<T: Decode> Decode for Option<T> {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.u8()? {
            0 => Ok(None),
            1 => Ok(Some(T::decode_from(r)?)),
            t => Err(DecodeError::UnknownTag(t)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_are_big_endian() {
        let b = Writer::new().u32(1).u64(2).finish();
        assert_eq!(b, [0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2]);
    }

    #[test]
    fn biguint_zero_is_empty_string() {
        let b = Writer::new().biguint(&BigUint::default()).finish();
        assert_eq!(b, [0, 0, 0, 0]);
        assert_eq!(Reader::new(&b).biguint().unwrap(), BigUint::default());
    }

    #[test]
    fn leading_zero_rejected() {
        let b = [0, 0, 0, 2, 0, 5];
        assert_eq!(Reader::new(&b).biguint(), Err(DecodeError::NonCanonical));
    }

    #[test]
    fn negative_zero_rejected() {
        let b = [1, 0, 0, 0, 0];
        assert_eq!(Reader::new(&b).bigint(), Err(DecodeError::NonCanonical));
    }

    #[test]
    fn length_past_end_is_truncated() {
        let b = [0xff, 0xff, 0xff, 0xff, 1];
        assert_eq!(Reader::new(&b).bytes(), Err(DecodeError::Truncated));
    }

    #[test]
    fn fixed_width_round_trip() {
        let x = BigUint::from(438u32);
        let b = Writer::new().biguint_fixed(&x, 4).finish();
        assert_eq!(b, [0, 0, 1, 0xb6]);
        assert_eq!(Reader::new(&b).biguint_fixed(4).unwrap(), x);
        let z = Writer::new().biguint_fixed(&BigUint::default(), 2).finish();
        assert_eq!(z, [0, 0]);
    }
}
