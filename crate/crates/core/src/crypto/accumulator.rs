//! RSA universal accumulator with owner-side witnesses.
//!
//! The digest of a set `S` is `g^(r * prod S)` where `r` is a secret blinding
//! prime chosen at creation, so two accumulators over the same set do not
//! share a digest. Elements are primes; byte strings enter through
//! hash-to-prime. Membership witnesses are digests with the element's prime
//! left out, non-membership witnesses come from a Bezout identity.

use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};

use super::group::GroupParams;
use super::CryptoError;
use crate::encoding::{Decode, DecodeError, Encode, Reader, Writer};

/// A group element in fixed-width big-endian form.
///
/// Width is the modulus byte length, so encodings of elements from one group
/// all have the same size.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(Vec<u8>);

impl Element {
    pub fn from_int(group: &GroupParams, x: &BigUint) -> Self {
        let mut w = Writer::new();
        w.biguint_fixed(x, group.element_len());
        Element(w.finish())
    }

    pub fn to_int(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// Width matches the group and the value is a unit mod N.
    pub fn is_valid_in(&self, group: &GroupParams) -> bool {
        self.0.len() == group.element_len() && group.is_element(&self.to_int())
    }
}

impl Encode for Element {
    fn encode_to(&self, w: &mut Writer) {
        w.bytes(&self.0);
    }
}

impl Decode for Element {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Element(r.bytes()?.to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipProof {
    pub w: Element,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonMembershipProof {
    pub a: BigInt,
    pub b: Element,
}

impl Encode for MembershipProof {
    fn encode_to(&self, w: &mut Writer) {
        w.put(&self.w);
    }
}

impl Decode for MembershipProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(MembershipProof { w: r.get()? })
    }
}

impl Encode for NonMembershipProof {
    fn encode_to(&self, w: &mut Writer) {
        w.bigint(&self.a).put(&self.b);
    }
}

impl Decode for NonMembershipProof {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(NonMembershipProof { a: r.bigint()?, b: r.get()? })
    }
}

/// Owner view of an accumulator: digest plus the primes behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accumulator {
    digest: BigUint,
    primes: Vec<BigUint>,
    blinding: Option<BigUint>,
}

impl Accumulator {
    /// Unblinded empty accumulator, digest `g`.
    pub fn new(group: &GroupParams) -> Self {
        Accumulator { digest: group.generator().clone(), primes: Vec::new(), blinding: None }
    }

    /// Empty accumulator hidden behind a secret blinding prime.
    pub fn blinded(group: &GroupParams, blinding_prime: BigUint) -> Self {
        let digest = group.pow(group.generator(), &blinding_prime);
        Accumulator { digest, primes: Vec::new(), blinding: Some(blinding_prime) }
    }

    /// Accumulator over `primes` built with one exponentiation. The caller
    /// guarantees the primes are distinct.
    pub fn from_primes(group: &GroupParams, blinding: Option<BigUint>, primes: Vec<BigUint>) -> Self {
        let mut acc = Accumulator { digest: BigUint::one(), primes, blinding };
        acc.digest = group.pow(group.generator(), &acc.product_except(None));
        acc
    }

    pub fn digest(&self, group: &GroupParams) -> Element {
        Element::from_int(group, &self.digest)
    }

    pub fn digest_int(&self) -> &BigUint {
        &self.digest
    }

    /// Accumulated primes in insertion order.
    pub fn primes(&self) -> &[BigUint] {
        &self.primes
    }

    pub fn blinding(&self) -> Option<&BigUint> {
        self.blinding.as_ref()
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn contains(&self, x: &BigUint) -> bool {
        self.primes.contains(x)
    }

    /// Adds prime `x`, returning the new accumulator and the old digest, which
    /// is the membership witness for `x` in the new one.
    pub fn add_prime(&self, group: &GroupParams, x: &BigUint) -> Result<(Accumulator, MembershipProof), CryptoError> {
        if self.contains(x) || self.blinding.as_ref() == Some(x) {
            return Err(CryptoError::DuplicateElement);
        }
        let mut next = self.clone();
        next.digest = group.pow(&self.digest, x);
        next.primes.push(x.clone());
        Ok((next, MembershipProof { w: self.digest(group) }))
    }

    fn product_except(&self, skip: Option<&BigUint>) -> BigUint {
        let mut s = self.blinding.clone().unwrap_or_else(BigUint::one);
        for p in &self.primes {
            if Some(p) != skip {
                s *= p;
            }
        }
        s
    }

    /// Membership witness computed from scratch; `None` if `x` is absent.
    pub fn prove_mem_prime(&self, group: &GroupParams, x: &BigUint) -> Option<MembershipProof> {
        if !self.contains(x) {
            return None;
        }
        let w = group.pow(group.generator(), &self.product_except(Some(x)));
        Some(MembershipProof { w: Element::from_int(group, &w) })
    }

    /// Non-membership witness; `None` if `x` is present or shares a factor
    /// with the accumulated product.
    pub fn prove_non_mem_prime(&self, group: &GroupParams, x: &BigUint) -> Option<NonMembershipProof> {
        if self.contains(x) || x <= &BigUint::one() {
            return None;
        }
        let s = self.product_except(None);
        let xi = BigInt::from(x.clone());
        let si = BigInt::from(s);
        let e = si.extended_gcd(&xi);
        if !e.gcd.is_one() {
            return None;
        }
        // a in [0, x), b = (1 - a s) / x
        let a = e.x.mod_floor(&xi);
        let b = (BigInt::one() - &a * &si) / &xi;
        let big_b = group.pow_signed(group.generator(), &b)?;
        Some(NonMembershipProof { a, b: Element::from_int(group, &big_b) })
    }
}

/// `w^x == A`.
pub fn verify_mem(group: &GroupParams, digest: &Element, x: &BigUint, proof: &MembershipProof) -> bool {
    if !digest.is_valid_in(group) || !proof.w.is_valid_in(group) {
        return false;
    }
    group.pow(&proof.w.to_int(), x) == digest.to_int()
}

/// `A^a * B^x == g`.
pub fn verify_non_mem(group: &GroupParams, digest: &Element, x: &BigUint, proof: &NonMembershipProof) -> bool {
    if !digest.is_valid_in(group) || !proof.b.is_valid_in(group) || x <= &BigUint::one() {
        return false;
    }
    let Some(lhs) = group.pow_signed(&digest.to_int(), &proof.a) else {
        return false;
    };
    let rhs = group.pow(&proof.b.to_int(), x);
    group.mul(&lhs, &rhs) == *group.generator()
}

/// Digest after adding `x`, computed from the public digest alone.
pub fn add_to_digest(group: &GroupParams, digest: &Element, x: &BigUint) -> Option<Element> {
    if !digest.is_valid_in(group) || x.is_zero() {
        return None;
    }
    Some(Element::from_int(group, &group.pow(&digest.to_int(), x)))
}

/// Emptiness test against the digest published for this accumulator at setup.
pub fn is_empty(digest: &Element, genesis: &Element) -> bool {
    digest == genesis
}
