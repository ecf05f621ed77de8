//! Simulated trusted-dealer-free setup: keys, blinded empty accumulators,
//! balance commitments and the sequence-number-zero agreement proofs.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use rand_core::Rng;

use crate::account::ProcessState;
use crate::agreement::{ap_aggregate, ap_share, ap_verify, AgreementProof, Committee};
use crate::crypto::{c_commit, Accumulator, CommitmentDigest, Element, GroupParams, HashToPrime, KeyDirectory, KeyOpening, PublicKey, SecretKey};
use crate::encoding::Encode;
use crate::predicate::ApPayload;
use crate::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetupError {
    /// `3t >= n`.
    TooManyFaults { n: usize, t: usize },
    BalanceCount { expected: usize, got: usize },
    NoProcesses,
}

impl fmt::Display for SetupError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetupError::TooManyFaults { n, t } => write!(f, "t = {t} is not below n/3 for n = {n}"),
            SetupError::BalanceCount { expected, got } => write!(f, "expected {expected} initial balances, got {got}"),
            SetupError::NoProcesses => f.write_str("n must be positive"),
        }
    }
}

/// Published setup output.
#[derive(Debug, Clone)]
pub struct Genesis {
    pub keys: Vec<PublicKey>,
    pub directory_root: [u8; 32],
    pub empty_digests: Vec<Element>,
    pub balance_commitments: Vec<CommitmentDigest>,
    /// Sequence-number-zero proofs. Each process keeps its own copy, so this
    /// list can be dropped once distributed.
    pub proofs: Vec<AgreementProof>,
}

/// Everything one process takes away from setup.
#[derive(Debug, Clone)]
pub struct ProcessKit {
    pub key: SecretKey,
    pub key_opening: KeyOpening,
    pub state: ProcessState,
}

pub fn check_fault_bound(n: usize, t: usize) -> Result<(), SetupError> {
    if n == 0 {
        return Err(SetupError::NoProcesses);
    }
    if 3 * t >= n {
        return Err(SetupError::TooManyFaults { n, t });
    }
    Ok(())
}

pub fn system_setup<R: Rng + ?Sized>(
    group: &GroupParams,
    t: usize,
    balances: &[BigUint],
    rng: &mut R,
) -> Result<(Genesis, Committee, Vec<ProcessKit>), SetupError> {
    let n = balances.len();
    check_fault_bound(n, t)?;

    let keys: Vec<SecretKey> = (0..n).map(|_| SecretKey::generate(rng)).collect();
    let publics: Vec<PublicKey> = keys.iter().map(SecretKey::public).collect();
    let directory = KeyDirectory::new(publics.clone());
    let committee = Committee { keys: publics.clone(), t };

    let h2p = HashToPrime::default();
    let mut accs = Vec::with_capacity(n);
    let mut commitments = Vec::with_capacity(n);
    for bal in balances {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let blinding = h2p.hash(&seed).expect("random seed hashes to a prime").value;
        accs.push(Accumulator::blinded(group, blinding));
        commitments.push(c_commit(bal, rng));
    }

    let mut proofs = Vec::with_capacity(n);
    for i in 0..n {
        let value = ApPayload { acc: accs[i].digest(group), bal_c: commitments[i].0 }.to_bytes();
        let shares: Vec<_> = (0..committee.threshold())
            .map(|s| (s as ProcessId, ap_share(&keys[s], &value, 0, i as ProcessId)))
            .collect();
        let proof = ap_aggregate(&committee, &value, 0, i as ProcessId, &shares).expect("threshold shares from distinct signers");
        debug_assert!(ap_verify(&committee, &proof, &value, 0, i as ProcessId));
        proofs.push(proof);
    }

    let genesis = Genesis {
        keys: publics,
        directory_root: directory.root(),
        empty_digests: accs.iter().map(|a| a.digest(group)).collect(),
        balance_commitments: commitments.iter().map(|c| c.0).collect(),
        proofs: proofs.clone(),
    };

    let kits = keys
        .into_iter()
        .zip(accs)
        .zip(commitments)
        .zip(proofs)
        .enumerate()
        .map(|(i, (((key, acc), (bal_c, bal_o)), proof))| {
            let (_, key_opening) = directory.open(i as ProcessId).expect("index in range");
            let state = ProcessState {
                id: i as ProcessId,
                bal: balances[i].clone(),
                sn: 0,
                bal_c,
                bal_o,
                transfers: Vec::new(),
                acc,
                proof,
            };
            ProcessKit { key, key_opening, state }
        })
        .collect();
    Ok((genesis, committee, kits))
}
