//! Paired-trace anonymity checks on the eavesdropper's view.
//!
//! Two runs share seed and scenario except for one secret of one transfer
//! between correct processes. The check has three parts:
//! - structural: the `(step, channel, kind, length)` skeletons match;
//! - taint: the canonical encoding of the secret transfer appears in no
//!   public bytes;
//! - statistical: a nearest-centroid classifier over byte unigram and
//!   hashed bigram frequencies cannot tell the two variants apart.
//!
//! Varying a receiver alone would change which process becomes active,
//! which the model does not hide. The receiver experiment therefore swaps
//! the receivers of two concurrent transfers, so the set of active processes
//! is the same in both variants.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::encoding::Encode;
use crate::sim::{run_with, Channel, Observation, OpKind, RunOptions, RunOutput, Scenario, ScenarioError};
use crate::transfer::TransferDetails;
use crate::wire::MsgKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Swap the receivers of the first two transfers.
    Receiver,
    /// Replace the amount of the first transfer.
    Amount { alternative: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnonymityError {
    Scenario(ScenarioError),
    /// The template lacks the transfers the experiment varies.
    Template(&'static str),
}

impl fmt::Display for AnonymityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnonymityError::Scenario(e) => write!(f, "{e}"),
            AnonymityError::Template(why) => f.write_str(why),
        }
    }
}

pub type SkeletonEntry = (u64, Channel, MsgKind, usize);

pub fn skeleton(trace: &[Observation]) -> Vec<SkeletonEntry> {
    trace.iter().map(|o| (o.step, o.channel, o.kind, o.bytes.len())).collect()
}

/// Index of the first observation where the skeletons differ.
pub fn skeleton_mismatch(a: &[Observation], b: &[Observation]) -> Option<usize> {
    let (sa, sb) = (skeleton(a), skeleton(b));
    sa.iter().zip(&sb).position(|(x, y)| x != y).or_else(|| (sa.len() != sb.len()).then(|| sa.len().min(sb.len())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaintHit {
    pub observation: usize,
    pub offset: usize,
}

/// Every occurrence of `needle` inside public bytes.
pub fn taint_scan(trace: &[Observation], needle: &[u8]) -> Vec<TaintHit> {
    let mut hits = Vec::new();
    if needle.is_empty() {
        return hits;
    }
    for (i, o) in trace.iter().enumerate() {
        for (off, w) in o.bytes.windows(needle.len()).enumerate() {
            if w == needle {
                hits.push(TaintHit { observation: i, offset: off });
            }
        }
    }
    hits
}

pub const BIGRAM_BUCKETS: usize = 1024;
pub const FEATURES: usize = 256 + BIGRAM_BUCKETS;

/// Bytes an observer sees per observation: a header with channel, endpoints,
/// kind and length, then the payload.
fn observed_bytes(o: &Observation) -> Vec<u8> {
    let mut w = crate::encoding::Writer::new();
    w.u8(o.channel as u8).u8(o.kind as u8).u32(o.src.unwrap_or(u32::MAX)).u32(o.dst.unwrap_or(u32::MAX));
    w.u32(o.bytes.len() as u32).raw(&o.bytes);
    w.finish()
}

/// Normalized byte unigram and hashed bigram frequencies of a trace.
pub fn features(trace: &[Observation]) -> Vec<f64> {
    let mut f = alloc::vec![0f64; FEATURES];
    let (mut uni, mut bi) = (0f64, 0f64);
    for o in trace {
        let b = observed_bytes(o);
        for &x in &b {
            f[x as usize] += 1.0;
            uni += 1.0;
        }
        for w in b.windows(2) {
            let h = (usize::from(w[0]) * 257 + usize::from(w[1])) % BIGRAM_BUCKETS;
            f[256 + h] += 1.0;
            bi += 1.0;
        }
    }
    for x in &mut f[..256] {
        *x /= uni.max(1.0);
    }
    for x in &mut f[256..] {
        *x /= bi.max(1.0);
    }
    f
}

fn centroid(xs: &[&Vec<f64>]) -> Vec<f64> {
    let mut c = alloc::vec![0f64; xs.first().map_or(0, |x| x.len())];
    for x in xs {
        for (a, b) in c.iter_mut().zip(x.iter()) {
            *a += b;
        }
    }
    for a in &mut c {
        *a /= xs.len().max(1) as f64;
    }
    c
}

fn train_fold(xs: &[Vec<f64>], fold: usize) -> Vec<&Vec<f64>> {
    xs.iter().enumerate().filter(|(i, _)| i % 2 == fold).map(|(_, x)| x).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Two-fold cross-validated accuracy of a nearest-centroid classifier.
/// Samples with even index train the first fold, odd the second.
pub fn nearest_centroid_accuracy(class0: &[Vec<f64>], class1: &[Vec<f64>]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for fold in 0..2 {
        let (c0, c1) = (centroid(&train_fold(class0, fold)), centroid(&train_fold(class1, fold)));
        for (label, xs) in [(0, class0), (1, class1)] {
            for (_, x) in xs.iter().enumerate().filter(|(i, _)| i % 2 != fold) {
                let guess = if dist2(x, &c0) <= dist2(x, &c1) { 0 } else { 1 };
                correct += usize::from(guess == label);
                total += 1;
            }
        }
    }
    if total == 0 {
        return 0.5;
    }
    correct as f64 / total as f64
}

/// Builds the two variants of `template` with the given seed, plus the
/// canonical encodings of the varied transfer in each.
pub fn paired_scenarios(
    template: &Scenario,
    experiment: Experiment,
    seed: u64,
) -> Result<(Scenario, Scenario, Vec<Vec<u8>>), AnonymityError> {
    let transfers: Vec<usize> = template
        .operations
        .iter()
        .enumerate()
        .filter(|(_, o)| matches!(o.op, OpKind::Transfer { to, .. } if template.is_correct(o.process) && template.is_correct(to) && to != o.process))
        .map(|(i, _)| i)
        .collect();
    let mut a = template.clone();
    a.seed = seed;
    let mut b = a.clone();
    match experiment {
        Experiment::Receiver => {
            let [i, j] = transfers[..] else {
                return Err(AnonymityError::Template("receiver experiment needs exactly two transfers between correct processes"));
            };
            let (OpKind::Transfer { to: ri, amount: ai }, OpKind::Transfer { to: rj, amount: aj }) =
                (a.operations[i].op.clone(), a.operations[j].op.clone())
            else {
                unreachable!("filtered to transfers")
            };
            if ri == rj || ri == a.operations[j].process || rj == a.operations[i].process || ai != aj {
                return Err(AnonymityError::Template("swapped transfers need distinct receivers other than either sender, and equal amounts"));
            }
            b.operations[i].op = OpKind::Transfer { to: rj, amount: ai };
            b.operations[j].op = OpKind::Transfer { to: ri, amount: aj };
        }
        Experiment::Amount { alternative } => {
            let Some(&i) = transfers.first() else {
                return Err(AnonymityError::Template("amount experiment needs a transfer between correct processes"));
            };
            let OpKind::Transfer { to, amount } = a.operations[i].op.clone() else { unreachable!("filtered to transfers") };
            if amount == alternative {
                return Err(AnonymityError::Template("alternative amount equals the template amount"));
            }
            b.operations[i].op = OpKind::Transfer { to, amount: alternative };
        }
    }
    let first = transfers[0];
    let needle = |s: &Scenario| {
        let o = &s.operations[first];
        let OpKind::Transfer { to, amount } = o.op else { unreachable!("filtered to transfers") };
        // Sequence number of the designated transfer: one more than the
        // sender's earlier transfers.
        let sn = s.operations[..first].iter().filter(|p| p.process == o.process && matches!(p.op, OpKind::Transfer { .. })).count() as u64 + 1;
        TransferDetails { snd: o.process, v: amount.into(), rcv: to, sn }.to_bytes()
    };
    let needles = alloc::vec![needle(&a), needle(&b)];
    Ok((a, b, needles))
}

/// Result of one paired run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairOutcome {
    pub seed: u64,
    /// First differing skeleton entry.
    pub structural_mismatch: Option<usize>,
    pub taint: Vec<TaintHit>,
    pub features: [Vec<f64>; 2],
    /// Both runs finished with all work done.
    pub quiescent: bool,
}

pub fn compare_pair(seed: u64, a: &RunOutput, b: &RunOutput, needles: &[Vec<u8>]) -> PairOutcome {
    let mut taint = Vec::new();
    for needle in needles {
        taint.extend(taint_scan(&a.trace, needle));
        taint.extend(taint_scan(&b.trace, needle));
    }
    PairOutcome {
        seed,
        structural_mismatch: skeleton_mismatch(&a.trace, &b.trace),
        taint,
        features: [features(&a.trace), features(&b.trace)],
        quiescent: a.outcome == crate::sim::Outcome::Quiescent && b.outcome == crate::sim::Outcome::Quiescent,
    }
}

pub fn run_pair(template: &Scenario, experiment: Experiment, seed: u64, options: &RunOptions) -> Result<PairOutcome, AnonymityError> {
    let (sa, sb, needles) = paired_scenarios(template, experiment, seed)?;
    let a = run_with(&sa, options.clone()).map_err(AnonymityError::Scenario)?;
    let b = run_with(&sb, options.clone()).map_err(AnonymityError::Scenario)?;
    Ok(compare_pair(seed, &a, &b, &needles))
}

/// Largest distinguisher accuracy still counted as indistinguishable.
pub const MAX_ACCURACY: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymityReport {
    pub trials: usize,
    pub structural_failures: usize,
    pub taint_failures: usize,
    pub incomplete_runs: usize,
    pub accuracy: f64,
    /// Seed and details of the first failing pair.
    pub first_structural: Option<(u64, usize)>,
    pub first_taint: Option<(u64, TaintHit)>,
    pub leaking: bool,
}

pub fn summarize(pairs: &[PairOutcome]) -> AnonymityReport {
    let class0: Vec<Vec<f64>> = pairs.iter().map(|p| p.features[0].clone()).collect();
    let class1: Vec<Vec<f64>> = pairs.iter().map(|p| p.features[1].clone()).collect();
    let accuracy = nearest_centroid_accuracy(&class0, &class1);
    let structural_failures = pairs.iter().filter(|p| p.structural_mismatch.is_some()).count();
    let taint_failures = pairs.iter().filter(|p| !p.taint.is_empty()).count();
    AnonymityReport {
        trials: pairs.len(),
        structural_failures,
        taint_failures,
        incomplete_runs: pairs.iter().filter(|p| !p.quiescent).count(),
        accuracy,
        first_structural: pairs.iter().find_map(|p| p.structural_mismatch.map(|i| (p.seed, i))),
        first_taint: pairs.iter().find_map(|p| p.taint.first().map(|h| (p.seed, h.clone()))),
        leaking: structural_failures > 0 || taint_failures > 0 || accuracy > MAX_ACCURACY,
    }
}
