//! Alignment trees as explicit linear systems.
//!
//! A tree of length `L` rooted at transmitter `r` is a chain of `L + 1`
//! transmit-vector segments `v_0 .. v_L`, segment `k` living at transmitter
//! `((r - 1 + k) mod 3) + 1`. Consecutive segments are aligned at the one
//! receiver adjacent to neither of them, and both chain ends are zero-forced
//! at their remaining cross receiver. Stacking these conditions gives a
//! `(L + 2) N × (L + 1) M` system whose null space holds the branches; for
//! generic channels its dimension is `(L + 1) M - (L + 2) N`.
//!
//! All numerics run on the integer-scaled antenna counts.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DofError, Result};
use crate::linalg::{gaussian_matrix, null_space, rank_with, CMatrix};
use crate::model::{
    alignment_receiver, branch_dof_scaled, dof_basis, interference_basis, segment_transmitter,
    to_usize, DofTuple, NetworkDims,
};
use crate::region::{allocation_search, TreeAllocation};

/// Default relative singular-value tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Extra channel draws allowed after a degenerate one.
pub const MAX_RESAMPLES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub root: usize,
    pub length: u32,
    /// Transmitter of each segment, `length + 1` entries.
    pub segments: Vec<usize>,
    /// Receiver of each alignment event, `length` entries.
    pub alignments: Vec<usize>,
    pub start_null: usize,
    pub end_null: usize,
}

fn cross_receivers(tx: usize) -> impl Iterator<Item = usize> {
    (1..=3).filter(move |&r| r != tx)
}

pub fn build_chain(root: usize, length: u32) -> ChainSpec {
    assert!(length >= 1, "tree length must be positive");
    let segments: Vec<usize> = (0..=length as usize)
        .map(|k| segment_transmitter(root, k))
        .collect();
    let alignments: Vec<usize> = (0..length as usize)
        .map(|k| alignment_receiver(root, k))
        .collect();
    let start_null = cross_receivers(segments[0])
        .find(|&r| r != alignments[0])
        .expect("two cross receivers");
    let last = *segments.last().expect("non-empty");
    let end_null = cross_receivers(last)
        .find(|&r| r != *alignments.last().expect("non-empty"))
        .expect("two cross receivers");
    ChainSpec {
        root,
        length,
        segments,
        alignments,
        start_null,
        end_null,
    }
}

impl ChainSpec {
    pub fn dof_counts(&self) -> [u32; 3] {
        let mut c = [0; 3];
        self.segments.iter().for_each(|&t| c[t - 1] += 1);
        c
    }

    pub fn alignment_counts(&self) -> [u32; 3] {
        let mut c = [0; 3];
        self.alignments.iter().for_each(|&r| c[r - 1] += 1);
        c
    }
}

/// Channel matrices `H[rx][tx]`, each `n_int × m_int`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub seed: u64,
    pub m_int: usize,
    pub n_int: usize,
    h: Vec<CMatrix>,
}

impl ChannelSet {
    /// Channel from transmitter `tx` to receiver `rx` (both 1-based).
    pub fn get(&self, rx: usize, tx: usize) -> &CMatrix {
        &self.h[(rx - 1) * 3 + (tx - 1)]
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.h
    }
}

/// Draw i.i.d. complex Gaussian channels; receiver-major, then transmitter,
/// then row-major entries.
pub fn sample_channels(dims: &NetworkDims, seed: u64) -> ChannelSet {
    let (m, n) = (to_usize(dims.m_int()), to_usize(dims.n_int()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = (0..9).map(|_| gaussian_matrix(&mut rng, n, m)).collect();
    ChannelSet {
        seed,
        m_int: m,
        n_int: n,
        h,
    }
}

/// The stacked chain system: start null, one block per alignment event,
/// end null.
pub fn chain_system(chain: &ChainSpec, channels: &ChannelSet) -> CMatrix {
    let (m, n) = (channels.m_int, channels.n_int);
    let l = chain.length as usize;
    let mut a = CMatrix::zeros((l + 2) * n, (l + 1) * m);
    let seg = &chain.segments;
    a.view_mut((0, 0), (n, m))
        .copy_from(channels.get(chain.start_null, seg[0]));
    for (k, &rx) in chain.alignments.iter().enumerate() {
        let row = (k + 1) * n;
        a.view_mut((row, k * m), (n, m))
            .copy_from(channels.get(rx, seg[k]));
        a.view_mut((row, (k + 1) * m), (n, m))
            .copy_from(&(-channels.get(rx, seg[k + 1])));
    }
    a.view_mut(((l + 1) * n, l * m), (n, m))
        .copy_from(channels.get(chain.end_null, seg[l]));
    a
}

/// Orthonormal basis of the chain's null space; each column is one branch.
/// Fails if the dimension differs from `(L+1) M - (L+2) N`.
pub fn chain_nullspace(chain: &ChainSpec, channels: &ChannelSet, tol: f64) -> Result<CMatrix> {
    let basis = null_space(&chain_system(chain, channels), tol);
    let l = chain.length as i64;
    let predicted = ((l + 1) * channels.m_int as i64 - (l + 2) * channels.n_int as i64).max(0) as usize;
    if basis.ncols() != predicted {
        return Err(DofError::DegenerateChannels {
            expected: predicted,
            found: basis.ncols(),
        });
    }
    Ok(basis)
}

/// Where a precoder column came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnTag {
    pub root: usize,
    pub branch: usize,
    pub segment: usize,
}

/// Per-transmitter precoders with unit-norm columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub v: [CMatrix; 3],
    pub provenance: [Vec<ColumnTag>; 3],
}

impl PrecoderSet {
    pub fn column_counts(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| self.v[i].ncols())
    }
}

pub fn build_precoders(
    dims: &NetworkDims,
    allocation: &TreeAllocation,
    channels: &ChannelSet,
    tol: f64,
) -> Result<PrecoderSet> {
    let m = to_usize(dims.m_int());
    let mut cols: [Vec<DVector<Complex64>>; 3] = Default::default();
    let mut provenance: [Vec<ColumnTag>; 3] = Default::default();
    for entry in &allocation.entries {
        let chain = build_chain(entry.root, entry.length);
        let basis = chain_nullspace(&chain, channels, tol)?;
        let wanted = to_usize(entry.branches);
        if basis.ncols() < wanted {
            return Err(DofError::InsufficientBranches {
                root: entry.root,
                requested: wanted,
                available: basis.ncols(),
            });
        }
        for branch in 0..wanted {
            let v = basis.column(branch);
            for (k, &tx) in chain.segments.iter().enumerate() {
                let block: DVector<Complex64> = v.rows(k * m, m).into_owned();
                let norm = block.norm();
                let block = if norm > 0.0 { block / Complex64::new(norm, 0.0) } else { block };
                cols[tx - 1].push(block);
                provenance[tx - 1].push(ColumnTag {
                    root: entry.root,
                    branch,
                    segment: k,
                });
            }
        }
    }
    let v = [0, 1, 2].map(|i| {
        if cols[i].is_empty() {
            CMatrix::zeros(m, 0)
        } else {
            CMatrix::from_columns(&cols[i])
        }
    });
    Ok(PrecoderSet { v, provenance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverCheck {
    pub receiver: usize,
    pub signal_rank: usize,
    pub interference_rank: usize,
    pub joint_rank: usize,
    pub expected_signal: usize,
    pub expected_interference: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Seed of the channel draw actually used.
    pub seed: u64,
    /// Degenerate draws discarded before this one.
    pub resamples: u32,
    pub receivers: Vec<ReceiverCheck>,
    pub pass: bool,
    pub note: Option<String>,
}

fn hcat(blocks: &[CMatrix], rows: usize) -> CMatrix {
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, total);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Rank with threshold `tol * sigma_max * sqrt(rows * cols)`.
fn area_rank(a: &CMatrix, tol: f64) -> usize {
    let area = (a.nrows() * a.ncols()) as f64;
    rank_with(a, |top| tol * top * area.sqrt())
}

/// Rank accounting at every receiver for one channel draw.
pub fn verify_receivers(
    dims: &NetworkDims,
    allocation: &TreeAllocation,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    tol: f64,
) -> TrialRecord {
    let n = to_usize(dims.n_int());
    let want_dof = allocation.induced_dof_scaled();
    let want_int = allocation.induced_interference_scaled();
    let receivers: Vec<ReceiverCheck> = (1..=3)
        .map(|j| {
            let signal = channels.get(j, j) * &precoders.v[j - 1];
            let interferers: Vec<CMatrix> = (1..=3)
                .filter(|&i| i != j)
                .map(|i| channels.get(j, i) * &precoders.v[i - 1])
                .collect();
            let interference = hcat(&interferers, n);
            let joint = hcat(&[signal.clone(), interference.clone()], n);
            let signal_rank = area_rank(&signal, tol);
            let interference_rank = area_rank(&interference, tol);
            let joint_rank = area_rank(&joint, tol);
            let expected_signal = to_usize(want_dof[j - 1]);
            let expected_interference = to_usize(want_int[j - 1]);
            let pass = signal_rank == expected_signal
                && interference_rank == expected_interference
                && joint_rank == signal_rank + interference_rank;
            ReceiverCheck {
                receiver: j,
                signal_rank,
                interference_rank,
                joint_rank,
                expected_signal,
                expected_interference,
                pass,
            }
        })
        .collect();
    let pass = receivers.iter().all(|r| r.pass);
    TrialRecord {
        seed: channels.seed,
        resamples: 0,
        receivers,
        pass,
        note: None,
    }
}

/// Seed of the `attempt`-th redraw for a trial seed.
pub fn resample_seed(seed: u64, attempt: u32) -> u64 {
    seed.wrapping_add((attempt as u64) << 40)
}

/// Build and check precoders for one trial, redrawing degenerate channels
/// up to [`MAX_RESAMPLES`] times.
pub fn run_trial(dims: &NetworkDims, allocation: &TreeAllocation, seed: u64, tol: f64) -> TrialRecord {
    let mut last_err = None;
    for attempt in 0..=MAX_RESAMPLES {
        let channels = sample_channels(dims, resample_seed(seed, attempt));
        match build_precoders(dims, allocation, &channels, tol) {
            Ok(precoders) => {
                let mut rec = verify_receivers(dims, allocation, &precoders, &channels, tol);
                rec.resamples = attempt;
                return rec;
            }
            Err(e @ DofError::DegenerateChannels { .. }) => last_err = Some(e),
            Err(e) => {
                last_err = Some(e);
                break;
            }
        }
    }
    TrialRecord {
        seed,
        resamples: MAX_RESAMPLES,
        receivers: Vec::new(),
        pass: false,
        note: last_err.map(|e| e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub dims: NetworkDims,
    pub allocation: TreeAllocation,
    pub trials: usize,
    pub tolerance: f64,
    pub records: Vec<TrialRecord>,
    pub overall_pass: bool,
    pub failure_notes: Vec<String>,
}

pub fn verify_allocation(
    dims: &NetworkDims,
    allocation: &TreeAllocation,
    trials: usize,
    base_seed: u64,
    tol: f64,
) -> VerificationReport {
    let records: Vec<TrialRecord> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(dims, allocation, base_seed.wrapping_add(t), tol))
        .collect();
    let failure_notes = records
        .iter()
        .filter(|r| !r.pass)
        .map(|r| match &r.note {
            Some(note) => format!("seed {}: {note}", r.seed),
            None => {
                let bad: Vec<String> = r
                    .receivers
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| {
                        format!(
                            "rx{} signal {}/{} interference {}/{} joint {}",
                            c.receiver,
                            c.signal_rank,
                            c.expected_signal,
                            c.interference_rank,
                            c.expected_interference,
                            c.joint_rank
                        )
                    })
                    .collect();
                format!("seed {}: {}", r.seed, bad.join("; "))
            }
        })
        .collect();
    VerificationReport {
        dims: *dims,
        allocation: allocation.clone(),
        trials,
        tolerance: tol,
        overall_pass: records.iter().all(|r| r.pass),
        records,
        failure_notes,
    }
}

/// Search an allocation for `target` and verify it on `trials` channel
/// draws with seeds `base_seed ..`.
pub fn verify_point(
    dims: &NetworkDims,
    target: &DofTuple,
    trials: usize,
    base_seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    let allocation = allocation_search(dims, target)?
        .ok_or_else(|| DofError::InfeasibleTarget(target.to_string()))?;
    Ok(verify_allocation(dims, &allocation, trials, base_seed, tol))
}

/// Predicted branch count of a chain in the scaled system.
pub fn predicted_branches(dims: &NetworkDims, length: u32) -> usize {
    to_usize(branch_dof_scaled(dims, length))
}

/// True when the chain's segment and alignment counts agree with the
/// closed-form basis triples.
pub fn chain_matches_bases(chain: &ChainSpec) -> bool {
    chain.dof_counts() == dof_basis(chain.root, chain.length)
        && chain.alignment_counts() == interference_basis(chain.root, chain.length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::TreeEntry;

    #[test]
    fn chain_examples() {
        let c = build_chain(1, 4);
        assert_eq!(c.segments, vec![1, 2, 3, 1, 2]);
        assert_eq!(c.alignments, vec![3, 1, 2, 3]);
        assert_eq!((c.start_null, c.end_null), (2, 1));
        let c = build_chain(1, 1);
        assert_eq!(c.segments, vec![1, 2]);
        assert_eq!(c.alignments, vec![3]);
        assert_eq!((c.start_null, c.end_null), (2, 1));
        let c = build_chain(2, 4);
        assert_eq!(c.dof_counts(), [1, 2, 2]);
        assert_eq!(c.alignment_counts(), [2, 1, 1]);
    }

    #[test]
    fn chain_invariants_hold() {
        for root in 1..=3 {
            for l in 1..=12 {
                let c = build_chain(root, l);
                assert!(chain_matches_bases(&c));
                for k in 1..l as usize {
                    let mut cross: Vec<usize> = cross_receivers(c.segments[k]).collect();
                    let mut ev = vec![c.alignments[k - 1], c.alignments[k]];
                    cross.sort();
                    ev.sort();
                    assert_eq!(cross, ev);
                }
                assert!(c.start_null != c.segments[0] && c.start_null != c.alignments[0]);
                let last = *c.segments.last().unwrap();
                assert!(c.end_null != last && c.end_null != *c.alignments.last().unwrap());
            }
        }
    }

    #[test]
    fn channels_are_deterministic() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let a = sample_channels(&dims, 5);
        assert_eq!(a, sample_channels(&dims, 5));
        assert_ne!(a.matrices(), sample_channels(&dims, 6).matrices());
        assert_eq!(a.matrices().len(), 9);
        assert!(a.matrices().iter().all(|h| h.shape() == (8, 10)));
    }

    #[test]
    fn nullspace_dimensions() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let ch = sample_channels(&dims, 1);
        assert_eq!(chain_nullspace(&build_chain(1, 4), &ch, DEFAULT_TOL).unwrap().ncols(), 2);
        let dims = NetworkDims::from_ints(48, 36).unwrap();
        let ch = sample_channels(&dims, 1);
        assert_eq!(chain_nullspace(&build_chain(3, 3), &ch, DEFAULT_TOL).unwrap().ncols(), 12);
    }

    #[test]
    fn witnesses_vanish() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let ch = sample_channels(&dims, 11);
        let chain = build_chain(2, 4);
        let basis = chain_nullspace(&chain, &ch, DEFAULT_TOL).unwrap();
        let m = ch.m_int;
        let sigma_max = ch
            .matrices()
            .iter()
            .map(|h| crate::linalg::singular_values(h)[0])
            .fold(0.0, f64::max);
        for b in 0..basis.ncols() {
            let col = basis.column(b);
            let seg = |k: usize| col.rows(k * m, m).into_owned();
            for (k, &rx) in chain.alignments.iter().enumerate() {
                let (vk, vn) = (seg(k), seg(k + 1));
                let r = ch.get(rx, chain.segments[k]) * &vk - ch.get(rx, chain.segments[k + 1]) * &vn;
                assert!(r.norm() <= DEFAULT_TOL * (vk.norm() + vn.norm()) * sigma_max);
            }
            let v0 = seg(0);
            let vl = seg(chain.length as usize);
            let bound = DEFAULT_TOL * (v0.norm() + vl.norm()) * sigma_max;
            assert!((ch.get(chain.start_null, chain.segments[0]) * &v0).norm() <= bound);
            assert!((ch.get(chain.end_null, *chain.segments.last().unwrap()) * &vl).norm() <= bound);
        }
    }

    #[test]
    fn small_allocation_verifies() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let alloc = TreeAllocation::new(vec![
            TreeEntry { root: 1, length: 4, branches: 1 },
            TreeEntry { root: 2, length: 4, branches: 1 },
        ]);
        let ch = sample_channels(&dims, 2);
        let p = build_precoders(&dims, &alloc, &ch, DEFAULT_TOL).unwrap();
        assert_eq!(p.column_counts(), [3, 4, 3]);
        for v in &p.v {
            for c in v.column_iter() {
                assert!((c.norm() - 1.0).abs() < 1e-12);
            }
        }
        let rec = verify_receivers(&dims, &alloc, &p, &ch, DEFAULT_TOL);
        assert!(rec.pass, "{rec:?}");
        let int: Vec<usize> = rec.receivers.iter().map(|r| r.interference_rank).collect();
        let joint: Vec<usize> = rec.receivers.iter().map(|r| r.joint_rank).collect();
        assert_eq!(int, vec![3, 2, 3]);
        assert_eq!(joint, vec![6, 6, 6]);
    }

    #[test]
    fn longer_tree_point_verifies() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let report = verify_point(&dims, &DofTuple::from_ints([4, 4, 4]), 3, 0, DEFAULT_TOL).unwrap();
        assert_eq!(
            report.allocation.entries,
            vec![TreeEntry { root: 1, length: 5, branches: 2 }]
        );
        assert!(report.overall_pass, "{:?}", report.failure_notes);
    }

    #[test]
    fn empty_allocation() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let ch = sample_channels(&dims, 0);
        let p = build_precoders(&dims, &TreeAllocation::default(), &ch, DEFAULT_TOL).unwrap();
        assert_eq!(p.column_counts(), [0, 0, 0]);
        let report = verify_point(&dims, &DofTuple::zero(), 1, 0, DEFAULT_TOL).unwrap();
        assert!(report.overall_pass);
    }

    #[test]
    fn requesting_too_many_branches_fails() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let alloc = TreeAllocation::new(vec![TreeEntry { root: 1, length: 4, branches: 3 }]);
        let ch = sample_channels(&dims, 0);
        assert!(matches!(
            build_precoders(&dims, &alloc, &ch, DEFAULT_TOL),
            Err(DofError::InsufficientBranches { root: 1, requested: 3, available: 2 })
        ));
    }

    #[test]
    fn infeasible_point_errors() {
        let dims = NetworkDims::from_ints(45, 36).unwrap();
        assert!(matches!(
            verify_point(&dims, &DofTuple::from_ints([30, 30, 30]), 1, 0, DEFAULT_TOL),
            Err(DofError::InfeasibleTarget(_))
        ));
    }

    #[test]
    fn reports_are_reproducible() {
        let dims = NetworkDims::from_ints(10, 8).unwrap();
        let t = DofTuple::from_ints([3, 4, 3]);
        let a = verify_point(&dims, &t, 3, 9, DEFAULT_TOL).unwrap();
        let b = verify_point(&dims, &t, 3, 9, DEFAULT_TOL).unwrap();
        assert_eq!(a, b);
        assert!(a.overall_pass);
    }
}
