//! Achievable DoF regions.
//!
//! For `M = N` the region is the polytope `{d >= 0 : d_i + d_j <= M}`. For
//! `M > N` it is generated by tree allocations: each transmitter roots at
//! most one alignment tree, a tree of length `L` carries up to `d_o(L)`
//! branches, and every receiver must fit its signal plus aligned
//! interference into `N` dimensions.
//!
//! Allocation arithmetic is done on integers in the scaled system
//! (`NetworkDims::scale`).

use std::collections::BTreeMap;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{DofError, Result};
use crate::model::{
    branch_dof_scaled, classify, dof_basis, interference_basis, max_user_dof, min_tree_length,
    DofTuple, InterferenceTuple, LossClass, NetworkDims,
};
use crate::rational::{ceil_nonneg, format_rational, int, serde_text, Rational};

/// One tree of an allocation. `branches` is counted in the scaled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TreeEntry {
    pub root: usize,
    pub length: u32,
    pub branches: u64,
}

impl TreeEntry {
    fn dof(&self) -> [u64; 3] {
        dof_basis(self.root, self.length).map(|c| c as u64 * self.branches)
    }

    fn interference(&self) -> [u64; 3] {
        interference_basis(self.root, self.length).map(|c| c as u64 * self.branches)
    }
}

/// A set of alignment trees, at most one per root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeAllocation {
    pub entries: Vec<TreeEntry>,
}

fn add3(a: [u64; 3], b: [u64; 3]) -> [u64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

impl TreeAllocation {
    pub fn new(mut entries: Vec<TreeEntry>) -> Self {
        entries.retain(|e| e.branches > 0);
        entries.sort();
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_branches(&self) -> u64 {
        self.entries.iter().map(|e| e.branches).sum()
    }

    pub fn induced_dof_scaled(&self) -> [u64; 3] {
        self.entries.iter().fold([0; 3], |acc, e| add3(acc, e.dof()))
    }

    pub fn induced_interference_scaled(&self) -> [u64; 3] {
        self.entries
            .iter()
            .fold([0; 3], |acc, e| add3(acc, e.interference()))
    }

    /// Signal plus interference dimensions per receiver, scaled.
    pub fn occupancy_scaled(&self) -> [u64; 3] {
        add3(self.induced_dof_scaled(), self.induced_interference_scaled())
    }

    pub fn induced_dof(&self, dims: &NetworkDims) -> DofTuple {
        DofTuple(self.induced_dof_scaled().map(|v| dims.unscaled(v)))
    }

    pub fn induced_interference(&self, dims: &NetworkDims) -> InterferenceTuple {
        InterferenceTuple(self.induced_interference_scaled().map(|v| dims.unscaled(v)))
    }

    /// Check root uniqueness, branch caps and the receiver space constraint.
    pub fn validate(&self, dims: &NetworkDims) -> Result<()> {
        let mut seen = [false; 3];
        for e in &self.entries {
            if !(1..=3).contains(&e.root) || e.length == 0 {
                return Err(DofError::InvalidTarget(format!("malformed tree entry {e:?}")));
            }
            if std::mem::replace(&mut seen[e.root - 1], true) {
                return Err(DofError::InvalidTarget(format!(
                    "transmitter {} roots more than one tree",
                    e.root
                )));
            }
            let cap = branch_dof_scaled(dims, e.length);
            if e.branches > cap {
                return Err(DofError::InsufficientBranches {
                    root: e.root,
                    requested: e.branches as usize,
                    available: cap as usize,
                });
            }
        }
        let occ = self.occupancy_scaled();
        if let Some(rx) = (0..3).find(|&j| occ[j] > dims.n_int()) {
            return Err(DofError::InvalidTarget(format!(
                "receiver {} needs {} dimensions, has {}",
                rx + 1,
                occ[rx],
                dims.n_int()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Certification {
    Formula,
    Allocation,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub dof: DofTuple,
    pub allocation: Option<TreeAllocation>,
    pub certified: Certification,
}

pub fn equal_antenna_member(m: Rational, d: &DofTuple) -> bool {
    let [d1, d2, d3] = d.0;
    d1 + d2 <= m && d1 + d3 <= m && d2 + d3 <= m
}

/// Vertices of `{d >= 0 : d_i + d_j <= M}`, lexicographically sorted.
pub fn equal_antenna_vertices(m: Rational) -> Vec<DofTuple> {
    // facets a.d <= b: three pair sums, three sign constraints, three
    // (redundant) per-user caps
    let mut facets: Vec<([i64; 3], Rational)> = vec![
        ([1, 1, 0], m),
        ([1, 0, 1], m),
        ([0, 1, 1], m),
    ];
    for i in 0..3 {
        let mut a = [0; 3];
        a[i] = -1;
        facets.push((a, Rational::zero()));
        a[i] = 1;
        facets.push((a, m));
    }
    let feasible = |p: &[Rational; 3]| {
        facets.iter().all(|(a, b)| {
            let lhs: Rational = (0..3).map(|k| int(a[k]) * p[k]).sum();
            lhs <= *b
        })
    };
    let mut out = Vec::new();
    for i in 0..facets.len() {
        for j in i + 1..facets.len() {
            for k in j + 1..facets.len() {
                let rows = [facets[i], facets[j], facets[k]];
                if let Some(p) = solve3(&rows) {
                    if feasible(&p) {
                        out.push(DofTuple(p));
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Cramer's rule on a 3x3 integer system; `None` when singular.
fn solve3(rows: &[([i64; 3], Rational); 3]) -> Option<[Rational; 3]> {
    let det = |c: [[Rational; 3]; 3]| {
        c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
            - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
            + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
    };
    let a: [[Rational; 3]; 3] = rows.map(|(r, _)| r.map(int));
    let d = det(a);
    if d.is_zero() {
        return None;
    }
    let mut x = [Rational::zero(); 3];
    for (col, slot) in x.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][col] = rows[row].1;
        }
        *slot = det(m) / d;
    }
    Some(x)
}

/// `d_i + d_j <= max(M, N)` and `d_i <= min(M, N)`; a cheap necessary
/// condition used to drop impossible targets.
pub fn pairwise_outer_bound(dims: &NetworkDims, d: &DofTuple) -> bool {
    let hi = dims.m().max(dims.n());
    let lo = dims.m().min(dims.n());
    let [d1, d2, d3] = d.0;
    d.0.iter().all(|v| *v <= lo) && d1 + d2 <= hi && d1 + d3 <= hi && d2 + d3 <= hi
}

/// Bounds of the allocation enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    /// Tree lengths `L_min ..= L_min + extra_lengths` are considered.
    pub extra_lengths: u32,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { extra_lengths: 1 }
    }
}

fn require_trees(dims: &NetworkDims) -> Result<u32> {
    if dims.is_square() {
        return Err(DofError::InvalidDims(
            "tree allocations need M > N; use the equal-antenna region".into(),
        ));
    }
    min_tree_length(dims)
}

/// Visit every allocation satisfying the branch caps and the receiver space
/// constraint. Enumeration order is deterministic.
pub fn for_each_allocation<F>(dims: &NetworkDims, limits: SearchLimits, mut visit: F) -> Result<()>
where
    F: FnMut(&[Option<TreeEntry>; 3], [u64; 3], [u64; 3]),
{
    let l_min = require_trees(dims)?;
    let lengths: Vec<(u32, u64)> = (l_min..=l_min + limits.extra_lengths)
        .map(|l| (l, branch_dof_scaled(dims, l)))
        .filter(|(_, cap)| *cap > 0)
        .collect();
    let mut slots = [None; 3];
    walk(dims.n_int(), &lengths, 0, &mut slots, [0; 3], [0; 3], &mut visit);
    Ok(())
}

fn walk<F>(
    n: u64,
    lengths: &[(u32, u64)],
    root_idx: usize,
    slots: &mut [Option<TreeEntry>; 3],
    dof: [u64; 3],
    interference: [u64; 3],
    visit: &mut F,
) where
    F: FnMut(&[Option<TreeEntry>; 3], [u64; 3], [u64; 3]),
{
    if root_idx == 3 {
        visit(slots, dof, interference);
        return;
    }
    slots[root_idx] = None;
    walk(n, lengths, root_idx + 1, slots, dof, interference, visit);
    for &(length, cap) in lengths {
        let per_dof = dof_basis(root_idx + 1, length).map(u64::from);
        let per_int = interference_basis(root_idx + 1, length).map(u64::from);
        for b in 1..=cap {
            let d = [0, 1, 2].map(|j| dof[j] + b * per_dof[j]);
            let i = [0, 1, 2].map(|j| interference[j] + b * per_int[j]);
            // occupancy only grows with b
            if (0..3).any(|j| d[j] + i[j] > n) {
                break;
            }
            slots[root_idx] = Some(TreeEntry {
                root: root_idx + 1,
                length,
                branches: b,
            });
            walk(n, lengths, root_idx + 1, slots, d, i, visit);
        }
    }
    slots[root_idx] = None;
}

fn collect(slots: &[Option<TreeEntry>; 3]) -> TreeAllocation {
    TreeAllocation::new(slots.iter().flatten().copied().collect())
}

type PreferenceKey = (u64, usize, u64, Vec<TreeEntry>);
type Ranked = (PreferenceKey, TreeAllocation);

/// Preference among allocations reaching the same goal: least total DoF,
/// then fewest trees, fewest branches, and lexicographic entries.
fn preference_key(dof: [u64; 3], alloc: &TreeAllocation) -> PreferenceKey {
    (
        dof.iter().sum(),
        alloc.entries.len(),
        alloc.total_branches(),
        alloc.entries.clone(),
    )
}

/// Find a tree allocation whose DoF dominates `target` componentwise, or
/// `None` when the bounded enumeration has none.
pub fn allocation_search(dims: &NetworkDims, target: &DofTuple) -> Result<Option<TreeAllocation>> {
    allocation_search_with(dims, target, SearchLimits::default())
}

pub fn allocation_search_with(
    dims: &NetworkDims,
    target: &DofTuple,
    limits: SearchLimits,
) -> Result<Option<TreeAllocation>> {
    require_trees(dims)?;
    if !target.is_nonnegative() {
        return Err(DofError::InvalidTarget(format!("{target} has a negative component")));
    }
    if !pairwise_outer_bound(dims, target) {
        return Ok(None);
    }
    let need = target.0.map(|v| ceil_nonneg(&dims.scaled(v)));
    let mut best: Option<Ranked> = None;
    for_each_allocation(dims, limits, |slots, dof, _| {
        if (0..3).all(|j| dof[j] >= need[j]) {
            let alloc = collect(slots);
            let key = preference_key(dof, &alloc);
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, alloc));
            }
        }
    })?;
    Ok(best.map(|(_, a)| a))
}

/// Pareto-maximal DoF triples reachable by tree allocations, in
/// lexicographic order, each with a witnessing allocation.
pub fn achievable_frontier(dims: &NetworkDims) -> Result<Vec<RegionPoint>> {
    achievable_frontier_with(dims, SearchLimits::default())
}

pub fn achievable_frontier_with(dims: &NetworkDims, limits: SearchLimits) -> Result<Vec<RegionPoint>> {
    let mut witnesses: BTreeMap<[u64; 3], Ranked> =
        BTreeMap::new();
    for_each_allocation(dims, limits, |slots, dof, _| {
        let alloc = collect(slots);
        let key = preference_key(dof, &alloc);
        match witnesses.get(&dof) {
            Some((k, _)) if *k <= key => {}
            _ => {
                witnesses.insert(dof, (key, alloc));
            }
        }
    })?;
    let points: Vec<[u64; 3]> = witnesses.keys().copied().collect();
    let maximal = pareto_maximal(&points);
    Ok(maximal
        .into_iter()
        .map(|p| RegionPoint {
            dof: DofTuple(p.map(|v| dims.unscaled(v))),
            allocation: Some(witnesses[&p].1.clone()),
            certified: Certification::Allocation,
        })
        .collect())
}

fn pareto_maximal(points: &[[u64; 3]]) -> Vec<[u64; 3]> {
    // descending sum order: a point can only be dominated by one seen earlier
    let mut order: Vec<[u64; 3]> = points.to_vec();
    order.sort_by(|a, b| {
        let (sa, sb): (u64, u64) = (a.iter().sum(), b.iter().sum());
        sb.cmp(&sa).then(a.cmp(b))
    });
    let mut kept: Vec<[u64; 3]> = Vec::new();
    for p in order {
        let dominated = kept.iter().any(|q| (0..3).all(|j| q[j] >= p[j]));
        if !dominated {
            kept.push(p);
        }
    }
    kept.sort();
    kept
}

/// Largest sum DoF over the allocation enumeration, in normalized units.
pub fn max_sum_dof(dims: &NetworkDims) -> Result<Rational> {
    max_sum_dof_with(dims, SearchLimits::default())
}

pub fn max_sum_dof_with(dims: &NetworkDims, limits: SearchLimits) -> Result<Rational> {
    let mut best = 0u64;
    for_each_allocation(dims, limits, |_, dof, _| {
        best = best.max(dof.iter().sum());
    })?;
    Ok(dims.unscaled(best))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "serde_text")]
    pub gamma: Rational,
    pub length: Option<u32>,
    pub loss_class: Option<LossClass>,
    pub max_sum_dof: Option<String>,
    pub max_user_dof: Option<String>,
    pub skipped: Option<String>,
}

/// Regime map over antenna ratios with `N` fixed; rows that fail are kept
/// and marked skipped.
pub fn sweep(n_fixed: u64, gammas: &[Rational]) -> Vec<SweepRow> {
    sweep_with(n_fixed, gammas, SearchLimits::default())
}

pub fn sweep_with(n_fixed: u64, gammas: &[Rational], limits: SearchLimits) -> Vec<SweepRow> {
    gammas
        .iter()
        .map(|&gamma| {
            let row = |dims: &NetworkDims| -> Result<(u32, LossClass, Rational, Rational)> {
                let regime = classify(dims)?;
                let length = min_tree_length(dims)?;
                Ok((
                    length,
                    regime.loss_class,
                    max_sum_dof_with(dims, limits)?,
                    max_user_dof(dims, length)?,
                ))
            };
            let n = int(n_fixed as i64);
            match NetworkDims::new(gamma * n, n).and_then(|d| row(&d)) {
                Ok((length, class, sum, user)) => SweepRow {
                    gamma,
                    length: Some(length),
                    loss_class: Some(class),
                    max_sum_dof: Some(format_rational(&sum)),
                    max_user_dof: Some(format_rational(&user)),
                    skipped: None,
                },
                Err(e) => SweepRow {
                    gamma,
                    length: None,
                    loss_class: None,
                    max_sum_dof: None,
                    max_user_dof: None,
                    skipped: Some(e.to_string()),
                },
            }
        })
        .collect()
}
