//! Exact domain types and closed-form quantities for the 3-user M×N
//! interference channel: branch DoF of an alignment tree, the regime a
//! given antenna ratio falls into, per-tree basis counts and the
//! redistribution equations.
//!
//! Users, transmitters and receivers are numbered 1..=3. Every quantity in
//! this module is an exact [`Rational`].

use std::fmt;

use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DofError, Result};
use crate::rational::{common_scale, format_rational, int, ratio, serde_text, serde_triple, Rational};

/// Three non-negative integer counts indexed by user (transmitter or receiver).
pub type IntTriple = [u32; 3];

/// Antenna counts, kept both as exact rationals and as the smallest integer
/// realization `(m_int, n_int) = scale * (m, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDims {
    #[serde(with = "serde_text")]
    m: Rational,
    #[serde(with = "serde_text")]
    n: Rational,
    scale: u64,
    m_int: u64,
    n_int: u64,
}

impl NetworkDims {
    pub fn new(m: Rational, n: Rational) -> Result<Self> {
        if n < int(1) {
            return Err(DofError::InvalidDims(format!(
                "N = {} must be at least 1",
                format_rational(&n)
            )));
        }
        if m < n {
            return Err(DofError::InvalidDims(format!(
                "M = {} < N = {}; swap transmit and receive roles before calling",
                format_rational(&m),
                format_rational(&n)
            )));
        }
        if m != n && m >= n * int(2) {
            return Err(DofError::RatioOutOfScope(format_rational(&(m / n))));
        }
        let scale = common_scale(&[m, n]);
        let m_int = (m * int(scale)).to_integer();
        let n_int = (n * int(scale)).to_integer();
        Ok(Self {
            m,
            n,
            scale: scale as u64,
            m_int: m_int as u64,
            n_int: n_int as u64,
        })
    }

    pub fn from_ints(m: u64, n: u64) -> Result<Self> {
        Self::new(int(m as i64), int(n as i64))
    }

    pub fn m(&self) -> Rational {
        self.m
    }

    pub fn n(&self) -> Rational {
        self.n
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    pub fn m_int(&self) -> u64 {
        self.m_int
    }

    pub fn n_int(&self) -> u64 {
        self.n_int
    }

    pub fn gamma(&self) -> Rational {
        self.m / self.n
    }

    pub fn is_square(&self) -> bool {
        self.m == self.n
    }

    /// Express an unscaled quantity in the integer-scaled system.
    pub fn scaled(&self, value: Rational) -> Rational {
        value * int(self.scale as i64)
    }

    /// Convert an integer-scaled quantity back to normalized units.
    pub fn unscaled(&self, value: u64) -> Rational {
        ratio(value as i64, self.scale as i64)
    }
}

impl fmt::Display for NetworkDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "M={} N={} (scaled {}x{} by {})",
            format_rational(&self.m),
            format_rational(&self.n),
            self.m_int,
            self.n_int,
            self.scale
        )
    }
}

pub fn make_dims(m: Rational, n: Rational) -> Result<NetworkDims> {
    NetworkDims::new(m, n)
}

/// Per-user DoF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DofTuple(#[serde(with = "serde_triple")] pub [Rational; 3]);

/// Interference dimensions seen at each receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterferenceTuple(#[serde(with = "serde_triple")] pub [Rational; 3]);

impl DofTuple {
    pub fn new(d1: Rational, d2: Rational, d3: Rational) -> Self {
        Self([d1, d2, d3])
    }

    pub fn from_ints(d: [i64; 3]) -> Self {
        Self(d.map(int))
    }

    pub fn zero() -> Self {
        Self([Rational::zero(); 3])
    }

    pub fn sum(&self) -> Rational {
        self.0.iter().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|d| *d >= Rational::zero())
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &DofTuple) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a >= b)
    }
}

impl fmt::Display for DofTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.0.map(|v| format_rational(&v));
        write!(f, "({a}, {b}, {c})")
    }
}

/// Redistribution factors `a_i`; `a_i` weights the tree rooted at transmitter `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RedistributionFactors(#[serde(with = "serde_triple")] pub [Rational; 3]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SubInterval {
    /// `M/N >= (2L+3)/(2L+1)`
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LossClass {
    LosslessI,
    LosslessIi,
    LossySignal,
    LossyInterference,
    EqualAntennas,
}

impl LossClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossClass::LosslessI => "LOSSLESS_I",
            LossClass::LosslessIi => "LOSSLESS_II",
            LossClass::LossySignal => "LOSSY_SIGNAL",
            LossClass::LossyInterference => "LOSSY_INTERFERENCE",
            LossClass::EqualAntennas => "EQUAL_ANTENNAS",
        }
    }

    pub fn is_lossless(&self) -> bool {
        matches!(self, LossClass::LosslessI | LossClass::LosslessIi)
    }
}

impl fmt::Display for LossClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tree-related parameters of a regime with `M > N`. `d_o`, `d_max` and
/// `i_min` are in normalized units (not scaled).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRegime {
    pub length: u32,
    #[serde(with = "serde_text")]
    pub window_lo: Rational,
    #[serde(with = "serde_text")]
    pub window_hi: Rational,
    pub sub_interval: SubInterval,
    #[serde(with = "serde_text")]
    pub d_o: Rational,
    #[serde(with = "serde_text")]
    pub delta: Rational,
    #[serde(with = "serde_text")]
    pub d_max: Rational,
    #[serde(with = "serde_text")]
    pub i_min: Rational,
    /// `3(L+1)/(L+2)`, carried verbatim; not used by any check.
    #[serde(with = "serde_text")]
    pub nominal_sum_bound: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regime {
    pub loss_class: LossClass,
    /// `None` for equal antenna counts.
    pub tree: Option<TreeRegime>,
}

/// Branch DoF `max(0, (L+1)M - (L+2)N)` of a tree of length `length`.
pub fn branch_dof(dims: &NetworkDims, length: u32) -> Rational {
    let l = length as i64;
    let d = int(l + 1) * dims.m() - int(l + 2) * dims.n();
    d.max(Rational::zero())
}

/// [`branch_dof`] in the integer-scaled system.
pub fn branch_dof_scaled(dims: &NetworkDims, length: u32) -> u64 {
    let l = length as i64;
    let d = (l + 1) * dims.m_int() as i64 - (l + 2) * dims.n_int() as i64;
    d.max(0) as u64
}

/// Smallest tree length with a strictly positive branch DoF.
pub fn min_tree_length(dims: &NetworkDims) -> Result<u32> {
    if dims.is_square() {
        return Err(DofError::InvalidDims(
            "equal antenna counts admit no alignment tree".into(),
        ));
    }
    // (L+1)M > (L+2)N  <=>  L > (2N - M) / (M - N), with 2N - M > 0 in scope.
    let threshold = (int(2) * dims.n() - dims.m()) / (dims.m() - dims.n());
    let length = threshold.floor().to_integer() + 1;
    Ok(length.max(1) as u32)
}

pub fn classify(dims: &NetworkDims) -> Result<Regime> {
    if dims.is_square() {
        return Ok(Regime {
            loss_class: LossClass::EqualAntennas,
            tree: None,
        });
    }
    let length = min_tree_length(dims)?;
    let l = length as i64;
    let gamma = dims.gamma();
    let sub_interval = if gamma >= ratio(2 * l + 3, 2 * l + 1) {
        SubInterval::Upper
    } else {
        SubInterval::Lower
    };
    let loss_class = match (length % 3, sub_interval) {
        (1, SubInterval::Upper) => LossClass::LosslessI,
        (1, SubInterval::Lower) => LossClass::LosslessIi,
        (2, _) => LossClass::LossySignal,
        _ => LossClass::LossyInterference,
    };
    let d_o = branch_dof(dims, length);
    let (dof_peak, interference_floor) = basis_extremes(length);
    Ok(Regime {
        loss_class,
        tree: Some(TreeRegime {
            length,
            window_lo: ratio(l + 2, l + 1),
            window_hi: ratio(l + 1, l),
            sub_interval,
            d_o,
            delta: dof_interference_ratio(length),
            d_max: int(dof_peak as i64) * d_o,
            i_min: int(interference_floor as i64) * d_o,
            nominal_sum_bound: ratio(3 * (l + 1), l + 2),
        }),
    })
}

fn check_root(root: usize) {
    assert!((1..=3).contains(&root), "user index {root} is not in 1..=3");
}

/// Transmitter carrying segment `k` of the tree rooted at `root`.
pub fn segment_transmitter(root: usize, k: usize) -> usize {
    check_root(root);
    (root - 1 + k) % 3 + 1
}

/// Receiver where alignment event `k` (between segments `k` and `k+1`)
/// takes place: the one receiver adjacent to neither segment's transmitter.
pub fn alignment_receiver(root: usize, k: usize) -> usize {
    check_root(root);
    (root + 1 + k) % 3 + 1
}

/// Number of segments the tree places on each transmitter.
pub fn dof_basis(root: usize, length: u32) -> IntTriple {
    let mut counts = [0u32; 3];
    for k in 0..=length as usize {
        counts[segment_transmitter(root, k) - 1] += 1;
    }
    counts
}

/// Number of alignment events the tree places at each receiver.
pub fn interference_basis(root: usize, length: u32) -> IntTriple {
    let mut counts = [0u32; 3];
    for k in 0..length as usize {
        counts[alignment_receiver(root, k) - 1] += 1;
    }
    counts
}

/// Largest per-user DoF-to-interference ratio over all roots; users that
/// see no interference from a tree are left out.
pub fn dof_interference_ratio(length: u32) -> Rational {
    (1..=3)
        .flat_map(|root| {
            let d = dof_basis(root, length);
            let i = interference_basis(root, length);
            (0..3)
                .filter(move |&u| i[u] > 0)
                .map(move |u| ratio(d[u] as i64, i[u] as i64))
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

/// `(max DoF basis component, min non-zero interference basis component)`
/// over all roots, in basis units.
pub fn basis_extremes(length: u32) -> (u32, u32) {
    let dof_peak = (1..=3)
        .flat_map(|r| dof_basis(r, length))
        .max()
        .unwrap_or(0);
    let interference_floor = (1..=3)
        .flat_map(|r| interference_basis(r, length))
        .filter(|&c| c > 0)
        .min()
        .unwrap_or(0);
    (dof_peak, interference_floor)
}

/// Per-user DoF cap `d_max N / (d_max + I_min)` in normalized units.
pub fn max_user_dof(dims: &NetworkDims, length: u32) -> Result<Rational> {
    if branch_dof(dims, length).is_zero() {
        return Err(DofError::DegenerateRegime(length));
    }
    let (d, i) = basis_extremes(length);
    Ok(int(d as i64) * dims.n() / int((d + i) as i64))
}

/// Closed-form DoF after redistributing branch weight `a` over the three
/// trees of length `length` (which must satisfy `length % 3 == 1`).
pub fn redistribute(
    dims: &NetworkDims,
    length: u32,
    a: &RedistributionFactors,
) -> Result<DofTuple> {
    if length % 3 != 1 {
        return Err(DofError::WrongRegime(length));
    }
    let bound = branch_dof(dims, length);
    for (index, value) in a.0.iter().enumerate() {
        if *value < Rational::zero() || *value > bound {
            return Err(DofError::FactorOutOfRange {
                index: index + 1,
                value: format_rational(value),
                bound: format_rational(&bound),
            });
        }
    }
    let l = length as i64;
    let hi = ratio(l + 2, 3);
    let lo = ratio(l - 1, 3);
    let [a1, a2, a3] = a.0;
    Ok(DofTuple([
        hi * a1 + lo * a2 + hi * a3,
        hi * a1 + hi * a2 + lo * a3,
        lo * a1 + hi * a2 + hi * a3,
    ]))
}

/// Root-to-factor matching for which [`redistribute`] equals
/// `sum_r a_r * dof_basis(sigma(r), L)`.
pub const REDISTRIBUTION_ROOTS: [usize; 3] = [1, 2, 3];

pub(crate) fn to_usize(value: u64) -> usize {
    value.to_usize().expect("dimension fits in usize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rational;
    use proptest::prelude::*;

    fn dims(m: &str, n: &str) -> NetworkDims {
        make_dims(parse_rational(m).unwrap(), parse_rational(n).unwrap()).unwrap()
    }

    #[test]
    fn make_dims_scales_minimally() {
        let d = dims("11.25", "9");
        assert_eq!((d.scale(), d.m_int(), d.n_int()), (4, 45, 36));
        let d = dims("3", "3");
        assert_eq!((d.scale(), d.m_int(), d.n_int()), (1, 3, 3));
        let d = dims("5", "4");
        assert_eq!((d.scale(), d.m_int(), d.n_int()), (1, 5, 4));
        assert_eq!(dims("11.25", "9").gamma(), ratio(5, 4));
    }

    #[test]
    fn make_dims_rejects_out_of_scope() {
        assert!(matches!(
            NetworkDims::from_ints(8, 4),
            Err(DofError::RatioOutOfScope(_))
        ));
        assert!(matches!(
            NetworkDims::from_ints(3, 4),
            Err(DofError::InvalidDims(_))
        ));
        assert!(matches!(
            make_dims(ratio(1, 2), ratio(1, 2)),
            Err(DofError::InvalidDims(_))
        ));
    }

    #[test]
    fn branch_dof_examples() {
        assert_eq!(branch_dof(&dims("11.25", "9"), 4), ratio(9, 4));
        assert_eq!(branch_dof(&dims("7", "7"), 5), int(0));
        let d = NetworkDims::from_ints(45, 36).unwrap();
        assert_eq!(branch_dof(&d, 3), int(0));
        assert_eq!(branch_dof_scaled(&dims("11.25", "9"), 4), 9);
    }

    #[test]
    fn min_tree_length_examples() {
        for (m, l) in [(45, 4), (48, 3), (54, 2)] {
            let d = NetworkDims::from_ints(m, 36).unwrap();
            assert_eq!(min_tree_length(&d).unwrap(), l, "M={m}");
        }
    }

    #[test]
    fn classify_examples() {
        let r = classify(&dims("11.25", "9")).unwrap();
        let t = r.tree.unwrap();
        assert_eq!(t.length, 4);
        assert_eq!(t.sub_interval, SubInterval::Upper);
        assert_eq!(r.loss_class, LossClass::LosslessI);
        assert_eq!(t.d_o, ratio(9, 4));
        assert_eq!(t.delta, int(2));
        assert_eq!(t.d_max, ratio(9, 2));
        assert_eq!(t.i_min, ratio(9, 4));
        assert_eq!(t.nominal_sum_bound, ratio(5, 2));

        let r = classify(&NetworkDims::from_ints(54, 36).unwrap()).unwrap();
        assert_eq!(r.tree.unwrap().length, 2);
        assert_eq!(r.loss_class, LossClass::LossySignal);

        let r = classify(&NetworkDims::from_ints(3, 3).unwrap()).unwrap();
        assert_eq!(r.loss_class, LossClass::EqualAntennas);
        assert!(r.tree.is_none());

        // gamma = 1.21 sits below 11/9 at L = 4
        let r = classify(&NetworkDims::from_ints(121, 100).unwrap()).unwrap();
        assert_eq!(r.tree.unwrap().length, 4);
        assert_eq!(r.loss_class, LossClass::LosslessIi);
    }

    #[test]
    fn bases_match_worked_example() {
        assert_eq!(dof_basis(1, 4), [2, 2, 1]);
        assert_eq!(dof_basis(2, 4), [1, 2, 2]);
        assert_eq!(dof_basis(1, 2), [1, 1, 1]);
        assert_eq!(interference_basis(1, 4), [1, 1, 2]);
        assert_eq!(interference_basis(2, 4), [2, 1, 1]);
        assert_eq!(interference_basis(1, 3), [1, 1, 1]);
        assert_eq!(interference_basis(2, 1).iter().sum::<u32>(), 1);
        // per-tree available space d_o * basis
        let d_o = ratio(9, 4);
        let space: Vec<_> = dof_basis(1, 4).iter().map(|&c| d_o * int(c as i64)).collect();
        assert_eq!(space, vec![ratio(9, 2), ratio(9, 2), ratio(9, 4)]);
    }

    /// Independent oracle: the alignment receiver is whichever receiver is
    /// not the intended receiver of either merged segment.
    fn brute_ratio(length: u32) -> Rational {
        let mut best: Option<Rational> = None;
        for root in 1..=3usize {
            let mut tx = Vec::new();
            let mut t = root;
            for _ in 0..=length {
                tx.push(t);
                t = if t == 3 { 1 } else { t + 1 };
            }
            let mut dof = [0i64; 3];
            for &t in &tx {
                dof[t - 1] += 1;
            }
            let mut interf = [0i64; 3];
            for w in tx.windows(2) {
                let rx = (1..=3).find(|r| *r != w[0] && *r != w[1]).unwrap();
                interf[rx - 1] += 1;
            }
            for u in 0..3 {
                if interf[u] > 0 {
                    let v = ratio(dof[u], interf[u]);
                    best = Some(best.map_or(v, |b: Rational| b.max(v)));
                }
            }
        }
        best.unwrap_or_else(Rational::zero)
    }

    #[test]
    fn dof_interference_ratio_examples() {
        assert_eq!(dof_interference_ratio(4), int(2));
        assert_eq!(dof_interference_ratio(2), int(1));
        // frozen from the brute-force enumeration above
        assert_eq!(brute_ratio(1), int(0));
        assert_eq!(dof_interference_ratio(1), int(0));
        for l in 1..=12 {
            assert_eq!(dof_interference_ratio(l), brute_ratio(l), "L={l}");
        }
    }

    #[test]
    fn max_user_dof_examples() {
        assert_eq!(max_user_dof(&dims("11.25", "9"), 4).unwrap(), int(6));
        assert_eq!(max_user_dof(&NetworkDims::from_ints(45, 36).unwrap(), 4).unwrap(), int(24));
        // L = 2 has bases (1,1,1) / (1,0,1): d_max = I_min = 1
        let d = NetworkDims::from_ints(54, 36).unwrap();
        assert_eq!(max_user_dof(&d, 2).unwrap(), int(18));
        assert_eq!(
            max_user_dof(&NetworkDims::from_ints(45, 36).unwrap(), 3),
            Err(DofError::DegenerateRegime(3))
        );
    }

    #[test]
    fn redistribute_examples() {
        let d = dims("11.25", "9");
        let a = RedistributionFactors([ratio(3, 2), ratio(3, 2), int(0)]);
        assert_eq!(
            redistribute(&d, 4, &a).unwrap(),
            DofTuple([ratio(9, 2), int(6), ratio(9, 2)])
        );
        let zero = RedistributionFactors([int(0); 3]);
        assert_eq!(redistribute(&d, 4, &zero).unwrap(), DofTuple::zero());
        let big = NetworkDims::from_ints(45, 36).unwrap();
        for t in 0..=9 {
            let a = RedistributionFactors([int(t); 3]);
            assert_eq!(redistribute(&big, 4, &a).unwrap(), DofTuple::from_ints([5 * t; 3]));
        }
    }

    #[test]
    fn redistribute_errors() {
        let d = dims("11.25", "9");
        let a = RedistributionFactors([int(3), int(0), int(0)]);
        assert!(matches!(
            redistribute(&d, 4, &a),
            Err(DofError::FactorOutOfRange { index: 1, .. })
        ));
        let a = RedistributionFactors([int(0); 3]);
        assert_eq!(redistribute(&d, 5, &a), Err(DofError::WrongRegime(5)));
    }

    #[test]
    fn lossy_bases_are_root_independent() {
        for l in [2u32, 5, 8] {
            let expected = [(l + 1) / 3; 3];
            for r in 1..=3 {
                assert_eq!(dof_basis(r, l), expected);
            }
        }
        for l in [3u32, 6, 9] {
            let expected = [l / 3; 3];
            for r in 1..=3 {
                assert_eq!(interference_basis(r, l), expected);
            }
        }
    }

    proptest! {
        #[test]
        fn basis_sums(root in 1usize..=3, l in 1u32..60) {
            prop_assert_eq!(dof_basis(root, l).iter().sum::<u32>(), l + 1);
            prop_assert_eq!(interference_basis(root, l).iter().sum::<u32>(), l);
        }

        #[test]
        fn redistribution_matches_allocation(
            l in (0u32..10).prop_map(|k| 3 * k + 1),
            a in proptest::array::uniform3(0i64..40),
        ) {
            let d = NetworkDims::from_ints(60, 50).unwrap();
            // keep factors inside [0, d_o]
            let bound = branch_dof(&d, l);
            prop_assume!(a.iter().all(|&x| int(x) <= bound));
            let got = redistribute(&d, l, &RedistributionFactors(a.map(int))).unwrap();
            let mut want = [Rational::zero(); 3];
            for (r, &w) in REDISTRIBUTION_ROOTS.iter().zip(a.iter()) {
                for (u, c) in dof_basis(*r, l).iter().enumerate() {
                    want[u] += int(w * *c as i64);
                }
            }
            prop_assert_eq!(got.0, want);
        }

        #[test]
        fn branch_dof_monotone(m in 11i64..40, n in 10i64..30, l in 1u32..20) {
            prop_assume!(m > n && m < 2 * n);
            let d = NetworkDims::from_ints(m as u64, n as u64).unwrap();
            let up_m = NetworkDims::new(int(m) + ratio(1, 2), int(n));
            if let Ok(up_m) = up_m {
                prop_assert!(branch_dof(&up_m, l) >= branch_dof(&d, l));
            }
            if m > n + 1 {
                let up_n = NetworkDims::from_ints(m as u64, n as u64 + 1).unwrap();
                prop_assert!(branch_dof(&up_n, l) <= branch_dof(&d, l));
            }
            let (now, next) = (branch_dof(&d, l), branch_dof(&d, l + 1));
            prop_assert!(next > now || (now.is_zero() && next.is_zero()));
        }

        #[test]
        fn classify_picks_minimal_length(m in 11u64..200, n in 10u64..120) {
            prop_assume!(m > n && m < 2 * n);
            let d = NetworkDims::from_ints(m, n).unwrap();
            let l = classify(&d).unwrap().tree.unwrap().length;
            prop_assert!(branch_dof(&d, l) > Rational::zero());
            if l >= 2 {
                prop_assert!(branch_dof(&d, l - 1).is_zero());
            }
            let cap = max_user_dof(&d, l).unwrap();
            prop_assert!(cap <= d.n() && cap >= d.n() / int(2));
        }
    }
}
