//! Elementary intervals, net checks and equidistribution of prefixes.
//!
//! Cells are always computed from leading digits with integer arithmetic.
//! In base `(p_1^{e_1}, ..., p_d^{e_d})` the `(k_1, ..., k_d)`-cell of a
//! point is the vector of integers formed by the first `e_j k_j` base-`p_j`
//! digits of each coordinate.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field_poly::PrimeBase;
use crate::sequences::{DigitPoint, MixedBase};

/// `a_j = floor(x_j b_j^{k_j})` for each coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CellIndex(pub Vec<u64>);

fn checked_pow(b: u64, e: u32) -> Result<u64> {
    b.checked_pow(e).ok_or(Error::Overflow("cell count"))
}

/// The elementary cell of `x` at resolution `k` in `base`.
pub fn cell_index(x: &DigitPoint, k: &[u32], base: &MixedBase) -> Result<CellIndex> {
    if k.len() != base.dim() || x.dim() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: k.len().min(x.dim()) });
    }
    let coords = (0..base.dim())
        .map(|j| {
            if x.prime(j) != base.prime(j) {
                return Err(Error::BaseMismatch(base.prime(j).get(), x.prime(j).get()));
            }
            x.leading_int(j, (base.exponent(j) * k[j]) as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellIndex(coords))
}

/// Mixed-radix key of the cell of `x` restricted to `coords`, where
/// coordinate `coords[i]` is resolved to `k[i]` blocks.
pub fn cell_key(x: &DigitPoint, coords: &[usize], k: &[u32], base: &MixedBase) -> Result<u128> {
    let mut key: u128 = 0;
    for (&j, &kj) in coords.iter().zip(k) {
        let a = x.leading_int(j, (base.exponent(j) * kj) as usize)?;
        let radix = (base.radix(j) as u128)
            .checked_pow(kj)
            .ok_or(Error::Overflow("cell key"))?;
        key = key
            .checked_mul(radix)
            .and_then(|v| v.checked_add(a as u128))
            .ok_or(Error::Overflow("cell key"))?;
    }
    Ok(key)
}

/// First failing elementary interval of a net check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetWitness {
    pub k: Vec<u32>,
    pub cell: Vec<u64>,
    pub count: u64,
    pub expected: u64,
}

/// Outcome of a net check; `witness` is present iff `verdict` is false.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetReport {
    pub verdict: bool,
    pub witness: Option<NetWitness>,
    /// Resolution vectors examined.
    pub checked: usize,
}

/// All `k` with `sum e_j k_j <= budget` that cannot be refined in any
/// coordinate without leaving the budget.
pub fn maximal_resolutions(e: &[u32], budget: u32) -> Vec<Vec<u32>> {
    fn rec(e: &[u32], j: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>, min_e: u32) {
        if j == e.len() {
            if left < min_e {
                out.push(cur.clone());
            }
            return;
        }
        for kj in (0..=left / e[j]).rev() {
            cur.push(kj);
            rec(e, j + 1, left - kj * e[j], cur, out, min_e);
            cur.pop();
        }
    }
    let min_e = e.iter().copied().min().unwrap_or(1);
    let mut out = Vec::new();
    rec(e, 0, budget, &mut Vec::new(), &mut out, min_e);
    out
}

/// Leading integers of each coordinate at the finest resolution needed, so
/// that coarser cells follow by integer division.
struct LeadingTable {
    /// `lead[i][j]`: first `digits[j]` digits of point `i`, coordinate `j`.
    lead: Vec<Vec<u64>>,
    digits: Vec<u32>,
    primes: Vec<u64>,
}

impl LeadingTable {
    fn new(points: &[DigitPoint], digits: Vec<u32>) -> Result<Self> {
        let lead = points
            .iter()
            .map(|x| {
                digits
                    .iter()
                    .enumerate()
                    .map(|(j, &n)| x.leading_int(j, n as usize))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let primes = points.first().map_or(Vec::new(), |x| x.primes().iter().map(|p| p.get() as u64).collect());
        Ok(LeadingTable { lead, digits, primes })
    }

    /// Leading integer of point `i`, coordinate `j`, truncated to `n` digits.
    fn at(&self, i: usize, j: usize, n: u32) -> u64 {
        self.lead[i][j] / self.primes[j].pow(self.digits[j] - n)
    }
}

fn check_points(points: &[DigitPoint], b: PrimeBase, d: usize) -> Result<()> {
    for x in points {
        if x.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
        }
        if let Some(&p) = x.primes().iter().find(|&&p| p != b) {
            return Err(Error::BaseMismatch(b.get(), p.get()));
        }
    }
    Ok(())
}

fn net_check_over(
    points: &[DigitPoint],
    t: u32,
    e: &[u32],
    m: u32,
    b: PrimeBase,
    ks: Vec<Vec<u32>>,
) -> Result<NetReport> {
    let n = points.len() as u64;
    let expect_n = checked_pow(b.get() as u64, m)?;
    if n != expect_n {
        return Err(Error::WrongCardinality { expected: expect_n, got: n });
    }
    if t > m {
        return Err(Error::InvalidQuery(format!("t = {t} exceeds m = {m}")));
    }
    check_points(points, b, e.len())?;
    let budget = m - t;
    let digits: Vec<u32> = e.iter().map(|&ej| ej * (budget / ej)).collect();
    for (j, &nd) in digits.iter().enumerate() {
        if let Some(x) = points.iter().find(|x| x.precision(j) < nd as usize) {
            return Err(Error::ResolutionExceedsPrecision { needed: nd as usize, available: x.precision(j) });
        }
    }
    let table = LeadingTable::new(points, digits)?;
    let bb = b.get() as u64;
    let checked = ks.len();
    let witness = ks.into_par_iter().find_map_first(|k| {
        let used: u32 = k.iter().zip(e).map(|(kj, ej)| kj * ej).sum();
        let cells = bb.pow(used) as usize;
        let expected = n / bb.pow(used);
        let mut counts = vec![0u64; cells];
        for i in 0..points.len() {
            let mut key = 0usize;
            for (j, (&kj, &ej)) in k.iter().zip(e).enumerate() {
                let nd = kj * ej;
                key = key * bb.pow(nd) as usize + table.at(i, j, nd) as usize;
            }
            counts[key] += 1;
        }
        let bad = counts.iter().position(|&c| c != expected)?;
        let mut cell = vec![0u64; k.len()];
        let mut rest = bad as u64;
        for j in (0..k.len()).rev() {
            let r = bb.pow(k[j] * e[j]);
            cell[j] = rest % r;
            rest /= r;
        }
        Some(NetWitness { k, cell, count: counts[bad], expected })
    });
    Ok(NetReport { verdict: witness.is_none(), witness, checked })
}

/// Whether `points` (exactly `b^m` of them) form a `(t, e, m, d)`-net in base
/// `b`: every elementary interval in base `(b^{e_1}, ..., b^{e_d})` with
/// `sum e_j k_j <= m - t` holds its proportional share of points.
///
/// Only maximal resolution vectors are counted; every admissible interval is
/// a disjoint union of intervals at some maximal resolution.
pub fn is_net(points: &[DigitPoint], t: u32, e: &[u32], m: u32, b: PrimeBase) -> Result<NetReport> {
    if e.iter().any(|&ej| ej == 0) {
        return Err(Error::InvalidQuery("block exponent must be >= 1".into()));
    }
    let ks = maximal_resolutions(e, m.saturating_sub(t));
    net_check_over(points, t, e, m, b, ks)
}

/// Probabilistic variant of [`is_net`] that checks `samples` maximal
/// resolution vectors drawn uniformly (with replacement) using `seed`.
pub fn is_net_sampled(
    points: &[DigitPoint],
    t: u32,
    e: &[u32],
    m: u32,
    b: PrimeBase,
    samples: usize,
    seed: u64,
) -> Result<NetReport> {
    if e.iter().any(|&ej| ej == 0) {
        return Err(Error::InvalidQuery("block exponent must be >= 1".into()));
    }
    let all = maximal_resolutions(e, m.saturating_sub(t));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks = (0..samples).filter_map(|_| all.choose(&mut rng).cloned()).collect();
    net_check_over(points, t, e, m, b, ks)
}

/// Smallest `t` for which [`is_net`] passes.
pub fn measure_t(points: &[DigitPoint], e: &[u32], m: u32, b: PrimeBase) -> Result<u32> {
    for t in 0..=m {
        if is_net(points, t, e, m, b)?.verdict {
            return Ok(t);
        }
    }
    Ok(m)
}

/// Number of `(k_1, ..., k_d)`-cells in `base`, `prod b_j^{k_j}`.
pub fn block_size(base: &MixedBase, k: &[u32]) -> Result<u64> {
    k.iter()
        .enumerate()
        .try_fold(1u64, |acc, (j, &kj)| acc.checked_mul(checked_pow(base.radix(j), kj)?).ok_or(Error::Overflow("B")))
}

/// Whether each of the first `r_max` consecutive blocks of `B = prod b_j^{k_j}`
/// points covers every `k`-cell exactly once.
pub fn is_equidistributed_prefix(points: &[DigitPoint], base: &MixedBase, k: &[u32], r_max: u64) -> Result<bool> {
    if k.len() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: k.len() });
    }
    let big_b = block_size(base, k)?;
    let need = big_b.checked_mul(r_max).ok_or(Error::Overflow("r_max * B"))?;
    if (points.len() as u64) < need {
        return Err(Error::Insufficient(format!("{need} points needed, {} given", points.len())));
    }
    let coords: Vec<usize> = (0..base.dim()).collect();
    for r in 0..r_max {
        let mut seen = vec![false; big_b as usize];
        for x in &points[(r * big_b) as usize..((r + 1) * big_b) as usize] {
            let key = cell_key(x, &coords, k, base)? as usize;
            if std::mem::replace(&mut seen[key], true) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Points per cell at resolution `k` over the cells of `coords`.
pub fn cell_counts(points: &[DigitPoint], coords: &[usize], k: &[u32], base: &MixedBase) -> Result<HashMap<u128, u64>> {
    let mut counts = HashMap::new();
    for x in points {
        *counts.entry(cell_key(x, coords, k, base)?).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Map from occupancy to number of cells with that occupancy, empty cells
/// included.
pub fn cell_count_profile(points: &[DigitPoint], base: &MixedBase, k: &[u32]) -> Result<BTreeMap<u64, u64>> {
    let total = block_size(base, k)?;
    let coords: Vec<usize> = (0..base.dim()).collect();
    let counts = cell_counts(points, &coords, k, base)?;
    let mut profile = BTreeMap::new();
    for &c in counts.values() {
        *profile.entry(c).or_insert(0) += 1;
    }
    let empty = total - counts.len() as u64;
    if empty > 0 {
        *profile.entry(0).or_insert(0) += empty;
    }
    Ok(profile)
}
