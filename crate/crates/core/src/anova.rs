//! Nested ANOVA of integrands resolved on a product grid of elementary cells.
//!
//! A [`GridFunction`] stores one value per cell of the `prod_j b_j^{L_j}`
//! grid in a mixed base. When those values are exact cell averages of a
//! function that is constant on cells, every quantity below is exact:
//! `beta~_{u,v,k}` is a box mean, `beta_{u,k}` follows by inclusion-exclusion
//! over `v`, and `sigma^2_{u,k}` is the mean square of `beta_{u,k}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::ExactRational;
use crate::sequences::{DigitPoint, MixedBase};

/// Field of values a grid function can hold.
pub trait Scalar:
    Copy
    + PartialEq
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Sum
{
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for ExactRational {
    fn zero() -> Self {
        ExactRational::ZERO
    }
    fn from_i64(v: i64) -> Self {
        ExactRational::from(v)
    }
    fn to_f64(&self) -> f64 {
        ExactRational::to_f64(self)
    }
}

/// How the cell values were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// The function is literally constant on each cell.
    ExactCellConstant,
    /// Cell averages approximated by quadrature; identities hold only
    /// approximately for the underlying function.
    Sampled,
}

/// Largest grid accepted, in cells.
pub const MAX_CELLS: u64 = 1 << 24;

/// Cell values on the `prod b_j^{L_j}` grid, last coordinate fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    base: MixedBase,
    levels: Vec<u32>,
    values: Vec<T>,
    provenance: Provenance,
}

fn cells_at(base: &MixedBase, res: &[u32]) -> Result<u64> {
    res.iter().enumerate().try_fold(1u64, |acc, (j, &r)| {
        base.radix(j).checked_pow(r).and_then(|c| acc.checked_mul(c)).ok_or(Error::Overflow("grid size"))
    })
}

/// Per-coordinate indices of a flat position at resolution `res`.
fn unflatten(base: &MixedBase, res: &[u32], mut pos: u64) -> Vec<u64> {
    let mut idx = vec![0u64; res.len()];
    for j in (0..res.len()).rev() {
        let c = base.radix(j).pow(res[j]);
        idx[j] = pos % c;
        pos /= c;
    }
    idx
}

fn flatten(base: &MixedBase, res: &[u32], idx: &[u64]) -> u64 {
    idx.iter().enumerate().fold(0u64, |acc, (j, &a)| acc * base.radix(j).pow(res[j]) + a)
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(base: MixedBase, levels: Vec<u32>, values: Vec<T>, provenance: Provenance) -> Result<Self> {
        if levels.len() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: levels.len() });
        }
        let cells = cells_at(&base, &levels)?;
        if cells > MAX_CELLS {
            return Err(Error::TooLarge(format!("{cells} cells exceed the budget of {MAX_CELLS}")));
        }
        if values.len() as u64 != cells {
            return Err(Error::WrongCardinality { expected: cells, got: values.len() as u64 });
        }
        Ok(GridFunction { base, levels, values, provenance })
    }

    /// An exact cell-constant function.
    pub fn exact(base: MixedBase, levels: Vec<u32>, values: Vec<T>) -> Result<Self> {
        Self::new(base, levels, values, Provenance::ExactCellConstant)
    }

    pub fn base(&self) -> &MixedBase {
        &self.base
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    /// The same function in the usual base `(p_1, ..., p_d)`: levels become
    /// `e_j L_j` and the cell order is unchanged.
    pub fn to_usual(&self) -> GridFunction<T> {
        let levels = self.levels.iter().enumerate().map(|(j, &l)| l * self.base.exponent(j)).collect();
        GridFunction { base: self.base.to_usual(), levels, values: self.values.clone(), provenance: self.provenance }
    }

    /// Per-coordinate cell indices of the grid cell holding `x`.
    pub fn cell_of(&self, x: &DigitPoint) -> Result<Vec<u64>> {
        (0..self.dim())
            .map(|j| {
                if x.prime(j) != self.base.prime(j) {
                    return Err(Error::BaseMismatch(self.base.prime(j).get(), x.prime(j).get()));
                }
                x.leading_int(j, (self.base.exponent(j) * self.levels[j]) as usize)
            })
            .collect()
    }

    /// `f(x)` for `x` given by digits.
    pub fn value_at(&self, x: &DigitPoint) -> Result<T> {
        let idx = self.cell_of(x)?;
        Ok(self.values[flatten(&self.base, &self.levels, &idx) as usize])
    }

    pub fn value_at_cell(&self, idx: &[u64]) -> T {
        self.values[flatten(&self.base, &self.levels, idx) as usize]
    }

    /// `f_empty`, the integral of `f`.
    pub fn mean(&self) -> T {
        let total: T = self.values.iter().copied().sum();
        total / T::from_i64(self.values.len() as i64)
    }

    /// `Var f`.
    pub fn variance(&self) -> T {
        let mu = self.mean();
        let ss: T = self.values.iter().map(|&v| (v - mu) * (v - mu)).sum();
        ss / T::from_i64(self.values.len() as i64)
    }

    /// Box means at resolution `res` (`res_j <= L_j`), values on the
    /// `prod b_j^{res_j}` grid.
    pub fn box_means(&self, res: &[u32]) -> Result<Vec<T>> {
        if res.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: res.len() });
        }
        if let Some(j) = (0..self.dim()).find(|&j| res[j] > self.levels[j]) {
            return Err(Error::ResolutionExceedsPrecision { needed: res[j] as usize, available: self.levels[j] as usize });
        }
        // reduce one coordinate at a time
        let mut cur_res = self.levels.clone();
        let mut cur = self.values.clone();
        for j in 0..self.dim() {
            if cur_res[j] == res[j] {
                continue;
            }
            let group = self.base.radix(j).pow(cur_res[j] - res[j]);
            let outer: u64 = (0..j).map(|i| self.base.radix(i).pow(cur_res[i])).product();
            let inner: u64 = (j + 1..self.dim()).map(|i| self.base.radix(i).pow(cur_res[i])).product();
            let new_len = self.base.radix(j).pow(res[j]);
            let old_len = self.base.radix(j).pow(cur_res[j]);
            let mut next = vec![T::zero(); (outer * new_len * inner) as usize];
            for o in 0..outer {
                for a in 0..old_len {
                    for i in 0..inner {
                        let src = ((o * old_len + a) * inner + i) as usize;
                        let dst = ((o * new_len + a / group) * inner + i) as usize;
                        next[dst] = next[dst] + cur[src];
                    }
                }
            }
            let g = T::from_i64(group as i64);
            for v in &mut next {
                *v = *v / g;
            }
            cur = next;
            cur_res[j] = res[j];
        }
        Ok(cur)
    }

    /// Box resolution for `(u, v, k)`: `k_j + 1` on `v`, `k_j` on `u \ v`,
    /// `0` elsewhere, clipped to the grid levels (the function is constant
    /// below them).
    fn box_resolution(&self, u: &[usize], v: u32, k: &[u32]) -> Vec<u32> {
        let mut res = vec![0u32; self.dim()];
        for (i, (&j, &kj)) in u.iter().zip(k).enumerate() {
            res[j] = (kj + (v >> i & 1)).min(self.levels[j]);
        }
        res
    }

    fn check_uk(&self, u: &[usize], k: &[u32]) -> Result<()> {
        if u.is_empty() || u.windows(2).any(|w| w[0] >= w[1]) || u.iter().any(|&j| j >= self.dim()) {
            return Err(Error::InvalidQuery(format!("bad coordinate set {u:?}")));
        }
        if k.len() != u.len() {
            return Err(Error::DimensionMismatch { expected: u.len(), got: k.len() });
        }
        Ok(())
    }

    /// `beta~_{u,v,k}(x)` at the grid cell `cell`; `v` is a bitmask over the
    /// positions of `u`.
    pub fn tilde_beta(&self, u: &[usize], v: u32, k: &[u32], cell: &[u64]) -> Result<T> {
        self.check_uk(u, k)?;
        let res = self.box_resolution(u, v, k);
        let means = self.box_means(&res)?;
        Ok(means[self.coarsen(cell, &res) as usize])
    }

    fn coarsen(&self, cell: &[u64], res: &[u32]) -> u64 {
        let idx: Vec<u64> = (0..self.dim())
            .map(|j| cell[j] / self.base.radix(j).pow(self.levels[j] - res[j]))
            .collect();
        flatten(&self.base, res, &idx)
    }

    /// `beta_{u,k}(x) = sum_v (-1)^{|u|-|v|} beta~_{u,v,k}(x)` at a grid cell.
    pub fn beta(&self, u: &[usize], k: &[u32], cell: &[u64]) -> Result<T> {
        self.check_uk(u, k)?;
        let mut acc = T::zero();
        for v in 0..1u32 << u.len() {
            let t = self.tilde_beta(u, v, k, cell)?;
            acc = if (u.len() as u32 - v.count_ones()) % 2 == 0 { acc + t } else { acc - t };
        }
        Ok(acc)
    }

    /// `beta_{u,k}` on every cell of the full grid.
    pub fn beta_on_grid(&self, u: &[usize], k: &[u32]) -> Result<Vec<T>> {
        self.check_uk(u, k)?;
        let mut cache = HashMap::new();
        self.beta_grid_cached(u, k, &self.levels, &mut cache)
    }

    /// `beta_{u,k}` evaluated on the cells of resolution `target`.
    fn beta_grid_cached(
        &self,
        u: &[usize],
        k: &[u32],
        target: &[u32],
        cache: &mut HashMap<Vec<u32>, Vec<T>>,
    ) -> Result<Vec<T>> {
        let n = cells_at(&self.base, target)? as usize;
        let mut out = vec![T::zero(); n];
        for v in 0..1u32 << u.len() {
            let res = self.box_resolution(u, v, k);
            if !cache.contains_key(&res) {
                cache.insert(res.clone(), self.box_means(&res)?);
            }
            let means = &cache[&res];
            let add = (u.len() as u32 - v.count_ones()) % 2 == 0;
            for (pos, slot) in out.iter_mut().enumerate() {
                let idx = unflatten(&self.base, target, pos as u64);
                let c: Vec<u64> =
                    (0..self.dim()).map(|j| idx[j] / self.base.radix(j).pow(target[j] - res[j])).collect();
                let t = means[flatten(&self.base, &res, &c) as usize];
                *slot = if add { *slot + t } else { *slot - t };
            }
        }
        Ok(out)
    }

    /// `sigma^2_{u,k}` for every nonempty `u` and `k_j < L_j`; larger `k`
    /// give exactly zero for a cell-constant function.
    pub fn sigma_table(&self) -> Result<SigmaTable<T>> {
        let d = self.dim();
        let mut cache = HashMap::new();
        let mut entries = BTreeMap::new();
        for mask in 1u32..1 << d {
            let u: Vec<usize> = (0..d).filter(|&j| mask >> j & 1 == 1).collect();
            let mut k = vec![0u32; u.len()];
            if u.iter().any(|&j| self.levels[j] == 0) {
                continue;
            }
            loop {
                let mut target = vec![0u32; d];
                for (&j, &kj) in u.iter().zip(&k) {
                    target[j] = kj + 1;
                }
                let beta = self.beta_grid_cached(&u, &k, &target, &mut cache)?;
                let ss: T = beta.iter().map(|&b| b * b).sum();
                entries.insert((u.clone(), k.clone()), ss / T::from_i64(beta.len() as i64));
                // next k with k_j < L_j
                let mut i = 0;
                loop {
                    k[i] += 1;
                    if k[i] < self.levels[u[i]] {
                        break;
                    }
                    k[i] = 0;
                    i += 1;
                    if i == k.len() {
                        break;
                    }
                }
                if i == k.len() {
                    break;
                }
            }
        }
        Ok(SigmaTable { entries })
    }

    /// Walsh coefficients `f^(h)` on the full grid, indexed like the cells.
    /// Requires a common prime and unit exponents.
    pub fn walsh_coefficients(&self) -> Result<Vec<Complex64>> {
        let b = self.walsh_prime()?;
        let n = self.values.len();
        let cells: Vec<Vec<u64>> = (0..n as u64).map(|p| unflatten(&self.base, &self.levels, p)).collect();
        Ok(cells
            .iter()
            .map(|h| {
                let total: Complex64 = cells
                    .iter()
                    .zip(&self.values)
                    .map(|(x, f)| f.to_f64() * walsh(b, &self.levels, h, x).conj())
                    .sum();
                total / n as f64
            })
            .collect())
    }

    fn walsh_prime(&self) -> Result<u64> {
        let p = self
            .base
            .common_prime()
            .ok_or_else(|| Error::Unsupported("Walsh functions need a common prime base".into()))?;
        if self.base.exponents().iter().any(|&e| e != 1) {
            return Err(Error::Unsupported("Walsh functions need unit exponents".into()));
        }
        Ok(p.get() as u64)
    }

    /// `sum_{h in L_l} f^(h) wal_h(x)` at a grid cell, where `L_l` holds the
    /// `h` with `b^{l_j - 1} <= h_j < b^{l_j}` (and `h_j = 0` when `l_j = 0`).
    pub fn walsh_beta(&self, l: &[u32], cell: &[u64]) -> Result<Complex64> {
        let coeffs = self.walsh_coefficients()?;
        self.walsh_beta_with(&coeffs, l, cell)
    }

    /// [`GridFunction::walsh_beta`] with precomputed coefficients.
    pub fn walsh_beta_with(&self, coeffs: &[Complex64], l: &[u32], cell: &[u64]) -> Result<Complex64> {
        let b = self.walsh_prime()?;
        if l.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: l.len() });
        }
        if let Some(j) = (0..self.dim()).find(|&j| l[j] > self.levels[j]) {
            return Err(Error::ResolutionExceedsPrecision { needed: l[j] as usize, available: self.levels[j] as usize });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (pos, c) in coeffs.iter().enumerate() {
            let h = unflatten(&self.base, &self.levels, pos as u64);
            let inside = (0..self.dim()).all(|j| {
                if l[j] == 0 {
                    h[j] == 0
                } else {
                    b.pow(l[j] - 1) <= h[j] && h[j] < b.pow(l[j])
                }
            });
            if inside {
                acc += c * walsh(b, &self.levels, &h, cell);
            }
        }
        Ok(acc)
    }
}

/// `wal_h(x) = omega^{sum_j sum_i eta_{j,i} xi_{j,i+1}}` with `omega =
/// exp(2 pi i / b)`, `eta` the base-`b` digits of `h_j` from the least
/// significant and `xi` the digits of the cell `x_j` from the most significant.
pub fn walsh(b: u64, levels: &[u32], h: &[u64], x: &[u64]) -> Complex64 {
    let mut exponent = 0u64;
    for j in 0..levels.len() {
        let mut hj = h[j];
        for i in 0..levels[j] {
            let eta = hj % b;
            hj /= b;
            let xi = (x[j] / b.pow(levels[j] - 1 - i)) % b;
            exponent += eta * xi;
        }
    }
    let theta = 2.0 * std::f64::consts::PI * (exponent % b) as f64 / b as f64;
    Complex64::from_polar(1.0, theta)
}

/// Digit-wise `x - y` mod `b` on cell indices with `levels[j]` digits.
pub fn digit_sub(b: u64, levels: &[u32], x: &[u64], y: &[u64]) -> Vec<u64> {
    (0..levels.len())
        .map(|j| {
            let mut out = 0u64;
            for i in 0..levels[j] {
                let p = b.pow(i);
                let dx = (x[j] / p) % b;
                let dy = (y[j] / p) % b;
                out += ((dx + b - dy) % b) * p;
            }
            out
        })
        .collect()
}

/// `sigma^2_{u,k}` keyed by `(u, k)` with `u` 0-based.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaTable<T> {
    pub entries: BTreeMap<(Vec<usize>, Vec<u32>), T>,
}

impl<T: Scalar> SigmaTable<T> {
    /// Zero for keys outside the table.
    pub fn get(&self, u: &[usize], k: &[u32]) -> T {
        self.entries.get(&(u.to_vec(), k.to_vec())).copied().unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.entries.values().copied().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Vec<usize>, Vec<u32>), &T)> {
        self.entries.iter()
    }
}

impl<T: std::fmt::Display> SigmaTable<T> {
    /// CSV with header `u,k,sigma2`; `u` is 1-based and `;`-separated.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,k,sigma2\n");
        for ((u, k), s) in &self.entries {
            let us: Vec<String> = u.iter().map(|j| (j + 1).to_string()).collect();
            let ks: Vec<String> = k.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{},{}\n", us.join(";"), ks.join(";"), s));
        }
        out
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0));
    }
    out
}

fn cell_average<F: Fn(&[f64]) -> f64>(f: &F, lo: &[f64], width: &[f64], rule: &[(f64, f64)]) -> f64 {
    let d = lo.len();
    let q = rule.len();
    let mut total = 0.0;
    let mut x = vec![0.0; d];
    for pos in 0..q.pow(d as u32) {
        let mut rest = pos;
        let mut w = 1.0;
        for j in 0..d {
            let (t, wt) = rule[rest % q];
            rest /= q;
            x[j] = lo[j] + width[j] * t;
            w *= wt;
        }
        total += w * f(&x);
    }
    total
}

impl GridFunction<f64> {
    /// Cell averages of `f` by tensor Gauss-Legendre quadrature with 8 nodes
    /// per axis, plus the largest change seen when doubling the nodes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(base: MixedBase, levels: Vec<u32>, f: F) -> Result<(Self, f64)> {
        let cells = cells_at(&base, &levels)?;
        if cells > MAX_CELLS {
            return Err(Error::TooLarge(format!("{cells} cells exceed the budget of {MAX_CELLS}")));
        }
        let r8 = gauss_legendre(8);
        let r16 = gauss_legendre(16);
        let width: Vec<f64> = (0..base.dim()).map(|j| (base.radix(j) as f64).powi(-(levels[j] as i32))).collect();
        let mut values = Vec::with_capacity(cells as usize);
        let mut err: f64 = 0.0;
        for pos in 0..cells {
            let idx = unflatten(&base, &levels, pos);
            let lo: Vec<f64> = idx.iter().zip(&width).map(|(&a, w)| a as f64 * w).collect();
            let a8 = cell_average(&f, &lo, &width, &r8);
            let a16 = cell_average(&f, &lo, &width, &r16);
            err = err.max((a8 - a16).abs());
            values.push(a8);
        }
        Ok((GridFunction { base, levels, values, provenance: Provenance::Sampled }, err))
    }
}

impl GridFunction<ExactRational> {
    /// Parses the text grid format: a header line such as
    /// `p=2,2;e=1,2;levels=2,1` followed by one value per line (blank lines
    /// and `#` comments skipped). Values accept integers, `a/b` and decimals.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let mut primes = None;
        let mut exps = None;
        let mut levels = None;
        for part in header.split(';') {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field {part:?}")))?;
            let nums = val
                .split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            match key.trim() {
                "p" => primes = Some(nums),
                "e" => exps = Some(nums),
                "levels" | "L" => levels = Some(nums),
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let primes = primes.ok_or_else(|| Error::Parse("header lacks p=".into()))?;
        let levels = levels.ok_or_else(|| Error::Parse("header lacks levels=".into()))?;
        let exps = exps.unwrap_or_else(|| vec![1; primes.len()]);
        if exps.len() != primes.len() {
            return Err(Error::DimensionMismatch { expected: primes.len(), got: exps.len() });
        }
        let pairs: Vec<(u32, u32)> = primes.into_iter().zip(exps).collect();
        let base = MixedBase::from_pairs(&pairs)?;
        let values = lines
            .flat_map(|l| l.split(',').map(str::trim).filter(|t| !t.is_empty()))
            .map(str::parse::<ExactRational>)
            .collect::<Result<Vec<_>>>()?;
        Self::exact(base, levels, values)
    }

    pub fn to_f64(&self) -> GridFunction<f64> {
        GridFunction {
            base: self.base.clone(),
            levels: self.levels.clone(),
            values: self.values.iter().map(ExactRational::to_f64).collect(),
            provenance: self.provenance,
        }
    }
}
