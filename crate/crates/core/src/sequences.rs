//! Digital (generalized Niederreiter, Sobol') and Halton sequences.
//!
//! Points are produced as exact digit arrays ([`DigitPoint`]); floating point
//! only appears when a caller asks for coordinate values. Sobol' is realised
//! through the Niederreiter construction with primitive base polynomials and
//! `p_1(x) = x`, so its point values differ from direction-number tables but
//! carry the same `(0, e, d)`-sequence structure.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field_poly::{enumerate_monic, is_prime_u64, FieldMatrix, PolyKind, Polynomial, PrimeBase};

/// Largest degree considered when collecting base polynomials.
pub const MAX_POLY_DEGREE: usize = 20;

/// One coordinate of a mixed base: the component base is `prime^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BaseComponent {
    pub prime: PrimeBase,
    pub exponent: u32,
}

impl BaseComponent {
    /// `prime^exponent`.
    pub fn radix(&self) -> u64 {
        (self.prime.get() as u64).pow(self.exponent)
    }
}

/// Per-dimension bases `(p_1^{e_1}, ..., p_d^{e_d})`.
///
/// Halton uses distinct primes with unit exponents; a coarse digital base uses
/// one prime `b` with the base-polynomial degrees as exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MixedBase {
    components: Vec<BaseComponent>,
}

impl MixedBase {
    pub fn new(components: Vec<BaseComponent>) -> Result<Self> {
        if components.iter().any(|c| c.exponent == 0) {
            return Err(Error::InvalidQuery("block exponent must be >= 1".into()));
        }
        Ok(MixedBase { components })
    }

    /// From `(prime, exponent)` pairs.
    pub fn from_pairs(pairs: &[(u32, u32)]) -> Result<Self> {
        let comps = pairs
            .iter()
            .map(|&(p, e)| Ok(BaseComponent { prime: PrimeBase::new(p)?, exponent: e }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// `(b, ..., b)` in `d` dimensions.
    pub fn usual(b: PrimeBase, d: usize) -> Self {
        MixedBase { components: vec![BaseComponent { prime: b, exponent: 1 }; d] }
    }

    /// `(b^{e_1}, ..., b^{e_d})`.
    pub fn coarse(b: PrimeBase, exponents: &[u32]) -> Result<Self> {
        Self::new(exponents.iter().map(|&e| BaseComponent { prime: b, exponent: e }).collect())
    }

    /// `(p_1, ..., p_d)` with distinct primes.
    pub fn halton(primes: &[PrimeBase]) -> Result<Self> {
        for (i, p) in primes.iter().enumerate() {
            if primes[..i].contains(p) {
                return Err(Error::RepeatedPrime(p.get()));
            }
        }
        Ok(MixedBase { components: primes.iter().map(|&p| BaseComponent { prime: p, exponent: 1 }).collect() })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[BaseComponent] {
        &self.components
    }

    pub fn prime(&self, j: usize) -> PrimeBase {
        self.components[j].prime
    }

    pub fn exponent(&self, j: usize) -> u32 {
        self.components[j].exponent
    }

    pub fn exponents(&self) -> Vec<u32> {
        self.components.iter().map(|c| c.exponent).collect()
    }

    pub fn primes(&self) -> Vec<PrimeBase> {
        self.components.iter().map(|c| c.prime).collect()
    }

    /// Component base `b_j = p_j^{e_j}`.
    pub fn radix(&self, j: usize) -> u64 {
        self.components[j].radix()
    }

    /// The shared prime when every dimension uses the same one.
    pub fn common_prime(&self) -> Option<PrimeBase> {
        let first = self.components.first()?.prime;
        self.components.iter().all(|c| c.prime == first).then_some(first)
    }

    /// All dimensions share one prime (required by digital constructions).
    pub fn is_digital(&self) -> bool {
        self.common_prime().is_some()
    }

    /// Same primes, all exponents 1.
    pub fn to_usual(&self) -> MixedBase {
        MixedBase {
            components: self.components.iter().map(|c| BaseComponent { prime: c.prime, exponent: 1 }).collect(),
        }
    }

    /// Restriction to the listed coordinates.
    pub fn project(&self, coords: &[usize]) -> MixedBase {
        MixedBase { components: coords.iter().map(|&j| self.components[j]).collect() }
    }
}

impl fmt::Display for MixedBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| if c.exponent == 1 { c.prime.to_string() } else { format!("{}^{}", c.prime, c.exponent) })
            .collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// A point stored as per-coordinate digit arrays, most significant first.
///
/// Coordinate `j` has value `sum_i digits[j][i] * p_j^{-(i+1)}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DigitPoint {
    primes: Vec<PrimeBase>,
    digits: Vec<Vec<u8>>,
}

impl DigitPoint {
    pub fn new(primes: Vec<PrimeBase>, digits: Vec<Vec<u8>>) -> Result<Self> {
        if primes.len() != digits.len() {
            return Err(Error::DimensionMismatch { expected: primes.len(), got: digits.len() });
        }
        for (p, ds) in primes.iter().zip(&digits) {
            if let Some(&bad) = ds.iter().find(|&&v| v >= p.get()) {
                return Err(Error::Parse(format!("digit {bad} out of range for base {p}")));
            }
        }
        Ok(DigitPoint { primes, digits })
    }

    pub(crate) fn new_unchecked(primes: Vec<PrimeBase>, digits: Vec<Vec<u8>>) -> Self {
        DigitPoint { primes, digits }
    }

    /// The origin with the given per-coordinate precisions.
    pub fn zero(primes: &[PrimeBase], precisions: &[usize]) -> Self {
        DigitPoint { primes: primes.to_vec(), digits: precisions.iter().map(|&k| vec![0; k]).collect() }
    }

    /// Digits of `floor(x * p^K) / p^K` for each coordinate; `x` in `[0, 1)`.
    pub fn from_values(primes: &[PrimeBase], precisions: &[usize], values: &[f64]) -> Self {
        let digits = primes
            .iter()
            .zip(precisions)
            .zip(values)
            .map(|((p, &k), &v)| {
                let b = p.get() as f64;
                let mut frac = v.clamp(0.0, 1.0 - f64::EPSILON);
                (0..k)
                    .map(|_| {
                        frac *= b;
                        let d = (frac.floor() as u8).min(p.get() - 1);
                        frac -= d as f64;
                        d
                    })
                    .collect()
            })
            .collect();
        DigitPoint { primes: primes.to_vec(), digits }
    }

    pub fn dim(&self) -> usize {
        self.digits.len()
    }

    pub fn prime(&self, j: usize) -> PrimeBase {
        self.primes[j]
    }

    pub fn primes(&self) -> &[PrimeBase] {
        &self.primes
    }

    pub fn digits(&self, j: usize) -> &[u8] {
        &self.digits[j]
    }

    pub fn all_digits(&self) -> &[Vec<u8>] {
        &self.digits
    }

    pub fn precision(&self, j: usize) -> usize {
        self.digits[j].len()
    }

    /// `psi` of coordinate `j`: the truncated value.
    pub fn value(&self, j: usize) -> f64 {
        let b = self.primes[j].get() as f64;
        self.digits[j].iter().rev().fold(0.0, |acc, &d| (acc + d as f64) / b)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.value(j)).collect()
    }

    /// Centre of the `K`-digit cell holding coordinate `j`.
    pub fn midpoint_value(&self, j: usize) -> f64 {
        let b = self.primes[j].get() as f64;
        self.value(j) + 0.5 * b.powi(-(self.digits[j].len() as i32))
    }

    /// Integer formed by the leading `n` digits of coordinate `j`.
    pub fn leading_int(&self, j: usize, n: usize) -> Result<u64> {
        let ds = &self.digits[j];
        if n > ds.len() {
            return Err(Error::ResolutionExceedsPrecision { needed: n, available: ds.len() });
        }
        let b = self.primes[j].get() as u64;
        ds[..n].iter().try_fold(0u64, |acc, &d| {
            acc.checked_mul(b).and_then(|v| v.checked_add(d as u64)).ok_or(Error::Overflow("leading digits"))
        })
    }

    /// Digit string of coordinate `j`, most significant first (comma-separated
    /// digits for bases above 10).
    pub fn digit_string(&self, j: usize) -> String {
        if self.primes[j].get() <= 10 {
            self.digits[j].iter().map(|&d| char::from(b'0' + d)).collect()
        } else {
            self.digits[j].iter().map(|d| d.to_string()).collect::<Vec<_>>().join(":")
        }
    }
}

/// Digits per coordinate giving at least 32 bits of resolution in base `p`.
pub fn default_digits(p: PrimeBase) -> usize {
    let mut d = 0;
    let mut acc: u128 = 1;
    while acc < 1u128 << 32 {
        acc *= p.get() as u128;
        d += 1;
    }
    d
}

/// Number of base-`b` digits needed to write every index below `n_max`.
pub fn index_digits(b: PrimeBase, n_max: u64) -> usize {
    let mut d = 1usize;
    let mut cap: u128 = b.get() as u128;
    while cap < n_max as u128 {
        cap *= b.get() as u128;
        d += 1;
    }
    d
}

fn collect_by_degree(base: PrimeBase, d: usize, kind: PolyKind, mut out: Vec<Polynomial>) -> Result<Vec<Polynomial>> {
    let mut degree = 1;
    while out.len() < d {
        if degree > MAX_POLY_DEGREE || (base.get() as f64).powi(degree as i32) > 1e7 {
            return Err(Error::SupplyExhausted { requested: d, max_degree: degree - 1 });
        }
        for p in enumerate_monic(base, degree, kind) {
            if out.len() == d {
                break;
            }
            if !out.contains(&p) {
                out.push(p);
            }
        }
        degree += 1;
    }
    Ok(out)
}

/// `[x]` followed by the primitive polynomials over `F_2` by increasing
/// degree (ascending encoding within a degree).
pub fn sobol_polys(d: usize) -> Result<Vec<Polynomial>> {
    if d == 0 {
        return Err(Error::InvalidQuery("dimension must be >= 1".into()));
    }
    let x = Polynomial::monomial(PrimeBase::TWO, 1);
    collect_by_degree(PrimeBase::TWO, d, PolyKind::Primitive, vec![x])
}

/// The first `d` monic irreducible polynomials over `F_b` by increasing degree.
pub fn full_niederreiter_polys(d: usize, b: PrimeBase) -> Result<Vec<Polynomial>> {
    if d == 0 {
        return Err(Error::InvalidQuery("dimension must be >= 1".into()));
    }
    collect_by_degree(b, d, PolyKind::Irreducible, Vec::new())
}

/// First `r_count` coefficients `a_1, a_2, ...` of
/// `y(x) / p(x)^t = sum_r a_r x^{-r}` in `F_b((x^{-1}))`.
pub fn laurent_coefficients(y: &Polynomial, p: &Polynomial, t: u32, r_count: usize) -> Result<Vec<u8>> {
    let denom = p.pow(t);
    laurent_with_denominator(y, &denom, r_count)
}

fn laurent_with_denominator(y: &Polynomial, denom: &Polynomial, r_count: usize) -> Result<Vec<u8>> {
    let base = denom.base();
    if y.base() != base {
        return Err(Error::BaseMismatch(y.base().get(), base.get()));
    }
    let dd = denom.degree().ok_or(Error::NotMonic)?;
    if let Some(dy) = y.degree() {
        if dy >= dd {
            return Err(Error::ImproperFraction { deg_y: dy, bound: dd });
        }
    }
    // x^R y = q p^t + rem, and the quotient q carries a_r at x^{R-r}.
    let shifted = Polynomial::monomial(base, r_count).mul(y)?;
    let (q, _) = shifted.div_rem(denom)?;
    Ok((1..=r_count).map(|r| q.coeff(r_count - r)).collect())
}

/// Generating matrix of one base polynomial `p` of degree `e`: row `k`
/// (1-based) holds the Laurent coefficients of `x^{t e - k} / p^t` with
/// `t = floor((k-1)/e) + 1`.
pub fn niederreiter_matrix(p: &Polynomial, rows: usize, cols: usize) -> Result<FieldMatrix> {
    let e = match p.degree() {
        Some(e) if e >= 1 && p.is_monic() => e,
        _ => return Err(Error::NotMonic),
    };
    let base = p.base();
    let mut m = FieldMatrix::zeros(base, rows, cols);
    let mut denom = Polynomial::one(base);
    let mut current_t = 0;
    for k in 1..=rows {
        let t = (k - 1) / e + 1;
        while current_t < t {
            denom = denom.mul(p)?;
            current_t += 1;
        }
        let y = Polynomial::monomial(base, t * e - k);
        let a = laurent_with_denominator(&y, &denom, cols)?;
        for (r, v) in a.into_iter().enumerate() {
            m.set(k - 1, r, v);
        }
    }
    Ok(m)
}

/// Generating matrices for pairwise coprime monic base polynomials.
pub fn niederreiter_matrices(polys: &[Polynomial], rows: usize, cols: usize) -> Result<Vec<FieldMatrix>> {
    check_coprime(polys)?;
    polys.iter().map(|p| niederreiter_matrix(p, rows, cols)).collect()
}

fn check_coprime(polys: &[Polynomial]) -> Result<()> {
    for (i, p) in polys.iter().enumerate() {
        if !p.is_monic() || p.degree().unwrap_or(0) == 0 {
            return Err(Error::NotMonic);
        }
        for (j, q) in polys[..i].iter().enumerate() {
            if p.gcd(q)?.degree() != Some(0) {
                return Err(Error::NotCoprime(j, i));
            }
        }
    }
    Ok(())
}

fn index_vector(b: PrimeBase, mut k: u64, cols: usize) -> Result<Vec<u8>> {
    let bb = b.get() as u64;
    let mut v = vec![0u8; cols];
    for slot in v.iter_mut() {
        *slot = (k % bb) as u8;
        k /= bb;
    }
    if k != 0 {
        return Err(Error::IndexOutOfRange { index: k, digits: cols });
    }
    Ok(v)
}

/// Point `k` of the digital sequence with the given generating matrices,
/// keeping the first `precisions[j]` output digits of coordinate `j`.
pub fn digital_point(matrices: &[FieldMatrix], k: u64, b: PrimeBase, precisions: &[usize]) -> Result<DigitPoint> {
    if precisions.len() != matrices.len() {
        return Err(Error::DimensionMismatch { expected: matrices.len(), got: precisions.len() });
    }
    let mut digits = Vec::with_capacity(matrices.len());
    for (c, &prec) in matrices.iter().zip(precisions) {
        if prec > c.rows() {
            return Err(Error::PrecisionMismatch { expected: c.rows(), got: prec });
        }
        let kv = index_vector(b, k, c.cols()).map_err(|_| Error::IndexOutOfRange { index: k, digits: c.cols() })?;
        let mut y = c.mul_vec(&kv)?;
        y.truncate(prec);
        digits.push(y);
    }
    Ok(DigitPoint::new_unchecked(vec![b; matrices.len()], digits))
}

/// Radical inverse of `k` in each prime base, as digits.
pub fn halton_point(primes: &[PrimeBase], k: u64, precisions: &[usize]) -> Result<DigitPoint> {
    MixedBase::halton(primes)?;
    if precisions.len() != primes.len() {
        return Err(Error::DimensionMismatch { expected: primes.len(), got: precisions.len() });
    }
    let digits = primes
        .iter()
        .zip(precisions)
        .map(|(p, &prec)| {
            let b = p.get() as u64;
            let mut rest = k;
            (0..prec)
                .map(|_| {
                    let d = (rest % b) as u8;
                    rest /= b;
                    d
                })
                .collect()
        })
        .collect();
    Ok(DigitPoint::new_unchecked(primes.to_vec(), digits))
}

/// The first `d` primes.
pub fn first_primes(d: usize) -> Result<Vec<PrimeBase>> {
    let mut out = Vec::with_capacity(d);
    let mut n = 2u32;
    while out.len() < d {
        if n > 251 {
            return Err(Error::SupplyExhausted { requested: d, max_degree: 0 });
        }
        if is_prime_u64(n as u64) {
            out.push(PrimeBase::new(n)?);
        }
        n += 1;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Family {
    Sobol,
    FullNiederreiter,
    CustomNiederreiter(Vec<Polynomial>),
    Halton,
}

/// Output precision policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    /// At least 32 bits per coordinate, rounded up to whole blocks.
    Default,
    /// At least this many base-`p_j` digits, rounded up to whole blocks for
    /// digital families.
    Digits(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceSpec {
    pub family: Family,
    pub dim: usize,
    pub base: PrimeBase,
    pub precision: Precision,
}

impl SequenceSpec {
    pub fn sobol(d: usize) -> Self {
        SequenceSpec { family: Family::Sobol, dim: d, base: PrimeBase::TWO, precision: Precision::Default }
    }

    pub fn niederreiter(d: usize, b: PrimeBase) -> Self {
        SequenceSpec { family: Family::FullNiederreiter, dim: d, base: b, precision: Precision::Default }
    }

    pub fn custom(polys: Vec<Polynomial>) -> Result<Self> {
        let base = polys.first().ok_or_else(|| Error::InvalidQuery("no base polynomials".into()))?.base();
        let dim = polys.len();
        Ok(SequenceSpec { family: Family::CustomNiederreiter(polys), dim, base, precision: Precision::Default })
    }

    pub fn halton(d: usize) -> Self {
        SequenceSpec { family: Family::Halton, dim: d, base: PrimeBase::TWO, precision: Precision::Default }
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    /// Base polynomials of digital families; `None` for Halton.
    pub fn polynomials(&self) -> Result<Option<Vec<Polynomial>>> {
        match &self.family {
            Family::Sobol => {
                if self.base != PrimeBase::TWO {
                    return Err(Error::Unsupported("Sobol' is defined in base 2".into()));
                }
                sobol_polys(self.dim).map(Some)
            }
            Family::FullNiederreiter => full_niederreiter_polys(self.dim, self.base).map(Some),
            Family::CustomNiederreiter(polys) => {
                if polys.len() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: polys.len() });
                }
                Ok(Some(polys.clone()))
            }
            Family::Halton => Ok(None),
        }
    }

    /// The base in which the sequence is equidistributed.
    pub fn mixed_base(&self) -> Result<MixedBase> {
        match self.polynomials()? {
            Some(polys) => MixedBase::coarse(
                self.base,
                &polys.iter().map(|p| p.degree().unwrap_or(0) as u32).collect::<Vec<_>>(),
            ),
            None => MixedBase::halton(&first_primes(self.dim)?),
        }
    }

    pub fn build(&self) -> Result<Sequence> {
        self.build_for(u64::MAX)
    }

    /// Like [`SequenceSpec::build`] with generating matrices sized for
    /// indices below `n_max`.
    pub fn build_for(&self, n_max: u64) -> Result<Sequence> {
        match self.polynomials()? {
            Some(polys) => {
                let mixed = self.mixed_base()?;
                let target = match self.precision {
                    Precision::Default => default_digits(self.base),
                    Precision::Digits(k) => k,
                };
                let precisions: Vec<usize> = mixed
                    .exponents()
                    .iter()
                    .map(|&e| {
                        let e = e as usize;
                        e * target.div_ceil(e)
                    })
                    .collect();
                DigitalSequence::new(polys, precisions, index_digits(self.base, n_max)).map(Sequence::Digital)
            }
            None => {
                let primes = first_primes(self.dim)?;
                let precisions = primes
                    .iter()
                    .map(|&p| match self.precision {
                        Precision::Default => default_digits(p),
                        Precision::Digits(k) => k,
                    })
                    .collect();
                HaltonSequence::new(primes, precisions).map(Sequence::Halton)
            }
        }
    }
}

/// A generalized Niederreiter sequence with precomputed generating matrices.
#[derive(Clone, Debug)]
pub struct DigitalSequence {
    base: PrimeBase,
    polys: Vec<Polynomial>,
    mixed: MixedBase,
    precisions: Vec<usize>,
    matrices: Vec<FieldMatrix>,
    /// Base 2 with at most 64 output digits: column `r` of `C_j` as a word
    /// whose bit `63 - i` is the entry in row `i`.
    packed_columns: Option<Vec<Vec<u64>>>,
}

impl DigitalSequence {
    pub fn new(polys: Vec<Polynomial>, precisions: Vec<usize>, cols: usize) -> Result<Self> {
        check_coprime(&polys)?;
        if precisions.len() != polys.len() {
            return Err(Error::DimensionMismatch { expected: polys.len(), got: precisions.len() });
        }
        let base = polys[0].base();
        if let Some(p) = polys.iter().find(|p| p.base() != base) {
            return Err(Error::BaseMismatch(base.get(), p.base().get()));
        }
        let mixed = MixedBase::coarse(base, &polys.iter().map(|p| p.degree().unwrap() as u32).collect::<Vec<_>>())?;
        let matrices = polys
            .iter()
            .zip(&precisions)
            .map(|(p, &rows)| niederreiter_matrix(p, rows, cols))
            .collect::<Result<Vec<_>>>()?;
        let packed_columns = (base == PrimeBase::TWO && precisions.iter().all(|&k| k <= 64) && cols <= 64).then(|| {
            matrices
                .iter()
                .map(|c| {
                    (0..c.cols())
                        .map(|r| (0..c.rows()).fold(0u64, |w, i| w | ((c.get(i, r) as u64) << (63 - i))))
                        .collect()
                })
                .collect()
        });
        Ok(DigitalSequence { base, polys, mixed, precisions, matrices, packed_columns })
    }

    pub fn prime(&self) -> PrimeBase {
        self.base
    }

    pub fn polys(&self) -> &[Polynomial] {
        &self.polys
    }

    pub fn matrices(&self) -> &[FieldMatrix] {
        &self.matrices
    }

    pub fn index_digits(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.cols())
    }

    pub fn point(&self, k: u64) -> Result<DigitPoint> {
        if let Some(words) = self.packed_words(k) {
            let digits = words
                .iter()
                .zip(&self.precisions)
                .map(|(&w, &prec)| unpack_bits(w, prec))
                .collect();
            return Ok(DigitPoint::new_unchecked(vec![self.base; self.dim()], digits));
        }
        digital_point(&self.matrices, k, self.base, &self.precisions)
    }

    pub fn dim(&self) -> usize {
        self.polys.len()
    }

    /// Base-2 fast path: one top-aligned word per coordinate.
    pub fn packed_words(&self, k: u64) -> Option<Vec<u64>> {
        let cols = self.packed_columns.as_ref()?;
        let ncols = self.index_digits();
        if ncols < 64 && k >> ncols != 0 {
            return None;
        }
        Some(
            cols.iter()
                .map(|c| {
                    let mut w = 0u64;
                    let mut rest = k;
                    let mut r = 0;
                    while rest != 0 {
                        if rest & 1 == 1 {
                            w ^= c[r];
                        }
                        rest >>= 1;
                        r += 1;
                    }
                    w
                })
                .collect(),
        )
    }
}

/// `prec` leading bits of a top-aligned word.
pub fn unpack_bits(w: u64, prec: usize) -> Vec<u8> {
    (0..prec).map(|i| ((w >> (63 - i)) & 1) as u8).collect()
}

/// Inverse of [`unpack_bits`] for at most 64 binary digits.
pub fn pack_bits(digits: &[u8]) -> u64 {
    debug_assert!(digits.len() <= 64);
    digits.iter().enumerate().fold(0u64, |w, (i, &d)| w | ((d as u64 & 1) << (63 - i)))
}

#[derive(Clone, Debug)]
pub struct HaltonSequence {
    primes: Vec<PrimeBase>,
    mixed: MixedBase,
    precisions: Vec<usize>,
}

impl HaltonSequence {
    pub fn new(primes: Vec<PrimeBase>, precisions: Vec<usize>) -> Result<Self> {
        let mixed = MixedBase::halton(&primes)?;
        if precisions.len() != primes.len() {
            return Err(Error::DimensionMismatch { expected: primes.len(), got: precisions.len() });
        }
        Ok(HaltonSequence { primes, mixed, precisions })
    }

    pub fn point(&self, k: u64) -> Result<DigitPoint> {
        halton_point(&self.primes, k, &self.precisions)
    }
}

/// A constructed sequence ready for point generation.
#[derive(Clone, Debug)]
pub enum Sequence {
    Digital(DigitalSequence),
    Halton(HaltonSequence),
}

impl Sequence {
    pub fn dim(&self) -> usize {
        self.base().dim()
    }

    /// The base in which the sequence is equidistributed.
    pub fn base(&self) -> &MixedBase {
        match self {
            Sequence::Digital(s) => &s.mixed,
            Sequence::Halton(s) => &s.mixed,
        }
    }

    pub fn precisions(&self) -> &[usize] {
        match self {
            Sequence::Digital(s) => &s.precisions,
            Sequence::Halton(s) => &s.precisions,
        }
    }

    /// Common prime of digital sequences.
    pub fn digital_prime(&self) -> Option<PrimeBase> {
        match self {
            Sequence::Digital(s) => Some(s.base),
            Sequence::Halton(_) => None,
        }
    }

    pub fn point(&self, k: u64) -> Result<DigitPoint> {
        match self {
            Sequence::Digital(s) => s.point(k),
            Sequence::Halton(s) => s.point(k),
        }
    }

    /// Points `0..n`.
    pub fn points(&self, n: u64) -> Result<Vec<DigitPoint>> {
        (0..n).map(|k| self.point(k)).collect()
    }

    /// Points `start..start + n`.
    pub fn points_from(&self, start: u64, n: u64) -> Result<Vec<DigitPoint>> {
        (start..start + n).map(|k| self.point(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f2() -> PrimeBase {
        PrimeBase::TWO
    }

    fn p2(s: &str) -> Polynomial {
        Polynomial::parse(f2(), s).unwrap()
    }

    #[test]
    fn sobol_degree_profile_d37() {
        let polys = sobol_polys(37).unwrap();
        let degs: Vec<usize> = polys.iter().map(|p| p.degree().unwrap()).collect();
        let mut expect = vec![1, 1, 2, 3, 3, 4, 4];
        expect.extend([5; 6]);
        expect.extend([6; 6]);
        expect.extend([7; 18]);
        assert_eq!(degs, expect);
        assert_eq!(polys[0], p2("01"));
        assert_eq!(sobol_polys(1).unwrap(), vec![p2("01")]);
    }

    #[test]
    fn sobol_d100_has_47_degree_nine() {
        let polys = sobol_polys(100).unwrap();
        assert_eq!(polys.iter().filter(|p| p.degree() == Some(9)).count(), 47);
        assert_eq!(polys.iter().map(|p| p.degree().unwrap()).max(), Some(9));
    }

    #[test]
    fn full_niederreiter_examples() {
        assert_eq!(full_niederreiter_polys(3, f2()).unwrap(), vec![p2("01"), p2("11"), p2("111")]);
        let b3 = PrimeBase::new(3).unwrap();
        let p = full_niederreiter_polys(2, b3).unwrap();
        assert_eq!(p, vec![Polynomial::parse(b3, "01").unwrap(), Polynomial::parse(b3, "11").unwrap()]);
        // N_2(7) = 2 + 1 + 2 + 3 + 6 + 9 + 18
        let polys = full_niederreiter_polys(41, f2()).unwrap();
        assert_eq!(polys.last().unwrap().degree(), Some(7));
        let polys = full_niederreiter_polys(42, f2()).unwrap();
        assert_eq!(polys.last().unwrap().degree(), Some(8));
        assert!(sobol_polys(0).is_err());
    }

    #[test]
    fn laurent_examples() {
        assert_eq!(laurent_coefficients(&p2("1"), &p2("01"), 1, 4).unwrap(), vec![1, 0, 0, 0]);
        assert_eq!(laurent_coefficients(&p2("1"), &p2("11"), 1, 4).unwrap(), vec![1, 1, 1, 1]);
        assert_eq!(laurent_coefficients(&p2("01"), &p2("111"), 1, 6).unwrap(), vec![1, 1, 0, 1, 1, 0]);
        assert!(matches!(
            laurent_coefficients(&p2("001"), &p2("11"), 1, 4),
            Err(Error::ImproperFraction { .. })
        ));
    }

    #[test]
    fn laurent_multiplies_back() {
        // (sum_r a_r x^{-r}) * p^t agrees with y up to the truncated tail.
        let p = p2("1101");
        let y = p2("101");
        let r_count = 20;
        let a = laurent_coefficients(&y, &p, 2, r_count).unwrap();
        // Form A = sum a_r x^{R - r}; then A * p^2 - x^R y has degree < deg p^2.
        let mut coeffs = vec![0u8; r_count];
        for (r, &v) in a.iter().enumerate() {
            coeffs[r_count - 1 - r] = v;
        }
        let big_a = Polynomial::new(f2(), coeffs);
        let lhs = big_a.mul(&p.pow(2)).unwrap();
        let rhs = Polynomial::monomial(f2(), r_count).mul(&y).unwrap();
        let diff = lhs.sub(&rhs).unwrap();
        assert!(diff.degree().map_or(true, |d| d < 6));
    }

    #[test]
    fn x_gives_identity_matrix() {
        let m = niederreiter_matrix(&p2("01"), 8, 8).unwrap();
        assert_eq!(m, FieldMatrix::identity(f2(), 8));
    }

    #[test]
    fn generating_matrices_are_unit_upper_triangular_with_full_block_rank() {
        for p in sobol_polys(12).unwrap() {
            let e = p.degree().unwrap();
            let m = niederreiter_matrix(&p, 28, 40).unwrap();
            for k in 0..28 {
                assert_eq!(m.get(k, k), 1);
                assert!((0..k).all(|r| m.get(k, r) == 0));
            }
            for t in 1..=28 / e {
                let block = m.submatrix((t - 1) * e, t * e, 0, t * e);
                assert_eq!(block.rank(), e, "{p} block {t}");
            }
        }
    }

    #[test]
    fn non_coprime_rejected() {
        assert!(matches!(niederreiter_matrices(&[p2("11"), p2("101")], 4, 4), Err(Error::NotCoprime(0, 1))));
    }

    #[test]
    fn digital_point_examples() {
        let seq = SequenceSpec::sobol(3).build().unwrap();
        assert!(seq.point(0).unwrap().all_digits().iter().all(|d| d.iter().all(|&v| v == 0)));
        let vals: Vec<f64> = (1..=3).map(|k| seq.point(k).unwrap().value(0)).collect();
        assert_eq!(vals, vec![0.5, 0.25, 0.75]);
    }

    #[test]
    fn packed_path_matches_matrix_path() {
        let Sequence::Digital(seq) = SequenceSpec::sobol(10).build_for(1 << 12).unwrap() else { unreachable!() };
        for k in [0u64, 1, 2, 3, 77, 1000, 4095] {
            let fast = seq.point(k).unwrap();
            let slow = digital_point(seq.matrices(), k, f2(), &seq.precisions).unwrap();
            assert_eq!(fast, slow);
        }
        assert!(seq.point(4096).is_err());
    }

    #[test]
    fn halton_examples() {
        let primes = [f2(), PrimeBase::new(3).unwrap()];
        let p = halton_point(&primes, 1, &[8, 8]).unwrap();
        assert_eq!(p.value(0), 0.5);
        assert!((p.value(1) - 1.0 / 3.0).abs() < 1e-3);
        let p = halton_point(&primes, 5, &[3, 2]).unwrap();
        assert_eq!(p.digits(0), &[1, 0, 1]);
        assert_eq!(p.digits(1), &[2, 1]);
        assert_eq!(p.value(0), 5.0 / 8.0);
        assert!((p.value(1) - 7.0 / 9.0).abs() < 1e-15);
        assert!(matches!(halton_point(&[f2(), f2()], 1, &[4, 4]), Err(Error::RepeatedPrime(2))));
    }

    #[test]
    fn halton_first_six_fill_2x3_grid() {
        let primes = [f2(), PrimeBase::new(3).unwrap()];
        let mut seen = [[0u32; 3]; 2];
        for k in 0..6 {
            let p = halton_point(&primes, k, &[4, 4]).unwrap();
            seen[p.digits(0)[0] as usize][p.digits(1)[0] as usize] += 1;
        }
        assert!(seen.iter().flatten().all(|&c| c == 1));
    }

    #[test]
    fn precision_policy() {
        let seq = SequenceSpec::sobol(37).build().unwrap();
        let precs = seq.precisions();
        assert_eq!(precs[0], 32);
        assert_eq!(precs[36], 35);
        assert!(precs.iter().zip(seq.base().exponents()).all(|(&k, e)| k % e as usize == 0 && k >= 32));
        assert_eq!(default_digits(PrimeBase::new(3).unwrap()), 21);
        assert_eq!(index_digits(f2(), 1 << 14), 14);
        assert_eq!(index_digits(f2(), (1 << 14) + 1), 15);
        assert_eq!(index_digits(f2(), u64::MAX), 64);
    }

    #[test]
    fn prefix_consistency_and_determinism() {
        let a = SequenceSpec::niederreiter(4, f2()).build_for(1 << 10).unwrap();
        let b = SequenceSpec::niederreiter(4, f2()).build().unwrap();
        for k in [0u64, 5, 511, 1023] {
            assert_eq!(a.point(k).unwrap(), b.point(k).unwrap());
        }
    }

    #[test]
    fn bits_round_trip() {
        let d = vec![1, 0, 1, 1, 0, 0, 1];
        assert_eq!(unpack_bits(pack_bits(&d), d.len()), d);
    }

    #[test]
    fn mixed_base_helpers() {
        let mb = MixedBase::from_pairs(&[(2, 1), (2, 3)]).unwrap();
        assert_eq!(mb.radix(1), 8);
        assert!(mb.is_digital());
        assert_eq!(mb.to_usual().exponents(), vec![1, 1]);
        assert_eq!(mb.to_string(), "(2, 2^3)");
        let h = MixedBase::halton(&first_primes(3).unwrap()).unwrap();
        assert!(!h.is_digital());
        assert!(MixedBase::from_pairs(&[(4, 1)]).is_err());
        assert!(MixedBase::from_pairs(&[(2, 0)]).is_err());
    }
}
