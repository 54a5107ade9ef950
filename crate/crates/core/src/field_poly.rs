//! Prime fields, polynomials over them, and small dense matrices.
//!
//! Only prime bases are supported, so field elements are plain residues
//! `0..b` and the digit/field identification is the identity.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// A prime `b` with `2 <= b <= 251`, so digits fit in a byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct PrimeBase(u8);

pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut i = 2u64;
    while i * i <= n {
        if n % i == 0 {
            return false;
        }
        i += 1;
    }
    true
}

impl PrimeBase {
    pub const TWO: PrimeBase = PrimeBase(2);

    pub fn new(b: u32) -> Result<Self> {
        if (2..=251).contains(&b) && is_prime_u64(b as u64) {
            Ok(PrimeBase(b as u8))
        } else {
            Err(Error::NotPrime(b))
        }
    }

    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn add(self, a: u8, c: u8) -> u8 {
        ((a as u16 + c as u16) % self.0 as u16) as u8
    }

    #[inline]
    pub fn sub(self, a: u8, c: u8) -> u8 {
        ((a as u16 + self.0 as u16 - c as u16) % self.0 as u16) as u8
    }

    #[inline]
    pub fn mul(self, a: u8, c: u8) -> u8 {
        ((a as u16 * c as u16) % self.0 as u16) as u8
    }

    #[inline]
    pub fn neg(self, a: u8) -> u8 {
        self.sub(0, a)
    }

    /// Multiplicative inverse; `a` must be nonzero.
    pub fn inv(self, a: u8) -> u8 {
        debug_assert!(a % self.0 != 0);
        let mut acc = 1u8;
        for _ in 0..self.0 - 2 {
            acc = self.mul(acc, a);
        }
        acc
    }

    /// Base-2 logarithm of `b`.
    pub fn log2(self) -> f64 {
        (self.0 as f64).log2()
    }
}

impl fmt::Display for PrimeBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A polynomial over `F_b` with coefficients in ascending degree order.
///
/// The coefficient vector never has a trailing zero; the zero polynomial is
/// the empty vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    coeffs: Vec<u8>,
    base: PrimeBase,
}

/// Which monic polynomials [`enumerate_monic`] returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyKind {
    All,
    Irreducible,
    Primitive,
}

impl Polynomial {
    /// Coefficients are reduced mod `b`, trailing zeros dropped.
    pub fn new(base: PrimeBase, coeffs: impl Into<Vec<u8>>) -> Self {
        let mut coeffs: Vec<u8> = coeffs.into();
        for c in coeffs.iter_mut() {
            *c %= base.get();
        }
        let mut p = Polynomial { coeffs, base };
        p.trim();
        p
    }

    pub fn zero(base: PrimeBase) -> Self {
        Polynomial { coeffs: Vec::new(), base }
    }

    pub fn one(base: PrimeBase) -> Self {
        Polynomial { coeffs: vec![1], base }
    }

    /// The monomial `x^n`.
    pub fn monomial(base: PrimeBase, n: usize) -> Self {
        let mut coeffs = vec![0; n + 1];
        coeffs[n] = 1;
        Polynomial { coeffs, base }
    }

    /// Inverse of [`Polynomial::encoding`].
    pub fn from_encoding(base: PrimeBase, mut code: u64) -> Self {
        let b = base.get() as u64;
        let mut coeffs = Vec::new();
        while code > 0 {
            coeffs.push((code % b) as u8);
            code /= b;
        }
        Polynomial { coeffs, base }
    }

    /// `sum coeff_i * b^i`, the canonical ordering key.
    pub fn encoding(&self) -> u64 {
        let b = self.base.get() as u64;
        self.coeffs.iter().rev().fold(0u64, |acc, &c| acc * b + c as u64)
    }

    /// Parses an ascending coefficient string (`"1101"` is `1 + x + x^3`).
    /// Bases above 10 use comma-separated coefficients.
    pub fn parse(base: PrimeBase, s: &str) -> Result<Self> {
        let s = s.trim();
        let digits: Vec<u32> = if s.contains(',') {
            s.split(',')
                .map(|t| t.trim().parse::<u32>().map_err(|_| Error::Parse(s.to_string())))
                .collect::<Result<_>>()?
        } else {
            s.chars()
                .map(|c| c.to_digit(10).ok_or_else(|| Error::Parse(s.to_string())))
                .collect::<Result<_>>()?
        };
        if digits.is_empty() || digits.iter().any(|&d| d >= base.get() as u32) {
            return Err(Error::Parse(format!("{s:?} is not a polynomial over F_{base}")));
        }
        Ok(Polynomial::new(base, digits.into_iter().map(|d| d as u8).collect::<Vec<_>>()))
    }

    /// Ascending coefficient string, the inverse of [`Polynomial::parse`].
    pub fn to_coeff_string(&self) -> String {
        if self.coeffs.is_empty() {
            return "0".to_string();
        }
        if self.base.get() <= 10 {
            self.coeffs.iter().map(|c| char::from(b'0' + c)).collect()
        } else {
            self.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        }
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
    }

    pub fn base(&self) -> PrimeBase {
        self.base
    }

    pub fn coeffs(&self) -> &[u8] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> u8 {
        self.coeffs.get(i).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_monic(&self) -> bool {
        self.coeffs.last() == Some(&1)
    }

    fn check_base(&self, other: &Self) -> Result<()> {
        if self.base != other.base {
            Err(Error::BaseMismatch(self.base.get(), other.base.get()))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_base(other)?;
        Ok(self.add_unchecked(other))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_base(other)?;
        Ok(self.sub_unchecked(other))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_base(other)?;
        Ok(self.mul_unchecked(other))
    }

    /// Euclidean division; `divisor` must be nonzero.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        self.check_base(divisor)?;
        Ok(self.div_rem_unchecked(divisor))
    }

    pub fn rem(&self, modulus: &Self) -> Result<Self> {
        Ok(self.div_rem(modulus)?.1)
    }

    /// Monic gcd (zero if both inputs are zero).
    pub fn gcd(&self, other: &Self) -> Result<Self> {
        self.check_base(other)?;
        Ok(self.gcd_unchecked(other))
    }

    pub(crate) fn add_unchecked(&self, other: &Self) -> Self {
        let b = self.base;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| b.add(self.coeff(i), other.coeff(i))).collect::<Vec<_>>();
        let mut p = Polynomial { coeffs, base: b };
        p.trim();
        p
    }

    pub(crate) fn sub_unchecked(&self, other: &Self) -> Self {
        let b = self.base;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| b.sub(self.coeff(i), other.coeff(i))).collect::<Vec<_>>();
        let mut p = Polynomial { coeffs, base: b };
        p.trim();
        p
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Polynomial::zero(self.base);
        }
        let bb = self.base.get() as u32;
        let mut acc = vec![0u32; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &c) in other.coeffs.iter().enumerate() {
                acc[i + j] = (acc[i + j] + a as u32 * c as u32) % bb;
            }
        }
        let mut p = Polynomial { coeffs: acc.into_iter().map(|v| v as u8).collect(), base: self.base };
        p.trim();
        p
    }

    pub(crate) fn div_rem_unchecked(&self, divisor: &Self) -> (Self, Self) {
        let b = self.base;
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead_inv = b.inv(divisor.coeffs[dd]);
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (Polynomial::zero(b), self.clone());
        }
        let mut quot = vec![0u8; rem.len() - dd];
        for i in (dd..rem.len()).rev() {
            let c = rem[i];
            if c == 0 {
                continue;
            }
            let factor = b.mul(c, lead_inv);
            quot[i - dd] = factor;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                let idx = i - dd + j;
                rem[idx] = b.sub(rem[idx], b.mul(factor, dc));
            }
        }
        rem.truncate(dd);
        let mut q = Polynomial { coeffs: quot, base: b };
        let mut r = Polynomial { coeffs: rem, base: b };
        q.trim();
        r.trim();
        (q, r)
    }

    fn make_monic(&self) -> Self {
        match self.coeffs.last() {
            None | Some(1) => self.clone(),
            Some(&l) => {
                let inv = self.base.inv(l);
                Polynomial {
                    coeffs: self.coeffs.iter().map(|&c| self.base.mul(c, inv)).collect(),
                    base: self.base,
                }
            }
        }
    }

    pub(crate) fn gcd_unchecked(&self, other: &Self) -> Self {
        let mut a = self.clone();
        let mut c = other.clone();
        while !c.is_zero() {
            let r = a.div_rem_unchecked(&c).1;
            a = c;
            c = r;
        }
        a.make_monic()
    }

    pub(crate) fn mul_mod(&self, other: &Self, modulus: &Self) -> Self {
        self.mul_unchecked(other).div_rem_unchecked(modulus).1
    }

    /// `self^e mod modulus` by square-and-multiply.
    pub fn pow_mod(&self, mut e: u128, modulus: &Self) -> Result<Self> {
        self.check_base(modulus)?;
        let mut result = Polynomial::one(self.base).div_rem_unchecked(modulus).1;
        let mut sq = self.div_rem_unchecked(modulus).1;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_mod(&sq, modulus);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul_mod(&sq, modulus);
            }
        }
        Ok(result)
    }

    /// `self^e` without reduction.
    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Polynomial::one(self.base);
        for _ in 0..e {
            acc = acc.mul_unchecked(self);
        }
        acc
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match (i, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => write!(f, "x")?,
                (1, c) => write!(f, "{c}x")?,
                (i, 1) => write!(f, "x^{i}")?,
                (i, c) => write!(f, "{c}x^{i}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({} over F_{})", self, self.base)
    }
}

/// `a * c` over `F_b`.
pub fn poly_mul(a: &Polynomial, c: &Polynomial) -> Result<Polynomial> {
    a.mul(c)
}

fn require_monic(p: &Polynomial) -> Result<usize> {
    match p.degree() {
        Some(d) if d >= 1 && p.is_monic() => Ok(d),
        _ => Err(Error::NotMonic),
    }
}

/// Rabin-style test: `p` of degree `n` is irreducible iff
/// `gcd(x^{b^i} - x, p) = 1` for every `1 <= i <= n/2`.
pub fn is_irreducible(p: &Polynomial) -> Result<bool> {
    let n = require_monic(p)?;
    if n == 1 {
        return Ok(true);
    }
    let base = p.base();
    let x = Polynomial::monomial(base, 1);
    let mut h = x.div_rem_unchecked(p).1;
    for _ in 1..=n / 2 {
        h = h.pow_mod(base.get() as u128, p)?;
        let g = h.sub_unchecked(&x).gcd_unchecked(p);
        if g.degree() != Some(0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Distinct prime factors by trial division.
pub(crate) fn prime_factors(mut n: u128) -> Vec<u128> {
    let mut out = Vec::new();
    let mut q = 2u128;
    while q * q <= n {
        if n % q == 0 {
            out.push(q);
            while n % q == 0 {
                n /= q;
            }
        }
        q += if q == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// True iff `x` has multiplicative order `b^e - 1` modulo `p`.
pub fn is_primitive(p: &Polynomial) -> Result<bool> {
    let e = require_monic(p)?;
    if !is_irreducible(p)? {
        return Err(Error::Reducible);
    }
    let base = p.base();
    if p.coeff(0) == 0 {
        // p = x: x is not a unit modulo p.
        return Ok(false);
    }
    let order = (base.get() as u128)
        .checked_pow(e as u32)
        .filter(|v| *v <= u64::MAX as u128)
        .ok_or(Error::Overflow("b^e - 1 for the primitivity test"))?
        - 1;
    let x = Polynomial::monomial(base, 1);
    let one = Polynomial::one(base);
    if x.pow_mod(order, p)? != one {
        return Ok(false);
    }
    for q in prime_factors(order) {
        if x.pow_mod(order / q, p)? == one {
            return Ok(false);
        }
    }
    Ok(true)
}

/// All monic polynomials of `degree` over `F_b` of the given kind, sorted by
/// ascending [`Polynomial::encoding`].
pub fn enumerate_monic(base: PrimeBase, degree: usize, kind: PolyKind) -> Vec<Polynomial> {
    assert!(degree >= 1, "degree must be at least 1");
    let b = base.get() as u64;
    let lead = b.checked_pow(degree as u32).expect("b^degree overflows u64");
    (0..lead)
        .map(|low| Polynomial::from_encoding(base, lead + low))
        .filter(|p| match kind {
            PolyKind::All => true,
            PolyKind::Irreducible => is_irreducible(p).unwrap_or(false),
            PolyKind::Primitive => {
                is_irreducible(p).unwrap_or(false) && is_primitive(p).unwrap_or(false)
            }
        })
        .collect()
}

/// Dense row-major matrix over `F_b`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    base: PrimeBase,
    entries: Vec<u8>,
}

impl FieldMatrix {
    pub fn zeros(base: PrimeBase, rows: usize, cols: usize) -> Self {
        FieldMatrix { rows, cols, base, entries: vec![0; rows * cols] }
    }

    pub fn identity(base: PrimeBase, n: usize) -> Self {
        let mut m = Self::zeros(base, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(base: PrimeBase, rows: &[Vec<u8>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(base, r, c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::DimensionMismatch { expected: c, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v % base.get());
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn base(&self) -> PrimeBase {
        self.base
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        debug_assert!(v < self.base.get());
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// `M v` over `F_b`; `v` must have `cols` entries.
    pub fn mul_vec(&self, v: &[u8]) -> Result<Vec<u8>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        let bb = self.base.get() as u32;
        Ok((0..self.rows)
            .map(|i| {
                let s = self
                    .row(i)
                    .iter()
                    .zip(v)
                    .fold(0u32, |acc, (&a, &x)| (acc + a as u32 * x as u32) % bb);
                s as u8
            })
            .collect())
    }

    /// Copy of the block `rows r0..r1`, `cols c0..c1`.
    pub fn submatrix(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let mut m = Self::zeros(self.base, r1 - r0, c1 - c0);
        for i in r0..r1 {
            for j in c0..c1 {
                m.set(i - r0, j - c0, self.get(i, j));
            }
        }
        m
    }

    /// Row echelon form in place; returns the rank and the determinant of the
    /// leading square part (meaningful for square matrices).
    fn eliminate(&mut self) -> (usize, u8) {
        let b = self.base;
        let mut rank = 0;
        let mut det = 1u8;
        for col in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let Some(pivot) = (rank..self.rows).find(|&r| self.get(r, col) != 0) else {
                det = 0;
                continue;
            };
            if pivot != rank {
                for j in 0..self.cols {
                    self.entries.swap(pivot * self.cols + j, rank * self.cols + j);
                }
                det = b.neg(det);
            }
            let pv = self.get(rank, col);
            det = b.mul(det, pv);
            let inv = b.inv(pv);
            for r in rank + 1..self.rows {
                let f = self.get(r, col);
                if f == 0 {
                    continue;
                }
                let factor = b.mul(f, inv);
                for j in col..self.cols {
                    let v = b.sub(self.get(r, j), b.mul(factor, self.get(rank, j)));
                    self.set(r, j, v);
                }
            }
            rank += 1;
        }
        if rank < self.rows.min(self.cols) {
            det = 0;
        }
        (rank, det)
    }

    pub fn rank(&self) -> usize {
        self.clone().eliminate().0
    }

    /// Determinant over `F_b`; panics for non-square matrices.
    pub fn determinant(&self) -> u8 {
        assert_eq!(self.rows, self.cols, "determinant of a non-square matrix");
        if self.rows == 0 {
            return 1;
        }
        self.clone().eliminate().1
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.determinant() != 0
    }
}

impl fmt::Debug for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "FieldMatrix {}x{} over F_{}", self.rows, self.cols, self.base)?;
        for i in 0..self.rows {
            let row: String = self.row(i).iter().map(|v| format!("{v:>3}")).collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// Uniform sample from the invertible `e x e` matrices over `F_b` by rejection.
pub fn random_nonsingular<R: Rng + ?Sized>(base: PrimeBase, e: usize, rng: &mut R) -> FieldMatrix {
    assert!(e >= 1);
    let b = base.get();
    loop {
        let mut m = FieldMatrix::zeros(base, e, e);
        for v in m.entries.iter_mut() {
            *v = rng.random_range(0..b);
        }
        if m.is_invertible() {
            return m;
        }
    }
}

impl FromStr for PrimeBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: u32 = s.trim().parse().map_err(|_| Error::Parse(s.to_string()))?;
        PrimeBase::new(v)
    }
}
