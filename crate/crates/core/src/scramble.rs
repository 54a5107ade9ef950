//! Affine matrix scrambles acting on digit arrays.
//!
//! A scramble maps the digit vector `x` of each coordinate to `M x + Delta`
//! over `F_p`. The usual scramble draws `M` lower triangular with a nonzero
//! diagonal; the coarse scramble draws `M` block lower triangular with blocks
//! of size `e_j` and uniformly random nonsingular diagonal blocks, which is
//! the same thing as scrambling in base `p^{e_j}`.
//!
//! All randomness comes from keyed streams (see [`crate::rng`]): block row `r`
//! of dimension `j` in replication `rep` reads only the stream
//! `(seed, rep, j, r)` and the shift reads `(seed, rep, j, SHIFT_ROW)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::field_poly::{random_nonsingular, FieldMatrix, PrimeBase};
use crate::rng::{keyed_rng, SHIFT_ROW};
use crate::sequences::{DigitPoint, MixedBase};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ScrambleMode {
    #[default]
    None,
    Usual,
    Coarse,
}

impl fmt::Display for ScrambleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrambleMode::None => "none",
            ScrambleMode::Usual => "usual",
            ScrambleMode::Coarse => "coarse",
        })
    }
}

impl FromStr for ScrambleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ScrambleMode::None),
            "usual" => Ok(ScrambleMode::Usual),
            "coarse" => Ok(ScrambleMode::Coarse),
            _ => Err(Error::Parse(format!("unknown scramble mode {s:?}"))),
        }
    }
}

/// Base-2 lookup form of a [`LinearScramble`] with at most 64 digits.
#[derive(Clone)]
struct PackedBinary {
    /// Row `i` of `M`; bit `63 - l` holds `M[i][l]`.
    rows: Vec<u64>,
    /// Top-aligned shift digits.
    shift: u64,
    /// `tables[t][v]`: image under `M` of input byte `t` equal to `v`.
    tables: Vec<[u64; 256]>,
}

/// One coordinate's scramble `x -> M x + Delta` on `K` digits.
#[derive(Clone)]
pub struct LinearScramble {
    base: PrimeBase,
    block: usize,
    matrix: FieldMatrix,
    shift: Vec<u8>,
    packed: Option<PackedBinary>,
}

impl fmt::Debug for LinearScramble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearScramble")
            .field("base", &self.base.get())
            .field("block", &self.block)
            .field("matrix", &self.matrix)
            .field("shift", &self.shift)
            .finish()
    }
}

impl PartialEq for LinearScramble {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.block == other.block && self.matrix == other.matrix && self.shift == other.shift
    }
}

impl Eq for LinearScramble {}

impl LinearScramble {
    /// Validates the block lower-triangular structure with invertible
    /// diagonal blocks.
    pub fn new(matrix: FieldMatrix, shift: Vec<u8>, block: usize) -> Result<Self> {
        let k = matrix.rows();
        if matrix.cols() != k || shift.len() != k {
            return Err(Error::PrecisionMismatch { expected: k, got: shift.len().min(matrix.cols()) });
        }
        if block == 0 || k % block != 0 {
            return Err(Error::PrecisionMismatch { expected: block.max(1) * k.div_ceil(block.max(1)), got: k });
        }
        let base = matrix.base();
        if shift.iter().any(|&v| v >= base.get()) {
            return Err(Error::InvalidQuery("shift digit out of range".into()));
        }
        for i in 0..k {
            let upper = (i / block + 1) * block;
            if (upper..k).any(|l| matrix.get(i, l) != 0) {
                return Err(Error::InvalidQuery("matrix is not block lower triangular".into()));
            }
        }
        for t in 0..k / block {
            if !matrix.submatrix(t * block, (t + 1) * block, t * block, (t + 1) * block).is_invertible() {
                return Err(Error::InvalidQuery("singular diagonal block".into()));
            }
        }
        Ok(Self::assemble(matrix, shift, block))
    }

    fn assemble(matrix: FieldMatrix, shift: Vec<u8>, block: usize) -> Self {
        let base = matrix.base();
        let k = matrix.rows();
        let packed = (base == PrimeBase::TWO && k <= 64).then(|| {
            let rows: Vec<u64> = (0..k)
                .map(|i| (0..k).fold(0u64, |w, l| w | ((matrix.get(i, l) as u64) << (63 - l))))
                .collect();
            let columns: Vec<u64> = (0..k)
                .map(|l| (0..k).fold(0u64, |w, i| w | ((matrix.get(i, l) as u64) << (63 - i))))
                .collect();
            let tables = (0..k.div_ceil(8))
                .map(|t| {
                    let mut table = [0u64; 256];
                    for v in 1usize..256 {
                        let low = v.trailing_zeros() as usize;
                        let l = 8 * t + (7 - low);
                        let col = columns.get(l).copied().unwrap_or(0);
                        table[v] = table[v & (v - 1)] ^ col;
                    }
                    table
                })
                .collect();
            let shift_word = shift.iter().enumerate().fold(0u64, |w, (i, &d)| w | ((d as u64) << (63 - i)));
            PackedBinary { rows, shift: shift_word, tables }
        });
        LinearScramble { base, block, matrix, shift, packed }
    }

    /// The identity scramble on `k` digits.
    pub fn identity(base: PrimeBase, k: usize) -> Self {
        Self::assemble(FieldMatrix::identity(base, k), vec![0; k], 1)
    }

    pub fn base(&self) -> PrimeBase {
        self.base
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn precision(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &FieldMatrix {
        &self.matrix
    }

    pub fn shift(&self) -> &[u8] {
        &self.shift
    }

    /// `M x + Delta`, with `x` zero-padded to the scramble precision.
    pub fn apply_digits(&self, x: &[u8]) -> Result<Vec<u8>> {
        let k = self.precision();
        if x.len() > k {
            return Err(Error::PrecisionMismatch { expected: k, got: x.len() });
        }
        let b = self.base;
        Ok((0..k)
            .map(|i| {
                let upper = ((i / self.block + 1) * self.block).min(x.len());
                let acc = (0..upper).fold(0u32, |acc, l| acc + b.mul(self.matrix.get(i, l), x[l]) as u32);
                b.add((acc % b.get() as u32) as u8, self.shift[i])
            })
            .collect())
    }

    /// Base-2 word form of [`LinearScramble::apply_digits`] via byte tables.
    /// `None` unless the base is 2 and the precision at most 64.
    pub fn apply_word(&self, x: u64) -> Option<u64> {
        let p = self.packed.as_ref()?;
        let mut y = p.shift;
        for (t, table) in p.tables.iter().enumerate() {
            y ^= table[((x >> (56 - 8 * t)) & 0xff) as usize];
        }
        Some(y & top_mask(self.precision()))
    }

    /// Same map as [`LinearScramble::apply_word`] via row-parity reduction.
    pub fn apply_word_parity(&self, x: u64) -> Option<u64> {
        let p = self.packed.as_ref()?;
        let x = x & top_mask(self.precision());
        let y = p
            .rows
            .iter()
            .enumerate()
            .fold(0u64, |y, (i, &row)| y | (((row & x).count_ones() as u64 & 1) << (63 - i)));
        Some(y ^ p.shift)
    }
}

fn top_mask(k: usize) -> u64 {
    if k == 0 {
        0
    } else {
        u64::MAX << (64 - k)
    }
}

/// Draws block row `t` (rows `t*e .. (t+1)*e`) of a block lower-triangular
/// matrix: a uniform nonsingular diagonal block, then uniform entries left of it.
fn sample_block_row<R: Rng + ?Sized>(m: &mut FieldMatrix, t: usize, e: usize, rng: &mut R) {
    let b = m.base();
    let diag = random_nonsingular(b, e, rng);
    for i in 0..e {
        for l in 0..e {
            m.set(t * e + i, t * e + l, diag.get(i, l));
        }
    }
    for i in 0..e {
        for l in 0..t * e {
            m.set(t * e + i, l, rng.random_range(0..b.get()));
        }
    }
}

fn sample_dimension(b: PrimeBase, k: usize, block: usize, seed: u64, rep: u64, dim: u64) -> LinearScramble {
    let mut m = FieldMatrix::zeros(b, k, k);
    for t in 0..k / block {
        let mut rng = keyed_rng(seed, rep, dim, t as u64);
        sample_block_row(&mut m, t, block, &mut rng);
    }
    let mut rng = keyed_rng(seed, rep, dim, SHIFT_ROW);
    let shift = (0..k).map(|_| rng.random_range(0..b.get())).collect();
    LinearScramble::assemble(m, shift, block)
}

/// Per-dimension scrambles sampled for one replication.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScrambleState {
    mode: ScrambleMode,
    dims: Vec<LinearScramble>,
}

/// A usual affine matrix scramble: every block has size 1.
pub type AffineState = ScrambleState;
/// A coarse scramble: block sizes are the exponents of the base.
pub type BlockAffineState = ScrambleState;

impl ScrambleState {
    pub fn from_dims(mode: ScrambleMode, dims: Vec<LinearScramble>) -> Self {
        ScrambleState { mode, dims }
    }

    pub fn mode(&self) -> ScrambleMode {
        self.mode
    }

    pub fn dims(&self) -> &[LinearScramble] {
        &self.dims
    }

    pub fn dim(&self, j: usize) -> &LinearScramble {
        &self.dims[j]
    }

    pub fn apply(&self, x: &DigitPoint) -> Result<DigitPoint> {
        apply(self, x)
    }
}

/// Samples the usual affine scramble: digit-wise, in each coordinate's own
/// prime, on `precisions[j]` digits.
pub fn sample_usual(base: &MixedBase, precisions: &[usize], seed: u64, rep: u64) -> Result<AffineState> {
    if precisions.len() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: precisions.len() });
    }
    let dims = precisions
        .iter()
        .enumerate()
        .map(|(j, &k)| sample_dimension(base.prime(j), k, 1, seed, rep, j as u64))
        .collect();
    Ok(ScrambleState { mode: ScrambleMode::Usual, dims })
}

/// Samples the coarse scramble with block size `e_j` in dimension `j`;
/// precisions are rounded up to whole blocks.
pub fn sample_coarse(base: &MixedBase, precisions: &[usize], seed: u64, rep: u64) -> Result<BlockAffineState> {
    if !base.is_digital() {
        return Err(Error::NonDigitalBase);
    }
    if precisions.len() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: precisions.len() });
    }
    let dims = precisions
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let e = base.exponent(j) as usize;
            sample_dimension(base.prime(j), e * k.div_ceil(e), e, seed, rep, j as u64)
        })
        .collect();
    Ok(ScrambleState { mode: ScrambleMode::Coarse, dims })
}

/// Digit-wise `M_j x_j + Delta_j` in every coordinate.
pub fn apply(state: &ScrambleState, x: &DigitPoint) -> Result<DigitPoint> {
    if x.dim() != state.dims.len() {
        return Err(Error::DimensionMismatch { expected: state.dims.len(), got: x.dim() });
    }
    let digits = state
        .dims
        .iter()
        .enumerate()
        .map(|(j, s)| {
            if x.prime(j) != s.base() {
                return Err(Error::BaseMismatch(s.base().get(), x.prime(j).get()));
            }
            s.apply_digits(x.digits(j))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DigitPoint::new_unchecked(x.primes().to_vec(), digits))
}

/// Every scramble of one coordinate on `k` digits with block size `block`,
/// each listed once (the uniform law is uniform over this list).
pub fn enumerate_dimension(b: PrimeBase, k: usize, block: usize, limit: u64) -> Result<Vec<LinearScramble>> {
    if block == 0 || k % block != 0 {
        return Err(Error::PrecisionMismatch { expected: block.max(1) * k.div_ceil(block.max(1)), got: k });
    }
    let bb = b.get() as u64;
    let blocks = k / block;
    let gl: Vec<FieldMatrix> = all_matrices(b, block, block).into_iter().filter(|m| m.is_invertible()).collect();
    // free (off-diagonal) entries below the diagonal blocks
    let free: usize = (0..blocks).map(|t| block * block * t).sum();
    let count = (gl.len() as u64)
        .checked_pow(blocks as u32)
        .and_then(|c| bb.checked_pow((free + k) as u32).and_then(|f| c.checked_mul(f)))
        .filter(|&c| c <= limit)
        .ok_or_else(|| Error::TooLarge(format!("scramble space on {k} digits exceeds {limit}")))?;
    let mut out = Vec::with_capacity(count as usize);
    for idx in 0..count {
        let mut rest = idx;
        let mut m = FieldMatrix::zeros(b, k, k);
        for t in 0..blocks {
            let g = &gl[(rest % gl.len() as u64) as usize];
            rest /= gl.len() as u64;
            for i in 0..block {
                for l in 0..block {
                    m.set(t * block + i, t * block + l, g.get(i, l));
                }
                for l in 0..t * block {
                    m.set(t * block + i, l, (rest % bb) as u8);
                    rest /= bb;
                }
            }
        }
        let shift = (0..k)
            .map(|_| {
                let d = (rest % bb) as u8;
                rest /= bb;
                d
            })
            .collect();
        out.push(LinearScramble::assemble(m, shift, block));
    }
    Ok(out)
}

fn all_matrices(b: PrimeBase, rows: usize, cols: usize) -> Vec<FieldMatrix> {
    let bb = b.get() as u64;
    let n = (bb).pow((rows * cols) as u32);
    (0..n)
        .map(|mut idx| {
            let mut m = FieldMatrix::zeros(b, rows, cols);
            for i in 0..rows {
                for l in 0..cols {
                    m.set(i, l, (idx % bb) as u8);
                    idx /= bb;
                }
            }
            m
        })
        .collect()
}

/// Samples scramble states for a fixed base, precision and master seed.
#[derive(Clone, Debug)]
pub struct Scrambler {
    mode: ScrambleMode,
    base: MixedBase,
    precisions: Vec<usize>,
    seed: u64,
}

impl Scrambler {
    pub fn new(mode: ScrambleMode, base: MixedBase, precisions: Vec<usize>, seed: u64) -> Result<Self> {
        if precisions.len() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: precisions.len() });
        }
        if mode == ScrambleMode::Coarse && !base.is_digital() {
            return Err(Error::NonDigitalBase);
        }
        Ok(Scrambler { mode, base, precisions, seed })
    }

    pub fn mode(&self) -> ScrambleMode {
        self.mode
    }

    /// The state of replication `rep`; `None` in mode `none`.
    pub fn state(&self, rep: u64) -> Result<Option<ScrambleState>> {
        match self.mode {
            ScrambleMode::None => Ok(None),
            ScrambleMode::Usual => sample_usual(&self.base, &self.precisions, self.seed, rep).map(Some),
            ScrambleMode::Coarse => sample_coarse(&self.base, &self.precisions, self.seed, rep).map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::SequenceSpec;

    fn f2() -> PrimeBase {
        PrimeBase::TWO
    }

    #[test]
    fn identity_is_identity() {
        let s = LinearScramble::identity(f2(), 5);
        assert_eq!(s.apply_digits(&[1, 0, 1, 1, 0]).unwrap(), vec![1, 0, 1, 1, 0]);
        assert_eq!(s.apply_digits(&[1, 1]).unwrap(), vec![1, 1, 0, 0, 0]);
        assert!(s.apply_digits(&[0; 6]).is_err());
    }

    #[test]
    fn shift_example() {
        let s = LinearScramble::new(FieldMatrix::identity(f2(), 2), vec![1, 0], 1).unwrap();
        assert_eq!(s.apply_digits(&[0, 1]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn usual_binary_diagonal_is_one() {
        let base = MixedBase::usual(f2(), 3);
        let st = sample_usual(&base, &[10, 10, 10], 7, 0).unwrap();
        for s in st.dims() {
            assert!((0..10).all(|i| s.matrix().get(i, i) == 1));
            assert!((0..10).all(|i| (i + 1..10).all(|l| s.matrix().get(i, l) == 0)));
        }
    }

    #[test]
    fn coarse_with_unit_blocks_equals_usual() {
        let base = MixedBase::usual(PrimeBase::new(3).unwrap(), 2);
        for rep in 0..5 {
            let a = sample_usual(&base, &[6, 7], 11, rep).unwrap();
            let b = sample_coarse(&base, &[6, 7], 11, rep).unwrap();
            assert_eq!(a.dims(), b.dims());
        }
    }

    #[test]
    fn coarse_blocks_are_valid() {
        let base = MixedBase::coarse(f2(), &[1, 2, 3]).unwrap();
        let st = sample_coarse(&base, &[8, 8, 8], 3, 4).unwrap();
        assert_eq!(st.dims().iter().map(|s| s.precision()).collect::<Vec<_>>(), vec![8, 8, 9]);
        for s in st.dims() {
            let rebuilt = LinearScramble::new(s.matrix().clone(), s.shift().to_vec(), s.block()).unwrap();
            assert_eq!(&rebuilt, s);
        }
        assert!(matches!(
            sample_coarse(&MixedBase::from_pairs(&[(2, 1), (3, 1)]).unwrap(), &[4, 4], 0, 0),
            Err(Error::NonDigitalBase)
        ));
    }

    #[test]
    fn packed_paths_match_naive() {
        let base = MixedBase::coarse(f2(), &[1, 3, 7]).unwrap();
        let st = sample_coarse(&base, &[35, 33, 63], 99, 1).unwrap();
        let seq = SequenceSpec::sobol(3).build_for(1 << 10).unwrap();
        for k in [0u64, 1, 17, 500, 1023] {
            let x = seq.point(k).unwrap();
            let y = st.apply(&x).unwrap();
            for (j, s) in st.dims().iter().enumerate() {
                let mut xd = x.digits(j).to_vec();
                xd.resize(s.precision(), 0);
                let w = crate::sequences::pack_bits(&xd);
                let expect = crate::sequences::pack_bits(y.digits(j));
                assert_eq!(s.apply_word(w), Some(expect));
                assert_eq!(s.apply_word_parity(w), Some(expect));
            }
        }
    }

    #[test]
    fn nested_prefix_dependence() {
        let base = MixedBase::coarse(f2(), &[2]).unwrap();
        let st = sample_coarse(&base, &[8], 5, 0).unwrap();
        let s = st.dim(0);
        let x = [1, 0, 1, 1, 0, 0, 1, 0];
        let mut x2 = x;
        x2[4] ^= 1;
        x2[7] ^= 1;
        let (y, y2) = (s.apply_digits(&x).unwrap(), s.apply_digits(&x2).unwrap());
        assert_eq!(y[..4], y2[..4]);
        assert_ne!(y, y2);
    }

    #[test]
    fn deterministic_and_replication_dependent() {
        let base = MixedBase::usual(f2(), 2);
        assert_eq!(sample_usual(&base, &[8, 8], 1, 2).unwrap(), sample_usual(&base, &[8, 8], 1, 2).unwrap());
        assert_ne!(sample_usual(&base, &[8, 8], 1, 2).unwrap(), sample_usual(&base, &[8, 8], 1, 3).unwrap());
    }

    #[test]
    fn enumeration_sizes() {
        // 2 sub-diagonal choices x 4 shifts
        assert_eq!(enumerate_dimension(f2(), 2, 1, 1 << 20).unwrap().len(), 8);
        // |GL(2,2)| x 4 shifts
        assert_eq!(enumerate_dimension(f2(), 2, 2, 1 << 20).unwrap().len(), 24);
        // 6 * 6 * 16 * 16
        assert_eq!(enumerate_dimension(f2(), 4, 2, 1 << 20).unwrap().len(), 9216);
        let all = enumerate_dimension(f2(), 3, 1, 1 << 20).unwrap();
        assert_eq!(all.len(), 64);
        for (i, a) in all.iter().enumerate() {
            assert!(all[..i].iter().all(|b| b != a));
        }
        assert!(enumerate_dimension(f2(), 3, 2, 1 << 20).is_err());
    }

    #[test]
    fn mode_round_trip() {
        for m in [ScrambleMode::None, ScrambleMode::Usual, ScrambleMode::Coarse] {
            assert_eq!(m.to_string().parse::<ScrambleMode>().unwrap(), m);
        }
    }
}
