//! Randomized QMC estimation, RMSE experiments and the exact variance
//! identity on enumerable instances.
//!
//! A replication samples one scramble state and applies it to every point.
//! Scrambled points are evaluated at the centre of their `K`-digit cell,
//! which is the conditional mean of the untruncated scramble over the
//! unresolved tail digits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::anova::GridFunction;
use crate::error::{Error, Result};
use crate::gain::{gain_via_counts, GainQuery};
use crate::rational::ExactRational;
use crate::scramble::{enumerate_dimension, ScrambleMode, Scrambler};
use crate::sequences::{DigitPoint, MixedBase, Sequence, SequenceSpec};

/// Environment variable holding the worker count for replications.
pub const THREADS_ENV: &str = "RQMC_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum IntegrandId {
    /// `sum_{j=1}^{37} x_j`.
    Linear37,
    /// `prod_{j=1}^{100} (1 + (x_j e^{x_j} - 1) / j^2)`.
    Weighted100,
    /// A constant in any dimension.
    Constant { dim: usize, value: f64 },
}

/// A test integrand with its exact integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integrand {
    pub id: IntegrandId,
}

impl Integrand {
    pub fn linear37() -> Self {
        Integrand { id: IntegrandId::Linear37 }
    }

    pub fn weighted100() -> Self {
        Integrand { id: IntegrandId::Weighted100 }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Integrand { id: IntegrandId::Constant { dim, value } }
    }

    pub fn dim(&self) -> usize {
        match self.id {
            IntegrandId::Linear37 => 37,
            IntegrandId::Weighted100 => 100,
            IntegrandId::Constant { dim, .. } => dim,
        }
    }

    pub fn true_value(&self) -> f64 {
        match self.id {
            IntegrandId::Linear37 => 18.5,
            IntegrandId::Weighted100 => 1.0,
            IntegrandId::Constant { value, .. } => value,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.id {
            IntegrandId::Linear37 => x.iter().sum(),
            IntegrandId::Weighted100 => x
                .iter()
                .enumerate()
                .map(|(j, &xj)| {
                    let jj = (j + 1) as f64;
                    1.0 + (xj * xj.exp() - 1.0) / (jj * jj)
                })
                .product(),
            IntegrandId::Constant { value, .. } => value,
        }
    }

    /// All named integrands.
    pub fn library() -> Vec<Integrand> {
        vec![Integrand::linear37(), Integrand::weighted100()]
    }
}

impl fmt::Display for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            IntegrandId::Linear37 => f.write_str("linear37"),
            IntegrandId::Weighted100 => f.write_str("weighted100"),
            IntegrandId::Constant { dim, value } => write!(f, "constant({dim},{value})"),
        }
    }
}

impl FromStr for Integrand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear37" => Ok(Integrand::linear37()),
            "weighted100" => Ok(Integrand::weighted100()),
            _ => Err(Error::Parse(format!("unknown integrand {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub spec: SequenceSpec,
    pub mode: ScrambleMode,
    pub m_min: u32,
    pub m_max: u32,
    pub reps: usize,
    pub seed: u64,
    pub integrand: Integrand,
}

impl ExperimentConfig {
    pub fn new(spec: SequenceSpec, mode: ScrambleMode, integrand: Integrand) -> Self {
        ExperimentConfig { spec, mode, m_min: 1, m_max: 14, reps: 100, seed: 0, integrand }
    }

    /// The radix of the sample sizes `n = radix^m`: the field size of digital
    /// sequences, 2 for Halton.
    pub fn radix(&self) -> u64 {
        match self.spec.family {
            crate::sequences::Family::Halton => 2,
            _ => self.spec.base.get() as u64,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::InvalidQuery("at least 2 replications are needed".into()));
        }
        if self.m_min > self.m_max {
            return Err(Error::InvalidQuery("m_min exceeds m_max".into()));
        }
        if self.integrand.dim() != self.spec.dim {
            return Err(Error::DimensionMismatch { expected: self.integrand.dim(), got: self.spec.dim });
        }
        self.radix()
            .checked_pow(self.m_max)
            .filter(|&n| n <= 1 << 32)
            .ok_or_else(|| Error::TooLarge(format!("n = {}^{} points", self.radix(), self.m_max)))?;
        Ok(())
    }
}

/// One line of an RMSE experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmseRow {
    pub m: u32,
    pub n: u64,
    pub rmse: f64,
    pub rmse_stderr: f64,
    pub mean_estimate: f64,
    /// Standard error of `mean_estimate`.
    #[serde(skip)]
    pub estimate_stderr: f64,
}

/// Points of a sequence prepared for repeated scrambling.
enum Prepared {
    /// Base 2: one top-aligned word per coordinate, row-major.
    Words { words: Vec<u64>, dim: usize },
    Digits(Vec<DigitPoint>),
}

struct Runner {
    prepared: Prepared,
    scrambler: Scrambler,
}

impl Runner {
    fn new(spec: &SequenceSpec, mode: ScrambleMode, seed: u64, n_max: u64) -> Result<Self> {
        let seq = spec.build_for(n_max)?;
        let precisions = seq.precisions().to_vec();
        let scrambler = Scrambler::new(mode, seq.base().clone(), precisions, seed)?;
        let prepared = match &seq {
            Sequence::Digital(s) if s.packed_words(0).is_some() => {
                let dim = s.dim();
                let mut words = Vec::with_capacity(n_max as usize * dim);
                for k in 0..n_max {
                    words.extend(s.packed_words(k).ok_or(Error::IndexOutOfRange { index: k, digits: 64 })?);
                }
                Prepared::Words { words, dim }
            }
            _ => Prepared::Digits(seq.points(n_max)?),
        };
        Ok(Runner { prepared, scrambler })
    }

    /// Running estimates of `f` at each requested prefix length.
    fn run(&self, f: &Integrand, rep: u64, ns: &[u64]) -> Result<Vec<f64>> {
        let state = self.scrambler.state(rep)?;
        let n_max = *ns.last().unwrap_or(&0);
        let mut out = Vec::with_capacity(ns.len());
        let mut next = 0;
        let mut sum = Neumaier::default();
        let mut x = vec![0.0; f.dim()];
        for i in 0..n_max {
            match &self.prepared {
                Prepared::Words { words, dim } => {
                    let row = &words[i as usize * dim..(i as usize + 1) * dim];
                    for (j, (&w, xj)) in row.iter().zip(x.iter_mut()).enumerate() {
                        *xj = match &state {
                            None => w as f64 * 2f64.powi(-64),
                            Some(st) => {
                                let s = st.dim(j);
                                let y = s.apply_word(w).expect("binary scramble");
                                let k = s.precision() as i32;
                                y as f64 * 2f64.powi(-64) + 2f64.powi(-k - 1)
                            }
                        };
                    }
                }
                Prepared::Digits(points) => {
                    let p = &points[i as usize];
                    match &state {
                        None => {
                            for (j, xj) in x.iter_mut().enumerate() {
                                *xj = p.value(j);
                            }
                        }
                        Some(st) => {
                            let y = st.apply(p)?;
                            for (j, xj) in x.iter_mut().enumerate() {
                                *xj = y.midpoint_value(j);
                            }
                        }
                    }
                }
            }
            sum.add(f.eval(&x));
            while next < ns.len() && ns[next] == i + 1 {
                out.push(sum.total() / ns[next] as f64);
                next += 1;
            }
        }
        Ok(out)
    }
}

/// Compensated summation; keeps estimates exact to a few ulps when the
/// replication spread is itself tiny.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn with_pool<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&t| t > 0) {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// `I(f; P_n)` for one replication with `n = radix^m`.
pub fn estimate(f: &Integrand, spec: &SequenceSpec, mode: ScrambleMode, m: u32, seed: u64, rep: u64) -> Result<f64> {
    if f.dim() != spec.dim {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: spec.dim });
    }
    let mut cfg = ExperimentConfig::new(spec.clone(), mode, *f);
    cfg.m_min = m;
    cfg.m_max = m;
    let n = cfg.radix().pow(m);
    let runner = Runner::new(spec, mode, seed, n)?;
    Ok(runner.run(f, rep, &[n])?[0])
}

/// Raw estimates: `out[rep][i]` is the estimate at `m = m_min + i`.
pub fn replicate(cfg: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let ns: Vec<u64> = (cfg.m_min..=cfg.m_max).map(|m| cfg.radix().pow(m)).collect();
    let runner = Runner::new(&cfg.spec, cfg.mode, cfg.seed, *ns.last().unwrap())?;
    with_pool(|| (0..cfg.reps as u64).into_par_iter().map(|rep| runner.run(&cfg.integrand, rep, &ns)).collect())
}

/// RMSE against the exact integral, one row per `m`.
pub fn rmse_experiment(cfg: &ExperimentConfig) -> Result<Vec<RmseRow>> {
    let est = replicate(cfg)?;
    let truth = cfg.integrand.true_value();
    let r = est.len() as f64;
    Ok((cfg.m_min..=cfg.m_max)
        .enumerate()
        .map(|(i, m)| {
            let vals: Vec<f64> = est.iter().map(|e| e[i]).collect();
            let sq: Vec<f64> = vals.iter().map(|v| (v - truth) * (v - truth)).collect();
            let mse = sq.iter().sum::<f64>() / r;
            let sd_sq = (sq.iter().map(|s| (s - mse) * (s - mse)).sum::<f64>() / (r - 1.0)).sqrt();
            let rmse = mse.sqrt();
            let rmse_stderr = if rmse > 0.0 { sd_sq / r.sqrt() / (2.0 * rmse) } else { 0.0 };
            let mean = vals.iter().sum::<f64>() / r;
            let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0)).sqrt();
            RmseRow { m, n: cfg.radix().pow(m), rmse, rmse_stderr, mean_estimate: mean, estimate_stderr: sd / r.sqrt() }
        })
        .collect())
}

/// CSV with header `m,n,rmse,rmse_stderr,mean_estimate`.
pub fn rows_to_csv(rows: &[RmseRow]) -> String {
    let mut out = String::from("m,n,rmse,rmse_stderr,mean_estimate\n");
    for r in rows {
        out.push_str(&format!("{},{},{:e},{:e},{:e}\n", r.m, r.n, r.rmse, r.rmse_stderr, r.mean_estimate));
    }
    out
}

pub fn rows_to_json(rows: &[RmseRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

/// Least-squares slope of `log2 rmse` against `m` over `m_lo..=m_hi`.
pub fn slope_fit(rows: &[RmseRow], m_lo: u32, m_hi: u32) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| (m_lo..=m_hi).contains(&r.m) && r.rmse > 0.0)
        .map(|r| (r.m as f64, r.rmse.log2()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Insufficient(format!("{} usable rows in [{m_lo}, {m_hi}]", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Mean drop `log2 rmse(m-1) - log2 rmse(m)` over `m` divisible by `period`,
/// minus the mean drop over the remaining `m`.
pub fn drop_score(rows: &[RmseRow], period: u32) -> Result<f64> {
    if period == 0 {
        return Err(Error::InvalidQuery("period must be >= 1".into()));
    }
    let (mut on, mut off) = (Vec::new(), Vec::new());
    for w in rows.windows(2) {
        if w[1].m != w[0].m + 1 || w[0].rmse <= 0.0 || w[1].rmse <= 0.0 {
            continue;
        }
        let drop = w[0].rmse.log2() - w[1].rmse.log2();
        if w[1].m % period == 0 {
            on.push(drop);
        } else {
            off.push(drop);
        }
    }
    if on.is_empty() || off.is_empty() {
        return Err(Error::Insufficient("drop_score needs drops on and off the period".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(&on) - mean(&off))
}

/// Both sides of the variance identity on one instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VarianceReport {
    /// Exact variance of the estimator over all scramble states.
    pub left: ExactRational,
    /// `sum_{u,k} G_{u,k}(P_n) / n * sigma^2_{u,k}`.
    pub right: ExactRational,
    pub states: u64,
    pub equal: bool,
}

/// Upper bound on enumerated scramble states.
pub const STATE_LIMIT: u64 = 1 << 24;

/// Exact variance of `(1/n) sum f(scrambled x_i)` over every scramble state,
/// against the gain-coefficient expansion.
///
/// `f` is cell-constant on its grid; its base gives the block sizes `e_j`
/// used by the coarse scramble, and the scrambles act on `e_j L_j` digits.
/// The usual scramble is measured in the usual base and the coarse one in
/// the grid's base.
pub fn variance_identity_check(
    f: &GridFunction<ExactRational>,
    points: &[DigitPoint],
    mode: ScrambleMode,
) -> Result<VarianceReport> {
    let (grid, block): (GridFunction<ExactRational>, Vec<usize>) = match mode {
        ScrambleMode::None => return Err(Error::InvalidQuery("mode none has no scramble states".into())),
        ScrambleMode::Usual => (f.to_usual(), vec![1; f.dim()]),
        ScrambleMode::Coarse => {
            if !f.base().is_digital() {
                return Err(Error::NonDigitalBase);
            }
            (f.clone(), f.base().exponents().iter().map(|&e| e as usize).collect())
        }
    };
    let base: &MixedBase = grid.base();
    let d = grid.dim();
    let n = points.len();
    if n == 0 {
        return Err(Error::Insufficient("no points".into()));
    }
    let digits: Vec<usize> = (0..d).map(|j| (grid.levels()[j] * base.exponent(j)) as usize).collect();
    // truncate points to the grid resolution
    let pts: Vec<DigitPoint> = points
        .iter()
        .map(|x| {
            if x.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
            }
            let ds = (0..d)
                .map(|j| {
                    x.digits(j)
                        .get(..digits[j])
                        .map(<[u8]>::to_vec)
                        .ok_or(Error::ResolutionExceedsPrecision { needed: digits[j], available: x.precision(j) })
                })
                .collect::<Result<Vec<_>>>()?;
            DigitPoint::new(x.primes().to_vec(), ds)
        })
        .collect::<Result<_>>()?;

    // per dimension and state: scrambled cell index of every point
    let mut per_dim: Vec<Vec<Vec<u64>>> = Vec::with_capacity(d);
    let mut states: u64 = 1;
    for j in 0..d {
        let b = base.prime(j);
        let all = enumerate_dimension(b, digits[j], block[j], STATE_LIMIT)?;
        states = states
            .checked_mul(all.len() as u64)
            .filter(|&s| s <= STATE_LIMIT)
            .ok_or_else(|| Error::TooLarge(format!("more than {STATE_LIMIT} scramble states")))?;
        let table = all
            .iter()
            .map(|s| {
                pts.iter()
                    .map(|x| {
                        let y = s.apply_digits(x.digits(j))?;
                        Ok(y.iter().fold(0u64, |acc, &v| acc * b.get() as u64 + v as u64))
                    })
                    .collect::<Result<Vec<u64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        per_dim.push(table);
    }

    let sizes: Vec<usize> = per_dim.iter().map(Vec::len).collect();
    let nn = ExactRational::from_int(n as i128);
    let (sum, sum_sq) = (0..states)
        .into_par_iter()
        .map(|idx| {
            let mut rest = idx;
            let choice: Vec<usize> = sizes
                .iter()
                .map(|&s| {
                    let c = (rest % s as u64) as usize;
                    rest /= s as u64;
                    c
                })
                .collect();
            let mut cell = vec![0u64; d];
            let total: ExactRational = (0..n)
                .map(|i| {
                    for j in 0..d {
                        cell[j] = per_dim[j][choice[j]][i];
                    }
                    grid.value_at_cell(&cell)
                })
                .sum();
            let est = total / nn;
            (est, est * est)
        })
        .reduce(|| (ExactRational::ZERO, ExactRational::ZERO), |a, b| (a.0 + b.0, a.1 + b.1));
    let count = ExactRational::from_int(states as i128);
    let mean = sum / count;
    let left = sum_sq / count - mean * mean;

    let sigma = grid.sigma_table()?;
    let mut right = ExactRational::ZERO;
    for ((u, k), s2) in sigma.iter() {
        if s2.is_zero() {
            continue;
        }
        let q = GainQuery { u: u.clone(), k: k.clone(), n: n as u64 };
        let g = gain_via_counts(&pts, &q, base)?;
        right = right + g / nn * *s2;
    }
    Ok(VarianceReport { equal: left == right, left, right, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_poly::PrimeBase;

    fn q(a: i128, b: i128) -> ExactRational {
        ExactRational::new(a, b)
    }

    #[test]
    fn integrand_values() {
        assert_eq!(Integrand::linear37().eval(&[0.0; 37]), 0.0);
        let near_one = 1.0 - f64::EPSILON;
        assert!((Integrand::linear37().eval(&[near_one; 37]) - 37.0).abs() < 1e-12);
        assert_eq!(Integrand::weighted100().eval(&[0.0; 100]), 0.0);
        assert_eq!("weighted100".parse::<Integrand>().unwrap(), Integrand::weighted100());
    }

    #[test]
    fn constant_estimate_is_exact() {
        let f = Integrand::constant(3, 2.5);
        for mode in [ScrambleMode::None, ScrambleMode::Usual, ScrambleMode::Coarse] {
            assert_eq!(estimate(&f, &SequenceSpec::sobol(3), mode, 5, 9, 2).unwrap(), 2.5);
        }
        assert!(estimate(&f, &SequenceSpec::sobol(4), ScrambleMode::None, 5, 9, 2).is_err());
    }

    #[test]
    fn unscrambled_linear_error_bound() {
        let v = estimate(&Integrand::linear37(), &SequenceSpec::sobol(37), ScrambleMode::None, 14, 0, 0).unwrap();
        // each coordinate of a 2^m prefix is {i / 2^m}, mean 1/2 - 2^{-m-1}
        assert!((v - 18.5).abs() <= 37.0 * 2f64.powi(-15) + 1e-9, "{v}");
    }

    #[test]
    fn deterministic_mode_has_zero_spread() {
        let mut cfg = ExperimentConfig::new(SequenceSpec::sobol(37), ScrambleMode::None, Integrand::linear37());
        cfg.m_min = 2;
        cfg.m_max = 6;
        cfg.reps = 4;
        let rows = rmse_experiment(&cfg).unwrap();
        for r in &rows {
            assert!((r.rmse - (r.mean_estimate - 18.5).abs()).abs() < 1e-12);
            assert_eq!(r.rmse_stderr, 0.0);
        }
    }

    #[test]
    fn experiment_is_deterministic() {
        let mut cfg = ExperimentConfig::new(SequenceSpec::sobol(37), ScrambleMode::Coarse, Integrand::linear37());
        cfg.m_min = 1;
        cfg.m_max = 7;
        cfg.reps = 6;
        cfg.seed = 42;
        assert_eq!(rows_to_csv(&rmse_experiment(&cfg).unwrap()), rows_to_csv(&rmse_experiment(&cfg).unwrap()));
    }

    #[test]
    fn slope_and_drop_on_synthetic_rows() {
        let mk = |m: u32, rmse: f64| RmseRow {
            m,
            n: 1 << m,
            rmse,
            rmse_stderr: 0.0,
            mean_estimate: 0.0,
            estimate_stderr: 0.0,
        };
        let rows: Vec<RmseRow> = (1..=10).map(|m| mk(m, 2f64.powi(-(m as i32)))).collect();
        assert!((slope_fit(&rows, 1, 10).unwrap() + 1.0).abs() < 1e-12);
        let rows15: Vec<RmseRow> = (1..=10).map(|m| mk(m, 2f64.powf(-1.5 * m as f64))).collect();
        assert!((slope_fit(&rows15, 1, 10).unwrap() + 1.5).abs() < 1e-12);
        assert!(drop_score(&rows, 7).unwrap().abs() < 1e-12);
        assert!(slope_fit(&rows[..2], 1, 2).is_err());
        let mut stepped = rows.clone();
        for r in stepped.iter_mut().filter(|r| r.m >= 7) {
            r.rmse /= 8.0;
        }
        assert!(drop_score(&stepped, 7).unwrap() > 2.0);
    }

    #[test]
    fn variance_identity_indicator() {
        let base = MixedBase::usual(PrimeBase::TWO, 1);
        let f = GridFunction::exact(base, vec![2], vec![q(1, 1), q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let pts = SequenceSpec::sobol(1).build().unwrap().points(2).unwrap();
        let rep = variance_identity_check(&f, &pts, ScrambleMode::Usual).unwrap();
        assert_eq!(rep.states, 8);
        assert!(rep.left.is_zero() && rep.right.is_zero());
    }

    #[test]
    fn variance_identity_two_dims() {
        let base = MixedBase::usual(PrimeBase::TWO, 2);
        let vals: Vec<ExactRational> = (0..16).map(|p| q(((p * 5 + 3) % 7) as i128, 1)).collect();
        let f = GridFunction::exact(base, vec![2, 2], vals).unwrap();
        let pts = SequenceSpec::niederreiter(2, PrimeBase::TWO).build().unwrap().points(3).unwrap();
        let rep = variance_identity_check(&f, &pts, ScrambleMode::Usual).unwrap();
        assert!(rep.equal, "{rep:?}");
        assert!(!rep.left.is_zero());
    }
}
