use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use coarse_qmc::equidist::{is_net, is_net_sampled};
use coarse_qmc::field_poly::enumerate_monic;
use coarse_qmc::gain::{gain_bruteforce, gain_closed, gain_d_report, gain_via_counts, GainQuery};
use coarse_qmc::rqmc::{rmse_experiment, rows_to_csv, rows_to_json, ExperimentConfig, Integrand};
use coarse_qmc::{
    DigitPoint, ExactRational, GridFunction, PolyKind, Polynomial, Precision, PrimeBase, ScrambleMode, Scrambler,
    Sequence, SequenceSpec,
};

#[derive(Parser)]
#[command(name = "cqmc", version, about = "Coarse scrambling for digital and Halton sequences")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print points of a sequence.
    Generate {
        #[command(flatten)]
        seq: SeqArgs,
        #[command(flatten)]
        out: PointArgs,
    },
    /// Print points of a scrambled sequence.
    Scramble {
        #[command(flatten)]
        seq: SeqArgs,
        #[command(flatten)]
        out: PointArgs,
        #[command(flatten)]
        scr: ScrambleArgs,
    },
    /// Check the (t, e, m, d)-net property of the first b^m points.
    CheckNet {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long, default_value_t = 0)]
        t: u32,
        #[arg(long)]
        m: u32,
        #[command(flatten)]
        scr: ScrambleArgs,
        /// Block exponents; defaults to the polynomial degrees.
        #[arg(long, value_delimiter = ',')]
        e: Vec<u32>,
        /// Check this many randomly chosen resolution vectors instead of all.
        #[arg(long)]
        sample_k: Option<usize>,
    },
    /// Gain coefficient G_{u,k}(n).
    Gain {
        #[command(flatten)]
        seq: SeqArgs,
        /// 1-based coordinates, e.g. 1,3.
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<u32>,
        #[arg(long)]
        n: u64,
        #[arg(long, value_enum, default_value_t = Method::Closed)]
        method: Method,
    },
    /// CSV of gain coefficients over all u, k_j <= kmax and n <= nmax.
    GainTable {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long, default_value_t = 1)]
        kmax: u32,
        #[arg(long, default_value_t = 16)]
        nmax: u64,
        #[arg(long, value_enum, default_value_t = Method::Closed)]
        method: Method,
    },
    /// Worst-case gain of the full Niederreiter sequence and its upper bound.
    Gamma {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        base: u32,
    },
    /// Variance components of a grid function as CSV.
    Anova {
        #[arg(long)]
        grid: PathBuf,
    },
    /// RMSE experiment over replications.
    Experiment {
        #[arg(long, default_value = "linear37")]
        integrand: String,
        #[arg(long, value_enum, default_value_t = FamilyArg::Sobol)]
        family: FamilyArg,
        #[arg(long, default_value_t = 2)]
        base: u32,
        #[arg(long, value_enum, default_value_t = ModeArg::Usual)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1)]
        mmin: u32,
        #[arg(long, default_value_t = 14)]
        mmax: u32,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
    /// List monic polynomials of one degree.
    Polys {
        #[arg(long, default_value_t = 2)]
        base: u32,
        #[arg(long)]
        degree: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Irreducible)]
        kind: KindArg,
        /// Print only the count.
        #[arg(long)]
        count: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Sobol,
    Niederreiter,
    Halton,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    None,
    Usual,
    Coarse,
}

impl From<ModeArg> for ScrambleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::None => ScrambleMode::None,
            ModeArg::Usual => ScrambleMode::Usual,
            ModeArg::Coarse => ScrambleMode::Coarse,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Brute,
    Counts,
    Closed,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointFormat {
    Csv,
    Digits,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    All,
    Irreducible,
    Primitive,
}

#[derive(Args)]
struct SeqArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Sobol)]
    family: FamilyArg,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Field size of the Niederreiter family.
    #[arg(long, default_value_t = 2)]
    base: u32,
    /// Explicit base polynomials as ascending coefficient strings; overrides
    /// the family.
    #[arg(long, value_delimiter = ',')]
    poly: Vec<String>,
    /// Digits per coordinate.
    #[arg(long)]
    precision: Option<usize>,
}

impl SeqArgs {
    fn spec(&self) -> Result<SequenceSpec> {
        let base = PrimeBase::new(self.base)?;
        let spec = if !self.poly.is_empty() {
            let polys = self.poly.iter().map(|s| Polynomial::parse(base, s)).collect::<Result<Vec<_>, _>>()?;
            SequenceSpec::custom(polys)?
        } else {
            match self.family {
                FamilyArg::Sobol => SequenceSpec::sobol(self.d),
                FamilyArg::Niederreiter => SequenceSpec::niederreiter(self.d, base),
                FamilyArg::Halton => SequenceSpec::halton(self.d),
            }
        };
        Ok(match self.precision {
            Some(p) => spec.with_precision(Precision::Digits(p)),
            None => spec,
        })
    }
}

#[derive(Args)]
struct PointArgs {
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    start: u64,
    #[arg(long, value_enum, default_value_t = PointFormat::Csv)]
    format: PointFormat,
}

#[derive(Args)]
struct ScrambleArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::None)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    rep: u64,
}

impl ScrambleArgs {
    fn apply(&self, seq: &Sequence, points: Vec<DigitPoint>) -> Result<Vec<DigitPoint>> {
        let scr = Scrambler::new(self.mode.into(), seq.base().clone(), seq.precisions().to_vec(), self.seed)?;
        match scr.state(self.rep)? {
            None => Ok(points),
            Some(st) => Ok(points.iter().map(|x| st.apply(x)).collect::<Result<_, _>>()?),
        }
    }
}

fn print_points(points: &[DigitPoint], format: PointFormat) {
    for x in points {
        let fields: Vec<String> = match format {
            PointFormat::Csv => x.values().iter().map(|v| format!("{v:.17}")).collect(),
            PointFormat::Digits => (0..x.dim()).map(|j| x.digit_string(j)).collect(),
        };
        println!("{}", fields.join(","));
    }
}

fn ratio_parts(g: &ExactRational) -> (i128, i128) {
    (g.numer(), g.denom())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Generate { seq, out } => {
            let s = seq.spec()?.build_for(out.start + out.n)?;
            print_points(&s.points_from(out.start, out.n)?, out.format);
        }
        Cmd::Scramble { seq, out, scr } => {
            let s = seq.spec()?.build_for(out.start + out.n)?;
            let pts = scr.apply(&s, s.points_from(out.start, out.n)?)?;
            print_points(&pts, out.format);
        }
        Cmd::CheckNet { seq, t, m, scr, e, sample_k } => {
            let spec = seq.spec()?;
            let base = spec.mixed_base()?;
            let Some(b) = base.common_prime() else {
                bail!("net checks need a single prime base");
            };
            let n = (b.get() as u64).checked_pow(m).context("b^m overflows")?;
            let s = spec.build_for(n)?;
            let pts = scr.apply(&s, s.points(n)?)?;
            let e = if e.is_empty() { base.exponents() } else { e };
            let report = match sample_k {
                Some(k) => is_net_sampled(&pts, t, &e, m, b, k, scr.seed)?,
                None => is_net(&pts, t, &e, m, b)?,
            };
            println!("{}", serde_json::to_string(&report)?);
            if !report.verdict {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Gain { seq, u, k, n, method } => {
            let spec = seq.spec()?;
            let q = GainQuery::new(zero_based(&u)?, k, n)?;
            let g = gain_one(&spec, &q, method)?;
            let (num, den) = ratio_parts(&g);
            println!(
                "{}",
                serde_json::json!({ "u": u, "k": q.k, "n": n, "gain": g.to_string(), "num": num, "den": den, "value": g.to_f64() })
            );
        }
        Cmd::GainTable { seq, kmax, nmax, method } => {
            let spec = seq.spec()?;
            let d = spec.dim;
            if d > 12 {
                bail!("gain-table enumerates all subsets; use d <= 12");
            }
            println!("u,k,n,G_num,G_den");
            for mask in 1u32..(1 << d) {
                let u: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
                let mut k = vec![0u32; u.len()];
                loop {
                    for n in 1..=nmax {
                        let q = GainQuery::new(u.clone(), k.clone(), n)?;
                        let (num, den) = ratio_parts(&gain_one(&spec, &q, method)?);
                        println!("{},{},{n},{num},{den}", join(u.iter().map(|j| j + 1)), join(k.iter()));
                    }
                    let Some(pos) = k.iter().position(|&kj| kj < kmax) else { break };
                    k[pos] += 1;
                    k[..pos].iter_mut().for_each(|kj| *kj = 0);
                }
            }
        }
        Cmd::Gamma { d, base } => {
            let b = PrimeBase::new(base)?;
            println!("{}", serde_json::to_string_pretty(&gain_d_report(d, b)?)?);
        }
        Cmd::Anova { grid } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let f = GridFunction::<ExactRational>::parse_text(&text)?;
            print!("{}", f.sigma_table()?.to_csv());
        }
        Cmd::Experiment { integrand, family, base, mode, mmin, mmax, reps, seed, out, format } => {
            let f: Integrand = integrand.parse()?;
            let b = PrimeBase::new(base)?;
            let spec = match family {
                FamilyArg::Sobol => SequenceSpec::sobol(f.dim()),
                FamilyArg::Niederreiter => SequenceSpec::niederreiter(f.dim(), b),
                FamilyArg::Halton => SequenceSpec::halton(f.dim()),
            };
            let mut cfg = ExperimentConfig::new(spec, mode.into(), f);
            cfg.m_min = mmin;
            cfg.m_max = mmax;
            cfg.reps = reps;
            cfg.seed = seed;
            let rows = rmse_experiment(&cfg)?;
            let text = match format {
                TableFormat::Csv => rows_to_csv(&rows),
                TableFormat::Json => rows_to_json(&rows) + "\n",
            };
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Cmd::Polys { base, degree, kind, count } => {
            let kind = match kind {
                KindArg::All => PolyKind::All,
                KindArg::Irreducible => PolyKind::Irreducible,
                KindArg::Primitive => PolyKind::Primitive,
            };
            let polys = enumerate_monic(PrimeBase::new(base)?, degree, kind);
            if count {
                println!("{}", polys.len());
            } else {
                for p in polys {
                    println!("{}", p.to_coeff_string());
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn gain_one(spec: &SequenceSpec, q: &GainQuery, method: Method) -> Result<ExactRational> {
    let base = spec.mixed_base()?;
    if method == Method::Closed {
        return Ok(gain_closed(q, &base)?);
    }
    let s = spec.build_for(q.n)?;
    let pts = s.points(q.n)?;
    Ok(match method {
        Method::Brute => gain_bruteforce(&pts, q, &base)?,
        _ => gain_via_counts(&pts, q, &base)?,
    })
}

fn zero_based(u: &[usize]) -> Result<Vec<usize>> {
    u.iter().map(|&j| j.checked_sub(1).context("coordinates are 1-based")).collect()
}

fn join<T: ToString>(it: impl Iterator<Item = T>) -> String {
    it.map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
