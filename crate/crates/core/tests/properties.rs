use coarse_qmc::anova::GridFunction;
use coarse_qmc::equidist::{cell_count_profile, is_equidistributed_prefix, is_net};
use coarse_qmc::field_poly::{enumerate_monic, random_nonsingular};
use coarse_qmc::gain::{gain_bruteforce, gain_closed, gain_via_counts, gamma_u, h_coefficient, GainQuery};
use coarse_qmc::scramble::{sample_coarse, sample_usual};
use coarse_qmc::{
    DigitPoint, ExactRational, MixedBase, PolyKind, Polynomial, Precision, PrimeBase, ScrambleMode, Scrambler,
    SequenceSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prime() -> impl Strategy<Value = PrimeBase> {
    prop_oneof![Just(2u32), Just(3), Just(5), Just(7)].prop_map(|b| PrimeBase::new(b).unwrap())
}

fn poly_in(b: PrimeBase, max_len: usize) -> impl Strategy<Value = Polynomial> {
    prop::collection::vec(0..b.get(), 0..max_len).prop_map(move |c| Polynomial::new(b, c))
}

fn poly_triple() -> impl Strategy<Value = (Polynomial, Polynomial, Polynomial)> {
    prime().prop_flat_map(|b| (poly_in(b, 9), poly_in(b, 9), poly_in(b, 9)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn poly_mul_commutes_and_associates((a, c, e) in poly_triple()) {
        prop_assert_eq!(a.mul(&c).unwrap(), c.mul(&a).unwrap());
        prop_assert_eq!(a.mul(&c).unwrap().mul(&e).unwrap(), a.mul(&c.mul(&e).unwrap()).unwrap());
        prop_assert_eq!(a.mul(&c.add(&e).unwrap()).unwrap(), a.mul(&c).unwrap().add(&a.mul(&e).unwrap()).unwrap());
    }

    #[test]
    fn remainder_ignores_multiples((a, m, r) in poly_triple()) {
        prop_assume!(!m.is_zero());
        let lhs = a.mul(&m).unwrap().add(&r).unwrap().rem(&m).unwrap();
        prop_assert_eq!(lhs, r.rem(&m).unwrap());
    }

    #[test]
    fn division_identity((a, m, _) in poly_triple()) {
        prop_assume!(!m.is_zero());
        let (q, r) = a.div_rem(&m).unwrap();
        prop_assert_eq!(q.mul(&m).unwrap().add(&r).unwrap(), a);
        prop_assert!(r.is_zero() || r.degree() < m.degree());
    }

    #[test]
    fn random_nonsingular_is_invertible(b in prime(), e in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(random_nonsingular(b, e, &mut rng).is_invertible());
    }

    #[test]
    fn rational_field_laws(a in -50i128..50, b in 1i128..20, c in -50i128..50, d in 1i128..20) {
        let x = ExactRational::new(a, b);
        let y = ExactRational::new(c, d);
        prop_assert_eq!(x + y - y, x);
        prop_assert_eq!(x * y, y * x);
        if !y.is_zero() {
            prop_assert_eq!(x * y / y, x);
        }
    }
}

#[test]
fn gauss_count() {
    for (b, n_max) in [(2u32, 12usize), (3, 7), (5, 5)] {
        let base = PrimeBase::new(b).unwrap();
        let counts: Vec<u64> = (0..=n_max).map(|n| if n == 0 { 0 } else { enumerate_monic(base, n, PolyKind::Irreducible).len() as u64 }).collect();
        for n in 1..=n_max {
            let total: u64 = (1..=n).filter(|m| n % m == 0).map(|m| m as u64 * counts[m]).sum();
            assert_eq!(total, (b as u64).pow(n as u32), "b = {b}, n = {n}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn points_do_not_depend_on_requested_length(d in 1usize..6, k in 0u64..200, extra in 1u64..5000) {
        for spec in [SequenceSpec::sobol(d), SequenceSpec::halton(d), SequenceSpec::niederreiter(d, PrimeBase::new(3).unwrap())] {
            let spec = spec.with_precision(Precision::Digits(20));
            let short = spec.build_for(k + 1).unwrap().point(k).unwrap();
            let long = spec.build_for(k + 1 + extra).unwrap().point(k).unwrap();
            prop_assert_eq!(&short, &long);
            prop_assert_eq!(short, spec.build().unwrap().point(k).unwrap());
        }
    }

    #[test]
    fn scramble_prefix_depends_only_on_prefix(
        digits in prop::collection::vec(0u8..2, 12),
        noise in prop::collection::vec(0u8..2, 12),
        cut in 0usize..=4,
        seed in any::<u64>(),
    ) {
        // block sizes 1 and 3; 12 digits is a whole number of blocks
        let base = MixedBase::coarse(PrimeBase::TWO, &[1, 3]).unwrap();
        let prec = [12usize, 12];
        let keep = [cut * 3, cut * 3];
        let x = DigitPoint::new(vec![PrimeBase::TWO; 2], vec![digits.clone(), digits.clone()]).unwrap();
        let perturb = |k: usize| -> Vec<u8> {
            digits.iter().zip(&noise).enumerate().map(|(i, (&a, &n))| if i < k { a } else { a ^ n }).collect()
        };
        let y = DigitPoint::new(vec![PrimeBase::TWO; 2], vec![perturb(keep[0]), perturb(keep[1])]).unwrap();
        for st in [sample_usual(&base, &prec, seed, 0).unwrap(), sample_coarse(&base, &prec, seed, 0).unwrap()] {
            let (sx, sy) = (st.apply(&x).unwrap(), st.apply(&y).unwrap());
            for j in 0..2 {
                prop_assert_eq!(&sx.digits(j)[..keep[j]], &sy.digits(j)[..keep[j]]);
            }
        }
    }

    #[test]
    fn cell_count_profile_of_equidistributed_prefix(k0 in 0u32..3, k1 in 0u32..2, k2 in 0u32..2, n in 1u64..300) {
        // Sobol' in base (2, 2, 4)
        let spec = SequenceSpec::sobol(3);
        let base = spec.mixed_base().unwrap();
        let pts = spec.build().unwrap().points(n).unwrap();
        let k = [k0, k1, k2];
        let big_b = (0..3).map(|j| base.radix(j).pow(k[j])).product::<u64>();
        let (q, s) = (n / big_b, n % big_b);
        let profile = cell_count_profile(&pts, &base, &k).unwrap();
        let mut expected = std::collections::BTreeMap::new();
        if s > 0 {
            expected.insert(q + 1, s);
        }
        if big_b > s {
            expected.insert(q, big_b - s);
        }
        prop_assert_eq!(profile, expected);
    }

    #[test]
    fn gain_routes_agree_and_are_bounded(
        halton in any::<bool>(),
        mask in 1u32..8,
        ks in prop::collection::vec(0u32..3, 3),
        n in 1u64..200,
    ) {
        let spec = if halton { SequenceSpec::halton(3) } else { SequenceSpec::sobol(3) };
        let base = spec.mixed_base().unwrap();
        let u: Vec<usize> = (0..3).filter(|j| mask >> j & 1 == 1).collect();
        let k: Vec<u32> = u.iter().map(|&j| ks[j]).collect();
        let q = GainQuery::new(u.clone(), k, n).unwrap();
        let pts = spec.build().unwrap().points(n).unwrap();
        let brute = gain_bruteforce(&pts, &q, &base).unwrap();
        prop_assert_eq!(brute, gain_via_counts(&pts, &q, &base).unwrap());
        prop_assert_eq!(brute, gain_closed(&q, &base).unwrap());
        prop_assert!(!brute.is_negative());
        prop_assert!(brute <= gamma_u(&u, &base).unwrap());
    }

    #[test]
    fn parseval_and_orthogonality(
        vals in prop::collection::vec(-6i128..7, 36),
        den in 1i128..5,
    ) {
        // base (2, 3), two levels each: 4 * 9 cells
        let base = MixedBase::from_pairs(&[(2, 1), (3, 1)]).unwrap();
        let values: Vec<ExactRational> = vals.iter().map(|&v| ExactRational::new(v, den)).collect();
        let f = GridFunction::exact(base, vec![2, 2], values).unwrap();
        let table = f.sigma_table().unwrap();
        prop_assert_eq!(table.total(), f.variance());
        let comps: Vec<Vec<ExactRational>> = table
            .iter()
            .map(|((u, k), _)| f.beta_on_grid(u, k).unwrap())
            .collect();
        let cells = ExactRational::from_int(36);
        for (a, ca) in comps.iter().enumerate() {
            let mean: ExactRational = ca.iter().copied().sum();
            prop_assert!(mean.is_zero());
            for cb in &comps[a + 1..] {
                let dot: ExactRational = ca.iter().zip(cb).map(|(x, y)| *x * *y).sum();
                prop_assert!(dot.is_zero());
            }
        }
        for ((_, s), c) in table.iter().zip(&comps) {
            let sq: ExactRational = c.iter().map(|x| *x * *x).sum();
            prop_assert_eq!(*s, sq / cells);
        }
    }
}

#[test]
fn h_coefficients_telescope() {
    for base in [MixedBase::usual(PrimeBase::TWO, 3), MixedBase::halton(&[PrimeBase::TWO, PrimeBase::new(3).unwrap(), PrimeBase::new(5).unwrap()]).unwrap()] {
        for mask in 1u32..8 {
            let u: Vec<usize> = (0..3).filter(|j| mask >> j & 1 == 1).collect();
            let subsets = 0..1u32 << u.len();
            let signs: i128 = subsets.clone().map(|v| if (u.len() as u32 - v.count_ones()) % 2 == 0 { 1 } else { -1 }).sum();
            assert_eq!(signs, 0);
            let total: i128 = subsets.map(|v| h_coefficient(&base, &u, v)).sum();
            let expected: i128 = u.iter().map(|&j| base.radix(j) as i128 - 1).product();
            assert_eq!(total, expected);
        }
    }
}

#[test]
fn one_dimensional_projections_are_01_sequences() {
    let d = 8;
    let n = 1u64 << 13;
    let pts = SequenceSpec::sobol(d).build_for(n).unwrap().points(n).unwrap();
    let base = MixedBase::usual(PrimeBase::TWO, 1);
    for j in 0..d {
        let proj: Vec<DigitPoint> =
            pts.iter().map(|x| DigitPoint::new(vec![PrimeBase::TWO], vec![x.digits(j).to_vec()]).unwrap()).collect();
        for m in 0..=12u32 {
            assert!(is_equidistributed_prefix(&proj, &base, &[m], n >> m).unwrap(), "j = {j}, m = {m}");
        }
    }
}

#[test]
fn net_check_is_monotone_in_t_and_closed_under_projection() {
    let spec = SequenceSpec::sobol(4);
    let base = spec.mixed_base().unwrap();
    let e = base.exponents();
    for m in 0..=9u32 {
        let pts = spec.build_for(1 << m).unwrap().points(1 << m).unwrap();
        let ones = vec![1; 4];
        let t0 = (0..=m).find(|&t| is_net(&pts, t, &ones, m, PrimeBase::TWO).unwrap().verdict).unwrap();
        for t in t0..=m {
            assert!(is_net(&pts, t, &ones, m, PrimeBase::TWO).unwrap().verdict);
        }
        assert!(is_net(&pts, 0, &e, m, PrimeBase::TWO).unwrap().verdict);
        for mask in 1u32..15 {
            let coords: Vec<usize> = (0..4).filter(|j| mask >> j & 1 == 1).collect();
            let proj: Vec<DigitPoint> = pts
                .iter()
                .map(|x| {
                    DigitPoint::new(vec![PrimeBase::TWO; coords.len()], coords.iter().map(|&j| x.digits(j).to_vec()).collect())
                        .unwrap()
                })
                .collect();
            let sub_e: Vec<u32> = coords.iter().map(|&j| e[j]).collect();
            assert!(is_net(&proj, 0, &sub_e, m, PrimeBase::TWO).unwrap().verdict, "m = {m}, coords {coords:?}");
        }
    }
}

#[test]
fn usual_scramble_keeps_the_t_value_bound() {
    let spec = SequenceSpec::sobol(4);
    let base = spec.mixed_base().unwrap();
    let t: u32 = base.exponents().iter().map(|e| e - 1).sum();
    let ones = vec![1u32; 4];
    for m in t..=10 {
        let seq = spec.build_for(1 << m).unwrap();
        let pts = seq.points(1 << m).unwrap();
        let scr = Scrambler::new(ScrambleMode::Usual, base.clone(), seq.precisions().to_vec(), 3).unwrap();
        for rep in 0..5 {
            let st = scr.state(rep).unwrap().unwrap();
            let y: Vec<DigitPoint> = pts.iter().map(|x| st.apply(x).unwrap()).collect();
            assert!(is_net(&y, t, &ones, m, PrimeBase::TWO).unwrap().verdict, "m = {m}, rep = {rep}");
        }
    }
}

#[test]
fn scrambled_point_mean_is_one_half() {
    let spec = SequenceSpec::sobol(2);
    let seq = spec.build().unwrap();
    let x = seq.point(11).unwrap();
    for mode in [ScrambleMode::Usual, ScrambleMode::Coarse] {
        let scr = Scrambler::new(mode, seq.base().clone(), seq.precisions().to_vec(), 9).unwrap();
        let reps = 4000;
        let vals: Vec<f64> = (0..reps).map(|r| scr.state(r).unwrap().unwrap().apply(&x).unwrap().midpoint_value(1)).collect();
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        assert!((mean - 0.5).abs() <= 4.0 * sd / (reps as f64).sqrt(), "{mode}: {mean}");
    }
}
