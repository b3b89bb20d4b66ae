use cuspflow::excursion::*;
use cuspflow::picard::{random_su2, reduce_to_max_height, HPoint, PicardMatrix, Sl2c};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

/// Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value.
fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lam = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    if lam < 0.2 {
        return (d, 1.0);
    }
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp()
        })
        .sum();
    (d, p.clamp(0.0, 1.0))
}

#[test]
fn ks_helper_sanity() {
    let a: Vec<f64> = (0..200).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..200).map(|i| i as f64 + 1000.0).collect();
    assert_eq!(ks_two_sample(&a, &b).0, 1.0);
    assert!(ks_two_sample(&a, &a).1 > 0.99);
}

#[test]
fn haar_height_tail_follows_cubic_density() {
    // Density h^{-3} dh above the floor of the domain: P(h > x | h > x0) = (x0 / x)^2.
    let n = 40_000u64;
    let hs: Vec<f64> = (0..n).map(|i| haar_sample(5, i).unwrap().base.basepoint_image().h).collect();
    let x0 = 1.2;
    let above: Vec<f64> = hs.iter().copied().filter(|&h| h > x0).collect();
    for x in [1.5, 2.0, 3.0] {
        let frac = above.iter().filter(|&&h| h > x).count() as f64 / above.len() as f64;
        let want = (x0 / x).powi(2);
        let se = (want * (1.0 - want) / above.len() as f64).sqrt();
        assert!((frac - want).abs() < 4.0 * se + 1e-3, "x={x} frac={frac} want={want}");
    }
}

#[test]
fn haar_samples_are_reduced() {
    for i in 0..200 {
        let st = haar_sample(3, i).unwrap();
        let p = st.base.basepoint_image();
        assert!((st.height() - p.h).abs() <= 1e-12 * p.h);
    }
}

#[test]
fn loglaw_summaries_agree_across_seeds() {
    let a = loglaw_statistic(150, 2_000, 1).unwrap();
    let b = loglaw_statistic(150, 2_000, 2).unwrap();
    let xa: Vec<f64> = a.per_sample.iter().map(|p| p.max_ratio).collect();
    let xb: Vec<f64> = b.per_sample.iter().map(|p| p.max_ratio).collect();
    let (d, p) = ks_two_sample(&xa, &xb);
    assert!(p > 0.01, "KS D={d} p={p}");
}

#[test]
fn statistic_dominates_endpoint() {
    let st = haar_sample(8, 0).unwrap();
    let pts = loglaw_sup(&st.base, &[500]);
    let mut end = OrbitState::new(st.base);
    end.advance(500.0);
    assert!(pts[0].max_ratio >= end.cusp_distance() / 500f64.ln() - 1e-12);
    assert!(pts[0].sup_ratio >= end.cusp_distance() / 500f64.ln() - 1e-12);
}

#[test]
fn doubled_stride_stays_within_continuity_bound() {
    // One unit of u^- moves the basepoint by 2 asinh(1/2).
    let step = 2.0 * 0.5f64.asinh();
    for i in 0..5 {
        let g = haar_sample(21, i).unwrap().base;
        let full = orbit_excursion(&g, 2_000.0, 1.0).unwrap();
        let half = orbit_excursion(&g, 2_000.0, 2.0).unwrap();
        let a = full.dists.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let b = half.dists.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(b <= a + 1e-9 && a - b <= step + 1e-9, "a={a} b={b}");
    }
}

#[test]
fn large_height_diagonal_has_distance_t() {
    for t in [3.0, 6.0, 10.0] {
        let g = Sl2c::a(t);
        assert!((cusp_distance(&g) - t).abs() < 1e-9);
    }
}

#[test]
fn minus_counters_exceed_plus_counters() {
    for i in 0..10 {
        let g = haar_sample(17, i).unwrap().base;
        let p = borel_cantelli_counter(&g, 0.5, Threshold::Plus, 10, 20_000);
        let m = borel_cantelli_counter(&g, 0.5, Threshold::Minus, 10, 20_000);
        assert!(m >= p);
    }
}

#[test]
fn slab_points_lie_in_the_target_set() {
    // a_t k with t >= tau_l and k in K(l) lies in Q A(r_l) B^- g_{-l}.
    let spec = DmSpec::new(10, 0.1).unwrap();
    let mut rng = sample_rng(33, 0);
    for _ in 0..2_000 {
        let l = rng.gen_range(2..=400u64);
        let x = loop {
            let x = Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            if x.norm() < 0.5 {
                break x;
            }
        };
        let (q1, q2) = slab_k(x, l);
        let t = spec.tau(l) + rng.gen_range(0.0..3.0);
        let (u1, _) = random_su2(&mut rng);
        let m = Sl2c { a: u1.conj(), b: Complex64::new(0.0, 0.0), c: Complex64::new(0.0, 0.0), d: u1 };
        let q = Sl2c::u(Complex64::new(rng.gen(), rng.gen())).mul(&m);
        let g = q.mul(&Sl2c::a(t)).mul(&Sl2c::k(q1, q2));
        assert!(in_qab(&g.mul(&flow(l as f64)), spec.r(l)), "l={l} x={x} t={t}");
    }
}

#[test]
fn members_make_excursions() {
    let spec = DmSpec::new(20, 0.1).unwrap();
    let mut seen = 0;
    for i in 0..400 {
        let g = haar_sample(41, i).unwrap().base;
        if let Membership::Member { witness } = dm_membership(&g, &spec) {
            seen += 1;
            let d = cusp_distance(&g.mul(&flow(witness as f64)));
            assert!(d >= spec.r(witness) - 2f64.ln(), "d={d} r={}", spec.r(witness));
        }
    }
    assert!(seen > 20);
}

#[test]
fn smaller_epsilon_does_not_raise_the_rate() {
    let wide = estimate_sigma_ym(&DmSpec::new(10, 0.5).unwrap(), 1000, 3).unwrap();
    let narrow = estimate_sigma_ym(&DmSpec::new(10, 0.05).unwrap(), 1000, 3).unwrap();
    assert!(narrow.members <= wide.members);
    assert!(narrow.rate <= wide.ci_hi);
}

#[test]
fn mass_condition_holds_at_default_epsilon() {
    for m in [10u64, 20, 40, 80] {
        assert!(DmSpec::new(m, 0.1).unwrap().mass() >= 1.0);
    }
}

#[test]
fn reduction_examples() {
    let high = reduce_to_max_height(&HPoint::new(Complex64::new(0.3, 0.2), 100.0).unwrap(), 4);
    assert_eq!(high.gamma, PicardMatrix::IDENTITY);
    assert!((high.point.h - 100.0).abs() < 1e-9);
    let low = reduce_to_max_height(&HPoint::new(Complex64::new(0.0, 0.0), 0.1).unwrap(), 4);
    assert!((low.point.h - 10.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cusp_distance_is_left_invariant(seed in any::<u64>(), word in proptest::collection::vec(0usize..4, 1..8)) {
        let g = haar_sample(seed, 0).unwrap().base;
        let gens = PicardMatrix::generators();
        let mut gamma = PicardMatrix::IDENTITY;
        for w in word {
            gamma = gamma.mul(&gens[w]);
        }
        let d0 = cusp_distance(&g);
        let d1 = cusp_distance(&gamma.to_sl2c().mul(&g));
        prop_assert!((d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn running_ratio_is_monotone(seed in any::<u64>()) {
        let g = haar_sample(seed, 0).unwrap().base;
        let s = orbit_excursion(&g, 300.0, 1.0).unwrap();
        let finite: Vec<f64> = s.running_ratio.iter().copied().filter(|v| v.is_finite()).collect();
        prop_assert!(finite.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn normalizer_recovers_unipotents(seed in any::<u64>()) {
        let mut rng = sample_rng(seed, 0);
        let (q1, q2) = random_su2(&mut rng);
        let k = Sl2c::k(q1, q2);
        let eta: f64 = rng.gen_range(-5.0..5.0);
        let g = k.inverse().mul(&Sl2c::u(Complex64::new(eta, 0.0))).mul(&k);
        prop_assume!(eta.abs() > 1e-3);
        let (k2, eta2) = unipotent_normal_form(&g).unwrap();
        let back = k2.inverse().mul(&Sl2c::u_lower(Complex64::new(eta2, 0.0))).mul(&k2);
        let neg = Sl2c { a: -back.a, b: -back.b, c: -back.c, d: -back.d };
        prop_assert!(back.dist(&g).min(neg.dist(&g)) < 1e-9 * (1.0 + g.max_abs()));
    }
}
