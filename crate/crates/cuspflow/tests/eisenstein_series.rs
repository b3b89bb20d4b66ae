use cuspflow::eisenstein::*;
use cuspflow::harmonics::Profile;
use cuspflow::picard::{HPoint, PicardMatrix, Sl2c};
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(s: f64) -> Complex64 {
    Complex64::new(s, 0.0)
}

fn pt(x: f64, y: f64, h: f64) -> HPoint {
    HPoint::new(Complex64::new(x, y), h).unwrap()
}

// Independent oracle: zeta_K(s) = zeta(s) L(s, chi_4), both as plain alternating
// or Euler-Maclaurin-accelerated sums.
fn zeta(s: f64) -> f64 {
    let n = 2_000.0f64;
    let head: f64 = (1..2_000).map(|k| (k as f64).powf(-s)).sum();
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s / 12.0 * n.powf(-s - 1.0)
}

fn dirichlet_beta(s: f64) -> f64 {
    // Average of consecutive partial sums of the alternating series.
    let k_max = 200_000;
    let mut sum = 0.0;
    let mut prev = 0.0;
    for k in 0..k_max {
        prev = sum;
        let term = (2 * k + 1) as f64;
        sum += if k % 2 == 0 { 1.0 } else { -1.0 } * term.powf(-s);
    }
    0.5 * (sum + prev)
}

fn c_closed_form(s: f64) -> f64 {
    let zk = |x: f64| zeta(x) * dirichlet_beta(x);
    PI / (s - 1.0) * zk(s - 1.0) / zk(s)
}

#[test]
fn oracle_matches_known_value() {
    assert!((c_closed_form(2.5) - 3.716_898).abs() < 1e-4);
}

#[test]
fn c_estimates_match_closed_form() {
    let trunc = TruncationParams { n_bound: 190, ..TruncationParams::default() };
    for s in [2.3, 2.5, 2.8] {
        let want = c_closed_form(s);
        for m in 0..3 {
            let e = estimate_c(s, m, &trunc).unwrap();
            assert!((e.value - want).abs() <= e.err.max(0.01 * want), "s={s} m={m} {} vs {want}", e.value);
        }
    }
}

#[test]
fn truncated_series_grows_with_n_and_increments_respect_tail() {
    let p = pt(0.3, 0.1, 0.8);
    let s = c(2.5);
    let mut prev: Option<(f64, f64)> = None;
    for n in [10, 20, 40, 80, 160] {
        let trunc = TruncationParams { n_bound: n, tail: false, ..TruncationParams::default() };
        let v = eisenstein_eval(s, &p, &trunc).unwrap();
        if let Some((val, tail)) = prev {
            assert!(v.value.re >= val - 1e-12, "N={n}");
            assert!(v.value.re - val <= tail, "N={n} inc={} tail={tail}", v.value.re - val);
        }
        prev = Some((v.value.re, v.tail_bound));
    }
}

#[test]
fn invariance_defect_is_below_tail_bound() {
    let trunc = TruncationParams { n_bound: 120, ..TruncationParams::default() };
    let s = c(2.5);
    for p in [pt(0.2, 0.35, 0.9), pt(-0.4, 0.1, 0.6), pt(0.1, -0.3, 1.4)] {
        let base = eisenstein_eval(s, &p, &trunc).unwrap();
        for gamma in PicardMatrix::generators() {
            let q = gamma.to_sl2c().act(&p);
            let moved = eisenstein_eval(s, &q, &trunc).unwrap();
            let defect = (moved.value - base.value).norm();
            assert!(defect <= base.tail_bound + moved.tail_bound, "defect {defect}");
        }
    }
}

#[test]
fn nonspherical_series_is_invariant() {
    let trunc = TruncationParams { n_bound: 120, ..TruncationParams::default() };
    let reps = enumerate_cosets(trunc.n_bound);
    let g = Sl2c::from_iwasawa(&pt(0.15, 0.25, 0.9), Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
    for m in [1u32, 2] {
        let base = eisenstein_sum(&reps, m, c(2.6), &g, &trunc).unwrap();
        let inv = PicardMatrix::inversion().to_sl2c().mul(&g);
        let moved = eisenstein_sum(&reps, m, c(2.6), &inv, &trunc).unwrap();
        assert!((moved.value - base.value).norm() <= base.tail_bound + moved.tail_bound);
    }
}

#[test]
fn theta_norm_bound_holds_on_corpus() {
    let c0 = residue_estimate(400);
    for (a, b, d) in [(-0.6, 0.4, 0.3), (-1.0, 1.0, 0.5), (0.2, 1.2, 0.3)] {
        let f = ProductTestFunction::new(Profile::smoothed_indicator(a, b, d), 0);
        let r = theta_norm_check(&f, c0, 20_000, 3).unwrap();
        assert!(r.holds(), "{r:?}");
    }
}

#[test]
fn residue_matches_closed_form() {
    let want = PI * PI / (4.0 * 1.644_934_066_848_226 * 0.915_965_594_177_219);
    assert!((residue_estimate(400) - want).abs() < 0.02 * want);
}

#[test]
fn zero_test_function_unfolds_to_zero() {
    let f = ProductTestFunction::new(Profile::new(0.0, 1.0, 4, |_| 0.0), 0);
    let r = unfolding_check(&f, UnfoldingPartner::One, 1_000, 1).unwrap();
    assert_eq!(r.lhs, 0.0);
    assert_eq!(r.rhs, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn block_sums_match_explicit_rows_anywhere(x in -0.5f64..0.5, y in -0.5f64..0.5, h in 0.4f64..2.0, m in 0u32..3) {
        let trunc = TruncationParams { n_bound: 10, window: 40, tail: false, ..TruncationParams::default() };
        let reps = enumerate_cosets(trunc.n_bound);
        let g = Sl2c::from_iwasawa(&pt(x, y, h), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let block = eisenstein_sum(&reps, m, c(2.7), &g, &trunc).unwrap().value;
        let anchor = Complex64::new(x, y);
        let rows = expand_rows(&reps, 40, anchor);
        let explicit = row_sum(&rows, m, c(2.7), &g);
        // The block sums add the analytic exterior of each window.
        prop_assert!((block - explicit).norm() <= 0.02 * block.norm());
    }
}
