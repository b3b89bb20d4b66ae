use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use cuspflow::eisenstein::{enumerate_cosets, estimate_c_with, EisensteinError, TruncationParams, ZETA_K2};
use cuspflow::excursion::{
    dm_volume_mc, estimate_sigma_ym, haar_sample, loglaw_statistics, orbit_excursion, DmSpec, ExcursionError,
    LoglawReport,
};
use cuspflow::lie::{
    b1, b1_coefficients, b2, b2_coefficients, coord_t, coord_theta0, coord_theta1, coords, lie_derivative_numeric,
    phi_sm_eval, raising_apply, verify_commutator_table, verify_root_spaces, Difference,
};
use cuspflow::vahlen::random::{random_point, random_vahlen};
use cuspflow::{dist_hyp, VahlenMatrix};

use crate::config::{Format, RunConfig};
use crate::output::{write_csv, write_json, Clock, Gate};
use crate::CliError;

/// Outcome of a command: where the artifact went and whether its gate passed.
pub struct Done {
    pub path: std::path::PathBuf,
    pub gate: Gate,
}

fn from_eisenstein(e: EisensteinError) -> CliError {
    match e {
        EisensteinError::BudgetExceeded(n) => CliError::Budget(format!("{n} candidate rows")),
        other => CliError::Numerics(other.to_string()),
    }
}

fn from_excursion(e: ExcursionError) -> CliError {
    CliError::Numerics(e.to_string())
}

fn check_steps(cfg: &RunConfig, steps: f64) -> Result<(), CliError> {
    if steps > cfg.max_steps as f64 {
        Err(CliError::Budget(format!("{steps:.3e} flow steps requested, max-steps is {}", cfg.max_steps)))
    } else {
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct Suite {
    pub name: &'static str,
    pub backend: &'static str,
    pub checked: usize,
    pub failures: usize,
    pub max_error: Option<f64>,
    pub passed: bool,
}

fn exact_suites(n: usize) -> Vec<Suite> {
    let c = verify_commutator_table(n);
    let r = verify_root_spaces(n);
    vec![
        Suite {
            name: "commutator table",
            backend: "rational",
            checked: c.checked,
            failures: c.violations.len(),
            max_error: None,
            passed: c.passed(),
        },
        Suite {
            name: "root spaces",
            backend: "rational",
            checked: r.checked,
            failures: r.violations.len(),
            max_error: None,
            passed: r.passed(),
        },
    ]
}

fn interior_point(n: usize, rng: &mut ChaCha8Rng) -> VahlenMatrix<f64> {
    loop {
        let g = random_vahlen(n, rng, 1.0);
        if let Ok((_, a, b)) = coords(&g) {
            if (0.2..PI - 0.2).contains(&a) && (0.2..PI - 0.2).contains(&b) {
                return g;
            }
        }
    }
}

fn suite(name: &'static str, checked: usize, errs: &[f64], tol: f64) -> Suite {
    let worst = errs.iter().copied().fold(0.0f64, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let failures = errs.iter().filter(|e| !(**e <= tol)).count();
    Suite { name, backend: "f64", checked, failures, max_error: Some(worst), passed: failures == 0 }
}

fn float_suites(n: usize, seed: u64) -> Vec<Suite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<_> = (0..50).map(|_| interior_point(n, &mut rng)).collect();

    let mut deriv = Vec::new();
    for g in &pts {
        let (_, th0, th1) = coords(g).expect("interior point");
        for (x, want) in [(b1::<f64>(n), b1_coefficients(th0, th1)), (b2::<f64>(n), b2_coefficients(th0, th1))] {
            for (k, f) in [coord_t, coord_theta0, coord_theta1].into_iter().enumerate() {
                let got = lie_derivative_numeric(&x, f, g, 1e-3, Difference::Richardson).map(|z| z.re);
                deriv.push(match got {
                    Ok(v) if want[k] == 0.0 => v.abs(),
                    Ok(v) => (v - want[k]).abs() / want[k].abs(),
                    Err(_) => f64::NAN,
                });
            }
        }
    }

    let mut raising = Vec::new();
    for s in [Complex64::new(2.5, 0.0), Complex64::new(1.3, 0.7), Complex64::new(3.0, -2.0)] {
        for m in 0..=6u32 {
            for g in &pts {
                let err = match (raising_apply(s, m, g, 1e-3), phi_sm_eval(s, m + 1, g)) {
                    (Ok(got), Ok(phi)) => (got - (s + m as f64) * phi).norm() / ((s + m as f64) * phi).norm(),
                    _ => f64::NAN,
                };
                raising.push(err);
            }
        }
    }

    let (mut iw, mut iso) = (Vec::new(), Vec::new());
    for _ in 0..1000 {
        let g = random_vahlen(n, &mut rng, 2.0);
        iw.push(match g.iwasawa_decompose() {
            Ok(c) => VahlenMatrix::from_iwasawa(&c).dist_pm(&g) / g.matrix().l1_norm(),
            Err(_) => f64::NAN,
        });
        let (p, q) = (random_point(n, &mut rng), random_point(n, &mut rng));
        let d0 = dist_hyp(&p, &q);
        iso.push(match (g.mobius_apply(&p), g.mobius_apply(&q)) {
            (Ok(a), Ok(b)) => (dist_hyp(&a, &b) - d0).abs() / (1.0 + d0),
            _ => f64::NAN,
        });
    }

    vec![
        suite("Lie derivatives of (t, theta0, theta1)", deriv.len(), &deriv, 1e-5),
        suite("raising operator", raising.len(), &raising, 1e-5),
        suite("Iwasawa round trip", iw.len(), &iw, 1e-10),
        suite("Mobius isometry", iso.len(), &iso, 1e-9),
    ]
}

#[derive(Serialize)]
struct VerifyResult {
    n: usize,
    suites: Vec<Suite>,
}

pub fn verify(cfg: &RunConfig, clock: &Clock) -> Result<Done, CliError> {
    let mut suites = exact_suites(cfg.n);
    if !cfg.exact {
        suites.extend(float_suites(cfg.n, cfg.seed));
    }
    for s in &suites {
        println!(
            "{:<40} {:<8} {:>6} checks  {}",
            s.name,
            s.backend,
            s.checked,
            if s.passed { "pass" } else { "FAIL" }
        );
    }
    let failed: Vec<&str> = suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
    let gate = Gate {
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} suites passed", suites.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    };
    let path = write_json(cfg, &gate, &VerifyResult { n: cfg.n, suites }, clock)?;
    Ok(Done { path, gate })
}

/// One record per weight.
#[derive(Debug, Serialize)]
pub struct CRecord {
    pub s: f64,
    pub m: u32,
    #[serde(rename = "N")]
    pub n_bound: i64,
    #[serde(rename = "C_estimate")]
    pub c_estimate: f64,
    pub err: f64,
    pub fit_residual: f64,
    pub leading: f64,
    pub terms: usize,
    pub tail: f64,
}

/// Expected number of coset blocks with `|c|^2 <= N`.
pub fn expected_terms(n_bound: i64) -> f64 {
    let c0 = PI * PI / (4.0 * ZETA_K2);
    1.0 + c0 * (n_bound as f64).powi(2) / (2.0 * PI)
}

pub fn eisenstein(cfg: &RunConfig, clock: &Clock) -> Result<Done, CliError> {
    let est = expected_terms(cfg.n_bound);
    if est > cfg.max_terms as f64 {
        return Err(CliError::Budget(format!("about {est:.0} coset terms for N = {}, max-terms is {}", cfg.n_bound, cfg.max_terms)));
    }
    let trunc = TruncationParams { n_bound: cfg.n_bound, window: cfg.window, quad_points: cfg.quad_points, tail: true };
    let reps = enumerate_cosets(cfg.n_bound);
    let mut records = Vec::new();
    for &m in &cfg.m {
        let e = estimate_c_with(&reps, cfg.s, m as u32, &trunc).map_err(from_eisenstein)?;
        println!("m = {m}: C({}) = {:.6} +- {:.2e}", cfg.s, e.value, e.err);
        records.push(CRecord {
            s: e.s,
            m: e.m,
            n_bound: e.n_bound,
            c_estimate: e.value,
            err: e.err,
            fit_residual: e.fit_residual,
            leading: e.leading,
            terms: e.terms,
            tail: e.tail,
        });
    }
    let mut spread = 0.0f64;
    for a in &records {
        for b in &records {
            spread = spread.max((a.c_estimate - b.c_estimate).abs() / a.c_estimate.abs().min(b.c_estimate.abs()));
        }
    }
    let resid = records.iter().map(|r| r.fit_residual).fold(0.0, f64::max);
    let gate = Gate {
        passed: spread <= 0.02 && resid <= 1e-3,
        detail: format!("pairwise spread {spread:.3e} (limit 2e-2), fit residual {resid:.3e} (limit 1e-3)"),
    };
    let path = match cfg.format {
        Format::Json => write_json(cfg, &gate, &records, clock)?,
        Format::Csv => write_csv(
            cfg,
            &gate,
            &["s", "m", "N", "C_estimate", "err", "fit_residual", "leading", "terms", "tail"],
            &records,
            clock,
        )?,
    };
    Ok(Done { path, gate })
}

/// Horizons reported by `loglaw`: powers of ten from 100 below `T`, then `T`.
pub fn loglaw_horizons(t_max: u64) -> Vec<u64> {
    let mut hs: Vec<u64> = std::iter::successors(Some(100u64), |h| h.checked_mul(10)).take_while(|&h| h < t_max).collect();
    hs.push(t_max);
    hs
}

#[derive(Serialize)]
struct LoglawRow {
    sample_id: usize,
    seed: u64,
    horizon: u64,
    max_ratio: f64,
    sup_ratio: f64,
}

pub fn loglaw(cfg: &RunConfig, clock: &Clock) -> Result<Done, CliError> {
    let t = cfg.t_max as u64;
    check_steps(cfg, cfg.samples as f64 * t as f64)?;
    let reps: Vec<LoglawReport> = loglaw_statistics(cfg.samples, &loglaw_horizons(t), cfg.seed).map_err(from_excursion)?;
    for r in &reps {
        println!(
            "T = {:>9}: median max dist / log T = {:.4}  (IQR {:.4}..{:.4})",
            r.horizon, r.summary.median, r.summary.q1, r.summary.q3
        );
    }
    let last = reps.last().expect("at least one horizon");
    let med = last.summary.median;
    let gate = Gate {
        passed: (0.35..=0.65).contains(&med),
        detail: format!("median {med:.4} at T = {} (band 0.35..0.65, limit 0.5)", last.horizon),
    };
    let path = match cfg.format {
        Format::Json => write_json(cfg, &gate, &reps, clock)?,
        Format::Csv => {
            let rows: Vec<LoglawRow> = reps
                .iter()
                .flat_map(|r| {
                    r.per_sample.iter().enumerate().map(move |(i, p)| LoglawRow {
                        sample_id: i,
                        seed: cfg.seed,
                        horizon: r.horizon,
                        max_ratio: p.max_ratio,
                        sup_ratio: p.sup_ratio,
                    })
                })
                .collect();
            write_csv(cfg, &gate, &["sample_id", "seed", "horizon", "max_ratio", "sup_ratio"], &rows, clock)?
        }
    };
    Ok(Done { path, gate })
}

#[derive(Debug, Serialize)]
pub struct DmRecord {
    pub m: u64,
    pub eps: f64,
    pub samples: usize,
    pub members: usize,
    pub unknown: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub flagged: bool,
    pub mass: f64,
    pub volume: f64,
    pub volume_mc: f64,
    pub volume_se: f64,
    pub volume_rel_err: f64,
}

pub fn dm(cfg: &RunConfig, clock: &Clock) -> Result<Done, CliError> {
    let work: f64 = cfg.m.iter().map(|&m| (m + 1) as f64).sum::<f64>() * cfg.samples as f64;
    check_steps(cfg, work)?;
    let mut records = Vec::new();
    for &m in &cfg.m {
        let spec = DmSpec::new(m, cfg.eps).map_err(|e| CliError::Usage(e.to_string()))?;
        let est = estimate_sigma_ym(&spec, cfg.samples, cfg.seed).map_err(from_excursion)?;
        let (mc, se) = dm_volume_mc(&spec, cfg.volume_samples, cfg.seed.wrapping_add(m));
        let volume = spec.volume();
        println!("m = {m:>4}: rate {:.4} [{:.4}, {:.4}], volume {:.5} vs {:.5}", est.rate, est.ci_lo, est.ci_hi, mc, volume);
        records.push(DmRecord {
            m,
            eps: cfg.eps,
            samples: est.samples,
            members: est.members,
            unknown: est.unknown,
            rate: est.rate,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            flagged: est.flagged,
            mass: spec.mass(),
            volume,
            volume_mc: mc,
            volume_se: se,
            volume_rel_err: (mc - volume).abs() / volume,
        });
    }
    let floor = records.iter().all(|r| r.ci_lo >= 0.01);
    let trend = (0..records.len()).all(|i| (i + 1..records.len()).all(|j| records[j].ci_hi >= records[i].ci_lo));
    let vol = records.iter().map(|r| r.volume_rel_err).fold(0.0, f64::max);
    let gate = Gate {
        passed: floor && trend && vol <= 0.02,
        detail: format!("CI floor >= 0.01: {floor}; no decreasing trend: {trend}; worst volume error {vol:.3e} (limit 2e-2)"),
    };
    let path = match cfg.format {
        Format::Json => write_json(cfg, &gate, &records, clock)?,
        Format::Csv => write_csv(
            cfg,
            &gate,
            &[
                "m", "eps", "samples", "members", "unknown", "rate", "ci_lo", "ci_hi", "flagged", "mass", "volume",
                "volume_mc", "volume_se", "volume_rel_err",
            ],
            &records,
            clock,
        )?,
    };
    Ok(Done { path, gate })
}

#[derive(Serialize)]
struct OrbitRow {
    sample_id: usize,
    seed: u64,
    t: f64,
    cusp_dist: f64,
    /// Empty before the statistic starts.
    running_ratio: Option<f64>,
}

#[derive(Serialize)]
struct OrbitJson {
    sample_id: usize,
    seed: u64,
    t: Vec<f64>,
    cusp_dist: Vec<f64>,
    running_ratio: Vec<Option<f64>>,
    uncertified: usize,
}

pub fn orbit(cfg: &RunConfig, clock: &Clock) -> Result<Done, CliError> {
    check_steps(cfg, cfg.samples as f64 * cfg.t_max / cfg.stride)?;
    let series: Vec<OrbitJson> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let st = haar_sample(cfg.seed, i as u64)?;
            let s = orbit_excursion(&st.base, cfg.t_max, cfg.stride)?;
            Ok(OrbitJson {
                sample_id: i,
                seed: cfg.seed,
                t: s.times,
                cusp_dist: s.dists,
                running_ratio: s.running_ratio.into_iter().map(|r| r.is_finite().then_some(r)).collect(),
                uncertified: s.uncertified,
            })
        })
        .collect::<Result<_, ExcursionError>>()
        .map_err(from_excursion)?;
    let uncertified: usize = series.iter().map(|s| s.uncertified).sum();
    let gate = Gate { passed: true, detail: format!("{uncertified} uncertified reductions") };
    let path = match cfg.format {
        Format::Json => write_json(cfg, &gate, &series, clock)?,
        Format::Csv => {
            let rows: Vec<OrbitRow> = series
                .iter()
                .flat_map(|s| {
                    (0..s.t.len()).map(move |k| OrbitRow {
                        sample_id: s.sample_id,
                        seed: s.seed,
                        t: s.t[k],
                        cusp_dist: s.cusp_dist[k],
                        running_ratio: s.running_ratio[k],
                    })
                })
                .collect();
            write_csv(cfg, &gate, &["sample_id", "seed", "t", "cusp_dist", "running_ratio"], &rows, clock)?
        }
    };
    Ok(Done { path, gate })
}
