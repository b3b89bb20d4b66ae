//! Cusp excursions of the unipotent flow `g_t = u^-_t` on `PSL(2, Z[i]) \ G`:
//! orbit reduction, the cusp distance `log h_max`, logarithm-law and
//! Borel-Cantelli statistics, and the sets `D_m` with their shadows `Y_{D_m}`.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::picard::{haar_sample_ford, reduce_to_max_height, GaussianInt, PicardError, Sl2c};
use crate::vahlen::RENORM_EVERY;

/// Dimension of the boundary of `H^3`.
pub const N_DIM: usize = 2;

/// First time at which `dist / log t` enters the log-law statistic.
pub const LOGLAW_T_START: f64 = 10.0;

const SEARCH_RADIUS: u32 = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExcursionError {
    #[error("horizon {0} must be at least 10")]
    ShortHorizon(f64),
    #[error("stride must be positive")]
    BadStride,
    #[error("epsilon must lie in (0, 1)")]
    BadEpsilon,
    #[error("m must be at least 1")]
    BadM,
    #[error("rejection rate above 99%")]
    Rejection,
    #[error("matrix is not unipotent")]
    NotUnipotent,
    #[error(transparent)]
    Picard(#[from] PicardError),
}

/// `u^-_x` with real `x`, the flow direction.
pub fn flow(t: f64) -> Sl2c {
    Sl2c::u_lower(Complex64::new(t, 0.0))
}

/// A point `x = Gamma g` moved along `g_t`, with its reduced lift cached.
#[derive(Debug, Clone)]
pub struct OrbitState {
    /// The original lift `g`.
    pub base: Sl2c,
    pub time: f64,
    /// `gamma g g_t` with maximal basepoint height.
    reduced: Sl2c,
    height: f64,
    steps: usize,
    pub uncertified: usize,
}

impl OrbitState {
    pub fn new(g: Sl2c) -> Self {
        let mut st = OrbitState {
            base: g,
            time: 0.0,
            reduced: g,
            height: 0.0,
            steps: 0,
            uncertified: 0,
        };
        st.reduce();
        st
    }

    fn reduce(&mut self) {
        let p = self.reduced.basepoint_image();
        let r = reduce_to_max_height(&p, SEARCH_RADIUS);
        if !r.certified {
            self.uncertified += 1;
        }
        self.reduced = r.gamma.to_sl2c().mul(&self.reduced);
        self.height = self.reduced.basepoint_image().h;
    }

    /// Moves to `time + dt` by one right multiplication and a reduction.
    pub fn advance(&mut self, dt: f64) {
        self.reduced = self.reduced.mul(&flow(dt));
        self.steps += 1;
        if self.steps.is_multiple_of(RENORM_EVERY) {
            self.reduced = self.reduced.renormalize();
        }
        self.time += dt;
        self.reduce();
    }

    /// `log h_max`, the distance to the cusp up to a bounded offset.
    pub fn cusp_distance(&self) -> f64 {
        self.height.ln()
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn reduced(&self) -> &Sl2c {
        &self.reduced
    }
}

/// `log h_max` of the point `g j`.
pub fn cusp_distance(g: &Sl2c) -> f64 {
    OrbitState::new(*g).cusp_distance()
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExcursionSeries {
    pub times: Vec<f64>,
    pub dists: Vec<f64>,
    /// Running maximum of `dist / log t` over samples with `t >= 10`; `NaN` before.
    pub running_ratio: Vec<f64>,
    pub uncertified: usize,
}

/// Samples the cusp distance of `x0 g_t` at `t = stride, 2 stride, ..., <= T`.
pub fn orbit_excursion(x0: &Sl2c, t_max: f64, stride: f64) -> Result<ExcursionSeries, ExcursionError> {
    if !(t_max >= 10.0) {
        return Err(ExcursionError::ShortHorizon(t_max));
    }
    if !(stride > 0.0) {
        return Err(ExcursionError::BadStride);
    }
    let mut st = OrbitState::new(*x0);
    let mut out = ExcursionSeries::default();
    let mut best = f64::NAN;
    let steps = (t_max / stride + 1e-9).floor() as usize;
    for k in 1..=steps {
        st.advance(stride);
        let t = k as f64 * stride;
        let d = st.cusp_distance();
        if t >= LOGLAW_T_START {
            let r = d / t.ln();
            best = if best.is_nan() { r } else { best.max(r) };
        }
        out.times.push(t);
        out.dists.push(d);
        out.running_ratio.push(best);
    }
    out.uncertified = st.uncertified;
    Ok(out)
}

/// Log-law statistics of one orbit at a horizon `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoglawPoint {
    /// `max_{l <= H} dist(x0 g_l) / log H`.
    pub max_ratio: f64,
    /// `max_{10 <= l <= H} dist(x0 g_l) / log l`.
    pub sup_ratio: f64,
}

/// Evaluates [`LoglawPoint`] at each horizon (ascending) along integer times.
pub fn loglaw_sup(x0: &Sl2c, horizons: &[u64]) -> Vec<LoglawPoint> {
    let mut st = OrbitState::new(*x0);
    let mut out = Vec::with_capacity(horizons.len());
    let mut best = f64::NEG_INFINITY;
    let mut max_dist = f64::NEG_INFINITY;
    let last = horizons.iter().copied().max().unwrap_or(0);
    let mut next = 0;
    for l in 1..=last {
        st.advance(1.0);
        let d = st.cusp_distance();
        max_dist = max_dist.max(d);
        if l as f64 >= LOGLAW_T_START {
            best = best.max(d / (l as f64).ln());
        }
        while next < horizons.len() && horizons[next] == l {
            out.push(LoglawPoint { max_ratio: max_dist / (l as f64).ln(), sup_ratio: best });
            next += 1;
        }
    }
    out
}

/// Median and quartiles.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub mean: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = pos.ceil() as usize;
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if v.is_empty() {
            return Summary { count: 0, median: f64::NAN, q1: f64::NAN, q3: f64::NAN, mean: f64::NAN };
        }
        Summary {
            count: v.len(),
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            mean: v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

/// Generator for sample `i` of a run seeded with `seed`: one stream per sample,
/// so results do not depend on the worker count.
pub fn sample_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Haar-distributed lift in the Ford domain for sample `i`.
pub fn haar_sample(seed: u64, i: u64) -> Result<OrbitState, ExcursionError> {
    let mut rng = sample_rng(seed, i);
    let (g, rejected) = haar_sample_ford(&mut rng);
    if rejected > 100 * 99 {
        return Err(ExcursionError::Rejection);
    }
    Ok(OrbitState::new(g))
}

#[derive(Debug, Clone, Serialize)]
pub struct LoglawReport {
    pub horizon: u64,
    /// Summary of `max_{l <= T} dist / log T`, the gated statistic.
    pub summary: Summary,
    /// Summary of `max_{10 <= l <= T} dist / log l`.
    pub sup_ratio_summary: Summary,
    pub per_sample: Vec<LoglawPoint>,
}

/// Log-law statistics of Haar samples at each horizon. Both statistics share
/// the limsup `1/n`; the running maximum over `log T` is free of the bias that
/// small `l` puts into `dist / log l`.
pub fn loglaw_statistics(samples: usize, horizons: &[u64], seed: u64) -> Result<Vec<LoglawReport>, ExcursionError> {
    let mut hs = horizons.to_vec();
    hs.sort_unstable();
    hs.dedup();
    if let Some(&h) = hs.first() {
        if h < 10 {
            return Err(ExcursionError::ShortHorizon(h as f64));
        }
    }
    let rows: Vec<Vec<LoglawPoint>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| haar_sample(seed, i).map(|st| loglaw_sup(&st.base, &hs)))
        .collect::<Result<_, _>>()?;
    Ok(hs
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let per: Vec<LoglawPoint> = rows.iter().map(|r| r[j]).collect();
            let maxr: Vec<f64> = per.iter().map(|p| p.max_ratio).collect();
            let supr: Vec<f64> = per.iter().map(|p| p.sup_ratio).collect();
            LoglawReport {
                horizon: h,
                summary: Summary::of(&maxr),
                sup_ratio_summary: Summary::of(&supr),
                per_sample: per,
            }
        })
        .collect())
}

pub fn loglaw_statistic(samples: usize, t_max: u64, seed: u64) -> Result<LoglawReport, ExcursionError> {
    Ok(loglaw_statistics(samples, &[t_max], seed)?.remove(0))
}

/// Sign of `epsilon` in `r_l = (1 +- epsilon) log l / n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Threshold {
    Plus,
    Minus,
    /// `r_l = 0`.
    Zero,
}

pub fn threshold(sign: Threshold, eps: f64, l: u64) -> f64 {
    let lg = (l as f64).ln() / N_DIM as f64;
    match sign {
        Threshold::Plus => (1.0 + eps) * lg,
        Threshold::Minus => (1.0 - eps) * lg,
        Threshold::Zero => 0.0,
    }
}

/// `#{l in [L, H] : dist(x0 g_l) > r_l}` for each horizon `H` (ascending).
pub fn borel_cantelli_counts(x0: &Sl2c, eps: f64, sign: Threshold, start: u64, horizons: &[u64]) -> Vec<u64> {
    let mut st = OrbitState::new(*x0);
    let mut count = 0;
    let mut out = Vec::with_capacity(horizons.len());
    let last = horizons.iter().copied().max().unwrap_or(0);
    let mut next = 0;
    for l in 1..=last {
        st.advance(1.0);
        if l >= start && st.cusp_distance() > threshold(sign, eps, l) {
            count += 1;
        }
        while next < horizons.len() && horizons[next] == l {
            out.push(count);
            next += 1;
        }
    }
    out
}

pub fn borel_cantelli_counter(x0: &Sl2c, eps: f64, sign: Threshold, start: u64, t_max: u64) -> u64 {
    borel_cantelli_counts(x0, eps, sign, start, &[t_max])[0]
}

/// Parameters of `D_m = Q \ U_{l=m}^{2m} Q A(r_l) B^- g_{-l}` with
/// `r_l = (1 - epsilon) log l / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmSpec {
    pub m: u64,
    pub eps: f64,
    /// Overrides `r_l` with a constant when set; `+inf` empties the set.
    pub r_override: Option<f64>,
}

impl DmSpec {
    pub fn new(m: u64, eps: f64) -> Result<Self, ExcursionError> {
        if m < 1 {
            return Err(ExcursionError::BadM);
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ExcursionError::BadEpsilon);
        }
        Ok(DmSpec { m, eps, r_override: None })
    }

    pub fn p(&self) -> u64 {
        2 * self.m
    }

    pub fn r(&self, l: u64) -> f64 {
        self.r_override
            .unwrap_or_else(|| (1.0 - self.eps) / N_DIM as f64 * (l as f64).ln())
    }

    /// `tau_l = r_l - 2 log l + log 2`.
    pub fn tau(&self, l: u64) -> f64 {
        self.r(l) - 2.0 * (l as f64).ln() + 2f64.ln()
    }

    /// `sum_{l=m}^{2m} e^{-n r_l}`.
    pub fn mass(&self) -> f64 {
        (self.m..=self.p()).map(|l| (-(N_DIM as f64) * self.r(l)).exp()).sum()
    }

    /// Exact measure of `D_m` for `e^{-nt} dt dx`: each slab contributes
    /// `e^{-n r_l} / n` times the area `pi / 4` of `B^-`.
    pub fn volume(&self) -> f64 {
        let nf = N_DIM as f64;
        (self.m..=self.p())
            .map(|l| (-nf * self.r(l)).exp() / nf * std::f64::consts::FRAC_PI_4)
            .sum()
    }
}

/// `g in Q A(r) B^-`: the `N M A N^-` coordinates of `g` have `t >= r` and `|x^-| < 1/2`.
pub fn in_qab(g: &Sl2c, r: f64) -> bool {
    let d2 = g.d.norm_sqr();
    if d2 <= 0.0 {
        return false;
    }
    -d2.ln() >= r && (g.c / g.d).norm() < 0.5
}

/// Outcome of a membership search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Member { witness: u64 },
    NonMember,
    Unknown,
}

const DM_ROW_BUDGET: usize = 100_000;

/// Whether `Gamma g` lies in `Y_{D_m}`: some `gamma g g_l` with `l in [m, 2m]`
/// lies in `Q A(r_l) B^-`. Bottom rows `(c', d') = (c, d) gamma g g_l` of such
/// elements satisfy `|c'|^2 + |d'|^2 < 5/4 e^{-r_l}`; all are enumerated around
/// the reduced lift.
pub fn dm_membership(g: &Sl2c, spec: &DmSpec) -> Membership {
    let mut unknown = false;
    for l in spec.m..=spec.p() {
        let r = spec.r(l);
        if !r.is_finite() {
            continue;
        }
        let st = OrbitState::new(g.mul(&flow(l as f64)));
        if st.uncertified > 0 {
            unknown = true;
            continue;
        }
        let red = *st.reduced();
        let p = red.basepoint_image();
        let bound = 1.25 * (-r).exp();
        // |(c, d) red|^2 = (|cz + d|^2 + |c|^2 h^2) / h.
        let cr = (bound / p.h).sqrt().floor() as i64;
        let room_max = (bound * p.h).sqrt();
        if ((2 * cr + 1) as f64).powi(2) * (2.0 * room_max + 2.0 + 2.0 * cr as f64).powi(2) > DM_ROW_BUDGET as f64 {
            unknown = true;
            continue;
        }
        for re in -cr..=cr {
            for im in -cr..=cr {
                let c = GaussianInt::new(re, im);
                let ch2 = c.norm() as f64 * p.h * p.h;
                if ch2 > bound * p.h {
                    continue;
                }
                let room = (bound * p.h - ch2).sqrt();
                let center = -(c.to_c64() * p.z);
                for x in (center.re - room).ceil() as i64..=(center.re + room).floor() as i64 {
                    for y in (center.im - room).ceil() as i64..=(center.im + room).floor() as i64 {
                        let d = GaussianInt::new(x, y);
                        if (c.is_zero() && d.is_zero()) || !GaussianInt::gcd(c, d).is_unit() {
                            continue;
                        }
                        let (cc, dd) = (c.to_c64(), d.to_c64());
                        let row = Sl2c {
                            a: Complex64::new(1.0, 0.0),
                            b: Complex64::new(0.0, 0.0),
                            c: cc * red.a + dd * red.c,
                            d: cc * red.b + dd * red.d,
                        };
                        if in_qab(&row, r) {
                            return Membership::Member { witness: l };
                        }
                    }
                }
            }
        }
    }
    if unknown {
        Membership::Unknown
    } else {
        Membership::NonMember
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let den = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaEstimate {
    pub m: u64,
    pub samples: usize,
    pub members: usize,
    pub unknown: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// More than 5% of verdicts were inconclusive; the interval counts them both ways.
    pub flagged: bool,
}

/// Monte Carlo estimate of `sigma(Y_{D_m})`; unknown verdicts count as non-members.
pub fn estimate_sigma_ym(spec: &DmSpec, samples: usize, seed: u64) -> Result<SigmaEstimate, ExcursionError> {
    let verdicts: Vec<Membership> = (0..samples as u64)
        .into_par_iter()
        .map(|i| haar_sample(seed, i).map(|st| dm_membership(&st.base, spec)))
        .collect::<Result<_, _>>()?;
    let members = verdicts.iter().filter(|v| matches!(v, Membership::Member { .. })).count();
    let unknown = verdicts.iter().filter(|v| matches!(v, Membership::Unknown)).count();
    let flagged = unknown * 20 > samples;
    let (mut lo, mut hi) = wilson_interval(members, samples);
    if flagged {
        hi = wilson_interval(members + unknown, samples).1;
        lo = lo.min(hi);
    }
    Ok(SigmaEstimate {
        m: spec.m,
        samples,
        members,
        unknown,
        rate: members as f64 / samples.max(1) as f64,
        ci_lo: lo,
        ci_hi: hi,
        flagged,
    })
}

/// Monte Carlo measure of `D_m` in the coordinates `Q a_t u^-_x`, density
/// `e^{-nt} dt dx`. Returns `(estimate, standard error)`.
pub fn dm_volume_mc(spec: &DmSpec, samples: usize, seed: u64) -> (f64, f64) {
    use rand::Rng;
    let nf = N_DIM as f64;
    let r_min = (spec.m..=spec.p()).map(|l| spec.r(l)).fold(f64::INFINITY, f64::min);
    if !r_min.is_finite() {
        return (0.0, 0.0);
    }
    // x uniform on [-2m - 1/2, -m + 1/2] x [-1/2, 1/2], t with density n e^{-n(t - r_min)}.
    let width = (spec.p() - spec.m + 1) as f64;
    let weight = width * (-nf * r_min).exp() / nf;
    let hits: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let xr = -(spec.p() as f64) - 0.5 + width * rng.gen::<f64>();
            let xi = rng.gen::<f64>() - 0.5;
            let t = r_min - (1.0 - rng.gen::<f64>()).ln() / nf;
            let g = Sl2c::a(t).mul(&Sl2c::u_lower(Complex64::new(xr, xi)));
            let hit = (spec.m..=spec.p()).any(|l| in_qab(&g.mul(&flow(l as f64)), spec.r(l)));
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let n = samples as f64;
    let p = hits.iter().sum::<f64>() / n;
    (weight * p, weight * (p * (1.0 - p) / n).sqrt())
}

/// `K`-part of `a_{t0} u^-_{x - l}`; independent of `t0`.
pub fn slab_k(x: Complex64, l: u64) -> (Complex64, Complex64) {
    let g = Sl2c::u_lower(x - l as f64);
    let (_, q1, q2) = g.iwasawa();
    (q1, q2)
}

/// `(k, eta)` with `k^{-1} u^-_eta k = g` up to sign, for unipotent `g != +-I`.
pub fn unipotent_normal_form(g: &Sl2c) -> Result<(Sl2c, f64), ExcursionError> {
    let tr = g.a + g.d;
    let sign = if tr.re >= 0.0 { 1.0 } else { -1.0 };
    if (tr - 2.0 * sign).norm() > 1e-8 * (1.0 + g.max_abs()) {
        return Err(ExcursionError::NotUnipotent);
    }
    // n = sign g - I is rank one and nilpotent: n = v w^T with w^T v = 0.
    let one = Complex64::new(1.0, 0.0);
    let n = [[g.a * sign - one, g.b * sign], [g.c * sign, g.d * sign - one]];
    let col = if n[0][0].norm() + n[1][0].norm() >= n[0][1].norm() + n[1][1].norm() { 0 } else { 1 };
    let v = [n[0][col], n[1][col]];
    let vn = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    if vn < 1e-14 {
        return Err(ExcursionError::NotUnipotent);
    }
    let u = [v[0] / vn, v[1] / vn];
    // With k = k(conj u_1, conj u_2), k^{-1} e_2 = u and e_1^T k = (u_2, -u_1),
    // so n = eta u (u_2, -u_1); choose the phase of u to make eta positive.
    let w = [u[1], -u[0]];
    let (mut bi, mut bj) = (0, 0);
    for i in 0..2 {
        for j in 0..2 {
            if (u[i] * w[j]).norm() > (u[bi] * w[bj]).norm() {
                bi = i;
                bj = j;
            }
        }
    }
    let eta_c = n[bi][bj] / (u[bi] * w[bj]);
    let phase = (eta_c / eta_c.norm()).sqrt();
    let u = [u[0] * phase, u[1] * phase];
    let eta = eta_c.norm();
    let k = Sl2c::k(u[0].conj(), u[1].conj());
    Ok((k, eta))
}
