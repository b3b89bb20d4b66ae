//! Truncated spherical and non-spherical Eisenstein series for `PSL(2, Z[i])`
//! on `H^3`, their constant terms, the scattering coefficient `C(s)`,
//! incomplete Eisenstein series and the unfolding identity.
//!
//! Cosets `Gamma_inf \ Gamma` are bottom rows `(c, d)` modulo units. Rows
//! sharing `c` and the class of `d` mod `c` form a block whose sum is a
//! `Z[i]`-periodic function of `z + d/c`, summed over a window of translates
//! with the remainder replaced by an integral.

use std::f64::consts::PI;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::harmonics::{pm_eval, HarmonicsError, Profile};
use crate::picard::{
    ford_volume, haar_sample_ford, random_su2, GaussianInt, HPoint, PicardError, Sl2c,
};
use crate::vahlen::VahlenMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EisensteinError {
    #[error("least-squares fit is ill-conditioned")]
    IllConditioned,
    #[error("test function support must be bounded")]
    UnboundedSupport,
    #[error("enumeration budget exceeded ({0} candidate rows)")]
    BudgetExceeded(u64),
    #[error("need at least {0} heights")]
    TooFewHeights(usize),
    #[error(transparent)]
    Picard(#[from] PicardError),
    #[error(transparent)]
    Harmonics(#[from] HarmonicsError),
}

/// `zeta(2) * Catalan`, the Dedekind zeta value `zeta_{Q(i)}(2)`.
pub const ZETA_K2: f64 = 1.644_934_066_848_226_4 * 0.915_965_594_177_219;

/// `[Gamma_inf : Gamma'_inf]` for `PSL(2, Z[i])`.
pub const CUSP_INDEX: f64 = 2.0;

const ENUM_BUDGET: u64 = 50_000_000;
const FIT_HEIGHTS: [f64; 5] = [0.15, 0.28, 0.5, 0.9, 1.6];

/// Representative of a block of cosets: a coprime bottom row with `c` its
/// canonical associate and `d` reduced modulo `c`. `(0, 1)` is the identity coset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CosetRep {
    pub c: GaussianInt,
    pub d: GaussianInt,
}

impl CosetRep {
    pub fn identity() -> Self {
        CosetRep { c: GaussianInt::ZERO, d: GaussianInt::ONE }
    }

    pub fn is_identity(&self) -> bool {
        self.c.is_zero()
    }
}

/// Residues `d` mod `c` normalized so that `d conj(c)` has both coordinates in
/// `[0, |c|^2)`, coprime to `c`, in lexicographic order.
fn coprime_residues(c: GaussianInt) -> Vec<GaussianInt> {
    let n = c.norm();
    let corners = [GaussianInt::ZERO, c, c * GaussianInt::I, c + c * GaussianInt::I];
    let (rmin, rmax) = (
        corners.iter().map(|p| p.re).min().unwrap(),
        corners.iter().map(|p| p.re).max().unwrap(),
    );
    let (imin, imax) = (
        corners.iter().map(|p| p.im).min().unwrap(),
        corners.iter().map(|p| p.im).max().unwrap(),
    );
    let mut out = Vec::new();
    for re in rmin..=rmax {
        for im in imin..=imax {
            let d = GaussianInt::new(re, im);
            let w = d * c.conj();
            if (0..n).contains(&w.re) && (0..n).contains(&w.im) && GaussianInt::gcd(c, d).is_unit() {
                out.push(d);
            }
        }
    }
    out
}

/// Block representatives with `|c|^2 <= n_bound`, identity first, then by
/// `(|c|^2, c, d)`.
pub fn enumerate_cosets(n_bound: i64) -> Vec<CosetRep> {
    let r = (n_bound.max(0) as f64).sqrt().floor() as i64 + 1;
    let mut cs: Vec<GaussianInt> = Vec::new();
    for re in 1..=r {
        for im in 0..=r {
            let c = GaussianInt::new(re, im);
            if c.norm() <= n_bound {
                cs.push(c);
            }
        }
    }
    cs.sort_by_key(|c| (c.norm(), c.re, c.im));
    let blocks: Vec<Vec<CosetRep>> = cs
        .par_iter()
        .map(|&c| coprime_residues(c).into_iter().map(|d| CosetRep { c, d }).collect())
        .collect();
    let mut out = vec![CosetRep::identity()];
    out.extend(blocks.into_iter().flatten());
    out
}

/// Truncation controls. `n_bound` bounds `|c|^2`; `window` is the half-width of
/// the box of explicit translates per block; `quad_points` is the per-axis
/// trapezoid size for constant terms; `tail` adds the integral remainders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationParams {
    pub n_bound: i64,
    pub window: i64,
    pub quad_points: usize,
    pub tail: bool,
}

impl Default for TruncationParams {
    fn default() -> Self {
        TruncationParams { n_bound: 100, window: 8, quad_points: 64, tail: true }
    }
}

impl TruncationParams {
    /// Mean-field remainder of `sum_{|c|^2 > N} phi(c) |c|^{-2s}`:
    /// `pi N^{2-s} / (4 zeta_K(2) (s - 2))`.
    pub fn tail_estimate(&self, s: f64) -> f64 {
        coset_tail(Complex64::new(s, 0.0), self.n_bound).re
    }
}

fn coset_tail(s: Complex64, n_bound: i64) -> Complex64 {
    let nb = n_bound.max(1) as f64;
    PI * ((2.0 - s) * nb.ln()).exp() / (4.0 * ZETA_K2 * (s - 2.0))
}

/// Neumaier-compensated sum in slice order.
fn compensated_sum(xs: &[Complex64]) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for &x in xs {
        for (s, c, v) in [(&mut sum.re, &mut comp.re, x.re), (&mut sum.im, &mut comp.im, x.im)] {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }
    sum + comp
}

fn gl(deg: usize) -> &'static [(f64, f64)] {
    static GL8: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    static GL16: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let cell = if deg <= 8 { &GL8 } else { &GL16 };
    let deg = if deg <= 8 { 8 } else { 16 };
    cell.get_or_init(|| {
        GaussLegendre::new(deg)
            .expect("degree >= 2")
            .as_node_weight_pairs()
            .to_vec()
    })
}

/// Term of a block at `w = z + d/c`, without the `|c|^{-2s}` factor:
/// `(h / (|w|^2 + h^2))^s (2 A conj(B) / (h + |w|^2 / h))^m`, where
/// `(cA, cB)` is the bottom row of `gamma u_z a_t k(q1, q2)`.
#[derive(Debug, Clone, Copy)]
struct Kernel {
    s: Complex64,
    m: u32,
    h: f64,
    q1q2: Complex64,
    q1sq: Complex64,
    q2sq_conj: Complex64,
}

impl Kernel {
    fn new(s: Complex64, m: u32, h: f64, q1: Complex64, q2: Complex64) -> Self {
        Kernel {
            s,
            m,
            h,
            q1q2: q1 * q2.conj(),
            q1sq: q1 * q1,
            q2sq_conj: (q2 * q2).conj(),
        }
    }

    fn eval(&self, w: Complex64) -> Complex64 {
        let r2 = w.norm_sqr();
        let h = self.h;
        let den = r2 + h * h;
        let mut v = (self.s * (h / den).ln()).exp();
        if self.m > 0 {
            let num = (r2 - h * h) * self.q1q2 + h * (w.conj() * self.q2sq_conj - w * self.q1sq);
            v *= (2.0 * num / den).powu(self.m);
        }
        v
    }

    /// Identity-coset term `h^s (2 q1 conj(q2))^m`.
    fn identity_term(&self) -> Complex64 {
        (self.s * self.h.ln()).exp() * (2.0 * self.q1q2).powu(self.m)
    }

    /// `int_C g = P_m(s) (2 q1 conj(q2))^m pi h^{2-s} / (s - 1)`.
    fn plane_integral(&self) -> Result<Complex64, HarmonicsError> {
        let pm = pm_eval(2, self.m, self.s)?;
        Ok(pm * (2.0 * self.q1q2).powu(self.m) * PI * ((2.0 - self.s) * self.h.ln()).exp()
            / (self.s - 1.0))
    }

    /// Integral of the kernel outside the square `center + [-a, a]^2`, which
    /// must contain the origin, in polar coordinates about the origin.
    fn exterior_integral(&self, center: Complex64, a: f64) -> Complex64 {
        let (cx, cy) = (center.re, center.im);
        let t1 = (cy + a).atan2(cx + a);
        let t2 = (cy + a).atan2(cx - a);
        let t3 = (cy - a).atan2(cx - a) + 2.0 * PI;
        let t4 = (cy - a).atan2(cx + a) + 2.0 * PI;
        let sectors = [(t1, t2), (t2, t3), (t3, t4), (t4, t1 + 2.0 * PI)];
        let mut total = Complex64::new(0.0, 0.0);
        for (k, &(lo, hi)) in sectors.iter().enumerate() {
            let half = 0.5 * (hi - lo);
            for &(x, wt) in gl(16) {
                let th = lo + half * (x + 1.0);
                let (sn, cs) = th.sin_cos();
                let rho = match k {
                    0 => (cy + a) / sn,
                    1 => (cx - a) / cs,
                    2 => (cy - a) / sn,
                    _ => (cx + a) / cs,
                };
                total += half * wt * self.radial_tail(rho, Complex64::new(cs, sn));
            }
        }
        total
    }

    /// `int_rho^inf g(r e^{i theta}) r dr`.
    fn radial_tail(&self, rho: f64, dir: Complex64) -> Complex64 {
        let h = self.h;
        if self.m == 0 {
            let s = self.s;
            return (s * h.ln() + (1.0 - s) * (rho * rho + h * h).ln()).exp() / (2.0 * (s - 1.0));
        }
        // r = rho / u, dr = rho du / u^2.
        let mut acc = Complex64::new(0.0, 0.0);
        for &(x, wt) in gl(16) {
            let u = 0.5 * (x + 1.0);
            let r = rho / u;
            acc += 0.5 * wt * self.eval(dir * r) * (rho * rho / (u * u * u));
        }
        acc
    }

    /// Block sum `sum_x g(zeta + x)` over the window around the nearest
    /// translate, plus the exterior integral when requested.
    fn block_sum(&self, zeta: Complex64, window: i64, tail: bool) -> Complex64 {
        let zr = zeta - GaussianInt::round(zeta).to_c64();
        let mut acc = Complex64::new(0.0, 0.0);
        for xr in -window..=window {
            for xi in -window..=window {
                acc += self.eval(zr + Complex64::new(xr as f64, xi as f64));
            }
        }
        if tail {
            acc += self.exterior_integral(-zr, window as f64 + 0.5);
        }
        acc
    }
}

/// Value of a truncated series with the size of the neglected remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Conservative bound on the coset remainder `|c|^2 > N`.
    pub tail_bound: f64,
    /// `false` when `Re(s) <= 2`, where the series only converges conditionally.
    pub convergent: bool,
}

fn c_pow(c: GaussianInt, s: Complex64) -> Complex64 {
    (-s * (c.norm() as f64).ln()).exp()
}

/// `E(phi_m, s, g)` truncated to the blocks in `reps`.
pub fn eisenstein_sum(
    reps: &[CosetRep],
    m: u32,
    s: Complex64,
    g: &Sl2c,
    trunc: &TruncationParams,
) -> Result<SeriesValue, EisensteinError> {
    let (p, q1, q2) = g.iwasawa();
    let k = Kernel::new(s, m, p.h, q1, q2);
    let terms: Vec<Complex64> = reps
        .par_iter()
        .map(|r| {
            if r.is_identity() {
                k.identity_term()
            } else {
                let zeta = p.z + r.d.to_c64() / r.c.to_c64();
                c_pow(r.c, s) * k.block_sum(zeta, trunc.window, trunc.tail)
            }
        })
        .collect();
    let mut value = compensated_sum(&terms);
    let plane = k.plane_integral()?;
    let coset_rem = coset_tail(s, trunc.n_bound) * plane;
    if trunc.tail {
        value += coset_rem;
    }
    Ok(SeriesValue {
        value,
        tail_bound: 2.0 * coset_rem.norm(),
        convergent: s.re > 2.0,
    })
}

/// Spherical series `sum (h / (|cz + d|^2 + |c|^2 h^2))^s`.
pub fn eisenstein_eval(
    s: Complex64,
    p: &HPoint,
    trunc: &TruncationParams,
) -> Result<SeriesValue, EisensteinError> {
    let reps = enumerate_cosets(trunc.n_bound);
    let g = Sl2c::from_iwasawa(p, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    eisenstein_sum(&reps, 0, s, &g, trunc)
}

/// Series twisted by the highest-weight harmonic `(x_0 - i x_1)^m`.
pub fn eisenstein_nonspherical_eval(
    m: u32,
    s: Complex64,
    g: &VahlenMatrix<f64>,
    trunc: &TruncationParams,
) -> Result<SeriesValue, EisensteinError> {
    let reps = enumerate_cosets(trunc.n_bound);
    eisenstein_sum(&reps, m, s, &Sl2c::from_vahlen(g)?, trunc)
}

/// Explicit bottom rows of the finite series: each block expanded over its
/// window, centred at the translate nearest to `anchor`.
pub fn expand_rows(reps: &[CosetRep], window: i64, anchor: Complex64) -> Vec<(GaussianInt, GaussianInt)> {
    let mut rows = Vec::new();
    for r in reps {
        if r.is_identity() {
            rows.push((r.c, r.d));
            continue;
        }
        let zeta = anchor + r.d.to_c64() / r.c.to_c64();
        let base = -GaussianInt::round(zeta);
        for xr in -window..=window {
            for xi in -window..=window {
                let x = base + GaussianInt::new(xr, xi);
                rows.push((r.c, r.d + r.c * x));
            }
        }
    }
    rows
}

/// `phi_{s,m}(gamma g) = S^{-s} (2 c' conj(d') / S)^m` for the bottom row
/// `(c', d') = (c, d) g`, `S = |c'|^2 + |d'|^2`.
pub fn row_term(c: GaussianInt, d: GaussianInt, m: u32, s: Complex64, g: &Sl2c) -> Complex64 {
    let (c, d) = (c.to_c64(), d.to_c64());
    let c2 = c * g.a + d * g.c;
    let d2 = c * g.b + d * g.d;
    let sn = c2.norm_sqr() + d2.norm_sqr();
    (-s * sn.ln()).exp() * (2.0 * c2 * d2.conj() / sn).powu(m)
}

/// Sum of [`row_term`] over an explicit list of rows.
pub fn row_sum(rows: &[(GaussianInt, GaussianInt)], m: u32, s: Complex64, g: &Sl2c) -> Complex64 {
    let terms: Vec<Complex64> = rows.iter().map(|&(c, d)| row_term(c, d, m, s, g)).collect();
    compensated_sum(&terms)
}

/// `sum_{reps, c != 0} |c|^{-2s}`.
pub fn block_weight(reps: &[CosetRep], s: Complex64) -> Complex64 {
    let terms: Vec<Complex64> = reps
        .iter()
        .filter(|r| !r.is_identity())
        .map(|r| c_pow(r.c, s))
        .collect();
    compensated_sum(&terms)
}

/// `int_{[0,1)^2} E(phi_m, s, u_x a_t k) dx` by a tensor trapezoid rule, with
/// `h = e^t` and `k = k(q1, q2)`. The coset remainder is not included.
pub fn constant_term_numeric(
    reps: &[CosetRep],
    m: u32,
    s: Complex64,
    h: f64,
    q: (Complex64, Complex64),
    trunc: &TruncationParams,
) -> Complex64 {
    let k = Kernel::new(s, m, h, q.0, q.1);
    let np = trunc.quad_points.max(2);
    let step = 1.0 / np as f64;
    // Every block integrates its periodic sum over the same square.
    let rows: Vec<Complex64> = (0..np)
        .into_par_iter()
        .map(|i| {
            let terms: Vec<Complex64> = (0..np)
                .map(|j| {
                    let zeta = Complex64::new(i as f64 * step, j as f64 * step);
                    k.block_sum(zeta, trunc.window, false)
                })
                .collect();
            compensated_sum(&terms)
        })
        .collect();
    let mut per_block = compensated_sum(&rows) * step * step;
    if trunc.tail {
        per_block += k.exterior_integral(Complex64::new(0.0, 0.0), trunc.window as f64 + 0.5);
    }
    k.identity_term() + block_weight(reps, s) * per_block
}

/// Estimate of `C(s)` from one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CEstimate {
    pub s: f64,
    pub m: u32,
    pub n_bound: i64,
    pub terms: usize,
    /// `C` including the coset remainder correction.
    pub value: f64,
    pub err: f64,
    /// Fitted coefficient of `e^{st}`, normalized by `phi(k)`.
    pub leading: f64,
    /// Largest relative residual of the two-parameter fit.
    pub fit_residual: f64,
    /// Coset remainder correction added to `value`.
    pub tail: f64,
}

/// Least-squares fit `y = alpha h^s + beta h^{2-s}`, returning
/// `(alpha, beta, max relative residual, standard error of beta)`.
fn fit_two_powers(hs: &[f64], ys: &[f64], s: f64) -> Result<(f64, f64, f64, f64), EisensteinError> {
    if hs.len() < 3 {
        return Err(EisensteinError::TooFewHeights(3));
    }
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&h, &y) in hs.iter().zip(ys) {
        let (u, v) = (h.powf(s), h.powf(2.0 - s));
        s11 += u * u;
        s12 += u * v;
        s22 += v * v;
        b1 += u * y;
        b2 += v * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-12 * s11 * s22 {
        return Err(EisensteinError::IllConditioned);
    }
    let alpha = (s22 * b1 - s12 * b2) / det;
    let beta = (s11 * b2 - s12 * b1) / det;
    let mut worst: f64 = 0.0;
    let mut ss = 0.0;
    for (&h, &y) in hs.iter().zip(ys) {
        let r = y - alpha * h.powf(s) - beta * h.powf(2.0 - s);
        ss += r * r;
        worst = worst.max(r.abs() / y.abs().max(f64::MIN_POSITIVE));
    }
    let dof = (hs.len() - 2).max(1) as f64;
    let se_beta = (ss / dof * s11 / det).sqrt();
    Ok((alpha, beta, worst, se_beta))
}

/// `C(s)` from the constant term of the `m`-th series at the fixed
/// `k = k(1/sqrt 2, 1/sqrt 2)` (where the harmonic equals 1), divided by
/// `P_m(s)`. Error bar: fit standard error plus a quarter of the coset
/// remainder correction.
pub fn estimate_c(s: f64, m: u32, trunc: &TruncationParams) -> Result<CEstimate, EisensteinError> {
    let reps = enumerate_cosets(trunc.n_bound);
    estimate_c_with(&reps, s, m, trunc)
}

pub fn estimate_c_with(
    reps: &[CosetRep],
    s: f64,
    m: u32,
    trunc: &TruncationParams,
) -> Result<CEstimate, EisensteinError> {
    let sc = Complex64::new(s, 0.0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let q = (Complex64::new(r, 0.0), Complex64::new(r, 0.0));
    let ys: Vec<f64> = FIT_HEIGHTS
        .iter()
        .map(|&h| constant_term_numeric(reps, m, sc, h, q, trunc).re)
        .collect();
    let (alpha, beta, resid, se) = fit_two_powers(&FIT_HEIGHTS, &ys, s)?;
    let pm = pm_eval(2, m, sc)?.re;
    let tail = PI / (s - 1.0) * trunc.tail_estimate(s);
    Ok(CEstimate {
        s,
        m,
        n_bound: trunc.n_bound,
        terms: reps.len(),
        value: beta / pm + tail,
        err: se / pm.abs() + 0.25 * tail.abs(),
        leading: alpha,
        fit_residual: resid,
        tail,
    })
}

/// `Res_{s=2} C(s) = 2 pi kappa` where the number of non-identity blocks with
/// `|c|^2 <= N` grows like `kappa N^2`.
pub fn residue_estimate(n_bound: i64) -> f64 {
    let blocks = enumerate_cosets(n_bound).len() - 1;
    2.0 * PI * blocks as f64 / (n_bound as f64).powi(2)
}

/// `f(u a_t k) = v(t) (x_0 - i x_1)^m`, the harmonic read off the sphere point of `k`.
#[derive(Debug, Clone)]
pub struct ProductTestFunction {
    pub v: Profile,
    pub m: u32,
}

impl ProductTestFunction {
    pub fn new(v: Profile, m: u32) -> Self {
        ProductTestFunction { v, m }
    }

    /// `f` at `Q a_t k(q1, q2)`.
    pub fn eval(&self, t: f64, q1: Complex64, q2: Complex64) -> Complex64 {
        let v = self.v.eval(t);
        if v == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        v * (2.0 * q1 * q2.conj()).powu(self.m)
    }

    /// `f` at `g`, through its bottom row.
    pub fn eval_row(&self, c: Complex64, d: Complex64) -> Complex64 {
        let sn = c.norm_sqr() + d.norm_sqr();
        let r = 1.0 / sn.sqrt();
        self.eval(-sn.ln(), c * r, d * r)
    }

    /// `E_K |(x_0 - i x_1)^m|^p` over uniform `K`; `|x_0 - i x_1|^2 = 4u(1 - u)`
    /// with `u` uniform on `[0, 1]`.
    pub fn harmonic_moment(&self, p: f64) -> f64 {
        if self.m == 0 {
            return 1.0;
        }
        gl(16)
            .iter()
            .map(|&(x, w)| {
                // Two panels keep the endpoint behaviour resolved.
                let half = |a: f64| {
                    let u = a + 0.25 * (x + 1.0);
                    0.25 * w * (4.0 * u * (1.0 - u)).powf(0.5 * p * self.m as f64)
                };
                half(0.0) + half(0.5)
            })
            .sum()
    }

    /// `||f||_p^p` on `Q \ G` with `e^{-2t} dt dk`.
    pub fn norm_pow(&self, p: i32) -> f64 {
        let vs: f64 = self.v.moment(2.0, p, 0.0);
        vs * self.harmonic_moment(p as f64)
    }
}

/// `Theta_f(g) = sum_{Gamma_inf \ Gamma} f(gamma g)`; only rows with
/// `|(c, d) g|^2 <= e^{-t_lo}` contribute.
pub fn incomplete_eisenstein(f: &ProductTestFunction, g: &Sl2c) -> Result<Complex64, EisensteinError> {
    let (lo, hi) = f.v.support();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(EisensteinError::UnboundedSupport);
    }
    let bound = (-lo).exp();
    let (p, _, _) = g.iwasawa();
    let cmax2 = bound / p.h;
    let cr = cmax2.sqrt().floor() as i64;
    let dr = (p.h * bound).sqrt();
    let per_c = (2.0 * dr + 2.0 + 2.0 * cr as f64).powi(2);
    let candidates = ((2 * cr + 1) as f64).powi(2) * per_c;
    if candidates > ENUM_BUDGET as f64 {
        return Err(EisensteinError::BudgetExceeded(candidates as u64));
    }
    let mut terms = Vec::new();
    for re in -cr..=cr {
        for im in -cr..=cr {
            let c = GaussianInt::new(re, im);
            let cc = c.to_c64();
            let ch2 = c.norm() as f64 * p.h * p.h;
            if ch2 > p.h * bound {
                continue;
            }
            let room = (p.h * bound - ch2).sqrt();
            let center = -(cc * p.z);
            for x in (center.re - room).ceil() as i64..=(center.re + room).floor() as i64 {
                for y in (center.im - room).ceil() as i64..=(center.im + room).floor() as i64 {
                    let d = GaussianInt::new(x, y);
                    if c.is_zero() && d.is_zero() {
                        continue;
                    }
                    if !GaussianInt::gcd(c, d).is_unit() {
                        continue;
                    }
                    let dd = d.to_c64();
                    let row_c = cc * g.a + dd * g.c;
                    let row_d = cc * g.b + dd * g.d;
                    let v = f.eval_row(row_c, row_d);
                    if v != Complex64::new(0.0, 0.0) {
                        terms.push(v);
                    }
                }
            }
        }
    }
    // Each coset appears once per unit.
    Ok(compensated_sum(&terms) / 4.0)
}

/// Second function paired with `Theta_f` in the unfolding identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnfoldingPartner {
    One,
    /// `F = conj(Theta_f)`, so the left side is `||Theta_f||^2`.
    ThetaConj,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnfoldingReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub rel_err: f64,
    /// Set when the combined standard error exceeds 2% of `|rhs|`.
    pub noisy: bool,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Monte Carlo check of `int_{Gamma\G} Theta_f F = int_{Gamma_inf\G} f F`.
/// Both sides are integrated over double covers: the Ford domain `D` on the
/// left, `[0,1)^2 x A x K` on the right.
pub fn unfolding_check(
    f: &ProductTestFunction,
    partner: UnfoldingPartner,
    samples: usize,
    seed: u64,
) -> Result<UnfoldingReport, EisensteinError> {
    let vol = ford_volume();
    let left: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, 2 * i);
            let (g, _) = haar_sample_ford(&mut rng);
            let th = incomplete_eisenstein(f, &g)?;
            Ok(match partner {
                UnfoldingPartner::One => th.re,
                UnfoldingPartner::ThetaConj => th.norm_sqr(),
            })
        })
        .collect::<Result<_, EisensteinError>>()?;
    let (lm, lse) = mean_se(&left);
    let (lhs, lhs_se) = (vol * lm, vol * lse);
    let (rhs, rhs_se) = match partner {
        UnfoldingPartner::One => {
            let k_mean = if f.m == 0 { 1.0 } else { 0.0 };
            (f.v.moment(2.0, 1, 0.0) * k_mean, 0.0)
        }
        UnfoldingPartner::ThetaConj => {
            let (lo, hi) = f.v.support();
            let z_norm = 0.5 * ((-2.0 * lo).exp() - (-2.0 * hi).exp());
            let right: Vec<f64> = (0..samples as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = sample_rng(seed, 2 * i + 1);
                    let z = Complex64::new(rng.gen::<f64>(), rng.gen::<f64>());
                    let u: f64 = rng.gen();
                    let t = -0.5 * ((-2.0 * lo).exp() - 2.0 * z_norm * u).ln();
                    let (q1, q2) = random_su2(&mut rng);
                    let g = Sl2c::from_iwasawa(&HPoint { z, h: t.exp() }, q1, q2);
                    let th = incomplete_eisenstein(f, &g)?;
                    Ok((f.eval(t, q1, q2) * th.conj()).re)
                })
                .collect::<Result<_, EisensteinError>>()?;
            let (rm, rse) = mean_se(&right);
            (z_norm * rm, z_norm * rse)
        }
    };
    let rel_err = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
    let noisy = (lhs_se.powi(2) + rhs_se.powi(2)).sqrt() > 0.02 * rhs.abs();
    Ok(UnfoldingReport { lhs, lhs_se, rhs, rhs_se, rel_err, noisy })
}

/// Both sides of `||Theta_f||^2 <= (2 ||f||_2^2 + c0 ||f||_1^2) / ([Gamma_inf : Gamma'_inf] nu)`
/// for the probability measure on `Gamma \ G`, with `nu` the covolume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaNormReport {
    pub norm_sq: f64,
    pub norm_sq_se: f64,
    pub bound: f64,
}

impl ThetaNormReport {
    pub fn holds(&self) -> bool {
        self.norm_sq <= self.bound
    }
}

pub fn theta_norm_check(
    f: &ProductTestFunction,
    c0: f64,
    samples: usize,
    seed: u64,
) -> Result<ThetaNormReport, EisensteinError> {
    let vals: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            let (g, _) = haar_sample_ford(&mut rng);
            Ok(incomplete_eisenstein(f, &g)?.norm_sqr())
        })
        .collect::<Result<_, EisensteinError>>()?;
    let (norm_sq, norm_sq_se) = mean_se(&vals);
    let nu = 0.5 * ford_volume();
    let l1 = f.norm_pow(1);
    let bound = (2.0 * f.norm_pow(2) + c0 * l1 * l1) / (CUSP_INDEX * nu);
    Ok(ThetaNormReport { norm_sq, norm_sq_se, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{lie_derivative_complex, raising_matrix, Difference, LieError};
    use rand::Rng;

    fn c(s: f64) -> Complex64 {
        Complex64::new(s, 0.0)
    }

    #[test]
    fn cosets_are_coprime_and_distinct() {
        let reps = enumerate_cosets(30);
        assert_eq!(reps[0], CosetRep::identity());
        let mut seen = std::collections::HashSet::new();
        for r in &reps[1..] {
            assert!(GaussianInt::gcd(r.c, r.d).is_unit());
            assert_eq!(r.c, r.c.canonical_associate());
            assert!(seen.insert(*r));
        }
        // Number of residues mod c coprime to c is Euler's phi: N(c) prod (1 - 1/N(p)).
        let phi5 = reps.iter().filter(|r| r.c == GaussianInt::new(2, 1)).count();
        assert_eq!(phi5, 4);
        let phi2 = reps.iter().filter(|r| r.c == GaussianInt::new(1, 1)).count();
        assert_eq!(phi2, 1);
        let phi4 = reps.iter().filter(|r| r.c == GaussianInt::new(2, 0)).count();
        assert_eq!(phi4, 2);
    }

    #[test]
    fn block_sum_matches_explicit_rows() {
        let trunc = TruncationParams { n_bound: 10, window: 3, quad_points: 8, tail: false };
        let reps = enumerate_cosets(trunc.n_bound);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in 0..3u32 {
            let p = HPoint { z: Complex64::new(0.21, -0.37), h: 0.8 };
            let (q1, q2) = random_su2(&mut rng);
            let g = Sl2c::from_iwasawa(&p, q1, q2);
            let fast = eisenstein_sum(&reps, m, c(2.5), &g, &trunc).unwrap().value;
            let rows = expand_rows(&reps, trunc.window, p.z);
            let slow = row_sum(&rows, m, c(2.5), &g);
            assert!((fast - slow).norm() < 1e-12 * slow.norm().max(1.0), "m={m}: {fast} vs {slow}");
        }
    }

    #[test]
    fn row_term_matches_generic_phi() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let g = crate::vahlen::random::random_vahlen(2, &mut rng, 0.8);
            let gs = Sl2c::from_vahlen(&g).unwrap();
            let (cc, dd) = (GaussianInt::new(2, 1), GaussianInt::new(1, -1));
            let gamma = crate::picard::PicardMatrix::from_bottom_row(cc, dd).unwrap();
            let prod = gamma.to_sl2c().mul(&gs).to_vahlen();
            for m in 0..4 {
                let want = crate::lie::phi_sm_eval(c(2.3), m, &prod).unwrap();
                let got = row_term(cc, dd, m, c(2.3), &gs);
                assert!((want - got).norm() < 1e-10 * want.norm().max(1e-300));
            }
        }
    }

    #[test]
    fn kernel_plane_integral_closed_form() {
        // Integrate the kernel over a big square plus its exterior.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 0..3u32 {
            let (q1, q2) = random_su2(&mut rng);
            let k = Kernel::new(c(2.5), m, 0.7, q1, q2);
            let inner: Complex64 = {
                let n = 400;
                let a = 6.0;
                let step = 2.0 * a / n as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let w = Complex64::new(-a + (i as f64 + 0.5) * step, -a + (j as f64 + 0.5) * step);
                        acc += k.eval(w);
                    }
                }
                acc * step * step
            };
            let total = inner + k.exterior_integral(Complex64::new(0.0, 0.0), 6.0);
            let want = k.plane_integral().unwrap();
            assert!((total - want).norm() < 1e-4 * want.norm().max(1e-3), "m={m}: {total} vs {want}");
        }
    }

    #[test]
    fn dominant_identity_term_at_large_height() {
        let trunc = TruncationParams { n_bound: 20, ..Default::default() };
        let h = 40.0;
        let v = eisenstein_eval(c(2.5), &HPoint { z: Complex64::new(0.1, 0.2), h }, &trunc).unwrap();
        assert!((v.value.re / h.powf(2.5) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn m_zero_reduces_to_spherical() {
        let trunc = TruncationParams { n_bound: 8, window: 4, ..Default::default() };
        let p = HPoint { z: Complex64::new(0.3, 0.1), h: 0.9 };
        let a = eisenstein_eval(c(2.4), &p, &trunc).unwrap().value;
        let g = Sl2c::from_iwasawa(&p, Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)).to_vahlen();
        let b = eisenstein_nonspherical_eval(0, c(2.4), &g, &trunc).unwrap().value;
        assert!((a - b).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn translation_invariance_is_exact() {
        let trunc = TruncationParams { n_bound: 20, window: 6, ..Default::default() };
        let p = HPoint { z: Complex64::new(0.31, -0.12), h: 0.6 };
        let a = eisenstein_eval(c(2.5), &p, &trunc).unwrap().value;
        for w in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let q = HPoint { z: p.z + w, h: p.h };
            let b = eisenstein_eval(c(2.5), &q, &trunc).unwrap().value;
            assert!((a - b).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn laplace_eigenfunction() {
        let trunc = TruncationParams { n_bound: 5, window: 3, quad_points: 8, tail: false };
        let reps = enumerate_cosets(trunc.n_bound);
        let s = 2.5;
        let anchor = Complex64::new(0.2, 0.1);
        let rows = expand_rows(&reps, trunc.window, anchor);
        let f = |x: &[f64], t: f64| {
            let g = Sl2c::from_iwasawa(
                &HPoint { z: Complex64::new(x[0], x[1]), h: t.exp() },
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            );
            row_sum(&rows, 0, c(s), &g).re
        };
        let x = [0.2, 0.1];
        let t = -0.1;
        let lap = crate::lie::laplacian_fd(f, &x, t, 2, 1e-3);
        let v = f(&x, t);
        assert!((lap + s * (2.0 - s) * v).abs() < 1e-5 * v.abs(), "{lap} {v}");
    }

    #[test]
    fn raising_maps_series_up_one_weight() {
        let trunc = TruncationParams { n_bound: 5, window: 2, quad_points: 8, tail: false };
        let reps = enumerate_cosets(trunc.n_bound);
        let s = c(2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = HPoint { z: Complex64::new(0.1, 0.3), h: 0.9 };
        let rows = expand_rows(&reps, trunc.window, p.z);
        for m in 0..3u32 {
            let (q1, q2) = random_su2(&mut rng);
            let g = Sl2c::from_iwasawa(&p, q1, q2).to_vahlen();
            let rows_ref = &rows;
            let f = move |h: &VahlenMatrix<f64>| -> Result<Complex64, LieError> {
                let hs = Sl2c::from_vahlen(h).map_err(|_| LieError::Singular("not Picard"))?;
                Ok(row_sum(rows_ref, m, s, &hs))
            };
            let lhs = lie_derivative_complex(&raising_matrix::<f64>(2), f, &g, 1e-4, Difference::Richardson)
                .unwrap();
            let rhs = (s + m as f64) * row_sum(&rows, m + 1, s, &Sl2c::from_vahlen(&g).unwrap());
            assert!((lhs - rhs).norm() < 1e-6 * rhs.norm().max(1e-3), "m={m}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn constant_term_matches_direct_quadrature() {
        let trunc = TruncationParams { n_bound: 4, window: 5, quad_points: 24, tail: true };
        let reps = enumerate_cosets(trunc.n_bound);
        let s = c(2.5);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (q1, q2) = (Complex64::new(r, 0.0), Complex64::new(0.0, r));
        let h = 0.6;
        let fast = constant_term_numeric(&reps, 1, s, h, (q1, q2), &trunc);
        let n = trunc.quad_points;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let p = HPoint { z: Complex64::new(i as f64 / n as f64, j as f64 / n as f64), h };
                let g = Sl2c::from_iwasawa(&p, q1, q2);
                let no_coset_tail = TruncationParams { tail: true, ..trunc };
                let v = eisenstein_sum(&reps, 1, s, &g, &no_coset_tail).unwrap().value
                    - coset_tail(s, trunc.n_bound) * Kernel::new(s, 1, h, q1, q2).plane_integral().unwrap();
                acc += v;
            }
        }
        let direct = acc / (n * n) as f64;
        assert!((fast - direct).norm() < 5e-4 * fast.norm(), "{fast} vs {direct}");
    }

    #[test]
    fn three_estimates_of_c_agree() {
        let trunc = TruncationParams { n_bound: 60, window: 6, quad_points: 32, tail: true };
        let reps = enumerate_cosets(trunc.n_bound);
        let est: Vec<CEstimate> = (0..3).map(|m| estimate_c_with(&reps, 2.5, m, &trunc).unwrap()).collect();
        for e in &est {
            assert!((e.leading - 1.0).abs() < 1e-3, "{e:?}");
        }
        for a in &est {
            for b in &est {
                assert!((a.value - b.value).abs() < 1e-2 * a.value.abs(), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn tail_estimate_decreases_in_n() {
        let mut prev = f64::INFINITY;
        for nb in [10, 20, 40, 80, 160] {
            let t = TruncationParams { n_bound: nb, ..Default::default() }.tail_estimate(2.5);
            assert!(t > 0.0 && t < prev);
            prev = t;
        }
    }

    #[test]
    fn theta_examples() {
        let f = ProductTestFunction::new(Profile::smoothed_indicator(5.0, 6.0, 0.2), 0);
        let p = HPoint { z: Complex64::new(0.2, 0.1), h: 5.5f64.exp() };
        let g = Sl2c::from_iwasawa(&p, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
        let th = incomplete_eisenstein(&f, &g).unwrap();
        assert!((th.re - f.v.eval(5.5)).abs() < 1e-12);
        let f = ProductTestFunction::new(Profile::smoothed_indicator(-0.8, 0.5, 0.3), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let p = HPoint {
                z: Complex64::new(rng.gen::<f64>(), rng.gen::<f64>()),
                h: 0.3 + rng.gen::<f64>(),
            };
            let g = Sl2c::from_iwasawa(&p, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
            let a = incomplete_eisenstein(&f, &g).unwrap();
            assert!(a.re >= 0.0);
            for gen in crate::picard::PicardMatrix::generators() {
                let b = incomplete_eisenstein(&f, &gen.to_sl2c().mul(&g)).unwrap();
                assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
            }
        }
    }

    #[test]
    fn residue_estimate_is_close_to_density() {
        let r = residue_estimate(200);
        assert!((r - PI * PI / (4.0 * ZETA_K2)).abs() < 0.03 * r);
    }
}
