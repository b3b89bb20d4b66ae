//! Spherical harmonics on `S^n`, the coefficients `P_m(s)`, the functionals
//! `M_f(s)` and `M~_f(s)`, and the profile ratio behind the class `A_lambda`.

use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::vahlen::angles_to_sphere;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarmonicsError {
    #[error("P_m(s) has a pole at s = {0}")]
    Pole(f64),
    #[error("quadrature grid of {0} points exceeds the limit")]
    GridTooLarge(usize),
    #[error("Parseval defect {0:.3e} exceeds 1%")]
    UnderResolved(f64),
    #[error("degenerate profile: a denominator vanishes")]
    DegenerateProfile,
    #[error("non-finite harmonic mass")]
    Divergent,
    #[error("dimension must be at least 1")]
    BadDimension,
}

/// `P_m(s) = prod_{k<m} (n - s + k) / (s + k)`.
pub fn pm_eval(n: usize, m: u32, s: Complex64) -> Result<Complex64, HarmonicsError> {
    let mut p = Complex64::new(1.0, 0.0);
    for k in 0..m {
        let den = s + k as f64;
        if den.norm() == 0.0 {
            return Err(HarmonicsError::Pole(s.re));
        }
        p *= (n as f64 - s + k as f64) / den;
    }
    Ok(p)
}

/// `log P_m(s)` for real `s` in `(n/2, n)`, summed term by term.
pub fn pm_log(n: usize, m: u32, s: f64) -> f64 {
    let nf = n as f64;
    (0..m).map(|k| ((nf - s + k as f64) / (s + k as f64)).ln()).sum()
}

/// `log P_m(s) - (n - 2s) log(m + 1)`.
pub fn pm_asymptotic_residual(n: usize, m: u32, s: f64) -> f64 {
    pm_log(n, m, s) - (n as f64 - 2.0 * s) * ((m + 1) as f64).ln()
}

/// Product quadrature on `S^n` in the angles `theta_0..theta_{n-1}`:
/// Gauss-Legendre in the polar angles, trapezoid in the last one.
/// Weights form a probability measure.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    n: usize,
    m_max: usize,
    polar: Vec<f64>,
    polar_w: Vec<f64>,
    az: usize,
}

const MAX_GRID: usize = 30_000_000;

impl SphereGrid {
    /// Resolution `2 m_max + 8` in every angle.
    pub fn new(n: usize, m_max: usize) -> Result<Self, HarmonicsError> {
        if n == 0 {
            return Err(HarmonicsError::BadDimension);
        }
        let deg = 2 * m_max + 8;
        let size = deg.checked_pow(n as u32).unwrap_or(usize::MAX);
        if size > MAX_GRID {
            return Err(HarmonicsError::GridTooLarge(size));
        }
        let gl = GaussLegendre::new(deg).expect("degree >= 2");
        let mut pairs: Vec<(f64, f64)> = gl
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (std::f64::consts::FRAC_PI_2 * (x + 1.0), std::f64::consts::FRAC_PI_2 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(SphereGrid {
            n,
            m_max,
            polar: pairs.iter().map(|p| p.0).collect(),
            polar_w: pairs.iter().map(|p| p.1).collect(),
            az: deg,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn len(&self) -> usize {
        self.polar.len().pow(self.n as u32 - 1) * self.az
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn az_angle(&self, p: usize) -> f64 {
        2.0 * std::f64::consts::PI * p as f64 / self.az as f64
    }

    /// Level weights `w_q sin^{d-1}(theta_q)`, normalized to total mass 1.
    fn level_weights(&self, d: usize) -> Vec<f64> {
        let raw: Vec<f64> = self
            .polar
            .iter()
            .zip(&self.polar_w)
            .map(|(t, w)| w * t.sin().powi(d as i32 - 1))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    }

    /// Samples `phi` at all nodes, last angle fastest.
    pub fn sample<F>(&self, phi: F) -> Vec<Complex64>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let np = self.polar.len();
        let levels = self.n - 1;
        let mut out = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; levels];
        let mut th = vec![0.0; self.n];
        loop {
            for (k, &q) in idx.iter().enumerate() {
                th[k] = self.polar[q];
            }
            for p in 0..self.az {
                th[self.n - 1] = self.az_angle(p);
                out.push(phi(&angles_to_sphere(&th)));
            }
            let mut k = levels;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < np {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Product weights matching `sample` order.
    pub fn weights(&self) -> Vec<f64> {
        let levels: Vec<Vec<f64>> = (0..self.n - 1).map(|k| self.level_weights(self.n - k)).collect();
        let mut w = vec![1.0 / self.az as f64];
        for lw in &levels {
            w = w
                .iter()
                .flat_map(|a| lw.iter().map(move |b| a * b))
                .collect();
        }
        // `w` now has the polar indices in order; expand by the azimuth.
        w.iter().flat_map(|a| std::iter::repeat_n(*a, self.az)).collect()
    }

    /// Orthonormal polar factors `sin^{l'} C^{l' + (d-1)/2}_{l - l'}(cos)` at
    /// level dimension `d`, indexed `[l'][l - l'][q]`.
    fn polar_basis(&self, d: usize, weights: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let mm = self.m_max;
        (0..=mm)
            .map(|lp| {
                let alpha = lp as f64 + (d as f64 - 1.0) / 2.0;
                let rows = mm - lp + 1;
                let mut out = vec![vec![0.0; self.polar.len()]; rows];
                for (q, &t) in self.polar.iter().enumerate() {
                    let x = t.cos();
                    let sp = t.sin().powi(lp as i32);
                    let (mut c0, mut c1) = (1.0, 2.0 * alpha * x);
                    for (j, row) in out.iter_mut().enumerate() {
                        let c = match j {
                            0 => c0,
                            1 => c1,
                            _ => {
                                let jf = j as f64;
                                let c2 = (2.0 * x * (jf + alpha - 1.0) * c1 - (jf + 2.0 * alpha - 2.0) * c0) / jf;
                                c0 = c1;
                                c1 = c2;
                                c2
                            }
                        };
                        row[q] = sp * c;
                    }
                }
                for row in &mut out {
                    let norm: f64 = row.iter().zip(weights).map(|(f, w)| f * f * w).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        row.iter_mut().for_each(|f| *f /= norm);
                    }
                }
                out
            })
            .collect()
    }
}

/// Degree decomposition of a function on `S^n` (probability measure).
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProjectionReport {
    /// `||phi_m||_2^2` for `m = 0..=m_max`.
    pub norms: Vec<f64>,
    pub l2_sq: f64,
    pub l1: f64,
    /// `1 - sum_m ||phi_m||^2 / ||phi||^2`.
    pub parseval_defect: f64,
}

/// Degree projections by separation of variables: Fourier transform in the
/// last angle, then one Gegenbauer transform per polar angle.
pub fn degree_projection_norms_unchecked(
    grid: &SphereGrid,
    samples: &[Complex64],
) -> ProjectionReport {
    let n = grid.n;
    let mm = grid.m_max;
    let np = grid.polar.len();
    let outer = np.pow(n as u32 - 1);
    assert_eq!(samples.len(), outer * grid.az);

    let weights = grid.weights();
    let l2_sq: f64 = samples.iter().zip(&weights).map(|(v, w)| v.norm_sqr() * w).sum();
    let l1: f64 = samples.iter().zip(&weights).map(|(v, w)| v.norm() * w).sum();

    // Tails carry the degree reached so far and values on the remaining grid.
    let mut tails: Vec<(usize, Vec<Complex64>)> = Vec::new();
    let az = grid.az;
    for j in -(mm as i64)..=(mm as i64) {
        let tw: Vec<Complex64> = (0..az)
            .map(|p| Complex64::from_polar(1.0 / az as f64, -(j as f64) * grid.az_angle(p)))
            .collect();
        let vals: Vec<Complex64> = (0..outer)
            .map(|o| {
                samples[o * az..(o + 1) * az]
                    .iter()
                    .zip(&tw)
                    .map(|(a, b)| a * b)
                    .sum::<Complex64>()
            })
            .collect();
        tails.push((j.unsigned_abs() as usize, vals));
    }

    for k in (0..n - 1).rev() {
        let d = n - k;
        let lw = grid.level_weights(d);
        let basis = grid.polar_basis(d, &lw);
        let mut next = Vec::new();
        for (lp, vals) in &tails {
            let inner = vals.len() / np;
            for (dl, f) in basis[*lp].iter().enumerate() {
                let wf: Vec<f64> = f.iter().zip(&lw).map(|(a, b)| a * b).collect();
                let nv: Vec<Complex64> = (0..inner)
                    .map(|o| {
                        vals[o * np..(o + 1) * np]
                            .iter()
                            .zip(&wf)
                            .map(|(a, b)| a * b)
                            .sum::<Complex64>()
                    })
                    .collect();
                next.push((lp + dl, nv));
            }
        }
        tails = next;
    }

    let mut norms = vec![0.0; mm + 1];
    for (l, v) in &tails {
        norms[*l] += v[0].norm_sqr();
    }
    let total: f64 = norms.iter().sum();
    let parseval_defect = if l2_sq > 0.0 { 1.0 - total / l2_sq } else { 0.0 };
    ProjectionReport { norms, l2_sq, l1, parseval_defect }
}

/// As above, failing when more than 1% of the mass is unaccounted for.
pub fn degree_projection_norms<F>(
    n: usize,
    m_max: usize,
    phi: F,
) -> Result<ProjectionReport, HarmonicsError>
where
    F: Fn(&[f64]) -> Complex64,
{
    let grid = SphereGrid::new(n, m_max)?;
    let samples = grid.sample(phi);
    let r = degree_projection_norms_unchecked(&grid, &samples);
    if r.parseval_defect.abs() > 0.01 {
        return Err(HarmonicsError::UnderResolved(r.parseval_defect));
    }
    Ok(r)
}

/// `sup_m ||phi_m||^2 / ((m+1)^{n-1} ||phi||_1^2)`.
pub fn chen_ratio(n: usize, r: &ProjectionReport) -> f64 {
    r.norms
        .iter()
        .enumerate()
        .map(|(m, v)| v / (((m + 1) as f64).powi(n as i32 - 1) * r.l1 * r.l1))
        .fold(0.0, f64::max)
}

/// `sum_m ||phi_m||^2 (m+1)^{n-2s}` over `||phi||_1^{2(2s/n-1)} ||phi||_2^{4(1-s/n)}`.
pub fn fsbound_ratio(n: usize, r: &ProjectionReport, s: f64) -> f64 {
    let nf = n as f64;
    let lhs: f64 = r
        .norms
        .iter()
        .enumerate()
        .map(|(m, v)| v * ((m + 1) as f64).powf(nf - 2.0 * s))
        .sum();
    let l2 = r.l2_sq.sqrt();
    lhs / (r.l1.powf(2.0 * (2.0 * s / nf - 1.0)) * l2.powf(4.0 * (1.0 - s / nf)))
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ChenReport {
    pub chen_constant: f64,
    pub fsbound_constant: f64,
    pub max_parseval_defect: f64,
}

/// Empirical constants of the Chen-type bound and the splitting bound over a
/// corpus of functions, with `s` on [`s_grid`].
pub fn chen_bound_check(n: usize, corpus: &[ProjectionReport]) -> ChenReport {
    let grid = s_grid(n);
    let mut rep = ChenReport { chen_constant: 0.0, fsbound_constant: 0.0, max_parseval_defect: 0.0 };
    for r in corpus {
        rep.chen_constant = rep.chen_constant.max(chen_ratio(n, r));
        rep.max_parseval_defect = rep.max_parseval_defect.max(r.parseval_defect.abs());
        for &s in &grid {
            rep.fsbound_constant = rep.fsbound_constant.max(fsbound_ratio(n, r, s));
        }
    }
    rep
}

/// 64 uniform points on `[n/2 + 0.01, n - 0.01]`.
pub fn s_grid(n: usize) -> Vec<f64> {
    let (a, b) = (n as f64 / 2.0 + 0.01, n as f64 - 0.01);
    (0..64).map(|i| a + (b - a) * i as f64 / 63.0).collect()
}

/// Compactly supported profile `v` on `[lo, hi]`, integrated by composite
/// 16-point Gauss-Legendre.
#[derive(Clone)]
pub struct Profile {
    lo: f64,
    hi: f64,
    nodes: Vec<(f64, f64, f64)>,
    #[allow(clippy::type_complexity)]
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile").field("lo", &self.lo).field("hi", &self.hi).finish()
    }
}

fn smooth_step(x: f64) -> f64 {
    let bump = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let a = bump(x);
    let b = bump(1.0 - x);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

impl Profile {
    pub fn new<F>(lo: f64, hi: f64, panels: usize, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let gl = GaussLegendre::new(16).expect("degree >= 2");
        let h = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(16 * panels);
        for p in 0..panels {
            let a = lo + p as f64 * h;
            for &(x, w) in gl.as_node_weight_pairs() {
                let t = a + 0.5 * h * (x + 1.0);
                nodes.push((t, 0.5 * h * w, f(t)));
            }
        }
        Profile { lo, hi, nodes, f: Arc::new(f) }
    }

    /// `C^infinity` function equal to 1 on `[a, b]`, vanishing outside
    /// `[a - delta, b + delta]`, with values in `[0, 1]`.
    pub fn smoothed_indicator(a: f64, b: f64, delta: f64) -> Self {
        let f = move |t: f64| smooth_step((t - a + delta) / delta) * smooth_step((b + delta - t) / delta);
        let span = b - a + 2.0 * delta;
        let panels = ((span / delta) as usize * 8).clamp(64, 20_000);
        Profile::new(a - delta, b + delta, panels, f)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < self.lo || t > self.hi {
            0.0
        } else {
            (self.f)(t)
        }
    }

    /// `int v(t)^power e^{-s (t - shift)} dt`.
    pub fn moment(&self, s: f64, power: i32, shift: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(t, w, v)| w * v.powi(power) * (-s * (t - shift)).exp())
            .sum()
    }

    /// `int v(t) e^{-st} dt`.
    pub fn laplace(&self, s: f64) -> f64 {
        self.moment(s, 1, 0.0)
    }
}

/// `int v e^{-st} / ((int v e^{-nt})^{2s/n-1} (int v^2 e^{-nt})^{1-s/n})`;
/// invariant under translating `v`.
pub fn a_lambda_ratio(n: usize, v: &Profile, s: f64) -> Result<f64, HarmonicsError> {
    let nf = n as f64;
    let shift = v.lo;
    let num = v.moment(s, 1, shift);
    let d1 = v.moment(nf, 1, shift);
    let d2 = v.moment(nf, 2, shift);
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(HarmonicsError::DegenerateProfile);
    }
    Ok(num / (d1.powf(2.0 * s / nf - 1.0) * d2.powf(1.0 - s / nf)))
}

/// Maximum of the ratio over `grid`.
pub fn a_lambda_max(n: usize, v: &Profile, grid: &[f64]) -> Result<f64, HarmonicsError> {
    grid.iter()
        .map(|&s| a_lambda_ratio(n, v, s))
        .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
}

pub fn a_lambda_check(n: usize, v: &Profile, lambda: f64, grid: &[f64]) -> Result<bool, HarmonicsError> {
    Ok(a_lambda_max(n, v, grid)? <= lambda)
}

/// Normalized moments of a profile anchored at `tau`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MomentReport {
    /// `int v e^{-nt} / e^{-n tau}`.
    pub first_n: f64,
    /// `int v^2 e^{-nt} / e^{-n tau}`.
    pub second_n: f64,
    /// Range of `int v e^{-st} / e^{-s tau}` over the s-grid.
    pub s_min: f64,
    pub s_max: f64,
}

impl MomentReport {
    /// `1/(3n) <= first, second <= 3/n` and `1/(3n) <= s-moments <= 5/n`.
    pub fn holds(&self, n: usize) -> bool {
        let nf = n as f64;
        let lo = 1.0 / (3.0 * nf);
        (lo..=3.0 / nf).contains(&self.first_n)
            && (lo..=3.0 / nf).contains(&self.second_n)
            && self.s_min >= lo
            && self.s_max <= 5.0 / nf
    }
}

pub fn moment_report(n: usize, v: &Profile, tau: f64, grid: &[f64]) -> MomentReport {
    let nf = n as f64;
    let (mut s_min, mut s_max) = (f64::INFINITY, 0.0f64);
    for &s in grid {
        let m = v.moment(s, 1, tau);
        s_min = s_min.min(m);
        s_max = s_max.max(m);
    }
    MomentReport {
        first_n: v.moment(nf, 1, tau),
        second_n: v.moment(nf, 2, tau),
        s_min,
        s_max,
    }
}

/// `M_f(s) = (sum_m P_m(s) ||phi_m||^2) |int v e^{-st}|^2` for `f = v phi`.
pub fn m_f_eval(n: usize, v: &Profile, norms: &[f64], s: f64) -> Result<f64, HarmonicsError> {
    let mut acc = 0.0;
    for (m, w) in norms.iter().enumerate() {
        acc += pm_log(n, m as u32, s).exp() * w;
    }
    let l = v.laplace(s);
    let out = acc * l * l;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(HarmonicsError::Divergent)
    }
}

/// `M~_f(s)` with `P_m(s)` replaced by `(m+1)^{n-2s}`.
pub fn m_f_tilde_eval(n: usize, v: &Profile, norms: &[f64], s: f64) -> Result<f64, HarmonicsError> {
    let nf = n as f64;
    let acc: f64 = norms
        .iter()
        .enumerate()
        .map(|(m, w)| ((m + 1) as f64).powf(nf - 2.0 * s) * w)
        .sum();
    let l = v.laplace(s);
    let out = acc * l * l;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(HarmonicsError::Divergent)
    }
}
