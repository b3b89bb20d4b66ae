//! Vahlen matrices `SL(2, T_{n-1})` acting on the upper half-space
//! `H^{n+1}` by Möbius transformations.
//!
//! Entries live in `C_{n-1}` but are stored in `C_n` so that points
//! `x + h e_n` and the matrices share one algebra.

use std::ops::{Add, Mul, Sub};

use crate::clifford::{CliffordElement, CliffordError};
use crate::scalar::Scalar;

/// Default tolerance for invariant checks.
pub const INVARIANT_TOL: f64 = 1e-9;

/// Products between determinant renormalizations.
pub const RENORM_EVERY: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VahlenError {
    #[error("Vahlen condition violated: {0}")]
    Invariant(&'static str),
    #[error("point maps to the boundary")]
    ToBoundary,
    #[error("height must be positive, got {0}")]
    NonPositiveHeight(f64),
    #[error("lower-right entry vanishes, NA^- coordinates undefined")]
    SingularD,
    #[error("matrix exponential did not converge within {0} terms")]
    ExpNoConvergence(usize),
    #[error(transparent)]
    Clifford(#[from] CliffordError),
}

/// A 2x2 matrix with entries in `C_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordMatrix<S: Scalar> {
    pub a: CliffordElement<S>,
    pub b: CliffordElement<S>,
    pub c: CliffordElement<S>,
    pub d: CliffordElement<S>,
}

impl<S: Scalar> CliffordMatrix<S> {
    pub fn new(
        a: CliffordElement<S>,
        b: CliffordElement<S>,
        c: CliffordElement<S>,
        d: CliffordElement<S>,
    ) -> Self {
        CliffordMatrix { a, b, c, d }
    }

    pub fn zero(n: usize) -> Self {
        let z = CliffordElement::zero(n);
        CliffordMatrix::new(z.clone(), z.clone(), z.clone(), z)
    }

    pub fn identity(n: usize) -> Self {
        let z = CliffordElement::zero(n);
        let o = CliffordElement::one(n);
        CliffordMatrix::new(o.clone(), z.clone(), z, o)
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn entries(&self) -> [&CliffordElement<S>; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    pub fn scale(&self, s: &S) -> Self {
        CliffordMatrix::new(self.a.scale(s), self.b.scale(s), self.c.scale(s), self.d.scale(s))
    }

    pub fn is_zero_tol(&self, tol: f64) -> bool {
        self.entries().iter().all(|e| e.is_zero_tol(tol))
    }

    /// Commutator `XY - YX`.
    pub fn bracket(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn to_f64(&self) -> CliffordMatrix<f64> {
        CliffordMatrix::new(self.a.to_f64(), self.b.to_f64(), self.c.to_f64(), self.d.to_f64())
    }

    /// Max row sum of entrywise l1 norms; submultiplicative.
    pub fn l1_norm(&self) -> f64 {
        let l1 = |e: &CliffordElement<S>| e.coeffs().iter().map(|c| c.to_f64().abs()).sum::<f64>();
        (l1(&self.a) + l1(&self.b)).max(l1(&self.c) + l1(&self.d))
    }
}

impl CliffordMatrix<f64> {
    pub fn dist(&self, other: &Self) -> f64 {
        self.a
            .dist(&other.a)
            .max(self.b.dist(&other.b))
            .max(self.c.dist(&other.c))
            .max(self.d.dist(&other.d))
    }
}

impl<S: Scalar> Mul for &CliffordMatrix<S> {
    type Output = CliffordMatrix<S>;
    fn mul(self, o: Self) -> CliffordMatrix<S> {
        CliffordMatrix::new(
            &(&self.a * &o.a) + &(&self.b * &o.c),
            &(&self.a * &o.b) + &(&self.b * &o.d),
            &(&self.c * &o.a) + &(&self.d * &o.c),
            &(&self.c * &o.b) + &(&self.d * &o.d),
        )
    }
}

impl<S: Scalar> Add for &CliffordMatrix<S> {
    type Output = CliffordMatrix<S>;
    fn add(self, o: Self) -> CliffordMatrix<S> {
        CliffordMatrix::new(&self.a + &o.a, &self.b + &o.b, &self.c + &o.c, &self.d + &o.d)
    }
}

impl<S: Scalar> Sub for &CliffordMatrix<S> {
    type Output = CliffordMatrix<S>;
    fn sub(self, o: Self) -> CliffordMatrix<S> {
        CliffordMatrix::new(&self.a - &o.a, &self.b - &o.b, &self.c - &o.c, &self.d - &o.d)
    }
}

/// Element of `SL(2, T_{n-1})` acting on `H^{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VahlenMatrix<S: Scalar> {
    m: CliffordMatrix<S>,
}

fn free_of_top_generator<S: Scalar>(e: &CliffordElement<S>, tol: f64) -> bool {
    let top = 1usize << (e.n() - 1);
    e.coeffs()
        .iter()
        .enumerate()
        .all(|(mask, c)| mask & top == 0 || c.is_negligible(tol))
}

impl<S: Scalar> VahlenMatrix<S> {
    /// Checks the Vahlen conditions at tolerance `tol`.
    pub fn new(m: CliffordMatrix<S>, tol: f64) -> Result<Self, VahlenError> {
        let g = VahlenMatrix { m };
        g.check(tol)?;
        Ok(g)
    }

    pub fn new_unchecked(m: CliffordMatrix<S>) -> Self {
        VahlenMatrix { m }
    }

    pub fn identity(n: usize) -> Self {
        VahlenMatrix { m: CliffordMatrix::identity(n) }
    }

    /// `(0, -1; 1, 0)`.
    pub fn inversion(n: usize) -> Self {
        let z = CliffordElement::zero(n);
        let o = CliffordElement::<S>::one(n);
        VahlenMatrix {
            m: CliffordMatrix::new(z.clone(), -&o, o, z),
        }
    }

    /// `u_x = (1, x; 0, 1)` with `x` in `V^{n-1}` given by `x_0..x_{n-1}`.
    pub fn make_u(n: usize, x: &[S]) -> Self {
        let mut m = CliffordMatrix::identity(n);
        m.b = horizontal(n, x);
        VahlenMatrix { m }
    }

    /// `u^-_x = (1, 0; x, 1)`.
    pub fn make_u_lower(n: usize, x: &[S]) -> Self {
        let mut m = CliffordMatrix::identity(n);
        m.c = horizontal(n, x);
        VahlenMatrix { m }
    }

    /// The unipotent flow `g_t = u^-_t` with scalar parameter.
    pub fn make_flow(n: usize, t: S) -> Self {
        Self::make_u_lower(n, &[t])
    }

    /// `diag(v', v)` for `v` in `T_{n-1}` of unit norm.
    pub fn make_m(v: &CliffordElement<S>) -> Self {
        let n = v.n();
        let z = CliffordElement::zero(n);
        VahlenMatrix {
            m: CliffordMatrix::new(v.prime(), z.clone(), z, v.clone()),
        }
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn matrix(&self) -> &CliffordMatrix<S> {
        &self.m
    }

    pub fn into_matrix(self) -> CliffordMatrix<S> {
        self.m
    }

    pub fn check(&self, tol: f64) -> Result<(), VahlenError> {
        let n = self.n();
        for e in self.m.entries() {
            if !free_of_top_generator(e, tol) {
                return Err(VahlenError::Invariant("entry involves e_n"));
            }
        }
        let ab = &self.m.a * &self.m.b.star();
        if !ab.is_in_vector_space(n - 1, tol) {
            return Err(VahlenError::Invariant("ab* not in V^{n-1}"));
        }
        let cd = &self.m.c * &self.m.d.star();
        if !cd.is_in_vector_space(n - 1, tol) {
            return Err(VahlenError::Invariant("cd* not in V^{n-1}"));
        }
        let det = self.pseudo_det();
        if !(&det - &CliffordElement::one(n)).is_zero_tol(tol) {
            return Err(VahlenError::Invariant("ad* - bc* != 1"));
        }
        Ok(())
    }

    /// `ad* - bc*`.
    pub fn pseudo_det(&self) -> CliffordElement<S> {
        &(&self.m.a * &self.m.d.star()) - &(&self.m.b * &self.m.c.star())
    }

    pub fn mul(&self, other: &Self) -> Self {
        VahlenMatrix { m: &self.m * &other.m }
    }

    /// `(d*, -b*; -c*, a*)`.
    pub fn inverse(&self) -> Self {
        VahlenMatrix {
            m: CliffordMatrix::new(
                self.m.d.star(),
                -&self.m.b.star(),
                -&self.m.c.star(),
                self.m.a.star(),
            ),
        }
    }

    pub fn neg(&self) -> Self {
        VahlenMatrix {
            m: self.m.scale(&-S::one()),
        }
    }

    pub fn to_f64(&self) -> VahlenMatrix<f64> {
        VahlenMatrix { m: self.m.to_f64() }
    }
}

fn horizontal<S: Scalar>(n: usize, x: &[S]) -> CliffordElement<S> {
    assert!(x.len() <= n, "horizontal vector has at most n components");
    CliffordElement::vector(n, x)
}

/// Point `x + h e_n` of `H^{n+1}`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UpperHalfPoint {
    pub x: Vec<f64>,
    pub h: f64,
}

impl UpperHalfPoint {
    pub fn new(x: Vec<f64>, h: f64) -> Result<Self, VahlenError> {
        if !(h > 0.0) {
            return Err(VahlenError::NonPositiveHeight(h));
        }
        Ok(UpperHalfPoint { x, h })
    }

    /// The basepoint `e_n`.
    pub fn basepoint(n: usize) -> Self {
        UpperHalfPoint { x: vec![0.0; n], h: 1.0 }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn to_element(&self) -> CliffordElement<f64> {
        let n = self.n();
        let mut xs = self.x.clone();
        xs.push(self.h);
        CliffordElement::vector(n, &xs)
    }
}

/// Hyperbolic distance, `cosh d = 1 + (|dx|^2 + dh^2) / (2 h_p h_q)`.
pub fn dist_hyp(p: &UpperHalfPoint, q: &UpperHalfPoint) -> f64 {
    let dx2: f64 = p.x.iter().zip(&q.x).map(|(a, b)| (a - b) * (a - b)).sum();
    let dh = p.h - q.h;
    let r = ((dx2 + dh * dh) / (4.0 * p.h * q.h)).sqrt();
    2.0 * r.asinh()
}

/// `(u, t, k)` with `g = u_u a_t k` up to sign.
#[derive(Debug, Clone)]
pub struct IwasawaCoords {
    pub u: Vec<f64>,
    pub t: f64,
    pub k: VahlenMatrix<f64>,
    /// Image of `k` in `S^n`, `x_0..x_n`.
    pub sphere: Vec<f64>,
}

/// `(t, x^-)` with `g = u_{bd^{-1}} m a_t u^-_{x^-}`.
#[derive(Debug, Clone)]
pub struct NAMinusCoords {
    pub t: f64,
    pub x_minus: Vec<f64>,
}

impl NAMinusCoords {
    pub fn x_norm(&self) -> f64 {
        self.x_minus.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl VahlenMatrix<f64> {
    pub fn make_a(n: usize, t: f64) -> Self {
        let mut m = CliffordMatrix::identity(n);
        m.a = CliffordElement::scalar(n, (t / 2.0).exp());
        m.d = CliffordElement::scalar(n, (-t / 2.0).exp());
        VahlenMatrix { m }
    }

    /// Möbius action `(av + b)(cv + d)^{-1}`.
    pub fn mobius_apply(&self, p: &UpperHalfPoint) -> Result<UpperHalfPoint, VahlenError> {
        let n = self.n();
        if !(p.h > 0.0) {
            return Err(VahlenError::NonPositiveHeight(p.h));
        }
        let v = p.to_element();
        let num = &(&self.m.a * &v) + &self.m.b;
        let den = &(&self.m.c * &v) + &self.m.d;
        let den_sq = den.norm_sq(1e-8 * den.max_abs().max(1.0).powi(2))?;
        if den_sq <= f64::MIN_POSITIVE {
            return Err(VahlenError::ToBoundary);
        }
        let q = &num * &den.conj().scale(&(1.0 / den_sq));
        let x = (0..n).map(|k| q.vector_component(k)).collect();
        let h = q.vector_component(n);
        if !(h > 0.0) {
            return Err(VahlenError::ToBoundary);
        }
        Ok(UpperHalfPoint { x, h })
    }

    pub fn iwasawa_decompose(&self) -> Result<IwasawaCoords, VahlenError> {
        let n = self.n();
        let tol = 1e-8;
        let c2 = self.m.c.norm_sq(tol * (1.0 + self.m.c.max_abs().powi(2)))?;
        let d2 = self.m.d.norm_sq(tol * (1.0 + self.m.d.max_abs().powi(2)))?;
        let s = c2 + d2;
        let t = -s.ln();
        let cd = &self.m.c.conj() * &self.m.d;
        let mut sphere: Vec<f64> = (0..n).map(|k| 2.0 * cd.vector_component(k) / s).collect();
        sphere.push((d2 - c2) / s);
        let top = self.mobius_apply(&UpperHalfPoint::basepoint(n))?;
        let u = top.x;
        let neg_u: Vec<f64> = u.iter().map(|v| -v).collect();
        let k = Self::make_a(n, -t)
            .mul(&Self::make_u(n, &neg_u))
            .mul(self);
        Ok(IwasawaCoords { u, t, k, sphere })
    }

    pub fn naminus_decompose(&self) -> Result<NAMinusCoords, VahlenError> {
        let n = self.n();
        let d2 = self.m.d.norm_sq(1e-8 * (1.0 + self.m.d.max_abs().powi(2)))?;
        if d2 <= 1e-24 {
            return Err(VahlenError::SingularD);
        }
        let dinv = self.m.d.conj().scale(&(1.0 / d2));
        let xm = &dinv * &self.m.c;
        Ok(NAMinusCoords {
            t: -d2.ln(),
            x_minus: (0..n).map(|k| xm.vector_component(k)).collect(),
        })
    }

    /// The four factors `u_{bd^{-1}}, diag(d'/|d|, d/|d|), a_t, u^-_{d^{-1}c}`.
    pub fn naminus_factors(&self) -> Result<[VahlenMatrix<f64>; 4], VahlenError> {
        let n = self.n();
        let coords = self.naminus_decompose()?;
        let d2 = self.m.d.norm_sq(1e-8)?;
        let dinv = self.m.d.conj().scale(&(1.0 / d2));
        let bd = &self.m.b * &dinv;
        let ux: Vec<f64> = (0..n).map(|k| bd.vector_component(k)).collect();
        let unit = self.m.d.scale(&(1.0 / d2.sqrt()));
        Ok([
            Self::make_u(n, &ux),
            Self::make_m(&unit),
            Self::make_a(n, coords.t),
            Self::make_u_lower(n, &coords.x_minus),
        ])
    }

    /// Stabilizes `e_n`.
    pub fn is_in_k(&self, tol: f64) -> bool {
        let n = self.n();
        match self.mobius_apply(&UpperHalfPoint::basepoint(n)) {
            Ok(p) => p.x.iter().all(|v| v.abs() <= tol) && (p.h - 1.0).abs() <= tol,
            Err(_) => false,
        }
    }

    /// Flips the overall sign so the first non-negligible coefficient of `d`
    /// (else of `c`) is positive.
    pub fn canonical_sign(&self) -> Self {
        let first = self
            .m
            .d
            .coeffs()
            .iter()
            .chain(self.m.c.coeffs())
            .find(|v| v.abs() > 1e-12)
            .copied()
            .unwrap_or(1.0);
        if first < 0.0 {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Distance to `other` modulo `+-I`.
    pub fn dist_pm(&self, other: &Self) -> f64 {
        self.m.dist(&other.m).min(self.m.dist(&other.neg().m))
    }

    /// Rescales so that `ad* - bc*` is exactly 1 in its scalar part.
    pub fn renormalize(&self) -> Self {
        let det = self.pseudo_det().scalar_part();
        if det > 0.0 {
            VahlenMatrix {
                m: self.m.scale(&(1.0 / det.sqrt())),
            }
        } else {
            self.clone()
        }
    }

    /// Recomposes Iwasawa coordinates.
    pub fn from_iwasawa(c: &IwasawaCoords) -> Self {
        let n = c.k.n();
        Self::make_u(n, &c.u).mul(&Self::make_a(n, c.t)).mul(&c.k)
    }

    /// `exp(y X)` by power series, with the tail bounded by
    /// `r^{K+1}/(K+1)! / (1 - r/(K+2))` for `r = |y| |X|`.
    pub fn matrix_exp(x: &CliffordMatrix<f64>, y: f64) -> Result<Self, VahlenError> {
        const MAX_TERMS: usize = 400;
        let n = x.n();
        let yx = x.scale(&y);
        let r = yx.l1_norm();
        let mut sum = CliffordMatrix::identity(n);
        let mut term = CliffordMatrix::identity(n);
        let mut bound = r;
        for k in 1..MAX_TERMS {
            term = (&term * &yx).scale(&(1.0 / k as f64));
            sum = &sum + &term;
            bound *= r / (k + 1) as f64;
            let tail = if r < (k + 2) as f64 {
                bound / (1.0 - r / (k + 2) as f64)
            } else {
                f64::INFINITY
            };
            if tail <= 1e-17 * (1.0 + sum.l1_norm()) {
                return Ok(VahlenMatrix { m: sum });
            }
        }
        Err(VahlenError::ExpNoConvergence(MAX_TERMS))
    }

    /// `exp(y L_{i,j})` in closed form (rotation of angle `y` in the
    /// `(x_i, x_j)` plane of `S^n`).
    pub fn rotation(n: usize, i: usize, j: usize, y: f64) -> Self {
        assert!(i < j && j <= n);
        let (s, c) = (y / 2.0).sin_cos();
        let one = CliffordElement::<f64>::one(n);
        let z = CliffordElement::<f64>::zero(n);
        let m = if j == n && i == 0 {
            CliffordMatrix::new(one.scale(&c), one.scale(&s), one.scale(&-s), one.scale(&c))
        } else if j == n {
            let ei = CliffordElement::generator(n, i).scale(&s);
            CliffordMatrix::new(one.scale(&c), ei.clone(), ei, one.scale(&c))
        } else if i == 0 {
            let ej = CliffordElement::generator(n, j).scale(&s);
            CliffordMatrix::new(&one.scale(&c) - &ej, z.clone(), z, &one.scale(&c) + &ej)
        } else {
            let eij = &CliffordElement::generator(n, i) * &CliffordElement::generator(n, j);
            let e = &one.scale(&c) - &eij.scale(&s);
            CliffordMatrix::new(e.clone(), z.clone(), z, e)
        };
        VahlenMatrix { m }
    }
}

/// Cartesian `x_0..x_n` on `S^n` to angles `theta_0..theta_{n-1}`;
/// `theta_0..theta_{n-2}` in `[0, pi]`, `theta_{n-1}` in `[0, 2 pi)`.
pub fn sphere_to_angles(x: &[f64]) -> Vec<f64> {
    let n = x.len() - 1;
    let mut th = Vec::with_capacity(n);
    for k in 0..n.saturating_sub(1) {
        let rest: f64 = x[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        th.push(rest.atan2(x[k]));
    }
    let mut last = x[n].atan2(x[n - 1]);
    if last < 0.0 {
        last += 2.0 * std::f64::consts::PI;
    }
    th.push(last);
    th
}

pub fn angles_to_sphere(th: &[f64]) -> Vec<f64> {
    let n = th.len();
    let mut x = Vec::with_capacity(n + 1);
    let mut prod = 1.0;
    for t in th {
        x.push(prod * t.cos());
        prod *= t.sin();
    }
    x.push(prod);
    x
}

/// Random elements `u_x a_t k`, with `k` a product of rotations in all
/// coordinate planes.
pub mod random {
    use super::*;
    use rand::Rng;

    pub fn random_k<R: Rng + ?Sized>(n: usize, rng: &mut R) -> VahlenMatrix<f64> {
        let mut k = VahlenMatrix::identity(n);
        for _ in 0..2 {
            for i in 0..n {
                for j in i + 1..=n {
                    let y = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                    k = k.mul(&VahlenMatrix::rotation(n, i, j, y));
                }
            }
        }
        k
    }

    pub fn random_vahlen<R: Rng + ?Sized>(n: usize, rng: &mut R, spread: f64) -> VahlenMatrix<f64> {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..spread)).collect();
        let t = rng.gen_range(-spread..spread);
        VahlenMatrix::make_u(n, &x)
            .mul(&VahlenMatrix::make_a(n, t))
            .mul(&random_k(n, rng))
    }

    pub fn random_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UpperHalfPoint {
        UpperHalfPoint {
            x: (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            h: rng.gen_range(-2.0f64..2.0).exp(),
        }
    }

    /// Unit element of `T_{n-1}` as a product of unit vectors.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CliffordElement<f64> {
        let mut v = CliffordElement::one(n);
        for _ in 0..2 {
            let mut xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = xs.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
            xs.iter_mut().for_each(|a| *a /= norm);
            v = &v * &CliffordElement::vector(n, &xs);
        }
        v
    }
}
