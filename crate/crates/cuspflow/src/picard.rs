//! The Picard lattice `PSL(2, Z[i])` acting on `H^3`, written with complex
//! `2x2` matrices. `V^1 = span(1, e_1)` is identified with `C` via `e_1 -> i`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::clifford::CliffordElement;
use crate::vahlen::{CliffordMatrix, UpperHalfPoint, VahlenMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PicardError {
    #[error("matrix entries leave span(1, e_1)")]
    NotPicard,
    #[error("pair ({0}, {1}) is not coprime")]
    NotCoprime(GaussianInt, GaussianInt),
    #[error("non-positive height {0}")]
    NonPositiveHeight(f64),
    #[error("reduction not certified within radius {0}")]
    SearchExhausted(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GaussianInt {
    pub re: i64,
    pub im: i64,
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}i", self.re, self.im)
    }
}

/// Nearest integer to `p / q` for `q > 0`, ties rounded up.
fn round_div(p: i64, q: i64) -> i64 {
    (2 * p + q).div_euclid(2 * q)
}

impl GaussianInt {
    pub const ZERO: Self = GaussianInt { re: 0, im: 0 };
    pub const ONE: Self = GaussianInt { re: 1, im: 0 };
    pub const I: Self = GaussianInt { re: 0, im: 1 };

    pub const fn new(re: i64, im: i64) -> Self {
        GaussianInt { re, im }
    }

    pub fn norm(&self) -> i64 {
        self.re * self.re + self.im * self.im
    }

    pub fn conj(&self) -> Self {
        GaussianInt::new(self.re, -self.im)
    }

    pub fn is_zero(&self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn is_unit(&self) -> bool {
        self.norm() == 1
    }

    pub fn units() -> [Self; 4] {
        [Self::ONE, Self::I, Self::new(-1, 0), Self::new(0, -1)]
    }

    /// Euclidean division with the quotient rounded to the nearest lattice point,
    /// so the remainder has norm at most half the divisor's.
    pub fn div_rem(&self, other: &Self) -> (Self, Self) {
        let n = other.norm();
        assert!(n > 0, "division by zero Gaussian integer");
        let p = *self * other.conj();
        let q = GaussianInt::new(round_div(p.re, n), round_div(p.im, n));
        (q, *self - q * *other)
    }

    /// Greatest common divisor, normalized to its canonical associate.
    pub fn gcd(a: Self, b: Self) -> Self {
        let (mut x, mut y) = (a, b);
        while !y.is_zero() {
            let r = x.div_rem(&y).1;
            x = y;
            y = r;
        }
        x.canonical_associate()
    }

    /// `(g, x, y)` with `x a + y b = g = gcd(a, b)` (not normalized).
    pub fn ext_gcd(a: Self, b: Self) -> (Self, Self, Self) {
        let (mut r0, mut r1) = (a, b);
        let (mut x0, mut x1) = (Self::ONE, Self::ZERO);
        let (mut y0, mut y1) = (Self::ZERO, Self::ONE);
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(&r1);
            r0 = r1;
            r1 = r;
            let x2 = x0 - q * x1;
            x0 = x1;
            x1 = x2;
            let y2 = y0 - q * y1;
            y0 = y1;
            y1 = y2;
        }
        (r0, x0, y0)
    }

    /// The associate with `re > 0, im >= 0`; zero maps to zero.
    pub fn canonical_associate(&self) -> Self {
        if self.is_zero() {
            return *self;
        }
        Self::units()
            .iter()
            .map(|u| *self * *u)
            .find(|v| v.re > 0 && v.im >= 0)
            .expect("one associate lies in the first quadrant")
    }

    /// Inverse of a unit.
    pub fn unit_inverse(&self) -> Self {
        debug_assert!(self.is_unit());
        self.conj()
    }

    pub fn to_c64(&self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }

    /// Nearest Gaussian integer to `z`.
    pub fn round(z: Complex64) -> Self {
        GaussianInt::new(z.re.round() as i64, z.im.round() as i64)
    }
}

impl Add for GaussianInt {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        GaussianInt::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for GaussianInt {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        GaussianInt::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for GaussianInt {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        GaussianInt::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl Neg for GaussianInt {
    type Output = Self;
    fn neg(self) -> Self {
        GaussianInt::new(-self.re, -self.im)
    }
}

/// Point `z + h j` of `H^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint {
    pub z: Complex64,
    pub h: f64,
}

impl HPoint {
    pub fn new(z: Complex64, h: f64) -> Result<Self, PicardError> {
        if h > 0.0 && h.is_finite() {
            Ok(HPoint { z, h })
        } else {
            Err(PicardError::NonPositiveHeight(h))
        }
    }

    pub fn to_upper(&self) -> UpperHalfPoint {
        UpperHalfPoint::new(vec![self.z.re, self.z.im], self.h).expect("positive height")
    }

    pub fn from_upper(p: &UpperHalfPoint) -> Result<Self, PicardError> {
        if p.n() != 2 {
            return Err(PicardError::NotPicard);
        }
        HPoint::new(Complex64::new(p.x[0], p.x[1]), p.h)
    }
}

/// Element of `SL(2, Z[i])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PicardMatrix {
    pub a: GaussianInt,
    pub b: GaussianInt,
    pub c: GaussianInt,
    pub d: GaussianInt,
}

impl PicardMatrix {
    pub const IDENTITY: Self = PicardMatrix {
        a: GaussianInt::ONE,
        b: GaussianInt::ZERO,
        c: GaussianInt::ZERO,
        d: GaussianInt::ONE,
    };

    pub fn det(&self) -> GaussianInt {
        self.a * self.d - self.b * self.c
    }

    /// `z -> z + w`.
    pub fn translation(w: GaussianInt) -> Self {
        PicardMatrix { b: w, ..Self::IDENTITY }
    }

    /// `z -> -1/z` on the boundary.
    pub fn inversion() -> Self {
        PicardMatrix {
            a: GaussianInt::ZERO,
            b: GaussianInt::new(-1, 0),
            c: GaussianInt::ONE,
            d: GaussianInt::ZERO,
        }
    }

    /// `diag(u, u^{-1})` for a unit `u`.
    pub fn unit_diag(u: GaussianInt) -> Self {
        PicardMatrix {
            a: u,
            b: GaussianInt::ZERO,
            c: GaussianInt::ZERO,
            d: u.unit_inverse(),
        }
    }

    /// Completes a coprime bottom row `(c, d)` to a matrix of determinant 1.
    pub fn from_bottom_row(c: GaussianInt, d: GaussianInt) -> Result<Self, PicardError> {
        let (g, x, y) = GaussianInt::ext_gcd(c, d);
        if !g.is_unit() {
            return Err(PicardError::NotCoprime(c, d));
        }
        // x c + y d = g, so (y/g) d - (-x/g) c = 1.
        let gi = g.unit_inverse();
        let m = PicardMatrix { a: y * gi, b: -(x * gi), c, d };
        debug_assert_eq!(m.det(), GaussianInt::ONE);
        Ok(m)
    }

    pub fn mul(&self, o: &Self) -> Self {
        PicardMatrix {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Self {
        PicardMatrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn to_sl2c(&self) -> Sl2c {
        Sl2c {
            a: self.a.to_c64(),
            b: self.b.to_c64(),
            c: self.c.to_c64(),
            d: self.d.to_c64(),
        }
    }

    /// Generators `T, T_i, S` and the unit rotation `diag(i, -i)`.
    pub fn generators() -> [Self; 4] {
        [
            Self::translation(GaussianInt::ONE),
            Self::translation(GaussianInt::I),
            Self::inversion(),
            Self::unit_diag(GaussianInt::I),
        ]
    }
}

/// Complex `SL(2, C)` matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sl2c {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Sl2c {
    pub fn identity() -> Self {
        let (o, z) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        Sl2c { a: o, b: z, c: z, d: o }
    }

    pub fn u(z: Complex64) -> Self {
        Sl2c { b: z, ..Self::identity() }
    }

    pub fn u_lower(x: Complex64) -> Self {
        Sl2c { c: x, ..Self::identity() }
    }

    pub fn a(t: f64) -> Self {
        Sl2c {
            a: Complex64::new((t / 2.0).exp(), 0.0),
            d: Complex64::new((-t / 2.0).exp(), 0.0),
            ..Self::identity()
        }
    }

    /// Element `(q2*, -q1*; q1, q2)` of `K = SU(2)`; `(q1, q2)` must be a unit vector.
    pub fn k(q1: Complex64, q2: Complex64) -> Self {
        Sl2c { a: q2.conj(), b: -q1.conj(), c: q1, d: q2 }
    }

    /// `u_z a_t k(q1, q2)`.
    pub fn from_iwasawa(p: &HPoint, q1: Complex64, q2: Complex64) -> Self {
        Self::u(p.z).mul(&Self::a(p.h.ln())).mul(&Self::k(q1, q2))
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Self) -> Self {
        Sl2c {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn inverse(&self) -> Self {
        Sl2c { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Divides by a square root of the determinant.
    pub fn renormalize(&self) -> Self {
        let r = self.det().sqrt();
        if r.norm() == 0.0 {
            return *self;
        }
        let inv = 1.0 / r;
        Sl2c { a: self.a * inv, b: self.b * inv, c: self.c * inv, d: self.d * inv }
    }

    /// `z' = ((az + b) conj(cz + d) + a conj(c) h^2) / D`, `h' = h / D`,
    /// `D = |cz + d|^2 + |c|^2 h^2`.
    pub fn act(&self, p: &HPoint) -> HPoint {
        let czd = self.c * p.z + self.d;
        let h2 = p.h * p.h;
        let den = czd.norm_sqr() + self.c.norm_sqr() * h2;
        let num = (self.a * p.z + self.b) * czd.conj() + self.a * self.c.conj() * h2;
        HPoint { z: num / den, h: p.h / den }
    }

    /// Image of `j`: the `NA` part of the Iwasawa decomposition.
    pub fn basepoint_image(&self) -> HPoint {
        let s = self.c.norm_sqr() + self.d.norm_sqr();
        HPoint {
            z: (self.a * self.c.conj() + self.b * self.d.conj()) / s,
            h: 1.0 / s,
        }
    }

    /// `(point, q1, q2)` with `g = u_z a_t k(q1, q2)`.
    pub fn iwasawa(&self) -> (HPoint, Complex64, Complex64) {
        let p = self.basepoint_image();
        let r = p.h.sqrt();
        (p, self.c * r, self.d * r)
    }

    pub fn max_abs(&self) -> f64 {
        [self.a, self.b, self.c, self.d]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn dist(&self, o: &Self) -> f64 {
        [self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_vahlen(&self) -> VahlenMatrix<f64> {
        let el = |z: Complex64| CliffordElement::vector(2, &[z.re, z.im]);
        VahlenMatrix::new_unchecked(CliffordMatrix::new(el(self.a), el(self.b), el(self.c), el(self.d)))
    }

    pub fn from_vahlen(g: &VahlenMatrix<f64>) -> Result<Self, PicardError> {
        if g.n() != 2 {
            return Err(PicardError::NotPicard);
        }
        let m = g.matrix();
        let conv = |x: &CliffordElement<f64>| -> Result<Complex64, PicardError> {
            let scale = x.max_abs().max(1.0);
            if x.coeffs()[2].abs() > 1e-12 * scale || x.coeffs()[3].abs() > 1e-12 * scale {
                return Err(PicardError::NotPicard);
            }
            Ok(Complex64::new(x.coeffs()[0], x.coeffs()[1]))
        };
        Ok(Sl2c { a: conv(&m.a)?, b: conv(&m.b)?, c: conv(&m.c)?, d: conv(&m.d)? })
    }
}

/// Result of moving a point to maximal height along its orbit.
#[derive(Debug, Clone, Copy)]
pub struct Reduction {
    pub gamma: PicardMatrix,
    pub point: HPoint,
    pub certified: bool,
}

const REDUCE_MAX_STEPS: usize = 10_000;
const REDUCE_SLACK: f64 = 1e-12;

/// Translates into `[-1/2, 1/2]^2` and inverts while below the unit sphere, then
/// certifies the height by scanning bottom rows `(c, d)` with `|c| h < 1`.
/// `radius` caps the scanned `|c|` (sup norm); if the certificate would need more,
/// the result is flagged uncertified.
pub fn reduce_to_max_height(p: &HPoint, radius: u32) -> Reduction {
    let mut gamma = PicardMatrix::IDENTITY;
    let mut q = *p;
    for _ in 0..REDUCE_MAX_STEPS {
        ford_reduce(&mut gamma, &mut q);
        match improving_row(&q, radius) {
            Ok(None) => return Reduction { gamma, point: q, certified: true },
            Ok(Some(g)) => {
                q = g.to_sl2c().act(&q);
                gamma = g.mul(&gamma);
            }
            Err(_) => return Reduction { gamma, point: q, certified: false },
        }
    }
    Reduction { gamma, point: q, certified: false }
}

/// Translation and inversion steps only.
pub(crate) fn ford_reduce(gamma: &mut PicardMatrix, q: &mut HPoint) {
    for _ in 0..REDUCE_MAX_STEPS {
        let w = GaussianInt::round(q.z);
        if !w.is_zero() {
            q.z -= w.to_c64();
            *gamma = PicardMatrix::translation(-w).mul(gamma);
        }
        let r2 = q.z.norm_sqr() + q.h * q.h;
        if r2 >= 1.0 - REDUCE_SLACK {
            return;
        }
        q.z = -q.z.conj() / r2;
        q.h /= r2;
        *gamma = PicardMatrix::inversion().mul(gamma);
    }
}

/// Some `gamma` raising the height, if one exists with `|c|_inf <= radius`.
fn improving_row(q: &HPoint, radius: u32) -> Result<Option<PicardMatrix>, PicardError> {
    let cmax = (1.0 / q.h).floor() as i64;
    if cmax > radius as i64 {
        return Err(PicardError::SearchExhausted(radius));
    }
    for cr in -cmax..=cmax {
        for ci in -cmax..=cmax {
            let c = GaussianInt::new(cr, ci);
            let ch2 = c.norm() as f64 * q.h * q.h;
            if c.is_zero() || ch2 >= 1.0 - REDUCE_SLACK {
                continue;
            }
            let room = (1.0 - REDUCE_SLACK - ch2).sqrt();
            let center = -(c.to_c64() * q.z);
            for dr in (center.re - room).ceil() as i64..=(center.re + room).floor() as i64 {
                for di in (center.im - room).ceil() as i64..=(center.im + room).floor() as i64 {
                    let d = GaussianInt::new(dr, di);
                    let den = (c.to_c64() * q.z + d.to_c64()).norm_sqr() + ch2;
                    if den < 1.0 - REDUCE_SLACK {
                        if let Ok(g) = PicardMatrix::from_bottom_row(c, d) {
                            return Ok(Some(g));
                        }
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Largest height on the orbit of `p`.
pub fn max_height(p: &HPoint) -> f64 {
    reduce_to_max_height(p, 8).point.h
}

/// `D = {z in [-1/2, 1/2]^2, |z|^2 + h^2 >= 1} x K`, two copies of `Gamma \ G`.
pub fn in_ford_domain(p: &HPoint) -> bool {
    p.z.re.abs() <= 0.5 && p.z.im.abs() <= 0.5 && p.z.norm_sqr() + p.h * p.h >= 1.0
}

/// Haar volume of `D` for `e^{-2t} dz dt dk` with `dk` a probability:
/// `int_{[-1/2,1/2]^2} dz / (2 (1 - |z|^2))`.
pub fn ford_volume() -> f64 {
    let gl = gauss_quad::legendre::GaussLegendre::new(40).expect("degree >= 2");
    let nw = gl.as_node_weight_pairs();
    let mut acc = 0.0;
    for &(x, wx) in nw {
        for &(y, wy) in nw {
            let (u, v) = (0.5 * x, 0.5 * y);
            acc += 0.25 * wx * wy / (2.0 * (1.0 - u * u - v * v));
        }
    }
    acc
}

/// Uniform element of `SU(2)` as `(q1, q2)`.
pub fn random_su2<R: Rng + ?Sized>(rng: &mut R) -> (Complex64, Complex64) {
    loop {
        let v: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-9 {
            return (Complex64::new(v[0] / r, v[1] / r), Complex64::new(v[2] / r, v[3] / r));
        }
    }
}

/// Smallest height in `D`.
pub fn ford_min_height() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed sample of `D` by rejection: `z` uniform, `t` with density
/// proportional to `e^{-2t}` on `[log(1/sqrt 2), inf)`, `k` uniform.
/// Returns the sample and the number of rejected proposals.
pub fn haar_sample_ford<R: Rng + ?Sized>(rng: &mut R) -> (Sl2c, usize) {
    let t0 = ford_min_height().ln();
    let mut rejected = 0;
    loop {
        let z = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let u: f64 = 1.0 - rng.gen::<f64>();
        let t = t0 - 0.5 * u.ln();
        let h = t.exp();
        if z.norm_sqr() + h * h >= 1.0 {
            let (q1, q2) = random_su2(rng);
            return (Sl2c::from_iwasawa(&HPoint { z, h }, q1, q2), rejected);
        }
        rejected += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gcd_and_completion() {
        let a = GaussianInt::new(3, 4);
        let b = GaussianInt::new(1, 7);
        let (g, x, y) = GaussianInt::ext_gcd(a, b);
        assert_eq!(x * a + y * b, g);
        let c = GaussianInt::new(2, 1);
        let d = GaussianInt::new(3, 1);
        assert!(GaussianInt::gcd(c, d).is_unit());
        let m = PicardMatrix::from_bottom_row(c, d).unwrap();
        assert_eq!(m.det(), GaussianInt::ONE);
        assert!(PicardMatrix::from_bottom_row(GaussianInt::new(2, 0), GaussianInt::new(0, 2)).is_err());
    }

    #[test]
    fn canonical_associate_is_unique() {
        for re in -5..=5 {
            for im in -5..=5 {
                let x = GaussianInt::new(re, im);
                if x.is_zero() {
                    continue;
                }
                let c = x.canonical_associate();
                assert!(c.re > 0 && c.im >= 0);
                for u in GaussianInt::units() {
                    assert_eq!((x * u).canonical_associate(), c);
                }
            }
        }
    }

    #[test]
    fn action_matches_vahlen_mobius() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = crate::vahlen::random::random_vahlen(2, &mut rng, 1.0);
            let s = Sl2c::from_vahlen(&g).unwrap();
            assert!((s.det() - 1.0).norm() < 1e-9);
            let p = crate::vahlen::random::random_point(2, &mut rng);
            let q1 = g.mobius_apply(&p).unwrap();
            let q2 = s.act(&HPoint::from_upper(&p).unwrap());
            assert!((q1.x[0] - q2.z.re).abs() < 1e-9 * (1.0 + q2.z.norm()));
            assert!((q1.x[1] - q2.z.im).abs() < 1e-9 * (1.0 + q2.z.norm()));
            assert!((q1.h - q2.h).abs() < 1e-9 * q2.h.max(1.0));
            assert!(s.to_vahlen().dist_pm(&g) < 1e-12);
        }
    }

    #[test]
    fn k_fixes_basepoint_and_iwasawa_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (q1, q2) = random_su2(&mut rng);
            let k = Sl2c::k(q1, q2);
            let j = HPoint { z: Complex64::new(0.0, 0.0), h: 1.0 };
            let q = k.act(&j);
            assert!(q.z.norm() < 1e-12 && (q.h - 1.0).abs() < 1e-12);
            assert!(k.to_vahlen().is_in_k(1e-12));
            let p = HPoint { z: Complex64::new(0.3, -0.2), h: 0.7 };
            let g = Sl2c::from_iwasawa(&p, q1, q2);
            let (p2, r1, r2) = g.iwasawa();
            assert!((p2.z - p.z).norm() < 1e-12 && (p2.h - p.h).abs() < 1e-12);
            assert!((r1 - q1).norm() < 1e-12 && (r2 - q2).norm() < 1e-12);
        }
    }

    #[test]
    fn reduction_examples() {
        let high = HPoint { z: Complex64::new(0.2, 0.1), h: 100.0 };
        let r = reduce_to_max_height(&high, 4);
        assert_eq!(r.gamma, PicardMatrix::IDENTITY);
        assert!(r.certified && (r.point.h - 100.0).abs() < 1e-12);
        let low = HPoint { z: Complex64::new(0.0, 0.0), h: 0.1 };
        let r = reduce_to_max_height(&low, 4);
        assert!(r.certified && (r.point.h - 10.0).abs() < 1e-9);
    }

    #[test]
    fn reduction_is_orbit_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = HPoint {
                z: Complex64::new(rng.gen::<f64>() * 3.0 - 1.5, rng.gen::<f64>() * 3.0 - 1.5),
                h: 0.02 + rng.gen::<f64>(),
            };
            let r = reduce_to_max_height(&p, 8);
            assert!(r.certified);
            assert!(in_ford_domain(&r.point) || r.point.z.norm_sqr() + r.point.h.powi(2) >= 1.0 - 1e-9);
            let g = PicardMatrix::from_bottom_row(
                GaussianInt::new(rng.gen_range(-3..=3), rng.gen_range(-3..=3)),
                GaussianInt::new(1, 0),
            )
            .unwrap();
            let q = g.to_sl2c().act(&p);
            let r2 = reduce_to_max_height(&q, 8);
            assert!((r.point.h - r2.point.h).abs() < 1e-9 * r.point.h);
            let moved = r.gamma.to_sl2c().act(&p);
            assert!((moved.h - r.point.h).abs() < 1e-9 * r.point.h);
        }
    }

    #[test]
    fn ford_volume_value() {
        // twice the Picard covolume 0.30532...
        assert!((ford_volume() - 0.610_6).abs() < 1e-3);
    }

    #[test]
    fn haar_samples_land_in_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let (g, _) = haar_sample_ford(&mut rng);
            let p = g.basepoint_image();
            assert!(in_ford_domain(&p));
            assert!((max_height(&p) - p.h).abs() < 1e-9 * p.h);
        }
    }
}
