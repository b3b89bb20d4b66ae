//! The Clifford algebra `C_n` with `e_i^2 = -1` and `e_i e_j = -e_j e_i`.
//!
//! Basis words `e_I` are indexed by bitmasks: bit `k - 1` set means `e_k`
//! occurs in the word, generators kept in increasing order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Largest supported generator count; coefficients are stored densely.
pub const MAX_GENERATORS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliffordError {
    #[error("dimension mismatch: C_{0} vs C_{1}")]
    DimensionMismatch(usize, usize),
    #[error("generator count {0} outside 1..={MAX_GENERATORS}")]
    UnsupportedDimension(usize),
    #[error("v * conj(v) is not a scalar")]
    NotScalar,
    #[error("singular element (zero norm)")]
    Singular,
    #[error("index out of range: {0}")]
    BadIndex(usize),
}

/// Sign of `e_I e_J = sign * e_{I xor J}`.
///
/// Counts inversions of the concatenated index word (one swap per pair
/// `i in I`, `j in J` with `i > j`) and a factor `-1` per repeated generator.
#[inline]
pub fn blade_sign(a: u32, b: u32) -> i32 {
    let mut swaps = 0u32;
    let mut a2 = a >> 1;
    while a2 != 0 {
        swaps += (a2 & b).count_ones();
        a2 >>= 1;
    }
    swaps += (a & b).count_ones();
    if swaps.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[inline]
fn grade(mask: u32) -> u32 {
    mask.count_ones()
}

/// Reversion sign `(-1)^{r(r-1)/2}`.
#[inline]
pub fn star_sign(mask: u32) -> i32 {
    let r = grade(mask);
    if (r * r.saturating_sub(1) / 2).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Grade involution sign `(-1)^r`.
#[inline]
pub fn prime_sign(mask: u32) -> i32 {
    if grade(mask).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Element of `C_n`: `2^n` coefficients, one per basis word.
#[derive(Clone, PartialEq)]
pub struct CliffordElement<S> {
    n: usize,
    coeffs: Vec<S>,
}

impl<S: Scalar> CliffordElement<S> {
    pub fn zero(n: usize) -> Self {
        assert!(
            (1..=MAX_GENERATORS).contains(&n),
            "{}",
            CliffordError::UnsupportedDimension(n)
        );
        CliffordElement {
            n,
            coeffs: vec![S::zero(); 1 << n],
        }
    }

    pub fn try_zero(n: usize) -> Result<Self, CliffordError> {
        if !(1..=MAX_GENERATORS).contains(&n) {
            return Err(CliffordError::UnsupportedDimension(n));
        }
        Ok(Self::zero(n))
    }

    pub fn one(n: usize) -> Self {
        Self::scalar(n, S::one())
    }

    pub fn scalar(n: usize, s: S) -> Self {
        let mut z = Self::zero(n);
        z.coeffs[0] = s;
        z
    }

    /// `coeff * e_I`.
    pub fn blade(n: usize, mask: u32, coeff: S) -> Self {
        let mut z = Self::zero(n);
        z.coeffs[mask as usize] = coeff;
        z
    }

    /// The generator `e_i`, `1 <= i <= n`.
    pub fn generator(n: usize, i: usize) -> Self {
        assert!(i >= 1 && i <= n, "{}", CliffordError::BadIndex(i));
        Self::blade(n, 1 << (i - 1), S::one())
    }

    /// `x_0 + x_1 e_1 + ... + x_k e_k`.
    pub fn vector(n: usize, xs: &[S]) -> Self {
        assert!(xs.len() <= n + 1, "{}", CliffordError::BadIndex(xs.len()));
        let mut z = Self::zero(n);
        for (k, x) in xs.iter().enumerate() {
            let mask = if k == 0 { 0 } else { 1 << (k - 1) };
            z.coeffs[mask] = x.clone();
        }
        z
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<S>) -> Result<Self, CliffordError> {
        if !(1..=MAX_GENERATORS).contains(&n) {
            return Err(CliffordError::UnsupportedDimension(n));
        }
        if coeffs.len() != 1 << n {
            return Err(CliffordError::BadIndex(coeffs.len()));
        }
        Ok(CliffordElement { n, coeffs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[S] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: u32) -> &S {
        &self.coeffs[mask as usize]
    }

    pub fn set_coeff(&mut self, mask: u32, v: S) {
        self.coeffs[mask as usize] = v;
    }

    pub fn scalar_part(&self) -> S {
        self.coeffs[0].clone()
    }

    /// Component `x_k` of the vector part (`k = 0` is the scalar).
    pub fn vector_component(&self, k: usize) -> S {
        if k == 0 {
            self.coeffs[0].clone()
        } else {
            self.coeffs[1 << (k - 1)].clone()
        }
    }

    pub fn is_zero_tol(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.is_negligible(tol))
    }

    /// True when only the masks `{}`, `{1}`, .., `{i}` are non-negligible.
    pub fn is_in_vector_space(&self, i: usize, tol: f64) -> bool {
        self.coeffs.iter().enumerate().all(|(m, c)| {
            let m = m as u32;
            let allowed = m == 0 || (m.count_ones() == 1 && m.trailing_zeros() < i as u32);
            allowed || c.is_negligible(tol)
        })
    }

    pub fn is_scalar(&self, tol: f64) -> bool {
        self.coeffs[1..].iter().all(|c| c.is_negligible(tol))
    }

    pub fn scale(&self, s: &S) -> Self {
        CliffordElement {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<(), CliffordError> {
        if self.n != other.n {
            Err(CliffordError::DimensionMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, CliffordError> {
        self.check_dim(other)?;
        Ok(CliffordElement {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, CliffordError> {
        self.check_dim(other)?;
        Ok(CliffordElement {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        })
    }

    /// Geometric product.
    pub fn try_mul(&self, other: &Self) -> Result<Self, CliffordError> {
        self.check_dim(other)?;
        let mut out = vec![S::zero(); self.coeffs.len()];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let p = a.clone() * b.clone();
                let k = i ^ j;
                if blade_sign(i as u32, j as u32) > 0 {
                    out[k] = out[k].clone() + p;
                } else {
                    out[k] = out[k].clone() - p;
                }
            }
        }
        Ok(CliffordElement {
            n: self.n,
            coeffs: out,
        })
    }

    fn map_signs(&self, sign: fn(u32) -> i32) -> Self {
        CliffordElement {
            n: self.n,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(m, c)| {
                    if sign(m as u32) > 0 {
                        c.clone()
                    } else {
                        -c.clone()
                    }
                })
                .collect(),
        }
    }

    /// Main anti-involution: reverses basis words.
    pub fn star(&self) -> Self {
        self.map_signs(star_sign)
    }

    /// Main involution: `e_I -> (-1)^{|I|} e_I`.
    pub fn prime(&self) -> Self {
        self.map_signs(prime_sign)
    }

    /// Conjugation, `star` after `prime`.
    pub fn conj(&self) -> Self {
        self.map_signs(|m| star_sign(m) * prime_sign(m))
    }

    /// Scalar `x conj(x)`; fails when the product is not a scalar, which
    /// rules out membership in the Clifford group.
    pub fn norm_sq(&self, tol: f64) -> Result<S, CliffordError> {
        let p = self * &self.conj();
        if !p.is_scalar(tol) {
            return Err(CliffordError::NotScalar);
        }
        Ok(p.scalar_part())
    }

    /// `conj(x) / |x|^2`, valid for elements of the Clifford group.
    pub fn group_inverse(&self, tol: f64) -> Result<Self, CliffordError> {
        let ns = self.norm_sq(tol)?;
        if ns.is_negligible(0.0) || ns.to_f64().abs() <= tol * tol {
            return Err(CliffordError::Singular);
        }
        let inv = S::one() / ns;
        Ok(self.conj().scale(&inv))
    }

    pub fn to_f64(&self) -> CliffordElement<f64> {
        CliffordElement {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect(),
        }
    }

    /// Largest coefficient magnitude, as a float.
    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Same element viewed in `C_m`, `m >= n`.
    pub fn embed(&self, m: usize) -> Self {
        assert!(m >= self.n);
        let mut z = Self::zero(m);
        z.coeffs[..self.coeffs.len()].clone_from_slice(&self.coeffs);
        z
    }
}

impl CliffordElement<f64> {
    pub fn dist(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl<S: Scalar> fmt::Debug for CliffordElement<S>
where
    S: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{:?}", c)?;
            for k in 0..self.n {
                if m & (1 << k) != 0 {
                    write!(f, "e{}", k + 1)?;
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl<S: Scalar> Mul for &CliffordElement<S> {
    type Output = CliffordElement<S>;
    fn mul(self, rhs: Self) -> CliffordElement<S> {
        self.try_mul(rhs).expect("Clifford product")
    }
}

impl<S: Scalar> Add for &CliffordElement<S> {
    type Output = CliffordElement<S>;
    fn add(self, rhs: Self) -> CliffordElement<S> {
        self.try_add(rhs).expect("Clifford sum")
    }
}

impl<S: Scalar> Sub for &CliffordElement<S> {
    type Output = CliffordElement<S>;
    fn sub(self, rhs: Self) -> CliffordElement<S> {
        self.try_sub(rhs).expect("Clifford difference")
    }
}

impl<S: Scalar> Neg for &CliffordElement<S> {
    type Output = CliffordElement<S>;
    fn neg(self) -> CliffordElement<S> {
        CliffordElement {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }
}

/// A vector `x_0 + x_1 e_1 + .. + x_i e_i` of `V^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorElement<S> {
    pub components: Vec<S>,
}

impl<S: Scalar> VectorElement<S> {
    pub fn new(components: Vec<S>) -> Self {
        VectorElement { components }
    }

    /// Grade bound `i`.
    pub fn grade_bound(&self) -> usize {
        self.components.len().saturating_sub(1)
    }

    pub fn to_element(&self, n: usize) -> CliffordElement<S> {
        CliffordElement::vector(n, &self.components)
    }

    pub fn norm_sq(&self) -> S {
        self.components
            .iter()
            .fold(S::zero(), |acc, x| acc + x.clone() * x.clone())
    }
}

/// An element of the Clifford group `T_n`, certified by the list of nonzero
/// vector factors whose product it is.
#[derive(Clone)]
pub struct CliffordGroupElement<S> {
    value: CliffordElement<S>,
    factors: Vec<VectorElement<S>>,
    n: usize,
}

impl<S: Scalar> CliffordGroupElement<S> {
    pub fn from_factors(n: usize, factors: Vec<VectorElement<S>>) -> Result<Self, CliffordError> {
        let mut value = CliffordElement::try_zero(n)?;
        value.coeffs[0] = S::one();
        for f in &factors {
            if f.components.len() > n + 1 {
                return Err(CliffordError::BadIndex(f.components.len()));
            }
            if f.norm_sq().is_negligible(0.0) {
                return Err(CliffordError::Singular);
            }
            value = &value * &f.to_element(n);
        }
        Ok(CliffordGroupElement { value, factors, n })
    }

    pub fn identity(n: usize) -> Self {
        CliffordGroupElement {
            value: CliffordElement::one(n),
            factors: Vec::new(),
            n,
        }
    }

    pub fn value(&self) -> &CliffordElement<S> {
        &self.value
    }

    pub fn factors(&self) -> &[VectorElement<S>] {
        &self.factors
    }

    /// Product of the factor norms squared (exact in rational mode).
    pub fn norm_sq(&self) -> S {
        self.factors
            .iter()
            .fold(S::one(), |acc, f| acc * f.norm_sq())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().to_f64().sqrt()
    }

    pub fn mul(&self, other: &Self) -> Result<Self, CliffordError> {
        if self.n != other.n {
            return Err(CliffordError::DimensionMismatch(self.n, other.n));
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Ok(CliffordGroupElement {
            value: self.value.try_mul(&other.value)?,
            factors,
            n: self.n,
        })
    }

    /// Reversed list of factor inverses `conj(v) / |v|^2`.
    pub fn inverse(&self) -> Result<Self, CliffordError> {
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in self.factors.iter().rev() {
            let ns = f.norm_sq();
            if ns.is_negligible(0.0) {
                return Err(CliffordError::Singular);
            }
            let inv = S::one() / ns;
            let comps = f
                .components
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    let y = x.clone() * inv.clone();
                    if k == 0 {
                        y
                    } else {
                        -y
                    }
                })
                .collect();
            factors.push(VectorElement::new(comps));
        }
        Self::from_factors(self.n, factors)
    }
}

impl<S: Scalar> fmt::Debug for CliffordGroupElement<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CliffordGroupElement")
            .field("value", &self.value)
            .field("factors", &self.factors)
            .finish()
    }
}

/// Norm of a vector, checked through `v conj(v)`.
pub fn vector_norm<S: Scalar>(v: &CliffordElement<S>, tol: f64) -> Result<f64, CliffordError> {
    if !v.is_in_vector_space(v.n(), tol) {
        return Err(CliffordError::NotScalar);
    }
    Ok(v.norm_sq(tol)?.to_f64().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;
    use proptest::prelude::*;

    type Q = Exact;

    fn q(a: i64, b: i64) -> Q {
        Q::from_ratio(a, b)
    }

    /// Sign and mask of a generator word, sorted by adjacent transpositions.
    fn word_oracle(word: &[usize]) -> (i32, u32) {
        let mut w = word.to_vec();
        let mut sign = 1;
        loop {
            let mut changed = false;
            let mut k = 0;
            while k + 1 < w.len() {
                if w[k] > w[k + 1] {
                    w.swap(k, k + 1);
                    sign = -sign;
                    changed = true;
                } else if w[k] == w[k + 1] {
                    w.drain(k..k + 2);
                    sign = -sign;
                    changed = true;
                    continue;
                }
                k += 1;
            }
            if !changed {
                break;
            }
        }
        let mask = w.iter().fold(0u32, |m, &i| m | (1 << (i - 1)));
        (sign, mask)
    }

    fn word_of(mask: u32) -> Vec<usize> {
        (0..32).filter(|k| mask & (1 << k) != 0).map(|k| k + 1).collect()
    }

    #[test]
    fn sign_matches_transposition_oracle() {
        for n in 1..=5u32 {
            for a in 0..(1u32 << n) {
                for b in 0..(1u32 << n) {
                    let mut w = word_of(a);
                    w.extend(word_of(b));
                    let (s, m) = word_oracle(&w);
                    assert_eq!(m, a ^ b);
                    assert_eq!(s, blade_sign(a, b), "a={a:b} b={b:b}");
                }
            }
        }
    }

    #[test]
    fn generator_squares_to_minus_one() {
        for n in 1..=4 {
            for i in 1..=n {
                let e = CliffordElement::<Q>::generator(n, i);
                assert_eq!(&e * &e, CliffordElement::scalar(n, q(-1, 1)));
            }
        }
    }

    #[test]
    fn example_products() {
        let e12 = CliffordElement::<Q>::blade(3, 0b011, Q::from_i64(1));
        let e23 = CliffordElement::<Q>::blade(3, 0b110, Q::from_i64(1));
        assert_eq!(&e12 * &e23, CliffordElement::blade(3, 0b101, q(-1, 1)));
        let a = CliffordElement::<Q>::vector(3, &[q(2, 3), q(-1, 2), q(5, 1)]);
        assert_eq!(&CliffordElement::one(3) * &a, a);
    }

    #[test]
    fn involution_examples() {
        let e12 = CliffordElement::<Q>::blade(2, 0b11, Q::from_i64(1));
        assert_eq!(e12.star(), -&e12);
        assert_eq!(CliffordElement::<Q>::one(2).prime(), CliffordElement::one(2));
        let e1 = CliffordElement::<Q>::generator(2, 1);
        assert_eq!(e1.conj(), -&e1);
    }

    #[test]
    fn norm_examples() {
        let v = CliffordElement::<f64>::vector(2, &[3.0, 4.0]);
        assert!((vector_norm(&v, 1e-12).unwrap() - 5.0).abs() < 1e-14);
        let g = CliffordGroupElement::<Q>::from_factors(
            2,
            vec![
                VectorElement::new(vec![q(0, 1), q(1, 1)]),
                VectorElement::new(vec![q(0, 1), q(0, 1), q(1, 1)]),
            ],
        )
        .unwrap();
        assert_eq!(g.value(), &CliffordElement::blade(2, 0b11, q(1, 1)));
        assert_eq!(g.norm(), 1.0);
        assert_eq!(CliffordElement::<Q>::one(3).norm_sq(0.0).unwrap(), q(1, 1));
    }

    #[test]
    fn inverse_examples() {
        let one = CliffordGroupElement::<Q>::identity(2);
        assert_eq!(one.inverse().unwrap().value(), &CliffordElement::one(2));
        let e1 = CliffordGroupElement::<Q>::from_factors(
            2,
            vec![VectorElement::new(vec![q(0, 1), q(1, 1)])],
        )
        .unwrap();
        assert_eq!(e1.inverse().unwrap().value(), &-&CliffordElement::generator(2, 1));
        let two = CliffordGroupElement::<Q>::from_factors(
            2,
            vec![VectorElement::new(vec![q(2, 1), q(0, 1)])],
        )
        .unwrap();
        assert_eq!(
            two.inverse().unwrap().value(),
            &CliffordElement::scalar(2, q(1, 2))
        );
        let zero = CliffordGroupElement::<Q>::from_factors(
            2,
            vec![VectorElement::new(vec![q(0, 1), q(0, 1)])],
        );
        assert!(matches!(zero, Err(CliffordError::Singular)));
    }

    #[test]
    fn dimension_errors() {
        let a = CliffordElement::<f64>::one(2);
        let b = CliffordElement::<f64>::one(3);
        assert!(matches!(a.try_mul(&b), Err(CliffordError::DimensionMismatch(2, 3))));
        assert!(CliffordElement::<f64>::try_zero(9).is_err());
        let bivector = CliffordElement::<f64>::blade(3, 0b11, 1.0);
        let mixed = &CliffordElement::<f64>::one(3) + &bivector;
        assert!(vector_norm(&mixed, 1e-12).is_err());
    }

    fn small_q() -> impl Strategy<Value = Q> {
        (-6i64..=6, 1i64..=4).prop_map(|(a, b)| q(a, b))
    }

    fn elem_q(n: usize) -> impl Strategy<Value = CliffordElement<Q>> {
        proptest::collection::vec(small_q(), 1 << n)
            .prop_map(move |c| CliffordElement::from_coeffs(n, c).unwrap())
    }

    fn elem_f(n: usize) -> impl Strategy<Value = CliffordElement<f64>> {
        proptest::collection::vec(-1.0f64..1.0, 1 << n)
            .prop_map(move |c| CliffordElement::from_coeffs(n, c).unwrap())
    }

    fn vec_f(n: usize) -> impl Strategy<Value = VectorElement<f64>> {
        proptest::collection::vec(-2.0f64..2.0, n + 1)
            .prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
            .prop_map(VectorElement::new)
    }

    proptest! {
        #[test]
        fn associative_exact(a in elem_q(3), b in elem_q(3), c in elem_q(3)) {
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        }

        #[test]
        fn associative_float(a in elem_f(4), b in elem_f(4), c in elem_f(4)) {
            let l = &(&a * &b) * &c;
            let r = &a * &(&b * &c);
            prop_assert!(l.dist(&r) <= 1e-12);
        }

        #[test]
        fn involution_laws(a in elem_q(3), b in elem_q(3)) {
            let ab = &a * &b;
            prop_assert_eq!(ab.star(), &b.star() * &a.star());
            prop_assert_eq!(ab.conj(), &b.conj() * &a.conj());
            prop_assert_eq!(ab.prime(), &a.prime() * &b.prime());
            prop_assert_eq!(a.prime().star(), a.conj());
        }

        #[test]
        fn vector_norm_is_sum_of_squares(xs in proptest::collection::vec(small_q(), 5)) {
            let v = CliffordElement::vector(4, &xs);
            let p = &v * &v.conj();
            prop_assert!(p.is_scalar(0.0));
            let s = xs.iter().fold(Q::from_i64(0), |acc, x| acc + x.clone() * x.clone());
            prop_assert_eq!(p.scalar_part(), s);
        }

        #[test]
        fn group_norm_multiplicative(
            fs in proptest::collection::vec(vec_f(3), 1..4),
            gs in proptest::collection::vec(vec_f(3), 1..4),
        ) {
            let v = CliffordGroupElement::from_factors(3, fs).unwrap();
            let w = CliffordGroupElement::from_factors(3, gs).unwrap();
            let vw = v.mul(&w).unwrap();
            let direct = vw.value().norm_sq(1e-9).unwrap().sqrt();
            prop_assert!((direct - v.norm() * w.norm()).abs() <= 1e-10 * v.norm() * w.norm());
            prop_assert!((vw.norm() - v.norm() * w.norm()).abs() <= 1e-10 * v.norm() * w.norm());
            let inv = vw.inverse().unwrap();
            let id = vw.value() * inv.value();
            prop_assert!(id.dist(&CliffordElement::one(3)) <= 1e-10);
        }
    }
}
