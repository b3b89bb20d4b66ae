//! The compact Lie algebra `k = so(n+1)` inside the Vahlen Lie algebra,
//! its root-space decomposition, and Lie derivatives of functions on `G`.

use num_complex::Complex64;

use crate::clifford::CliffordElement;
use crate::scalar::{Exact, Scalar};
use crate::vahlen::{sphere_to_angles, CliffordMatrix, VahlenError, VahlenMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LieError {
    #[error("coordinate singularity: {0}")]
    Singular(&'static str),
    #[error("step {0} outside [1e-7, 1e-3]")]
    BadStep(f64),
    #[error(transparent)]
    Vahlen(#[from] VahlenError),
}

/// `L_{i,j}` for `0 <= i, j <= n`, with `L_{i,i} = 0` and `L_{j,i} = -L_{i,j}`.
pub fn basis<S: Scalar>(n: usize, i: usize, j: usize) -> CliffordMatrix<S> {
    assert!(i <= n && j <= n, "index out of range");
    if i == j {
        return CliffordMatrix::zero(n);
    }
    if i > j {
        return basis::<S>(n, j, i).scale(&-S::one());
    }
    let half = S::from_ratio(1, 2);
    let mhalf = -half.clone();
    let z = CliffordElement::<S>::zero(n);
    let one = CliffordElement::<S>::one(n);
    let gen = |k: usize| CliffordElement::<S>::generator(n, k);
    if i == 0 && j == n {
        CliffordMatrix::new(z.clone(), one.scale(&half), one.scale(&mhalf), z)
    } else if j == n {
        let e = gen(i).scale(&half);
        CliffordMatrix::new(z.clone(), e.clone(), e, z)
    } else if i == 0 {
        let e = gen(j).scale(&mhalf);
        CliffordMatrix::new(e.clone(), z.clone(), z, -&e)
    } else {
        let e = (&gen(i) * &gen(j)).scale(&mhalf);
        CliffordMatrix::new(e.clone(), z.clone(), z, e)
    }
}

/// `B_1 = (0, 1; 1, 0)`.
pub fn b1<S: Scalar>(n: usize) -> CliffordMatrix<S> {
    let z = CliffordElement::<S>::zero(n);
    let one = CliffordElement::<S>::one(n);
    CliffordMatrix::new(z.clone(), one.clone(), one, z)
}

/// `B_2 = (0, e_1; -e_1, 0)`.
pub fn b2<S: Scalar>(n: usize) -> CliffordMatrix<S> {
    let z = CliffordElement::<S>::zero(n);
    let e1 = CliffordElement::<S>::generator(n, 1);
    CliffordMatrix::new(z.clone(), e1.clone(), -&e1, z)
}

/// Element `re + i im` of the complexified algebra.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<S: Scalar> {
    pub re: CliffordMatrix<S>,
    pub im: CliffordMatrix<S>,
}

impl<S: Scalar> ComplexMatrix<S> {
    pub fn real(re: CliffordMatrix<S>) -> Self {
        let n = re.n();
        ComplexMatrix { re, im: CliffordMatrix::zero(n) }
    }

    pub fn imag(im: CliffordMatrix<S>) -> Self {
        let n = im.n();
        ComplexMatrix { re: CliffordMatrix::zero(n), im }
    }

    pub fn zero(n: usize) -> Self {
        ComplexMatrix { re: CliffordMatrix::zero(n), im: CliffordMatrix::zero(n) }
    }

    pub fn add(&self, o: &Self) -> Self {
        ComplexMatrix { re: &self.re + &o.re, im: &self.im + &o.im }
    }

    pub fn sub(&self, o: &Self) -> Self {
        ComplexMatrix { re: &self.re - &o.re, im: &self.im - &o.im }
    }

    /// Multiplication by the Gaussian rational `p + q i`.
    pub fn scale(&self, p: &S, q: &S) -> Self {
        ComplexMatrix {
            re: &self.re.scale(p) - &self.im.scale(q),
            im: &self.im.scale(p) + &self.re.scale(q),
        }
    }

    pub fn bracket(&self, o: &Self) -> Self {
        ComplexMatrix {
            re: &self.re.bracket(&o.re) - &self.im.bracket(&o.im),
            im: &self.re.bracket(&o.im) + &self.im.bracket(&o.re),
        }
    }

    pub fn is_zero_tol(&self, tol: f64) -> bool {
        self.re.is_zero_tol(tol) && self.im.is_zero_tol(tol)
    }
}

/// `H_i = sqrt(-1) L_{2i, 2i+1}` for `0 <= i < (n+1)/2`.
pub fn cartan<S: Scalar>(n: usize, i: usize) -> ComplexMatrix<S> {
    ComplexMatrix::imag(basis(n, 2 * i, 2 * i + 1))
}

pub fn cartan_rank(n: usize) -> usize {
    n.div_ceil(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootLabel {
    /// `eps_i - eps_j`
    Minus(usize, usize),
    /// `eps_i + eps_j`
    Plus(usize, usize),
    /// `eps_l`
    Short(usize),
}

impl RootLabel {
    /// Value on `H_l`.
    pub fn eval(&self, l: usize) -> i64 {
        let d = |a: usize| (a == l) as i64;
        match *self {
            RootLabel::Minus(i, j) => d(i) - d(j),
            RootLabel::Plus(i, j) => d(i) + d(j),
            RootLabel::Short(i) => d(i),
        }
    }
}

impl std::fmt::Display for RootLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RootLabel::Minus(i, j) => write!(f, "eps{i}-eps{j}"),
            RootLabel::Plus(i, j) => write!(f, "eps{i}+eps{j}"),
            RootLabel::Short(l) => write!(f, "eps{l}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RootVector<S: Scalar> {
    pub label: RootLabel,
    pub vector: ComplexMatrix<S>,
}

/// Positive root vectors of `k_C`; short roots appear only when `n + 1` is odd.
pub fn positive_roots<S: Scalar>(n: usize) -> Vec<RootVector<S>> {
    let k = cartan_rank(n);
    let l = |a: usize, b: usize| basis::<S>(n, a, b);
    let mut out = Vec::new();
    let one = S::one();
    for i in 0..k {
        for j in i + 1..k {
            let p = ComplexMatrix { re: l(2 * i, 2 * j), im: l(2 * i + 1, 2 * j).scale(&-one.clone()) };
            let q = ComplexMatrix { re: l(2 * i + 1, 2 * j + 1), im: l(2 * i, 2 * j + 1) };
            out.push(RootVector { label: RootLabel::Plus(i, j), vector: p.sub(&q) });
            out.push(RootVector { label: RootLabel::Minus(i, j), vector: p.add(&q) });
        }
    }
    if (n + 1) % 2 == 1 {
        for li in 0..k {
            let v = ComplexMatrix { re: l(2 * li, 2 * k), im: l(2 * li + 1, 2 * k).scale(&-one.clone()) };
            out.push(RootVector { label: RootLabel::Short(li), vector: v });
        }
    }
    out
}

/// `R^+ = 1/2 (0, -1 + i e_1; -1 - i e_1, 0)`.
pub fn raising_matrix<S: Scalar>(n: usize) -> ComplexMatrix<S> {
    let half = S::from_ratio(1, 2);
    let re = b1::<S>(n).scale(&-half.clone());
    let im = b2::<S>(n).scale(&half);
    ComplexMatrix { re, im }
}

#[derive(Debug, Clone, Default)]
pub struct CommutatorReport {
    pub checked: usize,
    pub violations: Vec<(usize, usize, usize, usize)>,
}

impl CommutatorReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact check of `[L_ij, L_lm] = d_jl L_im - d_il L_jm - d_jm L_il + d_im L_jl`
/// over all index quadruples.
pub fn verify_commutator_table(n: usize) -> CommutatorReport {
    assert!((2..=5).contains(&n), "commutator table supported for 2 <= n <= 5");
    let dim = n + 1;
    let mut table: Vec<CliffordMatrix<Exact>> = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            table.push(basis(n, i, j));
        }
    }
    let at = |i: usize, j: usize| &table[i * dim + j];
    let mut report = CommutatorReport::default();
    for i in 0..dim {
        for j in 0..dim {
            for l in 0..dim {
                for m in 0..dim {
                    let lhs = at(i, j).bracket(at(l, m));
                    let mut rhs = CliffordMatrix::<Exact>::zero(n);
                    if j == l {
                        rhs = &rhs + at(i, m);
                    }
                    if i == l {
                        rhs = &rhs - at(j, m);
                    }
                    if j == m {
                        rhs = &rhs - at(i, l);
                    }
                    if i == m {
                        rhs = &rhs + at(j, l);
                    }
                    report.checked += 1;
                    if lhs != rhs {
                        report.violations.push((i, j, l, m));
                    }
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, Default)]
pub struct RootReport {
    pub checked: usize,
    pub violations: Vec<String>,
    /// Outcome of `[H, R^+] = eps_0(H) R^+` and `[R^+, k_alpha] = 0`;
    /// reported separately because nothing downstream relies on it.
    pub raising_violations: Vec<String>,
}

impl RootReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Exact eigen-relations `[H_l, X_alpha] = alpha(H_l) X_alpha` plus Cartan
/// commutativity.
pub fn verify_root_spaces(n: usize) -> RootReport {
    assert!(n >= 2, "root spaces need n + 1 >= 3");
    let k = cartan_rank(n);
    let hs: Vec<ComplexMatrix<Exact>> = (0..k).map(|i| cartan(n, i)).collect();
    let mut report = RootReport::default();
    for (a, ha) in hs.iter().enumerate() {
        for (b, hb) in hs.iter().enumerate() {
            report.checked += 1;
            if !ha.bracket(hb).is_zero_tol(0.0) {
                report.violations.push(format!("[H{a}, H{b}] != 0"));
            }
        }
    }
    let zero = Exact::from_i64(0);
    let roots = positive_roots::<Exact>(n);
    for r in &roots {
        for (l, h) in hs.iter().enumerate() {
            let lhs = h.bracket(&r.vector);
            let rhs = r.vector.scale(&Exact::from_i64(r.label.eval(l)), &zero);
            report.checked += 1;
            if lhs != rhs {
                report.violations.push(format!("[H{l}, X_{}]", r.label));
            }
        }
    }
    let rp = raising_matrix::<Exact>(n);
    for (l, h) in hs.iter().enumerate() {
        let want = rp.scale(&Exact::from_i64((l == 0) as i64), &zero);
        if h.bracket(&rp) != want {
            report.raising_violations.push(format!("[H{l}, R+]"));
        }
    }
    for r in &roots {
        if !rp.bracket(&r.vector).is_zero_tol(0.0) {
            report.raising_violations.push(format!("[R+, X_{}]", r.label));
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difference {
    Central,
    /// Central differences at `h` and `h/2` combined to cancel the `h^2` term.
    Richardson,
}

/// `d/dy f(g exp(yX))` at `y = 0` by finite differences.
pub fn lie_derivative_numeric<F>(
    x: &CliffordMatrix<f64>,
    f: F,
    g: &VahlenMatrix<f64>,
    step: f64,
    mode: Difference,
) -> Result<Complex64, LieError>
where
    F: Fn(&VahlenMatrix<f64>) -> Result<Complex64, LieError>,
{
    if !(1e-7..=1e-3).contains(&step) {
        return Err(LieError::BadStep(step));
    }
    let central = |h: f64| -> Result<Complex64, LieError> {
        let plus = f(&g.mul(&VahlenMatrix::matrix_exp(x, h)?))?;
        let minus = f(&g.mul(&VahlenMatrix::matrix_exp(x, -h)?))?;
        Ok((plus - minus) / (2.0 * h))
    };
    match mode {
        Difference::Central => central(step),
        Difference::Richardson => {
            let d1 = central(step)?;
            let d2 = central(step / 2.0)?;
            Ok((d2 * 4.0 - d1) / 3.0)
        }
    }
}

/// Complexified Lie derivative `pi(re) + i pi(im)`.
pub fn lie_derivative_complex<F>(
    x: &ComplexMatrix<f64>,
    f: F,
    g: &VahlenMatrix<f64>,
    step: f64,
    mode: Difference,
) -> Result<Complex64, LieError>
where
    F: Fn(&VahlenMatrix<f64>) -> Result<Complex64, LieError> + Copy,
{
    let a = lie_derivative_numeric(&x.re, f, g, step, mode)?;
    let b = lie_derivative_numeric(&x.im, f, g, step, mode)?;
    Ok(a + Complex64::i() * b)
}

/// `(t, theta_0, theta_1)` of `g`.
pub fn coords(g: &VahlenMatrix<f64>) -> Result<(f64, f64, f64), LieError> {
    let c = g.iwasawa_decompose()?;
    let th = sphere_to_angles(&c.sphere);
    let th1 = th.get(1).copied().unwrap_or(0.0);
    Ok((c.t, th[0], th1))
}

pub fn coord_t(g: &VahlenMatrix<f64>) -> Result<Complex64, LieError> {
    Ok(Complex64::new(coords(g)?.0, 0.0))
}

pub fn coord_theta0(g: &VahlenMatrix<f64>) -> Result<Complex64, LieError> {
    let (_, th0, _) = coords(g)?;
    if th0.sin().abs() < 1e-6 {
        return Err(LieError::Singular("sin theta_0 = 0"));
    }
    Ok(Complex64::new(th0, 0.0))
}

pub fn coord_theta1(g: &VahlenMatrix<f64>) -> Result<Complex64, LieError> {
    let (_, th0, th1) = coords(g)?;
    if th0.sin().abs() < 1e-6 {
        return Err(LieError::Singular("sin theta_0 = 0"));
    }
    Ok(Complex64::new(th1, 0.0))
}

/// `phi_{s,m}(g) = e^{st} (x_0 - i x_1)^m`.
pub fn phi_sm_eval(s: Complex64, m: u32, g: &VahlenMatrix<f64>) -> Result<Complex64, LieError> {
    let c = g.iwasawa_decompose()?;
    let x1 = c.sphere.get(1).copied().unwrap_or(0.0);
    let z = Complex64::new(c.sphere[0], -x1);
    Ok((s * c.t).exp() * z.powu(m))
}

/// Lemma-style closed forms of `pi(B_1)` and `pi(B_2)` on `(t, theta_0, theta_1)`.
pub fn b1_coefficients(theta0: f64, _theta1: f64) -> [f64; 3] {
    [-2.0 * theta0.cos(), -2.0 * theta0.sin(), 0.0]
}

pub fn b2_coefficients(theta0: f64, theta1: f64) -> [f64; 3] {
    [
        -2.0 * theta0.sin() * theta1.cos(),
        2.0 * theta0.cos() * theta1.cos(),
        -2.0 * theta1.sin() / theta0.sin(),
    ]
}

/// `R^+ phi_{s,m}` evaluated numerically at `g`.
pub fn raising_apply(
    s: Complex64,
    m: u32,
    g: &VahlenMatrix<f64>,
    step: f64,
) -> Result<Complex64, LieError> {
    let n = g.n();
    if n < 2 {
        return Err(LieError::Singular("raising operator needs n >= 2"));
    }
    let f = move |h: &VahlenMatrix<f64>| phi_sm_eval(s, m, h);
    lie_derivative_complex(&raising_matrix::<f64>(n), f, g, step, Difference::Richardson)
}

/// `Delta = e^{2t} sum d^2/dx_i^2 + d^2/dt^2 - n d/dt` applied to `f(x, t)` by
/// second-order central differences.
pub fn laplacian_fd<F>(f: F, x: &[f64], t: f64, n: usize, h: f64) -> f64
where
    F: Fn(&[f64], f64) -> f64,
{
    let f0 = f(x, t);
    let mut horiz = 0.0;
    let mut xs = x.to_vec();
    for k in 0..x.len() {
        xs[k] = x[k] + h;
        let p = f(&xs, t);
        xs[k] = x[k] - h;
        let q = f(&xs, t);
        xs[k] = x[k];
        horiz += (p - 2.0 * f0 + q) / (h * h);
    }
    let tp = f(x, t + h);
    let tm = f(x, t - h);
    let dtt = (tp - 2.0 * f0 + tm) / (h * h);
    let dt = (tp - tm) / (2.0 * h);
    (2.0 * t).exp() * horiz + dtt - n as f64 * dt
}
