//! Dense symmetric matrix kernels: SPD square roots, Cholesky solves and the
//! F-distribution upper tail used for GRS p-values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry above which a matrix is rejected rather than symmetrized.
const ASYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalues above `-NEG_EIG_TOL * ||M||` are treated as round-off and clamped to zero.
const NEG_EIG_TOL: f64 = 1e-10;
/// Default Cholesky pivot threshold, relative to `trace(M) / dim`.
pub const CHOL_PIVOT_TOL: f64 = 1e-14;

/// A dense symmetric matrix. Construction symmetrizes the input, so
/// `m[(i, j)] == m[(j, i)]` holds exactly afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let scale = m.amax().max(1.0);
        let asymmetry = (&m - m.transpose()).amax();
        if !(asymmetry <= ASYMMETRY_TOL * scale) {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes without checking. Intended for products that are symmetric
    /// in exact arithmetic.
    pub(crate) fn symmetrize(m: DMatrix<f64>) -> Self {
        let s = (&m + m.transpose()) * 0.5;
        SymMatrix(s)
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.0.diagonal()
    }

    pub fn scaled(&self, k: f64) -> Self {
        SymMatrix(&self.0 * k)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Applies `f` to the eigenvalues of a PSD matrix, clamping round-off
/// negatives to zero first.
fn psd_spectral_map(m: &SymMatrix, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    let eig = m.0.clone().symmetric_eigen();
    let norm = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if min < -NEG_EIG_TOL * norm {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    let mapped = eig.eigenvalues.map(|l| f(l.max(0.0)));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&mapped) * q.transpose();
    Ok(SymMatrix::symmetrize(out))
}

/// Principal square root of a symmetric positive semidefinite matrix via
/// eigendecomposition. `spd_sqrt(0) == 0`.
pub fn spd_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    if m.is_zero() {
        return Ok(SymMatrix::zeros(m.dim()));
    }
    psd_spectral_map(m, f64::sqrt)
}

/// Inverse principal square root. Fails with `NotPd` when the smallest
/// eigenvalue is not safely positive.
pub fn spd_inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let eig = m.0.clone().symmetric_eigen();
    let norm = eig.eigenvalues.amax();
    let (col, min) = eig.eigenvalues.argmin();
    if !(min > 1e-12 * norm) {
        return Err(Error::NotPd { column: col, pivot: min });
    }
    let mapped = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let q = &eig.eigenvectors;
    Ok(SymMatrix::symmetrize(
        q * DMatrix::from_diagonal(&mapped) * q.transpose(),
    ))
}

/// Lower-triangular Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `m`, failing if any pivot `l_jj²` falls to or below
    /// `rel_tol * trace(m) / dim`.
    pub fn factor(m: &SymMatrix, rel_tol: f64) -> Result<Self> {
        let n = m.dim();
        let a = m.as_matrix();
        let threshold = rel_tol * (a.trace() / n as f64).abs();
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for p in 0..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            if !(d > threshold) || d <= 0.0 {
                return Err(Error::NotPd { column: j, pivot: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Solves `M Z = B` by forward then back substitution.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.l.nrows();
        assert_eq!(b.nrows(), n, "right-hand side has wrong row count");
        let mut z = b.clone();
        for c in 0..z.ncols() {
            for i in 0..n {
                let mut s = z[(i, c)];
                for p in 0..i {
                    s -= self.l[(i, p)] * z[(p, c)];
                }
                z[(i, c)] = s / self.l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = z[(i, c)];
                for p in (i + 1)..n {
                    s -= self.l[(p, i)] * z[(p, c)];
                }
                z[(i, c)] = s / self.l[(i, i)];
            }
        }
        z
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
        DVector::from_column_slice(self.solve(&m).as_slice())
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.l.nrows();
        SymMatrix::symmetrize(self.solve(&DMatrix::identity(n, n)))
    }

    /// `bᵀ M⁻¹ b`.
    pub fn quad_form_inv(&self, b: &DVector<f64>) -> f64 {
        // With M = L Lᵀ, bᵀ M⁻¹ b = ||L⁻¹ b||².
        let n = self.l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s -= self.l[(i, p)] * y[p];
            }
            y[i] = s / self.l[(i, i)];
        }
        y.norm_squared()
    }
}

/// Solves `M Z = B` for symmetric positive-definite `M`.
pub fn chol_solve(m: &SymMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != m.dim() {
        return Err(Error::DimMismatch {
            expected: m.dim(),
            got: b.nrows(),
        });
    }
    Ok(Cholesky::factor(m, CHOL_PIVOT_TOL)?.solve(b))
}

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const BETACF_MAX_ITER: usize = 200;
const BETACF_EPS: f64 = 1e-12;
const BETACF_TINY: f64 = 1e-300;

/// Continued fraction for the incomplete beta function, evaluated with the
/// modified Lentz method.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < BETACF_TINY {
        d = BETACF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETACF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < BETACF_TINY {
            d = BETACF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < BETACF_TINY {
            c = BETACF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < BETACF_TINY {
            d = BETACF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < BETACF_TINY {
            c = BETACF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < BETACF_EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(F > x)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_cdf_upper(x: f64, d1: u64, d2: u64) -> Result<f64> {
    if d1 < 1 || d2 < 1 {
        return Err(Error::InvalidDoF { d1, d2 });
    }
    if x.is_nan() {
        return Ok(f64::NAN);
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let (d1, d2) = (d1 as f64, d2 as f64);
    // P(F > x) = I_y(d2/2, d1/2) with y = d2 / (d2 + d1 x).
    let y = d2 / (d2 + d1 * x);
    Ok(reg_inc_beta(d2 / 2.0, d1 / 2.0, y).clamp(0.0, 1.0))
}
