//! Complex linear-algebra primitives shared by the beamforming, SINR and
//! robust-bound code: full-length convolution, the banded (Sylvester and
//! Toeplitz) convolution matrices, an SVD pseudo-inverse, the dominant
//! eigenpair of a Hermitian PSD matrix and the Perron root of a nonnegative
//! matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Dense complex matrix.
pub type ComplexMat = DMatrix<C64>;

/// Relative singular-value cutoff used by [`pseudo_inverse`].
pub const PINV_RCOND: f64 = 1e-12;
/// Relative asymmetry above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);

fn check_vector(v: &[C64], what: &'static str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::MalformedVector(format!("{what} is empty")));
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Full linear convolution, output length `|a| + |b| - 1`.
pub fn convolve(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    check_vector(a, "left convolution operand")?;
    check_vector(b, "right convolution operand")?;
    Ok(conv(a, b))
}

/// Unchecked convolution for hot loops; both inputs must be non-empty.
#[inline]
pub(crate) fn conv(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    conv_acc(a, b, &mut out);
    out
}

/// Accumulates `a * b` into `out` (which must have length `|a| + |b| - 1`).
#[inline]
pub(crate) fn conv_acc(a: &[C64], b: &[C64], out: &mut [C64]) {
    debug_assert_eq!(out.len(), a.len() + b.len() - 1);
    for (i, &x) in a.iter().enumerate() {
        if x == ZERO {
            continue;
        }
        for (o, &y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn l1_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// `aᴴ b`.
#[inline]
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Banded Sylvester matrix of shape `(2L-1) x (M0*L)`.
///
/// `rows[l]` is the length-`M0` row of tap `l` across all transmit antennas.
/// Block column `c` holds the rows shifted down by `c`, so the matching
/// unknown vector is tap-major: entry `c*M0 + m` is tap `c` of antenna `m`
/// (see [`stack_tap_major`]).
pub fn sylvester_matrix(rows: &[Vec<C64>], taps: usize) -> Result<ComplexMat> {
    if rows.len() != taps || taps == 0 {
        return Err(Error::Dimension(format!(
            "expected {taps} tap rows, got {}",
            rows.len()
        )));
    }
    let width = rows[0].len();
    if width == 0 {
        return Err(Error::MalformedVector("empty tap row".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Dimension(format!(
            "tap rows have inconsistent widths {width} and {}",
            bad.len()
        )));
    }
    for r in rows {
        check_vector(r, "sylvester row")?;
    }
    let mut m = ComplexMat::zeros(2 * taps - 1, width * taps);
    for c in 0..taps {
        for (l, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                m[(l + c, c * width + k)] = v;
            }
        }
    }
    Ok(m)
}

/// Interleaves per-antenna filters into the tap-major vector consumed by
/// [`sylvester_matrix`].
pub fn stack_tap_major(filters: &[Vec<C64>]) -> Vec<C64> {
    let ants = filters.len();
    let taps = filters.first().map_or(0, Vec::len);
    let mut out = vec![ZERO; ants * taps];
    for (m, f) in filters.iter().enumerate() {
        for (c, &v) in f.iter().enumerate() {
            out[c * ants + m] = v;
        }
    }
    out
}

/// Inverse of [`stack_tap_major`].
pub fn unstack_tap_major(stacked: &[C64], antennas: usize) -> Vec<Vec<C64>> {
    let taps = stacked.len() / antennas;
    (0..antennas)
        .map(|m| (0..taps).map(|c| stacked[c * antennas + m]).collect())
        .collect()
}

/// `(2L-1) x L` convolution matrix of `g`: `T(g) x = g * x`.
pub fn toeplitz_conv_matrix(g: &[C64]) -> Result<ComplexMat> {
    check_vector(g, "toeplitz generator")?;
    let l = g.len();
    let mut m = ComplexMat::zeros(2 * l - 1, l);
    for c in 0..l {
        for (r, &v) in g.iter().enumerate() {
            m[(r + c, c)] = v;
        }
    }
    Ok(m)
}

/// Moore-Penrose pseudo-inverse through the SVD, dropping singular values
/// below `PINV_RCOND * sigma_max`.
pub fn pseudo_inverse(a: &ComplexMat) -> Result<ComplexMat> {
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("pseudo-inverse input"));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    let svd = a.clone().svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numerical("SVD did not return U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return V^H".into()))?;
    let sigma_max = svd.singular_values.max();
    let cutoff = PINV_RCOND * sigma_max;
    let mut scaled = v_t.adjoint();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        scaled.column_mut(k).scale_mut(inv);
    }
    Ok(scaled * u.adjoint())
}

/// Dominant eigenvalue with its unit-norm eigenvector.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<C64>,
    pub iterations: usize,
}

fn max_abs(a: &ComplexMat) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Largest eigenpair of a Hermitian PSD matrix by power iteration.
///
/// Starts from the normalized all-ones vector and stops once
/// `‖Av - λv‖ <= tol * λ` with `λ` the Rayleigh quotient. The returned
/// vector is phase-normalized so that `1ᵀv` is real and positive (falling
/// back to the largest entry when `1ᵀv` vanishes).
pub fn dominant_eigpair(a: &ComplexMat, tol: f64, max_iter: usize) -> Result<EigPair> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension(format!(
            "eigenproblem needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigenproblem input"));
    }
    let scale = max_abs(a);
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (a[(i, j)] - a[(j, i)].conj()).norm())
        .fold(0.0_f64, f64::max);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian {
            asymmetry: asym / scale,
        });
    }
    let ones = DVector::from_element(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
    if scale == 0.0 {
        return Ok(EigPair {
            value: 0.0,
            vector: ones.iter().copied().collect(),
            iterations: 0,
        });
    }

    let mut v = ones;
    let mut w = a * &v;
    if w.norm() == 0.0 {
        // all-ones start lies in the null space; restart on the heaviest column
        let k = (0..n)
            .max_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re))
            .unwrap_or(0);
        v = DVector::from_element(n, ZERO);
        v[k] = C64::new(1.0, 0.0);
        w = a * &v;
    }
    let mut best = f64::INFINITY;
    for it in 1..=max_iter {
        let lambda = v.dotc(&w).re;
        let residual = (&w - &v * C64::new(lambda, 0.0)).norm();
        if residual <= tol * lambda.abs() || residual == 0.0 {
            return Ok(EigPair {
                value: lambda,
                vector: phase_normalize(v.iter().copied().collect()),
                iterations: it,
            });
        }
        best = best.min(residual / lambda.abs().max(f64::MIN_POSITIVE));
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / C64::new(wn, 0.0);
        w = a * &v;
    }
    Err(Error::NoConvergence {
        what: "dominant eigenpair",
        iterations: max_iter,
        residual: best,
    })
}

fn phase_normalize(mut v: Vec<C64>) -> Vec<C64> {
    let s: C64 = v.iter().sum();
    let anchor = if s.norm() > 1e-12 {
        s
    } else {
        v.iter()
            .copied()
            .max_by(|x, y| x.norm_sqr().total_cmp(&y.norm_sqr()))
            .unwrap_or(C64::new(1.0, 0.0))
    };
    if anchor.norm() > 0.0 {
        let rot = anchor.conj() / anchor.norm();
        for z in &mut v {
            *z *= rot;
        }
    }
    v
}

/// Perron root (spectral radius) of an entrywise nonnegative square matrix.
///
/// Power iteration on `A + sI` (`s` = max row sum) from the all-ones vector;
/// the shift makes the Perron root strictly dominant. Stops when the
/// Collatz-Wielandt bounds meet or the eigen-residual is below tolerance.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    const TOL: f64 = 1e-13;
    const MAX_ITER: usize = 20_000;
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension(format!(
            "spectral radius needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let v = a[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFinite("spectral radius input"));
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    let shift = a.row_iter().map(|r| r.sum()).fold(0.0_f64, f64::max);
    if shift == 0.0 {
        return Ok(0.0);
    }
    let b = a + DMatrix::<f64>::identity(n, n) * shift;
    let mut x = DVector::from_element(n, 1.0);
    let mut last = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let y = &b * &x;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..n {
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let mu = y.dot(&x) / x.dot(&x);
        let residual = (&y - &x * mu).norm() / x.norm();
        if hi - lo <= TOL * hi {
            return Ok((0.5 * (lo + hi) - shift).max(0.0));
        }
        if residual <= TOL * mu {
            return Ok((mu - shift).max(0.0));
        }
        last = residual / mu;
        let top = y.max();
        x = y / top;
        // entries of a reducible matrix can underflow; keep x strictly positive
        for e in x.iter_mut() {
            if *e < 1e-300 {
                *e = 1e-300;
            }
        }
    }
    // near-degenerate dominant moduli stall the iteration; settle it densely
    log::debug!("spectral radius power iteration stalled at residual {last:e}; using Schur eigenvalues");
    let rho = a
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max);
    if rho.is_finite() {
        Ok(rho)
    } else {
        Err(Error::NoConvergence {
            what: "spectral radius",
            iterations: MAX_ITER,
            residual: last,
        })
    }
}
