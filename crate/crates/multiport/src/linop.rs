//! Complex-matrix foundations: Hermitian coupling matrices, unitary transfer
//! matrices, matrix exponentiation, and unitarity checks.
//!
//! Matrices here are tiny (2x2 to 4x4), dense, and row-major. The matrix
//! exponential of a Hermitian coupling matrix is computed exactly through a
//! cyclic complex Jacobi eigendecomposition, which keeps the result unitary
//! to machine precision.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validation gate for constructed inputs (Hermiticity of couplings).
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Unitarity gate for computed transfer matrices.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Build a matrix from row-major entries. Fails on a length mismatch or
    /// any non-finite entry.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::ShapeMismatch(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some((k, z)) = entries
            .iter()
            .enumerate()
            .find(|(_, z)| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite(format!(
                "entry {} is {z} in a {rows}x{cols} matrix",
                k
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.entries[k * n + k] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Build from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// 0-based element access.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.cols + col] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    /// Largest entry magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Elementwise squared magnitudes |M_jk|^2, row-major.
    pub fn magnitudes_squared(&self) -> Vec<f64> {
        self.entries.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Max |C - C^dag| over all entries; 0 for an exactly Hermitian matrix.
    pub fn hermiticity_deviation(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "Hermiticity check needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let mut dev: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                dev = dev.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        Ok(dev)
    }

    /// Max |U^dag U - I| over all entries.
    pub fn unitarity_deviation(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "unitarity check needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let gram = matmul(&self.dagger(), self)?;
        Ok(gram.max_abs_diff(&Self::identity(self.rows)))
    }
}

/// Standard complex matrix product. Fails unless `a.cols == b.rows`.
pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.cols != b.rows {
        return Err(Error::ShapeMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(a.rows, b.cols);
    for r in 0..a.rows {
        for c in 0..b.cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..a.cols {
                acc += a.get(r, k) * b.get(k, c);
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// Hermitian coupling matrix of a waveguide interaction region.
///
/// Entry (j,k) is the effective coupling between modes j and k; diagonal
/// entries carry the common propagation phase, which only contributes a
/// global phase to the transfer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    c: ComplexMatrix,
    n_modes: usize,
}

impl CouplingMatrix {
    /// Validates squareness and Hermiticity to within [`HERMITIAN_TOL`].
    pub fn new(c: ComplexMatrix) -> Result<Self> {
        let dev = c.hermiticity_deviation()?;
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                deviation: dev,
                tolerance: HERMITIAN_TOL,
            });
        }
        let n_modes = c.rows();
        Ok(Self { c, n_modes })
    }

    pub fn from_real(n: usize, entries: &[f64]) -> Result<Self> {
        Self::new(ComplexMatrix::from_real(n, n, entries)?)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.c
    }
}

/// Unitary transfer matrix of an N-mode device.
///
/// Element (j,k) is the amplitude for light entering port j to exit port k
/// (0-based internally; all user-facing I/O uses 1-based port labels). This
/// row-equals-input orientation is the one under which classical intensities
/// are `|U_jk|^2` for input j and output k. Every device built in this crate
/// has a complex-symmetric transfer matrix, so the same matrix also maps
/// column vectors of input mode operators to outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    u: ComplexMatrix,
    n_modes: usize,
}

impl TransferMatrix {
    /// Validates squareness and unitarity to within [`UNITARITY_TOL`],
    /// including the row/column normalization of |U_jk|^2.
    pub fn new(u: ComplexMatrix) -> Result<Self> {
        let dev = u.unitarity_deviation()?;
        if dev > UNITARITY_TOL {
            return Err(Error::NotUnitary {
                deviation: dev,
                tolerance: UNITARITY_TOL,
            });
        }
        let n = u.rows();
        for j in 0..n {
            let row: f64 = (0..n).map(|k| u.get(j, k).norm_sqr()).sum();
            let col: f64 = (0..n).map(|k| u.get(k, j).norm_sqr()).sum();
            if (row - 1.0).abs() > UNITARITY_TOL || (col - 1.0).abs() > UNITARITY_TOL {
                return Err(Error::NotUnitary {
                    deviation: (row - 1.0).abs().max((col - 1.0).abs()),
                    tolerance: UNITARITY_TOL,
                });
            }
        }
        Ok(Self { u, n_modes: n })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            u: ComplexMatrix::identity(n),
            n_modes: n,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.u
    }

    /// Amplitude from input port to output port, 1-based labels.
    pub fn amplitude(&self, input: usize, output: usize) -> Result<Complex64> {
        for port in [input, output] {
            if port == 0 || port > self.n_modes {
                return Err(Error::PortOutOfRange {
                    port,
                    n_modes: self.n_modes,
                });
            }
        }
        Ok(self.u.get(input - 1, output - 1))
    }

    /// Max |U^dag U - I|; a freshly constructed matrix is already within
    /// [`UNITARITY_TOL`], this re-measures it.
    pub fn unitarity_deviation(&self) -> f64 {
        self.u
            .unitarity_deviation()
            .expect("transfer matrix is square by construction")
    }

    /// Product `self * other` as transfer matrices (self acts first on the
    /// light, in the row-equals-input orientation).
    pub fn then(&self, other: &TransferMatrix) -> Result<TransferMatrix> {
        TransferMatrix::new(matmul(&self.u, &other.u)?)
    }
}

/// Eigendecomposition of a Hermitian matrix by the cyclic complex Jacobi
/// method. Returns `(eigenvalues, eigenvectors)` with real eigenvalues in
/// ascending order and eigenvectors as the columns of a unitary matrix.
pub fn hermitian_eigen(c: &CouplingMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = c.n_modes();
    let mut a = c.matrix().clone();
    let mut vecs = ComplexMatrix::identity(n);

    let scale = a
        .entries()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0);
    let tol = 1e-15 * scale;

    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let b = apq.norm();
                if b <= tol * 1e-2 {
                    continue;
                }
                // Phase of the off-diagonal entry and the rotation angle that
                // annihilates it.
                let phase = apq / b;
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                let s_phase = phase * sin; // s * e^{i phi}
                let s_phase_conj = s_phase.conj();

                // Columns p and q of A and of the accumulated eigenvectors.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, akp * cos - akq * s_phase_conj);
                    a.set(k, q, akp * s_phase + akq * cos);
                }
                // Rows p and q.
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, apk * cos - aqk * s_phase);
                    a.set(q, k, apk * s_phase_conj + aqk * cos);
                }
                // Clean the rotated pair to keep the matrix exactly Hermitian.
                a.set(p, q, Complex64::new(0.0, 0.0));
                a.set(q, p, Complex64::new(0.0, 0.0));
                let app_new = a.get(p, p);
                let aqq_new = a.get(q, q);
                a.set(p, p, Complex64::new(app_new.re, 0.0));
                a.set(q, q, Complex64::new(aqq_new.re, 0.0));

                for k in 0..n {
                    let vkp = vecs.get(k, p);
                    let vkq = vecs.get(k, q);
                    vecs.set(k, p, vkp * cos - vkq * s_phase_conj);
                    vecs.set(k, q, vkp * s_phase + vkq * cos);
                }
            }
        }
    }

    let mut pairs: Vec<(f64, usize)> = (0..n).map(|k| (a.get(k, k).re, k)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("eigenvalues are finite"));

    let eigenvalues: Vec<f64> = pairs.iter().map(|&(v, _)| v).collect();
    let mut sorted_vecs = ComplexMatrix::zeros(n, n);
    for (new_col, &(_, old_col)) in pairs.iter().enumerate() {
        for row in 0..n {
            sorted_vecs.set(row, new_col, vecs.get(row, old_col));
        }
    }
    (eigenvalues, sorted_vecs)
}

/// Transfer matrix of propagation under a z-uniform Hermitian coupling:
/// `U = exp(-i C L)`, computed as `sum_k exp(-i lambda_k L) v_k v_k^dag`
/// from the eigendecomposition of C.
pub fn expm_hermitian(c: &CouplingMatrix, length: f64) -> Result<TransferMatrix> {
    if !length.is_finite() {
        return Err(Error::InvalidParameter {
            name: "length",
            reason: format!("must be finite, got {length}"),
        });
    }
    if length < 0.0 {
        return Err(Error::InvalidParameter {
            name: "length",
            reason: format!("must be nonnegative, got {length}"),
        });
    }
    let n = c.n_modes();
    let (eigenvalues, vecs) = hermitian_eigen(c);

    let mut u = ComplexMatrix::zeros(n, n);
    for (m, &lambda) in eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * length);
        for j in 0..n {
            let vjm = vecs.get(j, m);
            for k in 0..n {
                let add = phase * vjm * vecs.get(k, m).conj();
                u.set(j, k, u.get(j, k) + add);
            }
        }
    }
    TransferMatrix::new(u)
}
