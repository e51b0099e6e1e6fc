//! Dense complex linear algebra shared by every other module.
//!
//! Basis convention: site 0 is the leftmost tensor factor and a multi-qubit
//! basis index is the bit string `q0 q1 ... q(n-1)` read as a binary number,
//! so for two qubits the order is `|00>, |01>, |10>, |11>`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

const HERMITIAN_INPUT_TOL: f64 = 1e-10;
const DENSITY_HERMITIAN_TOL: f64 = 1e-12;
const DENSITY_TRACE_TOL: f64 = 1e-10;
const DENSITY_PSD_TOL: f64 = -1e-9;

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

/// Embeds a single-qubit operator at `site` of an `n_sites` chain.
pub fn embed_site(op: &ComplexMatrix, site: usize, n_sites: usize) -> Result<ComplexMatrix> {
    if site >= n_sites {
        return Err(Error::IndexOutOfRange { index: site, n_sites });
    }
    if op.shape() != (2, 2) {
        return Err(Error::DimMismatch { expected: 2, found: op.nrows() });
    }
    let left = identity(1 << site);
    let right = identity(1 << (n_sites - site - 1));
    Ok(kron(&kron(&left, op), &right))
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn hermiticity_error(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

pub fn hermitize(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Eigensystem of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    /// Unitary matrix whose columns are the eigenvectors. Each column's first
    /// amplitude with modulus above `PHASE_THRESHOLD` is real and positive.
    pub eigenvectors: ComplexMatrix,
}

const PHASE_THRESHOLD: f64 = 1e-8;

impl HermitianEig {
    /// `U diag(f(lambda)) U^dag`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (mut col, &lambda) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= C64::new(f(lambda), 0.0);
        }
        scaled * u.adjoint()
    }
}

pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEig> {
    if !h.is_square() {
        return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let deviation = hermiticity_error(h);
    if deviation > HERMITIAN_INPUT_TOL * scale {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = SymmetricEigen::new(hermitize(h));

    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = ComplexMatrix::zeros(h.nrows(), h.ncols());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        if let Some(lead) = col.iter().find(|z| z.norm() > PHASE_THRESHOLD).copied() {
            col *= lead.conj() / lead.norm();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.eigenvalues[0])
}

/// Matrix exponential by Pade scaling and squaring.
pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    m.exp()
}

/// A validated quantum state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let dim = matrix.nrows();
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        if !dim.is_power_of_two() {
            return Err(Error::InvalidDensityMatrix(format!("dimension {dim} is not a power of two")));
        }
        let herm = hermiticity_error(&matrix);
        if herm > DENSITY_HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm:e})")));
        }
        let trace = matrix.trace();
        if (trace - ONE).norm() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace} is not 1")));
        }
        let lowest = min_eigenvalue(&matrix)?;
        if lowest < DENSITY_PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {lowest:e}")));
        }
        Ok(Self { matrix })
    }

    /// Skips validation. Callers must have checked the invariants themselves.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!("state vector norm {norm} is not 1")));
        }
        Self::new(psi * psi.adjoint())
    }

    /// The computational basis state with the given index.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, n_sites: dim });
        }
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(identity(dim) / C64::new(dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_sites(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `U rho U^dag`.
    pub fn transform(&self, u: &ComplexMatrix) -> Result<Self> {
        if u.shape() != self.matrix.shape() {
            return Err(Error::DimMismatch { expected: self.dim(), found: u.nrows() });
        }
        Self::new(hermitize(&(u * &self.matrix * u.adjoint())))
    }
}

/// Reduced state on `keep`, in the listed order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize], n_sites: usize) -> Result<DensityMatrix> {
    if rho.dim() != 1 << n_sites {
        return Err(Error::DimMismatch { expected: 1 << n_sites, found: rho.dim() });
    }
    for (k, &site) in keep.iter().enumerate() {
        if site >= n_sites {
            return Err(Error::IndexOutOfRange { index: site, n_sites });
        }
        if keep[..k].contains(&site) {
            return Err(Error::InvalidSpec(format!("site {site} listed twice")));
        }
    }
    let traced: Vec<usize> = (0..n_sites).filter(|s| !keep.contains(s)).collect();
    // Full index from (kept-bits, traced-bits).
    let compose = |kept: usize, rest: usize| {
        let mut index = 0;
        for (k, &site) in keep.iter().enumerate() {
            index |= ((kept >> (keep.len() - 1 - k)) & 1) << (n_sites - 1 - site);
        }
        for (k, &site) in traced.iter().enumerate() {
            index |= ((rest >> (traced.len() - 1 - k)) & 1) << (n_sites - 1 - site);
        }
        index
    };

    let out_dim = 1 << keep.len();
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for r in 0..out_dim {
        for c in 0..out_dim {
            let mut acc = ZERO;
            for e in 0..1 << traced.len() {
                acc += m[(compose(r, e), compose(c, e))];
            }
            out[(r, c)] = acc;
        }
    }
    DensityMatrix::new(hermitize(&out))
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch { expected: a.dim(), found: b.dim() });
    }
    let diff = hermitize(&(a.matrix() - b.matrix()));
    let eig = hermitian_eig(&diff)?;
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}
