//! Entanglement and closed-form stationary states.
//!
//! Rate bookkeeping for the closed forms uses, per bath-coupled Bohr
//! frequency `omega_i`,
//!
//! * `x_plus  = sum_j gamma_j (n_j(omega_i) + 1)`, the total decay rate,
//! * `x_minus = sum_j gamma_j n_j(omega_i)`, the total excitation rate,
//!
//! so every population ratio across a transition is `x_minus / x_plus`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eig, hermitize, partial_trace, ComplexMatrix, DensityMatrix, C64, ONE, ZERO,
};
use crate::model::{channel_rates, tables, ChainSpec};

/// Negative eigenvalues of `rho` above this are numerical noise.
const CLIP_FLOOR: f64 = -1e-12;

fn spin_flip() -> ComplexMatrix {
    // sigma_y (x) sigma_y
    let mut y = ComplexMatrix::zeros(4, 4);
    y[(0, 3)] = -ONE;
    y[(1, 2)] = ONE;
    y[(2, 1)] = ONE;
    y[(3, 0)] = -ONE;
    y
}

/// Wootters concurrence of a two-qubit state.
///
/// The `lambda_i` are the singular values of `sqrt(rho) Y sqrt(rho)^*`, which
/// are the square roots of the eigenvalues of `rho Y rho^* Y`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::DimMismatch { expected: 4, found: rho.dim() });
    }
    let eig = hermitian_eig(rho.matrix())?;
    if let Some(&worst) = eig.eigenvalues.iter().find(|&&p| p < CLIP_FLOOR) {
        return Err(Error::InvalidDensityMatrix(format!("eigenvalue {worst:e} below clipping floor")));
    }
    let sqrt_rho = eig.reconstruct_with(|p| p.max(0.0).sqrt());
    let a = &sqrt_rho * spin_flip() * sqrt_rho.conjugate();
    let mut lambdas: Vec<f64> = a.singular_values().iter().copied().collect();
    lambdas.sort_by(|x, y| y.total_cmp(x));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0))
}

/// Concurrence between the first and the last qubit of an `n_sites` chain.
pub fn concurrence_first_last(rho: &DensityMatrix, n_sites: usize) -> Result<f64> {
    if n_sites < 2 {
        return Err(Error::InvalidSpec(format!("need at least two sites, got {n_sites}")));
    }
    if n_sites == 2 {
        if rho.dim() != 4 {
            return Err(Error::DimMismatch { expected: 4, found: rho.dim() });
        }
        return concurrence(rho);
    }
    concurrence(&partial_trace(rho, &[0, n_sites - 1], n_sites)?)
}

/// Bath-summed excitation and decay rates at each bath-coupled Bohr frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct XCoefficients {
    pub frequencies: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub x_total: Vec<f64>,
}

impl XCoefficients {
    /// Swaps the roles of excitation and decay. Only useful for sabotage tests.
    pub fn swapped(&self) -> Self {
        Self {
            frequencies: self.frequencies.clone(),
            x_minus: self.x_plus.clone(),
            x_plus: self.x_minus.clone(),
            x_total: self.x_total.clone(),
        }
    }
}

fn check_closed_form_domain(spec: &ChainSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.baths.len() != 2 {
        return Err(Error::Unsupported("closed forms need one bath at each end".into()));
    }
    if spec.coupling <= 0.0 {
        return Err(Error::Unsupported(format!(
            "closed forms assume K > 0, got {}",
            spec.coupling
        )));
    }
    let frequencies = tables::bath_frequencies(spec.n_qubits, spec.epsilon, spec.coupling)?;
    let labels = tables::bath_frequency_labels(spec.n_qubits);
    for (omega, label) in frequencies.iter().zip(labels) {
        if *omega <= 1e-9 * spec.epsilon {
            return Err(Error::FrequencyTooSmall {
                omega: *omega,
                context: format!("{label} is not positive"),
            });
        }
    }
    Ok(frequencies)
}

pub fn x_coefficients(spec: &ChainSpec) -> Result<XCoefficients> {
    let frequencies = check_closed_form_domain(spec)?;
    let mut x_minus = Vec::with_capacity(frequencies.len());
    let mut x_plus = Vec::with_capacity(frequencies.len());
    for &omega in &frequencies {
        let (mut up, mut down) = (0.0, 0.0);
        for bath in &spec.baths {
            let r = channel_rates(bath, omega)?;
            up += r.up;
            down += r.down;
        }
        x_minus.push(up);
        x_plus.push(down);
    }
    let x_total = x_minus.iter().zip(&x_plus).map(|(m, p)| m + p).collect();
    Ok(XCoefficients { frequencies, x_minus, x_plus, x_total })
}

/// Two-qubit stationary state in the computational basis from its X coefficients.
pub fn steady_state_2q_from(x: &XCoefficients) -> Result<DensityMatrix> {
    if x.frequencies.len() != 2 {
        return Err(Error::DimMismatch { expected: 2, found: x.frequencies.len() });
    }
    let (m1, m2) = (x.x_minus[0], x.x_minus[1]);
    let (p1, p2) = (x.x_plus[0], x.x_plus[1]);
    let norm = x.x_total[0] * x.x_total[1];
    let c = |v: f64| C64::new(v / norm, 0.0);
    let mut rho = ComplexMatrix::zeros(4, 4);
    rho[(0, 0)] = c(p1 * p2);
    rho[(1, 1)] = c(0.5 * (p1 * m2 + m1 * p2));
    rho[(2, 2)] = rho[(1, 1)];
    rho[(1, 2)] = c(0.5 * (p1 * m2 - m1 * p2));
    rho[(2, 1)] = rho[(1, 2)];
    rho[(3, 3)] = c(m1 * m2);
    DensityMatrix::new(rho)
}

pub fn analytic_steady_state_2q(spec: &ChainSpec) -> Result<DensityMatrix> {
    if spec.n_qubits != 2 {
        return Err(Error::Unsupported(format!("two-qubit closed form, got n = {}", spec.n_qubits)));
    }
    steady_state_2q_from(&x_coefficients(spec)?)
}

/// Stationary concurrence from X coefficients:
/// `2/(X1 X2) max(0, |X1+ X2- - X1- X2+|/2 - sqrt(X1- X1+ X2- X2+))`.
pub fn concurrence_2q_from(x: &XCoefficients) -> f64 {
    let (m1, m2) = (x.x_minus[0], x.x_minus[1]);
    let (p1, p2) = (x.x_plus[0], x.x_plus[1]);
    let inner = 0.5 * (p1 * m2 - m1 * p2).abs() - (m1 * p1 * m2 * p2).sqrt();
    2.0 / (x.x_total[0] * x.x_total[1]) * inner.max(0.0)
}

pub fn analytic_concurrence_2q(spec: &ChainSpec) -> Result<f64> {
    if spec.n_qubits != 2 {
        return Err(Error::Unsupported(format!("two-qubit closed form, got n = {}", spec.n_qubits)));
    }
    Ok(concurrence_2q_from(&x_coefficients(spec)?))
}

/// Populations of `|m1>..|m8>` as triple products of X fractions.
pub fn populations_3q_from(x: &XCoefficients) -> Result<[f64; 8]> {
    if x.frequencies.len() != 3 {
        return Err(Error::DimMismatch { expected: 3, found: x.frequencies.len() });
    }
    let p = |i: usize| x.x_plus[i] / x.x_total[i];
    let m = |i: usize| x.x_minus[i] / x.x_total[i];
    Ok([
        p(0) * p(1) * p(2),
        m(0) * p(1) * p(2),
        p(0) * m(1) * m(2),
        m(0) * m(1) * m(2),
        p(0) * m(1) * p(2),
        m(0) * m(1) * p(2),
        p(0) * p(1) * m(2),
        m(0) * p(1) * m(2),
    ])
}

pub fn steady_state_3q_from(x: &XCoefficients) -> Result<DensityMatrix> {
    let populations = populations_3q_from(x)?;
    let mut rho = ComplexMatrix::zeros(8, 8);
    for (ket, p) in tables::eigenbasis_3q().iter().zip(populations) {
        rho += tables::projector(ket) * C64::new(p, 0.0);
    }
    DensityMatrix::new(hermitize(&rho))
}

/// Three-qubit stationary state, diagonal in the chain eigenbasis, returned in
/// the computational basis.
pub fn analytic_steady_state_3q(spec: &ChainSpec) -> Result<DensityMatrix> {
    if spec.n_qubits != 3 {
        return Err(Error::Unsupported(format!("three-qubit closed form, got n = {}", spec.n_qubits)));
    }
    steady_state_3q_from(&x_coefficients(spec)?)
}

/// `exp(-beta H) / Tr exp(-beta H)`.
pub fn gibbs_state(h: &ComplexMatrix, beta: f64) -> Result<DensityMatrix> {
    let eig = hermitian_eig(h)?;
    let ground = eig.eigenvalues[0];
    let z: f64 = eig.eigenvalues.iter().map(|e| (-beta * (e - ground)).exp()).sum();
    let rho = eig.reconstruct_with(|e| (-beta * (e - ground)).exp() / z);
    DensityMatrix::new(hermitize(&rho))
}

/// `|W3> = (|100> + |010> + |001>)/sqrt3` as a density matrix.
pub fn w_state(n: usize) -> Result<DensityMatrix> {
    if n != 3 {
        return Err(Error::Unsupported(format!("W state only for 3 qubits, got {n}")));
    }
    let amp = C64::new(1.0 / 3f64.sqrt(), 0.0);
    let mut psi = DVector::from_element(8, ZERO);
    for index in [0b100, 0b010, 0b001] {
        psi[index] = amp;
    }
    DensityMatrix::pure(&psi)
}
