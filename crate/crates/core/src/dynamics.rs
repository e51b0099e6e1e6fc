//! Master-equation generator, time propagation and the stationary state.
//!
//! Density matrices are vectorized by stacking columns, which is also
//! nalgebra's storage order: `vec(A X B) = (B^T (x) A) vec(X)`. With that
//! convention the generator reads
//!
//! ```text
//! L = -i (I (x) H - H^T (x) I)
//!     + sum_c down_c (conj(V) (x) V - 1/2 (I (x) V^dag V + (V^dag V)^T (x) I))
//!     + sum_c up_c   (V^T (x) V^dag - 1/2 (I (x) V V^dag + (V V^dag)^T (x) I))
//! ```
//!
//! where each channel `c` contributes a decay term with `V` and an
//! excitation term with `V^dag`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    expm, hermiticity_error, hermitize, identity, kron, min_eigenvalue, ComplexMatrix,
    DensityMatrix, C64, I, ONE, ZERO,
};
use crate::model::{build_channels, build_hamiltonian, ChainSpec, JumpChannel};

/// Largest superoperator side length assembled eagerly (four qubits).
pub const DENSE_GENERATOR_LIMIT: usize = 256;

/// Largest superoperator side length the exponential backend will build (six qubits).
pub const EXPM_LIMIT: usize = 4096;

/// Largest trace drift tolerated along a trajectory.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-8;

/// Eigenvalues below this are taken as a broken integrator, not physics.
pub const POSITIVITY_LIMIT: f64 = -1e-6;

/// Relative floor under which a generator eigenvalue counts as zero.
pub const NULL_FLOOR: f64 = 1e-10;

/// The full generator `d rho / dt = L(rho)`.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hamiltonian: ComplexMatrix,
    channels: Vec<JumpChannel>,
    /// `H - i/2 sum_c (down V^dag V + up V V^dag)`
    effective: ComplexMatrix,
    generator: Option<ComplexMatrix>,
}

pub fn build_liouvillian(h: &ComplexMatrix, channels: &[JumpChannel]) -> Result<Liouvillian> {
    if !h.is_square() {
        return Err(Error::NotSquare { rows: h.nrows(), cols: h.ncols() });
    }
    let dim = h.nrows();
    let mut effective = h.clone();
    for ch in channels {
        if ch.lowering_op.shape() != (dim, dim) {
            return Err(Error::DimMismatch { expected: dim, found: ch.lowering_op.nrows() });
        }
        let v = &ch.lowering_op;
        let vd = v.adjoint();
        let decay = &vd * v * C64::new(ch.rate_down, 0.0);
        let excite = v * &vd * C64::new(ch.rate_up, 0.0);
        effective -= (decay + excite) * C64::new(0.0, 0.5);
    }
    let mut liouvillian = Liouvillian {
        hamiltonian: h.clone(),
        channels: channels.to_vec(),
        effective,
        generator: None,
    };
    if dim * dim <= DENSE_GENERATOR_LIMIT {
        liouvillian.generator = Some(liouvillian.assemble());
    }
    Ok(liouvillian)
}

impl Liouvillian {
    /// Hamiltonian and channels of `spec`, assembled.
    pub fn from_spec(spec: &ChainSpec) -> Result<Self> {
        build_liouvillian(&build_hamiltonian(spec)?, &build_channels(spec)?)
    }

    /// Hilbert-space dimension (the generator acts on `dim^2` vectors).
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &ComplexMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    /// The dense superoperator, if it was assembled at build time.
    pub fn generator(&self) -> Option<&ComplexMatrix> {
        self.generator.as_ref()
    }

    /// The dense superoperator, assembling it on demand up to [`EXPM_LIMIT`].
    pub fn superoperator(&self) -> Result<std::borrow::Cow<'_, ComplexMatrix>> {
        if let Some(g) = &self.generator {
            return Ok(std::borrow::Cow::Borrowed(g));
        }
        let side = self.dim() * self.dim();
        if side > EXPM_LIMIT {
            return Err(Error::TooLarge { dim: side, limit: EXPM_LIMIT });
        }
        Ok(std::borrow::Cow::Owned(self.assemble()))
    }

    fn assemble(&self) -> ComplexMatrix {
        let id = identity(self.dim());
        let heff = &self.effective;
        let mut g = kron(&id, &(heff * -I)) + kron(&(heff.conjugate() * I), &id);
        for ch in &self.channels {
            let v = &ch.lowering_op;
            g += kron(&v.conjugate(), v) * C64::new(ch.rate_down, 0.0);
            g += kron(&v.transpose(), &v.adjoint()) * C64::new(ch.rate_up, 0.0);
        }
        g
    }

    /// `L(rho)` for an arbitrary square matrix.
    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        if let Some(g) = &self.generator {
            return unvectorize(&(g * vectorize(rho)), self.dim());
        }
        let heff = &self.effective;
        let mut out = (heff * rho) * -I + (rho * heff.adjoint()) * I;
        for ch in &self.channels {
            let v = &ch.lowering_op;
            let vd = v.adjoint();
            if ch.rate_down != 0.0 {
                out += v * rho * &vd * C64::new(ch.rate_down, 0.0);
            }
            if ch.rate_up != 0.0 {
                out += &vd * rho * v * C64::new(ch.rate_up, 0.0);
            }
        }
        out
    }

    /// Frobenius norm of the superoperator.
    pub fn norm(&self) -> Result<f64> {
        Ok(self.superoperator()?.norm())
    }
}

/// Column-stacked vector of a square matrix.
pub fn vectorize(m: &ComplexMatrix) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &DVector<C64>, dim: usize) -> ComplexMatrix {
    DMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Row vector `t` with `t . vec(rho) = Tr rho`.
pub fn trace_functional(dim: usize) -> DVector<C64> {
    let mut t = DVector::from_element(dim * dim, ZERO);
    for i in 0..dim {
        t[i + dim * i] = ONE;
    }
    t
}

/// `d rho / dt` at `rho`.
pub fn apply_generator(l: &Liouvillian, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != l.dim() {
        return Err(Error::DimMismatch { expected: l.dim(), found: rho.dim() });
    }
    Ok(l.apply(rho.matrix()))
}

/// Local error targets for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12 }
    }
}

/// States at the requested times plus per-point diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Hermitized states. Traces are not renormalized.
    pub states: Vec<DensityMatrix>,
    /// `max |rho - rho^dag|` before hermitization.
    pub hermiticity_errors: Vec<f64>,
    /// `|Tr rho - 1|`.
    pub trace_errors: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            states: Vec::with_capacity(n),
            hermiticity_errors: Vec::with_capacity(n),
            trace_errors: Vec::with_capacity(n),
            min_eigenvalues: Vec::with_capacity(n),
            accepted_steps: 0,
            rejected_steps: 0,
        }
    }

    fn record(&mut self, t: f64, raw: &ComplexMatrix) -> Result<()> {
        let herm = hermiticity_error(raw);
        let rho = hermitize(raw);
        let drift = (rho.trace() - ONE).norm();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { t, drift });
        }
        let lowest = min_eigenvalue(&rho)?;
        if lowest < POSITIVITY_LIMIT {
            return Err(Error::PositivityLost { t, min_eigenvalue: lowest });
        }
        self.times.push(t);
        self.states.push(DensityMatrix::new_unchecked(rho));
        self.hermiticity_errors.push(herm);
        self.trace_errors.push(drift);
        self.min_eigenvalues.push(lowest);
        Ok(())
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.first().is_some_and(|&t| t.is_nan() || t < 0.0) {
        return Err(Error::InvalidSpec(format!("first time {} is negative", times[0])));
    }
    if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidSpec("times must be finite and ascending".into()));
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau.
// The generator is autonomous, so the nodes c_i never enter.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &ComplexMatrix, terms: &[(f64, &ComplexMatrix)], h: f64) -> ComplexMatrix {
    let mut out = y.clone();
    for &(c, k) in terms {
        if c != 0.0 {
            out.zip_apply(k, |o, x| *o += x * (c * h));
        }
    }
    out
}

/// Integrates from `t = 0` and reports the state at each of `times`.
///
/// Uses an adaptive Dormand-Prince 5(4) pair with the scaled RMS error norm.
pub fn evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    tol: Tolerances,
) -> Result<Trajectory> {
    if rho0.dim() != l.dim() {
        return Err(Error::DimMismatch { expected: l.dim(), found: rho0.dim() });
    }
    check_times(times)?;
    let mut out = Trajectory::with_capacity(times.len());

    let mut t = 0.0;
    let mut y = rho0.matrix().clone();
    let mut k1 = l.apply(&y);
    let scale = l.effective.iter().map(|z| z.norm()).fold(1e-3, f64::max);
    let mut h = 0.01 / scale;

    for &target in times {
        while t < target {
            let mut step = h.min(target - t);
            // land on the target instead of leaving a sliver
            if target - t - step < 1e-3 * step {
                step = target - t;
            }
            if step < 1e-13 * t.abs().max(1.0) {
                return Err(Error::ToleranceNotMet { t });
            }
            let k2 = l.apply(&axpy(&y, &[(A21, &k1)], step));
            let k3 = l.apply(&axpy(&y, &[(A31, &k1), (A32, &k2)], step));
            let k4 = l.apply(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], step));
            let k5 = l.apply(&axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], step));
            let k6 = l.apply(&axpy(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                step,
            ));
            let y_new = axpy(&y, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], step);
            let k7 = l.apply(&y_new);

            let mut sum = 0.0;
            for idx in 0..y.len() {
                let e = (k1[idx] * E1 + k3[idx] * E3 + k4[idx] * E4 + k5[idx] * E5 + k6[idx] * E6
                    + k7[idx] * E7)
                    * step;
                let sc = tol.atol + tol.rtol * y[idx].norm().max(y_new[idx].norm());
                sum += (e.norm() / sc).powi(2);
            }
            let err = (sum / y.len() as f64).sqrt();

            if err <= 1.0 {
                t += step;
                if target - t < 1e-12 * target.abs().max(1.0) {
                    t = target;
                }
                y = y_new;
                k1 = k7;
                out.accepted_steps += 1;
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                // a truncated step says nothing about the natural step size
                if step >= h * 0.999 {
                    h = step * grow;
                }
            } else {
                out.rejected_steps += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
            if !h.is_finite() {
                return Err(Error::ToleranceNotMet { t });
            }
        }
        out.record(target, &y)?;
    }
    Ok(out)
}

/// Propagates with `exp(L dt)` between consecutive requested times.
///
/// Limited to generators of side length [`EXPM_LIMIT`]; meant as a cross-check
/// on [`evolve`].
pub fn evolve_expm(l: &Liouvillian, rho0: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    if rho0.dim() != l.dim() {
        return Err(Error::DimMismatch { expected: l.dim(), found: rho0.dim() });
    }
    check_times(times)?;
    let g = l.superoperator()?;
    let mut out = Trajectory::with_capacity(times.len());
    let mut v = vectorize(rho0.matrix());
    let mut t = 0.0;
    let mut cached: Option<(f64, ComplexMatrix)> = None;
    for &target in times {
        let dt = target - t;
        if dt > 0.0 {
            let propagator = match &cached {
                Some((cached_dt, p)) if *cached_dt == dt => p,
                _ => {
                    cached = Some((dt, expm(&(g.as_ref() * C64::new(dt, 0.0)))));
                    &cached.as_ref().unwrap().1
                }
            };
            v = propagator * v;
            t = target;
        }
        out.record(target, &unvectorize(&v, l.dim()))?;
    }
    Ok(out)
}

/// Eigenvalues of the dense generator, sorted by modulus.
pub fn liouvillian_spectrum(l: &Liouvillian) -> Result<Vec<C64>> {
    let g = l.generator().ok_or(Error::TooLarge {
        dim: l.dim() * l.dim(),
        limit: DENSE_GENERATOR_LIMIT,
    })?;
    // nalgebra's complex Schur iteration can cycle forever on these generators; faer's does not.
    let dense = faer::Mat::<C64>::from_fn(g.nrows(), g.ncols(), |i, j| g[(i, j)]);
    let mut values = dense
        .eigenvalues()
        .map_err(|e| Error::Unsupported(format!("eigenvalue iteration failed: {e:?}")))?;
    values.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    Ok(values)
}

/// Uniqueness certificate read off the generator spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumCertificate {
    /// Modulus of the eigenvalue closest to zero.
    pub null_magnitude: f64,
    /// Modulus of the next one.
    pub second_magnitude: f64,
    /// Smallest `|Re lambda|` away from the null eigenvalue.
    pub gap: f64,
    /// `NULL_FLOOR * ||L||_F`.
    pub floor: f64,
    /// Number of eigenvalues with modulus below `floor`.
    pub null_count: usize,
}

pub fn certify_spectrum(l: &Liouvillian) -> Result<SpectrumCertificate> {
    let spectrum = liouvillian_spectrum(l)?;
    let floor = NULL_FLOOR * l.norm()?;
    let null_count = spectrum.iter().filter(|z| z.norm() < floor).count();
    let gap = spectrum[1..].iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    let cert = SpectrumCertificate {
        null_magnitude: spectrum[0].norm(),
        second_magnitude: spectrum.get(1).map_or(f64::INFINITY, |z| z.norm()),
        gap,
        floor,
        null_count,
    };
    if null_count != 1 || gap.is_nan() || gap <= floor {
        return Err(Error::DegenerateSteadyState {
            smallest: cert.null_magnitude,
            second: cert.second_magnitude,
            floor,
        });
    }
    Ok(cert)
}

/// Smallest nonzero relaxation rate `|Re lambda|` of the generator.
pub fn spectral_gap(l: &Liouvillian) -> Result<f64> {
    Ok(certify_spectrum(l)?.gap)
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityMatrix,
    pub gap: f64,
    pub certificate: SpectrumCertificate,
    /// `||L(rho)||_F / ||L||_F`.
    pub relative_residual: f64,
}

/// The unique stationary state.
///
/// Uniqueness is certified from the full generator spectrum; the null vector
/// itself comes from the trace-constrained system `L x = 0, Tr x = 1`, which
/// replaces the redundant `rho_00` row of `L` by the trace functional.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let certificate = certify_spectrum(l)?;
    let g = l.generator().expect("certify_spectrum checked the dense generator");
    let dim = l.dim();

    let mut system = g.clone();
    system.set_row(0, &trace_functional(dim).transpose());
    let mut rhs = DVector::from_element(dim * dim, ZERO);
    rhs[0] = ONE;
    let x = system
        .full_piv_lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateSteadyState {
            smallest: certificate.null_magnitude,
            second: certificate.second_magnitude,
            floor: certificate.floor,
        })?;

    let rho = hermitize(&unvectorize(&x, dim));
    let trace = rho.trace();
    if trace.norm() < 1e-8 {
        return Err(Error::InvalidDensityMatrix(format!("null vector has trace {trace}")));
    }
    let rho = hermitize(&(rho / trace));
    let relative_residual = l.apply(&rho).norm() / g.norm();
    Ok(SteadyState {
        state: DensityMatrix::new(rho)?,
        gap: certificate.gap,
        certificate,
        relative_residual,
    })
}
