//! Chain Hamiltonian, bath rates and secular jump channels.
//!
//! Spin conventions: `sigma_z |1> = +|1>`, `sigma_z |0> = -|0>` and
//! `sigma+ |0> = |1>`, so `|0...0>` is the ground state for `epsilon > 0`.

use std::ops::Range;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{embed_site, hermitian_eig, ComplexMatrix, C64, ONE, ZERO};

pub const MAX_QUBITS: usize = 8;

/// Below this `beta * omega` the occupation number is treated as divergent.
pub const MIN_BETA_OMEGA: f64 = 1e-12;

/// Relative magnitude under which a projected operator counts as zero.
const PROJECTION_FLOOR: f64 = 1e-10;

/// A bosonic reservoir attached to one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub site: usize,
    /// Relaxation-rate scale (inverse time).
    pub gamma: f64,
    /// Inverse temperature.
    pub beta: f64,
}

impl BathSpec {
    pub fn new(site: usize, gamma: f64, beta: f64) -> Self {
        Self { site, gamma, beta }
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }
}

/// A symmetric XX chain with baths on its end sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub n_qubits: usize,
    /// On-site splitting, identical for every qubit.
    pub epsilon: f64,
    /// Nearest-neighbour exchange constant.
    pub coupling: f64,
    pub baths: Vec<BathSpec>,
}

impl ChainSpec {
    /// Chain with one bath on the first and one on the last qubit, each given as `(gamma, beta)`.
    pub fn two_bath(
        n_qubits: usize,
        epsilon: f64,
        coupling: f64,
        first: (f64, f64),
        last: (f64, f64),
    ) -> Result<Self> {
        let spec = Self {
            n_qubits,
            epsilon,
            coupling,
            baths: vec![
                BathSpec::new(0, first.0, first.1),
                BathSpec::new(n_qubits.saturating_sub(1), last.0, last.1),
            ],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        if !(2..=MAX_QUBITS).contains(&n) {
            return Err(Error::InvalidSpec(format!("n_qubits = {n} outside 2..={MAX_QUBITS}")));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidSpec(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if !self.coupling.is_finite() {
            return Err(Error::InvalidSpec(format!("coupling = {} is not finite", self.coupling)));
        }
        if self.baths.is_empty() || self.baths.len() > 2 {
            return Err(Error::InvalidSpec(format!("{} baths given, expected 1 or 2", self.baths.len())));
        }
        for (k, bath) in self.baths.iter().enumerate() {
            if bath.site != 0 && bath.site != n - 1 {
                return Err(Error::InvalidSpec(format!(
                    "bath {k} attached to site {}, only end sites 0 and {} are supported",
                    bath.site,
                    n - 1
                )));
            }
            if !(bath.gamma.is_finite() && bath.gamma > 0.0) {
                return Err(Error::InvalidSpec(format!("bath {k}: gamma = {} must be positive", bath.gamma)));
            }
            if !(bath.beta.is_finite() && bath.beta > 0.0) {
                return Err(Error::InvalidSpec(format!("bath {k}: beta = {} must be positive", bath.beta)));
            }
            if self.baths[..k].iter().any(|b| b.site == bath.site) {
                return Err(Error::InvalidSpec(format!("two baths on site {}", bath.site)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn gamma_min(&self) -> f64 {
        self.baths.iter().map(|b| b.gamma).fold(f64::INFINITY, f64::min)
    }
}

pub fn sigma_plus() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

pub fn sigma_minus() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[-ONE, ZERO, ZERO, ONE])
}

/// `sum_i (eps/2) sz_i + K sum_i (s+_i s-_(i+1) + s-_i s+_(i+1))` on `n` sites.
pub fn chain_hamiltonian(n: usize, epsilon: f64, coupling: f64) -> ComplexMatrix {
    let dim = 1 << n;
    let mut h = ComplexMatrix::zeros(dim, dim);
    let embed = |op: &ComplexMatrix, site| embed_site(op, site, n).expect("site < n");
    let (sp, sm, sz) = (sigma_plus(), sigma_minus(), sigma_z());
    for site in 0..n {
        h += embed(&sz, site) * C64::new(epsilon / 2.0, 0.0);
    }
    for site in 0..n.saturating_sub(1) {
        let hop = embed(&sp, site) * embed(&sm, site + 1) + embed(&sm, site) * embed(&sp, site + 1);
        h += hop * C64::new(coupling, 0.0);
    }
    h
}

pub fn build_hamiltonian(spec: &ChainSpec) -> Result<ComplexMatrix> {
    spec.validate()?;
    Ok(chain_hamiltonian(spec.n_qubits, spec.epsilon, spec.coupling))
}

/// Bose-Einstein occupation `1 / (exp(beta omega) - 1)`.
pub fn bose_occupation(beta: f64, omega: f64) -> Result<f64> {
    let x = beta * omega;
    if x.is_nan() || x < MIN_BETA_OMEGA {
        return Err(Error::FrequencyTooSmall {
            omega,
            context: format!("beta * omega = {x:e} is below {MIN_BETA_OMEGA:e}"),
        });
    }
    Ok(1.0 / x.exp_m1())
}

/// Excitation and decay rates of one bath at one Bohr frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// `gamma n(omega)`
    pub up: f64,
    /// `gamma (n(omega) + 1)`
    pub down: f64,
}

pub fn channel_rates(bath: &BathSpec, omega: f64) -> Result<Rates> {
    let n = bose_occupation(bath.beta, omega)?;
    Ok(Rates { up: bath.gamma * n, down: bath.gamma * (n + 1.0) })
}

/// A cluster of (numerically) degenerate eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLevel {
    pub energy: f64,
    /// Columns of the eigenvector matrix spanning this level.
    pub members: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: ComplexMatrix,
    pub levels: Vec<EnergyLevel>,
    /// Distinct positive level gaps, ascending.
    pub bohr_frequencies: Vec<f64>,
    pub bin_tolerance: f64,
    /// `gap_bins[a][b]` is the index into `bohr_frequencies` of `E_b - E_a` for `b > a`.
    gap_bins: Vec<Vec<usize>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Frequency bin of the transition from level `upper` down to level `lower`.
    pub fn gap_bin(&self, lower: usize, upper: usize) -> Option<usize> {
        (upper > lower).then(|| self.gap_bins[lower][upper])
    }
}

pub fn default_bin_tolerance(h: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(h)?;
    let scale = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    Ok(1e-9 * scale.max(f64::MIN_POSITIVE))
}

pub fn diagonalize(h: &ComplexMatrix, bin_tolerance: f64) -> Result<SpectralDecomposition> {
    let eig = hermitian_eig(h)?;
    let values = &eig.eigenvalues;

    let mut levels: Vec<EnergyLevel> = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > bin_tolerance {
            let energy = values.rows(start, k - start).mean();
            levels.push(EnergyLevel { energy, members: start..k });
            start = k;
        }
    }
    for pair in levels.windows(2) {
        if pair[1].energy - pair[0].energy <= 10.0 * bin_tolerance {
            return Err(Error::NearDegenerateGap { a: pair[0].energy, b: pair[1].energy });
        }
    }

    let mut gaps: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..levels.len() {
        for b in a + 1..levels.len() {
            gaps.push((levels[b].energy - levels[a].energy, a, b));
        }
    }
    gaps.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut bohr_frequencies = Vec::new();
    let mut gap_bins = vec![vec![usize::MAX; levels.len()]; levels.len()];
    let mut bin_members: Vec<f64> = Vec::new();
    let flush = |members: &mut Vec<f64>, out: &mut Vec<f64>| {
        if !members.is_empty() {
            out.push(members.iter().sum::<f64>() / members.len() as f64);
            members.clear();
        }
    };
    let mut bin_start = f64::NEG_INFINITY;
    for &(gap, a, b) in &gaps {
        if gap - bin_start > bin_tolerance {
            flush(&mut bin_members, &mut bohr_frequencies);
            bin_start = gap;
        }
        bin_members.push(gap);
        gap_bins[a][b] = bohr_frequencies.len();
    }
    flush(&mut bin_members, &mut bohr_frequencies);

    Ok(SpectralDecomposition {
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        levels,
        bohr_frequencies,
        bin_tolerance,
        gap_bins,
    })
}

/// Splits `site_op` into components `V(omega)` with `[H, V(omega)] = -omega V(omega)`.
///
/// Components carrying zero or negative frequency are rejected: the bath
/// rates are undefined there.
pub fn eigenoperators(
    decomp: &SpectralDecomposition,
    site_op: &ComplexMatrix,
) -> Result<Vec<(f64, ComplexMatrix)>> {
    let dim = decomp.dim();
    if site_op.shape() != (dim, dim) {
        return Err(Error::DimMismatch { expected: dim, found: site_op.nrows() });
    }
    let u = &decomp.eigenvectors;
    let in_eigenbasis = u.adjoint() * site_op * u;
    let floor = PROJECTION_FLOOR * in_eigenbasis.norm().max(1.0);

    let mut blocks: Vec<Option<ComplexMatrix>> = vec![None; decomp.bohr_frequencies.len()];
    for (a, lower) in decomp.levels.iter().enumerate() {
        for (b, upper) in decomp.levels.iter().enumerate() {
            let rows = lower.members.clone();
            let cols = upper.members.clone();
            let block = in_eigenbasis.view((rows.start, cols.start), (rows.len(), cols.len()));
            if block.norm() <= floor {
                continue;
            }
            let Some(bin) = decomp.gap_bin(a, b) else {
                return Err(Error::FrequencyTooSmall {
                    omega: upper.energy - lower.energy,
                    context: format!(
                        "operator couples level {:.6} to level {:.6} without lowering the energy",
                        upper.energy, lower.energy
                    ),
                });
            };
            let target = blocks[bin].get_or_insert_with(|| ComplexMatrix::zeros(dim, dim));
            target.view_mut((rows.start, cols.start), (rows.len(), cols.len())).copy_from(&block);
        }
    }

    let mut out: Vec<(f64, ComplexMatrix)> = Vec::new();
    for (bin, block) in blocks.into_iter().enumerate() {
        let Some(block) = block else { continue };
        let omega = decomp.bohr_frequencies[bin];
        if let Some((prev, _)) = out.last() {
            if omega - prev <= 10.0 * decomp.bin_tolerance {
                return Err(Error::NearDegenerateGap { a: *prev, b: omega });
            }
        }
        out.push((omega, u * block * u.adjoint()));
    }
    Ok(out)
}

/// One secular dissipation channel of one bath.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub bath_index: usize,
    pub omega: f64,
    /// `V(omega)`; its adjoint raises the energy by `omega`.
    pub lowering_op: ComplexMatrix,
    pub rate_up: f64,
    pub rate_down: f64,
}

/// Every (bath, Bohr frequency) channel of the chain. Channels of different baths never mix.
pub fn build_channels(spec: &ChainSpec) -> Result<Vec<JumpChannel>> {
    let h = build_hamiltonian(spec)?;
    let decomp = diagonalize(&h, default_bin_tolerance(&h)?)?;
    let mut channels = Vec::new();
    for (bath_index, bath) in spec.baths.iter().enumerate() {
        let lowering = embed_site(&sigma_minus(), bath.site, spec.n_qubits)?;
        for (omega, op) in eigenoperators(&decomp, &lowering).map_err(|e| with_bath_context(e, spec, bath_index))? {
            if omega <= decomp.bin_tolerance {
                return Err(Error::FrequencyTooSmall {
                    omega,
                    context: format!("bath {bath_index}: Bohr frequency at or below binning tolerance"),
                });
            }
            let rates = channel_rates(bath, omega).map_err(|e| with_bath_context(e, spec, bath_index))?;
            channels.push(JumpChannel {
                bath_index,
                omega,
                lowering_op: op,
                rate_up: rates.up,
                rate_down: rates.down,
            });
        }
    }
    Ok(channels)
}

fn with_bath_context(err: Error, spec: &ChainSpec, bath_index: usize) -> Error {
    let Error::FrequencyTooSmall { omega, context } = err else { return err };
    // Name the offending frequency when the chain has a closed-form table.
    let named = tables::bath_frequencies(spec.n_qubits, spec.epsilon, spec.coupling)
        .ok()
        .and_then(|freqs| {
            freqs
                .iter()
                .zip(tables::bath_frequency_labels(spec.n_qubits))
                .find(|(w, _)| (*w - omega).abs() <= 1e-9 * spec.epsilon.max(1.0))
                .map(|(w, label)| format!(" ({label} = {w:.3e})"))
        })
        .unwrap_or_default();
    Error::FrequencyTooSmall { omega, context: format!("bath {bath_index}: {context}{named}") }
}

/// Closed-form eigenbases and channel tables for two and three qubits.
///
/// These are an independent check on [`build_channels`]; nothing in the
/// solver path uses them.
pub mod tables {
    use super::*;

    fn ket(dim: usize, amplitudes: &[(usize, f64)]) -> DVector<C64> {
        let mut v = DVector::from_element(dim, ZERO);
        for &(index, amp) in amplitudes {
            v[index] = C64::new(amp, 0.0);
        }
        v
    }

    fn outer(a: &DVector<C64>, b: &DVector<C64>) -> ComplexMatrix {
        a * b.adjoint()
    }

    /// Columns `|m1>..|m4>`: `|00>`, `|11>`, `(|10>+|01>)/sqrt2`, `(-|10>+|01>)/sqrt2`.
    pub fn eigenbasis_2q() -> Vec<DVector<C64>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        vec![
            ket(4, &[(0b00, 1.0)]),
            ket(4, &[(0b11, 1.0)]),
            ket(4, &[(0b10, s), (0b01, s)]),
            ket(4, &[(0b10, -s), (0b01, s)]),
        ]
    }

    /// Energies of `|m1>..|m4>`.
    pub fn energies_2q(epsilon: f64, coupling: f64) -> [f64; 4] {
        [-epsilon, epsilon, coupling, -coupling]
    }

    /// Columns `|m1>..|m8>` of the three-site chain.
    pub fn eigenbasis_3q() -> Vec<DVector<C64>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = std::f64::consts::SQRT_2;
        vec![
            ket(8, &[(0b000, 1.0)]),
            ket(8, &[(0b001, s), (0b100, -s)]),
            ket(8, &[(0b011, s), (0b110, -s)]),
            ket(8, &[(0b111, 1.0)]),
            ket(8, &[(0b100, 0.5), (0b010, -r / 2.0), (0b001, 0.5)]),
            ket(8, &[(0b110, 0.5), (0b101, -r / 2.0), (0b011, 0.5)]),
            ket(8, &[(0b100, 0.5), (0b010, r / 2.0), (0b001, 0.5)]),
            ket(8, &[(0b110, 0.5), (0b101, r / 2.0), (0b011, 0.5)]),
        ]
    }

    /// Energies of `|m1>..|m8>`.
    pub fn energies_3q(epsilon: f64, coupling: f64) -> [f64; 8] {
        let r = std::f64::consts::SQRT_2 * coupling;
        [
            -1.5 * epsilon,
            -0.5 * epsilon,
            0.5 * epsilon,
            1.5 * epsilon,
            -0.5 * epsilon - r,
            0.5 * epsilon - r,
            -0.5 * epsilon + r,
            0.5 * epsilon + r,
        ]
    }

    /// The bath-coupled Bohr frequencies `omega_i` in their conventional order:
    /// `(eps - K, eps + K)` for two qubits, `(eps, eps - sqrt2 K, eps + sqrt2 K)` for three.
    pub fn bath_frequencies(n_qubits: usize, epsilon: f64, coupling: f64) -> Result<Vec<f64>> {
        let r = std::f64::consts::SQRT_2 * coupling;
        match n_qubits {
            2 => Ok(vec![epsilon - coupling, epsilon + coupling]),
            3 => Ok(vec![epsilon, epsilon - r, epsilon + r]),
            n => Err(Error::Unsupported(format!("closed forms exist for 2 and 3 qubits, not {n}"))),
        }
    }

    /// Human-readable names of [`bath_frequencies`], for diagnostics.
    pub fn bath_frequency_labels(n_qubits: usize) -> &'static [&'static str] {
        match n_qubits {
            2 => &["omega1 = epsilon - K", "omega2 = epsilon + K"],
            3 => &["omega1 = epsilon", "omega2 = epsilon - sqrt(2) K", "omega3 = epsilon + sqrt(2) K"],
            _ => &[],
        }
    }

    fn channel(
        spec: &ChainSpec,
        bath_index: usize,
        omega: f64,
        terms: &[(f64, usize, usize)],
        basis: &[DVector<C64>],
    ) -> Result<JumpChannel> {
        let dim = basis[0].len();
        let mut op = ComplexMatrix::zeros(dim, dim);
        for &(coeff, to, from) in terms {
            op += outer(&basis[to], &basis[from]) * C64::new(coeff, 0.0);
        }
        let rates = channel_rates(&spec.baths[bath_index], omega)?;
        Ok(JumpChannel { bath_index, omega, lowering_op: op, rate_up: rates.up, rate_down: rates.down })
    }

    /// Two-qubit transition operators. The operator with terms `|m1><m3|`, `|m4><m2|`
    /// lowers the energy by `eps + K`, the other by `eps - K`.
    pub fn channels_2q(spec: &ChainSpec) -> Result<Vec<JumpChannel>> {
        if spec.n_qubits != 2 || spec.baths.len() != 2 {
            return Err(Error::Unsupported("two-qubit table needs n = 2 with two baths".into()));
        }
        let basis = eigenbasis_2q();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (lo, hi) = (spec.epsilon - spec.coupling, spec.epsilon + spec.coupling);
        // (coefficient, |m_to>, <m_from|), zero-based labels
        Ok(vec![
            channel(spec, 0, hi, &[(s, 0, 2), (s, 3, 1)], &basis)?,
            channel(spec, 0, lo, &[(s, 2, 1), (-s, 0, 3)], &basis)?,
            channel(spec, 1, hi, &[(s, 0, 2), (-s, 3, 1)], &basis)?,
            channel(spec, 1, lo, &[(s, 2, 1), (s, 0, 3)], &basis)?,
        ])
    }

    pub fn channels_3q(spec: &ChainSpec) -> Result<Vec<JumpChannel>> {
        if spec.n_qubits != 3 || spec.baths.len() != 2 {
            return Err(Error::Unsupported("three-qubit table needs n = 3 with two baths".into()));
        }
        let basis = eigenbasis_3q();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let w = bath_frequencies(3, spec.epsilon, spec.coupling)?;
        Ok(vec![
            channel(spec, 0, w[0], &[(-s, 0, 1), (s, 2, 3), (-s, 4, 5), (s, 6, 7)], &basis)?,
            channel(spec, 0, w[1], &[(0.5, 0, 4), (-0.5, 1, 5), (-0.5, 6, 2), (0.5, 7, 3)], &basis)?,
            channel(spec, 0, w[2], &[(0.5, 0, 6), (0.5, 1, 7), (0.5, 4, 2), (0.5, 5, 3)], &basis)?,
            channel(spec, 1, w[0], &[(s, 0, 1), (-s, 2, 3), (-s, 4, 5), (s, 6, 7)], &basis)?,
            channel(spec, 1, w[1], &[(0.5, 0, 4), (0.5, 1, 5), (0.5, 6, 2), (0.5, 7, 3)], &basis)?,
            channel(spec, 1, w[2], &[(0.5, 0, 6), (-0.5, 1, 7), (-0.5, 4, 2), (0.5, 5, 3)], &basis)?,
        ])
    }

    /// `|v><v|`.
    pub fn projector(v: &DVector<C64>) -> ComplexMatrix {
        outer(v, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_liouvillian;
    use crate::linalg::{commutator, max_abs_diff};

    fn spec(n: usize, epsilon: f64, coupling: f64) -> ChainSpec {
        ChainSpec::two_bath(n, epsilon, coupling, (0.02, 5.0), (0.03, 3.0)).unwrap()
    }

    fn dissipator_superoperator(h: &ComplexMatrix, channels: &[JumpChannel]) -> ComplexMatrix {
        let full = build_liouvillian(h, channels).unwrap();
        let closed = build_liouvillian(h, &[]).unwrap();
        full.generator().unwrap() - closed.generator().unwrap()
    }

    #[test]
    fn uncoupled_two_qubit_hamiltonian() {
        let h = chain_hamiltonian(2, 1.5, 0.0);
        let expected = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(-1.5, 0.0),
            ZERO,
            ZERO,
            C64::new(1.5, 0.0),
        ]));
        assert_eq!(h, expected);
    }

    #[test]
    fn closed_form_eigenbases_diagonalize_the_chain() {
        let (eps, k) = (1.5, 1.0);
        let h2 = chain_hamiltonian(2, eps, k);
        for (ket, e) in tables::eigenbasis_2q().iter().zip(tables::energies_2q(eps, k)) {
            assert!((&h2 * ket - ket * C64::new(e, 0.0)).norm() < 1e-15);
        }
        let h3 = chain_hamiltonian(3, eps, k);
        for (ket, e) in tables::eigenbasis_3q().iter().zip(tables::energies_3q(eps, k)) {
            assert!((&h3 * ket - ket * C64::new(e, 0.0)).norm() < 1e-14);
        }
        let eig = hermitian_eig(&h2).unwrap();
        let expected = [-eps, -k, k, eps];
        for (got, want) in eig.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn bose_occupation_values() {
        assert!((bose_occupation(1.0, 2f64.ln()).unwrap() - 1.0).abs() < 1e-15);
        let cold = bose_occupation(50.0, 1.0).unwrap();
        assert!((cold / (-50f64).exp() - 1.0).abs() < 1e-12);
        assert!(bose_occupation(60.0, 1.0).unwrap() < cold);
        let n = bose_occupation(1.0 / 3.0, 0.5).unwrap();
        assert!((n - 1.0 / ((1.0f64 / 6.0).exp() - 1.0)).abs() < 1e-12);
        assert!((n - 5.5139).abs() < 1e-4);
        assert!(matches!(bose_occupation(1.0, 1e-13), Err(Error::FrequencyTooSmall { .. })));
        assert!(matches!(bose_occupation(1.0, -0.5), Err(Error::FrequencyTooSmall { .. })));
    }

    #[test]
    fn channel_rate_values() {
        let bath = BathSpec::new(0, 1.0 / 50.0, 10.0);
        let r = channel_rates(&bath, 0.5).unwrap();
        let up = (1.0 / 50.0) / (5f64.exp() - 1.0);
        assert!((r.up - up).abs() < 1e-17);
        assert!((r.down - up * 5f64.exp()).abs() < 1e-16);
        assert!((r.down - r.up - bath.gamma).abs() < 1e-16);

        let vacuum = channel_rates(&BathSpec::new(0, 0.3, 1e3), 1.0).unwrap();
        assert_eq!(vacuum.up, 0.0);
        assert_eq!(vacuum.down, 0.3);
    }

    #[test]
    fn diagonalize_finds_all_gaps() {
        let (eps, k) = (1.5, 1.0);
        let h = chain_hamiltonian(2, eps, k);
        let d = diagonalize(&h, default_bin_tolerance(&h).unwrap()).unwrap();
        let expected = [eps - k, 2.0 * k, eps + k, 2.0 * eps];
        assert_eq!(d.bohr_frequencies.len(), expected.len());
        for (got, want) in d.bohr_frequencies.iter().zip(expected) {
            assert!((got - want).abs() < 1e-14);
        }

        let two_level = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![ZERO, ONE]));
        let d = diagonalize(&two_level, 1e-12).unwrap();
        assert_eq!(d.bohr_frequencies, vec![1.0]);
    }

    #[test]
    fn diagonalize_rejects_unresolvable_levels() {
        let h = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            ZERO,
            ONE,
            C64::new(1.0 + 5e-10, 0.0),
        ]));
        assert!(matches!(diagonalize(&h, 1e-10), Err(Error::NearDegenerateGap { .. })));
        // inside the tolerance the two levels merge instead
        assert_eq!(diagonalize(&h, 1e-9).unwrap().levels.len(), 2);
    }

    #[test]
    fn two_qubit_eigenoperators() {
        let (eps, k) = (1.5, 1.0);
        let h = chain_hamiltonian(2, eps, k);
        let d = diagonalize(&h, default_bin_tolerance(&h).unwrap()).unwrap();
        let ops = eigenoperators(&d, &embed_site(&sigma_minus(), 0, 2).unwrap()).unwrap();
        assert_eq!(ops.len(), 2);
        assert!((ops[0].0 - (eps - k)).abs() < 1e-14);
        assert!((ops[1].0 - (eps + k)).abs() < 1e-14);
        let table = tables::channels_2q(&spec(2, eps, k)).unwrap();
        assert!(max_abs_diff(&ops[1].1, &table[0].lowering_op) < 1e-14);
        assert!(max_abs_diff(&ops[0].1, &table[1].lowering_op) < 1e-14);
    }

    #[test]
    fn three_qubit_eigenoperator_at_epsilon() {
        let (eps, k) = (1.5, 1.0);
        let h = chain_hamiltonian(3, eps, k);
        let d = diagonalize(&h, default_bin_tolerance(&h).unwrap()).unwrap();
        let ops = eigenoperators(&d, &embed_site(&sigma_minus(), 0, 3).unwrap()).unwrap();
        let freqs: Vec<f64> = ops.iter().map(|(w, _)| *w).collect();
        let r = std::f64::consts::SQRT_2;
        for (got, want) in freqs.iter().zip([eps - r * k, eps, eps + r * k]) {
            assert!((got - want).abs() < 1e-14);
        }
        let table = tables::channels_3q(&spec(3, eps, k)).unwrap();
        assert!(max_abs_diff(&ops[1].1, &table[0].lowering_op) < 1e-14);
    }

    #[test]
    fn uncoupled_pair_has_single_channel() {
        let h = chain_hamiltonian(2, 1.5, 0.0);
        let d = diagonalize(&h, default_bin_tolerance(&h).unwrap()).unwrap();
        let lowering = embed_site(&sigma_minus(), 0, 2).unwrap();
        let ops = eigenoperators(&d, &lowering).unwrap();
        assert_eq!(ops.len(), 1);
        assert!((ops[0].0 - 1.5).abs() < 1e-15);
        assert!(max_abs_diff(&ops[0].1, &lowering) < 1e-15);
    }

    #[test]
    fn channel_counts() {
        assert_eq!(build_channels(&spec(2, 1.5, 1.0)).unwrap().len(), 4);
        assert_eq!(build_channels(&spec(3, 1.5, 1.0)).unwrap().len(), 6);
        let degenerate = spec(3, std::f64::consts::SQRT_2, 1.0);
        match build_channels(&degenerate) {
            Err(Error::FrequencyTooSmall { context, .. }) => assert!(context.contains("omega2"), "{context}"),
            other => panic!("expected FrequencyTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn channels_satisfy_eigenoperator_identity_and_completeness() {
        for n in 2..=5 {
            let s = spec(n, 3.0, 1.0);
            let h = build_hamiltonian(&s).unwrap();
            let channels = build_channels(&s).unwrap();
            for ch in &channels {
                let residual = commutator(&h, &ch.lowering_op) + &ch.lowering_op * C64::new(ch.omega, 0.0);
                assert!(residual.norm() < 1e-10, "n = {n}, omega = {}", ch.omega);
                let bath = &s.baths[ch.bath_index];
                let ratio = ch.rate_up / ch.rate_down;
                assert!((ratio / (-bath.beta * ch.omega).exp() - 1.0).abs() < 1e-14);
                assert!(ch.rate_down > ch.rate_up && ch.rate_up > 0.0);
            }
            for (b, bath) in s.baths.iter().enumerate() {
                let sum = channels
                    .iter()
                    .filter(|c| c.bath_index == b)
                    .fold(ComplexMatrix::zeros(s.dim(), s.dim()), |acc, c| acc + &c.lowering_op);
                let lowering = embed_site(&sigma_minus(), bath.site, n).unwrap();
                assert!(max_abs_diff(&sum, &lowering) < 1e-12, "n = {n}, bath {b}");
            }
        }
    }

    #[test]
    fn generic_channels_reproduce_closed_form_dissipators() {
        for (eps, k) in [(1.5, 1.0), (2.3, 0.4), (0.9, 0.6)] {
            let s2 = spec(2, eps, k);
            let h2 = build_hamiltonian(&s2).unwrap();
            let generic = dissipator_superoperator(&h2, &build_channels(&s2).unwrap());
            let table = dissipator_superoperator(&h2, &tables::channels_2q(&s2).unwrap());
            assert!(max_abs_diff(&generic, &table) < 1e-12);

            let s3 = spec(3, eps, k / std::f64::consts::SQRT_2 * 0.9);
            let h3 = build_hamiltonian(&s3).unwrap();
            let generic = dissipator_superoperator(&h3, &build_channels(&s3).unwrap());
            let table = dissipator_superoperator(&h3, &tables::channels_3q(&s3).unwrap());
            assert!(max_abs_diff(&generic, &table) < 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(ChainSpec::two_bath(1, 1.0, 1.0, (0.1, 1.0), (0.1, 1.0)).is_err());
        assert!(ChainSpec::two_bath(9, 1.0, 1.0, (0.1, 1.0), (0.1, 1.0)).is_err());
        assert!(ChainSpec::two_bath(3, -1.0, 1.0, (0.1, 1.0), (0.1, 1.0)).is_err());
        assert!(ChainSpec::two_bath(3, 1.0, 1.0, (0.0, 1.0), (0.1, 1.0)).is_err());
        assert!(ChainSpec::two_bath(3, 1.0, 1.0, (0.1, 1.0), (0.1, f64::NAN)).is_err());
        let mut interior = spec(3, 1.5, 1.0);
        interior.baths[1].site = 1;
        assert!(interior.validate().is_err());
        let mut doubled = spec(3, 1.5, 1.0);
        doubled.baths[1].site = 0;
        assert!(doubled.validate().is_err());
    }
}
