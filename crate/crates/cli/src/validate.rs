//! The invariant suite behind `qchain validate`.
//!
//! Every check records a measured value against a threshold. Numerical
//! breakdowns inside a check count as failures; an invalid configuration
//! aborts the run instead.

use qchain::analysis::{
    concurrence, concurrence_2q_from, gibbs_state, steady_state_2q_from,
    steady_state_3q_from, x_coefficients, XCoefficients,
};
use qchain::dynamics::{evolve, evolve_expm, steady_state, trace_functional, vectorize, Liouvillian};
use qchain::linalg::{
    embed_site, hermiticity_error, hermitize, max_abs_diff, trace_distance, ComplexMatrix, DensityMatrix, C64,
};
use qchain::model::{build_hamiltonian, sigma_minus, tables, ChainSpec, JumpChannel};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::runs::initial_state;
use crate::CliError;

const SEED: u64 = 0x5eed;
const RANDOM_SPECS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub passed: bool,
    pub n_checks: usize,
    pub n_failed: usize,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report always serializes") + "\n"
    }
}

#[derive(Default)]
struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn record(&mut self, name: String, measured: f64, threshold: f64, comparison: Comparison) {
        let passed = match comparison {
            Comparison::AtMost => measured <= threshold,
            Comparison::AtLeast => measured >= threshold,
            Comparison::Equal => measured == threshold,
        };
        self.checks.push(Check { name, measured, threshold, comparison, passed, note: None });
    }

    fn at_most(&mut self, name: String, measured: f64, threshold: f64) {
        self.record(name, measured, threshold, Comparison::AtMost);
    }

    /// A check whose computation itself broke down.
    fn broken(&mut self, name: String, threshold: f64, err: impl ToString) {
        self.checks.push(Check {
            name,
            measured: f64::NAN,
            threshold,
            comparison: Comparison::AtMost,
            passed: false,
            note: Some(err.to_string()),
        });
    }

    fn finish(self) -> Report {
        let n_failed = self.checks.iter().filter(|c| !c.passed).count();
        Report { passed: n_failed == 0, n_checks: self.checks.len(), n_failed, checks: self.checks }
    }
}

/// Runs the suite on the configured chain and on its 2- and 3-qubit siblings.
pub fn run_validate(config: &ExperimentConfig) -> Result<Report, CliError> {
    let spec = config.chain.spec()?;
    // Surfaces FrequencyTooSmall and friends as configuration errors.
    let l = Liouvillian::from_spec(&spec)?;
    let rho0 = initial_state(config, l.hamiltonian())?;
    let swap = config.debug.swap_rate_convention;

    let mut suite = Suite::default();
    structural_checks(&mut suite, config, &spec, &l, &rho0)?;
    for n in [2, 3].into_iter().filter(|&n| n != spec.n_qubits) {
        let sibling = config.chain.spec_with(n, spec.baths[0].beta, spec.baths[1].beta)?;
        // Siblings outside the frequency domain are skipped, not failed.
        let Ok(l) = Liouvillian::from_spec(&sibling) else { continue };
        let rho0 = DensityMatrix::basis_state(sibling.dim(), 1)?;
        structural_checks(&mut suite, config, &sibling, &l, &rho0)?;
    }
    for n in [2, 3] {
        if let Ok(sibling) = config.chain.spec_with(n, spec.baths[0].beta, spec.baths[1].beta) {
            if x_coefficients(&sibling).is_ok() {
                oracle_checks(&mut suite, &format!("config n={n}"), &sibling, swap)?;
            }
        }
    }
    random_oracle_checks(&mut suite, swap)?;
    Ok(suite.finish())
}

fn structural_checks(
    suite: &mut Suite,
    config: &ExperimentConfig,
    spec: &ChainSpec,
    l: &Liouvillian,
    rho0: &DensityMatrix,
) -> Result<(), CliError> {
    let tag = format!("n={}", spec.n_qubits);
    let h = l.hamiltonian();

    let identity = l
        .channels()
        .iter()
        .map(|ch| (h * &ch.lowering_op - &ch.lowering_op * h + &ch.lowering_op * C64::new(ch.omega, 0.0)).norm())
        .fold(0.0, f64::max);
    suite.at_most(format!("eigenoperator_identity[{tag}]"), identity, 1e-10);

    let mut completeness = 0.0f64;
    for (b, bath) in spec.baths.iter().enumerate() {
        let sum = l
            .channels()
            .iter()
            .filter(|c| c.bath_index == b)
            .fold(ComplexMatrix::zeros(spec.dim(), spec.dim()), |acc, c| acc + &c.lowering_op);
        let lowering = embed_site(&sigma_minus(), bath.site, spec.n_qubits)?;
        completeness = completeness.max(max_abs_diff(&sum, &lowering));
    }
    suite.at_most(format!("channel_completeness[{tag}]"), completeness, 1e-12);

    let balance = l
        .channels()
        .iter()
        .map(|ch: &JumpChannel| {
            let beta = spec.baths[ch.bath_index].beta;
            (ch.rate_up / ch.rate_down * (beta * ch.omega).exp() - 1.0).abs()
        })
        .fold(0.0, f64::max);
    suite.at_most(format!("detailed_balance[{tag}]"), balance, 1e-12);

    let mut rng = StdRng::seed_from_u64(SEED);
    let (mut trace_leak, mut herm_leak) = (0.0f64, 0.0f64);
    for _ in 0..8 {
        let x = hermitize(&ComplexMatrix::from_fn(spec.dim(), spec.dim(), |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }));
        let lx = l.apply(&x);
        trace_leak = trace_leak.max(lx.trace().norm() / lx.norm().max(1.0));
        herm_leak = herm_leak.max(hermiticity_error(&lx) / lx.norm().max(1.0));
    }
    suite.at_most(format!("generator_trace_preservation[{tag}]"), trace_leak, 1e-12);
    suite.at_most(format!("generator_hermiticity_preservation[{tag}]"), herm_leak, 1e-12);

    let times: Vec<f64> = (0..=20).map(|k| 10.0 * k as f64).collect();
    let rk = evolve(l, rho0, &times, config.tolerances.integrator());
    match &rk {
        Ok(tr) => {
            let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
            suite.at_most(format!("trajectory_trace_drift[{tag}]"), max(&tr.trace_errors), 1e-8);
            suite.at_most(format!("trajectory_hermiticity[{tag}]"), max(&tr.hermiticity_errors), 1e-10);
            let floor = tr.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            suite.record(format!("trajectory_positivity[{tag}]"), floor, -1e-9, Comparison::AtLeast);
        }
        Err(e) => suite.broken(format!("trajectory[{tag}]"), 1e-8, e),
    }

    if spec.dim() * spec.dim() <= qchain::dynamics::EXPM_LIMIT {
        let checkpoints: Vec<f64> = (0..=10).map(|k| 25.0 * k as f64).collect();
        let name = format!("backend_agreement[{tag}]");
        let agreement = evolve(l, rho0, &checkpoints, config.tolerances.integrator()).and_then(|rk| {
            let ex = evolve_expm(l, rho0, &checkpoints)?;
            rk.states
                .iter()
                .zip(&ex.states)
                .map(|(a, b)| trace_distance(a, b))
                .try_fold(0.0f64, |m, d| Ok(m.max(d?)))
        });
        match agreement {
            Ok(d) => suite.at_most(name, d, 1e-8),
            Err(e) => suite.broken(name, 1e-8, e),
        }
    }

    if l.generator().is_some() {
        let ss = steady_state(l)?;
        let norm = l.norm()?;
        suite.record(format!("null_eigenvalue_count[{tag}]"), ss.certificate.null_count as f64, 1.0, Comparison::Equal);
        suite.at_most(format!("null_eigenvalue_magnitude[{tag}]"), ss.certificate.null_magnitude, 1e-10 * norm);
        suite.record(format!("spectral_gap[{tag}]"), ss.gap, 1e-6 * spec.gamma_min(), Comparison::AtLeast);
        suite.at_most(format!("steady_state_residual[{tag}]"), ss.relative_residual, 1e-10);

        let beta = spec.baths[0].beta;
        let mut equilibrium = spec.clone();
        for bath in &mut equilibrium.baths {
            bath.beta = beta;
        }
        let eq = steady_state(&Liouvillian::from_spec(&equilibrium)?)?;
        let gibbs = gibbs_state(&build_hamiltonian(&equilibrium)?, beta)?;
        suite.at_most(format!("gibbs_limit[{tag}]"), trace_distance(&eq.state, &gibbs)?, 1e-8);
    } else {
        // Without the dense generator only conservation of the trace functional can be checked.
        let functional = trace_functional(spec.dim());
        let image = vectorize(&l.apply(rho0.matrix()));
        suite.at_most(format!("trace_functional_annihilation[{tag}]"), functional.dot(&image).norm(), 1e-12);
    }
    Ok(())
}

fn closed_form(spec: &ChainSpec, swap: bool) -> Result<(XCoefficients, DensityMatrix), CliError> {
    let mut x = x_coefficients(spec)?;
    if swap {
        x = x.swapped();
    }
    let rho = match spec.n_qubits {
        2 => steady_state_2q_from(&x)?,
        _ => steady_state_3q_from(&x)?,
    };
    Ok((x, rho))
}

fn oracle_checks(suite: &mut Suite, tag: &str, spec: &ChainSpec, swap: bool) -> Result<(), CliError> {
    let n = spec.n_qubits;
    let numeric = steady_state(&Liouvillian::from_spec(spec)?)?;
    let (x, exact) = closed_form(spec, swap)?;
    suite.at_most(format!("oracle_equivalence_{n}q[{tag}]"), trace_distance(&numeric.state, &exact)?, 1e-10);
    if n == 2 {
        let identity = (concurrence_2q_from(&x) - concurrence(&exact)?).abs();
        suite.at_most(format!("concurrence_identity[{tag}]"), identity, 1e-12);
    } else {
        let basis = tables::eigenbasis_3q();
        let mut off = 0.0f64;
        for (a, ket_a) in basis.iter().enumerate() {
            for (b, ket_b) in basis.iter().enumerate() {
                if a != b {
                    off = off.max((ket_a.adjoint() * numeric.state.matrix() * ket_b)[(0, 0)].norm());
                }
            }
        }
        suite.at_most(format!("eigenbasis_diagonality_3q[{tag}]"), off, 1e-10);
    }
    Ok(())
}

/// Worst-case oracle agreement over a seeded random grid.
fn random_oracle_checks(suite: &mut Suite, swap: bool) -> Result<(), CliError> {
    let mut rng = StdRng::seed_from_u64(SEED);
    for n in [2usize, 3] {
        let floor = if n == 2 { 1.0 } else { std::f64::consts::SQRT_2 };
        let (mut worst, mut identity) = (0.0f64, 0.0f64);
        for _ in 0..RANDOM_SPECS {
            let k = rng.random_range(0.1..2.0);
            let eps = floor * k + rng.random_range(0.05..2.0);
            let left = (rng.random_range(1e-3..0.1), rng.random_range(0.2..20.0));
            let right = (rng.random_range(1e-3..0.1), rng.random_range(0.2..20.0));
            let spec = ChainSpec::two_bath(n, eps, k, left, right)?;
            let numeric = steady_state(&Liouvillian::from_spec(&spec)?)?;
            let (x, exact) = closed_form(&spec, swap)?;
            worst = worst.max(trace_distance(&numeric.state, &exact)?);
            if n == 2 {
                identity = identity.max((concurrence_2q_from(&x) - concurrence(&exact)?).abs());
            }
        }
        suite.at_most(format!("oracle_equivalence_{n}q[random x{RANDOM_SPECS}]"), worst, 1e-10);
        if n == 2 {
            suite.at_most(format!("concurrence_identity[random x{RANDOM_SPECS}]"), identity, 1e-12);
        }
    }
    Ok(())
}
