//! The three data-producing experiments. Each returns the finished CSV text.

use std::path::Path;

use qchain::analysis::{
    analytic_concurrence_2q, analytic_steady_state_3q, concurrence_first_last, gibbs_state, w_state,
    x_coefficients,
};
use qchain::dynamics::{evolve, evolve_expm, steady_state, Liouvillian};
use qchain::linalg::{hermitian_eig, ComplexMatrix, DensityMatrix, C64};
use rayon::prelude::*;

use crate::config::{Backend, ExperimentConfig, InitialState};
use crate::csv::Csv;
use crate::CliError;

pub fn initial_state(config: &ExperimentConfig, h: &ComplexMatrix) -> Result<DensityMatrix, CliError> {
    let dim = h.nrows();
    let rho = match &config.initial_state {
        InitialState::W3 => w_state(config.chain.n_qubits)?,
        InitialState::Ground => DensityMatrix::basis_state(dim, 0)?,
        InitialState::Gibbs(beta) => gibbs_state(h, *beta)?,
        InitialState::File(path) => read_state(path)?,
    };
    if rho.dim() != dim {
        return Err(CliError::Config(format!(
            "initial state has dimension {}, chain needs {dim}",
            rho.dim()
        )));
    }
    Ok(rho)
}

/// One matrix row per line; entries `re` or `re,im` separated by whitespace; `#` starts a comment line.
pub fn read_state(path: &Path) -> Result<DensityMatrix, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |what: String| CliError::Config(format!("{}: {what}", path.display()));
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let row = line
            .split_whitespace()
            .map(|cell| {
                let (re, im) = cell.split_once(',').unwrap_or((cell, "0"));
                match (re.parse::<f64>(), im.parse::<f64>()) {
                    (Ok(re), Ok(im)) => Ok(C64::new(re, im)),
                    _ => Err(bad(format!("cannot parse entry {cell:?}"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(bad("expected a square matrix".into()));
    }
    Ok(DensityMatrix::new(ComplexMatrix::from_fn(dim, dim, |i, j| rows[i][j]))?)
}

pub fn run_dynamics(config: &ExperimentConfig) -> Result<String, CliError> {
    let spec = config.chain.spec()?;
    let l = Liouvillian::from_spec(&spec)?;
    let rho0 = initial_state(config, l.hamiltonian())?;
    let times = config.time_grid.times();
    let trajectory = match config.tolerances.backend {
        Backend::Rk => evolve(&l, &rho0, &times, config.tolerances.integrator())?,
        Backend::Expm => evolve_expm(&l, &rho0, &times)?,
    };
    let eig = hermitian_eig(l.hamiltonian())?;
    let dim = l.dim();

    let mut csv = Csv::new(config);
    let energies: Vec<String> = eig.eigenvalues.iter().map(|e| crate::csv::num(*e)).collect();
    csv.comment(&format!("pop_k is the population of the k-th eigenstate of H; energies: {}", energies.join(" ")));
    let mut columns = vec!["t".to_string(), "C_first_last".into(), "purity".into()];
    columns.extend((0..dim).map(|k| format!("pop_{k}")));
    columns.push("trace_error".into());
    csv.columns(&columns);

    for (k, rho) in trajectory.states.iter().enumerate() {
        let mut row = vec![
            trajectory.times[k],
            concurrence_first_last(rho, spec.n_qubits)?,
            rho.purity(),
        ];
        let in_eigenbasis = eig.eigenvectors.adjoint() * rho.matrix() * &eig.eigenvectors;
        row.extend((0..dim).map(|i| in_eigenbasis[(i, i)].re));
        row.push(trajectory.trace_errors[k]);
        csv.row(&row);
    }
    Ok(csv.finish())
}

pub fn run_steady(config: &ExperimentConfig) -> Result<String, CliError> {
    let spec = config.chain.spec()?;
    let n = spec.n_qubits;
    let l = Liouvillian::from_spec(&spec)?;
    let ss = steady_state(&l)?;
    let rho = ss.state.matrix();
    let eig = hermitian_eig(l.hamiltonian())?;
    let in_eigenbasis = eig.eigenvectors.adjoint() * rho * &eig.eigenvectors;

    let mut csv = Csv::new(config);
    csv.comment("population_k: k-th eigenstate of H, energies ascending; coherences in the computational basis");
    csv.columns(&["quantity", "value"]);
    for k in 0..l.dim() {
        csv.labelled(&format!("population_{k}"), in_eigenbasis[(k, k)].re);
    }
    if spec.baths.iter().all(|b| b.beta == spec.baths[0].beta) {
        let beta = spec.baths[0].beta;
        let z: f64 = eig.eigenvalues.iter().map(|e| (-beta * (e - eig.eigenvalues[0])).exp()).sum();
        for (k, e) in eig.eigenvalues.iter().enumerate() {
            csv.labelled(&format!("gibbs_population_{k}"), (-beta * (e - eig.eigenvalues[0])).exp() / z);
        }
    }
    for i in 0..l.dim() {
        for j in i + 1..l.dim() {
            csv.labelled(&format!("coherence_re_{i}_{j}"), rho[(i, j)].re);
            csv.labelled(&format!("coherence_im_{i}_{j}"), rho[(i, j)].im);
        }
    }
    let numeric = concurrence_first_last(&ss.state, n)?;
    csv.labelled("concurrence_numeric", numeric);
    let analytic = match n {
        2 => Some(analytic_concurrence_2q(&spec)?),
        3 => Some(concurrence_first_last(&analytic_steady_state_3q(&spec)?, 3)?),
        _ => None,
    };
    if let Some(analytic) = analytic {
        csv.labelled("concurrence_analytic", analytic);
        csv.labelled("concurrence_abs_difference", (numeric - analytic).abs());
    }
    csv.labelled("spectral_gap", ss.gap);
    csv.labelled("null_eigenvalue_magnitude", ss.certificate.null_magnitude);
    csv.labelled("relative_residual", ss.relative_residual);
    Ok(csv.finish())
}

/// Stationary first-last concurrence for one sweep point.
fn stationary_concurrence(config: &ExperimentConfig, n: usize, t1: f64, t2: f64) -> Result<f64, CliError> {
    let spec = config.chain.spec_with(n, 1.0 / t1, 1.0 / t2)?;
    let ss = steady_state(&Liouvillian::from_spec(&spec)?)?;
    Ok(concurrence_first_last(&ss.state, n)?)
}

/// Sweeps `T1` with `T2 = ratio * T1`. Points run in parallel on the current rayon pool; rows keep grid order.
pub fn run_compare(config: &ExperimentConfig) -> Result<String, CliError> {
    let ratio = config.sweep.ratio;
    let probe = config.sweep.t_min;
    // Names the offending frequency before any work is spent.
    x_coefficients(&config.chain.spec_with(3, 1.0 / probe, 1.0 / (ratio * probe))?)?;

    let rows: Vec<[f64; 5]> = config
        .sweep
        .temperatures()
        .into_par_iter()
        .map(|t1| {
            let t2 = ratio * t1;
            let c2 = stationary_concurrence(config, 2, t1, t2)?;
            let c3 = stationary_concurrence(config, 3, t1, t2)?;
            Ok([t1, t2, c2, c3, c3 - c2])
        })
        .collect::<Result<_, CliError>>()?;

    let mut csv = Csv::new(config);
    csv.comment("C2: two-qubit chain; C3: first-last pair of the three-qubit chain; difference = C3 - C2");
    csv.columns(&["T1", "T2", "C2", "C3", "difference"]);
    for row in &rows {
        csv.row(row);
    }
    Ok(csv.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(sets: &[&str]) -> ExperimentConfig {
        let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        ExperimentConfig::load(None, &sets).unwrap()
    }

    fn data_rows(csv: &str) -> Vec<Vec<f64>> {
        csv.lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
            .collect()
    }

    fn lookup(csv: &str, key: &str) -> f64 {
        csv.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .parse()
            .unwrap()
    }

    #[test]
    fn dynamics_columns() {
        let csv = run_dynamics(&config(&["time_grid.t_max=10", "time_grid.n_points=11"])).unwrap();
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header.split(',').count(), 3 + 8 + 1);
        let rows = data_rows(&csv);
        assert_eq!(rows.len(), 11);
        assert!((rows[0][1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((rows[0][2] - 1.0).abs() < 1e-12);
        for row in &rows {
            let pops: f64 = row[3..11].iter().sum();
            assert!((pops - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dynamics_backends_agree_in_csv() {
        let base = ["time_grid.t_max=20", "time_grid.n_points=5"];
        let rk = data_rows(&run_dynamics(&config(&base)).unwrap());
        let ex = data_rows(&run_dynamics(&config(&[base[0], base[1], "tolerances.backend=expm"])).unwrap());
        for (a, b) in rk.iter().zip(&ex) {
            for (x, y) in a.iter().zip(b).take(11) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn steady_two_qubit_matches_closed_form() {
        let csv = run_steady(&config(&["chain.n_qubits=2", "chain.beta_left=10", "chain.beta_right=10"])).unwrap();
        assert!(lookup(&csv, "concurrence_abs_difference") <= 1e-10);
        assert!(lookup(&csv, "spectral_gap") > 0.0);
        for k in 0..4 {
            let p = lookup(&csv, &format!("population_{k}"));
            let g = lookup(&csv, &format!("gibbs_population_{k}"));
            assert!((p - g).abs() < 1e-9);
        }
    }

    #[test]
    fn steady_hot_pair_is_separable() {
        let csv = run_steady(&config(&["chain.n_qubits=2", "chain.beta_left=0.1", "chain.beta_right=0.1"])).unwrap();
        assert_eq!(lookup(&csv, "concurrence_numeric"), 0.0);
        assert_eq!(lookup(&csv, "concurrence_analytic"), 0.0);
    }

    #[test]
    fn steady_three_qubit_equilibrium_is_gibbs() {
        let csv = run_steady(&config(&["chain.beta_left=4", "chain.beta_right=4"])).unwrap();
        for k in 0..8 {
            let p = lookup(&csv, &format!("population_{k}"));
            let g = lookup(&csv, &format!("gibbs_population_{k}"));
            assert!((p - g).abs() < 1e-9, "{k}");
        }
        assert!(lookup(&csv, "concurrence_abs_difference") <= 1e-10);
    }

    #[test]
    fn compare_is_deterministic_across_thread_counts() {
        let cfg = config(&["sweep.n_points=12", "sweep.ratio=1.5"]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_compare(&cfg).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(4));
        let rows = data_rows(&one);
        assert_eq!(rows.len(), 12);
        for row in rows {
            assert_eq!(row[1], 1.5 * row[0]);
            assert_eq!(row[4], row[3] - row[2]);
        }
    }

    #[test]
    fn compare_rejects_vanishing_frequency() {
        let err = run_compare(&config(&["chain.epsilon=1.4142135623730951"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("omega2"), "{err}");
    }

    #[test]
    fn state_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bell.txt");
        std::fs::write(&path, "# Bell state\n0.5 0 0 0.5\n0 0 0 0\n0 0 0 0\n0.5,0 0 0 0.5\n").unwrap();
        let rho = read_state(&path).unwrap();
        assert!((qchain::analysis::concurrence(&rho).unwrap() - 1.0).abs() < 1e-12);
        std::fs::write(&path, "1 0\n0 1\n").unwrap();
        assert!(read_state(&path).is_err());
        std::fs::write(&path, "1 0 0\n0 0\n").unwrap();
        assert!(read_state(&path).is_err());
    }
}
