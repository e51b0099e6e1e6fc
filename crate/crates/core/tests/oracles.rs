use qchain::analysis::{
    analytic_concurrence_2q, analytic_steady_state_2q, analytic_steady_state_3q, concurrence, gibbs_state,
    populations_3q_from, x_coefficients,
};
use qchain::dynamics::{steady_state, Liouvillian};
use qchain::linalg::{max_abs_diff, trace_distance, C64};
use qchain::model::{build_hamiltonian, tables, ChainSpec};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_spec(rng: &mut StdRng, n: usize) -> ChainSpec {
    let k = rng.random_range(0.1..2.0);
    let floor = if n == 2 { 1.0 } else { std::f64::consts::SQRT_2 };
    let eps = floor * k + rng.random_range(0.05..2.0);
    let mut bath = || (rng.random_range(1e-3..0.1), rng.random_range(0.2..20.0));
    let (left, right) = (bath(), bath());
    ChainSpec::two_bath(n, eps, k, left, right).unwrap()
}

#[test]
fn two_qubit_numeric_matches_closed_form() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..50 {
        let spec = random_spec(&mut rng, 2);
        let numeric = steady_state(&Liouvillian::from_spec(&spec).unwrap()).unwrap();
        let exact = analytic_steady_state_2q(&spec).unwrap();
        assert!(trace_distance(&numeric.state, &exact).unwrap() < 1e-10, "{spec:?}");
        let c = analytic_concurrence_2q(&spec).unwrap();
        assert!((c - concurrence(&exact).unwrap()).abs() < 1e-12, "{spec:?}");
    }
}

#[test]
fn three_qubit_numeric_is_diagonal_in_closed_form_eigenbasis() {
    let mut rng = StdRng::seed_from_u64(11);
    let basis = tables::eigenbasis_3q();
    for _ in 0..30 {
        let spec = random_spec(&mut rng, 3);
        let numeric = steady_state(&Liouvillian::from_spec(&spec).unwrap()).unwrap();
        let pops = populations_3q_from(&x_coefficients(&spec).unwrap()).unwrap();
        for (a, ket_a) in basis.iter().enumerate() {
            for (b, ket_b) in basis.iter().enumerate() {
                let element: C64 = (ket_a.adjoint() * numeric.state.matrix() * ket_b)[(0, 0)];
                let expected = if a == b { pops[a] } else { 0.0 };
                assert!((element - C64::new(expected, 0.0)).norm() < 1e-10, "({a},{b}) {spec:?}");
            }
        }
        let exact = analytic_steady_state_3q(&spec).unwrap();
        assert!(trace_distance(&numeric.state, &exact).unwrap() < 1e-10);
    }
}

#[test]
fn equal_temperatures_give_the_gibbs_state() {
    for n in [2, 3, 4] {
        for beta in [0.2, 1.0, 4.0, 12.0] {
            for ratio in [1.7, 2.0, 3.0] {
                let spec = ChainSpec::two_bath(n, ratio, 1.0, (0.02, beta), (0.05, beta)).unwrap();
                let numeric = steady_state(&Liouvillian::from_spec(&spec).unwrap()).unwrap();
                let gibbs = gibbs_state(&build_hamiltonian(&spec).unwrap(), beta).unwrap();
                let d = trace_distance(&numeric.state, &gibbs).unwrap();
                assert!(d < 1e-8, "n = {n}, beta = {beta}, eps/K = {ratio}: {d:e}");
            }
        }
    }
}

#[test]
fn steady_state_is_unique_with_a_resolvable_gap() {
    let mut rng = StdRng::seed_from_u64(3);
    for n in [2, 3] {
        for _ in 0..20 {
            let spec = random_spec(&mut rng, n);
            let l = Liouvillian::from_spec(&spec).unwrap();
            let ss = steady_state(&l).unwrap();
            let cert = ss.certificate;
            assert_eq!(cert.null_count, 1);
            assert!(cert.null_magnitude < 1e-10 * l.norm().unwrap());
            assert!(ss.gap > 1e-6 * spec.gamma_min());
        }
    }
}

#[test]
fn sabotaged_rates_break_the_oracle() {
    let spec = ChainSpec::two_bath(2, 1.5, 1.0, (0.02, 5.0), (0.02, 3.0)).unwrap();
    let x = x_coefficients(&spec).unwrap().swapped();
    let wrong = qchain::analysis::steady_state_2q_from(&x).unwrap();
    let numeric = steady_state(&Liouvillian::from_spec(&spec).unwrap()).unwrap();
    assert!(trace_distance(&numeric.state, &wrong).unwrap() > 0.5);
}

#[test]
fn closed_form_channels_drive_the_same_steady_state() {
    let spec = ChainSpec::two_bath(3, 2.0, 1.0, (0.03, 2.0), (0.01, 0.5)).unwrap();
    let h = build_hamiltonian(&spec).unwrap();
    let generic = steady_state(&Liouvillian::from_spec(&spec).unwrap()).unwrap();
    let table = qchain::dynamics::build_liouvillian(&h, &tables::channels_3q(&spec).unwrap()).unwrap();
    let from_table = steady_state(&table).unwrap();
    assert!(max_abs_diff(generic.state.matrix(), from_table.state.matrix()) < 1e-12);
}
