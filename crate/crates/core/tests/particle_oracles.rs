use coalescent_core::laplace::solve_u;
use coalescent_core::mechanism::{Atom, JumpMeasure};
use coalescent_core::particle::{estimate_mrca, terminal_mass, ParticleSystem};
use coalescent_core::montecarlo::replica_rng;
use coalescent_core::poissonize::{mrca_probability, tight_tolerance};
use coalescent_core::{BranchingMechanism, MultiIndex};

#[test]
fn feller_is_critical() {
    let m = BranchingMechanism::feller(0.5).unwrap();
    let s = terminal_mass(&m, &[1.0], 1.0, 50, 20_000, 4).unwrap();
    assert!((s.mean[0] - 1.0).abs() < 3.0 * s.stderr[0], "{s:?}");
}

#[test]
fn extinction_matches_laplace_exponent() {
    let m = BranchingMechanism::feller(0.5).unwrap();
    let u = solve_u(&m, 1.0, &[1e4], 0).unwrap().value()[0];
    let reference = (-u).exp();
    let s = terminal_mass(&m, &[1.0], 1.0, 100, 20_000, 5).unwrap();
    // O(1/n) discretization bias on top of MC error
    assert!((s.extinction - reference).abs() < 3.0 * s.extinction_stderr + 0.01, "{} vs {reference}", s.extinction);
}

#[test]
fn atom_mechanism_has_compensated_mean() {
    // mean growth rate: κ + m r - m r 1{r <= 1} = 0 for r <= 1
    let m = BranchingMechanism::new(
        vec![vec![0.0]],
        vec![0.25],
        vec![JumpMeasure { atoms: vec![Atom { mass: 1.0, r: vec![0.5] }], density1d: None }],
    )
    .unwrap();
    let s = terminal_mass(&m, &[1.0], 1.0, 40, 20_000, 6).unwrap();
    assert!((s.mean[0] - 1.0).abs() < 3.0 * s.stderr[0], "{s:?}");
}

#[test]
fn genealogy_is_a_forest() {
    let m = BranchingMechanism::new(
        vec![vec![0.0, 0.3], vec![0.2, -0.1]],
        vec![0.5, 0.25],
        vec![JumpMeasure::default(), JumpMeasure { atoms: vec![Atom { mass: 0.5, r: vec![0.2, 0.1] }], density1d: None }],
    )
    .unwrap();
    let sys = ParticleSystem::new(&m, 30).unwrap();
    for r in 0..200 {
        let t = sys.simulate(&[1.0, 0.5], 1.0, &mut replica_rng(8, 0, r)).unwrap();
        assert!(t.is_well_formed());
    }
}

#[test]
fn feller_mrca_small_run() {
    let m = BranchingMechanism::feller(0.5).unwrap();
    let analytic = mrca_probability(&m, 2, 1.0, 1.0, &tight_tolerance()).unwrap().value;
    let est = estimate_mrca(&m, &[1.0], 1.0, &MultiIndex::from(vec![2]), &[25, 50, 100], 20_000, 7).unwrap();
    eprintln!("{est:?} analytic {analytic}");
    assert!(est.consistent_with(analytic), "{est:?} vs {analytic}");
}
