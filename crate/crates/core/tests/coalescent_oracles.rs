use approx::assert_relative_eq;
use coalescent_core::coalescent::{
    first_event_law, merger_rate, simulate_typed_coalescent, small_time_verify, LambdaCoalescent,
    RateProvider,
};
use coalescent_core::mechanism::{Atom, JumpMeasure};
use coalescent_core::quadrature::Tolerance;
use coalescent_core::{BranchingMechanism, MultiIndex};
use statrs::function::gamma::ln_gamma;

fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[test]
fn stable_rate_matches_beta_function() {
    for &a in &[1.2, 1.5, 1.8] {
        let m = BranchingMechanism::stable(a, 0.7).unwrap();
        for &x in &[0.3, 1.0, 4.0] {
            for k in 2..=5u32 {
                for j in 2..=k {
                    let got = merger_rate(&m, &[x], &MultiIndex::from(vec![k]), &MultiIndex::from(vec![j]), 0).unwrap();
                    let want = 0.7 * x.powf(1.0 - a) * beta_fn(f64::from(j) - a, f64::from(k - j) + a);
                    assert_relative_eq!(got, want, max_relative = 1e-7);
                }
            }
        }
    }
}

#[test]
fn neveu_rates_are_bolthausen_sznitman_at_every_size() {
    let m = BranchingMechanism::neveu();
    let bs = LambdaCoalescent::bolthausen_sznitman();
    for &x in &[0.1, 1.0, 25.0] {
        for k in 2..=6u32 {
            for j in 2..=k {
                let kk = MultiIndex::from(vec![k]);
                let a = MultiIndex::from(vec![j]);
                let got = merger_rate(&m, &[x], &kk, &a, 0).unwrap();
                assert_relative_eq!(got, bs.rate(&kk, &a, 0).unwrap(), max_relative = 1e-7);
            }
        }
    }
}

#[test]
fn kingman_first_merger_time() {
    let beta = 0.8;
    let kg = LambdaCoalescent::kingman(beta).unwrap();
    let k = MultiIndex::from(vec![3]);
    let (_, mean) = first_event_law(&kg, &k).unwrap();
    assert_relative_eq!(mean, 1.0 / (6.0 * beta), max_relative = 1e-12);
    let runs = simulate_typed_coalescent(&kg, &k, None, 40_000, 11).unwrap();
    let times: Vec<f64> = runs.iter().map(|r| r[0].time).collect();
    let n = times.len() as f64;
    let m = times.iter().sum::<f64>() / n;
    let se = (times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((m - mean).abs() < 4.0 * se, "{m} vs {mean} (se {se})");
}

#[test]
fn small_time_two_type_atom() {
    let m = BranchingMechanism::new(
        vec![vec![0.0, 0.3], vec![0.2, 0.0]],
        vec![0.5, 0.4],
        vec![
            JumpMeasure { atoms: vec![Atom { mass: 0.6, r: vec![0.5, 0.8] }], density1d: None },
            JumpMeasure::default(),
        ],
    )
    .unwrap();
    let x = [1.0, 1.5];
    let tol = Tolerance::new(1e-12, 1e-10);
    for (k, a, c) in [
        (vec![2, 1], vec![2, 0], 0usize),
        (vec![2, 1], vec![1, 1], 0),
        (vec![1, 1], vec![0, 1], 0),
        (vec![2, 0], vec![2, 0], 0),
    ] {
        let k = MultiIndex::from(k);
        let a = MultiIndex::from(a);
        let grid = [8e-3, 4e-3, 2e-3, 1e-3];
        let rep = small_time_verify(&m, &x, &k, &a, c, &grid, &tol).unwrap();
        eprintln!("k={k} a={a} c={c} closed={} integral={} order={}", rep.limit_closed, rep.limit_integral, rep.order);
        for r in &rep.rows {
            eprintln!("  t={} ratio={} gap={:e} err={:e}", r.t, r.ratio, r.gap, r.ratio_error);
        }
        assert_relative_eq!(rep.limit_integral, rep.limit_closed, max_relative = 1e-6);
        assert!(rep.rows[3].gap < 0.05);
        assert!(rep.gap_halves(0.05), "{rep:?}");
        assert!((rep.order - 1.0).abs() < 0.05);
    }
}

#[test]
fn two_type_feller_local_rates() {
    let m = BranchingMechanism::new(
        vec![vec![-0.2, 0.4], vec![0.3, 0.1]],
        vec![0.5, 0.75],
        vec![JumpMeasure::default(), JumpMeasure::default()],
    )
    .unwrap();
    let x = [2.0, 0.5];
    let tol = Tolerance::new(1e-12, 1e-10);
    let grid = [8e-3, 4e-3, 2e-3, 1e-3];
    let cases = [
        (vec![0, 1], vec![0, 1], 0usize, 0.4 * 2.0 / 0.5),
        (vec![1, 0], vec![1, 0], 1, 0.3 * 0.5 / 2.0),
        (vec![2, 0], vec![2, 0], 0, 2.0 * 0.5 / 2.0),
        (vec![0, 2], vec![0, 2], 1, 2.0 * 0.75 / 0.5),
    ];
    for (k, a, c, limit) in cases {
        let k = MultiIndex::from(k);
        let a = MultiIndex::from(a);
        let rep = small_time_verify(&m, &x, &k, &a, c, &grid, &tol).unwrap();
        assert_relative_eq!(rep.limit_closed, limit, max_relative = 1e-12);
        assert_relative_eq!(rep.limit_integral, limit, max_relative = 1e-6);
        assert!(rep.rows[3].gap < 0.05, "{rep:?}");
        assert!(rep.gap_halves(0.05), "{rep:?}");
    }
}

#[test]
fn merging_into_own_singleton_is_not_an_event() {
    let m = BranchingMechanism::feller(0.5).unwrap();
    let k = MultiIndex::from(vec![2]);
    let tol = Tolerance::default();
    assert!(small_time_verify(&m, &[1.0], &k, &MultiIndex::from(vec![1]), 0, &[1e-3], &tol).is_err());
}

#[test]
fn csbp_rates_reduce_to_lambda_form() {
    // d = 1: rate(j, k) = ∫ s^{j-2} (1-s)^{k-j} Λ(x, ds), Λ = (2β/x) δ_0 + x s² T_x^# ν
    let beta = 0.3;
    let (mass, r) = (0.8, 1.7);
    let m = BranchingMechanism::new(
        vec![vec![0.0]],
        vec![beta],
        vec![JumpMeasure { atoms: vec![Atom { mass, r: vec![r] }], density1d: None }],
    )
    .unwrap();
    for &x in &[0.5, 1.0, 3.0] {
        let s = r / (x + r);
        for k in 2..=5u32 {
            for j in 2..=k {
                let got = merger_rate(&m, &[x], &MultiIndex::from(vec![k]), &MultiIndex::from(vec![j]), 0).unwrap();
                let kingman = if j == 2 { 2.0 * beta / x } else { 0.0 };
                let want = kingman + x * mass * s * s * s.powi(j as i32 - 2) * (1.0 - s).powi((k - j) as i32);
                assert_relative_eq!(got, want, max_relative = 1e-13);
            }
        }
    }
}
