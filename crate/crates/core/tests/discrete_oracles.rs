use coalescent_core::discrete::{
    beta_weight, bernoulli_identity_check, enumerate_outcomes, enumerate_population_law, k_sample_probability,
    p_sample_conditional, sample_k, sample_p, Arithmetic, DiscreteEvent, GwModel, DEFAULT_OUTCOME_CAP,
};
use coalescent_core::montecarlo::replica_rng;
use coalescent_core::quadrature::{integrate, Tolerance};
use coalescent_core::MultiIndex;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn fixture(name: &str) -> GwModel {
    let path = format!("{}/fixtures/gw/{name}.json", env!("CARGO_MANIFEST_DIR"));
    GwModel::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn events(d: usize) -> Vec<DiscreteEvent> {
    let mut ev = vec![
        DiscreteEvent::Full,
        DiscreteEvent::FirstSampleIs { ty: 0, member: 0 },
        DiscreteEvent::Contains { ty: 0, member: 1 },
        DiscreteEvent::SameAncestor { generation: 0 },
    ];
    if d > 1 {
        ev.push(DiscreteEvent::Contains { ty: 1, member: 0 });
    }
    ev
}

#[test]
fn law_sums_to_one() {
    for name in ["binary_two_generations", "two_type_flip", "fixed_three_two", "geometric_two_generations"] {
        let law = enumerate_population_law(&fixture(name), DEFAULT_OUTCOME_CAP).unwrap();
        let total = law.values().fold(BigRational::zero(), |a, b| a + b);
        assert!(total.is_one(), "{name}: {total}");
    }
}

#[test]
fn census_mean_follows_mean_matrix() {
    let m = fixture("two_type_flip");
    let mm = m.mean_matrix();
    // initial · M^g
    let mut mean: Vec<BigRational> = m.initial.iter().map(|&v| BigRational::from_integer(v.into())).collect();
    for _ in 0..m.generations {
        mean = (0..m.d)
            .map(|j| (0..m.d).map(|i| &mean[i] * &mm[i][j]).fold(BigRational::zero(), |a, b| a + b))
            .collect();
    }
    let law = enumerate_population_law(&m, DEFAULT_OUTCOME_CAP).unwrap();
    for j in 0..m.d {
        let e = law
            .iter()
            .map(|(n, p)| p * BigRational::from_integer(n[j].into()))
            .fold(BigRational::zero(), |a, b| a + b);
        assert_eq!(e, mean[j]);
    }
}

#[test]
fn identity_holds_exactly_on_shipped_fixtures() {
    for name in ["binary_two_generations", "two_type_flip", "fixed_three_two", "geometric_two_generations"] {
        let m = fixture(name);
        let ks: Vec<MultiIndex> = MultiIndex::all_up_to(m.d, 3);
        for k in ks {
            let rows = bernoulli_identity_check(&m, &k, &events(m.d), DEFAULT_OUTCOME_CAP).unwrap();
            for r in rows {
                assert_eq!(r.mode, Arithmetic::Exact);
                assert!(r.holds(), "{name} k={k} {}: {:?} vs {:?}", r.event, r.lhs_exact, r.rhs_exact);
            }
        }
    }
}

#[test]
fn beta_weight_matches_quadrature() {
    for n in 1..=6u32 {
        for k in 1..=n {
            let exact = beta_weight(n, k).to_f64().unwrap();
            let kf = f64::from(k);
            let num = integrate(
                |p| kf * p.powi(k as i32 - 1) * (1.0 - p).powi((n - k) as i32),
                0.0,
                1.0,
                &Tolerance::new(1e-15, 1e-13),
            )
            .unwrap();
            assert!((exact - num.value).abs() < 1e-13, "n={n} k={k}");
        }
    }
}

#[test]
fn same_ancestor_has_a_direct_oracle() {
    // one generation of binary splitting from two roots: a pair sample shares
    // the root iff both come from the same parent
    let mut m = GwModel::fixed(&[2]);
    m.generations = 1;
    m.offspring[0][0].children = vec![2];
    let out = enumerate_outcomes(&m, 10).unwrap();
    assert_eq!(out.len(), 1);
    let p = k_sample_probability(&out[0].population, &MultiIndex::from(vec![2]), &DiscreteEvent::SameAncestor {
        generation: 0,
    });
    // 4 members, 12 ordered pairs, 4 of them siblings
    assert_eq!(p, BigRational::new(1.into(), 3.into()));
}

#[test]
fn conditional_law_matches_for_exchangeable_events() {
    let m = fixture("two_type_flip");
    let p = vec![BigRational::new(1.into(), 3.into()), BigRational::new(3.into(), 5.into())];
    let k = MultiIndex::from(vec![1, 1]);
    let ev = [DiscreteEvent::Contains { ty: 0, member: 0 }, DiscreteEvent::SameAncestor { generation: 1 }];
    for o in enumerate_outcomes(&m, DEFAULT_OUTCOME_CAP).unwrap() {
        if !k.le(&o.population.census()) {
            continue;
        }
        for e in &ev {
            assert!(e.is_exchangeable());
            let cond = p_sample_conditional(&o.population, &k, &p, e).unwrap();
            assert_eq!(cond, k_sample_probability(&o.population, &k, e));
        }
    }
}

#[test]
fn samplers() {
    let pop = enumerate_outcomes(&GwModel::fixed(&[5, 2]), 1).unwrap().remove(0).population;
    let mut rng = replica_rng(3, 0, 0);
    let all = sample_p(&pop, &[1.0, 1.0], &mut rng);
    assert_eq!((all[0].len(), all[1].len()), (5, 2));
    let none = sample_p(&pop, &[0.0, 0.0], &mut rng);
    assert!(none.iter().all(Vec::is_empty));
    let s = sample_k(&pop, &MultiIndex::from(vec![2, 3]), &mut rng);
    assert_eq!(s[0].len(), 2);
    assert!(s[1].is_empty());

    let draws = 100_000;
    let p = 0.3;
    let mut hits = 0u32;
    for r in 0..draws {
        let mut rng = replica_rng(9, 1, r);
        if sample_p(&pop, &[p, p], &mut rng)[0].contains(&2) {
            hits += 1;
        }
    }
    let freq = f64::from(hits) / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((freq - p).abs() < 3.0 * se, "{freq}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn identity_on_random_fixed_populations(n0 in 0u32..5, n1 in 0u32..4, k0 in 0u32..3, k1 in 0u32..3, t in 0usize..2, m in 0usize..4) {
        let model = GwModel::fixed(&[n0, n1]);
        let ev = [
            DiscreteEvent::Full,
            DiscreteEvent::FirstSampleIs { ty: t, member: m },
            DiscreteEvent::Contains { ty: t, member: m },
        ];
        let rows = bernoulli_identity_check(&model, &MultiIndex::from(vec![k0, k1]), &ev, 10).unwrap();
        for r in rows {
            prop_assert!(r.holds());
        }
    }
}

#[test]
fn large_enumerations_fall_back_to_floating_point() {
    let mut m = fixture("geometric_two_generations");
    m.generations = 3;
    let rows = bernoulli_identity_check(&m, &MultiIndex::from(vec![2]), &[DiscreteEvent::Full], DEFAULT_OUTCOME_CAP)
        .unwrap();
    assert_eq!(rows[0].mode, Arithmetic::Float);
    assert!(rows[0].holds(), "{:?}", rows[0]);
}
