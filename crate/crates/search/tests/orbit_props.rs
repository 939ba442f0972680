use gasketlab_core::analysis::{analyze, AnalysisConfig, PropertyRecord};
use gasketlab_core::lattice::Ifs;
use gasketlab_search::canonical_key;
use proptest::prelude::*;

/// Conjugates `z ↦ (u z + v)/2` by reflection, then rotation by `i^rot`,
/// then translation by `gamma`, and relabels by `perm`; written on raw
/// triples so it does not share code with the library's own transforms.
fn transform(triples: &[(u8, i64, i64)], reflect: bool, rot: u8, gamma: (i64, i64), perm: &[usize]) -> Ifs {
    let mul = |a: (i64, i64), b: (i64, i64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let unit = |q: u8| [(1, 0), (0, 1), (-1, 0), (0, -1)][q as usize % 4];
    let out: Vec<(u8, i64, i64)> = triples
        .iter()
        .map(|&(q, re, im)| {
            let (q, v) = if reflect { ((4 - q) % 4, (re, -im)) } else { (q, (re, im)) };
            let v = mul(unit(rot), v);
            let u = unit(q);
            let shift = mul((2 - u.0, -u.1), gamma);
            (q, v.0 + shift.0, v.1 + shift.1)
        })
        .collect();
    let permuted: Vec<(u8, i64, i64)> = perm.iter().map(|&k| out[k]).collect();
    Ifs::from_triples(&permuted)
}

fn assert_same_invariants(a: &PropertyRecord, b: &PropertyRecord) -> Result<(), TestCaseError> {
    prop_assert_eq!(a.osc, b.osc);
    prop_assert_eq!(a.proper_nbs, b.proper_nbs);
    prop_assert_eq!(a.finite_nbs, b.finite_nbs);
    prop_assert_eq!(a.max_degree, b.max_degree);
    prop_assert_eq!(a.neighborhoods, b.neighborhoods);
    prop_assert_eq!(a.connected, b.connected);
    prop_assert_eq!(a.has_intervals, b.has_intervals);
    prop_assert!((a.boundary_dim - b.boundary_dim).abs() < 1e-9);
    prop_assert!((a.attractor_dim - b.attractor_dim).abs() < 1e-9);
    Ok(())
}

fn triples() -> impl Strategy<Value = Vec<(u8, i64, i64)>> {
    prop::collection::vec((0u8..4, -5i64..=5, -5i64..=5), 3)
}

fn perm() -> impl Strategy<Value = Vec<usize>> {
    Just(vec![0usize, 1, 2]).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn equivalent_systems_share_invariants_and_key(
        base in triples(),
        reflect in any::<bool>(),
        rot in 0u8..4,
        gamma in (-3i64..=3, -3i64..=3),
        perm in perm(),
    ) {
        let sys = Ifs::from_triples(&base);
        let image = transform(&base, reflect, rot, gamma, &perm);
        prop_assert_eq!(canonical_key(&sys), canonical_key(&image), "{} vs {}", sys, image);
        let cfg = AnalysisConfig::default();
        match (analyze(&sys, &cfg), analyze(&image, &cfg)) {
            (Ok(a), Ok(b)) => assert_same_invariants(&a.record, &b.record)?,
            (Err(a), Err(b)) => prop_assert_eq!(a.complexity().is_some(), b.complexity().is_some()),
            (a, b) => prop_assert!(false, "{sys}: {:?} vs {image}: {:?}", a.err(), b.err()),
        }
    }

    #[test]
    fn key_representative_is_equivalent(base in triples()) {
        let sys = Ifs::from_triples(&base);
        let key = canonical_key(&sys);
        prop_assert_eq!(canonical_key(&key.system()), key.clone());
        let cfg = AnalysisConfig::default();
        if let (Ok(a), Ok(b)) = (analyze(&sys, &cfg), analyze(&key.system(), &cfg)) {
            prop_assert!(a.record.same_invariants(&b.record, 1e-9), "{sys} vs {key}");
        }
    }
}
