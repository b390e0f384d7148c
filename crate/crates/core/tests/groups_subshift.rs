use cont_lll::group::{FiniteSubset, Group, GroupElement};
use cont_lll::subshift::{run_similarity, Region, SimilarityInstance, DEFAULT_SIMILARITY_BUDGET};
use proptest::prelude::*;

fn word() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[abAB]{0,8}").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(3), ..ProptestConfig::default() })]

    #[test]
    fn torus_axioms(a in prop::collection::vec(-20i64..20, 2), b in prop::collection::vec(-20i64..20, 2), c in prop::collection::vec(-20i64..20, 2)) {
        let g = Group::torus(2, 5).unwrap();
        let (a, b, c) = (g.vector(&a).unwrap(), g.vector(&b).unwrap(), g.vector(&c).unwrap());
        let ab_c = g.multiply(&g.multiply(&a, &b).unwrap(), &c).unwrap();
        let a_bc = g.multiply(&a, &g.multiply(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(ab_c, a_bc);
        prop_assert!(g.is_identity(&g.multiply(&a, &g.inverse(&a).unwrap()).unwrap()));
        prop_assert!(g.torus_index(&a).unwrap() < 25);
    }

    #[test]
    fn free_group_axioms(x in word(), y in word(), z in word()) {
        let g = Group::free(2).unwrap();
        let (x, y, z) = (g.word(&x).unwrap(), g.word(&y).unwrap(), g.word(&z).unwrap());
        let lhs = g.multiply(&g.multiply(&x, &y).unwrap(), &z).unwrap();
        let rhs = g.multiply(&x, &g.multiply(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert!(g.is_identity(&g.multiply(&g.inverse(&x).unwrap(), &x).unwrap()));
        // Reduced words never contain a letter next to its inverse.
        if let GroupElement::Word(w) = g.multiply(&x, &y).unwrap() {
            prop_assert!(w.windows(2).all(|p| p[0] != -p[1]));
        }
    }
}

/// `γ·x` and `x` are told apart by some colored `S`-translate pair.
fn oracle_separated(g: Group, s: &FiniteSubset, gamma: &GroupElement, f: &[Option<u8>]) -> bool {
    let at = |e: &GroupElement| f[g.torus_index(e).unwrap()];
    g.elements().unwrap().iter().all(|x| {
        let y = g.multiply(gamma, x).unwrap();
        s.iter().any(|t| match (at(&g.multiply(t, x).unwrap()), at(&g.multiply(t, &y).unwrap())) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        })
    })
}

#[test]
fn similarity_on_z7_separates_every_shift() {
    let g = Group::torus(1, 7).unwrap();
    let fm = FiniteSubset::from_elements([-1i64, 0, 1].iter().map(|&v| g.vector(&[v]).unwrap()));
    let mut region = vec![Region::ToColor; 7];
    region[0] = Region::Uncolored;
    let mut gated = 0;
    for gamma in 1..7 {
        let inst = SimilarityInstance::new(g, region.clone(), &[None; 7], &fm, &fm, &g.vector(&[gamma]).unwrap()).unwrap();
        let out = run_similarity(&inst, DEFAULT_SIMILARITY_BUDGET).unwrap();
        assert!(out.report.ord <= 2);
        if out.report.gate {
            let f = out.coloring.expect("gate passed");
            assert!(oracle_separated(g, &inst.s_set, &inst.gamma, &f), "gamma={gamma}");
            assert!(out.not_similar.unwrap().holds);
            gated += 1;
        }
    }
    assert!(gated > 0);
}
