//! Closure constructions on ω-languages, cross-checked through lasso
//! membership: products, unions, concatenation, the pseudorun transducer,
//! complementation, and inclusion.

mod common;

use std::collections::BTreeSet;

use opal::closures::{
    build_pseudorun_transducer, complement, concat, includes, intersect, union,
    union_deterministic, universe, PseudorunSymbol, TripleSet,
};
use opal::omega::{accepts_lasso, complete_transitions, to_buchi_final, Lasso, OmegaOpa};
use opal::opm::{compatible_prefix, Opm};
use opal::pds::is_empty_omega;

fn omega_fixture(name: &str) -> OmegaOpa {
    opal::corpus::load_fixture(name).unwrap().as_omega().unwrap()
}

fn fixture_lassos(name: &str) -> Vec<Lasso> {
    opal::corpus::load_fixture(name)
        .unwrap()
        .expectations
        .lasso_verdicts
        .iter()
        .map(|(t, _)| Lasso::parse(t).unwrap())
        .collect()
}

fn fact_opm() -> Opm {
    opal::corpus::load_fixture("factorization_example").unwrap().as_opm().unwrap()
}

// ---------------------------------------------------------------------------
// Universe.

#[test]
fn universe_accepts_exactly_the_compatible_lassos() {
    let int = omega_fixture("interrupts");
    let u = universe(int.opm());
    for l in fixture_lassos("interrupts") {
        // Every fixture lasso is matrix-compatible, whatever its verdict.
        assert!(accepts_lasso(&u, &l).unwrap(), "{l}");
    }
    assert!(!is_empty_omega(&u).unwrap().0);

    let db = opal::corpus::load_fixture("db_queries").unwrap().as_opa().unwrap();
    let u = universe(db.opm());
    let incompatible = Lasso::parse("; A").unwrap(); // the (A,A) cell is empty
    assert!(!accepts_lasso(&u, &incompatible).unwrap());
}

// ---------------------------------------------------------------------------
// Intersection.

#[test]
fn intersect_with_the_universe_is_the_identity() {
    let a = complete_transitions(&omega_fixture("interrupts"));
    let u = universe(a.opm());
    let p = intersect(&a, &u).unwrap();
    for (text, want) in &opal::corpus::load_fixture("interrupts").unwrap().expectations.lasso_verdicts {
        let l = Lasso::parse(text).unwrap();
        assert_eq!(accepts_lasso(&p, &l).unwrap(), *want, "{text}");
    }
}

#[test]
fn intersect_of_disjoint_languages_is_empty() {
    // Finitely many a's versus infinitely many a's.
    let l1 = complete_transitions(&to_buchi_final(&omega_fixture("L1_bfae")).unwrap());
    let inf_a = complete_transitions(&to_buchi_final(&omega_fixture("inf_a_dopbea")).unwrap());
    let p = intersect(&l1, &inf_a).unwrap();
    let (empty, witness) = is_empty_omega(&p).unwrap();
    assert!(empty, "spurious witness: {witness:?}");
}

#[test]
fn intersect_preserves_determinism() {
    let a = complete_transitions(&omega_fixture("interrupts"));
    let b = complete_transitions(&omega_fixture("interrupts_restricted"));
    assert!(a.is_deterministic() && b.is_deterministic());
    let p = intersect(&a, &b).unwrap();
    assert!(p.is_deterministic());
    // Restriction: the intersection is the restricted language.
    for (text, want) in &opal::corpus::load_fixture("interrupts_restricted").unwrap().expectations.lasso_verdicts {
        let l = Lasso::parse(text).unwrap();
        assert_eq!(accepts_lasso(&p, &l).unwrap(), *want, "{text}");
    }
}

// ---------------------------------------------------------------------------
// Union.

#[test]
fn union_accepts_either_operand() {
    let a = omega_fixture("interrupts");
    let b = omega_fixture("interrupts_restricted");
    let u = union(&a, &b).unwrap();
    let mut lassos = fixture_lassos("interrupts");
    lassos.extend(fixture_lassos("interrupts_restricted"));
    for l in lassos {
        let want = accepts_lasso(&a, &l).unwrap() || accepts_lasso(&b, &l).unwrap();
        assert_eq!(accepts_lasso(&u, &l).unwrap(), want, "{l}");
    }
}

#[test]
fn deterministic_union_agrees_and_stays_deterministic() {
    let a = complete_transitions(&omega_fixture("interrupts"));
    let b = complete_transitions(&omega_fixture("interrupts_restricted"));
    let d = union_deterministic(&a, &b).unwrap();
    assert!(d.is_deterministic());
    let n = union(&a, &b).unwrap();
    let mut lassos = fixture_lassos("interrupts");
    lassos.extend(fixture_lassos("interrupts_restricted"));
    for l in lassos {
        assert_eq!(
            accepts_lasso(&d, &l).unwrap(),
            accepts_lasso(&n, &l).unwrap(),
            "{l}"
        );
    }
}

// ---------------------------------------------------------------------------
// Concatenation.

#[test]
fn concat_of_a_plus_with_the_dyck_omega_language() {
    let afin = opal::corpus::load_fixture("a_plus_opa").unwrap().as_opa().unwrap();
    let aomega = to_buchi_final(&omega_fixture("dyck_bfae")).unwrap();
    let c = concat(&afin, &aomega).unwrap();
    for (text, want) in [
        ("a a ; a b", true),
        ("a ; a b", true),
        ("; b a", false),
        ("; a b", false), // no a⁺ prefix can be split off a word starting a b a b …
    ] {
        let l = Lasso::parse(text).unwrap();
        assert_eq!(accepts_lasso(&c, &l).unwrap(), want, "{text}");
    }
}

#[test]
fn concat_respects_the_state_budget() {
    let afin = opal::corpus::load_fixture("a_plus_opa").unwrap().as_opa().unwrap();
    let aomega = to_buchi_final(&omega_fixture("dyck_bfae")).unwrap();
    let c = concat(&afin, &aomega).unwrap();
    let q1 = opal::opa::classical_to_variant(&afin).unwrap().states().len();
    let sigma = c.opm().alphabet().len();
    let q2 = aomega.states().len();
    let bound = q1 + (sigma + 1) * q2 * (q2 + 1);
    assert!(
        c.states().len() <= bound,
        "{} states exceeds the budget {bound}",
        c.states().len()
    );
}

// ---------------------------------------------------------------------------
// The pseudorun transducer.

fn output_shapes(out: &BTreeSet<Vec<PseudorunSymbol>>) -> Vec<Vec<PseudorunSymbol>> {
    let mut v: Vec<_> = out.iter().cloned().collect();
    v.sort_by_key(|o| o.len());
    v
}

#[test]
fn transducer_reproduces_the_worked_factorization() {
    // The universe is transition-complete by construction.
    let u = universe(&fact_opm());
    let t = build_pseudorun_transducer(&u).unwrap();
    let outs = t.transduce_prefix(&["a", "c", "b", "a", "d", "b"]).unwrap();
    let longest = output_shapes(&outs).pop().expect("some run consumes the prefix");
    // One chain summary per chain body, pending letters in between: the
    // word factorizes as [a c] b [a] [d] b.
    let single = TripleSet(BTreeSet::from([(0, 0, true)]));
    let b = u.opm().sym("b").unwrap();
    assert_eq!(
        longest,
        vec![
            PseudorunSymbol::Chain(single.clone()),
            PseudorunSymbol::Letter(b),
            PseudorunSymbol::Chain(single.clone()),
            PseudorunSymbol::Chain(single),
            PseudorunSymbol::Letter(b),
        ]
    );
    // Shorter outputs are lagging runs, never conflicting ones.
    for o in outs {
        assert!(longest.starts_with(&o), "{o:?}");
    }
}

#[test]
fn transducer_outputs_are_unique_on_random_prefixes() {
    let m = fact_opm();
    let u = universe(&m);
    let t = build_pseudorun_transducer(&u).unwrap();
    // All matrix-compatible prefixes up to length 5.
    let mut prefixes = vec![Vec::<String>::new()];
    let mut checked = 0;
    let mut i = 0;
    while i < prefixes.len() {
        let base = prefixes[i].clone();
        i += 1;
        if base.len() == 5 {
            continue;
        }
        for c in m.alphabet().to_vec() {
            let mut w = base.clone();
            w.push(c);
            if compatible_prefix(&m, &w).unwrap() {
                prefixes.push(w);
            }
        }
    }
    for w in prefixes.iter().filter(|w| !w.is_empty()) {
        let outs = t.transduce_prefix(w).unwrap();
        let shapes = output_shapes(&outs);
        if let Some(longest) = shapes.last() {
            for o in &shapes {
                assert!(longest.starts_with(o), "conflicting outputs on {w:?}");
            }
            checked += 1;
        }
    }
    assert!(checked >= 50, "only {checked} prefixes had runs");
}

// ---------------------------------------------------------------------------
// Complementation.

#[test]
fn complement_of_the_universe_is_empty() {
    let u = omega_fixture("universe_int");
    let c = complement(&u).unwrap();
    let (empty, witness) = is_empty_omega(&c).unwrap();
    assert!(empty, "spurious witness: {witness:?}");
}

#[test]
fn complement_flips_membership_for_finitely_many_a() {
    let l1 = to_buchi_final(&omega_fixture("L1_bfae")).unwrap();
    let c = complement(&l1).unwrap();
    for (text, in_l1) in [("a ; b", true), ("; b", true), ("; a b", false)] {
        let l = Lasso::parse(text).unwrap();
        assert_eq!(accepts_lasso(&l1, &l).unwrap(), in_l1, "source on {text}");
        assert_eq!(accepts_lasso(&c, &l).unwrap(), !in_l1, "complement on {text}");
    }
}

// ---------------------------------------------------------------------------
// Inclusion.

#[test]
fn inclusion_holds_one_way_with_a_counterexample_back() {
    let spec = omega_fixture("interrupts");
    let imp = omega_fixture("interrupts_restricted");
    let (ok, cex) = includes(&spec, &imp).unwrap();
    assert!(ok, "restricting transitions shrinks the language, got {cex:?}");

    let (ok, cex) = includes(&imp, &spec).unwrap();
    assert!(!ok);
    let cex = cex.expect("failed inclusions carry a counterexample");
    assert!(accepts_lasso(&spec, &cex).unwrap(), "cex {cex} is in the big language");
    assert!(!accepts_lasso(&imp, &cex).unwrap(), "cex {cex} escapes the small one");
}
