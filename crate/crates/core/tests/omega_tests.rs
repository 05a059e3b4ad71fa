//! ω-word semantics: lassos, the acceptance-condition conversions, and
//! transition completion.

mod common;

use common::{random_lasso, random_omega, rng};
use opal::omega::{
    accepts_lasso, complete_transitions, empty_stack_to_final, is_transition_complete,
    lasso_automaton, muller_to_buchi, to_buchi_final, validate_omega, AcceptanceKind, Lasso,
    OmegaOpa,
};
use opal::opm::{Opm, Relation};

fn omega_fixture(name: &str) -> OmegaOpa {
    opal::corpus::load_fixture(name).unwrap().as_omega().unwrap()
}

fn fixture_verdicts(name: &str) -> Vec<(Lasso, bool)> {
    let f = opal::corpus::load_fixture(name).unwrap();
    f.expectations
        .lasso_verdicts
        .iter()
        .map(|(text, v)| (Lasso::parse(text).unwrap(), *v))
        .collect()
}

/// The all-`⋖` two-letter matrix: every run is an unbounded push sequence,
/// which keeps hand analysis trivial.
fn flat_opm() -> Opm {
    let mut m = Opm::new(&["a", "b"]).unwrap();
    for x in ["a", "b"] {
        for y in ["a", "b"] {
            m.set(x, y, Relation::Yields).unwrap();
        }
        m.set_hash(x, Relation::Yields).unwrap();
    }
    m
}

// ---------------------------------------------------------------------------
// Lassos.

#[test]
fn lasso_parse_round_trips() {
    let l = Lasso::parse("a b ; c").unwrap();
    assert_eq!(l.to_string(), "a b ; c");
    assert_eq!(l.unroll(5), ["a", "b", "c", "c", "c"]);

    let l = Lasso::parse("; b").unwrap();
    assert_eq!(l.to_string(), " ; b");
    assert_eq!(l.unroll(3), ["b", "b", "b"]);

    assert!(Lasso::parse("a ;").is_err(), "the period may not be empty");
    assert!(Lasso::parse("a b c").is_err(), "a lasso needs a `;`");
}

#[test]
fn lasso_automaton_recognizes_exactly_its_word() {
    let m = flat_opm();
    for text in ["; a", "a ; b", "; a b"] {
        let l = Lasso::parse(text).unwrap();
        let a = lasso_automaton(&m, &l).unwrap();
        assert!(accepts_lasso(&a, &l).unwrap(), "{text} accepts itself");
    }
    let a = lasso_automaton(&m, &Lasso::parse("; a b").unwrap()).unwrap();
    for other in ["; a", "; b", "a ; b", "; b a b a"] {
        let other = Lasso::parse(other).unwrap();
        assert!(!accepts_lasso(&a, &other).unwrap(), "rejects {other}");
    }
    // The same ω-word under a different cut is still accepted.
    for same in ["a b ; a b", "a ; b a", "; a b a b"] {
        let same = Lasso::parse(same).unwrap();
        assert!(accepts_lasso(&a, &same).unwrap(), "accepts {same}");
    }
}

// ---------------------------------------------------------------------------
// Acceptance-condition conversions, cross-checked through accepts_lasso on
// hand-computed verdicts.

#[test]
fn empty_stack_to_final_preserves_fixture_verdicts() {
    for name in ["L1_bfae", "bfae_bw", "dyck_bfae", "inf_a_dopbea", "b_omega_dopbea"] {
        let a = omega_fixture(name);
        assert_eq!(a.acceptance().kind(), AcceptanceKind::BuchiEmptyStack);
        let b = empty_stack_to_final(&a).unwrap();
        assert_eq!(b.acceptance().kind(), AcceptanceKind::BuchiFinal);
        for (l, want) in fixture_verdicts(name) {
            assert_eq!(accepts_lasso(&a, &l).unwrap(), want, "{name} source on {l}");
            assert_eq!(accepts_lasso(&b, &l).unwrap(), want, "{name} converted on {l}");
        }
    }
}

/// A deterministic Muller automaton over the flat matrix whose state records
/// the last letter read, so the infinity set is read straight off the word.
fn last_letter_muller(table: &[&[&str]]) -> OmegaOpa {
    let mut a = OmegaOpa::new(flat_opm(), AcceptanceKind::Muller);
    a.add_state("q0");
    a.add_state("qa");
    a.add_state("qb");
    a.mark_initial("q0").unwrap();
    for from in ["q0", "qa", "qb"] {
        a.add_push(from, "a", "qa").unwrap();
        a.add_push(from, "b", "qb").unwrap();
    }
    for set in table {
        a.add_muller_set(set).unwrap();
    }
    a
}

#[test]
fn muller_to_buchi_agrees_with_the_infinity_set() {
    // set {qa}: eventually only a's; set {qa,qb}: both letters forever.
    let cases: &[(&[&[&str]], &[(&str, bool)])] = &[
        (
            &[&["qa"]],
            &[("; a", true), ("b b ; a", true), ("; a b", false), ("; b", false)],
        ),
        (
            &[&["qa", "qb"]],
            &[("; a b", true), ("a ; b a a", true), ("; a", false), ("a b ; b", false)],
        ),
        (
            &[&["qa"], &["qb"]],
            &[("; a", true), ("; b", true), ("; b a", false)],
        ),
    ];
    for (table, verdicts) in cases {
        let a = last_letter_muller(table);
        let b = muller_to_buchi(&a).unwrap();
        assert_eq!(b.acceptance().kind(), AcceptanceKind::BuchiFinal);
        for (text, want) in *verdicts {
            let l = Lasso::parse(text).unwrap();
            assert_eq!(accepts_lasso(&a, &l).unwrap(), *want, "muller {table:?} on {text}");
            assert_eq!(accepts_lasso(&b, &l).unwrap(), *want, "büchi {table:?} on {text}");
        }
    }
}

#[test]
fn to_buchi_final_normalizes_every_kind() {
    for name in ["interrupts", "L1_bfae", "inf_a_dopbea"] {
        let a = omega_fixture(name);
        let b = to_buchi_final(&a).unwrap();
        assert_eq!(b.acceptance().kind(), AcceptanceKind::BuchiFinal);
        for (l, want) in fixture_verdicts(name) {
            assert_eq!(accepts_lasso(&b, &l).unwrap(), want, "{name} on {l}");
        }
    }
    let m = last_letter_muller(&[&["qa"]]);
    let b = to_buchi_final(&m).unwrap();
    assert_eq!(b.acceptance().kind(), AcceptanceKind::BuchiFinal);
    assert!(accepts_lasso(&b, &Lasso::parse("; a").unwrap()).unwrap());
    assert!(!accepts_lasso(&b, &Lasso::parse("; a b").unwrap()).unwrap());
}

// ---------------------------------------------------------------------------
// Transition completion.

#[test]
fn completion_is_total_and_language_preserving() {
    let a = omega_fixture("interrupts_restricted");
    assert!(!is_transition_complete(&a), "int0 pushes were removed");
    let c = complete_transitions(&a);
    assert!(is_transition_complete(&c));
    assert!(c.states().iter().any(|s| s == "sink"));
    for (l, want) in fixture_verdicts("interrupts_restricted") {
        assert_eq!(accepts_lasso(&c, &l).unwrap(), want, "completed on {l}");
    }
}

#[test]
fn completion_preserves_random_verdicts() {
    let mut r = rng(0x03e9);
    for _ in 0..3 {
        let m = common::random_opm(&mut r, 2);
        let a = random_omega(&mut r, &m, 3);
        let c = complete_transitions(&a);
        assert!(is_transition_complete(&c));
        for _ in 0..3 {
            let Some(l) = random_lasso(&mut r, &m, 3) else {
                continue;
            };
            assert_eq!(
                accepts_lasso(&a, &l).unwrap(),
                accepts_lasso(&c, &l).unwrap(),
                "lasso {l}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Validation and serialization.

#[test]
fn kind_mismatched_builders_are_rejected() {
    let mut a = OmegaOpa::new(flat_opm(), AcceptanceKind::BuchiFinal);
    a.add_state("q");
    assert!(a.mark_final("q").is_ok());
    assert!(a.add_muller_set(&["q"]).is_err());

    let mut m = OmegaOpa::new(flat_opm(), AcceptanceKind::Muller);
    m.add_state("q");
    assert!(m.add_muller_set(&["q"]).is_ok());
    assert!(m.mark_final("q").is_err());
}

#[test]
fn validation_flags_unreachable_states() {
    let mut a = OmegaOpa::new(flat_opm(), AcceptanceKind::BuchiFinal);
    a.add_state("q");
    a.add_state("island");
    a.mark_initial("q").unwrap();
    a.mark_final("q").unwrap();
    a.add_push("q", "a", "q").unwrap();
    let report = validate_omega(&a);
    assert!(report
        .unreachable
        .iter()
        .any(|s| s == "island"));
}

#[test]
fn omega_json_round_trip() {
    for name in ["interrupts", "versioning_N2", "L1_bfae"] {
        let a = omega_fixture(name);
        let b = OmegaOpa::from_json(&a.to_json()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        for (l, want) in fixture_verdicts(name) {
            assert_eq!(accepts_lasso(&b, &l).unwrap(), want, "{name} on {l}");
        }
    }
}
