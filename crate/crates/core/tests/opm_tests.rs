//! Matrix-level checks: precedence relations, chains (against a brute-force
//! oracle implementing the recursive definition), word compatibility,
//! factorization, and the matrix algebra.

mod common;

use proptest::prelude::*;

use common::{compatible_words, random_opm, rng, words};
use opal::opm::{
    compatible_finite, compatible_prefix, complete_opm, factorize, is_chain, is_complete,
    is_eq_acyclic, opm_includes, opm_union, relation_of, Factor, Opm, Relation,
};

fn versioning_opm() -> Opm {
    opal::corpus::load_fixture("versioning").unwrap().as_omega().unwrap().opm().clone()
}

fn fact_opm() -> Opm {
    opal::corpus::load_fixture("factorization_example").unwrap().as_opm().unwrap()
}

// ---------------------------------------------------------------------------
// Relations and conflicts

#[test]
fn relations_read_back() {
    let m = versioning_opm();
    assert_eq!(relation_of(&m, "sv", "rb").unwrap(), Some(Relation::Equals));
    assert_eq!(relation_of(&m, "wr", "sv").unwrap(), Some(Relation::Yields));
    assert_eq!(relation_of(&m, "rb", "ud").unwrap(), Some(Relation::Takes));
    assert_eq!(relation_of(&m, "sv", "ud").unwrap(), None);
    assert_eq!(relation_of(&m, "#", "sv").unwrap(), Some(Relation::Yields));
    assert_eq!(relation_of(&m, "#", "rb").unwrap(), None);
}

#[test]
fn conflicting_cell_is_rejected() {
    let mut m = Opm::new(&["a", "b"]).unwrap();
    m.set("a", "b", Relation::Yields).unwrap();
    assert!(m.set("a", "b", Relation::Takes).is_err());
    // Re-setting the same relation is idempotent, not a conflict.
    assert!(m.set("a", "b", Relation::Yields).is_ok());
}

#[test]
fn eq_cycle_is_detected() {
    let mut m = Opm::new(&["a", "b"]).unwrap();
    m.set("a", "b", Relation::Equals).unwrap();
    m.set("b", "a", Relation::Equals).unwrap();
    let (acyclic, witness) = is_eq_acyclic(&m);
    assert!(!acyclic);
    assert!(witness.is_some());
    assert!(is_eq_acyclic(&versioning_opm()).0);
}

// ---------------------------------------------------------------------------
// Chains, against a brute-force oracle from the recursive definition

/// Simple chain: `a0 ⋖ x1 ≐ x2 … ≐ xn ⋗ a1` with the contexts related.
fn simple_chain_oracle(m: &Opm, a0: &str, x: &[String], a1: &str) -> bool {
    if x.is_empty() || relation_of(m, a0, a1).unwrap().is_none() {
        return false;
    }
    if relation_of(m, a0, &x[0]).unwrap() != Some(Relation::Yields) {
        return false;
    }
    for pair in x.windows(2) {
        if relation_of(m, &pair[0], &pair[1]).unwrap() != Some(Relation::Equals) {
            return false;
        }
    }
    relation_of(m, x.last().unwrap(), a1).unwrap() == Some(Relation::Takes)
}

/// Chain (simple or composed): some simple skeleton `a1…an` inside `x`
/// whose gaps are empty or chains themselves, recursively.
fn chain_oracle(m: &Opm, a0: &str, x: &[String], a1: &str) -> bool {
    if simple_chain_oracle(m, a0, x, a1) {
        return true;
    }
    if x.is_empty() || relation_of(m, a0, a1).unwrap().is_none() {
        return false;
    }
    // Choose skeleton positions: every nonempty subset of indices.
    let n = x.len();
    for mask in 1u32..(1 << n) {
        let skeleton: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let letters: Vec<String> = skeleton.iter().map(|&i| x[i].clone()).collect();
        if !simple_chain_oracle(m, a0, &letters, a1) {
            continue;
        }
        // Gap before the first skeleton letter, between letters, and after
        // the last one: each must be empty or a chain in its contexts.
        let mut ok = true;
        let bounds: Vec<(usize, usize, String, String)> = {
            let mut b = Vec::new();
            b.push((0, skeleton[0], a0.to_string(), x[skeleton[0]].clone()));
            for w in skeleton.windows(2) {
                b.push((w[0] + 1, w[1], x[w[0]].clone(), x[w[1]].clone()));
            }
            b.push((skeleton[n.min(skeleton.len()) - 1] + 1, n, x[*skeleton.last().unwrap()].clone(), a1.to_string()));
            b
        };
        for (lo, hi, l, r) in bounds {
            let gap = &x[lo..hi];
            if gap.is_empty() {
                continue;
            }
            if !chain_oracle(m, &l, gap, &r) {
                ok = false;
                break;
            }
        }
        if ok {
            return true;
        }
    }
    false
}

#[test]
fn is_chain_matches_oracle_on_fixture_matrices() {
    for m in [fact_opm(), versioning_opm()] {
        let alphabet = m.alphabet().to_vec();
        let mut contexts: Vec<String> = alphabet.clone();
        contexts.push("#".to_string());
        let mut bodies: Vec<Vec<String>> = vec![Vec::new()];
        for _ in 0..3 {
            let mut next = Vec::new();
            for b in &bodies {
                for s in &alphabet {
                    let mut cand = b.clone();
                    cand.push(s.clone());
                    next.push(cand);
                }
            }
            bodies.extend(next.clone());
            bodies = bodies.into_iter().collect();
            if bodies.iter().map(Vec::len).max() == Some(3) {
                break;
            }
        }
        for a0 in &contexts {
            for a1 in &contexts {
                if a1 == "#" {
                    continue; // chains end at letters or at the final # only
                }
                for x in &bodies {
                    if x.is_empty() {
                        continue;
                    }
                    let got = is_chain(&m, a0, x, a1).unwrap();
                    let want = chain_oracle(&m, a0, x, a1);
                    assert_eq!(got, want, "m-chain ⌈{a0} {x:?} {a1}⌉");
                }
            }
        }
    }
}

#[test]
fn known_chains_from_fixture_matrix() {
    let m = fact_opm();
    assert!(is_chain(&m, "#", &words("a c"), "b").unwrap());
    assert!(is_chain(&m, "b", &words("a"), "d").unwrap());
    assert!(is_chain(&m, "b", &words("d"), "b").unwrap());
    assert!(is_chain(&m, "#", &words("a"), "b").unwrap());
    assert!(is_chain(&m, "b", &words("a d"), "b").unwrap());
    assert!(!is_chain(&m, "#", &words("a c b"), "b").unwrap());
    assert!(!is_chain(&m, "#", &words("a c"), "c").unwrap());
}

// ---------------------------------------------------------------------------
// Compatibility: SymStack scanner vs. the universal automaton's acceptance

#[test]
fn compatibility_agrees_with_universal_automaton() {
    let mut r = rng(11);
    for _ in 0..5 {
        let m = random_opm(&mut r, 3);
        let mut u = opal::opa::Opa::new(m.clone(), opal::opa::Mode::Classical);
        u.add_state("q");
        u.mark_initial("q").unwrap();
        u.mark_final("q").unwrap();
        for s in m.alphabet().to_vec() {
            u.add_push("q", &s, "q").unwrap();
        }
        u.add_flush("q", "q", "q").unwrap();
        let alphabet = m.alphabet().to_vec();
        let mut all = vec![Vec::new()];
        for _ in 0..4 {
            let mut next = Vec::new();
            for w in &all {
                for s in &alphabet {
                    let mut cand: Vec<String> = w.clone();
                    cand.push(s.clone());
                    next.push(cand);
                }
            }
            all.extend(next);
            all.dedup();
        }
        for w in all.iter().filter(|w| w.len() <= 4) {
            let scan = compatible_finite(&m, w).unwrap();
            let run = opal::opa::accepts_finite(&u, w).unwrap().0;
            assert_eq!(scan, run, "word {w:?}");
        }
    }
}

// ---------------------------------------------------------------------------
// Factorization

#[test]
fn factorization_of_worked_example() {
    let m = fact_opm();
    let f = factorize(&m, &words("a c b a d b")).unwrap();
    assert_eq!(
        f.items,
        vec![
            Factor::ChainBody {
                body: words("a c"),
                left_context: "#".to_string()
            },
            Factor::PendingLetter("b".to_string()),
            Factor::ChainBody {
                body: words("a"),
                left_context: "b".to_string()
            },
            Factor::ChainBody {
                body: words("d"),
                left_context: "b".to_string()
            },
            Factor::PendingLetter("b".to_string()),
        ]
    );
    assert_eq!(f.reconcat(), words("a c b a d b"));
}

#[test]
fn factorization_round_trips_on_random_words() {
    let mut r = rng(12);
    for _ in 0..5 {
        let m = random_opm(&mut r, 3);
        for w in compatible_words(&m, 5) {
            if !compatible_prefix(&m, &w).unwrap() {
                continue;
            }
            let f = factorize(&m, &w).unwrap();
            assert_eq!(f.reconcat(), w, "round trip on {w:?}");
            // Each chain body really is a chain over its left context and
            // the letter that follows it in the word.
            let mut pos = 0usize;
            for (i, item) in f.items.iter().enumerate() {
                if let Factor::ChainBody { body, left_context } = item {
                    let next = w.get(pos + body.len());
                    if let Some(next) = next {
                        assert!(
                            is_chain(&m, left_context, body, next).unwrap(),
                            "item {i} of {w:?} is not a chain"
                        );
                    }
                }
                pos += match item {
                    Factor::PendingLetter(_) => 1,
                    Factor::ChainBody { body, .. } => body.len(),
                };
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Matrix algebra

#[test]
fn union_and_inclusion() {
    let m = versioning_opm();
    let u = opm_union(&m, &m).unwrap();
    assert_eq!(u, m);
    assert!(opm_includes(&m, &m));

    let mut m1 = Opm::new(&["a"]).unwrap();
    m1.set("a", "a", Relation::Yields).unwrap();
    let mut m2 = Opm::new(&["a"]).unwrap();
    m2.set("a", "a", Relation::Takes).unwrap();
    assert!(opm_union(&m1, &m2).is_err());

    let mut m3 = Opm::new(&["b"]).unwrap();
    m3.set("b", "b", Relation::Equals).unwrap();
    let u = opm_union(&m1, &m3).unwrap();
    assert!(opm_includes(&m1, &u));
    assert!(opm_includes(&m3, &u));
    assert!(!opm_includes(&u, &m1));
}

#[test]
fn completion_fills_every_cell() {
    let m = versioning_opm();
    assert!(!is_complete(&m));
    let c = complete_opm(&m);
    assert!(is_complete(&c));
    assert!(opm_includes(&m, &c));
    for a in c.alphabet().to_vec() {
        for b in c.alphabet().to_vec() {
            assert!(relation_of(&c, &a, &b).unwrap().is_some());
        }
    }
}

// ---------------------------------------------------------------------------
// Properties

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn serde_round_trip(seed in 0u64..500) {
        let mut r = rng(seed);
        let m = random_opm(&mut r, 3);
        let v = serde_json::to_value(&m).unwrap();
        let back: Opm = serde_json::from_value(v).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn union_is_idempotent_and_monotone(seed in 0u64..500) {
        let mut r = rng(seed);
        let m = random_opm(&mut r, 3);
        let u = opm_union(&m, &m).unwrap();
        prop_assert_eq!(&u, &m);
        let c = complete_opm(&m);
        prop_assert!(opm_includes(&m, &c));
        prop_assert_eq!(opm_union(&c, &m).unwrap(), c);
    }
}
