//! Word automata on ω-words: product, trimming, emptiness, and rank-based
//! complementation, all cross-checked against graph-theoretic oracles.

mod common;

use common::rng;
use opal::nba::{
    build_pseudorun_nba, nba_accepts_lasso, nba_complement, nba_emptiness, nba_product, nba_trim,
    Nba,
};
use opal::omega::{AcceptanceKind, OmegaOpa};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Oracles. A lasso u·v^ω is accepted iff, after reading u, some state s is
// reachable through whole-period blocks and sits on a block cycle that
// passes a final state. Everything is plain boolean graph reachability,
// independent of the library's run search.

fn states_after(n: &Nba, from: &[usize], word: &[usize]) -> Vec<usize> {
    let mut cur: std::collections::BTreeSet<usize> = from.iter().copied().collect();
    for &c in word {
        cur = cur
            .iter()
            .flat_map(|&q| n.successors(q, c))
            .collect();
    }
    cur.into_iter().collect()
}

/// `block[s][t]` = reading the whole period from `s` can end in `t`;
/// the flag records whether some visited state (after each step) is final.
fn period_block(n: &Nba, period: &[usize]) -> Vec<Vec<Option<bool>>> {
    let m = n.states().len();
    let mut block = vec![vec![None; m]; m];
    for s in 0..m {
        // (state, saw-final) pairs reachable from s through the period.
        let mut cur = vec![(s, false)];
        for &c in period {
            let mut next = std::collections::BTreeSet::new();
            for &(q, f) in &cur {
                for t in n.successors(q, c) {
                    next.insert((t, f || n.is_final(t)));
                }
            }
            cur = next.into_iter().collect();
        }
        for (t, f) in cur {
            let cell = &mut block[s][t];
            *cell = Some(cell.unwrap_or(false) || f);
        }
    }
    block
}

fn closure(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let m = adj.len();
    let mut c: Vec<Vec<bool>> = adj.to_vec();
    for k in 0..m {
        for i in 0..m {
            if c[i][k] {
                for j in 0..m {
                    if c[k][j] {
                        c[i][j] = true;
                    }
                }
            }
        }
    }
    c
}

fn oracle_accepts_lasso(n: &Nba, prefix: &[usize], period: &[usize]) -> bool {
    let m = n.states().len();
    let init: Vec<usize> = n.initial_states().collect();
    let start = states_after(n, &init, prefix);
    let block = period_block(n, period);
    let any: Vec<Vec<bool>> = (0..m)
        .map(|s| (0..m).map(|t| block[s][t].is_some()).collect())
        .collect();
    let reach = closure(&any);
    for s in 0..m {
        let s_reachable = start.contains(&s) || start.iter().any(|&q| reach[q][s]);
        if !s_reachable {
            continue;
        }
        // A cycle through `s` using at least one final-visiting block.
        for t in 0..m {
            if !(s == t || reach[s][t]) {
                continue;
            }
            for w in 0..m {
                if block[t][w] == Some(true) && (w == s || reach[w][s]) {
                    return true;
                }
            }
        }
    }
    false
}

fn oracle_nonempty(n: &Nba) -> bool {
    let m = n.states().len();
    let syms = n.alphabet().len();
    let mut adj = vec![vec![false; m]; m];
    for (q, _, t) in n.transitions() {
        adj[q][t] = true;
    }
    let _ = syms;
    let reach = closure(&adj);
    let init: Vec<usize> = n.initial_states().collect();
    (0..m).any(|f| {
        n.is_final(f)
            && (init.contains(&f) || init.iter().any(|&q| reach[q][f]))
            && reach[f][f]
    })
}

// ---------------------------------------------------------------------------
// Generators.

fn random_nba(r: &mut ChaCha8Rng, states: usize, syms: usize) -> Nba {
    let mut n = Nba::new();
    for i in 0..syms {
        n.add_symbol(&format!("s{i}"));
    }
    for i in 0..states {
        n.add_state(&format!("q{i}"));
    }
    n.mark_initial(0);
    for q in 0..states {
        if r.gen_bool(0.4) {
            n.mark_final(q);
        }
        for c in 0..syms {
            for t in 0..states {
                if r.gen_bool(0.35) {
                    n.add_transition(q, c, t);
                }
            }
        }
    }
    n
}

/// Every lasso with prefix length ≤ 2 and period length ≤ 2 over `syms`
/// symbols: 42 of them for a binary alphabet.
fn small_lassos(syms: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut words = vec![vec![]];
    for len in 1..=2 {
        let mut next = Vec::new();
        for w in words.iter().filter(|w: &&Vec<usize>| w.len() == len - 1) {
            for c in 0..syms {
                let mut w = w.clone();
                w.push(c);
                next.push(w);
            }
        }
        words.extend(next);
    }
    let mut out = Vec::new();
    for u in &words {
        for v in words.iter().filter(|v| !v.is_empty()) {
            out.push((u.clone(), v.clone()));
        }
    }
    out
}

// ---------------------------------------------------------------------------

#[test]
fn accepts_lasso_matches_the_graph_oracle() {
    let mut r = rng(0x4ba1);
    for _ in 0..40 {
        let n = random_nba(&mut r, 4, 2);
        for (u, v) in small_lassos(2) {
            assert_eq!(
                nba_accepts_lasso(&n, &u, &v),
                oracle_accepts_lasso(&n, &u, &v),
                "lasso {u:?};{v:?}"
            );
        }
    }
}

#[test]
fn emptiness_matches_the_graph_oracle() {
    let mut r = rng(0x4ba2);
    for _ in 0..60 {
        let n = random_nba(&mut r, 5, 2);
        assert_eq!(!nba_emptiness(&n), oracle_nonempty(&n));
    }
}

#[test]
fn trim_preserves_the_language() {
    let mut r = rng(0x4ba3);
    for _ in 0..20 {
        let n = random_nba(&mut r, 5, 2);
        let t = nba_trim(&n);
        assert!(t.states().len() <= n.states().len());
        for (u, v) in small_lassos(2) {
            assert_eq!(
                nba_accepts_lasso(&t, &u, &v),
                oracle_accepts_lasso(&n, &u, &v),
                "lasso {u:?};{v:?}"
            );
        }
    }
}

#[test]
fn product_accepts_the_intersection() {
    let mut r = rng(0x4ba4);
    for _ in 0..20 {
        let n1 = random_nba(&mut r, 3, 2);
        let n2 = random_nba(&mut r, 3, 2);
        let p = nba_product(&n1, &n2).unwrap();
        for (u, v) in small_lassos(2) {
            assert_eq!(
                nba_accepts_lasso(&p, &u, &v),
                oracle_accepts_lasso(&n1, &u, &v) && oracle_accepts_lasso(&n2, &u, &v),
                "lasso {u:?};{v:?}"
            );
        }
    }
}

#[test]
fn product_requires_matching_alphabets() {
    let mut r = rng(0x4ba5);
    let n1 = random_nba(&mut r, 2, 2);
    let n2 = random_nba(&mut r, 2, 3);
    assert!(nba_product(&n1, &n2).is_err());
}

#[test]
fn complement_flips_every_sampled_verdict() {
    let mut r = rng(0x4ba6);
    for _ in 0..25 {
        let n = random_nba(&mut r, 3, 2);
        let c = nba_complement(&n);
        for (u, v) in small_lassos(2) {
            assert_eq!(
                nba_accepts_lasso(&c, &u, &v),
                !oracle_accepts_lasso(&n, &u, &v),
                "lasso {u:?};{v:?}"
            );
        }
    }
}

#[test]
fn complement_of_universal_and_empty_extremes() {
    // One state, all loops, final: accepts everything.
    let mut n = Nba::new();
    n.add_symbol("a");
    n.add_symbol("b");
    n.add_state("q");
    n.mark_initial(0);
    n.mark_final(0);
    n.add_transition(0, 0, 0);
    n.add_transition(0, 1, 0);
    assert!(nba_emptiness(&nba_complement(&n)));

    // Same structure but no final state: accepts nothing.
    let mut e = Nba::new();
    e.add_symbol("a");
    e.add_symbol("b");
    e.add_state("q");
    e.mark_initial(0);
    e.add_transition(0, 0, 0);
    e.add_transition(0, 1, 0);
    let c = nba_complement(&e);
    for (u, v) in small_lassos(2) {
        assert!(nba_accepts_lasso(&c, &u, &v), "lasso {u:?};{v:?}");
    }
}

// ---------------------------------------------------------------------------
// The pseudorun abstraction: its word automaton is empty exactly when the
// source ω-automaton is.

#[test]
fn pseudorun_nba_reflects_source_emptiness() {
    let a = opal::corpus::load_fixture("interrupts").unwrap().as_omega().unwrap();
    let n = build_pseudorun_nba(&opal::omega::complete_transitions(&a)).unwrap();
    assert!(!nba_emptiness(&n), "interrupts accepts words");

    let mut empty = OmegaOpa::new(a.opm().clone(), AcceptanceKind::BuchiFinal);
    empty.add_state("q");
    empty.mark_initial("q").unwrap();
    for s in a.opm().alphabet().to_vec() {
        empty.add_push("q", &s, "q").unwrap();
    }
    // No final states: the language is empty, and so is the abstraction.
    let n = build_pseudorun_nba(&opal::omega::complete_transitions(&empty)).unwrap();
    assert!(nba_emptiness(&n));
}
