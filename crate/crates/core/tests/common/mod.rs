//! Shared helpers for the integration test suites: deterministic random
//! matrices, automata, and lassos, plus small construction shorthands.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use opal::omega::{AcceptanceKind, Lasso, OmegaOpa};
use opal::opa::{Mode, Opa};
use opal::opm::{Opm, Relation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random conflict-free, `≐`-acyclic matrix over `k` single-letter
/// symbols, with every cell filled (so words rarely get stuck).
pub fn random_opm(r: &mut ChaCha8Rng, k: usize) -> Opm {
    let names: Vec<String> = (0..k).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    loop {
        let mut m = Opm::new(&names).unwrap();
        for a in &names {
            for b in &names {
                let rel = match r.gen_range(0..3) {
                    0 => Relation::Yields,
                    1 => Relation::Equals,
                    _ => Relation::Takes,
                };
                m.set(a, b, rel).unwrap();
            }
        }
        for b in &names {
            if r.gen_bool(0.9) {
                m.set_hash(b, Relation::Yields).unwrap();
            }
        }
        if opal::opm::is_eq_acyclic(&m).0 {
            return m;
        }
    }
}

/// A random OPA over `m` with `n` states: every state gets pushes on most
/// symbols and flushes for most state pairs, initial `s0`, a random
/// nonempty set of finals.
pub fn random_opa(r: &mut ChaCha8Rng, m: &Opm, n: usize, mode: Mode) -> Opa {
    let mut a = Opa::new(m.clone(), mode);
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    for s in &names {
        a.add_state(s);
    }
    a.mark_initial("s0").unwrap();
    for s in &names {
        for sym in m.alphabet() {
            if r.gen_bool(0.8) {
                let t = names.choose(r).unwrap();
                a.add_push(s, sym, t).unwrap();
            }
        }
        for below in &names {
            if r.gen_bool(0.8) {
                let t = names.choose(r).unwrap();
                a.add_flush(s, below, t).unwrap();
            }
        }
    }
    let mut any = false;
    for s in &names {
        if r.gen_bool(0.5) {
            a.mark_final(s).unwrap();
            any = true;
        }
    }
    if !any {
        a.mark_final(names.choose(r).unwrap()).unwrap();
    }
    a
}

/// A random final-state Büchi ω-automaton, built like [`random_opa`].
pub fn random_omega(r: &mut ChaCha8Rng, m: &Opm, n: usize) -> OmegaOpa {
    let a = random_opa(r, m, n, Mode::Variant);
    let mut w = OmegaOpa::new(m.clone(), AcceptanceKind::BuchiFinal);
    for s in a.states() {
        w.add_state(s);
    }
    for s in a.states().to_vec() {
        if a.is_initial(&s) {
            w.mark_initial(&s).unwrap();
        }
        if a.is_final(&s) {
            w.mark_final(&s).unwrap();
        }
    }
    copy_transitions(&a, &mut w);
    w
}

fn copy_transitions(a: &Opa, w: &mut OmegaOpa) {
    let v = a.to_json();
    for rule in v["delta_push"].as_array().unwrap() {
        for t in rule["to"].as_array().unwrap() {
            w.add_push(
                rule["from"].as_str().unwrap(),
                rule["symbol"].as_str().unwrap(),
                t.as_str().unwrap(),
            )
            .unwrap();
        }
    }
    for rule in v["delta_flush"].as_array().unwrap() {
        for t in rule["to"].as_array().unwrap() {
            w.add_flush(
                rule["top"].as_str().unwrap(),
                rule["below"].as_str().unwrap(),
                t.as_str().unwrap(),
            )
            .unwrap();
        }
    }
}

/// A random lasso whose unrolling stays matrix-compatible as a prefix for
/// at least `2·(|u|+|v|)` letters; `None` if sampling keeps getting stuck.
pub fn random_lasso(r: &mut ChaCha8Rng, m: &Opm, max_len: usize) -> Option<Lasso> {
    let alphabet = m.alphabet().to_vec();
    'outer: for _ in 0..200 {
        let plen = r.gen_range(0..=max_len);
        let vlen = r.gen_range(1..=max_len);
        let mut letters: Vec<String> = Vec::new();
        for _ in 0..plen + vlen {
            letters.push(alphabet.choose(r).unwrap().clone());
        }
        let l = Lasso::new(&letters[..plen], &letters[plen..]).unwrap();
        let probe = l.unroll(2 * (plen + vlen));
        for end in 1..=probe.len() {
            if !opal::opm::compatible_prefix(m, &probe[..end]).unwrap_or(false) {
                continue 'outer;
            }
        }
        return Some(l);
    }
    None
}

/// Splits a space-separated word.
pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// All words over `m`'s alphabet of length at most `n` that parse as
/// prefixes and close compatibly with the ending `#`.
pub fn compatible_words(m: &Opm, n: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &layer {
            for sym in m.alphabet() {
                let mut cand = w.clone();
                cand.push(sym.clone());
                if opal::opm::compatible_prefix(m, &cand).unwrap() {
                    out.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        layer = next;
    }
    out.retain(|w| opal::opm::compatible_finite(m, w).unwrap());
    out
}
