//! Fixture catalog checks: every fixture validates under its owning module,
//! golden traces replay bit-exact in the rendered format, and every stored
//! verdict is reproduced by the corresponding library operation.

use opal::corpus::{fixture_names, load_fixture};
use opal::omega::{accepts_lasso, trace_prefix, validate_omega, Lasso};
use opal::opa::{accepts_finite, replay_rendered};
use opal::pds::is_empty_omega;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

#[test]
fn catalog_loads_and_validates() {
    for name in fixture_names() {
        let f = load_fixture(name).expect(name);
        assert_eq!(f.name, name);
        match f.kind.as_str() {
            "opa" => {
                let a = f.as_opa().expect(name);
                let report = a.validate();
                assert!(report.conflict_free, "{name}: OPM conflict");
                assert!(report.eq_acyclic, "{name}: eq-cycle");
                assert!(report.unreachable.is_empty(), "{name}: unreachable states");
            }
            "omega" => {
                let a = f.as_omega().expect(name);
                let report = validate_omega(&a);
                assert!(report.conflict_free, "{name}: OPM conflict");
                assert!(report.eq_acyclic, "{name}: eq-cycle");
                assert!(report.unreachable.is_empty(), "{name}: unreachable states");
            }
            "opm" => {
                f.as_opm().expect(name);
            }
            other => panic!("{name}: unexpected kind `{other}`"),
        }
    }
}

#[test]
fn unknown_fixture_is_an_error() {
    assert!(load_fixture("no_such_fixture").is_err());
}

#[test]
fn kind_mismatch_is_an_error() {
    let f = load_fixture("all_calls_opm").unwrap();
    assert!(f.as_opa().is_err());
    assert!(f.as_omega().is_err());
    assert!(f.as_opm().is_ok());
}

/// Golden trace lines replay as legal moves, and for deterministic automata
/// the library's own run reproduces them verbatim.
#[test]
fn golden_traces_replay() {
    for name in fixture_names() {
        let f = load_fixture(name).expect(name);
        let Some(golden) = f.expectations.golden_trace.clone() else {
            continue;
        };
        let w = words(&golden.word);
        match f.kind.as_str() {
            "opa" => {
                let a = f.as_opa().unwrap();
                assert!(
                    replay_rendered(&a, &w, &golden.lines).unwrap(),
                    "{name}: golden trace does not replay"
                );
                if a.is_deterministic() {
                    let (ok, trace) = accepts_finite(&a, &w).unwrap();
                    assert!(ok, "{name}: golden word rejected");
                    let rendered = trace.unwrap().render(&a);
                    let lines: Vec<&str> = rendered.lines().collect();
                    assert_eq!(lines, golden.lines, "{name}: trace mismatch");
                }
            }
            "omega" => {
                let a = f.as_omega().unwrap();
                let skeleton = a.to_opa_skeleton();
                assert!(
                    replay_rendered(&skeleton, &w, &golden.lines).unwrap(),
                    "{name}: golden trace does not replay"
                );
                if a.is_deterministic() {
                    let trace = trace_prefix(&a, &w).unwrap().expect("run exists");
                    let rendered = trace.render(&skeleton);
                    let lines: Vec<&str> = rendered.lines().collect();
                    assert_eq!(lines, golden.lines, "{name}: trace mismatch");
                }
            }
            other => panic!("{name}: golden trace on kind `{other}`"),
        }
    }
}

#[test]
fn membership_verdicts_reproduce() {
    for name in fixture_names() {
        let f = load_fixture(name).expect(name);
        for (word, expected) in &f.expectations.accepts {
            let a = f.as_opa().unwrap();
            let got = accepts_finite(&a, &words(word)).unwrap().0;
            assert_eq!(got, *expected, "{name}: accepts({word:?})");
        }
    }
}

#[test]
fn lasso_verdicts_reproduce() {
    for name in fixture_names() {
        let f = load_fixture(name).expect(name);
        for (lasso, expected) in &f.expectations.lasso_verdicts {
            let a = f.as_omega().unwrap();
            let l = Lasso::parse(lasso).unwrap();
            let got = accepts_lasso(&a, &l).unwrap();
            assert_eq!(got, *expected, "{name}: accepts_lasso({lasso:?})");
        }
    }
}

#[test]
fn emptiness_verdicts_reproduce() {
    for name in fixture_names() {
        let f = load_fixture(name).expect(name);
        let Some(expected) = f.expectations.empty else {
            continue;
        };
        let a = f.as_omega().unwrap();
        let (empty, witness) = is_empty_omega(&a).unwrap();
        assert_eq!(empty, expected, "{name}: emptiness");
        if !empty {
            let l = witness.expect("nonempty verdict carries a witness");
            assert!(
                accepts_lasso(&a, &l).unwrap(),
                "{name}: witness {l} does not replay"
            );
        }
    }
}
