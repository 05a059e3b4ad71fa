use std::time::Instant;
use opal::omega::{complete_transitions, lasso_automaton, to_buchi_final, Lasso};
fn main() {
    let a = opal::corpus::load_fixture("interrupts")
        .unwrap()
        .as_omega()
        .unwrap();
    let comp = opal::closures::complement(&a).unwrap();
    let l = Lasso::parse("call_a ; call_b ret_b").unwrap();
    let t0 = Instant::now();
    let bf = complete_transitions(&to_buchi_final(&comp).unwrap());
    eprintln!("complete: {} states ({:?})", bf.states().len(), t0.elapsed());
    let t0 = Instant::now();
    let single = complete_transitions(&lasso_automaton(bf.opm(), &l).unwrap());
    eprintln!(
        "lasso aut: {} states ({:?})",
        single.states().len(),
        t0.elapsed()
    );
    let t0 = Instant::now();
    let product = opal::closures::intersect(&bf, &single).unwrap();
    eprintln!(
        "product: {} states ({:?})",
        product.states().len(),
        t0.elapsed()
    );
    let t0 = Instant::now();
    let p = opal::pds::opa_to_pds(&product).unwrap();
    eprintln!(
        "pds: {} ctl {} sym {} rules ({:?})",
        p.controls.len(),
        p.symbols.len(),
        p.rules.len(),
        t0.elapsed()
    );
    let t0 = Instant::now();
    let (e, _) = opal::pds::pds_emptiness(&p);
    eprintln!("emptiness labeled: {e} ({:?})", t0.elapsed());
    let t0 = Instant::now();
    let e = opal::pds::is_empty_omega_probe(&product).unwrap();
    eprintln!("emptiness quick: {e} ({:?})", t0.elapsed());
}
