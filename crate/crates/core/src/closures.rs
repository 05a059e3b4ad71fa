//! Closure constructions on ω-languages: intersection, union, concatenation
//! with a finite-word language, complementation via pseudoruns, the universe
//! automaton, and language inclusion.
//!
//! Complementation rewrites the input word into its *pseudorun*: the unique
//! factorization into pending letters and maximal chains, with each chain
//! body replaced by the set of state triples its semisupports realize. A
//! stack transducer produces the pseudorun online; a finite-state automaton
//! over the pseudorun alphabet captures the original language on
//! pseudoruns, so its complement — taken with finite-state machinery —
//! yields the complement language when composed with the transducer.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::nba::{build_pseudorun_nba, nba_complement, nba_trim, Nba};
use crate::omega::{
    complete_transitions, is_transition_complete, to_buchi_final, Acceptance, Lasso, OmegaOpa,
};
use crate::opa::{classical_to_variant, Core, Mode, Opa};
use crate::opm::{complete_opm, opm_union, LeftSym, Opm, Relation};
use crate::reach::{self, Implicit};
use crate::{Error, Result};

/// The semisupport summary of a chain body: all `(start, end, f)` with a
/// semisupport from `start` to `end`, `f` set iff some semisupport state is
/// accepting. Canonically ordered, so equal sets compare equal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TripleSet(pub BTreeSet<(usize, usize, bool)>);

impl TripleSet {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A symbol of the pseudorun alphabet: a pending letter or a chain summary.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PseudorunSymbol {
    Letter(usize),
    Chain(TripleSet),
}

impl PseudorunSymbol {
    /// A canonical textual encoding, used to intern set-valued symbols.
    pub fn encode(&self, a: &OmegaOpa) -> String {
        match self {
            PseudorunSymbol::Letter(i) => a.opm().name(*i).to_string(),
            PseudorunSymbol::Chain(set) => {
                let body: Vec<String> = set
                    .0
                    .iter()
                    .map(|&(q, p, f)| {
                        format!("{}>{}{}", a.states()[q], a.states()[p], if f { "!" } else { "" })
                    })
                    .collect();
                format!("T[{}]", body.join(";"))
            }
        }
    }
}

/// The guess component of a transducer state: the next letter is pending
/// (`Z`), opens a chain of the factorization (`Bot`), or sits inside one
/// (`Chain`, carrying the semisupport summary built so far).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum TKind {
    Z,
    Bot,
    Chain(TripleSet),
}

pub(crate) type TSt = (LeftSym, TKind);

/// The pseudorun transducer: a stack automaton over the source OPM whose
/// states pair a lookback symbol with a guess component. It emits pending
/// letters on `Z`-pushes and chain summaries on factorization-ending
/// flushes; every accepting run on a word emits the same output.
#[derive(Clone, Debug)]
pub struct PseudorunTransducer {
    pub(crate) opm: Opm,
    pub(crate) states: Vec<TSt>,
    pub(crate) initials: Vec<usize>,
    pub(crate) finals: BTreeSet<usize>,
    /// `(from, symbol, to, output)`.
    pub(crate) push_edges: Vec<(usize, usize, usize, Option<PseudorunSymbol>)>,
    /// `(top, below, to, output)`.
    pub(crate) flush_edges: Vec<(usize, usize, usize, Option<PseudorunSymbol>)>,
}

impl PseudorunTransducer {
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub(crate) fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    /// All chain summaries the transducer can emit from a reachable
    /// configuration.
    pub fn chain_symbols(&self) -> BTreeSet<TripleSet> {
        self.flush_edges
            .iter()
            .filter_map(|(_, _, _, out)| match out {
                Some(PseudorunSymbol::Chain(t)) => Some(t.clone()),
                _ => None,
            })
            .collect()
    }

    /// All outputs produced by runs that consume the whole prefix. Distinct
    /// runs may stop at different output lengths, but every member is a
    /// prefix of the longest.
    pub fn transduce_prefix(&self, w: &[impl AsRef<str>]) -> Result<BTreeSet<Vec<PseudorunSymbol>>> {
        let word = self
            .opm
            .word(&w.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>())?;
        let mut push_map: BTreeMap<(usize, usize), Vec<(usize, Option<PseudorunSymbol>)>> =
            BTreeMap::new();
        for (from, sym, to, out) in &self.push_edges {
            push_map.entry((*from, *sym)).or_default().push((*to, out.clone()));
        }
        let mut flush_map: BTreeMap<(usize, usize), Vec<(usize, Option<PseudorunSymbol>)>> =
            BTreeMap::new();
        for (top, below, to, out) in &self.flush_edges {
            flush_map.entry((*top, *below)).or_default().push((*to, out.clone()));
        }
        // A configuration: current state, stack (bottom entry holds the
        // initial state), input position, emitted output.
        type Cfg = (usize, Vec<(LeftSym, bool, usize)>, usize, Vec<PseudorunSymbol>);
        let mut outputs = BTreeSet::new();
        let mut seen: BTreeSet<Cfg> = BTreeSet::new();
        let mut queue: VecDeque<Cfg> = VecDeque::new();
        for &q in &self.initials {
            let cfg: Cfg = (q, vec![(None, false, q)], 0, Vec::new());
            if seen.insert(cfg.clone()) {
                queue.push_back(cfg);
            }
        }
        while let Some((q, stack, pos, out)) = queue.pop_front() {
            if pos == word.len() {
                outputs.insert(out);
                continue;
            }
            let b = word[pos];
            let exposed = stack.last().expect("the bottom entry is never popped").0;
            match self.opm.rel(exposed, b) {
                Some(rel @ (Relation::Yields | Relation::Equals)) => {
                    for (to, emit) in push_map.get(&(q, b)).into_iter().flatten() {
                        let mut stack2 = stack.clone();
                        stack2.push((Some(b), rel == Relation::Yields, *to));
                        let mut out2 = out.clone();
                        out2.extend(emit.clone());
                        let cfg: Cfg = (*to, stack2, pos + 1, out2);
                        if seen.insert(cfg.clone()) {
                            queue.push_back(cfg);
                        }
                    }
                }
                Some(Relation::Takes) => {
                    let Some(mark) = stack.iter().rposition(|e| e.1) else {
                        continue;
                    };
                    let below = stack[mark - 1].2;
                    for (to, emit) in flush_map.get(&(q, below)).into_iter().flatten() {
                        let mut stack2 = stack[..mark].to_vec();
                        stack2.last_mut().expect("bottom remains").2 = *to;
                        let mut out2 = out.clone();
                        out2.extend(emit.clone());
                        let cfg: Cfg = (*to, stack2, pos, out2);
                        if seen.insert(cfg.clone()) {
                            queue.push_back(cfg);
                        }
                    }
                }
                None => {}
            }
        }
        Ok(outputs)
    }
}

/// The triple set opened by a mark on `b`: all one-push semisupports.
fn open_chain(core: &Core, finals: &BTreeSet<usize>, b: usize) -> TripleSet {
    let mut set = BTreeSet::new();
    for q in 0..core.states.len() {
        for p in core.push_targets(q, b) {
            set.insert((q, p, finals.contains(&p)));
        }
    }
    TripleSet(set)
}

/// Extends a triple set over a push inside a chain: on `⋖` the tracked
/// start moves to the pre-mark state, on `≐` it stays.
fn extend_chain(
    core: &Core,
    finals: &BTreeSet<usize>,
    t: &TripleSet,
    rel: Relation,
    b: usize,
) -> TripleSet {
    let mut set = BTreeSet::new();
    for &(r, q, xi) in &t.0 {
        for p in core.push_targets(q, b) {
            let start = if rel == Relation::Yields { q } else { r };
            set.insert((start, p, finals.contains(&p) || xi));
        }
    }
    TripleSet(set)
}

/// Closes a triple set by its chain-ending flush.
fn close_chain(core: &Core, finals: &BTreeSet<usize>, t: &TripleSet) -> TripleSet {
    let mut set = BTreeSet::new();
    for &(r, q, xi) in &t.0 {
        for p in core.flush_targets(q, r) {
            set.insert((r, p, finals.contains(&p) || xi));
        }
    }
    TripleSet(set)
}

/// Composes a flushed triple set with the saved set below it.
fn merge_chain(
    core: &Core,
    finals: &BTreeSet<usize>,
    t: &TripleSet,
    s: &TripleSet,
) -> TripleSet {
    let mut set = BTreeSet::new();
    for &(r, q, xi) in &t.0 {
        for &(start, r2, _) in &s.0 {
            if r2 != r {
                continue;
            }
            for p in core.flush_targets(q, r) {
                set.insert((start, p, finals.contains(&p) || xi));
            }
        }
    }
    TripleSet(set)
}

struct TransducerRules<'a> {
    core: &'a Core,
    finals: &'a BTreeSet<usize>,
}

impl Implicit for TransducerRules<'_> {
    type St = TSt;

    fn opm(&self) -> &Opm {
        &self.core.opm
    }

    fn initials(&self) -> Vec<TSt> {
        vec![(None, TKind::Bot), (None, TKind::Z)]
    }

    fn push(&self, q: &TSt, sym: usize) -> Vec<TSt> {
        let (a, kind) = q;
        let Some(rel) = self.core.opm.rel(*a, sym) else {
            return Vec::new();
        };
        if rel == Relation::Takes {
            return Vec::new();
        }
        match kind {
            TKind::Z => vec![(Some(sym), TKind::Bot), (Some(sym), TKind::Z)],
            TKind::Bot => {
                if rel != Relation::Yields {
                    return Vec::new();
                }
                let t = open_chain(self.core, self.finals, sym);
                if t.is_empty() {
                    Vec::new()
                } else {
                    vec![(Some(sym), TKind::Chain(t))]
                }
            }
            TKind::Chain(t) => {
                let s = extend_chain(self.core, self.finals, t, rel, sym);
                if s.is_empty() {
                    Vec::new()
                } else {
                    vec![(Some(sym), TKind::Chain(s))]
                }
            }
        }
    }

    fn flush(&self, top: &TSt, below: &TSt) -> Vec<TSt> {
        let TKind::Chain(t) = &top.1 else {
            return Vec::new();
        };
        match &below.1 {
            TKind::Bot => {
                let r = close_chain(self.core, self.finals, t);
                if r.is_empty() {
                    Vec::new()
                } else {
                    vec![(below.0, TKind::Bot), (below.0, TKind::Z)]
                }
            }
            TKind::Chain(s) => {
                let r = merge_chain(self.core, self.finals, t, s);
                if r.is_empty() {
                    Vec::new()
                } else {
                    vec![(below.0, TKind::Chain(r))]
                }
            }
            TKind::Z => Vec::new(),
        }
    }
}

/// Builds the pseudorun transducer for a transition-complete Büchi
/// final-state automaton.
pub fn build_pseudorun_transducer(a: &OmegaOpa) -> Result<PseudorunTransducer> {
    let Acceptance::BuchiFinal(finals) = a.acceptance() else {
        return Err(Error::Precondition(
            "the pseudorun transducer requires Büchi final-state acceptance".into(),
        ));
    };
    if !is_transition_complete(a) {
        return Err(Error::Precondition(
            "the pseudorun transducer requires transition-complete input; apply complete_transitions first"
                .into(),
        ));
    }
    let rules = TransducerRules {
        core: &a.core,
        finals,
    };
    let mat = reach::materialize(&rules);
    let states = mat.states;
    let t_finals: BTreeSet<usize> = states
        .iter()
        .enumerate()
        .filter(|(_, st)| matches!(st.1, TKind::Z | TKind::Bot))
        .map(|(i, _)| i)
        .collect();
    let push_edges = mat
        .push_edges
        .iter()
        .map(|&(from, sym, to)| {
            let out = match states[from].1 {
                TKind::Z => Some(PseudorunSymbol::Letter(sym)),
                _ => None,
            };
            (from, sym, to, out)
        })
        .collect();
    let flush_edges = mat
        .flush_edges
        .iter()
        .map(|&(top, below, to)| {
            let out = match (&states[top].1, &states[below].1) {
                (TKind::Chain(t), TKind::Bot) => Some(PseudorunSymbol::Chain(close_chain(
                    &a.core, finals, t,
                ))),
                _ => None,
            };
            (top, below, to, out)
        })
        .collect();
    Ok(PseudorunTransducer {
        opm: a.opm().clone(),
        states,
        initials: mat.initials,
        finals: t_finals,
        push_edges,
        flush_edges,
    })
}

/// Re-bases a core on a larger (or reordered) matrix, mapping symbols by
/// name.
fn transplant(core: &Core, m: &Opm) -> Result<Core> {
    let mut out = Core::new(m.clone());
    for s in &core.states {
        out.add_state(s);
    }
    out.initial = core.initial.clone();
    let map: Vec<usize> = core
        .opm
        .alphabet()
        .iter()
        .map(|n| m.sym_checked(n))
        .collect::<Result<_>>()?;
    for (&(q, s), tos) in &core.push {
        for &t in tos {
            out.add_push_idx(q, map[s], t);
        }
    }
    for (&(q, p), tos) in &core.flush {
        for &t in tos {
            out.add_flush_idx(q, p, t);
        }
    }
    Ok(out)
}

fn rebase(a: &OmegaOpa, m: &Opm) -> Result<OmegaOpa> {
    Ok(OmegaOpa {
        core: transplant(&a.core, m)?,
        acceptance: a.acceptance.clone(),
    })
}

fn buchi_finals(a: &OmegaOpa) -> &BTreeSet<usize> {
    match a.acceptance() {
        Acceptance::BuchiFinal(f) => f,
        _ => unreachable!("normalized to Büchi final-state form"),
    }
}

/// The one-state automaton accepting every ω-word compatible with `m`.
pub fn universe(m: &Opm) -> OmegaOpa {
    let mut core = Core::new(m.clone());
    let q = core.add_state("q");
    core.initial.insert(q);
    for s in 0..m.len() {
        core.add_push_idx(q, s, q);
    }
    core.add_flush_idx(q, q, q);
    OmegaOpa {
        core,
        acceptance: Acceptance::BuchiFinal(BTreeSet::from([q])),
    }
}

/// Normalizes to Büchi final-state form over `m` and completes transitions.
fn normalize(a: &OmegaOpa, m: &Opm) -> Result<OmegaOpa> {
    let bf = to_buchi_final(a)?;
    let rb = rebase(&bf, m)?;
    Ok(if is_transition_complete(&rb) {
        rb
    } else {
        complete_transitions(&rb)
    })
}

/// Intersection: the two-flag product over the union matrix. Both inputs
/// are normalized to complete Büchi final-state automata first; the product
/// is deterministic whenever both inputs are.
pub fn intersect(a: &OmegaOpa, b: &OmegaOpa) -> Result<OmegaOpa> {
    let m = opm_union(a.opm(), b.opm())?;
    let a = normalize(a, &m)?;
    let b = normalize(b, &m)?;

    struct ProductRules<'x> {
        m: &'x Opm,
        c1: &'x Core,
        c2: &'x Core,
        f1: &'x BTreeSet<usize>,
        f2: &'x BTreeSet<usize>,
    }

    impl ProductRules<'_> {
        fn next_flag(&self, q1: usize, q2: usize, flag: usize) -> usize {
            match flag {
                1 if self.f1.contains(&q1) => 2,
                2 if self.f2.contains(&q2) => 1,
                f => f,
            }
        }
    }

    impl Implicit for ProductRules<'_> {
        type St = (usize, usize, usize);

        fn opm(&self) -> &Opm {
            self.m
        }

        fn initials(&self) -> Vec<Self::St> {
            let mut out = Vec::new();
            for &i1 in &self.c1.initial {
                for &i2 in &self.c2.initial {
                    out.push((i1, i2, 1));
                }
            }
            out
        }

        fn push(&self, q: &Self::St, sym: usize) -> Vec<Self::St> {
            let &(q1, q2, flag) = q;
            let j = self.next_flag(q1, q2, flag);
            let mut out = Vec::new();
            for t1 in self.c1.push_targets(q1, sym) {
                for t2 in self.c2.push_targets(q2, sym) {
                    out.push((t1, t2, j));
                }
            }
            out
        }

        fn flush(&self, top: &Self::St, below: &Self::St) -> Vec<Self::St> {
            let &(t1, t2, flag) = top;
            let &(b1, b2, _) = below;
            let j = self.next_flag(t1, t2, flag);
            let mut out = Vec::new();
            for r1 in self.c1.flush_targets(t1, b1) {
                for r2 in self.c2.flush_targets(t2, b2) {
                    out.push((r1, r2, j));
                }
            }
            out
        }
    }

    let f1 = buchi_finals(&a);
    let f2 = buchi_finals(&b);
    let rules = ProductRules { m: &m, c1: &a.core, c2: &b.core, f1, f2 };
    let mat = reach::materialize(&rules);
    let mut core = Core::new(m.clone());
    let mut finals = BTreeSet::new();
    for &(q1, q2, flag) in &mat.states {
        let i = core.add_state(&format!(
            "{}|{}|{}",
            a.core.states[q1], b.core.states[q2], flag
        ));
        if flag == 1 && f1.contains(&q1) {
            finals.insert(i);
        }
    }
    for &i in &mat.initials {
        core.initial.insert(i);
    }
    for &(q, s, r) in &mat.push_edges {
        core.add_push_idx(q, s, r);
    }
    for &(top, below, r) in &mat.flush_edges {
        core.add_flush_idx(top, below, r);
    }
    Ok(OmegaOpa {
        core,
        acceptance: Acceptance::BuchiFinal(finals),
    })
}

/// Union by disjoint state union over the union matrix.
pub fn union(a: &OmegaOpa, b: &OmegaOpa) -> Result<OmegaOpa> {
    let m = opm_union(a.opm(), b.opm())?;
    let a = rebase(&to_buchi_final(a)?, &m)?;
    let b = rebase(&to_buchi_final(b)?, &m)?;
    let mut core = Core::new(m.clone());
    let mut finals = BTreeSet::new();
    for (prefix, part) in [("1:", &a), ("2:", &b)] {
        let offset = core.states.len();
        for s in &part.core.states {
            core.add_state(&format!("{prefix}{s}"));
        }
        for &q in &part.core.initial {
            core.initial.insert(offset + q);
        }
        for &q in buchi_finals(part) {
            finals.insert(offset + q);
        }
        for (&(q, s), tos) in &part.core.push {
            for &t in tos {
                core.add_push_idx(offset + q, s, offset + t);
            }
        }
        for (&(q, p), tos) in &part.core.flush {
            for &t in tos {
                core.add_flush_idx(offset + q, offset + p, offset + t);
            }
        }
    }
    Ok(OmegaOpa {
        core,
        acceptance: Acceptance::BuchiFinal(finals),
    })
}

/// Union by the deterministic product route: requires both inputs to be
/// deterministic (they are completed over the union matrix first, which
/// preserves determinism).
pub fn union_deterministic(a: &OmegaOpa, b: &OmegaOpa) -> Result<OmegaOpa> {
    let m = opm_union(a.opm(), b.opm())?;
    let a = normalize(a, &m)?;
    let b = normalize(b, &m)?;
    if !a.is_deterministic() || !b.is_deterministic() {
        return Err(Error::Precondition(
            "the product route for union requires deterministic automata".into(),
        ));
    }
    let (c1, f1) = (&a.core, buchi_finals(&a));
    let (c2, f2) = (&b.core, buchi_finals(&b));
    let n2 = c2.states.len();
    let mut core = Core::new(m.clone());
    let mut finals = BTreeSet::new();
    for q1 in 0..c1.states.len() {
        for q2 in 0..n2 {
            core.add_state(&format!("{}|{}", c1.states[q1], c2.states[q2]));
        }
    }
    let idx = |q1: usize, q2: usize| q1 * n2 + q2;
    for &i1 in &c1.initial {
        for &i2 in &c2.initial {
            core.initial.insert(idx(i1, i2));
        }
    }
    for q1 in 0..c1.states.len() {
        for q2 in 0..n2 {
            if f1.contains(&q1) || f2.contains(&q2) {
                finals.insert(idx(q1, q2));
            }
        }
    }
    for (&(q1, s), t1s) in &c1.push {
        for (&(q2, s2), t2s) in &c2.push {
            if s2 != s {
                continue;
            }
            for &t1 in t1s {
                for &t2 in t2s {
                    core.add_push_idx(idx(q1, q2), s, idx(t1, t2));
                }
            }
        }
    }
    for (&(t1, b1), r1s) in &c1.flush {
        for (&(t2, b2), r2s) in &c2.flush {
            for &r1 in r1s {
                for &r2 in r2s {
                    core.add_flush_idx(idx(t1, t2), idx(b1, b2), idx(r1, r2));
                }
            }
        }
    }
    Ok(OmegaOpa {
        core,
        acceptance: Acceptance::BuchiFinal(finals),
    })
}

/// A concatenation-product state: the finite-word phase (variant-form
/// states) or the ω-phase `⟨lookback, state, resume⟩`, where `resume` is
/// the ω-automaton state exposed below the last mark — `None` while the
/// whole ω-stack is still empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum CatSt {
    Fin(usize),
    Inf(LeftSym, usize, Option<usize>),
}

struct ConcatRules<'a> {
    m: &'a Opm,
    fin: &'a Core,
    fin_finals: &'a BTreeSet<usize>,
    fin_eps: bool,
    inf: &'a Core,
}

impl Implicit for ConcatRules<'_> {
    type St = CatSt;

    fn opm(&self) -> &Opm {
        self.m
    }

    fn initials(&self) -> Vec<CatSt> {
        let mut out: Vec<CatSt> = self.fin.initial.iter().map(|&q| CatSt::Fin(q)).collect();
        if self.fin_eps {
            out.extend(self.inf.initial.iter().map(|&p| CatSt::Inf(None, p, None)));
        }
        out
    }

    fn push(&self, q: &CatSt, sym: usize) -> Vec<CatSt> {
        match q {
            CatSt::Fin(q1) => {
                let targets: Vec<usize> = self.fin.push_targets(*q1, sym).collect();
                let mut out: Vec<CatSt> = targets.iter().map(|&t| CatSt::Fin(t)).collect();
                if targets.iter().any(|t| self.fin_finals.contains(t)) {
                    out.extend(self.inf.initial.iter().map(|&p| CatSt::Inf(None, p, None)));
                }
                out
            }
            CatSt::Inf(a, p, r) => match self.m.rel(*a, sym) {
                Some(Relation::Yields) => self
                    .inf
                    .push_targets(*p, sym)
                    .map(|t| CatSt::Inf(Some(sym), t, Some(*p)))
                    .collect(),
                Some(Relation::Equals) => self
                    .inf
                    .push_targets(*p, sym)
                    .map(|t| CatSt::Inf(Some(sym), t, *r))
                    .collect(),
                _ => Vec::new(),
            },
        }
    }

    fn flush(&self, top: &CatSt, below: &CatSt) -> Vec<CatSt> {
        match (top, below) {
            (CatSt::Fin(q1), CatSt::Fin(p1)) => self
                .fin
                .flush_targets(*q1, *p1)
                .map(CatSt::Fin)
                .collect(),
            (CatSt::Inf(None, p, None), CatSt::Fin(_)) => vec![CatSt::Inf(None, *p, None)],
            (CatSt::Inf(Some(_), p1, Some(r1)), CatSt::Inf(a2, p2, r2)) => {
                if r1 != p2 {
                    return Vec::new();
                }
                self.inf
                    .flush_targets(*p1, *p2)
                    .map(|t| CatSt::Inf(*a2, t, *r2))
                    .collect()
            }
            (CatSt::Inf(Some(_), p, Some(r)), CatSt::Fin(_)) => self
                .inf
                .flush_targets(*p, *r)
                .map(|t| CatSt::Inf(None, t, None))
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Concatenation of a finite-word language with an ω-language: the
/// finite-word automaton is converted to variant form (final exactly when
/// the prefix read so far is in the language), and the ω-automaton's states
/// are extended with a lookback and a resume component so flushes reaching
/// into the prefix's stack can restore the ω-run.
pub fn concat(afin: &Opa, aomega: &OmegaOpa) -> Result<OmegaOpa> {
    if afin.mode() != Mode::Classical {
        return Err(Error::Precondition(
            "concatenation takes the finite-word automaton in classical mode".into(),
        ));
    }
    let variant = classical_to_variant(afin)?;
    let bf = to_buchi_final(aomega)?;
    let m = complete_opm(&opm_union(afin.opm(), bf.opm())?);
    let vcore = transplant(&variant.core, &m)?;
    let icore = transplant(&bf.core, &m)?;
    let fin_eps = variant
        .core
        .initial
        .iter()
        .any(|q| variant.finals.contains(q));
    let rules = ConcatRules {
        m: &m,
        fin: &vcore,
        fin_finals: &variant.finals,
        fin_eps,
        inf: &icore,
    };
    let mat = reach::materialize(&rules);
    let mut core = Core::new(m.clone());
    let mut finals = BTreeSet::new();
    let inf_finals = buchi_finals(&bf);
    for st in &mat.states {
        let name = match st {
            CatSt::Fin(q) => format!("1:{}", vcore.states[*q]),
            CatSt::Inf(a, p, r) => format!(
                "2:{}|{}|{}",
                a.map_or("#", |s| m.name(s)),
                icore.states[*p],
                r.map_or("-".to_string(), |q| icore.states[q].clone()),
            ),
        };
        let i = core.add_state(&name);
        if let CatSt::Inf(_, p, _) = st {
            if inf_finals.contains(p) {
                finals.insert(i);
            }
        }
    }
    for &i in &mat.initials {
        core.initial.insert(i);
    }
    for &(q, s, t) in &mat.push_edges {
        core.add_push_idx(q, s, t);
    }
    for &(top, below, t) in &mat.flush_edges {
        core.add_flush_idx(top, below, t);
    }
    Ok(OmegaOpa {
        core,
        acceptance: Acceptance::BuchiFinal(finals),
    })
}

struct ComplementRules<'a> {
    opm: &'a Opm,
    t: &'a PseudorunTransducer,
    c: &'a Nba,
    /// Transducer push edges with outputs as complement-NBA symbol indices.
    push_map: BTreeMap<(usize, usize), Vec<(usize, Option<usize>)>>,
    flush_map: BTreeMap<(usize, usize), Vec<(usize, Option<usize>)>>,
}

type PSt = (usize, usize, u8);

impl ComplementRules<'_> {
    fn next_flag(&self, tq: usize, cq: usize, flag: u8) -> u8 {
        match flag {
            1 if self.t.is_final(tq) => 2,
            2 if self.c.is_final(cq) => 1,
            f => f,
        }
    }

    fn advance(&self, from: PSt, steps: &[(usize, Option<usize>)]) -> Vec<PSt> {
        let (tq, cq, flag) = from;
        let flag = self.next_flag(tq, cq, flag);
        let mut out = Vec::new();
        for (tt, emitted) in steps {
            match emitted {
                None => out.push((*tt, cq, flag)),
                Some(sym) => {
                    for ct in self.c.successors(cq, *sym) {
                        out.push((*tt, ct, flag));
                    }
                }
            }
        }
        out
    }
}

impl Implicit for ComplementRules<'_> {
    type St = PSt;

    fn opm(&self) -> &Opm {
        self.opm
    }

    fn initials(&self) -> Vec<PSt> {
        let mut out = Vec::new();
        for &tq in &self.t.initials {
            for cq in self.c.initial_states() {
                out.push((tq, cq, 1));
            }
        }
        out
    }

    fn push(&self, q: &PSt, sym: usize) -> Vec<PSt> {
        self.push_map
            .get(&(q.0, sym))
            .map_or(Vec::new(), |steps| self.advance(*q, steps))
    }

    fn flush(&self, top: &PSt, below: &PSt) -> Vec<PSt> {
        self.flush_map
            .get(&(top.0, below.0))
            .map_or(Vec::new(), |steps| self.advance(*top, steps))
    }
}

/// Complement with respect to the matrix language: the pseudorun transducer
/// runs in lockstep with the complement of the finite-state pseudorun
/// automaton, the latter advancing on each emitted symbol, with both Büchi
/// conditions conjoined through a rotating flag. The matrix is preserved.
pub fn complement(a: &OmegaOpa) -> Result<OmegaOpa> {
    let bf = to_buchi_final(a)?;
    let ac = if is_transition_complete(&bf) {
        bf
    } else {
        complete_transitions(&bf)
    };
    let t = build_pseudorun_transducer(&ac)?;
    let ar = build_pseudorun_nba(&ac)?;
    let c = nba_complement(&nba_trim(&ar));
    let encode = |s: &PseudorunSymbol| {
        let enc = s.encode(&ac);
        c.symbol_index(&enc)
            .expect("every emitted symbol is in the pseudorun alphabet")
    };
    let mut push_map: BTreeMap<(usize, usize), Vec<(usize, Option<usize>)>> = BTreeMap::new();
    for (from, sym, to, out) in &t.push_edges {
        push_map
            .entry((*from, *sym))
            .or_default()
            .push((*to, out.as_ref().map(encode)));
    }
    let mut flush_map: BTreeMap<(usize, usize), Vec<(usize, Option<usize>)>> = BTreeMap::new();
    for (top, below, to, out) in &t.flush_edges {
        flush_map
            .entry((*top, *below))
            .or_default()
            .push((*to, out.as_ref().map(encode)));
    }
    let rules = ComplementRules {
        opm: a.opm(),
        t: &t,
        c: &c,
        push_map,
        flush_map,
    };
    let mat = reach::materialize(&rules);
    let mut core = Core::new(a.opm().clone());
    let mut finals = BTreeSet::new();
    for &(tq, cq, flag) in &mat.states {
        let i = core.add_state(&format!("b{tq}|r{cq}|{flag}"));
        if flag == 1 && t.is_final(tq) {
            finals.insert(i);
        }
    }
    for &i in &mat.initials {
        core.initial.insert(i);
    }
    for &(q, s, r) in &mat.push_edges {
        core.add_push_idx(q, s, r);
    }
    for &(top, below, r) in &mat.flush_edges {
        core.add_flush_idx(top, below, r);
    }
    Ok(OmegaOpa {
        core,
        acceptance: Acceptance::BuchiFinal(finals),
    })
}

/// Whether `L(imp) ⊆ L(spec)`, with a counterexample lasso accepted by
/// `imp` but not by `spec` when inclusion fails.
pub fn includes(spec: &OmegaOpa, imp: &OmegaOpa) -> Result<(bool, Option<Lasso>)> {
    let comp = complement(spec)?;
    let inter = intersect(imp, &comp)?;
    let (empty, witness) = crate::pds::is_empty_omega(&inter)?;
    Ok((empty, witness))
}
