//! Finite-state Büchi automata over an interned symbol alphabet, as used by
//! the ω-complementation pipeline: product with degeneralization, rank-based
//! complementation, trimming, and lasso membership.
//!
//! Symbols are opaque strings; set-valued letters are interned by a
//! canonical encoding so they compare by value.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::closures::{PseudorunSymbol, TripleSet};
use crate::omega::{Acceptance, OmegaOpa};
use crate::{Error, Result};

/// A nondeterministic Büchi automaton over a finite symbol alphabet.
#[derive(Clone, Debug)]
pub struct Nba {
    alphabet: Vec<String>,
    sym_index: HashMap<String, usize>,
    states: Vec<String>,
    state_index: HashMap<String, usize>,
    initial: BTreeSet<usize>,
    finals: BTreeSet<usize>,
    transitions: BTreeSet<(usize, usize, usize)>,
}

impl Nba {
    pub fn new() -> Nba {
        Nba {
            alphabet: Vec::new(),
            sym_index: HashMap::new(),
            states: Vec::new(),
            state_index: HashMap::new(),
            initial: BTreeSet::new(),
            finals: BTreeSet::new(),
            transitions: BTreeSet::new(),
        }
    }

    /// Interns a symbol, returning its index (existing or fresh).
    pub fn add_symbol(&mut self, name: &str) -> usize {
        if let Some(&i) = self.sym_index.get(name) {
            return i;
        }
        self.alphabet.push(name.to_string());
        self.sym_index.insert(name.to_string(), self.alphabet.len() - 1);
        self.alphabet.len() - 1
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        self.sym_index.get(name).copied()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    /// Interns a state, returning its index (existing or fresh).
    pub fn add_state(&mut self, name: &str) -> usize {
        if let Some(&i) = self.state_index.get(name) {
            return i;
        }
        self.states.push(name.to_string());
        self.state_index.insert(name.to_string(), self.states.len() - 1);
        self.states.len() - 1
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_index.get(name).copied()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn mark_initial(&mut self, q: usize) {
        assert!(q < self.states.len());
        self.initial.insert(q);
    }

    pub fn mark_final(&mut self, q: usize) {
        assert!(q < self.states.len());
        self.finals.insert(q);
    }

    pub fn is_final(&self, q: usize) -> bool {
        self.finals.contains(&q)
    }

    pub fn initial_states(&self) -> impl Iterator<Item = usize> + '_ {
        self.initial.iter().copied()
    }

    pub fn add_transition(&mut self, from: usize, sym: usize, to: usize) {
        assert!(from < self.states.len() && to < self.states.len());
        assert!(sym < self.alphabet.len());
        self.transitions.insert((from, sym, to));
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.transitions.iter().copied()
    }

    pub fn successors(&self, q: usize, sym: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions
            .range((q, sym, 0)..=(q, sym, usize::MAX))
            .map(|&(_, _, t)| t)
    }

    fn successor_set(&self, from: &BTreeSet<usize>, sym: usize) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for &q in from {
            out.extend(self.successors(q, sym));
        }
        out
    }

    /// Debug dump in the automaton JSON layout, with no flush section.
    pub fn to_json(&self) -> serde_json::Value {
        let delta: Vec<serde_json::Value> = self
            .transitions
            .iter()
            .map(|&(q, s, t)| {
                serde_json::json!({
                    "from": self.states[q],
                    "symbol": self.alphabet[s],
                    "to": self.states[t],
                })
            })
            .collect();
        serde_json::json!({
            "alphabet": self.alphabet,
            "states": self.states,
            "initial": self.initial.iter().map(|&q| &self.states[q]).collect::<Vec<_>>(),
            "final": self.finals.iter().map(|&q| &self.states[q]).collect::<Vec<_>>(),
            "delta": delta,
        })
    }
}

impl Default for Nba {
    fn default() -> Self {
        Nba::new()
    }
}

/// Whether the automaton accepts no word: no reachable cycle through an
/// accepting state.
pub fn nba_emptiness(n: &Nba) -> bool {
    let reachable = reachable_states(n);
    for &f in &n.finals {
        if reachable.contains(&f) && reaches(n, f, f) {
            return false;
        }
    }
    true
}

fn reachable_states(n: &Nba) -> BTreeSet<usize> {
    let mut seen = n.initial.clone();
    let mut queue: VecDeque<usize> = seen.iter().copied().collect();
    while let Some(q) = queue.pop_front() {
        for &(from, _, to) in n.transitions.range((q, 0, 0)..=(q, usize::MAX, usize::MAX)) {
            debug_assert_eq!(from, q);
            if seen.insert(to) {
                queue.push_back(to);
            }
        }
    }
    seen
}

/// Whether `to` is reachable from `from` in one or more steps.
fn reaches(n: &Nba, from: usize, to: usize) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([from]);
    while let Some(q) = queue.pop_front() {
        for &(_, _, t) in n.transitions.range((q, 0, 0)..=(q, usize::MAX, usize::MAX)) {
            if t == to {
                return true;
            }
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    false
}

/// Restricts to states both reachable from the initial set and able to
/// reach an accepting cycle. The language is unchanged; the result may have
/// no states at all when the language is empty.
pub fn nba_trim(n: &Nba) -> Nba {
    let reachable = reachable_states(n);
    // States lying on an accepting cycle, then everything that reaches one.
    let anchors: BTreeSet<usize> = n
        .finals
        .iter()
        .copied()
        .filter(|&f| reaches(n, f, f))
        .collect();
    let mut useful = anchors.clone();
    loop {
        let mut grew = false;
        for &(from, _, to) in &n.transitions {
            if useful.contains(&to) && useful.insert(from) {
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    let keep: BTreeSet<usize> = reachable.intersection(&useful).copied().collect();
    let mut out = Nba::new();
    for s in &n.alphabet {
        out.add_symbol(s);
    }
    for &q in &keep {
        out.add_state(&n.states[q]);
    }
    for &q in &keep {
        let i = out.state_index(&n.states[q]).expect("interned above");
        if n.initial.contains(&q) {
            out.mark_initial(i);
        }
        if n.finals.contains(&q) {
            out.mark_final(i);
        }
    }
    for &(from, sym, to) in &n.transitions {
        if keep.contains(&from) && keep.contains(&to) {
            let f = out.state_index(&n.states[from]).expect("interned above");
            let t = out.state_index(&n.states[to]).expect("interned above");
            out.add_transition(f, sym, t);
        }
    }
    out
}

/// Intersection via the standard two-flag degeneralized product; the state
/// count is at most `2·|Q1|·|Q2|` (only reachable products materialize).
pub fn nba_product(n1: &Nba, n2: &Nba) -> Result<Nba> {
    let set1: BTreeSet<&String> = n1.alphabet.iter().collect();
    let set2: BTreeSet<&String> = n2.alphabet.iter().collect();
    if set1 != set2 {
        return Err(Error::Precondition(
            "the product requires automata over the same alphabet".into(),
        ));
    }
    // n2's symbol indices translated into n1's.
    let sym2: Vec<usize> = n1
        .alphabet
        .iter()
        .map(|s| n2.symbol_index(s).expect("alphabets are equal as sets"))
        .collect();
    let mut out = Nba::new();
    for s in &n1.alphabet {
        out.add_symbol(s);
    }
    let name = |q1: usize, q2: usize, flag: u8| format!("{}|{}|{}", n1.states[q1], n2.states[q2], flag);
    let mut queue: VecDeque<(usize, usize, u8)> = VecDeque::new();
    let mut seen: BTreeSet<(usize, usize, u8)> = BTreeSet::new();
    for &q1 in &n1.initial {
        for &q2 in &n2.initial {
            if seen.insert((q1, q2, 1)) {
                queue.push_back((q1, q2, 1));
            }
        }
    }
    let index = |out: &mut Nba, q1: usize, q2: usize, flag: u8| out.add_state(&name(q1, q2, flag));
    for &(q1, q2, _) in &seen.clone() {
        let i = index(&mut out, q1, q2, 1);
        out.mark_initial(i);
    }
    while let Some((q1, q2, flag)) = queue.pop_front() {
        let from = index(&mut out, q1, q2, flag);
        if flag == 1 && n1.is_final(q1) {
            out.mark_final(from);
        }
        let next_flag = match flag {
            1 if n1.is_final(q1) => 2,
            2 if n2.is_final(q2) => 1,
            f => f,
        };
        for sym in 0..n1.alphabet.len() {
            for t1 in n1.successors(q1, sym).collect::<Vec<_>>() {
                for t2 in n2.successors(q2, sym2[sym]).collect::<Vec<_>>() {
                    let to = index(&mut out, t1, t2, next_flag);
                    out.add_transition(from, sym, to);
                    if seen.insert((t1, t2, next_flag)) {
                        queue.push_back((t1, t2, next_flag));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Whether the automaton accepts `prefix · period^ω` (sequences of symbol
/// indices). An empty period never belongs to any ω-language.
pub fn nba_accepts_lasso(n: &Nba, prefix: &[usize], period: &[usize]) -> bool {
    if period.is_empty() {
        return false;
    }
    let word: Vec<usize> = prefix.iter().chain(period).copied().collect();
    let len = word.len();
    let next = |pos: usize| if pos + 1 == len { prefix.len() } else { pos + 1 };
    // Reachable (state, position) pairs.
    let mut seen: BTreeSet<(usize, usize)> = n.initial.iter().map(|&q| (q, 0)).collect();
    let mut queue: VecDeque<(usize, usize)> = seen.iter().copied().collect();
    while let Some((q, pos)) = queue.pop_front() {
        for t in n.successors(q, word[pos]).collect::<Vec<_>>() {
            if seen.insert((t, next(pos))) {
                queue.push_back((t, next(pos)));
            }
        }
    }
    // An accepting node inside the loop that can come back to itself.
    for &(q, pos) in &seen {
        if pos < prefix.len() || !n.is_final(q) {
            continue;
        }
        let mut back: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut bfs = VecDeque::from([(q, pos)]);
        let mut found = false;
        'search: while let Some((r, p)) = bfs.pop_front() {
            for t in n.successors(r, word[p]).collect::<Vec<_>>() {
                if (t, next(p)) == (q, pos) {
                    found = true;
                    break 'search;
                }
                if back.insert((t, next(p))) {
                    bfs.push_back((t, next(p)));
                }
            }
        }
        if found {
            return true;
        }
    }
    false
}

/// A complementation state: the subset waiting phase or the ranking phase.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum CSt {
    Sub(BTreeSet<usize>),
    /// Level ranking (total on its domain) plus the even-rank breakpoint
    /// set; accepting when the breakpoint set is empty.
    Rank(BTreeMap<usize, usize>, BTreeSet<usize>),
}

impl CSt {
    fn name(&self) -> String {
        match self {
            CSt::Sub(s) => {
                let body: Vec<String> = s.iter().map(|q| q.to_string()).collect();
                format!("S{{{}}}", body.join(","))
            }
            CSt::Rank(g, o) => {
                let body: Vec<String> = g.iter().map(|(q, r)| format!("{q}:{r}")).collect();
                let obody: Vec<String> = o.iter().map(|q| q.to_string()).collect();
                format!("R{{{}}}O{{{}}}", body.join(","), obody.join(","))
            }
        }
    }
}

/// All tight level rankings over `dom` with maximal odd rank exactly `r`:
/// every value is at most the per-state cap, accepting states get even
/// ranks, and every odd rank up to `r` is taken.
fn tight_rankings(
    dom: &[usize],
    caps: &dyn Fn(usize) -> usize,
    finals: &BTreeSet<usize>,
    r: usize,
) -> Vec<BTreeMap<usize, usize>> {
    let odds: Vec<usize> = (1..=r).step_by(2).collect();
    let mut out = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    fn go(
        dom: &[usize],
        caps: &dyn Fn(usize) -> usize,
        finals: &BTreeSet<usize>,
        r: usize,
        odds: &[usize],
        current: &mut Vec<usize>,
        out: &mut Vec<BTreeMap<usize, usize>>,
    ) {
        let i = current.len();
        let missing = odds
            .iter()
            .filter(|&&o| !current.contains(&o))
            .count();
        if missing > dom.len() - i {
            return;
        }
        if i == dom.len() {
            out.push(dom.iter().copied().zip(current.iter().copied()).collect());
            return;
        }
        let q = dom[i];
        let cap = caps(q).min(r);
        for v in 0..=cap {
            if v % 2 == 1 && finals.contains(&q) {
                continue;
            }
            current.push(v);
            go(dom, caps, finals, r, odds, current, out);
            current.pop();
        }
    }
    go(dom, caps, finals, r, &odds, &mut current, &mut out);
    out
}

/// Rank-based complementation: a waiting subset phase with a
/// nondeterministic jump to tight level rankings of maximal odd rank at
/// most `2·|Q| − 1`, with breakpoint tracking of even-ranked runs. Accepts
/// exactly the complement of `L(n)` over `n`'s alphabet.
pub fn nba_complement(n: &Nba) -> Nba {
    let mut out = Nba::new();
    for s in &n.alphabet {
        out.add_symbol(s);
    }
    let mut index: BTreeMap<CSt, usize> = BTreeMap::new();
    let mut queue: VecDeque<CSt> = VecDeque::new();
    let mut intern = |st: CSt, out: &mut Nba, queue: &mut VecDeque<CSt>| -> usize {
        match index.get(&st) {
            Some(&i) => i,
            None => {
                let i = out.add_state(&st.name());
                if let CSt::Rank(_, o) = &st {
                    if o.is_empty() {
                        out.mark_final(i);
                    }
                }
                index.insert(st.clone(), i);
                queue.push_back(st);
                i
            }
        }
    };
    let init = CSt::Sub(n.initial.clone());
    let i0 = intern(init, &mut out, &mut queue);
    out.mark_initial(i0);
    while let Some(st) = queue.pop_front() {
        let from = out
            .state_index(&st.name())
            .expect("dequeued states are interned");
        for sym in 0..n.alphabet.len() {
            let mut targets: Vec<CSt> = Vec::new();
            match &st {
                CSt::Sub(s) => {
                    let succ = n.successor_set(s, sym);
                    if succ.is_empty() {
                        targets.push(CSt::Sub(BTreeSet::new()));
                        targets.push(CSt::Rank(BTreeMap::new(), BTreeSet::new()));
                    } else {
                        targets.push(CSt::Sub(succ.clone()));
                        let dom: Vec<usize> = succ.iter().copied().collect();
                        let max_r = 2 * dom.len();
                        for r in (1..max_r).step_by(2) {
                            for g in tight_rankings(&dom, &|_| r, &n.finals, r) {
                                targets.push(CSt::Rank(g, BTreeSet::new()));
                            }
                        }
                    }
                }
                CSt::Rank(g, o) => {
                    if g.is_empty() {
                        targets.push(CSt::Rank(BTreeMap::new(), BTreeSet::new()));
                    } else {
                        let dom_set: BTreeSet<usize> = g.keys().copied().collect();
                        let succ = n.successor_set(&dom_set, sym);
                        if succ.is_empty() {
                            targets.push(CSt::Rank(BTreeMap::new(), BTreeSet::new()));
                        } else {
                            let r = g.values().filter(|v| *v % 2 == 1).max().copied();
                            let r = r.expect("tight rankings with nonempty domain have odd ranks");
                            let dom: Vec<usize> = succ.iter().copied().collect();
                            let caps = |q: usize| {
                                g.iter()
                                    .filter(|&(&p, _)| n.successors(p, sym).any(|t| t == q))
                                    .map(|(_, &v)| v)
                                    .min()
                                    .expect("q is a successor of the domain")
                            };
                            let o_succ = n.successor_set(o, sym);
                            for g2 in tight_rankings(&dom, &caps, &n.finals, r) {
                                let o2: BTreeSet<usize> = if o.is_empty() {
                                    g2.iter().filter(|(_, &v)| v % 2 == 0).map(|(&q, _)| q).collect()
                                } else {
                                    o_succ
                                        .iter()
                                        .copied()
                                        .filter(|q| g2.get(q).is_some_and(|v| v % 2 == 0))
                                        .collect()
                                };
                                targets.push(CSt::Rank(g2, o2));
                            }
                        }
                    }
                }
            }
            for t in targets {
                let to = intern(t, &mut out, &mut queue);
                out.add_transition(from, sym, to);
            }
        }
    }
    out
}

/// The Büchi automaton over the pseudorun alphabet: the source automaton's
/// push edges plus, for every reachable chain symbol `S` and `(q, p, f) ∈
/// S`, an `S`-edge `q → p` — and `q → p′` when `f = 1`, where the primed
/// final state mirrors `p`'s outgoing edges. The alphabet is the letter
/// alphabet plus the chain symbols actually produced by the transducer.
pub fn build_pseudorun_nba(a: &OmegaOpa) -> Result<Nba> {
    let Acceptance::BuchiFinal(finals) = a.acceptance() else {
        return Err(Error::Precondition(
            "the pseudorun automaton requires Büchi final-state acceptance".into(),
        ));
    };
    let t = crate::closures::build_pseudorun_transducer(a)?;
    let mut n = Nba::new();
    for s in a.opm().alphabet() {
        n.add_symbol(s);
    }
    let chains: BTreeSet<TripleSet> = t.chain_symbols();
    let chain_syms: Vec<(TripleSet, usize)> = chains
        .into_iter()
        .map(|c| {
            let enc = PseudorunSymbol::Chain(c.clone()).encode(a);
            let i = n.add_symbol(&enc);
            (c, i)
        })
        .collect();
    let states = a.states().to_vec();
    for s in &states {
        n.add_state(s);
    }
    let core = &a.core;
    for &q in core.initial.iter() {
        n.mark_initial(q);
    }
    for &q in finals {
        n.mark_final(q);
    }
    // Base edges: letters mirror push transitions, chain symbols link their
    // triples; flagged triples additionally target the primed copy.
    let mut primes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut prime = |p: usize, n: &mut Nba| -> usize {
        *primes.entry(p).or_insert_with(|| {
            let i = n.add_state(&format!("{}'", states[p]));
            n.mark_final(i);
            i
        })
    };
    let mut base_edges: Vec<(usize, usize, usize)> = Vec::new();
    for (&(q, sym), tos) in core.push.iter() {
        for &p in tos {
            base_edges.push((q, sym, p));
        }
    }
    for (set, sym) in &chain_syms {
        for &(q, p, f) in &set.0 {
            base_edges.push((q, *sym, p));
            if f {
                let pp = prime(p, &mut n);
                base_edges.push((q, *sym, pp));
            }
        }
    }
    for &(q, sym, p) in &base_edges {
        n.add_transition(q, sym, p);
    }
    // Primed states mirror the outgoing edges of their base state.
    let prime_list: Vec<(usize, usize)> = primes.iter().map(|(&p, &pp)| (p, pp)).collect();
    for (p, pp) in prime_list {
        for &(q, sym, to) in &base_edges {
            if q == p {
                n.add_transition(pp, sym, to);
            }
        }
    }
    Ok(n)
}
