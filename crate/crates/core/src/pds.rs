//! Emptiness engine: operator precedence automata encoded as (Büchi)
//! pushdown systems, `pre*` saturation over regular configuration sets, and
//! repeating-head detection.
//!
//! The encoding decomposes the atomic flush move into pop micro-rules so
//! that every rule has a stack effect of length 0 (pop), 1 (rewrite) or 2
//! (push). A letter is consumed — and labels its rule — at the moment the
//! automaton commits to it: directly on a push or mark, or on entering the
//! flush cascade the letter triggers; the cascade's own rules are
//! unlabeled. Concatenating rule labels along a path therefore spells the
//! input word, which is what witness extraction relies on.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::omega::{Acceptance, Lasso, OmegaOpa};
use crate::opa::{Core, Mode, Opa};
use crate::opm::{LeftSym, Opm, Relation};
use crate::reach::{self, Implicit};
use crate::{Error, Result};

/// A pushdown-system control location. The OPA encodings use all five
/// shapes; hand-built systems typically use `Plain` only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PdsControl {
    /// In an ordinary automaton state, no letter committed.
    Plain(String),
    /// `(state, letter)`: the letter is consumed and triggers flushes until
    /// it can be pushed.
    Pending(String, String),
    /// Mid-flush for the committed letter: popping unmarked entries down to
    /// the topmost mark.
    Flushing(String, String),
    /// Finite-word runs only: the end of the input was guessed; the ending
    /// `#` drives the remaining flushes.
    PendingEnd(String),
    /// Mid-flush on the ending `#`.
    FlushingEnd(String),
}

impl PdsControl {
    /// The automaton state this control represents.
    pub fn state(&self) -> &str {
        match self {
            PdsControl::Plain(q)
            | PdsControl::Pending(q, _)
            | PdsControl::Flushing(q, _)
            | PdsControl::PendingEnd(q)
            | PdsControl::FlushingEnd(q) => q,
        }
    }
}

/// A pushdown stack symbol.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PdsSym {
    /// The unpoppable bottom.
    Bottom,
    /// A pushed input symbol with its mark and the control state that was
    /// current just before the push (the state below the entry).
    Entry {
        symbol: String,
        marked: bool,
        saved: String,
    },
}

/// One rule `(control, symbol) → (target, pushed…)`: `pushed` is the
/// replacement for the matched top symbol, new top first — empty for a pop,
/// one symbol for a rewrite, two for a push.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PdsRule {
    pub control: usize,
    pub symbol: usize,
    pub target: usize,
    pub pushed: Vec<usize>,
    pub label: Option<String>,
}

/// Which configurations count as acceptance visits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PdsAcceptance {
    /// Büchi on control locations.
    Controls(BTreeSet<usize>),
    /// Büchi on empty-stack configurations: an accepting control with the
    /// bare bottom on the stack.
    EmptyStack(BTreeSet<usize>),
}

/// A pushdown system with labeled rules and a Büchi acceptance condition.
#[derive(Clone, Debug)]
pub struct Pds {
    pub controls: Vec<PdsControl>,
    pub symbols: Vec<PdsSym>,
    pub rules: Vec<PdsRule>,
    pub acceptance: PdsAcceptance,
    /// Initial control locations; the initial stack is the bare bottom.
    pub initial: Vec<usize>,
}

impl Pds {
    pub fn new() -> Pds {
        Pds {
            controls: Vec::new(),
            symbols: Vec::new(),
            rules: Vec::new(),
            acceptance: PdsAcceptance::Controls(BTreeSet::new()),
            initial: Vec::new(),
        }
    }

    pub fn add_control(&mut self, c: PdsControl) -> usize {
        if let Some(i) = self.controls.iter().position(|x| *x == c) {
            return i;
        }
        self.controls.push(c);
        self.controls.len() - 1
    }

    pub fn add_symbol(&mut self, s: PdsSym) -> usize {
        if let Some(i) = self.symbols.iter().position(|x| *x == s) {
            return i;
        }
        self.symbols.push(s);
        self.symbols.len() - 1
    }

    pub fn add_rule(
        &mut self,
        control: usize,
        symbol: usize,
        target: usize,
        pushed: Vec<usize>,
        label: Option<String>,
    ) {
        assert!(pushed.len() <= 2, "rules push at most two symbols");
        self.rules.push(PdsRule {
            control,
            symbol,
            target,
            pushed,
            label,
        });
    }

    pub fn control_index(&self, c: &PdsControl) -> Option<usize> {
        self.controls.iter().position(|x| x == c)
    }

    pub fn symbol_index(&self, s: &PdsSym) -> Option<usize> {
        self.symbols.iter().position(|x| x == s)
    }

    fn bottom(&self) -> Option<usize> {
        self.symbols.iter().position(|s| *s == PdsSym::Bottom)
    }

    /// Whether passing through `control` counts as an acceptance visit
    /// regardless of the stack.
    fn control_accepting(&self, control: usize) -> bool {
        match &self.acceptance {
            PdsAcceptance::Controls(s) => s.contains(&control),
            // Empty-stack visits are head-positional, not control-global,
            // and a summary's interior never exposes the bottom.
            PdsAcceptance::EmptyStack(_) => false,
        }
    }

    /// Whether the head `(control, symbol)` counts as an acceptance visit:
    /// when the symbol is the bottom, the head determines the whole
    /// configuration.
    fn head_accepting(&self, control: usize, symbol: usize) -> bool {
        match &self.acceptance {
            PdsAcceptance::Controls(s) => s.contains(&control),
            PdsAcceptance::EmptyStack(s) => {
                s.contains(&control) && self.symbols[symbol] == PdsSym::Bottom
            }
        }
    }
}

impl Default for Pds {
    fn default() -> Self {
        Pds::new()
    }
}

/// Wraps explicit transition tables for the reachability saturation.
struct CoreRules<'a> {
    core: &'a Core,
}

impl Implicit for CoreRules<'_> {
    type St = usize;

    fn opm(&self) -> &Opm {
        &self.core.opm
    }

    fn initials(&self) -> Vec<usize> {
        self.core.initial.iter().copied().collect()
    }

    fn push(&self, q: &usize, sym: usize) -> Vec<usize> {
        self.core.push_targets(*q, sym).collect()
    }

    fn flush(&self, top: &usize, below: &usize) -> Vec<usize> {
        self.core.flush_targets(*top, *below).collect()
    }
}

/// Compact control encoding used while generating rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Ctl {
    Plain(usize),
    Pending(usize, usize),
    Flushing(usize, usize),
    PendingEnd(usize),
    FlushingEnd(usize),
}

/// Rule-generation state: interned controls/symbols plus the accumulated
/// (deduplicated) rule set.
struct Builder<'a> {
    core: &'a Core,
    pds: Pds,
    /// `(symbol, marked, saved)` per symbol index; `None` is the bottom.
    sym_info: Vec<Option<(usize, bool, usize)>>,
    ctl_ids: HashMap<Ctl, usize>,
    ctl_list: Vec<Ctl>,
    rules: BTreeSet<PdsRule>,
    /// `(target, pushed)` of rules added since the last drain.
    delta: Vec<(usize, Vec<usize>)>,
}

impl<'a> Builder<'a> {
    fn intern(&mut self, c: Ctl) -> usize {
        if let Some(&i) = self.ctl_ids.get(&c) {
            return i;
        }
        let name = |q: usize| self.core.states[q].clone();
        let sym = |b: usize| self.core.opm.name(b).to_string();
        let pc = match c {
            Ctl::Plain(q) => PdsControl::Plain(name(q)),
            Ctl::Pending(q, b) => PdsControl::Pending(name(q), sym(b)),
            Ctl::Flushing(q, b) => PdsControl::Flushing(name(q), sym(b)),
            Ctl::PendingEnd(q) => PdsControl::PendingEnd(name(q)),
            Ctl::FlushingEnd(q) => PdsControl::FlushingEnd(name(q)),
        };
        let id = self.pds.add_control(pc);
        self.ctl_ids.insert(c, id);
        self.ctl_list.push(c);
        id
    }

    fn entry(&mut self, b: usize, marked: bool, q: usize) -> usize {
        let id = self.pds.add_symbol(PdsSym::Entry {
            symbol: self.core.opm.name(b).to_string(),
            marked,
            saved: self.core.states[q].clone(),
        });
        if id == self.sym_info.len() {
            self.sym_info.push(Some((b, marked, q)));
        }
        id
    }

    fn rule(&mut self, control: usize, symbol: usize, target: usize, pushed: Vec<usize>, label: Option<usize>) {
        let fresh = self.rules.insert(PdsRule {
            control,
            symbol,
            target,
            pushed: pushed.clone(),
            label: label.map(|b| self.core.opm.name(b).to_string()),
        });
        if fresh {
            self.delta.push((target, pushed));
        }
    }

    /// All rules for one control against one stack symbol.
    fn emit(&mut self, ctl: Ctl, gid: usize, configs: &BTreeSet<(usize, LeftSym)>, with_end: bool) {
        let cid = self.ctl_ids[&ctl];
        let info = self.sym_info[gid];
        let left: LeftSym = info.map(|(s, _, _)| s);
        let sigma = self.core.opm.len();
        match ctl {
            Ctl::Plain(q) => {
                // Restrict to configurations the automaton can actually be
                // in; the hints over-approximate reachability.
                if !configs.contains(&(q, left)) {
                    return;
                }
                for b in 0..sigma {
                    match self.core.opm.rel(left, b) {
                        Some(rel @ (Relation::Yields | Relation::Equals)) => {
                            let marked = rel == Relation::Yields;
                            for t in self.core.push_targets(q, b).collect::<Vec<_>>() {
                                let e = self.entry(b, marked, q);
                                let tid = self.intern(Ctl::Plain(t));
                                self.rule(cid, gid, tid, vec![e, gid], Some(b));
                            }
                        }
                        Some(Relation::Takes) => {
                            let tid = self.intern(Ctl::Pending(q, b));
                            self.rule(cid, gid, tid, vec![gid], Some(b));
                        }
                        None => {}
                    }
                }
                if with_end {
                    let tid = self.intern(Ctl::PendingEnd(q));
                    self.rule(cid, gid, tid, vec![gid], None);
                }
            }
            Ctl::Pending(q, b) => match info {
                None => {
                    // Bottom: the # row yields, so the letter lands marked.
                    if self.core.opm.rel(None, b) == Some(Relation::Yields) {
                        for t in self.core.push_targets(q, b).collect::<Vec<_>>() {
                            let e = self.entry(b, true, q);
                            let tid = self.intern(Ctl::Plain(t));
                            self.rule(cid, gid, tid, vec![e, gid], None);
                        }
                    }
                }
                Some((s, marked, saved)) => match self.core.opm.rel(Some(s), b) {
                    Some(Relation::Takes) => {
                        if marked {
                            for t in self.core.flush_targets(q, saved).collect::<Vec<_>>() {
                                let tid = self.intern(Ctl::Pending(t, b));
                                self.rule(cid, gid, tid, vec![], None);
                            }
                        } else {
                            let tid = self.intern(Ctl::Flushing(q, b));
                            self.rule(cid, gid, tid, vec![], None);
                        }
                    }
                    Some(rel) => {
                        let marked_new = rel == Relation::Yields;
                        for t in self.core.push_targets(q, b).collect::<Vec<_>>() {
                            let e = self.entry(b, marked_new, q);
                            let tid = self.intern(Ctl::Plain(t));
                            self.rule(cid, gid, tid, vec![e, gid], None);
                        }
                    }
                    None => {}
                },
            },
            Ctl::Flushing(q, b) => {
                if let Some((_, marked, saved)) = info {
                    if marked {
                        for t in self.core.flush_targets(q, saved).collect::<Vec<_>>() {
                            let tid = self.intern(Ctl::Pending(t, b));
                            self.rule(cid, gid, tid, vec![], None);
                        }
                    } else {
                        self.rule(cid, gid, cid, vec![], None);
                    }
                }
            }
            Ctl::PendingEnd(q) => {
                // The ending # takes precedence over every entry and the
                // cascade stops at the bottom.
                if let Some((_, marked, saved)) = info {
                    if marked {
                        for t in self.core.flush_targets(q, saved).collect::<Vec<_>>() {
                            let tid = self.intern(Ctl::PendingEnd(t));
                            self.rule(cid, gid, tid, vec![], None);
                        }
                    } else {
                        let tid = self.intern(Ctl::FlushingEnd(q));
                        self.rule(cid, gid, tid, vec![], None);
                    }
                }
            }
            Ctl::FlushingEnd(q) => {
                if let Some((_, marked, saved)) = info {
                    if marked {
                        for t in self.core.flush_targets(q, saved).collect::<Vec<_>>() {
                            let tid = self.intern(Ctl::PendingEnd(t));
                            self.rule(cid, gid, tid, vec![], None);
                        }
                    } else {
                        self.rule(cid, gid, cid, vec![], None);
                    }
                }
            }
        }
    }
}

fn encode(core: &Core, finals: &BTreeSet<usize>, empty_stack: bool, with_end: bool) -> Pds {
    let mat = reach::materialize(&CoreRules { core });
    let configs: BTreeSet<(usize, LeftSym)> = mat
        .configs
        .iter()
        .map(|&(q, s)| (mat.states[q], s))
        .collect();

    let mut b = Builder {
        core,
        pds: Pds::new(),
        sym_info: Vec::new(),
        ctl_ids: HashMap::new(),
        ctl_list: Vec::new(),
        rules: BTreeSet::new(),
        delta: Vec::new(),
    };
    b.pds.add_symbol(PdsSym::Bottom);
    b.sym_info.push(None);
    for &(q, sym, marked) in &mat.push_contexts {
        b.entry(sym, marked, mat.states[q]);
    }
    for &(q, _) in &configs {
        b.intern(Ctl::Plain(q));
    }
    for &q in &core.initial {
        let id = b.intern(Ctl::Plain(q));
        if !b.pds.initial.contains(&id) {
            b.pds.initial.push(id);
        }
    }

    // Emit rules only for heads `(control, symbol)` the system can actually
    // expose, found by a forward worklist. `below[g]` over-approximates the
    // symbols that can sit directly under `g` on a reachable stack, so a pop
    // at `g` exposes exactly the heads `(target, below[g])`.
    #[derive(Clone, Copy)]
    enum Ev {
        Head(Ctl, usize),
        Below(usize, usize),
    }
    let mut head_seen: BTreeSet<(Ctl, usize)> = BTreeSet::new();
    let mut below: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    // `links[g] ∋ d`: a reachable rewrite turns top `g` into top `d`, so
    // whatever can sit under `g` can sit under `d`.
    let mut links: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut pop_targets: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let bottom = 0usize;
    let mut agenda: VecDeque<Ev> = VecDeque::new();
    for &q in &core.initial {
        agenda.push_back(Ev::Head(Ctl::Plain(q), bottom));
    }
    while let Some(ev) = agenda.pop_front() {
        match ev {
            Ev::Head(c, g) => {
                if !head_seen.insert((c, g)) {
                    continue;
                }
                b.delta.clear();
                b.emit(c, g, &configs, with_end);
                for (target, pushed) in std::mem::take(&mut b.delta) {
                    let tc = b.ctl_list[target];
                    match pushed.len() {
                        0 => {
                            pop_targets.entry(g).or_default().insert(target);
                            for &gb in below.get(&g).into_iter().flatten() {
                                agenda.push_back(Ev::Head(tc, gb));
                            }
                        }
                        1 => {
                            let d = pushed[0];
                            agenda.push_back(Ev::Head(tc, d));
                            if d != g && links.entry(g).or_default().insert(d) {
                                for &gb in below.get(&g).into_iter().flatten() {
                                    agenda.push_back(Ev::Below(d, gb));
                                }
                            }
                        }
                        2 => {
                            let (e, f) = (pushed[0], pushed[1]);
                            agenda.push_back(Ev::Head(tc, e));
                            agenda.push_back(Ev::Below(e, f));
                            if f != g && links.entry(g).or_default().insert(f) {
                                for &gb in below.get(&g).into_iter().flatten() {
                                    agenda.push_back(Ev::Below(f, gb));
                                }
                            }
                        }
                        _ => unreachable!("rules push at most two symbols"),
                    }
                }
            }
            Ev::Below(g, gb) => {
                if !below.entry(g).or_default().insert(gb) {
                    continue;
                }
                for &t in pop_targets.get(&g).into_iter().flatten() {
                    agenda.push_back(Ev::Head(b.ctl_list[t], gb));
                }
                for &d in links.get(&g).into_iter().flatten().copied().collect::<Vec<_>>().iter() {
                    agenda.push_back(Ev::Below(d, gb));
                }
            }
        }
    }

    let mut pds = b.pds;
    pds.rules = b.rules.into_iter().collect();
    let mut acc = BTreeSet::new();
    for (i, c) in pds.controls.iter().enumerate() {
        let fin = core.index.get(c.state()).is_some_and(|q| finals.contains(q));
        if fin && matches!(c, PdsControl::Plain(_) | PdsControl::Pending(_, _)) {
            acc.insert(i);
        }
    }
    pds.acceptance = if empty_stack {
        PdsAcceptance::EmptyStack(acc)
    } else {
        PdsAcceptance::Controls(acc)
    };
    pds
}

/// Encodes an ω-automaton (Büchi final-state or empty-stack acceptance;
/// convert Muller first) as a Büchi pushdown system.
pub fn opa_to_pds(a: &OmegaOpa) -> Result<Pds> {
    match &a.acceptance {
        Acceptance::BuchiFinal(f) => Ok(encode(&a.core, f, false, false)),
        Acceptance::BuchiEmptyStack(f) => Ok(encode(&a.core, f, true, false)),
        Acceptance::Muller(_) => Err(Error::Precondition(
            "convert Muller acceptance with muller_to_buchi before encoding".into(),
        )),
    }
}

/// Encodes a classical finite-word automaton, including the guessed
/// end-of-input rules that drive the ending-`#` flush cascade.
pub fn opa_to_pds_finite(a: &Opa) -> Result<Pds> {
    if a.mode() != Mode::Classical {
        return Err(Error::Precondition(
            "the finite-word encoding requires a classical-mode automaton".into(),
        ));
    }
    Ok(encode(&a.core, &a.finals, false, true))
}

/// A finite automaton over the stack alphabet recognizing a regular set of
/// configurations: `⟨p, γ1…γk⟩` (top first) is accepted iff reading
/// `γ1…γk` from the state embedding control `p` reaches an accepting state.
#[derive(Clone, Debug)]
pub struct PAutomaton {
    n: usize,
    transitions: BTreeSet<(usize, usize, usize)>,
    accepting: BTreeSet<usize>,
}

impl PAutomaton {
    /// An automaton with one state per control of `p` and no transitions —
    /// the empty configuration set, ready to be populated.
    pub fn new(p: &Pds) -> PAutomaton {
        PAutomaton {
            n: p.controls.len(),
            transitions: BTreeSet::new(),
            accepting: BTreeSet::new(),
        }
    }

    pub fn add_state(&mut self) -> usize {
        self.n += 1;
        self.n - 1
    }

    pub fn add_transition(&mut self, from: usize, symbol: usize, to: usize) {
        assert!(from < self.n && to < self.n, "transition endpoints must exist");
        self.transitions.insert((from, symbol, to));
    }

    pub fn mark_accepting(&mut self, state: usize) {
        self.accepting.insert(state);
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    fn successors(&self, q: usize, sym: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions
            .range((q, sym, 0)..=(q, sym, usize::MAX))
            .map(|&(_, _, t)| t)
    }

    /// Whether the configuration `⟨control, stack⟩` (stack top first, the
    /// bottom symbol included) is accepted.
    pub fn accepts(&self, control: usize, stack: &[usize]) -> bool {
        let mut cur: BTreeSet<usize> = BTreeSet::from([control]);
        for &sym in stack {
            let mut next = BTreeSet::new();
            for &q in &cur {
                next.extend(self.successors(q, sym));
            }
            cur = next;
        }
        cur.iter().any(|q| self.accepting.contains(q))
    }
}

/// Backward reachability: the returned automaton accepts exactly the
/// configurations from which some configuration accepted by `target` is
/// reachable. Monotone saturation — only transitions are added.
pub fn pre_star(p: &Pds, target: &PAutomaton) -> PAutomaton {
    let mut aut = target.clone();
    loop {
        let mut added = false;
        for rule in &p.rules {
            // (p,γ) → (p', w): whenever p' —w→* q, add p —γ→ q.
            let mut ends: BTreeSet<usize> = BTreeSet::from([rule.target]);
            for &sym in &rule.pushed {
                let mut next = BTreeSet::new();
                for &q in &ends {
                    next.extend(aut.successors(q, sym));
                }
                ends = next;
            }
            for q in ends {
                added |= aut.transitions.insert((rule.control, rule.symbol, q));
            }
        }
        if !added {
            return aut;
        }
    }
}

/// Witness payload carried through the saturation: the concrete emptiness
/// check uses `()` and pays nothing, the witness-producing variant collects
/// the emitted letters.
trait Labels: Clone {
    fn of_rule(r: &PdsRule) -> Self;
    fn append(&mut self, other: &Self);
}

impl Labels for Vec<String> {
    fn of_rule(r: &PdsRule) -> Self {
        r.label.iter().cloned().collect()
    }

    fn append(&mut self, other: &Self) {
        self.extend(other.iter().cloned());
    }
}

impl Labels for () {
    fn of_rule(_: &PdsRule) -> Self {}

    fn append(&mut self, _: &Self) {}
}

/// A pop summary: from `⟨p, γ·rest⟩` the system can reach `⟨end, rest⟩`;
/// `bit` records an acceptance visit strictly before the endpoint, `labels`
/// the letters emitted on the way (one witness sequence per distinct
/// `(end, bit)`).
type Summaries<L> = HashMap<(usize, usize), Vec<(usize, bool, L)>>;

fn pop_summaries<L: Labels>(p: &Pds) -> Summaries<L> {
    // Worklist join: every summary fact is produced once, and each rule
    // only re-fires when a fact arrives at a key it waits on. A rule
    // pushing `[e]` waits on `(target, e)`; a rule pushing `[e, f]` first
    // waits on `(target, e)`, and each intermediate endpoint `mid` found
    // there opens a second wait on `(mid, f)`.
    let mut sums: Summaries<L> = HashMap::new();
    let mut seen: BTreeSet<(usize, usize, usize, bool)> = BTreeSet::new();
    // rule index, whether this is a two-push rule's second stage, and the
    // acceptance bit and labels accumulated so far.
    type Waiter<L> = (usize, bool, bool, L);
    let mut waiters: HashMap<(usize, usize), Vec<Waiter<L>>> = HashMap::new();
    let mut queue: VecDeque<((usize, usize), (usize, bool, L))> = VecDeque::new();
    let emit = |key: (usize, usize),
                    fact: (usize, bool, L),
                    seen: &mut BTreeSet<(usize, usize, usize, bool)>,
                    queue: &mut VecDeque<((usize, usize), (usize, bool, L))>| {
        if seen.insert((key.0, key.1, fact.0, fact.1)) {
            queue.push_back((key, fact));
        }
    };
    for (i, rule) in p.rules.iter().enumerate() {
        let head = (rule.control, rule.symbol);
        let acc = p.control_accepting(rule.control);
        let base = L::of_rule(rule);
        match rule.pushed.len() {
            0 => emit(head, (rule.target, acc, base), &mut seen, &mut queue),
            1 | 2 => waiters
                .entry((rule.target, rule.pushed[0]))
                .or_default()
                .push((i, false, acc, base)),
            _ => unreachable!("rules push at most two symbols"),
        }
    }
    while let Some((key, fact)) = queue.pop_front() {
        // Store before firing: a waiter registered below at this same key
        // replays the stored facts, so it must see this one.
        let (end, bit, labels) = fact.clone();
        sums.entry(key).or_default().push(fact);
        let fired: Vec<Waiter<L>> = waiters.get(&key).cloned().unwrap_or_default();
        for (ri, second, wbit, wlabels) in fired {
            let rule = &p.rules[ri];
            let mut joined = wlabels.clone();
            joined.append(&labels);
            let joined_bit = wbit | bit;
            if rule.pushed.len() == 2 && !second {
                // First stage done: the upper symbol pops to `end`, so the
                // rule now waits for the lower symbol's summary there. New
                // waiters must also see the facts already at that key.
                let second_key = (end, rule.pushed[1]);
                for (e2, b2, u2) in sums.get(&second_key).cloned().unwrap_or_default() {
                    let mut full = joined.clone();
                    full.append(&u2);
                    emit(
                        (rule.control, rule.symbol),
                        (e2, joined_bit | b2, full),
                        &mut seen,
                        &mut queue,
                    );
                }
                waiters.entry(second_key).or_default().push((ri, true, joined_bit, joined));
            } else {
                emit(
                    (rule.control, rule.symbol),
                    (end, joined_bit, joined),
                    &mut seen,
                    &mut queue,
                );
            }
        }
    }
    sums
}

type Head = (usize, usize);

/// Head-reachability graph: an edge `(p,γ) → (p',γ')` means
/// `⟨p, γ·rest⟩ ⇒* ⟨p', γ'·w·rest⟩` for some `w`, by a single rule
/// application or a push followed by a pop summary. The bit marks an
/// acceptance visit along the step (source included, target excluded).
struct HeadGraph<L> {
    edges: BTreeMap<Head, Vec<(Head, bool, L)>>,
}

fn head_graph<L: Labels>(p: &Pds, sums: &Summaries<L>) -> HeadGraph<L> {
    let mut edges: BTreeMap<Head, Vec<(Head, bool, L)>> = BTreeMap::new();
    let mut seen: BTreeSet<(Head, Head, bool)> = BTreeSet::new();
    let mut add = |from: Head, to: Head, bit: bool, labels: L| {
        if seen.insert((from, to, bit)) {
            edges.entry(from).or_default().push((to, bit, labels));
        }
        edges.entry(to).or_default();
    };
    for rule in &p.rules {
        let from = (rule.control, rule.symbol);
        let acc = p.head_accepting(rule.control, rule.symbol);
        let base = L::of_rule(rule);
        match rule.pushed.len() {
            0 => {}
            1 => add(from, (rule.target, rule.pushed[0]), acc, base),
            2 => {
                add(from, (rule.target, rule.pushed[0]), acc, base.clone());
                if let Some(tails) = sums.get(&(rule.target, rule.pushed[0])) {
                    for (end, b, u) in tails {
                        let mut labels = base.clone();
                        labels.append(u);
                        add(from, (*end, rule.pushed[1]), acc | b, labels);
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    HeadGraph { edges }
}

/// Strongly connected components (iterative Tarjan) of the subgraph induced
/// by `nodes`.
fn sccs<L>(nodes: &BTreeSet<Head>, graph: &HeadGraph<L>) -> Vec<BTreeSet<Head>> {
    let node_list: Vec<Head> = nodes.iter().copied().collect();
    let idx: HashMap<Head, usize> = node_list.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let n = node_list.len();
    let succs: Vec<Vec<usize>> = node_list
        .iter()
        .map(|node| {
            graph
                .edges
                .get(node)
                .into_iter()
                .flatten()
                .filter_map(|(t, _, _)| idx.get(t).copied())
                .collect()
        })
        .collect();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut counter = 0usize;
    let mut out: Vec<BTreeSet<Head>> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        while let Some(&(v, pos)) = call.last() {
            if pos == 0 {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = succs[v].get(pos) {
                call.last_mut().expect("nonempty").1 += 1;
                if index[w] == usize::MAX {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = BTreeSet::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.insert(node_list[w]);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
            }
        }
    }
    out
}

/// All heads `(control, symbol)` lying on a cycle that visits the
/// acceptance condition: from such a head the system can come back to it
/// with the same symbol re-exposed, having touched acceptance on the way.
pub fn repeating_heads(p: &Pds) -> BTreeSet<Head> {
    let sums = pop_summaries::<()>(p);
    let graph = head_graph(p, &sums);
    let nodes: BTreeSet<Head> = graph.edges.keys().copied().collect();
    let mut out = BTreeSet::new();
    for comp in sccs(&nodes, &graph) {
        let has_accepting_cycle = comp.iter().any(|node| {
            graph
                .edges
                .get(node)
                .into_iter()
                .flatten()
                .any(|(t, b, _)| *b && comp.contains(t))
        });
        if has_accepting_cycle {
            out.extend(comp.iter().copied());
        }
    }
    out
}

/// Shortest label path from `from` to `goal` along head edges, restricted
/// to `within` when given.
fn label_path(
    graph: &HeadGraph<Vec<String>>,
    within: Option<&BTreeSet<Head>>,
    from: Head,
    goal: Head,
) -> Option<Vec<String>> {
    if from == goal {
        return Some(Vec::new());
    }
    let mut queue = VecDeque::from([from]);
    let mut parent: HashMap<Head, (Head, Vec<String>)> = HashMap::new();
    let mut seen: BTreeSet<Head> = BTreeSet::from([from]);
    while let Some(v) = queue.pop_front() {
        for (t, _, labels) in graph.edges.get(&v).into_iter().flatten() {
            if within.is_some_and(|set| !set.contains(t)) {
                continue;
            }
            if seen.insert(*t) {
                parent.insert(*t, (v, labels.clone()));
                if *t == goal {
                    let mut path = Vec::new();
                    let mut cur = goal;
                    while cur != from {
                        let (prev, labels) = parent[&cur].clone();
                        path.splice(0..0, labels);
                        cur = prev;
                    }
                    return Some(path);
                }
                queue.push_back(*t);
            }
        }
    }
    None
}

/// Emptiness of a Büchi pushdown system, with a witness lasso when
/// nonempty: `u` leads from an initial head to a repeating head, `v` once
/// around its accepting cycle.
pub fn pds_emptiness(p: &Pds) -> (bool, Option<Lasso>) {
    let sums = pop_summaries::<Vec<String>>(p);
    let graph = head_graph(p, &sums);
    let Some(bottom) = p.bottom() else {
        return (true, None);
    };
    // Forward reachability from the initial heads, with label paths.
    let mut reach_labels: HashMap<Head, Vec<String>> = HashMap::new();
    let mut queue: VecDeque<Head> = VecDeque::new();
    for &c in &p.initial {
        let head = (c, bottom);
        if !reach_labels.contains_key(&head) {
            reach_labels.insert(head, Vec::new());
            queue.push_back(head);
        }
    }
    while let Some(v) = queue.pop_front() {
        let base = reach_labels[&v].clone();
        for (t, _, labels) in graph.edges.get(&v).into_iter().flatten() {
            if !reach_labels.contains_key(t) {
                let mut u = base.clone();
                u.extend(labels.iter().cloned());
                reach_labels.insert(*t, u);
                queue.push_back(*t);
            }
        }
    }
    let reachable: BTreeSet<Head> = reach_labels.keys().copied().collect();
    for comp in sccs(&reachable, &graph) {
        let mut bit_edge: Option<(Head, Head, Vec<String>)> = None;
        'search: for node in &comp {
            for (t, b, labels) in graph.edges.get(node).into_iter().flatten() {
                if *b && comp.contains(t) {
                    bit_edge = Some((*node, *t, labels.clone()));
                    break 'search;
                }
            }
        }
        let Some((src, dst, edge_labels)) = bit_edge else {
            continue;
        };
        // Period: dst ⇒* src inside the component, then the accepting edge
        // back to dst — one full cycle anchored at dst.
        if let Some(back) = label_path(&graph, Some(&comp), dst, src) {
            let mut period = back;
            period.extend(edge_labels);
            if period.is_empty() {
                // Cannot happen for OPA encodings — every cycle consumes
                // input. Report nonemptiness honestly, without a witness.
                return (false, None);
            }
            return (
                false,
                Some(Lasso {
                    prefix: reach_labels[&dst].clone(),
                    period,
                }),
            );
        }
        return (false, None);
    }
    (true, None)
}

/// Emptiness verdict only, skipping witness assembly. Much cheaper than
/// [`pds_emptiness`] because no label bookkeeping is carried through the
/// summary computation.
pub(crate) fn pds_is_empty(p: &Pds) -> bool {
    let sums = pop_summaries::<()>(p);
    let graph = head_graph(p, &sums);
    let Some(bottom) = p.bottom() else {
        return true;
    };
    let mut reachable: BTreeSet<Head> = BTreeSet::new();
    let mut queue: VecDeque<Head> = VecDeque::new();
    for &c in &p.initial {
        if reachable.insert((c, bottom)) {
            queue.push_back((c, bottom));
        }
    }
    while let Some(v) = queue.pop_front() {
        for (t, _, ()) in graph.edges.get(&v).into_iter().flatten() {
            if reachable.insert(*t) {
                queue.push_back(*t);
            }
        }
    }
    for comp in sccs(&reachable, &graph) {
        let has_accepting_cycle = comp.iter().any(|node| {
            graph
                .edges
                .get(node)
                .into_iter()
                .flatten()
                .any(|(t, b, ())| *b && comp.contains(t))
        });
        if has_accepting_cycle {
            return false;
        }
    }
    true
}

/// Emptiness verdict for ω-automata without a witness.
pub(crate) fn is_empty_omega_quick(a: &OmegaOpa) -> Result<bool> {
    let normalized;
    let a = if matches!(a.acceptance(), Acceptance::Muller(_)) {
        normalized = crate::omega::muller_to_buchi(a)?;
        &normalized
    } else {
        a
    };
    Ok(pds_is_empty(&opa_to_pds(a)?))
}

/// Emptiness for ω-automata, with a replayable witness lasso when the
/// language is nonempty. Muller acceptance is normalized first.
pub fn is_empty_omega(a: &OmegaOpa) -> Result<(bool, Option<Lasso>)> {
    let normalized;
    let a = if matches!(a.acceptance(), Acceptance::Muller(_)) {
        normalized = crate::omega::muller_to_buchi(a)?;
        &normalized
    } else {
        a
    };
    let pds = opa_to_pds(a)?;
    Ok(pds_emptiness(&pds))
}

/// Emptiness for classical finite-word automata, via backward reachability
/// from the accepting configurations of the encoding.
pub fn is_empty_finite(a: &Opa) -> Result<bool> {
    let pds = opa_to_pds_finite(a)?;
    let bottom = pds
        .bottom()
        .expect("the encoding always creates the bottom symbol");
    let mut target = PAutomaton::new(&pds);
    let fin = target.add_state();
    target.mark_accepting(fin);
    for (i, c) in pds.controls.iter().enumerate() {
        if let PdsControl::PendingEnd(q) = c {
            if a.is_final(q) {
                target.add_transition(i, bottom, fin);
            }
        }
    }
    let sat = pre_star(&pds, &target);
    Ok(!pds.initial.iter().any(|&c| sat.accepts(c, &[bottom])))
}
