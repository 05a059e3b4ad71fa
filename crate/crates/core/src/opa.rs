//! Finite-word operator precedence automata: configurations, the three move
//! kinds (push, mark, flush), classical and variant acceptance, transducers,
//! and the constructions converting between the two acceptance modes.
//!
//! Classical acceptance reads the whole word and then empties the stack on
//! the ending `#`, accepting in `⟨[#,q],#⟩` with `q` final. Variant
//! acceptance stops the instant the last letter is consumed: no `#`-induced
//! flush is ever taken, and the word is accepted iff the top state is final
//! right then. The two modes recognize the same class of languages;
//! [`classical_to_variant`] and [`variant_to_classical`] realize the
//! translations.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::opm::{LeftSym, Opm, Relation};
use crate::reach::{self, Implicit};
use crate::{Error, Result};

/// Acceptance mode of a finite-word automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Accept in `⟨[#,q],#⟩` with `q` final, after the ending-`#` flushes.
    Classical,
    /// Accept the moment the last letter is consumed, top state final.
    Variant,
}

/// The three kinds of automaton moves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MoveKind {
    /// `≐` lookahead: push the letter unmarked.
    Push,
    /// `⋖` lookahead: push the letter marked, opening a chain body.
    Mark,
    /// `⋗` lookahead: pop through the topmost marked entry, no input read.
    Flush,
}

impl MoveKind {
    pub fn label(self) -> &'static str {
        match self {
            MoveKind::Push => "push",
            MoveKind::Mark => "mark",
            MoveKind::Flush => "flush",
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Shared state/transition storage for finite and ω automata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Core {
    pub opm: Opm,
    pub states: Vec<String>,
    pub index: HashMap<String, usize>,
    pub initial: BTreeSet<usize>,
    /// `(state, symbol) → set of target states` for push and mark moves.
    pub push: BTreeMap<(usize, usize), BTreeSet<usize>>,
    /// `(top state, below-the-mark state) → set of target states`.
    pub flush: BTreeMap<(usize, usize), BTreeSet<usize>>,
}

impl Core {
    pub fn new(opm: Opm) -> Core {
        Core {
            opm,
            states: Vec::new(),
            index: HashMap::new(),
            initial: BTreeSet::new(),
            push: BTreeMap::new(),
            flush: BTreeMap::new(),
        }
    }

    pub fn add_state(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.states.push(name.to_string());
        self.index.insert(name.to_string(), self.states.len() - 1);
        self.states.len() - 1
    }

    pub fn state_checked(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn add_push_idx(&mut self, from: usize, sym: usize, to: usize) {
        self.push.entry((from, sym)).or_default().insert(to);
    }

    pub fn add_flush_idx(&mut self, top: usize, below: usize, to: usize) {
        self.flush.entry((top, below)).or_default().insert(to);
    }

    pub fn push_targets(&self, q: usize, sym: usize) -> impl Iterator<Item = usize> + '_ {
        self.push.get(&(q, sym)).into_iter().flatten().copied()
    }

    pub fn flush_targets(&self, top: usize, below: usize) -> impl Iterator<Item = usize> + '_ {
        self.flush.get(&(top, below)).into_iter().flatten().copied()
    }

    /// `|I| ≤ 1` and every transition image is at most a singleton.
    pub fn is_deterministic(&self) -> bool {
        self.initial.len() <= 1
            && self.push.values().all(|t| t.len() <= 1)
            && self.flush.values().all(|t| t.len() <= 1)
    }

    /// Graph sweep: a state is reachable if some chain of push edges, and
    /// flush edges whose both source states were already reached, leads to
    /// it from an initial state.
    pub fn reachable(&self) -> BTreeSet<usize> {
        let mut seen: BTreeSet<usize> = self.initial.clone();
        loop {
            let mut grew = false;
            for (&(from, _), targets) in &self.push {
                if seen.contains(&from) {
                    for &t in targets {
                        grew |= seen.insert(t);
                    }
                }
            }
            for (&(top, below), targets) in &self.flush {
                if seen.contains(&top) && seen.contains(&below) {
                    for &t in targets {
                        grew |= seen.insert(t);
                    }
                }
            }
            if !grew {
                return seen;
            }
        }
    }
}

/// Structural validation outcome; see [`Opa::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    /// Always true for constructed values: the matrix type cannot store a
    /// conflicting cell. Reported so audits can assert it uniformly.
    pub conflict_free: bool,
    /// Whether the `≐` cells of the matrix form an acyclic graph.
    pub eq_acyclic: bool,
    /// `|I| ≤ 1` and all transition images at most singletons.
    pub deterministic: bool,
    /// States not reachable from any initial state.
    pub unreachable: Vec<String>,
}

/// A finite-word operator precedence automaton.
#[derive(Clone, Debug, PartialEq)]
pub struct Opa {
    pub(crate) core: Core,
    pub(crate) finals: BTreeSet<usize>,
    pub(crate) mode: Mode,
}

impl Opa {
    pub fn new(opm: Opm, mode: Mode) -> Opa {
        Opa {
            core: Core::new(opm),
            finals: BTreeSet::new(),
            mode,
        }
    }

    pub fn opm(&self) -> &Opm {
        &self.core.opm
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn states(&self) -> &[String] {
        &self.core.states
    }

    /// Declares a state (idempotent) and returns its index.
    pub fn add_state(&mut self, name: &str) -> usize {
        self.core.add_state(name)
    }

    pub fn mark_initial(&mut self, name: &str) -> Result<()> {
        let i = self.core.state_checked(name)?;
        self.core.initial.insert(i);
        Ok(())
    }

    pub fn mark_final(&mut self, name: &str) -> Result<()> {
        let i = self.core.state_checked(name)?;
        self.finals.insert(i);
        Ok(())
    }

    pub fn add_push(&mut self, from: &str, symbol: &str, to: &str) -> Result<()> {
        let f = self.core.state_checked(from)?;
        let s = self.core.opm.sym_checked(symbol)?;
        let t = self.core.state_checked(to)?;
        self.core.add_push_idx(f, s, t);
        Ok(())
    }

    pub fn add_flush(&mut self, top: &str, below: &str, to: &str) -> Result<()> {
        let t = self.core.state_checked(top)?;
        let b = self.core.state_checked(below)?;
        let r = self.core.state_checked(to)?;
        self.core.add_flush_idx(t, b, r);
        Ok(())
    }

    pub fn is_initial(&self, name: &str) -> bool {
        self.core
            .index
            .get(name)
            .is_some_and(|i| self.core.initial.contains(i))
    }

    pub fn is_final(&self, name: &str) -> bool {
        self.core.index.get(name).is_some_and(|i| self.finals.contains(i))
    }

    pub fn initial_states(&self) -> impl Iterator<Item = &str> {
        self.core.initial.iter().map(|&i| self.core.states[i].as_str())
    }

    pub fn final_states(&self) -> impl Iterator<Item = &str> {
        self.finals.iter().map(|&i| self.core.states[i].as_str())
    }

    pub fn is_deterministic(&self) -> bool {
        self.core.is_deterministic()
    }

    /// Structural validation: conflict-freeness, `≐`-acyclicity,
    /// determinism, and unreachable states. Dangling references cannot occur
    /// in constructed values — they are rejected at construction and at
    /// deserialization time.
    pub fn validate(&self) -> ValidationReport {
        let reachable = self.core.reachable();
        ValidationReport {
            conflict_free: true,
            eq_acyclic: crate::opm::is_eq_acyclic(&self.core.opm).0,
            deterministic: self.is_deterministic(),
            unreachable: (0..self.core.states.len())
                .filter(|i| !reachable.contains(i))
                .map(|i| self.core.states[i].clone())
                .collect(),
        }
    }
}

/// One stack cell: a symbol (`None` for the bottom `#`), its mark, and the
/// automaton state recorded with it. The configuration's current state is
/// the state of the top entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StackEntry {
    pub(crate) symbol: LeftSym,
    pub(crate) marked: bool,
    pub(crate) state: usize,
}

/// A run snapshot: the stack (bottom first) plus the unread input suffix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub(crate) stack: Vec<StackEntry>,
    pub(crate) remaining: Vec<usize>,
}

impl Configuration {
    pub(crate) fn start(state: usize, word: Vec<usize>) -> Configuration {
        Configuration {
            stack: vec![StackEntry {
                symbol: None,
                marked: false,
                state,
            }],
            remaining: word,
        }
    }

    /// Index of the current state (the top entry's state).
    pub(crate) fn state(&self) -> usize {
        self.stack.last().expect("stack is never empty").state
    }

    pub fn stack_height(&self) -> usize {
        self.stack.len()
    }

    pub fn remaining_len(&self) -> usize {
        self.remaining.len()
    }

    fn render_stack(&self, a: &Opa) -> String {
        let mut s = String::new();
        for e in &self.stack {
            s.push('[');
            s.push_str(a.core.opm.left_name(e.symbol));
            if e.marked {
                s.push('*');
            }
            s.push(',');
            s.push_str(&a.core.states[e.state]);
            s.push(']');
        }
        s
    }

    fn render_remaining(&self, a: &Opa) -> String {
        let mut toks: Vec<&str> = self
            .remaining
            .iter()
            .map(|&i| a.core.opm.name(i))
            .collect();
        toks.push("#");
        let cut = toks.len().min(10);
        let mut s = toks[..cut].join(" ");
        if toks.len() > cut {
            s.push_str(" …");
        }
        s
    }
}

/// A replayable run: the initial configuration plus every move taken.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub(crate) initial: Configuration,
    pub(crate) moves: Vec<(MoveKind, Configuration)>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn kinds(&self) -> Vec<MoveKind> {
        self.moves.iter().map(|&(k, _)| k).collect()
    }

    /// Line-oriented text form: one `kind | stack | remaining` line per
    /// configuration, starting with an `init` line, so the line count equals
    /// the number of configurations in the run.
    pub fn render(&self, a: &Opa) -> String {
        let mut out = String::new();
        let line = |kind: &str, c: &Configuration| {
            format!("{} | {} | {}\n", kind, c.render_stack(a), c.render_remaining(a))
        };
        out.push_str(&line("init", &self.initial));
        for (kind, c) in &self.moves {
            out.push_str(&line(kind.label(), c));
        }
        out
    }
}

/// All successors of `c` under `a`'s mode: push on `≐`, mark on `⋖`, flush
/// on `⋗` (keeping the input). A missing cell or empty transition image
/// yields no successors (the run is stuck, which is a rejection). In variant
/// mode a consumed input never triggers flushes: there are no moves at all
/// once the word is read.
pub fn step(a: &Opa, c: &Configuration) -> Vec<(MoveKind, Configuration)> {
    step_inner(a, c, a.mode == Mode::Variant)
}

fn step_inner(a: &Opa, c: &Configuration, variant: bool) -> Vec<(MoveKind, Configuration)> {
    let mut out = Vec::new();
    let top = c.stack.last().expect("stack is never empty");
    match c.remaining.first().copied() {
        Some(b) => match a.core.opm.rel(top.symbol, b) {
            Some(Relation::Yields) => push_moves(a, c, b, true, &mut out),
            Some(Relation::Equals) => push_moves(a, c, b, false, &mut out),
            Some(Relation::Takes) => flush_moves(a, c, &mut out),
            None => {}
        },
        None => {
            // Ending #: classical runs flush the stack away; variant runs
            // halt on the spot.
            if !variant && c.stack.len() > 1 && a.core.opm.rel_end(top.symbol) == Relation::Takes {
                flush_moves(a, c, &mut out);
            }
        }
    }
    out
}

fn push_moves(
    a: &Opa,
    c: &Configuration,
    b: usize,
    marked: bool,
    out: &mut Vec<(MoveKind, Configuration)>,
) {
    let kind = if marked { MoveKind::Mark } else { MoveKind::Push };
    for t in a.core.push_targets(c.state(), b) {
        let mut next = c.clone();
        next.remaining.remove(0);
        next.stack.push(StackEntry {
            symbol: Some(b),
            marked,
            state: t,
        });
        out.push((kind, next));
    }
}

fn flush_moves(a: &Opa, c: &Configuration, out: &mut Vec<(MoveKind, Configuration)>) {
    // Pop through the topmost marked entry; the new state pairs the popped
    // top state with the state below the mark.
    let Some(mark) = c.stack.iter().rposition(|e| e.marked) else {
        return;
    };
    let below = c.stack[mark - 1].state;
    for t in a.core.flush_targets(c.state(), below) {
        let mut next = c.clone();
        next.stack.truncate(mark);
        next.stack.last_mut().expect("bottom survives").state = t;
        out.push((MoveKind::Flush, next));
    }
}

/// Classical acceptance with an optional witnessing trace: true iff some run
/// reaches `⟨[#,q],#⟩` with `q` final. Breadth-first search over the finite
/// configuration graph with visited-set pruning.
pub fn accepts_finite(a: &Opa, w: &[impl AsRef<str>]) -> Result<(bool, Option<Trace>)> {
    if a.mode != Mode::Classical {
        return Err(Error::Precondition(
            "classical acceptance requires a classical-mode automaton".into(),
        ));
    }
    let word = a.core.opm.word(w)?;
    let mut queue: VecDeque<Configuration> = VecDeque::new();
    let mut parent: HashMap<Configuration, (Configuration, MoveKind)> = HashMap::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut starts = Vec::new();
    for &q in &a.core.initial {
        let c = Configuration::start(q, word.clone());
        if seen.insert(c.clone()) {
            starts.push(c.clone());
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        if c.remaining.is_empty() && c.stack.len() == 1 && a.finals.contains(&c.state()) {
            let mut rev = Vec::new();
            let mut cur = c.clone();
            while let Some((prev, kind)) = parent.get(&cur) {
                rev.push((*kind, cur.clone()));
                cur = prev.clone();
            }
            rev.reverse();
            return Ok((
                true,
                Some(Trace {
                    initial: cur,
                    moves: rev,
                }),
            ));
        }
        for (kind, next) in step_inner(a, &c, false) {
            if seen.insert(next.clone()) {
                parent.insert(next.clone(), (c.clone(), kind));
                queue.push_back(next);
            }
        }
    }
    Ok((false, None))
}

/// Replays a rendered run script: the first line must render an initial
/// configuration and each later line must be the rendering of one successor
/// of the previously matched configuration, in the same `kind | stack |
/// remaining` format as [`Trace::render`]. True iff every line matches a
/// legal move of the automaton.
pub fn replay_rendered(a: &Opa, w: &[impl AsRef<str>], lines: &[impl AsRef<str>]) -> Result<bool> {
    let word = a.core.opm.word(w)?;
    let render = |kind: &str, c: &Configuration| {
        format!("{} | {} | {}", kind, c.render_stack(a), c.render_remaining(a))
    };
    let Some(first) = lines.first() else {
        return Ok(false);
    };
    let mut cur = None;
    for &q in &a.core.initial {
        let c = Configuration::start(q, word.clone());
        if render("init", &c) == first.as_ref() {
            cur = Some(c);
            break;
        }
    }
    let Some(mut cur) = cur else {
        return Ok(false);
    };
    for line in &lines[1..] {
        let mut matched = None;
        for (kind, c) in step(a, &cur) {
            if render(kind.label(), &c) == line.as_ref() {
                matched = Some(c);
                break;
            }
        }
        match matched {
            Some(c) => cur = c,
            None => return Ok(false),
        }
    }
    Ok(true)
}

/// The shortest run that consumes all of `w`, with no ending-`#` flushes,
/// as a replayable trace. `None` when every run gets stuck before the last
/// letter. Unique when the automaton is deterministic.
pub fn run_to_consumption(a: &Opa, w: &[impl AsRef<str>]) -> Result<Option<Trace>> {
    let word = a.core.opm.word(w)?;
    let mut queue: VecDeque<Configuration> = VecDeque::new();
    let mut parent: HashMap<Configuration, (Configuration, MoveKind)> = HashMap::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    for &q in &a.core.initial {
        let c = Configuration::start(q, word.clone());
        if seen.insert(c.clone()) {
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        if c.remaining.is_empty() {
            let mut rev = Vec::new();
            let mut cur = c.clone();
            while let Some((prev, kind)) = parent.get(&cur) {
                rev.push((*kind, cur.clone()));
                cur = prev.clone();
            }
            rev.reverse();
            return Ok(Some(Trace {
                initial: cur,
                moves: rev,
            }));
        }
        for (kind, next) in step_inner(a, &c, true) {
            if seen.insert(next.clone()) {
                parent.insert(next.clone(), (c.clone(), kind));
                queue.push_back(next);
            }
        }
    }
    Ok(None)
}

/// Variant acceptance: true iff some run consumes all of `w` and halts with
/// its top state final, taking no ending-`#` flush. The automaton's mode
/// flag is ignored — any automaton can be read under variant semantics.
pub fn accepts_variant(a: &Opa, w: &[impl AsRef<str>]) -> Result<bool> {
    let word = a.core.opm.word(w)?;
    let mut queue: VecDeque<Configuration> = VecDeque::new();
    let mut seen: HashSet<Configuration> = HashSet::new();
    for &q in &a.core.initial {
        let c = Configuration::start(q, word.clone());
        if seen.insert(c.clone()) {
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        if c.remaining.is_empty() && a.finals.contains(&c.state()) {
            return Ok(true);
        }
        for (_, next) in step_inner(a, &c, true) {
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    Ok(false)
}

fn max_enum() -> usize {
    std::env::var("OPAL_MAX_ENUM")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(8)
}

/// Every accepted word of length at most `n`, by exhaustive generation of
/// matrix-compatible candidates plus the mode's acceptance test. Errors when
/// `n` exceeds the configured cap (`OPAL_MAX_ENUM`, default 8).
pub fn enumerate_language(a: &Opa, n: usize) -> Result<BTreeSet<Vec<String>>> {
    let cap = max_enum();
    if n > cap {
        return Err(Error::Precondition(format!(
            "enumeration bound {n} exceeds the cap {cap}"
        )));
    }
    let mut out = BTreeSet::new();
    let sigma = a.core.opm.len();
    // Depth-first extension of prefixes that still parse under the matrix.
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(w) = stack.pop() {
        let names: Vec<String> = w.iter().map(|&i| a.core.opm.name(i).to_string()).collect();
        let accepted = match a.mode {
            Mode::Classical => accepts_finite(a, &names)?.0,
            Mode::Variant => accepts_variant(a, &names)?,
        };
        if accepted {
            out.insert(names);
        }
        if w.len() < n {
            for b in 0..sigma {
                let mut next = w.clone();
                next.push(b);
                if crate::opm::prefix_parses(&a.core.opm, &next) {
                    stack.push(next);
                }
            }
        }
    }
    Ok(out)
}

/// An automaton whose transitions additionally emit output words; the
/// output alphabet `O` is arbitrary. Transitions without a registered output
/// emit the empty word.
#[derive(Clone, Debug)]
pub struct Transducer<O> {
    opa: Opa,
    out_push: BTreeMap<(usize, usize, usize), Vec<O>>,
    out_flush: BTreeMap<(usize, usize, usize), Vec<O>>,
}

impl<O: Clone + Ord> Transducer<O> {
    pub fn new(opa: Opa) -> Transducer<O> {
        Transducer {
            opa,
            out_push: BTreeMap::new(),
            out_flush: BTreeMap::new(),
        }
    }

    pub fn opa(&self) -> &Opa {
        &self.opa
    }

    /// Registers the output emitted when the push/mark edge
    /// `from –symbol→ to` is taken.
    pub fn set_push_output(&mut self, from: &str, symbol: &str, to: &str, out: Vec<O>) -> Result<()> {
        let f = self.opa.core.state_checked(from)?;
        let s = self.opa.core.opm.sym_checked(symbol)?;
        let t = self.opa.core.state_checked(to)?;
        self.out_push.insert((f, s, t), out);
        Ok(())
    }

    /// Registers the output emitted when the flush edge
    /// `(top, below) ⇒ to` is taken.
    pub fn set_flush_output(&mut self, top: &str, below: &str, to: &str, out: Vec<O>) -> Result<()> {
        let t = self.opa.core.state_checked(top)?;
        let b = self.opa.core.state_checked(below)?;
        let r = self.opa.core.state_checked(to)?;
        self.out_flush.insert((t, b, r), out);
        Ok(())
    }

    /// All outputs along accepting classical runs on `w`, concatenating the
    /// per-move outputs in move order (ending-`#` flushes included).
    pub fn transduce_finite(&self, w: &[impl AsRef<str>]) -> Result<BTreeSet<Vec<O>>> {
        let word = self.opa.core.opm.word(w)?;
        let mut out = BTreeSet::new();
        let mut work: Vec<(Configuration, Vec<O>)> = Vec::new();
        let mut seen: BTreeSet<(Configuration, Vec<O>)> = BTreeSet::new();
        for &q in &self.opa.core.initial {
            let c = Configuration::start(q, word.clone());
            if seen.insert((c.clone(), Vec::new())) {
                work.push((c, Vec::new()));
            }
        }
        while let Some((c, emitted)) = work.pop() {
            if c.remaining.is_empty() && c.stack.len() == 1 && self.opa.finals.contains(&c.state())
            {
                out.insert(emitted.clone());
            }
            let state_before = c.state();
            let below_mark = c
                .stack
                .iter()
                .rposition(|e| e.marked)
                .map(|m| c.stack[m - 1].state);
            for (kind, next) in step_inner(&self.opa, &c, false) {
                let extra = match kind {
                    MoveKind::Push | MoveKind::Mark => {
                        let sym = next.stack.last().expect("just pushed").symbol.expect("pushed symbol");
                        self.out_push.get(&(state_before, sym, next.state()))
                    }
                    MoveKind::Flush => {
                        let below = below_mark.expect("flush had a marked entry");
                        self.out_flush.get(&(state_before, below, next.state()))
                    }
                };
                let mut emitted = emitted.clone();
                if let Some(extra) = extra {
                    emitted.extend(extra.iter().cloned());
                }
                if seen.insert((next.clone(), emitted.clone())) {
                    work.push((next, emitted));
                }
            }
        }
        Ok(out)
    }
}

/// Tag component of the variant-construction states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Tag {
    /// Inside a stack region that is flushed before the word ends.
    B,
    /// On the surviving spine, about to mark (or halt).
    Z,
    /// On the surviving spine, about to push unmarked.
    U,
}

impl Tag {
    fn letter(self) -> char {
        match self {
            Tag::B => 'B',
            Tag::Z => 'Z',
            Tag::U => 'U',
        }
    }
}

/// `(tag, current top symbol, simulated state, committed flush target)`.
type VSt = (Tag, LeftSym, usize, usize);

struct VariantRules<'a> {
    a: &'a Opa,
}

impl Implicit for VariantRules<'_> {
    type St = VSt;

    fn opm(&self) -> &Opm {
        &self.a.core.opm
    }

    fn initials(&self) -> Vec<VSt> {
        let mut out = Vec::new();
        // The bottom entry is on the spine by construction: it is never
        // popped, and its committed target is the state the ending flushes
        // must reach, so it ranges over the final states.
        for &q in &self.a.core.initial {
            for &qf in &self.a.finals {
                out.push((Tag::Z, None, q, qf));
            }
        }
        out
    }

    fn push(&self, st: &VSt, b: usize) -> Vec<VSt> {
        let (x, a, q, p) = *st;
        let Some(rel) = self.a.core.opm.rel(a, b) else {
            return Vec::new();
        };
        let n = self.a.core.states.len();
        let mut out = Vec::new();
        match (x, rel) {
            (Tag::Z, Relation::Yields) => {
                for r in self.a.core.push_targets(q, b) {
                    // A spine mark: commit to the state `s` the simulation
                    // will hold when this new stack section finally flushes,
                    // so that the flush lands on the inherited target `p`.
                    for s in 0..n {
                        if self.a.core.flush_targets(s, q).any(|t| t == p) {
                            out.push((Tag::Z, Some(b), r, s));
                            out.push((Tag::U, Some(b), r, s));
                        }
                    }
                    // Or the section is flushed before the word ends: no
                    // commitment; the carried target is inert until the flush
                    // lands back on this entry and reads it off the stack.
                    out.push((Tag::B, Some(b), r, p));
                }
            }
            (Tag::U, Relation::Equals) => {
                for r in self.a.core.push_targets(q, b) {
                    out.push((Tag::Z, Some(b), r, p));
                    out.push((Tag::U, Some(b), r, p));
                }
            }
            (Tag::B, _) => {
                for r in self.a.core.push_targets(q, b) {
                    out.push((Tag::B, Some(b), r, p));
                }
            }
            _ => {}
        }
        out
    }

    fn flush(&self, top: &VSt, below: &VSt) -> Vec<VSt> {
        // Only fully-flushed (B-tagged) sections flush during the word. The
        // landing entry keeps its own nature: a B entry stays B, a spine
        // entry stays on the spine with its commitment intact — re-tagging
        // across that line would let a run fake an unchecked commitment.
        let (xt, _, q, _) = *top;
        let (xb, c, p, sb) = *below;
        if xt != Tag::B {
            return Vec::new();
        }
        let mut out = Vec::new();
        for r in self.a.core.flush_targets(q, p) {
            if xb == Tag::B {
                out.push((Tag::B, c, r, sb));
            } else {
                out.push((Tag::Z, c, r, sb));
                out.push((Tag::U, c, r, sb));
            }
        }
        out
    }
}

/// Upper bound on the variant construction's state space before pruning:
/// `3 · (|Σ|+1) · |Q|²`.
pub fn classical_to_variant_bound(a: &Opa) -> usize {
    let s = a.core.states.len();
    3 * (a.core.opm.len() + 1) * s * s
}

/// Builds a variant-mode automaton accepting exactly the classical language
/// of `a`. States are tagged quadruples: the simulated state together with
/// the current top symbol, a region tag, and the state the pending ending
/// flushes are committed to produce; the construction prunes to the
/// dynamically reachable part.
pub fn classical_to_variant(a: &Opa) -> Result<Opa> {
    if a.mode != Mode::Classical {
        return Err(Error::Precondition(
            "classical_to_variant requires a classical-mode automaton".into(),
        ));
    }
    let mat = reach::materialize(&VariantRules { a });
    let mut out = Opa::new(a.core.opm.clone(), Mode::Variant);
    let name = |st: &VSt| {
        let (x, sym, q, p) = *st;
        format!(
            "{}:{}:{}:{}",
            x.letter(),
            a.core.opm.left_name(sym),
            a.core.states[q],
            a.core.states[p]
        )
    };
    let ids: Vec<usize> = mat.states.iter().map(|st| out.add_state(&name(st))).collect();
    for &i in &mat.initials {
        out.core.initial.insert(ids[i]);
    }
    for (i, st) in mat.states.iter().enumerate() {
        // Halting is legal exactly when the committed ending-flush target is
        // already the current state, on the spine.
        if st.0 == Tag::Z && st.2 == st.3 {
            out.finals.insert(ids[i]);
        }
    }
    for &(q, sym, r) in &mat.push_edges {
        out.core.add_push_idx(ids[q], sym, ids[r]);
    }
    for &(top, below, r) in &mat.flush_edges {
        out.core.add_flush_idx(ids[top], ids[below], ids[r]);
    }
    Ok(out)
}

/// State of the classical construction: lookback symbol, simulated state,
/// guessed lookahead — plus the dedicated accepting sink.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum CSt {
    Trip(LeftSym, usize, LeftSym),
    Accept,
}

struct ClassicalRules<'a> {
    a: &'a Opa,
}

impl ClassicalRules<'_> {
    fn lookaheads(&self, left: LeftSym) -> Vec<LeftSym> {
        let mut out: Vec<LeftSym> = (0..self.a.core.opm.len())
            .filter(|&c| self.a.core.opm.rel(left, c).is_some())
            .map(Some)
            .collect();
        // The ending # is always a legal lookahead.
        out.push(None);
        out
    }

    fn halted(&self, st: &CSt) -> bool {
        // A state where the variant run has legally halted: lookahead # and
        // a final simulated state.
        matches!(st, CSt::Trip(_, q, None) if self.a.finals.contains(q))
    }
}

impl Implicit for ClassicalRules<'_> {
    type St = CSt;

    fn opm(&self) -> &Opm {
        &self.a.core.opm
    }

    fn initials(&self) -> Vec<CSt> {
        let mut out = Vec::new();
        for &q in &self.a.core.initial {
            for la in self.lookaheads(None) {
                out.push(CSt::Trip(None, q, la));
            }
        }
        if self.a.core.initial.intersection(&self.a.finals).next().is_some() {
            out.push(CSt::Accept);
        }
        out
    }

    fn push(&self, st: &CSt, c: usize) -> Vec<CSt> {
        let CSt::Trip(a, q, Some(b)) = st else {
            return Vec::new();
        };
        if *b != c || self.a.core.opm.rel(*a, c).is_none() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for p in self.a.core.push_targets(*q, c) {
            for la in self.lookaheads(Some(c)) {
                out.push(CSt::Trip(Some(c), p, la));
            }
        }
        out
    }

    fn flush(&self, top: &CSt, below: &CSt) -> Vec<CSt> {
        let mut out = Vec::new();
        // Mid-word flushes replay the variant automaton's own flushes; the
        // guessed lookahead must actually take precedence over the top.
        if let (CSt::Trip(a1, q1, Some(a2)), CSt::Trip(b1, q2, _)) = (top, below) {
            if self.a.core.opm.rel(*a1, *a2) == Some(Relation::Takes)
                && self.a.core.opm.rel(*b1, *a2).is_some()
            {
                for q3 in self.a.core.flush_targets(*q1, *q2) {
                    out.push(CSt::Trip(*b1, q3, Some(*a2)));
                }
            }
        }
        // Ending-# flushes drain into the accepting sink.
        if self.halted(top) || *top == CSt::Accept {
            out.push(CSt::Accept);
        }
        out
    }
}

/// Builds a classical-mode automaton accepting exactly the variant language
/// of `a`. States enrich `a`'s with a lookback and a guessed lookahead
/// symbol; a single accepting sink empties the stack once the word has been
/// read and the simulated run has halted in a final state.
pub fn variant_to_classical(a: &Opa) -> Result<Opa> {
    if a.mode != Mode::Variant {
        return Err(Error::Precondition(
            "variant_to_classical requires a variant-mode automaton".into(),
        ));
    }
    let mat = reach::materialize(&ClassicalRules { a });
    let mut out = Opa::new(a.core.opm.clone(), Mode::Classical);
    let name = |st: &CSt| match st {
        CSt::Trip(lb, q, la) => format!(
            "{}|{}|{}",
            a.core.opm.left_name(*lb),
            a.core.states[*q],
            a.core.opm.left_name(*la)
        ),
        CSt::Accept => "accept".to_string(),
    };
    let ids: Vec<usize> = mat.states.iter().map(|st| out.add_state(&name(st))).collect();
    for &i in &mat.initials {
        out.core.initial.insert(ids[i]);
    }
    let accept = out.add_state("accept");
    out.finals.insert(accept);
    for &(q, sym, r) in &mat.push_edges {
        out.core.add_push_idx(ids[q], sym, ids[r]);
    }
    for &(top, below, r) in &mat.flush_edges {
        out.core.add_flush_idx(ids[top], ids[below], ids[r]);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
pub(crate) struct PushRuleJson {
    pub(crate) from: String,
    pub(crate) symbol: String,
    pub(crate) to: Vec<String>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct FlushRuleJson {
    pub(crate) top: String,
    pub(crate) below: String,
    pub(crate) to: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct OpaJson {
    alphabet: Vec<String>,
    opm: Opm,
    states: Vec<String>,
    initial: Vec<String>,
    #[serde(rename = "final")]
    finals: Vec<String>,
    mode: Mode,
    delta_push: Vec<PushRuleJson>,
    delta_flush: Vec<FlushRuleJson>,
}

pub(crate) fn core_to_json_parts(
    core: &Core,
) -> (Vec<String>, Vec<String>, Vec<String>, Vec<PushRuleJson>, Vec<FlushRuleJson>) {
    let alphabet = core.opm.alphabet().to_vec();
    let states = core.states.clone();
    let initial = core.initial.iter().map(|&i| core.states[i].clone()).collect();
    let delta_push = core
        .push
        .iter()
        .map(|(&(from, sym), to)| PushRuleJson {
            from: core.states[from].clone(),
            symbol: core.opm.name(sym).to_string(),
            to: to.iter().map(|&t| core.states[t].clone()).collect(),
        })
        .collect();
    let delta_flush = core
        .flush
        .iter()
        .map(|(&(top, below), to)| FlushRuleJson {
            top: core.states[top].clone(),
            below: core.states[below].clone(),
            to: to.iter().map(|&t| core.states[t].clone()).collect(),
        })
        .collect();
    (alphabet, states, initial, delta_push, delta_flush)
}

pub(crate) fn core_from_json_parts(
    opm: Opm,
    alphabet: &[String],
    states: &[String],
    initial: &[String],
    delta_push: &[PushRuleJson],
    delta_flush: &[FlushRuleJson],
) -> Result<Core> {
    if opm.alphabet() != alphabet {
        return Err(Error::Invalid {
            what: "automaton".into(),
            why: "top-level alphabet differs from the matrix alphabet".into(),
        });
    }
    let mut core = Core::new(opm);
    for s in states {
        core.add_state(s);
    }
    for s in initial {
        let i = core.state_checked(s)?;
        core.initial.insert(i);
    }
    for rule in delta_push {
        let from = core.state_checked(&rule.from)?;
        let sym = core.opm.sym_checked(&rule.symbol)?;
        for t in &rule.to {
            let t = core.state_checked(t)?;
            core.add_push_idx(from, sym, t);
        }
    }
    for rule in delta_flush {
        let top = core.state_checked(&rule.top)?;
        let below = core.state_checked(&rule.below)?;
        for t in &rule.to {
            let t = core.state_checked(t)?;
            core.add_flush_idx(top, below, t);
        }
    }
    Ok(core)
}

impl Opa {
    pub fn to_json(&self) -> serde_json::Value {
        let (alphabet, states, initial, delta_push, delta_flush) = core_to_json_parts(&self.core);
        serde_json::to_value(OpaJson {
            alphabet,
            opm: self.core.opm.clone(),
            states,
            initial,
            finals: self.finals.iter().map(|&i| self.core.states[i].clone()).collect(),
            mode: self.mode,
            delta_push,
            delta_flush,
        })
        .expect("automaton serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Opa> {
        let raw: OpaJson = serde_json::from_value(v.clone())?;
        let core = core_from_json_parts(
            raw.opm,
            &raw.alphabet,
            &raw.states,
            &raw.initial,
            &raw.delta_push,
            &raw.delta_flush,
        )?;
        let mut opa = Opa {
            core,
            finals: BTreeSet::new(),
            mode: raw.mode,
        };
        for f in &raw.finals {
            opa.mark_final(f)?;
        }
        Ok(opa)
    }
}
