//! ω-word operator precedence automata.
//!
//! An [`OmegaOpa`] runs on infinite words — presented throughout as
//! ultimately periodic [`Lasso`]s `u·v^ω` — with one of three acceptance
//! conditions: Büchi on final states, Büchi on empty-stack configurations,
//! or Muller over the set of states recurring at the top of the stack.
//! The module provides structural validation, transition completion,
//! conversions from the empty-stack and Muller conditions into the Büchi
//! final-state normal form, single-lasso automata, and lasso membership.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::opa::{Core, Mode, Opa, ValidationReport};
use crate::opm::Opm;
use crate::reach::{self, Implicit};
use crate::{Error, Result};

/// Acceptance condition of an ω-automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Acceptance {
    /// Accept iff some state of the set occurs infinitely often.
    BuchiFinal(BTreeSet<usize>),
    /// Accept iff infinitely often the stack is bottom-only while the
    /// current state is in the set.
    BuchiEmptyStack(BTreeSet<usize>),
    /// Accept iff the set of states occurring infinitely often at the top
    /// of the stack is exactly one of the table's sets.
    Muller(BTreeSet<BTreeSet<usize>>),
}

/// Acceptance kind selector used when building an automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcceptanceKind {
    BuchiFinal,
    BuchiEmptyStack,
    Muller,
}

impl Acceptance {
    pub fn kind(&self) -> AcceptanceKind {
        match self {
            Acceptance::BuchiFinal(_) => AcceptanceKind::BuchiFinal,
            Acceptance::BuchiEmptyStack(_) => AcceptanceKind::BuchiEmptyStack,
            Acceptance::Muller(_) => AcceptanceKind::Muller,
        }
    }
}

/// An operator precedence ω-automaton. The matrix never mentions the ending
/// `#`: infinite words have no end.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaOpa {
    pub(crate) core: Core,
    pub(crate) acceptance: Acceptance,
}

impl OmegaOpa {
    pub fn new(opm: Opm, kind: AcceptanceKind) -> OmegaOpa {
        let acceptance = match kind {
            AcceptanceKind::BuchiFinal => Acceptance::BuchiFinal(BTreeSet::new()),
            AcceptanceKind::BuchiEmptyStack => Acceptance::BuchiEmptyStack(BTreeSet::new()),
            AcceptanceKind::Muller => Acceptance::Muller(BTreeSet::new()),
        };
        OmegaOpa {
            core: Core::new(opm),
            acceptance,
        }
    }

    pub fn opm(&self) -> &Opm {
        &self.core.opm
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acceptance
    }

    pub fn states(&self) -> &[String] {
        &self.core.states
    }

    pub fn add_state(&mut self, name: &str) -> usize {
        self.core.add_state(name)
    }

    pub fn mark_initial(&mut self, name: &str) -> Result<()> {
        let i = self.core.state_checked(name)?;
        self.core.initial.insert(i);
        Ok(())
    }

    /// Adds a state to the Büchi acceptance set; errors for Muller
    /// automata, whose acceptance is given by [`add_muller_set`].
    ///
    /// [`add_muller_set`]: OmegaOpa::add_muller_set
    pub fn mark_final(&mut self, name: &str) -> Result<()> {
        let i = self.core.state_checked(name)?;
        match &mut self.acceptance {
            Acceptance::BuchiFinal(f) | Acceptance::BuchiEmptyStack(f) => {
                f.insert(i);
                Ok(())
            }
            Acceptance::Muller(_) => Err(Error::Precondition(
                "a Muller automaton has a table, not a final-state set".into(),
            )),
        }
    }

    pub fn add_muller_set<S: AsRef<str>>(&mut self, set: &[S]) -> Result<()> {
        let Acceptance::Muller(table) = &mut self.acceptance else {
            return Err(Error::Precondition(
                "add_muller_set requires a Muller automaton".into(),
            ));
        };
        let mut resolved = BTreeSet::new();
        for s in set {
            resolved.insert(
                self.core
                    .index
                    .get(s.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownState(s.as_ref().to_string()))?,
            );
        }
        table.insert(resolved);
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

    pub fn is_deterministic(&self) -> bool {
        self.core.is_deterministic()
    }

    pub fn initial_states(&self) -> impl Iterator<Item = &str> {
        self.core.initial.iter().map(|&i| self.core.states[i].as_str())
    }

    /// Names of the states in the Büchi acceptance set (empty for Muller).
    pub fn final_states(&self) -> Vec<&str> {
        match &self.acceptance {
            Acceptance::BuchiFinal(f) | Acceptance::BuchiEmptyStack(f) => {
                f.iter().map(|&i| self.core.states[i].as_str()).collect()
            }
            Acceptance::Muller(_) => Vec::new(),
        }
    }

    /// Reinterprets the transition structure as a finite-word automaton,
    /// with the acceptance-relevant states as finals. Used for bounded run
    /// simulation; the ω-acceptance itself is not expressible finitely.
    pub fn to_opa_skeleton(&self) -> Opa {
        let finals = match &self.acceptance {
            Acceptance::BuchiFinal(f) | Acceptance::BuchiEmptyStack(f) => f.clone(),
            Acceptance::Muller(table) => table.iter().flatten().copied().collect(),
        };
        Opa {
            core: self.core.clone(),
            finals,
            mode: Mode::Variant,
        }
    }
}

/// Structural validation plus acceptance well-formedness. Acceptance sets
/// are index-checked at construction, so this mirrors [`Opa::validate`].
pub fn validate_omega(a: &OmegaOpa) -> ValidationReport {
    let reachable = a.core.reachable();
    ValidationReport {
        conflict_free: true,
        eq_acyclic: crate::opm::is_eq_acyclic(&a.core.opm).0,
        deterministic: a.is_deterministic(),
        unreachable: (0..a.core.states.len())
            .filter(|i| !reachable.contains(i))
            .map(|i| a.core.states[i].clone())
            .collect(),
    }
}

/// An ultimately periodic infinite word `u·v^ω`, the finite presentation
/// used for every ω-decision.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lasso {
    pub prefix: Vec<String>,
    pub period: Vec<String>,
}

impl Lasso {
    pub fn new<S: AsRef<str>>(prefix: &[S], period: &[S]) -> Result<Lasso> {
        if period.is_empty() {
            return Err(Error::Invalid {
                what: "lasso".into(),
                why: "the period must be nonempty".into(),
            });
        }
        Ok(Lasso {
            prefix: prefix.iter().map(|s| s.as_ref().to_string()).collect(),
            period: period.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    /// Parses the `"u ; v"` syntax: two whitespace-separated symbol lists
    /// split on a single `;`, the first possibly empty.
    pub fn parse(text: &str) -> Result<Lasso> {
        let Some((u, v)) = text.split_once(';') else {
            return Err(Error::Invalid {
                what: "lasso".into(),
                why: "expected `u ; v` with a `;` separator".into(),
            });
        };
        let split = |s: &str| -> Vec<String> {
            s.split_whitespace().map(|t| t.to_string()).collect()
        };
        Lasso::new(&split(u), &split(v))
    }

    /// The first `n` letters of `u·v^ω`.
    pub fn unroll(&self, n: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        out.extend(self.prefix.iter().take(n).cloned());
        while out.len() < n {
            for s in &self.period {
                if out.len() == n {
                    break;
                }
                out.push(s.clone());
            }
        }
        out
    }
}

impl std::fmt::Display for Lasso {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ; {}", self.prefix.join(" "), self.period.join(" "))
    }
}

/// A run over a finite prefix of an ω-word: breadth-first over
/// configurations until the whole prefix is consumed, with no ending-`#`
/// flushes. Returns the shortest such run (unique when the automaton is
/// deterministic), or `None` when every run gets stuck early.
pub fn trace_prefix(a: &OmegaOpa, w: &[impl AsRef<str>]) -> Result<Option<crate::opa::Trace>> {
    let skeleton = a.to_opa_skeleton();
    crate::opa::run_to_consumption(&skeleton, w)
}

/// Adds a non-accepting sink with total push and flush behavior, so every
/// matrix-compatible ω-word has a run. The language is unchanged: the sink
/// can never be left and is never acceptance-relevant.
pub fn complete_transitions(a: &OmegaOpa) -> OmegaOpa {
    let mut out = a.clone();
    let mut sink_name = "sink".to_string();
    while out.core.index.contains_key(&sink_name) {
        sink_name.push('_');
    }
    let sink = out.core.add_state(&sink_name);
    let n = out.core.states.len();
    let sigma = out.core.opm.len();
    for q in 0..n {
        for b in 0..sigma {
            if out.core.push_targets(q, b).next().is_none() {
                out.core.add_push_idx(q, b, sink);
            }
        }
        for p in 0..n {
            if out.core.flush_targets(q, p).next().is_none() {
                out.core.add_flush_idx(q, p, sink);
            }
        }
    }
    out
}

/// Whether every push and flush image is nonempty.
pub fn is_transition_complete(a: &OmegaOpa) -> bool {
    let n = a.core.states.len();
    let sigma = a.core.opm.len();
    (0..n).all(|q| {
        (0..sigma).all(|b| a.core.push_targets(q, b).next().is_some())
            && (0..n).all(|p| a.core.flush_targets(q, p).next().is_some())
    })
}

/// Converts Büchi empty-stack acceptance to Büchi final-state acceptance by
/// tagging each state with whether the stack is currently bottom-only:
/// pushes always land in the `n` tag, a flush inherits the tag of the state
/// below the popped mark (that state was current when the mark was pushed,
/// so its tag records exactly whether the mark sat on the bottom).
pub fn empty_stack_to_final(a: &OmegaOpa) -> Result<OmegaOpa> {
    let Acceptance::BuchiEmptyStack(finals) = &a.acceptance else {
        return Err(Error::Precondition(
            "empty_stack_to_final requires Büchi empty-stack acceptance".into(),
        ));
    };
    let mut out = OmegaOpa::new(a.core.opm.clone(), AcceptanceKind::BuchiFinal);
    let n = a.core.states.len();
    let id = |q: usize, empty: bool| -> String {
        format!("{}@{}", a.core.states[q], if empty { 'e' } else { 'n' })
    };
    for q in 0..n {
        for tag in [true, false] {
            out.core.add_state(&id(q, tag));
        }
    }
    let idx = |q: usize, empty: bool| 2 * q + usize::from(!empty);
    for &q in &a.core.initial {
        out.core.initial.insert(idx(q, true));
    }
    for &q in finals {
        let i = idx(q, true);
        if let Acceptance::BuchiFinal(f) = &mut out.acceptance {
            f.insert(i);
        }
    }
    for (&(q, b), targets) in &a.core.push.clone() {
        for &r in targets {
            for tag in [true, false] {
                out.core.add_push_idx(idx(q, tag), b, idx(r, false));
            }
        }
    }
    for (&(top, below), targets) in &a.core.flush.clone() {
        for &r in targets {
            for ttag in [true, false] {
                for btag in [true, false] {
                    out.core
                        .add_flush_idx(idx(top, ttag), idx(below, btag), idx(r, btag));
                }
            }
        }
    }
    Ok(out)
}

/// State of the Muller-to-Büchi construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum MSt {
    /// Initial phase: a plain copy of the source automaton.
    One(usize),
    /// Committed phase: `(state, table index, visited subset, just cycled)`.
    /// The run guessed that the recurring-state set is exactly the indexed
    /// table entry, may no longer leave it, and must cycle through all of
    /// its states forever; the flag marks each completed cycle.
    Two(usize, usize, BTreeSet<usize>, bool),
}

impl MSt {
    fn state(&self) -> usize {
        match self {
            MSt::One(q) => *q,
            MSt::Two(q, ..) => *q,
        }
    }
}

struct MullerRules<'a> {
    a: &'a OmegaOpa,
    table: Vec<BTreeSet<usize>>,
}

impl MullerRules<'_> {
    /// Successors reachable from phase `from` when the underlying automaton
    /// moves to state `r`: stay in phase (when legal) or commit to a table
    /// entry containing `r`.
    fn wrap(&self, from: &MSt, r: usize) -> Vec<MSt> {
        let mut out = Vec::new();
        match from {
            MSt::One(_) => {
                out.push(MSt::One(r));
                for (i, set) in self.table.iter().enumerate() {
                    if set.contains(&r) {
                        out.push(self.advance(i, &BTreeSet::new(), r));
                    }
                }
            }
            MSt::Two(_, i, visited, _) => {
                if self.table[*i].contains(&r) {
                    out.push(self.advance(*i, visited, r));
                }
            }
        }
        out
    }

    fn advance(&self, i: usize, visited: &BTreeSet<usize>, r: usize) -> MSt {
        let mut v = visited.clone();
        v.insert(r);
        if v == self.table[i] {
            MSt::Two(r, i, BTreeSet::from([r]), true)
        } else {
            MSt::Two(r, i, v, false)
        }
    }
}

impl Implicit for MullerRules<'_> {
    type St = MSt;

    fn opm(&self) -> &Opm {
        &self.a.core.opm
    }

    fn initials(&self) -> Vec<MSt> {
        self.a.core.initial.iter().map(|&q| MSt::One(q)).collect()
    }

    fn push(&self, st: &MSt, b: usize) -> Vec<MSt> {
        let mut out = Vec::new();
        for r in self.a.core.push_targets(st.state(), b) {
            out.extend(self.wrap(st, r));
        }
        out
    }

    fn flush(&self, top: &MSt, below: &MSt) -> Vec<MSt> {
        let mut out = Vec::new();
        for r in self.a.core.flush_targets(top.state(), below.state()) {
            out.extend(self.wrap(top, r));
        }
        out
    }
}

/// Converts Muller acceptance to Büchi final-state acceptance with the
/// usual guess-the-set construction on control states — sound here because
/// the states recurring at the top of the stack are exactly the run's
/// control states. A run nondeterministically commits to one table entry,
/// thereafter stays inside it and cycles through all of its members;
/// completed cycles are the Büchi condition.
pub fn muller_to_buchi(a: &OmegaOpa) -> Result<OmegaOpa> {
    let Acceptance::Muller(table) = &a.acceptance else {
        return Err(Error::Precondition(
            "muller_to_buchi requires Muller acceptance".into(),
        ));
    };
    let rules = MullerRules {
        a,
        table: table.iter().cloned().collect(),
    };
    let mat = reach::materialize(&rules);
    let mut out = OmegaOpa::new(a.core.opm.clone(), AcceptanceKind::BuchiFinal);
    let name = |st: &MSt| match st {
        MSt::One(q) => a.core.states[*q].clone(),
        MSt::Two(q, i, v, flag) => {
            let members: Vec<&str> = v.iter().map(|&m| a.core.states[m].as_str()).collect();
            format!(
                "{}@{}{{{}}}{}",
                a.core.states[*q],
                i,
                members.join(","),
                if *flag { "!" } else { "" }
            )
        }
    };
    let ids: Vec<usize> = mat.states.iter().map(|st| out.core.add_state(&name(st))).collect();
    for &i in &mat.initials {
        out.core.initial.insert(ids[i]);
    }
    for (i, st) in mat.states.iter().enumerate() {
        if matches!(st, MSt::Two(_, _, _, true)) {
            if let Acceptance::BuchiFinal(f) = &mut out.acceptance {
                f.insert(ids[i]);
            }
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

/// Normalizes any acceptance to Büchi final-state form.
pub fn to_buchi_final(a: &OmegaOpa) -> Result<OmegaOpa> {
    match a.acceptance {
        Acceptance::BuchiFinal(_) => Ok(a.clone()),
        Acceptance::BuchiEmptyStack(_) => empty_stack_to_final(a),
        Acceptance::Muller(_) => muller_to_buchi(a),
    }
}

/// A position-tracking automaton accepting exactly `{u·v^ω}` (intersected
/// with the matrix-compatible words): state `i` reads the letter at
/// position `i` and moves on, the period wrapping back after the prefix;
/// flushes keep the position. All states are accepting.
pub fn lasso_automaton(m: &Opm, l: &Lasso) -> Result<OmegaOpa> {
    let mut word = m.word(&l.prefix)?;
    word.extend(m.word(&l.period)?);
    let mut out = OmegaOpa::new(m.clone(), AcceptanceKind::BuchiFinal);
    for i in 0..word.len() {
        out.core.add_state(&format!("p{i}"));
    }
    out.core.initial.insert(0);
    if let Acceptance::BuchiFinal(f) = &mut out.acceptance {
        f.extend(0..word.len());
    }
    for (i, &b) in word.iter().enumerate() {
        let next = if i + 1 == word.len() { l.prefix.len() } else { i + 1 };
        out.core.add_push_idx(i, b, next);
    }
    for p in 0..word.len() {
        for q in 0..word.len() {
            out.core.add_flush_idx(p, q, p);
        }
    }
    Ok(out)
}

/// Whether `u·v^ω ∈ L(a)`: the acceptance is normalized to Büchi
/// final-state form, intersected with the single-lasso automaton, and the
/// product is checked for emptiness.
pub fn accepts_lasso(a: &OmegaOpa, l: &Lasso) -> Result<bool> {
    let bf = complete_transitions(&to_buchi_final(a)?);
    let single = complete_transitions(&lasso_automaton(&a.core.opm, l)?);
    let product = crate::closures::intersect(&bf, &single)?;
    Ok(!crate::pds::is_empty_omega_quick(&product)?)
}

#[derive(Serialize, Deserialize)]
struct AcceptanceJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty", rename = "final")]
    finals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    table: Vec<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct OmegaJson {
    alphabet: Vec<String>,
    opm: Opm,
    states: Vec<String>,
    initial: Vec<String>,
    acceptance: AcceptanceJson,
    delta_push: Vec<crate::opa::PushRuleJson>,
    delta_flush: Vec<crate::opa::FlushRuleJson>,
}

impl OmegaOpa {
    pub fn to_json(&self) -> serde_json::Value {
        let (alphabet, states, initial, delta_push, delta_flush) =
            crate::opa::core_to_json_parts(&self.core);
        let names = |set: &BTreeSet<usize>| -> Vec<String> {
            set.iter().map(|&i| self.core.states[i].clone()).collect()
        };
        let acceptance = match &self.acceptance {
            Acceptance::BuchiFinal(f) => AcceptanceJson {
                kind: "buchi_final".into(),
                finals: names(f),
                table: Vec::new(),
            },
            Acceptance::BuchiEmptyStack(f) => AcceptanceJson {
                kind: "buchi_empty_stack".into(),
                finals: names(f),
                table: Vec::new(),
            },
            Acceptance::Muller(t) => AcceptanceJson {
                kind: "muller".into(),
                finals: Vec::new(),
                table: t.iter().map(|s| names(s)).collect(),
            },
        };
        serde_json::to_value(OmegaJson {
            alphabet,
            opm: self.core.opm.clone(),
            states,
            initial,
            acceptance,
            delta_push,
            delta_flush,
        })
        .expect("automaton serialization cannot fail")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<OmegaOpa> {
        let raw: OmegaJson = serde_json::from_value(v.clone())?;
        let core = crate::opa::core_from_json_parts(
            raw.opm,
            &raw.alphabet,
            &raw.states,
            &raw.initial,
            &raw.delta_push,
            &raw.delta_flush,
        )?;
        let kind = match raw.acceptance.kind.as_str() {
            "buchi_final" => AcceptanceKind::BuchiFinal,
            "buchi_empty_stack" => AcceptanceKind::BuchiEmptyStack,
            "muller" => AcceptanceKind::Muller,
            other => {
                return Err(Error::Invalid {
                    what: "acceptance".into(),
                    why: format!("unknown kind `{other}`"),
                })
            }
        };
        let mut out = OmegaOpa {
            core,
            acceptance: match kind {
                AcceptanceKind::BuchiFinal => Acceptance::BuchiFinal(BTreeSet::new()),
                AcceptanceKind::BuchiEmptyStack => Acceptance::BuchiEmptyStack(BTreeSet::new()),
                AcceptanceKind::Muller => Acceptance::Muller(BTreeSet::new()),
            },
        };
        match kind {
            AcceptanceKind::Muller => {
                for set in &raw.acceptance.table {
                    out.add_muller_set(set)?;
                }
            }
            _ => {
                for f in &raw.acceptance.finals {
                    out.mark_final(f)?;
                }
            }
        }
        Ok(out)
    }
}
