//! Reachable-dynamics saturation for implicitly defined automata.
//!
//! Product constructions (variant conversions, intersections, concatenation,
//! the complement pipeline) are naturally described by transition *rules*
//! over structured states; enumerating their full cartesian state space is
//! wasteful and, for the complement, infeasible. This module explores only
//! the dynamically reachable part, using chain-support summaries: a *level*
//! is the stack segment opened by a mark move, `Summary(anchor) ∋ r` records
//! that a level opened on top of `anchor` can flush back exposing state `r`.
//!
//! The saturation over-approximates in one place: it treats every flush as
//! enabled regardless of the lookahead that would trigger it. That may
//! discover transitions the concrete runs never use, which is harmless —
//! they are still instances of the defining rules — but never misses one.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::Hash;

use crate::opm::{LeftSym, Opm, Relation};

/// An automaton given by transition rules instead of tables.
pub(crate) trait Implicit {
    type St: Clone + Eq + Hash + Ord;

    fn opm(&self) -> &Opm;
    fn initials(&self) -> Vec<Self::St>;
    /// Push *and* mark targets (the OPM decides which move kind applies).
    fn push(&self, q: &Self::St, sym: usize) -> Vec<Self::St>;
    /// Flush targets for a (top state, below-the-mark state) pair.
    fn flush(&self, top: &Self::St, below: &Self::St) -> Vec<Self::St>;
}

/// Reachable fragment of an [`Implicit`] automaton: interned states, the
/// transition edges observed, and reachability hints consumed by the
/// pushdown encoding.
pub(crate) struct Materialized<St> {
    pub states: Vec<St>,
    pub initials: Vec<usize>,
    /// `(state, symbol, target)` push/mark edges.
    pub push_edges: BTreeSet<(usize, usize, usize)>,
    /// `(top state, below state, target)` flush edges.
    pub flush_edges: BTreeSet<(usize, usize, usize)>,
    /// Reachable `(state, top-of-stack symbol)` configurations.
    pub configs: BTreeSet<(usize, LeftSym)>,
    /// `(pushing state, symbol, marked)`: stack entries that can exist.
    pub push_contexts: BTreeSet<(usize, usize, bool)>,
}

type Cfg = (usize, LeftSym);
/// `None` is the outermost level (above the stack bottom); `Some(cfg)` the
/// level opened by a mark performed from `cfg`.
type Ctx = Option<Cfg>;

pub(crate) fn materialize<A: Implicit>(aut: &A) -> Materialized<A::St> {
    let opm = aut.opm().clone();
    let n = opm.len();

    let mut states: Vec<A::St> = Vec::new();
    let mut index: HashMap<A::St, usize> = HashMap::new();
    let intern = |st: A::St, states: &mut Vec<A::St>, index: &mut HashMap<A::St, usize>| {
        *index.entry(st.clone()).or_insert_with(|| {
            states.push(st);
            states.len() - 1
        })
    };

    let mut out = Materialized {
        states: Vec::new(),
        initials: Vec::new(),
        push_edges: BTreeSet::new(),
        flush_edges: BTreeSet::new(),
        configs: BTreeSet::new(),
        push_contexts: BTreeSet::new(),
    };

    let mut members: HashMap<Ctx, BTreeSet<Cfg>> = HashMap::new();
    let mut member_ctxs: HashMap<Cfg, BTreeSet<Ctx>> = HashMap::new();
    let mut summaries: HashMap<Cfg, BTreeSet<usize>> = HashMap::new();
    let mut work: VecDeque<(Ctx, Cfg)> = VecDeque::new();

    // Queue-based insertion so summary propagation cannot recurse.
    let mut pending: VecDeque<(Ctx, Cfg)> = VecDeque::new();
    macro_rules! add_member {
        ($ctx:expr, $cfg:expr) => {
            pending.push_back(($ctx, $cfg));
        };
    }
    let drain = |pending: &mut VecDeque<(Ctx, Cfg)>,
                 members: &mut HashMap<Ctx, BTreeSet<Cfg>>,
                 member_ctxs: &mut HashMap<Cfg, BTreeSet<Ctx>>,
                 summaries: &HashMap<Cfg, BTreeSet<usize>>,
                 configs: &mut BTreeSet<Cfg>,
                 work: &mut VecDeque<(Ctx, Cfg)>| {
        while let Some((ctx, cfg)) = pending.pop_front() {
            if members.entry(ctx).or_default().insert(cfg) {
                work.push_back((ctx, cfg));
            }
            configs.insert(cfg);
            if member_ctxs.entry(cfg).or_default().insert(ctx) {
                // A level anchored at `cfg` may already have summaries.
                if let Some(results) = summaries.get(&cfg) {
                    for &r in results {
                        pending.push_back((ctx, (r, cfg.1)));
                    }
                }
            }
        }
    };

    for st in aut.initials() {
        let i = intern(st, &mut states, &mut index);
        out.initials.push(i);
        add_member!(None, (i, None));
    }
    drain(
        &mut pending,
        &mut members,
        &mut member_ctxs,
        &summaries,
        &mut out.configs,
        &mut work,
    );

    while let Some((ctx, (q, s))) = work.pop_front() {
        // Push and mark moves on every related lookahead.
        for b in 0..n {
            let Some(rel) = opm.rel(s, b) else { continue };
            if rel == Relation::Takes {
                continue;
            }
            let marked = rel == Relation::Yields;
            let targets = aut.push(&states[q].clone(), b);
            for t in targets {
                let r = intern(t, &mut states, &mut index);
                out.push_contexts.insert((q, b, marked));
                out.push_edges.insert((q, b, r));
                if marked {
                    // A mark opens a level anchored at the current config.
                    add_member!(Some((q, s)), (r, Some(b)));
                } else {
                    add_member!(ctx, (r, Some(b)));
                }
            }
        }
        // Flush completion of the enclosing level (lookahead abstracted).
        if let Some(anchor @ (aq, asym)) = ctx {
            let targets = aut.flush(&states[q].clone(), &states[aq].clone());
            for t in targets {
                let r = intern(t, &mut states, &mut index);
                out.flush_edges.insert((q, aq, r));
                if summaries.entry(anchor).or_default().insert(r) {
                    if let Some(ctxs) = member_ctxs.get(&anchor) {
                        for parent in ctxs.clone() {
                            add_member!(parent, (r, asym));
                        }
                    }
                }
            }
        }
        drain(
            &mut pending,
            &mut members,
            &mut member_ctxs,
            &summaries,
            &mut out.configs,
            &mut work,
        );
    }

    out.states = states;
    out
}
