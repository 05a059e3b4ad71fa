//! Operator precedence matrices, word compatibility and chains.
//!
//! An [`Opm`] assigns at most one precedence relation (`⋖`, `≐`, `⋗`) to each
//! ordered pair of terminal symbols, plus a `#`-row for relations between the
//! start-of-word delimiter and each symbol. The ending delimiter is never
//! stored: every symbol takes precedence over the ending `#`, and `# ≐ #`
//! covers the empty word.
//!
//! The matrix alone already defines structure on words: which finite words
//! can be parsed to completion ([`compatible_finite`]), which bracketed
//! bodies form *chains* ([`is_chain`]), and the unique factorization of a
//! word into maximal chain bodies and pending letters ([`factorize`]).

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One precedence relation between a (possibly `#`) left symbol and a right
/// symbol. Serialized as `"lt"`, `"eq"`, `"gt"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    /// `a ⋖ b`: `b` starts a new chain nested below `a` (mark move).
    #[serde(rename = "lt")]
    Yields,
    /// `a ≐ b`: `b` extends the current chain body (push move).
    #[serde(rename = "eq")]
    Equals,
    /// `a ⋗ b`: the chain ending at `a` closes before `b` (flush move).
    #[serde(rename = "gt")]
    Takes,
}

impl Relation {
    /// ASCII name used in reports and DOT output.
    pub fn ascii(self) -> &'static str {
        match self {
            Relation::Yields => "lt",
            Relation::Equals => "eq",
            Relation::Takes => "gt",
        }
    }

    /// Unicode glyph for pretty printing.
    pub fn glyph(self) -> &'static str {
        match self {
            Relation::Yields => "⋖",
            Relation::Equals => "≐",
            Relation::Takes => "⋗",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ascii())
    }
}

/// A left operand of the matrix: either a terminal (by index) or the start
/// delimiter `#`.
///
/// `None` plays the role of `#` throughout the crate: stack bottoms, left
/// contexts of top-level chains, and the `#`-row of the matrix.
pub type LeftSym = Option<usize>;

/// An operator precedence matrix over an ordered alphabet.
///
/// Conflict-freeness is maintained by construction: [`Opm::set`] and
/// [`opm_union`] refuse to overwrite a cell with a different relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Opm {
    alphabet: Vec<String>,
    index: HashMap<String, usize>,
    /// `cells[a * n + b]` for terminals `a`, `b`.
    cells: Vec<Option<Relation>>,
    /// `hash_row[b]` is the relation between `#` and terminal `b`.
    hash_row: Vec<Option<Relation>>,
}

impl Opm {
    /// Creates an empty matrix over the given alphabet. Symbol order is
    /// preserved; duplicate symbols are rejected.
    pub fn new<S: AsRef<str>>(alphabet: &[S]) -> Result<Opm> {
        let mut index = HashMap::new();
        let mut syms = Vec::new();
        for s in alphabet {
            let s = s.as_ref().to_owned();
            if index.insert(s.clone(), syms.len()).is_some() {
                return Err(Error::Invalid {
                    what: "alphabet".into(),
                    why: format!("duplicate symbol `{s}`"),
                });
            }
            syms.push(s);
        }
        let n = syms.len();
        Ok(Opm {
            alphabet: syms,
            index,
            cells: vec![None; n * n],
            hash_row: vec![None; n],
        })
    }

    /// The alphabet, in declaration order.
    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    /// Number of terminal symbols.
    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    /// True when the alphabet is empty.
    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    /// Index of a symbol name, if present.
    pub fn sym(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Index of a symbol name, or an [`Error::UnknownSymbol`].
    pub fn sym_checked(&self, name: &str) -> Result<usize> {
        self.sym(name)
            .ok_or_else(|| Error::UnknownSymbol(name.to_owned()))
    }

    /// Symbol name for an index.
    pub fn name(&self, sym: usize) -> &str {
        &self.alphabet[sym]
    }

    /// Display name for a left operand (`#` for the delimiter).
    pub fn left_name(&self, a: LeftSym) -> &str {
        match a {
            Some(i) => self.name(i),
            None => "#",
        }
    }

    /// Stores a relation between two terminals. Fails on a conflicting
    /// existing entry; storing the same relation twice is a no-op.
    pub fn set(&mut self, a: &str, b: &str, rel: Relation) -> Result<()> {
        let ai = self.sym_checked(a)?;
        let bi = self.sym_checked(b)?;
        self.set_idx(Some(ai), bi, rel)
    }

    /// Stores a `#`-row relation. Only `⋖` is accepted there.
    pub fn set_hash(&mut self, b: &str, rel: Relation) -> Result<()> {
        let bi = self.sym_checked(b)?;
        self.set_idx(None, bi, rel)
    }

    pub(crate) fn set_idx(&mut self, a: LeftSym, b: usize, rel: Relation) -> Result<()> {
        if a.is_none() && rel != Relation::Yields {
            return Err(Error::Invalid {
                what: "opm".into(),
                why: format!(
                    "the # row may only yield precedence; (#, {}) cannot be {}",
                    self.name(b),
                    rel
                ),
            });
        }
        let slot = match a {
            Some(ai) => &mut self.cells[ai * self.alphabet.len() + b],
            None => &mut self.hash_row[b],
        };
        match *slot {
            None => {
                *slot = Some(rel);
                Ok(())
            }
            Some(old) if old == rel => Ok(()),
            Some(old) => Err(Error::Conflict {
                a: self.left_name(a).to_owned(),
                b: self.name(b).to_owned(),
                first: old.ascii().into(),
                second: rel.ascii().into(),
            }),
        }
    }

    /// Relation between a left operand and a terminal, by index.
    pub fn rel(&self, a: LeftSym, b: usize) -> Option<Relation> {
        match a {
            Some(ai) => self.cells[ai * self.alphabet.len() + b],
            None => self.hash_row[b],
        }
    }

    /// Relation against the *ending* delimiter: every terminal takes
    /// precedence over the ending `#`, and `# ≐ #`.
    pub fn rel_end(&self, a: LeftSym) -> Relation {
        match a {
            Some(_) => Relation::Takes,
            None => Relation::Equals,
        }
    }

    /// Relation where the right context may itself be `#` (ending). Used by
    /// chain checking, where right contexts range over `Σ ∪ {#}`.
    pub fn rel_right(&self, a: LeftSym, b: LeftSym) -> Option<Relation> {
        match b {
            Some(bi) => self.rel(a, bi),
            None => Some(self.rel_end(a)),
        }
    }

    /// Iterates over all stored cells as `(left, right, relation)`.
    pub fn iter_cells(&self) -> impl Iterator<Item = (LeftSym, usize, Relation)> + '_ {
        let n = self.alphabet.len();
        let terms = (0..n).flat_map(move |a| {
            (0..n).filter_map(move |b| self.cells[a * n + b].map(|r| (Some(a), b, r)))
        });
        let hash = (0..n).filter_map(move |b| self.hash_row[b].map(|r| (None, b, r)));
        terms.chain(hash)
    }

    /// Looks up a word given as symbol names, returning indices.
    pub fn word(&self, w: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        w.iter().map(|s| self.sym_checked(s.as_ref())).collect()
    }
}

/// Relation of `m` between `a` (a symbol name or `"#"`) and symbol `b`.
/// Returns `None` for an empty cell.
pub fn relation_of(m: &Opm, a: &str, b: &str) -> Result<Option<Relation>> {
    let left = if a == "#" {
        None
    } else {
        Some(m.sym_checked(a)?)
    };
    let bi = m.sym_checked(b)?;
    Ok(m.rel(left, bi))
}

/// Embeds `m` into a (super-)alphabet, keeping all cells. The target
/// alphabet must contain every symbol of `m`.
pub fn embed(m: &Opm, alphabet: &[String]) -> Result<Opm> {
    let mut out = Opm::new(alphabet)?;
    for (a, b, rel) in m.iter_cells() {
        let bi = out.sym_checked(m.name(b))?;
        let ai = match a {
            Some(i) => Some(out.sym_checked(m.name(i))?),
            None => None,
        };
        out.set_idx(ai, bi, rel)?;
    }
    Ok(out)
}

/// Cell-wise union of two matrices. The alphabets are united (symbols of
/// `m1` first, then new symbols of `m2` in order); a cell present in both
/// inputs with different relations is a compatibility error.
pub fn opm_union(m1: &Opm, m2: &Opm) -> Result<Opm> {
    let mut alphabet: Vec<String> = m1.alphabet().to_vec();
    for s in m2.alphabet() {
        if !alphabet.iter().any(|t| t == s) {
            alphabet.push(s.clone());
        }
    }
    let mut out = embed(m1, &alphabet)?;
    for (a, b, rel) in m2.iter_cells() {
        let bi = out.sym_checked(m2.name(b))?;
        let ai = match a {
            Some(i) => Some(out.sym_checked(m2.name(i))?),
            None => None,
        };
        out.set_idx(ai, bi, rel)?;
    }
    Ok(out)
}

/// True iff every stored cell of `m1` appears with the same relation in
/// `m2`. Symbols of `m1` must all exist in `m2`'s alphabet.
pub fn opm_includes(m1: &Opm, m2: &Opm) -> bool {
    m1.iter_cells().all(|(a, b, rel)| {
        let Some(bi) = m2.sym(m1.name(b)) else {
            return false;
        };
        let ai = match a {
            Some(i) => match m2.sym(m1.name(i)) {
                Some(j) => Some(j),
                None => return false,
            },
            None => None,
        };
        m2.rel(ai, bi) == Some(rel)
    })
}

/// Checks that the `≐` cells of `m` form an acyclic graph. On failure the
/// witness is one cycle `c1 ≐ c2 ≐ … ≐ c1` (first symbol not repeated).
pub fn is_eq_acyclic(m: &Opm) -> (bool, Option<Vec<String>>) {
    let n = m.len();
    // Iterative DFS with colouring; collects the cycle from the stack.
    let mut colour = vec![0u8; n]; // 0 white, 1 grey, 2 black
    let succs: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| m.rel(Some(a), b) == Some(Relation::Equals))
                .collect()
        })
        .collect();
    let mut path: Vec<usize> = Vec::new();
    fn dfs(
        v: usize,
        succs: &Vec<Vec<usize>>,
        colour: &mut [u8],
        path: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        colour[v] = 1;
        path.push(v);
        for &w in &succs[v] {
            match colour[w] {
                0 => {
                    if let Some(c) = dfs(w, succs, colour, path) {
                        return Some(c);
                    }
                }
                1 => {
                    let start = path.iter().position(|&x| x == w).unwrap();
                    return Some(path[start..].to_vec());
                }
                _ => {}
            }
        }
        path.pop();
        colour[v] = 2;
        None
    }
    for v in 0..n {
        if colour[v] == 0 {
            if let Some(cycle) = dfs(v, &succs, &mut colour, &mut path) {
                let names = cycle.iter().map(|&i| m.name(i).to_owned()).collect();
                return (false, Some(names));
            }
        }
    }
    (true, None)
}

/// Fills every empty cell: `⋗` for terminal pairs, `⋖` for the `#` row.
/// Stored cells are untouched, so `opm_includes(m, complete_opm(m))` always
/// holds. The fill policy is fixed to keep derived constructions
/// reproducible; any conflict-free choice would do semantically.
pub fn complete_opm(m: &Opm) -> Opm {
    let mut out = m.clone();
    let n = out.alphabet.len();
    for a in 0..n {
        for b in 0..n {
            let slot = &mut out.cells[a * n + b];
            if slot.is_none() {
                *slot = Some(Relation::Takes);
            }
        }
    }
    for b in 0..n {
        if out.hash_row[b].is_none() {
            out.hash_row[b] = Some(Relation::Yields);
        }
    }
    out
}

/// True when the matrix has a relation for every terminal pair and every
/// `#`-row entry.
pub fn is_complete(m: &Opm) -> bool {
    m.cells.iter().all(Option::is_some) && m.hash_row.iter().all(Option::is_some)
}

/// Symbol-level parse stack used by compatibility and chain checking: the
/// matrix alone drives a single-state reduction.
#[derive(Debug, Clone)]
struct SymStack {
    /// `(symbol, marked)`; the fictitious bottom is *not* stored.
    entries: Vec<(usize, bool)>,
}

impl SymStack {
    fn new() -> Self {
        SymStack {
            entries: Vec::new(),
        }
    }

    fn top(&self, bottom: LeftSym) -> LeftSym {
        self.entries.last().map(|&(s, _)| Some(s)).unwrap_or(bottom)
    }

    /// One reduction step against lookahead `b` (`None` = ending `#`).
    /// Returns `false` when the parse is stuck on an empty cell.
    fn step(&mut self, m: &Opm, bottom: LeftSym, b: LeftSym) -> Option<Step> {
        let top = self.top(bottom);
        let rel = match b {
            Some(bi) => m.rel(top, bi)?,
            None => m.rel_end(top),
        };
        match rel {
            Relation::Yields => {
                self.entries.push((b.expect("# is never marked"), true));
                Some(Step::Consumed)
            }
            Relation::Equals => {
                if let Some(bi) = b {
                    self.entries.push((bi, false));
                    Some(Step::Consumed)
                } else {
                    // # ≐ #: only reachable with an empty stack; done.
                    Some(Step::Done)
                }
            }
            Relation::Takes => {
                // Pop up to and including the topmost marked entry.
                while let Some((_, marked)) = self.entries.pop() {
                    if marked {
                        return Some(Step::Flushed);
                    }
                }
                // No marked entry: can only happen on a malformed stack.
                None
            }
        }
    }
}

enum Step {
    Consumed,
    Flushed,
    Done,
}

/// True iff `#w#` parses to completion: no empty cell is hit and the stack
/// empties on the ending delimiter.
pub fn compatible_finite(m: &Opm, w: &[impl AsRef<str>]) -> Result<bool> {
    let word = m.word(w)?;
    let mut st = SymStack::new();
    let mut pos = 0usize;
    loop {
        let look = word.get(pos).copied();
        match st.step(m, None, look) {
            None => return Ok(false),
            Some(Step::Consumed) => pos += 1,
            Some(Step::Flushed) => {}
            Some(Step::Done) => return Ok(true),
        }
    }
}

/// True iff `w` parses as a prefix of some compatible word: scanning from
/// `#`, no empty cell is hit before the last letter is consumed. Ending-`#`
/// closure is not required — see [`compatible_finite`] for that.
pub fn compatible_prefix(m: &Opm, w: &[impl AsRef<str>]) -> Result<bool> {
    let word = m.word(w)?;
    Ok(prefix_parses(m, &word))
}

/// Decides whether `⌈a0 x a1⌉` is a chain (simple or composed), by running
/// the precedence reduction between the contexts: starting from `a0` alone,
/// the whole of `x` must reduce away exactly when `a1` becomes the
/// lookahead, without the stack ever returning to bare `a0` in between.
pub fn is_chain(m: &Opm, a0: &str, x: &[impl AsRef<str>], a1: &str) -> Result<bool> {
    let a0 = if a0 == "#" {
        None
    } else {
        Some(m.sym_checked(a0)?)
    };
    let a1 = if a1 == "#" {
        None
    } else {
        Some(m.sym_checked(a1)?)
    };
    let x = m.word(x)?;
    Ok(is_chain_idx(m, a0, &x, a1))
}

pub(crate) fn is_chain_idx(m: &Opm, a0: LeftSym, x: &[usize], a1: LeftSym) -> bool {
    if x.is_empty() {
        return false;
    }
    // The contexts themselves must be related.
    if m.rel_right(a0, a1).is_none() {
        return false;
    }
    let mut st = SymStack::new();
    let mut pos = 0usize;
    loop {
        let look = if pos < x.len() { Some(x[pos]) } else { a1 };
        if pos >= x.len() {
            // Lookahead is the right context: keep flushing while the top
            // takes precedence; the body was a chain iff the stack empties.
            let top = st.top(a0);
            if st.entries.is_empty() {
                return true;
            }
            match m.rel_right(top, a1) {
                Some(Relation::Takes) => match st.step(m, a0, look) {
                    Some(Step::Flushed) => continue,
                    _ => return false,
                },
                _ => return false,
            }
        }
        // Mid-body the stack may legally return to bare `a0`: any body
        // segment closed there is the gap before the next skeleton letter.
        match st.step(m, a0, look) {
            None => return false,
            Some(Step::Consumed) => pos += 1,
            Some(Step::Flushed) => {}
            Some(Step::Done) => return false,
        }
    }
}

/// One item of a [`ChainFactorization`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    /// A letter that stays on the stack forever (relative to the word read
    /// so far): not the body of any chain over its left context.
    PendingLetter(String),
    /// A maximal chain body together with its left context symbol
    /// (`"#"` or the most recent pending letter).
    ChainBody {
        body: Vec<String>,
        left_context: String,
    },
}

/// The factorization of a word into maximal chain bodies and pending
/// letters; concatenating the items reproduces the word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainFactorization {
    pub items: Vec<Factor>,
}

impl ChainFactorization {
    /// Concatenation of all items, for round-trip checks.
    pub fn reconcat(&self) -> Vec<String> {
        let mut out = Vec::new();
        for item in &self.items {
            match item {
                Factor::PendingLetter(s) => out.push(s.clone()),
                Factor::ChainBody { body, .. } => out.extend(body.iter().cloned()),
            }
        }
        out
    }
}

/// Factorizes `w` into maximal chain bodies and pending letters.
///
/// Scanning left to right with the last pending letter `l` (initially `#`)
/// as left context: the shortest nonempty prefix `x` of the remainder such
/// that `⌈l x c⌉` is a chain (where `c` is the letter following `x` inside
/// `w`) becomes a `ChainBody`; if no prefix closes, the next letter is a
/// `PendingLetter` and becomes the new left context. Shortest-match makes
/// the no-chain-prefix normalization hold by construction.
pub fn factorize(m: &Opm, w: &[impl AsRef<str>]) -> Result<ChainFactorization> {
    let word = m.word(w)?;
    // The word (as a prefix, no ending-# closure) must not get stuck.
    for end in 1..=word.len() {
        if !prefix_parses(m, &word[..end]) {
            return Err(Error::Invalid {
                what: "word".into(),
                why: format!(
                    "incompatible with the matrix at position {} (`{}`)",
                    end - 1,
                    m.name(word[end - 1])
                ),
            });
        }
    }
    let mut items = Vec::new();
    let mut left: LeftSym = None;
    let mut pos = 0usize;
    while pos < word.len() {
        let mut body_len = None;
        for len in 1..word.len() - pos {
            let x = &word[pos..pos + len];
            let ctx = Some(word[pos + len]);
            if is_chain_idx(m, left, x, ctx) {
                body_len = Some(len);
                break;
            }
        }
        match body_len {
            Some(len) => {
                items.push(Factor::ChainBody {
                    body: word[pos..pos + len]
                        .iter()
                        .map(|&s| m.name(s).to_owned())
                        .collect(),
                    left_context: m.left_name(left).to_owned(),
                });
                pos += len;
            }
            None => {
                items.push(Factor::PendingLetter(m.name(word[pos]).to_owned()));
                left = Some(word[pos]);
                pos += 1;
            }
        }
    }
    Ok(ChainFactorization { items })
}

/// True when the prefix parses without hitting an empty cell (no ending-#
/// closure applied).
pub(crate) fn prefix_parses(m: &Opm, w: &[usize]) -> bool {
    let mut st = SymStack::new();
    let mut pos = 0usize;
    while pos < w.len() {
        match st.step(m, None, Some(w[pos])) {
            None => return false,
            Some(Step::Consumed) => pos += 1,
            Some(Step::Flushed) => {}
            Some(Step::Done) => unreachable!("ending # not reachable mid-prefix"),
        }
    }
    true
}

// ---------------------------------------------------------------------------
// JSON form

#[derive(Serialize, Deserialize)]
struct OpmJson {
    alphabet: Vec<String>,
    #[serde(default)]
    cells: BTreeMap<String, BTreeMap<String, Relation>>,
    #[serde(default)]
    hash_row: BTreeMap<String, Relation>,
}

impl Serialize for Opm {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut cells: BTreeMap<String, BTreeMap<String, Relation>> = BTreeMap::new();
        let mut hash_row = BTreeMap::new();
        for (a, b, rel) in self.iter_cells() {
            match a {
                Some(ai) => {
                    cells
                        .entry(self.name(ai).to_owned())
                        .or_default()
                        .insert(self.name(b).to_owned(), rel);
                }
                None => {
                    hash_row.insert(self.name(b).to_owned(), rel);
                }
            }
        }
        OpmJson {
            alphabet: self.alphabet.clone(),
            cells,
            hash_row,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Opm {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Opm, D::Error> {
        let raw = OpmJson::deserialize(de)?;
        let mut m = Opm::new(&raw.alphabet).map_err(serde::de::Error::custom)?;
        for (a, row) in &raw.cells {
            for (b, &rel) in row {
                m.set(a, b, rel).map_err(serde::de::Error::custom)?;
            }
        }
        for (b, &rel) in &raw.hash_row {
            m.set_hash(b, rel).map_err(serde::de::Error::custom)?;
        }
        Ok(m)
    }
}
