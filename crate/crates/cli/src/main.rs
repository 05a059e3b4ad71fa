//! Command-line front end for the operator precedence automata library.
//!
//! One verb per invocation: `validate`, `run`, `compose`, `empty`,
//! `includes`, `fixture`, `dot`. Files are JSON documents — either a named
//! fixture (an object with a `payload` field) or a raw automaton/matrix.
//! Exit codes: 0 for accept/true/clean, 1 for reject/false/violation, 2 for
//! input errors, each with a diagnostic on stderr.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use opal::closures;
use opal::corpus;
use opal::omega::{accepts_lasso, validate_omega, Lasso, OmegaOpa};
use opal::opa::{accepts_finite, enumerate_language, Opa, ValidationReport};
use opal::opm::{is_eq_acyclic, Opm};
use opal::pds::{is_empty_finite, is_empty_omega};

#[derive(Parser)]
#[command(name = "opal", about = "Operator precedence automata toolkit", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Report conflict-freeness, ≐-acyclicity, determinism and reachability.
    Validate { file: PathBuf },
    /// Run a word or a lasso through an automaton; with neither, enumerate
    /// the finite language up to OPAL_MAX_ENUM letters.
    Run {
        file: PathBuf,
        /// Whitespace-separated finite word, e.g. "a b c".
        #[arg(long)]
        word: Option<String>,
        /// Ultimately periodic word "u ; v", read as u·v^ω.
        #[arg(long)]
        lasso: Option<String>,
        /// Print the full run, one configuration per line.
        #[arg(long)]
        trace: bool,
        /// Accept and print glyph aliases (∪ ∩ ⋈ π_expr σ_expr).
        #[arg(long)]
        unicode: bool,
    },
    /// Combine automata and write the result as JSON.
    Compose {
        #[arg(long, value_enum)]
        op: ComposeOp,
        files: Vec<PathBuf>,
        /// Output path; stdout when omitted.
        #[arg(short)]
        out: Option<PathBuf>,
    },
    /// Decide language emptiness; exit 0 when empty, 1 with a witness when
    /// not.
    Empty { file: PathBuf },
    /// Decide L(imp) ⊆ L(spec); exit 1 with a counterexample lasso when
    /// inclusion fails.
    Includes { spec: PathBuf, imp: PathBuf },
    /// Print a bundled fixture, or list all names when none is given.
    Fixture { name: Option<String> },
    /// Export an automaton as a Graphviz digraph.
    Dot {
        file: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ComposeOp {
    Intersect,
    Union,
    UnionDet,
    Concat,
    Complement,
}

/// Any document the CLI can load.
enum Doc {
    Opa(Opa),
    Omega(OmegaOpa),
    Opm(Opm),
}

/// Errors at this level are always exit-2 input problems.
fn load_doc(path: &PathBuf) -> Result<Doc, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let (kind, payload) = if v.get("payload").is_some() {
        let f = corpus::parse_fixture(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        return match f.kind.as_str() {
            "opa" => Ok(Doc::Opa(f.as_opa().map_err(|e| e.to_string())?)),
            "omega" => Ok(Doc::Omega(f.as_omega().map_err(|e| e.to_string())?)),
            "opm" => Ok(Doc::Opm(f.as_opm().map_err(|e| e.to_string())?)),
            k => Err(format!("{}: unknown fixture kind `{k}`", path.display())),
        };
    } else if v.get("acceptance").is_some() {
        ("omega", v)
    } else if v.get("finals").is_some() {
        ("opa", v)
    } else if v.get("cells").is_some() {
        ("opm", v)
    } else {
        return Err(format!(
            "{}: not a fixture, automaton or matrix document",
            path.display()
        ));
    };
    match kind {
        "omega" => Ok(Doc::Omega(OmegaOpa::from_json(&payload).map_err(|e| e.to_string())?)),
        "opa" => Ok(Doc::Opa(Opa::from_json(&payload).map_err(|e| e.to_string())?)),
        _ => Ok(Doc::Opm(serde_json::from_value(payload).map_err(|e| e.to_string())?)),
    }
}

static GLYPHS: &[(&str, &str)] = &[
    ("∪", "cup"),
    ("∩", "cap"),
    ("⋈", "join"),
    ("π_expr", "pi_expr"),
    ("σ_expr", "sigma_expr"),
];

fn from_glyphs(token: &str) -> &str {
    GLYPHS.iter().find(|&&(g, _)| g == token).map_or(token, |&(_, n)| n)
}

fn to_glyphs(text: &str) -> String {
    let mut out = text.to_string();
    for &(g, n) in GLYPHS {
        out = out.replace(n, g);
    }
    out
}

fn tokens(text: &str, unicode: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| if unicode { from_glyphs(t).to_string() } else { t.to_string() })
        .collect()
}

fn report(r: &ValidationReport, m: &Opm) -> bool {
    let (acyclic, cycle) = is_eq_acyclic(m);
    println!("conflict-free: {}", if r.conflict_free { "yes" } else { "no" });
    match cycle {
        None => println!("eq-acyclic: yes"),
        Some(c) => println!("eq-acyclic: no ({})", c.join(" ≐ ")),
    }
    println!("deterministic: {}", if r.deterministic { "yes" } else { "no" });
    if r.unreachable.is_empty() {
        println!("unreachable: none");
    } else {
        println!("unreachable: {}", r.unreachable.join(" "));
    }
    r.conflict_free && acyclic && r.unreachable.is_empty()
}

fn max_enum() -> usize {
    std::env::var("OPAL_MAX_ENUM").ok().and_then(|s| s.parse().ok()).unwrap_or(8)
}

fn write_out(out: Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(p) => fs::write(&p, format!("{text}\n")).map_err(|e| format!("{}: {e}", p.display())),
    }
}

/// Graphviz export: states then edges, both in a fixed order, so the output
/// is byte-identical across runs. Flush edges are bold and labeled with a
/// `⇒` prefix naming the state below the popped part.
fn render_dot(doc: &Doc) -> Result<String, String> {
    let (v, initials, finals): (serde_json::Value, Vec<String>, Vec<String>) = match doc {
        Doc::Opa(a) => (
            a.to_json(),
            a.initial_states().map(str::to_string).collect(),
            a.final_states().map(str::to_string).collect(),
        ),
        Doc::Omega(a) => (
            a.to_json(),
            a.initial_states().map(str::to_string).collect(),
            a.final_states().iter().map(|s| s.to_string()).collect(),
        ),
        Doc::Opm(_) => return Err("matrices have no graph form; pass an automaton".into()),
    };
    let names = |key: &str| -> Vec<String> {
        v[key]
            .as_array()
            .map(|a| a.iter().map(|s| s.as_str().unwrap_or_default().to_string()).collect())
            .unwrap_or_default()
    };
    let mut states = names("states");
    states.sort();
    let initials: BTreeSet<String> = initials.into_iter().collect();
    let finals: BTreeSet<String> = finals.into_iter().collect();
    let mut lines = vec![
        "digraph opa {".to_string(),
        "  rankdir=LR;".to_string(),
        "  node [shape=circle];".to_string(),
    ];
    for s in &states {
        let shape = if finals.contains(s) { "doublecircle" } else { "circle" };
        lines.push(format!("  \"{s}\" [shape={shape}];"));
    }
    for s in &states {
        if initials.contains(s) {
            lines.push(format!("  \"start_{s}\" [shape=point, label=\"\"];"));
            lines.push(format!("  \"start_{s}\" -> \"{s}\";"));
        }
    }
    let mut edges: BTreeSet<String> = BTreeSet::new();
    for rule in v["delta_push"].as_array().into_iter().flatten() {
        let from = rule["from"].as_str().unwrap_or_default();
        let sym = rule["symbol"].as_str().unwrap_or_default();
        for to in rule["to"].as_array().into_iter().flatten() {
            let to = to.as_str().unwrap_or_default();
            edges.insert(format!("  \"{from}\" -> \"{to}\" [label=\"{sym}\"];"));
        }
    }
    for rule in v["delta_flush"].as_array().into_iter().flatten() {
        let top = rule["top"].as_str().unwrap_or_default();
        let below = rule["below"].as_str().unwrap_or_default();
        for to in rule["to"].as_array().into_iter().flatten() {
            let to = to.as_str().unwrap_or_default();
            edges.insert(format!(
                "  \"{top}\" -> \"{to}\" [label=\"⇒ {below}\", style=bold];"
            ));
        }
    }
    lines.extend(edges);
    lines.push("}".to_string());
    Ok(lines.join("\n"))
}

/// Verb dispatch; `Ok(true)` is exit 0, `Ok(false)` exit 1, `Err` exit 2.
fn dispatch(cli: Cli) -> Result<bool, String> {
    match cli.verb {
        Verb::Validate { file } => {
            let doc = load_doc(&file)?;
            let clean = match &doc {
                Doc::Opa(a) => report(&a.validate(), a.opm()),
                Doc::Omega(a) => report(&validate_omega(a), a.opm()),
                Doc::Opm(m) => report(
                    &ValidationReport {
                        conflict_free: true,
                        eq_acyclic: is_eq_acyclic(m).0,
                        deterministic: true,
                        unreachable: Vec::new(),
                    },
                    m,
                ),
            };
            Ok(clean)
        }
        Verb::Run { file, word, lasso, trace, unicode } => {
            let doc = load_doc(&file)?;
            match (word, lasso) {
                (Some(_), Some(_)) => Err("pass either --word or --lasso, not both".into()),
                (Some(w), None) => {
                    let Doc::Opa(a) = &doc else {
                        return Err("--word needs a finite-word automaton".into());
                    };
                    let w = tokens(&w, unicode);
                    let (ok, tr) = accepts_finite(a, &w).map_err(|e| e.to_string())?;
                    if trace {
                        if let Some(tr) = tr {
                            let text = tr.render(a);
                            print!("{}", if unicode { to_glyphs(&text) } else { text });
                        }
                    }
                    println!("{}", if ok { "accept" } else { "reject" });
                    Ok(ok)
                }
                (None, Some(l)) => {
                    let Doc::Omega(a) = &doc else {
                        return Err("--lasso needs an ω-automaton".into());
                    };
                    let l =
                        Lasso::parse(&tokens(&l, unicode).join(" ")).map_err(|e| e.to_string())?;
                    let ok = accepts_lasso(a, &l).map_err(|e| e.to_string())?;
                    println!("{}", if ok { "accept" } else { "reject" });
                    Ok(ok)
                }
                (None, None) => {
                    let Doc::Opa(a) = &doc else {
                        return Err("pass --word or --lasso".into());
                    };
                    let words = enumerate_language(a, max_enum()).map_err(|e| e.to_string())?;
                    for w in words {
                        let line = if w.is_empty() { "ε".to_string() } else { w.join(" ") };
                        println!("{}", if unicode { to_glyphs(&line) } else { line });
                    }
                    Ok(true)
                }
            }
        }
        Verb::Compose { op, files, out } => {
            let arity = match op {
                ComposeOp::Complement => 1,
                _ => 2,
            };
            if files.len() != arity {
                return Err(format!("this operation takes exactly {arity} file(s)"));
            }
            let omega = |doc: &Doc, path: &PathBuf| -> Result<OmegaOpa, String> {
                match doc {
                    Doc::Omega(a) => Ok(a.clone()),
                    _ => Err(format!("{}: expected an ω-automaton", path.display())),
                }
            };
            let docs: Vec<Doc> = files.iter().map(load_doc).collect::<Result<_, _>>()?;
            let result = match op {
                ComposeOp::Intersect => {
                    closures::intersect(&omega(&docs[0], &files[0])?, &omega(&docs[1], &files[1])?)
                }
                ComposeOp::Union => {
                    closures::union(&omega(&docs[0], &files[0])?, &omega(&docs[1], &files[1])?)
                }
                ComposeOp::UnionDet => closures::union_deterministic(
                    &omega(&docs[0], &files[0])?,
                    &omega(&docs[1], &files[1])?,
                ),
                ComposeOp::Concat => {
                    let Doc::Opa(a) = &docs[0] else {
                        return Err(format!(
                            "{}: concatenation starts from a finite-word automaton",
                            files[0].display()
                        ));
                    };
                    closures::concat(a, &omega(&docs[1], &files[1])?)
                }
                ComposeOp::Complement => closures::complement(&omega(&docs[0], &files[0])?),
            };
            let result = result.map_err(|e| e.to_string())?;
            write_out(out, &serde_json::to_string_pretty(&result.to_json()).expect("valid json"))?;
            Ok(true)
        }
        Verb::Empty { file } => match load_doc(&file)? {
            Doc::Opa(a) => {
                let empty = is_empty_finite(&a).map_err(|e| e.to_string())?;
                println!("{}", if empty { "empty" } else { "nonempty" });
                Ok(empty)
            }
            Doc::Omega(a) => {
                let (empty, witness) = is_empty_omega(&a).map_err(|e| e.to_string())?;
                match witness {
                    Some(w) => println!("nonempty: {w}"),
                    None => println!("{}", if empty { "empty" } else { "nonempty" }),
                }
                Ok(empty)
            }
            Doc::Opm(_) => Err("matrices have no language; pass an automaton".into()),
        },
        Verb::Includes { spec, imp } => {
            let spec_doc = load_doc(&spec)?;
            let imp_doc = load_doc(&imp)?;
            let (Doc::Omega(s), Doc::Omega(i)) = (&spec_doc, &imp_doc) else {
                return Err("inclusion takes two ω-automata".into());
            };
            let (holds, counterexample) = closures::includes(s, i).map_err(|e| e.to_string())?;
            match counterexample {
                Some(w) => println!("inclusion fails: {w}"),
                None => println!("{}", if holds { "inclusion holds" } else { "inclusion fails" }),
            }
            Ok(holds)
        }
        Verb::Fixture { name } => match name {
            None => {
                for n in corpus::fixture_names() {
                    println!("{n}");
                }
                Ok(true)
            }
            Some(n) => {
                let f = corpus::load_fixture(&n).map_err(|e| e.to_string())?;
                println!("{}", serde_json::to_string_pretty(&f).expect("valid json"));
                Ok(true)
            }
        },
        Verb::Dot { file, out } => {
            let text = render_dot(&load_doc(&file)?)?;
            write_out(out, &text)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
