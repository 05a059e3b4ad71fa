//! Named fixture catalog.
//!
//! Every automaton and matrix exhibited in the documentation examples ships
//! as an embedded JSON document with golden expectations: exact rendered
//! trace lines, finite-word membership verdicts, lasso verdicts, and
//! emptiness verdicts. Names are stable API; the files live under
//! `fixtures/` at the repository root and are compiled in, so the catalog
//! needs no runtime file access.

use serde::{Deserialize, Serialize};

use crate::omega::OmegaOpa;
use crate::opa::Opa;
use crate::opm::Opm;
use crate::{Error, Result};

/// A word together with the exact rendered lines of its run, in the
/// `kind | stack | remaining` trace format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenTrace {
    pub word: String,
    pub lines: Vec<String>,
}

/// Checkable claims bundled with a fixture. Words and lassos are
/// whitespace-separated symbol lists; lassos use the `"u ; v"` syntax.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub golden_trace: Option<GoldenTrace>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accepts: Vec<(String, bool)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lasso_verdicts: Vec<(String, bool)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empty: Option<bool>,
}

/// A named artifact: a finite-word automaton (`kind: "opa"`), an ω-automaton
/// (`"omega"`), or a bare matrix (`"opm"`), plus expectations about it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub notes: String,
    pub payload: serde_json::Value,
    #[serde(default)]
    pub expectations: Expectations,
}

impl Fixture {
    pub fn as_opa(&self) -> Result<Opa> {
        self.expect_kind("opa")?;
        Opa::from_json(&self.payload)
    }

    pub fn as_omega(&self) -> Result<OmegaOpa> {
        self.expect_kind("omega")?;
        OmegaOpa::from_json(&self.payload)
    }

    pub fn as_opm(&self) -> Result<Opm> {
        self.expect_kind("opm")?;
        Ok(serde_json::from_value(self.payload.clone())?)
    }

    fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "fixture `{}` has kind `{}`, not `{kind}`",
                self.name, self.kind
            )))
        }
    }
}

static CATALOG: &[(&str, &str)] = &[
    ("db_queries", include_str!("../../../fixtures/db_queries.json")),
    ("interrupts", include_str!("../../../fixtures/interrupts.json")),
    (
        "interrupts_restricted",
        include_str!("../../../fixtures/interrupts_restricted.json"),
    ),
    ("versioning", include_str!("../../../fixtures/versioning.json")),
    ("versioning_N2", include_str!("../../../fixtures/versioning_N2.json")),
    ("L1_bfae", include_str!("../../../fixtures/L1_bfae.json")),
    ("L2_dbfa", include_str!("../../../fixtures/L2_dbfa.json")),
    ("all_calls_opm", include_str!("../../../fixtures/all_calls_opm.json")),
    ("bfae_bw", include_str!("../../../fixtures/bfae_bw.json")),
    ("a_plus_opa", include_str!("../../../fixtures/a_plus_opa.json")),
    ("dyck_bfae", include_str!("../../../fixtures/dyck_bfae.json")),
    ("inf_a_dopbea", include_str!("../../../fixtures/inf_a_dopbea.json")),
    ("sigma_star_opa", include_str!("../../../fixtures/sigma_star_opa.json")),
    (
        "b_omega_dopbea",
        include_str!("../../../fixtures/b_omega_dopbea.json"),
    ),
    (
        "factorization_example",
        include_str!("../../../fixtures/factorization_example.json"),
    ),
    ("universe_int", include_str!("../../../fixtures/universe_int.json")),
];

/// All catalog names, in catalog order.
pub fn fixture_names() -> Vec<&'static str> {
    CATALOG.iter().map(|&(name, _)| name).collect()
}

/// Parses a fixture document from JSON text. Used both for the embedded
/// catalog and for fixture files supplied at runtime.
pub fn parse_fixture(text: &str) -> Result<Fixture> {
    Ok(serde_json::from_str(text)?)
}

/// Loads a catalog fixture by name.
pub fn load_fixture(name: &str) -> Result<Fixture> {
    let Some(&(_, text)) = CATALOG.iter().find(|&&(n, _)| n == name) else {
        return Err(Error::UnknownFixture(name.to_string()));
    };
    let fixture = parse_fixture(text)?;
    debug_assert_eq!(fixture.name, name);
    Ok(fixture)
}
