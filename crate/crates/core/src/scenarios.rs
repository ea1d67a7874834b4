//! The bundled fixture set: four attack scenarios, one per defense, and
//! the MRT traces used by the replay tests.
//!
//! Every fixture lists its files with SHA-256 digests in
//! `data/manifest.toml`, together with the outcome it is expected to
//! produce.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::policy::{Action, Defenses};
use crate::sim::{AttackKind, Scenario};

/// Where the fixtures live in a source checkout.
pub fn default_data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixtureKind {
    Scenario,
    Trace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Defense {
    Roa,
    Whitelist,
    Federation,
    Anomaly,
}

impl Defense {
    /// Switches with only this defense turned on.
    pub fn alone(self) -> Defenses {
        Defenses::only(
            self == Defense::Roa,
            self == Defense::Whitelist,
            self == Defense::Federation,
            self == Defense::Anomaly,
        )
    }
}

impl fmt::Display for Defense {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(match self {
            Defense::Roa => "roa",
            Defense::Whitelist => "whitelist",
            Defense::Federation => "federation",
            Defense::Anomaly => "anomaly",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// What a fixture should produce. Scenario fixtures fill the attack
/// fields, trace fixtures the counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expected {
    pub defense: Option<Defense>,
    pub attack: Option<AttackKind>,
    pub action: Option<Action>,
    /// The attack verdict must carry at least one of these.
    pub reasons: Vec<String>,
    pub false_positives: Option<u64>,
    pub records: Option<u64>,
    pub announcements: Option<u64>,
    pub withdrawals: Option<u64>,
    pub accept: Option<u64>,
    pub reject: Option<u64>,
    pub flag: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureManifest {
    pub id: String,
    pub kind: FixtureKind,
    pub summary: String,
    /// The file a consumer opens: the scenario document or the trace.
    pub entry: PathBuf,
    pub files: Vec<FixtureFile>,
    #[serde(default)]
    pub expected: Expected,
}

impl FixtureManifest {
    pub fn entry_path(&self, data_dir: &Path) -> PathBuf {
        data_dir.join(&self.entry)
    }

    /// Files whose content no longer matches the recorded digest.
    pub fn stale_files(&self, data_dir: &Path) -> Vec<PathBuf> {
        self.files
            .iter()
            .filter(|f| match std::fs::read(data_dir.join(&f.path)) {
                Ok(bytes) => hex::encode(Sha256::digest(&bytes)) != f.sha256,
                Err(_) => true,
            })
            .map(|f| f.path.clone())
            .collect()
    }

    pub fn load_scenario(&self, data_dir: &Path) -> Result<Scenario, crate::sim::SimError> {
        crate::sim::load_scenario(&self.entry_path(data_dir))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDocument {
    fixtures: Vec<FixtureManifest>,
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read manifest: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest syntax: {0}")]
    Syntax(#[from] toml::de::Error),
}

/// All fixtures, in manifest order.
pub fn scenario_catalog(data_dir: &Path) -> Result<Vec<FixtureManifest>, CatalogError> {
    let text = std::fs::read_to_string(data_dir.join("manifest.toml"))?;
    let doc: ManifestDocument = toml::from_str(&text)?;
    Ok(doc.fixtures)
}

/// Turns every defense but `keep` off on all IXPs of the scenario.
pub fn isolate(scenario: &mut Scenario, keep: Defense) {
    for ixp in &mut scenario.ixps {
        ixp.policy.defenses = keep.alone();
    }
}
