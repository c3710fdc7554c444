//! The run configuration: one TOML file covering every module.
//!
//! Every section is optional and every key has a default, so an empty file
//! is a complete configuration. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{AttackConfig, Bandwidth, SimConfig};
use crate::cache::CacheConfig;
use crate::classifier::ClassifierConfig;
use crate::dram::{AddressMapping, DramGeometry, FlipModel, TrrConfig, DEFAULT_WINDOW_NS};
use crate::error::{Error, Result};
use crate::exploit::{FactorBudget, KeyLayout};
use crate::memctrl::{PagePolicy, PolicyKind, TimingConfig};

/// Environment variable naming the config file used when none is given.
pub const CONFIG_ENV: &str = "NETFLIP_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefreshConfig {
    pub window_ns: u64,
}

impl Default for RefreshConfig {
    fn default() -> Self {
        Self {
            window_ns: DEFAULT_WINDOW_NS,
        }
    }
}

/// Grid for the `sweep` subcommand. Each policy kind inherits the timeout
/// and adaptive knobs of `[policy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub policies: Vec<PolicyKind>,
    pub bandwidths: Vec<Bandwidth>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            policies: vec![PolicyKind::Closed, PolicyKind::Open, PolicyKind::Adaptive],
            bandwidths: [100.0, 250.0, 500.0, 1000.0]
                .into_iter()
                .map(Bandwidth::mbit)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExploitConfig {
    /// Fraction of memory holding RSA keys.
    pub fill_fraction: f64,
    pub key_layout: KeyLayout,
    pub factor_budget: FactorBudget,
    /// Also scan revoked serials for flips that make lookups miss.
    pub ocsp_serials: bool,
    /// Default inputs for `analyze`; `--in` takes precedence.
    pub zone: Option<PathBuf>,
    pub ocsp_index: Option<PathBuf>,
    pub keys: Option<PathBuf>,
    /// Listing to diff `keys` against.
    pub keys_before: Option<PathBuf>,
}

impl Default for ExploitConfig {
    fn default() -> Self {
        Self {
            fill_fraction: 0.8,
            key_layout: KeyLayout::default(),
            factor_budget: FactorBudget::default(),
            ocsp_serials: true,
            zone: None,
            ocsp_index: None,
            keys: None,
            keys_before: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: DramGeometry,
    pub mapping: AddressMapping,
    pub timing: TimingConfig,
    pub policy: PagePolicy,
    pub cache: CacheConfig,
    pub flip: FlipModel,
    pub trr: TrrConfig,
    pub refresh: RefreshConfig,
    pub attack: AttackConfig,
    pub classifier: ClassifierConfig,
    pub sweep: SweepConfig,
    pub exploit: ExploitConfig,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    /// Parses and validates TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("cannot serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        self.classifier.validate()?;
        if self.sweep.policies.is_empty() {
            return Err(Error::config("sweep.policies", "must not be empty"));
        }
        if self.sweep.bandwidths.is_empty() {
            return Err(Error::config("sweep.bandwidths", "must not be empty"));
        }
        for (i, kind) in self.sweep.policies.iter().enumerate() {
            if self.sweep.policies[..i].contains(kind) {
                return Err(Error::config(
                    "sweep.policies",
                    format!("duplicate `{kind}`"),
                ));
            }
        }
        if self
            .sweep
            .bandwidths
            .iter()
            .any(|b| !(b.value > 0.0 && b.value.is_finite()))
        {
            return Err(Error::config("sweep.bandwidths", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.exploit.fill_fraction) {
            return Err(Error::config(
                "exploit.fill_fraction",
                "must be within [0, 1]",
            ));
        }
        if self.exploit.key_layout.modulus_bits == 0 {
            return Err(Error::config(
                "exploit.key_layout.modulus_bits",
                "must be at least 1",
            ));
        }
        Ok(())
    }

    /// The subset the simulator consumes.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            geometry: self.geometry.clone(),
            mapping: self.mapping.clone(),
            timing: self.timing.clone(),
            policy: self.policy.clone(),
            cache: self.cache.clone(),
            flip: self.flip.clone(),
            trr: self.trr.clone(),
            window_ns: self.refresh.window_ns,
            attack: self.attack.clone(),
        }
    }

    /// `[policy]` with its kind replaced.
    pub fn policy_of_kind(&self, kind: PolicyKind) -> PagePolicy {
        PagePolicy {
            kind,
            ..self.policy.clone()
        }
    }

    /// Canonical JSON: object keys sorted, no whitespace.
    pub fn canonical_json(&self) -> Result<String> {
        // serde_json::Value keeps object keys in a BTreeMap.
        let value = serde_json::to_value(self)?;
        Ok(serde_json::to_string(&value)?)
    }

    /// Hex SHA-256 of [`Self::canonical_json`].
    pub fn digest(&self) -> Result<String> {
        let hash = Sha256::digest(self.canonical_json()?.as_bytes());
        Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::InvalidInput(format!("cannot read config `{}`: {e}", path.display()))
    })?;
    RunConfig::from_toml(&text)
}

/// `path` if given, else the file named by [`CONFIG_ENV`], else defaults.
pub fn resolve_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => load_config(p),
        None => match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => load_config(Path::new(&p)),
            _ => Ok(RunConfig::default()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn cat_ways_above_ways() {
        let err = RunConfig::from_toml("[cache]\nways = 4\ncat_ways = 5\n").unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "cache.cat_ways"),
            "{err}"
        );
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::from_toml("seed = 1\n\n[cache]\nwayz = 4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = RunConfig::from_toml("[nonsense]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn digest_survives_round_trip() {
        let text = "seed = 7\n[policy]\nkind = \"open\"\ntimeout_ns = 500\n\
                    [attack]\nbandwidth = \"1Gbit\"\n[sweep]\npolicies = [\"closed\"]\n";
        let a = RunConfig::from_toml(text).unwrap();
        let b = RunConfig::from_toml(&a.to_toml().unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        assert_ne!(a.digest().unwrap(), RunConfig::default().digest().unwrap());
    }

    #[test]
    fn digest_ignores_key_order() {
        let a =
            RunConfig::from_toml("seed = 3\n[trr]\nenabled = true\n[cache]\nways = 8\n").unwrap();
        let b = RunConfig::from_toml("[cache]\nways = 8\n[trr]\nenabled = true\n").unwrap();
        let b = RunConfig { seed: 3, ..b };
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
    }
}
