//! Run configuration: a TOML file, dotted `key=value` overrides, and the
//! dedicated flags, merged in that order before deserialization.

use std::path::{Path, PathBuf};

use galerkin_mhd::ergodicity::{InitSpec, MeasureOptions, Observable};
use galerkin_mhd::hormander::ClosureMethod;
use galerkin_mhd::integrator::{IntegratorConfig, Scheme};
use galerkin_mhd::lattice::parse_wavevector_list;
use galerkin_mhd::noise::ForcingConfig;
use galerkin_mhd::WaveVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N", default = "default_n")]
    pub n: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    /// Forced modes, e.g. `"(1,0,0),(0,1,0)"`. Without a forcing file every
    /// listed mode is forced in both channels with two orthonormal columns
    /// of size `amplitude`.
    #[serde(default)]
    pub forced: Option<String>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// JSON forcing table; takes precedence over `forced`/`amplitude` for
    /// the dynamics.
    #[serde(default)]
    pub forcing_file: Option<PathBuf>,
    #[serde(default = "default_init")]
    pub init: InitSpec,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub hormander: HormanderSection,
    #[serde(default)]
    pub audit: AuditSection,
    #[serde(default)]
    pub hitting: HittingSection,
    #[serde(default)]
    pub recurrence: RecurrenceSection,
    #[serde(default)]
    pub measure: MeasureSection,
    // Neither affects results, so both stay out of the hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_one_usize")]
    pub record_every: usize,
    #[serde(default = "default_true")]
    pub nonlinear: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            scheme: Scheme::default(),
            dt: default_dt(),
            t_end: default_t_end(),
            record_every: 1,
            nonlinear: true,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Adds per-mode energy columns to the trajectory CSV.
    #[serde(default)]
    pub per_mode: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HormanderSection {
    #[serde(default)]
    pub method: ClosureMethod,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    /// Times for the moment-bound table; defaults to `0, 1, ..., t_end`.
    #[serde(default)]
    pub moment_grid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingSection {
    /// Radius of the energy ball, `energy <= c^2`.
    #[serde(default = "default_c")]
    pub c: f64,
}

impl Default for HittingSection {
    fn default() -> Self {
        HittingSection { c: default_c() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceSection {
    /// Ball radius; defaults to `sqrt(sigma^2 / 2)`.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_recurrence_horizons")]
    pub horizons: Vec<f64>,
}

impl Default for RecurrenceSection {
    fn default() -> Self {
        RecurrenceSection { radius: None, h: default_h(), horizons: default_recurrence_horizons() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    /// Initial condition of the second ensemble; the first uses `init`.
    #[serde(default = "default_init_b")]
    pub init_b: InitSpec,
    /// Base seed of the second ensemble; defaults to `seed + 1`.
    #[serde(default)]
    pub seed_b: Option<u64>,
    #[serde(default = "default_measure_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default)]
    pub observable: Observable,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl Default for MeasureSection {
    fn default() -> Self {
        MeasureSection {
            init_b: default_init_b(),
            seed_b: None,
            horizons: default_measure_horizons(),
            observable: Observable::default(),
            bootstrap_resamples: default_resamples(),
            bootstrap_seed: 0,
            histogram_bins: default_bins(),
        }
    }
}

impl MeasureSection {
    pub fn options(&self) -> MeasureOptions {
        MeasureOptions {
            bootstrap_resamples: self.bootstrap_resamples,
            bootstrap_seed: self.bootstrap_seed,
            histogram_bins: self.histogram_bins,
        }
    }
}

fn default_n() -> u32 {
    1
}
fn default_trajectories() -> usize {
    100
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_init() -> InitSpec {
    InitSpec::Random { energy: 1.0, seed: 0 }
}
fn default_init_b() -> InitSpec {
    InitSpec::Random { energy: 25.0, seed: 1 }
}
fn default_dt() -> f64 {
    1e-2
}
fn default_t_end() -> f64 {
    1.0
}
fn default_one_usize() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_c() -> f64 {
    2.0
}
fn default_h() -> f64 {
    1.0
}
fn default_recurrence_horizons() -> Vec<f64> {
    vec![50.0, 100.0, 200.0]
}
fn default_measure_horizons() -> Vec<f64> {
    vec![125.0, 250.0, 500.0]
}
fn default_resamples() -> usize {
    1000
}
fn default_bins() -> usize {
    20
}

/// Reads a TOML config file into a table; `None` gives an empty table.
pub fn load_table(path: Option<&Path>) -> Result<toml::Table, String> {
    let Some(path) = path else {
        return Ok(toml::Table::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    text.parse::<toml::Table>().map_err(|e| format!("cannot parse config {}: {e}", path.display()))
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a plain string (so `forced=(1,0,0)` needs no quoting).
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `a.b.c = value`, creating intermediate tables.
pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), String> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(format!("malformed key '{key}'"));
    }
    let (last, prefix) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in prefix {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(format!("'{p}' in '{key}' is not a table")),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), String> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| format!("override '{assignment}' is not key=value"))?;
    set_path(table, key, parse_value(raw.trim()))
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self, String> {
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e| format!("invalid config: {e}"))?;
        if cfg.n == 0 {
            return Err("N must be at least 1".into());
        }
        if cfg.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        Ok(cfg)
    }

    pub fn forced_modes(&self) -> Result<Option<Vec<WaveVector>>, String> {
        self.forced.as_deref().map(|s| parse_wavevector_list(s).map_err(|e| e.to_string())).transpose()
    }

    /// The forcing used by the dynamics: the file when given, otherwise the
    /// `forced` modes at `amplitude`, otherwise none.
    pub fn forcing(&self) -> Result<ForcingConfig, String> {
        if let Some(path) = &self.forcing_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read forcing file {}: {e}", path.display()))?;
            return ForcingConfig::from_json(&text).map_err(|e| e.to_string());
        }
        Ok(match self.forced_modes()? {
            Some(modes) => ForcingConfig::full_plane(&modes, self.amplitude),
            None => ForcingConfig::default(),
        })
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let s = &self.integrator;
        IntegratorConfig {
            scheme: s.scheme,
            dt: s.dt,
            t_end: s.t_end,
            record_every: s.record_every,
            seed: self.seed,
            nonlinear: s.nonlinear,
        }
    }
}

/// Hex sha256 of the command, the config and the resolved forcing (so a
/// forcing file is hashed by content, not by path).
pub fn config_hash(command: &str, cfg: &RunConfig, forcing: &ForcingConfig) -> String {
    let canonical = serde_json::json!({ "command": command, "config": cfg, "forcing": forcing });
    hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_values() {
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("7"), toml::Value::Integer(7));
        assert_eq!(parse_value("\"em\""), toml::Value::String("em".into()));
        assert_eq!(parse_value("(1,0,0),(0,1,0)"), toml::Value::String("(1,0,0),(0,1,0)".into()));
        assert_eq!(parse_value("[1.0, 2.0]"), toml::Value::Array(vec![1.0.into(), 2.0.into()]));
    }

    #[test]
    fn dotted_paths_create_tables() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "integrator.dt=0.001").unwrap();
        apply_override(&mut t, "init.kind=zero").unwrap();
        let cfg = RunConfig::from_table(t).unwrap();
        assert_eq!(cfg.integrator.dt, 0.001);
        assert_eq!(cfg.init, InitSpec::Zero);
        let mut t = toml::Table::new();
        apply_override(&mut t, "seed=3").unwrap();
        assert!(apply_override(&mut t, "seed.x=1").is_err());
        assert!(apply_override(&mut t, "noequals").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "integrator.dtt=0.1").unwrap();
        assert!(RunConfig::from_table(t).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = RunConfig::from_table(toml::Table::new()).unwrap();
        let f = a.forcing().unwrap();
        let h = config_hash("simulate", &a, &f);
        a.out = Some("elsewhere".into());
        a.threads = Some(3);
        assert_eq!(h, config_hash("simulate", &a, &f));
        a.seed = 1;
        assert_ne!(h, config_hash("simulate", &a, &f));
        assert_ne!(h, config_hash("audit", &RunConfig::from_table(toml::Table::new()).unwrap(), &f));
    }
}
