//! Experiment configuration: a TOML file layered over defaults, then `--set` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use qchain::model::ChainSpec;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "dynamics")]
    Dynamics,
    #[serde(rename = "steady")]
    Steady,
    #[serde(rename = "sweep-equilibrium")]
    SweepEquilibrium,
    #[serde(rename = "sweep-nonequilibrium")]
    SweepNonequilibrium,
    #[serde(rename = "compare-2v3")]
    Compare2v3,
    #[serde(rename = "validate")]
    Validate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Set from the subcommand when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub initial_state: InitialState,
    pub chain: ChainConfig,
    pub time_grid: TimeGrid,
    pub sweep: Sweep,
    pub tolerances: Tolerances,
    pub debug: Debug,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_qubits: usize,
    pub epsilon: f64,
    pub coupling: f64,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub beta_left: f64,
    pub beta_right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_points: usize,
}

/// Temperature sweep: `T1` runs over the grid and `T2 = ratio * T1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rk,
    Expm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Debug {
    /// Swap excitation and decay in the closed forms. Validation must then fail.
    pub swap_rate_convention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitialState {
    W3,
    Ground,
    Gibbs(f64),
    File(PathBuf),
}

impl TryFrom<String> for InitialState {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "w3" => Ok(Self::W3),
            None if s == "ground" => Ok(Self::Ground),
            Some(("gibbs", beta)) => beta
                .trim()
                .parse()
                .map(Self::Gibbs)
                .map_err(|_| format!("bad inverse temperature in {s:?}")),
            Some(("file", path)) => Ok(Self::File(PathBuf::from(path))),
            _ => Err(format!("unknown initial state {s:?} (expected w3, ground, gibbs:<beta> or file:<path>)")),
        }
    }
}

impl From<InitialState> for String {
    fn from(s: InitialState) -> String {
        s.to_string()
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::W3 => write!(f, "w3"),
            Self::Ground => write!(f, "ground"),
            Self::Gibbs(beta) => write!(f, "gibbs:{beta}"),
            Self::File(path) => write!(f, "file:{}", path.display()),
        }
    }
}

impl Default for ExperimentConfig {
    /// Three qubits from the W state, baths at beta = 5 (left) and 3 (right).
    fn default() -> Self {
        Self {
            mode: None,
            output: None,
            initial_state: InitialState::W3,
            chain: ChainConfig {
                n_qubits: 3,
                epsilon: 1.5,
                coupling: 1.0,
                gamma_left: 0.02,
                gamma_right: 0.02,
                beta_left: 5.0,
                beta_right: 3.0,
            },
            time_grid: TimeGrid { t_max: 2500.0, n_points: 2501 },
            sweep: Sweep { t_min: 0.05, t_max: 3.0, n_points: 200, ratio: 1.0 },
            tolerances: Tolerances { rtol: 1e-10, atol: 1e-12, backend: Backend::Rk },
            debug: Debug { swap_rate_convention: false },
        }
    }
}

impl ChainConfig {
    pub fn spec(&self) -> Result<ChainSpec, CliError> {
        self.spec_with(self.n_qubits, self.beta_left, self.beta_right)
    }

    /// Same couplings with a different length or bath temperatures.
    pub fn spec_with(&self, n_qubits: usize, beta_left: f64, beta_right: f64) -> Result<ChainSpec, CliError> {
        Ok(ChainSpec::two_bath(
            n_qubits,
            self.epsilon,
            self.coupling,
            (self.gamma_left, beta_left),
            (self.gamma_right, beta_right),
        )?)
    }
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points).map(|k| self.t_max * k as f64 / last).collect()
    }
}

impl Sweep {
    pub fn temperatures(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|k| self.t_min + (self.t_max - self.t_min) * k as f64 / last)
            .collect()
    }
}

impl Tolerances {
    pub fn integrator(&self) -> qchain::dynamics::Tolerances {
        qchain::dynamics::Tolerances { rtol: self.rtol, atol: self.atol }
    }
}

impl ExperimentConfig {
    /// Defaults, then the file (if any), then each `key=value` override in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut tree = Table::try_from(Self::default()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let file: Table = text
                .parse()
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            merge(&mut tree, file);
        }
        for item in overrides {
            apply_override(&mut tree, item)?;
        }
        let config: Self = Value::Table(tree)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.chain.spec()?;
        let bad = |msg: String| Err(CliError::Config(msg));
        let t = &self.time_grid;
        if !(t.t_max.is_finite() && t.t_max > 0.0) || t.n_points < 2 {
            return bad(format!("time_grid needs t_max > 0 and n_points >= 2, got {t:?}"));
        }
        let s = &self.sweep;
        if !(s.t_min > 0.0 && s.t_max > s.t_min && s.t_max.is_finite()) || s.n_points < 2 {
            return bad(format!("sweep needs 0 < t_min < t_max and n_points >= 2, got {s:?}"));
        }
        if !(s.ratio.is_finite() && s.ratio > 0.0) {
            return bad(format!("sweep.ratio must be positive, got {}", s.ratio));
        }
        let tol = &self.tolerances;
        if !(tol.rtol > 0.0 && tol.atol > 0.0) {
            return bad(format!("tolerances must be positive, got rtol = {}, atol = {}", tol.rtol, tol.atol));
        }
        if let InitialState::Gibbs(beta) = self.initial_state {
            if !(beta.is_finite() && beta > 0.0) {
                return bad(format!("gibbs initial state needs beta > 0, got {beta}"));
            }
        }
        match (self.mode, s.ratio == 1.0) {
            (Some(Mode::SweepEquilibrium), false) => bad("sweep-equilibrium needs sweep.ratio = 1".into()),
            (Some(Mode::SweepNonequilibrium), true) => bad("sweep-nonequilibrium needs sweep.ratio != 1".into()),
            _ => Ok(()),
        }
    }

    /// The effective configuration as TOML, for CSV headers.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}

fn merge(base: &mut Table, over: Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn apply_override(tree: &mut Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
    let raw = raw.trim();
    // Anything that is not a TOML literal is taken as a bare string.
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path.split_last().expect("split yields at least one part");
    let mut table = tree;
    for part in parents {
        table = match table.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new())) {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("{key}: {part} is not a table"))),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let config = ExperimentConfig::load(None, &[]).unwrap();
        assert_eq!(config, ExperimentConfig::default());
        let again: ExperimentConfig = toml::from_str(&config.to_toml()).unwrap();
        assert_eq!(again, config);
    }

    #[test]
    fn overrides_apply_in_order() {
        let sets = [
            "chain.n_qubits=2".to_string(),
            "chain.beta_left = 10".to_string(),
            "initial_state=gibbs:2.5".to_string(),
            "chain.beta_left=12.5".to_string(),
            "tolerances.backend=expm".to_string(),
        ];
        let config = ExperimentConfig::load(None, &sets).unwrap();
        assert_eq!(config.chain.n_qubits, 2);
        assert_eq!(config.chain.beta_left, 12.5);
        assert_eq!(config.initial_state, InitialState::Gibbs(2.5));
        assert_eq!(config.tolerances.backend, Backend::Expm);
    }

    #[test]
    fn file_layers_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "mode = \"steady\"\n[chain]\nepsilon = 2.0\n").unwrap();
        let config = ExperimentConfig::load(Some(&path), &["chain.coupling=0.5".into()]).unwrap();
        assert_eq!(config.mode, Some(Mode::Steady));
        assert_eq!(config.chain.epsilon, 2.0);
        assert_eq!(config.chain.coupling, 0.5);
        assert_eq!(config.chain.n_qubits, 3);
    }

    #[test]
    fn rejects_bad_input() {
        for set in [
            "chain.epsilon=-1",
            "chain.n_qubits=1",
            "chain.gamma_left=0",
            "chain.nonsense=1",
            "sweep.t_min=0",
            "sweep.n_points=1",
            "time_grid.t_max=0",
            "initial_state=bell",
            "initial_state=gibbs:hot",
            "tolerances.backend=euler",
            "no_equals_sign",
        ] {
            let err = ExperimentConfig::load(None, &[set.to_string()]).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{set}");
        }
        let err = ExperimentConfig::load(None, &["mode=sweep-equilibrium".into(), "sweep.ratio=2".into()]);
        assert!(err.is_err());
    }

    #[test]
    fn grids() {
        let t = TimeGrid { t_max: 10.0, n_points: 3 }.times();
        assert_eq!(t, vec![0.0, 5.0, 10.0]);
        let s = Sweep { t_min: 0.05, t_max: 3.0, n_points: 200, ratio: 1.0 }.temperatures();
        assert_eq!(s.len(), 200);
        assert_eq!(s[0], 0.05);
        assert_eq!(s[199], 3.0);
    }
}
