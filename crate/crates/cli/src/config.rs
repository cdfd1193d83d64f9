//! Run configuration: built-in defaults, overlaid by a TOML file, overlaid by flags.

use std::path::{Path, PathBuf};

use molxfer::data::{DeskTaskConfig, SplitSpec};
use molxfer::guidedvae::VAEConfig;
use molxfer::metrics::TaskKind;
use molxfer::transfer::TransferConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "MOLXFER_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for evaluation draws and decoding.
    pub seed: u64,
    pub task: TaskKind,
    pub paths: Paths,
    pub data: DataConfig,
    pub vae: VAEConfig,
    pub transfer: TransferConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub out_dir: PathBuf,
    /// Labeled corpus CSV; defaults to `corpus.csv` in the output directory.
    pub corpus: Option<PathBuf>,
    pub vae_checkpoint: Option<PathBuf>,
    pub transfer_checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Size of the generated pretraining corpus.
    pub desk_size: usize,
    pub desk: DeskTaskConfig,
    pub split: SplitSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Held-out source molecules to transfer; 0 uses the whole test split.
    pub test_size: usize,
    /// Also score the random-pairing baseline.
    pub baseline: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            task: TaskKind::Synthesizability,
            paths: Paths {
                out_dir: PathBuf::from("run"),
                corpus: None,
                vae_checkpoint: None,
                transfer_checkpoint: None,
            },
            data: DataConfig {
                desk_size: 10_000,
                desk: DeskTaskConfig::default(),
                split: SplitSpec::default(),
            },
            vae: VAEConfig::desk(),
            transfer: TransferConfig::desk(),
            eval: EvalConfig {
                test_size: 100,
                baseline: true,
            },
        }
    }
}

impl RunConfig {
    pub fn corpus_path(&self) -> PathBuf {
        self.paths
            .corpus
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("corpus.csv"))
    }

    pub fn vae_path(&self) -> PathBuf {
        self.paths
            .vae_checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("vae.json"))
    }

    pub fn transfer_path(&self) -> PathBuf {
        self.paths
            .transfer_checkpoint
            .clone()
            .unwrap_or_else(|| self.paths.out_dir.join("transfer.json"))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.vae
            .validate()
            .map_err(|e| CliError::BadConfig(e.to_string()))?;
        self.transfer
            .validate()
            .map_err(|e| CliError::BadConfig(e.to_string()))?;
        let s = &self.data.split;
        let fr = [s.train, s.dev, s.test];
        if fr.iter().any(|f| !(*f >= 0.0)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CliError::BadConfig(
                "split fractions must be non-negative and sum to 1".into(),
            ));
        }
        if self.data.desk.per_pool == 0 {
            return Err(CliError::BadConfig(
                "data.desk.per_pool must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses a flag value as a TOML value, falling back to a plain string.
pub fn parse_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::BadConfig(format!("bad key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match next {
            toml::Value::Table(t) => t,
            _ => return Err(CliError::BadConfig(format!("{key}: {p} is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Resolves the run configuration from defaults, an optional file and
/// dotted-key overrides, rejecting unknown keys.
pub fn resolve(
    file: Option<&Path>,
    overrides: &[(String, toml::Value)],
) -> Result<RunConfig, CliError> {
    let mut table = toml::Table::try_from(RunConfig::default()).expect("defaults serialize");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::BadConfig(format!("{}: {e}", path.display())))?;
        let user: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::BadConfig(format!("{}: {e}", path.display())))?;
        merge(&mut table, user);
    }
    for (k, v) in overrides {
        set_path(&mut table, k, v.clone())?;
    }
    let config: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::BadConfig(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(resolve(None, &[]).unwrap(), c);
    }

    #[test]
    fn partial_sections_keep_remaining_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 4\n[vae]\nepochs = 3\n").unwrap();
        let c = resolve(Some(&path), &[]).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.vae.epochs, 3);
        assert_eq!(c.vae.hidden_dim, VAEConfig::desk().hidden_dim);
    }

    #[test]
    fn overrides_win_and_unknown_keys_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[transfer]\niterations = 10\n").unwrap();
        let c = resolve(
            Some(&path),
            &[("transfer.iterations".into(), parse_value("20"))],
        )
        .unwrap();
        assert_eq!(c.transfer.iterations, 20);
        std::fs::write(&path, "[transfer]\niterationz = 10\n").unwrap();
        assert!(matches!(
            resolve(Some(&path), &[]),
            Err(CliError::BadConfig(_))
        ));
        assert!(matches!(
            resolve(None, &[("vae.nope".into(), parse_value("1"))]),
            Err(CliError::BadConfig(_))
        ));
        assert!(matches!(
            resolve(None, &[("transfer.disc_ratio".into(), parse_value("0"))]),
            Err(CliError::BadConfig(_))
        ));
    }

    #[test]
    fn flag_values_parse_as_toml_scalars() {
        assert_eq!(parse_value("3"), toml::Value::Integer(3));
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(
            parse_value("toxicity"),
            toml::Value::String("toxicity".into())
        );
        assert_eq!(parse_value("true"), toml::Value::Boolean(true));
    }
}
