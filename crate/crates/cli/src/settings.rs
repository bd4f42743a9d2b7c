//! Optional TOML config file; command-line flags take precedence.

use std::path::{Path, PathBuf};

use fairtext::detection::TrainConfig;
use fairtext::ExecMode;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub model: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub infiller: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub dialect: Option<PathBuf>,
    pub seed: Option<u64>,
    pub test_fraction: Option<f64>,
    pub top_k: Option<usize>,
    pub threshold: Option<f64>,
    pub min_score: Option<f64>,
    pub block_lexicon_terms: Option<bool>,
    pub fraction: Option<f64>,
    pub p: Option<Vec<f64>>,
    pub sequential: Option<bool>,
    /// Seconds.
    pub timeout: Option<f64>,
    pub max_concurrent: Option<usize>,
    pub train: Option<TrainConfig>,
}

impl Settings {
    /// Relative paths in the file resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut settings: Settings = toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for slot in [
            &mut settings.model,
            &mut settings.lexicon,
            &mut settings.infiller,
            &mut settings.groups,
            &mut settings.dialect,
        ] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(settings)
    }

    pub fn exec(&self, flag: bool) -> ExecMode {
        if flag || self.sequential.unwrap_or(false) {
            ExecMode::Sequential
        } else {
            ExecMode::Parallel
        }
    }
}

pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>) -> Option<T> {
    flag.or_else(|| file.clone())
}

pub fn require<T>(
    value: Option<T>,
    what: &'static str,
    flag: &'static str,
    key: &'static str,
) -> Result<T, CliError> {
    value.ok_or(CliError::Missing { what, flag, key })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fairtext.toml");
        std::fs::write(
            &path,
            "model = \"models/m.bin\"\nlexicon = \"/abs/lex.tsv\"\nseed = 9\n[train]\nepochs = 3\n",
        )
        .unwrap();
        let s = Settings::load(&path).unwrap();
        assert_eq!(s.model.unwrap(), dir.path().join("models/m.bin"));
        assert_eq!(s.lexicon.unwrap(), PathBuf::from("/abs/lex.tsv"));
        assert_eq!(s.seed, Some(9));
        let train = s.train.unwrap();
        assert_eq!(train.epochs, 3);
        assert_eq!(train.learning_rate, TrainConfig::default().learning_rate);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "modle = \"x\"\n").unwrap();
        assert!(matches!(
            Settings::load(&path),
            Err(CliError::Config { .. })
        ));
    }
}
