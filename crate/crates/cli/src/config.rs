//! Line-oriented `key = value` run configuration. Command-line flags take
//! precedence over values from the file; relative paths in the file are
//! resolved against the file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

const KEYS: &[&str] = &[
    "manifest",
    "model",
    "out",
    "out_dir",
    "loss_out",
    "window_len",
    "step",
    "levels",
    "myop_threshold",
    "wamp_threshold",
    "ialv_offset",
    "learning_rate",
    "momentum",
    "epochs",
    "batch_size",
    "seed",
    "init_scale",
    "hidden1",
    "hidden2",
    "arch",
    "input_mode",
    "lengths",
    "per_class_length",
    "classes",
    "channels",
    "trials",
    "test_trials",
    "duration",
    "sample_rate",
    "noise",
    "iterations",
    "length_ms",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{source}:{}: expected `key = value`", i + 1))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("{source}:{}: unknown key `{key}`", i + 1);
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                bail!("{source}:{}: duplicate key `{key}`", i + 1);
            }
        }
        Ok(Self {
            values,
            base_dir: PathBuf::new(),
        })
    }

    /// Flag value if given, else the file value, else `None`.
    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config key `{key}`: cannot parse {v:?}: {e}")),
        }
    }

    pub fn get_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.values.get(key).map(|v| self.base_dir.join(v)))
    }

    pub fn list<T: FromStr>(&self, flag: Option<Vec<T>>, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|e| anyhow!("config key `{key}`: bad item {s:?}: {e}"))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let cfg = ConfigFile::parse(
            "epochs = 10 # short run\nlearning_rate=0.05\n\nlengths = 100, 200\n",
            "c",
        )
        .unwrap();
        assert_eq!(cfg.get_or(None::<usize>, "epochs", 200).unwrap(), 10);
        assert_eq!(cfg.get_or(Some(3usize), "epochs", 200).unwrap(), 3);
        assert_eq!(cfg.get_or(None::<usize>, "batch_size", 32).unwrap(), 32);
        assert_eq!(cfg.list::<f64>(None, "lengths").unwrap(), Some(vec![100.0, 200.0]));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ConfigFile::parse("epoch = 3", "c")
            .unwrap_err()
            .to_string()
            .contains("unknown key"));
        assert!(ConfigFile::parse("epochs 3", "c").is_err());
        assert!(ConfigFile::parse("epochs = 1\nepochs = 2", "c").is_err());
        let cfg = ConfigFile::parse("epochs = many", "c").unwrap();
        assert!(cfg.get::<usize>(None, "epochs").is_err());
    }
}
