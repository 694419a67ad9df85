//! `key=value` config files merged under command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Resolves each setting from, in order: the flag, the config file, the default.
///
/// Every resolved value is recorded so it can be echoed into outputs.
#[derive(Debug, Default)]
pub struct Resolver {
    source: Option<PathBuf>,
    file: BTreeMap<String, (String, usize)>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let Some(path) = config else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file = parse(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        Ok(Self {
            source: Some(path.to_owned()),
            file,
            ..Self::default()
        })
    }

    fn file_value<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some((raw, line)) = self.file.get(key) else {
            return Ok(None);
        };
        self.used.insert(key.to_owned());
        let src = self.source.as_deref().map(Path::display);
        raw.parse().map(Some).map_err(|e| {
            anyhow!(
                "{}:{line}: bad value for {key}: {e}",
                src.expect("file values have a source")
            )
        })
    }

    /// Whether `key` was given on the command line or in the file.
    pub fn is_set<T>(&self, key: &str, flag: &Option<T>) -> bool {
        flag.is_some() || self.file.contains_key(key)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    /// Like [`get`](Self::get) without a default; unset values are not recorded.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        Ok(flag.or(file))
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = self.opt(key, flag)?;
        if let Some(p) = &v {
            self.record(key, p.display());
        }
        Ok(v)
    }

    pub fn require_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| anyhow!("--{key} is required (flag or config file)"))
    }

    pub fn record(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.resolved.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.resolved.push((key.to_owned(), value)),
        }
    }

    /// Fail on config keys this subcommand does not know.
    pub fn finish(&self) -> Result<()> {
        if let Some((key, (_, line))) = self.file.iter().find(|(k, _)| !self.used.contains(*k)) {
            let src = self.source.as_deref().map(Path::display);
            bail!(
                "{}:{line}: unknown config key {key:?}",
                src.expect("file keys have a source")
            );
        }
        Ok(())
    }

    pub fn resolved(&self) -> &[(String, String)] {
        &self.resolved
    }

    /// `# key=value` lines for the command and every resolved setting.
    pub fn header(&self, command: &str) -> String {
        let mut s = format!("# murp {command}\n");
        for (k, v) in &self.resolved {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s
    }
}

fn parse(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key=value", i + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if out.insert(k.to_owned(), (v.to_owned(), i + 1)).is_some() {
            bail!("line {}: duplicate key {k:?}", i + 1);
        }
    }
    Ok(out)
}
