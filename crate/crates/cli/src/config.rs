//! Parameter resolution: command-line flag, then config file, then default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Every key a config file may set; keys match the long flag names.
const KNOWN: &[&str] = &[
    "input", "kind", "out", "prior", "corpus", "embedding", "labels", "train", "test", "out-train", "out-test",
    "facet-adjacency", "k", "alpha", "max-iters", "tol", "walks-per-node", "walk-length", "window", "unweighted",
    "dim", "negatives", "facet-rate", "epochs", "lr", "rule", "workers", "seed", "samples", "weighted-edges",
    "depth", "mode", "threshold", "plain", "strategy", "candidates", "ks", "train-fraction", "model",
    "export-context", "score",
];

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("--config: cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("--config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key=value", i + 1);
            };
            let key = key.trim();
            if !KNOWN.contains(&key) {
                bail!("line {}: unknown key {key:?}", i + 1);
            }
            file.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Resolver { file, resolved: BTreeMap::new() })
    }

    fn file_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.file.get(key) {
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(_) => bail!("invalid --{key}: cannot parse {raw:?} from the config file"),
            },
            None => Ok(None),
        }
    }

    /// Resolves an optional value and records it for the manifest.
    pub fn opt<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(v)
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        Ok(match self.opt(key, flag)? {
            Some(v) => v,
            None => {
                self.resolved.insert(key.to_string(), default.to_string());
                default
            }
        })
    }

    pub fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.opt_path(key, flag)?.with_context(|| format!("missing --{key}"))
    }

    pub fn opt_path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(p) = &v {
            self.resolved.insert(key.to_string(), p.display().to_string());
        }
        Ok(v)
    }

    pub fn manifest(&self, command: &str) -> String {
        let mut s = format!("command={command}\nversion={}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.resolved {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }

    /// Writes `<output>.manifest` beside each output.
    pub fn write_manifests(&self, command: &str, outputs: &[PathBuf]) -> Result<()> {
        let text = self.manifest(command);
        for out in outputs {
            let path = manifest_path(out);
            std::fs::write(&path, &text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    with_suffix(out, "manifest")
}

/// `path` with `.suffix` appended to the file name.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Fails with a message naming `--key` unless `ok` holds.
pub fn ensure(ok: bool, key: &str, msg: &str) -> Result<()> {
    if !ok {
        bail!("invalid --{key}: {msg}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let mut r = Resolver::parse("k = 7\n# comment\nseed=3\n").unwrap();
        assert_eq!(r.get("k", Some(9usize), 1).unwrap(), 9);
        assert_eq!(r.get("seed", None::<u64>, 0).unwrap(), 3);
        assert_eq!(r.get("dim", None::<usize>, 35).unwrap(), 35);
        let m = r.manifest("x");
        assert!(m.contains("k=9\n") && m.contains("seed=3\n") && m.contains("dim=35\n"));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Resolver::parse("bogus=1").is_err());
        assert!(Resolver::parse("k").is_err());
        let mut r = Resolver::parse("k=abc").unwrap();
        let err = r.get("k", None::<usize>, 1).unwrap_err().to_string();
        assert!(err.contains("--k"), "{err}");
    }
}
