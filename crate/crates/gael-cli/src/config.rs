//! Flat key-value configuration with dotted sections (`scenario.*`,
//! `numerics.*`, `output.*`), line-anchored diagnostics, and a stable hash
//! used to name run directories.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// Configuration error carrying the offending source line (0 = CLI override).
#[derive(Debug)]
pub struct ConfigError {
    pub source: String,
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}: {}", self.source, self.line, self.msg)
        } else {
            write!(f, "{}: {}", self.source, self.msg)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    lines: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source: path.display().to_string(),
            line: 0,
            msg: format!("cannot read config: {e}"),
        })?;
        let mut cfg = Self::new();
        cfg.parse(&path.display().to_string(), &text)?;
        Ok(cfg)
    }

    /// Parses `key = value` lines; `#` starts a comment; blank lines ignored.
    pub fn parse(&mut self, source: &str, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    source: source.to_string(),
                    line: line_no,
                    msg: format!("expected `key = value`, found `{raw}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError {
                    source: source.to_string(),
                    line: line_no,
                    msg: "empty key or value".to_string(),
                });
            }
            if !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '_') {
                return Err(ConfigError {
                    source: source.to_string(),
                    line: line_no,
                    msg: format!("invalid key `{key}`"),
                });
            }
            self.entries.insert(key.to_string(), value.to_string());
            self.lines.insert(key.to_string(), (source.to_string(), line_no));
        }
        Ok(())
    }

    /// Applies a `key=value` command-line override.
    pub fn set_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(ConfigError {
                source: "command line".to_string(),
                line: 0,
                msg: format!("override `{pair}` is not of the form key=value"),
            });
        };
        self.set(key.trim(), value.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
        self.lines.insert(key.to_string(), ("command line".to_string(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn err(&self, key: &str, msg: String) -> ConfigError {
        let (source, line) =
            self.lines.get(key).cloned().unwrap_or(("command line".to_string(), 0));
        ConfigError { source, line, msg }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get_str(key).unwrap_or(default)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| self.err(key, format!("`{key}` must be a number, found `{v}`"))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.get_f64(key)?.unwrap_or(default))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<usize>().map(Some).map_err(|_| {
                self.err(key, format!("`{key}` must be a non-negative integer, found `{v}`"))
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.get_usize(key)?.unwrap_or(default))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| {
                self.err(key, format!("`{key}` must be a non-negative integer, found `{v}`"))
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.entries.get(key).map(String::as_str) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(self.err(key, format!("`{key}` must be a boolean, found `{v}`"))),
        }
    }

    /// Comma-separated list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| self.err(key, format!("`{key}` must be a comma-separated list"))),
        }
    }

    /// FNV-1a hash over the sorted `key=value` pairs; stable across runs.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for (k, v) in &self.entries {
            eat(k.as_bytes());
            eat(b"=");
            eat(v.as_bytes());
            eat(b"\n");
        }
        h
    }

    /// Canonical serialization, parseable back into an equivalent config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_reads_typed_values() {
        let mut cfg = Config::new();
        cfg.parse(
            "test",
            "scenario.name = qnd\nscenario.nbar = 2.0 # thermal\n\nnumerics.ntraj = 500\n",
        )
        .unwrap();
        assert_eq!(cfg.get_str("scenario.name"), Some("qnd"));
        assert_eq!(cfg.get_f64("scenario.nbar").unwrap(), Some(2.0));
        assert_eq!(cfg.usize_or("numerics.ntraj", 0).unwrap(), 500);
        assert_eq!(cfg.f64_or("scenario.kappa", 1.0).unwrap(), 1.0);
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let mut cfg = Config::new();
        let err = cfg.parse("cfg.txt", "a = 1\nnot a key value\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.to_string().starts_with("cfg.txt:2:"));

        let mut cfg = Config::new();
        cfg.parse("cfg.txt", "\n\nscenario.nbar = two\n").unwrap();
        let err = cfg.get_f64("scenario.nbar").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn hash_is_order_independent_and_value_sensitive() {
        let mut a = Config::new();
        a.parse("t", "x = 1\ny = 2\n").unwrap();
        let mut b = Config::new();
        b.parse("t", "y = 2\nx = 1\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        b.set("x", "3");
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn round_trips_through_text() {
        let mut a = Config::new();
        a.parse("t", "scenario.name = jc\nnumerics.dt = 0.002\n").unwrap();
        let mut b = Config::new();
        b.parse("t", &a.to_text()).unwrap();
        assert_eq!(a.entries(), b.entries());
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut cfg = Config::new();
        cfg.parse("t", "scenario.nbar = 0\n").unwrap();
        cfg.set_override("scenario.nbar=2").unwrap();
        assert_eq!(cfg.get_f64("scenario.nbar").unwrap(), Some(2.0));
        assert!(cfg.set_override("bogus").is_err());
    }
}
