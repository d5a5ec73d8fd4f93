//! Optional key=value configuration file; flags always win over file values.

use std::collections::HashMap;
use std::path::Path;

use selrank_core::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(
                    path.display().to_string(),
                    i + 1,
                    "expected key=value",
                ));
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    /// Flag value if set, else the file value, else the default.
    pub fn resolve<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw.parse().map_err(|_| {
                Error::validation(format!("config key {key}: cannot parse {raw:?}"))
            }),
            None => Ok(default),
        }
    }

    pub fn resolve_opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::validation(format!("config key {key}: cannot parse {raw:?}"))),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "# comment\nk = 7\nseed=42\n").unwrap();
        let c = FileConfig::load(Some(f.path())).unwrap();
        assert_eq!(c.resolve(None::<usize>, "k", 5).unwrap(), 7);
        assert_eq!(c.resolve(Some(9usize), "k", 5).unwrap(), 9);
        assert_eq!(c.resolve(None::<usize>, "missing", 5).unwrap(), 5);
        assert_eq!(c.resolve_opt(None::<u64>, "seed").unwrap(), Some(42));
    }

    #[test]
    fn bad_line_is_an_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, "just-a-word\n").unwrap();
        assert!(FileConfig::load(Some(f.path())).is_err());
    }
}
