//! Experiment parameters and the sectioned key-value configuration format.
//!
//! ```text
//! # comment
//! [decay_levels]
//! levels = 2,3,4
//! coarse_dt = 0.25
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Named parameter values of one experiment. Only keys declared by the
/// experiment's defaults may be set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn from_defaults(defaults: &[(&str, &str)]) -> Self {
        Self { values: defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => bail!(
                "unknown parameter {key:?}; known: {}",
                self.values.keys().cloned().collect::<Vec<_>>().join(", ")
            ),
        }
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        pairs.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| anyhow!("parameter {key:?} is not defined"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e| anyhow!("parameter {key} = {raw:?}: {e}"))
    }

    /// Comma-separated list; empty for an empty value.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("parameter {key} item {s:?}: {e}")))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Parses `key=value` override strings.
pub fn parse_overrides(items: &[String]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("override {s:?} is not of the form key=value"))?;
            let k = k.trim();
            if k.is_empty() {
                bail!("override {s:?} has an empty key");
            }
            Ok((k.to_string(), v.trim().to_string()))
        })
        .collect()
}

/// Parsed configuration file: one section per experiment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    sections: BTreeMap<String, Vec<(String, String)>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_string();
                if sections.contains_key(&name) {
                    bail!("line {}: section [{name}] appears twice", no + 1);
                }
                sections.insert(name.clone(), Vec::new());
                current = Some(name);
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            let section = current
                .as_ref()
                .ok_or_else(|| anyhow!("line {}: key outside of any section", no + 1))?;
            sections
                .get_mut(section)
                .expect("section was inserted")
                .push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn section(&self, name: &str) -> Option<&[(String, String)]> {
        self.sections.get(name).map(Vec::as_slice)
    }
}

/// Renders one section, e.g. to record the parameters of a run.
pub fn render_section(name: &str, params: &Params) -> String {
    let mut out = format!("[{name}]\n");
    for (k, v) in params.iter() {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_lists() {
        let mut p = Params::from_defaults(&[("levels", "2,3"), ("dt", "0.25")]);
        p.apply(&parse_overrides(&["dt=0.5".into(), "levels = 4, 5 ,6".into()]).unwrap()).unwrap();
        assert_eq!(p.get::<f64>("dt").unwrap(), 0.5);
        assert_eq!(p.list::<usize>("levels").unwrap(), vec![4, 5, 6]);
        assert!(p.set("nope", "1").is_err());
        assert!(p.get::<usize>("dt").is_err());
        assert!(parse_overrides(&["novalue".into()]).is_err());
        assert!(parse_overrides(&["=1".into()]).is_err());
    }

    #[test]
    fn config_sections() {
        let text = "# header\n[a]\nx = 1\n\n[b]\ny = 2, 3\n";
        let c = ConfigFile::parse(text).unwrap();
        assert_eq!(c.section("a").unwrap(), &[("x".to_string(), "1".to_string())]);
        assert_eq!(c.section("b").unwrap()[0].1, "2, 3");
        assert!(c.section("c").is_none());
        assert!(ConfigFile::parse("x = 1").is_err());
        assert!(ConfigFile::parse("[a]\n[a]").is_err());
        assert!(ConfigFile::parse("[a]\njunk").is_err());
    }

    #[test]
    fn rendered_section_parses_back() {
        let p = Params::from_defaults(&[("r", "100,1000"), ("levels", "")]);
        let c = ConfigFile::parse(&render_section("osc", &p)).unwrap();
        let mut q = Params::from_defaults(&[("r", ""), ("levels", "9")]);
        q.apply(c.section("osc").unwrap()).unwrap();
        assert_eq!(p, q);
    }
}
