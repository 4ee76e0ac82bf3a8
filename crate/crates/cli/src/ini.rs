//! Flat sectioned `key = value` files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ini {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Ini {
    /// `#` and `;` start comment lines. Every key must sit in a section.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| CliError::config(format!("line {lineno}: malformed section header `{line}`")))?;
                ini.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {lineno}: expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::config(format!("line {lineno}: empty key")));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| CliError::config(format!("line {lineno}: key `{key}` outside any section")))?;
            let entries = ini.sections.get_mut(section).expect("section exists");
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(CliError::config(format!("line {lineno}: duplicate key `{section}.{key}`")));
            }
        }
        Ok(ini)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override `{spec}` is not `section.key=value`")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .filter(|(s, k)| !s.is_empty() && !k.is_empty())
            .ok_or_else(|| CliError::config(format!("override key `{path}` is not `section.key`")))?;
        self.set(section, key, value.trim());
        Ok(())
    }

    pub fn take_section(&mut self, section: &str) -> BTreeMap<String, String> {
        self.sections.remove(section).unwrap_or_default()
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, (name, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let ini = Ini::parse("# top\n[run]\nexperiment = masking\n; note\n\n[radar]\n numerology=NR40 \n").unwrap();
        assert_eq!(ini.get("run", "experiment"), Some("masking"));
        assert_eq!(ini.get("radar", "numerology"), Some("NR40"));
        assert_eq!(ini.get("radar", "window"), None);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Ini::parse("key = 1\n").is_err());
        assert!(Ini::parse("[a\n").is_err());
        assert!(Ini::parse("[a]\njunk\n").is_err());
        assert!(Ini::parse("[a]\nk = 1\nk = 2\n").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut ini = Ini::parse("[b]\ny = 2\n[a]\nx = 1\n").unwrap();
        ini.apply_override("a.z = hello world").unwrap();
        assert_eq!(Ini::parse(&ini.render()).unwrap(), ini);
        assert!(ini.apply_override("novalue").is_err());
        assert!(ini.apply_override("nosection=1").is_err());
    }
}
