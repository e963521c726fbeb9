//! `key = value` settings documents.

use std::fmt::Write as _;

use indexmap::IndexMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SettingEntry {
    pub value: String,
    /// 1-based source line; 0 for values set programmatically.
    pub line: usize,
    /// Earlier (line, value) definitions replaced by this one.
    pub overridden: Vec<(usize, String)>,
}

/// Ordered settings with override provenance. Equality compares only the
/// effective key/value pairs.
#[derive(Debug, Clone, Default)]
pub struct SettingsDoc {
    entries: IndexMap<String, SettingEntry>,
}

impl PartialEq for SettingsDoc {
    fn eq(&self, other: &Self) -> bool {
        self.pairs().eq(other.pairs())
    }
}

impl SettingsDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn entry(&self, key: &str) -> Option<&SettingEntry> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries
            .iter()
            .map(|(k, e)| (k.as_str(), e.value.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.insert(key.into(), value.into(), 0);
    }

    fn insert(&mut self, key: String, value: String, line: usize) {
        match self.entries.get_mut(&key) {
            Some(e) => {
                let old = std::mem::replace(&mut e.value, value);
                e.overridden.push((e.line, old));
                e.line = line;
            }
            None => {
                self.entries.insert(
                    key,
                    SettingEntry {
                        value,
                        line,
                        overridden: Vec::new(),
                    },
                );
            }
        }
    }

    /// Effective settings, one `key = value` line each.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

pub fn parse_settings(text: &str) -> Result<SettingsDoc> {
    let mut doc = SettingsDoc::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(line_no, format!("expected key = value, got {line:?}")));
        };
        let key = key.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::parse(line_no, format!("invalid key {key:?}")));
        }
        doc.insert(key.to_string(), value.trim().to_string(), line_no);
    }
    Ok(doc)
}

fn split_suffix(s: &str) -> (&str, u32) {
    if let Some(num) = s.strip_suffix('k') {
        (num, 3)
    } else if let Some(num) = s.strip_suffix('M') {
        (num, 6)
    } else if let Some(num) = s.strip_suffix('G') {
        (num, 9)
    } else {
        (s, 0)
    }
}

/// Real number with optional decimal `k`/`M`/`G` suffix.
pub fn parse_real(s: &str) -> Option<f64> {
    let (num, exp) = split_suffix(s.trim());
    let v: f64 = num.trim().parse().ok()?;
    let v = v * 10f64.powi(exp as i32);
    v.is_finite().then_some(v)
}

/// Exact non-negative integer with optional decimal suffix, e.g. `2.2M`.
/// Fractions that do not resolve to whole units are rejected.
pub fn parse_count(s: &str) -> Option<u64> {
    let (num, exp) = split_suffix(s.trim());
    let num = num.trim();
    let (int_part, frac_part) = match num.split_once('.') {
        Some((i, f)) => (i, f),
        None => (num, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let frac_trimmed = frac_part.trim_end_matches('0');
    if frac_trimmed.len() > exp as usize {
        return None;
    }
    let digits = format!("{int_part}{frac_trimmed}");
    let scale = exp as usize - frac_trimmed.len();
    let base: u64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    base.checked_mul(10u64.checked_pow(scale as u32)?)
}

/// Splits a comma list, trimming items.
pub fn parse_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(|t| t.trim().to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// `min,max` pair or a single value used for both ends.
pub fn parse_pair<T: Copy>(s: &str, item: impl Fn(&str) -> Option<T>) -> Option<(T, T)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [one] => item(one).map(|v| (v, v)),
        [a, b] => Some((item(a)?, item(b)?)),
        _ => None,
    }
}

pub fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}
