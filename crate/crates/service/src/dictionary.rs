//! Local definitions for detected words.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use lexgaze_core::text::normalize;

/// Word → definition, keyed by normalized form. Stands in for an external
/// definition service so the server stays self-contained.
#[derive(Clone, Debug, Default)]
pub struct Dictionary {
    entries: BTreeMap<String, String>,
}

impl Dictionary {
    /// Reads a JSON object of `"word": "definition"` pairs.
    pub fn load(path: &Path) -> Result<Self> {
        let raw: BTreeMap<String, String> = serde_json::from_slice(
            &std::fs::read(path).with_context(|| format!("reading dictionary {}", path.display()))?,
        )
        .with_context(|| format!("parsing dictionary {}", path.display()))?;
        Ok(Self::from_entries(raw))
    }

    pub fn from_entries(raw: impl IntoIterator<Item = (String, String)>) -> Self {
        Self {
            entries: raw.into_iter().map(|(k, v)| (normalize(&k), v)).collect(),
        }
    }

    pub fn lookup(&self, word: &str) -> Option<String> {
        self.entries.get(&normalize(word)).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_ignores_case_and_punctuation() {
        let d = Dictionary::from_entries([("Ferric".to_string(), "of iron".to_string())]);
        assert_eq!(d.lookup("ferric,").as_deref(), Some("of iron"));
        assert_eq!(d.lookup("FERRIC").as_deref(), Some("of iron"));
        assert_eq!(d.lookup("iron"), None);
    }
}
