//! Optional TOML configuration. Every section is a partial patch over the
//! built-in defaults; command-line flags override both.
//!
//! ```toml
//! [synth]
//! users = 4
//! corpus = { n_docs = 6 }
//!
//! [model]        # applied over the desk-scale detector
//! d_model = 32
//!
//! [train]
//! epochs = 10
//!
//! [eval]
//! split_seed = 3
//!
//! [serve]
//! addr = "0.0.0.0:7878"
//! ```

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lexgaze_core::model::ModelConfig;
use lexgaze_core::synth::SynthConfig;
use lexgaze_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub split_seed: u64,
    /// Co-occurrence window of the text embedding initialization.
    pub embedding_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split_seed: 1,
            embedding_window: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServeConfig {
    pub addr: String,
    pub tick_ms: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            addr: "127.0.0.1:7878".into(),
            tick_ms: 100,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub synth: SynthConfig,
    /// Patch for [`ModelConfig::desk`]; resolved once the vocabulary size
    /// is known.
    model_patch: Option<Value>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub serve: ServeConfig,
}

const SECTIONS: [&str; 5] = ["synth", "model", "train", "eval", "serve"];

impl Config {
    pub fn defaults() -> Self {
        Self {
            train: TrainConfig::desk(),
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let v: Value = toml::from_str(text)?;
        let table = v.as_object().ok_or_else(|| anyhow!("config must be a table"))?;
        for k in table.keys() {
            if !SECTIONS.contains(&k.as_str()) {
                bail!("unknown section [{k}]");
            }
        }
        let base = Self::defaults();
        let model_patch = table.get("model").cloned();
        if let Some(p) = &model_patch {
            patched(&ModelConfig::desk(0), Some(p)).context("[model]")?;
        }
        Ok(Self {
            synth: patched(&base.synth, table.get("synth")).context("[synth]")?,
            model_patch,
            train: patched(&base.train, table.get("train")).context("[train]")?,
            eval: patched(&base.eval, table.get("eval")).context("[eval]")?,
            serve: patched(&base.serve, table.get("serve")).context("[serve]")?,
        })
    }

    /// The detector configuration for a vocabulary of `vocab_size` units.
    pub fn model(&self, vocab_size: usize) -> Result<ModelConfig> {
        let mut m = patched(&ModelConfig::desk(vocab_size), self.model_patch.as_ref())?;
        m.vocab_size = vocab_size;
        Ok(m)
    }
}

/// `base` with the keys of `patch` replaced, recursively. Keys that `base`
/// does not have are an error, so typos do not pass silently.
fn patched<T: Serialize + DeserializeOwned>(base: &T, patch: Option<&Value>) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    if let Some(p) = patch {
        merge(&mut v, p, "")?;
    }
    Ok(serde_json::from_value(v)?)
}

fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, pv) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(k) {
                    Some(bv) => merge(bv, pv, &here)?,
                    None => bail!("unknown key `{here}`"),
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.train, TrainConfig::desk());
        assert_eq!(c.synth, SynthConfig::default());
        assert_eq!(c.model(500).unwrap(), ModelConfig::desk(500));
    }

    #[test]
    fn sections_patch_nested_fields() {
        let c = Config::parse(
            "[synth]\nusers = 3\ncorpus = { n_docs = 5 }\n[model]\nd_model = 32\n[train]\nepochs = 2\n[serve]\naddr = \"0.0.0.0:1\"\n",
        )
        .unwrap();
        assert_eq!(c.synth.users, 3);
        assert_eq!(c.synth.corpus.n_docs, 5);
        assert_eq!(c.synth.corpus.words_per_doc, SynthConfig::default().corpus.words_per_doc);
        assert_eq!(c.model(100).unwrap().d_model, 32);
        assert_eq!(c.model(100).unwrap().vocab_size, 100);
        assert_eq!(c.train.epochs, 2);
        assert_eq!(c.serve.addr, "0.0.0.0:1");
    }

    #[test]
    fn typos_are_rejected() {
        assert!(Config::parse("[trian]\nepochs = 2\n").is_err());
        assert!(Config::parse("[train]\nepoch = 2\n").is_err());
        assert!(Config::parse("[model]\nd_modle = 2\n").is_err());
        assert!(Config::parse("[train]\nepochs = \"two\"\n").is_err());
    }
}
