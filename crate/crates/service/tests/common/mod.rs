#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use lexgaze_service::cli::{run, Cli};
use clap::Parser;

pub const SMALL: &str = r#"
[synth]
users = 3
lexicon = { content_words = 2000 }
corpus = { n_docs = 4, words_per_doc = 150 }

[train]
epochs = 4
patience = 4
"#;

pub struct Artifacts {
    _root: tempfile::TempDir,
    pub config: PathBuf,
    pub synth: PathBuf,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
}

/// Runs `lexgaze <args>` in-process and returns its stdout.
pub fn lexgaze(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("lexgaze").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    run(&cli, &mut out)?;
    Ok(String::from_utf8(out)?)
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// synth → build-dataset → train on a small corpus, once per test binary.
pub fn artifacts() -> &'static Artifacts {
    static A: OnceLock<Artifacts> = OnceLock::new();
    A.get_or_init(|| {
        let root = tempfile::tempdir().unwrap();
        let config = root.path().join("small.toml");
        std::fs::write(&config, SMALL).unwrap();
        let synth = root.path().join("synth");
        let dataset = root.path().join("data");
        let checkpoint = root.path().join("ckpt");
        lexgaze(&["--config", p(&config), "synth", "--out", p(&synth)]).unwrap();
        lexgaze(&["--config", p(&config), "build-dataset", "--synth", p(&synth), "--out", p(&dataset)]).unwrap();
        lexgaze(&["--config", p(&config), "train", "--dataset", p(&dataset), "--out", p(&checkpoint)]).unwrap();
        Artifacts {
            _root: root,
            config,
            synth,
            dataset,
            checkpoint,
        }
    })
}
