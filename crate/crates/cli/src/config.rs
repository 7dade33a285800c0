//! Flat `key=value` pipeline configuration with section prefixes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hlgkit::allophone::PoolMode;
use hlgkit::decoder::BeamConfig;

/// Raw settings: file values first, later overrides win.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

const KNOWN_KEYS: &[&str] = &[
    "language",
    "out",
    "lm.corpus",
    "lm.unigrams",
    "lm.bigrams",
    "lm.order",
    "lexicon",
    "g2p.tree",
    "g2p.tables",
    "g2p.k",
    "build.blank_loop",
    "decode.search_beam",
    "decode.output_beam",
    "decode.min_active",
    "decode.max_active",
    "decode.acoustic_scale",
    "decode.allophones",
    "decode.pool",
];

impl Settings {
    /// Parses a config file. Relative paths in it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut s = Settings::parse(&text).with_context(|| format!("in {}", path.display()))?;
        s.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("line {}: expected key=value, got {line:?}", i + 1);
            };
            s.set(k.trim(), v.trim())
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(s)
    }

    /// Sets one key; unknown keys are rejected so typos do not go unnoticed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            bail!("unknown configuration key {key:?}");
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override from the command line. Paths given
    /// this way are taken relative to the working directory.
    pub fn set_override(&mut self, kv: &str) -> Result<()> {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("override must be key=value, got {kv:?}");
        };
        let v = v.trim();
        if is_path_key(k.trim()) && !self.base.as_os_str().is_empty() {
            let abs = std::env::current_dir()?.join(v);
            return self.set(k.trim(), &abs.to_string_lossy());
        }
        self.set(k.trim(), v)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.base.join(v))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("{key}={v:?}: {e}")),
        }
    }

    pub fn language(&self) -> Result<String> {
        self.get("language")
            .map(str::to_string)
            .context("no language configured (set language=... or pass --language)")
    }

    pub fn lm_source(&self) -> Result<LmSource> {
        match (self.path("lm.corpus"), self.path("lm.unigrams")) {
            (Some(_), Some(_)) => bail!("set either lm.corpus or lm.unigrams, not both"),
            (None, None) => bail!("no language model source (lm.corpus or lm.unigrams)"),
            (Some(corpus), None) => {
                if self.get("lm.bigrams").is_some() {
                    bail!("lm.bigrams only applies with lm.unigrams");
                }
                let order = self.parsed::<usize>("lm.order")?.unwrap_or(3);
                Ok(LmSource::Corpus { path: corpus, order })
            }
            (None, Some(unigrams)) => Ok(LmSource::Stats {
                unigrams,
                bigrams: self.path("lm.bigrams"),
            }),
        }
    }

    pub fn pron_source(&self) -> Result<PronSource> {
        if let Some(lex) = self.path("lexicon") {
            return Ok(PronSource::Lexicon(lex));
        }
        let tree = self
            .path("g2p.tree")
            .context("no pronunciation source (lexicon or g2p.tree + g2p.tables)")?;
        let tables = self.path("g2p.tables").context("g2p.tables is not set")?;
        let k = self.parsed::<usize>("g2p.k")?.unwrap_or(DEFAULT_K);
        if k == 0 {
            bail!("g2p.k must be at least 1");
        }
        Ok(PronSource::G2p { tree, tables, k })
    }

    pub fn blank_loop(&self) -> Result<bool> {
        Ok(self.parsed::<bool>("build.blank_loop")?.unwrap_or(true))
    }

    /// Beams from `fallback` (typically a graph manifest), then this config.
    pub fn beams(&self, fallback: BeamConfig) -> Result<BeamConfig> {
        let mut b = fallback;
        if let Some(v) = self.parsed("decode.search_beam")? {
            b.search_beam = v;
        }
        if let Some(v) = self.parsed("decode.output_beam")? {
            b.output_beam = v;
        }
        if let Some(v) = self.parsed("decode.min_active")? {
            b.min_active = v;
        }
        if let Some(v) = self.parsed("decode.max_active")? {
            b.max_active = v;
        }
        if let Some(v) = self.parsed("decode.acoustic_scale")? {
            b.acoustic_scale = v;
        }
        b.validate()?;
        Ok(b)
    }

    pub fn pool_mode(&self) -> Result<PoolMode> {
        match self.get("decode.pool") {
            None | Some("sum") => Ok(PoolMode::Sum),
            Some("max") => Ok(PoolMode::Max),
            Some(v) => bail!("decode.pool must be sum or max, got {v:?}"),
        }
    }
}

fn is_path_key(k: &str) -> bool {
    matches!(
        k,
        "out" | "lm.corpus"
            | "lm.unigrams"
            | "lm.bigrams"
            | "lexicon"
            | "g2p.tree"
            | "g2p.tables"
            | "decode.allophones"
    )
}

/// Neighbour languages used when `g2p.k` is not set.
pub const DEFAULT_K: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LmSource {
    Corpus { path: PathBuf, order: usize },
    Stats { unigrams: PathBuf, bigrams: Option<PathBuf> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PronSource {
    Lexicon(PathBuf),
    G2p { tree: PathBuf, tables: PathBuf, k: usize },
}

/// Beam settings as manifest lines.
pub fn beam_entries(b: &BeamConfig) -> Vec<(String, String)> {
    vec![
        ("decode.search_beam".into(), b.search_beam.to_string()),
        ("decode.output_beam".into(), b.output_beam.to_string()),
        ("decode.min_active".into(), b.min_active.to_string()),
        ("decode.max_active".into(), b.max_active.to_string()),
        ("decode.acoustic_scale".into(), b.acoustic_scale.to_string()),
    ]
}

/// Reads beam values back from a manifest, defaulting whatever is absent.
pub fn beams_from_manifest(m: &BTreeMap<String, String>) -> Result<BeamConfig> {
    let mut s = Settings::default();
    for (k, v) in m {
        if k.starts_with("decode.") && KNOWN_KEYS.contains(&k.as_str()) {
            s.set(k, v)?;
        }
    }
    s.beams(BeamConfig::default())
}
