//! Run configuration file (TOML). Every key is optional; command-line flags
//! take precedence over the file.
//!
//! ```toml
//! seed = 42
//!
//! [paths]
//! corpus = "data/corpus.jsonl"
//! gazetteer = "data/gazetteer.jsonl"
//! qrels = "data/qrels.trec"
//! checkpoint = "out/model.ckpt"
//! output_dir = "out"
//!
//! [filter]
//! min_title_chars = 3
//! min_unique_skills = 5
//! balance_tolerance = 0.0
//!
//! [encoder]
//! hash_buckets = 65536
//! embed_dim = 64
//! proj_dim = 64
//! ngram_min = 3
//! ngram_max = 5
//!
//! [train]
//! batch_size = 64
//! temperature = 0.05
//! learning_rate = 0.001
//! epochs = 10
//! optimizer = "adam"
//! symmetric = false
//!
//! [eval]
//! ks = [5, 10]
//! depth = 100          # omit for full depth
//!
//! [translate]
//! lookup = "data/translations.tsv"
//! targets = ["de", "es", "zh"]
//!
//! [translate.live]
//! endpoint = "https://api.example.com/v1/chat/completions"
//! model = "some-model"
//! token_env = "TRANSLATE_API_TOKEN"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::FilterConfig;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;
use crate::translate::LiveProviderConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub min_title_chars: usize,
    pub min_unique_skills: usize,
    pub balance_tolerance: f64,
}

impl Default for FilterSection {
    fn default() -> Self {
        let f = FilterConfig::default();
        Self {
            min_title_chars: f.min_title_chars,
            min_unique_skills: f.min_unique_skills,
            balance_tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ks: Vec<usize>,
    pub depth: Option<usize>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            ks: vec![5, 10],
            depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateSection {
    pub lookup: Option<PathBuf>,
    pub targets: Vec<String>,
    pub live: Option<LiveProviderConfig>,
}

impl Default for TranslateSection {
    fn default() -> Self {
        Self {
            lookup: None,
            targets: vec!["de".into(), "es".into(), "zh".into()],
            live: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub filter: FilterSection,
    pub encoder: EncoderConfig,
    pub train: TrainConfig,
    pub eval: EvalSection,
    pub translate: TranslateSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            min_title_chars: self.filter.min_title_chars,
            min_unique_skills: self.filter.min_unique_skills,
        }
    }
}
