use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semcode::dataio::{CtrSynthSpec, SynthSpec};
use semcode::downstream::{CtrConfig, CtrTrainConfig, RepresentationView, SidRegime};
use semcode::indexer::{IndexerConfig, ProbeConfig};

use crate::error::{CliError, CliResult, ErrorKind};

pub const SEED_ENV: &str = "SEMCODE_SEED";

/// Everything a pipeline run depends on. Command-line flags override the
/// values read from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces the seed of every stage.
    pub seed: Option<u64>,
    pub synth: SynthSpec,
    pub interactions: CtrSynthSpec,
    pub split: SplitConfig,
    pub indexer: IndexerConfig,
    pub probe: ProbeConfig,
    pub ctr: CtrRun,
    pub metrics: MetricsConfig,
    pub paths: PathsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    /// Seed of the 8/1/1 split over items used by `index-train`.
    pub items: u64,
    /// Seed of the 8/1/1 split over interaction rows used by `ctr`.
    pub interactions: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            items: 1,
            interactions: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtrRun {
    pub regime: SidRegime,
    pub model: CtrConfig,
    pub train: CtrTrainConfig,
}

impl Default for CtrRun {
    fn default() -> Self {
        Self {
            regime: SidRegime::None,
            model: CtrConfig::default(),
            train: CtrTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepresentationSource {
    /// Downstream when a CTR checkpoint path is configured, codes otherwise.
    Auto,
    /// Quantizer codewords selected by each item's IDs.
    Codes,
    /// Semantic-ID embeddings of a trained CTR model.
    Downstream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub source: RepresentationSource,
    pub k: usize,
    pub kmeans_seeds: Vec<u64>,
    pub center: bool,
    pub view: RepresentationView,
    pub tail_fraction: f64,
    pub top_k: usize,
    /// ID-prefix lengths for the reconstruction probe; empty means `0..=M`.
    pub probe_subsets: Vec<usize>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            source: RepresentationSource::Auto,
            k: 100,
            kmeans_seeds: vec![0],
            center: true,
            view: RepresentationView::Fused,
            tail_fraction: 0.1,
            top_k: 10,
            probe_subsets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub embeddings: Option<PathBuf>,
    pub interactions: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub sids: Option<PathBuf>,
    pub ctr_model: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(format!("invalid config at `{path}`: {}", e.inner()))
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(ErrorKind::Io, format!("io error on {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills `seed` from the environment when neither the file nor a flag set it,
    /// then propagates it to every stage.
    pub fn resolve_seed(&mut self, flag: Option<u64>, env: Option<&str>) -> CliResult<()> {
        if let Some(s) = flag {
            self.seed = Some(s);
        } else if self.seed.is_none() {
            if let Some(v) = env {
                let s = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
                self.seed = Some(s);
            }
        }
        if let Some(s) = self.seed {
            self.synth.seed = s;
            self.indexer.seed = s;
            self.probe.seed = s;
            self.ctr.train.seed = s;
        }
        Ok(())
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, what: &str) -> CliResult<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| CliError::config(format!("missing path `paths.{what}` (flag --{})", what.replace('_', "-"))))
    }
}
