use std::fmt::Display;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use semcode::dataio::{CtrSynthSpec, LabelRule, SynthSpec};
use semcode::downstream::{CtrConfig, CtrTrainConfig, RepresentationView, SidRegime};
use semcode::indexer::{IndexerConfig, ProbeConfig, ProbeEncoding};
use semcode::quantize::QuantizerKind;

use crate::config::{MetricsConfig, RepresentationSource, RunConfig, SplitConfig};
use crate::error::{CliError, CliResult};

fn dflt(text: &str, value: impl Display) -> String {
    format!("{text} [default: {value}]")
}

fn dflt_list<T: Display>(text: &str, values: &[T]) -> String {
    let joined: Vec<String> = values.iter().map(ToString::to_string).collect();
    dflt(text, if joined.is_empty() { "none".to_string() } else { joined.join(",") })
}

fn none(text: &str) -> String {
    dflt(text, "none")
}

fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
    if let Some(v) = src {
        *dst = v.clone();
    }
}

fn set_path(dst: &mut Option<PathBuf>, src: &Option<PathBuf>) {
    if src.is_some() {
        dst.clone_from(src);
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "semcode",
    version,
    about = "Semantic-ID indexing, CTR training and representation analysis"
)]
pub struct Cli {
    #[arg(long, global = true, value_name = "FILE", help = none("JSON run configuration"))]
    pub config: Option<PathBuf>,
    #[arg(
        long,
        global = true,
        help = none("Seed for every stage; falls back to the config file, then $SEMCODE_SEED")
    )]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gaussian-mixture embedding set, its cluster labels and an interaction log
    Synth(SynthArgs),
    /// Train a VQ / RQ / MoC quantizer on an embedding file
    IndexTrain(IndexTrainArgs),
    /// Export semantic IDs for every item of an embedding file
    Encode(EncodeArgs),
    /// Scalability analyses
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Downstream CTR model
    #[command(subcommand)]
    Ctr(CtrCommand),
    /// Join analysis outputs under a directory into one comparison table
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelRuleArg {
    ClusterId,
    ClusterXorNoise,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR", help = none("Output directory"))]
    pub out: Option<PathBuf>,
    #[arg(long, help = dflt("Number of clusters", SynthSpec::default().clusters))]
    pub clusters: Option<usize>,
    #[arg(long, help = dflt("Embedding dimension", SynthSpec::default().dim))]
    pub dim: Option<usize>,
    #[arg(long, help = dflt("Number of items", SynthSpec::default().items))]
    pub items: Option<usize>,
    #[arg(long, help = dflt("Per-cluster standard deviation", SynthSpec::default().sigma))]
    pub sigma: Option<f64>,
    #[arg(long, value_enum, help = dflt("Label stored with each item", "cluster-id"))]
    pub label_rule: Option<LabelRuleArg>,
    #[arg(long, help = dflt("Flip probability of the cluster-xor-noise rule", 0.0))]
    pub label_noise: Option<f64>,
    #[arg(long, help = dflt("Interactions per item", CtrSynthSpec::default().rows_per_item))]
    pub rows_per_item: Option<usize>,
    #[arg(long, help = dflt("Cardinality of the user field", CtrSynthSpec::default().users))]
    pub users: Option<usize>,
    #[arg(long, help = dflt("Cardinality of the category field", CtrSynthSpec::default().category_groups))]
    pub category_groups: Option<usize>,
    #[arg(long, help = dflt("Click label flip probability", CtrSynthSpec::default().noise))]
    pub ctr_noise: Option<f64>,
}

impl SynthArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.out, &self.out);
        let s = &mut cfg.synth;
        set(&mut s.clusters, &self.clusters);
        set(&mut s.dim, &self.dim);
        set(&mut s.items, &self.items);
        set(&mut s.sigma, &self.sigma);
        match (self.label_rule, self.label_noise) {
            (Some(LabelRuleArg::ClusterId), _) => s.label_rule = LabelRule::ClusterId,
            (Some(LabelRuleArg::ClusterXorNoise), p) => {
                s.label_rule = LabelRule::ClusterXorNoise { p: p.unwrap_or(0.0) }
            }
            (None, Some(p)) => {
                if let LabelRule::ClusterXorNoise { p: q } = &mut s.label_rule {
                    *q = p;
                }
            }
            (None, None) => {}
        }
        let c = &mut cfg.interactions;
        set(&mut c.rows_per_item, &self.rows_per_item);
        set(&mut c.users, &self.users);
        set(&mut c.category_groups, &self.category_groups);
        set(&mut c.noise, &self.ctr_noise);
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Vq,
    Rq,
    Moc,
}

#[derive(Debug, Args)]
pub struct IndexTrainArgs {
    #[arg(long, value_name = "FILE", help = none("Embedding file"))]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_name = "DIR", help = none("Output directory"))]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, help = dflt("Quantizer", IndexerConfig::default().quantizer.name()))]
    pub kind: Option<KindArg>,
    #[arg(
        long,
        visible_alias = "levels",
        help = dflt("Codebooks (MoC) or levels (RQ)", IndexerConfig::default().quantizer.codebooks())
    )]
    pub books: Option<usize>,
    #[arg(long, help = dflt("Codewords per codebook", IndexerConfig::default().codebook_size))]
    pub codebook_size: Option<usize>,
    #[arg(long, help = dflt("Latent dimension", IndexerConfig::default().latent_dim))]
    pub latent_dim: Option<usize>,
    #[arg(long, value_delimiter = ',', help = dflt_list("Encoder hidden widths", &IndexerConfig::default().encoder_hidden))]
    pub encoder_hidden: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', help = dflt("Decoder hidden widths", "mirror of encoder"))]
    pub decoder_hidden: Option<Vec<usize>>,
    #[arg(long, help = dflt("Adam learning rate", IndexerConfig::default().lr))]
    pub lr: Option<f64>,
    #[arg(long, help = dflt("Minibatch size", IndexerConfig::default().batch_size))]
    pub batch_size: Option<usize>,
    #[arg(long, help = dflt("Maximum epochs", IndexerConfig::default().epochs))]
    pub epochs: Option<usize>,
    #[arg(long, help = dflt("Early-stopping patience in epochs, 0 disables", IndexerConfig::default().patience))]
    pub patience: Option<usize>,
    #[arg(long, help = dflt("Commitment weight", IndexerConfig::default().beta))]
    pub beta: Option<f64>,
    #[arg(long, help = dflt("EMA decay of codebook statistics", IndexerConfig::default().ema_decay))]
    pub ema_decay: Option<f64>,
    #[arg(long, help = dflt("Usage below which a code is restarted", IndexerConfig::default().dead_code_threshold))]
    pub dead_code_threshold: Option<u64>,
    #[arg(long, value_name = "BOOL", help = dflt("Pin codeword 0 at the origin", IndexerConfig::default().zero_code))]
    pub zero_code: Option<bool>,
    #[arg(long, help = dflt("Seed of the item split", SplitConfig::default().items))]
    pub split_seed: Option<u64>,
}

impl IndexTrainArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        set_path(&mut cfg.paths.embeddings, &self.embeddings);
        set_path(&mut cfg.paths.out, &self.out);
        let ix = &mut cfg.indexer;
        let current = ix.quantizer;
        let kind = self.kind.unwrap_or(match current {
            QuantizerKind::Vq => KindArg::Vq,
            QuantizerKind::Rq { .. } => KindArg::Rq,
            QuantizerKind::Moc { .. } => KindArg::Moc,
        });
        let n = self.books.unwrap_or(current.codebooks());
        ix.quantizer = match kind {
            KindArg::Vq if n != 1 => {
                return Err(CliError::config(format!("--books {n} requires --kind rq or moc")));
            }
            KindArg::Vq => QuantizerKind::Vq,
            KindArg::Rq => QuantizerKind::Rq { levels: n },
            KindArg::Moc => QuantizerKind::Moc { books: n },
        };
        set(&mut ix.codebook_size, &self.codebook_size);
        set(&mut ix.latent_dim, &self.latent_dim);
        set(&mut ix.encoder_hidden, &self.encoder_hidden);
        if self.decoder_hidden.is_some() {
            ix.decoder_hidden.clone_from(&self.decoder_hidden);
        }
        set(&mut ix.lr, &self.lr);
        set(&mut ix.batch_size, &self.batch_size);
        set(&mut ix.epochs, &self.epochs);
        set(&mut ix.patience, &self.patience);
        set(&mut ix.beta, &self.beta);
        set(&mut ix.ema_decay, &self.ema_decay);
        set(&mut ix.dead_code_threshold, &self.dead_code_threshold);
        set(&mut ix.zero_code, &self.zero_code);
        set(&mut cfg.split.items, &self.split_seed);
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_name = "FILE", help = none("Quantizer checkpoint"))]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Embedding file"))]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Output semantic-ID file"))]
    pub out: Option<PathBuf>,
}

impl EncodeArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.model, &self.model);
        set_path(&mut cfg.paths.embeddings, &self.embeddings);
        set_path(&mut cfg.paths.out, &self.out);
    }
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Reconstruction probe error for growing prefixes of the semantic IDs
    Recon(ReconArgs),
    /// Discriminability: NMI of k-means clusters against item labels
    Nmi(NmiArgs),
    /// Singular spectrum of the semantic representation
    Spectrum(SpectrumArgs),
    /// Pearson correlation between per-ID representations
    Corr(CorrArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    OneHot,
    Lookup,
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    #[arg(long, value_name = "FILE", help = none("Semantic-ID file"))]
    pub sids: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Target embedding file"))]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_name = "DIR", help = none("Output directory"))]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', help = dflt("ID-prefix lengths to probe", "0..=M"))]
    pub subsets: Option<Vec<usize>>,
    #[arg(long, help = dflt("Probe hidden width", ProbeConfig::default().hidden))]
    pub probe_hidden: Option<usize>,
    #[arg(long, help = dflt("Probe epochs", ProbeConfig::default().epochs))]
    pub probe_epochs: Option<usize>,
    #[arg(long, help = dflt("Probe minibatch size", ProbeConfig::default().batch_size))]
    pub probe_batch_size: Option<usize>,
    #[arg(long, help = dflt("Probe learning rate", ProbeConfig::default().lr))]
    pub probe_lr: Option<f64>,
    #[arg(long, value_enum, help = dflt("Probe input encoding", "one-hot"))]
    pub probe_encoding: Option<EncodingArg>,
    #[arg(long, help = dflt("Lookup width for --probe-encoding lookup", 32))]
    pub probe_lookup_dim: Option<usize>,
}

impl ReconArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.sids, &self.sids);
        set_path(&mut cfg.paths.embeddings, &self.embeddings);
        set_path(&mut cfg.paths.out, &self.out);
        set(&mut cfg.metrics.probe_subsets, &self.subsets);
        let p = &mut cfg.probe;
        set(&mut p.hidden, &self.probe_hidden);
        set(&mut p.epochs, &self.probe_epochs);
        set(&mut p.batch_size, &self.probe_batch_size);
        set(&mut p.lr, &self.probe_lr);
        match (self.probe_encoding, self.probe_lookup_dim) {
            (Some(EncodingArg::OneHot), _) => p.encoding = ProbeEncoding::OneHot,
            (Some(EncodingArg::Lookup), dim) => p.encoding = ProbeEncoding::Lookup { dim: dim.unwrap_or(32) },
            (None, Some(d)) => {
                if let ProbeEncoding::Lookup { dim } = &mut p.encoding {
                    *dim = d;
                }
            }
            (None, None) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Auto,
    Codes,
    Downstream,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ViewArg {
    Lookup,
    Fused,
}

/// Where the semantic representation comes from: quantizer codewords
/// (`--model`) or a trained CTR model (`--ctr-model` with `--interactions`).
#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long, value_name = "FILE", help = none("Semantic-ID file"))]
    pub sids: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Quantizer checkpoint (code-embedding source)"))]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("CTR checkpoint (downstream source)"))]
    pub ctr_model: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Interaction file (downstream source)"))]
    pub interactions: Option<PathBuf>,
    #[arg(long, value_enum, help = dflt("Representation source; auto picks downstream when a CTR checkpoint is given", "auto"))]
    pub source: Option<SourceArg>,
    #[arg(long, value_enum, help = dflt("Downstream stage to read", "fused"))]
    pub view: Option<ViewArg>,
    #[arg(long, value_name = "DIR", help = none("Output directory"))]
    pub out: Option<PathBuf>,
}

impl SourceArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.sids, &self.sids);
        set_path(&mut cfg.paths.model, &self.model);
        set_path(&mut cfg.paths.ctr_model, &self.ctr_model);
        set_path(&mut cfg.paths.interactions, &self.interactions);
        set_path(&mut cfg.paths.out, &self.out);
        if let Some(s) = self.source {
            cfg.metrics.source = match s {
                SourceArg::Auto => RepresentationSource::Auto,
                SourceArg::Codes => RepresentationSource::Codes,
                SourceArg::Downstream => RepresentationSource::Downstream,
            };
        }
        if let Some(v) = self.view {
            cfg.metrics.view = match v {
                ViewArg::Lookup => RepresentationView::Lookup,
                ViewArg::Fused => RepresentationView::Fused,
            };
        }
    }
}

#[derive(Debug, Args)]
pub struct NmiArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_name = "FILE", help = none("Item label file written by synth"))]
    pub labels: Option<PathBuf>,
    #[arg(long, help = dflt("k-means clusters", MetricsConfig::default().k))]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',', help = dflt_list("k-means seeds, averaged", &MetricsConfig::default().kmeans_seeds))]
    pub kmeans_seeds: Option<Vec<u64>>,
}

impl NmiArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.source.apply(cfg);
        set_path(&mut cfg.paths.labels, &self.labels);
        set(&mut cfg.metrics.k, &self.k);
        set(&mut cfg.metrics.kmeans_seeds, &self.kmeans_seeds);
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_name = "BOOL", help = dflt("Subtract column means first", MetricsConfig::default().center))]
    pub center: Option<bool>,
    #[arg(long, help = dflt("Leading values summed for the mass column", MetricsConfig::default().top_k))]
    pub top_k: Option<usize>,
    #[arg(long, help = dflt("Trailing fraction checked for collapse", MetricsConfig::default().tail_fraction))]
    pub tail_fraction: Option<f64>,
}

impl SpectrumArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.source.apply(cfg);
        set(&mut cfg.metrics.center, &self.center);
        set(&mut cfg.metrics.top_k, &self.top_k);
        set(&mut cfg.metrics.tail_fraction, &self.tail_fraction);
    }
}

#[derive(Debug, Args)]
pub struct CorrArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

impl CorrArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        self.source.apply(cfg);
    }
}

#[derive(Debug, Subcommand)]
pub enum CtrCommand {
    /// Train on the 8/1/1 split of an interaction file
    Train(CtrTrainArgs),
    /// Evaluate a checkpoint on one split
    Eval(CtrEvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegimeArg {
    None,
    Me,
    Rq,
    Moc,
}

#[derive(Debug, Args)]
pub struct CtrTrainArgs {
    #[arg(long, value_name = "FILE", help = none("Interaction file"))]
    pub interactions: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Semantic-ID file"))]
    pub sids: Option<PathBuf>,
    #[arg(long, value_name = "DIR", help = none("Output directory"))]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, help = dflt("Semantic-ID fields", "none"))]
    pub regime: Option<RegimeArg>,
    #[arg(long, help = dflt("Scaling factor: number of semantic-ID fields", 0))]
    pub m: Option<usize>,
    #[arg(long, help = dflt("Field embedding width", CtrConfig::default().dim))]
    pub dim: Option<usize>,
    #[arg(long, value_delimiter = ',', help = dflt_list("Deep head hidden widths", &CtrConfig::default().deep_hidden))]
    pub deep_hidden: Option<Vec<usize>>,
    #[arg(long, value_name = "BOOL", help = dflt("FM interaction term", CtrConfig::default().use_fm))]
    pub fm: Option<bool>,
    #[arg(long, value_name = "BOOL", help = dflt("Deep head", CtrConfig::default().use_deep))]
    pub deep: Option<bool>,
    #[arg(long, value_name = "BOOL", help = dflt("Bottleneck fusion of field embeddings", CtrConfig::default().fusion))]
    pub fusion: Option<bool>,
    #[arg(long, help = dflt("Fusion reduction ratio", CtrConfig::default().reduction))]
    pub reduction: Option<usize>,
    #[arg(long, help = dflt("Embedding init standard deviation", CtrConfig::default().init_std))]
    pub init_std: Option<f64>,
    #[arg(long, help = dflt("Adam learning rate", CtrTrainConfig::default().lr))]
    pub lr: Option<f64>,
    #[arg(long, help = dflt("Minibatch size", CtrTrainConfig::default().batch_size))]
    pub batch_size: Option<usize>,
    #[arg(long, help = dflt("Maximum epochs", CtrTrainConfig::default().epochs))]
    pub epochs: Option<usize>,
    #[arg(long, help = dflt("Early-stopping patience in epochs, 0 disables", CtrTrainConfig::default().patience))]
    pub patience: Option<usize>,
    #[arg(long, help = dflt("Seed of the interaction split", SplitConfig::default().interactions))]
    pub split_seed: Option<u64>,
}

pub(crate) fn apply_regime(cfg: &mut RunConfig, regime: Option<RegimeArg>, m: Option<usize>) -> CliResult<()> {
    let current = cfg.ctr.regime;
    let regime = regime.unwrap_or(match current {
        SidRegime::None => RegimeArg::None,
        SidRegime::Me { .. } => RegimeArg::Me,
        SidRegime::Rq { .. } => RegimeArg::Rq,
        SidRegime::Moc { .. } => RegimeArg::Moc,
    });
    let m = m.unwrap_or(current.fields().max(1));
    cfg.ctr.regime = match regime {
        RegimeArg::None => SidRegime::None,
        RegimeArg::Me => SidRegime::Me { m },
        RegimeArg::Rq => SidRegime::Rq { m },
        RegimeArg::Moc => SidRegime::Moc { m },
    };
    if !matches!(regime, RegimeArg::None) && m == 0 {
        return Err(CliError::config("--m must be >= 1 for a semantic-ID regime"));
    }
    Ok(())
}

impl CtrTrainArgs {
    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        set_path(&mut cfg.paths.interactions, &self.interactions);
        set_path(&mut cfg.paths.sids, &self.sids);
        set_path(&mut cfg.paths.out, &self.out);
        if self.regime.is_some() || self.m.is_some() {
            apply_regime(cfg, self.regime, self.m)?;
        }
        let m = &mut cfg.ctr.model;
        set(&mut m.dim, &self.dim);
        set(&mut m.deep_hidden, &self.deep_hidden);
        set(&mut m.use_fm, &self.fm);
        set(&mut m.use_deep, &self.deep);
        set(&mut m.fusion, &self.fusion);
        set(&mut m.reduction, &self.reduction);
        set(&mut m.init_std, &self.init_std);
        let t = &mut cfg.ctr.train;
        set(&mut t.lr, &self.lr);
        set(&mut t.batch_size, &self.batch_size);
        set(&mut t.epochs, &self.epochs);
        set(&mut t.patience, &self.patience);
        set(&mut cfg.split.interactions, &self.split_seed);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    pub fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
            SplitArg::All => "all",
        }
    }
}

#[derive(Debug, Args)]
pub struct CtrEvalArgs {
    #[arg(long, value_name = "FILE", help = none("CTR checkpoint"))]
    pub ctr_model: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Interaction file"))]
    pub interactions: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Semantic-ID file"))]
    pub sids: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test", help = "Split to score [default: test]", hide_default_value = true)]
    pub split: SplitArg,
    #[arg(long, help = dflt("Seed of the interaction split", SplitConfig::default().interactions))]
    pub split_seed: Option<u64>,
    #[arg(long, value_name = "FILE", help = none("Output metrics CSV"))]
    pub out: Option<PathBuf>,
}

impl CtrEvalArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.ctr_model, &self.ctr_model);
        set_path(&mut cfg.paths.interactions, &self.interactions);
        set_path(&mut cfg.paths.sids, &self.sids);
        set_path(&mut cfg.paths.out, &self.out);
        set(&mut cfg.split.interactions, &self.split_seed);
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_name = "DIR", help = none("Directory searched recursively for analysis outputs"))]
    pub run_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE", help = none("Output CSV"))]
    pub out: Option<PathBuf>,
}

impl ReportArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.run_dir, &self.run_dir);
        set_path(&mut cfg.paths.out, &self.out);
    }
}
