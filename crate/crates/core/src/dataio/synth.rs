//! Seeded synthetic data: Gaussian-mixture item embeddings and a CTR log
//! whose labels depend on the latent cluster.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::downstream::{FieldSpec, InteractionSet};
use crate::error::{Error, Result};
use crate::ndcore::{derive_seed, permutation, seeded, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LabelRule {
    /// The cluster index itself.
    ClusterId,
    /// `f(cluster) xor Bernoulli(p)`, `f` marking a seeded half of the clusters.
    ClusterXorNoise { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub clusters: usize,
    pub dim: usize,
    pub items: usize,
    pub sigma: f64,
    pub label_rule: LabelRule,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            clusters: 20,
            dim: 64,
            items: 5000,
            sigma: 0.1,
            label_rule: LabelRule::ClusterId,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.dim == 0 {
            return Err(Error::InvalidArgument("clusters and dim must be >= 1".into()));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma {} must be >= 0", self.sigma)));
        }
        if let LabelRule::ClusterXorNoise { p } = self.label_rule {
            check_p(p)?;
        }
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("noise p {p} not in [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub embeddings: Matrix,
    /// Unit-norm cluster means, `clusters × dim`.
    pub means: Matrix,
    pub clusters: Vec<usize>,
    pub labels: Vec<usize>,
}

const STREAM_MEANS: u64 = 1;
const STREAM_ASSIGN: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_POSITIVE: u64 = 4;
const STREAM_LABELS: u64 = 5;
const STREAM_CTR: u64 = 6;

/// `f(c)`: a seeded choice of `⌊C/2⌋` clusters labelled positive.
pub fn positive_clusters(clusters: usize, seed: u64) -> Vec<bool> {
    let order = permutation(clusters, &mut seeded(derive_seed(seed, STREAM_POSITIVE)));
    let mut out = vec![false; clusters];
    for &c in &order[..clusters / 2] {
        out[c] = true;
    }
    out
}

pub fn synth_embeddings(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = seeded(derive_seed(spec.seed, STREAM_MEANS));
    let mut means = Matrix::from_fn(spec.clusters, spec.dim, |_, _| StandardNormal.sample(&mut rng));
    for c in 0..spec.clusters {
        let row = means.row_mut(c);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        row.iter_mut().for_each(|v| *v /= norm);
    }

    let mut rng = seeded(derive_seed(spec.seed, STREAM_ASSIGN));
    let clusters: Vec<usize> = (0..spec.items).map(|_| rng.random_range(0..spec.clusters)).collect();
    let mut rng = seeded(derive_seed(spec.seed, STREAM_NOISE));
    let embeddings = Matrix::from_fn(spec.items, spec.dim, |i, j| {
        let noise: f64 = StandardNormal.sample(&mut rng);
        means.get(clusters[i], j) + spec.sigma * noise
    });

    let labels = match spec.label_rule {
        LabelRule::ClusterId => clusters.clone(),
        LabelRule::ClusterXorNoise { p } => {
            let f = positive_clusters(spec.clusters, spec.seed);
            let mut rng = seeded(derive_seed(spec.seed, STREAM_LABELS));
            clusters
                .iter()
                .map(|&c| usize::from(f[c] ^ rng.random_bool(p)))
                .collect()
        }
    };
    Ok(SynthData {
        embeddings,
        means,
        clusters,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CtrSynthSpec {
    pub rows_per_item: usize,
    /// Cardinality of the `user` field, which carries no signal.
    pub users: usize,
    /// Cardinality of the `category` field: clusters are split into this
    /// many contiguous groups. Equal to the cluster count it reveals the
    /// cluster exactly.
    pub category_groups: usize,
    pub noise: f64,
}

impl Default for CtrSynthSpec {
    fn default() -> Self {
        Self {
            rows_per_item: 2,
            users: 50,
            category_groups: 5,
            noise: 0.15,
        }
    }
}

/// Category of a cluster when `clusters` are divided into `groups` contiguous runs.
pub fn category_of(cluster: usize, clusters: usize, groups: usize) -> usize {
    cluster * groups / clusters
}

/// Interaction log over the items of `spec`: random users, the item's
/// category group, and label `f(cluster) xor Bernoulli(noise)`.
pub fn synth_ctr(spec: &SynthSpec, ctr: &CtrSynthSpec) -> Result<(SynthData, InteractionSet)> {
    check_p(ctr.noise)?;
    if ctr.users == 0 || ctr.category_groups == 0 || ctr.rows_per_item == 0 {
        return Err(Error::InvalidArgument(
            "users, category_groups and rows_per_item must be >= 1".into(),
        ));
    }
    if ctr.category_groups > spec.clusters {
        return Err(Error::InvalidArgument(format!(
            "{} category groups exceed {} clusters",
            ctr.category_groups, spec.clusters
        )));
    }
    let data = synth_embeddings(spec)?;
    let f = positive_clusters(spec.clusters, spec.seed);
    let mut rng = seeded(derive_seed(spec.seed, STREAM_CTR));
    let n = spec.items * ctr.rows_per_item;
    let (mut items, mut raw, mut labels) = (Vec::with_capacity(n), Vec::with_capacity(2 * n), Vec::with_capacity(n));
    for (item, &c) in data.clusters.iter().enumerate() {
        for _ in 0..ctr.rows_per_item {
            items.push(item);
            raw.push(rng.random_range(0..ctr.users));
            raw.push(category_of(c, spec.clusters, ctr.category_groups));
            labels.push(f64::from(u8::from(f[c] ^ rng.random_bool(ctr.noise))));
        }
    }
    let set = InteractionSet::new(
        vec![
            FieldSpec::new("user", ctr.users),
            FieldSpec::new("category", ctr.category_groups),
        ],
        items,
        raw,
        labels,
    )?;
    Ok((data, set))
}
