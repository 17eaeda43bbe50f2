//! Downstream CTR stage: semantic IDs become categorical feature fields with
//! their own embedding tables, optionally fused through a residual
//! bottleneck, and scored by a first-order + FM + deep model.

mod fm;
mod fusion;
mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use fm::fm_interaction;
pub use fusion::{fusion_forward, FusionBottleneck, FusionCache, FusionGrads};
pub use model::{CtrCache, CtrConfig, CtrGrads, CtrModel, EmbeddingTable};
pub use train::{
    eval_ctr, extract_sid_representations, extract_sid_view, flattened_sid_representation, train_ctr, CtrEpoch, CtrLog, CtrMetrics,
    CtrTrainConfig, RepresentationView,
};

use crate::error::{Error, Result};
use crate::indexer::SemanticIdTable;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub cardinality: usize,
}

impl FieldSpec {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            name: name.into(),
            cardinality,
        }
    }
}

/// How semantic IDs enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum SidRegime {
    None,
    /// The first ID column replicated into `m` fields, each with its own table.
    Me { m: usize },
    /// The first `m` RQ levels.
    Rq { m: usize },
    /// The first `m` MoC codebooks.
    Moc { m: usize },
}

impl SidRegime {
    pub fn fields(self) -> usize {
        match self {
            SidRegime::None => 0,
            SidRegime::Me { m } | SidRegime::Rq { m } | SidRegime::Moc { m } => m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SidRegime::None => "none",
            SidRegime::Me { .. } => "me",
            SidRegime::Rq { .. } => "rq",
            SidRegime::Moc { .. } => "moc",
        }
    }

    /// ID columns a table must provide.
    pub fn required_columns(self) -> usize {
        match self {
            SidRegime::None => 0,
            SidRegime::Me { .. } => 1,
            SidRegime::Rq { m } | SidRegime::Moc { m } => m,
        }
    }
}

/// Raw fields followed by the semantic-ID fields of the regime.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    raw: Vec<FieldSpec>,
    regime: SidRegime,
    codebook_size: usize,
}

impl FeatureSchema {
    pub fn new(raw: Vec<FieldSpec>, regime: SidRegime, codebook_size: usize) -> Result<Self> {
        if let Some(f) = raw.iter().find(|f| f.cardinality == 0) {
            return Err(Error::InvalidArgument(format!("field {} has cardinality 0", f.name)));
        }
        if regime != SidRegime::None {
            if regime.fields() == 0 {
                return Err(Error::InvalidArgument(format!("{} regime needs m >= 1", regime.name())));
            }
            if codebook_size == 0 {
                return Err(Error::InvalidArgument("codebook size must be >= 1".into()));
            }
        }
        if raw.is_empty() && regime == SidRegime::None {
            return Err(Error::Empty("schema needs at least one field"));
        }
        Ok(Self {
            raw,
            regime,
            codebook_size,
        })
    }

    pub fn raw_fields(&self) -> &[FieldSpec] {
        &self.raw
    }

    pub fn regime(&self) -> SidRegime {
        self.regime
    }

    pub fn codebook_size(&self) -> usize {
        self.codebook_size
    }

    /// All fields in model order.
    pub fn fields(&self) -> Vec<FieldSpec> {
        let mut out = self.raw.clone();
        out.extend((0..self.regime.fields()).map(|i| FieldSpec::new(format!("sid{i}"), self.codebook_size)));
        out
    }

    pub fn field_count(&self) -> usize {
        self.raw.len() + self.regime.fields()
    }

    /// Positions of the semantic-ID fields.
    pub fn sid_fields(&self) -> std::ops::Range<usize> {
        self.raw.len()..self.field_count()
    }
}

/// Maps one raw row and its item's semantic-ID row to a field index vector.
pub fn assemble_features(schema: &FeatureSchema, raw: &[usize], sid: Option<&[usize]>) -> Result<Vec<usize>> {
    if raw.len() != schema.raw.len() {
        return Err(Error::shape("assemble_features raw fields", schema.raw.len(), raw.len()));
    }
    for (f, &v) in schema.raw.iter().zip(raw) {
        if v >= f.cardinality {
            return Err(Error::IndexOutOfRange {
                what: "raw field",
                index: v,
                len: f.cardinality,
            });
        }
    }
    let mut out = raw.to_vec();
    let regime = schema.regime;
    if regime == SidRegime::None {
        return Ok(out);
    }
    let sid = sid.ok_or_else(|| Error::InvalidArgument("semantic-ID row missing".into()))?;
    if sid.len() < regime.required_columns() {
        return Err(Error::shape("assemble_features sid columns", regime.required_columns(), sid.len()));
    }
    if let Some(&bad) = sid.iter().find(|&&c| c >= schema.codebook_size) {
        return Err(Error::IndexOutOfRange {
            what: "semantic id",
            index: bad,
            len: schema.codebook_size,
        });
    }
    match regime {
        SidRegime::Me { m } => out.extend(std::iter::repeat_n(sid[0], m)),
        SidRegime::Rq { m } | SidRegime::Moc { m } => out.extend_from_slice(&sid[..m]),
        SidRegime::None => unreachable!(),
    }
    Ok(out)
}

/// Interaction log: one item, its raw categorical fields and a binary label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSet {
    fields: Vec<FieldSpec>,
    items: Vec<usize>,
    raw: Vec<usize>,
    labels: Vec<f64>,
}

impl InteractionSet {
    pub fn new(fields: Vec<FieldSpec>, items: Vec<usize>, raw: Vec<usize>, labels: Vec<f64>) -> Result<Self> {
        let n = items.len();
        if labels.len() != n {
            return Err(Error::shape("InteractionSet labels", n, labels.len()));
        }
        if raw.len() != n * fields.len() {
            return Err(Error::shape("InteractionSet raw", n * fields.len(), raw.len()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidArgument(format!("label {bad} is not binary")));
        }
        if !fields.is_empty() {
            for row in raw.chunks_exact(fields.len()) {
                for (f, &v) in fields.iter().zip(row) {
                    if v >= f.cardinality {
                        return Err(Error::IndexOutOfRange {
                            what: "raw field",
                            index: v,
                            len: f.cardinality,
                        });
                    }
                }
            }
        }
        Ok(Self {
            fields,
            items,
            raw,
            labels,
        })
    }

    pub fn fields(&self) -> &[FieldSpec] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, row: usize) -> usize {
        self.items[row]
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn raw_row(&self, row: usize) -> &[usize] {
        let f = self.fields.len();
        &self.raw[row * f..(row + 1) * f]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let mut raw = Vec::with_capacity(rows.len() * self.fields.len());
        for &r in rows {
            raw.extend_from_slice(self.raw_row(r));
        }
        Self {
            fields: self.fields.clone(),
            items: rows.iter().map(|&r| self.items[r]).collect(),
            raw,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Keeps only the named raw fields, in the given order.
    pub fn project(&self, names: &[&str]) -> Result<Self> {
        let pos: Vec<usize> = names
            .iter()
            .map(|n| {
                self.fields
                    .iter()
                    .position(|f| f.name == *n)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown field {n}")))
            })
            .collect::<Result<_>>()?;
        let raw = (0..self.len())
            .flat_map(|r| pos.iter().map(move |&p| self.raw_row(r)[p]))
            .collect();
        Ok(Self {
            fields: pos.iter().map(|&p| self.fields[p].clone()).collect(),
            items: self.items.clone(),
            raw,
            labels: self.labels.clone(),
        })
    }
}

/// Field index rows ready for the CTR model.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledData {
    pub fields: usize,
    /// Row-major, `fields` per row.
    pub indices: Vec<usize>,
    pub labels: Vec<f64>,
}

impl AssembledData {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.fields..(i + 1) * self.fields]
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        let mut indices = Vec::with_capacity(rows.len() * self.fields);
        for &r in rows {
            indices.extend_from_slice(self.row(r));
        }
        Self {
            fields: self.fields,
            indices,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }
}

/// Assembles every interaction, looking up semantic IDs by item id.
pub fn assemble_dataset(
    schema: &FeatureSchema,
    data: &InteractionSet,
    sids: Option<&SemanticIdTable>,
) -> Result<AssembledData> {
    if data.fields.len() != schema.raw.len() {
        return Err(Error::shape("assemble_dataset raw fields", schema.raw.len(), data.fields.len()));
    }
    let mut indices = Vec::with_capacity(data.len() * schema.field_count());
    for r in 0..data.len() {
        let sid = match sids {
            Some(t) => {
                let item = data.item(r);
                if item >= t.item_count() {
                    return Err(Error::IndexOutOfRange {
                        what: "semantic-id table",
                        index: item,
                        len: t.item_count(),
                    });
                }
                Some(t.codes(item))
            }
            None => None,
        };
        indices.extend(assemble_features(schema, data.raw_row(r), sid)?);
    }
    Ok(AssembledData {
        fields: schema.field_count(),
        indices,
        labels: data.labels.clone(),
    })
}
