use std::path::Path;

use semcode::downstream::{assemble_dataset, extract_sid_view, CtrModel, RepresentationView, SidRegime};
use semcode::indexer::{reconstruction_probe, QuantizerModel, SemanticIdTable};
use semcode::metrics::{discriminability, pearson_corr, singular_spectrum};
use semcode::ndcore::Matrix;

use crate::commands::{load_embeddings, load_interactions, load_labels, load_model, load_sids};
use crate::config::{RepresentationSource, RunConfig};
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{csv_bytes, ensure_dir, float, read_bytes, read_json, Artifacts};

pub const RECON_FILE: &str = "recon.csv";
pub const NMI_FILE: &str = "nmi.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const SPECTRUM_SUMMARY_FILE: &str = "spectrum_summary.csv";
pub const CORR_FILE: &str = "corr.csv";

/// Per-ID semantic representations of every item, with the labels used to
/// identify them in reports.
pub struct Representation {
    pub method: String,
    pub factor: usize,
    pub source: &'static str,
    pub view: &'static str,
    pub seed: u64,
    pub fields: Vec<Matrix>,
}

impl Representation {
    pub fn flattened(&self) -> CliResult<Matrix> {
        let refs: Vec<&Matrix> = self.fields.iter().collect();
        Ok(Matrix::hcat(&refs)?)
    }

    fn key(&self) -> Vec<String> {
        vec![
            self.method.clone(),
            self.factor.to_string(),
            self.source.to_string(),
            self.view.to_string(),
        ]
    }
}

pub fn load_ctr_model(path: &Path, art: &mut Artifacts) -> CliResult<CtrModel> {
    let bytes = read_bytes(path)?;
    let model: CtrModel = read_json(path, &bytes)?;
    art.input("ctr_model", &bytes);
    Ok(model)
}

fn code_representation(model: &QuantizerModel, table: &SemanticIdTable) -> CliResult<Representation> {
    if table.ids_per_item != model.ids_per_item() || table.codebook_size != model.codebook_size() {
        return Err(CliError::new(
            ErrorKind::Dimension,
            format!(
                "semantic-id table has {} ids of size {}, model has {} of size {}",
                table.ids_per_item,
                table.codebook_size,
                model.ids_per_item(),
                model.codebook_size()
            ),
        ));
    }
    let fields = model
        .codebooks
        .iter()
        .enumerate()
        .map(|(b, cb)| {
            let mut m = Matrix::zeros(table.item_count(), cb.dim());
            for i in 0..table.item_count() {
                m.row_mut(i).copy_from_slice(cb.codeword(table.codes(i)[b]));
            }
            m
        })
        .collect();
    Ok(Representation {
        method: table.kind.clone(),
        factor: table.ids_per_item,
        source: "codes",
        view: "codeword",
        seed: table.seed,
        fields,
    })
}

fn downstream_representation(cfg: &RunConfig, art: &mut Artifacts) -> CliResult<Representation> {
    let model = load_ctr_model(cfg.require(&cfg.paths.ctr_model, "ctr_model")?, art)?;
    let regime = model.schema.regime();
    if regime == SidRegime::None {
        return Err(CliError::config("CTR checkpoint has no semantic-ID fields"));
    }
    let table = load_sids(cfg.require(&cfg.paths.sids, "sids")?, art)?;
    let inter = load_interactions(cfg.require(&cfg.paths.interactions, "interactions")?, art)?;
    let mut first = vec![None; table.item_count()];
    for r in 0..inter.len() {
        let item = inter.item(r);
        if item < first.len() && first[item].is_none() {
            first[item] = Some(r);
        }
    }
    let rows: Vec<usize> = first
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.ok_or_else(|| CliError::new(ErrorKind::Dimension, format!("item {i} has no interaction row")))
        })
        .collect::<CliResult<_>>()?;
    let data = assemble_dataset(&model.schema, &inter.select(&rows), Some(&table))?;
    let view = cfg.metrics.view;
    let fields = extract_sid_view(&model, &data, view)?;
    Ok(Representation {
        method: regime.name().to_string(),
        factor: regime.fields(),
        source: "downstream",
        view: match (view, model.fusion.is_some()) {
            (RepresentationView::Fused, true) => "fused",
            _ => "lookup",
        },
        seed: cfg.ctr.train.seed,
        fields,
    })
}

pub fn load_representation(cfg: &RunConfig, art: &mut Artifacts) -> CliResult<Representation> {
    let downstream = match cfg.metrics.source {
        RepresentationSource::Auto => cfg.paths.ctr_model.is_some(),
        RepresentationSource::Codes => false,
        RepresentationSource::Downstream => true,
    };
    if downstream {
        downstream_representation(cfg, art)
    } else {
        let model = load_model(cfg.require(&cfg.paths.model, "model")?, art)?;
        let table = load_sids(cfg.require(&cfg.paths.sids, "sids")?, art)?;
        code_representation(&model, &table)
    }
}

pub fn recon(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, cfg.probe.seed);
    let table = load_sids(cfg.require(&cfg.paths.sids, "sids")?, &mut art)?;
    let targets = load_embeddings(cfg.require(&cfg.paths.embeddings, "embeddings")?, &mut art)?;
    let subsets: Vec<usize> = if cfg.metrics.probe_subsets.is_empty() {
        (0..=table.ids_per_item).collect()
    } else {
        cfg.metrics.probe_subsets.clone()
    };
    let results = reconstruction_probe(&table, &subsets, &targets, &cfg.probe)?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                table.kind.clone(),
                table.ids_per_item.to_string(),
                r.subset_size.to_string(),
                float(r.mse),
                r.seed.to_string(),
            ]
        })
        .collect();
    ensure_dir(out)?;
    art.write(
        &out.join(RECON_FILE),
        "reconstruction-probe",
        &csv_bytes(&["method", "factor", "subset_size", "mse", "seed"], &rows),
    )
}

pub fn nmi(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, 0);
    let rep = load_representation(cfg, &mut art)?;
    art.set_seed(rep.seed);
    let labels = load_labels(cfg.require(&cfg.paths.labels, "labels")?, &mut art)?;
    let flat = rep.flattened()?;
    if cfg.metrics.kmeans_seeds.is_empty() {
        return Err(CliError::config("metrics.kmeans_seeds must not be empty"));
    }
    let mut rows = Vec::new();
    for &seed in &cfg.metrics.kmeans_seeds {
        let d = discriminability(&flat, &labels, cfg.metrics.k, seed)?;
        let mut row = rep.key();
        row.extend([d.k.to_string(), d.seed.to_string(), float(d.nmi)]);
        rows.push(row);
    }
    ensure_dir(out)?;
    art.write(
        &out.join(NMI_FILE),
        "discriminability",
        &csv_bytes(&["method", "factor", "source", "view", "k", "seed", "nmi"], &rows),
    )
}

pub fn spectrum(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, 0);
    let rep = load_representation(cfg, &mut art)?;
    art.set_seed(rep.seed);
    let report = singular_spectrum(&rep.flattened()?, cfg.metrics.center)?;
    let m = &cfg.metrics;
    let values: Vec<Vec<String>> = report
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = rep.key();
            row.extend([i.to_string(), float(*s)]);
            row
        })
        .collect();
    let mut summary = rep.key();
    summary.extend([
        report.centered.to_string(),
        report.rows.to_string(),
        report.cols.to_string(),
        float(report.top()),
        m.top_k.to_string(),
        float(report.top_k_mass(m.top_k)),
        float(m.tail_fraction),
        float(report.tail_ratio(m.tail_fraction)),
    ]);
    ensure_dir(out)?;
    art.write(
        &out.join(SPECTRUM_FILE),
        "singular-spectrum",
        &csv_bytes(&["method", "factor", "source", "view", "index", "singular_value"], &values),
    )?;
    art.write(
        &out.join(SPECTRUM_SUMMARY_FILE),
        "singular-spectrum-summary",
        &csv_bytes(
            &[
                "method",
                "factor",
                "source",
                "view",
                "centered",
                "rows",
                "cols",
                "top1",
                "top_k",
                "top_k_mass",
                "tail_fraction",
                "tail_ratio",
            ],
            &[summary],
        ),
    )
}

pub fn corr(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, 0);
    let rep = load_representation(cfg, &mut art)?;
    art.set_seed(rep.seed);
    let c = pearson_corr(&rep.fields)?;
    let n = rep.fields.len();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut row = rep.key();
            row.extend([
                i.to_string(),
                j.to_string(),
                float(c.get(i, j)),
                (c.degenerate.contains(&i) || c.degenerate.contains(&j)).to_string(),
            ]);
            rows.push(row);
        }
    }
    ensure_dir(out)?;
    art.write(
        &out.join(CORR_FILE),
        "pearson-correlation",
        &csv_bytes(&["method", "factor", "source", "view", "i", "j", "r", "degenerate"], &rows),
    )
}
