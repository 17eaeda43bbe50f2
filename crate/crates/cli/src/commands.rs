use std::path::Path;

use semcode::dataio::{
    decode_embeddings, decode_interactions, decode_sids, encode_embeddings, encode_interactions, encode_sids,
    split_811, synth_ctr,
};
use semcode::downstream::InteractionSet;
use semcode::indexer::{export_semantic_ids, train_indexer, QuantizerModel, SemanticIdTable};
use semcode::ndcore::Matrix;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{csv_bytes, ensure_dir, float, read_bytes, read_json, read_text, Artifacts};

pub const EMBEDDINGS_FILE: &str = "embeddings.semb";
pub const LABELS_FILE: &str = "labels.csv";
pub const INTERACTIONS_FILE: &str = "interactions.csv";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";

pub fn load_embeddings(path: &Path, art: &mut Artifacts) -> CliResult<Matrix> {
    let bytes = read_bytes(path)?;
    let m = decode_embeddings(&bytes, path)?;
    art.input("embeddings", &bytes);
    Ok(m)
}

pub fn load_sids(path: &Path, art: &mut Artifacts) -> CliResult<SemanticIdTable> {
    let text = read_text(path)?;
    let t = decode_sids(&text, path)?;
    art.input("sids", text.as_bytes());
    Ok(t)
}

pub fn load_interactions(path: &Path, art: &mut Artifacts) -> CliResult<InteractionSet> {
    let bytes = read_bytes(path)?;
    let set = decode_interactions(&bytes, path)?;
    art.input("interactions", &bytes);
    Ok(set)
}

pub fn load_model(path: &Path, art: &mut Artifacts) -> CliResult<QuantizerModel> {
    let bytes = read_bytes(path)?;
    let model: QuantizerModel = read_json(path, &bytes)?;
    model.validate()?;
    art.input("model", &bytes);
    Ok(model)
}

/// Item labels written by `synth`: `item,cluster,label` with items `0..n` in order.
pub fn load_labels(path: &Path, art: &mut Artifacts) -> CliResult<Vec<usize>> {
    let bytes = read_bytes(path)?;
    let parse = |line: u64, message: String| {
        CliError::new(
            ErrorKind::Parse,
            format!("parse error in {} at line {line}: {message}", path.display()),
        )
    };
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let header = reader.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["item", "cluster", "label"] {
        return Err(parse(1, "header must be item,cluster,label".into()));
    }
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> CliResult<usize> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| parse(line, format!("column {} is not a non-negative integer", i + 1)))
        };
        if num(0)? != labels.len() {
            return Err(parse(line, format!("expected item {}", labels.len())));
        }
        labels.push(num(2)?);
    }
    art.input("labels", &bytes);
    Ok(labels)
}

pub fn synth(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let (data, inter) = synth_ctr(&cfg.synth, &cfg.interactions)?;
    ensure_dir(out)?;
    let mut art = Artifacts::new(cfg, cfg.synth.seed);
    art.write(&out.join(EMBEDDINGS_FILE), "embeddings", &encode_embeddings(&data.embeddings)?)?;
    let rows: Vec<Vec<String>> = (0..data.clusters.len())
        .map(|i| vec![i.to_string(), data.clusters[i].to_string(), data.labels[i].to_string()])
        .collect();
    art.write(&out.join(LABELS_FILE), "labels", &csv_bytes(&["item", "cluster", "label"], &rows))?;
    art.write(&out.join(INTERACTIONS_FILE), "interactions", &encode_interactions(&inter))?;
    Ok(())
}

pub fn index_train(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, cfg.indexer.seed);
    let x = load_embeddings(cfg.require(&cfg.paths.embeddings, "embeddings")?, &mut art)?;
    let split = split_811(x.rows(), cfg.split.items)?;
    let (model, log) = train_indexer(&cfg.indexer, &x.select_rows(&split.train), &x.select_rows(&split.val))?;
    ensure_dir(out)?;
    let mut json = serde_json::to_vec(&model).expect("model serializes");
    json.push(b'\n');
    art.write(&out.join(MODEL_FILE), "quantizer-model", &json)?;
    let rows: Vec<Vec<String>> = log
        .epochs
        .iter()
        .map(|e| {
            let util = e.utilization.iter().sum::<f64>() / e.utilization.len().max(1) as f64;
            vec![
                e.epoch.to_string(),
                float(e.train_recon),
                float(e.train_commit),
                float(e.val_recon),
                float(e.val_commit),
                float(util),
                e.restarted.to_string(),
                (log.best_epoch == Some(e.epoch)).to_string(),
            ]
        })
        .collect();
    let header = [
        "epoch",
        "train_recon",
        "train_commit",
        "val_recon",
        "val_commit",
        "mean_utilization",
        "restarted",
        "best",
    ];
    art.write(&out.join(TRAIN_LOG_FILE), "indexer-train-log", &csv_bytes(&header, &rows))?;
    Ok(())
}

pub fn encode(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, cfg.indexer.seed);
    let model = load_model(cfg.require(&cfg.paths.model, "model")?, &mut art)?;
    let x = load_embeddings(cfg.require(&cfg.paths.embeddings, "embeddings")?, &mut art)?;
    let table = export_semantic_ids(&model, &x)?;
    art.set_seed(table.seed);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    art.write(out, "semantic-ids", encode_sids(&table).as_bytes())?;
    Ok(())
}
