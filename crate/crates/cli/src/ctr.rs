use semcode::dataio::split_811;
use semcode::downstream::{
    assemble_dataset, eval_ctr, train_ctr, AssembledData, CtrMetrics, CtrModel, FeatureSchema, InteractionSet,
    SidRegime,
};
use semcode::indexer::SemanticIdTable;

use crate::analyze::load_ctr_model;
use crate::args::SplitArg;
use crate::commands::{load_interactions, load_sids};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_bytes, ensure_dir, float, Artifacts};

pub const CTR_MODEL_FILE: &str = "ctr_model.json";
pub const CTR_LOG_FILE: &str = "ctr_log.csv";
pub const CTR_METRICS_FILE: &str = "ctr_metrics.csv";

const METRICS_HEADER: [&str; 5] = ["method", "factor", "split", "auc", "logloss"];

fn load_table(cfg: &RunConfig, regime: SidRegime, art: &mut Artifacts) -> CliResult<Option<SemanticIdTable>> {
    if regime == SidRegime::None {
        return Ok(None);
    }
    let table = load_sids(cfg.require(&cfg.paths.sids, "sids")?, art)?;
    let expected = match regime {
        SidRegime::Rq { .. } => Some("rq"),
        SidRegime::Moc { .. } => Some("moc"),
        _ => None,
    };
    if let Some(kind) = expected.filter(|k| *k != table.kind) {
        return Err(CliError::config(format!(
            "regime {} needs a {kind} semantic-id table, got {}",
            regime.name(),
            table.kind
        )));
    }
    Ok(Some(table))
}

fn assemble(schema: &FeatureSchema, inter: &InteractionSet, table: Option<&SemanticIdTable>) -> CliResult<AssembledData> {
    Ok(assemble_dataset(schema, inter, table)?)
}

fn metrics_row(regime: SidRegime, split: &str, m: CtrMetrics) -> Vec<String> {
    vec![
        regime.name().to_string(),
        regime.fields().to_string(),
        split.to_string(),
        float(m.auc),
        float(m.logloss),
    ]
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, cfg.ctr.train.seed);
    let inter = load_interactions(cfg.require(&cfg.paths.interactions, "interactions")?, &mut art)?;
    let regime = cfg.ctr.regime;
    let table = load_table(cfg, regime, &mut art)?;
    let k = table.as_ref().map_or(cfg.indexer.codebook_size, |t| t.codebook_size);
    let schema = FeatureSchema::new(inter.fields().to_vec(), regime, k)?;
    let data = assemble(&schema, &inter, table.as_ref())?;
    let split = split_811(data.len(), cfg.split.interactions)?;
    let (train, val, test) = (data.select(&split.train), data.select(&split.val), data.select(&split.test));
    let model = CtrModel::new(schema, cfg.ctr.model.clone(), cfg.ctr.train.seed)?;
    let (model, log) = train_ctr(model, &train, &val, &cfg.ctr.train)?;

    ensure_dir(out)?;
    let mut json = serde_json::to_vec(&model).expect("model serializes");
    json.push(b'\n');
    art.write(&out.join(CTR_MODEL_FILE), "ctr-model", &json)?;
    let rows: Vec<Vec<String>> = log
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                float(e.train_loss),
                float(e.val_auc),
                float(e.val_logloss),
                (log.best_epoch == Some(e.epoch)).to_string(),
            ]
        })
        .collect();
    art.write(
        &out.join(CTR_LOG_FILE),
        "ctr-train-log",
        &csv_bytes(&["epoch", "train_loss", "val_auc", "val_logloss", "best"], &rows),
    )?;
    let rows = vec![
        metrics_row(regime, "val", eval_ctr(&model, &val)?),
        metrics_row(regime, "test", eval_ctr(&model, &test)?),
    ];
    art.write(&out.join(CTR_METRICS_FILE), "ctr-metrics", &csv_bytes(&METRICS_HEADER, &rows))
}

pub fn eval(cfg: &RunConfig, split: SplitArg) -> CliResult<()> {
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut art = Artifacts::new(cfg, cfg.ctr.train.seed);
    let model = load_ctr_model(cfg.require(&cfg.paths.ctr_model, "ctr_model")?, &mut art)?;
    let inter = load_interactions(cfg.require(&cfg.paths.interactions, "interactions")?, &mut art)?;
    let regime = model.schema.regime();
    let table = load_table(cfg, regime, &mut art)?;
    let data = assemble(&model.schema, &inter, table.as_ref())?;
    let data = match split {
        SplitArg::All => data,
        s => {
            let parts = split_811(data.len(), cfg.split.interactions)?;
            data.select(match s {
                SplitArg::Train => &parts.train,
                SplitArg::Val => &parts.val,
                _ => &parts.test,
            })
        }
    };
    let rows = vec![metrics_row(regime, split.name(), eval_ctr(&model, &data)?)];
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    art.write(out, "ctr-metrics", &csv_bytes(&METRICS_HEADER, &rows))
}
