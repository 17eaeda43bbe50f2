use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::analyze::{NMI_FILE, SPECTRUM_SUMMARY_FILE};
use crate::config::RunConfig;
use crate::ctr::CTR_METRICS_FILE;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::output::{csv_bytes, float, io_error, read_bytes, Artifacts};

pub const REPORT_HEADER: [&str; 7] = [
    "method",
    "factor",
    "nmi",
    "nmi_source",
    "top10_mass",
    "spectrum_source",
    "val_auc",
];

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> CliResult<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| io_error(dir, err)))
        .collect::<CliResult<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| [NMI_FILE, SPECTRUM_SUMMARY_FILE, CTR_METRICS_FILE].contains(&n))
        {
            out.push(p);
        }
    }
    Ok(())
}

type Key = (String, usize);

#[derive(Default)]
struct Row {
    nmi: Option<(String, f64)>,
    spectrum: Option<(String, f64)>,
    val_auc: Option<f64>,
}

fn source_rank(source: &str) -> u8 {
    u8::from(source == "downstream")
}

/// Keeps the downstream measurement over the code-embedding one; among
/// equals the first file in path order wins.
fn offer(slot: &mut Option<(String, f64)>, source: &str, value: f64, path: &Path) {
    match slot {
        Some((s, _)) if source_rank(s) >= source_rank(source) => {
            log::warn!("ignoring {} for an already reported key", path.display());
        }
        _ => *slot = Some((source.to_string(), value)),
    }
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path, art: &mut Artifacts, root: &Path) -> CliResult<Self> {
        let bytes = read_bytes(path)?;
        let parse = |message: String| {
            CliError::new(ErrorKind::Parse, format!("parse error in {}: {message}", path.display()))
        };
        let mut reader = csv::Reader::from_reader(bytes.as_slice());
        let header = reader
            .headers()
            .map_err(|e| parse(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(|e| parse(e.to_string())))
            .collect::<CliResult<_>>()?;
        let role = path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned();
        art.input(&role, &bytes);
        Ok(Self {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn col(&self, name: &str) -> CliResult<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            CliError::new(
                ErrorKind::Parse,
                format!("{} lacks a `{name}` column", self.path.display()),
            )
        })
    }

    fn num<T: std::str::FromStr>(&self, row: &[String], col: usize) -> CliResult<T> {
        row[col].parse().map_err(|_| {
            CliError::new(
                ErrorKind::Parse,
                format!("{}: bad value {:?}", self.path.display(), row[col]),
            )
        })
    }

    fn key(&self, row: &[String]) -> CliResult<Key> {
        Ok((row[self.col("method")?].clone(), self.num(row, self.col("factor")?)?))
    }
}

pub fn report(cfg: &RunConfig) -> CliResult<()> {
    let root = cfg.require(&cfg.paths.run_dir, "run_dir")?;
    let out = cfg.require(&cfg.paths.out, "out")?;
    let mut files = Vec::new();
    collect(root, &mut files)?;
    let mut art = Artifacts::new(cfg, cfg.seed.unwrap_or(0));
    let mut table: BTreeMap<Key, Row> = BTreeMap::new();
    for path in &files {
        let t = Table::read(path, &mut art, root)?;
        match path.file_name().and_then(|n| n.to_str()) {
            Some(NMI_FILE) => {
                let mut groups: BTreeMap<(Key, String), Vec<f64>> = BTreeMap::new();
                for r in &t.rows {
                    let source = r[t.col("source")?].clone();
                    groups.entry((t.key(r)?, source)).or_default().push(t.num(r, t.col("nmi")?)?);
                }
                for ((key, source), v) in groups {
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    offer(&mut table.entry(key).or_default().nmi, &source, mean, path);
                }
            }
            Some(SPECTRUM_SUMMARY_FILE) => {
                for r in &t.rows {
                    if t.num::<usize>(r, t.col("top_k")?)? != 10 {
                        log::warn!("{}: top_k is not 10, skipped", path.display());
                        continue;
                    }
                    let mass = t.num(r, t.col("top_k_mass")?)?;
                    let source = r[t.col("source")?].clone();
                    offer(&mut table.entry(t.key(r)?).or_default().spectrum, &source, mass, path);
                }
            }
            _ => {
                for r in &t.rows {
                    if r[t.col("split")?] != "val" {
                        continue;
                    }
                    let auc = t.num(r, t.col("auc")?)?;
                    let row = table.entry(t.key(r)?).or_default();
                    if row.val_auc.is_none() {
                        row.val_auc = Some(auc);
                    } else {
                        log::warn!("ignoring {} for an already reported key", path.display());
                    }
                }
            }
        }
    }
    let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
    let rows: Vec<Vec<String>> = table
        .into_iter()
        .map(|((method, factor), r)| {
            vec![
                method,
                factor.to_string(),
                opt(r.nmi.as_ref().map(|x| x.1)),
                r.nmi.map(|x| x.0).unwrap_or_default(),
                opt(r.spectrum.as_ref().map(|x| x.1)),
                r.spectrum.map(|x| x.0).unwrap_or_default(),
                opt(r.val_auc),
            ]
        })
        .collect();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        crate::output::ensure_dir(parent)?;
    }
    art.write(out, "report", &csv_bytes(&REPORT_HEADER, &rows))
}
