//! Interaction logs as CSV. The header declares each raw field with its
//! cardinality: `item,user:50,category:5,label`.

use std::path::Path;

use crate::downstream::{FieldSpec, InteractionSet};
use crate::error::{Error, Result};

fn parse_header(record: &csv::StringRecord, path: &Path) -> Result<Vec<FieldSpec>> {
    let err = |message: String| Error::Parse {
        path: path.into(),
        line: 1,
        message,
    };
    let cols: Vec<&str> = record.iter().collect();
    if cols.len() < 2 || cols[0] != "item" || cols[cols.len() - 1] != "label" {
        return Err(err("header must be item,<field:cardinality>...,label".into()));
    }
    cols[1..cols.len() - 1]
        .iter()
        .map(|c| {
            let (name, card) = c
                .rsplit_once(':')
                .ok_or_else(|| err(format!("column {c:?} lacks a :cardinality suffix")))?;
            let card: usize = card.parse().map_err(|_| err(format!("bad cardinality in {c:?}")))?;
            if name.is_empty() || card == 0 {
                return Err(err(format!("invalid field declaration {c:?}")));
            }
            Ok(FieldSpec::new(name, card))
        })
        .collect()
}

pub fn decode_interactions(bytes: &[u8], path: &Path) -> Result<InteractionSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::Parse {
            path: path.into(),
            line: 1,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let fields = parse_header(&header, path)?;
    let width = fields.len() + 2;
    let (mut items, mut raw, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for rec in records {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.into(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let err = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        if rec.len() != width {
            return Err(err(format!("expected {width} columns, found {}", rec.len())));
        }
        let num = |i: usize| -> Result<usize> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| err(format!("column {} value {:?} is not a non-negative integer", i + 1, &rec[i])))
        };
        items.push(num(0)?);
        for (j, f) in fields.iter().enumerate() {
            let v = num(j + 1)?;
            if v >= f.cardinality {
                return Err(err(format!("{} value {v} outside 0..{}", f.name, f.cardinality)));
            }
            raw.push(v);
        }
        labels.push(match rec[width - 1].trim() {
            "0" => 0.0,
            "1" => 1.0,
            other => return Err(err(format!("label {other:?} is not 0 or 1"))),
        });
    }
    InteractionSet::new(fields, items, raw, labels)
}

pub fn encode_interactions(data: &InteractionSet) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["item".to_string()];
    header.extend(data.fields().iter().map(|f| format!("{}:{}", f.name, f.cardinality)));
    header.push("label".into());
    w.write_record(&header).expect("in-memory write");
    for r in 0..data.len() {
        let mut row = vec![data.item(r).to_string()];
        row.extend(data.raw_row(r).iter().map(usize::to_string));
        row.push(if data.labels()[r] == 1.0 { "1" } else { "0" }.into());
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_interactions(path: impl AsRef<Path>, data: &InteractionSet) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_interactions(data)).map_err(|e| Error::io(path, e))
}

pub fn read_interactions(path: impl AsRef<Path>) -> Result<InteractionSet> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_interactions(&bytes, path)
}
