//! Semantic-ID files: JSON lines, a header record followed by one
//! `{"item":i,"codes":[...]}` record per item in item order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indexer::SemanticIdTable;

pub const SID_FORMAT: &str = "semcode-sids";
pub const SID_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidHeader {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub codebook_size: usize,
    pub ids_per_item: usize,
    pub items: usize,
    pub seed: u64,
    pub model_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidRecord {
    item: usize,
    codes: Vec<usize>,
}

pub fn encode_sids(table: &SemanticIdTable) -> String {
    let header = SidHeader {
        format: SID_FORMAT.into(),
        version: SID_VERSION,
        kind: table.kind.clone(),
        codebook_size: table.codebook_size,
        ids_per_item: table.ids_per_item,
        items: table.item_count(),
        seed: table.seed,
        model_hash: table.model_hash.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for i in 0..table.item_count() {
        let rec = SidRecord {
            item: i,
            codes: table.codes(i).to_vec(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Parses a semantic-ID file; `path` is only used in error messages.
pub fn decode_sids(text: &str, path: &Path) -> Result<SemanticIdTable> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.into(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "missing header record".into()))?;
    let header: SidHeader = serde_json::from_str(first).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    if header.format != SID_FORMAT {
        return Err(parse_err(1, format!("format {:?} is not {SID_FORMAT:?}", header.format)));
    }
    if header.version != SID_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            version: header.version,
        });
    }
    if header.ids_per_item == 0 {
        return Err(parse_err(1, "ids_per_item must be >= 1".into()));
    }

    let m = header.ids_per_item;
    let mut codes = vec![0usize; header.items * m];
    let mut seen = vec![false; header.items];
    let mut count = 0;
    for (line, text) in lines {
        let rec: SidRecord = serde_json::from_str(text).map_err(|e| parse_err(line, format!("bad record: {e}")))?;
        if rec.codes.len() != m {
            return Err(parse_err(line, format!("expected {m} codes, found {}", rec.codes.len())));
        }
        if rec.item >= header.items {
            return Err(parse_err(line, format!("item {} outside 0..{}", rec.item, header.items)));
        }
        if seen[rec.item] {
            return Err(parse_err(line, format!("duplicate item {}", rec.item)));
        }
        if let Some(c) = rec.codes.iter().find(|&&c| c >= header.codebook_size) {
            return Err(parse_err(line, format!("code {c} outside 0..{}", header.codebook_size)));
        }
        seen[rec.item] = true;
        codes[rec.item * m..(rec.item + 1) * m].copy_from_slice(&rec.codes);
        count += 1;
    }
    if count != header.items {
        return Err(parse_err(
            text.lines().count() + 1,
            format!("header declares {} items, found {count}", header.items),
        ));
    }
    SemanticIdTable::new(header.kind, header.codebook_size, m, header.seed, header.model_hash, codes)
}

pub fn write_sids(path: impl AsRef<Path>, table: &SemanticIdTable) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_sids(table)).map_err(|e| Error::io(path, e))
}

pub fn read_sids(path: impl AsRef<Path>) -> Result<SemanticIdTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_sids(&text, path)
}
