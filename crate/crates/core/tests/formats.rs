use std::path::Path;

use semcode::dataio::{
    decode_embeddings, decode_interactions, decode_sids, encode_embeddings, encode_interactions, encode_sids,
    read_sidecar, write_embeddings, write_sidecar, ArtifactMeta,
};
use semcode::downstream::{FieldSpec, InteractionSet};
use semcode::indexer::SemanticIdTable;
use semcode::ndcore::Matrix;
use semcode::Error;

const SEMB: &[u8] = include_bytes!("golden/one_by_two.semb");
const SIDS: &str = include_str!("golden/two_items.sids.jsonl");
const INTERACTIONS: &[u8] = include_bytes!("golden/two_rows.interactions.csv");

fn here() -> &'static Path {
    Path::new("golden")
}

#[test]
fn semb_golden_bytes() {
    let m = Matrix::from_rows(&[vec![1.0, -2.5]]).unwrap();
    assert_eq!(encode_embeddings(&m).unwrap(), SEMB);
    assert_eq!(decode_embeddings(SEMB, here()).unwrap(), m);
}

#[test]
fn sids_golden_text() {
    let t = SemanticIdTable::new("moc", 256, 3, 7, "ab12", vec![5, 9, 200, 0, 255, 17]).unwrap();
    assert_eq!(encode_sids(&t), SIDS);
    assert_eq!(decode_sids(SIDS, here()).unwrap(), t);
}

#[test]
fn interactions_golden_text() {
    let set = InteractionSet::new(
        vec![FieldSpec::new("user", 50), FieldSpec::new("category", 5)],
        vec![3, 0],
        vec![17, 2, 49, 0],
        vec![1.0, 0.0],
    )
    .unwrap();
    assert_eq!(encode_interactions(&set), INTERACTIONS);
    let back = decode_interactions(INTERACTIONS, here()).unwrap();
    assert_eq!(back.items(), set.items());
    assert_eq!(back.labels(), set.labels());
    assert_eq!(back.raw_row(1), &[49, 0]);
}

#[test]
fn semb_corruptions_are_typed() {
    let mut magic = SEMB.to_vec();
    magic[1] = b'?';
    assert!(matches!(decode_embeddings(&magic, here()), Err(Error::BadMagic { .. })));
    let mut version = SEMB.to_vec();
    version[4] = 2;
    assert!(matches!(decode_embeddings(&version, here()), Err(Error::UnsupportedVersion { version: 2, .. })));
    assert!(matches!(decode_embeddings(&SEMB[..23], here()), Err(Error::LengthMismatch { .. })));
    assert!(matches!(decode_embeddings(&SEMB[..10], here()), Err(Error::LengthMismatch { .. })));
}

#[test]
fn sids_corruptions_report_line() {
    let short = SIDS.replace("[0,255,17]", "[0,255]");
    match decode_sids(&short, here()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let future = SIDS.replace("\"version\":1", "\"version\":4");
    assert!(matches!(decode_sids(&future, here()), Err(Error::UnsupportedVersion { version: 4, .. })));
    let missing = SIDS.lines().take(2).collect::<Vec<_>>().join("\n");
    assert!(matches!(decode_sids(&missing, here()), Err(Error::Parse { .. })));
}

#[test]
fn interaction_out_of_range_value_is_rejected() {
    let bad = String::from_utf8(INTERACTIONS.to_vec()).unwrap().replace("3,17,2,1", "3,50,2,1");
    assert!(decode_interactions(bad.as_bytes(), here()).is_err());
}

#[test]
fn sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.semb");
    write_embeddings(&path, &Matrix::from_rows(&[vec![1.0, -2.5]]).unwrap()).unwrap();
    let meta = ArtifactMeta::new("embeddings", 9, &serde_json::json!({"a": 1})).with_input("source", SEMB);
    write_sidecar(&path, &meta).unwrap();
    let back = read_sidecar(&path).unwrap();
    assert_eq!(back, meta);
    assert_eq!(back.config_hash.len(), 64);
}
