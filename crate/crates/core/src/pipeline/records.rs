//! Per-sample record CSV: `index,truth,s_nl,s_ta,s_sa,s_all,pseudo_label,cached,mr`.
//!
//! Missing optional values are written as empty fields. Floats use Rust's
//! shortest round-trip formatting, so metrics recomputed from a saved file
//! match the original run exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::detector::SampleRecord;
use crate::embeddings::GroundTruth;
use crate::error::{Error, Result};
use crate::memory::{CacheDecision, CacheKind};

pub const RECORD_COLUMNS: [&str; 9] = [
    "index",
    "truth",
    "s_nl",
    "s_ta",
    "s_sa",
    "s_all",
    "pseudo_label",
    "cached",
    "mr",
];

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    index: usize,
    truth: String,
    s_nl: f64,
    s_ta: Option<f64>,
    s_sa: Option<f64>,
    s_all: f64,
    pseudo_label: usize,
    cached: String,
    mr: Option<f64>,
}

pub fn write_records<W: Write>(writer: W, records: &[SampleRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(Row {
            index: r.index,
            truth: r.truth.as_ref().map(GroundTruth::to_tag).unwrap_or_default(),
            s_nl: r.s_nl,
            s_ta: r.s_ta,
            s_sa: r.s_sa,
            s_all: r.s_all,
            pseudo_label: r.pseudo_label,
            cached: r.cache.kind.as_str().to_string(),
            mr: r.mr,
        })?;
    }
    if records.is_empty() {
        w.write_record(RECORD_COLUMNS)?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<SampleRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(Error::Manifest(format!(
            "unexpected record columns {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    rdr.deserialize::<Row>()
        .enumerate()
        .map(|(line, row)| {
            let row = row?;
            let truth = match row.truth.as_str() {
                "" => None,
                tag => Some(GroundTruth::from_tag(tag).ok_or_else(|| {
                    Error::Manifest(format!("record {line}: bad truth tag {tag:?}"))
                })?),
            };
            let kind = CacheKind::parse(&row.cached).ok_or_else(|| {
                Error::Manifest(format!("record {line}: bad cached value {:?}", row.cached))
            })?;
            Ok(SampleRecord {
                index: row.index,
                truth,
                s_nl: row.s_nl,
                s_ta: row.s_ta,
                s_sa: row.s_sa,
                s_all: row.s_all,
                pseudo_label: row.pseudo_label,
                cache: CacheDecision {
                    kind,
                    target_class: (kind != CacheKind::Skip).then_some(row.pseudo_label),
                },
                mr: row.mr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<SampleRecord> {
        vec![
            SampleRecord {
                index: 3,
                truth: Some(GroundTruth::Id { class: 2 }),
                s_nl: 0.1 + 0.2,
                s_ta: None,
                s_sa: Some(1.0 / 3.0),
                s_all: 0.3 + 0.1 / 3.0,
                pseudo_label: 2,
                cache: CacheDecision {
                    kind: CacheKind::CachePositive,
                    target_class: Some(2),
                },
                mr: Some(0.25),
            },
            SampleRecord {
                index: 0,
                truth: None,
                s_nl: 1e-300,
                s_ta: Some(0.5),
                s_sa: None,
                s_all: 1e-300,
                pseudo_label: 7,
                cache: CacheDecision::SKIP,
                mr: None,
            },
        ]
    }

    #[test]
    fn csv_header_and_round_trip() {
        let mut buf = Vec::new();
        write_records(&mut buf, &sample()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,truth,s_nl,s_ta,s_sa,s_all,pseudo_label,cached,mr\n"));
        assert!(text.contains("3,id:2,0.30000000000000004,,"));
        assert_eq!(read_records(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn rejects_wrong_header() {
        let text = "idx,truth\n1,ood\n";
        assert!(read_records(text.as_bytes()).is_err());
    }
}
