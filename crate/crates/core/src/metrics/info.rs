//! Plug-in entropy, mutual information and NMI over discrete labelings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Joint counts of two labelings over the same items.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub n: usize,
    pub row_totals: Vec<usize>,
    pub col_totals: Vec<usize>,
    /// `row_totals.len() × col_totals.len()`, row-major.
    pub counts: Vec<usize>,
}

fn dense_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    for &l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    (labels.iter().map(|l| map[l]).collect(), map.len())
}

impl Contingency {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Empty("labelings must be non-empty"));
        }
        if a.len() != b.len() {
            return Err(Error::shape("contingency", a.len(), b.len()));
        }
        let (ra, ka) = dense_ids(a);
        let (rb, kb) = dense_ids(b);
        let mut counts = vec![0; ka * kb];
        let mut row_totals = vec![0; ka];
        let mut col_totals = vec![0; kb];
        for (&u, &v) in ra.iter().zip(&rb) {
            counts[u * kb + v] += 1;
            row_totals[u] += 1;
            col_totals[v] += 1;
        }
        Ok(Self {
            n: a.len(),
            row_totals,
            col_totals,
            counts,
        })
    }

    pub fn mutual_information(&self) -> f64 {
        let n = self.n as f64;
        let kb = self.col_totals.len();
        let mut mi = 0.0;
        for (u, &nu) in self.row_totals.iter().enumerate() {
            for (v, &nv) in self.col_totals.iter().enumerate() {
                let nuv = self.counts[u * kb + v];
                if nuv == 0 {
                    continue;
                }
                let nuv = nuv as f64;
                mi += nuv / n * (n * nuv / (nu as f64 * nv as f64)).ln();
            }
        }
        mi.max(0.0)
    }
}

fn entropy_of_counts(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Shannon entropy (nats) of a labeling.
pub fn entropy(labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Empty("labeling must be non-empty"));
    }
    let (ids, k) = dense_ids(labels);
    let mut counts = vec![0; k];
    for i in ids {
        counts[i] += 1;
    }
    Ok(entropy_of_counts(&counts, labels.len()).max(0.0))
}

/// Mutual information in nats.
pub fn mutual_information(a: &[usize], b: &[usize]) -> Result<f64> {
    Ok(Contingency::new(a, b)?.mutual_information())
}

/// Mutual information normalized by the arithmetic mean of the two entropies.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let table = Contingency::new(a, b)?;
    let ha = entropy_of_counts(&table.row_totals, table.n);
    let hb = entropy_of_counts(&table.col_totals, table.n);
    let denom = 0.5 * (ha + hb);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((table.mutual_information() / denom).clamp(0.0, 1.0))
}
