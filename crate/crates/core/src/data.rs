//! Dataset ingestion, splitting and label-skew partitioning.
//!
//! Features are min-max scaled to `[0, 1]` per column at load time. Every row
//! remembers its position in the source file (`row_ids`), which is what the
//! partition manifests and the conservation checks are expressed in.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, tag};

/// Floor with a small guard so that `0.1 * 10` is 1 and not 0.
fn floor_count(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

/// Labeled samples stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<i64>,
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from explicit rows. Row ids are `0..rows.len()`.
    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>], labels: Vec<i64>) -> Result<Self> {
        let name = name.into();
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let n_features = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for row in rows {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    actual: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        let row_ids = (0..labels.len()).collect();
        Self::from_parts(name, features, n_features, labels, row_ids)
    }

    /// Builds a dataset from a flat row-major buffer.
    pub fn from_parts(
        name: impl Into<String>,
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<i64>,
        row_ids: Vec<usize>,
    ) -> Result<Self> {
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                actual: features.len(),
            });
        }
        if row_ids.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                actual: row_ids.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / n_features.max(1),
                column: (pos % n_features.max(1)).to_string(),
                value: features[pos].to_string(),
                expected: "finite real",
            });
        }
        Ok(Self {
            name: name.into(),
            features,
            n_features,
            labels,
            row_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> i64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Source-file positions of the rows, in storage order.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Count of samples per label, ordered by label.
    pub fn label_histogram(&self) -> BTreeMap<i64, usize> {
        let mut hist = BTreeMap::new();
        for &l in &self.labels {
            *hist.entry(l).or_insert(0) += 1;
        }
        hist
    }

    /// The rows at `indices` (positions in this dataset), in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        let mut row_ids = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
            row_ids.push(self.row_ids[i]);
        }
        Dataset {
            name: name.into(),
            features,
            n_features: self.n_features,
            labels,
            row_ids,
        }
    }

    /// Concatenates datasets with equal feature dimension.
    pub fn concat(name: impl Into<String>, parts: &[&Dataset]) -> Result<Dataset> {
        let n_features = parts.first().map_or(0, |d| d.n_features);
        let mut out = Dataset {
            name: name.into(),
            features: Vec::new(),
            n_features,
            labels: Vec::new(),
            row_ids: Vec::new(),
        };
        for d in parts {
            if d.n_features != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    actual: d.n_features,
                });
            }
            out.features.extend_from_slice(&d.features);
            out.labels.extend_from_slice(&d.labels);
            out.row_ids.extend_from_slice(&d.row_ids);
        }
        Ok(out)
    }

    /// Rescales every column to `[0, 1]`; constant columns become 0.
    pub fn minmax_normalize(&mut self) {
        let d = self.n_features;
        for c in 0..d {
            let (lo, hi) = self
                .features
                .iter()
                .skip(c)
                .step_by(d)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let span = hi - lo;
            for v in self.features.iter_mut().skip(c).step_by(d) {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
    }
}

/// Which CSV column holds the integer label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Reads a headed, comma-separated file and min-max normalizes its features.
pub fn load_csv_dataset(path: impl AsRef<Path>, label: &LabelColumn) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = match label {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Csv(format!(
                "label column index {i} out of range ({} columns)",
                headers.len()
            )))
        }
        LabelColumn::Name(n) => headers
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| Error::Csv(format!("no column named `{n}`")))?,
    };

    let n_features = headers.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {} has {} fields, header has {}",
                row + 1,
                record.len(),
                headers.len()
            )));
        }
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if col == label_idx {
                let l = cell.parse::<i64>().map_err(|_| Error::Parse {
                    row: row + 1,
                    column: headers[col].clone(),
                    value: cell.to_string(),
                    expected: "integer label",
                })?;
                labels.push(l);
            } else {
                let v = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row: row + 1,
                        column: headers[col].clone(),
                        value: cell.to_string(),
                        expected: "finite real",
                    })?;
                features.push(v);
            }
        }
    }
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    if labels.is_empty() {
        return Err(Error::EmptyDataset(name));
    }
    let row_ids = (0..labels.len()).collect();
    let mut ds = Dataset::from_parts(name, features, n_features, labels, row_ids)?;
    ds.minmax_normalize();
    Ok(ds)
}

/// Shuffles with `seed` and cuts into train/validation/test.
///
/// Validation and test sizes are floored; the remainder goes to train.
pub fn split_dataset(d: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fs) = fractions;
    if ft < 0.0 || fv < 0.0 || fs < 0.0 || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::FractionSum(ft, fv, fs));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset(d.name.clone()));
    }
    let n = d.len();
    let n_val = floor_count(n as f64 * fv);
    let n_test = floor_count(n as f64 * fs);
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(derive_seed(seed, &[tag::SPLIT])));
    let take = |range: std::ops::Range<usize>, suffix: &str| {
        let mut idx = order[range].to_vec();
        idx.sort_unstable();
        d.subset(format!("{}-{suffix}", d.name), &idx)
    };
    let train = take(0..n_train, "train");
    let val = take(n_train..n_train + n_val, "val");
    let test = take(n_train + n_val..n, "test");
    Ok((train, val, test))
}

/// How per-client label quotas are drawn from the source pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// Every client draws its quota from the complete pool. Samples may be
    /// shared between clients but never repeat within one client.
    #[default]
    Independent,
    /// Quotas are carved sequentially out of one pool; no sample is given
    /// to two clients and over-subscription is an error.
    Disjoint,
}

/// Per-client label proportions.
///
/// `positive_fractions[k]` is the share of all positive samples that client
/// `k` receives; its negative share is `1 - positive_fractions[k]` unless
/// `per_label_fractions` (clients × labels, labels in ascending order) is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewSpec {
    pub level_name: String,
    pub positive_fractions: Vec<f64>,
    #[serde(default)]
    pub per_label_fractions: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub allocation: Allocation,
}

/// Positive-label proportions of the three named non-IID levels (5 clients).
pub const LEVEL1: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];
pub const LEVEL2: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const LEVEL3: [f64; 5] = [1.0, 0.0, 0.7, 1.0, 0.0];

impl SkewSpec {
    /// Binary skew where each client's negative share is `1 - positive share`.
    pub fn binary(level_name: impl Into<String>, positive_fractions: Vec<f64>) -> Self {
        Self {
            level_name: level_name.into(),
            positive_fractions,
            per_label_fractions: None,
            allocation: Allocation::Independent,
        }
    }

    /// Every client holds the complete dataset.
    pub fn iid(n_clients: usize) -> Self {
        Self {
            level_name: "iid".into(),
            positive_fractions: vec![1.0; n_clients],
            per_label_fractions: Some(vec![vec![1.0, 1.0]; n_clients]),
            allocation: Allocation::Independent,
        }
    }

    /// `iid`, `level1`, `level2` or `level3`. The numbered levels are defined
    /// for five clients.
    pub fn named(name: &str, n_clients: usize) -> Result<Self> {
        let level = match name {
            "iid" => return Ok(Self::iid(n_clients)),
            "level1" => LEVEL1,
            "level2" => LEVEL2,
            "level3" => LEVEL3,
            other => return Err(Error::InvalidSkew(format!("unknown level `{other}`"))),
        };
        if n_clients != level.len() {
            return Err(Error::InvalidSkew(format!(
                "level `{name}` is defined for {} clients, not {n_clients}",
                level.len()
            )));
        }
        Ok(Self::binary(name, level.to_vec()))
    }

    pub fn with_allocation(mut self, allocation: Allocation) -> Self {
        self.allocation = allocation;
        self
    }

    pub fn n_clients(&self) -> usize {
        self.positive_fractions.len()
    }

    pub fn validate(&self, n_clients: usize) -> Result<()> {
        if self.positive_fractions.len() != n_clients {
            return Err(Error::InvalidSkew(format!(
                "{} fractions for {n_clients} clients",
                self.positive_fractions.len()
            )));
        }
        let in_unit = |f: &f64| (0.0..=1.0).contains(f);
        if !self.positive_fractions.iter().all(in_unit) {
            return Err(Error::InvalidSkew("fractions must lie in [0, 1]".into()));
        }
        if let Some(m) = &self.per_label_fractions {
            if m.len() != n_clients {
                return Err(Error::InvalidSkew(format!(
                    "{} per-label rows for {n_clients} clients",
                    m.len()
                )));
            }
            if !m.iter().flatten().all(in_unit) {
                return Err(Error::InvalidSkew("fractions must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Share of label `rank` (0-based, ascending label order) for `client`.
    fn fraction(&self, client: usize, rank: usize, n_labels: usize) -> Result<f64> {
        match &self.per_label_fractions {
            Some(m) => m[client].get(rank).copied().ok_or_else(|| {
                Error::InvalidSkew(format!("per-label row {client} has no entry for label rank {rank}"))
            }),
            None if n_labels == 2 => {
                let p = self.positive_fractions[client];
                Ok(if rank == 1 { p } else { 1.0 - p })
            }
            None => Err(Error::InvalidSkew(format!(
                "binary spec applied to {n_labels} labels; supply per_label_fractions"
            ))),
        }
    }
}

/// One device's local data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub train: Dataset,
    pub validation: Dataset,
    /// `n_k`: number of training rows.
    pub sample_count: usize,
}

impl ClientDataset {
    pub fn new(client_id: usize, train: Dataset, validation: Dataset) -> Self {
        let sample_count = train.len();
        Self {
            client_id,
            train,
            validation,
            sample_count,
        }
    }
}

/// Distributes `d` across clients according to `spec`.
///
/// Client `k` receives `⌊fraction(k, label) · count(label)⌋` rows of every
/// label. Every client shares `validation` as its validation set.
pub fn partition_label_skew(
    d: &Dataset,
    validation: &Dataset,
    spec: &SkewSpec,
    n_clients: usize,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    spec.validate(n_clients)?;
    if d.is_empty() {
        return Err(Error::EmptyDataset(d.name.clone()));
    }
    let mut pools: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &l) in d.labels().iter().enumerate() {
        pools.entry(l).or_default().push(i);
    }
    let n_labels = pools.len();
    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); n_clients];

    for (rank, (&label, pool)) in pools.iter().enumerate() {
        let count = pool.len();
        let label_key = label as u64;
        match spec.allocation {
            Allocation::Disjoint => {
                let mut shuffled = pool.clone();
                shuffled.shuffle(&mut rng::stream(derive_seed(seed, &[tag::PARTITION, label_key])));
                let mut cursor = 0;
                for (k, rows) in assigned.iter_mut().enumerate() {
                    let want = floor_count(spec.fraction(k, rank, n_labels)? * count as f64);
                    if cursor + want > count {
                        return Err(Error::DemandExceedsSupply {
                            label,
                            demanded: cursor + want,
                            available: count,
                        });
                    }
                    rows.extend_from_slice(&shuffled[cursor..cursor + want]);
                    cursor += want;
                }
            }
            Allocation::Independent => {
                for (k, rows) in assigned.iter_mut().enumerate() {
                    let want = floor_count(spec.fraction(k, rank, n_labels)? * count as f64);
                    let mut shuffled = pool.clone();
                    shuffled.shuffle(&mut rng::stream(derive_seed(
                        seed,
                        &[tag::PARTITION, label_key, k as u64],
                    )));
                    rows.extend_from_slice(&shuffled[..want]);
                }
            }
        }
    }

    assigned
        .into_iter()
        .enumerate()
        .map(|(k, mut rows)| {
            if rows.is_empty() {
                return Err(Error::EmptyClient(k));
            }
            rows.sort_unstable();
            let train = d.subset(format!("{}-client{k}", d.name), &rows);
            Ok(ClientDataset::new(k, train, validation.clone()))
        })
        .collect()
}

/// Rescales a nonnegative vector to sum to one.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidDistribution(
            "entries must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidDistribution("vector sums to zero".into()));
    }
    Ok(v.iter().map(|x| x / total).collect())
}

/// `Σ p_i ln(p_i / q_i)` with `0 · ln(0/q) = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            actual: q.len(),
        });
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "{name} has a negative or non-finite entry"
            )));
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("{name} sums to {s}")));
        }
    }
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::SupportViolation(i));
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl.max(0.0))
}

/// KL divergence of a normalized per-client profile from the uniform profile.
pub fn profile_divergence(profile: &[f64]) -> Result<f64> {
    let p = normalize(profile)?;
    let q = vec![1.0 / p.len() as f64; p.len()];
    kl_divergence(&p, &q)
}

/// Degree of label skew of a partition.
///
/// Each client's share of the reference positives forms a profile; the
/// result is its KL divergence from the uniform profile (0 for IID).
pub fn niid_level(partition: &[ClientDataset], reference: &Dataset) -> Result<f64> {
    if partition.is_empty() {
        return Err(Error::InvalidSkew("empty partition".into()));
    }
    let ref_hist = reference.label_histogram();
    let (&positive, &ref_positives) = ref_hist
        .iter()
        .next_back()
        .ok_or_else(|| Error::EmptyDataset(reference.name.clone()))?;
    if ref_hist.len() < 2 {
        return Err(Error::InvalidSkew("reference holds a single label".into()));
    }
    let mut profile = Vec::with_capacity(partition.len());
    for c in partition {
        if c.train.is_empty() {
            return Err(Error::EmptyClient(c.client_id));
        }
        let hist = c.train.label_histogram();
        if let Some(l) = hist.keys().find(|l| !ref_hist.contains_key(l)) {
            return Err(Error::InvalidSkew(format!("label {l} absent from reference")));
        }
        let pos = hist.get(&positive).copied().unwrap_or(0);
        profile.push(pos as f64 / ref_positives as f64);
    }
    profile_divergence(&profile)
}

/// One entry of an exported partition manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionManifestEntry {
    pub client_id: usize,
    pub row_ids: Vec<usize>,
    pub label_histogram: BTreeMap<i64, usize>,
}

pub fn partition_manifest(partition: &[ClientDataset]) -> Vec<PartitionManifestEntry> {
    partition
        .iter()
        .map(|c| PartitionManifestEntry {
            client_id: c.client_id,
            row_ids: c.train.row_ids().to_vec(),
            label_histogram: c.train.label_histogram(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn labeled(pos: usize, neg: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..pos + neg).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let labels = (0..pos + neg).map(|i| i64::from(i < pos)).collect();
        Dataset::from_rows("synthetic", &rows, labels).unwrap()
    }

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_small_csv() {
        let f = write_csv("a,b,label\n1,10,0\n2,20,1\n3,30,0\n5,40,1\n");
        let d = load_csv_dataset(f.path(), &LabelColumn::Name("label".into())).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.labels(), &[0, 1, 0, 1]);
        assert_eq!(d.row(0), &[0.0, 0.0]);
        assert_eq!(d.row(3), &[1.0, 1.0]);
        assert_eq!(d.row(1), &[0.25, 1.0 / 3.0]);
    }

    #[test]
    fn label_column_by_index() {
        let f = write_csv("label,a\n1,3\n0,4\n");
        let d = load_csv_dataset(f.path(), &LabelColumn::Index(0)).unwrap();
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.n_features(), 1);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let f = write_csv("a,b,label\n1,2,0\n3,abc,1\n");
        let err = load_csv_dataset(f.path(), &LabelColumn::Name("label".into())).unwrap_err();
        match err {
            Error::Parse { row, column, value, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "b");
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_and_empty_file() {
        let err = load_csv_dataset("/nonexistent/x.csv", &LabelColumn::Index(0)).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        let f = write_csv("a,label\n");
        let err = load_csv_dataset(f.path(), &LabelColumn::Name("label".into())).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn split_sizes_floor_with_remainder_to_train() {
        let d = labeled(5, 5);
        let (tr, va, te) = split_dataset(&d, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));

        let d = labeled(212, 357);
        let (tr, va, te) = split_dataset(&d, (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (457, 56, 56));
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let d = labeled(30, 30);
        let a = split_dataset(&d, (0.6, 0.2, 0.2), 11).unwrap();
        let b = split_dataset(&d, (0.6, 0.2, 0.2), 11).unwrap();
        assert_eq!(a, b);
        let mut ids: Vec<usize> = [&a.0, &a.1, &a.2].iter().flat_map(|s| s.row_ids().to_vec()).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let d = labeled(5, 5);
        assert!(matches!(
            split_dataset(&d, (0.8, 0.1, 0.2), 0),
            Err(Error::FractionSum(..))
        ));
        assert!(split_dataset(&d, (1.1, -0.1, 0.0), 0).is_err());
    }

    #[test]
    fn uniform_disjoint_partition() {
        let d = labeled(100, 100);
        let spec = SkewSpec {
            level_name: "even".into(),
            positive_fractions: vec![0.2; 5],
            per_label_fractions: Some(vec![vec![0.2, 0.2]; 5]),
            allocation: Allocation::Disjoint,
        };
        let parts = partition_label_skew(&d, &d, &spec, 5, 3).unwrap();
        for c in &parts {
            let h = c.train.label_histogram();
            assert_eq!(h[&0], 20);
            assert_eq!(h[&1], 20);
            assert_eq!(c.sample_count, 40);
        }
        let mut all: Vec<usize> = parts.iter().flat_map(|c| c.train.row_ids().to_vec()).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 200);
    }

    #[test]
    fn boundary_fractions() {
        let d = labeled(10, 10);
        let spec = SkewSpec {
            level_name: "edge".into(),
            positive_fractions: vec![1.0, 0.0],
            per_label_fractions: Some(vec![vec![0.5, 1.0], vec![0.5, 0.0]]),
            allocation: Allocation::Disjoint,
        };
        let parts = partition_label_skew(&d, &d, &spec, 2, 0).unwrap();
        assert_eq!(parts[0].train.label_histogram().get(&1), Some(&10));
        assert_eq!(parts[1].train.label_histogram().get(&1), None);
    }

    #[test]
    fn oversubscribed_disjoint_spec_is_rejected() {
        let d = labeled(50, 50);
        let spec = SkewSpec::binary("level2", LEVEL2.to_vec()).with_allocation(Allocation::Disjoint);
        let err = partition_label_skew(&d, &d, &spec, 5, 0).unwrap_err();
        assert!(matches!(err, Error::DemandExceedsSupply { .. }));
    }

    #[test]
    fn level2_on_wdbc_histogram_follows_floor_rule() {
        // 212 malignant (positive), 357 benign.
        let d = labeled(212, 357);
        let spec = SkewSpec::named("level2", 5).unwrap();
        let parts = partition_label_skew(&d, &d, &spec, 5, 42).unwrap();
        let expected_pos = [21, 63, 106, 148, 190];
        let expected_neg = [321, 249, 178, 107, 35];
        for (k, c) in parts.iter().enumerate() {
            let h = c.train.label_histogram();
            assert_eq!(h[&1], expected_pos[k], "client {k} positives");
            assert_eq!(h[&0], expected_neg[k], "client {k} negatives");
        }
    }

    #[test]
    fn wrong_length_spec() {
        let d = labeled(5, 5);
        let spec = SkewSpec::binary("x", vec![0.5; 3]);
        assert!(matches!(
            partition_label_skew(&d, &d, &spec, 4, 0),
            Err(Error::InvalidSkew(_))
        ));
        assert!(SkewSpec::named("level2", 4).is_err());
        assert!(SkewSpec::named("bogus", 5).is_err());
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        let got = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.143_841).abs() < 1e-6);
    }

    #[test]
    fn kl_errors() {
        assert!(matches!(
            kl_divergence(&[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::SupportViolation(1))
        ));
        assert!(kl_divergence(&[0.7, 0.7], &[0.5, 0.5]).is_err());
        // q_i = 0 with p_i = 0 is allowed
        assert_eq!(kl_divergence(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn named_level_divergences() {
        // Natural log, each profile normalized to sum 1, against uniform.
        let got: Vec<f64> = [LEVEL1, LEVEL2, LEVEL3]
            .iter()
            .map(|l| profile_divergence(l).unwrap())
            .collect();
        assert!((got[0] - 0.0206).abs() < 1e-3);
        assert!((got[1] - 0.18013).abs() < 1e-5);
        assert!((got[2] - 0.52371).abs() < 1e-5);
    }

    #[test]
    fn niid_level_orders_named_levels() {
        let d = labeled(212, 357);
        let iid = partition_label_skew(&d, &d, &SkewSpec::iid(5), 5, 1).unwrap();
        assert_eq!(niid_level(&iid, &d).unwrap(), 0.0);
        let levels: Vec<f64> = ["level1", "level2", "level3"]
            .iter()
            .map(|n| {
                let p = partition_label_skew(&d, &d, &SkewSpec::named(n, 5).unwrap(), 5, 1).unwrap();
                niid_level(&p, &d).unwrap()
            })
            .collect();
        assert!(levels[0] > 0.0);
        assert!(levels[0] < levels[1] && levels[1] < levels[2], "{levels:?}");
    }

    #[test]
    fn niid_level_rejects_empty_client() {
        let d = labeled(4, 4);
        let empty = d.subset("none", &[]);
        let parts = vec![
            ClientDataset::new(0, d.clone(), d.clone()),
            ClientDataset::new(1, empty, d.clone()),
        ];
        assert!(matches!(niid_level(&parts, &d), Err(Error::EmptyClient(1))));
    }

    #[test]
    fn manifest_lists_rows_and_histogram() {
        let d = labeled(6, 6);
        let parts = partition_label_skew(&d, &d, &SkewSpec::iid(2), 2, 0).unwrap();
        let m = partition_manifest(&parts);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].row_ids, (0..12).collect::<Vec<_>>());
        let json = serde_json::to_string(&m[0]).unwrap();
        assert!(json.contains("\"label_histogram\":{\"0\":6,\"1\":6}"));
    }
}
