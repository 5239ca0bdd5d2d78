//! Dataset ingestion: tabular CSV, long-format grouped samples, one-hot
//! encoding, stratified splits and data fingerprints.

use std::collections::HashMap;
use std::path::Path;

use prototypal::gram::{gram_matrix, EmpiricalDistribution, GramItem, GramMatrix};
use prototypal::rng::SplitMix64;
use prototypal::KernelSpec;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::schema::{BlockSource, BlockSpec};

/// The payload of one feature block.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockData {
    /// `n x dim` numeric matrix, row per observation.
    Vector {
        dim: usize,
        values: Vec<f64>,
        columns: Vec<String>,
    },
    /// One-hot indicator matrix with the category order of first appearance.
    OneHot {
        column: String,
        categories: Vec<String>,
        values: Vec<f64>,
    },
    /// One empirical distribution per observation.
    Distribution {
        dim: usize,
        group_ids: Vec<String>,
        dists: Vec<EmpiricalDistribution>,
    },
}

/// One predictor or response: a named homogeneous feature block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub name: String,
    pub data: BlockData,
}

impl FeatureBlock {
    pub fn len(&self) -> usize {
        match &self.data {
            BlockData::Vector { values, dim, .. } => values.len() / dim,
            BlockData::OneHot {
                values, categories, ..
            } => values.len() / categories.len().max(1),
            BlockData::Distribution { dists, .. } => dists.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind_str(&self) -> &'static str {
        match &self.data {
            BlockData::Vector { .. } => "vector",
            BlockData::OneHot { .. } => "onehot",
            BlockData::Distribution { .. } => "distribution",
        }
    }

    /// Width of one observation: vector dimension, category count, or sample
    /// dimension for distributions.
    pub fn dim(&self) -> usize {
        match &self.data {
            BlockData::Vector { dim, .. } => *dim,
            BlockData::OneHot { categories, .. } => categories.len(),
            BlockData::Distribution { dim, .. } => *dim,
        }
    }

    /// Row `i` of a vector or one-hot block.
    pub fn row(&self, i: usize) -> Option<&[f64]> {
        match &self.data {
            BlockData::Vector { values, dim, .. } => Some(&values[i * dim..(i + 1) * dim]),
            BlockData::OneHot {
                values, categories, ..
            } => {
                let c = categories.len();
                Some(&values[i * c..(i + 1) * c])
            }
            BlockData::Distribution { .. } => None,
        }
    }

    /// Gram matrix of this block under the given kernel.
    pub fn gram(&self, spec: &KernelSpec) -> Result<GramMatrix> {
        let items = self.gram_items();
        Ok(gram_matrix(&items, spec)?)
    }

    pub fn gram_items(&self) -> Vec<GramItem<'_>> {
        match &self.data {
            BlockData::Vector { .. } | BlockData::OneHot { .. } => (0..self.len())
                .map(|i| GramItem::Vector(self.row(i).expect("vector-like block")))
                .collect(),
            BlockData::Distribution { dists, .. } => {
                dists.iter().map(GramItem::Distribution).collect()
            }
        }
    }

    /// New block containing only the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureBlock {
        let data = match &self.data {
            BlockData::Vector {
                dim,
                values,
                columns,
            } => {
                let mut out = Vec::with_capacity(rows.len() * dim);
                for &r in rows {
                    out.extend_from_slice(&values[r * dim..(r + 1) * dim]);
                }
                BlockData::Vector {
                    dim: *dim,
                    values: out,
                    columns: columns.clone(),
                }
            }
            BlockData::OneHot {
                column,
                categories,
                values,
            } => {
                let c = categories.len();
                let mut out = Vec::with_capacity(rows.len() * c);
                for &r in rows {
                    out.extend_from_slice(&values[r * c..(r + 1) * c]);
                }
                BlockData::OneHot {
                    column: column.clone(),
                    categories: categories.clone(),
                    values: out,
                }
            }
            BlockData::Distribution {
                dim,
                group_ids,
                dists,
            } => BlockData::Distribution {
                dim: *dim,
                group_ids: rows.iter().map(|&r| group_ids[r].clone()).collect(),
                dists: rows.iter().map(|&r| dists[r].clone()).collect(),
            },
        };
        FeatureBlock {
            name: self.name.clone(),
            data,
        }
    }

    /// Class index per row of a one-hot block.
    pub fn labels(&self) -> Option<Vec<usize>> {
        match &self.data {
            BlockData::OneHot {
                categories, values, ..
            } => {
                let c = categories.len();
                Some(
                    (0..values.len() / c)
                        .map(|i| {
                            let row = &values[i * c..(i + 1) * c];
                            row.iter()
                                .position(|&v| v == 1.0)
                                .expect("one-hot rows have exactly one 1")
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

/// Predictors plus an optional response, all sharing the row count.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub predictors: Vec<FeatureBlock>,
    pub response: Option<FeatureBlock>,
    pub n: usize,
}

impl Dataset {
    pub fn new(predictors: Vec<FeatureBlock>, response: Option<FeatureBlock>) -> Result<Self> {
        let mut names: Vec<&str> = predictors.iter().map(|b| b.name.as_str()).collect();
        if let Some(r) = &response {
            names.push(r.name.as_str());
        }
        let mut seen = names.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != names.len() {
            return Err(CliError::data(
                "block names must be unique within a dataset",
            ));
        }
        let n = predictors
            .first()
            .map(FeatureBlock::len)
            .or_else(|| response.as_ref().map(FeatureBlock::len))
            .ok_or_else(|| CliError::config("a dataset needs at least one block"))?;
        for b in predictors.iter().chain(response.iter()) {
            if b.len() != n {
                return Err(CliError::data(format!(
                    "block '{}' has {} rows, expected {n}",
                    b.name,
                    b.len()
                )));
            }
        }
        Ok(Dataset {
            predictors,
            response,
            n,
        })
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            predictors: self.predictors.iter().map(|b| b.select(rows)).collect(),
            response: self.response.as_ref().map(|b| b.select(rows)),
            n: rows.len(),
        }
    }
}

/// A parsed CSV table: header names plus string cells.
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    path: String,
}

impl Table {
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(CliError::data(format!("{}: empty file", path.display())));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(CliError::data(format!(
                "{}: no data rows after the header",
                path.display()
            )));
        }
        Ok(Table {
            headers,
            rows,
            path: path.display().to_string(),
        })
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::data(format!("{}: missing column '{name}'", self.path)))
    }

    fn numeric_cell(&self, row: usize, col: usize) -> Result<f64> {
        let cell = self.rows[row].get(col).ok_or_else(|| {
            CliError::data(format!(
                "{}: row {}, column '{}': missing value",
                self.path,
                row + 2,
                self.headers[col]
            ))
        })?;
        let v: f64 = cell.parse().map_err(|_| {
            CliError::data(format!(
                "{}: row {}, column '{}': non-numeric value '{cell}'",
                self.path,
                row + 2,
                self.headers[col]
            ))
        })?;
        if !v.is_finite() {
            return Err(CliError::data(format!(
                "{}: row {}, column '{}': non-finite value",
                self.path,
                row + 2,
                self.headers[col]
            )));
        }
        Ok(v)
    }

    fn string_cell(&self, row: usize, col: usize) -> Result<&str> {
        self.rows[row].get(col).map(String::as_str).ok_or_else(|| {
            CliError::data(format!(
                "{}: row {}, column '{}': missing value",
                self.path,
                row + 2,
                self.headers[col]
            ))
        })
    }
}

/// Builds feature blocks from a tabular file and/or grouped-sample files
/// according to the block specs. `dist_overrides` maps block names to
/// grouped-sample paths, taking precedence over paths embedded in the block spec
/// (used at prediction time to point at new data).
pub fn load_blocks(
    table: Option<&Table>,
    specs: &[BlockSpec],
    dist_overrides: &HashMap<String, std::path::PathBuf>,
) -> Result<Vec<FeatureBlock>> {
    let mut blocks = Vec::with_capacity(specs.len());
    for spec in specs {
        let block = match &spec.source {
            BlockSource::Columns(cols) => {
                let table = table.ok_or_else(|| {
                    CliError::config(format!("block '{}' needs a tabular --data file", spec.name))
                })?;
                vector_block_from_table(table, &spec.name, cols)?
            }
            BlockSource::Categorical(col) => {
                let table = table.ok_or_else(|| {
                    CliError::config(format!("block '{}' needs a tabular --data file", spec.name))
                })?;
                load_onehot_block(table, &spec.name, col)?
            }
            BlockSource::Grouped(path) => {
                let path = dist_overrides.get(&spec.name).unwrap_or(path);
                load_grouped_samples(path, &spec.name)?
            }
        };
        blocks.push(block);
    }
    Ok(blocks)
}

pub fn vector_block_from_table(table: &Table, name: &str, cols: &[String]) -> Result<FeatureBlock> {
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(table.rows.len() * idx.len());
    for r in 0..table.rows.len() {
        for &c in &idx {
            values.push(table.numeric_cell(r, c)?);
        }
    }
    Ok(FeatureBlock {
        name: name.to_string(),
        data: BlockData::Vector {
            dim: idx.len(),
            values,
            columns: cols.to_vec(),
        },
    })
}

fn load_onehot_block(table: &Table, name: &str, col: &str) -> Result<FeatureBlock> {
    let c = table.column_index(col)?;
    let mut categories: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(table.rows.len());
    for r in 0..table.rows.len() {
        let cell = table.string_cell(r, c)?;
        let idx = match categories.iter().position(|k| k == cell) {
            Some(i) => i,
            None => {
                categories.push(cell.to_string());
                categories.len() - 1
            }
        };
        labels.push(idx);
    }
    let k = categories.len();
    let mut values = vec![0.0; labels.len() * k];
    for (r, &l) in labels.iter().enumerate() {
        values[r * k + l] = 1.0;
    }
    Ok(FeatureBlock {
        name: name.to_string(),
        data: BlockData::OneHot {
            column: col.to_string(),
            categories,
            values,
        },
    })
}

/// One-hot encodes a categorical column against a fixed category list; an
/// unseen category is a data error (reported with its location).
pub fn onehot_with_categories(
    table: &Table,
    name: &str,
    col: &str,
    categories: &[String],
) -> Result<FeatureBlock> {
    let c = table.column_index(col)?;
    let k = categories.len();
    let mut values = vec![0.0; table.rows.len() * k];
    for r in 0..table.rows.len() {
        let cell = table.string_cell(r, c)?;
        let idx = categories.iter().position(|k| k == cell).ok_or_else(|| {
            CliError::data(format!(
                "row {}, column '{col}': unknown category '{cell}'",
                r + 2
            ))
        })?;
        values[r * k + idx] = 1.0;
    }
    Ok(FeatureBlock {
        name: name.to_string(),
        data: BlockData::OneHot {
            column: col.to_string(),
            categories: categories.to_vec(),
            values,
        },
    })
}

/// Loads a long-format grouped-samples file: header `group_id,v1[,v2,...]`,
/// one empirical distribution per distinct `group_id` in order of first
/// appearance. One-dimensional distributions come back sorted and flagged
/// for the fast energy path.
pub fn load_grouped_samples(path: &Path, name: &str) -> Result<FeatureBlock> {
    let table = Table::load(path)?;
    if table.headers.len() < 2 {
        return Err(CliError::data(format!(
            "{}: need a group_id column plus at least one value column",
            path.display()
        )));
    }
    let dim = table.headers.len() - 1;
    let mut group_ids: Vec<String> = Vec::new();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for r in 0..table.rows.len() {
        if table.rows[r].len() != dim + 1 {
            return Err(CliError::data(format!(
                "{}: row {}: expected {} fields, found {}",
                path.display(),
                r + 2,
                dim + 1,
                table.rows[r].len()
            )));
        }
        let gid = table.string_cell(r, 0)?;
        let gi = match group_ids.iter().position(|g| g == gid) {
            Some(i) => i,
            None => {
                group_ids.push(gid.to_string());
                samples.push(Vec::new());
                group_ids.len() - 1
            }
        };
        for c in 1..=dim {
            samples[gi].push(table.numeric_cell(r, c)?);
        }
    }
    let dists = samples
        .into_iter()
        .map(|flat| EmpiricalDistribution::new(dim, flat).map_err(CliError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureBlock {
        name: name.to_string(),
        data: BlockData::Distribution {
            dim,
            group_ids,
            dists,
        },
    })
}

/// Deterministic per-class split: every class contributes
/// `round(fraction * class size)` rows to the training side. Classes are
/// processed in first-appearance order; all randomness flows from `seed`
/// through the crate's SplitMix64 generator.
pub fn stratified_split(
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !train_fraction.is_finite() || train_fraction <= 0.0 || train_fraction >= 1.0 {
        return Err(CliError::config(
            "train fraction must lie strictly between 0 and 1",
        ));
    }
    let mut class_order: Vec<usize> = Vec::new();
    let mut per_class: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        if !per_class.contains_key(&l) {
            class_order.push(l);
        }
        per_class.entry(l).or_default().push(i);
    }
    let mut rng = SplitMix64::new(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in class_order {
        let mut idx = per_class.remove(&class).expect("class recorded");
        if idx.len() < 2 {
            return Err(CliError::data(format!(
                "class {class} has fewer than 2 members; cannot split"
            )));
        }
        rng.shuffle(&mut idx);
        let take = (train_fraction * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..take]);
        test.extend_from_slice(&idx[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Content hash of a set of blocks: row count plus a 16-hex-digit SHA-256
/// prefix over names, kinds, shapes and raw values.
pub fn fingerprint(blocks: &[&FeatureBlock]) -> (usize, String) {
    let mut hasher = Sha256::new();
    let n = blocks.first().map_or(0, |b| b.len());
    for b in blocks {
        hasher.update(b.name.as_bytes());
        hasher.update([0u8]);
        hasher.update(b.kind_str().as_bytes());
        hasher.update((b.len() as u64).to_le_bytes());
        hasher.update((b.dim() as u64).to_le_bytes());
        match &b.data {
            BlockData::Vector { values, .. } => {
                for v in values {
                    hasher.update(v.to_le_bytes());
                }
            }
            BlockData::OneHot {
                categories, values, ..
            } => {
                for c in categories {
                    hasher.update(c.as_bytes());
                    hasher.update([0u8]);
                }
                for v in values {
                    hasher.update(v.to_le_bytes());
                }
            }
            BlockData::Distribution { dists, .. } => {
                for d in dists {
                    hasher.update((d.len() as u64).to_le_bytes());
                    for v in d.values() {
                        hasher.update(v.to_le_bytes());
                    }
                }
            }
        }
    }
    let digest = hasher.finalize();
    let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    (n, hash)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_vector_and_onehot_blocks() {
        let f = write_temp("a,b,label\n1,2,x\n3,4,y\n");
        let table = Table::load(f.path()).unwrap();
        let specs = vec![
            crate::schema::parse_block_spec("xy=a,b").unwrap(),
            crate::schema::parse_block_spec("lab=cat(label)").unwrap(),
        ];
        let blocks = load_blocks(Some(&table), &specs, &HashMap::new()).unwrap();
        assert_eq!(blocks[0].row(0).unwrap(), &[1.0, 2.0]);
        assert_eq!(blocks[0].row(1).unwrap(), &[3.0, 4.0]);
        match &blocks[1].data {
            BlockData::OneHot {
                categories, values, ..
            } => {
                assert_eq!(categories, &["x".to_string(), "y".to_string()]);
                assert_eq!(values, &[1.0, 0.0, 0.0, 1.0]);
            }
            _ => panic!("expected one-hot block"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let f = write_temp("");
        assert!(Table::load(f.path()).is_err());
        let g = write_temp("a,b\n");
        assert!(Table::load(g.path()).is_err());
    }

    #[test]
    fn non_numeric_cell_reports_location() {
        let f = write_temp("a,b\n1,2\n1,oops\n");
        let table = Table::load(f.path()).unwrap();
        let specs = vec![crate::schema::parse_block_spec("x=a,b").unwrap()];
        let err = load_blocks(Some(&table), &specs, &HashMap::new()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3"), "{msg}");
        assert!(msg.contains("'b'"), "{msg}");
        assert!(msg.contains("oops"), "{msg}");
    }

    #[test]
    fn grouped_samples_are_order_insensitive_within_groups() {
        let f = write_temp("group_id,v1\ng1,0.0\ng1,2.0\ng2,1.0\n");
        let a = load_grouped_samples(f.path(), "d").unwrap();
        let g = write_temp("group_id,v1\ng1,2.0\ng2,1.0\ng1,0.0\n");
        let b = load_grouped_samples(g.path(), "d").unwrap();
        assert_eq!(a, b);
        match &a.data {
            BlockData::Distribution {
                dists, group_ids, ..
            } => {
                assert_eq!(group_ids, &["g1".to_string(), "g2".to_string()]);
                assert_eq!(dists[0].values(), &[0.0, 2.0]);
                assert_eq!(dists[1].values(), &[1.0]);
                assert!(dists[0].sorted_1d());
            }
            _ => panic!("expected distribution block"),
        }
    }

    #[test]
    fn multicolumn_samples_become_2d_distributions() {
        let f = write_temp("group_id,v1,v2\ng,0,1\ng,2,3\n");
        let b = load_grouped_samples(f.path(), "d").unwrap();
        match &b.data {
            BlockData::Distribution { dim, dists, .. } => {
                assert_eq!(*dim, 2);
                assert!(!dists[0].sorted_1d());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn ragged_samples_are_rejected() {
        let f = write_temp("group_id,v1,v2\ng,0,1\ng,2\n");
        assert!(load_grouped_samples(f.path(), "d").is_err());
    }

    #[test]
    fn stratified_split_counts_and_determinism() {
        // 150 labels, 50 per class, fraction 0.7 -> 105 train, 35 per class.
        let labels: Vec<usize> = (0..150).map(|i| i / 50).collect();
        let (train, test) = stratified_split(&labels, 0.7, 9).unwrap();
        assert_eq!(train.len(), 105);
        assert_eq!(test.len(), 45);
        for class in 0..3 {
            assert_eq!(train.iter().filter(|&&i| labels[i] == class).count(), 35);
        }
        let again = stratified_split(&labels, 0.7, 9).unwrap();
        assert_eq!((train.clone(), test.clone()), again);
        // Partition: disjoint, union = everything.
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..150).collect::<Vec<_>>());
    }

    #[test]
    fn split_of_two_classes_of_four() {
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let (train, _) = stratified_split(&labels, 0.5, 1).unwrap();
        assert_eq!(train.iter().filter(|&&i| labels[i] == 0).count(), 2);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 2);
    }

    #[test]
    fn tiny_class_is_rejected() {
        let labels = vec![0, 0, 1];
        assert!(stratified_split(&labels, 0.5, 0).is_err());
    }

    #[test]
    fn unknown_category_at_predict_time() {
        let f = write_temp("label\nx\nz\n");
        let table = Table::load(f.path()).unwrap();
        let err =
            onehot_with_categories(&table, "lab", "label", &["x".into(), "y".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown category 'z'"), "{msg}");
        assert!(msg.contains("row 3"), "{msg}");
    }

    #[test]
    fn fingerprint_tracks_content() {
        let f = write_temp("a\n1\n2\n");
        let table = Table::load(f.path()).unwrap();
        let specs = vec![crate::schema::parse_block_spec("x=a").unwrap()];
        let b1 = load_blocks(Some(&table), &specs, &HashMap::new()).unwrap();
        let g = write_temp("a\n1\n3\n");
        let table2 = Table::load(g.path()).unwrap();
        let b2 = load_blocks(Some(&table2), &specs, &HashMap::new()).unwrap();
        let f1 = fingerprint(&b1.iter().collect::<Vec<_>>());
        let f2 = fingerprint(&b2.iter().collect::<Vec<_>>());
        assert_eq!(f1.0, 2);
        assert_ne!(f1.1, f2.1);
    }
}
