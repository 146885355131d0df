//! Citation-network datasets in the tab-separated content/cites layout.
//!
//! Content file: one node per line, `<id>\t<f_1>\t...\t<f_F>\t<label>`.
//! Cites file: one edge per line, `<target_id>\t<source_id>`. Node ids are
//! arbitrary strings and are numbered by first appearance in the content
//! file. Class indices follow the sorted label strings.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub adjacency: AdjacencyMatrix,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
    pub node_ids: Vec<String>,
    pub class_names: Vec<String>,
}

/// Labeled-node budget for the deterministic split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train_per_class: 20,
            val: 500,
            test: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    pub split: SplitSizes,
    /// Skip citations that mention ids missing from the content file
    /// instead of failing.
    pub skip_unknown_ids: bool,
}

/// Walks nodes in order: the first `train_per_class` of each class go to
/// training, then the next `val` remaining nodes to validation, then the
/// next `test` to testing.
pub fn split_masks(labels: &[usize], num_classes: usize, sizes: SplitSizes) -> (Vec<bool>, Vec<bool>, Vec<bool>) {
    let n = labels.len();
    let mut train = vec![false; n];
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    let mut per_class = vec![0usize; num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if per_class[y] < sizes.train_per_class {
            per_class[y] += 1;
            train[i] = true;
        }
    }
    let mut rest = (0..n).filter(|&i| !train[i]);
    for i in rest.by_ref().take(sizes.val) {
        val[i] = true;
    }
    for i in rest.take(sizes.test) {
        test[i] = true;
    }
    (train, val, test)
}

impl Dataset {
    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Builds a dataset from in-memory parts with generated ids and class
    /// names.
    pub fn from_parts(
        adjacency: AdjacencyMatrix,
        features: Tensor,
        labels: Vec<usize>,
        num_classes: usize,
        split: SplitSizes,
    ) -> Result<Self> {
        let (train_mask, val_mask, test_mask) = split_masks(&labels, num_classes, split);
        let ds = Self {
            node_ids: (0..labels.len()).map(|i| format!("n{i}")).collect(),
            class_names: (0..num_classes).map(|c| format!("class_{c}")).collect(),
            adjacency,
            features,
            labels,
            train_mask,
            val_mask,
            test_mask,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if self.adjacency.n() != n || self.features.rows() != n {
            return Err(Error::Validation(format!(
                "dataset sizes disagree: {n} labels, {} adjacency nodes, {} feature rows",
                self.adjacency.n(),
                self.features.rows()
            )));
        }
        for m in [&self.train_mask, &self.val_mask, &self.test_mask] {
            if m.len() != n {
                return Err(Error::Validation("mask length does not match node count".into()));
            }
        }
        for i in 0..n {
            let hits = [self.train_mask[i], self.val_mask[i], self.test_mask[i]]
                .iter()
                .filter(|&&b| b)
                .count();
            if hits > 1 {
                return Err(Error::Validation(format!("node {i} is in more than one mask")));
            }
            if hits == 1 && self.labels[i] >= self.num_classes() {
                return Err(Error::Validation(format!("node {i} has label {} out of range", self.labels[i])));
            }
        }
        Ok(())
    }

    /// `(row, label)` pairs for the nodes set in `mask`.
    pub fn targets(&self, mask: &[bool]) -> Vec<(usize, usize)> {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| (i, self.labels[i]))
            .collect()
    }

    pub fn load(content_path: &Path, cites_path: &Path) -> Result<Self> {
        Self::load_with(content_path, cites_path, LoadOptions::default())
    }

    pub fn load_with(content_path: &Path, cites_path: &Path, opts: LoadOptions) -> Result<Self> {
        let content = fs::read_to_string(content_path)?;
        let cites = fs::read_to_string(cites_path)?;
        parse(
            &content,
            &content_path.display().to_string(),
            &cites,
            &cites_path.display().to_string(),
            opts,
        )
    }

    /// Writes the content and cites files this dataset was (or could have
    /// been) loaded from.
    pub fn write(&self, content_path: &Path, cites_path: &Path) -> Result<()> {
        let mut content = std::io::BufWriter::new(fs::File::create(content_path)?);
        for i in 0..self.num_nodes() {
            write!(content, "{}", self.node_ids[i])?;
            for v in self.features.row(i) {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(content, "\t{}", *v as i64)?;
                } else {
                    write!(content, "\t{v}")?;
                }
            }
            writeln!(content, "\t{}", self.class_names[self.labels[i]])?;
        }
        content.flush()?;
        let mut cites = std::io::BufWriter::new(fs::File::create(cites_path)?);
        for (i, j) in self.adjacency.edges() {
            writeln!(cites, "{}\t{}", self.node_ids[i], self.node_ids[j])?;
        }
        cites.flush()?;
        Ok(())
    }
}

/// Parses content and cites text. The path arguments only label errors.
pub fn parse(content: &str, content_name: &str, cites: &str, cites_name: &str, opts: LoadOptions) -> Result<Dataset> {
    let parse_err = |path: &str, line: usize, reason: String| Error::Parse {
        path: path.to_string(),
        line,
        reason,
    };

    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut label_strings: Vec<String> = Vec::new();
    let mut width: Option<usize> = None;

    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(parse_err(content_name, lineno, "expected an id and a label".into()));
        }
        let id = fields[0];
        let label = fields[fields.len() - 1];
        let feats = &fields[1..fields.len() - 1];
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(parse_err(
                    content_name,
                    lineno,
                    format!("expected {w} features, found {}", feats.len()),
                ));
            }
            _ => {}
        }
        let row = feats
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(content_name, lineno, format!("bad feature value {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if index.insert(id.to_string(), ids.len()).is_some() {
            return Err(parse_err(content_name, lineno, format!("duplicate node id {id:?}")));
        }
        ids.push(id.to_string());
        rows.push(row);
        label_strings.push(label.to_string());
    }

    let n = ids.len();
    let f = width.unwrap_or(0);
    let class_names: Vec<String> = label_strings
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels: Vec<usize> = label_strings
        .iter()
        .map(|l| class_names.binary_search(l).expect("label collected"))
        .collect();

    let mut edges = Vec::new();
    for (lineno, line) in cites.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(cites_name, lineno, "expected two node ids".into()));
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ if opts.skip_unknown_ids => {}
            (None, _) => return Err(parse_err(cites_name, lineno, format!("unknown node id {:?}", fields[0]))),
            (_, None) => return Err(parse_err(cites_name, lineno, format!("unknown node id {:?}", fields[1]))),
        }
    }

    let adjacency = AdjacencyMatrix::from_edges(n, &edges)?;
    let features = Tensor::new(n, f, rows.into_iter().flatten().collect())?;
    let (train_mask, val_mask, test_mask) = split_masks(&labels, class_names.len(), opts.split);
    let ds = Dataset {
        adjacency,
        features,
        labels,
        train_mask,
        val_mask,
        test_mask,
        node_ids: ids,
        class_names,
    };
    ds.validate()?;
    Ok(ds)
}
