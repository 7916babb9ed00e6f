//! Labeled datasets and vote matrices.
//!
//! A [`VoteMatrix`] records, for every test point, how many of the `m`
//! observed weak classifiers voted positive. Everything downstream depends on
//! the votes only through that count, so the compact form is canonical and the
//! full 0/1 matrix is kept only when it is available (the oracle's
//! shared-column mode needs it).
//!
//! File formats:
//!
//! ```text
//! # m=4            compact form: comment line, header, one `label,count` row per point
//! label,count
//! 1,3
//!
//! label,v1,v2,v3,v4    full form: label then one 0/1 column per classifier
//! 0,1,0,1,1
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points in each class; both are at least one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub n_neg: usize,
    pub n_pos: usize,
}

impl ClassCounts {
    /// Counts labels, failing unless both classes occur.
    pub fn from_labels(labels: &[u8]) -> Result<Self> {
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        let n_neg = labels.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            return Err(Error::SingleClass(labels.len()));
        }
        Ok(Self { n_neg, n_pos })
    }

    pub fn total(&self) -> usize {
        self.n_neg + self.n_pos
    }

    /// Denominator for the rate of the given class label.
    pub fn of(&self, label: u8) -> usize {
        if label == 1 {
            self.n_pos
        } else {
            self.n_neg
        }
    }
}

/// Selects the label column of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl From<&str> for LabelColumn {
    /// A header name is preferred; a bare integer falls back to an index.
    fn from(s: &str) -> Self {
        match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        }
    }
}

/// An `N x d` matrix of finite features with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    n_features: usize,
    feature_names: Option<Vec<String>>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major features.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<u8>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if n_features == 0 {
            return Err(Error::InvalidArgument("dataset has no feature columns".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::LengthMismatch {
                what: "features",
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(Error::LengthMismatch {
                    what: "feature_names",
                    expected: n_features,
                    found: names.len(),
                });
            }
        }
        if let Some((row, &y)) = labels.iter().enumerate().find(|(_, &y)| y > 1) {
            return Err(Error::InvalidLabel {
                line: row + 1,
                value: y.to_string(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                line: pos / n_features + 1,
                column: format!("{}", pos % n_features),
            });
        }
        Ok(Self {
            features,
            labels,
            n_features,
            feature_names,
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

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.n_features..(j + 1) * self.n_features]
    }

    /// Class counts; fails if only one class is present.
    pub fn class_counts(&self) -> Result<ClassCounts> {
        ClassCounts::from_labels(&self.labels)
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        Self::new(
            self.features[..n * self.n_features].to_vec(),
            self.n_features,
            self.labels[..n].to_vec(),
            self.feature_names.clone(),
        )
    }

    /// Writes the dataset as CSV with the label in the last column.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for i in 0..self.n_features {
            match &self.feature_names {
                Some(names) => write!(line, "{},", names[i]).unwrap(),
                None => write!(line, "f{i},").unwrap(),
            }
        }
        line.push_str("label\n");
        out.write_all(line.as_bytes())?;
        for j in 0..self.len() {
            line.clear();
            for v in self.row(j) {
                write!(line, "{v},").unwrap();
            }
            writeln!(line, "{}", self.labels[j]).unwrap();
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Loads a CSV dataset; every non-label column is parsed as a float.
pub fn load_dataset(path: impl AsRef<Path>, label_column: &LabelColumn) -> Result<LabeledDataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, label_column)
}

/// Parses dataset CSV text. See [`load_dataset`].
pub fn parse_dataset(text: &str, label_column: &LabelColumn) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Empty("dataset has no header".into()));
    }
    let label_idx = match label_column {
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingHeader(format!("label column {name:?} not found")))?,
        LabelColumn::Index(i) => headers.iter().position(|h| h == i.to_string()).unwrap_or(*i),
    };
    if label_idx >= headers.len() {
        return Err(Error::MissingHeader(format!(
            "label column index {label_idx} out of range for {} columns",
            headers.len()
        )));
    }
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let d = names.len();

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                labels.push(parse_label(field, line)?);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("non-numeric feature {field:?} in column {:?}", &headers[i]),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature {
                    line,
                    column: headers[i].to_string(),
                });
            }
            features.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("dataset has no rows".into()));
    }
    LabeledDataset::new(features, d, labels, Some(names))
}

fn parse_label(field: &str, line: usize) -> Result<u8> {
    match field.parse::<f64>() {
        Ok(0.0) => Ok(0),
        Ok(1.0) => Ok(1),
        _ => Err(Error::InvalidLabel {
            line,
            value: field.to_string(),
        }),
    }
}

/// On-disk layout for a vote matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteFormat {
    Compact,
    Full,
}

/// Positive-vote counts per test point out of `m_observed` classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    counts: Vec<u32>,
    m_observed: u32,
    labels: Vec<u8>,
    /// Row-major `N x m_observed`, entries 0/1.
    full_votes: Option<Vec<u8>>,
}

impl VoteMatrix {
    /// Builds a compact vote matrix.
    pub fn new(counts: Vec<u32>, m_observed: u32, labels: Vec<u8>) -> Result<Self> {
        if m_observed == 0 {
            return Err(Error::InvalidArgument("m_observed must be at least 1".into()));
        }
        if counts.is_empty() {
            return Err(Error::Empty("vote matrix has no rows".into()));
        }
        if counts.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: counts.len(),
                found: labels.len(),
            });
        }
        for (j, (&k, &y)) in counts.iter().zip(&labels).enumerate() {
            if k > m_observed {
                return Err(Error::CountExceedsM {
                    line: j + 1,
                    count: k as u64,
                    m: m_observed,
                });
            }
            if y > 1 {
                return Err(Error::InvalidLabel {
                    line: j + 1,
                    value: y.to_string(),
                });
            }
        }
        ClassCounts::from_labels(&labels)?;
        Ok(Self {
            counts,
            m_observed,
            labels,
            full_votes: None,
        })
    }

    /// Builds a vote matrix from a row-major `N x m` 0/1 matrix.
    pub fn from_full(votes: Vec<u8>, m: usize, labels: Vec<u8>) -> Result<Self> {
        if m == 0 || m > u32::MAX as usize {
            return Err(Error::InvalidArgument(format!("invalid classifier count {m}")));
        }
        if votes.len() != labels.len() * m {
            return Err(Error::LengthMismatch {
                what: "full_votes",
                expected: labels.len() * m,
                found: votes.len(),
            });
        }
        let mut counts = Vec::with_capacity(labels.len());
        for (j, row) in votes.chunks_exact(m).enumerate() {
            let mut k = 0u32;
            for (i, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::NonBinaryVote {
                        row: j,
                        column: i,
                        value: v,
                    });
                }
                k += v as u32;
            }
            counts.push(k);
        }
        let mut vm = Self::new(counts, m as u32, labels)?;
        vm.full_votes = Some(votes);
        Ok(vm)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn m_observed(&self) -> u32 {
        self.m_observed
    }

    pub fn full_votes(&self) -> Option<&[u8]> {
        self.full_votes.as_deref()
    }

    /// Row `j` of the full vote matrix, when present.
    pub fn full_row(&self, j: usize) -> Option<&[u8]> {
        let m = self.m_observed as usize;
        self.full_votes.as_ref().map(|v| &v[j * m..(j + 1) * m])
    }

    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts::from_labels(&self.labels).expect("validated at construction")
    }

    /// Empirical positive-vote rate `k_j / m_observed`.
    pub fn vote_rate(&self, j: usize) -> f64 {
        self.counts[j] as f64 / self.m_observed as f64
    }

    /// Drops the full matrix, keeping only counts.
    pub fn into_compact(mut self) -> Self {
        self.full_votes = None;
        self
    }

    pub fn write<W: Write>(&self, out: W, format: VoteFormat) -> Result<()> {
        match format {
            VoteFormat::Compact => self.write_compact(out),
            VoteFormat::Full => self.write_full(out),
        }
    }

    pub fn write_compact<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::with_capacity(16 * self.len() + 32);
        writeln!(buf, "# m={}", self.m_observed).unwrap();
        buf.push_str("label,count\n");
        for (&y, &k) in self.labels.iter().zip(&self.counts) {
            writeln!(buf, "{y},{k}").unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn write_full<W: Write>(&self, mut out: W) -> Result<()> {
        let full = self
            .full_votes
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("full vote format requested but only counts are available".into()))?;
        let m = self.m_observed as usize;
        let mut buf = String::with_capacity(self.len() * (2 * m + 3) + 8 * m);
        buf.push_str("label");
        for i in 1..=m {
            write!(buf, ",v{i}").unwrap();
        }
        buf.push('\n');
        for (j, row) in full.chunks_exact(m).enumerate() {
            write!(buf, "{}", self.labels[j]).unwrap();
            for &v in row {
                buf.push(',');
                buf.push(if v == 1 { '1' } else { '0' });
            }
            buf.push('\n');
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, format: VoteFormat) -> Result<()> {
        let mut bytes = Vec::new();
        self.write(&mut bytes, format)?;
        fs::write(path, bytes)?;
        Ok(())
    }
}

/// Loads a vote file in either compact or full form.
pub fn load_votes(path: impl AsRef<Path>) -> Result<VoteMatrix> {
    let text = fs::read_to_string(path)?;
    parse_votes(&text)
}

/// Parses vote-file text, detecting the form from its first line.
pub fn parse_votes(text: &str) -> Result<VoteMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (first_no, first) = lines.next().ok_or_else(|| Error::Empty("vote file is empty".into()))?;

    if let Some(rest) = first.strip_prefix('#') {
        let m: u32 = rest
            .trim()
            .strip_prefix("m=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: first_no,
                msg: format!("expected `# m=<count>`, found {first:?}"),
            })?;
        match lines.next() {
            Some((_, h)) if header_fields(h) == ["label", "count"] => {}
            _ => return Err(Error::MissingHeader("expected `label,count` after `# m=` line".into())),
        }
        let mut counts = Vec::new();
        let mut labels = Vec::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(Error::RaggedRow {
                    line,
                    expected: 2,
                    found: fields.len(),
                });
            }
            labels.push(parse_label(fields[0], line)?);
            let k: u64 = fields[1].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid count {:?}", fields[1]),
            })?;
            if k > m as u64 {
                return Err(Error::CountExceedsM { line, count: k, m });
            }
            counts.push(k as u32);
        }
        if counts.is_empty() {
            return Err(Error::Empty("vote file has no rows".into()));
        }
        return VoteMatrix::new(counts, m, labels);
    }

    let header = header_fields(first);
    if header.first().map(String::as_str) != Some("label") || header.len() < 2 {
        return Err(Error::MissingHeader(
            "expected `# m=<count>` or a `label,v1,...,vm` header".into(),
        ));
    }
    let m = header.len() - 1;
    for (i, h) in header.iter().enumerate().skip(1) {
        if *h != format!("v{i}") {
            return Err(Error::MissingHeader(format!("unexpected column name {h:?}")));
        }
    }
    let mut votes = Vec::new();
    let mut labels = Vec::new();
    for (line, l) in lines {
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != m + 1 {
            return Err(Error::RaggedRow {
                line,
                expected: m + 1,
                found: fields.len(),
            });
        }
        labels.push(parse_label(fields[0], line)?);
        for f in &fields[1..] {
            match *f {
                "0" => votes.push(0),
                "1" => votes.push(1),
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("vote {other:?} is not 0 or 1"),
                    })
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("vote file has no rows".into()));
    }
    VoteMatrix::from_full(votes, m, labels)
}

fn header_fields(line: &str) -> Vec<String> {
    line.split(',').map(|s| s.trim().to_string()).collect()
}

/// Builds a [`VoteMatrix`] from per-point rows of 0/1 votes.
pub fn counts_from_full(full_votes: &[Vec<u8>], labels: &[u8]) -> Result<VoteMatrix> {
    let m = full_votes.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(full_votes.len() * m);
    for (j, row) in full_votes.iter().enumerate() {
        if row.len() != m {
            return Err(Error::RaggedRow {
                line: j + 1,
                expected: m,
                found: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    VoteMatrix::from_full(flat, m, labels.to_vec())
}
