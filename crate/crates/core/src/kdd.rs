//! KDD-99 connection records: parsing, label mapping and feature encoding.
//!
//! A record is 41 comma-separated features followed by the attack label with
//! a trailing period (`...,smurf.`). Column kinds come from a [`Schema`];
//! symbolic columns are one-hot encoded and continuous columns are z-scored
//! with train-set population statistics.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::FeatureVector;
use crate::scalar::Scalar;

/// Number of feature columns in a KDD-99 record.
pub const KDD_FEATURES: usize = 41;

const BUILTIN_SCHEMA: &str = include_str!("../data/kdd_schema.txt");
const BUILTIN_CATEGORIES: &str = include_str!("../data/kdd_categories.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Symbolic,
}

/// Ordered column kinds of a record, one per feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    kinds: Vec<ColumnKind>,
}

impl Schema {
    pub fn new(kinds: Vec<ColumnKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidSchema("no columns".into()));
        }
        Ok(Self { kinds })
    }

    /// The standard 41-column KDD-99 layout (protocol_type, service and flag
    /// symbolic, everything else continuous).
    pub fn kdd() -> Self {
        Self::parse_kdd(BUILTIN_SCHEMA).expect("built-in schema is valid")
    }

    /// Parses a schema file and checks it has exactly 41 columns.
    pub fn parse_kdd(text: &str) -> Result<Self> {
        let schema = Self::parse(text)?;
        if schema.len() != KDD_FEATURES {
            return Err(Error::InvalidSchema(format!(
                "expected {KDD_FEATURES} columns, found {}",
                schema.len()
            )));
        }
        Ok(schema)
    }

    /// Parses one column kind per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kinds = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let kind = match line.to_ascii_lowercase().as_str() {
                "continuous" => ColumnKind::Continuous,
                "symbolic" => ColumnKind::Symbolic,
                other => {
                    return Err(Error::InvalidSchema(format!(
                        "line {}: unknown column kind {other:?}",
                        i + 1
                    )))
                }
            };
            kinds.push(kind);
        }
        Self::new(kinds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_kdd(&text)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn continuous_count(&self) -> usize {
        self.kinds
            .iter()
            .filter(|k| **k == ColumnKind::Continuous)
            .count()
    }

    pub fn symbolic_count(&self) -> usize {
        self.len() - self.continuous_count()
    }
}

/// The five misuse-detection classes, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Normal = 0,
    Probe = 1,
    DoS = 2,
    U2R = 3,
    R2L = 4,
}

impl Category {
    pub const COUNT: usize = 5;
    pub const ALL: [Category; 5] = [
        Category::Normal,
        Category::Probe,
        Category::DoS,
        Category::U2R,
        Category::R2L,
    ];
    pub const ATTACKS: [Category; 4] = [
        Category::Probe,
        Category::DoS,
        Category::U2R,
        Category::R2L,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Normal => "Normal",
            Category::Probe => "Probe",
            Category::DoS => "DoS",
            Category::U2R => "U2R",
            Category::R2L => "R2L",
        }
    }

    pub fn is_attack(self) -> bool {
        self != Category::Normal
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name().to_ascii_lowercase() == lower)
            .ok_or_else(|| Error::InvalidCategoryMap(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub category: Category,
    pub attack_name: String,
}

/// What to do with attack names missing from a [`CategoryMap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    #[default]
    Strict,
    Assign(Category),
}

/// Attack name to category table.
#[derive(Debug, Clone)]
pub struct CategoryMap {
    names: HashMap<String, Category>,
    policy: UnknownPolicy,
}

impl CategoryMap {
    /// The standard KDD-99 contest mapping shipped with the crate.
    pub fn kdd() -> Self {
        Self::parse(BUILTIN_CATEGORIES).expect("built-in category map is valid")
    }

    /// Parses `name,category` lines. Names are stored without a trailing
    /// period. Duplicate names and a non-Normal `normal` entry are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut names = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, cat) = line.split_once(',').ok_or_else(|| {
                Error::InvalidCategoryMap(format!("line {}: expected name,category", i + 1))
            })?;
            let name = strip_label(name);
            if name.is_empty() {
                return Err(Error::InvalidCategoryMap(format!(
                    "line {}: empty name",
                    i + 1
                )));
            }
            let cat: Category = cat.parse()?;
            if names.insert(name.to_string(), cat).is_some() {
                return Err(Error::InvalidCategoryMap(format!(
                    "line {}: duplicate name {name:?}",
                    i + 1
                )));
            }
        }
        match names.get("normal") {
            Some(Category::Normal) | None => {}
            Some(other) => {
                return Err(Error::InvalidCategoryMap(format!(
                    "\"normal\" mapped to {other}"
                )))
            }
        }
        Ok(Self {
            names,
            policy: UnknownPolicy::Strict,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn with_policy(mut self, policy: UnknownPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, Category)> {
        self.names.iter().map(|(n, c)| (n.as_str(), *c))
    }

    pub fn map_label(&self, attack_name: &str) -> Result<ClassLabel> {
        let name = strip_label(attack_name);
        let category = if name == "normal" {
            Category::Normal
        } else {
            match (self.names.get(name), self.policy) {
                (Some(c), _) => *c,
                (None, UnknownPolicy::Assign(c)) => c,
                (None, UnknownPolicy::Strict) => {
                    return Err(Error::UnknownAttackName(name.to_string()))
                }
            }
        };
        Ok(ClassLabel {
            category,
            attack_name: name.to_string(),
        })
    }
}

fn strip_label(label: &str) -> &str {
    let label = label.trim();
    label.strip_suffix('.').unwrap_or(label).trim()
}

/// A parsed but not yet encoded record.
///
/// Continuous and symbolic fields are stored in separate vectors, each in
/// schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub numeric: Vec<f64>,
    pub symbols: Vec<String>,
    pub label: String,
}

impl RawRecord {
    /// Re-serializes the record as a KDD line (label with trailing period).
    pub fn to_line(&self, schema: &Schema) -> String {
        let mut out = String::with_capacity(128);
        let (mut n, mut s) = (0, 0);
        for kind in schema.kinds() {
            match kind {
                ColumnKind::Continuous => {
                    push_number(&mut out, self.numeric[n]);
                    n += 1;
                }
                ColumnKind::Symbolic => {
                    out.push_str(&self.symbols[s]);
                    s += 1;
                }
            }
            out.push(',');
        }
        out.push_str(&self.label);
        out.push('.');
        out
    }
}

fn push_number(out: &mut String, v: f64) {
    use std::fmt::Write;
    if v.fract() == 0.0 && v.abs() < 1e15 {
        let _ = write!(out, "{}", v as i64);
    } else {
        let _ = write!(out, "{v}");
    }
}

/// Parses one labeled line (41 features + label).
pub fn parse_kdd_record(line: &str, schema: &Schema) -> Result<RawRecord> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() != schema.len() + 1 {
        return Err(Error::FieldCountMismatch {
            expected: schema.len() + 1,
            found: fields.len(),
        });
    }
    let label = strip_label(fields[schema.len()]);
    if label.is_empty() {
        return Err(Error::EmptyLabel);
    }
    let mut record = parse_features(&fields[..schema.len()], schema)?;
    record.label = label.to_string();
    Ok(record)
}

/// Parses a line that may or may not carry a label; a missing label becomes
/// the empty string.
pub fn parse_kdd_features(line: &str, schema: &Schema) -> Result<RawRecord> {
    let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if fields.len() == schema.len() + 1 {
        return parse_kdd_record(line, schema);
    }
    if fields.len() != schema.len() {
        return Err(Error::FieldCountMismatch {
            expected: schema.len() + 1,
            found: fields.len(),
        });
    }
    parse_features(&fields, schema)
}

fn parse_features(fields: &[&str], schema: &Schema) -> Result<RawRecord> {
    let mut numeric = Vec::with_capacity(schema.continuous_count());
    let mut symbols = Vec::with_capacity(schema.symbolic_count());
    for (column, (field, kind)) in fields.iter().zip(schema.kinds()).enumerate() {
        let field = field.trim();
        match kind {
            ColumnKind::Continuous => {
                let v: f64 = field
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| Error::MalformedNumeric {
                        column,
                        value: field.to_string(),
                    })?;
                numeric.push(v);
            }
            ColumnKind::Symbolic => symbols.push(field.to_string()),
        }
    }
    Ok(RawRecord {
        numeric,
        symbols,
        label: String::new(),
    })
}

/// Opens a text file, transparently decompressing `.gz` files.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 20, reader)))
}

/// Reads every non-blank line of a KDD file. Errors carry file and line.
pub fn read_records(path: &Path, schema: &Schema) -> Result<Vec<RawRecord>> {
    read_with(path, |line| parse_kdd_record(line, schema))
}

/// Like [`read_records`] but accepts unlabeled lines.
pub fn read_unlabeled(path: &Path, schema: &Schema) -> Result<Vec<RawRecord>> {
    read_with(path, |line| parse_kdd_features(line, schema))
}

fn read_with(path: &Path, parse: impl Fn(&str) -> Result<RawRecord>) -> Result<Vec<RawRecord>> {
    let reader = open_text(path)?;
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse(&line).map_err(|e| Error::AtLine {
            path: path.to_path_buf(),
            line: i + 1,
            source: Box::new(e),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Fitted feature encoder: one-hot vocabularies for symbolic columns and
/// population mean/sd for continuous columns. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Encoder<T> {
    schema: Schema,
    vocabularies: Vec<Vec<String>>,
    means: Vec<T>,
    sds: Vec<T>,
    output_dim: usize,
}

impl<T: Scalar> Encoder<T> {
    /// Builds vocabularies (first-seen order) and statistics from `train`.
    pub fn fit(train: &[RawRecord], schema: &Schema) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_cont = schema.continuous_count();
        let n_sym = schema.symbolic_count();
        for r in train {
            if r.numeric.len() != n_cont || r.symbols.len() != n_sym {
                return Err(Error::EncoderMismatch(
                    "record does not match schema".into(),
                ));
            }
        }

        let mut vocabularies: Vec<Vec<String>> = vec![Vec::new(); n_sym];
        for r in train {
            for (vocab, sym) in vocabularies.iter_mut().zip(&r.symbols) {
                if !vocab.iter().any(|v| v == sym) {
                    vocab.push(sym.clone());
                }
            }
        }

        let n = train.len() as f64;
        let mut means = vec![0.0f64; n_cont];
        for r in train {
            for (m, v) in means.iter_mut().zip(&r.numeric) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0f64; n_cont];
        for r in train {
            for ((acc, v), m) in vars.iter_mut().zip(&r.numeric).zip(&means) {
                let d = v - m;
                *acc += d * d;
            }
        }
        let sds: Vec<f64> = vars.iter().map(|v| (v / n).sqrt()).collect();

        let output_dim = n_cont + vocabularies.iter().map(Vec::len).sum::<usize>();
        Ok(Self {
            schema: schema.clone(),
            vocabularies,
            means: means.into_iter().map(T::c).collect(),
            sds: sds.into_iter().map(T::c).collect(),
            output_dim,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn vocabularies(&self) -> &[Vec<String>] {
        &self.vocabularies
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn sds(&self) -> &[T] {
        &self.sds
    }

    /// Encodes the feature part of a record. Unseen symbols give an
    /// all-zero block; zero-variance columns give 0.
    pub fn encode_values(&self, record: &RawRecord) -> Result<Vec<T>> {
        if record.numeric.len() != self.means.len() || record.symbols.len() != self.vocabularies.len()
        {
            return Err(Error::EncoderMismatch(format!(
                "record has {} continuous / {} symbolic fields, encoder expects {} / {}",
                record.numeric.len(),
                record.symbols.len(),
                self.means.len(),
                self.vocabularies.len()
            )));
        }
        let mut out = Vec::with_capacity(self.output_dim);
        let (mut n, mut s) = (0, 0);
        for kind in self.schema.kinds() {
            match kind {
                ColumnKind::Continuous => {
                    let sd = self.sds[n];
                    let v = if sd > T::zero() {
                        (T::c(record.numeric[n]) - self.means[n]) / sd
                    } else {
                        T::zero()
                    };
                    out.push(v);
                    n += 1;
                }
                ColumnKind::Symbolic => {
                    let vocab = &self.vocabularies[s];
                    let hit = vocab.iter().position(|v| *v == record.symbols[s]);
                    out.extend((0..vocab.len()).map(|j| {
                        if Some(j) == hit {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }));
                    s += 1;
                }
            }
        }
        debug_assert_eq!(out.len(), self.output_dim);
        Ok(out)
    }

    pub fn encode(&self, record: &RawRecord, label: &ClassLabel) -> Result<FeatureVector<T>> {
        Ok(FeatureVector::new(
            self.encode_values(record)?,
            label.category.index(),
        ))
    }
}
