//! Experimental dataset construction: the pure-normal set, the 13 clusters of
//! known intrusions and the incremental training sets `D_k = Norm + C_1 + .. + C_k`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::{read_records, Category, CategoryMap, ClassLabel, RawRecord, Schema};

/// Number of known-intrusion clusters.
pub const CLUSTER_COUNT: usize = 13;

const BUILTIN_CLUSTERS: &str = include_str!("../data/clusters.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: RawRecord,
    pub category: Category,
}

impl LabeledRecord {
    pub fn attack_name(&self) -> &str {
        &self.record.label
    }

    pub fn label(&self) -> ClassLabel {
        ClassLabel {
            category: self.category,
            attack_name: self.record.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub records: Vec<LabeledRecord>,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(records: Vec<LabeledRecord>, provenance: impl Into<String>) -> Self {
        Self {
            records,
            provenance: provenance.into(),
        }
    }

    /// Maps every raw record's label through `map`.
    pub fn from_raw(
        raw: Vec<RawRecord>,
        map: &CategoryMap,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let records = raw
            .into_iter()
            .map(|record| {
                let label = map.map_label(&record.label)?;
                Ok(LabeledRecord {
                    category: label.category,
                    record,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(records, provenance))
    }

    pub fn load(
        path: &Path,
        schema: &Schema,
        map: &CategoryMap,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let raw = read_records(path, schema)?;
        Self::from_raw(raw, map, provenance)
    }

    /// Writes the records back out in KDD line format.
    pub fn write(&self, path: &Path, schema: &Schema) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for r in &self.records {
            writeln!(w, "{}", r.record.to_line(schema)).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn raw_records(&self) -> Vec<RawRecord> {
        self.records.iter().map(|r| r.record.clone()).collect()
    }
}

/// The 13 ordered groups of known attack names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterTable {
    clusters: Vec<Vec<String>>,
}

impl ClusterTable {
    /// Validates: exactly 13 non-empty lists, pairwise disjoint.
    pub fn new(clusters: Vec<Vec<String>>) -> Result<Self> {
        if clusters.len() != CLUSTER_COUNT {
            return Err(Error::InvalidClusterTable(format!(
                "expected {CLUSTER_COUNT} clusters, found {}",
                clusters.len()
            )));
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, names) in clusters.iter().enumerate() {
            if names.is_empty() {
                return Err(Error::InvalidClusterTable(format!("C{} is empty", i + 1)));
            }
            for n in names {
                if n == "normal" {
                    return Err(Error::InvalidClusterTable(format!(
                        "C{} contains \"normal\"",
                        i + 1
                    )));
                }
                if let Some(prev) = seen.insert(n, i) {
                    return Err(Error::InvalidClusterTable(format!(
                        "{n:?} appears in C{} and C{}",
                        prev + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { clusters })
    }

    /// The grouping shipped with the crate.
    pub fn kdd() -> Self {
        Self::parse(BUILTIN_CLUSTERS).expect("built-in cluster table is valid")
    }

    /// Parses lines of the form `C<i>: name[,name...]`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut slots: Vec<Option<Vec<String>>> = vec![None; CLUSTER_COUNT];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::InvalidClusterTable(format!("line {}: {msg}", lineno + 1));
            let (head, body) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let idx: usize = head
                .trim()
                .strip_prefix(['C', 'c'])
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("expected C<index>"))?;
            if !(1..=CLUSTER_COUNT).contains(&idx) {
                return Err(bad("cluster index out of range"));
            }
            if slots[idx - 1].is_some() {
                return Err(bad("duplicate cluster index"));
            }
            let names: Vec<String> = body
                .split(',')
                .map(|s| s.trim().trim_end_matches('.').to_string())
                .filter(|s| !s.is_empty())
                .collect();
            slots[idx - 1] = Some(names);
        }
        let clusters = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::InvalidClusterTable(format!("C{} missing", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(clusters)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.clusters.iter().flatten().map(String::as_str)
    }

    /// Zero-based cluster index containing `attack_name`.
    pub fn cluster_of(&self, attack_name: &str) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.iter().any(|n| n == attack_name))
    }
}

/// Keeps exactly the records labeled `normal`, in order.
pub fn filter_normal(ds: &LabeledDataset) -> LabeledDataset {
    LabeledDataset::new(
        ds.records
            .iter()
            .filter(|r| r.attack_name() == "normal")
            .cloned()
            .collect(),
        "Norm",
    )
}

/// Splits the attack records of `ds` into the 13 clusters of `table`.
pub fn build_clusters(ds: &LabeledDataset, table: &ClusterTable) -> Result<Vec<LabeledDataset>> {
    let mut out: Vec<LabeledDataset> = (1..=CLUSTER_COUNT)
        .map(|i| LabeledDataset::new(Vec::new(), format!("C{i}")))
        .collect();
    let mut lookup: HashMap<&str, usize> = HashMap::new();
    for (i, names) in table.clusters().iter().enumerate() {
        for n in names {
            lookup.insert(n, i);
        }
    }
    for r in &ds.records {
        if r.attack_name() == "normal" {
            continue;
        }
        let idx = *lookup
            .get(r.attack_name())
            .ok_or_else(|| Error::UncoveredAttackName(r.attack_name().to_string()))?;
        out[idx].records.push(r.clone());
    }
    Ok(out)
}

/// `D_k`: `norm` followed by clusters `1..=k` in index order.
pub fn build_incremental(
    norm: &LabeledDataset,
    clusters: &[LabeledDataset],
    k: usize,
) -> Result<LabeledDataset> {
    if k == 0 || k > clusters.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            max: clusters.len(),
        });
    }
    let total = norm.len() + clusters[..k].iter().map(LabeledDataset::len).sum::<usize>();
    let mut records = Vec::with_capacity(total);
    records.extend_from_slice(&norm.records);
    for c in &clusters[..k] {
        records.extend_from_slice(&c.records);
    }
    Ok(LabeledDataset::new(records, format!("D{k}")))
}

/// Per-category record counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Summary {
    #[serde(rename = "Normal")]
    pub normal: usize,
    #[serde(rename = "Probe")]
    pub probe: usize,
    #[serde(rename = "DoS")]
    pub dos: usize,
    #[serde(rename = "U2R")]
    pub u2r: usize,
    #[serde(rename = "R2L")]
    pub r2l: usize,
    pub total_attack: usize,
    pub total_normal: usize,
}

impl Summary {
    pub fn count(&self, c: Category) -> usize {
        match c {
            Category::Normal => self.normal,
            Category::Probe => self.probe,
            Category::DoS => self.dos,
            Category::U2R => self.u2r,
            Category::R2L => self.r2l,
        }
    }

    fn slot(&mut self, c: Category) -> &mut usize {
        match c {
            Category::Normal => &mut self.normal,
            Category::Probe => &mut self.probe,
            Category::DoS => &mut self.dos,
            Category::U2R => &mut self.u2r,
            Category::R2L => &mut self.r2l,
        }
    }

    pub fn total(&self) -> usize {
        self.total_attack + self.total_normal
    }
}

pub fn summarize(ds: &LabeledDataset) -> Summary {
    let mut s = Summary::default();
    for r in &ds.records {
        *s.slot(r.category) += 1;
    }
    s.total_normal = s.normal;
    s.total_attack = s.probe + s.dos + s.u2r + s.r2l;
    s
}

/// Aligned text table of several named summaries (one row each).
pub fn summary_table(rows: &[(String, Summary)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(7).max(7);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12}",
        "Dataset", "DoS", "Probe", "U2R", "R2L", "TotalAttack", "TotalNormal"
    );
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{:<width$} {:>10} {:>10} {:>10} {:>10} {:>12} {:>12}",
            name, s.dos, s.probe, s.u2r, s.r2l, s.total_attack, s.total_normal
        );
    }
    out
}

/// Per-category sample caps; `None` keeps the whole category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Caps(pub [Option<usize>; Category::COUNT]);

impl Caps {
    pub fn unlimited() -> Self {
        Self([None; Category::COUNT])
    }

    pub fn uniform(cap: usize) -> Self {
        Self([Some(cap); Category::COUNT])
    }

    pub fn set(&mut self, c: Category, cap: Option<usize>) {
        self.0[c.index()] = cap;
    }

    pub fn get(&self, c: Category) -> Option<usize> {
        self.0[c.index()]
    }
}

/// Stratified uniform sample without replacement. Selected records keep
/// their original relative order.
pub fn subsample(ds: &LabeledDataset, caps: &Caps, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_cat: Vec<Vec<usize>> = vec![Vec::new(); Category::COUNT];
    for (i, r) in ds.records.iter().enumerate() {
        by_cat[r.category.index()].push(i);
    }
    let mut keep = Vec::new();
    for c in Category::ALL {
        let members = &by_cat[c.index()];
        match caps.get(c) {
            Some(cap) if cap < members.len() => {
                keep.extend(index::sample(&mut rng, members.len(), cap).into_iter().map(|j| members[j]));
            }
            _ => keep.extend_from_slice(members),
        }
    }
    keep.sort_unstable();
    LabeledDataset::new(
        keep.into_iter().map(|i| ds.records[i].clone()).collect(),
        ds.provenance.clone(),
    )
}

/// Deterministic global shuffle.
pub fn shuffle<R>(records: &mut [R], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.shuffle(&mut rng);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str) -> LabeledRecord {
        let map = CategoryMap::kdd();
        LabeledRecord {
            record: RawRecord {
                numeric: vec![],
                symbols: vec![],
                label: name.into(),
            },
            category: map.map_label(name).unwrap().category,
        }
    }

    fn ds(names: &[&str]) -> LabeledDataset {
        LabeledDataset::new(names.iter().map(|n| rec(n)).collect(), "test")
    }

    #[test]
    fn builtin_table_matches_printed_grouping() {
        let t = ClusterTable::kdd();
        assert_eq!(t.clusters()[0], vec!["back"]);
        assert_eq!(
            t.clusters()[1],
            vec!["buffer_overflow", "loadmodule", "perl", "rootkit"]
        );
        assert_eq!(t.clusters()[3], vec!["guess_passwd"]);
        assert_eq!(t.clusters()[12], vec!["spy", "smurf"]);
        assert_eq!(t.names().count(), 22);
        let map = CategoryMap::kdd();
        assert!(t.names().all(|n| map.map_label(n).unwrap().category.is_attack()));
    }

    #[test]
    fn table_validation() {
        let mut lines: Vec<String> = (1..=13).map(|i| format!("C{i}: a{i}")).collect();
        assert!(ClusterTable::parse(&lines.join("\n")).is_ok());
        lines[12] = "C13: a1".into();
        assert!(matches!(
            ClusterTable::parse(&lines.join("\n")),
            Err(Error::InvalidClusterTable(_))
        ));
        lines.pop();
        assert!(ClusterTable::parse(&lines.join("\n")).is_err());
        assert!(ClusterTable::parse("C1 back").is_err());
    }

    #[test]
    fn filter_normal_cases() {
        let d = ds(&["normal", "smurf", "normal", "back"]);
        let n = filter_normal(&d);
        assert_eq!(n.len(), 2);
        assert!(n.records.iter().all(|r| r.attack_name() == "normal"));
        assert!(filter_normal(&ds(&["smurf", "back"])).is_empty());
        let all = ds(&["normal", "normal"]);
        assert_eq!(filter_normal(&all).records, all.records);
    }

    #[test]
    fn clusters_and_incremental_sets() {
        let d = ds(&["normal", "back", "smurf", "guess_passwd", "back", "spy", "normal"]);
        let c = build_clusters(&d, &ClusterTable::kdd()).unwrap();
        assert_eq!(c[0].len(), 2);
        assert!(c[0].records.iter().all(|r| r.attack_name() == "back"));
        assert_eq!(c[3].len(), 1);
        assert_eq!(c[12].len(), 2);
        assert_eq!(c.iter().map(LabeledDataset::len).sum::<usize>(), 5);

        let norm = filter_normal(&d);
        let d1 = build_incremental(&norm, &c, 1).unwrap();
        assert_eq!(d1.len(), 4);
        assert_eq!(&d1.records[..2], &norm.records[..]);
        let d13 = build_incremental(&norm, &c, 13).unwrap();
        assert_eq!(d13.len(), 7);
        assert_eq!(summarize(&d13).total_normal, 2);
        assert!(matches!(
            build_incremental(&norm, &c, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(build_incremental(&norm, &c, 14).is_err());
    }

    #[test]
    fn uncovered_attack_is_rejected() {
        let d = ds(&["normal", "mscan"]);
        assert!(matches!(
            build_clusters(&d, &ClusterTable::kdd()),
            Err(Error::UncoveredAttackName(n)) if n == "mscan"
        ));
    }

    #[test]
    fn summarize_counts() {
        assert_eq!(summarize(&LabeledDataset::default()), Summary::default());
        let s = summarize(&ds(&["normal", "smurf", "ipsweep", "perl", "imap", "back"]));
        assert_eq!((s.normal, s.probe, s.dos, s.u2r, s.r2l), (1, 1, 2, 1, 1));
        assert_eq!(s.total_attack, 5);
        let table = summary_table(&[("x".into(), s)]);
        assert!(table.lines().nth(1).unwrap().starts_with("x"));
    }

    #[test]
    fn subsample_contracts() {
        let names: Vec<&str> = (0..50)
            .map(|i| ["normal", "smurf", "ipsweep", "perl", "imap"][i % 5])
            .collect();
        let d = ds(&names);
        assert!(subsample(&d, &Caps::uniform(0), 1).is_empty());
        assert_eq!(subsample(&d, &Caps::uniform(10), 1).records, d.records);
        assert_eq!(subsample(&d, &Caps::unlimited(), 1).records, d.records);
        let mut caps = Caps::unlimited();
        caps.set(Category::Normal, Some(3));
        let a = subsample(&d, &caps, 42);
        let b = subsample(&d, &caps, 42);
        assert_eq!(a, b);
        assert_eq!(summarize(&a).normal, 3);
        assert_eq!(summarize(&a).dos, 10);
    }
}
