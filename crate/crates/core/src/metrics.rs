//! Confusion matrices, per-class detection / false-alarm rates and the
//! cost-weighted average misclassification cost.

use std::fmt::Write as _;
use std::path::Path;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN_COST: &str = include_str!("../data/kdd_cost_matrix.csv");
const BUILTIN_MISUSE_REFERENCE: &str = include_str!("../data/reference_misuse.json");
const BUILTIN_ANOMALY_REFERENCE: &str = include_str!("../data/reference_anomaly.json");

/// `counts[i][j]`: instances of true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        Self {
            class_names,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(class_names: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = class_names.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                confusion: counts.len(),
                cost: k,
            });
        }
        Ok(Self { class_names, counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.correct() as f64 / n as f64)
    }

    /// `counts[k][k] / row_total(k)`.
    pub fn detection_rate(&self, k: usize) -> Result<f64> {
        self.check_class(k)?;
        let row = self.row_total(k);
        if row == 0 {
            return Err(Error::EmptyClass(k));
        }
        Ok(self.counts[k][k] as f64 / row as f64)
    }

    /// Fraction of instances outside class `k` that were predicted as `k`.
    pub fn false_alarm_rate(&self, k: usize) -> Result<f64> {
        self.check_class(k)?;
        let others: u64 = (0..self.classes()).filter(|&i| i != k).map(|i| self.row_total(i)).sum();
        if others == 0 {
            return Err(Error::EmptyComplement(k));
        }
        let hits: u64 = (0..self.classes()).filter(|&i| i != k).map(|i| self.counts[i][k]).sum();
        Ok(hits as f64 / others as f64)
    }

    fn check_class(&self, k: usize) -> Result<()> {
        if k >= self.classes() {
            return Err(Error::ClassIndexOutOfRange {
                index: k,
                classes: self.classes(),
            });
        }
        Ok(())
    }
}

/// Counts `(truth, prediction)` pairs.
pub fn confusion(preds: &[usize], truths: &[usize], class_names: Vec<String>) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    let k = class_names.len();
    let mut cm = ConfusionMatrix::zeros(class_names);
    for (&p, &t) in preds.iter().zip(truths) {
        for idx in [p, t] {
            if idx >= k {
                return Err(Error::ClassIndexOutOfRange { index: idx, classes: k });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

/// Generic class names `"0".."K-1"`.
pub fn index_names(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// Misclassification costs, `costs[i][j]` for true `i` predicted `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix<T> {
    pub class_names: Vec<String>,
    pub costs: Vec<Vec<T>>,
}

impl<T: Num + Copy + PartialEq> CostMatrix<T> {
    /// Requires a square matrix with a zero diagonal.
    pub fn new(class_names: Vec<String>, costs: Vec<Vec<T>>) -> Result<Self> {
        let m = Self::new_unchecked(class_names, costs)?;
        if let Some(k) = (0..m.costs.len()).find(|&k| m.costs[k][k] != T::zero()) {
            return Err(Error::InvalidCostMatrix(format!(
                "diagonal entry ({k}, {k}) is non-zero"
            )));
        }
        Ok(m)
    }

    /// Like [`new`](Self::new) but tolerates a non-zero diagonal.
    pub fn new_unchecked(class_names: Vec<String>, costs: Vec<Vec<T>>) -> Result<Self> {
        let k = class_names.len();
        if k == 0 || costs.len() != k || costs.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidCostMatrix(format!(
                "expected {k}x{k} costs"
            )));
        }
        Ok(Self { class_names, costs })
    }

    /// 0 on the diagonal, 1 elsewhere.
    pub fn zero_one(class_names: Vec<String>) -> Self {
        let k = class_names.len();
        let costs = (0..k)
            .map(|i| (0..k).map(|j| if i == j { T::zero() } else { T::one() }).collect())
            .collect();
        Self { class_names, costs }
    }

    pub fn classes(&self) -> usize {
        self.costs.len()
    }
}

impl CostMatrix<f64> {
    /// KDD-99 contest cost matrix shipped with the crate.
    pub fn kdd() -> Self {
        Self::parse(BUILTIN_COST, false).expect("built-in cost matrix is valid")
    }

    /// Parses a header line of class names followed by one comma-separated
    /// row per class. `#` lines are comments.
    pub fn parse(text: &str, allow_nonzero_diagonal: bool) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidCostMatrix("missing header".into()))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut costs = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::InvalidCostMatrix(format!("row {}: bad value {v:?}", i + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            costs.push(row);
        }
        let m = Self::new_unchecked(names, costs)?;
        if let Some(k) = (0..m.classes()).find(|&k| m.costs[k][k] != 0.0) {
            if allow_nonzero_diagonal {
                log::warn!("cost matrix diagonal entry ({k}, {k}) is non-zero");
            } else {
                return Err(Error::InvalidCostMatrix(format!(
                    "diagonal entry ({k}, {k}) is non-zero"
                )));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path, allow_nonzero_diagonal: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, allow_nonzero_diagonal)
    }
}

/// `(1/N) sum_ij counts[i][j] * costs[i][j]`, computed in `T`.
pub fn average_cost<T>(cm: &ConfusionMatrix, cost: &CostMatrix<T>) -> Result<T>
where
    T: Num + Copy + FromPrimitive,
{
    if cm.classes() != cost.classes() {
        return Err(Error::DimensionMismatch {
            confusion: cm.classes(),
            cost: cost.classes(),
        });
    }
    let n = cm.total();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let to_t = |v: u64| T::from_u64(v).ok_or_else(|| Error::InvalidCostMatrix("count overflow".into()));
    let mut sum = T::zero();
    for (row, costs) in cm.counts.iter().zip(&cost.costs) {
        for (&c, &w) in row.iter().zip(costs) {
            sum = sum + to_t(c)? * w;
        }
    }
    Ok(sum / to_t(n)?)
}

/// A published result row used for side-by-side comparison (percentages).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub name: String,
    pub dr: Vec<Option<f64>>,
    pub far: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub class_names: Vec<String>,
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTable {
    pub fn kdd_misuse() -> Self {
        serde_json::from_str(BUILTIN_MISUSE_REFERENCE).expect("built-in reference table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReference {
    pub name: String,
    pub dr: f64,
    pub far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReferenceTable {
    pub rows: Vec<AnomalyReference>,
}

impl AnomalyReferenceTable {
    pub fn kdd() -> Self {
        serde_json::from_str(BUILTIN_ANOMALY_REFERENCE).expect("built-in reference table is valid")
    }
}

/// Per-class DR/FAR plus average cost; `None` marks an undefined rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisuseReport {
    pub class_names: Vec<String>,
    pub detection_rate: Vec<Option<f64>>,
    pub false_alarm_rate: Vec<Option<f64>>,
    pub average_cost: f64,
    pub accuracy: f64,
    pub instances: u64,
    pub confusion: ConfusionMatrix,
    #[serde(default)]
    pub reference: Vec<ReferenceRow>,
}

pub fn misuse_report(
    cm: &ConfusionMatrix,
    cost: &CostMatrix<f64>,
    reference: Option<&ReferenceTable>,
) -> Result<MisuseReport> {
    let k = cm.classes();
    Ok(MisuseReport {
        class_names: cm.class_names.clone(),
        detection_rate: (0..k).map(|i| cm.detection_rate(i).ok()).collect(),
        false_alarm_rate: (0..k).map(|i| cm.false_alarm_rate(i).ok()).collect(),
        average_cost: average_cost(cm, cost)?,
        accuracy: cm.accuracy().unwrap_or(0.0),
        instances: cm.total(),
        confusion: cm.clone(),
        reference: reference.map(|r| r.rows.clone()).unwrap_or_default(),
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", v * 100.0))
}

fn ref_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl MisuseReport {
    /// Aligned text rendering: one DR and one FAR line per system.
    pub fn to_text(&self) -> String {
        let name_w = self
            .reference
            .iter()
            .map(|r| r.name.len())
            .chain(std::iter::once("this run".len()))
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        let _ = write!(out, "{:<name_w$} {:>6}", "", "");
        for n in &self.class_names {
            let _ = write!(out, " {n:>8}");
        }
        out.push('\n');
        let mut row = |name: &str, metric: &str, cells: Vec<String>| {
            let _ = write!(out, "{name:<name_w$} {metric:>6}");
            for c in cells {
                let _ = write!(out, " {c:>8}");
            }
            out.push('\n');
        };
        for r in &self.reference {
            row(&r.name, "DR", r.dr.iter().map(|v| ref_pct(*v)).collect());
            row("", "FAR", r.far.iter().map(|v| ref_pct(*v)).collect());
        }
        row("this run", "DR", self.detection_rate.iter().map(|v| pct(*v)).collect());
        row("", "FAR", self.false_alarm_rate.iter().map(|v| pct(*v)).collect());
        let _ = writeln!(out, "average cost: {:.4}", self.average_cost);
        let _ = writeln!(out, "accuracy: {:.4}  instances: {}", self.accuracy, self.instances);
        out.push_str("confusion (rows: true, columns: predicted)\n");
        for (name, counts) in self.class_names.iter().zip(&self.confusion.counts) {
            let _ = write!(out, "{name:>8}");
            for c in counts {
                let _ = write!(out, " {c:>9}");
            }
            out.push('\n');
        }
        out
    }
}

/// Binary anomaly-detection result: attacks flagged and normals flagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub detection_rate: Option<f64>,
    pub false_alarm_rate: Option<f64>,
    pub attacks: u64,
    pub normals: u64,
    pub attacks_flagged: u64,
    pub normals_flagged: u64,
    pub quantile: Option<f64>,
    #[serde(default)]
    pub reference: Vec<AnomalyReference>,
}

impl AnomalyReport {
    /// `flags[i]` is true when example `i` was flagged; `is_attack[i]` is its truth.
    pub fn from_flags(flags: &[bool], is_attack: &[bool], quantile: Option<f64>) -> Result<Self> {
        if flags.len() != is_attack.len() {
            return Err(Error::LengthMismatch {
                left: flags.len(),
                right: is_attack.len(),
            });
        }
        let mut r = AnomalyReport {
            detection_rate: None,
            false_alarm_rate: None,
            attacks: 0,
            normals: 0,
            attacks_flagged: 0,
            normals_flagged: 0,
            quantile,
            reference: Vec::new(),
        };
        for (&f, &a) in flags.iter().zip(is_attack) {
            if a {
                r.attacks += 1;
                r.attacks_flagged += f as u64;
            } else {
                r.normals += 1;
                r.normals_flagged += f as u64;
            }
        }
        r.detection_rate = (r.attacks > 0).then(|| r.attacks_flagged as f64 / r.attacks as f64);
        r.false_alarm_rate = (r.normals > 0).then(|| r.normals_flagged as f64 / r.normals as f64);
        Ok(r)
    }

    pub fn with_reference(mut self, table: &AnomalyReferenceTable) -> Self {
        self.reference = table.rows.clone();
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8} {:>8}", "", "DR", "FAR");
        for r in &self.reference {
            let _ = writeln!(out, "{:<16} {:>8.2} {:>8.2}", r.name, r.dr, r.far);
        }
        let _ = writeln!(
            out,
            "{:<16} {:>8} {:>8}",
            "this run",
            pct(self.detection_rate),
            pct(self.false_alarm_rate)
        );
        let _ = writeln!(
            out,
            "attacks {}/{} flagged, normals {}/{} flagged",
            self.attacks_flagged, self.attacks, self.normals_flagged, self.normals
        );
        out
    }
}
