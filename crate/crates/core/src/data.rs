//! Prediction ingest and the count tables every test is built from.
//!
//! A [`LongTable`] holds one prediction per (observation, classifier) and is
//! always a balanced panel: each classifier carries the same observation
//! keys. Keys are `(id, fold, rep)`; fold and rep default to 1 so fixed
//! splits and cross-validation share one path.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation key within a (possibly stacked) table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObsKey {
    pub id: String,
    pub fold: u32,
    pub rep: u32,
}

impl ObsKey {
    pub fn new(id: impl Into<String>, fold: u32, rep: u32) -> Self {
        ObsKey {
            id: id.into(),
            fold,
            rep,
        }
    }
}

impl fmt::Display for ObsKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(id={}, fold={}, rep={})", self.id, self.fold, self.rep)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub id: String,
    pub truth: String,
    pub classifier: String,
    pub predicted: String,
    pub fold: u32,
    pub rep: u32,
}

impl PredictionRecord {
    pub fn key(&self) -> ObsKey {
        ObsKey::new(self.id.clone(), self.fold, self.rep)
    }
}

/// Balanced panel of predictions.
///
/// Stored column-wise: one truth label per key and one prediction column per
/// classifier, all aligned with `keys`.
#[derive(Debug, Clone, PartialEq)]
pub struct LongTable {
    keys: Vec<ObsKey>,
    labels: Vec<String>,
    classifiers: Vec<String>,
    truth: Vec<u32>,
    predictions: Vec<Vec<u32>>,
    dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvFormat {
    /// `id,truth,<classifier>...`
    Wide,
    /// `id,truth,classifier,predicted[,fold,rep]`
    Long,
}

impl std::str::FromStr for CsvFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wide" => Ok(CsvFormat::Wide),
            "long" => Ok(CsvFormat::Long),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

impl LongTable {
    /// Builds a table from records, enforcing key uniqueness, consistent
    /// truth per key and a balanced panel.
    pub fn from_records(records: Vec<PredictionRecord>) -> Result<Self> {
        Self::from_records_with_dropped(records, 0)
    }

    fn from_records_with_dropped(records: Vec<PredictionRecord>, dropped: usize) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut classifiers: Vec<String> = Vec::new();
        let mut clf_index: HashMap<String, usize> = HashMap::new();
        let mut keys: Vec<ObsKey> = Vec::new();
        let mut key_index: HashMap<ObsKey, usize> = HashMap::new();
        let mut label_set: BTreeSet<String> = BTreeSet::new();
        let mut truth_of_key: Vec<String> = Vec::new();
        let mut cells: Vec<Vec<Option<String>>> = Vec::new();

        for rec in records {
            let ci = *clf_index.entry(rec.classifier.clone()).or_insert_with(|| {
                classifiers.push(rec.classifier.clone());
                cells.push(vec![None; keys.len()]);
                classifiers.len() - 1
            });
            let key = rec.key();
            let ki = match key_index.get(&key) {
                Some(&ki) => {
                    if truth_of_key[ki] != rec.truth {
                        return Err(Error::Malformed(format!(
                            "conflicting truth labels {:?} and {:?} for {key}",
                            truth_of_key[ki], rec.truth
                        )));
                    }
                    ki
                }
                None => {
                    keys.push(key.clone());
                    key_index.insert(key.clone(), keys.len() - 1);
                    truth_of_key.push(rec.truth.clone());
                    for col in cells.iter_mut() {
                        col.push(None);
                    }
                    keys.len() - 1
                }
            };
            if cells[ci][ki].is_some() {
                return Err(Error::DuplicateKey {
                    classifier: rec.classifier,
                    key: key.to_string(),
                });
            }
            label_set.insert(rec.truth.clone());
            label_set.insert(rec.predicted.clone());
            cells[ci][ki] = Some(rec.predicted);
        }

        let labels: Vec<String> = label_set.into_iter().collect();
        let label_idx: HashMap<&str, u32> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();

        let mut predictions = Vec::with_capacity(classifiers.len());
        for (ci, col) in cells.into_iter().enumerate() {
            let mut out = Vec::with_capacity(keys.len());
            for (ki, cell) in col.into_iter().enumerate() {
                match cell {
                    Some(p) => out.push(label_idx[p.as_str()]),
                    None => {
                        return Err(Error::UnbalancedPanel {
                            classifier: classifiers[ci].clone(),
                            key: keys[ki].to_string(),
                        })
                    }
                }
            }
            predictions.push(out);
        }
        let truth = truth_of_key
            .iter()
            .map(|t| label_idx[t.as_str()])
            .collect();

        Ok(LongTable {
            keys,
            labels,
            classifiers,
            truth,
            predictions,
            dropped,
        })
    }

    pub fn classifiers(&self) -> &[String] {
        &self.classifiers
    }

    /// Distinct labels observed in truth or predictions, sorted.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn keys(&self) -> &[ObsKey] {
        &self.keys
    }

    pub fn n_keys(&self) -> usize {
        self.keys.len()
    }

    /// Number of records, `classifiers × keys`.
    pub fn len(&self) -> usize {
        self.keys.len() * self.classifiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Observation keys dropped at ingest because of a blank prediction.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn classifier_index(&self, name: &str) -> Result<usize> {
        self.classifiers
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClassifier(name.to_string()))
    }

    fn label_index(&self, label: &str) -> Option<u32> {
        self.labels.iter().position(|l| l == label).map(|i| i as u32)
    }

    pub fn truth_of(&self, key: usize) -> &str {
        &self.labels[self.truth[key] as usize]
    }

    pub fn prediction_of(&self, classifier: usize, key: usize) -> &str {
        &self.labels[self.predictions[classifier][key] as usize]
    }

    /// Records in stacking order: classifier-major, keys in table order.
    pub fn records(&self) -> impl Iterator<Item = PredictionRecord> + '_ {
        self.classifiers.iter().enumerate().flat_map(move |(ci, clf)| {
            self.keys.iter().enumerate().map(move |(ki, key)| PredictionRecord {
                id: key.id.clone(),
                truth: self.truth_of(ki).to_string(),
                classifier: clf.clone(),
                predicted: self.prediction_of(ci, ki).to_string(),
                fold: key.fold,
                rep: key.rep,
            })
        })
    }

    /// Table restricted to the given key positions (with repetition), used
    /// by resampling. Repeated keys get a `#k` suffix on the id so they stay
    /// unique while remaining in the same observation cluster via
    /// [`LongTable::cluster_of`].
    pub fn resampled(&self, picks: &[usize]) -> LongTable {
        let mut seen: HashMap<usize, u32> = HashMap::new();
        let keys = picks
            .iter()
            .map(|&k| {
                let count = seen.entry(k).or_insert(0);
                *count += 1;
                let mut key = self.keys[k].clone();
                if *count > 1 {
                    key.id = format!("{}#{}", key.id, count);
                }
                key
            })
            .collect();
        LongTable {
            keys,
            labels: self.labels.clone(),
            classifiers: self.classifiers.clone(),
            truth: picks.iter().map(|&k| self.truth[k]).collect(),
            predictions: self
                .predictions
                .iter()
                .map(|col| picks.iter().map(|&k| col[k]).collect())
                .collect(),
            dropped: 0,
        }
    }
}

fn field(rec: &csv::StringRecord, idx: Option<usize>) -> &str {
    idx.and_then(|i| rec.get(i)).map(str::trim).unwrap_or("")
}

fn parse_index(raw: &str, what: &str, line: u64) -> Result<u32> {
    if raw.is_empty() {
        return Ok(1);
    }
    match raw.parse::<u32>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::Malformed(format!(
            "line {line}: {what} must be an integer >= 1, got {raw:?}"
        ))),
    }
}

/// Reads predictions from CSV. Blank predictions drop the whole observation
/// key across every classifier; the count is available via
/// [`LongTable::dropped`].
pub fn ingest_csv<R: Read>(reader: R, format: CsvFormat) -> Result<LongTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);

    let truth_col = col("truth").ok_or_else(|| Error::Malformed("missing column \"truth\"".into()))?;
    let id_col = col("id");
    let fold_col = col("fold");
    let rep_col = col("rep");

    let mut records = Vec::new();
    let mut blank_keys: BTreeSet<ObsKey> = BTreeSet::new();

    match format {
        CsvFormat::Long => {
            let id_col = id_col.ok_or_else(|| Error::Malformed("missing column \"id\"".into()))?;
            let clf_col = col("classifier")
                .ok_or_else(|| Error::Malformed("missing column \"classifier\"".into()))?;
            let pred_col = col("predicted")
                .ok_or_else(|| Error::Malformed("missing column \"predicted\"".into()))?;
            for row in rdr.records() {
                let row = row?;
                let line = row.position().map(|p| p.line()).unwrap_or(0);
                let id = field(&row, Some(id_col));
                let truth = field(&row, Some(truth_col));
                let clf = field(&row, Some(clf_col));
                if id.is_empty() || truth.is_empty() || clf.is_empty() {
                    return Err(Error::Malformed(format!(
                        "line {line}: id, truth and classifier must be non-empty"
                    )));
                }
                let fold = parse_index(field(&row, fold_col), "fold", line)?;
                let rep = parse_index(field(&row, rep_col), "rep", line)?;
                let predicted = field(&row, Some(pred_col));
                if predicted.is_empty() {
                    blank_keys.insert(ObsKey::new(id, fold, rep));
                }
                records.push(PredictionRecord {
                    id: id.to_string(),
                    truth: truth.to_string(),
                    classifier: clf.to_string(),
                    predicted: predicted.to_string(),
                    fold,
                    rep,
                });
            }
        }
        CsvFormat::Wide => {
            let reserved = ["id", "truth", "fold", "rep"];
            let clf_cols: Vec<(usize, String)> = headers
                .iter()
                .enumerate()
                .filter(|(_, h)| !reserved.contains(&h.as_str()))
                .map(|(i, h)| (i, h.clone()))
                .collect();
            if clf_cols.is_empty() {
                return Err(Error::Malformed("wide format needs at least one classifier column".into()));
            }
            if let Some(dup) = clf_cols
                .iter()
                .enumerate()
                .find(|(i, (_, h))| clf_cols[..*i].iter().any(|(_, o)| o == h))
            {
                return Err(Error::Malformed(format!("duplicate classifier column {:?}", dup.1 .1)));
            }
            for (row_no, row) in rdr.records().enumerate() {
                let row = row?;
                let line = row.position().map(|p| p.line()).unwrap_or(0);
                let id = match id_col {
                    Some(_) => field(&row, id_col).to_string(),
                    None => (row_no + 1).to_string(),
                };
                let truth = field(&row, Some(truth_col));
                if id.is_empty() || truth.is_empty() {
                    return Err(Error::Malformed(format!("line {line}: id and truth must be non-empty")));
                }
                let fold = parse_index(field(&row, fold_col), "fold", line)?;
                let rep = parse_index(field(&row, rep_col), "rep", line)?;
                for (ci, name) in &clf_cols {
                    let predicted = field(&row, Some(*ci));
                    if predicted.is_empty() {
                        blank_keys.insert(ObsKey::new(id.clone(), fold, rep));
                    }
                    records.push(PredictionRecord {
                        id: id.clone(),
                        truth: truth.to_string(),
                        classifier: name.clone(),
                        predicted: predicted.to_string(),
                        fold,
                        rep,
                    });
                }
            }
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !blank_keys.is_empty() {
        records.retain(|r| !blank_keys.contains(&r.key()));
    }
    LongTable::from_records_with_dropped(records, blank_keys.len())
}

pub fn ingest_path(path: impl AsRef<Path>, format: CsvFormat) -> Result<LongTable> {
    let file = std::fs::File::open(path)?;
    ingest_csv(std::io::BufReader::new(file), format)
}

/// Stacks per-fold tables vertically. Classifier sets must match (order may
/// differ) and keys must not collide.
pub fn stack_folds(tables: &[LongTable]) -> Result<LongTable> {
    let first = tables.first().ok_or(Error::EmptyInput)?;
    if tables.len() == 1 {
        return Ok(first.clone());
    }
    let reference: BTreeSet<&String> = first.classifiers.iter().collect();
    let mut records = Vec::new();
    let mut dropped = 0;
    let mut seen: HashMap<ObsKey, ()> = HashMap::new();
    for t in tables {
        let set: BTreeSet<&String> = t.classifiers.iter().collect();
        if set != reference {
            return Err(Error::ClassifierMismatch(
                first.classifiers.clone(),
                t.classifiers.clone(),
            ));
        }
        for key in &t.keys {
            if seen.insert(key.clone(), ()).is_some() {
                return Err(Error::DuplicateKey {
                    classifier: "*".into(),
                    key: key.to_string(),
                });
            }
        }
        dropped += t.dropped;
    }
    for clf in &first.classifiers {
        for t in tables {
            let ci = t.classifier_index(clf)?;
            for ki in 0..t.keys.len() {
                let key = &t.keys[ki];
                records.push(PredictionRecord {
                    id: key.id.clone(),
                    truth: t.truth_of(ki).to_string(),
                    classifier: clf.clone(),
                    predicted: t.prediction_of(ci, ki).to_string(),
                    fold: key.fold,
                    rep: key.rep,
                });
            }
        }
    }
    LongTable::from_records_with_dropped(records, dropped)
}

/// One row of the binary analysis set for a class: a prediction of that
/// class by some classifier, with `outcome` = truth equals the class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetRow {
    /// Position of the observation key in the source table.
    pub key: usize,
    /// Observation cluster (distinct `id`), the GEE grouping unit.
    pub cluster: usize,
    pub classifier: usize,
    pub outcome: bool,
}

/// Rows of a [`LongTable`] whose prediction equals one class.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySubset {
    pub class_label: String,
    pub classifiers: Vec<String>,
    pub rows: Vec<SubsetRow>,
    pub n_clusters: usize,
}

/// Tallies a classifier's predicted positives and correct ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PositiveTally {
    pub predicted: u64,
    pub correct: u64,
}

impl BinarySubset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classifier_index(&self, name: &str) -> Result<usize> {
        self.classifiers
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownClassifier(name.to_string()))
    }

    pub fn tally(&self, classifier: usize) -> PositiveTally {
        self.rows
            .iter()
            .filter(|r| r.classifier == classifier)
            .fold(PositiveTally::default(), |mut t, r| {
                t.predicted += 1;
                t.correct += u64::from(r.outcome);
                t
            })
    }

    /// Predicted-positive cells of the paired table for two classifiers:
    /// `(n1, n2, n3, n5, n6, n7)`. The negative-prediction cells are not
    /// visible in a subset.
    pub fn paired_positive_cells(&self, first: usize, second: usize) -> [u64; 6] {
        let mut by_key: HashMap<usize, (Option<bool>, Option<bool>)> = HashMap::new();
        for r in &self.rows {
            if r.classifier == first {
                by_key.entry(r.key).or_default().0 = Some(r.outcome);
            } else if r.classifier == second {
                by_key.entry(r.key).or_default().1 = Some(r.outcome);
            }
        }
        let mut cells = [0u64; 6];
        for (a, b) in by_key.values() {
            let idx = match (a, b) {
                (Some(false), Some(false)) => 0,
                (Some(false), None) => 1,
                (None, Some(false)) => 2,
                (Some(true), Some(true)) => 3,
                (Some(true), None) => 4,
                (None, Some(true)) => 5,
                // both predicted the class on one key, so truth is shared
                (Some(_), Some(_)) => unreachable!("shared truth cannot disagree"),
                (None, None) => continue,
            };
            cells[idx] += 1;
        }
        cells
    }

    /// The subset restricted to the listed classifiers, re-indexed in the
    /// listed order.
    pub fn restrict(&self, classifiers: &[usize]) -> BinarySubset {
        let rows = self
            .rows
            .iter()
            .filter_map(|r| {
                classifiers
                    .iter()
                    .position(|&c| c == r.classifier)
                    .map(|pos| SubsetRow {
                        classifier: pos,
                        ..*r
                    })
            })
            .collect();
        BinarySubset {
            class_label: self.class_label.clone(),
            classifiers: classifiers.iter().map(|&c| self.classifiers[c].clone()).collect(),
            rows,
            n_clusters: self.n_clusters,
        }
    }
}

/// Keeps the rows predicting `class`, with outcome = (truth == class).
///
/// Fails if any classifier never predicts the class, since its precision is
/// then undefined.
pub fn subset_by_predicted_class(t: &LongTable, class: &str) -> Result<BinarySubset> {
    let undefined = |ci: usize| Error::UndefinedPrecision {
        classifier: t.classifiers[ci].clone(),
        class: class.to_string(),
    };
    let Some(li) = t.label_index(class) else {
        return Err(undefined(0));
    };
    let mut cluster_ids: HashMap<&str, usize> = HashMap::new();
    let clusters: Vec<usize> = t
        .keys
        .iter()
        .map(|k| {
            let next = cluster_ids.len();
            *cluster_ids.entry(k.id.as_str()).or_insert(next)
        })
        .collect();

    let mut rows = Vec::new();
    for (ci, col) in t.predictions.iter().enumerate() {
        let before = rows.len();
        for (ki, &pred) in col.iter().enumerate() {
            if pred == li {
                rows.push(SubsetRow {
                    key: ki,
                    cluster: clusters[ki],
                    classifier: ci,
                    outcome: t.truth[ki] == li,
                });
            }
        }
        if rows.len() == before {
            return Err(undefined(ci));
        }
    }
    Ok(BinarySubset {
        class_label: class.to_string(),
        classifiers: t.classifiers.clone(),
        rows,
        n_clusters: cluster_ids.len(),
    })
}

/// 2×2 table of truth vs prediction for one classifier and class.
///
/// ```text
///                predicted c   predicted ¬c
///   truth c          a             b          T4
///   truth ¬c         c             d          T3
///                    T1            T2
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTable {
    pub classifier: String,
    pub class_label: String,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ConfusionTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ConfusionTable {
            classifier: String::new(),
            class_label: String::new(),
            a,
            b,
            c,
            d,
        }
    }

    /// Predicted positives.
    pub fn t1(&self) -> u64 {
        self.a + self.c
    }

    pub fn t2(&self) -> u64 {
        self.b + self.d
    }

    /// Actual negatives.
    pub fn t3(&self) -> u64 {
        self.c + self.d
    }

    /// Actual positives.
    pub fn t4(&self) -> u64 {
        self.a + self.b
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

pub fn confusion_counts(t: &LongTable, classifier: &str, class: &str) -> Result<ConfusionTable> {
    let ci = t.classifier_index(classifier)?;
    let li = t.label_index(class);
    let mut ct = ConfusionTable::new(0, 0, 0, 0);
    ct.classifier = classifier.to_string();
    ct.class_label = class.to_string();
    for (ki, &pred) in t.predictions[ci].iter().enumerate() {
        let truth_pos = Some(t.truth[ki]) == li;
        let pred_pos = Some(pred) == li;
        match (truth_pos, pred_pos) {
            (true, true) => ct.a += 1,
            (true, false) => ct.b += 1,
            (false, true) => ct.c += 1,
            (false, false) => ct.d += 1,
        }
    }
    Ok(ct)
}

/// Joint table of two classifiers for one class.
///
/// ```text
///                truth ¬c             truth c
///             C2=c   C2=¬c         C2=c   C2=¬c
///   C1=c       n1     n2            n5     n6
///   C1=¬c      n3     n4            n7     n8
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedTable {
    pub class_label: String,
    pub classifier1: String,
    pub classifier2: String,
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub n4: u64,
    pub n5: u64,
    pub n6: u64,
    pub n7: u64,
    pub n8: u64,
}

impl PairedTable {
    /// Unnamed table from the eight cells `[n1, ..., n8]`.
    pub fn from_cells(n: [u64; 8]) -> Self {
        PairedTable {
            class_label: String::new(),
            classifier1: "C1".into(),
            classifier2: "C2".into(),
            n1: n[0],
            n2: n[1],
            n3: n[2],
            n4: n[3],
            n5: n[4],
            n6: n[5],
            n7: n[6],
            n8: n[7],
        }
    }

    pub fn cells(&self) -> [u64; 8] {
        [
            self.n1, self.n2, self.n3, self.n4, self.n5, self.n6, self.n7, self.n8,
        ]
    }

    pub fn total(&self) -> u64 {
        self.cells().iter().sum()
    }

    /// Predicted positives of classifier 1.
    pub fn t1(&self) -> u64 {
        self.n1 + self.n2 + self.n5 + self.n6
    }

    /// Predicted positives of classifier 2.
    pub fn t5(&self) -> u64 {
        self.n1 + self.n3 + self.n5 + self.n7
    }

    /// True positives of classifier 1.
    pub fn a(&self) -> u64 {
        self.n5 + self.n6
    }

    /// False positives of classifier 1.
    pub fn c(&self) -> u64 {
        self.n1 + self.n2
    }

    /// True positives of classifier 2.
    pub fn e(&self) -> u64 {
        self.n5 + self.n7
    }

    /// False positives of classifier 2.
    pub fn g(&self) -> u64 {
        self.n1 + self.n3
    }

    pub fn precision1(&self) -> Option<f64> {
        (self.t1() > 0).then(|| self.a() as f64 / self.t1() as f64)
    }

    pub fn precision2(&self) -> Option<f64> {
        (self.t5() > 0).then(|| self.e() as f64 / self.t5() as f64)
    }

    /// The same table with the classifier roles exchanged.
    pub fn swapped(&self) -> PairedTable {
        PairedTable {
            class_label: self.class_label.clone(),
            classifier1: self.classifier2.clone(),
            classifier2: self.classifier1.clone(),
            n1: self.n1,
            n2: self.n3,
            n3: self.n2,
            n4: self.n4,
            n5: self.n5,
            n6: self.n7,
            n7: self.n6,
            n8: self.n8,
        }
    }

    /// Every cell scaled by `factor`.
    pub fn scaled(&self, factor: u64) -> PairedTable {
        let mut out = PairedTable::from_cells(self.cells().map(|n| n * factor));
        out.class_label = self.class_label.clone();
        out.classifier1 = self.classifier1.clone();
        out.classifier2 = self.classifier2.clone();
        out
    }
}

impl PairedTable {
    /// One observation per counted unit, ids `1..=N`. An empty class label
    /// becomes `"pos"`; the other class is `"not <label>"`.
    pub fn expand(&self) -> Result<LongTable> {
        let pos = if self.class_label.is_empty() {
            "pos".to_string()
        } else {
            self.class_label.clone()
        };
        let neg = format!("not {pos}");
        let mut records = Vec::with_capacity(2 * self.total() as usize);
        let mut id = 0u64;
        for (cell, &count) in self.cells().iter().enumerate() {
            let truth = if cell >= 4 { &pos } else { &neg };
            let (p1, p2) = match cell % 4 {
                0 => (&pos, &pos),
                1 => (&pos, &neg),
                2 => (&neg, &pos),
                _ => (&neg, &neg),
            };
            for _ in 0..count {
                id += 1;
                for (clf, pred) in [(&self.classifier1, p1), (&self.classifier2, p2)] {
                    records.push(PredictionRecord {
                        id: id.to_string(),
                        truth: truth.clone(),
                        classifier: clf.clone(),
                        predicted: pred.clone(),
                        fold: 1,
                        rep: 1,
                    });
                }
            }
        }
        LongTable::from_records(records)
    }
}

pub fn paired_counts(t: &LongTable, clf1: &str, clf2: &str, class: &str) -> Result<PairedTable> {
    let c1 = t.classifier_index(clf1)?;
    let c2 = t.classifier_index(clf2)?;
    let li = t.label_index(class);
    let mut n = [0u64; 8];
    for ki in 0..t.keys.len() {
        let truth_pos = Some(t.truth[ki]) == li;
        let p1 = Some(t.predictions[c1][ki]) == li;
        let p2 = Some(t.predictions[c2][ki]) == li;
        let cell = match (p1, p2) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        } + if truth_pos { 4 } else { 0 };
        n[cell] += 1;
    }
    let mut pt = PairedTable::from_cells(n);
    pt.class_label = class.to_string();
    pt.classifier1 = clf1.to_string();
    pt.classifier2 = clf2.to_string();
    Ok(pt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub class_label: String,
    pub classifier: String,
    pub value: f64,
    pub numerator: u64,
    pub denominator: u64,
}

/// `a / (a + c)`.
pub fn precision(ct: &ConfusionTable) -> Result<PrecisionEstimate> {
    let denominator = ct.t1();
    if denominator == 0 {
        return Err(Error::UndefinedPrecision {
            classifier: ct.classifier.clone(),
            class: ct.class_label.clone(),
        });
    }
    Ok(PrecisionEstimate {
        class_label: ct.class_label.clone(),
        classifier: ct.classifier.clone(),
        value: ct.a as f64 / denominator as f64,
        numerator: ct.a,
        denominator,
    })
}

/// Unweighted mean of per-class precision.
pub fn macro_average_precision(per_class: &[PrecisionEstimate]) -> Result<f64> {
    if per_class.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(per_class.iter().map(|p| p.value).sum::<f64>() / per_class.len() as f64)
}
