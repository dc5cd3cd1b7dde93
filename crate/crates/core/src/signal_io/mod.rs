//! Heartbeat CSV loading, validation and stratified sampling.
//!
//! Every record is a fixed-length segment of [`SERIES_LEN`] normalized ECG
//! samples followed by an integral class label, one row per beat.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub mod synthetic;

/// Samples per heartbeat segment.
pub const SERIES_LEN: usize = 187;
/// Fields per CSV row: the samples plus the trailing label.
pub const ROW_FIELDS: usize = SERIES_LEN + 1;

const LABEL_INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HeartbeatRecord {
    samples: Vec<f64>,
    label: usize,
}

impl HeartbeatRecord {
    pub fn new(samples: Vec<f64>, label: usize) -> Result<Self> {
        if samples.len() != SERIES_LEN {
            return Err(Error::Argument(format!(
                "heartbeat must have {SERIES_LEN} samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data {
                row: 0,
                field: i,
                msg: format!("non-finite sample {}", samples[i]),
            });
        }
        Ok(Self { samples, label })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn label(&self) -> usize {
        self.label
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    num_classes: usize,
    records: Vec<HeartbeatRecord>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        num_classes: usize,
        records: Vec<HeartbeatRecord>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Argument(format!(
                "a dataset needs at least 2 classes, got {num_classes}"
            )));
        }
        if let Some((row, r)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| r.label >= num_classes)
        {
            return Err(Error::LabelRange {
                row,
                label: r.label,
                num_classes,
            });
        }
        Ok(Self {
            name: name.into(),
            num_classes,
            records,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn records(&self) -> &[HeartbeatRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    fn with_records(&self, name: String, records: Vec<HeartbeatRecord>) -> Dataset {
        Dataset {
            name,
            num_classes: self.num_classes,
            records,
        }
    }
}

/// Loads a headerless heartbeat CSV.
pub fn load_csv(path: impl AsRef<Path>, num_classes: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(BufReader::new(file), num_classes, name).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses heartbeat rows from any reader. Row indices in errors are 0-based.
pub fn parse_csv<R: Read>(
    reader: BufReader<R>,
    num_classes: usize,
    name: impl Into<String>,
) -> Result<Dataset> {
    if num_classes < 2 {
        return Err(Error::Argument(format!(
            "a dataset needs at least 2 classes, got {num_classes}"
        )));
    }
    let mut records = Vec::new();
    for (row, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        records.push(parse_row(row, line, num_classes)?);
    }
    Dataset::new(name, num_classes, records)
}

fn parse_row(row: usize, line: &str, num_classes: usize) -> Result<HeartbeatRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != ROW_FIELDS {
        return Err(Error::MalformedRow {
            row,
            expected: ROW_FIELDS,
            found: fields.len(),
        });
    }
    let mut values = Vec::with_capacity(ROW_FIELDS);
    for (field, text) in fields.iter().enumerate() {
        let v: f64 = text.trim().parse().map_err(|_| Error::Data {
            row,
            field,
            msg: format!("not a number: {text:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Data {
                row,
                field,
                msg: format!("non-finite value {v}"),
            });
        }
        values.push(v);
    }
    let raw_label = values.pop().expect("row has ROW_FIELDS values");
    let rounded = raw_label.round();
    if (raw_label - rounded).abs() > LABEL_INTEGRALITY_TOL || rounded < 0.0 {
        return Err(Error::Data {
            row,
            field: SERIES_LEN,
            msg: format!("label {raw_label} is not a non-negative integer"),
        });
    }
    let label = rounded as usize;
    if label >= num_classes {
        return Err(Error::LabelRange {
            row,
            label,
            num_classes,
        });
    }
    Ok(HeartbeatRecord {
        samples: values,
        label,
    })
}

/// Loads the two-file PTB layout: every row of `normal` becomes class 0 and
/// every row of `abnormal` class 1, regardless of the label column.
pub fn load_ptb(normal: impl AsRef<Path>, abnormal: impl AsRef<Path>) -> Result<Dataset> {
    let mut records = Vec::new();
    for (label, path) in [(0usize, normal.as_ref()), (1, abnormal.as_ref())] {
        // The label column is replaced below, so accept whatever the file holds.
        let ds = load_csv(path, usize::MAX)?;
        records.extend(ds.records.into_iter().map(|mut r| {
            r.label = label;
            r
        }));
    }
    Dataset::new("ptbdb", 2, records)
}

pub fn class_histogram(ds: &Dataset) -> Vec<usize> {
    let mut counts = vec![0usize; ds.num_classes];
    for r in &ds.records {
        counts[r.label] += 1;
    }
    counts
}

/// Accuracy of always predicting the most frequent class.
pub fn majority_share(ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let max = class_histogram(ds).into_iter().max().unwrap_or(0);
    max as f64 / ds.len() as f64
}

fn indices_by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.num_classes];
    for (i, r) in ds.records.iter().enumerate() {
        by_class[r.label].push(i);
    }
    by_class
}

/// Draws `round(fraction * count)` records from every class, without
/// replacement, and returns them in a seeded random order.
pub fn stratified_subsample(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "subsample fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (class, mut idx) in indices_by_class(ds).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if fraction * (idx.len() as f64) < 1.0 {
            return Err(Error::Stratification(format!(
                "fraction {fraction} leaves class {class} ({} records) empty",
                idx.len()
            )));
        }
        let take = (fraction * idx.len() as f64).round() as usize;
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..take]);
    }
    chosen.shuffle(&mut rng);
    let records = chosen.iter().map(|&i| ds.records[i].clone()).collect();
    Ok(ds.with_records(format!("{}-sub", ds.name), records))
}

/// Fraction that draws approximately `target` records from `ds`.
pub fn fraction_for(ds: &Dataset, target: usize) -> f64 {
    if ds.is_empty() {
        return 1.0;
    }
    (target as f64 / ds.len() as f64).min(1.0)
}

/// Splits every class into a test share of `round(test_fraction * count)`
/// records and a train share holding the rest. Both outputs are shuffled.
pub fn stratified_split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in indices_by_class(ds).into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        if n_test == 0 || n_test == idx.len() {
            return Err(Error::Stratification(format!(
                "class {class} ({} records) cannot be split at {test_fraction}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let pick = |ix: &[usize]| ix.iter().map(|&i| ds.records[i].clone()).collect();
    Ok((
        ds.with_records(format!("{}-train", ds.name), pick(&train)),
        ds.with_records(format!("{}-test", ds.name), pick(&test)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn row(value: f64, label: &str) -> String {
        let mut fields = vec![format!("{value}"); SERIES_LEN];
        fields.push(label.to_string());
        fields.join(",")
    }

    fn parse(text: &str, k: usize) -> Result<Dataset> {
        parse_csv(BufReader::new(Cursor::new(text.to_string())), k, "mem")
    }

    fn toy(labels: &[usize], k: usize) -> Dataset {
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| HeartbeatRecord::new(vec![i as f64; SERIES_LEN], l).unwrap())
            .collect();
        Dataset::new("toy", k, records).unwrap()
    }

    #[test]
    fn loads_zero_rows_in_order() {
        let text = format!("{}\n{}\n", row(0.0, "0"), row(0.0, "1"));
        let ds = parse(&text, 2).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), vec![0, 1]);
    }

    #[test]
    fn float_labels_and_scientific_notation() {
        let text = format!("{}\n{}\n", row(1.5e-1, "1.0"), row(2E-2, "4.000000000e+00"));
        let ds = parse(&text, 5).unwrap();
        assert_eq!(ds.labels(), vec![1, 4]);
        assert_eq!(ds.records()[0].samples()[0], 0.15);
    }

    #[test]
    fn short_row_names_index() {
        let mut bad: Vec<String> = vec!["0".into(); SERIES_LEN - 1];
        bad.push("0".into());
        let text = format!("{}\n{}\n", row(0.0, "0"), bad.join(","));
        match parse(&text, 2) {
            Err(Error::MalformedRow { row, found, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(found, SERIES_LEN);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_bad_labels() {
        assert!(matches!(
            parse(&row(f64::NAN, "0"), 2),
            Err(Error::Data { .. })
        ));
        assert!(matches!(
            parse(&row(0.0, "inf"), 2),
            Err(Error::Data { .. })
        ));
        assert!(matches!(
            parse(&row(0.0, "0.5"), 2),
            Err(Error::Data { .. })
        ));
        assert!(matches!(
            parse(&row(0.0, "2"), 2),
            Err(Error::LabelRange {
                row: 0,
                label: 2,
                ..
            })
        ));
    }

    #[test]
    fn histogram_counts() {
        let empty = Dataset::new("e", 5, vec![]).unwrap();
        assert_eq!(class_histogram(&empty), vec![0; 5]);
        assert_eq!(class_histogram(&toy(&[0, 0, 1], 2)), vec![2, 1]);
    }

    #[test]
    fn majority_share_of_toy() {
        assert_eq!(majority_share(&toy(&[0, 0, 0, 1], 2)), 0.75);
    }

    #[test]
    fn full_fraction_is_a_permutation() {
        let ds = toy(&[0, 1, 0, 1, 1, 0, 2], 3);
        let sub = stratified_subsample(&ds, 1.0, 3).unwrap();
        let mut a: Vec<f64> = sub.records().iter().map(|r| r.samples()[0]).collect();
        a.sort_by(f64::total_cmp);
        let b: Vec<f64> = (0..7).map(|i| i as f64).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_proportional_subsample() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let ds = toy(&labels, 2);
        for seed in 0..5 {
            let sub = stratified_subsample(&ds, 0.1, seed).unwrap();
            assert_eq!(sub.len(), 10);
            assert_eq!(class_histogram(&sub), vec![5, 5]);
        }
    }

    #[test]
    fn subsample_is_seed_deterministic() {
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let ds = toy(&labels, 3);
        let a = stratified_subsample(&ds, 0.5, 11).unwrap();
        let b = stratified_subsample(&ds, 0.5, 11).unwrap();
        let c = stratified_subsample(&ds, 0.5, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn subsample_rejects_emptying_a_class() {
        let ds = toy(&[0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1], 2);
        assert!(matches!(
            stratified_subsample(&ds, 0.5, 0),
            Err(Error::Stratification(_))
        ));
        assert!(matches!(
            stratified_subsample(&ds, 0.0, 0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn split_sizes_follow_rounding_per_class() {
        // Class sizes of the PTB normal/abnormal files.
        let mut labels = vec![0usize; 4046];
        labels.extend(std::iter::repeat_n(1usize, 10506));
        let ds = toy(&labels, 2);
        let (train, test) = stratified_split(&ds, 0.2, 7).unwrap();
        assert_eq!(train.len(), 11642);
        assert_eq!(test.len(), 2910);
        assert_eq!(class_histogram(&test), vec![809, 2101]);
    }
}
