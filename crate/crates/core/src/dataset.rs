//! CSV datasets and min-max normalization.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GfmmError, Result};
use crate::hyperbox::{ClassId, IntervalPattern, UNLABELLED};

/// How to read a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    /// `None` detects a header from the first record.
    pub has_header: Option<bool>,
    /// Column holding the class label; defaults to the last one.
    pub label_column: Option<usize>,
    /// Feature columns are `l1..ln, u1..un` instead of `x1..xn`.
    pub interval: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: None,
            label_column: None,
            interval: false,
            delimiter: b',',
        }
    }
}

/// Raw (unnormalized) samples with string class names mapped to `1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    /// `class_names[i]` is the name of class id `i + 1`.
    pub class_names: Vec<String>,
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub labels: Vec<ClassId>,
    pub interval: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_dims(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        if id == UNLABELLED {
            ""
        } else {
            &self.class_names[id as usize - 1]
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            lower: indices.iter().map(|&i| self.lower[i].clone()).collect(),
            upper: indices.iter().map(|&i| self.upper[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            interval: self.interval,
        }
    }

    /// Keep only the listed feature columns, in the given order.
    pub fn select_features(&self, columns: &[usize]) -> Result<Dataset> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_dims()) {
            return Err(GfmmError::InvalidParameter(format!("feature index {c} out of range")));
        }
        let pick = |rows: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect()
        };
        Ok(Dataset {
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            lower: pick(&self.lower),
            upper: pick(&self.upper),
            ..self.clone()
        })
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GfmmError::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, options)
}

pub fn read_csv(reader: impl Read, name: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| GfmmError::Parse(format!("{name}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(GfmmError::EmptyInput(format!("{name}: no rows")));
    };
    let width = first.len();
    if width < 2 {
        return Err(GfmmError::Parse(format!("{name}: need at least one feature and a label column")));
    }
    let label_col = options.label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(GfmmError::Parse(format!(
            "{name}: label column {label_col} out of range for {width} columns"
        )));
    }
    let feature_cols: Vec<usize> = (0..width).filter(|&c| c != label_col).collect();
    let header = options.has_header.unwrap_or_else(|| {
        feature_cols.iter().any(|&c| first[c].parse::<f64>().is_err())
    });
    let feature_names_raw: Vec<String> = if header {
        feature_cols.iter().map(|&c| first[c].to_string()).collect()
    } else {
        (1..=feature_cols.len()).map(|i| format!("x{i}")).collect()
    };
    let body = if header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(GfmmError::EmptyInput(format!("{name}: no data rows")));
    }

    let n_dims = if options.interval {
        if !feature_cols.len().is_multiple_of(2) {
            return Err(GfmmError::Parse(format!(
                "{name}: interval mode needs an even number of feature columns, got {}",
                feature_cols.len()
            )));
        }
        feature_cols.len() / 2
    } else {
        feature_cols.len()
    };

    let mut values = Vec::with_capacity(body.len());
    let mut raw_labels = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(GfmmError::Parse(format!(
                "{name}: line {line}: expected {width} fields, found {}",
                rec.len()
            )));
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let v: f64 = rec[c].parse().map_err(|_| {
                GfmmError::Parse(format!("{name}: line {line}: column {}: not a number: {:?}", c + 1, &rec[c]))
            })?;
            if !v.is_finite() {
                return Err(GfmmError::Parse(format!("{name}: line {line}: column {}: non-finite value", c + 1)));
            }
            row.push(v);
        }
        if options.interval {
            let (l, u) = row.split_at(n_dims);
            if let Some(j) = (0..n_dims).find(|&j| l[j] > u[j]) {
                return Err(GfmmError::Parse(format!(
                    "{name}: line {line}: lower bound exceeds upper bound in feature {}",
                    j + 1
                )));
            }
        }
        values.push(row);
        raw_labels.push(rec[label_col].to_string());
    }

    let class_names = sorted_class_names(&raw_labels);
    let labels = raw_labels
        .iter()
        .map(|l| {
            if l.is_empty() {
                UNLABELLED
            } else {
                class_names.iter().position(|c| c == l).unwrap() as ClassId + 1
            }
        })
        .collect();
    let (lower, upper, feature_names) = if options.interval {
        let lower = values.iter().map(|r| r[..n_dims].to_vec()).collect();
        let upper = values.iter().map(|r| r[n_dims..].to_vec()).collect();
        (lower, upper, feature_names_raw[..n_dims].to_vec())
    } else {
        (values.clone(), values, feature_names_raw)
    };
    Ok(Dataset {
        name: name.to_string(),
        feature_names,
        class_names,
        lower,
        upper,
        labels,
        interval: options.interval,
    })
}

/// Distinct non-empty labels: numeric order if every label is a number, else lexicographic.
fn sorted_class_names(raw: &[String]) -> Vec<String> {
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).filter(|l| !l.is_empty()).collect();
    let mut names: Vec<&str> = distinct.into_iter().collect();
    if names.iter().all(|n| n.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    names.into_iter().map(String::from).collect()
}

/// Write a dataset back as CSV with a header and the label in the last column.
pub fn write_csv(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| GfmmError::Io(e.to_string());
    let mut header: Vec<String> = if dataset.interval {
        let lo = dataset.feature_names.iter().map(|f| format!("{f}_lower"));
        let hi = dataset.feature_names.iter().map(|f| format!("{f}_upper"));
        lo.chain(hi).collect()
    } else {
        dataset.feature_names.clone()
    };
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for i in 0..dataset.len() {
        let mut rec: Vec<String> = dataset.lower[i].iter().map(f64::to_string).collect();
        if dataset.interval {
            rec.extend(dataset.upper[i].iter().map(f64::to_string));
        }
        rec.push(dataset.class_name(dataset.labels[i]).to_string());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature min-max scaling fitted on one split and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    /// Fit on the rows of `dataset` listed in `indices`.
    pub fn fit(dataset: &Dataset, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(GfmmError::EmptyInput("cannot fit normalization on an empty split".into()));
        }
        let n = dataset.n_dims();
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for &i in indices {
            for j in 0..n {
                min[j] = min[j].min(dataset.lower[i][j]);
                max[j] = max[j].max(dataset.upper[i][j]);
            }
        }
        Ok(Self { min, max })
    }

    pub fn fit_all(dataset: &Dataset) -> Result<Self> {
        Self::fit(dataset, &(0..dataset.len()).collect::<Vec<_>>())
    }

    /// Scale one value of feature `j` into `[0, 1]`.
    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span <= 0.0 {
            0.5
        } else {
            ((x - self.min[j]) / span).clamp(0.0, 1.0)
        }
    }

    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &x)| self.scale(j, x)).collect()
    }

    /// Normalized patterns for the listed rows.
    pub fn patterns(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<IntervalPattern>> {
        if dataset.n_dims() != self.min.len() {
            return Err(GfmmError::DimensionMismatch {
                expected: self.min.len(),
                found: dataset.n_dims(),
            });
        }
        indices
            .iter()
            .map(|&i| {
                IntervalPattern::new(
                    self.scale_row(&dataset.lower[i]),
                    self.scale_row(&dataset.upper[i]),
                    dataset.labels[i],
                )
            })
            .collect()
    }

    pub fn all_patterns(&self, dataset: &Dataset) -> Result<Vec<IntervalPattern>> {
        self.patterns(dataset, &(0..dataset.len()).collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, opts: &CsvOptions) -> Result<Dataset> {
        read_csv(text.as_bytes(), "t", opts)
    }

    #[test]
    fn string_labels_map_in_sorted_order() {
        let d = parse("1,2,b\n3,4,a\n5,6,b\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.labels, vec![2, 1, 2]);
        assert_eq!(d.class_names, vec!["a", "b"]);
        assert_eq!(d.feature_names, vec!["x1", "x2"]);
        let d = parse("1,2,a\n3,4,b\n5,6,a\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.labels, vec![1, 2, 1]);
    }

    #[test]
    fn numeric_labels_sort_numerically_and_empty_is_unlabelled() {
        let d = parse("f,g,y\n1,2,10\n3,4,9\n5,6,\n", &CsvOptions::default()).unwrap();
        assert_eq!(d.class_names, vec!["9", "10"]);
        assert_eq!(d.labels, vec![2, 1, 0]);
        assert_eq!(d.feature_names, vec!["f", "g"]);
    }

    #[test]
    fn label_column_can_be_first() {
        let opts = CsvOptions { label_column: Some(0), ..Default::default() };
        let d = parse("a,0.5,1\nb,0.25,2\n", &opts).unwrap();
        assert_eq!(d.lower, vec![vec![0.5, 1.0], vec![0.25, 2.0]]);
        assert_eq!(d.labels, vec![1, 2]);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let e = parse("1,2,a\n3,a\n", &CsvOptions::default()).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse("x,y,c\n1,2,a\n3,oops,b\n", &CsvOptions::default()).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        assert!(matches!(parse("", &CsvOptions::default()), Err(GfmmError::EmptyInput(_))));
        assert!(matches!(parse("x,y,c\n", &CsvOptions::default()), Err(GfmmError::EmptyInput(_))));
    }

    #[test]
    fn interval_rows() {
        let opts = CsvOptions { interval: true, ..Default::default() };
        let d = parse("0.1,0.2,0.3,0.4,a\n", &opts).unwrap();
        assert_eq!(d.lower, vec![vec![0.1, 0.2]]);
        assert_eq!(d.upper, vec![vec![0.3, 0.4]]);
        let pats = Normalizer { min: vec![0.0, 0.0], max: vec![1.0, 1.0] }.all_patterns(&d).unwrap();
        assert_eq!(pats[0].lower(), &[0.1, 0.2]);
        assert_eq!(pats[0].upper(), &[0.3, 0.4]);
        assert!(parse("0.5,0.2,0.3,0.4,a\n", &opts).is_err());
        assert!(parse("0.1,0.2,0.3,a\n", &opts).is_err());
    }

    #[test]
    fn write_then_read_round_trips() {
        for (text, interval) in [("x,y,c\n1.5,2,a\n3,4.25,b\n0,0,\n", false), ("0.1,0.2,0.3,0.4,k\n", true)] {
            let opts = CsvOptions { interval, ..Default::default() };
            let d = parse(text, &opts).unwrap();
            let mut buf = Vec::new();
            write_csv(&d, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), "t", &CsvOptions { has_header: Some(true), ..opts }).unwrap();
            assert_eq!(back.lower, d.lower);
            assert_eq!(back.upper, d.upper);
            assert_eq!(back.labels, d.labels);
            assert_eq!(back.class_names, d.class_names);
        }
    }

    #[test]
    fn normalization_fits_train_and_clips() {
        let d = parse("2,7,a\n4,7,b\n3,7,a\n5,7,b\n", &CsvOptions::default()).unwrap();
        let norm = Normalizer::fit(&d, &[0, 1]).unwrap();
        assert_eq!(norm.scale(0, 3.0), 0.5);
        assert_eq!(norm.scale(0, 5.0), 1.0);
        assert_eq!(norm.scale(0, 1.0), 0.0);
        let pats = norm.all_patterns(&d).unwrap();
        assert!(pats.iter().all(|p| p.lower()[1] == 0.5));
        assert!(Normalizer::fit(&d, &[]).is_err());
    }

    #[test]
    fn select_and_subset() {
        let d = parse("1,2,3,a\n4,5,6,b\n", &CsvOptions::default()).unwrap();
        let s = d.select_features(&[2, 0]).unwrap().subset(&[1]);
        assert_eq!(s.lower, vec![vec![6.0, 4.0]]);
        assert_eq!(s.feature_names, vec!["x3", "x1"]);
        assert_eq!(s.labels, vec![2]);
        assert!(d.select_features(&[3]).is_err());
    }
}
