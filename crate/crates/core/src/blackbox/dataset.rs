use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Binary classification data: `m` rows of `d` real features with 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array1<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Array1<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let (m, d) = features.dim();
        if labels.len() != m {
            return Err(Error::InvalidDataset(format!(
                "{m} rows but {} labels",
                labels.len()
            )));
        }
        if feature_names.len() != d {
            return Err(Error::InvalidDataset(format!(
                "{d} columns but {} names",
                feature_names.len()
            )));
        }
        if m < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 rows, got {m}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(
                "features contain NaN or infinite values".into(),
            ));
        }
        if labels.iter().any(|y| *y != 0.0 && *y != 1.0) {
            return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
        })
    }

    /// Columns named `x0, x1, …`.
    pub fn unnamed(features: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        let names = (0..features.ncols()).map(|i| format!("x{i}")).collect();
        Self::new(features, labels, names)
    }

    /// Parses CSV with a header row; the last column holds the 0/1 label.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let bad = |e: csv::Error| Error::InvalidDataset(e.to_string());
        let header = rdr.headers().map_err(bad)?.clone();
        if header.len() < 2 {
            return Err(Error::InvalidDataset(
                "need at least one feature column and a label column".into(),
            ));
        }
        let d = header.len() - 1;
        let names = header.iter().take(d).map(str::to_owned).collect();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(bad)?;
            for (col, cell) in rec.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::InvalidDataset(format!(
                        "row {}, column {}: not a number: {cell:?}",
                        row + 1,
                        col + 1
                    ))
                })?;
                if col < d {
                    values.push(v);
                } else {
                    labels.push(v);
                }
            }
        }
        let m = labels.len();
        let features = Array2::from_shape_vec((m, d), values)
            .map_err(|e| Error::InvalidDataset(e.to_string()))?;
        Self::new(features, Array1::from(labels), names)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = self.feature_names.clone();
        header.push("label".into());
        w.write_record(&header).map_err(io)?;
        for (row, y) in self.features.rows().into_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(format!("{}", *y as u8));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> Option<ArrayView1<'_, f64>> {
        (i < self.len()).then(|| self.features.row(i))
    }

    /// Fails with `DegenerateData` unless both classes occur.
    pub fn require_both_classes(&self) -> Result<()> {
        let positives = self.labels.iter().filter(|y| **y == 1.0).count();
        if positives == 0 || positives == self.len() {
            return Err(Error::DegenerateData(format!(
                "only class {} is present",
                if positives == 0 { 0 } else { 1 }
            )));
        }
        Ok(())
    }

    /// Per-column means.
    pub fn feature_means(&self) -> Vec<f64> {
        self.features
            .mean_axis(ndarray::Axis(0))
            .map(|m| m.to_vec())
            .unwrap_or_default()
    }
}
