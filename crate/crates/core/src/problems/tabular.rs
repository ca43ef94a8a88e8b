//! Multi-output regression data: CSV ingestion, deterministic splits and a
//! synthetic generator.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Raw numeric table with a header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Parses comma-separated text with a header row. Every cell must be a
    /// finite number.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(Error::Data("csv header has empty column names".into()));
        }
        for (i, h) in headers.iter().enumerate() {
            if headers[..i].contains(h) {
                return Err(Error::Data(format!("duplicate column `{h}`")));
            }
        }
        let mut rows = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {} has {} cells, header has {}",
                    line + 1,
                    record.len(),
                    headers.len()
                )));
            }
            let row = record
                .iter()
                .enumerate()
                .map(|(c, cell)| match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::Data(format!(
                        "row {}, column `{}`: `{cell}` is not a finite number",
                        line + 1,
                        headers[c]
                    ))),
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { headers, rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes the table back as CSV with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("missing column `{name}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.65,
            val: 0.15,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    /// `(train, val, test)` sizes: floors for train and validation, the
    /// remainder to test.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios {all:?} must be nonnegative and sum to 1"
            )));
        }
        let train = (n as f64 * self.train + 1e-9).floor() as usize;
        let val = (n as f64 * self.val + 1e-9).floor() as usize;
        let test = n.saturating_sub(train + val);
        if train == 0 || test == 0 || (val == 0 && self.val > 0.0) {
            return Err(Error::Data(format!(
                "{n} rows give an empty split (train {train}, val {val}, test {test})"
            )));
        }
        Ok((train, val, test))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetScaling {
    #[default]
    None,
    /// Divide each target column by its largest absolute training value.
    Max,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn batch(&self, rows: Vec<usize>) -> Batch<'_> {
        Batch { split: self, rows }
    }

    pub fn full(&self) -> Batch<'_> {
        self.batch((0..self.len()).collect())
    }
}

/// Rows of one split used for a single loss evaluation.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub split: &'a Split,
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabularDataset {
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub train: Split,
    pub val: Split,
    pub test: Split,
    /// Per-feature `(mean, std)` from the training split.
    pub feature_stats: Vec<(f64, f64)>,
    /// Divisor applied to each target column.
    pub target_scale: Vec<f64>,
}

impl TabularDataset {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_targets(&self) -> usize {
        self.target_names.len()
    }

    /// Shuffles rows with `rng`, splits them, standardizes features with
    /// training statistics and scales targets.
    pub fn from_table(
        table: &Table,
        target_columns: &[String],
        ratios: SplitRatios,
        scaling: TargetScaling,
        rng: &mut Rng,
    ) -> Result<Self> {
        if target_columns.is_empty() {
            return Err(Error::Data("no target columns given".into()));
        }
        let target_idx = target_columns
            .iter()
            .map(|c| table.column_index(c))
            .collect::<Result<Vec<_>>>()?;
        let feature_idx: Vec<usize> =
            (0..table.headers.len()).filter(|i| !target_idx.contains(i)).collect();
        if feature_idx.is_empty() {
            return Err(Error::Data("table has no feature columns".into()));
        }
        let (n_train, n_val, _) = ratios.sizes(table.rows.len())?;
        let mut order: Vec<usize> = (0..table.rows.len()).collect();
        rng.shuffle(&mut order);

        let take = |rows: &[usize]| Split {
            features: rows
                .iter()
                .map(|&r| feature_idx.iter().map(|&c| table.rows[r][c]).collect())
                .collect(),
            targets: rows
                .iter()
                .map(|&r| target_idx.iter().map(|&c| table.rows[r][c]).collect())
                .collect(),
        };
        let mut train = take(&order[..n_train]);
        let mut val = take(&order[n_train..n_train + n_val]);
        let mut test = take(&order[n_train + n_val..]);

        let feature_stats: Vec<(f64, f64)> = (0..feature_idx.len())
            .map(|c| {
                let n = train.len() as f64;
                let mean = train.features.iter().map(|r| r[c]).sum::<f64>() / n;
                let var = train.features.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            })
            .collect();
        let target_scale: Vec<f64> = match scaling {
            TargetScaling::None => vec![1.0; target_idx.len()],
            TargetScaling::Max => (0..target_idx.len())
                .map(|c| {
                    let m = train.targets.iter().map(|r| r[c].abs()).fold(0.0, f64::max);
                    if m > 0.0 {
                        m
                    } else {
                        1.0
                    }
                })
                .collect(),
        };
        for split in [&mut train, &mut val, &mut test] {
            for row in &mut split.features {
                for (v, (mean, std)) in row.iter_mut().zip(&feature_stats) {
                    *v = if *std > 0.0 { (*v - mean) / std } else { 0.0 };
                }
            }
            for row in &mut split.targets {
                for (v, s) in row.iter_mut().zip(&target_scale) {
                    *v /= s;
                }
            }
        }
        Ok(Self {
            feature_names: feature_idx.iter().map(|&i| table.headers[i].clone()).collect(),
            target_names: target_columns.to_vec(),
            train,
            val,
            test,
            feature_stats,
            target_scale,
        })
    }
}

/// Reads a CSV file and builds a [`TabularDataset`].
pub fn load_tabular(
    path: &Path,
    target_columns: &[String],
    ratios: SplitRatios,
    scaling: TargetScaling,
    rng: &mut Rng,
) -> Result<TabularDataset> {
    let table = Table::from_path(path)?;
    TabularDataset::from_table(&table, target_columns, ratios, scaling, rng)
}

/// Synthetic multi-output regression table.
///
/// Features are standard normal. Task `j` is a positive target combining a
/// random linear map, a task-specific nonlinearity and Gaussian noise, so
/// that tasks share structure but disagree on the best fit. Columns are
/// named `x0..` and `y0..`.
pub fn synthetic_regression(
    rows: usize,
    features: usize,
    tasks: usize,
    noise: f64,
    rng: &mut Rng,
) -> Table {
    let weights: Vec<Vec<f64>> = (0..tasks)
        .map(|_| (0..features).map(|_| rng.normal() / (features as f64).sqrt()).collect())
        .collect();
    let mut headers: Vec<String> = (0..features).map(|i| format!("x{i}")).collect();
    headers.extend((0..tasks).map(|j| format!("y{j}")));
    let rows = (0..rows)
        .map(|_| {
            let x: Vec<f64> = (0..features).map(|_| rng.normal()).collect();
            let mut row = x.clone();
            for (j, w) in weights.iter().enumerate() {
                let lin = crate::numerics::dot(w, &x);
                let nonlin = match j % 3 {
                    0 => x[j % features].sin(),
                    1 => 0.5 * x[(j + 1) % features].powi(2) - 0.5,
                    _ => x[(j + 2) % features].tanh(),
                };
                row.push(3.0 + lin + nonlin + noise * rng.normal());
            }
            row
        })
        .collect();
    Table { headers, rows }
}
