//! Data loaders and the model file format.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mixture::{FittedModel, GaussianComponent, MixtureDensity};

pub const MODEL_SCHEMA: &str = "hybridclust.model/1";
const LABEL_COLUMN: &str = "label";
const FAITHFUL_CSV: &str = include_str!("../data/faithful.csv");

/// Numeric table with an optional label column.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub data: Dataset,
    pub labels: Option<Vec<String>>,
}

impl Table {
    /// Labels mapped to `0..C` in order of first appearance, plus the class names.
    pub fn label_indices(&self) -> Option<(Vec<usize>, Vec<String>)> {
        self.labels.as_deref().map(label_indices)
    }
}

pub fn label_indices(labels: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let idx = labels
        .iter()
        .map(|l| match names.iter().position(|n| n == l) {
            Some(i) => i,
            None => {
                names.push(l.clone());
                names.len() - 1
            }
        })
        .collect();
    (idx, names)
}

fn csv_error(row: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Csv { row, column, message: message.into() }
}

/// Reads a headed CSV of numeric columns with an optional trailing `label`
/// column. Error rows count the header as row 1; columns are 1-based.
pub fn read_csv<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(1, 0, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(csv_error(1, 0, "missing header"));
    }
    let labelled = header.last().map(|h| h.eq_ignore_ascii_case(LABEL_COLUMN)).unwrap_or(false);
    let d = header.len() - usize::from(labelled);
    if d == 0 {
        return Err(csv_error(1, 0, "no feature columns"));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_error(row, 0, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(csv_error(
                row,
                rec.len().min(header.len()) + 1,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        for (j, cell) in rec.iter().take(d).enumerate() {
            let v: f64 = cell.parse().map_err(|_| csv_error(row, j + 1, format!("non-numeric value `{cell}`")))?;
            if !v.is_finite() {
                return Err(csv_error(row, j + 1, format!("non-finite value `{cell}`")));
            }
            values.push(v);
        }
        if labelled {
            labels.push(rec[d].to_owned());
        }
        n += 1;
    }
    if n == 0 {
        return Err(csv_error(2, 0, "no data rows"));
    }
    Ok(Table {
        columns: header[..d].to_vec(),
        data: Dataset::new(n, d, values)?,
        labels: labelled.then_some(labels),
    })
}

pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Table> {
    read_csv(File::open(path)?)
}

/// The bundled Old Faithful eruptions (272 rows: eruption length, waiting time).
pub fn faithful() -> Table {
    read_csv(FAITHFUL_CSV.as_bytes()).expect("bundled data is valid")
}

/// Consecutive pairs (previous, current) of one column.
pub fn lagged_pairs(data: &Dataset, column: usize) -> Result<Dataset> {
    if column >= data.dim() {
        return Err(Error::InvalidParameter(format!("column {column} out of range (d = {})", data.dim())));
    }
    if data.n_rows() < 2 {
        return Err(Error::InvalidParameter("need at least two rows for lagged pairs".into()));
    }
    let col: Vec<f64> = data.rows().map(|r| r[column]).collect();
    let rows: Vec<[f64; 2]> = col.windows(2).map(|w| [w[0], w[1]]).collect();
    Dataset::from_rows(&rows)
}

/// UCI WDBC layout: `id, diagnosis, 30 features`, no header. `features` are
/// 0-based indices into the 30 feature columns.
pub fn read_wdbc<R: Read>(reader: R, features: &[usize]) -> Result<Table> {
    read_uci(reader, b',', 1, 30, features, 2, "wdbc")
}

pub fn read_wdbc_path(path: impl AsRef<Path>, features: &[usize]) -> Result<Table> {
    read_wdbc(File::open(path)?, features)
}

pub const YEAST_FEATURES: [&str; 8] = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc"];

/// UCI Yeast layout: `name, 8 features, class`, whitespace separated.
/// `classes` keeps only the listed localisation sites when non-empty.
pub fn read_yeast<R: Read>(mut reader: R, features: &[usize], classes: &[&str]) -> Result<Table> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 10 {
            return Err(csv_error(i + 1, fields.len().min(10) + 1, format!("expected 10 fields, found {}", fields.len())));
        }
        if !classes.is_empty() && !classes.contains(&fields[9]) {
            continue;
        }
        for &f in features {
            let cell = fields.get(f + 1).ok_or_else(|| csv_error(i + 1, f + 2, "feature index out of range"))?;
            values.push(cell.parse().map_err(|_| csv_error(i + 1, f + 2, format!("non-numeric value `{cell}`")))?);
        }
        labels.push(fields[9].to_owned());
    }
    finish_uci(values, labels, features, |f| YEAST_FEATURES.get(f).map(|s| s.to_string()))
}

fn read_uci<R: Read>(
    reader: R,
    delim: u8,
    label_col: usize,
    n_features: usize,
    features: &[usize],
    first_feature: usize,
    what: &str,
) -> Result<Table> {
    let expected = first_feature + n_features;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).delimiter(delim).from_reader(reader);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(row, 0, e.to_string()))?;
        if rec.len() != expected {
            return Err(csv_error(row, rec.len().min(expected) + 1, format!("{what}: expected {expected} fields, found {}", rec.len())));
        }
        for &f in features {
            if f >= n_features {
                return Err(Error::InvalidParameter(format!("{what}: feature {f} out of range (0..{n_features})")));
            }
            let col = first_feature + f;
            let cell = rec[col].trim();
            values.push(cell.parse().map_err(|_| csv_error(row, col + 1, format!("non-numeric value `{cell}`")))?);
        }
        labels.push(rec[label_col].trim().to_owned());
    }
    finish_uci(values, labels, features, |f| Some(format!("f{f}")))
}

fn finish_uci(
    values: Vec<f64>,
    labels: Vec<String>,
    features: &[usize],
    name: impl Fn(usize) -> Option<String>,
) -> Result<Table> {
    if features.is_empty() {
        return Err(Error::InvalidParameter("select at least one feature".into()));
    }
    if labels.is_empty() {
        return Err(csv_error(1, 0, "no data rows"));
    }
    let columns = features.iter().map(|&f| name(f).unwrap_or_else(|| format!("f{f}"))).collect();
    Ok(Table { columns, data: Dataset::new(labels.len(), features.len(), values)?, labels: Some(labels) })
}

/// Reproduction metadata attached to every output file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(default)]
    pub settings: serde_json::Value,
}

impl Metadata {
    pub fn new(seed: u64, settings: serde_json::Value) -> Self {
        Self { tool: "hybridclust".into(), version: env!("CARGO_PKG_VERSION").into(), seed, settings }
    }
}

/// On-disk Gaussian mixture: `{d, K, coefs, means, covs, logL, bic, aic}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub coefs: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "logL")]
    pub log_likelihood: f64,
    pub bic: f64,
    pub aic: f64,
    /// K → [BIC, AIC] for every fitted K.
    #[serde(default)]
    pub criterion_scores: Vec<(usize, f64, f64)>,
    pub metadata: Metadata,
}

impl ModelFile {
    pub fn from_fitted(model: &FittedModel, metadata: Metadata) -> Self {
        let mix = &model.mixture;
        let d = mix.dim();
        Self {
            schema: MODEL_SCHEMA.into(),
            d,
            k: mix.len(),
            coefs: mix.coefs().to_vec(),
            means: mix.components().iter().map(|c| c.mean().to_vec()).collect(),
            covs: mix
                .components()
                .iter()
                .map(|c| (0..d).map(|i| (0..d).map(|j| c.cov()[(i, j)]).collect()).collect())
                .collect(),
            log_likelihood: model.log_likelihood,
            bic: model.bic(),
            aic: model.aic(),
            criterion_scores: model.criterion_scores.iter().map(|(&k, &(b, a))| (k, b, a)).collect(),
            metadata,
        }
    }

    pub fn to_mixture(&self) -> Result<MixtureDensity> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::InvalidParameter(format!("unsupported model schema `{}`", self.schema)));
        }
        if self.coefs.len() != self.k || self.means.len() != self.k || self.covs.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: self.coefs.len().max(self.means.len()).max(self.covs.len()),
            });
        }
        let comps = self
            .means
            .iter()
            .zip(&self.covs)
            .enumerate()
            .map(|(i, (m, c))| {
                if m.len() != self.d || c.len() != self.d || c.iter().any(|r| r.len() != self.d) {
                    return Err(Error::InvalidComponent { index: i, reason: format!("expected dimension {}", self.d) });
                }
                let flat: Vec<f64> = c.iter().flatten().copied().collect();
                GaussianComponent::from_parts(m.clone(), &flat)
                    .map_err(|e| Error::InvalidComponent { index: i, reason: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureDensity::new(self.coefs.clone(), comps)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labels_and_features() {
        let t = read_csv("x,y,label\n1,2,a\n3,4,b\n5,6,a\n".as_bytes()).unwrap();
        assert_eq!(t.columns, ["x", "y"]);
        assert_eq!(t.data.row(1), &[3.0, 4.0]);
        assert_eq!(t.label_indices().unwrap(), (vec![0, 1, 0], vec!["a".to_string(), "b".to_string()]));
        let t = read_csv("x\n1\n2\n".as_bytes()).unwrap();
        assert!(t.labels.is_none());
        assert_eq!(t.data.dim(), 1);
    }

    #[test]
    fn reports_row_and_column() {
        match read_csv("x,y\n1,2\n3,oops\n".as_bytes()) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        match read_csv("x,y\n1,2\n3\n".as_bytes()) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        assert!(read_csv("x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn faithful_bundle() {
        let t = faithful();
        assert_eq!(t.data.n_rows(), 272);
        assert_eq!(t.columns, ["eruptions", "waiting"]);
        let lag = lagged_pairs(&t.data, 0).unwrap();
        assert_eq!(lag.n_rows(), 271);
        assert_eq!(lag.row(0)[1], t.data.row(1)[0]);
        assert_eq!(lag.row(1)[0], t.data.row(1)[0]);
    }

    #[test]
    fn wdbc_layout() {
        let mut line = String::from("842302,M");
        for i in 0..30 {
            line.push_str(&format!(",{}", i as f64 + 0.5));
        }
        let text = format!("{line}\n{}\n", line.replace(",M,", ",B,"));
        let t = read_wdbc(text.as_bytes(), &[1, 23, 24]).unwrap();
        assert_eq!(t.data.row(0), &[1.5, 23.5, 24.5]);
        assert_eq!(t.labels.unwrap(), ["M", "B"]);
        assert!(read_wdbc(text.as_bytes(), &[30]).is_err());
    }

    #[test]
    fn yeast_layout() {
        let text = "ADT1_YEAST 0.58 0.61 0.47 0.13 0.50 0.00 0.48 0.22 MIT\nADT2_YEAST 0.43 0.67 0.48 0.27 0.50 0.00 0.53 0.22 CYT\n";
        let t = read_yeast(text.as_bytes(), &[0, 2, 6], &["CYT", "ME3"]).unwrap();
        assert_eq!(t.columns, ["mcg", "alm", "vac"]);
        assert_eq!(t.data.row(0), &[0.43, 0.48, 0.53]);
        assert_eq!(t.labels.unwrap(), ["CYT"]);
    }

    #[test]
    fn model_round_trip() {
        let data = faithful().data;
        let fit = crate::mixture::em_fit(&data, 2, 0, &crate::mixture::EmConfig::default()).unwrap();
        let file = ModelFile::from_fitted(&fit, Metadata::new(0, serde_json::json!({"k": 2})));
        let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_mixture().unwrap(), fit.mixture);
    }
}
