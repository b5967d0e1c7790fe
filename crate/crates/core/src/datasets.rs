//! Datasets: the synthetic causal toy generator, CSV ingestion and
//! cross-validation fold plans.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost_model::{Feature, FeatureKind, FeatureTaxonomy};
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// Ground-truth probability of a positive outcome,
/// `sigmoid(sum_k b_k x_k / label_noise)` over named features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelOracle {
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    pub label_noise: f64,
}

impl LabelOracle {
    fn logit(&self, columns: &[usize], x: &[f64]) -> f64 {
        columns.iter().zip(&self.coefficients).map(|(&k, b)| b * x[k]).sum()
    }

    fn probability_of_logit(&self, logit: f64) -> f64 {
        if self.label_noise == 0.0 {
            if logit >= 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            sigmoid(logit / self.label_noise)
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
struct BoundOracle {
    oracle: LabelOracle,
    columns: Vec<usize>,
}

/// Feature matrix (row-major), labels in {-1, +1} and the taxonomy.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    features: Vec<f64>,
    labels: Vec<i8>,
    taxonomy: FeatureTaxonomy,
    oracle: Option<BoundOracle>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<f64>, labels: Vec<i8>, taxonomy: FeatureTaxonomy) -> Result<Self> {
        let d = taxonomy.dim();
        if features.len() != labels.len() * d {
            return Err(Error::dim("feature matrix entries", labels.len() * d, features.len()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::UnknownLabelValue(bad.to_string()));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            taxonomy,
            oracle: None,
        })
    }

    /// Attaches a ground-truth oracle; its features must exist.
    pub fn with_oracle(mut self, oracle: LabelOracle) -> Result<Self> {
        if oracle.features.len() != oracle.coefficients.len() {
            return Err(Error::dim("oracle coefficients", oracle.features.len(), oracle.coefficients.len()));
        }
        let columns = oracle
            .features
            .iter()
            .map(|name| self.taxonomy.index_of(name).ok_or_else(|| Error::UnknownFeature(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        self.oracle = Some(BoundOracle { oracle, columns });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.taxonomy.dim()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn taxonomy(&self) -> &FeatureTaxonomy {
        &self.taxonomy
    }

    pub fn oracle(&self) -> Option<&LabelOracle> {
        self.oracle.as_ref().map(|b| &b.oracle)
    }

    /// Probability that a subject with features `x` is truly positive.
    pub fn true_probability(&self, x: &[f64]) -> Option<f64> {
        self.oracle
            .as_ref()
            .map(|b| b.oracle.probability_of_logit(b.oracle.logit(&b.columns, x)))
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&1) && self.labels.contains(&-1)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.d());
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            name: self.name.clone(),
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            taxonomy: self.taxonomy.clone(),
            oracle: self.oracle.clone(),
        }
    }

    /// Keeps only `columns`, in the given order. The oracle is dropped.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        let taxonomy = FeatureTaxonomy::new(columns.iter().map(|&k| self.taxonomy.feature(k).clone()).collect())?;
        let mut features = Vec::with_capacity(self.n() * columns.len());
        for row in self.rows() {
            features.extend(columns.iter().map(|&k| row[k]));
        }
        Self::new(self.name.clone(), features, self.labels.clone(), taxonomy)
    }

    /// Same data under a different taxonomy of equal dimension.
    pub fn with_taxonomy(&self, taxonomy: FeatureTaxonomy) -> Result<Self> {
        if taxonomy.dim() != self.d() {
            return Err(Error::dim("taxonomy", self.d(), taxonomy.dim()));
        }
        let mut out = self.clone();
        out.taxonomy = taxonomy;
        Ok(out)
    }

    /// Appends the rows of `other` (same taxonomy assumed).
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.taxonomy != self.taxonomy {
            return Err(Error::InvalidTaxonomy("cannot concatenate datasets with different taxonomies".into()));
        }
        let mut out = self.clone();
        out.features.extend_from_slice(&other.features);
        out.labels.extend_from_slice(&other.labels);
        Ok(out)
    }
}

/// Structural parameters of the synthetic toy generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyParams {
    pub n: usize,
    pub noise_x2: f64,
    pub label_weights: [f64; 2],
    pub label_noise: f64,
    pub m1_coupling: f64,
    pub m2_coupling_x2: f64,
    pub m2_coupling_y: f64,
    pub m_noise: f64,
    pub seed: u64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            n: 5000,
            noise_x2: 0.5,
            label_weights: [1.5, 1.5],
            label_noise: 1.0,
            m1_coupling: 1.0,
            m2_coupling_x2: 0.5,
            m2_coupling_y: 0.5,
            m_noise: 0.5,
            seed: 0,
        }
    }
}

impl ToyParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidConfig(format!("toy n must be at least 10, got {}", self.n)));
        }
        for (name, v) in [
            ("noise_x2", self.noise_x2),
            ("m_noise", self.m_noise),
            ("label_noise", self.label_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    pub fn oracle(&self) -> LabelOracle {
        LabelOracle {
            features: vec!["x1".into(), "x2".into()],
            coefficients: self.label_weights.to_vec(),
            label_noise: self.label_noise,
        }
    }

    pub fn taxonomy() -> FeatureTaxonomy {
        use FeatureKind::{Improvable, Manipulable};
        FeatureTaxonomy::new(vec![
            Feature::new("x1", Improvable, 0),
            Feature::new("x2", Improvable, 0),
            Feature::new("m1", Manipulable, 0),
            Feature::new("m2", Manipulable, 0),
        ])
        .expect("static taxonomy is valid")
    }
}

/// Samples the toy causal model.
///
/// `Z1, Z2 ~ N(0, 1)`, `X1 = Z1`, `X2 = Z2 + N(0, noise_x2^2)`,
/// `P(Y = +1 | X) = sigmoid((b1 X1 + b2 X2) / label_noise)`,
/// `M1 = m1_coupling Y + N(0, m_noise^2)` and
/// `M2 = m2_coupling_x2 X2 + m2_coupling_y Y + N(0, m_noise^2)`.
/// Observed columns are `(x1, x2, m1, m2)` typed `(I, I, M, M)`.
pub fn generate_toy(p: &ToyParams) -> Result<Dataset> {
    p.validate()?;
    let oracle = p.oracle();
    let mut rng = seed::rng(p.seed, Stream::Data, 0);
    let mut features = Vec::with_capacity(p.n * 4);
    let mut labels = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.random();
        let e_m1: f64 = rng.sample(StandardNormal);
        let e_m2: f64 = rng.sample(StandardNormal);

        let x1 = z1;
        let x2 = z2 + p.noise_x2 * e2;
        let prob = oracle.probability_of_logit(p.label_weights[0] * x1 + p.label_weights[1] * x2);
        let y: i8 = if u < prob { 1 } else { -1 };
        let yf = f64::from(y);
        let m1 = p.m1_coupling * yf + p.m_noise * e_m1;
        let m2 = p.m2_coupling_x2 * x2 + p.m2_coupling_y * yf + p.m_noise * e_m2;
        features.extend_from_slice(&[x1, x2, m1, m2]);
        labels.push(y);
    }
    Dataset::new("toy", features, labels, ToyParams::taxonomy())?.with_oracle(oracle)
}

/// How label cells map to {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpec {
    pub column: String,
    pub positive: String,
    /// When absent, the first non-positive value seen is the negative class.
    pub negative: Option<String>,
}

impl LabelSpec {
    pub fn new(column: impl Into<String>, positive: impl Into<String>) -> Self {
        Self {
            column: column.into(),
            positive: positive.into(),
            negative: None,
        }
    }
}

/// Reads a numeric CSV; columns follow taxonomy order.
pub fn read_csv<R: Read>(reader: R, taxonomy: FeatureTaxonomy, label: &LabelSpec, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let label_col = *position
        .get(label.column.as_str())
        .ok_or_else(|| Error::MissingColumn(label.column.clone()))?;
    let columns = taxonomy
        .names()
        .map(|n| position.get(n).copied().ok_or_else(|| Error::MissingColumn(n.to_string())))
        .collect::<Result<Vec<_>>>()?;

    let mut negative = label.negative.clone();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (&c, fname) in columns.iter().zip(taxonomy.names()) {
            let cell = record.get(c).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row,
                column: fname.to_string(),
                value: cell.to_string(),
            })?;
            features.push(v);
        }
        let cell = record.get(label_col).unwrap_or("").trim();
        let y = if cell == label.positive {
            1
        } else {
            match &negative {
                Some(neg) if neg == cell => -1,
                Some(_) => return Err(Error::UnknownLabelValue(cell.to_string())),
                None => {
                    negative = Some(cell.to_string());
                    -1
                }
            }
        };
        labels.push(y);
    }
    Dataset::new(name, features, labels, taxonomy)
}

pub fn load_csv(path: &Path, taxonomy: FeatureTaxonomy, label: &LabelSpec) -> Result<Dataset> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_csv(std::fs::File::open(path)?, taxonomy, label, &name)
}

pub fn read_taxonomy(path: &Path) -> Result<FeatureTaxonomy> {
    FeatureTaxonomy::from_json(&std::fs::read_to_string(path)?)
}

/// Writes features then the label column (`1` / `-1`). Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(data: &Dataset, label_column: &str, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.taxonomy().names().collect();
    header.push(label_column);
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..data.n() {
        record.clear();
        record.extend(data.row(i).iter().map(|v| v.to_string()));
        record.push(data.label(i).to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(data: &Dataset, label_column: &str, path: &Path) -> Result<()> {
    write_csv(data, label_column, std::fs::File::create(path)?)
}

/// Reassigns feature kinds, keeping values, labels and oracle.
pub fn misspecify(data: &Dataset, swaps: &[(String, FeatureKind)]) -> Result<Dataset> {
    let taxonomy = data.taxonomy.with_kinds(swaps)?;
    let mut out = data.clone();
    out.taxonomy = taxonomy;
    Ok(out)
}

/// Seeded partition of row indices into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    /// Rows in fold `f`, ascending.
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == f).collect()
    }

    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Fisher–Yates shuffle of `0..n`, cut into `k` contiguous folds; the first
/// `n % k` folds get one extra row.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || n < k {
        return Err(Error::TooFewRows { n, k });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed, Stream::Folds, 0));
    let (base, extra) = (n / k, n % k);
    let mut assignments = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &perm[pos..pos + size] {
            assignments[row] = f;
        }
        pos += size;
    }
    Ok(FoldPlan { k, assignments, seed })
}
