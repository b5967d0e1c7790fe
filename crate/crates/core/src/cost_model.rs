//! Feature taxonomies and the block Mahalanobis cost of adapting features.
//!
//! Features are typed as improvable (I), manipulable (M) or immutable. The
//! cost of moving from `x` to `x'` is the Mahalanobis norm of the actionable
//! displacement under a block-diagonal inverse covariance
//! `diag(S_I^{-1}, S_M^{-1})`. Each block is indexed by the features of that
//! kind in taxonomy order.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linear::LinearModel;

const SYMMETRY_TOL: f64 = 1e-12;
const IMMUTABLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Improvable,
    Manipulable,
    Immutable,
}

impl FeatureKind {
    /// Single-letter tag used in flipset tables.
    pub fn tag(self) -> &'static str {
        match self {
            FeatureKind::Improvable => "I",
            FeatureKind::Manipulable => "M",
            FeatureKind::Immutable => "U",
        }
    }
}

/// Which features a decision subject may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Improvable features only.
    I,
    /// Manipulable features only.
    M,
    /// All actionable features.
    A,
}

impl Family {
    pub fn includes(self, kind: FeatureKind) -> bool {
        matches!(
            (self, kind),
            (Family::I, FeatureKind::Improvable)
                | (Family::M, FeatureKind::Manipulable)
                | (Family::A, FeatureKind::Improvable | FeatureKind::Manipulable)
        )
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::I => "I",
            Family::M => "M",
            Family::A => "A",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "improvable" => Ok(Family::I),
            "M" | "m" | "manipulable" => Ok(Family::M),
            "A" | "a" | "all" | "unconstrained" => Ok(Family::A),
            other => Err(Error::InvalidConfig(format!("unknown response family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    /// Prohibited direction of change: +1 forbids increases, -1 forbids
    /// decreases, 0 leaves the feature unconstrained.
    #[serde(default)]
    pub direction: i8,
}

impl Feature {
    pub fn new(name: impl Into<String>, kind: FeatureKind, direction: i8) -> Self {
        Self {
            name: name.into(),
            kind,
            direction,
        }
    }
}

/// Ordered, validated list of features.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FeatureTaxonomy {
    features: Vec<Feature>,
    #[serde(skip)]
    improvable: Vec<usize>,
    #[serde(skip)]
    manipulable: Vec<usize>,
    #[serde(skip)]
    immutable: Vec<usize>,
}

impl<'de> Deserialize<'de> for FeatureTaxonomy {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let features = Vec::<Feature>::deserialize(de)?;
        FeatureTaxonomy::new(features).map_err(serde::de::Error::custom)
    }
}

impl FeatureTaxonomy {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidTaxonomy(format!("duplicate feature `{}`", f.name)));
            }
            if !matches!(f.direction, -1..=1) {
                return Err(Error::InvalidTaxonomy(format!(
                    "feature `{}` has direction {} (expected -1, 0 or 1)",
                    f.name, f.direction
                )));
            }
            if f.kind == FeatureKind::Immutable && f.direction != 0 {
                return Err(Error::InvalidTaxonomy(format!(
                    "immutable feature `{}` cannot carry a direction",
                    f.name
                )));
            }
        }
        let indices = |kind| {
            features
                .iter()
                .enumerate()
                .filter(|(_, f)| f.kind == kind)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        Ok(Self {
            improvable: indices(FeatureKind::Improvable),
            manipulable: indices(FeatureKind::Manipulable),
            immutable: indices(FeatureKind::Immutable),
            features,
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("taxonomy serializes")
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let compact = serde_json::to_vec(self).expect("taxonomy serializes");
        hex::encode(Sha256::digest(&compact))
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn improvable(&self) -> &[usize] {
        &self.improvable
    }

    pub fn manipulable(&self) -> &[usize] {
        &self.manipulable
    }

    pub fn immutable(&self) -> &[usize] {
        &self.immutable
    }

    /// Column indices of the features in `family`, block order (I then M).
    pub fn family_indices(&self, family: Family) -> Vec<usize> {
        match family {
            Family::I => self.improvable.clone(),
            Family::M => self.manipulable.clone(),
            Family::A => self.improvable.iter().chain(&self.manipulable).copied().collect(),
        }
    }

    pub fn directions(&self) -> Vec<i8> {
        self.features.iter().map(|f| f.direction).collect()
    }

    pub fn has_directions(&self) -> bool {
        self.features.iter().any(|f| f.direction != 0)
    }

    /// Returns a copy with some features reassigned to a new kind.
    ///
    /// Directions are kept unless the new kind is immutable, where they are
    /// cleared.
    pub fn with_kinds(&self, swaps: &[(String, FeatureKind)]) -> Result<Self> {
        let mut features = self.features.clone();
        for (name, kind) in swaps {
            let i = self
                .index_of(name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            features[i].kind = *kind;
            if *kind == FeatureKind::Immutable {
                features[i].direction = 0;
            }
        }
        Self::new(features)
    }

    pub fn with_directions(&self, directions: &[(String, i8)]) -> Result<Self> {
        let mut features = self.features.clone();
        for (name, dir) in directions {
            let i = self
                .index_of(name)
                .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
            features[i].direction = *dir;
        }
        Self::new(features)
    }

    pub(crate) fn check_vector(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim(what.to_string(), self.dim(), x.len()));
        }
        Ok(())
    }
}

/// Block inverse-covariance cost geometry with cached inverses and factors.
#[derive(Debug, Clone)]
pub struct CostModel {
    inv_cov_improvable: DMatrix<f64>,
    inv_cov_manipulable: DMatrix<f64>,
    cov_improvable: DMatrix<f64>,
    cov_manipulable: DMatrix<f64>,
    chol_improvable: DMatrix<f64>,
    chol_manipulable: DMatrix<f64>,
}

impl CostModel {
    /// Validates both inverse-covariance blocks and caches `S_I`, `S_M` and
    /// the lower Cholesky factors of `S_I^{-1}`, `S_M^{-1}`.
    pub fn new(inv_cov_improvable: DMatrix<f64>, inv_cov_manipulable: DMatrix<f64>) -> Result<Self> {
        let (inv_i, cov_i, chol_i) = factor_block(inv_cov_improvable, "inv_cov_improvable")?;
        let (inv_m, cov_m, chol_m) = factor_block(inv_cov_manipulable, "inv_cov_manipulable")?;
        Ok(Self {
            inv_cov_improvable: inv_i,
            inv_cov_manipulable: inv_m,
            cov_improvable: cov_i,
            cov_manipulable: cov_m,
            chol_improvable: chol_i,
            chol_manipulable: chol_m,
        })
    }

    /// `S_I^{-1} = improvable_scale * I`, `S_M^{-1} = manipulable_scale * I`.
    pub fn scaled_identity(d_i: usize, improvable_scale: f64, d_m: usize, manipulable_scale: f64) -> Result<Self> {
        Self::new(
            DMatrix::identity(d_i, d_i) * improvable_scale,
            DMatrix::identity(d_m, d_m) * manipulable_scale,
        )
    }

    pub fn d_improvable(&self) -> usize {
        self.inv_cov_improvable.nrows()
    }

    pub fn d_manipulable(&self) -> usize {
        self.inv_cov_manipulable.nrows()
    }

    pub fn inv_cov(&self, kind: FeatureKind) -> &DMatrix<f64> {
        match kind {
            FeatureKind::Improvable => &self.inv_cov_improvable,
            FeatureKind::Manipulable => &self.inv_cov_manipulable,
            FeatureKind::Immutable => panic!("immutable features have no cost block"),
        }
    }

    pub fn cov(&self, kind: FeatureKind) -> &DMatrix<f64> {
        match kind {
            FeatureKind::Improvable => &self.cov_improvable,
            FeatureKind::Manipulable => &self.cov_manipulable,
            FeatureKind::Immutable => panic!("immutable features have no cost block"),
        }
    }

    pub fn cholesky_factor(&self, kind: FeatureKind) -> &DMatrix<f64> {
        match kind {
            FeatureKind::Improvable => &self.chol_improvable,
            FeatureKind::Manipulable => &self.chol_manipulable,
            FeatureKind::Immutable => panic!("immutable features have no cost block"),
        }
    }

    /// Full block-diagonal `S^{-1}` over the actionable features (I then M).
    pub fn inv_cov_actionable(&self) -> DMatrix<f64> {
        block_diag(&self.inv_cov_improvable, &self.inv_cov_manipulable)
    }

    pub fn cov_actionable(&self) -> DMatrix<f64> {
        block_diag(&self.cov_improvable, &self.cov_manipulable)
    }

    /// Block covariance `S_F` for a family, indexed like
    /// [`FeatureTaxonomy::family_indices`].
    pub fn cov_family(&self, family: Family) -> DMatrix<f64> {
        match family {
            Family::I => self.cov_improvable.clone(),
            Family::M => self.cov_manipulable.clone(),
            Family::A => self.cov_actionable(),
        }
    }

    pub fn inv_cov_family(&self, family: Family) -> DMatrix<f64> {
        match family {
            Family::I => self.inv_cov_improvable.clone(),
            Family::M => self.inv_cov_manipulable.clone(),
            Family::A => self.inv_cov_actionable(),
        }
    }

    pub fn check_taxonomy(&self, tax: &FeatureTaxonomy) -> Result<()> {
        if tax.improvable().len() != self.d_improvable() {
            return Err(Error::dim("improvable cost block", tax.improvable().len(), self.d_improvable()));
        }
        if tax.manipulable().len() != self.d_manipulable() {
            return Err(Error::dim("manipulable cost block", tax.manipulable().len(), self.d_manipulable()));
        }
        Ok(())
    }

    pub fn to_spec(&self) -> CostSpec {
        CostSpec::Matrices {
            inv_cov_improvable: rows_of(&self.inv_cov_improvable),
            inv_cov_manipulable: rows_of(&self.inv_cov_manipulable),
        }
    }
}

/// JSON form of a cost model, either explicit blocks or scaled identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Matrices {
        inv_cov_improvable: Vec<Vec<f64>>,
        inv_cov_manipulable: Vec<Vec<f64>>,
    },
    Scales {
        improvable_scale: f64,
        manipulable_scale: f64,
    },
}

impl CostSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Instantiates the model for a taxonomy, checking block sizes.
    pub fn build(&self, tax: &FeatureTaxonomy) -> Result<CostModel> {
        let model = match self {
            CostSpec::Matrices {
                inv_cov_improvable,
                inv_cov_manipulable,
            } => CostModel::new(
                matrix_from_rows(inv_cov_improvable, "inv_cov_improvable")?,
                matrix_from_rows(inv_cov_manipulable, "inv_cov_manipulable")?,
            )?,
            CostSpec::Scales {
                improvable_scale,
                manipulable_scale,
            } => CostModel::scaled_identity(
                tax.improvable().len(),
                *improvable_scale,
                tax.manipulable().len(),
                *manipulable_scale,
            )?,
        };
        model.check_taxonomy(tax)?;
        Ok(model)
    }
}

/// Mahalanobis norm of the actionable displacement from `x` to `x_prime`.
pub fn cost(x: &[f64], x_prime: &[f64], model: &CostModel, tax: &FeatureTaxonomy) -> Result<f64> {
    tax.check_vector(x, "x")?;
    tax.check_vector(x_prime, "x_prime")?;
    model.check_taxonomy(tax)?;
    for &k in tax.immutable() {
        if (x[k] - x_prime[k]).abs() > IMMUTABLE_TOL {
            return Err(Error::ImmutableViolation {
                feature: tax.feature(k).name.clone(),
                from: x[k],
                to: x_prime[k],
            });
        }
    }
    let block = |idx: &[usize], inv: &DMatrix<f64>| {
        let delta = DVector::from_iterator(idx.len(), idx.iter().map(|&k| x[k] - x_prime[k]));
        (inv * &delta).dot(&delta)
    };
    let q = block(tax.improvable(), &model.inv_cov_improvable)
        + block(tax.manipulable(), &model.inv_cov_manipulable);
    Ok(q.max(0.0).sqrt())
}

/// `C_F = w_F^T S_F w_F`; `C_A = C_I + C_M`.
pub fn effective_variance(w: &LinearModel, model: &CostModel, tax: &FeatureTaxonomy, family: Family) -> f64 {
    let block = |idx: &[usize], cov: &DMatrix<f64>| {
        let wf = DVector::from_iterator(idx.len(), idx.iter().map(|&k| w.weights[k]));
        (cov * &wf).dot(&wf).max(0.0)
    };
    match family {
        Family::I => block(tax.improvable(), &model.cov_improvable),
        Family::M => block(tax.manipulable(), &model.cov_manipulable),
        Family::A => {
            block(tax.improvable(), &model.cov_improvable) + block(tax.manipulable(), &model.cov_manipulable)
        }
    }
}

/// `S_F w_F` scattered back to full feature positions (zeros elsewhere).
pub(crate) fn cov_times_weights(w: &[f64], model: &CostModel, tax: &FeatureTaxonomy, family: Family) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    let mut scatter = |idx: &[usize], cov: &DMatrix<f64>| {
        for (a, &ka) in idx.iter().enumerate() {
            out[ka] = idx.iter().enumerate().map(|(b, &kb)| cov[(a, b)] * w[kb]).sum();
        }
    };
    if matches!(family, Family::I | Family::A) {
        scatter(tax.improvable(), &model.cov_improvable);
    }
    if matches!(family, Family::M | Family::A) {
        scatter(tax.manipulable(), &model.cov_manipulable);
    }
    out
}

fn factor_block(m: DMatrix<f64>, which: &'static str) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if !m.is_square() {
        return Err(Error::dim(format!("{which} columns"), m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((m.clone(), m.clone(), m));
    }
    let asymmetry = (&m - m.transpose()).amax();
    let scale = m.amax().max(1.0);
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry });
    }
    let sym = (&m + m.transpose()) * 0.5;
    let chol = Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite { which })?;
    let cov = chol.inverse();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok((sym, cov, chol.l()))
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], which: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for r in rows {
        if r.len() != n {
            return Err(Error::dim(format!("{which} row length"), n, r.len()));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tax(kinds: &[FeatureKind]) -> FeatureTaxonomy {
        FeatureTaxonomy::new(
            kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| Feature::new(format!("f{i}"), k, 0))
                .collect(),
        )
        .unwrap()
    }

    use FeatureKind::{Immutable as U, Improvable as I, Manipulable as M};

    #[test]
    fn experiment_scales_invert() {
        let m = CostModel::scaled_identity(2, 1.0, 2, 0.2).unwrap();
        assert_relative_eq!(m.cov(I), &DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(m.cov(M), &(DMatrix::identity(2, 2) * 5.0), epsilon = 1e-12);
    }

    #[test]
    fn identity_is_self_inverse() {
        let m = CostModel::scaled_identity(3, 1.0, 1, 1.0).unwrap();
        assert_eq!(m.cov(I), &DMatrix::identity(3, 3));
        assert_eq!(m.cov(M), &DMatrix::identity(1, 1));
    }

    #[test]
    fn correlated_block_inverse_matches_generic_solve() {
        let inv = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let m = CostModel::new(inv.clone(), DMatrix::identity(1, 1)).unwrap();
        // independent route: LU solve against the identity
        let lu_inv = inv.clone().lu().solve(&DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(m.cov(I), &lu_inv, epsilon = 1e-12);
        let expected = DMatrix::from_row_slice(2, 2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]);
        assert_relative_eq!(m.cov(I), &expected, epsilon = 1e-12);
        assert_relative_eq!(m.cov(I) * &inv, DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CostModel::new(indefinite, DMatrix::identity(1, 1)),
            Err(Error::NotPositiveDefinite { which: "inv_cov_improvable" })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            CostModel::new(DMatrix::identity(1, 1), asym),
            Err(Error::NotSymmetric { .. })
        ));
        let zero = DMatrix::zeros(1, 1);
        assert!(CostModel::new(zero, DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-14, 1.0]);
        let cm = CostModel::new(m, DMatrix::zeros(0, 0)).unwrap();
        let s = cm.inv_cov(I);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn empty_blocks_are_legal() {
        let t = tax(&[I, U]);
        let m = CostModel::scaled_identity(1, 1.0, 0, 0.2).unwrap();
        m.check_taxonomy(&t).unwrap();
        let w = LinearModel::new(0.0, vec![1.0, 1.0]);
        assert_eq!(effective_variance(&w, &m, &t, Family::M), 0.0);
        assert_eq!(effective_variance(&w, &m, &t, Family::A), 1.0);
    }

    #[test]
    fn cost_examples() {
        let t = tax(&[I, M, U]);
        let m = CostModel::scaled_identity(1, 1.0, 1, 1.0).unwrap();
        let x = [0.3, -1.0, 7.0];
        assert_eq!(cost(&x, &x, &m, &t).unwrap(), 0.0);
        assert_relative_eq!(cost(&x, &[3.3, 3.0, 7.0], &m, &t).unwrap(), 5.0, epsilon = 1e-12);

        let t2 = tax(&[I, I]);
        let m2 = CostModel::new(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), DMatrix::zeros(0, 0)).unwrap();
        // brute force quadratic form: 4*1*1 + 1*1*1
        let brute = (4.0f64 * 1.0 * 1.0 + 1.0 * 1.0 * 1.0).sqrt();
        assert_relative_eq!(cost(&[0.0, 0.0], &[1.0, 1.0], &m2, &t2).unwrap(), brute, epsilon = 1e-12);
        assert_relative_eq!(brute, 2.23607, epsilon = 1e-5);
    }

    #[test]
    fn immutable_change_is_rejected() {
        let t = tax(&[I, U]);
        let m = CostModel::scaled_identity(1, 1.0, 0, 1.0).unwrap();
        let err = cost(&[0.0, 1.0], &[0.0, 2.0], &m, &t).unwrap_err();
        assert!(matches!(err, Error::ImmutableViolation { ref feature, .. } if feature == "f1"));
    }

    #[test]
    fn effective_variance_examples() {
        let t = tax(&[I, I, M, M]);
        let m = CostModel::scaled_identity(2, 1.0, 2, 0.2).unwrap();
        let w0 = LinearModel::zeros(4);
        assert_eq!(effective_variance(&w0, &m, &t, Family::A), 0.0);
        let w = LinearModel::new(0.0, vec![1.0, 1.0, 0.3, -0.4]);
        assert_relative_eq!(effective_variance(&w, &m, &t, Family::I), 2.0, epsilon = 1e-12);
        // 5 * (0.09 + 0.16)
        assert_relative_eq!(effective_variance(&w, &m, &t, Family::M), 1.25, epsilon = 1e-12);
        assert_relative_eq!(effective_variance(&w, &m, &t, Family::A), 3.25, epsilon = 1e-12);
    }

    #[test]
    fn taxonomy_validation() {
        let dup = FeatureTaxonomy::new(vec![Feature::new("a", I, 0), Feature::new("a", M, 0)]);
        assert!(matches!(dup, Err(Error::InvalidTaxonomy(_))));
        let dir = FeatureTaxonomy::new(vec![Feature::new("a", U, 1)]);
        assert!(matches!(dir, Err(Error::InvalidTaxonomy(_))));
        let bad = FeatureTaxonomy::new(vec![Feature::new("a", I, 2)]);
        assert!(matches!(bad, Err(Error::InvalidTaxonomy(_))));
    }

    #[test]
    fn taxonomy_json_format() {
        let json = r#"[
            {"name": "x1", "kind": "improvable", "direction": 1},
            {"name": "m1", "kind": "manipulable", "direction": 0},
            {"name": "age", "kind": "immutable", "direction": 0}
        ]"#;
        let t = FeatureTaxonomy::from_json(json).unwrap();
        assert_eq!(t.improvable(), &[0]);
        assert_eq!(t.manipulable(), &[1]);
        assert_eq!(t.immutable(), &[2]);
        assert_eq!(t.directions(), vec![1, 0, 0]);
        let back = FeatureTaxonomy::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.hash(), t.hash());
        assert!(FeatureTaxonomy::from_json(r#"[{"name":"a","kind":"immutable","direction":-1}]"#).is_err());
    }

    #[test]
    fn cost_spec_formats() {
        let t = tax(&[I, I, M]);
        let scales = CostSpec::from_json(r#"{"improvable_scale": 1.0, "manipulable_scale": 0.2}"#).unwrap();
        let m = scales.build(&t).unwrap();
        assert_relative_eq!(m.cov(M)[(0, 0)], 5.0, epsilon = 1e-12);
        let mats = CostSpec::from_json(
            r#"{"inv_cov_improvable": [[2, 1], [1, 2]], "inv_cov_manipulable": [[1]]}"#,
        )
        .unwrap();
        let m = mats.build(&t).unwrap();
        assert_relative_eq!(m.cov(I)[(0, 1)], -1.0 / 3.0, epsilon = 1e-12);
        let wrong = CostSpec::from_json(r#"{"inv_cov_improvable": [[1]], "inv_cov_manipulable": [[1]]}"#).unwrap();
        assert!(matches!(wrong.build(&t), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn interleaved_blocks_follow_taxonomy_order() {
        let t = tax(&[M, I, U, I]);
        assert_eq!(t.family_indices(Family::A), vec![1, 3, 0]);
        let m = CostModel::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            DMatrix::identity(1, 1) * 0.5,
        )
        .unwrap();
        let w = [1.0, 1.0, 5.0, 0.0];
        let u = cov_times_weights(&w, &m, &t, Family::A);
        assert_relative_eq!(u[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(u[1], 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(u[2], 0.0);
        assert_relative_eq!(u[3], -1.0 / 3.0, epsilon = 1e-12);
    }
}
