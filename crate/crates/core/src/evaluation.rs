//! Metrics under best-response adaptation, cross-validation and λ sweeps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::best_response::best_response;
use crate::cost_model::{CostModel, Family};
use crate::datasets::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::linear::LinearModel;
use crate::par::{self, Exec};
use crate::training::{fit_with, TrainConfig};

/// Which subjects the improvement rate averages over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImprovementBase {
    /// Truly negative subjects, `y = -1`.
    #[default]
    NegativeLabel,
    /// Subjects the model rejects, `h(x) = -1`.
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Response family played at deployment. `M` is the worst case.
    pub deployment_family: Family,
    pub improvement_base: ImprovementBase,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            deployment_family: Family::M,
            improvement_base: ImprovementBase::NegativeLabel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_error: f64,
    pub deployment_error: f64,
    /// `None` when no subject falls in the improvement base.
    pub improvement_rate: Option<f64>,
    pub n_eval: usize,
    pub method: String,
    pub lambda: f64,
}

impl EvalReport {
    pub fn labelled(mut self, method: impl Into<String>, lambda: f64) -> Self {
        self.method = method.into();
        self.lambda = lambda;
        self
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    n: usize,
    test_wrong: usize,
    deploy_wrong: usize,
    base: usize,
    improved: usize,
}

impl Counts {
    fn add(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            test_wrong: self.test_wrong + o.test_wrong,
            deploy_wrong: self.deploy_wrong + o.deploy_wrong,
            base: self.base + o.base,
            improved: self.improved + o.improved,
        }
    }
}

pub fn evaluate(w: &LinearModel, data: &Dataset, model: &CostModel) -> Result<EvalReport> {
    evaluate_with(w, data, model, &EvalOptions::default(), Exec::default())
}

pub fn evaluate_with(
    w: &LinearModel,
    data: &Dataset,
    model: &CostModel,
    opts: &EvalOptions,
    exec: Exec,
) -> Result<EvalReport> {
    if data.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let tax = data.taxonomy();
    w.check_dim(tax.dim())?;
    model.check_taxonomy(tax)?;
    let counts = par::chunked_reduce(
        exec,
        data.n(),
        |range| {
            let mut c = Counts::default();
            for i in range {
                let (x, y) = (data.row(i), data.label(i));
                let h = w.predict(x);
                c.n += 1;
                c.test_wrong += usize::from(h != y);
                let deployed = best_response(x, w, model, tax, opts.deployment_family)?;
                c.deploy_wrong += usize::from(deployed.predicted_after() != y);
                let in_base = match opts.improvement_base {
                    ImprovementBase::NegativeLabel => y == -1,
                    ImprovementBase::Rejected => h == -1,
                };
                if in_base {
                    c.base += 1;
                    let improved = best_response(x, w, model, tax, Family::I)?;
                    c.improved += usize::from(improved.predicted_after() == 1);
                }
            }
            Ok(c)
        },
        |a: Result<Counts>, b: Result<Counts>| Ok(a?.add(b?)),
    )
    .expect("non-empty dataset")?;
    let n = counts.n as f64;
    Ok(EvalReport {
        test_error: counts.test_wrong as f64 / n,
        deployment_error: counts.deploy_wrong as f64 / n,
        improvement_rate: (counts.base > 0).then(|| counts.improved as f64 / counts.base as f64),
        n_eval: counts.n,
        method: String::new(),
        lambda: 0.0,
    })
}

/// Mean gain in true-positive probability from improving best responses,
/// over subjects the model rejects. Zero when nobody is rejected.
pub fn true_improvement(w: &LinearModel, data: &Dataset, model: &CostModel) -> Result<f64> {
    if data.oracle().is_none() {
        return Err(Error::NoOracle);
    }
    let tax = data.taxonomy();
    let (mut total, mut count) = (0.0, 0usize);
    for x in data.rows() {
        if w.predict(x) == 1 {
            continue;
        }
        let br = best_response(x, w, model, tax, Family::I)?;
        let before = data.true_probability(x).ok_or(Error::NoOracle)?;
        let after = data.true_probability(&br.adapted).ok_or(Error::NoOracle)?;
        total += after - before;
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Mean and sample standard deviation (divisor `k - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVSummary {
    pub method: String,
    pub lambda: f64,
    pub test_error: MeanStd,
    pub deployment_error: MeanStd,
    /// Over folds where the rate is defined.
    pub improvement_rate: Option<MeanStd>,
    pub folds: Vec<EvalReport>,
}

impl CVSummary {
    /// Wraps one report as a single-fold summary.
    pub fn single(report: EvalReport) -> Self {
        Self::from_folds(report.method.clone(), report.lambda, vec![report])
    }

    fn from_folds(method: String, lambda: f64, folds: Vec<EvalReport>) -> Self {
        let col = |f: fn(&EvalReport) -> Option<f64>| folds.iter().filter_map(f).collect::<Vec<_>>();
        Self {
            test_error: MeanStd::of(&col(|r| Some(r.test_error))).expect("at least one fold"),
            deployment_error: MeanStd::of(&col(|r| Some(r.deployment_error))).expect("at least one fold"),
            improvement_rate: MeanStd::of(&col(|r| r.improvement_rate)),
            method,
            lambda,
            folds,
        }
    }

    /// Writes one row per fold, then `mean` and `std` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        self.write_rows(&mut wtr)?;
        wtr.flush()?;
        Ok(())
    }

    fn write_rows<W: Write>(&self, wtr: &mut csv::Writer<W>) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (f, r) in self.folds.iter().enumerate() {
            wtr.write_record([
                self.method.clone(),
                self.lambda.to_string(),
                f.to_string(),
                r.test_error.to_string(),
                r.deployment_error.to_string(),
                opt(r.improvement_rate),
            ])?;
        }
        let stat = |label: &str, pick: fn(&MeanStd) -> f64| {
            [
                self.method.clone(),
                self.lambda.to_string(),
                label.to_string(),
                pick(&self.test_error).to_string(),
                pick(&self.deployment_error).to_string(),
                opt(self.improvement_rate.as_ref().map(pick)),
            ]
        };
        wtr.write_record(stat("mean", |m| m.mean))?;
        wtr.write_record(stat("std", |m| m.std))?;
        Ok(())
    }
}

const CSV_HEADER: [&str; 6] = ["method", "lambda", "fold", "test_error", "deployment_error", "improvement_rate"];

pub fn cross_validate(data: &Dataset, model: &CostModel, cfg: &TrainConfig, folds: &FoldPlan) -> Result<CVSummary> {
    cross_validate_with(data, model, cfg, folds, &EvalOptions::default(), Exec::default())
}

/// Trains on the out-of-fold rows and evaluates on the held-out fold, for
/// every fold. Folds run concurrently under [`Exec::Parallel`].
pub fn cross_validate_with(
    data: &Dataset,
    model: &CostModel,
    cfg: &TrainConfig,
    folds: &FoldPlan,
    opts: &EvalOptions,
    exec: Exec,
) -> Result<CVSummary> {
    if folds.n() != data.n() {
        return Err(Error::dim("fold plan", data.n(), folds.n()));
    }
    let fold_ids: Vec<usize> = (0..folds.k).collect();
    let reports = par::map(exec, &fold_ids, |&f| {
        let run = || {
            let train = data.subset(&folds.train_indices(f));
            let test = data.subset(&folds.test_indices(f));
            let fitted = fit_with(&train, model, cfg, Exec::Sequential)?;
            evaluate_with(&fitted.model, &test, model, opts, Exec::Sequential)
        };
        run()
            .map(|r| r.labelled(cfg.method.to_string(), cfg.lambda))
            .map_err(|e| Error::Fold { fold: f, source: Box::new(e) })
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CVSummary::from_folds(cfg.method.to_string(), cfg.lambda, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub lambda_grid: Vec<f64>,
    pub summaries: Vec<CVSummary>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CSV_HEADER)?;
        for s in &self.summaries {
            s.write_rows(&mut wtr)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn lambda_sweep(
    data: &Dataset,
    model: &CostModel,
    base: &TrainConfig,
    grid: &[f64],
    folds: &FoldPlan,
) -> Result<SweepResult> {
    lambda_sweep_with(data, model, base, grid, folds, &EvalOptions::default(), Exec::default())
}

/// Cross-validates `base` at every λ in a strictly ascending `grid`.
pub fn lambda_sweep_with(
    data: &Dataset,
    model: &CostModel,
    base: &TrainConfig,
    grid: &[f64],
    folds: &FoldPlan,
    opts: &EvalOptions,
    exec: Exec,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::InvalidConfig("lambda grid values must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidConfig("lambda grid must be strictly ascending".into()));
    }
    let mut summaries = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let cfg = TrainConfig { lambda, ..base.clone() };
        let s = cross_validate_with(data, model, &cfg, folds, opts, exec)
            .map_err(|e| Error::Sweep { lambda, source: Box::new(e) })?;
        summaries.push(s);
    }
    Ok(SweepResult {
        lambda_grid: grid.to_vec(),
        summaries,
    })
}
