use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::best_response;
use crate::cost_model::{CostModel, Family, FeatureKind, FeatureTaxonomy};
use crate::error::Result;
use crate::linear::LinearModel;

const MOVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Movement {
    Up,
    Down,
    Unchanged,
}

impl Movement {
    fn of(delta: f64) -> Self {
        if delta > MOVE_TOL {
            Movement::Up
        } else if delta < -MOVE_TOL {
            Movement::Down
        } else {
            Movement::Unchanged
        }
    }

    fn arrow(self) -> &'static str {
        match self {
            Movement::Up => " ↑",
            Movement::Down => " ↓",
            Movement::Unchanged => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipsetRow {
    pub feature: String,
    pub kind: FeatureKind,
    pub original: f64,
    pub adapted: f64,
    pub movement: Movement,
}

/// Per-feature view of a best response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flipset {
    pub family: Family,
    pub rows: Vec<FlipsetRow>,
    pub predicted_before: i8,
    pub predicted_after: i8,
    pub cost: f64,
}

pub fn flipset(
    x: &[f64],
    w: &LinearModel,
    model: &CostModel,
    tax: &FeatureTaxonomy,
    family: Family,
) -> Result<Flipset> {
    let br = best_response(x, w, model, tax, family)?;
    let rows = tax
        .features()
        .iter()
        .zip(x.iter().zip(&br.adapted))
        .map(|(f, (&original, &adapted))| FlipsetRow {
            feature: f.name.clone(),
            kind: f.kind,
            original,
            adapted,
            movement: Movement::of(adapted - original),
        })
        .collect();
    Ok(Flipset {
        family,
        rows,
        predicted_before: br.predicted_before,
        predicted_after: br.predicted_after(),
        cost: br.cost_incurred,
    })
}

impl Flipset {
    /// Markdown table with columns Feature, Type, Original, Adapted.
    ///
    /// With `round`, values are shown as nearest integers.
    pub fn to_markdown(&self, round: bool) -> String {
        let fmt = |v: f64| {
            if round {
                format!("{}", v.round() as i64)
            } else {
                format!("{v}")
            }
        };
        let mut out = String::from("| Feature | Type | Original | Adapted |\n|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}{} |",
                r.feature,
                r.kind.tag(),
                fmt(r.original),
                fmt(r.adapted),
                r.movement.arrow()
            );
        }
        let flip = if self.predicted_after > self.predicted_before { " ↑" } else { "" };
        let _ = writeln!(
            out,
            "| Prediction | - | {:+} | {:+}{} |",
            self.predicted_before, self.predicted_after, flip
        );
        let _ = writeln!(out, "\nCost: {}", self.cost);
        out
    }
}
