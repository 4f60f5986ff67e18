use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_css_with, FitConfig, SarimaModel, SarimaOrder};
use crate::{Error, Result};

/// Candidate values for each order component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderGrid {
    pub p: Vec<usize>,
    pub d: Vec<usize>,
    pub q: Vec<usize>,
    pub seasonal_p: Vec<usize>,
    pub seasonal_d: Vec<usize>,
    pub seasonal_q: Vec<usize>,
}

impl Default for OrderGrid {
    /// p, q in {0,1,2}; P, Q, d, D in {0,1}: 144 orders.
    fn default() -> Self {
        Self {
            p: vec![0, 1, 2],
            d: vec![0, 1],
            q: vec![0, 1, 2],
            seasonal_p: vec![0, 1],
            seasonal_d: vec![0, 1],
            seasonal_q: vec![0, 1],
        }
    }
}

impl OrderGrid {
    pub fn single(order: SarimaOrder) -> Self {
        Self {
            p: vec![order.p],
            d: vec![order.d],
            q: vec![order.q],
            seasonal_p: vec![order.seasonal_p],
            seasonal_d: vec![order.seasonal_d],
            seasonal_q: vec![order.seasonal_q],
        }
    }

    /// Every combination, in lexicographic order.
    pub fn orders(&self) -> Vec<SarimaOrder> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &d in &self.d {
                for &q in &self.q {
                    for &sp in &self.seasonal_p {
                        for &sd in &self.seasonal_d {
                            for &sq in &self.seasonal_q {
                                out.push(SarimaOrder::new(p, d, q, sp, sd, sq));
                            }
                        }
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub order: SarimaOrder,
    pub model: SarimaModel,
    /// In-sample RMSE over the window shared by every order of the grid.
    pub ranking_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    /// Successful fits, best first.
    pub entries: Vec<GridEntry>,
    /// Orders whose fit failed, with the reason.
    pub failures: Vec<(SarimaOrder, String)>,
}

impl GridReport {
    pub fn best(&self) -> &GridEntry {
        &self.entries[0]
    }

    /// Plain-text ranking table.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<4} {:<18} {:>6} {:>12} {:>12} {:>12} {:>8}\n",
            "rank", "order", "params", "rank_rmse", "train_rmse", "train_mae", "diverged"
        );
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!(
                "{:<4} {:<18} {:>6} {:>12.4} {:>12.4} {:>12.4} {:>8}\n",
                i + 1,
                e.order.to_string(),
                e.order.parameter_count(),
                e.ranking_rmse,
                e.model.training_rmse,
                e.model.training_mae,
                e.model.diverged
            ));
        }
        for (order, reason) in &self.failures {
            out.push_str(&format!("-    {:<18} failed: {reason}\n", order.to_string()));
        }
        out
    }
}

/// Training RMSEs within this relative distance of the best are treated as equal.
pub const RMSE_TIE_TOLERANCE: f64 = 1e-3;

fn rank(a: &GridEntry, b: &GridEntry) -> Ordering {
    a.model
        .diverged
        .cmp(&b.model.diverged)
        .then_with(|| a.ranking_rmse.total_cmp(&b.ranking_rmse))
        .then_with(|| a.order.parameter_count().cmp(&b.order.parameter_count()))
        .then_with(|| a.order.cmp(&b.order))
}

/// Sorts by training RMSE, then moves the fits within [`RMSE_TIE_TOLERANCE`]
/// of the best one to the front ordered by parameter count.
fn rank_entries(entries: &mut [GridEntry]) {
    entries.sort_by(rank);
    let Some(first) = entries.first() else {
        return;
    };
    if first.model.diverged {
        return;
    }
    let cutoff = first.ranking_rmse * (1.0 + RMSE_TIE_TOLERANCE);
    let band = entries
        .iter()
        .take_while(|e| !e.model.diverged && e.ranking_rmse <= cutoff)
        .count();
    entries[..band].sort_by(|a, b| {
        a.order
            .parameter_count()
            .cmp(&b.order.parameter_count())
            .then_with(|| rank(a, b))
    });
}

/// Original-series index of the first residual in `order`'s objective.
fn first_residual(order: &SarimaOrder) -> usize {
    order.difference_span() + order.objective_start()
}

/// RMSE of the one-step residuals at original indices `from..`.
fn window_rmse(model: &SarimaModel, values: &[f64], from: usize) -> f64 {
    let skip = from - first_residual(&model.order);
    match model.training_residuals(values) {
        Ok(e) if e.len() > skip => {
            let tail = &e[skip..];
            (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
        }
        _ => f64::INFINITY,
    }
}

/// Fits every order of the grid and ranks the fits by in-sample RMSE.
///
/// Orders differ in how many leading values differencing and lag start-up
/// consume, so the ranking RMSE is taken over the hours from the latest such
/// start in the grid onward. Fits whose RMSE is within 0.1% of the best are considered tied and the
/// smaller model wins. Diverged fits rank last; remaining ties go to fewer
/// parameters, then to the lexicographically smaller order. Fits run in
/// parallel but the result does not depend on scheduling.
pub fn grid_search(values: &[f64], grid: &OrderGrid, config: &FitConfig) -> Result<GridReport> {
    let orders = grid.orders();
    if orders.is_empty() {
        return Err(Error::Config("empty SARIMA order grid".into()));
    }
    let results: Vec<_> = orders
        .par_iter()
        .map(|order| (*order, fit_css_with(values, *order, config)))
        .collect();

    let common_start = orders.iter().map(first_residual).max().unwrap_or(0);
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (order, res) in results {
        match res {
            Ok(outcome) => entries.push(GridEntry {
                order,
                ranking_rmse: window_rmse(&outcome.model, values, common_start),
                model: outcome.model,
            }),
            Err(e) => failures.push((order, e.to_string())),
        }
    }
    if entries.is_empty() {
        return Err(Error::AllFitsFailed(
            failures
                .into_iter()
                .map(|(o, e)| (o.to_string(), e))
                .collect(),
        ));
    }
    rank_entries(&mut entries);
    Ok(GridReport { entries, failures })
}
