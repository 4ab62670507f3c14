//! Hold-out selection of the regularization strength.

use rand::seq::SliceRandom;

use super::softmax::{ProbabilisticClassifier, SoftmaxModel};
use super::lbfgs::LbfgsOptions;
use crate::error::{Error, Result};
use crate::metrics::accuracy_of;
use crate::seed::rng;
use crate::types::{FeatureMatrix, LabelVector};

/// `10^-4, 10^-3, …, 10^2`.
pub fn default_lambda_grid() -> Vec<f64> {
    (-4..=2).map(|e| 10f64.powi(e)).collect()
}

pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub grid: Vec<f64>,
    pub validation_accuracy: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_lambda: f64,
    /// False when some class had fewer than two items and the split fell back to uniform sampling.
    pub stratified: bool,
    pub train_size: usize,
    pub validation_size: usize,
}

/// Indices of a 90/10 train/validation split, stratified when every class has two or more items.
pub fn holdout_split(labels: &LabelVector, seed: u64) -> (Vec<usize>, Vec<usize>, bool) {
    let mut r = rng(seed);
    let groups = labels.indices_by_class();
    let stratified = groups.iter().all(|g| g.is_empty() || g.len() >= 2);
    let mut train = Vec::new();
    let mut val = Vec::new();
    if stratified {
        for mut g in groups.into_iter().filter(|g| !g.is_empty()) {
            g.shuffle(&mut r);
            let k = ((g.len() as f64 * VALIDATION_FRACTION).round() as usize).clamp(1, g.len() - 1);
            val.extend_from_slice(&g[..k]);
            train.extend_from_slice(&g[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..labels.len()).collect();
        all.shuffle(&mut r);
        let k = ((all.len() as f64 * VALIDATION_FRACTION).round() as usize).clamp(1, all.len().saturating_sub(1).max(1));
        val.extend_from_slice(&all[..k]);
        train.extend_from_slice(&all[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val, stratified)
}

/// Picks the grid value with the best validation accuracy; ties go to the smallest λ, then the earliest entry.
pub fn cross_validate_with<M, F>(
    features: &FeatureMatrix,
    labels: &LabelVector,
    grid: &[f64],
    seed: u64,
    mut train: F,
) -> Result<CvReport>
where
    M: ProbabilisticClassifier,
    F: FnMut(&FeatureMatrix, &LabelVector, f64) -> Result<M>,
{
    if grid.is_empty() {
        return Err(Error::Config("empty regularization grid".into()));
    }
    if features.rows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.len() < 2 {
        return Err(Error::InsufficientData("cross-validation needs at least two items".into()));
    }
    let (tr, va, stratified) = holdout_split(labels, seed);
    let (xt, yt) = (features.select_rows(&tr), labels.select(&tr));
    let (xv, yv) = (features.select_rows(&va), labels.select(&va));

    let mut accs = Vec::with_capacity(grid.len());
    for (i, &lambda) in grid.iter().enumerate() {
        // repeated grid values give identical models
        if let Some(j) = grid[..i].iter().position(|&g| g == lambda) {
            accs.push(accs[j]);
            continue;
        }
        let model = train(&xt, &yt, lambda)?;
        let pred = model.predict(&xv)?;
        accs.push(accuracy_of(pred.as_slice(), yv.as_slice())?);
    }
    let mut best = 0;
    for i in 1..grid.len() {
        if accs[i] > accs[best] || (accs[i] == accs[best] && grid[i] < grid[best]) {
            best = i;
        }
    }
    Ok(CvReport {
        grid: grid.to_vec(),
        validation_accuracy: accs,
        chosen_index: best,
        chosen_lambda: grid[best],
        stratified,
        train_size: tr.len(),
        validation_size: va.len(),
    })
}

pub fn cross_validate_lambda(
    features: &FeatureMatrix,
    labels: &LabelVector,
    grid: &[f64],
    seed: u64,
) -> Result<CvReport> {
    cross_validate_with(features, labels, grid, seed, |x, y, l| {
        super::softmax::train_softmax(x, y, l)
    })
}

/// Cross-validates λ, then retrains on all items with the chosen value.
pub fn fit_softmax_cv(
    features: &FeatureMatrix,
    labels: &LabelVector,
    grid: &[f64],
    seed: u64,
    opts: LbfgsOptions,
) -> Result<(SoftmaxModel, CvReport)> {
    let report = if grid.len() == 1 {
        // nothing to select; skip the hold-out fit
        CvReport {
            grid: grid.to_vec(),
            validation_accuracy: vec![f64::NAN],
            chosen_index: 0,
            chosen_lambda: grid[0],
            stratified: true,
            train_size: labels.len(),
            validation_size: 0,
        }
    } else {
        cross_validate_with(features, labels, grid, seed, |x, y, l| {
            super::softmax::train_softmax_with(x, y, l, opts)
        })?
    };
    let model = super::softmax::train_softmax_with(features, labels, report.chosen_lambda, opts)?;
    Ok((model, report))
}
