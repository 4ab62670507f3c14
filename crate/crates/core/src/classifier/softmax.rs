//! Multinomial logistic regression trained by full-batch L-BFGS.
//!
//! Objective: mean cross-entropy plus `(λ/2)·||W||²`; the bias is not
//! regularized. Gradients are summed over fixed-size row chunks and the chunk
//! partials are reduced in chunk order, so results do not depend on the
//! number of worker threads.

use std::ops::Range;

use rayon::prelude::*;

use super::lbfgs::{minimize, LbfgsOptions};
use crate::error::{shape, Error, Result};
use crate::types::{FeatureMatrix, LabelVector, ProbabilityMatrix};

pub(crate) const CHUNK_ROWS: usize = 256;

/// Anything that maps feature rows to class posteriors.
pub trait ProbabilisticClassifier: Send + Sync {
    fn num_classes(&self) -> usize;
    fn num_features(&self) -> usize;
    fn predict_proba(&self, features: &FeatureMatrix) -> Result<ProbabilityMatrix>;

    fn predict(&self, features: &FeatureMatrix) -> Result<LabelVector> {
        Ok(self.predict_proba(features)?.predicted())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
    pub grad_max_norm: f64,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    num_classes: usize,
    num_features: usize,
    /// `C × F`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    lambda: f64,
    summary: Option<TrainSummary>,
}

impl SoftmaxModel {
    pub fn from_parts(
        num_classes: usize,
        num_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if weights.len() != num_classes * num_features || bias.len() != num_classes {
            return Err(shape(format!(
                "softmax parameters do not match C={num_classes}, F={num_features}"
            )));
        }
        Ok(Self {
            num_classes,
            num_features,
            weights,
            bias,
            lambda,
            summary: None,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn summary(&self) -> Option<&TrainSummary> {
        self.summary.as_ref()
    }

    fn logits_into(&self, x: &[f64], out: &mut [f64]) {
        logits(&self.weights, &self.bias, self.num_features, x, out);
    }
}

impl ProbabilisticClassifier for SoftmaxModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, features: &FeatureMatrix) -> Result<ProbabilityMatrix> {
        features.check_cols(self.num_features, "softmax prediction")?;
        let c = self.num_classes;
        let mut out = FeatureMatrix::zeros(features.rows(), c);
        out.as_mut_slice()
            .par_chunks_exact_mut(c.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                self.logits_into(features.row(i), row);
                softmax_in_place(row);
            });
        Ok(ProbabilityMatrix::new(out))
    }
}

#[inline]
fn logits(weights: &[f64], bias: &[f64], f: usize, x: &[f64], out: &mut [f64]) {
    for (c, o) in out.iter_mut().enumerate() {
        let w = &weights[c * f..(c + 1) * f];
        *o = bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Replaces logits by probabilities and returns `log Σ exp(logits)`.
#[inline]
pub(crate) fn softmax_in_place(z: &mut [f64]) -> f64 {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
    m + s.ln()
}

/// Evaluates `chunk(rows, grad)` over fixed row chunks in parallel and sums in chunk order.
pub(crate) fn chunked_objective<F>(n: usize, p: usize, grad: &mut [f64], chunk: F) -> f64
where
    F: Fn(Range<usize>, &mut [f64]) -> f64 + Sync,
{
    let partials: Vec<(f64, Vec<f64>)> = (0..n.div_ceil(CHUNK_ROWS))
        .into_par_iter()
        .map(|k| {
            let mut g = vec![0.0; p];
            let rows = k * CHUNK_ROWS..((k + 1) * CHUNK_ROWS).min(n);
            let l = chunk(rows, &mut g);
            (l, g)
        })
        .collect();
    grad.iter_mut().for_each(|v| *v = 0.0);
    let mut loss = 0.0;
    for (l, g) in partials {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    loss
}

/// Regularized mean cross-entropy and its gradient at `params = [W (C×F), b (C)]`.
pub fn softmax_objective(
    features: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    lambda: f64,
    params: &[f64],
    grad: &mut [f64],
) -> f64 {
    let (n, f, c) = (features.rows(), features.cols(), num_classes);
    let (w, b) = params.split_at(c * f);
    let total = chunked_objective(n, params.len(), grad, |rows, g| {
        let mut z = vec![0.0; c];
        let mut loss = 0.0;
        for i in rows {
            let x = features.row(i);
            logits(w, b, f, x, &mut z);
            let y = labels[i];
            let zy = z[y];
            loss += softmax_in_place(&mut z) - zy;
            z[y] -= 1.0;
            for k in 0..c {
                let gk = z[k];
                if gk != 0.0 {
                    for (gw, xv) in g[k * f..(k + 1) * f].iter_mut().zip(x) {
                        *gw += gk * xv;
                    }
                }
                g[c * f + k] += gk;
            }
        }
        loss
    });
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    let mut reg = 0.0;
    for (gw, wv) in grad[..c * f].iter_mut().zip(w) {
        *gw += lambda * wv;
        reg += wv * wv;
    }
    total * inv + 0.5 * lambda * reg
}

pub(crate) fn validate_training_set(features: &FeatureMatrix, labels: &LabelVector) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(shape(format!(
            "{} feature rows for {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if labels.distinct() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training labels cover {} class(es), need at least 2",
            labels.distinct()
        )));
    }
    if features.rows() < labels.num_classes() {
        return Err(Error::InsufficientData(format!(
            "{} training items for {} classes",
            features.rows(),
            labels.num_classes()
        )));
    }
    Ok(())
}

pub fn train_softmax(features: &FeatureMatrix, labels: &LabelVector, lambda: f64) -> Result<SoftmaxModel> {
    train_softmax_with(features, labels, lambda, LbfgsOptions::default())
}

pub fn train_softmax_with(
    features: &FeatureMatrix,
    labels: &LabelVector,
    lambda: f64,
    opts: LbfgsOptions,
) -> Result<SoftmaxModel> {
    validate_training_set(features, labels)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("regularization λ={lambda} must be finite and >= 0")));
    }
    let (f, c) = (features.cols(), labels.num_classes());
    let y = labels.as_slice();
    let result = minimize(
        |p, g| softmax_objective(features, y, c, lambda, p, g),
        vec![0.0; c * f + c],
        opts,
    );
    let mut weights = result.x;
    let bias = weights.split_off(c * f);
    Ok(SoftmaxModel {
        num_classes: c,
        num_features: f,
        weights,
        bias,
        lambda,
        summary: Some(TrainSummary {
            iterations: result.iterations,
            converged: result.converged,
            final_loss: result.loss,
            grad_max_norm: result.grad_max_norm,
            loss_history: result.loss_history,
        }),
    })
}

pub fn predict_proba(model: &dyn ProbabilisticClassifier, features: &FeatureMatrix) -> Result<ProbabilityMatrix> {
    model.predict_proba(features)
}
