//! One-hidden-layer (tanh) classifier head, trained like the softmax model.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::lbfgs::{minimize, LbfgsOptions};
use super::softmax::{chunked_objective, softmax_in_place, validate_training_set, ProbabilisticClassifier, TrainSummary};
use crate::error::{shape, Error, Result};
use crate::seed::rng;
use crate::types::{FeatureMatrix, LabelVector, ProbabilityMatrix};

/// Parameters are laid out as `[W1 (H×F), b1 (H), W2 (C×H), b2 (C)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayerModel {
    num_classes: usize,
    num_features: usize,
    hidden: usize,
    params: Vec<f64>,
    lambda: f64,
    summary: Option<TrainSummary>,
}

struct Layout {
    f: usize,
    h: usize,
    c: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.h * self.f + self.h + self.c * self.h + self.c
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (w1, rest) = p.split_at(self.h * self.f);
        let (b1, rest) = rest.split_at(self.h);
        let (w2, b2) = rest.split_at(self.c * self.h);
        (w1, b1, w2, b2)
    }

    /// Hidden activations and output logits for one row.
    fn forward(&self, p: &[f64], x: &[f64], hid: &mut [f64], out: &mut [f64]) {
        let (w1, b1, w2, b2) = self.split(p);
        for (j, hv) in hid.iter_mut().enumerate() {
            let w = &w1[j * self.f..(j + 1) * self.f];
            *hv = (b1[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).tanh();
        }
        for (k, o) in out.iter_mut().enumerate() {
            let w = &w2[k * self.h..(k + 1) * self.h];
            *o = b2[k] + w.iter().zip(hid.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

impl HiddenLayerModel {
    pub fn from_parts(
        num_classes: usize,
        num_features: usize,
        hidden: usize,
        params: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let layout = Layout {
            f: num_features,
            h: hidden,
            c: num_classes,
        };
        if params.len() != layout.len() {
            return Err(shape(format!(
                "hidden-layer head needs {} parameters, got {}",
                layout.len(),
                params.len()
            )));
        }
        Ok(Self {
            num_classes,
            num_features,
            hidden,
            params,
            lambda,
            summary: None,
        })
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn summary(&self) -> Option<&TrainSummary> {
        self.summary.as_ref()
    }

    fn layout(&self) -> Layout {
        Layout {
            f: self.num_features,
            h: self.hidden,
            c: self.num_classes,
        }
    }
}

impl ProbabilisticClassifier for HiddenLayerModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn num_features(&self) -> usize {
        self.num_features
    }

    fn predict_proba(&self, features: &FeatureMatrix) -> Result<ProbabilityMatrix> {
        features.check_cols(self.num_features, "hidden-layer prediction")?;
        let layout = self.layout();
        let mut out = FeatureMatrix::zeros(features.rows(), self.num_classes);
        out.as_mut_slice()
            .par_chunks_exact_mut(self.num_classes.max(1))
            .enumerate()
            .for_each(|(i, row)| {
                let mut hid = vec![0.0; self.hidden];
                layout.forward(&self.params, features.row(i), &mut hid, row);
                softmax_in_place(row);
            });
        Ok(ProbabilityMatrix::new(out))
    }
}

/// Mean cross-entropy plus `(λ/2)(||W1||² + ||W2||²)`, with gradient.
pub fn hidden_layer_objective(
    features: &FeatureMatrix,
    labels: &[usize],
    num_classes: usize,
    hidden: usize,
    lambda: f64,
    params: &[f64],
    grad: &mut [f64],
) -> f64 {
    let layout = Layout {
        f: features.cols(),
        h: hidden,
        c: num_classes,
    };
    let (f, h, c) = (layout.f, layout.h, layout.c);
    let n = features.rows();
    let total = chunked_objective(n, params.len(), grad, |rows, g| {
        let (_, _, w2, _) = layout.split(params);
        let mut hid = vec![0.0; h];
        let mut z = vec![0.0; c];
        let mut gh = vec![0.0; h];
        let mut loss = 0.0;
        let o_b1 = h * f;
        let o_w2 = o_b1 + h;
        let o_b2 = o_w2 + c * h;
        for i in rows {
            let x = features.row(i);
            layout.forward(params, x, &mut hid, &mut z);
            let y = labels[i];
            let zy = z[y];
            loss += softmax_in_place(&mut z) - zy;
            z[y] -= 1.0;
            gh.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..c {
                let gk = z[k];
                g[o_b2 + k] += gk;
                let w = &w2[k * h..(k + 1) * h];
                for j in 0..h {
                    g[o_w2 + k * h + j] += gk * hid[j];
                    gh[j] += gk * w[j];
                }
            }
            for j in 0..h {
                let ga = gh[j] * (1.0 - hid[j] * hid[j]);
                g[o_b1 + j] += ga;
                for (gw, xv) in g[j * f..(j + 1) * f].iter_mut().zip(x) {
                    *gw += ga * xv;
                }
            }
        }
        loss
    });
    let inv = 1.0 / n as f64;
    grad.iter_mut().for_each(|v| *v *= inv);
    let mut reg = 0.0;
    let o_w2 = h * f + h;
    for range in [0..h * f, o_w2..o_w2 + c * h] {
        for idx in range {
            grad[idx] += lambda * params[idx];
            reg += params[idx] * params[idx];
        }
    }
    total * inv + 0.5 * lambda * reg
}

/// Trains from a seeded Gaussian initialization (fan-in scaled).
pub fn train_hidden_layer(
    features: &FeatureMatrix,
    labels: &LabelVector,
    hidden: usize,
    lambda: f64,
    seed: u64,
    opts: LbfgsOptions,
) -> Result<HiddenLayerModel> {
    validate_training_set(features, labels)?;
    if hidden == 0 {
        return Err(Error::Config("hidden layer needs at least one unit".into()));
    }
    let layout = Layout {
        f: features.cols(),
        h: hidden,
        c: labels.num_classes(),
    };
    let mut r = rng(seed);
    let mut init = vec![0.0; layout.len()];
    let w1 = Normal::new(0.0, 1.0 / (layout.f.max(1) as f64).sqrt()).unwrap();
    let w2 = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).unwrap();
    for v in &mut init[..hidden * layout.f] {
        *v = w1.sample(&mut r);
    }
    let o_w2 = hidden * layout.f + hidden;
    for v in &mut init[o_w2..o_w2 + layout.c * hidden] {
        *v = w2.sample(&mut r);
    }
    let y = labels.as_slice();
    let result = minimize(
        |p, g| hidden_layer_objective(features, y, layout.c, hidden, lambda, p, g),
        init,
        opts,
    );
    Ok(HiddenLayerModel {
        num_classes: layout.c,
        num_features: layout.f,
        hidden,
        params: result.x,
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gradient_matches_central_differences() {
        let mut r = rng(1);
        let rows: Vec<Vec<f64>> = (0..12).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let (h, c) = (4, 3);
        let p = h * 3 + h + c * h + c;
        let params: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; p];
        hidden_layer_objective(&x, &y, c, h, 0.2, &params, &mut g);
        let mut scratch = vec![0.0; p];
        for j in 0..p {
            let eps = 1e-5;
            let mut plus = params.clone();
            plus[j] += eps;
            let mut minus = params.clone();
            minus[j] -= eps;
            let fd = (hidden_layer_objective(&x, &y, c, h, 0.2, &plus, &mut scratch)
                - hidden_layer_objective(&x, &y, c, h, 0.2, &minus, &mut scratch))
                / (2.0 * eps);
            assert!((fd - g[j]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {j}");
        }
    }

    #[test]
    fn learns_xor() {
        let rows = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let data: Vec<[f64; 2]> = (0..40).map(|i| rows[i % 4]).collect();
        let labels: Vec<usize> = (0..40).map(|i| [0, 1, 1, 0][i % 4]).collect();
        let x = FeatureMatrix::from_rows(&data).unwrap();
        let y = LabelVector::new(labels, 2).unwrap();
        let model = train_hidden_layer(&x, &y, 8, 1e-4, 3, LbfgsOptions::default()).unwrap();
        assert_eq!(model.predict(&x).unwrap(), y);
    }
}
