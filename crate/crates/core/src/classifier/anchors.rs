//! Gaussian anchor features: RBF similarities to `h` sampled labeled items.

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{shape, Error, Result};
use crate::seed::rng;
use crate::types::{sq_l2, FeatureMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianAnchorMap {
    anchors: FeatureMatrix,
    sigma: f64,
    seed: u64,
}

impl GaussianAnchorMap {
    /// Samples `h` anchors uniformly without replacement from `labeled` and sets
    /// σ to the mean (unsquared) distance from each row of `pool` to its nearest anchor.
    ///
    /// `pool` is normally the whole training set, labeled and unlabeled.
    pub fn fit(labeled: &FeatureMatrix, pool: &FeatureMatrix, h: usize, seed: u64) -> Result<Self> {
        if h == 0 {
            return Err(Error::Config("anchor map needs h >= 1".into()));
        }
        if h > labeled.rows() {
            return Err(Error::InsufficientData(format!(
                "cannot sample h={h} anchors from {} labeled items",
                labeled.rows()
            )));
        }
        pool.check_cols(labeled.cols(), "anchor bandwidth pool")?;
        let mut r = rng(seed);
        let picked = sample(&mut r, labeled.rows(), h).into_vec();
        let anchors = labeled.select_rows(&picked);
        let sigma = mean_nearest_anchor_distance(&anchors, pool)?;
        Self::from_parts(anchors, sigma, seed)
    }

    pub fn from_parts(anchors: FeatureMatrix, sigma: f64, seed: u64) -> Result<Self> {
        if anchors.rows() == 0 {
            return Err(Error::Config("anchor map needs h >= 1".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::DegenerateSigma(sigma));
        }
        Ok(Self {
            anchors,
            sigma,
            seed,
        })
    }

    pub fn anchors(&self) -> &FeatureMatrix {
        &self.anchors
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.anchors.cols()
    }

    /// `exp(-||x - a_i||² / (2σ²))` for every anchor.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(shape(format!(
                "anchor map input has dimension {}, expected {}",
                x.len(),
                self.input_dim()
            )));
        }
        let denom = 2.0 * self.sigma * self.sigma;
        Ok(self
            .anchors
            .iter_rows()
            .map(|a| (-sq_l2(x, a) / denom).exp())
            .collect())
    }

    pub fn apply_all(&self, xs: &FeatureMatrix) -> Result<FeatureMatrix> {
        xs.check_cols(self.input_dim(), "anchor map")?;
        let h = self.num_anchors();
        let mut out = FeatureMatrix::zeros(xs.rows(), h);
        if h == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_exact_mut(h)
            .enumerate()
            .for_each(|(i, dst)| {
                let denom = 2.0 * self.sigma * self.sigma;
                for (d, a) in dst.iter_mut().zip(self.anchors.iter_rows()) {
                    *d = (-sq_l2(xs.row(i), a) / denom).exp();
                }
            });
        Ok(out)
    }
}

/// `(1/N) Σ_i min_j ||x_i − a_j||₂` over the rows of `pool`.
pub fn mean_nearest_anchor_distance(anchors: &FeatureMatrix, pool: &FeatureMatrix) -> Result<f64> {
    if pool.rows() == 0 {
        return Err(Error::InsufficientData("empty bandwidth pool".into()));
    }
    let mins: Vec<f64> = (0..pool.rows())
        .into_par_iter()
        .map(|i| {
            anchors
                .iter_rows()
                .map(|a| sq_l2(pool.row(i), a))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    Ok(mins.iter().sum::<f64>() / pool.rows() as f64)
}

pub fn fit_anchor_map(labeled: &FeatureMatrix, h: usize, seed: u64) -> Result<GaussianAnchorMap> {
    GaussianAnchorMap::fit(labeled, labeled, h, seed)
}

pub fn apply_anchor_map(map: &GaussianAnchorMap, x: &[f64]) -> Result<Vec<f64>> {
    map.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_uses_unsquared_distance() {
        let anchors = FeatureMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let pool = FeatureMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(mean_nearest_anchor_distance(&anchors, &pool).unwrap(), 1.0);
    }

    #[test]
    fn all_points_as_anchors_is_degenerate() {
        let pts = FeatureMatrix::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 4.0]]).unwrap();
        assert!(matches!(
            fit_anchor_map(&pts, 3, 0),
            Err(Error::DegenerateSigma(s)) if s == 0.0
        ));
        assert!(matches!(
            fit_anchor_map(&pts, 4, 0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn feature_exponent_uses_squared_distance() {
        let anchors = FeatureMatrix::from_rows(&[[0.0, 0.0], [10.0, 0.0]]).unwrap();
        let map = GaussianAnchorMap::from_parts(anchors, 1.5, 0).unwrap();
        // ||x - a_0|| = σ·√2 gives e^{-1}
        let x = [1.5 * 2f64.sqrt(), 0.0];
        let f = map.apply(&x).unwrap();
        assert!((f[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(map.apply(&[0.0, 0.0]).unwrap()[0], 1.0);
        assert!(map.apply(&[1e6, 1e6]).unwrap().iter().all(|&v| v == 0.0));
        assert!(map.apply(&[0.0]).is_err());
    }

    #[test]
    fn fit_samples_distinct_labeled_rows() {
        let rows: Vec<[f64; 1]> = (0..20).map(|i| [i as f64]).collect();
        let labeled = FeatureMatrix::from_rows(&rows).unwrap();
        let map = GaussianAnchorMap::fit(&labeled, &labeled, 5, 3).unwrap();
        let mut seen: Vec<f64> = map.anchors().iter_rows().map(|r| r[0]).collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), 5);
        assert_eq!(map, GaussianAnchorMap::fit(&labeled, &labeled, 5, 3).unwrap());
        let all = map.apply_all(&labeled).unwrap();
        assert_eq!(all.row(7), map.apply(labeled.row(7)).unwrap().as_slice());
        assert!(all.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0));
    }
}
