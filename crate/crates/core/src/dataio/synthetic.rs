//! Seeded Gaussian-mixture datasets.
//!
//! Class centers are random directions scaled to radius `s·σ_w/√2`, so the
//! root-mean-square distance between two centers is `s·σ_w`. Items are
//! interleaved: item `i` belongs to class `i mod C`.

use rand_distr::{Distribution, Normal, StandardNormal};

use super::Dataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};
use crate::types::{FeatureMatrix, LabelVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Center separation in units of `within_sigma`.
    pub separation: f64,
    pub within_sigma: f64,
    pub seed: u64,
    /// Items per class flagged as test/query items (taken from the `per_class` total).
    pub test_per_class: usize,
}

impl SyntheticSpec {
    pub fn new(num_classes: usize, per_class: usize, dim: usize, separation: f64, seed: u64) -> Self {
        Self {
            num_classes,
            per_class,
            dim,
            separation,
            within_sigma: 1.0,
            seed,
            test_per_class: 0,
        }
    }

    pub fn with_test_per_class(mut self, t: usize) -> Self {
        self.test_per_class = t;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.per_class == 0 || self.dim == 0 {
            return Err(Error::Config("synthetic classes, per-class count and dimension must be positive".into()));
        }
        if !(self.within_sigma > 0.0) || !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(Error::Config(format!(
                "synthetic spread must be positive and separation non-negative (σ_w={}, s={})",
                self.within_sigma, self.separation
            )));
        }
        if self.test_per_class >= self.per_class && self.test_per_class > 0 {
            return Err(Error::Config(format!(
                "test_per_class={} leaves no training items out of {}",
                self.test_per_class, self.per_class
            )));
        }
        Ok(())
    }

    pub fn center_radius(&self) -> f64 {
        self.separation * self.within_sigma / std::f64::consts::SQRT_2
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(FeatureMatrix, LabelVector)> {
    spec.validate()?;
    let (c, d) = (spec.num_classes, spec.dim);
    let mut r = rng(derive_seed(spec.seed, "centers", 0));
    let radius = spec.center_radius();
    let mut centers = vec![0.0; c * d];
    for center in centers.chunks_exact_mut(d) {
        loop {
            for v in center.iter_mut() {
                *v = StandardNormal.sample(&mut r);
            }
            let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                center.iter_mut().for_each(|v| *v *= radius / norm);
                break;
            }
        }
    }

    let n = c * spec.per_class;
    let noise = Normal::new(0.0, spec.within_sigma).unwrap();
    let mut r = rng(derive_seed(spec.seed, "points", 0));
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % c;
        labels.push(k);
        for &cv in &centers[k * d..(k + 1) * d] {
            data.push(cv + noise.sample(&mut r));
        }
    }
    Ok((FeatureMatrix::new(n, d, data)?, LabelVector::new(labels, c)?))
}

/// Like [`generate_synthetic`], with the first `test_per_class` items of each class flagged as test.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, name: &str) -> Result<Dataset> {
    let (features, labels) = generate_synthetic(spec)?;
    let mask = (spec.test_per_class > 0).then(|| {
        (0..features.rows())
            .map(|i| i / spec.num_classes < spec.test_per_class)
            .collect()
    });
    Dataset::new(name.to_string(), features, labels, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let spec = SyntheticSpec::new(4, 10, 3, 5.0, 9);
        let (a, la) = generate_synthetic(&spec).unwrap();
        let (b, lb) = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!((a.rows(), a.cols()), (40, 3));
        assert_eq!(la.as_slice()[..5], [0, 1, 2, 3, 0]);
    }

    #[test]
    fn center_spacing_matches_separation() {
        let spec = SyntheticSpec::new(40, 1, 64, 10.0, 1);
        let radius = spec.center_radius();
        assert!((radius - 10.0 / 2f64.sqrt()).abs() < 1e-12);
        // class means over many samples approach the centers; check mean squared pairwise distance
        let big = SyntheticSpec { per_class: 400, ..spec };
        let (x, l) = generate_synthetic(&big).unwrap();
        let mut means = vec![vec![0.0; 64]; 40];
        for (i, row) in x.iter_rows().enumerate() {
            for (m, v) in means[l.get(i)].iter_mut().zip(row) {
                *m += v / 400.0;
            }
        }
        let mut total = 0.0;
        let mut pairs = 0.0;
        for a in 0..40 {
            for b in a + 1..40 {
                total += crate::types::sq_l2(&means[a], &means[b]);
                pairs += 1.0;
            }
        }
        let rms = (total / pairs).sqrt();
        assert!((rms - 10.0).abs() < 1.0, "rms center distance {rms}");
    }

    #[test]
    fn zero_separation_allowed_and_invalid_rejected() {
        assert!(generate_synthetic(&SyntheticSpec::new(3, 5, 2, 0.0, 0)).is_ok());
        assert!(generate_synthetic(&SyntheticSpec::new(0, 5, 2, 1.0, 0)).is_err());
        assert!(generate_synthetic(&SyntheticSpec::new(3, 5, 2, -1.0, 0)).is_err());
        let ds = generate_synthetic_dataset(&SyntheticSpec::new(3, 5, 2, 1.0, 0).with_test_per_class(2), "t").unwrap();
        let mask = ds.test_mask.as_ref().unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 6);
        assert!(mask[..6].iter().all(|&m| m));
    }
}
