//! Tight-frame projections and sign binarization (LSH).
//!
//! For `b ≥ d` the frame is `sqrt(b/d)` times the first `d` columns of a
//! random `b × b` orthogonal matrix, so `AᵀA = (b/d)·I_d`. For `b < d` it is
//! the first `b` rows of a random `d × d` orthogonal matrix, so `AAᵀ = I_b`.
//! The orthogonal factor comes from the QR decomposition of a standard
//! Gaussian matrix with a positive diagonal in `R`, which makes it unique.

use rand_distr::{Distribution, StandardNormal};

use super::bits::BinaryCode;
use crate::error::{shape, Error, Result};
use crate::seed::rng;
use crate::types::FeatureMatrix;

/// Maximum entrywise deviation from the tight-frame identity accepted at construction.
pub const FRAME_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TightFrame {
    matrix: FeatureMatrix,
    seed: u64,
    center: Option<Vec<f64>>,
}

impl TightFrame {
    pub fn new(input_dim: usize, bits: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || bits == 0 {
            return Err(Error::Config(format!(
                "tight frame needs d >= 1 and b >= 1, got d={input_dim}, b={bits}"
            )));
        }
        let mut rng = rng(seed);
        let matrix = if bits >= input_dim {
            let g = gaussian(bits, bits, &mut rng);
            let q = orthonormal_columns(&g, input_dim);
            let scale = (bits as f64 / input_dim as f64).sqrt();
            let mut a = FeatureMatrix::zeros(bits, input_dim);
            for i in 0..bits {
                for j in 0..input_dim {
                    a.row_mut(i)[j] = scale * q[j][i];
                }
            }
            a
        } else {
            let g = gaussian(input_dim, input_dim, &mut rng);
            let q = orthonormal_columns(&g, input_dim);
            // rows of the square orthogonal factor
            let mut a = FeatureMatrix::zeros(bits, input_dim);
            for i in 0..bits {
                for j in 0..input_dim {
                    a.row_mut(i)[j] = q[j][i];
                }
            }
            a
        };
        let frame = Self {
            matrix,
            seed,
            center: None,
        };
        let residual = frame.identity_residual();
        if residual >= FRAME_TOLERANCE {
            return Err(Error::Data(format!(
                "tight-frame identity violated: residual {residual:e}"
            )));
        }
        Ok(frame)
    }

    /// Rebuilds a frame from stored parameters.
    pub fn from_parts(matrix: FeatureMatrix, seed: u64, center: Option<Vec<f64>>) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(shape("empty frame matrix"));
        }
        let frame = Self {
            matrix,
            seed,
            center: None,
        };
        match center {
            Some(c) => frame.with_center(c),
            None => Ok(frame),
        }
    }

    /// Sets the vector subtracted from inputs before projection.
    pub fn with_center(mut self, center: Vec<f64>) -> Result<Self> {
        if center.len() != self.input_dim() {
            return Err(shape(format!(
                "center has {} entries, frame input dimension is {}",
                center.len(),
                self.input_dim()
            )));
        }
        self.center = Some(center);
        Ok(self)
    }

    pub fn bits(&self) -> usize {
        self.matrix.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.matrix
    }

    pub fn center(&self) -> Option<&[f64]> {
        self.center.as_deref()
    }

    /// Max entrywise deviation of `AᵀA` from `(b/d)·I` (b ≥ d) or of `AAᵀ` from `I` (b < d).
    pub fn identity_residual(&self) -> f64 {
        let (b, d) = (self.bits(), self.input_dim());
        let mut worst = 0.0f64;
        if b >= d {
            let target = b as f64 / d as f64;
            for i in 0..d {
                for j in 0..d {
                    let v: f64 = (0..b)
                        .map(|k| self.matrix.row(k)[i] * self.matrix.row(k)[j])
                        .sum();
                    let expect = if i == j { target } else { 0.0 };
                    worst = worst.max((v - expect).abs());
                }
            }
        } else {
            for i in 0..b {
                for j in 0..b {
                    let v = crate::types::dot(self.matrix.row(i), self.matrix.row(j));
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((v - expect).abs());
                }
            }
        }
        worst
    }

    /// `A·(x − center)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(shape(format!(
                "LSH input has dimension {}, frame expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let centered: Vec<f64> = match &self.center {
            Some(c) => x.iter().zip(c).map(|(a, b)| a - b).collect(),
            None => x.to_vec(),
        };
        Ok(self
            .matrix
            .iter_rows()
            .map(|row| crate::types::dot(row, &centered))
            .collect())
    }

    /// One bit per frame row: set iff the centered projection is `>= 0`.
    pub fn encode(&self, x: &[f64]) -> Result<BinaryCode> {
        Ok(BinaryCode::from_bits(
            self.project(x)?.into_iter().map(|v| v >= 0.0),
        ))
    }

    pub fn encode_all(&self, xs: &FeatureMatrix) -> Result<Vec<BinaryCode>> {
        use rayon::prelude::*;
        xs.check_cols(self.input_dim(), "LSH encode")?;
        (0..xs.rows())
            .into_par_iter()
            .map(|i| self.encode(xs.row(i)))
            .collect()
    }
}

pub fn tight_frame_new(d: usize, b: usize, seed: u64) -> Result<TightFrame> {
    TightFrame::new(d, b, seed)
}

pub fn lsh_encode(frame: &TightFrame, x: &[f64]) -> Result<BinaryCode> {
    frame.encode(x)
}

/// Row-major `rows × cols` standard Gaussian draws.
fn gaussian(rows: usize, cols: usize, rng: &mut crate::seed::Rng) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; cols]; rows];
    for row in g.iter_mut() {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
    }
    g
}

/// First `k` columns of the Q factor of `g` (returned column-major, one Vec per column).
///
/// Gram-Schmidt applied twice per column; each column of Q only depends on
/// the leading columns of `g`, and normalizing by the positive norm fixes
/// the sign of `R`'s diagonal.
fn orthonormal_columns(g: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let m = g.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v: Vec<f64> = (0..m).map(|i| g[i][j]).collect();
        for _ in 0..2 {
            for prev in &q {
                let proj = crate::types::dot(prev, &v);
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= proj * pi;
                }
            }
        }
        let norm = crate::types::dot(&v, &v).sqrt();
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        q.push(v);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codecs::bits::hamming_distance;

    #[test]
    fn identity_holds_in_both_regimes() {
        for &(d, b) in &[(8, 64), (8, 8), (32, 16), (5, 7), (128, 1)] {
            let f = TightFrame::new(d, b, 3).unwrap();
            assert!(f.identity_residual() < FRAME_TOLERANCE, "d={d} b={b}");
        }
    }

    #[test]
    fn square_frame_is_orthogonal() {
        let f = TightFrame::new(6, 6, 11).unwrap();
        let a = f.matrix();
        for i in 0..6 {
            for j in 0..6 {
                let rows = crate::types::dot(a.row(i), a.row(j));
                let cols: f64 = (0..6).map(|k| a.row(k)[i] * a.row(k)[j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((rows - e).abs() < 1e-9 && (cols - e).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(
            TightFrame::new(8, 64, 0).unwrap(),
            TightFrame::new(8, 64, 0).unwrap()
        );
        assert_ne!(
            TightFrame::new(8, 64, 0).unwrap(),
            TightFrame::new(8, 64, 1).unwrap()
        );
    }

    #[test]
    fn rejects_zero_sizes() {
        assert!(TightFrame::new(0, 4, 0).is_err());
        assert!(TightFrame::new(4, 0, 0).is_err());
    }

    #[test]
    fn sign_antisymmetry_and_determinism() {
        let f = TightFrame::new(10, 48, 5).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(f.project(&x).unwrap().iter().all(|&p| p != 0.0));
        let cx = f.encode(&x).unwrap();
        assert_eq!(hamming_distance(&cx, &f.encode(&x).unwrap()).unwrap(), 0);
        assert_eq!(hamming_distance(&cx, &f.encode(&neg).unwrap()).unwrap(), 48);
    }

    #[test]
    fn zero_projection_sets_bit() {
        let f = TightFrame::new(3, 5, 1).unwrap();
        let code = f.encode(&[0.0, 0.0, 0.0]).unwrap();
        assert!((0..5).all(|i| code.get(i)));
        let centered = f.clone().with_center(vec![1.0, 2.0, 3.0]).unwrap();
        let code = centered.encode(&[1.0, 2.0, 3.0]).unwrap();
        assert!((0..5).all(|i| code.get(i)));
        assert!(f.encode(&[1.0]).is_err());
    }

    #[test]
    fn codes_invariant_under_inverse_rotation_for_square_frames() {
        // with A orthogonal, encode(x) depends only on A·x; feeding Aᵀ·(A·x) gives the same code
        let f = TightFrame::new(7, 7, 21).unwrap();
        let a = f.matrix();
        let x: Vec<f64> = (0..7).map(|i| (i as f64 + 0.5).cos()).collect();
        let y: Vec<f64> = (0..7).map(|i| (i as f64 * 1.3).sin()).collect();
        let roundtrip = |v: &[f64]| -> Vec<f64> {
            let ax = f.project(v).unwrap();
            (0..7).map(|j| (0..7).map(|k| a.row(k)[j] * ax[k]).sum()).collect()
        };
        let h = |u: &[f64], v: &[f64]| {
            hamming_distance(&f.encode(u).unwrap(), &f.encode(v).unwrap()).unwrap()
        };
        assert_eq!(h(&x, &y), h(&roundtrip(&x), &roundtrip(&y)));
    }
}
