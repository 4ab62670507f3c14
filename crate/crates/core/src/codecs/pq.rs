//! Product quantization: `M` independent k-means codebooks over contiguous,
//! equal-width slices of the (zero-padded) input.

use rayon::prelude::*;

use super::kmeans::{kmeans, nearest, KMeansParams};
use super::onehot::bits_for_classes;
use crate::error::{shape, Error, Result};
use crate::seed::derive_seed;
use crate::types::{sq_l2, FeatureMatrix};

pub const DEFAULT_KS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    input_dim: usize,
    m: usize,
    ks: usize,
    dsub: usize,
    /// `m × ks × dsub`, row-major.
    centroids: Vec<f64>,
    seed: u64,
    /// Mean squared reconstruction error per vector on the training set.
    train_mse: f64,
}

/// One centroid index per subquantizer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PqCode(pub Vec<u32>);

impl PqCode {
    pub fn indices(&self) -> &[u32] {
        &self.0
    }
}

impl PqCodebook {
    pub fn train(data: &FeatureMatrix, m: usize, ks: usize, seed: u64) -> Result<Self> {
        let d = data.cols();
        if m == 0 || ks == 0 {
            return Err(Error::Config(format!("PQ needs M >= 1 and ks >= 1, got M={m}, ks={ks}")));
        }
        if ks > 1 << 16 {
            return Err(Error::Config(format!("ks={ks} exceeds 65536 centroids")));
        }
        if d < m {
            return Err(Error::Config(format!("PQ with M={m} on {d}-dimensional data")));
        }
        if data.rows() < ks {
            return Err(Error::InsufficientData(format!(
                "PQ training needs at least ks={ks} vectors, got {}",
                data.rows()
            )));
        }
        let dsub = d.div_ceil(m);
        let padded = data.pad_cols(dsub * m);
        let n = data.rows();

        let subspaces: Vec<(Vec<f64>, f64)> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut sub = Vec::with_capacity(n * dsub);
                for row in padded.iter_rows() {
                    sub.extend_from_slice(&row[j * dsub..(j + 1) * dsub]);
                }
                let km = kmeans(
                    &sub,
                    dsub,
                    ks,
                    derive_seed(seed, "pq-subspace", j as u64),
                    KMeansParams::default(),
                );
                let obj = km.objective();
                (km.centroids, obj)
            })
            .collect();

        let mut centroids = Vec::with_capacity(m * ks * dsub);
        let mut total = 0.0;
        for (c, obj) in subspaces {
            centroids.extend(c);
            total += obj;
        }
        Ok(Self {
            input_dim: d,
            m,
            ks,
            dsub,
            centroids,
            seed,
            train_mse: total / n as f64,
        })
    }

    /// Rebuilds a codebook from stored parameters.
    pub fn from_parts(
        input_dim: usize,
        m: usize,
        ks: usize,
        centroids: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if m == 0 || ks == 0 || input_dim < m {
            return Err(Error::Corruption(format!(
                "invalid PQ shape: d={input_dim}, M={m}, ks={ks}"
            )));
        }
        let dsub = input_dim.div_ceil(m);
        if centroids.len() != m * ks * dsub {
            return Err(Error::Corruption(format!(
                "PQ payload has {} values, expected {}",
                centroids.len(),
                m * ks * dsub
            )));
        }
        Ok(Self {
            input_dim,
            m,
            ks,
            dsub,
            centroids,
            seed,
            train_mse: f64::NAN,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_subquantizers(&self) -> usize {
        self.m
    }

    pub fn ks(&self) -> usize {
        self.ks
    }

    pub fn sub_dim(&self) -> usize {
        self.dsub
    }

    /// Zero columns appended so that `M` divides the width.
    pub fn padding(&self) -> usize {
        self.dsub * self.m - self.input_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_mse(&self) -> f64 {
        self.train_mse
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn code_size_bits(&self) -> usize {
        self.m * bits_for_classes(self.ks)
    }

    fn sub_centroids(&self, j: usize) -> &[f64] {
        let len = self.ks * self.dsub;
        &self.centroids[j * len..(j + 1) * len]
    }

    pub fn centroid(&self, j: usize, c: usize) -> &[f64] {
        &self.sub_centroids(j)[c * self.dsub..(c + 1) * self.dsub]
    }

    fn padded(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(shape(format!(
                "PQ input has dimension {}, codebook expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let mut v = x.to_vec();
        v.resize(self.dsub * self.m, 0.0);
        Ok(v)
    }

    pub fn encode(&self, x: &[f64]) -> Result<PqCode> {
        let v = self.padded(x)?;
        Ok(PqCode(
            (0..self.m)
                .map(|j| {
                    let sub = &v[j * self.dsub..(j + 1) * self.dsub];
                    nearest(self.sub_centroids(j), self.dsub, sub).0 as u32
                })
                .collect(),
        ))
    }

    pub fn encode_all(&self, xs: &FeatureMatrix) -> Result<Vec<PqCode>> {
        xs.check_cols(self.input_dim, "PQ encode")?;
        (0..xs.rows())
            .into_par_iter()
            .map(|i| self.encode(xs.row(i)))
            .collect()
    }

    fn check_code(&self, code: &PqCode) -> Result<()> {
        if code.0.len() != self.m {
            return Err(Error::Corruption(format!(
                "PQ code has {} indices, codebook has M={}",
                code.0.len(),
                self.m
            )));
        }
        if let Some(&bad) = code.0.iter().find(|&&c| c as usize >= self.ks) {
            return Err(Error::Corruption(format!(
                "PQ index {bad} out of range for ks={}",
                self.ks
            )));
        }
        Ok(())
    }

    /// Concatenation of the selected centroids, with padding removed.
    pub fn decode(&self, code: &PqCode) -> Result<Vec<f64>> {
        self.check_code(code)?;
        let mut out = Vec::with_capacity(self.m * self.dsub);
        for (j, &c) in code.0.iter().enumerate() {
            out.extend_from_slice(self.centroid(j, c as usize));
        }
        out.truncate(self.input_dim);
        Ok(out)
    }

    pub fn decode_all(&self, codes: &[PqCode]) -> Result<FeatureMatrix> {
        let rows: Vec<Vec<f64>> = codes
            .par_iter()
            .map(|c| self.decode(c))
            .collect::<Result<_>>()?;
        let mut m = FeatureMatrix::from_rows(&rows)?;
        if rows.is_empty() {
            m = FeatureMatrix::zeros(0, self.input_dim);
        }
        Ok(m)
    }

    /// Per-subspace squared distances from `query` to every centroid, `M × ks`.
    pub fn distance_table(&self, query: &[f64]) -> Result<DistanceTable> {
        let v = self.padded(query)?;
        let mut table = Vec::with_capacity(self.m * self.ks);
        for j in 0..self.m {
            let sub = &v[j * self.dsub..(j + 1) * self.dsub];
            table.extend(
                self.sub_centroids(j)
                    .chunks_exact(self.dsub)
                    .map(|c| sq_l2(c, sub)),
            );
        }
        Ok(DistanceTable {
            ks: self.ks,
            values: table,
        })
    }

    /// Squared L2 between an uncompressed query and a code's reconstruction, via lookup tables.
    pub fn asymmetric_distance(&self, query: &[f64], code: &PqCode) -> Result<f64> {
        self.check_code(code)?;
        Ok(self.distance_table(query)?.distance(code))
    }
}

#[derive(Debug, Clone)]
pub struct DistanceTable {
    ks: usize,
    values: Vec<f64>,
}

impl DistanceTable {
    /// Sum of table lookups. The code must come from the same codebook.
    #[inline]
    pub fn distance(&self, code: &PqCode) -> f64 {
        code.0
            .iter()
            .enumerate()
            .map(|(j, &c)| self.values[j * self.ks + c as usize])
            .sum()
    }
}

pub fn pq_train(data: &FeatureMatrix, m: usize, ks: usize, seed: u64) -> Result<PqCodebook> {
    PqCodebook::train(data, m, ks, seed)
}

pub fn pq_encode(cb: &PqCodebook, x: &[f64]) -> Result<PqCode> {
    cb.encode(x)
}

pub fn pq_decode(cb: &PqCodebook, code: &PqCode) -> Result<Vec<f64>> {
    cb.decode(code)
}

pub fn pq_asymmetric_distance(cb: &PqCodebook, query: &[f64], code: &PqCode) -> Result<f64> {
    cb.asymmetric_distance(query, code)
}
