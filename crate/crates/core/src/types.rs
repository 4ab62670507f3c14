//! Dense matrices, label vectors and rankings shared by every module.

use crate::error::{shape, Error, Result};

/// Row-major `rows × cols` matrix of descriptors.
///
/// Values are held in double precision; files store them as 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows. An empty slice gives a 0×0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(shape(format!("row {i} has {} columns, expected {cols}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Appends zero columns up to `cols`.
    pub fn pad_cols(&self, cols: usize) -> Self {
        if cols == self.cols {
            return self.clone();
        }
        assert!(cols > self.cols);
        let mut out = Self::zeros(self.rows, cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
        }
        out
    }

    pub(crate) fn check_cols(&self, expected: usize, what: &str) -> Result<()> {
        if self.cols != expected {
            return Err(shape(format!(
                "{what}: expected {expected} columns, got {}",
                self.cols
            )));
        }
        Ok(())
    }
}

/// Per-item class identifiers in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Range(format!(
                "label {l} at position {i} is outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    /// Infers the class count as `max + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let num_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Self {
            labels,
            num_classes,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Item indices grouped by class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Number of distinct classes that actually occur.
    pub fn distinct(&self) -> usize {
        let mut seen = vec![false; self.num_classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }
}

/// `N × C` matrix of class posteriors, one row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(FeatureMatrix);

impl ProbabilityMatrix {
    /// Wraps a matrix whose rows are probability vectors. Rows are not renormalized.
    pub fn new(m: FeatureMatrix) -> Self {
        Self(m)
    }

    pub fn num_classes(&self) -> usize {
        self.0.cols()
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> FeatureMatrix {
        self.0
    }

    /// Argmax of every row, lowest index on ties.
    pub fn predicted(&self) -> LabelVector {
        let labels = self.0.iter_rows().map(argmax).collect();
        LabelVector {
            labels,
            num_classes: self.num_classes(),
        }
    }
}

/// Index of the largest entry; the lowest index wins ties. Panics on an empty slice.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// An ordering of database indices, best first. May be a top-k prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    /// Validates that `order` holds distinct indices below `n`.
    pub fn new(order: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n {
                return Err(Error::Range(format!("ranking index {i} >= database size {n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Range(format!("ranking repeats index {i}")));
            }
        }
        Ok(Self(order))
    }

    /// Wraps an order produced internally by a ranking routine.
    pub(crate) fn from_order_unchecked(order: Vec<usize>) -> Self {
        Self(order)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sq_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_shape_checked() {
        assert!(FeatureMatrix::new(2, 3, vec![0.0; 5]).is_err());
        let m = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.select_rows(&[1, 0]).row(0), &[3.0, 4.0]);
        assert_eq!(m.pad_cols(3).row(0), &[1.0, 2.0, 0.0]);
    }

    #[test]
    fn ranking_rejects_duplicates_and_out_of_range() {
        assert!(Ranking::new(vec![0, 1, 1], 3).is_err());
        assert!(Ranking::new(vec![0, 3], 3).is_err());
        assert!(Ranking::new(vec![2, 0], 3).is_ok());
    }

    #[test]
    fn argmax_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn labels_range_checked() {
        assert!(LabelVector::new(vec![0, 3], 3).is_err());
        let l = LabelVector::from_labels(vec![2, 0, 2]);
        assert_eq!(l.num_classes(), 3);
        assert_eq!(l.distinct(), 2);
        assert_eq!(l.indices_by_class()[2], vec![0, 2]);
    }
}
