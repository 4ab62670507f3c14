//! Class-index codes: an item is stored as the index of its strongest class.

use crate::error::{shape, Result};
use crate::types::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotCode {
    pub class_index: usize,
    pub num_classes: usize,
}

impl OneHotCode {
    pub fn code_size_bits(&self) -> usize {
        bits_for_classes(self.num_classes)
    }
}

/// `ceil(log2 C)`, the storage needed for a class index.
pub fn bits_for_classes(num_classes: usize) -> usize {
    if num_classes <= 1 {
        0
    } else {
        (usize::BITS - (num_classes - 1).leading_zeros()) as usize
    }
}

/// Argmax of a posterior vector, lowest index on ties.
pub fn onehot_encode(probs: &[f64]) -> Result<OneHotCode> {
    if probs.is_empty() {
        return Err(shape("one-hot encoding of an empty probability vector"));
    }
    Ok(OneHotCode {
        class_index: argmax(probs),
        num_classes: probs.len(),
    })
}

/// The indicator vector of `class` among `num_classes`.
pub fn indicator(class: usize, num_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_classes];
    v[class] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_sizes() {
        assert_eq!(bits_for_classes(10), 4);
        assert_eq!(bits_for_classes(1000), 10);
        assert_eq!(bits_for_classes(2), 1);
        assert_eq!(bits_for_classes(16), 4);
        assert_eq!(bits_for_classes(17), 5);
        assert_eq!(bits_for_classes(100), 7);
    }

    #[test]
    fn encode_is_argmax() {
        let c = onehot_encode(&[0.1, 0.7, 0.2]).unwrap();
        assert_eq!(c.class_index, 1);
        assert_eq!(c.code_size_bits(), 2);
        assert_eq!(onehot_encode(&[0.25; 4]).unwrap().class_index, 0);
        assert!(onehot_encode(&[]).is_err());
    }
}
