//! Class-disjoint folds: one seeded shuffle of the classes, cut into quarters.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng;
use crate::types::LabelVector;

pub const NUM_FOLDS: usize = 4;
pub const MIN_CLASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSplit {
    pub seed: u64,
    pub fold: usize,
    /// The 75% of classes available for learning, ascending.
    pub known_classes: Vec<usize>,
    /// The 25% held out for evaluation, ascending.
    pub held_out_classes: Vec<usize>,
}

/// Item indices of the four sets induced by a class split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSets {
    pub train75: Vec<usize>,
    pub test75: Vec<usize>,
    pub train25: Vec<usize>,
    pub test25: Vec<usize>,
}

impl ClassSplit {
    pub fn num_classes(&self) -> usize {
        self.known_classes.len() + self.held_out_classes.len()
    }

    pub fn is_held_out(&self, class: usize) -> bool {
        self.held_out_classes.binary_search(&class).is_ok()
    }

    /// Partitions train/test item indices by whether their class is held out.
    pub fn partition(&self, labels: &LabelVector, train: &[usize], test: &[usize]) -> SplitSets {
        let mut s = SplitSets::default();
        for &i in train {
            if self.is_held_out(labels.get(i)) {
                s.train25.push(i);
            } else {
                s.train75.push(i);
            }
        }
        for &i in test {
            if self.is_held_out(labels.get(i)) {
                s.test25.push(i);
            } else {
                s.test75.push(i);
            }
        }
        s
    }

    /// Dense index of a held-out class within this fold.
    pub fn held_out_index(&self, class: usize) -> Option<usize> {
        self.held_out_classes.binary_search(&class).ok()
    }
}

/// Four splits; fold `f` holds out the `f`-th quarter of one shuffled class list.
///
/// Quarter sizes are `floor(C/4)`, with the `C mod 4` leftover classes
/// assigned one each to the first folds.
pub fn make_class_splits(num_classes: usize, seed: u64) -> Result<Vec<ClassSplit>> {
    if num_classes < MIN_CLASSES {
        return Err(Error::TooFewClasses {
            needed: MIN_CLASSES,
            got: num_classes,
        });
    }
    let mut order: Vec<usize> = (0..num_classes).collect();
    order.shuffle(&mut rng(seed));
    let base = num_classes / NUM_FOLDS;
    let extra = num_classes % NUM_FOLDS;
    let mut start = 0;
    let mut splits = Vec::with_capacity(NUM_FOLDS);
    for fold in 0..NUM_FOLDS {
        let size = base + usize::from(fold < extra);
        let mut held: Vec<usize> = order[start..start + size].to_vec();
        held.sort_unstable();
        let mut known: Vec<usize> = (0..num_classes)
            .filter(|c| held.binary_search(c).is_err())
            .collect();
        known.sort_unstable();
        splits.push(ClassSplit {
            seed,
            fold,
            known_classes: known,
            held_out_classes: held,
        });
        start += size;
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_classes() {
        let s = make_class_splits(100, 3).unwrap();
        let mut all: Vec<usize> = s.iter().flat_map(|f| f.held_out_classes.clone()).collect();
        assert!(s.iter().all(|f| f.held_out_classes.len() == 25 && f.known_classes.len() == 75));
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, make_class_splits(100, 3).unwrap());
        assert_ne!(s, make_class_splits(100, 4).unwrap());
    }

    #[test]
    fn small_class_counts() {
        let s = make_class_splits(8, 0).unwrap();
        assert!(s.iter().all(|f| f.held_out_classes.len() == 2));
        let s = make_class_splits(10, 0).unwrap();
        let sizes: Vec<usize> = s.iter().map(|f| f.held_out_classes.len()).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        assert!(matches!(
            make_class_splits(7, 0),
            Err(Error::TooFewClasses { needed: 8, got: 7 })
        ));
    }

    #[test]
    fn partition_respects_classes() {
        let s = &make_class_splits(8, 1).unwrap()[0];
        let labels = LabelVector::new((0..32).map(|i| i % 8).collect(), 8).unwrap();
        let train: Vec<usize> = (0..24).collect();
        let test: Vec<usize> = (24..32).collect();
        let sets = s.partition(&labels, &train, &test);
        assert_eq!(sets.train25.len(), 6);
        assert_eq!(sets.test25.len(), 2);
        assert!(sets.train25.iter().all(|&i| s.is_held_out(labels.get(i))));
        assert!(sets.train75.iter().all(|&i| !s.is_held_out(labels.get(i))));
    }
}
