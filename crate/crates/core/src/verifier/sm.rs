//! Sequence-matching baseline.
//!
//! A single left-to-right pass over the training symbols advances a cursor
//! through the test window on every match. Each full traversal of the window
//! counts as one complete match and resets the cursor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::SymbolId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmModel {
    pub training: Vec<SymbolId>,
}

impl SmModel {
    pub fn new(training: Vec<SymbolId>) -> Result<Self> {
        if training.is_empty() {
            return Err(Error::SequenceTooShort { needed: 1, got: 0 });
        }
        Ok(Self { training })
    }

    /// Match ratio `(complete * |window| + partial) / (|training| + |window|)`.
    pub fn score(&self, window: &[SymbolId]) -> Result<f64> {
        if window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let (complete, partial) = self.traverse(window);
        let numerator = (complete * window.len() + partial) as f64;
        let denominator = (self.training.len() + window.len()) as f64;
        Ok((numerator / denominator).clamp(0.0, 1.0))
    }

    /// Returns (complete traversals, cursor position at the end).
    pub fn traverse(&self, window: &[SymbolId]) -> (usize, usize) {
        let mut complete = 0;
        let mut cursor = 0;
        for &symbol in &self.training {
            if symbol == window[cursor] {
                cursor += 1;
                if cursor == window.len() {
                    cursor = 0;
                    complete += 1;
                }
            }
        }
        (complete, cursor)
    }
}

pub fn sm_score(model: &SmModel, window: &[SymbolId]) -> Result<f64> {
    model.score(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_sequences() {
        let m = SmModel::new(vec![0, 1, 2]).unwrap();
        assert_eq!(m.traverse(&[0, 1, 2]), (1, 0));
        assert_eq!(m.score(&[0, 1, 2]).unwrap(), 0.5);
    }

    #[test]
    fn no_overlap() {
        let m = SmModel::new(vec![9, 9, 9]).unwrap();
        assert_eq!(m.score(&[0]).unwrap(), 0.0);
    }

    #[test]
    fn repeated_single_symbol() {
        let m = SmModel::new(vec![4, 4, 4, 4]).unwrap();
        assert_eq!(m.traverse(&[4]), (4, 0));
        assert_eq!(m.score(&[4]).unwrap(), 0.8);
    }

    #[test]
    fn partial_progress_counts() {
        let m = SmModel::new(vec![1, 2, 3, 1]).unwrap();
        // one full match of [1,2] then the trailing 1 advances the cursor
        assert_eq!(m.traverse(&[1, 2]), (1, 1));
        assert_eq!(m.score(&[1, 2]).unwrap(), 3.0 / 6.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            SmModel::new(vec![]),
            Err(Error::SequenceTooShort { .. })
        ));
        let m = SmModel::new(vec![1]).unwrap();
        assert!(matches!(m.score(&[]), Err(Error::EmptyWindow)));
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(
            training in proptest::collection::vec(0usize..4, 1..60),
            window in proptest::collection::vec(0usize..4, 1..10),
        ) {
            let r = SmModel::new(training).unwrap().score(&window).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn disjoint_alphabets_score_zero(
            training in proptest::collection::vec(0usize..4, 1..60),
            window in proptest::collection::vec(4usize..8, 1..10),
        ) {
            prop_assert_eq!(SmModel::new(training).unwrap().score(&window).unwrap(), 0.0);
        }

        #[test]
        fn more_complete_matches_never_lower_the_score(
            reps in 0usize..6,
            window in proptest::collection::vec(0usize..3, 1..5),
            filler in 3usize..6,
        ) {
            // fixed lengths: each block is either a copy of the window or filler
            let len = window.len();
            let build = |k: usize| -> Vec<usize> {
                let mut t = Vec::new();
                for b in 0..6 {
                    if b < k { t.extend(&window) } else { t.extend(std::iter::repeat_n(filler, len)) }
                }
                t
            };
            let lo = SmModel::new(build(reps)).unwrap().score(&window).unwrap();
            let hi = SmModel::new(build(reps + 1)).unwrap().score(&window).unwrap();
            prop_assert!(hi >= lo);
        }
    }
}
