//! First-order Markov chain verifier with add-delta smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::SymbolId;

pub const DEFAULT_MC_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub prior: Vec<f64>,
    /// Row-stochastic `V x V` matrix, `transitions[i][j] = P(next = j | current = i)`.
    pub transitions: Vec<Vec<f64>>,
    pub delta: f64,
}

impl MarkovChain {
    /// Estimates prior and transitions from one symbol sequence.
    ///
    /// Prior counts come from the first symbol and from every symbol that
    /// follows `day_separator` (the per-day start states). Both prior and
    /// transition counts get `delta` added before normalizing.
    pub fn train(
        symbols: &[SymbolId],
        vocab_size: usize,
        delta: f64,
        day_separator: Option<SymbolId>,
    ) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::SequenceTooShort {
                needed: 2,
                got: symbols.len(),
            });
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {delta}"
            )));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= vocab_size) {
            return Err(Error::SymbolOutOfVocabulary {
                symbol: s,
                vocab_size,
            });
        }

        let mut prior = vec![delta; vocab_size];
        prior[symbols[0]] += 1.0;
        let mut transitions = vec![vec![delta; vocab_size]; vocab_size];
        for w in symbols.windows(2) {
            transitions[w[0]][w[1]] += 1.0;
            if Some(w[0]) == day_separator && Some(w[1]) != day_separator {
                prior[w[1]] += 1.0;
            }
        }
        normalize(&mut prior);
        for row in &mut transitions {
            normalize(row);
        }
        Ok(Self {
            prior,
            transitions,
            delta,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.prior.len()
    }

    /// `log prior[w0] + sum log t[w(k-1)][w(k)]`.
    pub fn score(&self, window: &[SymbolId]) -> Result<f64> {
        let (&first, _) = window.split_first().ok_or(Error::EmptyWindow)?;
        let v = self.vocab_size();
        if let Some(&s) = window.iter().find(|&&s| s >= v) {
            return Err(Error::SymbolOutOfVocabulary {
                symbol: s,
                vocab_size: v,
            });
        }
        let mut ll = self.prior[first].ln();
        for w in window.windows(2) {
            ll += self.transitions[w[0]][w[1]].ln();
        }
        Ok(ll)
    }
}

pub fn train_mc(symbols: &[SymbolId], vocab_size: usize, delta: f64) -> Result<MarkovChain> {
    MarkovChain::train(symbols, vocab_size, delta, None)
}

pub fn mc_score(model: &MarkovChain, window: &[SymbolId]) -> Result<f64> {
    model.score(window)
}

fn normalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    for x in row {
        *x /= total;
    }
}
