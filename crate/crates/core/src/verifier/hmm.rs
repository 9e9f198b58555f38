//! Discrete HMM verifier trained by a modified Baum-Welch.
//!
//! The E-step is the usual scaled forward-backward pass. The M-step differs
//! from textbook Baum-Welch only for emissions:
//!
//! * symbols seen in training: `(sum_t 1[o_t = v] g_i(t) + delta) / (sum_t g_i(t) + T delta)`
//! * unseen symbols, [`SmoothingMode::Marginal`]: the product of the same
//!   ratio computed over the (location, timezone) marginal and over the
//!   (location, day type) marginal of the symbol
//! * unseen symbols, [`SmoothingMode::Laplace`]: `delta / (sum_t g_i(t) + T delta)`
//!
//! after which every emission row is renormalized. Unseen symbols without a
//! decomposition (the day separator) always take the Laplace value.
//!
//! Scores are forward log-likelihoods divided by the window length.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::{SymbolId, SymbolParts, Vocabulary};

pub const DEFAULT_HIDDEN_STATES: usize = 10;
pub const DEFAULT_HMM_DELTA: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Lower bound applied to start and transition probabilities when `delta > 0`.
const PROB_FLOOR: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingMode {
    Marginal,
    Laplace,
}

impl SmoothingMode {
    pub fn name(self) -> &'static str {
        match self {
            SmoothingMode::Marginal => "marginal",
            SmoothingMode::Laplace => "laplace",
        }
    }
}

impl fmt::Display for SmoothingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmoothingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginal" => Ok(SmoothingMode::Marginal),
            "laplace" => Ok(SmoothingMode::Laplace),
            other => Err(Error::Config(format!("unknown smoothing mode '{other}'"))),
        }
    }
}

/// Per-symbol (label, timezone, day type) decomposition used by marginal smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabMeta {
    parts: Vec<Option<SymbolParts>>,
    n_labels: usize,
}

impl VocabMeta {
    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        Self {
            parts: (0..vocab.size()).map(|s| vocab.parts(s)).collect(),
            n_labels: vocab.label_count(),
        }
    }

    /// A vocabulary of `size` symbols with no structure; marginal smoothing
    /// degenerates to Laplace smoothing on it.
    pub fn unstructured(size: usize) -> Self {
        Self {
            parts: vec![None; size],
            n_labels: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self, symbol: SymbolId) -> Option<SymbolParts> {
        self.parts[symbol]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmParams {
    pub pi: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hmm {
    /// Start distribution over hidden states.
    pub pi: Vec<f64>,
    /// `H x H` hidden-state transitions.
    pub a: Vec<Vec<f64>>,
    /// `H x V` emissions.
    pub b: Vec<Vec<f64>>,
    pub mode: SmoothingMode,
    pub delta: f64,
}

impl Hmm {
    pub fn from_params(params: HmmParams, mode: SmoothingMode, delta: f64) -> Self {
        Self {
            pi: params.pi,
            a: params.a,
            b: params.b,
            mode,
            delta,
        }
    }

    pub fn hidden_states(&self) -> usize {
        self.pi.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    /// Length-normalized forward log-likelihood.
    pub fn score(&self, window: &[SymbolId]) -> Result<f64> {
        let fwd = forward(self, window)?;
        Ok(fwd.log_likelihood / window.len() as f64)
    }

    fn check_window(&self, window: &[SymbolId]) -> Result<()> {
        if window.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let v = self.vocab_size();
        match window.iter().find(|&&s| s >= v) {
            Some(&symbol) => Err(Error::SymbolOutOfVocabulary {
                symbol,
                vocab_size: v,
            }),
            None => Ok(()),
        }
    }
}

/// Scaled forward variables. Each `alpha` row sums to one; the unscaled
/// value is `alpha[t][i] * prod_{s<=t} scales[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub alpha: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trellis {
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub scales: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    /// `xi[t][i][j]`, for t in 0..T-1.
    pub xi: Vec<Vec<Vec<f64>>>,
    pub log_likelihood: f64,
}

/// Scaled forward recursion. A window with zero probability yields a
/// log-likelihood of negative infinity.
pub fn forward(model: &Hmm, window: &[SymbolId]) -> Result<ForwardPass> {
    model.check_window(window)?;
    let h = model.hidden_states();
    let mut alpha = Vec::with_capacity(window.len());
    let mut scales = Vec::with_capacity(window.len());
    let mut log_likelihood = 0.0;

    let mut row: Vec<f64> = (0..h)
        .map(|i| model.pi[i] * model.b[i][window[0]])
        .collect();
    for (t, &o) in window.iter().enumerate() {
        if t > 0 {
            let prev: &Vec<f64> = &alpha[t - 1];
            row = (0..h)
                .map(|i| {
                    let inflow: f64 = (0..h).map(|j| prev[j] * model.a[j][i]).sum();
                    inflow * model.b[i][o]
                })
                .collect();
        }
        let c: f64 = row.iter().sum();
        if c > 0.0 {
            row.iter_mut().for_each(|x| *x /= c);
            log_likelihood += c.ln();
        } else {
            log_likelihood = f64::NEG_INFINITY;
        }
        scales.push(c);
        alpha.push(row.clone());
    }
    Ok(ForwardPass {
        alpha,
        scales,
        log_likelihood,
    })
}

/// Scaled backward recursion using the forward scaling factors.
pub fn backward_scaled(model: &Hmm, window: &[SymbolId], scales: &[f64]) -> Result<Vec<Vec<f64>>> {
    model.check_window(window)?;
    let h = model.hidden_states();
    let n = window.len();
    let mut beta = vec![vec![1.0; h]; n];
    for t in (0..n - 1).rev() {
        let o = window[t + 1];
        let c = scales[t + 1];
        if c <= 0.0 {
            return Err(Error::ZeroProbability);
        }
        for i in 0..h {
            beta[t][i] = (0..h)
                .map(|j| model.a[i][j] * model.b[j][o] * beta[t + 1][j])
                .sum::<f64>()
                / c;
        }
    }
    Ok(beta)
}

pub fn backward(model: &Hmm, window: &[SymbolId]) -> Result<Vec<Vec<f64>>> {
    let fwd = forward(model, window)?;
    backward_scaled(model, window, &fwd.scales)
}

/// State and pair posteriors for one window.
pub fn e_step(model: &Hmm, window: &[SymbolId]) -> Result<Trellis> {
    let fwd = forward(model, window)?;
    if !fwd.log_likelihood.is_finite() {
        return Err(Error::ZeroProbability);
    }
    let beta = backward_scaled(model, window, &fwd.scales)?;
    let h = model.hidden_states();
    let n = window.len();

    let gamma: Vec<Vec<f64>> = (0..n)
        .map(|t| {
            let mut g: Vec<f64> = (0..h).map(|i| fwd.alpha[t][i] * beta[t][i]).collect();
            normalize_or_uniform(&mut g);
            g
        })
        .collect();

    let xi: Vec<Vec<Vec<f64>>> = (0..n.saturating_sub(1))
        .map(|t| {
            let o = window[t + 1];
            let mut m: Vec<Vec<f64>> = (0..h)
                .map(|i| {
                    (0..h)
                        .map(|j| fwd.alpha[t][i] * model.a[i][j] * model.b[j][o] * beta[t + 1][j])
                        .collect()
                })
                .collect();
            let total: f64 = m.iter().flatten().sum();
            if total > 0.0 {
                m.iter_mut().flatten().for_each(|x| *x /= total);
            }
            m
        })
        .collect();

    Ok(Trellis {
        alpha: fwd.alpha,
        beta,
        scales: fwd.scales,
        gamma,
        xi,
        log_likelihood: fwd.log_likelihood,
    })
}

/// Expected counts shared by the emission update of every hidden state.
struct EmissionStats {
    /// `Sum_t g_i(t)` per state.
    occupancy: Vec<f64>,
    /// `Sum_t 1[o_t = v] g_i(t)`, `H x V`.
    symbol: Vec<Vec<f64>>,
    /// (label, timezone) marginal, `H x (labels * 3)`.
    label_tz: Vec<Vec<f64>>,
    /// (label, day type) marginal, `H x (labels * 2)`.
    label_day: Vec<Vec<f64>>,
    /// Raw training count of each symbol.
    seen: Vec<usize>,
}

impl EmissionStats {
    fn collect(gamma: &[Vec<f64>], window: &[SymbolId], vocab: &VocabMeta) -> Self {
        let h = gamma.first().map_or(0, Vec::len);
        let v = vocab.size();
        let mut stats = Self {
            occupancy: vec![0.0; h],
            symbol: vec![vec![0.0; v]; h],
            label_tz: vec![vec![0.0; vocab.n_labels * 3]; h],
            label_day: vec![vec![0.0; vocab.n_labels * 2]; h],
            seen: vec![0; v],
        };
        for (g, &o) in gamma.iter().zip(window) {
            stats.seen[o] += 1;
            let parts = vocab.parts(o);
            for i in 0..h {
                stats.occupancy[i] += g[i];
                stats.symbol[i][o] += g[i];
                if let Some(p) = parts {
                    stats.label_tz[i][p.label * 3 + p.timezone] += g[i];
                    stats.label_day[i][p.label * 2 + p.daytype] += g[i];
                }
            }
        }
        stats
    }
}

/// Modified M-step. Returns normalized `(pi, A, B)`.
///
/// Rows whose expected occupancy is zero (possible only with `delta = 0`)
/// come back uniform.
pub fn m_step(
    trellis: &Trellis,
    window: &[SymbolId],
    vocab: &VocabMeta,
    mode: SmoothingMode,
    delta: f64,
) -> HmmParams {
    let h = trellis.gamma.first().map_or(0, Vec::len);

    let mut pi = trellis.gamma[0].clone();
    normalize_or_uniform(&mut pi);

    let mut a = vec![vec![0.0; h]; h];
    for xi_t in &trellis.xi {
        for i in 0..h {
            for j in 0..h {
                a[i][j] += xi_t[i][j];
            }
        }
    }
    for row in &mut a {
        normalize_or_uniform(row);
    }

    let mut b = raw_emissions(&trellis.gamma, window, vocab, mode, delta);
    for row in &mut b {
        normalize_or_uniform(row);
    }

    let mut params = HmmParams { pi, a, b };
    if delta > 0.0 {
        apply_floor(&mut params.pi);
        for row in &mut params.a {
            apply_floor(row);
        }
    }
    params
}

/// Un-normalized emission estimates, one row per hidden state.
pub fn raw_emissions(
    gamma: &[Vec<f64>],
    window: &[SymbolId],
    vocab: &VocabMeta,
    mode: SmoothingMode,
    delta: f64,
) -> Vec<Vec<f64>> {
    let stats = EmissionStats::collect(gamma, window, vocab);
    let t_len = window.len() as f64;
    let h = stats.occupancy.len();
    let v = vocab.size();
    let mut b = vec![vec![0.0; v]; h];
    for i in 0..h {
        let denom = stats.occupancy[i] + t_len * delta;
        if denom <= 0.0 {
            continue;
        }
        for k in 0..v {
            b[i][k] = if stats.seen[k] > 0 {
                (stats.symbol[i][k] + delta) / denom
            } else {
                match (mode, vocab.parts(k)) {
                    (SmoothingMode::Marginal, Some(p)) => {
                        let by_tz = (stats.label_tz[i][p.label * 3 + p.timezone] + delta) / denom;
                        let by_day = (stats.label_day[i][p.label * 2 + p.daytype] + delta) / denom;
                        by_tz * by_day
                    }
                    _ => delta / denom,
                }
            };
        }
    }
    b
}

fn normalize_or_uniform(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    if total > 0.0 && total.is_finite() {
        row.iter_mut().for_each(|x| *x /= total);
    } else {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|x| *x = u);
    }
}

fn apply_floor(row: &mut [f64]) {
    if row.iter().any(|&x| x < PROB_FLOOR) {
        row.iter_mut().for_each(|x| *x = x.max(PROB_FLOOR));
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmmConfig {
    pub hidden_states: usize,
    pub mode: SmoothingMode,
    pub delta: f64,
    pub max_iters: usize,
    /// Relative log-likelihood change below which training stops.
    pub tol: f64,
    pub seed: u64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        Self {
            hidden_states: DEFAULT_HIDDEN_STATES,
            mode: SmoothingMode::Marginal,
            delta: DEFAULT_HMM_DELTA,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed: 0,
        }
    }
}

/// One training iteration as seen by an observer: the log-likelihood of the
/// data under the parameters going into the iteration, and the model after
/// its M-step.
pub struct Iteration<'a> {
    pub index: usize,
    pub log_likelihood: f64,
    pub model: &'a Hmm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Hmm,
    /// Training log-likelihood before each M-step, plus the final model's.
    pub log_likelihoods: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Seeded Dirichlet(1) initialization.
pub fn random_init(hidden: usize, vocab_size: usize, seed: u64) -> HmmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> {
        let mut row: Vec<f64> = (0..n)
            .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-6)
            .collect();
        normalize_or_uniform(&mut row);
        row
    };
    let pi = draw(hidden);
    let a = (0..hidden).map(|_| draw(hidden)).collect();
    let b = (0..hidden).map(|_| draw(vocab_size)).collect();
    HmmParams { pi, a, b }
}

pub fn train_mshmm(
    symbols: &[SymbolId],
    vocab: &VocabMeta,
    config: &HmmConfig,
) -> Result<TrainOutcome> {
    train_with_observer(symbols, vocab, config, |_| {})
}

/// Baum-Welch with the modified M-step, starting from [`random_init`].
///
/// Stops once `|ll - ll_prev| <= tol * |ll_prev|` or after `max_iters`
/// M-steps. Per-iteration log-likelihoods are logged at debug level.
pub fn train_with_observer<F>(
    symbols: &[SymbolId],
    vocab: &VocabMeta,
    config: &HmmConfig,
    mut observer: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&Iteration<'_>),
{
    if symbols.len() < 2 {
        return Err(Error::SequenceTooShort {
            needed: 2,
            got: symbols.len(),
        });
    }
    if config.hidden_states == 0 {
        return Err(Error::InvalidParameter(
            "hidden state count must be positive".into(),
        ));
    }
    if !(config.delta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be non-negative, got {}",
            config.delta
        )));
    }
    if let Some(&s) = symbols.iter().find(|&&s| s >= vocab.size()) {
        return Err(Error::SymbolOutOfVocabulary {
            symbol: s,
            vocab_size: vocab.size(),
        });
    }

    let init = random_init(config.hidden_states, vocab.size(), config.seed);
    let mut model = Hmm::from_params(init, config.mode, config.delta);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let trellis = e_step(&model, symbols)?;
        let ll = trellis.log_likelihood;
        if let Some(&prev) = history.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= config.tol * prev.abs() {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        let params = m_step(&trellis, symbols, vocab, config.mode, config.delta);
        model = Hmm::from_params(params, config.mode, config.delta);
        iterations += 1;
        log::debug!("baum-welch iteration {iterations}: log-likelihood {ll:.6}");
        observer(&Iteration {
            index: iterations,
            log_likelihood: ll,
            model: &model,
        });
    }
    if !converged {
        history.push(forward(&model, symbols)?.log_likelihood);
    }

    Ok(TrainOutcome {
        model,
        log_likelihoods: history,
        iterations,
        converged,
    })
}

pub fn mshmm_score(model: &Hmm, window: &[SymbolId]) -> Result<f64> {
    model.score(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive sum over every hidden path; independent of the trellis code.
    fn brute_force_likelihood(m: &Hmm, obs: &[usize]) -> f64 {
        let h = m.hidden_states();
        let n = obs.len();
        let mut total = 0.0;
        for code in 0..h.pow(n as u32) {
            let path: Vec<usize> = (0..n).map(|t| (code / h.pow(t as u32)) % h).collect();
            let mut p = m.pi[path[0]] * m.b[path[0]][obs[0]];
            for t in 1..n {
                p *= m.a[path[t - 1]][path[t]] * m.b[path[t]][obs[t]];
            }
            total += p;
        }
        total
    }

    /// Posterior marginals P(X_t = i | O) and P(X_t = i, X_t+1 = j | O) by enumeration.
    fn brute_force_posteriors(m: &Hmm, obs: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let h = m.hidden_states();
        let n = obs.len();
        let mut gamma = vec![vec![0.0; h]; n];
        let mut xi = vec![vec![vec![0.0; h]; h]; n - 1];
        let mut total = 0.0;
        for code in 0..h.pow(n as u32) {
            let path: Vec<usize> = (0..n).map(|t| (code / h.pow(t as u32)) % h).collect();
            let mut p = m.pi[path[0]] * m.b[path[0]][obs[0]];
            for t in 1..n {
                p *= m.a[path[t - 1]][path[t]] * m.b[path[t]][obs[t]];
            }
            total += p;
            for t in 0..n {
                gamma[t][path[t]] += p;
                if t + 1 < n {
                    xi[t][path[t]][path[t + 1]] += p;
                }
            }
        }
        gamma.iter_mut().flatten().for_each(|x| *x /= total);
        xi.iter_mut().flatten().flatten().for_each(|x| *x /= total);
        (gamma, xi)
    }

    fn random_model(h: usize, v: usize, seed: u64) -> Hmm {
        Hmm::from_params(random_init(h, v, seed), SmoothingMode::Laplace, 1e-3)
    }

    fn uniform_model(h: usize, v: usize) -> Hmm {
        Hmm {
            pi: vec![1.0 / h as f64; h],
            a: vec![vec![1.0 / h as f64; h]; h],
            b: vec![vec![1.0 / v as f64; v]; h],
            mode: SmoothingMode::Laplace,
            delta: 1e-3,
        }
    }

    #[test]
    fn single_state_is_a_multinomial() {
        let m = random_model(1, 4, 7);
        let obs = [0, 3, 3, 1, 2];
        let ll = forward(&m, &obs).unwrap().log_likelihood;
        let want: f64 = obs.iter().map(|&o| m.b[0][o].ln()).sum();
        assert!((ll - want).abs() < 1e-12);
        let beta = backward(&m, &obs).unwrap();
        assert!(beta.iter().flatten().all(|&b| (b - 1.0).abs() < 1e-12));
    }

    #[test]
    fn forward_matches_enumeration_h2_t3() {
        let m = random_model(2, 3, 11);
        let obs = [2, 0, 1];
        let ll = forward(&m, &obs).unwrap().log_likelihood;
        assert!((ll.exp() - brute_force_likelihood(&m, &obs)).abs() < 1e-10);
    }

    #[test]
    fn uniform_model_likelihood() {
        let m = uniform_model(2, 2);
        for t in 1..8 {
            let obs: Vec<usize> = (0..t).map(|k| k % 2).collect();
            let ll = forward(&m, &obs).unwrap().log_likelihood;
            assert!((ll - t as f64 * 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_terminal_is_one() {
        let m = random_model(3, 4, 5);
        assert_eq!(backward(&m, &[2]).unwrap(), vec![vec![1.0; 3]]);
    }

    #[test]
    fn alpha_beta_product_is_constant() {
        let m = random_model(3, 4, 9);
        let obs = [0, 1, 3, 3, 2, 0, 1];
        let fwd = forward(&m, &obs).unwrap();
        let beta = backward(&m, &obs).unwrap();
        for t in 0..obs.len() {
            let s: f64 = (0..3).map(|i| fwd.alpha[t][i] * beta[t][i]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn posteriors_match_enumeration() {
        let m = random_model(2, 3, 21);
        for obs in [vec![1, 2], vec![0, 2, 1]] {
            let tr = e_step(&m, &obs).unwrap();
            let (g, x) = brute_force_posteriors(&m, &obs);
            for t in 0..obs.len() {
                for i in 0..2 {
                    assert!((tr.gamma[t][i] - g[t][i]).abs() < 1e-12);
                }
            }
            for t in 0..obs.len() - 1 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((tr.xi[t][i][j] - x[t][i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn one_hot_emissions_give_one_hot_posteriors() {
        let m = Hmm {
            pi: vec![0.5, 0.5],
            a: vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            mode: SmoothingMode::Laplace,
            delta: 0.0,
        };
        let tr = e_step(&m, &[0, 1, 1, 0]).unwrap();
        assert_eq!(
            tr.gamma,
            vec![
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0]
            ]
        );
    }

    #[test]
    fn out_of_vocabulary_and_empty_windows() {
        let m = random_model(2, 3, 1);
        assert!(matches!(
            forward(&m, &[3]),
            Err(Error::SymbolOutOfVocabulary { symbol: 3, .. })
        ));
        assert!(matches!(forward(&m, &[]), Err(Error::EmptyWindow)));
    }

    #[test]
    fn zero_probability_window() {
        let m = Hmm {
            pi: vec![1.0],
            a: vec![vec![1.0]],
            b: vec![vec![1.0, 0.0]],
            mode: SmoothingMode::Laplace,
            delta: 0.0,
        };
        assert_eq!(
            forward(&m, &[0, 1]).unwrap().log_likelihood,
            f64::NEG_INFINITY
        );
        assert!(matches!(e_step(&m, &[0, 1]), Err(Error::ZeroProbability)));
    }

    /// Vocabulary of one cluster: labels Known(1), NearUnknown(1), FarUnknown, Transit.
    fn one_cluster_vocab() -> (Vocabulary, VocabMeta) {
        let v = Vocabulary::new(1);
        (v, VocabMeta::from_vocabulary(&v))
    }

    #[test]
    fn marginal_hand_example() {
        // C1 appears 6 times in TZ1 (all weekdays) and 3 times on weekends
        // (all TZ2); T = 12 with uniform gamma over a single state.
        let (v, meta) = one_cluster_vocab();
        let sym = |tz: usize, wd: usize| tz * 2 + wd;
        let mut window = vec![sym(0, 0); 6];
        window.extend(vec![sym(1, 1); 3]);
        window.extend(vec![v.null(); 3]);
        let gamma = vec![vec![1.0]; 12];
        let raw = raw_emissions(&gamma, &window, &meta, SmoothingMode::Marginal, 0.0);
        let target = sym(0, 1); // C1, TZ1, WE: unseen
        assert_eq!(raw[0][target], 0.125);
        assert!((raw[0][target] - (6.0 / 12.0) * (3.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn laplace_hand_example() {
        let (_, meta) = one_cluster_vocab();
        let window = vec![0usize; 10];
        let gamma = vec![vec![1.0]; 10];
        let raw = raw_emissions(&gamma, &window, &meta, SmoothingMode::Laplace, 1e-3);
        // symbol 18 is Transit/TZ1/WD, never observed
        let want = 1e-3 / (10.0 + 10.0 * 1e-3);
        assert!((raw[0][18] - want).abs() < 1e-18);
        assert!((want - 9.99e-5).abs() < 1e-7);
    }

    #[test]
    fn unseen_null_falls_back_to_laplace() {
        let (v, meta) = one_cluster_vocab();
        let window = vec![0usize, 1, 2, 3];
        let gamma = vec![vec![1.0]; 4];
        let marg = raw_emissions(&gamma, &window, &meta, SmoothingMode::Marginal, 1e-2);
        let lap = raw_emissions(&gamma, &window, &meta, SmoothingMode::Laplace, 1e-2);
        assert_eq!(marg[0][v.null()], lap[0][v.null()]);
    }

    #[test]
    fn fully_observed_vocab_makes_modes_identical() {
        let v = 5;
        let meta = VocabMeta::unstructured(v);
        let symbols: Vec<usize> = (0..60).map(|k| (k * 7 + k / 3) % v).collect();
        for delta in [0.0, 1e-3] {
            let cfg = |mode| HmmConfig {
                hidden_states: 3,
                mode,
                delta,
                max_iters: 30,
                tol: 0.0,
                seed: 3,
            };
            let a = train_mshmm(&symbols, &meta, &cfg(SmoothingMode::Marginal)).unwrap();
            let b = train_mshmm(&symbols, &meta, &cfg(SmoothingMode::Laplace)).unwrap();
            assert_eq!(a.model.pi, b.model.pi);
            assert_eq!(a.model.a, b.model.a);
            assert_eq!(a.model.b, b.model.b);
        }
    }

    #[test]
    fn single_state_converges_to_smoothed_unigram() {
        let v = 6;
        let meta = VocabMeta::unstructured(v);
        let symbols = [0, 1, 1, 2, 2, 2, 0, 1, 4, 4];
        let delta = 0.05;
        let cfg = HmmConfig {
            hidden_states: 1,
            mode: SmoothingMode::Laplace,
            delta,
            max_iters: 5,
            tol: 0.0,
            seed: 1,
        };
        let out = train_mshmm(&symbols, &meta, &cfg).unwrap();
        let t = symbols.len() as f64;
        for k in 0..v {
            let count = symbols.iter().filter(|&&s| s == k).count() as f64;
            let want = (count + delta) / (t + v as f64 * delta);
            assert!((out.model.b[0][k] - want).abs() < 1e-12, "symbol {k}");
        }
    }

    #[test]
    fn laplace_without_smoothing_is_monotone() {
        let meta = VocabMeta::unstructured(4);
        let symbols: Vec<usize> = (0..80)
            .map(|k| [0, 1, 1, 2, 3, 3, 0, 2][k % 8] ^ (k / 17 % 2))
            .collect();
        let cfg = HmmConfig {
            hidden_states: 3,
            mode: SmoothingMode::Laplace,
            delta: 0.0,
            max_iters: 60,
            tol: 0.0,
            seed: 8,
        };
        let out = train_mshmm(&symbols, &meta, &cfg).unwrap();
        for w in out.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (v, meta) = one_cluster_vocab();
        let symbols: Vec<usize> = (0..100).map(|k| (k * 5 + 1) % v.size()).collect();
        let cfg = HmmConfig {
            hidden_states: 4,
            seed: 42,
            max_iters: 20,
            ..HmmConfig::default()
        };
        let a = train_mshmm(&symbols, &meta, &cfg).unwrap();
        let b = train_mshmm(&symbols, &meta, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_rejects_short_sequences() {
        let meta = VocabMeta::unstructured(3);
        assert!(matches!(
            train_mshmm(&[1], &meta, &HmmConfig::default()),
            Err(Error::SequenceTooShort { .. })
        ));
    }

    #[test]
    fn per_symbol_score_is_stable_under_self_concatenation() {
        let m = random_model(1, 5, 4);
        let w = vec![0, 3, 1, 4, 2, 2];
        let doubled: Vec<usize> = w.iter().chain(&w).copied().collect();
        let a = m.score(&w).unwrap();
        let b = m.score(&doubled).unwrap();
        assert!(((a - b) / a).abs() < 0.10);
    }

    proptest! {
        #[test]
        fn forward_equals_enumeration(
            h in 1usize..=3,
            v in 1usize..=5,
            seed in any::<u64>(),
            obs in proptest::collection::vec(0usize..5, 1..=6),
        ) {
            let m = random_model(h, v, seed);
            let obs: Vec<usize> = obs.into_iter().map(|o| o % v).collect();
            let ll = forward(&m, &obs).unwrap().log_likelihood;
            let oracle = brute_force_likelihood(&m, &obs).ln();
            prop_assert!((ll - oracle).abs() < 1e-9);
        }

        #[test]
        fn trellis_invariants(
            h in 1usize..=4,
            seed in any::<u64>(),
            obs in proptest::collection::vec(0usize..6, 2..40),
        ) {
            let m = random_model(h, 6, seed);
            let tr = e_step(&m, &obs).unwrap();
            for g in &tr.gamma {
                prop_assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
            for (t, x) in tr.xi.iter().enumerate() {
                for i in 0..h {
                    prop_assert!((x[i].iter().sum::<f64>() - tr.gamma[t][i]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn m_step_is_stochastic_and_positive(
            h in 1usize..=4,
            seed in any::<u64>(),
            obs in proptest::collection::vec(0usize..25, 2..60),
            marginal in any::<bool>(),
        ) {
            let vocab = Vocabulary::new(1);
            let meta = VocabMeta::from_vocabulary(&vocab);
            let m = random_model(h, vocab.size(), seed);
            let tr = e_step(&m, &obs).unwrap();
            let mode = if marginal { SmoothingMode::Marginal } else { SmoothingMode::Laplace };
            let p = m_step(&tr, &obs, &meta, mode, 1e-3);
            prop_assert!((p.pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(p.pi.iter().all(|&x| x > 0.0));
            for row in p.a.iter().chain(&p.b) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|&x| x > 0.0));
            }
        }

        // Marginal >= Laplace for an unseen symbol holds exactly when
        // (m_tz + d)(m_day + d) >= d * (occupancy + T d); both marginals
        // positive and delta small is the practical case.
        #[test]
        fn marginal_dominates_laplace_when_both_marginals_present(
            seed in any::<u64>(),
            obs in proptest::collection::vec(0usize..12, 4..60),
        ) {
            let vocab = Vocabulary::new(1);
            let meta = VocabMeta::from_vocabulary(&vocab);
            let m = random_model(2, vocab.size(), seed);
            let tr = e_step(&m, &obs).unwrap();
            let delta = 1e-6;
            let marg = raw_emissions(&tr.gamma, &obs, &meta, SmoothingMode::Marginal, delta);
            let lap = raw_emissions(&tr.gamma, &obs, &meta, SmoothingMode::Laplace, delta);
            let t = obs.len() as f64;
            for i in 0..2 {
                let occupancy: f64 = tr.gamma.iter().map(|g| g[i]).sum();
                for k in 0..vocab.null() {
                    if obs.contains(&k) {
                        continue;
                    }
                    let p = meta.parts(k).unwrap();
                    let tz: f64 = obs.iter().zip(&tr.gamma)
                        .filter(|(o, _)| meta.parts(**o).is_some_and(|q| q.label == p.label && q.timezone == p.timezone))
                        .map(|(_, g)| g[i]).sum();
                    let day: f64 = obs.iter().zip(&tr.gamma)
                        .filter(|(o, _)| meta.parts(**o).is_some_and(|q| q.label == p.label && q.daytype == p.daytype))
                        .map(|(_, g)| g[i]).sum();
                    if (tz + delta) * (day + delta) >= delta * (occupancy + t * delta) {
                        prop_assert!(marg[i][k] >= lap[i][k]);
                    }
                }
            }
        }
    }
}
