//! Per-user model: cluster model plus one trained verifier.

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterModel, ClusterParams};
use crate::error::Result;
use crate::geo::{resample, ResampleConfig, Trace};
use crate::observation::{build_sequence, ObservationSequence, SymbolId};
use crate::verifier::hmm::{train_mshmm, HmmConfig, VocabMeta};
use crate::verifier::mc::DEFAULT_MC_DELTA;
use crate::verifier::{MarkovChain, Method, SmModel, Verifier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub resample: ResampleConfig,
    pub cluster: ClusterParams,
    /// HMM settings; the smoothing mode is taken from the method.
    pub hmm: HmmConfig,
    pub mc_delta: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            resample: ResampleConfig::default(),
            cluster: ClusterParams::default(),
            hmm: HmmConfig::default(),
            mc_delta: DEFAULT_MC_DELTA,
        }
    }
}

/// Trains the verifier for `method` on an encoded training sequence.
pub fn train_verifier(
    seq: &ObservationSequence,
    method: Method,
    config: &PipelineConfig,
) -> Result<Verifier> {
    let symbols = seq.symbols();
    let vocab = seq.vocabulary;
    Ok(match method {
        Method::Sm => Verifier::Sm(SmModel::new(symbols)?),
        Method::Mc => Verifier::Mc(MarkovChain::train(
            &symbols,
            vocab.size(),
            config.mc_delta,
            Some(vocab.null()),
        )?),
        Method::Mshmm | Method::HmmLap => {
            let hmm_config = HmmConfig {
                mode: method.smoothing().expect("hmm method"),
                ..config.hmm
            };
            let meta = VocabMeta::from_vocabulary(&vocab);
            let outcome = train_mshmm(&symbols, &meta, &hmm_config)?;
            log::debug!(
                "{}: {} after {} iterations (converged: {})",
                seq.user_id,
                method,
                outcome.iterations,
                outcome.converged
            );
            Verifier::Hmm(outcome.model)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    pub clusters: ClusterModel,
    pub verifier: Verifier,
}

impl UserModel {
    /// Clusters and encodes an already-resampled training trace, then trains.
    pub fn train(train: &Trace, method: Method, config: &PipelineConfig) -> Result<Self> {
        let clusters = ClusterModel::build(train.user_id.clone(), &train.points, &config.cluster)?;
        let seq = build_sequence(train, &clusters);
        let verifier = train_verifier(&seq, method, config)?;
        Ok(Self { clusters, verifier })
    }

    /// Resamples then trains on a raw trace.
    pub fn train_raw(raw: &Trace, method: Method, config: &PipelineConfig) -> Result<Self> {
        Self::train(&resample(raw, &config.resample)?, method, config)
    }

    pub fn encode(&self, trace: &Trace) -> ObservationSequence {
        build_sequence(trace, &self.clusters)
    }

    pub fn score(&self, window: &[SymbolId]) -> Result<f64> {
        self.verifier.score(window)
    }
}
