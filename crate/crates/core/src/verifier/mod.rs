//! The three verifiers and a common scoring front end.

pub mod hmm;
pub mod mc;
pub mod sm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observation::SymbolId;

pub use hmm::{Hmm, HmmConfig, SmoothingMode};
pub use mc::MarkovChain;
pub use sm::SmModel;

/// Verification method. `Mshmm` and `HmmLap` share the HMM verifier and
/// differ only in how unseen symbols are smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sm,
    Mc,
    Mshmm,
    HmmLap,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sm, Method::Mc, Method::Mshmm, Method::HmmLap];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sm => "sm",
            Method::Mc => "mc",
            Method::Mshmm => "mshmm",
            Method::HmmLap => "hmm-lap",
        }
    }

    pub fn smoothing(self) -> Option<SmoothingMode> {
        match self {
            Method::Mshmm => Some(SmoothingMode::Marginal),
            Method::HmmLap => Some(SmoothingMode::Laplace),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sm" => Ok(Method::Sm),
            "mc" => Ok(Method::Mc),
            "mshmm" => Ok(Method::Mshmm),
            "hmm-lap" | "hmmlap" | "hmm_lap" => Ok(Method::HmmLap),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// A trained verifier of any kind. Higher scores mean "more likely genuine".
#[derive(Debug, Clone, PartialEq)]
pub enum Verifier {
    Sm(SmModel),
    Mc(MarkovChain),
    Hmm(Hmm),
}

impl Verifier {
    pub fn kind(&self) -> &'static str {
        match self {
            Verifier::Sm(_) => "sm",
            Verifier::Mc(_) => "mc",
            Verifier::Hmm(_) => "hmm",
        }
    }

    pub fn score(&self, window: &[SymbolId]) -> Result<f64> {
        match self {
            Verifier::Sm(m) => m.score(window),
            Verifier::Mc(m) => m.score(window),
            Verifier::Hmm(m) => m.score(window),
        }
    }
}
