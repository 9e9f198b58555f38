//! Versioned text format for cluster models and trained verifiers.
//!
//! ```text
//! trace-auth-model v1 hmm
//! user 010
//! clusters 2 r_max <m> unknown_radius <m> transit_speed <m/s>
//! cluster 1 <lat> <lon> <radius>
//! cluster 2 <lat> <lon> <radius>
//! vocabulary 37
//! hidden 10
//! mode marginal
//! delta <delta>
//! pi <H values>
//! a <H values>          (H lines)
//! b <V values>          (H lines)
//! end
//! ```
//!
//! Markov chain files carry `delta`, `prior` and `transition` rows instead;
//! sequence-matching files carry `training <count>` and a `symbols` line.
//! Floats are written with 17 significant digits so they read back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::clustering::{ClusterModel, LocationCluster};
use crate::error::{Error, Result};
use crate::observation::Vocabulary;
use crate::pipeline::UserModel;
use crate::verifier::{Hmm, MarkovChain, SmModel, SmoothingMode, Verifier};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "trace-auth-model";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Clusters,
    Sm,
    Mc,
    Hmm,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Clusters => "clusters",
            ModelKind::Sm => "sm",
            ModelKind::Mc => "mc",
            ModelKind::Hmm => "hmm",
        }
    }

    pub fn of(verifier: &Verifier) -> Self {
        match verifier {
            Verifier::Sm(_) => ModelKind::Sm,
            Verifier::Mc(_) => ModelKind::Mc,
            Verifier::Hmm(_) => ModelKind::Hmm,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clusters" => Ok(ModelKind::Clusters),
            "sm" => Ok(ModelKind::Sm),
            "mc" => Ok(ModelKind::Mc),
            "hmm" => Ok(ModelKind::Hmm),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for &v in values {
        out.push(' ');
        out.push_str(&float(v));
    }
    out.push('\n');
}

fn write_clusters(out: &mut String, m: &ClusterModel) {
    let _ = writeln!(out, "user {}", m.user_id);
    let _ = writeln!(
        out,
        "clusters {} r_max {} unknown_radius {} transit_speed {}",
        m.clusters.len(),
        float(m.r_max),
        float(m.unknown_radius),
        float(m.transit_speed)
    );
    for c in &m.clusters {
        let _ = writeln!(
            out,
            "cluster {} {} {} {}",
            c.id,
            float(c.lat),
            float(c.lon),
            float(c.radius)
        );
    }
}

/// Serializes a cluster model with an optional verifier trained on it.
pub fn to_text(clusters: &ClusterModel, verifier: Option<&Verifier>) -> String {
    let kind = verifier.map_or(ModelKind::Clusters, ModelKind::of);
    let mut out = format!("{MAGIC} v{FORMAT_VERSION} {}\n", kind.name());
    write_clusters(&mut out, clusters);
    match verifier {
        None => {}
        Some(Verifier::Sm(m)) => {
            let _ = writeln!(out, "training {}", m.training.len());
            out.push_str("symbols");
            for s in &m.training {
                let _ = write!(out, " {s}");
            }
            out.push('\n');
        }
        Some(Verifier::Mc(m)) => {
            let _ = writeln!(out, "vocabulary {}", m.vocab_size());
            let _ = writeln!(out, "delta {}", float(m.delta));
            row(&mut out, "prior", &m.prior);
            for r in &m.transitions {
                row(&mut out, "transition", r);
            }
        }
        Some(Verifier::Hmm(m)) => {
            let _ = writeln!(out, "vocabulary {}", m.vocab_size());
            let _ = writeln!(out, "hidden {}", m.hidden_states());
            let _ = writeln!(out, "mode {}", m.mode);
            let _ = writeln!(out, "delta {}", float(m.delta));
            row(&mut out, "pi", &m.pi);
            for r in &m.a {
                row(&mut out, "a", r);
            }
            for r in &m.b {
                row(&mut out, "b", r);
            }
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    source: &'a str,
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, source: &'a str) -> Self {
        Self {
            source,
            lines: text.lines().collect(),
            next: 0,
        }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::parse(self.source, line, message)
    }

    /// Next non-blank line, which must start with `key`; returns the
    /// remaining tokens and the 1-based line number.
    fn expect(&mut self, key: &str) -> Result<(Vec<&'a str>, usize)> {
        while self.next < self.lines.len() && self.lines[self.next].trim().is_empty() {
            self.next += 1;
        }
        if self.next >= self.lines.len() {
            return Err(self.err(
                self.lines.len() + 1,
                format!("unexpected end of file, expected '{key}'"),
            ));
        }
        let line_no = self.next + 1;
        let mut tokens = self.lines[self.next].split_whitespace();
        self.next += 1;
        match tokens.next() {
            Some(k) if k == key => Ok((tokens.collect(), line_no)),
            Some(k) => Err(self.err(line_no, format!("expected '{key}', found '{k}'"))),
            None => unreachable!("blank lines are skipped"),
        }
    }

    /// Rest of the line after `key`, untokenized.
    fn expect_rest(&mut self, key: &str) -> Result<String> {
        let (_, line_no) = self.expect(key)?;
        let raw = self.lines[line_no - 1].trim_start();
        Ok(raw[key.len()..].trim().to_string())
    }

    fn scalar<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let (tokens, line) = self.expect(key)?;
        if tokens.len() != 1 {
            return Err(self.err(line, format!("'{key}' takes one value")));
        }
        self.parse_token(tokens[0], line)
    }

    fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let (tokens, line) = self.expect(key)?;
        if tokens.len() != len {
            return Err(self.err(
                line,
                format!("'{key}' needs {len} values, found {}", tokens.len()),
            ));
        }
        tokens.iter().map(|t| self.parse_token(t, line)).collect()
    }

    fn parse_token<T: FromStr>(&self, token: &str, line: usize) -> Result<T> {
        token
            .parse()
            .map_err(|_| self.err(line, format!("bad value '{token}'")))
    }
}

fn read_clusters(lines: &mut Lines<'_>) -> Result<ClusterModel> {
    let user_id = lines.expect_rest("user")?;
    let (tokens, line) = lines.expect("clusters")?;
    if tokens.len() != 7
        || tokens[1] != "r_max"
        || tokens[3] != "unknown_radius"
        || tokens[5] != "transit_speed"
    {
        return Err(lines.err(line, "malformed 'clusters' line"));
    }
    let n: usize = lines.parse_token(tokens[0], line)?;
    let r_max = lines.parse_token(tokens[2], line)?;
    let unknown_radius = lines.parse_token(tokens[4], line)?;
    let transit_speed = lines.parse_token(tokens[6], line)?;
    let mut clusters = Vec::with_capacity(n);
    for _ in 0..n {
        let (t, line) = lines.expect("cluster")?;
        if t.len() != 4 {
            return Err(lines.err(line, "'cluster' needs id, lat, lon and radius"));
        }
        clusters.push(LocationCluster {
            id: lines.parse_token(t[0], line)?,
            lat: lines.parse_token(t[1], line)?,
            lon: lines.parse_token(t[2], line)?,
            radius: lines.parse_token(t[3], line)?,
        });
    }
    Ok(ClusterModel {
        user_id,
        clusters,
        r_max,
        unknown_radius,
        transit_speed,
    })
}

fn read_vocabulary(lines: &mut Lines<'_>, clusters: &ClusterModel) -> Result<usize> {
    let (tokens, line) = lines.expect("vocabulary")?;
    let v: usize = match tokens.as_slice() {
        [t] => lines.parse_token(t, line)?,
        _ => return Err(lines.err(line, "'vocabulary' takes one value")),
    };
    let want = Vocabulary::new(clusters.n_clusters()).size();
    if v != want {
        return Err(lines.err(
            line,
            format!(
                "vocabulary {v} does not match {} clusters (expected {want})",
                clusters.n_clusters()
            ),
        ));
    }
    Ok(v)
}

/// Parses model text. `source` names it in error messages.
pub fn from_text(text: &str, source: &str) -> Result<(ClusterModel, Option<Verifier>)> {
    let header = text.lines().next().unwrap_or("");
    let mut head = header.split_whitespace();
    if head.next() != Some(MAGIC) {
        return Err(Error::parse(
            source,
            1,
            format!("not a model file (expected '{MAGIC}' header)"),
        ));
    }
    let version = head.next().unwrap_or("");
    if version != format!("v{FORMAT_VERSION}") {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: version.to_string(),
        });
    }
    let kind: ModelKind = head
        .next()
        .ok_or_else(|| Error::parse(source, 1, "missing model kind"))?
        .parse()
        .map_err(|e: Error| Error::parse(source, 1, e.to_string()))?;

    let mut lines = Lines::new(text, source);
    lines.next = 1;
    let clusters = read_clusters(&mut lines)?;
    let verifier = match kind {
        ModelKind::Clusters => None,
        ModelKind::Sm => {
            let count: usize = lines.scalar("training")?;
            let (tokens, line) = lines.expect("symbols")?;
            if tokens.len() != count {
                return Err(lines.err(
                    line,
                    format!("expected {count} symbols, found {}", tokens.len()),
                ));
            }
            let training = tokens
                .iter()
                .map(|t| lines.parse_token(t, line))
                .collect::<Result<Vec<usize>>>()?;
            Some(Verifier::Sm(
                SmModel::new(training).map_err(|e| lines.err(line, e.to_string()))?,
            ))
        }
        ModelKind::Mc => {
            let v = read_vocabulary(&mut lines, &clusters)?;
            let delta = lines.scalar("delta")?;
            let prior = lines.floats("prior", v)?;
            let transitions = (0..v)
                .map(|_| lines.floats("transition", v))
                .collect::<Result<_>>()?;
            Some(Verifier::Mc(MarkovChain {
                prior,
                transitions,
                delta,
            }))
        }
        ModelKind::Hmm => {
            let v = read_vocabulary(&mut lines, &clusters)?;
            let h: usize = lines.scalar("hidden")?;
            let (tokens, line) = lines.expect("mode")?;
            let mode: SmoothingMode = match tokens.as_slice() {
                [m] => m
                    .parse()
                    .map_err(|e: Error| lines.err(line, e.to_string()))?,
                _ => return Err(lines.err(line, "'mode' takes one value")),
            };
            let delta = lines.scalar("delta")?;
            let pi = lines.floats("pi", h)?;
            let a = (0..h)
                .map(|_| lines.floats("a", h))
                .collect::<Result<_>>()?;
            let b = (0..h)
                .map(|_| lines.floats("b", v))
                .collect::<Result<_>>()?;
            Some(Verifier::Hmm(Hmm {
                pi,
                a,
                b,
                mode,
                delta,
            }))
        }
    };
    lines.expect("end")?;
    Ok((clusters, verifier))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_model(model: &UserModel, path: &Path) -> Result<()> {
    write_file(path, &to_text(&model.clusters, Some(&model.verifier)))
}

pub fn load_model(path: &Path) -> Result<UserModel> {
    let (clusters, verifier) = from_text(&read_file(path)?, &path.display().to_string())?;
    let verifier = verifier.ok_or_else(|| Error::KindMismatch {
        expected: "sm, mc or hmm".into(),
        found: ModelKind::Clusters.name().into(),
    })?;
    Ok(UserModel { clusters, verifier })
}

/// Loads a verifier model and checks its kind.
pub fn load_model_as(path: &Path, kind: ModelKind) -> Result<UserModel> {
    let model = load_model(path)?;
    let found = ModelKind::of(&model.verifier);
    if found != kind {
        return Err(Error::KindMismatch {
            expected: kind.name().into(),
            found: found.name().into(),
        });
    }
    Ok(model)
}

pub fn save_clusters(model: &ClusterModel, path: &Path) -> Result<()> {
    write_file(path, &to_text(model, None))
}

/// Loads the cluster model from any model file, including verifier files.
pub fn load_clusters(path: &Path) -> Result<ClusterModel> {
    Ok(from_text(&read_file(path)?, &path.display().to_string())?.0)
}
