//! Command-line front end.
//!
//! Settings come from built-in defaults, then an optional TOML file given
//! with `--config`, then flags. `TRACE_AUTH_OUT` only supplies a default
//! output directory. Logs go to stderr; data goes to files or stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterModel, ClusterParams};
use crate::error::{Error, Result};
use crate::evaluation::{make_windows, run_benchmark, BenchmarkConfig, SplitSpec};
use crate::geo::{resample, ResampleConfig, Trace};
use crate::io::manifest::{CorpusManifest, ManifestEntry, TraceFormat, MANIFEST_FILE};
use crate::io::{load_corpus, load_model, save_clusters, save_model, write_trace_csv};
use crate::pipeline::{PipelineConfig, UserModel};
use crate::synth::{synth_generate, Sparsity, SynthConfig};
use crate::verifier::hmm::{
    DEFAULT_HIDDEN_STATES, DEFAULT_HMM_DELTA, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::verifier::mc::DEFAULT_MC_DELTA;
use crate::verifier::{HmmConfig, Method, SmoothingMode};

pub const OUT_ENV: &str = "TRACE_AUTH_OUT";
const DEFAULT_OUT: &str = "out";
const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Parser)]
#[command(
    name = "trace-auth",
    version,
    about = "User verification from geo-location trace histories"
)]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus (traces.csv + manifest.json).
    Synth(SynthArgs),
    /// Build per-user cluster models from the training split.
    Cluster(RunArgs),
    /// Train one verifier model per user and method.
    Train(RunArgs),
    /// Score windows of a trace against a saved model.
    Score(ScoreArgs),
    /// Run the genuine/impostor benchmark and write EER/ROC tables.
    Eval(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5)]
    pub users: usize,
    #[arg(long, default_value_t = 6)]
    pub weeks: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Record every tick instead of short bursts.
    #[arg(long)]
    pub dense: bool,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML file with any of the run settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory, manifest, trace CSV or PLT file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "method", value_delimiter = ',')]
    pub methods: Vec<Method>,
    #[arg(long = "n", value_delimiter = ',')]
    pub n_values: Vec<usize>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub min_pts: Option<usize>,
    #[arg(long)]
    pub resample_interval: Option<i64>,
    #[arg(long)]
    pub max_gap: Option<i64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub mc_delta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `chrono:<fraction>`, `weekly:<train_weeks>:<eval_week>` or `all`.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus holding the trace to score.
    #[arg(long)]
    pub trace: PathBuf,
    /// User to score; defaults to the model's user, or the only trace.
    #[arg(long)]
    pub user: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Score only the test part of this split (default: whole trace).
    #[arg(long, default_value = "all")]
    pub split: String,
    #[arg(long, default_value_t = crate::geo::DEFAULT_RESAMPLE_INTERVAL_S)]
    pub resample_interval: i64,
    #[arg(long, default_value_t = crate::geo::DEFAULT_MAX_GAP_S)]
    pub max_gap: i64,
}

/// Fully resolved settings of a cluster/train/eval run, echoed to
/// `run_config.json`. The same keys are accepted in `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub methods: Vec<Method>,
    pub n_values: Vec<usize>,
    pub r_max: f64,
    pub min_pts: usize,
    pub unknown_radius: f64,
    pub transit_speed: f64,
    pub resample_interval: i64,
    pub max_gap: i64,
    pub hidden: usize,
    pub delta: f64,
    pub mc_delta: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub split: String,
    pub stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let cluster = ClusterParams::default();
        let resample = ResampleConfig::default();
        Self {
            command: String::new(),
            corpus: None,
            out: None,
            methods: Method::ALL.to_vec(),
            n_values: vec![1, 2, 4, 8, 16],
            r_max: cluster.r_max,
            min_pts: cluster.min_pts,
            unknown_radius: cluster.unknown_radius,
            transit_speed: cluster.transit_speed,
            resample_interval: resample.interval_s,
            max_gap: resample.max_gap_s,
            hidden: DEFAULT_HIDDEN_STATES,
            delta: DEFAULT_HMM_DELTA,
            mc_delta: DEFAULT_MC_DELTA,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            seed: 0,
            split: "chrono:0.7".into(),
            stride: 1,
        }
    }
}

impl RunConfig {
    /// Defaults, then the `--config` file, then flags.
    pub fn resolve(command: &str, args: &RunArgs) -> Result<Self> {
        let mut c = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        c.command = command.to_string();
        macro_rules! flag {
            ($($field:ident),*) => {
                $(if let Some(v) = &args.$field {
                    c.$field = v.clone().into();
                })*
            };
        }
        flag!(corpus, out);
        flag!(
            r_max,
            min_pts,
            resample_interval,
            max_gap,
            hidden,
            delta,
            mc_delta,
            max_iters,
            tol,
            seed,
            split,
            stride
        );
        if !args.methods.is_empty() {
            c.methods = args.methods.clone();
        }
        if !args.n_values.is_empty() {
            c.n_values = args.n_values.clone();
        }
        if c.out.is_none() {
            c.out = Some(
                std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from),
            );
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        parse_split(&self.split)?;
        if self.methods.is_empty() || self.n_values.is_empty() || self.n_values.contains(&0) {
            return Err(Error::Config(
                "need at least one method and window lengths >= 1".into(),
            ));
        }
        if !(self.r_max > 0.0)
            || self.hidden == 0
            || self.stride == 0
            || self.resample_interval <= 0
        {
            return Err(Error::Config(
                "r_max, hidden, stride and resample interval must be positive".into(),
            ));
        }
        if !(self.delta >= 0.0) || !(self.mc_delta > 0.0) {
            return Err(Error::Config("delta must be >= 0 and mc_delta > 0".into()));
        }
        Ok(())
    }

    pub fn corpus(&self) -> Result<&Path> {
        self.corpus.as_deref().ok_or_else(|| {
            Error::Config("no corpus given (--corpus or 'corpus' in the config file)".into())
        })
    }

    pub fn out(&self) -> &Path {
        self.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            resample: ResampleConfig {
                interval_s: self.resample_interval,
                max_gap_s: self.max_gap,
            },
            cluster: ClusterParams {
                r_max: self.r_max,
                min_pts: self.min_pts,
                unknown_radius: self.unknown_radius,
                transit_speed: self.transit_speed,
            },
            hmm: HmmConfig {
                hidden_states: self.hidden,
                mode: SmoothingMode::Marginal,
                delta: self.delta,
                max_iters: self.max_iters,
                tol: self.tol,
                seed: self.seed,
            },
            mc_delta: self.mc_delta,
        }
    }

    pub fn benchmark(&self) -> Result<BenchmarkConfig> {
        let split = parse_split(&self.split)?.unwrap_or(SplitSpec::Chronological { fraction: 1.0 });
        Ok(BenchmarkConfig {
            methods: self.methods.clone(),
            n_values: self.n_values.clone(),
            stride: self.stride,
            split,
            pipeline: self.pipeline(),
        })
    }
}

/// `None` means "use everything" (no split).
pub fn parse_split(s: &str) -> Result<Option<SplitSpec>> {
    let bad = || {
        Error::Config(format!(
            "bad split '{s}': expected chrono:<fraction>, weekly:<train>:<eval> or all"
        ))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["all"] => Ok(None),
        ["chrono"] => Ok(Some(SplitSpec::default())),
        ["chrono", f] => {
            let fraction: f64 = f.parse().map_err(|_| bad())?;
            if !(0.0..=1.0).contains(&fraction) {
                return Err(bad());
            }
            Ok(Some(SplitSpec::Chronological { fraction }))
        }
        ["weekly", k, e] => {
            let train_weeks: usize = k.parse().map_err(|_| bad())?;
            let eval_week: usize = e.parse().map_err(|_| bad())?;
            if train_weeks == 0 || train_weeks >= eval_week {
                return Err(bad());
            }
            Ok(Some(SplitSpec::Weekly {
                train_weeks,
                eval_week,
            }))
        }
        _ => Err(bad()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Resampled training (and test) parts of every trace under the split.
/// Users the split cannot serve are skipped with a warning.
fn split_corpus(corpus: &[Trace], config: &RunConfig) -> Result<Vec<(Trace, Trace)>> {
    let split = parse_split(&config.split)?;
    let resample_cfg = config.pipeline().resample;
    let mut out = Vec::new();
    for trace in corpus {
        let r = resample(trace, &resample_cfg)?;
        let parts = match split {
            None => Ok((r.clone(), Trace::default())),
            Some(spec) => spec.apply(&r),
        };
        match parts {
            Ok((train, test)) if !train.is_empty() => out.push((train, test)),
            Ok(_) => log::warn!("skipping {}: empty training split", trace.user_id),
            Err(Error::InsufficientData(why)) => log::warn!("skipping {}: {why}", trace.user_id),
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no user has data for split '{}'",
            config.split
        )));
    }
    Ok(out)
}

fn file_stem(user: &str) -> String {
    user.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut config = SynthConfig::scenario(args.users, args.weeks, args.seed);
    if args.dense {
        config.sparsity = Sparsity::Dense;
    }
    if let Some(sigma) = args.noise_sigma {
        config.noise_sigma_m = sigma;
    }
    let traces = synth_generate(&config)?;
    create_dir(&out)?;
    let csv_path = out.join("traces.csv");
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_trace_csv(&traces, std::io::BufWriter::new(file))?;
    let manifest = CorpusManifest {
        users: traces
            .iter()
            .map(|t| ManifestEntry {
                user_id: t.user_id.clone(),
                files: vec![PathBuf::from("traces.csv")],
                format: TraceFormat::Csv,
            })
            .collect(),
        notes: vec![format!(
            "synthetic corpus: {} users, {} weeks, seed {}; generator settings in synth_config.json",
            args.users, args.weeks, args.seed
        )],
    };
    manifest.save(&out.join(MANIFEST_FILE))?;
    write_json(&out.join("synth_config.json"), &config)?;
    log::info!("wrote {} traces to {}", traces.len(), out.display());
    Ok(())
}

fn cmd_cluster(config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(config.corpus()?)?;
    let out = config.out();
    create_dir(out)?;
    let params = config.pipeline().cluster;
    for (train, _) in split_corpus(&corpus, config)? {
        let model = ClusterModel::build(train.user_id.clone(), &train.points, &params)?;
        let path = out.join(format!("{}.clusters", file_stem(&train.user_id)));
        save_clusters(&model, &path)?;
        log::info!(
            "{}: {} clusters -> {}",
            train.user_id,
            model.n_clusters(),
            path.display()
        );
    }
    write_json(&out.join(RUN_CONFIG_FILE), config)
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(config.corpus()?)?;
    let out = config.out();
    create_dir(out)?;
    let pipeline = config.pipeline();
    for (train, _) in split_corpus(&corpus, config)? {
        for &method in &config.methods {
            let model = UserModel::train(&train, method, &pipeline)?;
            let path = out.join(format!("{}.{}.model", file_stem(&train.user_id), method));
            save_model(&model, &path)?;
            log::info!("{}: {method} -> {}", train.user_id, path.display());
        }
    }
    write_json(&out.join(RUN_CONFIG_FILE), config)
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let corpus = load_corpus(&args.trace)?;
    let trace = match &args.user {
        Some(u) => corpus.iter().find(|t| &t.user_id == u),
        None if corpus.len() == 1 => corpus.first(),
        None => corpus.iter().find(|t| t.user_id == model.clusters.user_id),
    }
    .ok_or_else(|| Error::Config("cannot tell which trace to score; pass --user".into()))?;
    let resampled = resample(
        trace,
        &ResampleConfig {
            interval_s: args.resample_interval,
            max_gap_s: args.max_gap,
        },
    )?;
    let test = match parse_split(&args.split)? {
        None => resampled,
        Some(spec) => spec.apply(&resampled)?.1,
    };
    let symbols = model.encode(&test).symbols();
    let windows = make_windows(&symbols, args.n, args.stride)?;
    if windows.is_empty() {
        log::warn!(
            "{}: {} symbols available, fewer than n = {}; nothing to score",
            trace.user_id,
            symbols.len(),
            args.n
        );
        return Ok(());
    }
    let stdout = std::io::stdout();
    let mut w = std::io::BufWriter::new(stdout.lock());
    let written = windows
        .iter()
        .enumerate()
        .try_for_each(|(k, window)| -> Result<()> {
            writeln!(w, "{},{}", k * args.stride, model.score(window)?)
                .map_err(|e| Error::io("stdout", e))
        })
        .and_then(|()| w.flush().map_err(|e| Error::io("stdout", e)));
    match written {
        // A closed pipe (`| head`) is not a failure.
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn cmd_eval(config: &RunConfig) -> Result<()> {
    let corpus = load_corpus(config.corpus()?)?;
    let bench = config.benchmark()?;
    let report = run_benchmark(&corpus, &bench)?;
    let out = config.out();
    create_dir(out)?;
    let create = |name: &str| {
        let path = out.join(name);
        fs::File::create(&path)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::io(&path, e))
    };
    report.write_eer_csv(create("eer.csv")?)?;
    report.write_roc_csv(create("roc.csv")?)?;
    let summary = report.summary();
    fs::write(out.join("summary.txt"), &summary)
        .map_err(|e| Error::io(out.join("summary.txt"), e))?;
    write_json(&out.join(RUN_CONFIG_FILE), config)?;
    eprint!("{summary}");
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Cluster(a) => cmd_cluster(&RunConfig::resolve("cluster", a)?),
        Command::Train(a) => cmd_train(&RunConfig::resolve("train", a)?),
        Command::Score(a) => cmd_score(a),
        Command::Eval(a) => cmd_eval(&RunConfig::resolve("eval", a)?),
    }
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
