//! Genuine/impostor evaluation protocol.
//!
//! Every enrolled user gets a cluster model and verifiers trained on their
//! own training split. Their test split supplies genuine windows; the test
//! splits of all other users, re-encoded with the enrolled user's clusters,
//! supply impostor windows. Each (user, method, n) cell yields one EER and a
//! ROC curve; pooled figures are means over users.

use std::fmt::Write as _;
use std::io::Write;

use chrono::{Duration, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::geo::{resample, Timestamped, Trace};
use crate::observation::{build_sequence, ObservationSequence, SymbolId};
use crate::pipeline::{train_verifier, PipelineConfig};
use crate::verifier::Method;

/// Overlapping windows of exactly `n` symbols, `stride` apart. A trailing
/// remainder shorter than `n` is dropped.
pub fn make_windows(symbols: &[SymbolId], n: usize, stride: usize) -> Result<Vec<&[SymbolId]>> {
    if n == 0 || stride == 0 {
        return Err(Error::InvalidParameter(
            "window length and stride must be positive".into(),
        ));
    }
    if n > symbols.len() {
        return Ok(Vec::new());
    }
    Ok((0..=symbols.len() - n)
        .step_by(stride)
        .map(|s| &symbols[s..s + n])
        .collect())
}

/// Splits at `floor(fraction * len)` keeping order.
pub fn chronological_split<T: Clone>(items: &[T], fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    let at = split_index(items.len(), fraction)?;
    Ok((items[..at].to_vec(), items[at..].to_vec()))
}

fn split_index(len: usize, fraction: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "split fraction {fraction} outside [0, 1]"
        )));
    }
    Ok(((fraction * len as f64).floor() as usize).min(len))
}

pub fn chronological_split_trace(trace: &Trace, fraction: f64) -> Result<(Trace, Trace)> {
    let at = split_index(trace.len(), fraction)?;
    Ok((trace.slice(0..at), trace.slice(at..trace.len())))
}

/// 1-based calendar week counted in whole 7-day blocks from `first`.
pub fn week_of(first: NaiveDateTime, ts: NaiveDateTime) -> usize {
    ((ts - first).num_seconds().max(0) / Duration::days(7).num_seconds()) as usize + 1
}

fn weekly_bounds<T: Timestamped>(
    items: &[T],
    train_weeks: usize,
    eval_week: usize,
) -> Result<(usize, usize, usize)> {
    if train_weeks == 0 || train_weeks >= eval_week {
        return Err(Error::InvalidParameter(format!(
            "weekly split needs 1 <= train_weeks < eval_week, got {train_weeks} and {eval_week}"
        )));
    }
    let first = items
        .first()
        .ok_or_else(|| Error::InsufficientData("no observations".into()))?
        .timestamp();
    let last_week = week_of(first, items[items.len() - 1].timestamp());
    if last_week < eval_week {
        return Err(Error::InsufficientData(format!(
            "data spans {last_week} week(s), evaluation week is {eval_week}"
        )));
    }
    let first_train_week = eval_week - train_weeks;
    let start = items.partition_point(|x| week_of(first, x.timestamp()) < first_train_week);
    let mid = items.partition_point(|x| week_of(first, x.timestamp()) < eval_week);
    let end = items.partition_point(|x| week_of(first, x.timestamp()) <= eval_week);
    Ok((start, mid, end))
}

/// Train on weeks `[eval_week - train_weeks, eval_week)`, test on `eval_week`.
///
/// Items must be sorted by timestamp. Users whose data ends before the
/// evaluation week get [`Error::InsufficientData`].
pub fn weekly_split<T: Timestamped + Clone>(
    items: &[T],
    train_weeks: usize,
    eval_week: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    let (start, mid, end) = weekly_bounds(items, train_weeks, eval_week)?;
    Ok((items[start..mid].to_vec(), items[mid..end].to_vec()))
}

pub fn weekly_split_trace(
    trace: &Trace,
    train_weeks: usize,
    eval_week: usize,
) -> Result<(Trace, Trace)> {
    let (start, mid, end) = weekly_bounds(&trace.points, train_weeks, eval_week)?;
    Ok((trace.slice(start..mid), trace.slice(mid..end)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitSpec {
    Chronological {
        fraction: f64,
    },
    Weekly {
        train_weeks: usize,
        eval_week: usize,
    },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Chronological { fraction: 0.7 }
    }
}

impl SplitSpec {
    pub fn apply(&self, trace: &Trace) -> Result<(Trace, Trace)> {
        match *self {
            SplitSpec::Chronological { fraction } => chronological_split_trace(trace, fraction),
            SplitSpec::Weekly {
                train_weeks,
                eval_week,
            } => weekly_split_trace(trace, train_weeks, eval_week),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
    pub roc: Vec<RocPoint>,
}

/// Genuine and impostor scores of one (user, method, n) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub method: Method,
    pub n: usize,
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl ScoreSet {
    pub fn eer(&self) -> Result<EerResult> {
        compute_eer(&self.genuine, &self.impostor)
    }
}

/// Equal error rate with higher scores meaning "genuine".
///
/// Thresholds sweep the merged score support plus `+inf`. At threshold `t`,
/// FAR is the fraction of impostor scores `>= t` and FRR the fraction of
/// genuine scores `< t`. The EER is read where FAR - FRR changes sign,
/// interpolating linearly between the two neighbouring ROC points.
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<EerResult> {
    if genuine.is_empty() {
        return Err(Error::InsufficientScores("no genuine scores"));
    }
    if impostor.is_empty() {
        return Err(Error::InsufficientScores("no impostor scores"));
    }
    if genuine.iter().chain(impostor).any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("NaN score".into()));
    }
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    if thresholds.last() != Some(&f64::INFINITY) {
        thresholds.push(f64::INFINITY);
    }

    let ng = g.len() as f64;
    let ni = i.len() as f64;
    let roc: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| RocPoint {
            threshold: t,
            far: (i.len() - i.partition_point(|&s| s < t)) as f64 / ni,
            frr: g.partition_point(|&s| s < t) as f64 / ng,
        })
        .collect();

    let diff = |p: &RocPoint| p.far - p.frr;
    let (eer, threshold) = match roc.iter().position(|p| diff(p) <= 0.0) {
        Some(0) => (0.5 * (roc[0].far + roc[0].frr), roc[0].threshold),
        Some(k) if diff(&roc[k]) == 0.0 => (0.5 * (roc[k].far + roc[k].frr), roc[k].threshold),
        Some(k) => {
            let (p, q) = (&roc[k - 1], &roc[k]);
            let s = diff(p) / (diff(p) - diff(q));
            let far = p.far + s * (q.far - p.far);
            let frr = p.frr + s * (q.frr - p.frr);
            let threshold = if q.threshold.is_finite() && p.threshold.is_finite() {
                p.threshold + s * (q.threshold - p.threshold)
            } else {
                p.threshold
            };
            (0.5 * (far + frr), threshold)
        }
        None => {
            let last = roc[roc.len() - 1];
            (0.5 * (last.far + last.frr), last.threshold)
        }
    };
    Ok(EerResult {
        eer,
        threshold,
        roc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub n_values: Vec<usize>,
    pub stride: usize,
    pub split: SplitSpec,
    pub pipeline: PipelineConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            n_values: vec![1, 2, 4, 8, 16],
            stride: 1,
            split: SplitSpec::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

/// One EER table row.
#[derive(Debug, Clone, PartialEq)]
pub struct EerRow {
    pub user: String,
    pub method: Method,
    pub n: usize,
    pub r_max: f64,
    pub hidden: Option<usize>,
    pub eer: f64,
    pub threshold: f64,
    pub genuine_count: usize,
    pub impostor_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub user: String,
    pub method: Method,
    pub n: usize,
    pub points: Vec<RocPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledEer {
    pub method: Method,
    pub n: usize,
    pub mean_eer: f64,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: BenchmarkConfig,
    pub rows: Vec<EerRow>,
    pub roc: Vec<RocCurve>,
    pub pooled: Vec<PooledEer>,
    /// Users left out of the protocol, with the reason.
    pub excluded: Vec<(String, String)>,
}

impl EvalReport {
    pub fn pooled_eer(&self, method: Method, n: usize) -> Option<f64> {
        self.pooled
            .iter()
            .find(|p| p.method == method && p.n == n)
            .map(|p| p.mean_eer)
    }

    /// `user,method,n,r_max,hidden,mode,eer`
    pub fn write_eer_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "method", "n", "r_max", "hidden", "mode", "eer"])?;
        for r in &self.rows {
            w.write_record([
                r.user.clone(),
                r.method.to_string(),
                r.n.to_string(),
                r.r_max.to_string(),
                r.hidden.map_or_else(|| "-".to_string(), |h| h.to_string()),
                r.method
                    .smoothing()
                    .map_or_else(|| "-".to_string(), |m| m.to_string()),
                format!("{:.6}", r.eer),
            ])?;
        }
        w.flush().map_err(|e| Error::io("eer csv", e))?;
        Ok(())
    }

    /// `user,method,n,threshold,far,frr`
    pub fn write_roc_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "method", "n", "threshold", "far", "frr"])?;
        for c in &self.roc {
            for p in &c.points {
                w.write_record([
                    c.user.clone(),
                    c.method.to_string(),
                    c.n.to_string(),
                    format!("{:e}", p.threshold),
                    format!("{:.6}", p.far),
                    format!("{:.6}", p.frr),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("roc csv", e))?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pooled EER (mean over users)");
        let mut ns: Vec<usize> = self.pooled.iter().map(|p| p.n).collect();
        ns.sort_unstable();
        ns.dedup();
        let _ = write!(s, "{:<10}", "method");
        for n in &ns {
            let _ = write!(s, "{:>10}", format!("n={n}"));
        }
        let _ = writeln!(s);
        for m in &self.config.methods {
            let _ = write!(s, "{:<10}", m.name());
            for &n in &ns {
                match self.pooled_eer(*m, n) {
                    Some(e) => {
                        let _ = write!(s, "{:>9.2}%", 100.0 * e);
                    }
                    None => {
                        let _ = write!(s, "{:>10}", "-");
                    }
                }
            }
            let _ = writeln!(s);
        }
        for (user, why) in &self.excluded {
            let _ = writeln!(s, "excluded {user}: {why}");
        }
        s
    }
}

struct PreparedUser {
    id: String,
    train: Trace,
    test: Trace,
}

struct UserCells {
    rows: Vec<EerRow>,
    roc: Vec<RocCurve>,
    excluded: Option<(String, String)>,
}

/// Runs the full protocol over a corpus of raw traces (one per user).
pub fn run_benchmark(corpus: &[Trace], config: &BenchmarkConfig) -> Result<EvalReport> {
    if corpus.len() < 2 {
        return Err(Error::NotEnoughUsers);
    }
    if config.n_values.contains(&0) || config.stride == 0 {
        return Err(Error::InvalidParameter(
            "window length and stride must be positive".into(),
        ));
    }

    let mut excluded = Vec::new();
    let mut users = Vec::new();
    for trace in corpus {
        let resampled = resample(trace, &config.pipeline.resample)?;
        match config.split.apply(&resampled) {
            Ok((train, test)) if !train.is_empty() && !test.is_empty() => {
                users.push(PreparedUser {
                    id: trace.user_id.clone(),
                    train,
                    test,
                })
            }
            Ok(_) => {
                log::warn!("excluding {}: empty training or test split", trace.user_id);
                excluded.push((trace.user_id.clone(), "empty training or test split".into()));
            }
            Err(Error::InsufficientData(why)) => {
                log::warn!("excluding {}: {why}", trace.user_id);
                excluded.push((trace.user_id.clone(), why));
            }
            Err(e) => return Err(e),
        }
    }
    if users.len() < 2 {
        return Err(Error::NotEnoughUsers);
    }

    let cells: Vec<UserCells> = (0..users.len())
        .into_par_iter()
        .map(|u| evaluate_user(&users, u, config))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut roc = Vec::new();
    for c in cells {
        rows.extend(c.rows);
        roc.extend(c.roc);
        excluded.extend(c.excluded);
    }

    let mut pooled = Vec::new();
    for &method in &config.methods {
        for &n in &config.n_values {
            let eers: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.n == n)
                .map(|r| r.eer)
                .collect();
            if !eers.is_empty() {
                pooled.push(PooledEer {
                    method,
                    n,
                    mean_eer: eers.iter().sum::<f64>() / eers.len() as f64,
                    users: eers.len(),
                });
            }
        }
    }

    Ok(EvalReport {
        config: config.clone(),
        rows,
        roc,
        pooled,
        excluded,
    })
}

fn evaluate_user(users: &[PreparedUser], u: usize, config: &BenchmarkConfig) -> Result<UserCells> {
    let user = &users[u];
    let pipeline = &config.pipeline;
    let clusters = match ClusterModel::build(user.id.clone(), &user.train.points, &pipeline.cluster)
    {
        Ok(c) => c,
        Err(Error::NoTrainingPoints) => {
            return Ok(UserCells {
                rows: Vec::new(),
                roc: Vec::new(),
                excluded: Some((user.id.clone(), "no training points".into())),
            })
        }
        Err(e) => return Err(e),
    };
    let train_seq = build_sequence(&user.train, &clusters);
    let genuine_seq = build_sequence(&user.test, &clusters);
    let impostor_seqs: Vec<ObservationSequence> = users
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != u)
        .map(|(_, other)| build_sequence(&other.test, &clusters))
        .collect();

    let per_user = PipelineConfig {
        hmm: crate::verifier::HmmConfig {
            seed: pipeline.hmm.seed.wrapping_add(u as u64),
            ..pipeline.hmm
        },
        ..*pipeline
    };

    let mut rows = Vec::new();
    let mut roc = Vec::new();
    for &method in &config.methods {
        let verifier = match train_verifier(&train_seq, method, &per_user) {
            Ok(v) => v,
            Err(Error::SequenceTooShort { .. }) => {
                log::warn!("{}: training sequence too short for {method}", user.id);
                continue;
            }
            Err(e) => return Err(e),
        };
        for &n in &config.n_values {
            let genuine = score_sequence(&verifier, &genuine_seq, n, config.stride)?;
            let mut impostor = Vec::new();
            for seq in &impostor_seqs {
                impostor.extend(score_sequence(&verifier, seq, n, config.stride)?);
            }
            if genuine.is_empty() || impostor.is_empty() {
                log::warn!(
                    "{}: skipping {method} n={n} ({} genuine, {} impostor windows)",
                    user.id,
                    genuine.len(),
                    impostor.len()
                );
                continue;
            }
            let result = compute_eer(&genuine, &impostor)?;
            rows.push(EerRow {
                user: user.id.clone(),
                method,
                n,
                r_max: pipeline.cluster.r_max,
                hidden: method.smoothing().map(|_| pipeline.hmm.hidden_states),
                eer: result.eer,
                threshold: result.threshold,
                genuine_count: genuine.len(),
                impostor_count: impostor.len(),
            });
            roc.push(RocCurve {
                user: user.id.clone(),
                method,
                n,
                points: result.roc,
            });
        }
    }
    Ok(UserCells {
        rows,
        roc,
        excluded: None,
    })
}

pub fn score_sequence(
    verifier: &crate::verifier::Verifier,
    seq: &ObservationSequence,
    n: usize,
    stride: usize,
) -> Result<Vec<f64>> {
    let symbols = seq.symbols();
    make_windows(&symbols, n, stride)?
        .into_iter()
        .map(|w| verifier.score(w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    #[test]
    fn window_counts() {
        let s = [0, 1, 2, 3, 4];
        assert_eq!(make_windows(&s, 2, 1).unwrap().len(), 4);
        assert_eq!(make_windows(&s, 5, 1).unwrap().len(), 1);
        assert_eq!(make_windows(&s[..4], 5, 1).unwrap().len(), 0);
        assert_eq!(
            make_windows(&s, 2, 2).unwrap(),
            vec![&[0, 1][..], &[2, 3][..]]
        );
        assert!(make_windows(&s, 0, 1).is_err());
    }

    #[test]
    fn chronological_fractions() {
        let items: Vec<u32> = (0..10).collect();
        let (a, b) = chronological_split(&items, 0.7).unwrap();
        assert_eq!((a.len(), b.len()), (7, 3));
        assert_eq!(a, (0..7).collect::<Vec<_>>());
        let (a, b) = chronological_split(&items, 1.0).unwrap();
        assert_eq!((a.len(), b.len()), (10, 0));
        let (a, b) = chronological_split(&items, 0.0).unwrap();
        assert_eq!((a.len(), b.len()), (0, 10));
        assert!(chronological_split(&items, 1.5).is_err());
    }

    fn daily_points(days: i64) -> Vec<GeoPoint> {
        let start = NaiveDate::from_ymd_opt(2009, 1, 5)
            .unwrap()
            .and_hms_opt(12, 0, 0)
            .unwrap();
        (0..days)
            .map(|d| GeoPoint::new(39.9, 116.3, start + Duration::days(d)).unwrap())
            .collect()
    }

    #[test]
    fn weekly_partition() {
        let pts = daily_points(42);
        let first = pts[0].timestamp;
        let (train, test) = weekly_split(&pts, 4, 6).unwrap();
        assert!(train
            .iter()
            .all(|p| (2..=5).contains(&week_of(first, p.timestamp))));
        assert_eq!(train.len(), 28);
        assert!(test.iter().all(|p| week_of(first, p.timestamp) == 6));
        assert_eq!(test.len(), 7);

        let (train, _) = weekly_split(&pts, 1, 6).unwrap();
        assert!(train.iter().all(|p| week_of(first, p.timestamp) == 5));
        assert_eq!(train.len(), 7);
    }

    #[test]
    fn weekly_split_rejects_short_histories() {
        let pts = daily_points(30);
        assert!(matches!(
            weekly_split(&pts, 4, 6),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            weekly_split(&pts, 6, 6),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn eer_examples() {
        assert_eq!(compute_eer(&[1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap().eer, 0.0);
        assert_eq!(
            compute_eer(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap().eer,
            0.5
        );
        let r = compute_eer(&[0.9, 0.8, 0.4], &[0.6, 0.3, 0.2]).unwrap();
        assert_eq!(r.eer, 1.0 / 3.0);
        assert_eq!(r.threshold, 0.6);
    }

    #[test]
    fn eer_needs_both_sides() {
        assert!(matches!(
            compute_eer(&[], &[1.0]),
            Err(Error::InsufficientScores(_))
        ));
        assert!(matches!(
            compute_eer(&[1.0], &[]),
            Err(Error::InsufficientScores(_))
        ));
    }

    #[test]
    fn eer_handles_negative_infinity() {
        let r = compute_eer(&[-1.0, -2.0], &[f64::NEG_INFINITY, -5.0]).unwrap();
        assert_eq!(r.eer, 0.0);
    }

    #[test]
    fn window_length_normalization_does_not_change_eer() {
        let genuine = [-12.0, -20.5, -9.25, -30.0, -15.0];
        let impostor = [-40.0, -18.0, -55.5, -33.0];
        let n = 16.0;
        let a = compute_eer(&genuine, &impostor).unwrap().eer;
        let g: Vec<f64> = genuine.iter().map(|s| s / n).collect();
        let i: Vec<f64> = impostor.iter().map(|s| s / n).collect();
        assert_eq!(a, compute_eer(&g, &i).unwrap().eer);
    }

    #[test]
    fn benchmark_needs_two_users() {
        let t = Trace::new("solo", daily_points(10));
        assert!(matches!(
            run_benchmark(&[t], &BenchmarkConfig::default()),
            Err(Error::NotEnoughUsers)
        ));
    }

    fn distinct_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        proptest::collection::btree_set(-5000i32..5000, 2..80)
            .prop_flat_map(|set| {
                let len = set.len();
                (Just(set), proptest::collection::vec(any::<bool>(), len))
            })
            .prop_filter_map("both sides non-empty", |(set, mask)| {
                let (mut g, mut i) = (Vec::new(), Vec::new());
                for (x, genuine) in set.into_iter().zip(mask) {
                    let v = x as f64 / 1000.0;
                    if genuine {
                        g.push(v)
                    } else {
                        i.push(v)
                    }
                }
                (!g.is_empty() && !i.is_empty()).then_some((g, i))
            })
    }

    proptest! {
        #[test]
        fn eer_in_unit_half_range_and_roc_monotone(
            g in proptest::collection::vec(-10.0f64..10.0, 1..50),
            i in proptest::collection::vec(-10.0f64..10.0, 1..50),
        ) {
            let r = compute_eer(&g, &i).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.eer));
            for w in r.roc.windows(2) {
                prop_assert!(w[1].far <= w[0].far);
                prop_assert!(w[1].frr >= w[0].frr);
            }
        }

        #[test]
        fn eer_invariant_under_monotone_transforms((g, i) in distinct_scores()) {
            let base = compute_eer(&g, &i).unwrap().eer;
            let exp = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
            let affine = |v: &[f64]| v.iter().map(|x| 2.0 * x - 7.0).collect::<Vec<_>>();
            prop_assert!((compute_eer(&exp(&g), &exp(&i)).unwrap().eer - base).abs() <= 1e-12);
            prop_assert!((compute_eer(&affine(&g), &affine(&i)).unwrap().eer - base).abs() <= 1e-12);
        }

        #[test]
        fn eer_symmetric_under_swap_and_negation((g, i) in distinct_scores()) {
            let base = compute_eer(&g, &i).unwrap().eer;
            let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let swapped = compute_eer(&neg(&i), &neg(&g)).unwrap().eer;
            prop_assert!((swapped - base).abs() <= 1e-12);
        }
    }
}
