//! Generic CSV traces and observation-sequence export.

use std::collections::HashMap;
use std::io::{Read, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, Trace};
use crate::observation::{Observation, ObservationSequence, Vocabulary};

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Column names for CSV traces. Without a user column every row belongs
/// to the default user given to the reader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub user: Option<String>,
    pub lat: String,
    pub lon: String,
    pub timestamp: String,
    pub session: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            user: Some("user".into()),
            lat: "lat".into(),
            lon: "lon".into(),
            timestamp: "timestamp".into(),
            session: Some("session".into()),
        }
    }
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

/// Reads traces, one per user in order of first appearance.
///
/// Rows of a user are stably sorted by timestamp (duplicates keep file
/// order). With a session column, runs of equal session ids become sessions.
/// The user and session columns are optional in the file even when named in
/// the map; lat, lon and timestamp are required.
pub fn read_trace_csv<R: Read>(
    reader: R,
    columns: &ColumnMap,
    default_user: &str,
    source: &str,
) -> Result<Vec<Trace>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        find(name).ok_or_else(|| Error::Config(format!("{source}: missing column '{name}'")))
    };
    let lat_col = required(&columns.lat)?;
    let lon_col = required(&columns.lon)?;
    let ts_col = required(&columns.timestamp)?;
    let user_col = columns.user.as_deref().and_then(find);
    let session_col = columns.session.as_deref().and_then(find);

    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(GeoPoint, Option<String>)>> = HashMap::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let lat: f64 = field(lat_col).parse().map_err(|_| {
            Error::parse(source, line, format!("bad latitude '{}'", field(lat_col)))
        })?;
        let lon: f64 = field(lon_col).parse().map_err(|_| {
            Error::parse(source, line, format!("bad longitude '{}'", field(lon_col)))
        })?;
        let ts = parse_timestamp(field(ts_col)).ok_or_else(|| {
            Error::parse(source, line, format!("bad timestamp '{}'", field(ts_col)))
        })?;
        let point =
            GeoPoint::new(lat, lon, ts).map_err(|e| Error::parse(source, line, e.to_string()))?;
        let user = user_col.map_or_else(|| default_user.to_string(), |c| field(c).to_string());
        let session = session_col.map(|c| field(c).to_string());
        if !rows.contains_key(&user) {
            order.push(user.clone());
        }
        rows.entry(user).or_default().push((point, session));
    }

    order
        .into_iter()
        .map(|user| {
            let mut items = rows.remove(&user).unwrap_or_default();
            items.sort_by_key(|(p, _)| p.timestamp);
            let points: Vec<GeoPoint> = items.iter().map(|(p, _)| *p).collect();
            let mut sessions = Vec::new();
            if session_col.is_some() {
                let mut start = 0;
                for i in 1..=items.len() {
                    if i == items.len() || items[i].1 != items[i - 1].1 {
                        sessions.push(start..i);
                        start = i;
                    }
                }
            }
            Trace::with_sessions(user, points, sessions)
        })
        .collect()
}

/// Writes `user,lat,lon,timestamp,session`. Coordinates use the shortest
/// representation that reads back to the same `f64`.
pub fn write_trace_csv<W: Write>(traces: &[Trace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "lat", "lon", "timestamp", "session"])?;
    for trace in traces {
        let session_of = trace.session_of_points();
        for (p, s) in trace.points.iter().zip(session_of) {
            w.write_record([
                trace.user_id.clone(),
                p.lat.to_string(),
                p.lon.to_string(),
                format_timestamp(p.timestamp),
                s.unwrap_or(0).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("trace csv", e))?;
    Ok(())
}

/// One `timestamp,symbol_id` pair per line, no header.
pub fn write_sequence<W: Write>(seq: &ObservationSequence, mut out: W) -> Result<()> {
    for o in &seq.observations {
        writeln!(out, "{},{}", format_timestamp(o.timestamp), o.symbol)
            .map_err(|e| Error::io("sequence", e))?;
    }
    Ok(())
}

pub fn read_sequence(
    text: &str,
    user_id: &str,
    vocabulary: Vocabulary,
    source: &str,
) -> Result<ObservationSequence> {
    let mut observations = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (ts, sym) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(source, k + 1, "expected 'timestamp,symbol'"))?;
        let timestamp = parse_timestamp(ts)
            .ok_or_else(|| Error::parse(source, k + 1, format!("bad timestamp '{ts}'")))?;
        let symbol: usize = sym
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, k + 1, format!("bad symbol '{sym}'")))?;
        if symbol >= vocabulary.size() {
            return Err(Error::parse(
                source,
                k + 1,
                format!(
                    "symbol {symbol} outside vocabulary of {}",
                    vocabulary.size()
                ),
            ));
        }
        observations.push(Observation { timestamp, symbol });
    }
    Ok(ObservationSequence {
        user_id: user_id.to_string(),
        vocabulary,
        observations,
    })
}
