//! Geodesic primitives and temporal resampling of raw location traces.
//!
//! Distances are great-circle (haversine) distances on a sphere of radius
//! [`EARTH_RADIUS_M`]. Timestamps are local civil time without zone
//! information; day and time-of-day semantics are read from them directly.

use std::ops::Range;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Default resampling interval (three minutes).
pub const DEFAULT_RESAMPLE_INTERVAL_S: i64 = 180;

/// Default longest gap that resampling will bridge by repeating the last fix.
pub const DEFAULT_MAX_GAP_S: i64 = 3600;

/// One time-stamped latitude/longitude fix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub timestamp: NaiveDateTime,
}

impl GeoPoint {
    /// Builds a point, rejecting coordinates outside the valid ranges.
    pub fn new(lat: f64, lon: f64, timestamp: NaiveDateTime) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::LongitudeOutOfRange(lon));
        }
        Ok(Self {
            lat,
            lon,
            timestamp,
        })
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Anything carrying an absolute timestamp; used by the split helpers.
pub trait Timestamped {
    fn timestamp(&self) -> NaiveDateTime;
}

impl Timestamped for GeoPoint {
    fn timestamp(&self) -> NaiveDateTime {
        self.timestamp
    }
}

/// A user's time-ordered sequence of fixes, optionally divided into sessions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub user_id: String,
    pub points: Vec<GeoPoint>,
    /// Index ranges into `points`. Empty means the whole trace is one session.
    pub sessions: Vec<Range<usize>>,
}

impl Trace {
    /// Builds a single-session trace. Points are stably sorted by timestamp.
    pub fn new(user_id: impl Into<String>, mut points: Vec<GeoPoint>) -> Self {
        points.sort_by_key(|p| p.timestamp);
        Self {
            user_id: user_id.into(),
            points,
            sessions: Vec::new(),
        }
    }

    /// Builds a trace from already-sorted points and session ranges.
    ///
    /// Ranges must be ordered, non-overlapping and within bounds.
    pub fn with_sessions(
        user_id: impl Into<String>,
        points: Vec<GeoPoint>,
        sessions: Vec<Range<usize>>,
    ) -> Result<Self> {
        if points.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::InvalidParameter(
                "trace points must be sorted by timestamp".into(),
            ));
        }
        let mut end = 0;
        for r in &sessions {
            if r.start < end || r.end < r.start || r.end > points.len() {
                return Err(Error::InvalidParameter(format!(
                    "invalid session range {}..{}",
                    r.start, r.end
                )));
            }
            end = r.end;
        }
        Ok(Self {
            user_id: user_id.into(),
            points,
            sessions,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Session ranges, treating a trace without session info as one session.
    pub fn session_ranges(&self) -> Vec<Range<usize>> {
        if self.sessions.is_empty() {
            if self.points.is_empty() {
                Vec::new()
            } else {
                vec![0..self.points.len()]
            }
        } else {
            self.sessions.clone()
        }
    }

    /// Sub-trace over `range`, with session ranges clipped and re-based.
    pub fn slice(&self, range: Range<usize>) -> Trace {
        let points = self.points[range.clone()].to_vec();
        let sessions = if self.sessions.is_empty() {
            Vec::new()
        } else {
            self.sessions
                .iter()
                .filter_map(|s| {
                    let start = s.start.max(range.start);
                    let end = s.end.min(range.end);
                    (start < end).then(|| (start - range.start)..(end - range.start))
                })
                .collect()
        };
        Trace {
            user_id: self.user_id.clone(),
            points,
            sessions,
        }
    }

    /// Session index of every point.
    pub fn session_of_points(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.points.len()];
        for (k, r) in self.session_ranges().into_iter().enumerate() {
            for slot in &mut out[r] {
                *slot = Some(k);
            }
        }
        out
    }
}

/// Great-circle distance in meters.
pub fn geodist(a: &GeoPoint, b: &GeoPoint) -> f64 {
    haversine_m(a.lat, a.lon, b.lat, b.lon)
}

/// Haversine distance in meters between two lat/lon pairs given in degrees.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    if lat1 == lat2 && lon1 == lon2 {
        return 0.0;
    }
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let dphi = (lat2 - lat1).to_radians();
    let dlambda = (lon2 - lon1).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Average speed in m/s between two fixes; order of the arguments does not matter.
pub fn speed(a: &GeoPoint, b: &GeoPoint) -> Result<f64> {
    let dt = (b.timestamp - a.timestamp).num_milliseconds().abs();
    if dt == 0 {
        return Err(Error::ZeroTimeDelta);
    }
    Ok(geodist(a, b) / (dt as f64 / 1000.0))
}

/// Resampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub interval_s: i64,
    pub max_gap_s: i64,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            interval_s: DEFAULT_RESAMPLE_INTERVAL_S,
            max_gap_s: DEFAULT_MAX_GAP_S,
        }
    }
}

/// Resamples each session onto a fixed grid anchored at its first fix.
///
/// Every tick carries the most recent fix at or before it. Sessions are
/// further cut wherever consecutive fixes are more than `max_gap_s` apart,
/// and each cut starts a fresh grid; nothing is emitted inside such gaps.
pub fn resample(trace: &Trace, config: &ResampleConfig) -> Result<Trace> {
    if config.interval_s <= 0 {
        return Err(Error::InvalidParameter(
            "resample interval must be positive".into(),
        ));
    }
    let interval = Duration::seconds(config.interval_s);
    let max_gap = Duration::seconds(config.max_gap_s.max(0));
    let mut points = Vec::new();
    let mut sessions = Vec::new();

    for session in trace.session_ranges() {
        let raw = &trace.points[session];
        let mut seg_start = 0;
        for i in 1..=raw.len() {
            let cut = i == raw.len() || raw[i].timestamp - raw[i - 1].timestamp > max_gap;
            if !cut {
                continue;
            }
            let segment = &raw[seg_start..i];
            seg_start = i;
            let begin = points.len();
            let last = segment[segment.len() - 1].timestamp;
            let mut tick = segment[0].timestamp;
            let mut idx = 0;
            while tick <= last {
                while idx + 1 < segment.len() && segment[idx + 1].timestamp <= tick {
                    idx += 1;
                }
                points.push(GeoPoint {
                    timestamp: tick,
                    ..segment[idx]
                });
                tick += interval;
            }
            sessions.push(begin..points.len());
        }
    }

    Ok(Trace {
        user_id: trace.user_id.clone(),
        points,
        sessions,
    })
}
