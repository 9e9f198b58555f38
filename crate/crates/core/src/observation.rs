//! Discrete observation vocabulary.
//!
//! A symbol combines a cluster label, a time-of-day zone and a weekday /
//! weekend flag, plus a single `Null` symbol that closes every calendar day.
//! With `N` known clusters there are `2N + 2` labels and
//! `V = 6 (2N + 2) + 1` symbols.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterModel, Location, PointAssignment};
use crate::geo::{Timestamped, Trace};

pub type SymbolId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeZone {
    Tz1,
    Tz2,
    Tz3,
}

impl TimeZone {
    pub const ALL: [TimeZone; 3] = [TimeZone::Tz1, TimeZone::Tz2, TimeZone::Tz3];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub const ALL: [DayType; 2] = [DayType::Weekday, DayType::Weekend];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// TZ1 covers [00:00, 08:00], TZ2 (08:00, 16:00], TZ3 (16:00, 24:00).
pub fn timezone_of(ts: NaiveDateTime) -> TimeZone {
    let t = ts.time();
    let eight = NaiveTime::from_hms_opt(8, 0, 0).unwrap();
    let sixteen = NaiveTime::from_hms_opt(16, 0, 0).unwrap();
    if t <= eight {
        TimeZone::Tz1
    } else if t <= sixteen {
        TimeZone::Tz2
    } else {
        TimeZone::Tz3
    }
}

pub fn daytype_of(ts: NaiveDateTime) -> DayType {
    match ts.weekday() {
        Weekday::Sat | Weekday::Sun => DayType::Weekend,
        _ => DayType::Weekday,
    }
}

/// Decomposed form of a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservationState {
    Null,
    Visit {
        location: Location,
        timezone: TimeZone,
        daytype: DayType,
    },
}

/// (label index, timezone index, daytype index) of a non-Null symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SymbolParts {
    pub label: usize,
    pub timezone: usize,
    pub daytype: usize,
}

/// Symbol table for a model with `n_clusters` known clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub n_clusters: usize,
}

impl Vocabulary {
    pub fn new(n_clusters: usize) -> Self {
        Self { n_clusters }
    }

    pub fn label_count(&self) -> usize {
        2 * self.n_clusters + 2
    }

    pub fn size(&self) -> usize {
        6 * self.label_count() + 1
    }

    pub fn null(&self) -> SymbolId {
        self.size() - 1
    }

    /// Label order: Known 1..N, NearUnknown 1..N, FarUnknown, Transit.
    pub fn label_index(&self, location: Location) -> usize {
        let n = self.n_clusters;
        match location {
            Location::Known(j) => {
                assert!((1..=n).contains(&j), "cluster id {j} outside 1..={n}");
                j - 1
            }
            Location::NearUnknown(j) => {
                assert!((1..=n).contains(&j), "cluster id {j} outside 1..={n}");
                n + j - 1
            }
            Location::FarUnknown => 2 * n,
            Location::Transit => 2 * n + 1,
        }
    }

    pub fn label_at(&self, index: usize) -> Location {
        let n = self.n_clusters;
        match index {
            i if i < n => Location::Known(i + 1),
            i if i < 2 * n => Location::NearUnknown(i - n + 1),
            i if i == 2 * n => Location::FarUnknown,
            i if i == 2 * n + 1 => Location::Transit,
            i => panic!("label index {i} outside 0..{}", self.label_count()),
        }
    }

    pub fn encode(&self, state: ObservationState) -> SymbolId {
        match state {
            ObservationState::Null => self.null(),
            ObservationState::Visit {
                location,
                timezone,
                daytype,
            } => self.label_index(location) * 6 + timezone.index() * 2 + daytype.index(),
        }
    }

    pub fn decode(&self, symbol: SymbolId) -> Option<ObservationState> {
        if symbol == self.null() {
            return Some(ObservationState::Null);
        }
        if symbol >= self.size() {
            return None;
        }
        Some(ObservationState::Visit {
            location: self.label_at(symbol / 6),
            timezone: TimeZone::ALL[(symbol % 6) / 2],
            daytype: DayType::ALL[symbol % 2],
        })
    }

    /// Index decomposition used by marginal smoothing; `None` for Null.
    pub fn parts(&self, symbol: SymbolId) -> Option<SymbolParts> {
        (symbol < self.null()).then(|| SymbolParts {
            label: symbol / 6,
            timezone: (symbol % 6) / 2,
            daytype: symbol % 2,
        })
    }

    pub fn encode_assignment(&self, a: &PointAssignment) -> SymbolId {
        self.encode(ObservationState::Visit {
            location: a.kind,
            timezone: timezone_of(a.point.timestamp),
            daytype: daytype_of(a.point.timestamp),
        })
    }
}

/// Encodes a point assignment for a model with `n_clusters` clusters.
pub fn encode(assignment: &PointAssignment, n_clusters: usize) -> SymbolId {
    Vocabulary::new(n_clusters).encode_assignment(assignment)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub timestamp: NaiveDateTime,
    pub symbol: SymbolId,
}

impl Timestamped for Observation {
    fn timestamp(&self) -> NaiveDateTime {
        self.timestamp
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    pub user_id: String,
    pub vocabulary: Vocabulary,
    pub observations: Vec<Observation>,
}

impl ObservationSequence {
    pub fn symbols(&self) -> Vec<SymbolId> {
        self.observations.iter().map(|o| o.symbol).collect()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn null_count(&self) -> usize {
        let null = self.vocabulary.null();
        self.observations
            .iter()
            .filter(|o| o.symbol == null)
            .count()
    }
}

/// Encodes a (resampled) trace against a cluster model.
///
/// Transit detection only looks at the previous fix of the same session.
/// One `Null` follows the last observation of each calendar day, stamped one
/// second after it.
pub fn build_sequence(trace: &Trace, model: &ClusterModel) -> ObservationSequence {
    let vocabulary = Vocabulary::new(model.n_clusters());
    let session_of = trace.session_of_points();
    let mut observations = Vec::with_capacity(trace.len() + trace.len() / 16);
    let mut current_day: Option<NaiveDate> = None;

    for (k, point) in trace.points.iter().enumerate() {
        let day = point.timestamp.date();
        if let Some(d) = current_day {
            if d != day {
                push_null(&mut observations, &vocabulary);
            }
        }
        current_day = Some(day);
        let prev = k
            .checked_sub(1)
            .filter(|&j| session_of[j].is_some() && session_of[j] == session_of[k])
            .map(|j| &trace.points[j]);
        let assignment = model.assign(prev, point);
        observations.push(Observation {
            timestamp: point.timestamp,
            symbol: vocabulary.encode_assignment(&assignment),
        });
    }
    if current_day.is_some() {
        push_null(&mut observations, &vocabulary);
    }

    ObservationSequence {
        user_id: trace.user_id.clone(),
        vocabulary,
        observations,
    }
}

fn push_null(observations: &mut Vec<Observation>, vocabulary: &Vocabulary) {
    let last = observations
        .last()
        .expect("null follows an observation")
        .timestamp;
    observations.push(Observation {
        timestamp: last + Duration::seconds(1),
        symbol: vocabulary.null(),
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::LocationCluster;
    use crate::geo::GeoPoint;
    use proptest::prelude::*;

    fn at(y: i32, m: u32, d: u32, hh: u32, mm: u32, ss: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(hh, mm, ss)
            .unwrap()
    }

    #[test]
    fn timezone_boundaries() {
        assert_eq!(timezone_of(at(2016, 3, 2, 9, 30, 0)), TimeZone::Tz2);
        assert_eq!(timezone_of(at(2016, 3, 2, 8, 0, 0)), TimeZone::Tz1);
        assert_eq!(timezone_of(at(2016, 3, 2, 8, 0, 1)), TimeZone::Tz2);
        assert_eq!(timezone_of(at(2016, 3, 2, 16, 0, 0)), TimeZone::Tz2);
        assert_eq!(timezone_of(at(2016, 3, 2, 16, 0, 1)), TimeZone::Tz3);
        assert_eq!(timezone_of(at(2016, 3, 2, 23, 59, 0)), TimeZone::Tz3);
        assert_eq!(timezone_of(at(2016, 3, 2, 0, 0, 0)), TimeZone::Tz1);
    }

    #[test]
    fn daytypes() {
        // 2016-03-02 was a Wednesday
        assert_eq!(daytype_of(at(2016, 3, 2, 12, 0, 0)), DayType::Weekday);
        assert_eq!(daytype_of(at(2016, 3, 5, 12, 0, 0)), DayType::Weekend);
        let sunday = at(2016, 3, 6, 0, 30, 0);
        assert_eq!(
            (daytype_of(sunday), timezone_of(sunday)),
            (DayType::Weekend, TimeZone::Tz1)
        );
    }

    #[test]
    fn vocabulary_size_and_indices() {
        let v = Vocabulary::new(3);
        assert_eq!(v.size(), 49);
        assert_eq!(v.null(), 48);
        let first = ObservationState::Visit {
            location: Location::Known(1),
            timezone: TimeZone::Tz1,
            daytype: DayType::Weekday,
        };
        assert_eq!(v.encode(first), 0);
        let transit = ObservationState::Visit {
            location: Location::Transit,
            timezone: TimeZone::Tz3,
            daytype: DayType::Weekend,
        };
        assert_eq!(v.encode(transit), 7 * 6 + 2 * 2 + 1);
        assert_eq!(v.encode(transit), 47);
    }

    proptest! {
        #[test]
        fn decode_encode_identity(n in 0usize..12, raw in 0usize..1000) {
            let v = Vocabulary::new(n);
            let s = raw % v.size();
            let state = v.decode(s).unwrap();
            prop_assert_eq!(v.encode(state), s);
            prop_assert!(v.decode(v.size()).is_none());
        }
    }

    fn home_model() -> ClusterModel {
        ClusterModel {
            user_id: "u".into(),
            clusters: vec![LocationCluster {
                id: 1,
                lat: 10.0,
                lon: 10.0,
                radius: 10.0,
            }],
            r_max: 20.0,
            unknown_radius: 10_000.0,
            transit_speed: 2.0,
        }
    }

    fn home(ts: NaiveDateTime) -> GeoPoint {
        GeoPoint::new(10.0, 10.0, ts).unwrap()
    }

    #[test]
    fn empty_trace_gives_empty_sequence() {
        let seq = build_sequence(&Trace::new("u", vec![]), &home_model());
        assert!(seq.is_empty());
    }

    #[test]
    fn one_day_gets_one_trailing_null() {
        let pts = vec![
            home(at(2016, 3, 2, 9, 0, 0)),
            home(at(2016, 3, 2, 9, 3, 0)),
            home(at(2016, 3, 2, 9, 6, 0)),
        ];
        let seq = build_sequence(&Trace::new("u", pts), &home_model());
        assert_eq!(seq.len(), 4);
        assert_eq!(seq.observations[3].symbol, seq.vocabulary.null());
        assert_eq!(seq.observations[3].timestamp, at(2016, 3, 2, 9, 6, 1));
        // Known(1), TZ2, WD
        assert_eq!(seq.observations[0].symbol, 2);
    }

    #[test]
    fn two_days_get_two_nulls() {
        let pts = vec![
            home(at(2016, 3, 4, 22, 0, 0)),
            home(at(2016, 3, 5, 7, 0, 0)),
            home(at(2016, 3, 5, 7, 3, 0)),
        ];
        let seq = build_sequence(&Trace::new("u", pts), &home_model());
        assert_eq!(seq.null_count(), 2);
        let null = seq.vocabulary.null();
        assert_eq!(seq.symbols(), vec![4, null, 1, 1, null]);
    }

    #[test]
    fn transit_only_within_a_session() {
        let a = home(at(2016, 3, 2, 9, 0, 0));
        let b = GeoPoint::new(10.1, 10.0, at(2016, 3, 2, 9, 3, 0)).unwrap();
        let joined = Trace::new("u", vec![a, b]);
        let v = Vocabulary::new(1);
        let seq = build_sequence(&joined, &home_model());
        assert_eq!(
            v.decode(seq.observations[1].symbol).map(|s| match s {
                ObservationState::Visit { location, .. } => location,
                ObservationState::Null => unreachable!(),
            }),
            Some(Location::Transit)
        );

        let split = Trace::with_sessions("u", vec![a, b], vec![0..1, 1..2]).unwrap();
        let seq = build_sequence(&split, &home_model());
        assert_eq!(
            seq.observations[1].symbol / 6,
            v.label_index(Location::FarUnknown)
        );
    }
}
