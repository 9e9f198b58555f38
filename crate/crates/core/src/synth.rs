//! Synthetic mobility traces.
//!
//! Each user moves between a handful of anchor places. At every tick the
//! user either stays put or, once the current dwell has expired, draws the
//! next place from a schedule indexed by time zone and day type. Moving
//! between places emits interpolated fixes at the configured travel speed.
//! Positions get isotropic Gaussian noise, and a sparsity model decides
//! which ticks are actually recorded: either all of them, or short bursts
//! separated by heavy-tailed gaps, each burst becoming one session.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, GeoPoint, Trace, EARTH_RADIUS_M};
use crate::observation::{daytype_of, timezone_of};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

/// `schedule[tz][daytype][k]` is the probability of heading to `places[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthUser {
    pub id: String,
    pub places: Vec<Place>,
    pub schedule: [[Vec<f64>; 2]; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Sparsity {
    Dense,
    /// Bursts of geometrically distributed length; gaps are Pareto with
    /// scale `min_gap_minutes` and shape `gap_shape`, capped at `max_gap_minutes`.
    Bursty {
        mean_session_ticks: f64,
        min_gap_minutes: f64,
        gap_shape: f64,
        max_gap_minutes: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub users: Vec<SynthUser>,
    pub start: NaiveDateTime,
    pub days: usize,
    pub interval_s: i64,
    pub noise_sigma_m: f64,
    pub transit_speed_mps: f64,
    pub mean_dwell_minutes: f64,
    pub sparsity: Sparsity,
    pub seed: u64,
}

const METERS_PER_DEGREE: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

/// Place preferences shared by all scenario users, over
/// `[home, work, mall, other]`; each user gets a perturbed copy.
const TEMPLATE: [[[f64; 4]; 2]; 3] = [
    [[0.92, 0.04, 0.00, 0.04], [0.94, 0.00, 0.00, 0.06]],
    [[0.12, 0.70, 0.06, 0.12], [0.45, 0.05, 0.30, 0.20]],
    [[0.55, 0.10, 0.15, 0.20], [0.45, 0.00, 0.30, 0.25]],
];

impl SynthConfig {
    /// A small city of `n_users` people around College Park, MD.
    ///
    /// Homes and "other" places are private to each user. Users 0 and 1
    /// share a workplace, as do 2 and 3 (and so on); even users share one
    /// mall and odd users another.
    pub fn scenario(n_users: usize, weeks: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let center = (38.9897, -76.9378);
        let spot = |rng: &mut ChaCha8Rng, name: String| {
            let r = 1500.0 + 6500.0 * rng.random::<f64>();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            offset(center.0, center.1, r * theta.cos(), r * theta.sin(), name)
        };
        let malls = [
            spot(&mut rng, "mall-a".into()),
            spot(&mut rng, "mall-b".into()),
        ];
        let works: Vec<Place> = (0..n_users.div_ceil(2))
            .map(|k| spot(&mut rng, format!("work-{k}")))
            .collect();

        let users = (0..n_users)
            .map(|u| {
                let places = vec![
                    spot(&mut rng, format!("home-{u}")),
                    works[u / 2].clone(),
                    malls[u % 2].clone(),
                    spot(&mut rng, format!("other-{u}")),
                ];
                let schedule = std::array::from_fn(|tz| {
                    std::array::from_fn(|d| perturb(&mut rng, &TEMPLATE[tz][d]))
                });
                SynthUser {
                    id: format!("{:03}", u + 1),
                    places,
                    schedule,
                }
            })
            .collect();

        Self {
            users,
            start: NaiveDate::from_ymd_opt(2016, 2, 1)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap(),
            days: weeks * 7,
            interval_s: 180,
            noise_sigma_m: 4.0,
            transit_speed_mps: 8.0,
            mean_dwell_minutes: 90.0,
            sparsity: Sparsity::Bursty {
                mean_session_ticks: 4.0,
                min_gap_minutes: 15.0,
                gap_shape: 1.5,
                max_gap_minutes: 240.0,
            },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.users.is_empty() {
            return bad("no synthetic users".into());
        }
        let mut ids = std::collections::HashSet::new();
        for u in &self.users {
            if !ids.insert(&u.id) {
                return bad(format!("duplicate synthetic user '{}'", u.id));
            }
            if u.places.is_empty() {
                return bad(format!("user '{}' has no places", u.id));
            }
            for p in &u.places {
                GeoPoint::new(p.lat, p.lon, self.start)?;
            }
            for row in u.schedule.iter().flatten() {
                if row.len() != u.places.len()
                    || row.iter().any(|&p| !(p >= 0.0))
                    || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return bad(format!(
                        "user '{}': schedule rows must be distributions over its places",
                        u.id
                    ));
                }
            }
        }
        if self.interval_s <= 0 {
            return bad("interval must be positive".into());
        }
        if !(self.noise_sigma_m >= 0.0)
            || !(self.transit_speed_mps > 0.0)
            || !(self.mean_dwell_minutes > 0.0)
        {
            return bad("noise must be >= 0, speed and dwell > 0".into());
        }
        if let Sparsity::Bursty {
            mean_session_ticks,
            min_gap_minutes,
            gap_shape,
            max_gap_minutes,
        } = self.sparsity
        {
            if !(mean_session_ticks >= 1.0)
                || !(min_gap_minutes > 0.0)
                || !(gap_shape > 0.0)
                || !(max_gap_minutes >= min_gap_minutes)
            {
                return bad("bursty sparsity needs mean_session_ticks >= 1, min_gap > 0, shape > 0, max_gap >= min_gap".into());
            }
        }
        Ok(())
    }
}

fn offset(lat: f64, lon: f64, north_m: f64, east_m: f64, name: String) -> Place {
    Place {
        name,
        lat: lat + north_m / METERS_PER_DEGREE,
        lon: lon + east_m / (METERS_PER_DEGREE * lat.to_radians().cos()),
    }
}

/// Scales each positive entry by a log-normal factor and renormalizes.
fn perturb(rng: &mut ChaCha8Rng, base: &[f64; 4]) -> Vec<f64> {
    let jitter = Normal::new(0.0f64, 0.5).expect("valid normal");
    let raw: Vec<f64> = base.iter().map(|&p| p * jitter.sample(rng).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|p| p / total).collect()
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let mut x = rng.random::<f64>();
    for (k, &p) in probs.iter().enumerate() {
        if x < p {
            return k;
        }
        x -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn schedule_row(user: &SynthUser, ts: NaiveDateTime) -> &[f64] {
    &user.schedule[timezone_of(ts).index()][daytype_of(ts).index()]
}

/// Decides which ticks are recorded.
struct Recorder {
    on: bool,
    switch_at: NaiveDateTime,
    session: usize,
}

impl Recorder {
    fn new(start: NaiveDateTime) -> Self {
        Self {
            on: false,
            switch_at: start,
            session: 0,
        }
    }

    /// Whether tick `t` is recorded, advancing the burst state.
    fn keep(
        &mut self,
        t: NaiveDateTime,
        sparsity: &Sparsity,
        interval: Duration,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        let Sparsity::Bursty {
            mean_session_ticks,
            min_gap_minutes,
            gap_shape,
            max_gap_minutes,
        } = *sparsity
        else {
            return true;
        };
        while t >= self.switch_at {
            self.on = !self.on;
            if self.on {
                self.session += 1;
                let p = 1.0 / mean_session_ticks;
                let mut ticks = 1;
                while rng.random::<f64>() >= p {
                    ticks += 1;
                }
                self.switch_at = t + interval * ticks;
            } else {
                let gap = Pareto::new(min_gap_minutes, gap_shape)
                    .expect("validated gap parameters")
                    .sample(rng)
                    .min(max_gap_minutes);
                self.switch_at = t + Duration::seconds((gap * 60.0).round() as i64);
            }
        }
        self.on
    }
}

fn generate_user(config: &SynthConfig, index: usize) -> Result<Trace> {
    let user = &config.users[index];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);
    let noise = Normal::new(0.0, config.noise_sigma_m.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let dwell = Exp::new(1.0 / config.mean_dwell_minutes).expect("valid dwell");
    let interval = Duration::seconds(config.interval_s);
    let step_m = config.transit_speed_mps * config.interval_s as f64;
    let end = config.start + Duration::days(config.days as i64);

    let mut points = Vec::new();
    let mut sessions: Vec<std::ops::Range<usize>> = Vec::new();
    let mut recorder = Recorder::new(config.start);
    let mut last_session = usize::MAX;
    let mut emit = |rng: &mut ChaCha8Rng, t: NaiveDateTime, lat: f64, lon: f64| -> Result<()> {
        if !recorder.keep(t, &config.sparsity, interval, rng) {
            return Ok(());
        }
        let (dn, de) = if config.noise_sigma_m > 0.0 {
            (noise.sample(rng), noise.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let p = offset(lat, lon, dn, de, String::new());
        let at = points.len();
        points.push(GeoPoint::new(p.lat, p.lon.clamp(-180.0, 180.0), t)?);
        match sessions.last_mut() {
            Some(r) if last_session == recorder.session => r.end = at + 1,
            _ => sessions.push(at..at + 1),
        }
        last_session = recorder.session;
        Ok(())
    };

    let mut t = config.start;
    let mut place = draw(&mut rng, schedule_row(user, t));
    let mut leave_at = t + Duration::seconds((dwell.sample(&mut rng) * 60.0) as i64);
    while t < end {
        if t >= leave_at {
            let next = draw(&mut rng, schedule_row(user, t));
            if next != place {
                let (from, to) = (&user.places[place], &user.places[next]);
                let d = haversine_m(from.lat, from.lon, to.lat, to.lon);
                let hops = (d / step_m).ceil() as usize;
                for k in 1..hops {
                    if t >= end {
                        break;
                    }
                    let f = k as f64 / hops as f64;
                    emit(
                        &mut rng,
                        t,
                        from.lat + f * (to.lat - from.lat),
                        from.lon + f * (to.lon - from.lon),
                    )?;
                    t += interval;
                }
                place = next;
            }
            leave_at = t + Duration::seconds((dwell.sample(&mut rng) * 60.0) as i64);
            if t >= end {
                break;
            }
        }
        let p = &user.places[place];
        emit(&mut rng, t, p.lat, p.lon)?;
        t += interval;
    }
    Trace::with_sessions(user.id.clone(), points, sessions)
}

/// One trace per configured user, deterministic in `config.seed`.
pub fn synth_generate(config: &SynthConfig) -> Result<Vec<Trace>> {
    config.validate()?;
    (0..config.users.len())
        .map(|u| generate_user(config, u))
        .collect()
}
