//! Per-user location clusters and point-to-cluster assignment.
//!
//! Training fixes are grouped with DBSCAN over haversine distance
//! (eps = `r_max / 2`). Any cluster whose radius around its centroid exceeds
//! `r_max` is re-clustered with a halved eps until the bound holds; regions
//! too uniform to separate that way are carved into balls of radius
//! `r_max / 2` around their densest points. At
//! assignment time a fix is labelled as transit, inside a known cluster,
//! near-unknown (nearest cluster within the unknown radius) or far-unknown.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, speed, GeoPoint, EARTH_RADIUS_M};

pub const DEFAULT_R_MAX_M: f64 = 20.0;
pub const DEFAULT_MIN_PTS: usize = 4;
pub const DEFAULT_UNKNOWN_RADIUS_M: f64 = 10_000.0;
pub const DEFAULT_TRANSIT_SPEED_MPS: f64 = 2.0;

/// Re-splitting by eps stops below this fraction of `r_max`.
const MIN_EPS_FRACTION: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub r_max: f64,
    pub min_pts: usize,
    pub unknown_radius: f64,
    pub transit_speed: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            r_max: DEFAULT_R_MAX_M,
            min_pts: DEFAULT_MIN_PTS,
            unknown_radius: DEFAULT_UNKNOWN_RADIUS_M,
            transit_speed: DEFAULT_TRANSIT_SPEED_MPS,
        }
    }
}

/// A location cluster: 1-based id, centroid and radius in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationCluster {
    pub id: usize,
    pub lat: f64,
    pub lon: f64,
    pub radius: f64,
}

impl LocationCluster {
    pub fn distance_to(&self, p: &GeoPoint) -> f64 {
        haversine_m(self.lat, self.lon, p.lat, p.lon)
    }
}

/// Cluster label of a single fix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Location {
    Known(usize),
    NearUnknown(usize),
    FarUnknown,
    Transit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointAssignment {
    pub kind: Location,
    pub point: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub user_id: String,
    pub clusters: Vec<LocationCluster>,
    pub r_max: f64,
    pub unknown_radius: f64,
    pub transit_speed: f64,
}

impl ClusterModel {
    /// Clusters a user's training fixes.
    pub fn build(
        user_id: impl Into<String>,
        points: &[GeoPoint],
        params: &ClusterParams,
    ) -> Result<Self> {
        let clusters = build_clusters(points, params.r_max, params.min_pts)?;
        Ok(Self {
            user_id: user_id.into(),
            clusters,
            r_max: params.r_max,
            unknown_radius: params.unknown_radius,
            transit_speed: params.transit_speed,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Number of distinct cluster labels, `2N + 2`.
    pub fn label_count(&self) -> usize {
        2 * self.clusters.len() + 2
    }

    /// Nearest cluster (index into `clusters`) and its distance; lowest id wins ties.
    pub fn nearest(&self, point: &GeoPoint) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in self.clusters.iter().enumerate() {
            let d = c.distance_to(point);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best
    }

    /// Labels `point`, given the previous fix of the same session if any.
    pub fn assign(&self, prev: Option<&GeoPoint>, point: &GeoPoint) -> PointAssignment {
        let kind = self.classify(prev, point);
        PointAssignment {
            kind,
            point: *point,
        }
    }

    fn classify(&self, prev: Option<&GeoPoint>, point: &GeoPoint) -> Location {
        if let Some(prev) = prev {
            // a zero time delta carries no speed information
            if matches!(speed(prev, point), Ok(v) if v >= self.transit_speed) {
                return Location::Transit;
            }
        }
        match self.nearest(point) {
            Some((k, d)) if d <= self.clusters[k].radius => Location::Known(self.clusters[k].id),
            Some((k, d)) if d <= self.unknown_radius => Location::NearUnknown(self.clusters[k].id),
            _ => Location::FarUnknown,
        }
    }
}

/// DBSCAN location clusters with every radius bounded by `r_max`.
///
/// Ids are assigned 1..N in order of decreasing member count.
pub fn build_clusters(
    points: &[GeoPoint],
    r_max: f64,
    min_pts: usize,
) -> Result<Vec<LocationCluster>> {
    if points.is_empty() {
        return Err(Error::NoTrainingPoints);
    }
    if !(r_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_max must be positive, got {r_max}"
        )));
    }
    if min_pts == 0 {
        return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
    }
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.lat, p.lon)).collect();
    let eps = r_max / 2.0;
    let labels = dbscan(&coords, eps, min_pts);

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        if let Some(c) = *label {
            if groups.len() <= c {
                groups.resize(c + 1, Vec::new());
            }
            groups[c].push(i);
        }
    }

    let mut bounded = Vec::new();
    for g in groups {
        split_until_bounded(&coords, g, eps, r_max, min_pts, &mut bounded);
    }
    bounded.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));

    Ok(bounded
        .iter()
        .enumerate()
        .map(|(k, members)| {
            let (lat, lon, radius) = centroid_radius(&coords, members);
            LocationCluster {
                id: k + 1,
                lat,
                lon,
                radius,
            }
        })
        .collect())
}

fn split_until_bounded(
    coords: &[(f64, f64)],
    members: Vec<usize>,
    eps: f64,
    r_max: f64,
    min_pts: usize,
    out: &mut Vec<Vec<usize>>,
) {
    let (_, _, radius) = centroid_radius(coords, &members);
    if radius <= r_max {
        out.push(members);
        return;
    }
    let eps = eps / 2.0;
    let groups = if eps < r_max * MIN_EPS_FRACTION {
        Vec::new()
    } else {
        let sub: Vec<(f64, f64)> = members.iter().map(|&i| coords[i]).collect();
        let labels = dbscan(&sub, eps, min_pts);
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (k, label) in labels.iter().enumerate() {
            if let Some(c) = *label {
                if groups.len() <= c {
                    groups.resize(c + 1, Vec::new());
                }
                groups[c].push(members[k]);
            }
        }
        groups
    };
    if groups.len() < 2 {
        // uniformly dense regions do not separate under a smaller eps
        for ball in carve_balls(coords, &members, r_max, min_pts) {
            if let Some(trimmed) = trim_to_radius(coords, ball, r_max, min_pts) {
                out.push(trimmed);
            }
        }
        return;
    }
    for g in groups {
        split_until_bounded(coords, g, eps, r_max, min_pts, out);
    }
}

/// Greedy partition into balls of radius `r_max / 2` around the point with
/// the most remaining neighbors. Balls with fewer than `min_pts` members end
/// the partition; what is left over is noise.
fn carve_balls(
    coords: &[(f64, f64)],
    members: &[usize],
    r_max: f64,
    min_pts: usize,
) -> Vec<Vec<usize>> {
    let half = r_max / 2.0;
    let sub: Vec<(f64, f64)> = members.iter().map(|&i| coords[i]).collect();
    let index = GridIndex::new(&sub, half);
    let mut alive = vec![true; sub.len()];
    let mut balls = Vec::new();
    let mut neighborhood = Vec::new();
    loop {
        let mut best: Option<(usize, usize)> = None;
        for k in (0..sub.len()).filter(|&k| alive[k]) {
            index.neighbors(&sub, k, half, &mut neighborhood);
            let count = neighborhood.iter().filter(|&&j| alive[j]).count();
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((k, count));
            }
        }
        let Some((seed, count)) = best else { break };
        if count < min_pts {
            break;
        }
        index.neighbors(&sub, seed, half, &mut neighborhood);
        let ball: Vec<usize> = neighborhood.iter().copied().filter(|&j| alive[j]).collect();
        for &j in &ball {
            alive[j] = false;
        }
        balls.push(ball.into_iter().map(|j| members[j]).collect());
    }
    balls
}

/// Drops the farthest member until the radius bound holds.
fn trim_to_radius(
    coords: &[(f64, f64)],
    mut members: Vec<usize>,
    r_max: f64,
    min_pts: usize,
) -> Option<Vec<usize>> {
    loop {
        if members.len() < min_pts {
            return None;
        }
        let (lat, lon, radius) = centroid_radius(coords, &members);
        if radius <= r_max {
            members.sort_unstable();
            return Some(members);
        }
        let (far, _) = members
            .iter()
            .enumerate()
            .map(|(k, &i)| (k, haversine_m(lat, lon, coords[i].0, coords[i].1)))
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        members.swap_remove(far);
    }
}

/// Arithmetic-mean centroid and max member distance to it.
fn centroid_radius(coords: &[(f64, f64)], members: &[usize]) -> (f64, f64, f64) {
    let n = members.len() as f64;
    let lat = members.iter().map(|&i| coords[i].0).sum::<f64>() / n;
    let lon = members.iter().map(|&i| coords[i].1).sum::<f64>() / n;
    let radius = members
        .iter()
        .map(|&i| haversine_m(lat, lon, coords[i].0, coords[i].1))
        .fold(0.0, f64::max);
    (lat, lon, radius)
}

/// Uniform grid over an equirectangular projection used for eps-neighborhood queries.
///
/// Cell width in longitude uses the smallest cos(lat) in the data set so that
/// any pair within eps lands in adjacent cells. Pairs straddling the
/// antimeridian are not treated as neighbors.
struct GridIndex {
    cell_m: f64,
    lon_m_per_deg: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

const M_PER_DEG: f64 = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;

impl GridIndex {
    fn new(coords: &[(f64, f64)], cell_m: f64) -> Self {
        let max_abs_lat = coords.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
        let lon_m_per_deg = (M_PER_DEG * max_abs_lat.to_radians().cos() * 0.99).max(1e-9);
        let mut index = Self {
            cell_m,
            lon_m_per_deg,
            cells: HashMap::new(),
        };
        for (i, c) in coords.iter().enumerate() {
            let key = index.key(c);
            index.cells.entry(key).or_default().push(i);
        }
        index
    }

    fn key(&self, c: &(f64, f64)) -> (i64, i64) {
        (
            (c.0 * M_PER_DEG / self.cell_m).floor() as i64,
            (c.1 * self.lon_m_per_deg / self.cell_m).floor() as i64,
        )
    }

    fn neighbors(&self, coords: &[(f64, f64)], i: usize, eps: f64, out: &mut Vec<usize>) {
        out.clear();
        let (ky, kx) = self.key(&coords[i]);
        let (lat, lon) = coords[i];
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(bucket) = self.cells.get(&(ky + dy, kx + dx)) {
                    out.extend(
                        bucket
                            .iter()
                            .copied()
                            .filter(|&j| haversine_m(lat, lon, coords[j].0, coords[j].1) <= eps),
                    );
                }
            }
        }
        out.sort_unstable();
    }
}

/// Classic DBSCAN over (lat, lon) degrees with haversine distance.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps` meters. Returns a 0-based cluster label per point, `None` for
/// noise. Labels follow the order in which clusters are discovered.
pub fn dbscan(coords: &[(f64, f64)], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let index = GridIndex::new(coords, eps.max(1e-9));
    let mut labels: Vec<Option<usize>> = vec![None; coords.len()];
    let mut visited = vec![false; coords.len()];
    let mut next_label = 0;
    let mut neighborhood = Vec::new();
    let mut queue = Vec::new();

    for i in 0..coords.len() {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        index.neighbors(coords, i, eps, &mut neighborhood);
        if neighborhood.len() < min_pts {
            continue;
        }
        let label = next_label;
        next_label += 1;
        labels[i] = Some(label);
        queue.clear();
        queue.extend(neighborhood.iter().copied().filter(|&j| j != i));
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if labels[j].is_none() {
                labels[j] = Some(label);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            index.neighbors(coords, j, eps, &mut neighborhood);
            if neighborhood.len() >= min_pts {
                queue.extend(
                    neighborhood
                        .iter()
                        .copied()
                        .filter(|&k| labels[k].is_none() || !visited[k]),
                );
            }
        }
    }
    labels
}

/// Labels every point of a session-ordered slice; `prev` is the preceding fix.
pub fn assign_all(model: &ClusterModel, points: &[GeoPoint]) -> Vec<PointAssignment> {
    points
        .iter()
        .enumerate()
        .map(|(k, p)| model.assign(k.checked_sub(1).map(|j| &points[j]), p))
        .collect()
}
