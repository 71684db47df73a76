//! Extended persistence of the radial distance function along the link.
//!
//! For an observation point p, every closure component induces a cyclic
//! sequence of distances at its polyline vertices.  The sublevel-set
//! filtration of that circle-valued profile yields, per component, one
//! ordinary degree-0 point for each non-global minimum (elder rule), one
//! extended degree-0 point pairing the global minimum with the global
//! maximum, and one extended degree-1 point below the diagonal.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddedLink, ObservationLoop};
use crate::geom::Vec3;
use crate::{Error, Result};

/// Observation points closer than this to a polyline vertex are rejected as
/// degenerate.
pub const VERTEX_CLEARANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Min,
    Max,
}

/// A critical point of the distance profile along one component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub component: usize,
    /// Representative vertex index (lowest index on a plateau).
    pub vertex: usize,
    /// Angular position of the critical point.
    pub theta: f64,
    /// Distance value.
    pub value: f64,
    pub kind: CriticalKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Ordinary,
    Extended,
}

impl std::fmt::Display for PointKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointKind::Ordinary => write!(f, "ordinary"),
            PointKind::Extended => write!(f, "extended"),
        }
    }
}

/// One point of a persistence diagram, with the critical data that
/// realizes its coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
    /// Homological degree, 0 or 1.
    pub degree: u8,
    pub kind: PointKind,
    pub component: usize,
    pub birth_theta: f64,
    pub death_theta: f64,
    pub birth_vertex: usize,
    pub death_vertex: usize,
}

/// Extended-persistence diagram of the radial distance function at one
/// observation parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub t: f64,
    pub observation: Vec3,
    pub points: Vec<DiagramPoint>,
    /// All critical points, grouped by component in cyclic order.
    pub criticals: Vec<CriticalPoint>,
}

impl PersistenceDiagram {
    pub fn minima(&self) -> usize {
        self.criticals.iter().filter(|c| c.kind == CriticalKind::Min).count()
    }

    pub fn maxima(&self) -> usize {
        self.criticals.iter().filter(|c| c.kind == CriticalKind::Max).count()
    }

    /// Ordinary degree-0 points.
    pub fn ordinary(&self) -> impl Iterator<Item = &DiagramPoint> {
        self.points.iter().filter(|p| p.kind == PointKind::Ordinary)
    }

    /// Extended degree-0 points (one per component).
    pub fn extended0(&self) -> impl Iterator<Item = &DiagramPoint> {
        self.points
            .iter()
            .filter(|p| p.kind == PointKind::Extended && p.degree == 0)
    }

    /// Extended degree-1 points (one per component).
    pub fn extended1(&self) -> impl Iterator<Item = &DiagramPoint> {
        self.points.iter().filter(|p| p.degree == 1)
    }

    /// All degree-0 points, ordinary and extended.
    pub fn degree0(&self) -> impl Iterator<Item = &DiagramPoint> {
        self.points.iter().filter(|p| p.degree == 0)
    }
}

/// Cyclic distance values along one component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentProfile {
    pub component: usize,
    pub values: Vec<f64>,
    /// Angular position of each vertex.
    pub thetas: Vec<f64>,
}

impl ComponentProfile {
    /// Profile from raw values, with vertices spread uniformly in angle.
    pub fn from_values(component: usize, values: Vec<f64>) -> Self {
        let len = values.len();
        let thetas = (0..len).map(|i| 2.0 * PI * i as f64 / len as f64).collect();
        ComponentProfile { component, values, thetas }
    }
}

/// Per-component distance profiles for one observation point.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    pub components: Vec<ComponentProfile>,
}

fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y == 2.0 * PI {
        0.0
    } else {
        y
    }
}

fn wrap_signed(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Distances from `p` to every vertex, one cyclic sequence per component.
pub fn distance_profile(link: &EmbeddedLink, p: Vec3) -> Result<DistanceProfile> {
    let mut components = Vec::with_capacity(link.components.len());
    for comp in &link.components {
        let mut values = Vec::with_capacity(comp.vertices.len());
        for (i, v) in comp.vertices.iter().enumerate() {
            let d = v.dist(p);
            if d < VERTEX_CLEARANCE {
                return Err(Error::NonGeneric(format!(
                    "observation point within {VERTEX_CLEARANCE:e} of vertex {i} on component {}",
                    comp.id
                )));
            }
            values.push(d);
        }
        components.push(ComponentProfile {
            component: comp.id,
            values,
            thetas: comp.theta.clone(),
        });
    }
    Ok(DistanceProfile { components })
}

/// Critical points of each component's cyclic profile, in cyclic order.
///
/// Plateaus are compressed to their lowest vertex index; minima and maxima
/// then strictly alternate.  A constant profile has no critical points and
/// is reported as degenerate.
pub fn critical_points(profile: &DistanceProfile) -> Result<Vec<Vec<CriticalPoint>>> {
    profile.components.iter().map(component_criticals).collect()
}

fn component_criticals(cp: &ComponentProfile) -> Result<Vec<CriticalPoint>> {
    let v = &cp.values;
    let len = v.len();
    if len < 3 {
        return Err(Error::Invalid(format!(
            "cyclic profile needs at least 3 samples, component {} has {len}",
            cp.component
        )));
    }

    // First index whose value differs from its cyclic predecessor; its
    // absence means the profile is constant.
    let start = (0..len).find(|&i| v[i] != v[(i + len - 1) % len]).ok_or_else(|| {
        Error::NonGeneric(format!(
            "constant distance profile on component {}: no critical points",
            cp.component
        ))
    })?;

    // Compress plateaus into runs; the representative vertex of a run is
    // its lowest index.
    let mut runs: Vec<(usize, f64)> = Vec::new();
    let mut i = 0;
    while i < len {
        let idx = (start + i) % len;
        let val = v[idx];
        let mut rep = idx;
        let mut j = i + 1;
        while j < len && v[(start + j) % len] == val {
            rep = rep.min((start + j) % len);
            j += 1;
        }
        runs.push((rep, val));
        i = j;
    }

    let m = runs.len();
    let mut out = Vec::new();
    for k in 0..m {
        let prev = runs[(k + m - 1) % m].1;
        let (rep, cur) = runs[k];
        let next = runs[(k + 1) % m].1;
        let kind = if cur > prev && cur > next {
            Some(CriticalKind::Max)
        } else if cur < prev && cur < next {
            Some(CriticalKind::Min)
        } else {
            None
        };
        if let Some(kind) = kind {
            out.push(CriticalPoint {
                component: cp.component,
                vertex: rep,
                theta: cp.thetas[rep],
                value: cur,
                kind,
            });
        }
    }

    debug_assert!(out.len() >= 2 && out.len() % 2 == 0);
    debug_assert!((0..out.len()).all(|k| out[k].kind != out[(k + 1) % out.len()].kind));
    Ok(out)
}

/// Replaces each critical value by the extremum of the parabola through
/// the squared distances at the critical vertex and its two neighbors.
///
/// Squared distance to a point is smooth along a uniformly sampled arc, so
/// the fit removes the sampling sawtooth that vertex values carry when the
/// true extremum falls between vertices.  Degenerate fits (wrong curvature
/// sign, extremum outside the neighboring vertices) keep the vertex value.
fn refine_component(cp: &ComponentProfile, crits: &mut [CriticalPoint]) {
    let len = cp.values.len();
    for c in crits.iter_mut() {
        let i = c.vertex;
        let fm = cp.values[(i + len - 1) % len].powi(2);
        let f0 = cp.values[i].powi(2);
        let fp = cp.values[(i + 1) % len].powi(2);
        let denom = fm - 2.0 * f0 + fp;
        let curved = match c.kind {
            CriticalKind::Min => denom > 0.0,
            CriticalKind::Max => denom < 0.0,
        };
        if !curved {
            continue;
        }
        let u = (fm - fp) / (2.0 * denom);
        if !u.is_finite() || u.abs() > 1.0 {
            continue;
        }
        let fstar = f0 - (fm - fp) * (fm - fp) / (8.0 * denom);
        if fstar < 0.0 {
            continue;
        }
        c.value = fstar.sqrt();
        let step = wrap_signed(cp.thetas[(i + 1) % len] - cp.thetas[i]);
        c.theta = wrap_angle(c.theta + u * step);
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn elder(a: &CriticalPoint, b: &CriticalPoint) -> bool {
    a.value < b.value || (a.value == b.value && a.vertex < b.vertex)
}

fn make_point(birth: &CriticalPoint, death: &CriticalPoint, degree: u8, kind: PointKind) -> DiagramPoint {
    DiagramPoint {
        birth: birth.value,
        death: death.value,
        degree,
        kind,
        component: birth.component,
        birth_theta: birth.theta,
        death_theta: death.theta,
        birth_vertex: birth.vertex,
        death_vertex: death.vertex,
    }
}

/// Elder-rule pairing on one component's alternating critical sequence.
///
/// Basins (minima) merge at maxima processed in ascending value order;
/// the younger basin dies, producing an ordinary point.  The last merge
/// closes the circle and produces the two extended points instead.
fn pair_component(crits: &[CriticalPoint], points: &mut Vec<DiagramPoint>) {
    let total = crits.len();
    let m = total / 2;
    // Rotate so even slots are minima; maximum i then separates the basins
    // of minima i and i + 1 (cyclically).
    let off = usize::from(crits[0].kind == CriticalKind::Max);
    let min_at = |i: usize| &crits[(2 * i + off) % total];
    let max_at = |i: usize| &crits[(2 * i + 1 + off) % total];

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (max_at(a), max_at(b));
        x.value
            .partial_cmp(&y.value)
            .expect("critical values are finite")
            .then(x.vertex.cmp(&y.vertex))
    });

    let mut parent: Vec<usize> = (0..m).collect();
    for (step, &mi) in order.iter().enumerate() {
        let a = find(&mut parent, mi);
        let b = find(&mut parent, (mi + 1) % m);
        if step + 1 < m {
            // Merging fewer maxima than basins can never close the cycle,
            // so the two sides are still distinct sublevel components.
            debug_assert_ne!(a, b);
            let (dead, alive) = if elder(min_at(a), min_at(b)) { (b, a) } else { (a, b) };
            points.push(make_point(min_at(dead), max_at(mi), 0, PointKind::Ordinary));
            parent[dead] = alive;
        } else {
            // Global maximum: the circle closes up.
            let root = find(&mut parent, a);
            let gmin = min_at(root);
            let gmax = max_at(mi);
            points.push(make_point(gmin, gmax, 0, PointKind::Extended));
            points.push(make_point(gmax, gmin, 1, PointKind::Extended));
        }
    }
}

fn pair_components(
    per_component: Vec<Vec<CriticalPoint>>,
    t: f64,
    observation: Vec3,
) -> PersistenceDiagram {
    let mut points = Vec::new();
    for crits in &per_component {
        pair_component(crits, &mut points);
    }
    let criticals = per_component.into_iter().flatten().collect();
    PersistenceDiagram { t, observation, points, criticals }
}

/// Extended persistence of a circle-valued profile, one diagram for all
/// components, using the critical values as coordinates directly.
pub fn extended_persistence_circle(profile: &DistanceProfile) -> Result<PersistenceDiagram> {
    let crits = critical_points(profile)?;
    Ok(pair_components(crits, 0.0, Vec3::ZERO))
}

/// Persistence diagram of the distance function from the observation point
/// at loop parameter `t`, with parabolic refinement of critical values.
pub fn radial_transform(
    link: &EmbeddedLink,
    obs: &ObservationLoop,
    t: f64,
) -> Result<PersistenceDiagram> {
    let t = wrap_angle(t);
    let p = obs.at(t);
    let profile = distance_profile(link, p)?;
    let mut crits = critical_points(&profile)?;
    for (cp, cc) in profile.components.iter().zip(crits.iter_mut()) {
        refine_component(cp, cc);
    }
    Ok(pair_components(crits, t, p))
}
