//! Sweeping the observation loop into a closed vineyard.
//!
//! Diagrams are computed independently per grid parameter, consecutive
//! diagrams (including the wraparound pair) are joined by an exact
//! minimum-cost assignment, and vines are the resulting point
//! trajectories.  Following a vine through one full revolution induces a
//! permutation of the base diagram's points; its order is the monodromy
//! of the family.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddedLink, ObservationLoop};
use crate::persist::{radial_transform, DiagramPoint, PersistenceDiagram};
use crate::{Error, Result};

/// One matched pair of points between consecutive diagrams.  `None` on
/// either side stands for the diagonal: points may appear from or retire
/// to zero persistence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub cost: f64,
}

/// Optimal assignment between two consecutive diagrams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Grid index of the source diagram; the target is the next index,
    /// cyclically.
    pub step: usize,
    pub pairs: Vec<MatchedPair>,
    pub max_cost: f64,
    pub total_cost: f64,
    /// Half the smallest point gap seen in either diagram; matched costs
    /// stay strictly below this bound.
    pub separation: f64,
}

/// Diagrams over a uniform closed grid plus the consecutive matchings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vineyard {
    pub grid: Vec<f64>,
    pub diagrams: Vec<PersistenceDiagram>,
    pub matchings: Vec<Matching>,
}

/// One vine: a trajectory of diagram points, one per grid step for a full
/// revolution, or an open trajectory touching the diagonal (rooted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vine {
    pub id: usize,
    pub degree: u8,
    pub component: usize,
    pub closed: bool,
    pub rooted: bool,
    /// Number of revolutions after which the vine's trajectory returns to
    /// its starting point (0 for rooted vines).
    pub order: usize,
    /// (grid index, point index) along the trajectory.
    pub points: Vec<(usize, usize)>,
}

/// Permutation induced on the base diagram by one revolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub permutation: Vec<usize>,
    pub order: usize,
    /// Cycle length of each vine, indexed by vine id.
    pub vine_orders: Vec<usize>,
    pub rooted: bool,
}

fn linf(a: &DiagramPoint, b: &DiagramPoint) -> f64 {
    (a.birth - b.birth).abs().max((a.death - b.death).abs())
}

fn diagonal_gap(p: &DiagramPoint) -> f64 {
    (p.death - p.birth).abs() / 2.0
}

/// Computes diagrams at `n` uniform loop parameters.  Matchings are left
/// empty; see [`Vineyard::match_all`].
pub fn sweep(link: &EmbeddedLink, obs: &ObservationLoop, n: usize) -> Result<Vineyard> {
    if n < 16 {
        return Err(Error::Invalid(format!("sweep needs at least 16 samples, got {n}")));
    }
    let grid: Vec<f64> = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
    let results: Vec<Result<PersistenceDiagram>> = grid
        .par_iter()
        .map(|&t| {
            radial_transform(link, obs, t).map_err(|e| match e {
                Error::NonGeneric(m) => Error::NonGeneric(format!("t = {t:.6}: {m}")),
                other => other,
            })
        })
        .collect();
    let diagrams = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Vineyard { grid, diagrams, matchings: Vec::new() })
}

impl Vineyard {
    /// Matches every consecutive diagram pair, including the wraparound
    /// step closing the loop.
    pub fn match_all(&mut self) -> Result<()> {
        let n = self.diagrams.len();
        let results: Vec<Result<Matching>> = (0..n)
            .into_par_iter()
            .map(|i| {
                match_consecutive(&self.diagrams[i], &self.diagrams[(i + 1) % n]).map(|mut m| {
                    m.step = i;
                    m
                })
            })
            .collect();
        self.matchings = results.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(())
    }
}

fn block_keys(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Vec<(usize, u8)> {
    let mut keys: Vec<(usize, u8)> = a
        .points
        .iter()
        .chain(b.points.iter())
        .map(|p| (p.component, p.degree))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

fn block_indices(d: &PersistenceDiagram, key: (usize, u8)) -> Vec<usize> {
    d.points
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.component, p.degree) == key)
        .map(|(i, _)| i)
        .collect()
}

/// Smallest separation within one block: point-to-point gaps and twice the
/// diagonal clearance.
fn block_gap(d: &PersistenceDiagram, idx: &[usize]) -> f64 {
    let mut gap = f64::INFINITY;
    for (k, &i) in idx.iter().enumerate() {
        gap = gap.min(2.0 * diagonal_gap(&d.points[i]));
        for &j in &idx[k + 1..] {
            gap = gap.min(linf(&d.points[i], &d.points[j]));
        }
    }
    gap
}

/// Minimum-cost perfect assignment on a square cost matrix, O(n^3) with
/// row/column potentials.
fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n + 1];
    // p[j] = row currently assigned to column j; n is the virtual column.
    let mut p = vec![n; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    if p[j] != n {
                        u[p[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == n {
                break;
            }
        }
        while j0 != n {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        }
    }
    let mut rows = vec![0usize; n];
    for j in 0..n {
        if p[j] != n {
            rows[p[j]] = j;
        }
    }
    rows
}

/// Augmented cost matrix for one block: real points of `a` and diagonal
/// slots as rows, real points of `b` and diagonal slots as columns.
fn augmented_costs(
    a: &PersistenceDiagram,
    ia: &[usize],
    b: &PersistenceDiagram,
    ib: &[usize],
) -> Vec<Vec<f64>> {
    let (na, nb) = (ia.len(), ib.len());
    let size = na + nb;
    let mut cost = vec![vec![0.0; size]; size];
    for (r, &i) in ia.iter().enumerate() {
        let pa = &a.points[i];
        for (c, &j) in ib.iter().enumerate() {
            cost[r][c] = linf(pa, &b.points[j]);
        }
        for c in nb..size {
            cost[r][c] = diagonal_gap(pa);
        }
    }
    for r in na..size {
        for (c, &j) in ib.iter().enumerate() {
            cost[r][c] = diagonal_gap(&b.points[j]);
        }
    }
    cost
}

/// Optimal assignment between two diagrams, block by block (component and
/// degree never mix), with the separation condition enforced: the largest
/// matched cost in a block must stay below half the smallest gap within
/// that block on either side, otherwise the sweep grid cannot certify the
/// vine correspondence and a finer grid is requested.
pub fn match_consecutive(a: &PersistenceDiagram, b: &PersistenceDiagram) -> Result<Matching> {
    let mut pairs = Vec::new();
    let mut max_cost: f64 = 0.0;
    let mut total_cost = 0.0;
    let mut separation = f64::INFINITY;

    for key in block_keys(a, b) {
        let ia = block_indices(a, key);
        let ib = block_indices(b, key);
        let (na, nb) = (ia.len(), ib.len());
        if na == 0 && nb == 0 {
            continue;
        }
        let cost = augmented_costs(a, &ia, b, &ib);
        let rows = assignment(&cost);

        let threshold = 0.5 * block_gap(a, &ia).min(block_gap(b, &ib));
        separation = separation.min(threshold);

        let mut block_max: f64 = 0.0;
        for (r, &c) in rows.iter().enumerate() {
            let pair = match (r < na, c < nb) {
                (true, true) => MatchedPair { from: Some(ia[r]), to: Some(ib[c]), cost: cost[r][c] },
                (true, false) => MatchedPair { from: Some(ia[r]), to: None, cost: cost[r][c] },
                (false, true) => MatchedPair { from: None, to: Some(ib[c]), cost: cost[r][c] },
                (false, false) => continue,
            };
            block_max = block_max.max(pair.cost);
            total_cost += pair.cost;
            pairs.push(pair);
        }
        if block_max >= threshold {
            return Err(resolution_error(a, b, block_max, threshold));
        }
        max_cost = max_cost.max(block_max);
    }

    pairs.sort_by_key(|p| (p.from, p.to));
    Ok(Matching { step: 0, pairs, max_cost, total_cost, separation })
}

fn resolution_error(a: &PersistenceDiagram, b: &PersistenceDiagram, cost: f64, threshold: f64) -> Error {
    let dt = (b.t - a.t).rem_euclid(2.0 * PI);
    let implied = if dt > 1e-12 { (2.0 * PI / dt).round() as usize } else { 0 };
    let suggested = if implied == 0 {
        2000
    } else {
        let factor = (cost / (0.9 * threshold)).max(1.5);
        let raw = (implied as f64 * factor).ceil() as usize;
        raw.div_ceil(500).max(1) * 500
    };
    Error::Resolution {
        details: format!(
            "matched cost {cost:.3e} at t = {:.4} reaches the half-gap bound {threshold:.3e}",
            a.t
        ),
        suggested,
    }
}

/// Exact bottleneck distance between two diagrams, taken blockwise over
/// (component, degree); classes never migrate between blocks, so the
/// blockwise maximum is the distance of the family.
pub fn bottleneck_distance(a: &PersistenceDiagram, b: &PersistenceDiagram) -> f64 {
    let mut worst: f64 = 0.0;
    for key in block_keys(a, b) {
        let ia = block_indices(a, key);
        let ib = block_indices(b, key);
        worst = worst.max(bottleneck_block(a, &ia, b, &ib));
    }
    worst
}

fn bottleneck_block(a: &PersistenceDiagram, ia: &[usize], b: &PersistenceDiagram, ib: &[usize]) -> f64 {
    let cost = augmented_costs(a, ia, b, ib);
    let size = cost.len();
    if size == 0 {
        return 0.0;
    }
    let mut candidates: Vec<f64> = cost.iter().flatten().copied().collect();
    candidates.push(0.0);
    candidates.sort_by(|x, y| x.partial_cmp(y).expect("finite costs"));
    candidates.dedup();

    let feasible = |theta: f64| -> bool {
        let adjacency: Vec<Vec<usize>> = (0..size)
            .map(|r| (0..size).filter(|&c| cost[r][c] <= theta).collect())
            .collect();
        let mut matched = vec![usize::MAX; size];
        fn augment(r: usize, adjacency: &[Vec<usize>], seen: &mut [bool], matched: &mut [usize]) -> bool {
            for &c in &adjacency[r] {
                if !seen[c] {
                    seen[c] = true;
                    if matched[c] == usize::MAX
                        || augment(matched[c], adjacency, seen, matched)
                    {
                        matched[c] = r;
                        return true;
                    }
                }
            }
            false
        }
        (0..size).all(|r| {
            let mut seen = vec![false; size];
            augment(r, &adjacency, &mut seen, &mut matched)
        })
    };

    let mut lo = 0;
    let mut hi = candidates.len() - 1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NextStep {
    To(usize),
    Diagonal,
}

/// Traces vines through all matchings.  Closed vines are cut at the base
/// diagram into one-revolution trajectories (one per base point); rooted
/// trajectories, born and retired on the diagonal, are traced whole.
pub fn trace_vines(v: &Vineyard) -> Result<Vec<Vine>> {
    let n = v.grid.len();
    if v.matchings.len() != n {
        return Err(Error::Invalid(
            "vineyard matchings are incomplete; run match_all before tracing".into(),
        ));
    }

    let mut next: Vec<Vec<NextStep>> = v
        .diagrams
        .iter()
        .map(|d| vec![NextStep::Diagonal; d.points.len()])
        .collect();
    let mut born: Vec<(usize, usize)> = Vec::new();
    for (i, m) in v.matchings.iter().enumerate() {
        for pair in &m.pairs {
            match (pair.from, pair.to) {
                (Some(p), Some(q)) => next[i][p] = NextStep::To(q),
                (Some(p), None) => next[i][p] = NextStep::Diagonal,
                (None, Some(q)) => born.push(((i + 1) % n, q)),
                (None, None) => {}
            }
        }
    }

    let mut visited: Vec<Vec<bool>> = v.diagrams.iter().map(|d| vec![false; d.points.len()]).collect();
    let mut rooted_vines: Vec<Vec<(usize, usize)>> = Vec::new();
    for &(layer, point) in &born {
        let mut trail = Vec::new();
        let (mut i, mut p) = (layer, point);
        loop {
            if visited[i][p] {
                return Err(Error::Invalid(
                    "matchings assign a diagram point to two vines".into(),
                ));
            }
            visited[i][p] = true;
            trail.push((i, p));
            match next[i][p] {
                NextStep::To(q) => {
                    i = (i + 1) % n;
                    p = q;
                }
                NextStep::Diagonal => break,
            }
        }
        rooted_vines.push(trail);
    }

    let mut vines = Vec::new();
    let base_points = v.diagrams[0].points.len();
    for p0 in 0..base_points {
        if visited[0][p0] {
            continue;
        }
        let mut trail = Vec::with_capacity(n);
        let (mut i, mut p) = (0, p0);
        for _ in 0..n {
            visited[i][p] = true;
            trail.push((i, p));
            match next[i][p] {
                NextStep::To(q) => {
                    i = (i + 1) % n;
                    p = q;
                }
                NextStep::Diagonal => {
                    return Err(Error::Invalid(
                        "a trajectory without a diagonal birth retired to the diagonal".into(),
                    ));
                }
            }
        }
        let sample = v.diagrams[0].points[p0];
        vines.push(Vine {
            id: vines.len(),
            degree: sample.degree,
            component: sample.component,
            closed: true,
            rooted: false,
            order: 0,
            points: trail,
        });
    }

    if visited.iter().any(|layer| layer.iter().any(|&b| !b)) {
        return Err(Error::Invalid(
            "matchings do not partition the diagrams into vines".into(),
        ));
    }

    // Cycle lengths under the revolution map: vine -> vine whose base
    // point its wraparound target is.
    let start_of: HashMap<usize, usize> =
        vines.iter().map(|vine| (vine.points[0].1, vine.id)).collect();
    let successor: Vec<usize> = vines
        .iter()
        .map(|vine| {
            let &(i, p) = vine.points.last().expect("vines are nonempty");
            match next[i][p] {
                NextStep::To(q) => start_of[&q],
                NextStep::Diagonal => unreachable!("closed vines never retire"),
            }
        })
        .collect();
    let mut orders = vec![0usize; vines.len()];
    for start in 0..vines.len() {
        if orders[start] != 0 {
            continue;
        }
        let mut cycle = vec![start];
        let mut cur = successor[start];
        while cur != start {
            cycle.push(cur);
            cur = successor[cur];
        }
        for &id in &cycle {
            orders[id] = cycle.len();
        }
    }
    for vine in &mut vines {
        vine.order = orders[vine.id];
    }

    for trail in rooted_vines {
        let (i, p) = trail[0];
        let sample = v.diagrams[i].points[p];
        vines.push(Vine {
            id: vines.len(),
            degree: sample.degree,
            component: sample.component,
            closed: false,
            rooted: true,
            order: 0,
            points: trail,
        });
    }

    Ok(vines)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        a.max(b).max(1)
    } else {
        a / gcd(a, b) * b
    }
}

/// The permutation induced on the base diagram's points by one revolution
/// and its order.  Rooted vines have no revolution map; close them with
/// [`complete_rooted_vine`] before asking for monodromy.
pub fn monodromy(v: &Vineyard, vines: &[Vine]) -> Result<MonodromyResult> {
    if vines.iter().any(|vine| vine.rooted) {
        return Err(Error::Invalid(
            "rooted vines present; close them with the diagonal completion first".into(),
        ));
    }
    let base_points = v.diagrams[0].points.len();
    let mut permutation = vec![usize::MAX; base_points];
    for vine in vines {
        let (_, start) = vine.points[0];
        let &(i, p) = vine.points.last().expect("vines are nonempty");
        let target = v.matchings[i]
            .pairs
            .iter()
            .find(|pair| pair.from == Some(p))
            .and_then(|pair| pair.to)
            .ok_or_else(|| Error::Invalid("closed vine lacks a wraparound match".into()))?;
        permutation[start] = target;
    }
    if permutation.iter().any(|&x| x == usize::MAX) {
        return Err(Error::Invalid("vines do not cover the base diagram".into()));
    }
    let order = vines.iter().map(|vine| vine.order).fold(1, lcm);
    Ok(MonodromyResult {
        permutation,
        order,
        vine_orders: vines.iter().map(|vine| vine.order).collect(),
        rooted: false,
    })
}

/// Diagonal completion of a rooted vine: the affine path on the diagonal
/// closing the trajectory after `k` revolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalCompletion {
    /// Smallest revolution count with `t_max < 2 pi k`.
    pub k: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub v_min: (f64, f64),
    pub v_max: (f64, f64),
}

impl DiagonalCompletion {
    /// The completing path at parameter `t` in `[t_max, t_min + 2 pi k]`:
    /// an affine blend from `v_max` down to `v_min`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let end = self.t_min + 2.0 * PI * self.k as f64;
        let span = end - self.t_max;
        let s = if span > 0.0 { ((t - self.t_max) / span).clamp(0.0, 1.0) } else { 1.0 };
        (
            self.v_max.0 + s * (self.v_min.0 - self.v_max.0),
            self.v_max.1 + s * (self.v_min.1 - self.v_max.1),
        )
    }
}

/// Closes a rooted vine spanning `(t_min, t_max)` whose diagonal limit
/// points are `v_min` and `v_max`.
pub fn complete_rooted_vine(
    t_min: f64,
    t_max: f64,
    v_min: (f64, f64),
    v_max: (f64, f64),
) -> Result<DiagonalCompletion> {
    if !(t_min.is_finite() && t_max.is_finite() && t_max > t_min) {
        return Err(Error::Invalid(format!(
            "rooted vine span ({t_min}, {t_max}) is not an increasing finite interval"
        )));
    }
    for value in [v_min.0, v_min.1, v_max.0, v_max.1] {
        if !value.is_finite() {
            return Err(Error::Invalid("rooted vine is missing its diagonal limit points".into()));
        }
    }
    let k = (t_max / (2.0 * PI)).floor() as usize + 1;
    Ok(DiagonalCompletion { k, t_min, t_max, v_min, v_max })
}
