//! Reading the braid back out of a closed vineyard.
//!
//! Over one revolution the degree-0 vines trade birth-coordinate ranks a
//! finite number of times.  Each genuine rank exchange is a crossing of the
//! recovered braid: the vine holding the larger death coordinate at the
//! exchange passes over the other.  The extended vines — one per link
//! component, tracking the global minimum and maximum — only osculate the
//! ordinary vines and split off as spurious unknot components, mirroring the
//! surgery the elder rule performs on the swept link.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::braid::{Braid, Permutation};
use crate::embed::{EmbeddedLink, ObservationLoop};
use crate::persist::{radial_transform, PersistenceDiagram, PointKind};
use crate::vineyard::{Vine, Vineyard};
use crate::{Error, Result};

/// Two death coordinates closer than this at a crossing leave over/under
/// undecidable.
pub const DEATH_TOLERANCE: f64 = 1e-9;

/// Bisection iterations refining each crossing time.
const BISECTION_ITERS: usize = 40;

/// Golden-section iterations refining each tangency time.
const TANGENCY_ITERS: usize = 48;

/// One birth-coordinate event between two degree-0 vines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VineCrossing {
    /// Refined event time.
    pub t_star: f64,
    /// Vine on the inner track (larger birth) just before the event.
    pub first: usize,
    /// Vine on the outer track just before the event.
    pub second: usize,
    /// Whether `first` carries the larger death coordinate at `t_star`.
    pub first_over: bool,
    pub same_component: bool,
    /// Births touch and retract without exchanging rank; contributes no
    /// letter to the extracted word.
    pub tangency: bool,
}

/// Braid word recovered from the crossing sequence of a closed vineyard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedBraid {
    /// Word over the surviving strands, positions numbered innermost first
    /// (largest birth = position 1) at t = 0.
    pub word: Braid,
    /// Ids of the extended vines split off as spurious unknots.
    pub spurious_vines: Vec<usize>,
    /// Vine occupying each surviving strand position at t = 0.
    pub strand_vines: Vec<usize>,
    /// Link component swept out by each surviving strand.
    pub strand_components: Vec<usize>,
}

/// Outcome of one round-trip check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

/// Round-trip comparison between an input word and the braid extracted from
/// its sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {}: {}", c.name, c.details)?;
        }
        Ok(())
    }
}

fn vine_value(v: &Vineyard, vine: &Vine, step: usize) -> (f64, f64) {
    let (i, p) = vine.points[step];
    let pt = &v.diagrams[i].points[p];
    (pt.birth, pt.death)
}

/// Vine holding each base-diagram point, so wraparound matches can be
/// followed from one vine to the next.
fn base_owner(v: &Vineyard, vines: &[Vine]) -> Result<Vec<usize>> {
    let mut owner = vec![usize::MAX; v.diagrams[0].points.len()];
    for (idx, vine) in vines.iter().enumerate() {
        let (step, p) = vine.points[0];
        if step != 0 || owner[p] != usize::MAX {
            return Err(Error::Invalid("vines do not start cleanly on the base diagram".into()));
        }
        owner[p] = idx;
    }
    if owner.iter().any(|&x| x == usize::MAX) {
        return Err(Error::Invalid("vines do not cover the base diagram".into()));
    }
    Ok(owner)
}

/// Successor of each vine across the wraparound step.
fn wraparound_successor(v: &Vineyard, vines: &[Vine]) -> Result<Vec<usize>> {
    let owner = base_owner(v, vines)?;
    let last = v.matchings.len() - 1;
    let mut succ = vec![usize::MAX; vines.len()];
    for (idx, vine) in vines.iter().enumerate() {
        let &(i, p) = vine.points.last().expect("vines are nonempty");
        if i != last {
            return Err(Error::Invalid("vine does not span the full revolution".into()));
        }
        let target = v.matchings[last]
            .pairs
            .iter()
            .find(|pair| pair.from == Some(p))
            .and_then(|pair| pair.to)
            .ok_or_else(|| Error::Invalid("closed vine lacks a wraparound match".into()))?;
        succ[idx] = owner[target];
    }
    Ok(succ)
}

struct Candidate {
    /// Grid index opening the bracketing interval.
    step: usize,
    /// Vine index on the inner track at `step`.
    a: usize,
    /// Vine index on the outer track at `step`.
    b: usize,
}

/// The degree-0 point a vine occupies in an off-grid diagram evaluation.
/// The extended point of a component is unique, so extended vines resolve
/// by kind alone; ordinary vines resolve to the ordinary point with the
/// nearest death — deaths separate the two strands of a crossing while
/// their births coincide, and they are stationary over a crossing slot.
fn identify(
    d: &PersistenceDiagram,
    component: usize,
    kind: PointKind,
    death: f64,
) -> Result<(f64, f64)> {
    if kind == PointKind::Extended {
        return d
            .points
            .iter()
            .find(|p| p.degree == 0 && p.component == component && p.kind == PointKind::Extended)
            .map(|p| (p.birth, p.death))
            .ok_or_else(|| {
                Error::Invalid(format!("component {component} lost its extended point"))
            });
    }
    d.points
        .iter()
        .filter(|p| p.degree == 0 && p.component == component && p.kind == PointKind::Ordinary)
        .map(|p| (p.birth, p.death))
        .min_by(|x, y| {
            (x.1 - death).abs().partial_cmp(&(y.1 - death).abs()).expect("finite deaths")
        })
        .ok_or_else(|| Error::Invalid(format!("component {component} vanished from a diagram")))
}

/// Detects every birth-coordinate event of the degree-0 vines: genuine rank
/// transpositions, refined by bisection on the birth difference, plus
/// tangencies where two same-component births osculate.  The vine with the
/// larger death at the refined time is over.
pub fn detect_crossings(
    link: &EmbeddedLink,
    obs: &ObservationLoop,
    v: &Vineyard,
    vines: &[Vine],
) -> Result<Vec<VineCrossing>> {
    detect_with(v, vines, link.amplitudes.track_gap, |t| radial_transform(link, obs, t))
}

fn detect_with<F>(
    v: &Vineyard,
    vines: &[Vine],
    track_gap: f64,
    eval: F,
) -> Result<Vec<VineCrossing>>
where
    F: Fn(f64) -> Result<PersistenceDiagram> + Sync,
{
    if vines.iter().any(|vine| vine.rooted) {
        return Err(Error::Invalid(
            "rooted vines present; close them before extracting crossings".into(),
        ));
    }
    let n = v.grid.len();
    if v.matchings.len() != n {
        return Err(Error::Invalid("vineyard matchings are incomplete".into()));
    }
    let deg0: Vec<usize> =
        (0..vines.len()).filter(|&i| vines[i].degree == 0).collect();
    if deg0.len() < 2 {
        return Ok(Vec::new());
    }
    let succ = wraparound_successor(v, vines)?;

    // Degree-0 vines sorted by birth, innermost (largest) first, per step.
    let orders: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut o = deg0.clone();
            o.sort_by(|&x, &y| {
                vine_value(v, &vines[y], i)
                    .0
                    .partial_cmp(&vine_value(v, &vines[x], i).0)
                    .expect("finite births")
            });
            o
        })
        .collect();

    // Rank transpositions between consecutive steps.  Across the seam the
    // comparison follows each vine to its wraparound successor.
    let mut transpositions: Vec<Candidate> = Vec::new();
    for i in 0..n {
        let next = (i + 1) % n;
        let map = |x: usize| if i == n - 1 { succ[x] } else { x };
        let mut rank = vec![usize::MAX; vines.len()];
        for (r, &x) in orders[next].iter().enumerate() {
            rank[x] = r;
        }
        let mut w = orders[i].clone();
        let mut swapped = true;
        while swapped {
            swapped = false;
            for j in 0..w.len() - 1 {
                if rank[map(w[j])] > rank[map(w[j + 1])] {
                    transpositions.push(Candidate { step: i, a: w[j], b: w[j + 1] });
                    w.swap(j, j + 1);
                    swapped = true;
                }
            }
        }
    }

    // Tangency candidates: maximal runs of steps over which a same-component
    // pair sits adjacent with births closer than half a track gap.  Runs
    // whose endpoints agree on the pair's order never transpose — they
    // osculate.
    let tau = 0.5 * track_gap;
    let mut runs: Vec<(usize, usize, usize, usize)> = Vec::new(); // (s0, s1, a, b)
    let mut open: Vec<(usize, usize, usize, usize)> = Vec::new();
    for i in 0..n {
        let mut here: Vec<(usize, usize)> = Vec::new();
        for j in 0..orders[i].len() - 1 {
            let (x, y) = (orders[i][j], orders[i][j + 1]);
            if vines[x].component != vines[y].component {
                continue;
            }
            let gap = vine_value(v, &vines[x], i).0 - vine_value(v, &vines[y], i).0;
            if gap < tau {
                here.push((x.min(y), x.max(y)));
            }
        }
        let mut still_open = Vec::new();
        for run in open.drain(..) {
            if here.contains(&(run.2, run.3)) {
                still_open.push((run.0, i, run.2, run.3));
            } else {
                runs.push(run);
            }
        }
        for &(a, b) in &here {
            if !still_open.iter().any(|r| r.2 == a && r.3 == b) {
                still_open.push((i, i, a, b));
            }
        }
        open = still_open;
    }
    runs.extend(open);

    let tangencies: Vec<(usize, usize, usize, usize)> = runs
        .into_iter()
        .filter(|&(s0, s1, a, b)| {
            let before = &orders[s0];
            let after = &orders[(s1 + 1) % n];
            let pa = |o: &Vec<usize>, x: usize| o.iter().position(|&y| y == x).unwrap();
            let flipped = (pa(before, a) < pa(before, b)) != (pa(after, a) < pa(after, b));
            !flipped && s1 + 1 < n
        })
        .collect();

    let grid_at = |i: usize| {
        if i == n {
            2.0 * std::f64::consts::PI
        } else {
            v.grid[i]
        }
    };

    let refined: Result<Vec<VineCrossing>> = transpositions
        .par_iter()
        .map(|c| {
            let (t0, t1) = (grid_at(c.step), grid_at(c.step + 1));
            let comp_a = vines[c.a].component;
            let comp_b = vines[c.b].component;
            let kind_a = kind_of(v, &vines[c.a]);
            let kind_b = kind_of(v, &vines[c.b]);
            let (_, da0) = vine_value(v, &vines[c.a], c.step);
            let (_, db0) = vine_value(v, &vines[c.b], c.step);
            let next = (c.step + 1) % n;
            let (a1, b1) = if c.step == n - 1 {
                (succ[c.a], succ[c.b])
            } else {
                (c.a, c.b)
            };
            let (_, da1) = vine_value(v, &vines[a1], next);
            let (_, db1) = vine_value(v, &vines[b1], next);

            let probe = |t: f64| -> Result<((f64, f64), (f64, f64))> {
                let d = eval(t)?;
                let u = (t - t0) / (t1 - t0);
                let ta = da0 + (da1 - da0) * u;
                let tb = db0 + (db1 - db0) * u;
                let pa = identify(&d, comp_a, kind_a, ta)?;
                let pb = identify(&d, comp_b, kind_b, tb)?;
                Ok((pa, pb))
            };

            let (mut lo, mut hi) = (t0, t1);
            for _ in 0..BISECTION_ITERS {
                let mid = 0.5 * (lo + hi);
                let (pa, pb) = probe(mid)?;
                if pa.0 > pb.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_star = 0.5 * (lo + hi);
            let ((_, da), (_, db)) = probe(t_star)?;
            if (da - db).abs() < DEATH_TOLERANCE {
                return Err(Error::NonGeneric(format!(
                    "death coordinates coincide at t = {t_star:.9}; cannot orient the crossing"
                )));
            }
            Ok(VineCrossing {
                t_star,
                first: vines[c.a].id,
                second: vines[c.b].id,
                first_over: da > db,
                same_component: comp_a == comp_b,
                tangency: false,
            })
        })
        .collect();
    let mut events = refined?;

    let refined_tangencies: Result<Vec<VineCrossing>> = tangencies
        .par_iter()
        .map(|&(s0, s1, a, b)| {
            let comp = vines[a].component;
            // The inner vine over the run (order is constant through it).
            let pa = orders[s0].iter().position(|&x| x == a).unwrap();
            let pb = orders[s0].iter().position(|&x| x == b).unwrap();
            let (inner, outer) = if pa < pb { (a, b) } else { (b, a) };
            let elder_is_inner = kind_of(v, &vines[inner]) == PointKind::Extended;
            let ordinary = if elder_is_inner { outer } else { inner };
            let (t0, t1) = (grid_at(s0.saturating_sub(1)), grid_at(s1 + 1));
            let (_, d_ord0) = vine_value(v, &vines[ordinary], s0);

            let gap = |t: f64| -> Result<(f64, f64, f64)> {
                let d = eval(t)?;
                let e = identify(&d, comp, PointKind::Extended, 0.0)?;
                let o = identify(&d, comp, PointKind::Ordinary, d_ord0)?;
                Ok(((e.0 - o.0).abs(), e.1, o.1))
            };

            // Golden-section minimisation of the birth gap.
            let phi = 0.5 * (5.0f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (t0, t1);
            let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
            let (mut f1, mut f2) = (gap(x1)?.0, gap(x2)?.0);
            for _ in 0..TANGENCY_ITERS {
                if f1 <= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - phi * (hi - lo);
                    f1 = gap(x1)?.0;
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + phi * (hi - lo);
                    f2 = gap(x2)?.0;
                }
            }
            let t_star = 0.5 * (lo + hi);
            let (_, de, do_) = gap(t_star)?;
            if (de - do_).abs() < DEATH_TOLERANCE {
                return Err(Error::NonGeneric(format!(
                    "death coordinates coincide at t = {t_star:.9}; cannot orient the tangency"
                )));
            }
            let (d_first, d_second) = if elder_is_inner { (de, do_) } else { (do_, de) };
            Ok(VineCrossing {
                t_star,
                first: vines[inner].id,
                second: vines[outer].id,
                first_over: d_first > d_second,
                same_component: true,
                tangency: true,
            })
        })
        .collect();
    events.extend(refined_tangencies?);

    events.sort_by(|x, y| x.t_star.partial_cmp(&y.t_star).expect("finite times"));
    Ok(events)
}

fn kind_of(v: &Vineyard, vine: &Vine) -> PointKind {
    let (i, p) = vine.points[0];
    v.diagrams[i].points[p].kind
}

/// Reads the braid word off a crossing list.  Strand positions are the
/// degree-0 vines ordered by birth at t = 0, innermost first; extended
/// vines are split off as spurious unknots and every crossing involving one
/// is dropped, renumbering the surviving positions.
pub fn extracted_braid(
    v: &Vineyard,
    vines: &[Vine],
    crossings: &[VineCrossing],
) -> Result<ExtractedBraid> {
    let mut deg0: Vec<usize> =
        (0..vines.len()).filter(|&i| vines[i].degree == 0).collect();
    deg0.sort_by(|&x, &y| {
        vine_value(v, &vines[y], 0)
            .0
            .partial_cmp(&vine_value(v, &vines[x], 0).0)
            .expect("finite births")
    });
    let elder: Vec<bool> = (0..vines.len())
        .map(|i| vines[i].degree == 0 && matches!(kind_of(v, &vines[i]), PointKind::Extended))
        .collect();

    let by_id = |id: usize| -> Result<usize> {
        (0..vines.len())
            .find(|&i| vines[i].id == id)
            .ok_or_else(|| Error::Invalid(format!("crossing references unknown vine {id}")))
    };

    let mut order = deg0.clone();
    let mut letters: Vec<i32> = Vec::new();
    for cr in crossings {
        let a = by_id(cr.first)?;
        let b = by_id(cr.second)?;
        let ja = order
            .iter()
            .position(|&x| x == a)
            .ok_or_else(|| Error::Invalid("crossing involves a non-strand vine".into()))?;
        if ja + 1 >= order.len() || order[ja + 1] != b {
            return Err(Error::Invalid(format!(
                "crossing at t = {:.6} does not involve adjacent strands",
                cr.t_star
            )));
        }
        if cr.tangency {
            continue;
        }
        if !elder[a] && !elder[b] {
            let position =
                order[..=ja].iter().filter(|&&x| !elder[x]).count() as i32;
            letters.push(if cr.first_over { position } else { -position });
        }
        order.swap(ja, ja + 1);
    }

    let strand_vines: Vec<usize> =
        deg0.iter().filter(|&&x| !elder[x]).map(|&x| vines[x].id).collect();
    let strand_components: Vec<usize> =
        deg0.iter().filter(|&&x| !elder[x]).map(|&x| vines[x].component).collect();
    let spurious_vines: Vec<usize> =
        deg0.iter().filter(|&&x| elder[x]).map(|&x| vines[x].id).collect();
    let word = Braid::new(strand_vines.len().max(1), letters)?;
    Ok(ExtractedBraid { word, spurious_vines, strand_vines, strand_components })
}

fn cyclic_rotation_of(a: &[i32], b: &[i32]) -> Option<usize> {
    if a.len() != b.len() {
        return None;
    }
    if a.is_empty() {
        return Some(0);
    }
    (0..a.len()).find(|&r| (0..a.len()).all(|i| a[(r + i) % a.len()] == b[i]))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..k).collect();
    fn heap(items: &mut Vec<usize>, m: usize, out: &mut Vec<Vec<usize>>) {
        if m <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..m {
            heap(items, m - 1, out);
            if m % 2 == 0 {
                items.swap(i, m - 1);
            } else {
                items.swap(0, m - 1);
            }
        }
    }
    heap(&mut items, k, &mut out);
    out
}

/// Whether two linking matrices agree after some relabeling of components
/// (checked by brute force over all permutations; component counts are tiny).
pub fn linking_matches_up_to_relabeling(a: &[Vec<i64>], b: &[Vec<i64>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let k = a.len();
    permutations(k).into_iter().any(|sigma| {
        (0..k).all(|i| (0..k).all(|j| a[i][j] == b[sigma[i]][sigma[j]]))
    })
}

/// Round-trip report comparing the pre-augmentation input word with the
/// extracted braid: component counts (with the spurious unknot tally),
/// permutation cycle type, linking matrix up to component relabeling, and
/// the letter sequence up to cyclic rotation of the closed word.
pub fn verify_against(input: &Braid, extracted: &ExtractedBraid) -> VerificationReport {
    let want = input.closure_info();
    let got = extracted.word.closure_info();
    let mut checks = Vec::new();

    let comp_ok = got.component_count() == want.component_count()
        && extracted.spurious_vines.len() == want.component_count();
    checks.push(CheckResult {
        name: "components".into(),
        passed: comp_ok,
        details: format!(
            "input {} / extracted {} (+{} spurious, expected {})",
            want.component_count(),
            got.component_count(),
            extracted.spurious_vines.len(),
            want.component_count()
        ),
    });

    let cycle_ok = got.cycle_type() == want.cycle_type();
    checks.push(CheckResult {
        name: "cycle type".into(),
        passed: cycle_ok,
        details: format!("input {:?} / extracted {:?}", want.cycle_type(), got.cycle_type()),
    });

    let linking_ok = linking_matches_up_to_relabeling(&want.linking, &got.linking);
    checks.push(CheckResult {
        name: "linking matrix".into(),
        passed: linking_ok,
        details: format!("input {:?} / extracted {:?}", want.linking, got.linking),
    });

    let rotation = if input.strands() == extracted.word.strands() {
        cyclic_rotation_of(input.letters(), extracted.word.letters())
    } else {
        None
    };
    checks.push(CheckResult {
        name: "letters".into(),
        passed: rotation.is_some(),
        details: match rotation {
            Some(r) => format!("match at rotation {r}"),
            None => format!(
                "input [{}] / extracted [{}]",
                input
                    .letters()
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                extracted
                    .word
                    .letters()
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        },
    });

    VerificationReport { checks }
}

/// Position permutation induced by following every degree-0 vine once
/// around the vineyard, in the t = 0 birth ordering (innermost first).
pub fn revolution_permutation(v: &Vineyard, vines: &[Vine]) -> Result<Permutation> {
    let succ = wraparound_successor(v, vines)?;
    let mut deg0: Vec<usize> =
        (0..vines.len()).filter(|&i| vines[i].degree == 0).collect();
    deg0.sort_by(|&x, &y| {
        vine_value(v, &vines[y], 0)
            .0
            .partial_cmp(&vine_value(v, &vines[x], 0).0)
            .expect("finite births")
    });
    let rank_of = |idx: usize| deg0.iter().position(|&x| x == idx);
    let mut map = vec![0usize; deg0.len()];
    for (r, &idx) in deg0.iter().enumerate() {
        let target = succ[idx];
        map[r] = rank_of(target).ok_or_else(|| {
            Error::Invalid("a degree-0 vine wraps onto a higher-degree vine".into())
        })?;
    }
    Permutation::from_map(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{
        apply_crossing_pushes, layout_closed_braid, observation_loop, resolve_amplitudes,
        twist_annulus, AnnularLayout, EmbedParams,
    };
    use crate::persist::{extended_persistence_circle, ComponentProfile, DistanceProfile};
    use crate::vineyard::{sweep, trace_vines};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    struct Swept {
        core: Braid,
        aug: Braid,
        layout: AnnularLayout,
        link: EmbeddedLink,
        obs: ObservationLoop,
        v: Vineyard,
        vines: Vec<Vine>,
    }

    /// Embeds the closure of `word` with its component loops added, sweeps
    /// the observation loop, and traces the vineyard.
    fn swept(word: &str, samples: usize, sweep_len: usize, push_small: Option<f64>) -> Swept {
        let core = Braid::parse(word).unwrap();
        let aug = core.add_component_loops();
        let layout = layout_closed_braid(&aug).unwrap();
        let params =
            EmbedParams { samples_per_revolution: samples, push_small, ..EmbedParams::default() };
        let mut link = twist_annulus(&layout, &params, sweep_len).unwrap();
        apply_crossing_pushes(&mut link, &layout).unwrap();
        let obs = observation_loop(&params);
        let mut v = sweep(&link, &obs, sweep_len).unwrap();
        v.match_all().unwrap();
        let vines = trace_vines(&v).unwrap();
        Swept { core, aug, layout, link, obs, v, vines }
    }

    fn detect(s: &Swept) -> Vec<VineCrossing> {
        detect_crossings(&s.link, &s.obs, &s.v, &s.vines).unwrap()
    }

    /// One event per scheduled crossing, each refined into its own angular
    /// slot.
    fn assert_localized(s: &Swept, events: &[VineCrossing]) {
        assert_eq!(events.len(), s.layout.crossings.len());
        for (j, e) in events.iter().enumerate() {
            let (lo, hi) = s.layout.slot(j);
            assert!(
                lo <= e.t_star && e.t_star <= hi,
                "event {j} at t = {} outside its slot [{lo}, {hi}]",
                e.t_star
            );
        }
    }

    /// The revolution permutation a sweep of `word` should induce: surviving
    /// positions permute as the word's strands, extended positions stay put.
    fn expected_revolution(s: &Swept, word: &Braid) -> Permutation {
        let (v, vines) = (&s.v, &s.vines);
        let mut deg0: Vec<usize> = (0..vines.len()).filter(|&i| vines[i].degree == 0).collect();
        deg0.sort_by(|&x, &y| {
            vine_value(v, &vines[y], 0).0.partial_cmp(&vine_value(v, &vines[x], 0).0).unwrap()
        });
        let ordinary: Vec<usize> = (0..deg0.len())
            .filter(|&r| kind_of(v, &vines[deg0[r]]) == PointKind::Ordinary)
            .collect();
        assert_eq!(ordinary.len(), word.strands());
        let wmap = word.underlying_permutation();
        let mut map: Vec<usize> = (0..deg0.len()).collect();
        for (i, &r) in ordinary.iter().enumerate() {
            map[r] = ordinary[wmap.apply(i)];
        }
        Permutation::from_map(map).unwrap()
    }

    #[test]
    fn round_trip_recovers_a_positive_word() {
        let s = swept("3: 1 2", 1024, 2000, None);
        let events = detect(&s);
        assert_eq!(events.len(), s.aug.letters().len());
        assert_localized(&s, &events);
        let flags: Vec<bool> = events.iter().map(|e| e.tangency).collect();
        assert_eq!(flags, vec![false, false, true]);
        assert!(events.iter().all(|e| e.same_component));
        assert!(events[0].first_over && events[1].first_over);

        let ex = extracted_braid(&s.v, &s.vines, &events).unwrap();
        assert_eq!(ex.word, Braid::parse("3: 1 2").unwrap());
        assert_eq!(ex.spurious_vines.len(), 1);
        assert_eq!(ex.strand_components, vec![0, 0, 0]);

        let report = verify_against(&s.core, &ex);
        assert!(report.passed(), "{report}");

        let rev = revolution_permutation(&s.v, &s.vines).unwrap();
        assert_eq!(rev, expected_revolution(&s, &s.core));
    }

    #[test]
    fn round_trip_recovers_a_negative_word() {
        let s = swept("3: -1 -2", 1024, 2000, None);
        let events = detect(&s);
        assert_eq!(events.len(), s.aug.letters().len());
        assert_localized(&s, &events);
        assert!(!events[0].first_over && !events[1].first_over);
        assert!(events[2].tangency);

        let ex = extracted_braid(&s.v, &s.vines, &events).unwrap();
        assert_eq!(ex.word, Braid::parse("3: -1 -2").unwrap());
        assert!(verify_against(&s.core, &ex).passed());
    }

    #[test]
    fn split_closure_round_trip_counts_spurious_unknots() {
        let s = swept("3: 1 1 1", 1024, 5500, None);
        let events = detect(&s);
        assert_eq!(events.len(), s.aug.letters().len());
        assert_localized(&s, &events);
        let tangent: Vec<usize> = (0..events.len()).filter(|&i| events[i].tangency).collect();
        assert_eq!(tangent, vec![4, 7]);
        let crossing_comps: Vec<bool> = events.iter().map(|e| e.same_component).collect();
        assert_eq!(
            crossing_comps,
            vec![true, true, true, false, true, false, false, true, false]
        );

        let ex = extracted_braid(&s.v, &s.vines, &events).unwrap();
        assert_eq!(ex.word, Braid::parse("3: 1 1 1").unwrap());
        assert_eq!(ex.spurious_vines.len(), 2);
        assert_eq!(ex.strand_components, vec![0, 0, 1]);

        let report = verify_against(&s.core, &ex);
        assert!(report.passed(), "{report}");

        let rev = revolution_permutation(&s.v, &s.vines).unwrap();
        assert_eq!(rev, expected_revolution(&s, &s.core));
    }

    #[test]
    fn single_component_unknot_extracts_an_empty_word() {
        let s = swept("1:", 512, 2000, None);
        let events = detect(&s);
        assert_eq!(events.len(), 1);
        assert!(events[0].tangency);
        assert_localized(&s, &events);

        let ex = extracted_braid(&s.v, &s.vines, &events).unwrap();
        assert_eq!(ex.word.strands(), 1);
        assert!(ex.word.letters().is_empty());
        assert_eq!(ex.spurious_vines.len(), 1);
        assert_eq!(ex.strand_vines.len(), 1);
        assert!(verify_against(&s.core, &ex).passed());

        let rev = revolution_permutation(&s.v, &s.vines).unwrap();
        assert_eq!(rev, Permutation::identity(2));
    }

    /// Flipping the sign of the small crossing push swaps which strand ends
    /// up radially further at every crossing, so extraction must report the
    /// mirrored word and the letter check must flag it.
    #[test]
    fn flipped_small_push_mirrors_same_component_crossings() {
        let base = resolve_amplitudes(3, 4, &EmbedParams::default(), 2000).unwrap();
        let s = swept("3: 1 2", 1024, 2000, Some(-base.push_small));
        let events = detect(&s);
        assert_eq!(events.len(), 3);
        assert!(!events[0].first_over && !events[1].first_over);

        let ex = extracted_braid(&s.v, &s.vines, &events).unwrap();
        assert_eq!(ex.word, Braid::parse("3: -1 -2").unwrap());

        let report = verify_against(&s.core, &ex);
        assert!(!report.passed());
        let by = |name: &str| report.checks.iter().find(|c| c.name == name).unwrap().passed;
        assert!(by("components"));
        assert!(by("cycle type"));
        assert!(!by("letters"));
    }

    fn diagram_from_values(values: Vec<f64>) -> PersistenceDiagram {
        let profile =
            DistanceProfile { components: vec![ComponentProfile::from_values(0, values)] };
        extended_persistence_circle(&profile).unwrap()
    }

    fn synthetic(diagrams: Vec<PersistenceDiagram>) -> (Vineyard, Vec<Vine>) {
        let n = diagrams.len();
        let grid = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let mut v = Vineyard { grid, diagrams, matchings: Vec::new() };
        v.match_all().unwrap();
        let vines = trace_vines(&v).unwrap();
        (v, vines)
    }

    #[test]
    fn constant_family_has_no_crossings() {
        let (v, vines) = synthetic(vec![diagram_from_values(vec![0.0, 3.0, 1.0, 2.0]); 32]);
        let events = detect_with(&v, &vines, 1e-3, |_| {
            Err(Error::Invalid("no evaluation expected".into()))
        })
        .unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn single_strand_has_no_crossings() {
        let (v, vines) = synthetic(vec![diagram_from_values(vec![0.0, 3.0, 1.0]); 16]);
        let events = detect_with(&v, &vines, 1e-3, |_| {
            Err(Error::Invalid("no evaluation expected".into()))
        })
        .unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn rooted_vines_are_rejected() {
        let (v, mut vines) = synthetic(vec![diagram_from_values(vec![0.0, 3.0, 1.0, 2.0]); 16]);
        vines[0].rooted = true;
        let err = detect_with(&v, &vines, 1e-3, |_| Err(Error::Invalid("unused".into())));
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    /// Two minima trading birth ranks while their deaths agree to within the
    /// tolerance: the crossing cannot be oriented and must be reported as
    /// such.  Each minimum merges through its own saddle (so the deaths stay
    /// attached while the births cross), and the grid family keeps those
    /// saddles apart so the vines remain trackable; only the continuous
    /// refinement sees them collide.
    #[test]
    fn coincident_deaths_are_non_generic() {
        let profile = |t: f64, second_saddle: f64| {
            let s = 0.1 * t.cos();
            diagram_from_values(vec![0.0, 4.0, 1.0 - s, 3.0, 0.5, second_saddle, 1.0 + s, 4.1])
        };
        let n = 64;
        let diagrams: Vec<_> =
            (0..n).map(|i| profile(2.0 * PI * i as f64 / n as f64, 3.05)).collect();
        let (v, vines) = synthetic(diagrams);
        let err = detect_with(&v, &vines, 1e-6, |t| Ok(profile(t, 3.0 + 1e-10)));
        assert!(matches!(err, Err(Error::NonGeneric(_))));
    }

    #[test]
    fn permutation_enumeration_is_complete() {
        let perms = permutations(4);
        assert_eq!(perms.len(), 24);
        let mut sorted = perms.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn rotation_detection_examples() {
        assert_eq!(cyclic_rotation_of(&[1, 2, 1], &[2, 1, 1]), Some(1));
        assert_eq!(cyclic_rotation_of(&[1, 2], &[-1, -2]), None);
        assert_eq!(cyclic_rotation_of(&[], &[]), Some(0));
        assert_eq!(cyclic_rotation_of(&[1], &[1, 1]), None);
    }

    #[test]
    fn linking_relabeling_examples() {
        let a = vec![vec![3, 0], vec![0, 0]];
        let b = vec![vec![0, 0], vec![0, 3]];
        assert!(linking_matches_up_to_relabeling(&a, &b));
        let c = vec![vec![0, 1], vec![1, 0]];
        let d = vec![vec![0, 2], vec![2, 0]];
        assert!(!linking_matches_up_to_relabeling(&c, &d));
    }

    proptest! {
        #[test]
        fn rotations_are_recognized(
            letters in proptest::collection::vec(
                (-4i32..=4).prop_filter("nonzero", |&l| l != 0),
                1..12,
            ),
            r in 0usize..12,
        ) {
            let k = letters.len();
            let rotated: Vec<i32> = (0..k).map(|i| letters[(r % k + i) % k]).collect();
            prop_assert!(cyclic_rotation_of(&letters, &rotated).is_some());
        }

        #[test]
        fn relabeled_linking_matrices_match(
            upper in proptest::collection::vec(-3i64..=3, 10),
            sigma_seed in 0usize..24,
        ) {
            let k = 4;
            let mut a = vec![vec![0i64; k]; k];
            let mut it = upper.iter();
            for i in 0..k {
                for j in i..k {
                    let x = *it.next().unwrap();
                    a[i][j] = x;
                    a[j][i] = x;
                }
            }
            let sigma = &permutations(k)[sigma_seed % 24];
            let mut b = vec![vec![0i64; k]; k];
            for i in 0..k {
                for j in 0..k {
                    b[sigma[i]][sigma[j]] = a[i][j];
                }
            }
            prop_assert!(linking_matches_up_to_relabeling(&a, &b));
        }
    }
}
