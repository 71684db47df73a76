//! Geometric realization of a closed braid inside a thickened, twisted annulus.
//!
//! The closure of a braid word is laid out as `n` windings around a planar
//! annulus.  Crossings are scheduled into disjoint angular slots on the near
//! half of the circle (angles in `(0, pi)`); the far half carries a smooth
//! "dip" below the annulus plane so that an observation loop running along
//! the annulus rim sees every winding twice per revolution: once nearby and
//! once across the hole.  Radial track gaps, dip depths and per-crossing
//! rotational pushes are sized so that the distance profile seen from the
//! loop separates all windings at every loop position.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::braid::Braid;
use crate::geom::Vec3;
use crate::{Error, Result};

/// Geometric parameters for the annular embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    /// Radius of the annulus rim (the hinge circle).
    pub radius: f64,
    /// Half-thickness of the annular band; all strand material stays within
    /// this distance of the reference surface.
    pub eps: f64,
    /// Clearance between the observation loop and the annulus rim.
    pub eta: f64,
    /// Budget for the angle between strand segments and the azimuthal
    /// direction, in radians.
    pub theta_b: f64,
    /// Budget for the discrete turning angle at each polyline vertex,
    /// in radians.
    pub delta: f64,
    /// Number of polyline vertices per winding.
    pub samples_per_revolution: usize,
    /// Override for the large rotational push, in radians.  When `None` the
    /// push is sized from `delta` and the slot width.
    pub push_big: Option<f64>,
    /// Override for the small rotational push, in radians.
    pub push_small: Option<f64>,
    /// Seed for the per-winding rotational jitter.
    pub seed: u64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        EmbedParams {
            radius: 10.0,
            eps: 0.05,
            eta: 0.1,
            theta_b: 0.02,
            delta: 0.002,
            samples_per_revolution: 4096,
            push_big: None,
            push_small: None,
            seed: 42,
        }
    }
}

impl EmbedParams {
    /// Radius of the observation loop.
    pub fn loop_radius(&self) -> f64 {
        self.radius + self.eta
    }

    /// Checks basic consistency of the parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Invalid("radius must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Invalid("eps must be positive".into()));
        }
        if !(self.eta > self.eps) {
            return Err(Error::Invalid(
                "eta must exceed eps so the loop clears the band".into(),
            ));
        }
        if self.eta > self.radius / 10.0 {
            return Err(Error::Invalid("eta must be small relative to radius".into()));
        }
        if !(self.theta_b > 0.0 && self.theta_b < 0.5) {
            return Err(Error::Invalid("theta_b must lie in (0, 0.5)".into()));
        }
        if !(self.delta > 0.0 && self.delta < 0.1) {
            return Err(Error::Invalid("delta must lie in (0, 0.1)".into()));
        }
        if self.samples_per_revolution < 64 {
            return Err(Error::Invalid("samples_per_revolution must be at least 64".into()));
        }
        if let (Some(b), Some(s)) = (self.push_big, self.push_small) {
            if !(s > 0.0 && s < b) {
                return Err(Error::Invalid("push_small must lie in (0, push_big)".into()));
            }
        }
        let r = self.radius;
        let lhs = 6.0 * self.eps / r + self.delta * (r + self.eta);
        let rhs = (r - self.eps) * (r - self.eta) / (r * r);
        if lhs > rhs {
            return Err(Error::Invalid(
                "eps, eta and delta are too large for the radius; shrink the band".into(),
            ));
        }
        Ok(())
    }
}

/// One scheduled crossing: a braid letter assigned to an angular slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledCrossing {
    /// Index of the letter in the braid word (0-based).
    pub letter_index: usize,
    /// Angle at which the slot begins.
    pub slot_start: f64,
    /// Track position of the letter: the crossing swaps tracks
    /// `position` and `position + 1` (1-based).
    pub position: usize,
    /// Sign of the letter; positive means the inner strand passes over.
    pub sign: i8,
    /// Winding occupying track `position` just before the slot.
    pub inner_winding: usize,
    /// Winding occupying track `position + 1` just before the slot.
    pub outer_winding: usize,
    /// Whether both windings belong to the same closure component.
    pub same_component: bool,
    /// Whether the outer winding is its component's outermost winding at
    /// this slot.  Such crossings exchange the component's first-born
    /// distance minimum and receive no rotational push.
    pub interchange: bool,
}

/// Angular schedule for a closed braid: one slot per letter on the near
/// half-circle, a crossing-free arc on the far half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnularLayout {
    /// Number of windings (braid strands).
    pub strands: usize,
    /// Width of each crossing slot.
    pub slot_width: f64,
    /// Scheduled crossings in letter order.
    pub crossings: Vec<ScheduledCrossing>,
    /// Winding labels of each closure component, in traversal order:
    /// winding `w` is followed by the winding starting where `w` ends.
    pub components: Vec<Vec<usize>>,
    /// Component index of each winding (0-based, indexed by `winding - 1`).
    pub component_of: Vec<usize>,
    /// `tracks_before[j][w - 1]` is the track of winding `w` before letter
    /// `j` (0-based); row `letters.len()` holds the final tracks.
    pub tracks_before: Vec<Vec<usize>>,
    /// Windings that were introduced as component loops, if any.
    pub loop_windings: Vec<usize>,
}

impl AnnularLayout {
    /// Angular interval of the slot for letter `j` (0-based).
    pub fn slot(&self, j: usize) -> (f64, f64) {
        let s = self.crossings[j].slot_start;
        (s, s + self.slot_width)
    }

    /// Angular interval on the far half-circle during which the push level
    /// for letter `j` is held constant.
    pub fn push_zone(&self, j: usize) -> (f64, f64) {
        let s = self.crossings[j].slot_start + PI;
        (s - self.slot_width, s + 2.0 * self.slot_width)
    }

    /// The crossing-free arc on the far half-circle.
    pub fn quiet_arc(&self) -> (f64, f64) {
        (PI + self.slot_width, 2.0 * PI - self.slot_width)
    }
}

/// Schedules the letters of `braid` into angular slots and records the
/// track occupancy needed by the twisting and push stages.
pub fn layout_closed_braid(braid: &Braid) -> Result<AnnularLayout> {
    let n = braid.strands();
    let letters = braid.letters();
    let c = letters.len();
    let slot_width = PI / (8.0 * (c as f64 + 1.0));

    // Track occupancy before each letter.
    let mut tracks: Vec<usize> = (1..=n).collect(); // tracks[w-1] = track of winding w
    let mut tracks_before = Vec::with_capacity(c + 1);
    tracks_before.push(tracks.clone());
    let records = braid.crossing_records();

    let closure = braid.closure_info();
    let perm = braid.underlying_permutation();
    let components: Vec<Vec<usize>> = perm
        .cycles()
        .into_iter()
        .map(|cy| cy.into_iter().map(|x| x + 1).collect())
        .collect();
    let mut component_of = vec![0usize; n];
    for (ci, comp) in components.iter().enumerate() {
        for &w in comp {
            component_of[w - 1] = ci;
        }
    }
    debug_assert_eq!(components.len(), closure.component_count());

    let mut crossings = Vec::with_capacity(c);
    for (j, rec) in records.iter().enumerate() {
        let slot_start = (j as f64 + 1.0) * PI / (c as f64 + 1.0);
        let a = rec.inner_strand;
        let b = rec.outer_strand;
        debug_assert_eq!(tracks[a - 1], rec.position);
        debug_assert_eq!(tracks[b - 1], rec.position + 1);
        let same_component = component_of[a - 1] == component_of[b - 1];
        let interchange = same_component && {
            let ci = component_of[b - 1];
            components[ci]
                .iter()
                .all(|&w| tracks[w - 1] <= rec.position + 1)
        };
        crossings.push(ScheduledCrossing {
            letter_index: j,
            slot_start,
            position: rec.position,
            sign: rec.sign,
            inner_winding: a,
            outer_winding: b,
            same_component,
            interchange,
        });
        tracks.swap(a - 1, b - 1);
        tracks_before.push(tracks.clone());
    }

    Ok(AnnularLayout {
        strands: n,
        slot_width,
        crossings,
        components,
        component_of,
        tracks_before,
        loop_windings: braid.elder_strands().to_vec(),
    })
}

/// Resolved geometric amplitudes for one layout, sized so that consecutive
/// sweep steps move every diagram point by a small fraction of the gap to
/// its nearest neighbour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    /// Width of each crossing slot.
    pub slot_width: f64,
    /// Radial gap between adjacent tracks.
    pub track_gap: f64,
    /// Vertical half-separation of the two strands inside a crossing slot.
    pub crossing_lift: f64,
    /// Depth of the far-half dip below the annulus plane.
    pub dip_depth: f64,
    /// Extra dip depth per track, innermost deepest.
    pub depth_stagger: f64,
    /// Large rotational push, in radians.
    pub push_big: f64,
    /// Small rotational push, in radians.
    pub push_small: f64,
    /// Amplitude of the per-winding rotational jitter, in radians.
    pub jitter: f64,
    /// Safety margins: separating gap over per-step motion for the five
    /// interaction regimes checked by the solver.
    pub margins: [f64; 5],
    /// Sweep length the margins were computed against.
    pub sweep_len: usize,
}

const MARGIN_TARGET: f64 = 4.0;
const TRACK_GAP_FLOOR: f64 = 1e-8;

/// Sizes all amplitudes for a layout with `crossings` letters and
/// `windings` strands against a sweep of `sweep_len` steps.
///
/// Fails with a resolution error when `sweep_len` is too coarse for the
/// schedule: some per-step motion would then exceed a quarter of the gap
/// that disambiguates the matching.
pub fn resolve_amplitudes(
    crossings: usize,
    windings: usize,
    params: &EmbedParams,
    sweep_len: usize,
) -> Result<Amplitudes> {
    let r = params.radius;
    let s_w = PI / (8.0 * (crossings as f64 + 1.0));
    let curvature_cap = |width: f64| params.delta * (width * r) * (width * r) / 24.0;

    let crossing_lift = curvature_cap(s_w);
    let dip_depth = curvature_cap(10.0 * s_w).min(0.4 * params.eps);
    let depth_stagger = if windings > 1 {
        dip_depth / (2.0 * (windings as f64 - 1.0))
    } else {
        0.0
    };
    let rho_max = (params.eta + (windings as f64 - 1.0) * crossing_lift).hypot(1.5 * dip_depth);
    let rho_min = params.eta.hypot(dip_depth);

    // Gap that keeps far-side births of adjacent tracks separated.
    let far_birth_gap = 0.9 * (dip_depth / rho_max) * depth_stagger;
    let dt = 2.0 * PI / sweep_len as f64;

    // Radial track gap: capped by the slot curvature budget, the loop
    // clearance, and the far-birth matching margin, then shrunk for
    // headroom.
    let g_cap = (far_birth_gap * s_w / (MARGIN_TARGET * 1.5 * dt))
        .min(curvature_cap(s_w))
        .min(0.01 * params.eta);
    let track_gap = (0.2 * g_cap).max(TRACK_GAP_FLOOR);

    // Rotational pushes.  The small push moves the two barrier heights
    // flanking a crossing pair in opposite directions; its swing must
    // dominate the largest base offset between those heights, which is
    // (windings - 1) track gaps, so that death order always encodes the
    // crossing sign.  The big push then has to clear every barrier the
    // small push can reach, and stays a fixed multiple of it.
    let push_small = params
        .push_small
        .unwrap_or_else(|| windings as f64 * track_gap / (2.0 * dip_depth));
    let push_big = params.push_big.unwrap_or_else(|| 3.5 * push_small.abs());

    if windings < 2 {
        // A single winding has nothing to separate from.
        return Ok(Amplitudes {
            slot_width: s_w,
            track_gap,
            crossing_lift,
            dip_depth,
            depth_stagger,
            push_big,
            push_small,
            jitter: 1e-4 * push_small.abs(),
            margins: [f64::INFINITY; 5],
            sweep_len,
        });
    }

    // Worst-case death separation of a crossing pair over its slot.
    let death_gap =
        0.9 * (2.0 * dip_depth * push_small.abs() - (windings as f64 - 1.0) * track_gap);
    // Death motion while push levels ramp between zones.
    let v_push = 1.5 * (2.0 * dip_depth * push_big.abs()) / (5.0 * s_w) * dt;
    // Far-half birth motion while the dip ramps in and out.
    let v_ramp = (1.5 * dip_depth / rho_min) * (1.5 * 1.5 * dip_depth / (10.0 * s_w)) * dt;

    let gap_over_v1 = |gap: f64| gap * s_w / (1.5 * track_gap * dt);
    let margins = [
        gap_over_v1(death_gap),
        gap_over_v1(far_birth_gap),
        0.9 * track_gap / v_push,
        far_birth_gap / v_ramp,
        0.9 * (sweep_len as f64 * s_w) / (1.5 * 2.0 * PI),
    ];
    if margins.iter().any(|&m| m < MARGIN_TARGET) {
        let suggested = recommended_sweep(crossings, windings, params)?;
        return Err(Error::Resolution {
            details: format!(
                "separation margins {:?} fall below {} at {} steps",
                margins, MARGIN_TARGET, sweep_len
            ),
            suggested,
        });
    }

    Ok(Amplitudes {
        slot_width: s_w,
        track_gap,
        crossing_lift,
        dip_depth,
        depth_stagger,
        push_big,
        push_small,
        jitter: 1e-4 * push_small.abs(),
        margins,
        sweep_len,
    })
}

/// Smallest sweep length from a fixed progression for which all separation
/// margins reach their target.
pub fn recommended_sweep(
    crossings: usize,
    windings: usize,
    params: &EmbedParams,
) -> Result<usize> {
    let mut n = 2000usize;
    while n <= 400_000 {
        let feasible = resolve_without_recursion(crossings, windings, params, n);
        if feasible {
            return Ok(n);
        }
        n = (n * 3 / 2) / 500 * 500 + 500;
    }
    Err(Error::Invalid(format!(
        "no feasible sweep length for {} crossings and {} windings",
        crossings, windings
    )))
}

fn resolve_without_recursion(
    crossings: usize,
    windings: usize,
    params: &EmbedParams,
    sweep_len: usize,
) -> bool {
    // Mirrors resolve_amplitudes without the error path, to avoid mutual
    // recursion when searching for a feasible sweep length.
    let r = params.radius;
    let s_w = PI / (8.0 * (crossings as f64 + 1.0));
    let cap = |width: f64| params.delta * (width * r) * (width * r) / 24.0;
    let lift = cap(s_w);
    let dip = cap(10.0 * s_w).min(0.4 * params.eps);
    let stagger = if windings > 1 { dip / (2.0 * (windings as f64 - 1.0)) } else { 0.0 };
    let rho_max = (params.eta + (windings as f64 - 1.0) * lift).hypot(1.5 * dip);
    let rho_min = params.eta.hypot(dip);
    if windings < 2 {
        return true;
    }
    let far_birth_gap = 0.9 * (dip / rho_max) * stagger;
    let dt = 2.0 * PI / sweep_len as f64;
    let g_cap = (far_birth_gap * s_w / (MARGIN_TARGET * 1.5 * dt))
        .min(cap(s_w))
        .min(0.01 * params.eta);
    let g = (0.2 * g_cap).max(TRACK_GAP_FLOOR);
    let push_small = params
        .push_small
        .unwrap_or(windings as f64 * g / (2.0 * dip));
    let push_big = params.push_big.unwrap_or(3.5 * push_small.abs());
    let death_gap = 0.9 * (2.0 * dip * push_small.abs() - (windings as f64 - 1.0) * g);
    let v_push = 1.5 * (2.0 * dip * push_big.abs()) / (5.0 * s_w) * dt;
    let v_ramp = (1.5 * dip / rho_min) * (1.5 * 1.5 * dip / (10.0 * s_w)) * dt;
    let v1 = 1.5 * g / s_w * dt;
    death_gap / v1 >= MARGIN_TARGET
        && far_birth_gap / v1 >= MARGIN_TARGET
        && 0.9 * g / v_push >= MARGIN_TARGET
        && far_birth_gap / v_ramp >= MARGIN_TARGET
        && 0.9 * (sweep_len as f64 * s_w) / (1.5 * 2.0 * PI) >= MARGIN_TARGET
}

/// Quintic smoothstep: 0 at 0, 1 at 1, with vanishing first and second
/// derivatives at both ends.
fn smootherstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (u * (u * 6.0 - 15.0) + 10.0)
}

/// Symmetric bump supported on [0, 1], peaking at 1 in the middle, with
/// vanishing first and second derivatives at both ends.
fn bump(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    let v = u * (1.0 - u);
    64.0 * v * v * v
}

/// Dip activation profile: 0 on the near half (where crossings live), 1 on
/// the far half, with long ramps through the transition windows.
fn dip_profile(theta: f64, s_w: f64) -> f64 {
    let width = 10.0 * s_w;
    if theta < 4.0 * s_w {
        // Tail of the ramp-down window, wrapped across the seam.
        1.0 - smootherstep((theta + 6.0 * s_w) / width)
    } else if theta < PI - 3.0 * s_w {
        0.0
    } else if theta < PI + 7.0 * s_w {
        smootherstep((theta - (PI - 3.0 * s_w)) / width)
    } else if theta < 2.0 * PI - 6.0 * s_w {
        1.0
    } else {
        1.0 - smootherstep((theta - (2.0 * PI - 6.0 * s_w)) / width)
    }
}

/// Piecewise profile holding `levels[j]` on the far-half zone of letter `j`
/// and ramping smoothly between consecutive zones.
fn zone_profile(theta: f64, s_w: f64, levels: &[f64]) -> f64 {
    let c = levels.len();
    if c == 0 {
        return 0.0;
    }
    let lead_in = PI + 3.0 * s_w;
    let lead_out = 2.0 * PI - s_w;
    if theta <= lead_in || theta >= lead_out {
        return 0.0;
    }
    // Zone j (0-based) holds over [pi + (8(j+1)-1) s_w, pi + (8(j+1)+2) s_w].
    let zone_start = |j: usize| PI + (8.0 * (j as f64 + 1.0) - 1.0) * s_w;
    let zone_end = |j: usize| PI + (8.0 * (j as f64 + 1.0) + 2.0) * s_w;
    if theta < zone_start(0) {
        return levels[0] * smootherstep((theta - lead_in) / (4.0 * s_w));
    }
    if theta >= zone_end(c - 1) {
        return levels[c - 1] * (1.0 - smootherstep((theta - zone_end(c - 1)) / (5.0 * s_w)));
    }
    for j in 0..c {
        if theta <= zone_end(j) {
            if theta >= zone_start(j) {
                return levels[j];
            }
            // Between zone j-1 and zone j.
            let prev_end = zone_end(j - 1);
            let u = (theta - prev_end) / (5.0 * s_w);
            return levels[j - 1] + (levels[j] - levels[j - 1]) * smootherstep(u);
        }
    }
    0.0
}

/// Track of winding `w` as a function of angle, interpolating smoothly
/// through each of its crossing slots.
struct TrackPath {
    start: f64,
    /// (slot_start, from, to) sorted by slot_start.
    moves: Vec<(f64, f64, f64)>,
}

impl TrackPath {
    fn at(&self, theta: f64, s_w: f64) -> f64 {
        let mut track = self.start;
        for &(s, from, to) in &self.moves {
            if theta < s {
                break;
            }
            if theta < s + s_w {
                return from + (to - from) * smootherstep((theta - s) / s_w);
            }
            track = to;
        }
        track
    }
}

/// One embedded closure component: a closed polyline listing its windings
/// in traversal order, `samples_per_revolution` vertices per winding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedComponent {
    pub id: usize,
    /// Winding labels in traversal order.
    pub windings: Vec<usize>,
    /// Angle of each vertex.
    pub theta: Vec<f64>,
    /// Cross-section offset of each vertex before the rotational push:
    /// (inward offset from the loop circle, downward offset).
    pub base_offset: Vec<(f64, f64)>,
    /// Rotational twist applied to each vertex, in radians.
    pub twist: Vec<f64>,
    /// Cartesian vertices of the closed polyline.
    pub vertices: Vec<Vec3>,
}

impl EmbeddedComponent {
    /// Wraps a raw closed polyline, deriving angles from the vertices.
    /// Intended for validation of externally produced geometry.
    pub fn from_vertices(id: usize, vertices: Vec<Vec3>) -> Self {
        let theta = vertices
            .iter()
            .map(|v| {
                let t = v.y.atan2(v.x);
                if t < 0.0 {
                    t + 2.0 * PI
                } else {
                    t
                }
            })
            .collect();
        let len = vertices.len();
        EmbeddedComponent {
            id,
            windings: Vec::new(),
            theta,
            base_offset: vec![(0.0, 0.0); len],
            twist: vec![0.0; len],
            vertices,
        }
    }
}

/// A braid closure embedded near the twisted annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedLink {
    pub components: Vec<EmbeddedComponent>,
    pub params: EmbedParams,
    pub amplitudes: Amplitudes,
    /// Per-winding rotational jitter, indexed by `winding - 1`.
    pub jitters: Vec<f64>,
    /// Per-winding push levels, indexed by `winding - 1`; one level per
    /// crossing slot.  Empty until crossing pushes are applied.
    pub push_levels: Vec<Vec<f64>>,
}

impl EmbeddedLink {
    /// Builds a link from raw polylines for validation purposes.
    pub fn from_components(components: Vec<EmbeddedComponent>, params: EmbedParams) -> Self {
        let amplitudes = Amplitudes {
            slot_width: PI / 8.0,
            track_gap: 0.0,
            crossing_lift: 0.0,
            dip_depth: 0.0,
            depth_stagger: 0.0,
            push_big: 0.0,
            push_small: 0.0,
            jitter: 0.0,
            margins: [f64::INFINITY; 5],
            sweep_len: 0,
        };
        EmbeddedLink {
            components,
            params,
            amplitudes,
            jitters: Vec::new(),
            push_levels: Vec::new(),
        }
    }

    /// Total number of vertices across all components.
    pub fn vertex_count(&self) -> usize {
        self.components.iter().map(|c| c.vertices.len()).sum()
    }
}

fn cross_section_vertex(
    theta: f64,
    offset_in: f64,
    offset_down: f64,
    twist: f64,
    loop_radius: f64,
) -> Vec3 {
    let (sin_x, cos_x) = twist.sin_cos();
    let a = offset_in * cos_x - offset_down * sin_x;
    let z = offset_in * sin_x + offset_down * cos_x;
    let r = loop_radius - a;
    let (sin_t, cos_t) = theta.sin_cos();
    Vec3::new(r * cos_t, r * sin_t, -z)
}

/// Builds the embedded closure for a layout: windings at staggered radial
/// tracks, crossings realized inside their slots with a vertical lift, and
/// the whole band dipping below the plane on the far half-circle.
///
/// `sweep_len` is the sweep resolution the amplitudes are sized against.
pub fn twist_annulus(
    layout: &AnnularLayout,
    params: &EmbedParams,
    sweep_len: usize,
) -> Result<EmbeddedLink> {
    let n = layout.strands;
    let amps = resolve_amplitudes(layout.crossings.len(), n, params, sweep_len)?;
    let s_w = amps.slot_width;
    let samples = params.samples_per_revolution;
    let loop_radius = params.loop_radius();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let jitters: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * amps.jitter).collect();

    // Per-winding track paths and crossing lifts.
    let mut paths = Vec::with_capacity(n);
    let mut lifts: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n]; // (slot_start, signed lift)
    for w in 1..=n {
        let mut moves = Vec::new();
        for cr in &layout.crossings {
            if cr.inner_winding == w {
                moves.push((cr.slot_start, cr.position as f64, cr.position as f64 + 1.0));
                let over = cr.sign > 0;
                lifts[w - 1].push((cr.slot_start, if over { amps.crossing_lift } else { -amps.crossing_lift }));
            } else if cr.outer_winding == w {
                moves.push((cr.slot_start, cr.position as f64 + 1.0, cr.position as f64));
                let over = cr.sign < 0;
                lifts[w - 1].push((cr.slot_start, if over { amps.crossing_lift } else { -amps.crossing_lift }));
            }
        }
        paths.push(TrackPath { start: w as f64, moves });
    }

    let depth_scale = if n > 1 { 0.5 / (n as f64 - 1.0) } else { 0.0 };
    let mut components = Vec::with_capacity(layout.components.len());
    for (ci, cycle) in layout.components.iter().enumerate() {
        let total = cycle.len() * samples;
        let mut theta_v = Vec::with_capacity(total);
        let mut base = Vec::with_capacity(total);
        let mut twist = Vec::with_capacity(total);
        let mut verts = Vec::with_capacity(total);
        for &w in cycle {
            let path = &paths[w - 1];
            let jit = jitters[w - 1];
            for v in 0..samples {
                let theta = 2.0 * PI * v as f64 / samples as f64;
                let tau = path.at(theta, s_w);
                let lam = dip_profile(theta, s_w);
                let a = params.eta + (n as f64 - tau) * amps.track_gap;
                let mut z = lam * amps.dip_depth * (1.0 + (n as f64 - tau) * depth_scale);
                for &(s, lift) in &lifts[w - 1] {
                    z += lift * bump((theta - s) / s_w);
                }
                let xi = lam * jit;
                theta_v.push(theta);
                base.push((a, z));
                twist.push(xi);
                verts.push(cross_section_vertex(theta, a, z, xi, loop_radius));
            }
        }
        components.push(EmbeddedComponent {
            id: ci,
            windings: cycle.clone(),
            theta: theta_v,
            base_offset: base,
            twist,
            vertices: verts,
        });
    }

    Ok(EmbeddedLink {
        components,
        params: params.clone(),
        amplitudes: amps,
        jitters,
        push_levels: Vec::new(),
    })
}

/// The closed observation loop: a circle of radius `radius + eta` in the
/// annulus plane, sampled like the windings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationLoop {
    pub radius: f64,
    pub vertices: Vec<Vec3>,
}

impl ObservationLoop {
    /// Loop position at angle `t`.
    pub fn at(&self, t: f64) -> Vec3 {
        let (s, c) = t.sin_cos();
        Vec3::new(self.radius * c, self.radius * s, 0.0)
    }
}

/// Samples the observation loop.
pub fn observation_loop(params: &EmbedParams) -> ObservationLoop {
    let radius = params.loop_radius();
    let samples = params.samples_per_revolution;
    let vertices = (0..samples)
        .map(|v| {
            let t = 2.0 * PI * v as f64 / samples as f64;
            let (s, c) = t.sin_cos();
            Vec3::new(radius * c, radius * s, 0.0)
        })
        .collect();
    ObservationLoop { radius, vertices }
}

/// Computes the per-winding push level for every crossing slot.
///
/// Same-component crossings order the component's windings by walking the
/// closure from its outermost winding; the windings strictly between the
/// crossing pair move outward, the flanking pair's barriers move by the
/// small push with signs encoding which strand passes over, and the rest
/// move inward.  Crossings between two components push the whole over
/// component outward and the under component inward.  Interchange slots
/// stay neutral.
pub fn push_level_table(layout: &AnnularLayout, amps: &Amplitudes) -> Vec<Vec<f64>> {
    let n = layout.strands;
    let c = layout.crossings.len();
    let mut levels = vec![vec![0.0; c]; n];
    for cr in &layout.crossings {
        let j = cr.letter_index;
        if cr.interchange {
            continue;
        }
        let over_w = if cr.sign > 0 { cr.inner_winding } else { cr.outer_winding };
        if cr.same_component {
            let ci = layout.component_of[cr.inner_winding - 1];
            let cycle = &layout.components[ci];
            let sc = cycle.len();
            let tracks = &layout.tracks_before[j];
            // Outermost winding of the component at this slot.
            let elder = *cycle
                .iter()
                .max_by_key(|&&w| tracks[w - 1])
                .expect("component cycles are non-empty");
            debug_assert!(elder != cr.inner_winding && elder != cr.outer_winding);
            // Walk the component from the outermost winding.
            let pos_in_cycle = cycle.iter().position(|&w| w == elder).unwrap();
            let walk: Vec<usize> = (0..sc).map(|i| cycle[(pos_in_cycle + i) % sc]).collect();
            let pa = walk.iter().position(|&w| w == cr.inner_winding).unwrap() + 1;
            let pb = walk.iter().position(|&w| w == cr.outer_winding).unwrap() + 1;
            let (lo, hi) = (pa.min(pb), pa.max(pb));
            let s1 = if walk[lo - 1] == over_w { 1.0 } else { -1.0 };
            for (idx, &w) in walk.iter().enumerate() {
                let i = idx + 1;
                levels[w - 1][j] = if i + 2 <= lo {
                    -amps.push_big
                } else if i + 1 == lo {
                    s1 * amps.push_small
                } else if i < hi {
                    amps.push_big
                } else if i == hi {
                    -s1 * amps.push_small
                } else {
                    -amps.push_big
                };
            }
        } else {
            let over_ci = layout.component_of[over_w - 1];
            let under_w = if over_w == cr.inner_winding { cr.outer_winding } else { cr.inner_winding };
            let under_ci = layout.component_of[under_w - 1];
            for &w in &layout.components[over_ci] {
                levels[w - 1][j] = amps.push_big;
            }
            for &w in &layout.components[under_ci] {
                levels[w - 1][j] = -amps.push_big;
            }
        }
    }
    levels
}

/// Applies the rotational crossing pushes to the far half of every winding.
/// Vertices with angles in `[0, pi]` are left untouched.
pub fn apply_crossing_pushes(link: &mut EmbeddedLink, layout: &AnnularLayout) -> Result<()> {
    if layout.strands != link.jitters.len() {
        return Err(Error::Invalid(
            "layout does not match the link it is applied to".into(),
        ));
    }
    let amps = link.amplitudes.clone();
    let s_w = amps.slot_width;
    let levels = push_level_table(layout, &amps);
    let loop_radius = link.params.loop_radius();
    let lead_in = PI + 3.0 * s_w;
    let lead_out = 2.0 * PI - s_w;
    for comp in &mut link.components {
        let samples = link.params.samples_per_revolution;
        for (vi, &w) in comp
            .windings
            .clone()
            .iter()
            .enumerate()
            .flat_map(|(k, w)| (0..samples).map(move |v| (k * samples + v, w)))
        {
            let theta = comp.theta[vi];
            if theta <= lead_in || theta >= lead_out {
                continue;
            }
            let zones = zone_profile(theta, s_w, &levels[w - 1]);
            if zones == 0.0 {
                continue;
            }
            let lam = dip_profile(theta, s_w);
            let xi = lam * (link.jitters[w - 1] + zones);
            let (a, z) = comp.base_offset[vi];
            comp.twist[vi] = xi;
            comp.vertices[vi] = cross_section_vertex(theta, a, z, xi, loop_radius);
        }
    }
    link.push_levels = levels;
    Ok(())
}

/// A point on the reference annulus: a band of width `eps` hinged at the
/// rim circle of radius `radius`, rotated downward by `(pi/2) *
/// dip_profile(theta)` about the hinge.  `u` in `[0, 1]` parameterizes the
/// band from the hinge inward.
pub fn annulus_point(params: &EmbedParams, s_w: f64, theta: f64, u: f64) -> Vec3 {
    let phi = 0.5 * PI * dip_profile(theta, s_w);
    let d = u * params.eps;
    let r = params.radius - d * phi.cos();
    let (sin_t, cos_t) = theta.sin_cos();
    Vec3::new(r * cos_t, r * sin_t, -d * phi.sin())
}

/// Validation report for an embedded link and its observation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedReport {
    /// Whether the parameters themselves are consistent.
    pub params_ok: bool,
    /// Largest angle between a strand segment and the azimuthal direction.
    pub braid_angle_max: f64,
    /// Largest discrete turning angle along any strand.
    pub turn_angle_max: f64,
    /// Largest distance from a strand vertex to the reference annulus.
    pub annulus_dist_max: f64,
    /// Largest deviation of the loop-to-annulus distance from `eta`.
    pub loop_gap_err: f64,
    /// Smallest distance between non-adjacent strand segments.
    pub min_separation: f64,
    /// Smallest distance from the loop circle to any strand vertex.
    pub loop_clearance: f64,
    /// Angular half-width within which distance criticalities can stray
    /// from the loop position and its antipode.
    pub critical_angle_bound: f64,
    pub passed: bool,
}

/// Largest angular deviation of a distance criticality from the loop
/// position (or its antipode), derived from the embedding budgets by
/// bisecting the closed-form bound.
pub fn critical_angle_bound(params: &EmbedParams) -> Result<f64> {
    let r = params.radius;
    let f = |th: f64| -> f64 {
        let chord = 2.0 * r * (th / 2.0).sin();
        let a1 = params.eps / (chord - params.eta);
        let a2 = params.eta / chord;
        if chord <= params.eta || a1 > 1.0 || a2 > 1.0 {
            return f64::INFINITY;
        }
        th / 2.0 + params.theta_b + a1.asin() + a2.asin()
    };
    let target = PI / 2.0;
    let mut hi = 1e-3;
    while f(hi) > target {
        hi *= 1.5;
        if hi > PI {
            return Err(Error::Invalid(
                "cannot bound critical angles for these parameters".into(),
            ));
        }
    }
    let mut lo = hi / 1.5_f64;
    while f(lo) <= target && lo > 1e-12 {
        lo /= 1.5;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn segment_distance(p1: Vec3, p2: Vec3, q1: Vec3, q2: Vec3) -> f64 {
    // Standard closest-approach between two segments with clamping.
    let d1 = p2 - p1;
    let d2 = q2 - q1;
    let r = p1 - q1;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);
    let (mut s, mut t);
    if a <= 1e-30 && e <= 1e-30 {
        return r.norm();
    }
    if a <= 1e-30 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= 1e-30 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            s = if denom.abs() > 1e-30 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    ((p1 + d1 * s) - (q1 + d2 * t)).norm()
}

/// Checks the geometric contract of an embedded link against its loop:
/// segments stay nearly azimuthal, turning stays within the circularity
/// budget, all material stays within `eps` of the reference annulus, the
/// loop keeps distance `eta` from the annulus, and no two strands touch.
pub fn validate_embedding(link: &EmbeddedLink, obs: &ObservationLoop) -> EmbedReport {
    let params = &link.params;
    let s_w = link.amplitudes.slot_width;
    let params_ok = params.validate().is_ok();

    let mut braid_angle_max: f64 = 0.0;
    let mut turn_angle_max: f64 = 0.0;
    let mut annulus_dist_max: f64 = 0.0;

    for comp in &link.components {
        let m = comp.vertices.len();
        if m < 3 {
            continue;
        }
        for i in 0..m {
            let p = comp.vertices[i];
            let q = comp.vertices[(i + 1) % m];
            let seg = q - p;
            let len = seg.norm();
            if len > 1e-30 {
                let mid = (p + q) * 0.5;
                let horiz = (mid.x * mid.x + mid.y * mid.y).sqrt();
                if horiz > 1e-30 {
                    let az = Vec3::new(-mid.y / horiz, mid.x / horiz, 0.0);
                    let cosang = (seg.dot(az) / len).clamp(-1.0, 1.0);
                    braid_angle_max = braid_angle_max.max(cosang.acos());
                }
                let r = comp.vertices[(i + 2) % m];
                let seg2 = r - q;
                let len2 = seg2.norm();
                if len2 > 1e-30 {
                    let c = (seg.dot(seg2) / (len * len2)).clamp(-1.0, 1.0);
                    turn_angle_max = turn_angle_max.max(c.acos());
                }
            }
            // Distance to the reference annulus at this vertex's angle.
            let theta = comp.theta[i];
            let mut best = f64::INFINITY;
            let grid = 24;
            for k in 0..=grid {
                let u = k as f64 / grid as f64;
                let ap = annulus_point(params, s_w, theta, u);
                best = best.min((p - ap).norm());
            }
            annulus_dist_max = annulus_dist_max.max(best);
        }
    }

    // Distance from the loop to the annulus, against eta.
    let mut loop_gap_err: f64 = 0.0;
    for (vi, lv) in obs.vertices.iter().enumerate() {
        let theta = 2.0 * PI * vi as f64 / obs.vertices.len() as f64;
        let mut best = f64::INFINITY;
        for k in 0..=24 {
            let u = k as f64 / 24.0;
            let ap = annulus_point(params, s_w, theta, u);
            best = best.min((*lv - ap).norm());
        }
        loop_gap_err = loop_gap_err.max((best - params.eta).abs());
    }

    // Loop clearance from the strands.
    let mut loop_clearance = f64::INFINITY;
    for comp in &link.components {
        for v in &comp.vertices {
            let horiz = (v.x * v.x + v.y * v.y).sqrt();
            let d = ((horiz - obs.radius) * (horiz - obs.radius) + v.z * v.z).sqrt();
            loop_clearance = loop_clearance.min(d);
        }
    }

    let min_separation = min_strand_separation(link);
    let critical = critical_angle_bound(params).unwrap_or(f64::NAN);

    let passed = params_ok
        && braid_angle_max <= params.theta_b
        && turn_angle_max <= params.delta
        && annulus_dist_max <= params.eps
        && loop_gap_err <= 1e-3
        && min_separation > 1e-9
        && critical.is_finite();

    EmbedReport {
        params_ok,
        braid_angle_max,
        turn_angle_max,
        annulus_dist_max,
        loop_gap_err,
        min_separation,
        loop_clearance,
        critical_angle_bound: critical,
        passed,
    }
}

/// Smallest distance between segments of the link that are not neighbours
/// along the same component, using an angular bucket grid to skip far
/// pairs.
fn min_strand_separation(link: &EmbeddedLink) -> f64 {
    #[derive(Clone, Copy)]
    struct Seg {
        comp: usize,
        idx: usize,
        a: Vec3,
        b: Vec3,
    }
    let buckets = 512usize;
    let mut grid: Vec<Vec<Seg>> = vec![Vec::new(); buckets];
    let mut comp_lens = Vec::new();
    for (ci, comp) in link.components.iter().enumerate() {
        let m = comp.vertices.len();
        comp_lens.push(m);
        for i in 0..m {
            let a = comp.vertices[i];
            let b = comp.vertices[(i + 1) % m];
            let t = a.y.atan2(a.x).rem_euclid(2.0 * PI);
            let bi = ((t / (2.0 * PI) * buckets as f64) as usize).min(buckets - 1);
            grid[bi].push(Seg { comp: ci, idx: i, a, b });
        }
    }
    let mut best = f64::INFINITY;
    for bi in 0..buckets {
        // Compare bucket bi against itself and its next neighbour to cover
        // pairs straddling bucket boundaries.
        for off in 0..=1 {
            let bj = (bi + off) % buckets;
            for (k, s1) in grid[bi].iter().enumerate() {
                let start = if off == 0 { k + 1 } else { 0 };
                for s2 in grid[bj][start..].iter() {
                    if s1.comp == s2.comp {
                        let m = comp_lens[s1.comp];
                        let d = (s1.idx + m - s2.idx) % m;
                        if d <= 1 || d >= m - 1 {
                            continue;
                        }
                    }
                    let dist = segment_distance(s1.a, s1.b, s2.a, s2.b);
                    if dist < best {
                        best = dist;
                    }
                }
            }
        }
    }
    best
}
