//! End-to-end runs and the artifact formats written to disk.
//!
//! [`run`] drives the whole machine: augment the input word with one loop
//! strand per closure component, lay the closure out near the twisted
//! annulus, sweep the observation loop, match consecutive diagrams into a
//! vineyard, trace the vines, compute the revolution monodromy, and
//! re-extract a braid word that is verified against the input.  Sweep
//! resolutions that prove too coarse for the geometry are escalated
//! automatically, with each restart recorded on the run.
//!
//! The remaining functions render a finished run into the formats the
//! command-line tool emits: JSON dumps for braids, geometry, the vineyard,
//! and the extraction; a CSV table of diagram points; an OBJ polyline
//! export; and SVG plots of the vineyard and of single diagrams.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::braid::{Braid, Permutation};
use crate::embed::{
    apply_crossing_pushes, layout_closed_braid, observation_loop, twist_annulus,
    validate_embedding, AnnularLayout, EmbedParams, EmbedReport, EmbeddedLink, ObservationLoop,
};
use crate::extract::{
    detect_crossings, extracted_braid, verify_against, CheckResult, ExtractedBraid,
    VerificationReport, VineCrossing,
};
use crate::persist::PersistenceDiagram;
use crate::vineyard::{monodromy, sweep, trace_vines, Matching, MonodromyResult, Vine, Vineyard};
use crate::{Error, Result};

/// Sweep steps per revolution when nothing else is requested.
pub const DEFAULT_SWEEP: usize = 2000;
/// Smallest accepted sweep resolution.
pub const MIN_SWEEP: usize = 16;
/// How many times a run may restart with a finer sweep before giving up.
pub const MAX_ESCALATIONS: usize = 8;

/// Everything a full run needs besides the braid word itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub params: EmbedParams,
    /// Sweep steps per revolution of the observation loop.
    pub sweep: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            params: EmbedParams::default(),
            sweep: DEFAULT_SWEEP,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweep < MIN_SWEEP {
            return Err(Error::Invalid(format!(
                "sweep resolution {} is below the minimum of {MIN_SWEEP}",
                self.sweep
            )));
        }
        self.params.validate()
    }
}

fn config_value<T: std::str::FromStr>(lineno: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Parse(format!(
            "config line {lineno}: value `{value}` for key `{key}` is not valid"
        ))
    })
}

/// Applies flat `key=value` configuration text on top of `cfg`.
///
/// Blank lines are skipped and `#` starts a comment.  Recognized keys
/// mirror the command-line flags plus the less common embedding knobs:
/// `radius`, `eps`, `eta`, `theta_b`, `delta`, `samples`, `push_big`,
/// `push_small`, `seed`, `sweep`.
pub fn apply_config_text(text: &str, cfg: &mut PipelineConfig) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!(
                "config line {lineno}: expected `key = value`, got `{line}`"
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "radius" => cfg.params.radius = config_value(lineno, key, value)?,
            "eps" => cfg.params.eps = config_value(lineno, key, value)?,
            "eta" => cfg.params.eta = config_value(lineno, key, value)?,
            "theta_b" => cfg.params.theta_b = config_value(lineno, key, value)?,
            "delta" => cfg.params.delta = config_value(lineno, key, value)?,
            "samples" => {
                cfg.params.samples_per_revolution = config_value(lineno, key, value)?
            }
            "push_big" => cfg.params.push_big = Some(config_value(lineno, key, value)?),
            "push_small" => cfg.params.push_small = Some(config_value(lineno, key, value)?),
            "seed" => cfg.params.seed = config_value(lineno, key, value)?,
            "sweep" => cfg.sweep = config_value(lineno, key, value)?,
            _ => {
                return Err(Error::Parse(format!(
                    "config line {lineno}: unknown key `{key}`"
                )))
            }
        }
    }
    Ok(())
}

/// The k-strand word σ₁σ₂⋯σ₍k₋₁₎, whose closure is a single unknotted
/// component; the swept monodromy cycles its base diagram with order k.
pub fn ouroboros_core(k: usize) -> Result<Braid> {
    if k == 0 {
        return Err(Error::Invalid("the ouroboros family starts at k = 1".into()));
    }
    Braid::new(k, (1..k as i32).collect())
}

/// One finished run with every intermediate stage retained.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub core: Braid,
    pub augmented: Braid,
    pub layout: AnnularLayout,
    pub link: EmbeddedLink,
    pub observation: ObservationLoop,
    pub embed_report: EmbedReport,
    pub vineyard: Vineyard,
    pub vines: Vec<Vine>,
    pub monodromy: MonodromyResult,
    pub crossings: Vec<VineCrossing>,
    pub extracted: ExtractedBraid,
    pub verification: VerificationReport,
    /// Sweep resolution of the final, successful attempt.
    pub sweep_used: usize,
    /// One line per automatic restart at a finer sweep resolution.
    pub escalations: Vec<String>,
}

/// Runs the full pipeline on a core braid word.
///
/// If a sweep resolution turns out too coarse — the amplitude solver or
/// the diagram matcher reports the minimal compliant resolution — the run
/// restarts there, up to [`MAX_ESCALATIONS`] times.
pub fn run(core: &Braid, config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let augmented = core.add_component_loops();
    let layout = layout_closed_braid(&augmented)?;
    let mut sweep_len = config.sweep;
    let mut escalations = Vec::new();
    loop {
        match attempt(core, &augmented, &layout, &config.params, sweep_len) {
            Ok(mut done) => {
                done.escalations = escalations;
                return Ok(done);
            }
            Err(Error::Resolution { details, suggested })
                if suggested > sweep_len && escalations.len() < MAX_ESCALATIONS =>
            {
                escalations.push(format!("sweep {sweep_len} -> {suggested}: {details}"));
                sweep_len = suggested;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Runs the pipeline on [`ouroboros_core`]`(k)`.
pub fn run_ouroboros(k: usize, config: &PipelineConfig) -> Result<PipelineRun> {
    run(&ouroboros_core(k)?, config)
}

/// Embedded geometry without a sweep: what `construct` produces.
#[derive(Debug, Clone)]
pub struct GeometryRun {
    pub core: Braid,
    pub augmented: Braid,
    pub layout: AnnularLayout,
    pub link: EmbeddedLink,
    pub observation: ObservationLoop,
    pub embed_report: EmbedReport,
    pub sweep_used: usize,
    pub escalations: Vec<String>,
}

/// Builds just the embedded geometry, escalating the sweep resolution the
/// amplitudes are sized against exactly like [`run`].
pub fn build_geometry(core: &Braid, config: &PipelineConfig) -> Result<GeometryRun> {
    config.validate()?;
    let augmented = core.add_component_loops();
    let layout = layout_closed_braid(&augmented)?;
    let mut sweep_len = config.sweep;
    let mut escalations = Vec::new();
    loop {
        match twist_annulus(&layout, &config.params, sweep_len) {
            Ok(mut link) => {
                apply_crossing_pushes(&mut link, &layout)?;
                let observation = observation_loop(&config.params);
                let embed_report = validate_embedding(&link, &observation);
                return Ok(GeometryRun {
                    core: core.clone(),
                    augmented,
                    layout,
                    link,
                    observation,
                    embed_report,
                    sweep_used: sweep_len,
                    escalations,
                });
            }
            Err(Error::Resolution { details, suggested })
                if suggested > sweep_len && escalations.len() < MAX_ESCALATIONS =>
            {
                escalations.push(format!("sweep {sweep_len} -> {suggested}: {details}"));
                sweep_len = suggested;
            }
            Err(e) => return Err(e),
        }
    }
}

fn attempt(
    core: &Braid,
    augmented: &Braid,
    layout: &AnnularLayout,
    params: &EmbedParams,
    sweep_len: usize,
) -> Result<PipelineRun> {
    let mut link = twist_annulus(layout, params, sweep_len)?;
    apply_crossing_pushes(&mut link, layout)?;
    let observation = observation_loop(params);
    let embed_report = validate_embedding(&link, &observation);
    let mut vineyard = sweep(&link, &observation, sweep_len)?;
    vineyard.match_all()?;
    let vines = trace_vines(&vineyard)?;
    let monodromy = monodromy(&vineyard, &vines)?;
    let crossings = detect_crossings(&link, &observation, &vineyard, &vines)?;
    let extracted = extracted_braid(&vineyard, &vines, &crossings)?;
    let verification = verify_against(core, &extracted);
    Ok(PipelineRun {
        core: core.clone(),
        augmented: augmented.clone(),
        layout: layout.clone(),
        link,
        observation,
        embed_report,
        vineyard,
        vines,
        monodromy,
        crossings,
        extracted,
        verification,
        sweep_used: sweep_len,
        escalations: Vec::new(),
    })
}

fn format_cycles(cycles: &[Vec<usize>]) -> String {
    let mut s = String::new();
    for cycle in cycles {
        s.push('(');
        for (i, x) in cycle.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x}");
        }
        s.push(')');
    }
    s
}

/// Cycle notation for a permutation given as an index map.
pub fn permutation_cycles_text(map: &[usize]) -> String {
    match Permutation::from_map(map.to_vec()) {
        Ok(p) => format_cycles(&p.cycles()),
        Err(_) => format!("{map:?}"),
    }
}

/// Human-readable embedding validation report.
pub fn embed_report_text(r: &EmbedReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "parameters:       {}",
        if r.params_ok { "ok" } else { "INVALID" }
    );
    let _ = writeln!(out, "braid angle max:  {:.3e}", r.braid_angle_max);
    let _ = writeln!(out, "turn angle max:   {:.3e}", r.turn_angle_max);
    let _ = writeln!(out, "annulus dist max: {:.3e}", r.annulus_dist_max);
    let _ = writeln!(out, "loop gap error:   {:.3e}", r.loop_gap_err);
    let _ = writeln!(out, "min separation:   {:.3e}", r.min_separation);
    let _ = writeln!(out, "loop clearance:   {:.3e}", r.loop_clearance);
    let _ = writeln!(out, "critical angle:   {:.3e}", r.critical_angle_bound);
    let _ = writeln!(
        out,
        "embedding check:  {}",
        if r.passed { "PASS" } else { "FAIL" }
    );
    out
}

/// Renders a verification report with one PASS/FAIL line per check.
pub fn verification_text(report: &VerificationReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let _ = writeln!(
            out,
            "[{}] {} — {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.details
        );
    }
    let _ = writeln!(
        out,
        "overall:          {}",
        if report.passed() { "PASS" } else { "FAIL" }
    );
    out
}

/// Human-readable account of a finished run.
pub fn run_summary(run: &PipelineRun) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "core word:        {}", run.core);
    let _ = writeln!(out, "augmented word:   {}", run.augmented);
    let info = run.core.closure_info();
    let _ = writeln!(
        out,
        "closure:          {} component(s), writhe {}",
        info.component_count(),
        run.core.writhe()
    );
    let _ = writeln!(out, "sweep steps:      {}", run.sweep_used);
    for line in &run.escalations {
        let _ = writeln!(out, "  escalated {line}");
    }
    let _ = writeln!(
        out,
        "embedding check:  {}",
        if run.embed_report.passed { "ok" } else { "FAILED" }
    );
    let closed = run.vines.iter().filter(|v| v.closed).count();
    let _ = writeln!(
        out,
        "vines:            {} ({} closed, {} rooted)",
        run.vines.len(),
        closed,
        run.vines.len() - closed
    );
    let _ = writeln!(
        out,
        "monodromy:        order {}, permutation {}",
        run.monodromy.order,
        permutation_cycles_text(&run.monodromy.permutation)
    );
    let tangencies = run.crossings.iter().filter(|c| c.tangency).count();
    let _ = writeln!(
        out,
        "vine crossings:   {} ({} tangencies)",
        run.crossings.len(),
        tangencies
    );
    let _ = writeln!(out, "extracted word:   {}", run.extracted.word);
    let _ = writeln!(out, "spurious unknots: {}", run.extracted.spurious_vines.len());
    out.push_str(&verification_text(&run.verification));
    out
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

/// JSON rendering of a braid word: `strands`, `letters`, `elder_strands`.
pub fn braid_json(word: &Braid) -> Result<String> {
    Ok(with_newline(serde_json::to_string_pretty(word)?))
}

/// CSV table of every diagram point in the vineyard, one row per point.
pub fn diagrams_csv(v: &Vineyard) -> String {
    let mut out = String::from("t,component,degree,kind,birth,death,birth_theta,death_theta\n");
    for (i, d) in v.diagrams.iter().enumerate() {
        for p in &d.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                v.grid[i],
                p.component,
                p.degree,
                p.kind,
                p.birth,
                p.death,
                p.birth_theta,
                p.death_theta
            );
        }
    }
    out
}

/// JSON rendering of a single diagram.
pub fn diagram_json(d: &PersistenceDiagram) -> Result<String> {
    Ok(with_newline(serde_json::to_string_pretty(d)?))
}

/// Everything the sweep produced, as one self-contained document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VineyardDump {
    pub config: PipelineConfig,
    pub grid: Vec<f64>,
    pub diagrams: Vec<PersistenceDiagram>,
    pub matchings: Vec<Matching>,
    pub vines: Vec<Vine>,
    pub monodromy: MonodromyResult,
    pub crossings: Vec<VineCrossing>,
}

impl VineyardDump {
    /// Collects the sweep artifacts of a finished run.
    pub fn from_run(run: &PipelineRun) -> Self {
        VineyardDump {
            config: PipelineConfig {
                params: run.link.params.clone(),
                sweep: run.sweep_used,
            },
            grid: run.vineyard.grid.clone(),
            diagrams: run.vineyard.diagrams.clone(),
            matchings: run.vineyard.matchings.clone(),
            vines: run.vines.clone(),
            monodromy: run.monodromy.clone(),
            crossings: run.crossings.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(with_newline(serde_json::to_string_pretty(self)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize)]
struct GeometryComponent {
    id: usize,
    windings: Vec<usize>,
    /// One `[x, y, z]` triple per vertex.
    cartesian: Vec<[f64; 3]>,
    /// One `[theta, rho, psi]` triple per vertex: angle along the annulus,
    /// distance from the observation circle in the cross-section plane,
    /// and phase around it (0 points toward the axis, π/2 points down).
    annular: Vec<[f64; 3]>,
}

#[derive(Serialize)]
struct GeometryDump<'a> {
    params: &'a EmbedParams,
    observation_radius: f64,
    components: Vec<GeometryComponent>,
}

/// JSON dump of embedded geometry with per-component vertex arrays in
/// both Cartesian and annular coordinates.
pub fn geometry_json(link: &EmbeddedLink) -> Result<String> {
    let components = link
        .components
        .iter()
        .map(|c| {
            let annular = (0..c.vertices.len())
                .map(|i| {
                    let (a, z) = c.base_offset[i];
                    let rho = (a * a + z * z).sqrt();
                    let psi = z.atan2(a) + c.twist[i];
                    [c.theta[i], rho, psi]
                })
                .collect();
            GeometryComponent {
                id: c.id,
                windings: c.windings.clone(),
                cartesian: c.vertices.iter().map(|v| [v.x, v.y, v.z]).collect(),
                annular,
            }
        })
        .collect();
    let dump = GeometryDump {
        params: &link.params,
        observation_radius: link.params.loop_radius(),
        components,
    };
    Ok(with_newline(serde_json::to_string_pretty(&dump)?))
}

/// OBJ polyline export: `v` records for every vertex, then one closed `l`
/// record per component.
pub fn geometry_obj(link: &EmbeddedLink) -> String {
    let mut out = String::new();
    let mut base = 1usize;
    for comp in &link.components {
        let _ = writeln!(out, "o component_{}", comp.id);
        for v in &comp.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        let mut line = String::from("l");
        for i in 0..comp.vertices.len() {
            let _ = write!(line, " {}", base + i);
        }
        let _ = writeln!(out, "{line} {base}");
        base += comp.vertices.len();
    }
    out
}

/// JSON rendering of the verification report with the overall verdict.
pub fn verification_json(report: &VerificationReport) -> Result<String> {
    #[derive(Serialize)]
    struct Dump<'a> {
        checks: &'a [CheckResult],
        passed: bool,
    }
    Ok(with_newline(serde_json::to_string_pretty(&Dump {
        checks: &report.checks,
        passed: report.passed(),
    })?))
}

/// JSON report of the extraction stage: the recovered word, strand
/// bookkeeping, detected crossings, and the verification checks.
pub fn extraction_json(run: &PipelineRun) -> Result<String> {
    #[derive(Serialize)]
    struct ExtractionDump<'a> {
        word: String,
        extracted: &'a ExtractedBraid,
        crossings: &'a [VineCrossing],
        verification: &'a VerificationReport,
        passed: bool,
    }
    let dump = ExtractionDump {
        word: run.extracted.word.to_string(),
        extracted: &run.extracted,
        crossings: &run.crossings,
        verification: &run.verification,
        passed: run.verification.passed(),
    };
    Ok(with_newline(serde_json::to_string_pretty(&dump)?))
}

const SVG_W: f64 = 1000.0;
const SVG_H: f64 = 600.0;
const SVG_MARGIN: f64 = 40.0;
/// Stroke colors, cycled by closure component.
const PALETTE: [&str; 8] = [
    "#1b6ca8", "#d1495b", "#2e933c", "#e0a100", "#7b4fa6", "#3aa6a6", "#b35a20", "#5b5b5b",
];

fn value_range<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// SVG plot of the vineyard's (t, birth) projection: one polyline per
/// degree-0 vine colored by closure component, with detected vine
/// crossings marked (tangencies dashed).
pub fn vineyard_svg(dump: &VineyardDump) -> String {
    let n = dump.grid.len();
    let birth_of = |step: usize, point: usize| dump.diagrams[step].points[point].birth;
    let (lo, hi) = value_range(
        dump.vines
            .iter()
            .filter(|v| v.degree == 0)
            .flat_map(|v| v.points.iter().map(|&(s, p)| birth_of(s, p))),
    );
    let x = |t: f64| SVG_MARGIN + t / (2.0 * PI) * (SVG_W - 2.0 * SVG_MARGIN);
    let y = |b: f64| SVG_H - SVG_MARGIN - (b - lo) / (hi - lo) * (SVG_H - 2.0 * SVG_MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_W} {SVG_H}\" \
         width=\"{SVG_W}\" height=\"{SVG_H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<rect x=\"{SVG_MARGIN}\" y=\"{SVG_MARGIN}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"#cccccc\"/>",
        SVG_W - 2.0 * SVG_MARGIN,
        SVG_H - 2.0 * SVG_MARGIN
    );

    for vine in dump.vines.iter().filter(|v| v.degree == 0) {
        let color = PALETTE[vine.component % PALETTE.len()];
        // Split the trajectory where it wraps past t = 2π.
        let mut runs: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut cur: Vec<(f64, f64)> = Vec::new();
        let mut prev_step: Option<usize> = None;
        for &(s, p) in &vine.points {
            if let Some(ps) = prev_step {
                if s != ps + 1 {
                    runs.push(std::mem::take(&mut cur));
                }
            }
            cur.push((x(dump.grid[s]), y(birth_of(s, p))));
            prev_step = Some(s);
        }
        // Closed vines continue through the wrap matching to t = 2π, so
        // the plot meets the right edge instead of stopping a step short.
        if vine.closed && dump.matchings.len() == n {
            if let Some(&(s_last, p_last)) = vine.points.last() {
                if s_last == n - 1 {
                    let cont = dump.matchings[n - 1]
                        .pairs
                        .iter()
                        .find(|pr| pr.from == Some(p_last))
                        .and_then(|pr| pr.to);
                    if let Some(q) = cont {
                        cur.push((x(2.0 * PI), y(birth_of(0, q))));
                    }
                }
            }
        }
        runs.push(cur);
        for run in runs.iter().filter(|r| r.len() > 1) {
            let mut d = String::new();
            for (i, (px, py)) in run.iter().enumerate() {
                let _ = write!(d, "{}{px:.2} {py:.2}", if i == 0 { "M" } else { " L" });
            }
            let _ = writeln!(
                out,
                "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
            );
        }
    }

    for c in &dump.crossings {
        let step = ((c.t_star / (2.0 * PI) * n as f64).round() as usize) % n;
        let Some(vine) = dump.vines.iter().find(|v| v.id == c.first) else {
            continue;
        };
        let Some(&(s, p)) = vine.points.iter().find(|&&(s, _)| s == step) else {
            continue;
        };
        let dash = if c.tangency {
            " stroke-dasharray=\"3 2\""
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"none\" stroke=\"black\" \
             stroke-width=\"1.2\"{dash}/>",
            x(dump.grid[s]),
            y(birth_of(s, p))
        );
    }

    out.push_str("</svg>\n");
    out
}

/// SVG scatter of one diagram in the (birth, death) plane: filled discs
/// for degree-0 points, open discs for degree-1, colored by closure
/// component, with the diagonal drawn.
pub fn diagram_svg(d: &PersistenceDiagram) -> String {
    let (lo, hi) = value_range(d.points.iter().flat_map(|p| [p.birth, p.death]));
    let side = SVG_H;
    let map = |v: f64| SVG_MARGIN + (v - lo) / (hi - lo) * (side - 2.0 * SVG_MARGIN);
    let flip = |v: f64| side - map(v);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {side} {side}\" \
         width=\"{side}\" height=\"{side}\">"
    );
    let _ = writeln!(out, "<rect width=\"{side}\" height=\"{side}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999999\"/>",
        map(lo),
        flip(lo),
        map(hi),
        flip(hi)
    );
    for p in &d.points {
        let color = PALETTE[p.component % PALETTE.len()];
        let style = if p.degree == 0 {
            format!("fill=\"{color}\"")
        } else {
            format!("fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"")
        };
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" {style}/>",
            map(p.birth),
            flip(p.death)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            params: EmbedParams {
                samples_per_revolution: 1024,
                // Four times coarser than the preset sampling, so the
                // per-segment circularity bound scales by the same factor.
                delta: 0.008,
                ..EmbedParams::default()
            },
            sweep: 2000,
        }
    }

    fn small_run() -> &'static PipelineRun {
        static RUN: OnceLock<PipelineRun> = OnceLock::new();
        RUN.get_or_init(|| run_ouroboros(2, &small_config()).expect("ouroboros(2) runs"))
    }

    #[test]
    fn ouroboros_sweep_recovers_order_two() {
        let done = small_run();
        assert_eq!(done.core.to_string(), "2: 1");
        assert_eq!(done.monodromy.order, 2);
        assert!(done.embed_report.passed);
        assert_eq!(done.extracted.spurious_vines.len(), 1);
        assert!(
            done.verification.passed(),
            "{}",
            verification_text(&done.verification)
        );
    }

    #[test]
    fn coarse_sweeps_escalate_until_resolvable() {
        let mut cfg = small_config();
        cfg.params.samples_per_revolution = 512;
        cfg.sweep = MIN_SWEEP;
        let core = Braid::parse("1:").unwrap();
        let done = run(&core, &cfg).unwrap();
        assert!(done.sweep_used > MIN_SWEEP);
        assert!(!done.escalations.is_empty());
        assert!(done.escalations.len() <= MAX_ESCALATIONS);
        assert!(done.verification.passed());
    }

    #[test]
    fn rejects_undersized_sweep_configs() {
        let mut cfg = PipelineConfig::default();
        cfg.sweep = MIN_SWEEP - 1;
        assert!(matches!(cfg.validate(), Err(Error::Invalid(_))));
        let core = Braid::parse("1:").unwrap();
        assert!(run(&core, &cfg).is_err());
    }

    #[test]
    fn ouroboros_words_are_single_component_cycles() {
        assert!(ouroboros_core(0).is_err());
        let w = ouroboros_core(4).unwrap();
        assert_eq!(w.to_string(), "4: 1 2 3");
        assert_eq!(w.closure_info().component_count(), 1);
        assert_eq!(ouroboros_core(1).unwrap().to_string(), "1:");
    }

    #[test]
    fn config_text_overrides_fields() {
        let mut cfg = PipelineConfig::default();
        apply_config_text(
            "# tuning\nradius = 12.5\n sweep=700 \nseed = 7\npush_small=0.004\nsamples = 2048\n",
            &mut cfg,
        )
        .unwrap();
        assert_eq!(cfg.params.radius, 12.5);
        assert_eq!(cfg.sweep, 700);
        assert_eq!(cfg.params.seed, 7);
        assert_eq!(cfg.params.push_small, Some(0.004));
        assert_eq!(cfg.params.samples_per_revolution, 2048);
        assert_eq!(cfg.params.eta, EmbedParams::default().eta);
    }

    #[test]
    fn config_text_rejects_unknown_and_malformed_lines() {
        for bad in ["radius 12", "warp = 9", "eps = fast", "sweep = -3"] {
            let mut cfg = PipelineConfig::default();
            let err = apply_config_text(bad, &mut cfg).unwrap_err();
            assert!(matches!(err, Error::Parse(_)), "{bad}: {err}");
        }
        let mut cfg = PipelineConfig::default();
        let err = apply_config_text("radius = 10\nwarp = 9\n", &mut cfg).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn braid_json_round_trips() {
        let done = small_run();
        let text = braid_json(&done.augmented).unwrap();
        assert!(text.contains("\"strands\""));
        assert!(text.contains("\"elder_strands\""));
        let back: Braid = serde_json::from_str(&text).unwrap();
        assert_eq!(back, done.augmented);
    }

    #[test]
    fn csv_lists_every_diagram_point() {
        let done = small_run();
        let csv = diagrams_csv(&done.vineyard);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,component,degree,kind,birth,death,birth_theta,death_theta"
        );
        let rows = lines.count();
        let expect: usize = done.vineyard.diagrams.iter().map(|d| d.points.len()).sum();
        assert_eq!(rows, expect);
        let sample = csv.lines().nth(1).unwrap();
        assert_eq!(sample.split(',').count(), 8);
        assert!(csv.contains(",ordinary,"));
        assert!(csv.contains(",extended,"));
    }

    #[test]
    fn vineyard_dump_round_trips_through_json() {
        let done = small_run();
        let dump = VineyardDump::from_run(done);
        let text = dump.to_json().unwrap();
        let back = VineyardDump::from_json(&text).unwrap();
        assert_eq!(back, dump);
    }

    #[test]
    fn geometry_json_annular_triples_match_cartesian() {
        let done = small_run();
        let text = geometry_json(&done.link).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let comps = v["components"].as_array().unwrap();
        assert_eq!(comps.len(), done.link.components.len());
        let r0 = done.link.params.loop_radius();
        for (cv, comp) in comps.iter().zip(&done.link.components) {
            let cart = cv["cartesian"].as_array().unwrap();
            let ann = cv["annular"].as_array().unwrap();
            assert_eq!(cart.len(), comp.vertices.len());
            assert_eq!(ann.len(), cart.len());
            for i in [0, cart.len() / 2] {
                let a = ann[i].as_array().unwrap();
                let theta = a[0].as_f64().unwrap();
                let rho = a[1].as_f64().unwrap();
                let psi = a[2].as_f64().unwrap();
                let r = r0 - rho * psi.cos();
                let p = comp.vertices[i];
                assert!((r * theta.cos() - p.x).abs() < 1e-9);
                assert!((r * theta.sin() - p.y).abs() < 1e-9);
                assert!((-rho * psi.sin() - p.z).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn obj_export_closes_each_component() {
        let done = small_run();
        let obj = geometry_obj(&done.link);
        let vcount = obj.lines().filter(|l| l.starts_with("v ")).count();
        assert_eq!(vcount, done.link.vertex_count());
        let records: Vec<&str> = obj.lines().filter(|l| l.starts_with("l ")).collect();
        assert_eq!(records.len(), done.link.components.len());
        for rec in records {
            let idx: Vec<&str> = rec.split_whitespace().skip(1).collect();
            assert!(idx.len() >= 4);
            assert_eq!(idx.first(), idx.last());
        }
    }

    #[test]
    fn svg_plots_draw_vines_and_crossings() {
        let done = small_run();
        let dump = VineyardDump::from_run(done);
        let svg = vineyard_svg(&dump);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let paths = svg.matches("<path").count();
        let deg0 = dump.vines.iter().filter(|v| v.degree == 0).count();
        assert!(paths >= deg0, "{paths} paths for {deg0} vines");
        let markers = svg.matches("<circle").count();
        assert_eq!(markers, dump.crossings.len());

        let dsvg = diagram_svg(&done.vineyard.diagrams[0]);
        assert!(dsvg.contains("<line"));
        assert_eq!(
            dsvg.matches("<circle").count(),
            done.vineyard.diagrams[0].points.len()
        );
    }

    #[test]
    fn extraction_json_reports_the_verdict() {
        let done = small_run();
        let text = extraction_json(done).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["passed"], serde_json::Value::Bool(true));
        assert!(v["word"].as_str().unwrap().starts_with("2:"));
        assert!(v["verification"]["checks"].as_array().unwrap().len() >= 4);
    }

    #[test]
    fn geometry_builds_without_sweeping() {
        let core = Braid::parse("2: 1").unwrap();
        let g = build_geometry(&core, &small_config()).unwrap();
        assert!(g.embed_report.passed, "{}", embed_report_text(&g.embed_report));
        assert!(g.link.vertex_count() > 0);
        assert_eq!(g.sweep_used, 2000);
        assert!(g.escalations.is_empty());
        let text = embed_report_text(&g.embed_report);
        assert!(text.contains("embedding check:  PASS"));
    }

    #[test]
    fn verification_json_carries_the_verdict() {
        let done = small_run();
        let text = verification_json(&done.verification).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["passed"], serde_json::Value::Bool(true));
        assert!(!v["checks"].as_array().unwrap().is_empty());
    }

    #[test]
    fn permutations_print_in_cycle_notation() {
        assert_eq!(permutation_cycles_text(&[1, 0, 2]), "(0 1)(2)");
        assert_eq!(permutation_cycles_text(&[1, 2, 0]), "(0 1 2)");
    }

    #[test]
    fn summary_mentions_the_outcome() {
        let done = small_run();
        let s = run_summary(done);
        assert!(s.contains("core word:        2: 1"));
        assert!(s.contains("order 2"));
        assert!(s.contains("spurious unknots: 1"));
        assert!(s.trim_end().ends_with("PASS"));
    }
}
