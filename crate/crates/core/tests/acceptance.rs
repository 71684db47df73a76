//! End-to-end acceptance checks.
//!
//! Each test exercises one guarantee of the full pipeline and prints a
//! one-line verdict.  Together they cover the monodromy orders of the
//! ouroboros family, vine periods on a mixed link, critical-point counts
//! and angular confinement, the birth/death separation of the swept
//! diagrams, matching stability against the observation loop's motion,
//! braid recovery on a randomized batch of closures, the slide and letter
//! bounds of the Vogel translation, and independence from the sweep
//! resolution.
//!
//! The heavyweight fixtures are shared: [`preset_runs`] holds four full
//! preset-scale sweeps and [`small_runs`] the randomized batch at a
//! coarser sampling rate, each computed once on first use.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vinebraid::braid::Braid;
use vinebraid::diagram::{parse_pd, vogel_braid};
use vinebraid::embed::{critical_angle_bound, EmbedParams};
use vinebraid::extract::linking_matches_up_to_relabeling;
use vinebraid::persist::PointKind;
use vinebraid::pipeline::{run, verification_text, PipelineConfig, PipelineRun};
use vinebraid::vineyard::bottleneck_distance;

/// One finished pipeline run with a human-readable label and its wall time.
struct Labelled {
    label: String,
    run: PipelineRun,
    seconds: f64,
}

/// Ouroboros words on 2, 3, and 4 windings followed by the
/// trefoil-and-circle link, all at preset parameters (4096 samples per
/// winding, sweep resolution starting at 2000 steps).
fn preset_runs() -> &'static [Labelled] {
    static RUNS: OnceLock<Vec<Labelled>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let config = PipelineConfig::default();
        let mut out = Vec::new();
        for k in 2..=4usize {
            let word = Braid::new(k, (1..k as i32).collect()).expect("ouroboros word");
            out.push(timed(format!("ouroboros {k}"), &word, &config));
        }
        let word = Braid::parse("4: 1 2 1 2").expect("trefoil-and-circle word");
        out.push(timed("trefoil-and-circle".into(), &word, &config));
        out
    })
}

fn timed(label: String, word: &Braid, config: &PipelineConfig) -> Labelled {
    let started = Instant::now();
    let done = run(word, config).unwrap_or_else(|e| panic!("{label}: {e}"));
    Labelled { label, run: done, seconds: started.elapsed().as_secs_f64() }
}

/// Coarser profile for the randomized batch: a quarter of the preset
/// sampling rate, with the per-vertex turning budget scaled to match.
/// Word recovery is combinatorially exact, so the batch only needs enough
/// resolution to certify its matchings.
fn small_config() -> PipelineConfig {
    let mut config = PipelineConfig::default();
    config.params.samples_per_revolution = 1024;
    config.params.delta = 0.008;
    config
}

/// The cube of the single generator plus 25 seeded random words on at
/// most 5 strands and at most 8 letters.  Draws whose augmented word
/// schedules more than 32 crossings are redrawn to keep the required
/// sweep resolutions, and with them the batch runtime, bounded.
fn small_runs() -> &'static [(Braid, PipelineRun)] {
    static RUNS: OnceLock<Vec<(Braid, PipelineRun)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let config = small_config();
        let mut words = vec![Braid::parse("2: 1 1 1").expect("generator cube")];
        words.extend(random_words(25, 0xB8A1D));
        words
            .into_iter()
            .map(|word| {
                let done = run(&word, &config).unwrap_or_else(|e| panic!("{word}: {e}"));
                (word, done)
            })
            .collect()
    })
}

fn random_words(count: usize, seed: u64) -> Vec<Braid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = Vec::new();
    while words.len() < count {
        let strands = rng.gen_range(2..=5usize);
        let length = rng.gen_range(1..=8usize);
        let letters: Vec<i32> = (0..length)
            .map(|_| {
                let position = rng.gen_range(1..strands as i32);
                if rng.gen_bool(0.5) {
                    position
                } else {
                    -position
                }
            })
            .collect();
        let word = Braid::new(strands, letters).expect("letters drawn in range");
        if word.add_component_loops().letters().len() > 32 {
            continue;
        }
        words.push(word);
    }
    words
}

/// Every run in the suite, labelled.
fn all_runs() -> Vec<(String, &'static PipelineRun)> {
    let mut out: Vec<(String, &'static PipelineRun)> =
        preset_runs().iter().map(|x| (x.label.clone(), &x.run)).collect();
    out.extend(small_runs().iter().map(|(w, r)| (w.to_string(), r)));
    out
}

/// Angular distance to the nearest seam (θ = 0 or θ = π).
fn seam_offset(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    t.min(PI - t)
}

/// The closure of the ouroboros word on k windings is a single curve
/// winding k times around the annulus, and one revolution of the
/// observation loop advances its vineyard by one winding: the monodromy
/// order is exactly k.  Each preset-scale run must finish within 30
/// seconds.
#[test]
fn revolution_monodromy_has_exact_order() {
    let runs = &preset_runs()[..3];
    for (i, item) in runs.iter().enumerate() {
        let k = i + 2;
        assert_eq!(
            item.run.monodromy.order, k,
            "{}: monodromy order {} (expected {k})",
            item.label, item.run.monodromy.order
        );
        assert!(item.seconds < 30.0, "{}: took {:.1}s, budget is 30s", item.label, item.seconds);
    }
    let times: Vec<String> = runs.iter().map(|x| format!("{:.1}s", x.seconds)).collect();
    println!("PASS  monodromy orders 2, 3, 4 recovered exactly ({})", times.join(", "));
}

/// On the trefoil-and-circle link, the vines swept out by the trefoil's
/// windings close up only after three revolutions: a vine family of
/// period exactly 3.  The component also carries its fixed elder-loop
/// vine (period 1); no other period may occur on it.
#[test]
fn trefoil_circle_vines_close_with_period_three() {
    let item = &preset_runs()[3];
    let layout = &item.run.layout;
    // The trefoil is the component with three core windings (augmentation
    // appends one elder winding per component, so sizes alone are off by
    // one).
    let core_strands = item.run.core.strands();
    let trefoil: Vec<usize> = (0..layout.components.len())
        .filter(|&c| layout.components[c].iter().filter(|&&w| w <= core_strands).count() == 3)
        .collect();
    assert_eq!(
        trefoil.len(),
        1,
        "expected exactly one component with three core windings: {:?}",
        layout.components
    );
    let trefoil = trefoil[0];

    let orders: Vec<usize> = item
        .run
        .vines
        .iter()
        .filter(|v| v.closed && v.degree == 0 && v.component == trefoil)
        .map(|v| v.order)
        .collect();
    assert!(orders.contains(&3), "no period-3 vine on the trefoil component: {orders:?}");
    assert!(
        orders.iter().all(|&o| o == 3 || o == 1),
        "stray periods on the trefoil component: {orders:?}"
    );
    assert_eq!(item.run.monodromy.order, 3, "monodromy order of the whole link");
    let family = orders.iter().filter(|&&o| o == 3).count();
    println!("PASS  trefoil component carries {family} closed degree-0 vine(s) of period exactly 3");
}

/// At every sweep step of every example, the distance profile has exactly
/// one minimum and one maximum per winding: minima = maxima = augmented
/// strand count.
#[test]
fn critical_point_counts_match_strand_count() {
    let mut diagrams = 0usize;
    for (label, done) in all_runs() {
        let n = done.augmented.strands();
        for d in &done.vineyard.diagrams {
            assert_eq!(d.minima(), n, "{label}: t = {} has {} minima, {n} strands", d.t, d.minima());
            assert_eq!(d.maxima(), n, "{label}: t = {} has {} maxima, {n} strands", d.t, d.maxima());
            diagrams += 1;
        }
    }
    println!("PASS  minima = maxima = augmented strand count across {diagrams} diagrams");
}

/// Every critical point of every preset-scale diagram sits within the
/// angular bound of one of the two seams θ = t and θ = t + π through the
/// observation point: nearest and farthest strand material stays angularly
/// aligned (or anti-aligned) with the observer.
#[test]
fn critical_angles_stay_inside_the_seam_bands() {
    let bound = critical_angle_bound(&EmbedParams::default()).expect("preset bound");
    assert!((bound - 0.016441177831374363).abs() < 1e-12, "preset angle bound moved: {bound}");

    let mut samples = 0usize;
    let mut worst: f64 = 0.0;
    for item in preset_runs() {
        for d in &item.run.vineyard.diagrams {
            for c in &d.criticals {
                let off = seam_offset(c.theta - d.t);
                assert!(
                    off <= bound,
                    "{}: t = {} critical at theta = {} sits {off} off the seam (bound {bound})",
                    item.label, d.t, c.theta
                );
                worst = worst.max(off);
                samples += 1;
            }
        }
    }
    assert!(samples >= 100_000, "only {samples} critical-point samples");
    println!(
        "PASS  {samples} critical points confined to the seam bands (worst offset {worst:.3e} <= {bound:.3e})"
    );
}

/// Degree-0 activity of the preset-scale diagrams splits cleanly: every
/// ordinary birth lies below half the loop radius and every degree-0
/// death above one and a half times it.
#[test]
fn births_stay_low_and_deaths_stay_high() {
    let radius = EmbedParams::default().radius;
    let mut points = 0usize;
    let mut top_birth = f64::MIN;
    let mut low_death = f64::MAX;
    for item in preset_runs() {
        for d in &item.run.vineyard.diagrams {
            for p in d.degree0() {
                if p.kind == PointKind::Ordinary {
                    assert!(
                        p.birth < radius / 2.0,
                        "{}: t = {} ordinary birth {}",
                        item.label, d.t, p.birth
                    );
                    top_birth = top_birth.max(p.birth);
                }
                assert!(
                    p.death > 1.5 * radius,
                    "{}: t = {} degree-0 death {}",
                    item.label, d.t, p.death
                );
                low_death = low_death.min(p.death);
                points += 1;
            }
        }
    }
    println!(
        "PASS  {points} degree-0 points: max ordinary birth {top_birth:.3} < {}, min death {low_death:.3} > {}",
        radius / 2.0,
        1.5 * radius
    );
}

/// Diagram stability: the bottleneck distance between consecutive swept
/// diagrams never exceeds the distance the observation point moved,
/// up to 1e-9 of absolute slack, including the wrap-around step.
#[test]
fn step_bottleneck_cost_is_bounded_by_loop_motion() {
    let mut steps = 0usize;
    let mut slack = f64::MAX;
    for item in preset_runs() {
        let v = &item.run.vineyard;
        let n = v.grid.len();
        for m in &v.matchings {
            let next = (m.step + 1) % n;
            let motion = item
                .run
                .observation
                .at(v.grid[m.step])
                .dist(item.run.observation.at(v.grid[next]));
            let cost = bottleneck_distance(&v.diagrams[m.step], &v.diagrams[next]);
            assert!(
                cost <= motion + 1e-9,
                "{}: step {} bottleneck {cost} exceeds loop motion {motion}",
                item.label, m.step
            );
            slack = slack.min(motion - cost);
            steps += 1;
        }
    }
    println!("PASS  bottleneck cost bounded by loop motion over {steps} steps (min slack {slack:.3e})");
}

/// The full batch — 25 seeded random words, the cube of the single
/// generator, and the trefoil-and-circle link — round-trips through the
/// sweep: component count, permutation cycle type, linking matrix, and
/// the letter sequence up to cyclic rotation all verify, and the spurious
/// unknot count equals the input component count.
#[test]
fn random_closures_round_trip_through_extraction() {
    for (word, done) in small_runs() {
        assert!(done.verification.passed(), "{word}:\n{}", verification_text(&done.verification));
    }
    let appendix = &preset_runs()[3];
    assert!(
        appendix.run.verification.passed(),
        "trefoil-and-circle:\n{}",
        verification_text(&appendix.run.verification)
    );
    println!(
        "PASS  {} randomized closures plus the generator cube and the trefoil-and-circle link verified",
        small_runs().len() - 1
    );
}

const TREFOIL_PD: &str = "X(1,4,2,5) X(3,6,4,1) X(5,2,6,3)";
const FIGURE_EIGHT_PD: &str = "X(4,2,5,1) X(2,7,3,8) X(8,6,1,5) X(6,3,7,4)";
const HOPF_PD: &str = "X(1,3,2,4) X(3,1,4,2)";
const CINQUEFOIL_PD: &str = "X(6,2,7,1) X(2,8,3,7) X(8,4,9,3) X(4,10,5,9) X(10,6,1,5)";
const CHAIN_PD: &str = "X(1,4,2,5) X(5,2,6,1) X(8,4,7,3) X(6,8,3,7)";

/// The Vogel translation of the diagram corpus stays within its bounds —
/// at most (p−1)(p−2)/2 slides and n + (p−1)(p−2) letters for a diagram
/// with n crossings and p Seifert circles — and preserves the closure's
/// component count, writhe, and linking matrix.
#[test]
fn diagram_corpus_respects_vogel_bounds() {
    let corpus = [
        ("trefoil", TREFOIL_PD),
        ("figure eight", FIGURE_EIGHT_PD),
        ("hopf link", HOPF_PD),
        ("cinquefoil", CINQUEFOIL_PD),
        ("three-chain", CHAIN_PD),
    ];
    for (name, code) in corpus {
        let d = parse_pd(code).expect(name);
        let out = vogel_braid(&d);
        let n = d.crossing_count();
        let p = out.input_circles;
        let op_bound = (p - 1) * (p - 2) / 2;
        let letter_bound = n + (p - 1) * (p - 2);
        assert!(
            out.operations <= op_bound,
            "{name}: {} slides exceed the bound {op_bound}",
            out.operations
        );
        assert!(
            out.word.letters().len() <= letter_bound,
            "{name}: {} letters exceed the bound {letter_bound}",
            out.word.letters().len()
        );
        let info = out.word.closure_info();
        assert_eq!(info.components.len(), d.components().len(), "{name}: component count changed");
        assert_eq!(out.word.writhe(), d.writhe(), "{name}: writhe changed");
        assert!(
            linking_matches_up_to_relabeling(&info.linking, &d.linking_matrix()),
            "{name}: linking matrix changed"
        );
    }
    println!("PASS  5 corpus diagrams within slide and letter bounds, closure invariants preserved");
}

/// Doubling the sweep resolution of every example leaves the monodromy
/// permutation and the extracted word unchanged.
#[test]
fn doubling_the_sweep_changes_nothing() {
    let mut compared = 0usize;
    for item in preset_runs() {
        let mut config = PipelineConfig::default();
        config.sweep = 2 * item.run.sweep_used;
        let doubled = run(&item.run.core, &config).unwrap_or_else(|e| panic!("{}: {e}", item.label));
        assert_eq!(doubled.sweep_used, config.sweep, "{}: doubled run escalated", item.label);
        assert_eq!(
            item.run.monodromy.permutation, doubled.monodromy.permutation,
            "{}: monodromy permutation moved",
            item.label
        );
        assert_eq!(
            item.run.extracted.word, doubled.extracted.word,
            "{}: extracted word moved",
            item.label
        );
        compared += 1;
    }
    for (word, done) in small_runs() {
        let mut config = small_config();
        config.sweep = 2 * done.sweep_used;
        let doubled = run(word, &config).unwrap_or_else(|e| panic!("{word}: {e}"));
        assert_eq!(doubled.sweep_used, config.sweep, "{word}: doubled run escalated");
        assert_eq!(
            done.monodromy.permutation, doubled.monodromy.permutation,
            "{word}: monodromy permutation moved"
        );
        assert_eq!(done.extracted.word, doubled.extracted.word, "{word}: extracted word moved");
        compared += 1;
    }
    println!(
        "PASS  sweep doubling left {compared} monodromy permutations and extracted words unchanged"
    );
}
