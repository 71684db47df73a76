//! Planar diagram codes, Seifert circles, and Vogel's reduction of an
//! arbitrary oriented link diagram to closed-braid form.
//!
//! A planar code lists one tuple per crossing: `X(a,b,c,d)` names the four
//! incident arcs counterclockwise starting from the incoming under-strand
//! arc. The crossing sign is recovered by propagating arc orientations
//! (every arc leaves one crossing and enters another), falling back to the
//! usual sequential-numbering convention only where the orientation is
//! genuinely underdetermined; `Xp(...)`/`Xm(...)` force the sign outright.
//!
//! Smoothing every crossing coherently (each incoming strand joins the
//! adjacent outgoing strand) splits the diagram into disjoint oriented
//! Seifert circles. When the circles form coherently nested chains the
//! diagram is a closed braid and [`vogel_braid`] reads the word off
//! directly; otherwise it repeatedly slides an arc across a circle that
//! shares a face incoherently (a Reidemeister-II move adding one positive
//! and one negative crossing) until the chain condition holds. With `p`
//! initial circles and `n` initial crossings at most `(p-1)(p-2)/2` slides
//! are needed and the final word has at most `n + (p-1)(p-2)` letters.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::braid::Braid;
use crate::{Error, Result};

/// One crossing of an oriented diagram: the four incident arc labels in
/// counterclockwise order starting from the incoming under-strand arc, and
/// the crossing sign (`+1` exactly when the over strand runs from the fourth
/// slot to the second).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crossing {
    pub arcs: [u64; 4],
    pub sign: i8,
}

impl Crossing {
    /// Slot index of the incoming over-strand arc.
    fn over_in(&self) -> usize {
        if self.sign > 0 {
            3
        } else {
            1
        }
    }

    /// Slot index of the outgoing over-strand arc.
    fn over_out(&self) -> usize {
        if self.sign > 0 {
            1
        } else {
            3
        }
    }
}

/// A validated oriented link diagram. Construct with [`parse_pd`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinkDiagram {
    crossings: Vec<Crossing>,
}

/// The oriented circles obtained by smoothing every crossing coherently.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeifertDecomposition {
    /// Each circle as its cyclic arc-label sequence in flow order, starting
    /// at the smallest label; circles are ordered by that label.
    pub circles: Vec<Vec<u64>>,
    /// For each crossing, the indices of the two circles it joins
    /// (normalised smaller-first).
    pub adjacency: Vec<(usize, usize)>,
}

/// Result of reducing a diagram to closed-braid form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VogelOutcome {
    /// Braid word whose closure is ambient-isotopic to the input diagram.
    pub word: Braid,
    /// Number of arc slides (Reidemeister-II doublings) performed.
    pub operations: usize,
    /// Seifert-circle count of the input diagram (the braid's strand count).
    pub input_circles: usize,
}

/// Parses a planar diagram code.
///
/// The text is a whitespace- or comma-separated list of crossing tuples.
/// Labels are arbitrary non-negative integers; each must occur exactly
/// twice over the whole code, and the induced arc orientations must be
/// consistent.
pub fn parse_pd(text: &str) -> Result<LinkDiagram> {
    let tuples = tokenize(text)?;
    if tuples.is_empty() {
        return Err(Error::Parse(
            "planar code lists no crossings".into(),
        ));
    }
    let mut occurrences: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for (x, (arcs, _)) in tuples.iter().enumerate() {
        for (s, &label) in arcs.iter().enumerate() {
            occurrences.entry(label).or_default().push((x, s));
        }
    }
    for (&label, occ) in &occurrences {
        if occ.len() != 2 {
            return Err(Error::Invalid(format!(
                "arc {label} appears {} time(s); every arc must appear exactly twice",
                occ.len()
            )));
        }
    }
    let signs = infer_signs(&tuples, &occurrences)?;
    let crossings: Vec<Crossing> = tuples
        .iter()
        .zip(&signs)
        .map(|(&(arcs, _), &sign)| Crossing { arcs, sign })
        .collect();
    Mesh::build(&crossings)?;
    Ok(LinkDiagram { crossings })
}

impl LinkDiagram {
    pub fn crossings(&self) -> &[Crossing] {
        &self.crossings
    }

    pub fn crossing_count(&self) -> usize {
        self.crossings.len()
    }

    pub fn arc_count(&self) -> usize {
        2 * self.crossings.len()
    }

    /// Sum of crossing signs.
    pub fn writhe(&self) -> i64 {
        self.crossings.iter().map(|c| c.sign as i64).sum()
    }

    /// Link components as cyclic arc-label sequences in traversal order,
    /// each starting at its smallest label; components are ordered by that
    /// label.
    pub fn components(&self) -> Vec<Vec<u64>> {
        let mesh = self.mesh();
        let mut succ = vec![usize::MAX; mesh.labels.len()];
        for (x, slots) in mesh.slots.iter().enumerate() {
            let c = &self.crossings[x];
            succ[slots[0]] = slots[2];
            succ[slots[c.over_in()]] = slots[c.over_out()];
        }
        cycles_of(&succ)
            .into_iter()
            .map(|cycle| cycle.into_iter().map(|id| mesh.labels[id]).collect())
            .collect()
    }

    /// Linking matrix over the components of [`LinkDiagram::components`]:
    /// off-diagonal entries are linking numbers (half the signed count of
    /// mutual crossings), diagonal entries the signed self-crossing counts.
    pub fn linking_matrix(&self) -> Vec<Vec<i64>> {
        let mesh = self.mesh();
        let components = self.components();
        let mut comp_of = vec![usize::MAX; mesh.labels.len()];
        for (k, comp) in components.iter().enumerate() {
            for label in comp {
                let id = mesh.labels.binary_search(label).expect("component arc");
                comp_of[id] = k;
            }
        }
        let k = components.len();
        let mut acc = vec![vec![0i64; k]; k];
        for (x, slots) in mesh.slots.iter().enumerate() {
            let c = &self.crossings[x];
            let under = comp_of[slots[0]];
            let over = comp_of[slots[c.over_in()]];
            if under == over {
                acc[under][under] += c.sign as i64;
            } else {
                acc[under][over] += c.sign as i64;
                acc[over][under] += c.sign as i64;
            }
        }
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    debug_assert_eq!(acc[a][b] % 2, 0);
                    acc[a][b] /= 2;
                }
            }
        }
        acc
    }

    /// Canonical textual form with explicit crossing signs.
    pub fn to_code(&self) -> String {
        self.crossings
            .iter()
            .map(|c| {
                format!(
                    "X{}({},{},{},{})",
                    if c.sign > 0 { "p" } else { "m" },
                    c.arcs[0],
                    c.arcs[1],
                    c.arcs[2],
                    c.arcs[3]
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn mesh(&self) -> Mesh {
        Mesh::build(&self.crossings).expect("diagram validated at parse time")
    }
}

/// Computes the Seifert circles of a diagram: at every crossing each
/// incoming strand is joined to the adjacent outgoing strand, splitting the
/// diagram into disjoint oriented circles.
pub fn seifert_circles(d: &LinkDiagram) -> SeifertDecomposition {
    let mesh = d.mesh();
    let circ = circles(&mesh);
    let adjacency = (0..mesh.slots.len())
        .map(|x| {
            let a = circ.of[mesh.slots[x][0]];
            let b = circ.of[mesh.slots[x][2]];
            (a.min(b), a.max(b))
        })
        .collect();
    SeifertDecomposition {
        circles: circ
            .arcs
            .iter()
            .map(|cycle| cycle.iter().map(|&id| mesh.labels[id]).collect())
            .collect(),
        adjacency,
    }
}

/// Reduces a diagram to a braid word whose closure is ambient-isotopic to
/// it (Vogel's algorithm). Total on validated diagrams.
pub fn vogel_braid(d: &LinkDiagram) -> VogelOutcome {
    let mut crossings = d.crossings.clone();
    let n0 = crossings.len();
    let input_mesh = d.mesh();
    let p0 = circles(&input_mesh).arcs.len();
    let slide_bound = p0.saturating_sub(1) * p0.saturating_sub(2) / 2;
    let mut next_label = input_mesh.labels.iter().copied().max().unwrap_or(0) + 1;
    let mut operations = 0usize;

    let word = loop {
        let mesh = Mesh::build(&crossings).expect("arc slides preserve diagram validity");
        let circ = circles(&mesh);
        match pick_slide(&mesh, &circ) {
            Some(slide) => {
                operations += 1;
                assert!(
                    operations <= slide_bound,
                    "arc slide count exceeded the (p-1)(p-2)/2 bound"
                );
                apply_slide(&mut crossings, &mut next_label, &mesh, slide);
            }
            None => {
                let faces = smoothed_faces(&mesh, &circ);
                let sides = circle_sides(&mesh, &circ, &faces);
                break read_word(&mesh, &circ, &faces, &sides);
            }
        }
    };

    assert!(
        word.letters().len() <= n0 + p0.saturating_sub(1) * p0.saturating_sub(2),
        "letter count exceeded the n + (p-1)(p-2) bound"
    );
    VogelOutcome {
        word,
        operations,
        input_circles: p0,
    }
}

fn tokenize(text: &str) -> Result<Vec<([u64; 4], i8)>> {
    let mut out = Vec::new();
    let mut it = text.char_indices().peekable();
    loop {
        while matches!(it.peek(), Some(&(_, c)) if c.is_whitespace() || c == ',') {
            it.next();
        }
        let Some(&(pos, c)) = it.peek() else { break };
        if c != 'X' {
            return Err(Error::Parse(format!(
                "unexpected {c:?} at byte {pos}; expected a crossing tuple like X(a,b,c,d)"
            )));
        }
        it.next();
        let sign = match it.peek() {
            Some(&(_, 'p')) => {
                it.next();
                1
            }
            Some(&(_, 'm')) => {
                it.next();
                -1
            }
            _ => 0,
        };
        if !matches!(it.next(), Some((_, '(')) | Some((_, '['))) {
            return Err(Error::Parse(format!(
                "crossing tuple at byte {pos} is missing its opening bracket"
            )));
        }
        let mut arcs = [0u64; 4];
        for (k, slot) in arcs.iter_mut().enumerate() {
            while matches!(it.peek(), Some(&(_, c)) if c.is_whitespace()) {
                it.next();
            }
            let mut digits = String::new();
            while matches!(it.peek(), Some(&(_, c)) if c.is_ascii_digit()) {
                digits.push(it.next().unwrap().1);
            }
            if digits.is_empty() {
                return Err(Error::Parse(format!(
                    "crossing tuple at byte {pos} needs four arc labels"
                )));
            }
            *slot = digits
                .parse()
                .map_err(|_| Error::Parse(format!("arc label {digits} is out of range")))?;
            while matches!(it.peek(), Some(&(_, c)) if c.is_whitespace()) {
                it.next();
            }
            let closer = matches!(it.peek(), Some((_, ')')) | Some((_, ']')));
            match (k, it.next()) {
                (0..=2, Some((_, ','))) => {}
                (3, Some((_, ')'))) | (3, Some((_, ']'))) => {}
                _ => {
                    return Err(Error::Parse(format!(
                        "crossing tuple at byte {pos} {}",
                        if closer && k < 3 {
                            "has fewer than four arc labels"
                        } else {
                            "is malformed"
                        }
                    )));
                }
            }
        }
        out.push((arcs, sign));
    }
    Ok(out)
}

/// Determines every crossing sign by propagating arc orientations: slot 0
/// always receives an incoming arc and slot 2 an outgoing one, each arc is
/// incoming at exactly one of its two occurrences, and the two over-strand
/// slots of a crossing carry opposite roles.
fn infer_signs(
    tuples: &[([u64; 4], i8)],
    occurrences: &BTreeMap<u64, Vec<(usize, usize)>>,
) -> Result<Vec<i8>> {
    let n = tuples.len();
    let mut role: Vec<[Option<bool>; 4]> = vec![[None; 4]; n];
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();

    fn assign(
        role: &mut [[Option<bool>; 4]],
        queue: &mut VecDeque<(usize, usize)>,
        tuples: &[([u64; 4], i8)],
        x: usize,
        s: usize,
        incoming: bool,
    ) -> Result<()> {
        match role[x][s] {
            Some(r) if r != incoming => Err(Error::Invalid(format!(
                "arc {} cannot be oriented consistently",
                tuples[x].0[s]
            ))),
            Some(_) => Ok(()),
            None => {
                role[x][s] = Some(incoming);
                queue.push_back((x, s));
                Ok(())
            }
        }
    }

    for (x, &(_, sign)) in tuples.iter().enumerate() {
        assign(&mut role, &mut queue, tuples, x, 0, true)?;
        assign(&mut role, &mut queue, tuples, x, 2, false)?;
        if sign != 0 {
            let over_in = if sign > 0 { 3 } else { 1 };
            assign(&mut role, &mut queue, tuples, x, over_in, true)?;
            assign(&mut role, &mut queue, tuples, x, 4 - over_in, false)?;
        }
    }

    loop {
        while let Some((x, s)) = queue.pop_front() {
            let r = role[x][s].expect("queued roles are set");
            let label = tuples[x].0[s];
            for &(y, t) in &occurrences[&label] {
                if (y, t) != (x, s) {
                    assign(&mut role, &mut queue, tuples, y, t, !r)?;
                }
            }
            if s == 1 {
                assign(&mut role, &mut queue, tuples, x, 3, !r)?;
            } else if s == 3 {
                assign(&mut role, &mut queue, tuples, x, 1, !r)?;
            }
        }
        // Any crossing still unresolved lies on a strand that is the over
        // strand everywhere it goes, so orientation propagation cannot reach
        // it. Fall back to the sequential-numbering convention: the over
        // strand runs towards the label larger by one (wrapping pairs run
        // from the larger label to the smaller).
        let Some(x) = (0..n).find(|&x| role[x][1].is_none()) else {
            break;
        };
        let b = tuples[x].0[1];
        let d = tuples[x].0[3];
        let sign: i8 = if d.checked_add(1) == Some(b) {
            1
        } else if b.checked_add(1) == Some(d) {
            -1
        } else if d > b {
            1
        } else {
            -1
        };
        let over_in = if sign > 0 { 3 } else { 1 };
        assign(&mut role, &mut queue, tuples, x, over_in, true)?;
    }

    (0..n)
        .map(|x| match (role[x][1], role[x][3]) {
            (Some(false), Some(true)) => Ok(1),
            (Some(true), Some(false)) => Ok(-1),
            _ => unreachable!("propagation assigns every over-strand slot"),
        })
        .collect()
}

/// Indexed form of a diagram: dense arc ids (sorted by label) with their
/// endpoint slots, plus connectivity of the crossing graph. Building the
/// mesh validates double coverage, orientation consistency, and planarity
/// of the rotation data.
struct Mesh {
    labels: Vec<u64>,
    slots: Vec<[usize; 4]>,
    signs: Vec<i8>,
    /// Arc id -> (crossing, slot) it leaves from.
    tail: Vec<(usize, usize)>,
    /// Arc id -> (crossing, slot) it arrives at.
    head: Vec<(usize, usize)>,
    /// Arc id -> connected component of the crossing graph.
    part_of_crossing: Vec<usize>,
    parts: usize,
}

impl Mesh {
    fn build(crossings: &[Crossing]) -> Result<Mesh> {
        let mut occurrences: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
        for (x, c) in crossings.iter().enumerate() {
            for (s, &label) in c.arcs.iter().enumerate() {
                occurrences.entry(label).or_default().push((x, s));
            }
        }
        for (&label, occ) in &occurrences {
            if occ.len() != 2 {
                return Err(Error::Invalid(format!(
                    "arc {label} appears {} time(s); every arc must appear exactly twice",
                    occ.len()
                )));
            }
        }
        let labels: Vec<u64> = occurrences.keys().copied().collect();
        let id_of: BTreeMap<u64, usize> =
            labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let slots: Vec<[usize; 4]> = crossings
            .iter()
            .map(|c| {
                let mut ids = [0usize; 4];
                for (s, &label) in c.arcs.iter().enumerate() {
                    ids[s] = id_of[&label];
                }
                ids
            })
            .collect();

        let mut tail = vec![None; labels.len()];
        let mut head = vec![None; labels.len()];
        for (x, c) in crossings.iter().enumerate() {
            for (slot, incoming) in [
                (0usize, true),
                (c.over_in(), true),
                (2usize, false),
                (c.over_out(), false),
            ] {
                let id = slots[x][slot];
                let end = if incoming { &mut head } else { &mut tail };
                if end[id].replace((x, slot)).is_some() {
                    return Err(Error::Invalid(format!(
                        "arc {} cannot be oriented consistently",
                        labels[id]
                    )));
                }
            }
        }
        let tail: Vec<(usize, usize)> = tail.into_iter().map(Option::unwrap).collect();
        let head: Vec<(usize, usize)> = head.into_iter().map(Option::unwrap).collect();

        let mut graph = Dsu::new(crossings.len());
        for id in 0..labels.len() {
            graph.union(tail[id].0, head[id].0);
        }
        let mut part_ids = BTreeMap::new();
        let part_of_crossing: Vec<usize> = (0..crossings.len())
            .map(|x| {
                let root = graph.find(x);
                let next = part_ids.len();
                *part_ids.entry(root).or_insert(next)
            })
            .collect();
        let parts = part_ids.len();

        let mesh = Mesh {
            labels,
            slots,
            signs: crossings.iter().map(|c| c.sign).collect(),
            tail,
            head,
            part_of_crossing,
            parts,
        };

        // Euler count per connected part: n_i crossings, 2n_i arcs, so a
        // planar part has n_i + 2 faces, and the sector classes never span
        // parts. A higher-genus part always comes up short.
        let found = mesh.face_count(false);
        let expected = crossings.len() + 2 * mesh.parts;
        if found != expected {
            return Err(Error::Invalid(format!(
                "arc labels do not admit a planar embedding ({found} faces where a planar diagram has {expected})"
            )));
        }
        Ok(mesh)
    }

    fn over_in(&self, x: usize) -> usize {
        if self.signs[x] > 0 {
            3
        } else {
            1
        }
    }

    fn over_out(&self, x: usize) -> usize {
        if self.signs[x] > 0 {
            1
        } else {
            3
        }
    }

    /// Union-find over the four corner sectors of every crossing. Sector
    /// `4x + k` lies counterclockwise between slots `k` and `k+1` of
    /// crossing `x`. The two sides of each arc glue the sectors at its
    /// endpoints; with `merge_smoothed` the two sectors joined by the
    /// smoothing corners are also merged, giving the faces of the
    /// Seifert-circle arrangement instead of the diagram's own faces.
    fn sector_classes(&self, merge_smoothed: bool) -> (Vec<usize>, usize) {
        let n = self.slots.len();
        let mut dsu = Dsu::new(4 * n);
        for id in 0..self.labels.len() {
            let (t, i) = self.tail[id];
            let (h, j) = self.head[id];
            dsu.union(4 * t + i, 4 * h + (j + 3) % 4);
            dsu.union(4 * t + (i + 3) % 4, 4 * h + j);
        }
        if merge_smoothed {
            for x in 0..n {
                if self.signs[x] > 0 {
                    dsu.union(4 * x + 1, 4 * x + 3);
                } else {
                    dsu.union(4 * x, 4 * x + 2);
                }
            }
        }
        let mut dense = BTreeMap::new();
        let class: Vec<usize> = (0..4 * n)
            .map(|s| {
                let root = dsu.find(s);
                let next = dense.len();
                *dense.entry(root).or_insert(next)
            })
            .collect();
        (class, dense.len())
    }

    fn face_count(&self, merge_smoothed: bool) -> usize {
        self.sector_classes(merge_smoothed).1
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
    }
}

struct Circles {
    /// Cyclic arc-id sequences in flow order, starting at each circle's
    /// smallest arc; circles ordered by that arc.
    arcs: Vec<Vec<usize>>,
    /// Arc id -> circle index.
    of: Vec<usize>,
}

fn circles(mesh: &Mesh) -> Circles {
    let mut succ = vec![usize::MAX; mesh.labels.len()];
    for (x, slots) in mesh.slots.iter().enumerate() {
        if mesh.signs[x] > 0 {
            succ[slots[0]] = slots[1];
            succ[slots[3]] = slots[2];
        } else {
            succ[slots[0]] = slots[3];
            succ[slots[1]] = slots[2];
        }
    }
    let arcs = cycles_of(&succ);
    let mut of = vec![usize::MAX; succ.len()];
    for (k, cycle) in arcs.iter().enumerate() {
        for &id in cycle {
            of[id] = k;
        }
    }
    Circles { arcs, of }
}

/// Decomposes a successor permutation into cycles, each starting at its
/// smallest element, ordered by that element.
fn cycles_of(succ: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; succ.len()];
    let mut out = Vec::new();
    for start in 0..succ.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut at = start;
        while !seen[at] {
            seen[at] = true;
            cycle.push(at);
            at = succ[at];
        }
        out.push(cycle);
    }
    out
}

struct Faces {
    class: Vec<usize>,
    count: usize,
}

fn smoothed_faces(mesh: &Mesh, circ: &Circles) -> Faces {
    let (class, count) = mesh.sector_classes(true);
    assert_eq!(
        count,
        circ.arcs.len() + mesh.parts,
        "smoothed face count disagrees with the circle count"
    );
    Faces { class, count }
}

/// Face on the left and on the right of each circle (constant along the
/// circle because the circles are disjoint embedded curves).
fn circle_sides(mesh: &Mesh, circ: &Circles, faces: &Faces) -> Vec<(usize, usize)> {
    circ.arcs
        .iter()
        .map(|cycle| {
            let mut side = None;
            for &id in cycle {
                let (t, i) = mesh.tail[id];
                let here = (faces.class[4 * t + i], faces.class[4 * t + (i + 3) % 4]);
                match side {
                    None => side = Some(here),
                    Some(s) => assert_eq!(s, here, "circle has inconsistent side faces"),
                }
            }
            side.expect("every circle contains an arc")
        })
        .collect()
}

/// A pending arc slide: push arc `alpha` across arc `beta` through the
/// diagram face both arcs border with the same orientation.
struct Slide {
    alpha: usize,
    beta: usize,
    both_left: bool,
}

/// Finds the incoherence to fix next, if any: a face of the diagram (not of
/// the smoothed arrangement) bordered by two arcs of different Seifert
/// circles from the same side. Such arcs can be joined by an embedded band
/// inside the face, so the slide is always performable. Deterministically
/// picks the lexicographically least arc pair, sliding the smaller arc
/// across the larger.
fn pick_slide(mesh: &Mesh, circ: &Circles) -> Option<Slide> {
    let (class, _) = mesh.sector_classes(false);
    let mut groups: BTreeMap<(usize, bool), Vec<usize>> = BTreeMap::new();
    for id in 0..mesh.labels.len() {
        let (t, i) = mesh.tail[id];
        groups
            .entry((class[4 * t + i], false))
            .or_default()
            .push(id);
        groups
            .entry((class[4 * t + (i + 3) % 4], true))
            .or_default()
            .push(id);
    }
    let mut best: Option<(usize, usize, bool)> = None;
    for (&(_, on_right), group) in &groups {
        'pair: for (i, &u) in group.iter().enumerate() {
            for &v in &group[i + 1..] {
                if circ.of[u] != circ.of[v] {
                    if best.map_or(true, |(bu, bv, _)| (u, v) < (bu, bv)) {
                        best = Some((u, v, !on_right));
                    }
                    break 'pair;
                }
            }
        }
    }
    best.map(|(alpha, beta, both_left)| Slide {
        alpha,
        beta,
        both_left,
    })
}

/// Performs the Reidemeister-II arc slide: the middle of `alpha` is pushed
/// over `beta`, splitting each arc in three and adding one positive and one
/// negative crossing. Circle count is preserved and the slid pair becomes
/// coherently nested.
fn apply_slide(
    crossings: &mut Vec<Crossing>,
    next_label: &mut u64,
    mesh: &Mesh,
    slide: Slide,
) {
    let (ha_x, ha_s) = mesh.head[slide.alpha];
    let (hb_x, hb_s) = mesh.head[slide.beta];
    let alpha = mesh.labels[slide.alpha];
    let beta = mesh.labels[slide.beta];
    let [alpha_mid, alpha_end, beta_mid, beta_end] =
        [*next_label, *next_label + 1, *next_label + 2, *next_label + 3];
    *next_label += 4;
    crossings[ha_x].arcs[ha_s] = alpha_end;
    crossings[hb_x].arcs[hb_s] = beta_end;
    if slide.both_left {
        crossings.push(Crossing {
            arcs: [beta_mid, alpha_mid, beta_end, alpha],
            sign: 1,
        });
        crossings.push(Crossing {
            arcs: [beta, alpha_mid, beta_mid, alpha_end],
            sign: -1,
        });
    } else {
        crossings.push(Crossing {
            arcs: [beta_mid, alpha, beta_end, alpha_mid],
            sign: -1,
        });
        crossings.push(Crossing {
            arcs: [beta, alpha_end, beta_mid, alpha_mid],
            sign: 1,
        });
    }
}

/// Reads the braid word off a diagram whose Seifert circles are coherently
/// nested chains (one chain per connected part of the diagram, parts nested
/// innermost-first by smallest arc).
///
/// Strand positions come from the chain order, starting at the end whose
/// circle runs counterclockwise around it (its left face). A seam is chosen
/// just before the anchor crossing of each part and slanted outwards so
/// that cutting there leaves the crossing dependencies acyclic; the word is
/// their topological order, smallest crossing index first among ready ones.
fn read_word(mesh: &Mesh, circ: &Circles, faces: &Faces, sides: &[(usize, usize)]) -> Braid {
    let p = circ.arcs.len();
    let n = mesh.slots.len();

    let mut incident: Vec<Vec<(usize, bool)>> = vec![Vec::new(); faces.count];
    for (c, &(l, r)) in sides.iter().enumerate() {
        incident[l].push((c, true));
        incident[r].push((c, false));
    }

    // Group circles by diagram part, ordered by each part's smallest arc.
    let part_of_circle: Vec<usize> = circ
        .arcs
        .iter()
        .map(|cycle| mesh.part_of_crossing[mesh.head[cycle[0]].0])
        .collect();
    let mut part_order: Vec<usize> = Vec::new();
    for &part in &part_of_circle {
        if !part_order.contains(&part) {
            part_order.push(part);
        }
    }

    // Chain every part from its counterclockwise end outwards.
    let mut position = vec![0usize; p];
    let mut order: Vec<usize> = Vec::new();
    for &part in &part_order {
        let members: Vec<usize> = (0..p).filter(|&c| part_of_circle[c] == part).collect();
        let start_face = (0..faces.count)
            .find(|&f| {
                incident[f].len() == 1
                    && incident[f][0].1
                    && members.contains(&incident[f][0].0)
            })
            .expect("a coherent chain starts at the left face of its innermost circle");
        let mut face = start_face;
        let mut prev = None;
        loop {
            let next: Vec<usize> = incident[face]
                .iter()
                .map(|&(c, _)| c)
                .filter(|&c| Some(c) != prev)
                .collect();
            if next.is_empty() {
                break;
            }
            assert_eq!(next.len(), 1, "Seifert circles do not form a chain");
            let c = next[0];
            position[c] = order.len() + 1;
            order.push(c);
            let (l, r) = sides[c];
            face = if face == l { r } else { l };
            prev = Some(c);
        }
        assert_eq!(
            members.len(),
            members.iter().filter(|&&c| position[c] != 0).count(),
            "chain walk missed a circle"
        );
    }

    // Letters: each crossing joins adjacent chain positions; its sign is the
    // letter sign.
    let letter_of: Vec<i32> = (0..n)
        .map(|x| {
            let c1 = circ.of[mesh.slots[x][0]];
            let c2 = circ.of[mesh.slots[x][2]];
            assert_ne!(c1, c2, "crossing joins a Seifert circle to itself");
            let (lo, hi) = (position[c1].min(position[c2]), position[c1].max(position[c2]));
            assert_eq!(hi, lo + 1, "crossing joins non-adjacent Seifert circles");
            lo as i32 * mesh.signs[x] as i32
        })
        .collect();

    // Seam: cut one arc per circle. Within a part, anchor just before the
    // crossing where the part's smallest arc arrives and slant outwards:
    // each neighbouring circle is cut just before the first crossing shared
    // with it along the flow from the current cut.
    let mut cut_arc = vec![usize::MAX; p];
    let incoming_on = |x: usize, c: usize| -> usize {
        let under = mesh.slots[x][0];
        let over = mesh.slots[x][mesh.over_in(x)];
        if circ.of[under] == c {
            under
        } else {
            assert_eq!(circ.of[over], c, "circle does not pass the crossing");
            over
        }
    };
    let crossing_pair = |x: usize| (circ.of[mesh.slots[x][0]], circ.of[mesh.slots[x][2]]);
    for &part in &part_order {
        let members: Vec<usize> = (0..p).filter(|&c| part_of_circle[c] == part).collect();
        let anchor_arc = members.iter().map(|&c| circ.arcs[c][0]).min().expect("part");
        let x0 = mesh.head[anchor_arc].0;
        let (u, v) = crossing_pair(x0);
        cut_arc[u] = incoming_on(x0, u);
        cut_arc[v] = incoming_on(x0, v);
        let lo = position[u].min(position[v]);
        let hi = position[u].max(position[v]);
        let at = |q: usize| order[q - 1];
        let mut extend = |from: usize, to: usize| {
            let seq = &circ.arcs[from];
            let k0 = seq
                .iter()
                .position(|&a| a == cut_arc[from])
                .expect("cut arc lies on its circle");
            for t in 0..seq.len() {
                let arc = seq[(k0 + t) % seq.len()];
                let y = mesh.head[arc].0;
                let (a, b) = crossing_pair(y);
                if a == to || b == to {
                    cut_arc[to] = incoming_on(y, to);
                    return;
                }
            }
            // No crossing joins the two circles (split sublinks nested by
            // fiat): any cut works, take the smallest arc.
            cut_arc[to] = circ.arcs[to][0];
        };
        let part_lo = members.iter().map(|&c| position[c]).min().expect("part");
        let part_hi = members.iter().map(|&c| position[c]).max().expect("part");
        for q in hi..part_hi {
            extend(at(q), at(q + 1));
        }
        for q in (part_lo + 1..=lo).rev() {
            extend(at(q), at(q - 1));
        }
    }
    let cuts: BTreeSet<usize> = cut_arc.iter().copied().collect();
    assert_eq!(cuts.len(), p, "every circle is cut exactly once");

    // Topological order of crossings with the cut arcs removed.
    let mut in_deg = vec![0usize; n];
    for id in 0..mesh.labels.len() {
        if !cuts.contains(&id) {
            in_deg[mesh.head[id].0] += 1;
        }
    }
    let mut ready: BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&x| in_deg[x] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut letters = Vec::with_capacity(n);
    while let Some(std::cmp::Reverse(x)) = ready.pop() {
        letters.push(letter_of[x]);
        for slot in [2, mesh.over_out(x)] {
            let id = mesh.slots[x][slot];
            if !cuts.contains(&id) {
                in_deg[mesh.head[id].0] -= 1;
                if in_deg[mesh.head[id].0] == 0 {
                    ready.push(std::cmp::Reverse(mesh.head[id].0));
                }
            }
        }
    }
    assert_eq!(letters.len(), n, "crossing order contains a cycle");
    Braid::new(p.max(1), letters).expect("chain positions give valid letters")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::linking_matches_up_to_relabeling;
    use proptest::prelude::*;

    const TREFOIL: &str = "X(1,4,2,5) X(3,6,4,1) X(5,2,6,3)";
    const HOPF: &str = "X(1,3,2,4) X(3,1,4,2)";
    const FIGURE_EIGHT: &str = "X(4,2,5,1) X(2,7,3,8) X(8,6,1,5) X(6,3,7,4)";
    const CINQUEFOIL: &str = "X(6,2,7,1) X(2,8,3,7) X(8,4,9,3) X(4,10,5,9) X(10,6,1,5)";
    const CHAIN: &str = "X(1,4,2,5) X(5,2,6,1) X(8,4,7,3) X(6,8,3,7)";

    fn corpus() -> Vec<(&'static str, &'static str)> {
        vec![
            ("trefoil", TREFOIL),
            ("hopf", HOPF),
            ("figure-eight", FIGURE_EIGHT),
            ("cinquefoil", CINQUEFOIL),
            ("chain", CHAIN),
        ]
    }

    #[test]
    fn parse_reads_a_trefoil_code() {
        let d = parse_pd(TREFOIL).unwrap();
        assert_eq!(d.crossing_count(), 3);
        assert_eq!(d.arc_count(), 6);
        assert!(d.crossings().iter().all(|c| c.sign == -1));
        assert_eq!(d.writhe(), -3);
        assert_eq!(d.components(), vec![vec![1, 2, 3, 4, 5, 6]]);
        assert_eq!(d.linking_matrix(), vec![vec![-3]]);
    }

    #[test]
    fn parse_reads_explicit_sign_tuples() {
        let inferred = parse_pd(HOPF).unwrap();
        assert!(inferred.crossings().iter().all(|c| c.sign == 1));
        let explicit = parse_pd("Xp(1,3,2,4) Xp(3,1,4,2)").unwrap();
        assert_eq!(explicit, inferred);
        assert_eq!(inferred.components(), vec![vec![1, 2], vec![3, 4]]);
        assert_eq!(inferred.linking_matrix(), vec![vec![0, 1], vec![1, 0]]);
        let reparsed = parse_pd(&inferred.to_code()).unwrap();
        assert_eq!(reparsed, inferred);
    }

    #[test]
    fn parse_rejects_arc_coverage_errors() {
        assert!(matches!(parse_pd(""), Err(Error::Parse(_))));
        assert!(matches!(parse_pd("   ,  "), Err(Error::Parse(_))));
        let err = parse_pd("X(1,4,2,5) X(3,6,4,1) X(5,2,6,1)").unwrap_err();
        assert!(err.to_string().contains("arc 1 appears 3"), "{err}");
        let err = parse_pd("X(1,2,3)").unwrap_err();
        assert!(err.to_string().contains("four arc labels"), "{err}");
        assert!(parse_pd("Y(1,2,3,4)").is_err());
        assert!(parse_pd("X(1,2,3,4").is_err());
    }

    #[test]
    fn parse_rejects_inconsistent_orientations() {
        // Trefoil with one tuple's under-strand arcs swapped: some arc ends
        // up entering twice.
        let err = parse_pd("X(2,4,1,5) X(3,6,4,1) X(5,2,6,3)").unwrap_err();
        assert!(err.to_string().contains("oriented consistently"), "{err}");
        // Explicit signs that contradict the only consistent orientation.
        let err = parse_pd("Xm(1,3,2,4) Xm(3,1,4,2)").unwrap_err();
        assert!(err.to_string().contains("oriented consistently"), "{err}");
    }

    #[test]
    fn parse_rejects_unplanar_rotation_data() {
        // Two closed curves that would meet in a single point.
        let err = parse_pd("X(1,2,1,2)").unwrap_err();
        assert!(err.to_string().contains("planar"), "{err}");
    }

    #[test]
    fn seifert_circles_of_small_codes() {
        let trefoil = seifert_circles(&parse_pd(TREFOIL).unwrap());
        assert_eq!(trefoil.circles, vec![vec![1, 5, 3], vec![2, 6, 4]]);
        assert_eq!(trefoil.adjacency, vec![(0, 1), (0, 1), (0, 1)]);

        let hopf = seifert_circles(&parse_pd(HOPF).unwrap());
        assert_eq!(hopf.circles, vec![vec![1, 3], vec![2, 4]]);
        assert_eq!(hopf.adjacency, vec![(0, 1), (0, 1)]);

        let chain = seifert_circles(&parse_pd(CHAIN).unwrap());
        assert_eq!(
            chain.circles,
            vec![vec![1, 5], vec![2, 6, 8, 4], vec![3, 7]]
        );

        let fig8 = seifert_circles(&parse_pd(FIGURE_EIGHT).unwrap());
        assert_eq!(fig8.circles.len(), 3);
        let cinq = seifert_circles(&parse_pd(CINQUEFOIL).unwrap());
        assert_eq!(cinq.circles, vec![vec![1, 7, 3, 9, 5], vec![2, 8, 4, 10, 6]]);
    }

    #[test]
    fn closed_braid_codes_reduce_without_slides() {
        for (code, want) in [
            (TREFOIL, "2: -1 -1 -1"),
            (HOPF, "2: 1 1"),
            (FIGURE_EIGHT, "3: 1 -2 1 -2"),
            (CINQUEFOIL, "2: 1 1 1 1 1"),
            ("X(1,1,2,2)", "2: 1"),
        ] {
            let out = vogel_braid(&parse_pd(code).unwrap());
            assert_eq!(out.operations, 0, "{code}");
            assert_eq!(out.word, Braid::parse(want).unwrap(), "{code}");
        }
    }

    #[test]
    fn chain_code_needs_one_slide() {
        let d = parse_pd(CHAIN).unwrap();
        assert_eq!(
            d.linking_matrix(),
            vec![vec![0, -1, 0], vec![-1, 0, 1], vec![0, 1, 0]]
        );
        let out = vogel_braid(&d);
        assert_eq!(out.operations, 1);
        assert_eq!(out.input_circles, 3);
        assert_eq!(out.word.strands(), 3);
        assert_eq!(out.word.letters().len(), 6);
        assert_eq!(out.word.writhe(), 0);
        let info = out.word.closure_info();
        assert_eq!(info.component_count(), 3);
        assert_eq!(info.cycle_type(), vec![1, 1, 1]);
        assert!(linking_matches_up_to_relabeling(
            &d.linking_matrix(),
            &info.linking
        ));
    }

    #[test]
    fn mirrored_chain_code_slides_from_the_other_side() {
        // Reflecting the plane reverses the tuples' rotational order and
        // negates every sign, so the reduction works on left sides instead
        // of right sides.
        let d = parse_pd("X(1,5,2,4) X(5,1,6,2) X(8,3,7,4) X(6,7,3,8)").unwrap();
        assert_eq!(d.writhe(), 0);
        assert_eq!(
            d.linking_matrix(),
            vec![vec![0, 1, 0], vec![1, 0, -1], vec![0, -1, 0]]
        );
        let out = vogel_braid(&d);
        assert_eq!(out.operations, 1);
        assert_eq!(out.word.strands(), 3);
        assert_eq!(out.word.letters().len(), 6);
        assert_eq!(out.word.writhe(), 0);
        let info = out.word.closure_info();
        assert_eq!(info.component_count(), 3);
        assert!(linking_matches_up_to_relabeling(
            &d.linking_matrix(),
            &info.linking
        ));
    }

    #[test]
    fn split_codes_nest_into_disjoint_strand_ranges() {
        let two = "X(1,4,2,5) X(3,6,4,1) X(5,2,6,3) X(7,10,8,11) X(9,12,10,7) X(11,8,12,9)";
        let out = vogel_braid(&parse_pd(two).unwrap());
        assert_eq!(out.operations, 0);
        assert_eq!(out.word, Braid::parse("4: -1 -1 -1 -3 -3 -3").unwrap());
    }

    #[test]
    fn reduction_preserves_components_and_linking() {
        for (name, code) in corpus() {
            let d = parse_pd(code).unwrap();
            let out = vogel_braid(&d);
            let info = out.word.closure_info();
            assert_eq!(
                info.component_count(),
                d.components().len(),
                "{name}: component count"
            );
            assert!(
                linking_matches_up_to_relabeling(&d.linking_matrix(), &info.linking),
                "{name}: linking matrix"
            );
            let p = out.input_circles;
            assert!(out.operations <= (p - 1) * (p - 2) / 2, "{name}: slides");
            assert!(
                out.word.letters().len() <= d.crossing_count() + (p - 1) * (p - 2),
                "{name}: letters"
            );
        }
    }

    /// Encodes the closure of a braid word as a planar code with explicit
    /// signs, one tuple per letter, tracks numbered innermost-first.
    fn closure_code(word: &Braid) -> String {
        let s = word.strands();
        let mut cur: Vec<u64> = (1..=s as u64).collect();
        let mut next = s as u64 + 1;
        let mut tuples: Vec<(i8, [u64; 4])> = Vec::new();
        for &l in word.letters() {
            let i = l.unsigned_abs() as usize - 1;
            let (n1, n2) = (next, next + 1);
            next += 2;
            if l > 0 {
                tuples.push((1, [cur[i + 1], n2, n1, cur[i]]));
            } else {
                tuples.push((-1, [cur[i], cur[i + 1], n2, n1]));
            }
            cur[i] = n1;
            cur[i + 1] = n2;
        }
        let rename: BTreeMap<u64, u64> = cur.into_iter().zip(1..=s as u64).collect();
        tuples
            .iter()
            .map(|&(sign, arcs)| {
                let named: Vec<String> = arcs
                    .iter()
                    .map(|a| rename.get(a).copied().unwrap_or(*a).to_string())
                    .collect();
                format!("X{}({})", if sign > 0 { "p" } else { "m" }, named.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn closure_codes_of_known_words_round_trip() {
        let word = Braid::parse("3: 1 -2 1 -2").unwrap();
        let d = parse_pd(&closure_code(&word)).unwrap();
        let out = vogel_braid(&d);
        assert_eq!(out.operations, 0);
        assert_eq!(out.word.strands(), 3);
        assert_eq!(out.word.writhe(), 0);
        assert_eq!(
            out.word.closure_info().cycle_type(),
            word.closure_info().cycle_type()
        );
    }

    /// Words covering every generator at least once, so the closure code
    /// mentions every track.
    fn covering_word() -> impl Strategy<Value = Braid> {
        (2usize..=5).prop_flat_map(|s| {
            (
                proptest::collection::vec(any::<bool>(), s - 1),
                proptest::collection::vec((1..s, any::<bool>()), 0..6),
            )
                .prop_map(move |(base_neg, extra)| {
                    let mut letters: Vec<i32> = base_neg
                        .iter()
                        .enumerate()
                        .map(|(k, &neg)| if neg { -(k as i32 + 1) } else { k as i32 + 1 })
                        .collect();
                    letters.extend(
                        extra
                            .iter()
                            .map(|&(i, neg)| if neg { -(i as i32) } else { i as i32 }),
                    );
                    Braid::new(s, letters).expect("valid generator indices")
                })
        })
    }

    proptest! {
        #[test]
        fn closure_codes_parse_back_to_equivalent_words(word in covering_word()) {
            let d = parse_pd(&closure_code(&word)).unwrap();
            let circles = seifert_circles(&d);
            prop_assert_eq!(circles.circles.len(), word.strands());
            let out = vogel_braid(&d);
            prop_assert_eq!(out.operations, 0);
            prop_assert_eq!(out.word.strands(), word.strands());
            prop_assert_eq!(out.word.letters().len(), word.letters().len());
            prop_assert_eq!(out.word.writhe(), word.writhe());
            let want = word.closure_info();
            let got = out.word.closure_info();
            prop_assert_eq!(got.cycle_type(), want.cycle_type());
            prop_assert!(linking_matches_up_to_relabeling(&want.linking, &got.linking));
        }

        #[test]
        fn parser_never_panics(text in "[Xpm(),\\[\\] 0-9]{0,60}") {
            let _ = parse_pd(&text);
        }
    }
}

