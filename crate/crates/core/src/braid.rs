//! Braid words and their closures.
//!
//! A braid word on `n` strands is a sequence of signed letters; letter `±i`
//! (with `1 ≤ i < n`) crosses the strands currently on tracks `i` and `i+1`,
//! the strand on track `i` passing over for `+i` and under for `-i`. Strands
//! and tracks are numbered from 1, with track 1 innermost once the closure is
//! laid out on an annulus.
//!
//! Besides parsing/printing and the underlying permutation, this module
//! computes closure invariants (components, cycle type, linking matrix) and
//! implements the loop augmentation [`Braid::add_component_loops`], which
//! gives every closure component one extra strand reaching past all original
//! tracks. The added strands are recorded as *elder strands*.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A permutation of `{0, …, n-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { map: (0..n).collect() }
    }

    /// Builds a permutation from its one-line form; `map[i]` is the image of
    /// `i`. Fails if `map` is not a bijection.
    pub fn from_map(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::Invalid(format!("not a permutation: {map:?}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    /// Functional composition: the returned permutation applies `first`, then
    /// `self`.
    pub fn compose(&self, first: &Permutation) -> Permutation {
        assert_eq!(self.len(), first.len());
        Permutation { map: (0..self.len()).map(|i| self.map[first.map[i]]).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// Cycle decomposition. Each cycle starts at its smallest element and the
    /// cycles are ordered by smallest element; fixed points are included.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.map[start];
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.map[cur];
            }
            out.push(cycle);
        }
        out
    }

    /// Cycle lengths, sorted descending.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    /// Multiplicative order (least common multiple of the cycle lengths).
    pub fn order(&self) -> u64 {
        self.cycles().iter().map(|c| c.len() as u64).fold(1, lcm)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

/// One crossing of a braid word, with the strands that participate in it.
///
/// `position` is the track index `i` of the letter (`±i`): the crossing swaps
/// the strands on tracks `i` and `i+1`. `inner_strand` is the strand on track
/// `i` just before the crossing, `outer_strand` the one on track `i+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingRecord {
    pub letter_index: usize,
    pub position: usize,
    pub sign: i8,
    pub inner_strand: usize,
    pub outer_strand: usize,
}

impl CrossingRecord {
    /// The strand passing over: the inner strand for a positive crossing.
    pub fn over_strand(&self) -> usize {
        if self.sign > 0 {
            self.inner_strand
        } else {
            self.outer_strand
        }
    }

    pub fn under_strand(&self) -> usize {
        if self.sign > 0 {
            self.outer_strand
        } else {
            self.inner_strand
        }
    }
}

/// Closure invariants of a braid word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureInfo {
    /// Strand sets of the closure components. Each is sorted ascending and
    /// the components are ordered by their smallest strand.
    pub components: Vec<Vec<usize>>,
    /// `linking[a][b]` for `a ≠ b` is the linking number of components `a`
    /// and `b`; `linking[a][a]` is the signed self-crossing count (diagram
    /// writhe) of component `a`.
    pub linking: Vec<Vec<i64>>,
}

impl ClosureInfo {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Component sizes, sorted descending.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.components.iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    /// Index (into `components`) of the component containing `strand`.
    pub fn component_of(&self, strand: usize) -> Option<usize> {
        self.components.iter().position(|c| c.binary_search(&strand).is_ok())
    }
}

/// A braid word on a fixed number of strands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Braid {
    strands: usize,
    letters: Vec<i32>,
    /// Strands introduced by [`Braid::add_component_loops`]; empty for words
    /// built directly from input.
    #[serde(default)]
    elder_strands: Vec<usize>,
}

impl Braid {
    pub fn new(strands: usize, letters: Vec<i32>) -> Result<Self> {
        let b = Braid { strands, letters, elder_strands: Vec::new() };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        if self.strands == 0 {
            return Err(Error::Invalid("braid must have at least one strand".into()));
        }
        for &l in &self.letters {
            let idx = l.unsigned_abs() as usize;
            if l == 0 || idx + 1 > self.strands {
                return Err(Error::Invalid(format!(
                    "letter {l} out of range for {} strands",
                    self.strands
                )));
            }
        }
        for &e in &self.elder_strands {
            if e == 0 || e > self.strands {
                return Err(Error::Invalid(format!("elder strand {e} out of range")));
            }
        }
        Ok(())
    }

    /// Parses the compact notation `"n: l1 l2 …"`, e.g. `"3: 1 1 1"` for the
    /// trefoil closure. The letter list may be empty (`"2:"`).
    pub fn parse(text: &str) -> Result<Self> {
        let (head, tail) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected \"n: letters\", got {text:?}")))?;
        let strands: usize = head
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad strand count {:?}", head.trim())))?;
        let mut letters = Vec::new();
        for tok in tail.split_whitespace() {
            let l: i32 =
                tok.parse().map_err(|_| Error::Parse(format!("bad letter {tok:?}")))?;
            letters.push(l);
        }
        Braid::new(strands, letters)
    }

    /// The closed chain on `k+1` strands whose word is `σ1 σ2 … σk`: each
    /// strand dives under its outward neighbour once, and the innermost
    /// strand climbs past all others, closing the loop around the annulus.
    pub fn ouroboros(k: usize) -> Self {
        Braid {
            strands: k + 1,
            letters: (1..=k as i32).collect(),
            elder_strands: Vec::new(),
        }
    }

    pub fn strands(&self) -> usize {
        self.strands
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn elder_strands(&self) -> &[usize] {
        &self.elder_strands
    }

    pub fn writhe(&self) -> i64 {
        self.letters.iter().map(|&l| l.signum() as i64).sum()
    }

    /// The permutation taking each strand's starting track to its ending
    /// track (0-based: strand `i+1` starts on track `i`).
    pub fn underlying_permutation(&self) -> Permutation {
        // pos[t] = strand currently on track t (0-based).
        let mut pos: Vec<usize> = (0..self.strands).collect();
        for &l in &self.letters {
            let i = l.unsigned_abs() as usize - 1;
            pos.swap(i, i + 1);
        }
        let mut map = vec![0; self.strands];
        for (track, &strand) in pos.iter().enumerate() {
            map[strand] = track;
        }
        Permutation { map }
    }

    /// Every crossing of the word together with the strands involved in it,
    /// in word order.
    pub fn crossing_records(&self) -> Vec<CrossingRecord> {
        let mut pos: Vec<usize> = (0..self.strands).collect();
        let mut out = Vec::with_capacity(self.letters.len());
        for (letter_index, &l) in self.letters.iter().enumerate() {
            let i = l.unsigned_abs() as usize - 1;
            out.push(CrossingRecord {
                letter_index,
                position: i + 1,
                sign: l.signum() as i8,
                inner_strand: pos[i] + 1,
                outer_strand: pos[i + 1] + 1,
            });
            pos.swap(i, i + 1);
        }
        out
    }

    /// Components and linking matrix of the braid closure.
    pub fn closure_info(&self) -> ClosureInfo {
        let perm = self.underlying_permutation();
        let mut components: Vec<Vec<usize>> = perm
            .cycles()
            .into_iter()
            .map(|c| {
                let mut strands: Vec<usize> = c.into_iter().map(|i| i + 1).collect();
                strands.sort_unstable();
                strands
            })
            .collect();
        components.sort_by_key(|c| c[0]);

        let comp_of = |strand: usize| {
            components
                .iter()
                .position(|c| c.binary_search(&strand).is_ok())
                .expect("every strand lies in a component")
        };

        let k = components.len();
        // Accumulate signed crossing counts; distinct-component entries are
        // halved at the end (each pair of components crosses an even number
        // of times in a closed diagram).
        let mut acc = vec![vec![0i64; k]; k];
        for rec in self.crossing_records() {
            let a = comp_of(rec.inner_strand);
            let b = comp_of(rec.outer_strand);
            if a == b {
                acc[a][a] += rec.sign as i64;
            } else {
                acc[a][b] += rec.sign as i64;
                acc[b][a] += rec.sign as i64;
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
        ClosureInfo { components, linking: acc }
    }

    /// Appends, for each closure component, a band that routes one new strand
    /// from a fresh outermost track down to the component and back: the new
    /// strand dives under each intervening track (a cancelling crossing pair
    /// per track, so no linking number changes), splices onto the component
    /// with a single positive kink crossing, and the displaced strand rides
    /// back out.
    ///
    /// Components are ordered by smallest strand; component `c` (1-based)
    /// receives new strand `s + c` where `s` is the current strand count. The
    /// new strands are recorded as elder strands. The closure's component
    /// count and linking matrix are unchanged.
    pub fn add_component_loops(&self) -> Braid {
        let info = self.closure_info();
        let s = self.strands;
        let k = info.component_count();
        let mut letters = self.letters.clone();
        for (c, comp) in info.components.iter().enumerate() {
            let q = s + c + 1; // new strand / track for this component
            let p = *comp.iter().max().expect("components are nonempty");
            for j in (p + 1..q).rev() {
                letters.push(j as i32); // dive inward under track j
            }
            letters.push(p as i32); // splice onto the component
            for j in p + 1..q {
                letters.push(-(j as i32)); // ride back out
            }
        }
        let mut elder_strands = self.elder_strands.clone();
        elder_strands.extend(s + 1..=s + k);
        let out = Braid { strands: s + k, letters, elder_strands };
        debug_assert!(out.validate().is_ok());
        out
    }
}

impl fmt::Display for Braid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.strands)?;
        for l in &self.letters {
            write!(f, " {l}")?;
        }
        Ok(())
    }
}
